//! Flat-file ingestion.
//!
//! Three UTF-8 CSV files with a header row: start-ups, persons and
//! investments. Column names are configurable through [`ColumnMap`]. Dates
//! are ISO-8601 (`YYYY-MM-DD`). Multi-valued cells (investor lists,
//! affiliations) are `;`-separated; an affiliation is `company_id@date`.
//!
//! Node ids are assigned from the data: a node appears in the month of its
//! earliest dated activity, and ids are dense in (month, kind, external id)
//! order. Dropping every record after some date therefore keeps the ids of
//! all surviving nodes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::graph::{
    Calendar, DealType, Degree, EdgeKind, FundingRound, Gender, GraphError, GraphEvent, Industry, NodeId,
    NodeKind, Outcome, PersonRecord, Sector, StartUpRecord, TemporalGraph,
};

pub const STARTUPS_FILE: &str = "startups.csv";
pub const PERSONS_FILE: &str = "persons.csv";
pub const INVESTMENTS_FILE: &str = "investments.csv";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{file}: missing column '{column}'")]
    MissingColumn { file: String, column: String },
    #[error("{file} line {line}: {message}")]
    MalformedRecord { file: String, line: u64, message: String },
    #[error("unknown {kind} id '{id}'")]
    UnknownReference { kind: &'static str, id: String },
    #[error("duplicate {kind} id '{id}'")]
    DuplicateId { kind: &'static str, id: String },
    #[error("start-up '{id}' has an outcome dated before its first funding")]
    OutcomeBeforeFunding { id: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StartupColumns {
    pub id: String,
    pub name: String,
    pub founded: String,
    pub sector: String,
    pub label: String,
    pub detail: String,
    pub latitude: String,
    pub longitude: String,
    pub country: String,
    pub outcome: String,
    pub outcome_date: String,
}

impl Default for StartupColumns {
    fn default() -> Self {
        Self {
            id: "company_id".into(),
            name: "name".into(),
            founded: "founded".into(),
            sector: "industry_sector".into(),
            label: "industry_group".into(),
            detail: "industry_code".into(),
            latitude: "latitude".into(),
            longitude: "longitude".into(),
            country: "country".into(),
            outcome: "outcome".into(),
            outcome_date: "outcome_date".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonColumns {
    pub id: String,
    pub name: String,
    pub gender: String,
    pub degree: String,
    pub institute: String,
    pub year: String,
    pub affiliations: String,
}

impl Default for PersonColumns {
    fn default() -> Self {
        Self {
            id: "person_id".into(),
            name: "name".into(),
            gender: "gender".into(),
            degree: "education_degree".into(),
            institute: "graduated_institute".into(),
            year: "graduated_year".into(),
            affiliations: "affiliations".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InvestmentColumns {
    pub deal_id: String,
    pub company: String,
    pub date: String,
    pub deal_type: String,
    pub amount: String,
    pub investors: String,
}

impl Default for InvestmentColumns {
    fn default() -> Self {
        Self {
            deal_id: "deal_id".into(),
            company: "company_id".into(),
            date: "deal_date".into(),
            deal_type: "deal_type".into(),
            amount: "deal_size".into(),
            investors: "investors".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub startups: StartupColumns,
    pub persons: PersonColumns,
    pub investments: InvestmentColumns,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawStartup {
    pub id: String,
    pub name: String,
    pub founded: NaiveDate,
    pub sector: Option<Sector>,
    pub label: String,
    pub detail: String,
    pub location: Option<(f64, f64)>,
    pub country: String,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawPerson {
    pub id: String,
    pub name: String,
    pub gender: Gender,
    pub degree: Degree,
    pub institute: Option<String>,
    pub year: Option<i32>,
    pub affiliations: Vec<(String, NaiveDate)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawInvestment {
    pub deal_id: String,
    pub company: String,
    pub date: NaiveDate,
    pub deal_type: DealType,
    pub amount: Option<f64>,
    pub investors: Vec<String>,
}

/// The three ingestion tables as read from disk.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawData {
    pub startups: Vec<RawStartup>,
    pub persons: Vec<RawPerson>,
    pub investments: Vec<RawInvestment>,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

fn fmt_date(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn opt_f64(s: &str) -> Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(Some(v))
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').map(str::trim).filter(|x| !x.is_empty())
}

struct Table {
    path: String,
    headers: HashMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, DataError> {
        let name = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|source| DataError::Csv { path: name.clone(), source })?;
        let headers = rdr
            .headers()
            .map_err(|source| DataError::Csv { path: name.clone(), source })?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|source| DataError::Csv { path: name.clone(), source })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Self { path: name, headers, rows })
    }

    fn col(&self, name: &str) -> Result<usize, DataError> {
        self.headers
            .get(name)
            .copied()
            .ok_or_else(|| DataError::MissingColumn { file: self.path.clone(), column: name.to_string() })
    }

    /// Optional column: absent columns read as empty cells.
    fn opt_col(&self, name: &str) -> Option<usize> {
        self.headers.get(name).copied()
    }

    fn bad(&self, line: u64, message: impl Into<String>) -> DataError {
        DataError::MalformedRecord { file: self.path.clone(), line, message: message.into() }
    }
}

fn cell<'a>(rec: &'a csv::StringRecord, col: Option<usize>) -> &'a str {
    col.and_then(|c| rec.get(c)).unwrap_or("")
}

impl RawData {
    pub fn read_dir(dir: &Path, columns: &ColumnMap) -> Result<Self, DataError> {
        let startups = read_startups(&dir.join(STARTUPS_FILE), &columns.startups)?;
        let persons = read_persons(&dir.join(PERSONS_FILE), &columns.persons)?;
        let investments = read_investments(&dir.join(INVESTMENTS_FILE), &columns.investments)?;
        Ok(Self { startups, persons, investments })
    }

    /// Writes the three files with the default column names.
    pub fn write_dir(&self, dir: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.display().to_string(), source })?;
        let c = ColumnMap::default();
        let path = dir.join(STARTUPS_FILE);
        let mut w = writer(&path)?;
        let s = &c.startups;
        let header = [
            &s.id, &s.name, &s.founded, &s.sector, &s.label, &s.detail, &s.latitude, &s.longitude, &s.country,
            &s.outcome, &s.outcome_date,
        ];
        write_row(&mut w, &path, header.iter().map(|h| h.as_str()))?;
        for r in &self.startups {
            let (lat, lon) = r.location.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
            let (kind, date) = match r.outcome {
                Outcome::Ipo(d) => ("IPO", fmt_date(d)),
                Outcome::Acquired(d) => ("Acquired", fmt_date(d)),
                Outcome::None => ("", String::new()),
            };
            let sector = r.sector.map_or("", Sector::name);
            let founded = fmt_date(r.founded);
            let row = [&r.id, &r.name, &founded, sector, &r.label, &r.detail, &lat, &lon, &r.country, kind, &date];
            write_row(&mut w, &path, row.iter().map(|x| &**x))?;
        }
        flush(w, &path)?;

        let path = dir.join(PERSONS_FILE);
        let mut w = writer(&path)?;
        let p = &c.persons;
        let header = [&p.id, &p.name, &p.gender, &p.degree, &p.institute, &p.year, &p.affiliations];
        write_row(&mut w, &path, header.iter().map(|h| h.as_str()))?;
        for r in &self.persons {
            let aff: Vec<String> = r.affiliations.iter().map(|(c, d)| format!("{c}@{}", fmt_date(*d))).collect();
            let year = r.year.map(|y| y.to_string()).unwrap_or_default();
            let row = [
                r.id.as_str(),
                &r.name,
                r.gender.name(),
                r.degree.name(),
                r.institute.as_deref().unwrap_or(""),
                &year,
                &aff.join(";"),
            ];
            write_row(&mut w, &path, row.into_iter())?;
        }
        flush(w, &path)?;

        let path = dir.join(INVESTMENTS_FILE);
        let mut w = writer(&path)?;
        let v = &c.investments;
        let header = [&v.deal_id, &v.company, &v.date, &v.deal_type, &v.amount, &v.investors];
        write_row(&mut w, &path, header.iter().map(|h| h.as_str()))?;
        for r in &self.investments {
            let amount = r.amount.map(|a| a.to_string()).unwrap_or_default();
            let date = fmt_date(r.date);
            let row = [r.deal_id.as_str(), &r.company, &date, r.deal_type.name(), &amount, &r.investors.join(";")];
            write_row(&mut w, &path, row.into_iter())?;
        }
        flush(w, &path)
    }

    /// Drops everything dated after `last`: later rounds and affiliations,
    /// and outcomes not yet observed by then.
    pub fn truncate(&self, last: NaiveDate) -> RawData {
        let startups = self
            .startups
            .iter()
            .map(|s| {
                let mut s = s.clone();
                if s.outcome.date().is_some_and(|d| d > last) {
                    s.outcome = Outcome::None;
                }
                s
            })
            .collect();
        let persons = self
            .persons
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.affiliations.retain(|(_, d)| *d <= last);
                p
            })
            .collect();
        let investments = self.investments.iter().filter(|i| i.date <= last).cloned().collect();
        RawData { startups, persons, investments }
    }

    /// Latest date mentioned anywhere in the tables.
    pub fn last_date(&self) -> Option<NaiveDate> {
        let a = self.startups.iter().filter_map(|s| s.outcome.date());
        let b = self.persons.iter().flat_map(|p| p.affiliations.iter().map(|(_, d)| *d));
        let c = self.investments.iter().map(|i| i.date);
        a.chain(b).chain(c).max()
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, DataError> {
    csv::Writer::from_path(path).map_err(|source| DataError::Csv { path: path.display().to_string(), source })
}

fn write_row<'a>(w: &mut csv::Writer<std::fs::File>, path: &Path, row: impl Iterator<Item = &'a str>) -> Result<(), DataError> {
    w.write_record(row).map_err(|source| DataError::Csv { path: path.display().to_string(), source })
}

fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), DataError> {
    w.flush().map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

fn read_startups(path: &Path, c: &StartupColumns) -> Result<Vec<RawStartup>, DataError> {
    let t = Table::read(path)?;
    let id = t.col(&c.id)?;
    let founded = t.col(&c.founded)?;
    let (name, sector, label, detail) = (t.opt_col(&c.name), t.opt_col(&c.sector), t.opt_col(&c.label), t.opt_col(&c.detail));
    let (lat, lon, country) = (t.opt_col(&c.latitude), t.opt_col(&c.longitude), t.opt_col(&c.country));
    let (outcome, outcome_date) = (t.opt_col(&c.outcome), t.opt_col(&c.outcome_date));
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let ext = cell(rec, Some(id)).to_string();
        if ext.is_empty() {
            return Err(t.bad(line, "empty start-up id"));
        }
        let founded = parse_date(cell(rec, Some(founded))).ok_or_else(|| t.bad(line, "bad founding date"))?;
        let location = match (opt_f64(cell(rec, lat)), opt_f64(cell(rec, lon))) {
            (Ok(Some(a)), Ok(Some(b))) => Some((a, b)),
            (Ok(_), Ok(_)) => None,
            (Err(e), _) | (_, Err(e)) => return Err(t.bad(line, e)),
        };
        let kind = cell(rec, outcome).to_ascii_lowercase();
        let date = cell(rec, outcome_date);
        let outcome = match kind.as_str() {
            "" | "none" => Outcome::None,
            "ipo" | "acquired" | "acquisition" | "merger" => {
                let d = parse_date(date).ok_or_else(|| t.bad(line, "outcome without a valid date"))?;
                if kind == "ipo" {
                    Outcome::Ipo(d)
                } else {
                    Outcome::Acquired(d)
                }
            }
            other => return Err(t.bad(line, format!("unknown outcome '{other}'"))),
        };
        out.push(RawStartup {
            id: ext,
            name: cell(rec, name).to_string(),
            founded,
            sector: Sector::parse(cell(rec, sector)),
            label: cell(rec, label).to_string(),
            detail: cell(rec, detail).to_string(),
            location,
            country: cell(rec, country).to_string(),
            outcome,
        });
    }
    Ok(out)
}

fn read_persons(path: &Path, c: &PersonColumns) -> Result<Vec<RawPerson>, DataError> {
    let t = Table::read(path)?;
    let id = t.col(&c.id)?;
    let (name, gender, degree) = (t.opt_col(&c.name), t.opt_col(&c.gender), t.opt_col(&c.degree));
    let (institute, year, aff) = (t.opt_col(&c.institute), t.opt_col(&c.year), t.opt_col(&c.affiliations));
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let ext = cell(rec, Some(id)).to_string();
        if ext.is_empty() {
            return Err(t.bad(line, "empty person id"));
        }
        let year = match cell(rec, year) {
            "" => None,
            y => Some(y.parse::<i32>().map_err(|_| t.bad(line, format!("bad graduation year '{y}'")))?),
        };
        let mut affiliations = Vec::new();
        for a in list(cell(rec, aff)) {
            let (company, date) = a.rsplit_once('@').ok_or_else(|| t.bad(line, format!("bad affiliation '{a}'")))?;
            let date = parse_date(date).ok_or_else(|| t.bad(line, format!("bad affiliation date in '{a}'")))?;
            affiliations.push((company.trim().to_string(), date));
        }
        let institute = Some(cell(rec, institute).to_string()).filter(|s| !s.is_empty());
        out.push(RawPerson {
            id: ext,
            name: cell(rec, name).to_string(),
            gender: Gender::parse(cell(rec, gender)),
            degree: Degree::parse(cell(rec, degree)),
            institute,
            year,
            affiliations,
        });
    }
    Ok(out)
}

fn read_investments(path: &Path, c: &InvestmentColumns) -> Result<Vec<RawInvestment>, DataError> {
    let t = Table::read(path)?;
    let deal = t.col(&c.deal_id)?;
    let company = t.col(&c.company)?;
    let date = t.col(&c.date)?;
    let (deal_type, amount, investors) = (t.opt_col(&c.deal_type), t.opt_col(&c.amount), t.opt_col(&c.investors));
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let date = parse_date(cell(rec, Some(date))).ok_or_else(|| t.bad(line, "bad deal date"))?;
        let amount = opt_f64(cell(rec, amount)).map_err(|e| t.bad(line, e))?;
        if amount.is_some_and(|a| a < 0.0) {
            return Err(t.bad(line, "negative deal size"));
        }
        out.push(RawInvestment {
            deal_id: cell(rec, Some(deal)).to_string(),
            company: cell(rec, Some(company)).to_string(),
            date,
            deal_type: DealType::parse(cell(rec, deal_type)),
            amount,
            investors: list(cell(rec, investors)).map(str::to_string).collect(),
        });
    }
    Ok(out)
}

/// Ingested data: typed records plus the dated event stream of the graph.
/// Only entities with at least one dated activity become nodes.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub calendar: Calendar,
    /// Sorted by node id.
    pub startups: Vec<StartUpRecord>,
    /// Sorted by node id.
    pub persons: Vec<PersonRecord>,
    pub events: Vec<GraphEvent>,
    kinds: Vec<NodeKind>,
    slot: Vec<usize>,
}

impl Dataset {
    pub fn from_raw(raw: &RawData, calendar: Calendar) -> Result<Self, DataError> {
        let mut startup_ix: HashMap<&str, usize> = HashMap::new();
        for (i, s) in raw.startups.iter().enumerate() {
            if startup_ix.insert(&s.id, i).is_some() {
                return Err(DataError::DuplicateId { kind: "start-up", id: s.id.clone() });
            }
        }
        let mut person_ix: HashMap<&str, usize> = HashMap::new();
        for (i, p) in raw.persons.iter().enumerate() {
            if person_ix.insert(&p.id, i).is_some() {
                return Err(DataError::DuplicateId { kind: "person", id: p.id.clone() });
            }
        }
        let startup_of = |id: &str| {
            startup_ix.get(id).copied().ok_or_else(|| DataError::UnknownReference { kind: "start-up", id: id.to_string() })
        };
        let person_of = |id: &str| {
            person_ix.get(id).copied().ok_or_else(|| DataError::UnknownReference { kind: "person", id: id.to_string() })
        };

        // Dated relations as (month, person slot, start-up slot, kind).
        let mut relations = Vec::new();
        let mut first_s: Vec<Option<i64>> = vec![None; raw.startups.len()];
        let mut first_p: Vec<Option<i64>> = vec![None; raw.persons.len()];
        let touch = |v: &mut Option<i64>, m: i64| *v = Some(v.map_or(m, |x| x.min(m)));
        for inv in &raw.investments {
            let s = startup_of(&inv.company)?;
            let m = calendar.month_index(inv.date);
            touch(&mut first_s[s], m);
            for p in &inv.investors {
                let p = person_of(p)?;
                touch(&mut first_p[p], m);
                relations.push((m, p, s, EdgeKind::Invest));
            }
        }
        for (p, person) in raw.persons.iter().enumerate() {
            for (company, date) in &person.affiliations {
                let s = startup_of(company)?;
                let m = calendar.month_index(*date);
                touch(&mut first_s[s], m);
                touch(&mut first_p[p], m);
                relations.push((m, p, s, EdgeKind::Employ));
            }
        }

        let mut order: Vec<(i64, NodeKind, &str, usize)> = Vec::new();
        for (i, m) in first_p.iter().enumerate() {
            if let Some(m) = m {
                order.push((*m, NodeKind::Person, &raw.persons[i].id, i));
            }
        }
        for (i, m) in first_s.iter().enumerate() {
            if let Some(m) = m {
                order.push((*m, NodeKind::StartUp, &raw.startups[i].id, i));
            }
        }
        let kind_rank = |k: NodeKind| matches!(k, NodeKind::StartUp) as u8;
        order.sort_by(|a, b| (a.0, kind_rank(a.1), a.2).cmp(&(b.0, kind_rank(b.1), b.2)));

        let mut person_node = vec![None; raw.persons.len()];
        let mut startup_node = vec![None; raw.startups.len()];
        let mut events = Vec::with_capacity(order.len() + relations.len());
        let mut kinds = Vec::with_capacity(order.len());
        for (n, &(month, kind, _, i)) in order.iter().enumerate() {
            let id = NodeId(n as u32);
            match kind {
                NodeKind::Person => person_node[i] = Some(id),
                NodeKind::StartUp => startup_node[i] = Some(id),
            }
            kinds.push(kind);
            events.push(GraphEvent::Node { id, kind, month });
        }
        relations.sort_by_key(|&(m, p, s, k)| (m, person_node[p], startup_node[s], k));
        relations.dedup();
        for &(month, p, s, kind) in &relations {
            let person = person_node[p].expect("related person has a node");
            let startup = startup_node[s].expect("related start-up has a node");
            events.push(GraphEvent::Edge { person, startup, kind, month });
        }
        events.sort_by_key(|e| (e.month(), matches!(e, GraphEvent::Edge { .. })));

        let mut rounds: Vec<Vec<FundingRound>> = vec![Vec::new(); raw.startups.len()];
        for inv in &raw.investments {
            let s = startup_of(&inv.company)?;
            let mut investors: Vec<NodeId> =
                inv.investors.iter().map(|p| person_node[person_ix[p.as_str()]].expect("investor has a node")).collect();
            investors.sort();
            investors.dedup();
            rounds[s].push(FundingRound {
                deal_id: inv.deal_id.clone(),
                date: inv.date,
                deal_type: inv.deal_type,
                amount: inv.amount,
                investors,
            });
        }

        let mut startups = Vec::new();
        for (i, r) in raw.startups.iter().enumerate() {
            let Some(node) = startup_node[i] else { continue };
            let mut funding_rounds = std::mem::take(&mut rounds[i]);
            funding_rounds.sort_by(|a, b| (a.date, &a.deal_id).cmp(&(b.date, &b.deal_id)));
            if let (Some(o), Some(f)) = (r.outcome.date(), funding_rounds.first()) {
                if o < f.date {
                    return Err(DataError::OutcomeBeforeFunding { id: r.id.clone() });
                }
            }
            startups.push(StartUpRecord {
                node,
                external_id: r.id.clone(),
                name: r.name.clone(),
                founded: r.founded,
                industry: Industry { sector: r.sector, label: r.label.clone(), detail: r.detail.clone() },
                location: r.location,
                country: r.country.clone(),
                outcome: r.outcome,
                funding_rounds,
            });
        }
        startups.sort_by_key(|s| s.node);
        let mut persons: Vec<PersonRecord> = raw
            .persons
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                person_node[i].map(|node| PersonRecord {
                    node,
                    external_id: p.id.clone(),
                    name: p.name.clone(),
                    gender: p.gender,
                    degree: p.degree,
                    graduated_institute: p.institute.clone(),
                    graduated_year: p.year,
                })
            })
            .collect();
        persons.sort_by_key(|p| p.node);

        let mut slot = vec![0; kinds.len()];
        for (i, s) in startups.iter().enumerate() {
            slot[s.node.index()] = i;
        }
        for (i, p) in persons.iter().enumerate() {
            slot[p.node.index()] = i;
        }
        Ok(Self { calendar, startups, persons, events, kinds, slot })
    }

    pub fn graph(&self) -> Result<TemporalGraph, DataError> {
        Ok(TemporalGraph::from_events(&self.events, self.calendar.cutoff_month)?)
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, node: NodeId) -> Option<NodeKind> {
        self.kinds.get(node.index()).copied()
    }

    pub fn startup(&self, node: NodeId) -> Option<&StartUpRecord> {
        match self.kind(node)? {
            NodeKind::StartUp => Some(&self.startups[self.slot[node.index()]]),
            NodeKind::Person => None,
        }
    }

    pub fn person(&self, node: NodeId) -> Option<&PersonRecord> {
        match self.kind(node)? {
            NodeKind::Person => Some(&self.persons[self.slot[node.index()]]),
            NodeKind::StartUp => None,
        }
    }

    /// Start-ups grouped by the period of their first funding round.
    pub fn cohorts(&self) -> BTreeMap<u32, Vec<NodeId>> {
        let mut out: BTreeMap<u32, Vec<NodeId>> = BTreeMap::new();
        for s in &self.startups {
            if let Some(d) = s.first_funding_date() {
                out.entry(self.calendar.period_of(d)).or_default().push(s.node);
            }
        }
        out
    }
}
