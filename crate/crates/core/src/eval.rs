//! Temporal splits, ranking metrics and the evaluation report.
//!
//! The report is computed only from the exported row types
//! ([`PredictionRow`], [`LabelRow`], [`PersonRow`]), so it can be rebuilt
//! from the CSV files of a finished run.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::graph::{Calendar, NodeId, Period, StartUpRecord};
use crate::predictor::{make_label, PredictError, SuccessLabel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no month has any candidates")]
    NoEvaluableMonths,
    #[error("no test start-up received a second round")]
    NoSecondRounds,
    #[error("split '{0}' is empty")]
    EmptySplit(&'static str),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error(transparent)]
    Label(#[from] PredictError),
}

/// Share of positives among the first `min(k, n)` entries of a ranked
/// label list. `None` for an empty month or `k == 0`.
pub fn precision_at_k(ranked: &[bool], k: usize) -> Option<f64> {
    let n = k.min(ranked.len());
    if n == 0 {
        return None;
    }
    Some(ranked[..n].iter().filter(|x| **x).count() as f64 / n as f64)
}

/// Mean of the monthly P@K over months that have candidates.
pub fn average_precision_at_k(months: &[Vec<bool>], k: usize) -> Result<f64, EvalError> {
    let ps: Vec<f64> = months.iter().filter_map(|m| precision_at_k(m, k)).collect();
    if ps.is_empty() {
        return Err(EvalError::NoEvaluableMonths);
    }
    Ok(ps.iter().sum::<f64>() / ps.len() as f64)
}

/// Inclusive date range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// Cohort ranges by first-funding date. Training and validation labels are
/// read as of the day before the test range starts, so the second
/// validation range only contributes early successes. Test labels are read
/// as of `horizon` (or the last date in the data when unset). An empty
/// training split is an error; an empty test split is only an error once
/// it is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: DateRange,
    pub validation_a: DateRange,
    pub validation_b: DateRange,
    pub test: DateRange,
    pub horizon: Option<NaiveDate>,
    pub success_window_months: u32,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

impl Default for SplitSpec {
    /// Months 1-10, 11-12, 13-24 and 25-36 after a January 2000 epoch.
    fn default() -> Self {
        Self {
            train: DateRange::new(ymd(2000, 2, 1), ymd(2000, 11, 30)),
            validation_a: DateRange::new(ymd(2000, 12, 1), ymd(2001, 1, 31)),
            validation_b: DateRange::new(ymd(2001, 2, 1), ymd(2002, 1, 31)),
            test: DateRange::new(ymd(2002, 2, 1), ymd(2003, 1, 31)),
            horizon: None,
            success_window_months: 60,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let ranges = [self.train, self.validation_a, self.validation_b, self.test];
        for r in &ranges {
            if r.start > r.end {
                return Err(EvalError::InvalidSplit(format!("range {} .. {} is reversed", r.start, r.end)));
            }
        }
        for w in ranges.windows(2) {
            if w[0].end >= w[1].start {
                return Err(EvalError::InvalidSplit("ranges must be disjoint and in order".into()));
            }
        }
        if self.success_window_months == 0 {
            return Err(EvalError::InvalidSplit("success window must be positive".into()));
        }
        if let Some(h) = self.horizon {
            if h < self.test.end + chrono::Months::new(self.success_window_months) {
                return Err(EvalError::InvalidSplit("horizon must cover the test cohorts' full outcome window".into()));
            }
        }
        Ok(())
    }

    /// Date up to which outcomes may inform training and validation labels.
    pub fn label_horizon(&self) -> NaiveDate {
        self.test.start.pred_opt().expect("date after the minimum")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledStartup {
    pub startup: NodeId,
    pub period: Period,
    pub label: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<LabeledStartup>,
    pub validation: Vec<LabeledStartup>,
    pub test: Vec<LabeledStartup>,
}

pub fn make_splits(
    records: &[StartUpRecord],
    calendar: &Calendar,
    spec: &SplitSpec,
    data_horizon: NaiveDate,
) -> Result<Splits, EvalError> {
    spec.validate()?;
    let inner = spec.label_horizon();
    let outer = spec.horizon.unwrap_or(data_horizon);
    let w = spec.success_window_months;
    let mut out = Splits::default();
    for r in records {
        let Some(first) = r.first_funding_date() else { continue };
        let sample = |label: SuccessLabel| {
            label.as_bool().map(|label| LabeledStartup { startup: r.node, period: calendar.period_of(first), label })
        };
        if spec.train.contains(first) {
            out.train.extend(sample(make_label(r, inner, w)?));
        } else if spec.validation_a.contains(first) {
            out.validation.extend(sample(make_label(r, inner, w)?));
        } else if spec.validation_b.contains(first) {
            if make_label(r, inner, w)? == SuccessLabel::Success {
                out.validation.extend(sample(SuccessLabel::Success));
            }
        } else if spec.test.contains(first) {
            out.test.extend(sample(make_label(r, outer, w)?));
        }
    }
    if out.train.is_empty() {
        return Err(EvalError::EmptySplit("train"));
    }
    Ok(out)
}

/// One exported prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub startup_id: String,
    pub period: Period,
    pub probability: f64,
    pub rank: usize,
    pub top_attention_person: Option<String>,
}

/// One labelled test start-up with the context the report needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub startup_id: String,
    pub node: u32,
    pub period: Period,
    pub label: bool,
    pub sector: String,
    pub in_lcc: bool,
    pub second_round: bool,
    pub degree: usize,
}

/// A person adjacent to some test start-up at its prediction period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonRow {
    pub person_id: String,
    pub gender: String,
    pub degree: String,
    pub degree_centrality: f64,
}

/// Success ratio among test start-ups that raised a second round.
pub fn human_investor_baseline(labels: &[LabelRow]) -> Result<f64, EvalError> {
    let picked: Vec<&LabelRow> = labels.iter().filter(|l| l.second_round).collect();
    if picked.is_empty() {
        return Err(EvalError::NoSecondRounds);
    }
    Ok(picked.iter().filter(|l| l.label).count() as f64 / picked.len() as f64)
}

/// Ranked label lists per period, from prediction rows.
pub fn ranked_by_period(predictions: &[PredictionRow], labels: &[LabelRow]) -> BTreeMap<Period, Vec<bool>> {
    let label: HashMap<&str, bool> = labels.iter().map(|l| (l.startup_id.as_str(), l.label)).collect();
    let mut by: BTreeMap<Period, Vec<&PredictionRow>> = BTreeMap::new();
    for p in predictions {
        if label.contains_key(p.startup_id.as_str()) {
            by.entry(p.period).or_default().push(p);
        }
    }
    by.into_iter()
        .map(|(t, mut rows)| {
            rows.sort_by_key(|r| r.rank);
            (t, rows.iter().map(|r| label[r.startup_id.as_str()]).collect())
        })
        .collect()
}

/// Rankings by degree as of the cohort's period, ties by node id.
pub fn degree_ranked(labels: &[LabelRow]) -> BTreeMap<Period, Vec<bool>> {
    let mut by: BTreeMap<Period, Vec<&LabelRow>> = BTreeMap::new();
    for l in labels {
        by.entry(l.period).or_default().push(l);
    }
    by.into_iter()
        .map(|(t, mut rows)| {
            rows.sort_by(|a, b| b.degree.cmp(&a.degree).then(a.node.cmp(&b.node)));
            (t, rows.iter().map(|r| r.label).collect())
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub count: usize,
    pub gender: BTreeMap<String, f64>,
    pub degree: BTreeMap<String, f64>,
    pub mean_degree_centrality: Option<f64>,
}

fn demographics<'a>(people: impl IntoIterator<Item = &'a PersonRow>) -> Demographics {
    let mut out = Demographics::default();
    let mut centrality = 0.0;
    for p in people {
        out.count += 1;
        *out.gender.entry(p.gender.clone()).or_default() += 1.0;
        *out.degree.entry(p.degree.clone()).or_default() += 1.0;
        centrality += p.degree_centrality;
    }
    if out.count > 0 {
        let n = out.count as f64;
        out.gender.values_mut().for_each(|v| *v /= n);
        out.degree.values_mut().for_each(|v| *v /= n);
        out.mean_degree_centrality = Some(centrality / n);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeopleAnalysis {
    /// Distinct top-attention persons of the selected start-ups.
    pub selected: Demographics,
    pub test_set: Demographics,
}

/// Demographics of the persons the fusion stack attended to most for the
/// selected start-ups, next to all persons around the test cohorts.
pub fn selected_people_analysis(selected: &[&PredictionRow], people: &[PersonRow]) -> PeopleAnalysis {
    let chosen: BTreeSet<&str> = selected.iter().filter_map(|p| p.top_attention_person.as_deref()).collect();
    PeopleAnalysis {
        selected: demographics(people.iter().filter(|p| chosen.contains(p.person_id.as_str()))),
        test_set: demographics(people),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndustryRow {
    pub sector: String,
    pub selected: usize,
    pub successes: usize,
    pub precision: Option<f64>,
    pub lcc_fraction: Option<f64>,
    pub total: usize,
    pub selected_ratio: f64,
}

/// Per-sector outcome of the monthly top-K selections.
pub fn industry_breakdown(selected: &[&PredictionRow], labels: &[LabelRow]) -> Vec<IndustryRow> {
    let by_id: HashMap<&str, &LabelRow> = labels.iter().map(|l| (l.startup_id.as_str(), l)).collect();
    let mut rows: BTreeMap<&str, IndustryRow> = BTreeMap::new();
    for l in labels {
        rows.entry(l.sector.as_str())
            .or_insert_with(|| IndustryRow {
                sector: l.sector.clone(),
                selected: 0,
                successes: 0,
                precision: None,
                lcc_fraction: None,
                total: 0,
                selected_ratio: 0.0,
            })
            .total += 1;
    }
    let mut in_lcc: BTreeMap<&str, usize> = BTreeMap::new();
    for p in selected {
        let Some(l) = by_id.get(p.startup_id.as_str()) else { continue };
        let row = rows.get_mut(l.sector.as_str()).expect("sector seen in labels");
        row.selected += 1;
        row.successes += l.label as usize;
        *in_lcc.entry(l.sector.as_str()).or_default() += l.in_lcc as usize;
    }
    rows.into_iter()
        .map(|(sector, mut r)| {
            if r.selected > 0 {
                r.precision = Some(r.successes as f64 / r.selected as f64);
                r.lcc_fraction = Some(in_lcc.get(sector).copied().unwrap_or(0) as f64 / r.selected as f64);
            }
            r.selected_ratio = r.selected as f64 / r.total as f64;
            r
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthRow {
    pub period: Period,
    pub candidates: usize,
    pub positives: usize,
    /// P@K per K, absent when the month has no candidates.
    pub precision: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_values: Vec<usize>,
    pub selection_k: usize,
    pub test_size: usize,
    pub base_rate: f64,
    pub months: Vec<MonthRow>,
    pub ap: BTreeMap<usize, f64>,
    pub degree_baseline_ap: BTreeMap<usize, f64>,
    pub human_baseline: Option<f64>,
    /// Model AP@K over the human baseline ratio.
    pub ratio_to_human: BTreeMap<usize, f64>,
    pub industries: Vec<IndustryRow>,
    pub people: PeopleAnalysis,
}

pub fn build_report(
    predictions: &[PredictionRow],
    labels: &[LabelRow],
    people: &[PersonRow],
    k_values: &[usize],
    selection_k: usize,
) -> Result<EvalReport, EvalError> {
    // Every figure covers only the months that were predicted.
    let predicted: BTreeSet<Period> = predictions.iter().map(|p| p.period).collect();
    let labels: Vec<LabelRow> = labels.iter().filter(|l| predicted.contains(&l.period)).cloned().collect();
    let labels = labels.as_slice();
    let ranked = ranked_by_period(predictions, labels);
    let lists: Vec<Vec<bool>> = ranked.values().cloned().collect();
    let degree_lists: Vec<Vec<bool>> = degree_ranked(labels).into_values().collect();
    let mut ap = BTreeMap::new();
    let mut degree_ap = BTreeMap::new();
    for &k in k_values {
        ap.insert(k, average_precision_at_k(&lists, k)?);
        degree_ap.insert(k, average_precision_at_k(&degree_lists, k)?);
    }
    let months = ranked
        .iter()
        .map(|(t, l)| MonthRow {
            period: *t,
            candidates: l.len(),
            positives: l.iter().filter(|x| **x).count(),
            precision: k_values.iter().filter_map(|&k| precision_at_k(l, k).map(|p| (k, p))).collect(),
        })
        .collect();
    let human = human_investor_baseline(labels).ok();
    let ratio_to_human = match human {
        Some(h) if h > 0.0 => ap.iter().map(|(k, a)| (*k, a / h)).collect(),
        _ => BTreeMap::new(),
    };
    let labelled: BTreeSet<&str> = labels.iter().map(|l| l.startup_id.as_str()).collect();
    let selected: Vec<&PredictionRow> = predictions
        .iter()
        .filter(|p| p.rank <= selection_k && labelled.contains(p.startup_id.as_str()))
        .collect();
    let positives = labels.iter().filter(|l| l.label).count();
    Ok(EvalReport {
        k_values: k_values.to_vec(),
        selection_k,
        test_size: labels.len(),
        base_rate: positives as f64 / labels.len().max(1) as f64,
        months,
        ap,
        degree_baseline_ap: degree_ap,
        human_baseline: human,
        ratio_to_human,
        industries: industry_breakdown(&selected, labels),
        people: selected_people_analysis(&selected, people),
    })
}

fn pct(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{:.1}%", 100.0 * v))
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "test start-ups: {}  base rate: {}", self.test_size, pct(Some(self.base_rate)));
        let _ = write!(s, "\n{:<18}", "method");
        for k in &self.k_values {
            let _ = write!(s, "{:>10}", format!("AP@{k}"));
        }
        let _ = writeln!(s);
        let mut line = |name: &str, f: &dyn Fn(usize) -> Option<f64>| {
            let _ = write!(s, "{name:<18}");
            for &k in &self.k_values {
                let _ = write!(s, "{:>10}", pct(f(k)));
            }
            let _ = writeln!(s);
        };
        line("model", &|k| self.ap.get(&k).copied());
        line("degree heuristic", &|k| self.degree_baseline_ap.get(&k).copied());
        line("human investors", &|_| self.human_baseline);
        let _ = writeln!(s, "\n{:<8}{:>12}{:>10}{:>10}{:>10}{:>10}", "period", "candidates", "positive", "P@10", "P@20", "P@50");
        for m in &self.months {
            let _ = writeln!(
                s,
                "{:<8}{:>12}{:>10}{:>10}{:>10}{:>10}",
                m.period,
                m.candidates,
                m.positives,
                pct(m.precision.get(&10).copied()),
                pct(m.precision.get(&20).copied()),
                pct(m.precision.get(&50).copied()),
            );
        }
        let _ = writeln!(s, "\nsectors (monthly top {}):", self.selection_k);
        let _ = writeln!(s, "{:<12}{:>10}{:>10}{:>16}", "sector", "precision", "in LCC", "selected/total");
        for r in &self.industries {
            let _ = writeln!(
                s,
                "{:<12}{:>10}{:>10}{:>16}",
                r.sector,
                pct(r.precision),
                pct(r.lcc_fraction),
                format!("{}/{}", r.selected, r.total)
            );
        }
        let _ = writeln!(s, "\nperson with top attention vs all test-set persons:");
        for (name, d) in [("selected", &self.people.selected), ("test set", &self.people.test_set)] {
            let mean = d.mean_degree_centrality.map_or("-".into(), |v| format!("{v:.2}"));
            let _ = writeln!(s, "  {name}: {} persons, mean degree {mean}", d.count);
            let g: Vec<String> = d.gender.iter().map(|(k, v)| format!("{k} {}", pct(Some(*v)))).collect();
            let e: Vec<String> = d.degree.iter().map(|(k, v)| format!("{k} {}", pct(Some(*v)))).collect();
            let _ = writeln!(s, "    gender: {}", g.join(", "));
            let _ = writeln!(s, "    degree: {}", e.join(", "));
        }
        s
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}
