//! Synthetic investment-network generator with a planted success signal.
//!
//! Start-ups arrive at a constant rate over months `0..=months`; month 0 is
//! the base snapshot. Each start-up either joins the investor pool's
//! component (its first investor is drawn by preferential attachment) or
//! stays apart with a dedicated angel who never invests again. The joining
//! probability leans toward higher-quality start-ups and is steered by a
//! proportional controller so that the pool component covers the
//! configured fraction of all nodes.
//!
//! Success is Bernoulli with log-odds `intercept + signal_strength * z`,
//! where `z` standardizes latent quality plus investor-degree, sector and
//! education effects, and the intercept is solved so the expected success
//! rate equals the base rate.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Months, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DataError, RawData, RawInvestment, RawPerson, RawStartup};
use crate::graph::{DealType, Degree, Gender, Outcome, Sector, INDUSTRY_LABELS};
use crate::numerics::ops::sigmoid_scalar;
use crate::seed;

pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("infeasible generator config: {0}")]
    InfeasibleConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_startups: usize,
    /// Target number of persons (founders, angels and pool investors).
    pub n_persons: usize,
    /// Last month; start-ups are spread over months `0..=months`.
    pub months: u32,
    pub start: NaiveDate,
    /// Exponent on `degree + 1` when drawing pool investors.
    pub attachment: f64,
    pub target_lcc_fraction: f64,
    /// Sector shares in [`Sector::ALL`] order.
    pub industry_mix: [f64; 7],
    pub base_success_rate: f64,
    pub signal_strength: f64,
    pub second_round_rate: f64,
    /// Successes happen uniformly within this many months of first funding.
    pub success_window_months: u32,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_startups: 5000,
            n_persons: 11000,
            months: 36,
            start: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
            attachment: 1.0,
            target_lcc_fraction: 0.6656,
            industry_mix: [0.37, 0.16, 0.22, 0.186, 0.03, 0.018, 0.016],
            base_success_rate: 0.1571,
            signal_strength: 2.0,
            second_round_rate: 0.6344,
            success_window_months: 12,
            seed: 0,
        }
    }
}

const FOUNDERS_MEAN: f64 = 1.5;
const INVESTORS_MEAN: f64 = 2.0;
const CONTROLLER_GAIN: f64 = 2.0;
const DEGREE_EFFECT: f64 = 0.5;
const EDUCATION_EFFECT: f64 = 0.3;
const SECOND_ROUND_QUALITY: f64 = 0.8;
const JOIN_QUALITY: f64 = 1.0;

fn sector_effect(s: Sector) -> f64 {
    match s {
        Sector::InformationTechnology => 0.3,
        Sector::Healthcare => 0.2,
        Sector::B2C => -0.1,
        Sector::B2B => 0.0,
        Sector::FinancialServices => 0.1,
        Sector::MaterialsResources => -0.3,
        Sector::Energy => -0.3,
    }
}

const HUBS: [(f64, f64); 5] = [(37.77, -122.42), (40.71, -74.0), (42.36, -71.06), (51.5, -0.12), (39.9, 116.4)];

const FIRST_DEALS: [(DealType, f64, f64); 8] = [
    (DealType::Angel, 0.20, 0.3),
    (DealType::Seed, 0.35, 1.0),
    (DealType::Accelerator, 0.10, 0.1),
    (DealType::EarlyStageVc, 0.25, 5.0),
    (DealType::LaterStageVc, 0.02, 20.0),
    (DealType::Corporate, 0.03, 3.0),
    (DealType::Grant, 0.03, 0.2),
    (DealType::Other, 0.02, 0.5),
];

const SECOND_DEALS: [(DealType, f64, f64); 3] =
    [(DealType::EarlyStageVc, 0.6, 8.0), (DealType::LaterStageVc, 0.3, 25.0), (DealType::Corporate, 0.1, 5.0)];

impl GenConfig {
    /// Probability that an extra investor slot of a pool start-up goes to a
    /// newcomer, chosen so the expected person count matches `n_persons`.
    fn new_investor_rate(&self) -> Result<f64, SynthError> {
        let n = self.n_startups as f64;
        let j = self.target_lcc_fraction;
        let budget = self.n_persons as f64 - FOUNDERS_MEAN * n - (1.0 - j) * n;
        let slots = n * j * (INVESTORS_MEAN - 1.0) * (1.0 + self.second_round_rate);
        let rate = budget / slots;
        if !(0.0..=1.0).contains(&rate) || budget < 1.0 {
            return Err(SynthError::InfeasibleConfig(format!(
                "{} persons cannot be realized by {} start-ups at LCC target {}",
                self.n_persons, self.n_startups, j
            )));
        }
        Ok(rate)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InfeasibleConfig(m.to_string()));
        if self.n_startups == 0 || self.n_persons == 0 || self.months == 0 {
            return bad("counts and months must be positive");
        }
        if !(self.target_lcc_fraction > 0.0 && self.target_lcc_fraction < 1.0) {
            return bad("target LCC fraction must lie in (0, 1)");
        }
        for p in [self.base_success_rate, self.second_round_rate] {
            if !(p > 0.0 && p < 1.0) {
                return bad("rates must lie in (0, 1)");
            }
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad("signal strength must be finite and non-negative");
        }
        if !(self.attachment >= 0.0 && self.attachment.is_finite()) {
            return bad("attachment exponent must be finite and non-negative");
        }
        let total: f64 = self.industry_mix.iter().sum();
        if self.industry_mix.iter().any(|w| !(*w >= 0.0)) || !((total - 1.0).abs() < 1e-6) {
            return bad("industry mix must be a probability vector");
        }
        if self.success_window_months == 0 {
            return bad("success window must be positive");
        }
        self.new_investor_rate().map(|_| ())
    }

    pub fn month_date(&self, month: u32, day: u32) -> NaiveDate {
        (self.start + Months::new(month)).with_day0(day).expect("day within month")
    }

    /// Last day of the month by which every planted outcome has happened.
    pub fn observation_end(&self) -> NaiveDate {
        let next = self.start.with_day(1).expect("first of month") + Months::new(self.months + self.success_window_months + 1);
        next.pred_opt().expect("date after the minimum")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub company_id: String,
    pub latent_quality: f64,
    /// Standardized quality score entering the success log-odds.
    pub score: f64,
    pub success_probability: f64,
    pub success: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub rows: Vec<TruthRow>,
}

impl GroundTruth {
    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let name = path.display().to_string();
        let mut w = csv::Writer::from_path(path).map_err(|source| DataError::Csv { path: name.clone(), source })?;
        for r in &self.rows {
            w.serialize(r).map_err(|source| DataError::Csv { path: name.clone(), source })?;
        }
        w.flush().map_err(|source| DataError::Io { path: name, source })
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let name = path.display().to_string();
        let mut r = csv::Reader::from_path(path).map_err(|source| DataError::Csv { path: name.clone(), source })?;
        let rows = r
            .deserialize()
            .collect::<Result<Vec<TruthRow>, _>>()
            .map_err(|source| DataError::Csv { path: name, source })?;
        Ok(Self { rows })
    }

    pub fn success_rate(&self) -> f64 {
        self.rows.iter().filter(|r| r.success).count() as f64 / self.rows.len().max(1) as f64
    }
}

fn pick<T: Copy, R: Rng>(rng: &mut R, table: &[(T, f64, f64)]) -> (T, f64) {
    let mut u = rng.gen::<f64>();
    for &(v, p, a) in table {
        if u < p {
            return (v, a);
        }
        u -= p;
    }
    let last = table[table.len() - 1];
    (last.0, last.2)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Solves `mean(sigmoid(c + slope * x)) = rate` for `c` by bisection.
pub fn calibrate_intercept(x: &[f64], slope: f64, rate: f64) -> f64 {
    let mean = |c: f64| x.iter().map(|v| sigmoid_scalar(c + slope * v)).sum::<f64>() / x.len().max(1) as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct Pool {
    members: Vec<usize>,
    attachment: f64,
}

impl Pool {
    fn draw<R: Rng>(&self, rng: &mut R, degree: &[usize], exclude: &[usize]) -> Option<usize> {
        let w = |p: usize| if exclude.contains(&p) { 0.0 } else { (degree[p] as f64 + 1.0).powf(self.attachment) };
        let total: f64 = self.members.iter().map(|&p| w(p)).sum();
        if total <= 0.0 {
            return None;
        }
        let mut u = rng.gen::<f64>() * total;
        for &p in &self.members {
            u -= w(p);
            if u < 0.0 {
                return Some(p);
            }
        }
        self.members.iter().rev().copied().find(|p| !exclude.contains(p))
    }

    /// Two attachment draws; better start-ups tend to land the better
    /// connected investor.
    fn draw_biased<R: Rng>(&self, rng: &mut R, degree: &[usize], exclude: &[usize], quality: f64) -> Option<usize> {
        let a = self.draw(rng, degree, exclude)?;
        let b = self.draw(rng, degree, exclude).unwrap_or(a);
        let (hi, lo) = if degree[a] >= degree[b] { (a, b) } else { (b, a) };
        Some(if rng.gen_bool(sigmoid_scalar(quality)) { hi } else { lo })
    }
}

struct Pending {
    startup: usize,
    month: u32,
    in_pool: bool,
    angel: Option<usize>,
}

/// Generates the three ingestion tables and the ground truth.
pub fn generate(cfg: &GenConfig) -> Result<(RawData, GroundTruth), SynthError> {
    cfg.validate()?;
    let new_rate = cfg.new_investor_rate()?;
    let mut rng: ChaCha8Rng = seed::rng(cfg.seed, &[seed::GENERATOR]);
    let n = cfg.n_startups;
    let span = cfg.months as usize + 1;

    let mut startups: Vec<RawStartup> = Vec::with_capacity(n);
    let mut persons: Vec<RawPerson> = Vec::new();
    let mut degree: Vec<usize> = Vec::new();
    let mut investments: Vec<RawInvestment> = Vec::new();
    let mut pool = Pool { members: Vec::new(), attachment: cfg.attachment };
    let quality: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let second_gate = calibrate_intercept(&quality, SECOND_ROUND_QUALITY, cfg.second_round_rate);
    let mut team_degree = Vec::with_capacity(n);
    let mut advanced = Vec::with_capacity(n);
    let mut sectors = Vec::with_capacity(n);
    let mut second: Vec<Pending> = Vec::new();
    let (mut giant, mut total) = (0usize, 0usize);
    let mut deal_no = 0usize;

    fn new_person(persons: &mut Vec<RawPerson>, degree: &mut Vec<usize>, rng: &mut ChaCha8Rng, q: f64, founder: bool) -> usize {
        let i = persons.len();
        let gender = match rng.gen::<f64>() {
            u if u < 0.05 => Gender::Unknown,
            u if u < 0.25 => Gender::Female,
            _ => Gender::Male,
        };
        let adv_p = if founder { sigmoid_scalar(-0.2 + 0.9 * q) } else { 0.5 };
        let degree_cat = if rng.gen_bool(adv_p) {
            if rng.gen_bool(0.3) { Degree::Doctor } else { Degree::Master }
        } else if rng.gen_bool(0.75) {
            Degree::Bachelor
        } else {
            Degree::Other
        };
        persons.push(RawPerson {
            id: format!("P{i:06}"),
            name: format!("Person {i}"),
            gender,
            degree: degree_cat,
            institute: None,
            year: None,
            affiliations: Vec::new(),
        });
        degree.push(0);
        i
    }

    for s in 0..n {
        let month = (s * span / n) as u32;
        let day = rng.gen_range(0..28);
        let date = cfg.month_date(month, day);
        let q = quality[s];

        let mut u = rng.gen::<f64>();
        let mut sector = Sector::ALL[6];
        for (k, w) in cfg.industry_mix.iter().enumerate() {
            if u < *w {
                sector = Sector::ALL[k];
                break;
            }
            u -= w;
        }
        let labels: Vec<&str> = INDUSTRY_LABELS.iter().filter(|(_, x)| *x == sector).map(|(l, _)| *l).collect();
        let label = labels[rng.gen_range(0..labels.len())];
        let hub = HUBS[rng.gen_range(0..HUBS.len())];
        let location = Some((hub.0 + 0.3 * normal(&mut rng), hub.1 + 0.3 * normal(&mut rng)));
        let age = rng.gen_range(0..48u32);
        let founded = date - Months::new(age);
        let id = format!("S{s:06}");
        startups.push(RawStartup {
            id: id.clone(),
            name: format!("Startup {s}"),
            founded,
            sector: Some(sector),
            label: label.to_string(),
            detail: String::new(),
            location,
            country: String::new(),
            outcome: Outcome::None,
        });

        let n_founders = 1 + rng.gen_bool(FOUNDERS_MEAN - 1.0) as usize;
        let mut adv = false;
        for _ in 0..n_founders {
            let p = new_person(&mut persons, &mut degree, &mut rng, q, true);
            persons[p].affiliations.push((id.clone(), date));
            degree[p] += 1;
            adv |= matches!(persons[p].degree, Degree::Master | Degree::Doctor);
        }

        let frac = if total == 0 { 0.0 } else { giant as f64 / total as f64 };
        let p_join = (cfg.target_lcc_fraction + CONTROLLER_GAIN * (cfg.target_lcc_fraction - frac)).clamp(0.02, 0.98);
        // Better start-ups are more likely to reach networked investors.
        let join_odds = (p_join / (1.0 - p_join)).ln() + JOIN_QUALITY * q;
        let in_pool = total == 0 || rng.gen_bool(sigmoid_scalar(join_odds));
        let k = 1 + rng.gen_range(0..=2usize);
        let mut investors: Vec<usize> = Vec::new();
        let mut angel = None;
        let mut added = 1 + n_founders;
        if in_pool {
            for slot in 0..k {
                let existing = if slot == 0 || !rng.gen_bool(new_rate) {
                    pool.draw_biased(&mut rng, &degree, &investors, q)
                } else {
                    None
                };
                let p = match existing {
                    Some(p) => p,
                    None => {
                        let p = new_person(&mut persons, &mut degree, &mut rng, q, false);
                        pool.members.push(p);
                        added += 1;
                        p
                    }
                };
                investors.push(p);
            }
            giant += added;
        } else {
            let p = new_person(&mut persons, &mut degree, &mut rng, q, false);
            added += 1;
            angel = Some(p);
            investors.push(p);
        }
        total += added;
        let mean_deg = investors.iter().map(|&p| degree[p] as f64).sum::<f64>() / investors.len() as f64;
        for &p in &investors {
            degree[p] += 1;
        }
        let (deal_type, scale) = pick(&mut rng, &FIRST_DEALS);
        let amount = (scale.ln() + 0.6 * q + 0.8 * normal(&mut rng)).exp();
        investments.push(RawInvestment {
            deal_id: format!("D{deal_no:07}"),
            company: id,
            date,
            deal_type,
            amount: Some((amount * 1000.0).round() / 1000.0),
            investors: investors.iter().map(|&p| persons[p].id.clone()).collect(),
        });
        deal_no += 1;

        let gap = rng.gen_range(3..=18u32);
        second.push(Pending { startup: s, month: month + gap, in_pool, angel });
        team_degree.push(mean_deg);
        advanced.push(adv);
        sectors.push(sector);

        // Second rounds due by the end of this start-up's month, in order.
        let next_month = ((s + 1) * span / n) as u32;
        if s + 1 == n || next_month != month {
            let due: Vec<usize> = (0..second.len()).filter(|&i| second[i].month == month).collect();
            for i in due {
                let st = second[i].startup;
                if !rng.gen_bool(sigmoid_scalar(second_gate + SECOND_ROUND_QUALITY * quality[st])) {
                    continue;
                }
                let date = cfg.month_date(month, rng.gen_range(0..28));
                let k = 1 + rng.gen_range(0..=2usize);
                let mut inv: Vec<usize> = Vec::new();
                if second[i].in_pool {
                    for slot in 0..k {
                        let existing = if slot == 0 || !rng.gen_bool(new_rate) {
                            pool.draw_biased(&mut rng, &degree, &inv, quality[st])
                        } else {
                            None
                        };
                        let p = match existing {
                            Some(p) => p,
                            None => {
                                let p = new_person(&mut persons, &mut degree, &mut rng, 0.0, false);
                                pool.members.push(p);
                                giant += 1;
                                total += 1;
                                p
                            }
                        };
                        inv.push(p);
                    }
                } else {
                    inv.push(second[i].angel.expect("outside start-ups keep their angel"));
                }
                for &p in &inv {
                    degree[p] += 1;
                }
                let (deal_type, scale) = pick(&mut rng, &SECOND_DEALS);
                let amount = (scale.ln() + 0.6 * quality[st] + 0.8 * normal(&mut rng)).exp();
                investments.push(RawInvestment {
                    deal_id: format!("D{deal_no:07}"),
                    company: startups[st].id.clone(),
                    date,
                    deal_type,
                    amount: Some((amount * 1000.0).round() / 1000.0),
                    investors: inv.iter().map(|&p| persons[p].id.clone()).collect(),
                });
                deal_no += 1;
            }
            second.retain(|p| p.month > month);
        }
    }

    let raw_score: Vec<f64> = (0..n)
        .map(|s| {
            quality[s]
                + DEGREE_EFFECT * team_degree[s].ln_1p()
                + sector_effect(sectors[s])
                + EDUCATION_EFFECT * advanced[s] as u8 as f64
        })
        .collect();
    let mean = raw_score.iter().sum::<f64>() / n as f64;
    let sd = (raw_score.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-12);
    let z: Vec<f64> = raw_score.iter().map(|x| (x - mean) / sd).collect();
    let intercept = calibrate_intercept(&z, cfg.signal_strength, cfg.base_success_rate);
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let prob = sigmoid_scalar(intercept + cfg.signal_strength * z[s]);
        let success = rng.gen_bool(prob);
        if success {
            let first = investments.iter().find(|i| i.company == startups[s].id).expect("first round").date;
            let when = first + Months::new(rng.gen_range(1..=cfg.success_window_months));
            startups[s].outcome = if rng.gen_bool(0.15) { Outcome::Ipo(when) } else { Outcome::Acquired(when) };
        }
        rows.push(TruthRow {
            company_id: startups[s].id.clone(),
            latent_quality: quality[s],
            score: z[s],
            success_probability: prob,
            success,
        });
    }
    Ok((RawData { startups, persons, investments }, GroundTruth { rows }))
}

/// Writes the ingestion tables plus the truth sidecar into `dir`.
pub fn write_dataset(dir: &Path, raw: &RawData, truth: &GroundTruth) -> Result<(), DataError> {
    raw.write_dir(dir)?;
    truth.write(&dir.join(TRUTH_FILE))
}

/// Discrete power-law fit of a degree tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub x_min: usize,
    pub n_tail: usize,
    pub ks: f64,
}

/// Maximum-likelihood exponent with the tail start chosen by minimum
/// Kolmogorov-Smirnov distance. Uses the continuity-corrected estimator
/// `1 + n / sum(ln(x / (x_min - 1/2)))`. Tails shorter than `min_tail`
/// are not considered.
pub fn fit_power_law(values: &[usize], min_tail: usize) -> Option<PowerLawFit> {
    let mut xs: Vec<usize> = values.iter().copied().filter(|&x| x >= 1).collect();
    xs.sort_unstable();
    let mut candidates: Vec<usize> = xs.clone();
    candidates.dedup();
    let mut best: Option<PowerLawFit> = None;
    for &x_min in &candidates {
        let start = xs.partition_point(|&x| x < x_min);
        let tail = &xs[start..];
        if tail.len() < min_tail.max(2) {
            break;
        }
        let shift = x_min as f64 - 0.5;
        let logsum: f64 = tail.iter().map(|&x| (x as f64 / shift).ln()).sum();
        if logsum <= 0.0 {
            continue;
        }
        let alpha = 1.0 + tail.len() as f64 / logsum;
        // Survival P(X >= x) of the fit against the empirical survival.
        let n_tail = tail.len() as f64;
        let mut ks: f64 = 0.0;
        let mut i = 0;
        while i < tail.len() {
            let x = tail[i];
            let emp = (tail.len() - i) as f64 / n_tail;
            let model = ((x as f64 - 0.5) / shift).powf(1.0 - alpha);
            ks = ks.max((emp - model).abs());
            i = tail.partition_point(|&y| y <= x);
        }
        if best.as_ref().map_or(true, |b| ks < b.ks) {
            best = Some(PowerLawFit { alpha, x_min, n_tail: tail.len(), ks });
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBucket {
    pub label: String,
    pub count: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Empirical couplings between observables and realized success.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalAudit {
    pub base_rate: f64,
    /// Quintiles of the mean prior degree of first-round investors.
    pub by_degree_quintile: Vec<RateBucket>,
    pub by_amount_quintile: Vec<RateBucket>,
    pub by_sector: Vec<RateBucket>,
    pub by_founder_education: Vec<RateBucket>,
}

fn bucket(label: String, members: &[bool]) -> RateBucket {
    let successes = members.iter().filter(|x| **x).count();
    RateBucket { label, count: members.len(), successes, rate: successes as f64 / members.len().max(1) as f64 }
}

/// Rank quintiles; a run of tied keys goes to the quintile of its mid-rank
/// so equal keys always share a bucket.
fn quintiles(key: &[f64], success: &[bool]) -> Vec<RateBucket> {
    let mut order: Vec<usize> = (0..key.len()).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    let n = order.len();
    let mut members: Vec<Vec<bool>> = vec![Vec::new(); 5];
    let mut lo = 0;
    while lo < n {
        let mut hi = lo + 1;
        while hi < n && key[order[hi]] == key[order[lo]] {
            hi += 1;
        }
        let q = ((5 * (lo + hi - 1)) / (2 * n)).min(4);
        members[q].extend(order[lo..hi].iter().map(|&i| success[i]));
        lo = hi;
    }
    members.iter().enumerate().map(|(q, m)| bucket(format!("Q{}", q + 1), m)).collect()
}

/// Audit of the planted signal. Reads only the tables and the truth file.
pub fn planted_signal_audit(raw: &RawData, truth: &GroundTruth) -> SignalAudit {
    let success: BTreeMap<&str, bool> = truth.rows.iter().map(|r| (r.company_id.as_str(), r.success)).collect();
    let mut rounds: Vec<&RawInvestment> = raw.investments.iter().collect();
    rounds.sort_by(|a, b| (a.date, &a.deal_id).cmp(&(b.date, &b.deal_id)));
    // Prior degree of a person: distinct start-ups touched before the round.
    let mut seen: BTreeMap<&str, std::collections::BTreeSet<&str>> = BTreeMap::new();
    let mut founders: BTreeMap<&str, Vec<&RawPerson>> = BTreeMap::new();
    let mut events: Vec<(NaiveDate, u8, &str, &str)> = Vec::new();
    for p in &raw.persons {
        for (c, d) in &p.affiliations {
            events.push((*d, 0, p.id.as_str(), c.as_str()));
            founders.entry(c.as_str()).or_default().push(p);
        }
    }
    events.sort();
    let mut first: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let mut ev = 0;
    for r in &rounds {
        while ev < events.len() && events[ev].0 < r.date {
            seen.entry(events[ev].2).or_default().insert(events[ev].3);
            ev += 1;
        }
        if !first.contains_key(r.company.as_str()) {
            let deg = r.investors.iter().map(|p| seen.get(p.as_str()).map_or(0, |s| s.len()) as f64).sum::<f64>()
                / r.investors.len().max(1) as f64;
            first.insert(r.company.as_str(), (deg, r.amount.unwrap_or(0.0)));
        }
        for p in &r.investors {
            seen.entry(p.as_str()).or_default().insert(r.company.as_str());
        }
    }
    let ids: Vec<&RawStartup> = raw.startups.iter().filter(|s| first.contains_key(s.id.as_str())).collect();
    let ok: Vec<bool> = ids.iter().map(|s| success.get(s.id.as_str()).copied().unwrap_or(false)).collect();
    let deg: Vec<f64> = ids.iter().map(|s| first[s.id.as_str()].0).collect();
    let amt: Vec<f64> = ids.iter().map(|s| first[s.id.as_str()].1).collect();
    let by_sector = Sector::ALL
        .iter()
        .map(|sec| {
            let m: Vec<bool> = ids.iter().zip(&ok).filter(|(s, _)| s.sector == Some(*sec)).map(|(_, o)| *o).collect();
            bucket(sec.name().to_string(), &m)
        })
        .collect();
    let adv = |s: &RawStartup| {
        founders
            .get(s.id.as_str())
            .is_some_and(|f| f.iter().any(|p| matches!(p.degree, Degree::Master | Degree::Doctor)))
    };
    let by_founder_education = [true, false]
        .iter()
        .map(|want| {
            let m: Vec<bool> = ids.iter().zip(&ok).filter(|(s, _)| adv(s) == *want).map(|(_, o)| *o).collect();
            bucket(if *want { "advanced".into() } else { "other".into() }, &m)
        })
        .collect();
    SignalAudit {
        base_rate: ok.iter().filter(|x| **x).count() as f64 / ok.len().max(1) as f64,
        by_degree_quintile: quintiles(&deg, &ok),
        by_amount_quintile: quintiles(&amt, &ok),
        by_sector,
        by_founder_education,
    }
}
