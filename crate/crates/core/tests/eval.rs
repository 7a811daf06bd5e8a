use std::collections::{BTreeMap, BTreeSet};

use chrono::{Months, NaiveDate};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcnet::eval::{
    average_precision_at_k, build_report, degree_ranked, human_investor_baseline, industry_breakdown, make_splits,
    precision_at_k, read_rows, selected_people_analysis, write_rows, DateRange, EvalError, LabelRow, PersonRow,
    PredictionRow, SplitSpec,
};
use vcnet::graph::{Calendar, DealType, FundingRound, Industry, NodeId, Outcome, StartUpRecord};

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn brute_precision(labels: &[bool], k: usize) -> Option<f64> {
    let mut hits = 0;
    let mut seen = 0;
    for l in labels {
        if seen == k {
            break;
        }
        seen += 1;
        if *l {
            hits += 1;
        }
    }
    if seen == 0 {
        None
    } else {
        Some(hits as f64 / seen as f64)
    }
}

#[test]
fn precision_matches_brute_force_on_random_rankings() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.gen_range(0..200);
        let rate = rng.gen_range(0.0..1.0);
        let ranked: Vec<bool> = (0..n).map(|_| rng.gen_bool(rate)).collect();
        for k in [1, 10, 20, 50, 250] {
            let (a, b) = (precision_at_k(&ranked, k), brute_precision(&ranked, k));
            match (a, b) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12),
                (a, b) => assert_eq!(a, b),
            }
        }
    }
}

#[test]
fn twelve_month_average_matches_mean_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let months: Vec<Vec<bool>> = (0..12)
            .map(|_| {
                let n = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..150) };
                (0..n).map(|_| rng.gen_bool(0.2)).collect()
            })
            .collect();
        let k = [10, 20, 50][rng.gen_range(0..3)];
        let vals: Vec<f64> = months.iter().filter_map(|m| brute_precision(m, k)).collect();
        let got = average_precision_at_k(&months, k);
        if vals.is_empty() {
            assert_eq!(got, Err(EvalError::NoEvaluableMonths));
        } else {
            let want = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((got.unwrap() - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn two_extreme_months_average_to_one_half() {
    let months = vec![vec![false; 10], vec![true; 10]];
    assert_eq!(average_precision_at_k(&months, 10), Ok(0.5));
    assert_eq!(precision_at_k(&[true; 10], 10), Some(1.0));
}

proptest! {
    #[test]
    fn ap_lies_between_monthly_extremes(seed in any::<u64>(), k in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let months: Vec<Vec<bool>> = (0..12).map(|_| (0..rng.gen_range(1..60)).map(|_| rng.gen_bool(0.3)).collect()).collect();
        let ps: Vec<f64> = months.iter().map(|m| precision_at_k(m, k).unwrap()).collect();
        let ap = average_precision_at_k(&months, k).unwrap();
        let lo = ps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(ap >= lo - 1e-12 && ap <= hi + 1e-12);
        prop_assert!((0.0..=1.0).contains(&ap));
    }

    #[test]
    fn reordering_inside_top_or_tail_keeps_precision(seed in any::<u64>(), k in 1usize..40, n in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ranked: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let cut = k.min(n);
        let mut shuffled = ranked.clone();
        shuffled[..cut].shuffle(&mut rng);
        shuffled[cut..].shuffle(&mut rng);
        prop_assert_eq!(precision_at_k(&ranked, k), precision_at_k(&shuffled, k));
    }
}

fn record(node: u32, first: NaiveDate, outcome: Outcome, second: Option<NaiveDate>) -> StartUpRecord {
    let round = |deal: &str, date| FundingRound {
        deal_id: deal.into(),
        date,
        deal_type: DealType::Seed,
        amount: None,
        investors: vec![],
    };
    let mut rounds = vec![round("a", first)];
    rounds.extend(second.map(|d| round("b", d)));
    StartUpRecord {
        node: NodeId(node),
        external_id: format!("s{node}"),
        name: String::new(),
        founded: first,
        industry: Industry { sector: None, label: String::new(), detail: String::new() },
        location: None,
        country: String::new(),
        outcome,
        funding_rounds: rounds,
    }
}

fn spec() -> SplitSpec {
    SplitSpec {
        train: DateRange::new(ymd(2000, 2, 1), ymd(2000, 11, 30)),
        validation_a: DateRange::new(ymd(2000, 12, 1), ymd(2001, 1, 31)),
        validation_b: DateRange::new(ymd(2001, 2, 1), ymd(2002, 1, 31)),
        test: DateRange::new(ymd(2002, 2, 1), ymd(2003, 1, 31)),
        horizon: Some(ymd(2004, 2, 1)),
        success_window_months: 12,
    }
}

fn random_records(seed: u64, n: u32) -> Vec<StartUpRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = ymd(1999, 10, 1);
    (0..n)
        .map(|i| {
            let first = origin + chrono::Days::new(rng.gen_range(0..1300));
            let outcome = if rng.gen_bool(0.3) {
                Outcome::Ipo(first + chrono::Days::new(rng.gen_range(0..500)))
            } else {
                Outcome::None
            };
            record(i, first, outcome, None)
        })
        .collect()
}

/// Independent date-filter oracle of the split rules.
fn oracle(records: &[StartUpRecord], spec: &SplitSpec, data_end: NaiveDate) -> [BTreeSet<(u32, bool)>; 3] {
    let inner = spec.test.start.pred_opt().unwrap();
    let outer = spec.horizon.unwrap_or(data_end);
    let label = |r: &StartUpRecord, seen: NaiveDate| -> Option<bool> {
        let first = r.funding_rounds[0].date;
        let end = first.checked_add_months(Months::new(spec.success_window_months)).unwrap();
        let exit = r.outcome.date();
        if exit.is_some_and(|e| e <= end && e <= seen) {
            Some(true)
        } else if seen >= end {
            Some(false)
        } else {
            None
        }
    };
    let inside = |d: NaiveDate, r: DateRange| d >= r.start && d <= r.end;
    let mut out = [BTreeSet::new(), BTreeSet::new(), BTreeSet::new()];
    for r in records {
        let f = r.funding_rounds[0].date;
        let id = r.node.0;
        if inside(f, spec.train) {
            out[0].extend(label(r, inner).map(|l| (id, l)));
        } else if inside(f, spec.validation_a) {
            out[1].extend(label(r, inner).map(|l| (id, l)));
        } else if inside(f, spec.validation_b) {
            if label(r, inner) == Some(true) {
                out[1].insert((id, true));
            }
        } else if inside(f, spec.test) {
            out[2].extend(label(r, outer).map(|l| (id, l)));
        }
    }
    out
}

#[test]
fn splits_match_date_filter_oracle() {
    let cal = Calendar::new(ymd(2000, 1, 1), 0);
    for seed in 0..20 {
        let records = random_records(seed, 400);
        let s = make_splits(&records, &cal, &spec(), ymd(2004, 6, 1)).unwrap();
        let got = |v: &[vcnet::eval::LabeledStartup]| v.iter().map(|x| (x.startup.0, x.label)).collect::<BTreeSet<_>>();
        let [tr, va, te] = oracle(&records, &spec(), ymd(2004, 6, 1));
        assert_eq!(got(&s.train), tr);
        assert_eq!(got(&s.validation), va);
        assert_eq!(got(&s.test), te);
        for x in s.train.iter().chain(&s.validation).chain(&s.test) {
            let r = &records[x.startup.0 as usize];
            assert_eq!(x.period, cal.period_of(r.funding_rounds[0].date));
        }
    }
}

#[test]
fn early_and_late_cohorts() {
    let cal = Calendar::new(ymd(2000, 1, 1), 0);
    let records = vec![
        record(0, ymd(2000, 1, 15), Outcome::Ipo(ymd(2000, 6, 1)), None),
        record(1, ymd(2001, 6, 1), Outcome::Acquired(ymd(2001, 9, 1)), None),
        record(2, ymd(2001, 6, 1), Outcome::None, None),
        record(3, ymd(2000, 3, 1), Outcome::None, None),
        record(4, ymd(2002, 5, 1), Outcome::None, None),
    ];
    let s = make_splits(&records, &cal, &spec(), ymd(2004, 6, 1)).unwrap();
    let all: Vec<u32> = s.train.iter().chain(&s.validation).chain(&s.test).map(|x| x.startup.0).collect();
    // Funded before the training range: nowhere.
    assert!(!all.contains(&0));
    // Early success in the second validation range is a positive; its
    // unresolved sibling is left out.
    assert!(s.validation.iter().any(|x| x.startup.0 == 1 && x.label));
    assert!(!all.contains(&2));
    assert_eq!(s.test.len(), 1);
}

#[test]
fn empty_training_range_is_an_error() {
    let cal = Calendar::new(ymd(2000, 1, 1), 0);
    let records = vec![record(0, ymd(2002, 5, 1), Outcome::None, None)];
    assert_eq!(make_splits(&records, &cal, &spec(), ymd(2004, 6, 1)), Err(EvalError::EmptySplit("train")));
}

#[test]
fn short_horizon_is_rejected() {
    let s = SplitSpec { horizon: Some(ymd(2003, 6, 1)), ..spec() };
    assert!(matches!(s.validate(), Err(EvalError::InvalidSplit(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splits_are_disjoint_and_ordered(seed in any::<u64>(), gap in 0u32..40) {
        let base = ymd(2000, 2, 1);
        let day = |n: u32| base + chrono::Days::new(n as u64);
        let spec = SplitSpec {
            train: DateRange::new(day(0), day(200)),
            validation_a: DateRange::new(day(201 + gap), day(260 + gap)),
            validation_b: DateRange::new(day(261 + gap), day(500 + gap)),
            test: DateRange::new(day(501 + gap), day(800 + gap)),
            horizon: None,
            success_window_months: 6,
        };
        let cal = Calendar::new(ymd(2000, 1, 1), 0);
        let records = random_records(seed, 300);
        if let Ok(s) = make_splits(&records, &cal, &spec, ymd(2004, 6, 1)) {
            let ids = |v: &[vcnet::eval::LabeledStartup]| v.iter().map(|x| x.startup).collect::<BTreeSet<NodeId>>();
            let (a, b, c) = (ids(&s.train), ids(&s.validation), ids(&s.test));
            prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
            let last = |v: &[vcnet::eval::LabeledStartup]| v.iter().map(|x| x.period).max();
            let first = |v: &[vcnet::eval::LabeledStartup]| v.iter().map(|x| x.period).min();
            if let (Some(x), Some(y)) = (last(&s.train), first(&s.test)) {
                prop_assert!(x < y);
            }
        }
    }
}

fn label_row(id: &str, period: u32, label: bool, sector: &str, second: bool, degree: usize) -> LabelRow {
    LabelRow {
        startup_id: id.into(),
        node: id[1..].parse().unwrap(),
        period,
        label,
        sector: sector.into(),
        in_lcc: degree > 2,
        second_round: second,
        degree,
    }
}

fn prediction(id: &str, period: u32, rank: usize, top: Option<&str>) -> PredictionRow {
    PredictionRow {
        startup_id: id.into(),
        period,
        probability: 1.0 / (rank as f64 + 1.0),
        rank,
        top_attention_person: top.map(String::from),
    }
}

#[test]
fn human_baseline_matches_filter_and_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let rows: Vec<LabelRow> = (0..300)
            .map(|i| label_row(&format!("s{i}"), 1, rng.gen_bool(0.2), "IT", rng.gen_bool(0.5), 0))
            .collect();
        let second: Vec<&LabelRow> = rows.iter().filter(|r| r.second_round).collect();
        let want = second.iter().filter(|r| r.label).count() as f64 / second.len() as f64;
        assert_eq!(human_investor_baseline(&rows), Ok(want));
    }
}

fn people() -> Vec<PersonRow> {
    let p = |id: &str, g: &str, d: &str, c: f64| PersonRow {
        person_id: id.into(),
        gender: g.into(),
        degree: d.into(),
        degree_centrality: c,
    };
    vec![
        p("p1", "Male", "Master", 4.0),
        p("p2", "Female", "Doctor", 2.0),
        p("p3", "Male", "Bachelor", 1.0),
        p("p4", "Unknown", "Master", 7.0),
        p("p5", "Male", "Other", 1.0),
    ]
}

#[test]
fn people_tally_matches_manual_count() {
    let preds = [prediction("s1", 1, 1, Some("p1")), prediction("s2", 1, 2, Some("p4")), prediction("s3", 1, 3, Some("p1"))];
    let selected: Vec<&PredictionRow> = preds.iter().collect();
    let a = selected_people_analysis(&selected, &people());
    assert_eq!(a.selected.count, 2);
    assert_eq!(a.selected.gender, BTreeMap::from([("Male".into(), 0.5), ("Unknown".into(), 0.5)]));
    assert_eq!(a.selected.degree, BTreeMap::from([("Master".into(), 1.0)]));
    assert_eq!(a.selected.mean_degree_centrality, Some(5.5));
    assert_eq!(a.test_set.count, 5);
    assert_eq!(a.test_set.gender["Male"], 0.6);
    assert_eq!(a.test_set.mean_degree_centrality, Some(3.0));

    let none = selected_people_analysis(&[], &people());
    assert_eq!(none.selected.count, 0);
    assert!(none.selected.gender.is_empty());
    assert_eq!(none.selected.mean_degree_centrality, None);
    assert_eq!(none.test_set, a.test_set);
}

#[test]
fn industry_rows_match_group_by() {
    let labels = vec![
        label_row("s1", 1, true, "IT", false, 3),
        label_row("s2", 1, false, "IT", false, 1),
        label_row("s3", 1, true, "B2B", false, 5),
        label_row("s4", 1, true, "B2B", false, 4),
        label_row("s5", 1, false, "B2B", false, 0),
    ];
    let preds = [prediction("s1", 1, 1, None), prediction("s3", 1, 2, None), prediction("s2", 1, 3, None)];
    let selected: Vec<&PredictionRow> = preds.iter().collect();
    let rows = industry_breakdown(&selected, &labels);
    assert_eq!(rows.len(), 2);
    let b2b = &rows[0];
    assert_eq!((b2b.sector.as_str(), b2b.selected, b2b.successes, b2b.total), ("B2B", 1, 1, 3));
    assert_eq!(b2b.precision, Some(1.0));
    assert_eq!(b2b.lcc_fraction, Some(1.0));
    let it = &rows[1];
    assert_eq!((it.selected, it.successes, it.total), (2, 1, 2));
    assert_eq!(it.precision, Some(0.5));
    assert_eq!(it.lcc_fraction, Some(0.5));
    assert_eq!(it.selected_ratio, 1.0);
}

#[test]
fn single_industry_precision_is_overall_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let labels: Vec<LabelRow> = (0..40).map(|i| label_row(&format!("s{i}"), 1, rng.gen_bool(0.3), "IT", false, 0)).collect();
    let preds: Vec<PredictionRow> = (0..40).map(|i| prediction(&format!("s{i}"), 1, i + 1, None)).collect();
    let top: Vec<&PredictionRow> = preds.iter().filter(|p| p.rank <= 10).collect();
    let rows = industry_breakdown(&top, &labels);
    let ranked: Vec<bool> = labels.iter().map(|l| l.label).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].precision, precision_at_k(&ranked, 10));
}

#[test]
fn degree_ranking_breaks_ties_by_node() {
    let labels = vec![
        label_row("s3", 1, true, "IT", false, 2),
        label_row("s1", 1, false, "IT", false, 2),
        label_row("s2", 1, false, "IT", false, 5),
    ];
    assert_eq!(degree_ranked(&labels)[&1], vec![false, false, true]);
}

#[test]
fn report_regenerates_from_exported_files() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    for t in 1..=12u32 {
        let n: usize = rng.gen_range(5..40);
        for r in 0..n {
            let id = format!("s{}", t as usize * 100 + r);
            labels.push(label_row(&id, t, rng.gen_bool(0.25), ["IT", "B2B"][r % 2], rng.gen_bool(0.5), rng.gen_range(0..6)));
            preds.push(prediction(&id, t, r + 1, Some(["p1", "p2", "p3"][r % 3])));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    write_rows(&dir.path().join("p.csv"), &preds).unwrap();
    write_rows(&dir.path().join("l.csv"), &labels).unwrap();
    write_rows(&dir.path().join("q.csv"), &people()).unwrap();
    let p2: Vec<PredictionRow> = read_rows(&dir.path().join("p.csv")).unwrap();
    let l2: Vec<LabelRow> = read_rows(&dir.path().join("l.csv")).unwrap();
    let q2: Vec<PersonRow> = read_rows(&dir.path().join("q.csv")).unwrap();
    assert_eq!((&p2, &l2), (&preds, &labels));
    let a = build_report(&preds, &labels, &people(), &[10, 20, 50], 10).unwrap();
    let b = build_report(&p2, &l2, &q2, &[10, 20, 50], 10).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_text(), b.to_text());
    for m in &a.months {
        assert!(m.precision.values().all(|p| (0.0..=1.0).contains(p)));
    }
    let by_month: Vec<Vec<bool>> =
        (1..=12).map(|t| labels.iter().filter(|l| l.period == t).map(|l| l.label).collect()).collect();
    assert!((a.ap[&10] - average_precision_at_k(&by_month, 10).unwrap()).abs() < 1e-12);
    assert_eq!(a.human_baseline, human_investor_baseline(&labels).ok());
}
