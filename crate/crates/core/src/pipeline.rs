//! End-to-end runs: ingest or generate, embed every period, train the
//! classifier, rank the test cohorts, export rows and evaluate them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, DataSource, RunConfig, SweepParam, SweepSpec};
use crate::data::{DataError, Dataset, RawData};
use crate::eval::{
    build_report, make_splits, read_rows, write_rows, EvalError, EvalReport, LabelRow, LabeledStartup, PersonRow,
    PredictionRow, Splits,
};
use crate::graph::{structural_stats, NodeId, NodeKind, Period, TemporalGraph};
use crate::incremental::{EmbeddingTable, IncrementalTrainer, LossRecord, TrainError};
use crate::numerics::{load_tensors, save_tensors, CheckpointError, Tensor};
use crate::predictor::{
    predict_cohort, train_classifier, AttributeEncoder, ClassifierTrace, EpochRecord, FeatureBuilder,
    LabeledFeatures, PredictError, SampleFeatures, SuccessModel,
};
use crate::synth::{
    fit_power_law, generate, planted_signal_audit, write_dataset, GroundTruth, PowerLawFit, SignalAudit, SynthError,
};

pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const PEOPLE_FILE: &str = "people.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const AUDIT_FILE: &str = "audit.json";
pub const INGEST_FILE: &str = "ingest.json";
pub const SIGNAL_AUDIT_FILE: &str = "signal_audit.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("missing artifact {0}; run the earlier stage first")]
    MissingArtifact(PathBuf),
}

impl PipelineError {
    /// 2 for configuration problems, 3 for data problems, 4 for numeric
    /// failures during training or prediction.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Synth(SynthError::InfeasibleConfig(_))
            | PipelineError::Train(TrainError::InvalidConfig(_))
            | PipelineError::Predict(PredictError::InvalidConfig(_))
            | PipelineError::Eval(EvalError::InvalidSplit(_)) => 2,
            PipelineError::Train(_) | PipelineError::Predict(_) | PipelineError::Checkpoint(_) => 4,
            _ => 3,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| PipelineError::Io { path: path.into(), source })
}

fn csv_out<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_rows(path, rows).map_err(|source| PipelineError::Csv { path: path.into(), source })
}

fn csv_in<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.into()));
    }
    read_rows(path).map_err(|source| PipelineError::Csv { path: path.into(), source })
}

fn json_out<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| PipelineError::Json { path: path.into(), source })?;
    io(path, std::fs::write(path, text + "\n"))
}

fn json_in<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.into()));
    }
    let text = io(path, std::fs::read_to_string(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: path.into(), source })
}

/// Raw tables from files or from the generator, with the planted truth for
/// synthetic data.
pub fn load_raw(cfg: &RunConfig) -> Result<(RawData, Option<GroundTruth>)> {
    match cfg.data.source {
        DataSource::Synthetic => {
            let (raw, truth) = generate(&cfg.synthetic)?;
            Ok((raw, Some(truth)))
        }
        DataSource::Files => {
            let dir = cfg.data.dir.as_deref().ok_or_else(|| ConfigError::Invalid("data.dir is not set".into()))?;
            Ok((RawData::read_dir(dir, &cfg.data.columns)?, None))
        }
    }
}

/// Typed records, the temporal graph and the labelled splits.
pub struct Prepared {
    pub dataset: Dataset,
    pub graph: TemporalGraph,
    pub splits: Splits,
    /// Last date present in the data.
    pub data_end: NaiveDate,
}

pub fn prepare(cfg: &RunConfig, raw: &RawData) -> Result<Prepared> {
    let data_end = raw.last_date().ok_or(EvalError::EmptySplit("train"))?;
    let dataset = Dataset::from_raw(raw, cfg.calendar())?;
    let graph = dataset.graph()?;
    let splits = make_splits(&dataset.startups, &dataset.calendar, &cfg.split, data_end)?;
    Ok(Prepared { dataset, graph, splits, data_end })
}

/// Everything learned in a run.
pub struct Trained {
    pub tables: Vec<EmbeddingTable>,
    pub embedder: IncrementalTrainer,
    pub embed_trace: Vec<LossRecord>,
    pub encoder: AttributeEncoder,
    pub model: SuccessModel,
    pub classifier_trace: ClassifierTrace,
}

fn build_features(
    cfg: &RunConfig,
    prep: &Prepared,
    tables: &[EmbeddingTable],
    encoder: &AttributeEncoder,
    items: impl IntoIterator<Item = (NodeId, Period)>,
) -> Result<Vec<SampleFeatures>> {
    let startup = |n: NodeId| prep.dataset.startup(n);
    let person = |n: NodeId| prep.dataset.person(n);
    let builder = FeatureBuilder {
        graph: &prep.graph,
        tables,
        encoder,
        startup_record: &startup,
        person_record: &person,
        lookback: cfg.classifier.lookback,
    };
    items.into_iter().map(|(s, t)| builder.build(s, t).map_err(Into::into)).collect()
}

fn labeled(
    cfg: &RunConfig,
    prep: &Prepared,
    tables: &[EmbeddingTable],
    encoder: &AttributeEncoder,
    items: &[LabeledStartup],
) -> Result<Vec<LabeledFeatures>> {
    let features = build_features(cfg, prep, tables, encoder, items.iter().map(|s| (s.startup, s.period)))?;
    Ok(features.into_iter().zip(items).map(|(features, s)| LabeledFeatures { features, label: s.label }).collect())
}

pub fn train(cfg: &RunConfig, prep: &Prepared) -> Result<Trained> {
    let mut embedder = IncrementalTrainer::new(cfg.gst_config(), cfg.train_config())?;
    let run = embedder.run_all_periods(&prep.graph)?;
    let records = prep.splits.train.iter().filter_map(|s| prep.dataset.startup(s.startup));
    let encoder = AttributeEncoder::fit(records);
    let train_set = labeled(cfg, prep, &run.tables, &encoder, &prep.splits.train)?;
    let val_set = labeled(cfg, prep, &run.tables, &encoder, &prep.splits.validation)?;
    let mut model = SuccessModel::new(cfg.model.d, cfg.gst_config(), &cfg.classifier, cfg.seed)?;
    let classifier_trace = train_classifier(&mut model, &train_set, &val_set, &cfg.classifier, cfg.seed)?;
    Ok(Trained {
        tables: run.tables,
        embedder,
        embed_trace: run.trace,
        encoder,
        model,
        classifier_trace,
    })
}

/// Start-ups first funded inside the test range, by period, optionally
/// restricted to `periods` (inclusive).
pub fn test_cohorts(cfg: &RunConfig, prep: &Prepared, periods: Option<(Period, Period)>) -> BTreeMap<Period, Vec<NodeId>> {
    let mut out: BTreeMap<Period, Vec<NodeId>> = BTreeMap::new();
    for r in &prep.dataset.startups {
        let Some(first) = r.first_funding_date() else { continue };
        if !cfg.split.test.contains(first) {
            continue;
        }
        let t = prep.dataset.calendar.period_of(first);
        if periods.map_or(true, |(a, b)| (a..=b).contains(&t)) {
            out.entry(t).or_default().push(r.node);
        }
    }
    out
}

/// Ranked predictions for every test cohort in `periods`.
pub fn predict(
    cfg: &RunConfig,
    prep: &Prepared,
    tables: &[EmbeddingTable],
    encoder: &AttributeEncoder,
    model: &SuccessModel,
    periods: Option<(Period, Period)>,
) -> Result<Vec<PredictionRow>> {
    let ext_id = |n: NodeId| match prep.dataset.startup(n) {
        Some(r) => r.external_id.clone(),
        None => prep.dataset.person(n).map_or_else(|| n.0.to_string(), |p| p.external_id.clone()),
    };
    let mut rows = Vec::new();
    for (t, cohort) in test_cohorts(cfg, prep, periods) {
        let samples = build_features(cfg, prep, tables, encoder, cohort.iter().map(|s| (*s, t)))?;
        for r in predict_cohort(model, &samples, cfg.classifier.batch_size)? {
            rows.push(PredictionRow {
                startup_id: ext_id(r.startup),
                period: r.period,
                probability: r.probability,
                rank: r.rank,
                top_attention_person: r.top_attention_person.map(ext_id),
            });
        }
    }
    Ok(rows)
}

/// Test labels plus the context the report needs.
pub fn label_rows(cfg: &RunConfig, prep: &Prepared) -> Vec<LabelRow> {
    let horizon = cfg.split.horizon.unwrap_or(prep.data_end);
    let mut lcc: BTreeMap<Period, Vec<bool>> = BTreeMap::new();
    prep.splits
        .test
        .iter()
        .filter_map(|s| {
            let r = prep.dataset.startup(s.startup)?;
            let members = lcc.entry(s.period).or_insert_with(|| structural_stats(&prep.graph, s.period).lcc_membership);
            Some(LabelRow {
                startup_id: r.external_id.clone(),
                node: s.startup.0,
                period: s.period,
                label: s.label,
                sector: r.industry.resolved_sector().map_or("Unknown", |x| x.name()).to_string(),
                in_lcc: members.get(s.startup.index()).copied().unwrap_or(false),
                second_round: r.has_second_round(Some(horizon)),
                degree: prep.graph.degree(s.startup, s.period),
            })
        })
        .collect()
}

/// Persons around the labelled test start-ups, with their degree as of the
/// last test period.
pub fn person_rows(prep: &Prepared) -> Vec<PersonRow> {
    let Some(last) = prep.splits.test.iter().map(|s| s.period).max() else { return Vec::new() };
    let mut people = BTreeSet::new();
    for s in &prep.splits.test {
        people.extend(prep.graph.neighbors(s.startup, s.period).filter(|n| prep.dataset.person(*n).is_some()));
    }
    people
        .into_iter()
        .filter_map(|n| {
            let p = prep.dataset.person(n)?;
            Some(PersonRow {
                person_id: p.external_id.clone(),
                gender: p.gender.name().to_string(),
                degree: p.degree.name().to_string(),
                degree_centrality: prep.graph.degree(n, last) as f64,
            })
        })
        .collect()
}

fn checkpoint_dir(out: &Path) -> PathBuf {
    out.join("checkpoints")
}

/// Parameters, tables, encoder and loss traces.
pub fn save_trained(out: &Path, trained: &Trained, write_embeddings: bool) -> Result<()> {
    let dir = checkpoint_dir(out);
    io(&dir, std::fs::create_dir_all(&dir))?;
    trained.embedder.stack.params.save(&dir.join("embedder_stack.ckpt"))?;
    trained.embedder.decoder.params.save(&dir.join("embedder_decoder.ckpt"))?;
    trained.model.head.params.save(&dir.join("head.ckpt"))?;
    trained.model.gst.params.save(&dir.join("fusion_stack.ckpt"))?;
    trained.model.lstm.params.save(&dir.join("sequence.ckpt"))?;
    let names: Vec<String> = trained.tables.iter().map(|t| format!("period.{}", t.period)).collect();
    let named: Vec<(&str, &Tensor)> = names.iter().map(String::as_str).zip(trained.tables.iter().map(|t| &t.vectors)).collect();
    save_tensors(&dir.join("tables.ckpt"), &named)?;
    json_out(&dir.join("encoder.json"), &trained.encoder)?;
    write_traces(out, trained)?;
    if write_embeddings {
        let emb = out.join("embeddings");
        io(&emb, std::fs::create_dir_all(&emb))?;
        for t in &trained.tables {
            let path = emb.join(format!("period_{:03}.csv", t.period));
            let mut w = csv::Writer::from_path(&path).map_err(|source| PipelineError::Csv { path: path.clone(), source })?;
            let mut header = vec!["node".to_string()];
            header.extend((0..t.dim()).map(|i| format!("v{i}")));
            let mut write = |rec: Vec<String>| w.write_record(&rec).map_err(|source| PipelineError::Csv { path: path.clone(), source });
            write(header)?;
            for i in 0..t.len() {
                let mut rec = vec![i.to_string()];
                rec.extend(t.vectors.row(i).iter().map(|v| v.to_string()));
                write(rec)?;
            }
            io(&path, w.flush())?;
        }
    }
    Ok(())
}

fn write_traces(out: &Path, trained: &Trained) -> Result<()> {
    csv_out(&out.join("embedding_loss.csv"), &trained.embed_trace)?;
    let rows: Vec<&EpochRecord> = trained.classifier_trace.epochs.iter().collect();
    csv_out(&out.join("classifier_loss.csv"), &rows)?;
    json_out(&out.join("classifier_trace.json"), &trained.classifier_trace)
}

/// Tables, encoder and classifier of an earlier `train` stage.
pub fn load_trained(cfg: &RunConfig, out: &Path) -> Result<(Vec<EmbeddingTable>, AttributeEncoder, SuccessModel)> {
    let dir = checkpoint_dir(out);
    let need = |name: &str| {
        let p = dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(PipelineError::MissingArtifact(p))
        }
    };
    let tables = load_tensors(&need("tables.ckpt")?)?
        .into_iter()
        .map(|(name, vectors)| {
            let period = name
                .strip_prefix("period.")
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| CheckpointError::Corrupt(format!("unexpected table name {name}")))?;
            Ok(EmbeddingTable { period, vectors })
        })
        .collect::<std::result::Result<Vec<_>, CheckpointError>>()?;
    let encoder: AttributeEncoder = json_in(&need("encoder.json")?)?;
    let mut model = SuccessModel::new(cfg.model.d, cfg.gst_config(), &cfg.classifier, cfg.seed)?;
    model.head.params.load_values(&need("head.ckpt")?)?;
    model.gst.params.load_values(&need("fusion_stack.ckpt")?)?;
    model.lstm.params.load_values(&need("sequence.ckpt")?)?;
    Ok((tables, encoder, model))
}

/// Writes the three row files used by the report.
pub fn export_rows(cfg: &RunConfig, prep: &Prepared, out: &Path, predictions: &[PredictionRow]) -> Result<()> {
    csv_out(&out.join(PREDICTIONS_FILE), predictions)?;
    csv_out(&out.join(LABELS_FILE), &label_rows(cfg, prep))?;
    csv_out(&out.join(PEOPLE_FILE), &person_rows(prep))
}

/// Builds the report from the exported rows in `out`.
pub fn evaluate(cfg: &RunConfig, out: &Path) -> Result<EvalReport> {
    let predictions: Vec<PredictionRow> = csv_in(&out.join(PREDICTIONS_FILE))?;
    let labels: Vec<LabelRow> = csv_in(&out.join(LABELS_FILE))?;
    let people: Vec<PersonRow> = csv_in(&out.join(PEOPLE_FILE))?;
    if labels.is_empty() {
        return Err(EvalError::EmptySplit("test").into());
    }
    let report = build_report(&predictions, &labels, &people, &cfg.eval.k, cfg.eval.selection_k)?;
    json_out(&out.join(REPORT_JSON), &report)?;
    io(&out.join(REPORT_TEXT), std::fs::write(out.join(REPORT_TEXT), report.to_text()))?;
    Ok(report)
}

/// Re-renders the text report from `report.json`.
pub fn render_report(out: &Path) -> Result<String> {
    let report: EvalReport = json_in(&out.join(REPORT_JSON))?;
    let text = report.to_text();
    io(&out.join(REPORT_TEXT), std::fs::write(out.join(REPORT_TEXT), &text))?;
    Ok(text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Relative path to SHA-256 of every artifact.
    pub files: BTreeMap<String, String>,
}

pub fn write_manifest(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let mut hashes = BTreeMap::new();
    for entry in walkdir::WalkDir::new(out).sort_by_file_name() {
        let entry = entry.map_err(|e| PipelineError::Io { path: out.to_path_buf(), source: e.into() })?;
        if !entry.file_type().is_file() || entry.file_name() == MANIFEST_FILE {
            continue;
        }
        let f = entry.path().strip_prefix(out).expect("inside root").to_path_buf();
        let bytes = io(&out.join(&f), std::fs::read(out.join(&f)))?;
        let key = f.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        hashes.insert(key, hex::encode(Sha256::digest(&bytes)));
    }
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_sha256: cfg.hash()?,
        files: hashes,
    };
    json_out(&out.join(MANIFEST_FILE), &m)?;
    Ok(m)
}

/// Writes the effective config and, for synthetic runs, the generated data.
pub fn start_run(cfg: &RunConfig, out: &Path) -> Result<(RawData, Option<GroundTruth>)> {
    cfg.validate()?;
    io(out, std::fs::create_dir_all(out))?;
    io(out, std::fs::write(out.join(CONFIG_FILE), cfg.to_toml()?))?;
    let (raw, truth) = load_raw(cfg)?;
    if let Some(truth) = &truth {
        let dir = out.join("data");
        io(&dir, std::fs::create_dir_all(&dir))?;
        write_dataset(&dir, &raw, truth)?;
    }
    Ok((raw, truth))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub period: Period,
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    pub lcc_fraction: f64,
}

/// Counts and structure of an ingested dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub startups: usize,
    pub persons: usize,
    pub events: usize,
    pub data_end: NaiveDate,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub periods: Vec<PeriodSummary>,
    /// Person degrees at the last period.
    pub person_degree_fit: Option<PowerLawFit>,
}

pub fn summarize(prep: &Prepared) -> IngestSummary {
    let g = &prep.graph;
    let periods = (0..=g.max_period())
        .map(|t| {
            let st = structural_stats(g, t);
            PeriodSummary {
                period: t,
                nodes: g.node_count_at(t),
                edges: g.edge_count_at(t),
                components: st.component_sizes.len(),
                lcc_fraction: st.lcc_fraction,
            }
        })
        .collect();
    let last = g.max_period();
    let degrees: Vec<usize> = g
        .nodes_as_of(last)
        .filter(|n| g.kind(*n) == NodeKind::Person)
        .map(|n| g.degree(n, last))
        .collect();
    IngestSummary {
        startups: prep.dataset.startups.len(),
        persons: prep.dataset.persons.len(),
        events: prep.dataset.events.len(),
        data_end: prep.data_end,
        train: prep.splits.train.len(),
        validation: prep.splits.validation.len(),
        test: prep.splits.test.len(),
        periods,
        person_degree_fit: fit_power_law(&degrees, POWER_LAW_MIN_TAIL),
    }
}

const POWER_LAW_MIN_TAIL: usize = 50;

/// Loads and validates the data, writing `ingest.json`.
pub fn ingest(cfg: &RunConfig, out: &Path) -> Result<IngestSummary> {
    let (raw, _) = start_run(cfg, out)?;
    let summary = summarize(&prepare(cfg, &raw)?);
    json_out(&out.join(INGEST_FILE), &summary)?;
    write_manifest(cfg, out)?;
    Ok(summary)
}

/// Writes synthetic data, its planted truth and the signal audit.
pub fn generate_data(cfg: &RunConfig, out: &Path) -> Result<SignalAudit> {
    if cfg.data.source != DataSource::Synthetic {
        return Err(ConfigError::Invalid("generate needs data.source = \"synthetic\"".into()).into());
    }
    let (raw, truth) = start_run(cfg, out)?;
    let audit = planted_signal_audit(&raw, &truth.expect("synthetic runs carry truth"));
    json_out(&out.join(SIGNAL_AUDIT_FILE), &audit)?;
    write_manifest(cfg, out)?;
    Ok(audit)
}

/// Trains both stages and always writes checkpoints.
pub fn train_stage(cfg: &RunConfig, out: &Path) -> Result<Trained> {
    let (raw, _) = start_run(cfg, out)?;
    let prep = prepare(cfg, &raw)?;
    let trained = train(cfg, &prep)?;
    save_trained(out, &trained, cfg.output.write_embeddings)?;
    write_manifest(cfg, out)?;
    Ok(trained)
}

/// Ranks test cohorts with the checkpoints of an earlier `train_stage`.
pub fn predict_stage(cfg: &RunConfig, out: &Path, periods: Option<(Period, Period)>) -> Result<Vec<PredictionRow>> {
    cfg.validate()?;
    let (raw, _) = load_raw(cfg)?;
    let prep = prepare(cfg, &raw)?;
    let (tables, encoder, model) = load_trained(cfg, out)?;
    let rows = predict(cfg, &prep, &tables, &encoder, &model, periods)?;
    export_rows(cfg, &prep, out, &rows)?;
    write_manifest(cfg, out)?;
    Ok(rows)
}

/// `evaluate` followed by a manifest refresh.
pub fn evaluate_stage(cfg: &RunConfig, out: &Path) -> Result<EvalReport> {
    let report = evaluate(cfg, out)?;
    write_manifest(cfg, out)?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Drop everything dated after this day before ingestion.
    pub truncate: Option<NaiveDate>,
    /// Test periods to rank, inclusive.
    pub periods: Option<(Period, Period)>,
}

pub struct RunOutput {
    pub predictions: Vec<PredictionRow>,
    pub report: Option<EvalReport>,
    pub trained: Trained,
}

/// Every stage in order, writing all artifacts under `out`.
pub fn run(cfg: &RunConfig, out: &Path, opts: RunOptions) -> Result<RunOutput> {
    let (raw, _) = start_run(cfg, out)?;
    let raw = match opts.truncate {
        Some(d) => raw.truncate(d),
        None => raw,
    };
    let prep = prepare(cfg, &raw)?;
    let trained = train(cfg, &prep)?;
    if cfg.output.checkpoints {
        save_trained(out, &trained, cfg.output.write_embeddings)?;
    } else {
        write_traces(out, &trained)?;
    }
    let predictions = predict(cfg, &prep, &trained.tables, &trained.encoder, &trained.model, opts.periods)?;
    export_rows(cfg, &prep, out, &predictions)?;
    let report = if prep.splits.test.is_empty() { None } else { Some(evaluate(cfg, out)?) };
    write_manifest(cfg, out)?;
    Ok(RunOutput { predictions, report, trained })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditMonth {
    pub period: Period,
    pub truncated_at: NaiveDate,
    pub rows: usize,
    pub identical: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub months: Vec<AuditMonth>,
    pub passed: bool,
}

fn csv_lines(rows: &[&PredictionRow]) -> Vec<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("utf-8 rows").lines().map(str::to_string).collect()
}

/// For every test period, reruns the whole pipeline on data cut at the end
/// of that month and checks its rows match the full run byte for byte.
pub fn audit_leakage(cfg: &RunConfig, out: &Path, periods: Option<(Period, Period)>) -> Result<AuditReport> {
    let (raw, _) = start_run(cfg, out)?;
    let prep = prepare(cfg, &raw)?;
    let full_model = train(cfg, &prep)?;
    let full = predict(cfg, &prep, &full_model.tables, &full_model.encoder, &full_model.model, periods)?;
    csv_out(&out.join(PREDICTIONS_FILE), &full)?;
    let mut months = Vec::new();
    for t in test_cohorts(cfg, &prep, periods).into_keys() {
        let cut = cfg.calendar().period_start(t + 1).pred_opt().expect("date after the minimum");
        let prep_t = prepare(cfg, &raw.truncate(cut))?;
        let trained = train(cfg, &prep_t)?;
        let rows = predict(cfg, &prep_t, &trained.tables, &trained.encoder, &trained.model, Some((t, t)))?;
        let mine: Vec<&PredictionRow> = rows.iter().collect();
        let theirs: Vec<&PredictionRow> = full.iter().filter(|r| r.period == t).collect();
        months.push(AuditMonth {
            period: t,
            truncated_at: cut,
            rows: theirs.len(),
            identical: csv_lines(&mine) == csv_lines(&theirs),
        });
    }
    let report = AuditReport { passed: !months.is_empty() && months.iter().all(|m| m.identical), months };
    json_out(&out.join(AUDIT_FILE), &report)?;
    write_manifest(cfg, out)?;
    Ok(report)
}

/// Outcome of one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub ap: BTreeMap<usize, f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub k_values: Vec<usize>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:>10}", self.param.name());
        for k in &self.k_values {
            s += &format!("  {:>7}", format!("AP@{k}"));
        }
        s.push('\n');
        for c in &self.cells {
            s += &format!("{:>10}", c.value);
            match &c.error {
                Some(e) => s += &format!("  failed: {e}"),
                None => {
                    for k in &self.k_values {
                        match c.ap.get(k) {
                            Some(ap) => s += &format!("  {:>6.1}%", 100.0 * ap),
                            None => s += &format!("  {:>7}", "-"),
                        }
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let wrap = |source| PipelineError::Csv { path: path.into(), source };
        let mut w = csv::Writer::from_path(path).map_err(wrap)?;
        let mut header = vec![self.param.name().to_string()];
        header.extend(self.k_values.iter().map(|k| format!("ap@{k}")));
        header.push("error".into());
        w.write_record(&header).map_err(wrap)?;
        for c in &self.cells {
            let mut rec = vec![c.value.to_string()];
            rec.extend(self.k_values.iter().map(|k| c.ap.get(k).map(f64::to_string).unwrap_or_default()));
            rec.push(c.error.clone().unwrap_or_default());
            w.write_record(&rec).map_err(wrap)?;
        }
        w.flush().map_err(|e| PipelineError::Io { path: path.into(), source: e })
    }
}

pub const SWEEP_FILE: &str = "sweep.csv";

/// One full run per value under `out/<param>_<value>/`. A failing value is
/// recorded in its row and the remaining values still run.
pub fn run_sweep(base: &RunConfig, spec: &SweepSpec, out: &Path) -> Result<SweepTable> {
    spec.validate()?;
    io(out, std::fs::create_dir_all(out))?;
    let mut cells = Vec::new();
    for (value, cfg) in spec.values.iter().zip(spec.configs(base)) {
        let dir = out.join(format!("{}_{value}", spec.param.name()));
        let cell = match run(&cfg, &dir, RunOptions::default()) {
            Ok(r) => SweepCell { value: *value, ap: r.report.map(|r| r.ap).unwrap_or_default(), error: None },
            Err(e) => SweepCell { value: *value, ap: BTreeMap::new(), error: Some(e.to_string()) },
        };
        cells.push(cell);
    }
    let table = SweepTable { param: spec.param, k_values: base.eval.k.clone(), cells };
    table.write_csv(&out.join(SWEEP_FILE))?;
    Ok(table)
}
