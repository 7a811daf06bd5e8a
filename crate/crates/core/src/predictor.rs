//! Success classifier: labels, attribute encoding, fusion and the MLP head.
//!
//! A sample is a start-up at the period of its first funding. Its 1-hop ego
//! network (the start-up and its persons as of that period) is embedded by a
//! dedicated GST stack:
//!
//! * start-up row: `[attributes ; LSTM(history)] W_s + b_s`
//! * person row: `[attributes ; table row] W_p + b_p`
//!
//! Every row of the ego network is a target and edges run both ways between
//! the start-up and each person. The start-up's output row goes through
//! `tanh -> tanh -> sigmoid` dense layers.
//!
//! Start-up attribute layout (58 slots):
//!
//! | slots | content |
//! |-------|---------|
//! | 0..41 | second-tier industry label, one-hot |
//! | 41 | industry Other |
//! | 42..50 | first deal type, one-hot (last slot is Other) |
//! | 50, 51 | latitude, longitude |
//! | 52 | `ln(1 + first round amount)` |
//! | 53 | months from founding to first funding |
//! | 54..58 | zero padding |
//!
//! Person layout (31 slots): gender one-hot `0..3`, degree one-hot `3..7`,
//! zero padding `7..31`. Numeric slots are standardized with training-split
//! statistics; a missing value becomes the mean (zero).

use std::collections::BTreeMap;
use std::rc::Rc;

use chrono::{Datelike, Months, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::average_precision_at_k;
use crate::graph::{
    DealType, Degree, Gender, NodeId, NodeKind, Period, PersonRecord, StartUpRecord, TemporalGraph, INDUSTRY_LABELS,
};
use crate::gst::{attention_records, forward_on_tape, top_attention_person, GstConfig, GstError, GstStack, Neighborhood};
use crate::incremental::EmbeddingTable;
use crate::numerics::{glorot, zeros_bias, Adam, AdamConfig, BoundParams, ParamId, ParamStore, Tape, Tensor, TensorError, Var};
use crate::seed;
use crate::sequence::{build_sequence, EmbeddingSequence, SequenceEncoder, SequenceError};

pub const STARTUP_ATTR_DIM: usize = 58;
pub const PERSON_ATTR_DIM: usize = 31;
pub const INDUSTRY_OTHER: usize = 41;
pub const DEAL_OFFSET: usize = 42;
pub const LATITUDE: usize = 50;
pub const LONGITUDE: usize = 51;
pub const AMOUNT: usize = 52;
pub const AGE: usize = 53;
pub const GENDER_OFFSET: usize = 0;
pub const DEGREE_OFFSET: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("start-up {0} has no funding round")]
    MissingFirstFunding(NodeId),
    #[error("node {0} has no embedding")]
    MissingEmbedding(NodeId),
    #[error("no record for node {0}")]
    MissingRecord(NodeId),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("classifier loss became {loss} in epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error(transparent)]
    Gst(#[from] GstError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SuccessLabel {
    Success,
    Failure,
    Censored,
}

impl SuccessLabel {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            SuccessLabel::Success => Some(true),
            SuccessLabel::Failure => Some(false),
            SuccessLabel::Censored => None,
        }
    }
}

/// Outcome label seen from `horizon`: success when an exit falls within
/// `window_months` of the first round and no later than `horizon`; failure
/// once the whole window is observed without one; censored otherwise.
pub fn make_label(record: &StartUpRecord, horizon: NaiveDate, window_months: u32) -> Result<SuccessLabel, PredictError> {
    let first = record.first_funding_date().ok_or(PredictError::MissingFirstFunding(record.node))?;
    let window_end = first + Months::new(window_months);
    if let Some(exit) = record.outcome.date() {
        if exit <= window_end && exit <= horizon {
            return Ok(SuccessLabel::Success);
        }
    }
    Ok(if horizon >= window_end { SuccessLabel::Failure } else { SuccessLabel::Censored })
}

fn months_between(from: NaiveDate, to: NaiveDate) -> i64 {
    (to.year() as i64 - from.year() as i64) * 12 + to.month() as i64 - from.month() as i64
}

/// Categories seen in the training split. Unseen ones encode as Other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeVocab {
    pub industries: Vec<bool>,
    pub deals: Vec<bool>,
}

/// Per-slot mean and standard deviation of the numeric start-up fields
/// (latitude, longitude, amount, age).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeEncoder {
    pub vocab: AttributeVocab,
    pub scaler: Scaler,
}

fn raw_numeric(r: &StartUpRecord) -> [Option<f64>; 4] {
    let first = r.first_funding();
    [
        r.location.map(|l| l.0),
        r.location.map(|l| l.1),
        first.and_then(|f| f.amount).map(f64::ln_1p),
        first.map(|f| months_between(r.founded, f.date).max(0) as f64),
    ]
}

impl AttributeEncoder {
    pub fn fit<'a>(training: impl IntoIterator<Item = &'a StartUpRecord>) -> Self {
        let mut industries = vec![false; INDUSTRY_LABELS.len()];
        let mut deals = vec![false; DealType::ALL.len()];
        let mut sums = [0.0; 4];
        let mut squares = [0.0; 4];
        let mut counts = [0usize; 4];
        for r in training {
            if let Some(i) = r.industry.label_index() {
                industries[i] = true;
            }
            if let Some(f) = r.first_funding() {
                deals[deal_slot(f.deal_type)] = true;
            }
            for (k, v) in raw_numeric(r).iter().enumerate() {
                if let Some(v) = v {
                    sums[k] += v;
                    squares[k] += v * v;
                    counts[k] += 1;
                }
            }
        }
        let mut mean = [0.0; 4];
        let mut std = [1.0; 4];
        for k in 0..4 {
            if counts[k] > 0 {
                let n = counts[k] as f64;
                mean[k] = sums[k] / n;
                let var = (squares[k] / n - mean[k] * mean[k]).max(0.0);
                if var > 1e-12 {
                    std[k] = var.sqrt();
                }
            }
        }
        Self { vocab: AttributeVocab { industries, deals }, scaler: Scaler { mean, std } }
    }

    pub fn encode_startup(&self, r: &StartUpRecord) -> Vec<f64> {
        let mut v = vec![0.0; STARTUP_ATTR_DIM];
        let slot = r.industry.label_index().filter(|&i| self.vocab.industries[i]).unwrap_or(INDUSTRY_OTHER);
        v[slot] = 1.0;
        let deal = r.first_funding().map_or(DealType::Other, |f| f.deal_type);
        let d = deal_slot(deal);
        let d = if self.vocab.deals[d] { d } else { deal_slot(DealType::Other) };
        v[DEAL_OFFSET + d] = 1.0;
        for (k, x) in raw_numeric(r).iter().enumerate() {
            if let Some(x) = x {
                v[LATITUDE + k] = (x - self.scaler.mean[k]) / self.scaler.std[k];
            }
        }
        v
    }

    pub fn encode_person(&self, p: &PersonRecord) -> Vec<f64> {
        encode_person(p)
    }
}

fn deal_slot(d: DealType) -> usize {
    DealType::ALL.iter().position(|x| *x == d).expect("deal type listed")
}

/// Person layout has no learned vocabulary: both groups are closed.
pub fn encode_person(p: &PersonRecord) -> Vec<f64> {
    let mut v = vec![0.0; PERSON_ATTR_DIM];
    v[GENDER_OFFSET + Gender::ALL.iter().position(|g| *g == p.gender).expect("gender listed")] = 1.0;
    v[DEGREE_OFFSET + Degree::ALL.iter().position(|d| *d == p.degree).expect("degree listed")] = 1.0;
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub hidden: [usize; 2],
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without a better validation AP before stopping.
    pub patience: usize,
    /// K of the validation AP used for early stopping.
    pub stop_k: usize,
    pub lookback: usize,
    pub freeze_sequence: bool,
    pub adam: AdamConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: [64, 32],
            epochs: 40,
            batch_size: 256,
            patience: 8,
            stop_k: 50,
            lookback: 12,
            freeze_sequence: false,
            adam: AdamConfig::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), PredictError> {
        if self.hidden.contains(&0) || self.batch_size == 0 || self.stop_k == 0 {
            return Err(PredictError::InvalidConfig("widths, batch size and K must be positive".into()));
        }
        Ok(())
    }
}

/// Projections and the dense head.
#[derive(Clone, Debug)]
pub struct Head {
    pub params: ParamStore,
    pub startup_w: ParamId,
    pub startup_b: ParamId,
    pub person_w: ParamId,
    pub person_b: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub w3: ParamId,
    pub b3: ParamId,
}

impl Head {
    pub fn new<R: Rng>(dim: usize, hidden: [usize; 2], rng: &mut R) -> Self {
        let mut p = ParamStore::new();
        let startup_w = p.add("proj.startup.w", glorot(rng, STARTUP_ATTR_DIM + dim, dim));
        let startup_b = p.add("proj.startup.b", zeros_bias(dim));
        let person_w = p.add("proj.person.w", glorot(rng, PERSON_ATTR_DIM + dim, dim));
        let person_b = p.add("proj.person.b", zeros_bias(dim));
        let w1 = p.add("mlp.1.w", glorot(rng, dim, hidden[0]));
        let b1 = p.add("mlp.1.b", zeros_bias(hidden[0]));
        let w2 = p.add("mlp.2.w", glorot(rng, hidden[0], hidden[1]));
        let b2 = p.add("mlp.2.b", zeros_bias(hidden[1]));
        let w3 = p.add("mlp.3.w", glorot(rng, hidden[1], 1));
        let b3 = p.add("mlp.3.b", zeros_bias(1));
        Self { params: p, startup_w, startup_b, person_w, person_b, w1, b1, w2, b2, w3, b3 }
    }

    /// `sigmoid(tanh(tanh(z W1 + b1) W2 + b2) W3 + b3)` for each row of `z`.
    pub fn mlp_on_tape(&self, tape: &mut Tape, bound: &BoundParams, z: Var) -> Result<Var, TensorError> {
        let a = tape.affine(z, bound.var(self.w1), bound.var(self.b1))?;
        let a = tape.tanh(a)?;
        let a = tape.affine(a, bound.var(self.w2), bound.var(self.b2))?;
        let a = tape.tanh(a)?;
        let a = tape.affine(a, bound.var(self.w3), bound.var(self.b3))?;
        tape.sigmoid(a)
    }
}

#[derive(Clone, Debug)]
pub struct SuccessModel {
    pub dim: usize,
    pub head: Head,
    pub gst: GstStack,
    pub lstm: SequenceEncoder,
}

/// Everything the model reads for one start-up at one period.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleFeatures {
    pub startup: NodeId,
    pub period: Period,
    pub attributes: Vec<f64>,
    pub sequence: EmbeddingSequence,
    /// Person neighbours as of `period`, ascending.
    pub persons: Vec<NodeId>,
    /// Per person, attributes followed by its table row.
    pub person_inputs: Vec<Vec<f64>>,
}

/// Assembles [`SampleFeatures`] from period tables and records.
pub struct FeatureBuilder<'a> {
    pub graph: &'a TemporalGraph,
    /// `tables[p]` is the period-`p` table.
    pub tables: &'a [EmbeddingTable],
    pub encoder: &'a AttributeEncoder,
    pub startup_record: &'a dyn Fn(NodeId) -> Option<&'a StartUpRecord>,
    pub person_record: &'a dyn Fn(NodeId) -> Option<&'a PersonRecord>,
    pub lookback: usize,
}

impl FeatureBuilder<'_> {
    pub fn build(&self, startup: NodeId, period: Period) -> Result<SampleFeatures, PredictError> {
        let record = (self.startup_record)(startup).ok_or(PredictError::MissingRecord(startup))?;
        let attributes = self.encoder.encode_startup(record);
        let sequence = build_sequence(self.tables, startup, period as usize, self.lookback)?;
        let table = &self.tables[period as usize];
        let mut persons: Vec<NodeId> = self
            .graph
            .neighbors(startup, period)
            .filter(|n| self.graph.kind(*n) == NodeKind::Person)
            .collect();
        persons.sort();
        let mut person_inputs = Vec::with_capacity(persons.len());
        for &p in &persons {
            let rec = (self.person_record)(p).ok_or(PredictError::MissingRecord(p))?;
            let mut v = encode_person(rec);
            v.extend_from_slice(table.row(p).ok_or(PredictError::MissingEmbedding(p))?);
            person_inputs.push(v);
        }
        Ok(SampleFeatures { startup, period, attributes, sequence, persons, person_inputs })
    }
}

/// Tape bindings of the three parameter groups.
pub struct ModelBindings {
    pub head: BoundParams,
    pub gst: BoundParams,
    pub lstm: BoundParams,
}

/// Tape handles of a batch forward pass.
pub struct BatchForward {
    /// `batch x d` fused start-up rows.
    pub fused: Var,
    /// `batch x 1` success probabilities.
    pub probability: Var,
    pub records: Vec<crate::gst::AttentionRecord>,
}

impl SuccessModel {
    pub fn new(dim: usize, gst: GstConfig, cfg: &ClassifierConfig, seed_base: u64) -> Result<Self, PredictError> {
        if gst.dim != dim {
            return Err(PredictError::InvalidConfig("fusion stack width must equal the embedding width".into()));
        }
        let mut rng = seed::rng(seed_base, &[seed::CLASSIFIER]);
        let head = Head::new(dim, cfg.hidden, &mut rng);
        let gst = GstStack::new(gst, "gst2", &mut rng)?;
        let lstm = SequenceEncoder::new(dim, dim, &mut rng);
        Ok(Self { dim, head, gst, lstm })
    }

    pub fn bind(&self, tape: &mut Tape, freeze_sequence: bool) -> ModelBindings {
        ModelBindings {
            head: tape.bind(&self.head.params),
            gst: tape.bind(&self.gst.params),
            lstm: if freeze_sequence { tape.bind_frozen(&self.lstm.params) } else { tape.bind(&self.lstm.params) },
        }
    }

    pub fn bind_frozen(&self, tape: &mut Tape) -> ModelBindings {
        ModelBindings {
            head: tape.bind_frozen(&self.head.params),
            gst: tape.bind_frozen(&self.gst.params),
            lstm: tape.bind_frozen(&self.lstm.params),
        }
    }

    /// Fused start-up rows of a batch, with the fusion stack's attention.
    pub fn fuse_on_tape(
        &self,
        tape: &mut Tape,
        b: &ModelBindings,
        batch: &[&SampleFeatures],
    ) -> Result<(Var, Vec<crate::gst::AttentionRecord>), PredictError> {
        let n = batch.len();
        let d = self.dim;
        let seqs: Vec<&EmbeddingSequence> = batch.iter().map(|s| &s.sequence).collect();
        let history = self.lstm.encode_on_tape(tape, &b.lstm, &seqs)?;
        let mut attrs = Vec::with_capacity(n * STARTUP_ATTR_DIM);
        for s in batch {
            if s.attributes.len() != STARTUP_ATTR_DIM {
                return Err(GstError::DimensionMismatch { expected: STARTUP_ATTR_DIM, got: s.attributes.len() }.into());
            }
            attrs.extend_from_slice(&s.attributes);
        }
        let attrs = tape.constant(Tensor::matrix(n, STARTUP_ATTR_DIM, attrs)?);
        let joined = tape.concat_cols(&[attrs, history])?;
        let startup_rows = tape.affine(joined, b.head.var(self.head.startup_w), b.head.var(self.head.startup_b))?;

        let mut rows: Vec<NodeId> = batch.iter().map(|s| s.startup).collect();
        let mut person_in = Vec::new();
        let mut edges = Vec::new();
        for (i, s) in batch.iter().enumerate() {
            for (p, input) in s.persons.iter().zip(&s.person_inputs) {
                if input.len() != PERSON_ATTR_DIM + d {
                    return Err(GstError::DimensionMismatch { expected: PERSON_ATTR_DIM + d, got: input.len() }.into());
                }
                let r = rows.len();
                rows.push(*p);
                person_in.extend_from_slice(input);
                edges.push((i, r));
                edges.push((r, i));
            }
        }
        let n_persons = rows.len() - n;
        let input = if n_persons == 0 {
            startup_rows
        } else {
            let x = tape.constant(Tensor::matrix(n_persons, PERSON_ATTR_DIM + d, person_in)?);
            let person_rows = tape.affine(x, b.head.var(self.head.person_w), b.head.var(self.head.person_b))?;
            tape.concat_rows(&[startup_rows, person_rows])?
        };
        let nbhd = Neighborhood::new(rows.len(), rows.len(), &edges)?;
        let out = forward_on_tape(tape, &self.gst, &b.gst, input, &nbhd)?;
        let records = attention_records(tape, &out, &nbhd, &rows);
        let idx: Rc<[usize]> = (0..n).collect();
        let fused = tape.gather_rows(out.targets, idx)?;
        Ok((fused, records))
    }

    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        b: &ModelBindings,
        batch: &[&SampleFeatures],
    ) -> Result<BatchForward, PredictError> {
        let (fused, records) = self.fuse_on_tape(tape, b, batch)?;
        let probability = self.head.mlp_on_tape(tape, &b.head, fused)?;
        Ok(BatchForward { fused, probability, records })
    }

    /// Fused representation of one start-up.
    pub fn fuse(&self, sample: &SampleFeatures) -> Result<Vec<f64>, PredictError> {
        let mut tape = Tape::new();
        let b = self.bind_frozen(&mut tape);
        let (z, _) = self.fuse_on_tape(&mut tape, &b, &[sample])?;
        Ok(tape.value(z).data().to_vec())
    }

    /// Success probability of a fused representation.
    pub fn predict(&self, z: &[f64]) -> Result<f64, PredictError> {
        predict(&self.head, z)
    }

    /// Probabilities and top-attention persons for a list of samples.
    pub fn score(
        &self,
        samples: &[&SampleFeatures],
        batch_size: usize,
    ) -> Result<Vec<(f64, Option<NodeId>)>, PredictError> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(batch_size.max(1)) {
            let mut tape = Tape::new();
            let b = self.bind_frozen(&mut tape);
            let f = self.forward_on_tape(&mut tape, &b, chunk)?;
            let probs = tape.value(f.probability).data().to_vec();
            for (s, p) in chunk.iter().zip(probs) {
                let top = top_attention_person(&f.records, s.startup, |n| {
                    if n == s.startup {
                        NodeKind::StartUp
                    } else {
                        NodeKind::Person
                    }
                });
                out.push((p, top));
            }
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.head.params.total_elements() + self.gst.params.total_elements() + self.lstm.params.total_elements()
    }
}

/// Dense head on a single fused vector.
pub fn predict(head: &Head, z: &[f64]) -> Result<f64, PredictError> {
    let mut tape = Tape::new();
    let b = tape.bind_frozen(&head.params);
    let x = tape.constant(Tensor::matrix(1, z.len(), z.to_vec())?);
    let p = head.mlp_on_tape(&mut tape, &b, x)?;
    Ok(tape.value(p).item())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeatures {
    pub features: SampleFeatures,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub validation_ap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTrace {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Validation AP@K with one ranked list per period.
pub fn validation_ap(
    model: &SuccessModel,
    validation: &[LabeledFeatures],
    k: usize,
    batch_size: usize,
) -> Result<Option<f64>, PredictError> {
    if validation.is_empty() {
        return Ok(None);
    }
    let samples: Vec<&SampleFeatures> = validation.iter().map(|v| &v.features).collect();
    let scores = model.score(&samples, batch_size)?;
    let mut months: BTreeMap<Period, Vec<(f64, NodeId, bool)>> = BTreeMap::new();
    for (v, (p, _)) in validation.iter().zip(scores) {
        months.entry(v.features.period).or_default().push((p, v.features.startup, v.label));
    }
    let ranked: Vec<Vec<bool>> = months
        .into_values()
        .map(|mut m| {
            m.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            m.into_iter().map(|x| x.2).collect()
        })
        .collect();
    Ok(average_precision_at_k(&ranked, k).ok())
}

/// Mini-batch Adam on the mean cross-entropy. After each epoch the
/// validation AP@K is measured; the best epoch's parameters are kept and
/// training stops after `patience` epochs without improvement.
pub fn train_classifier(
    model: &mut SuccessModel,
    train: &[LabeledFeatures],
    validation: &[LabeledFeatures],
    cfg: &ClassifierConfig,
    seed_base: u64,
) -> Result<ClassifierTrace, PredictError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    let mut opt_head = Adam::new(cfg.adam, &model.head.params);
    let mut opt_gst = Adam::new(cfg.adam, &model.gst.params);
    let mut opt_lstm = Adam::new(cfg.adam, &model.lstm.params);
    let mut best: Option<(f64, usize, SuccessModel)> = None;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed_base, &[seed::SHUFFLE, epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SampleFeatures> = chunk.iter().map(|&i| &train[i].features).collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| train[i].label as u8 as f64).collect();
            let mut tape = Tape::new();
            let b = model.bind(&mut tape, cfg.freeze_sequence);
            let f = model.forward_on_tape(&mut tape, &b, &batch)?;
            let loss = tape.bce(f.probability, Tensor::matrix(chunk.len(), 1, targets)?)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(PredictError::NonFiniteLoss { epoch, loss: value });
            }
            total += value * chunk.len() as f64;
            let grads = tape.backward(loss)?;
            model.head.params.accumulate(&b.head, &grads)?;
            model.gst.params.accumulate(&b.gst, &grads)?;
            opt_head.step(&mut model.head.params);
            opt_gst.step(&mut model.gst.params);
            if !cfg.freeze_sequence {
                model.lstm.params.accumulate(&b.lstm, &grads)?;
                opt_lstm.step(&mut model.lstm.params);
            }
        }
        let ap = validation_ap(model, validation, cfg.stop_k, cfg.batch_size)?;
        epochs.push(EpochRecord { epoch, loss: total / train.len() as f64, validation_ap: ap });
        let Some(ap) = ap else { continue };
        if best.as_ref().map_or(true, |(b, _, _)| ap > *b) {
            best = Some((ap, epoch, model.clone()));
        } else if best.as_ref().is_some_and(|(_, e, _)| epoch - e >= cfg.patience) {
            break;
        }
    }
    let best_epoch = match best {
        Some((_, e, m)) => {
            *model = m;
            e
        }
        None => epochs.len().saturating_sub(1),
    };
    Ok(ClassifierTrace { epochs, best_epoch })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub startup: NodeId,
    pub period: Period,
    pub probability: f64,
    pub rank: usize,
    pub top_attention_person: Option<NodeId>,
}

/// Ranks a cohort by probability, highest first; ties by node id.
pub fn predict_cohort(
    model: &SuccessModel,
    cohort: &[SampleFeatures],
    batch_size: usize,
) -> Result<Vec<PredictionRecord>, PredictError> {
    let samples: Vec<&SampleFeatures> = cohort.iter().collect();
    let scores = model.score(&samples, batch_size)?;
    let mut out: Vec<PredictionRecord> = cohort
        .iter()
        .zip(scores)
        .map(|(s, (probability, top))| PredictionRecord {
            startup: s.startup,
            period: s.period,
            probability,
            rank: 0,
            top_attention_person: top,
        })
        .collect();
    out.sort_by(|a, b| b.probability.total_cmp(&a.probability).then(a.startup.cmp(&b.startup)));
    for (i, r) in out.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(out)
}
