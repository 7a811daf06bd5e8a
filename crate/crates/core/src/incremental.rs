//! Period-by-period embedding training.
//!
//! Each period copies the previous table forward, gives new nodes random
//! rows, and fine-tunes only the rows of nodes near the period's increment.
//! The objective mixes a link-prediction head on the new edges (against
//! freshly sampled non-edges) with a node-type head on the affected nodes.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{GraphError, GraphIncrement, NodeId, NodeKind, Period, TemporalGraph};
use crate::gst::{forward_on_tape, GstConfig, GstError, GstStack, Neighborhood};
use crate::numerics::ops::{self, sigmoid_scalar};
use crate::numerics::{
    glorot, zeros_bias, Adam, AdamConfig, BoundParams, ParamId, ParamStore, Tape, Tensor, TensorError, Var,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("need {needed} non-edges but only {available} exist")]
    InsufficientNonEdges { needed: usize, available: usize },
    #[error("no embedding row for node {0}")]
    MissingEmbedding(NodeId),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("loss became {loss} at period {period}, epoch {epoch}")]
    NonFiniteLoss { period: Period, epoch: usize, loss: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gst(#[from] GstError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Per-period node embeddings; row `i` belongs to `NodeId(i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub period: Period,
    pub vectors: Tensor,
}

impl EmbeddingTable {
    pub fn empty(period: Period, dim: usize) -> Self {
        Self { period, vectors: Tensor::zeros(&[0, dim]) }
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn row(&self, node: NodeId) -> Option<&[f64]> {
        (node.index() < self.len()).then(|| self.vectors.row(node.index()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the link-prediction loss; the node-type loss gets `1 - beta`.
    pub beta: f64,
    pub epochs: usize,
    /// Non-edges drawn per positive edge.
    pub negative_ratio: usize,
    pub seed: u64,
    pub n_hops: usize,
    /// Score the person side of a link with this period's embeddings rather
    /// than the previous period's.
    pub lp_use_current: bool,
    /// New rows are drawn uniformly from `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            epochs: 50,
            negative_ratio: 1,
            seed: 0,
            n_hops: 3,
            lp_use_current: false,
            init_scale: 0.1,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(TrainError::InvalidConfig(format!("beta {} outside [0, 1]", self.beta)));
        }
        if self.epochs == 0 || self.negative_ratio == 0 || self.n_hops == 0 {
            return Err(TrainError::InvalidConfig(
                "epochs, negative_ratio and n_hops must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Link-prediction and node-type heads.
#[derive(Clone, Debug)]
pub struct Decoder {
    pub params: ParamStore,
    /// `d x d`
    pub link_w: ParamId,
    /// `1 x d`
    pub link_b: ParamId,
    /// `d x 1`
    pub class_w: ParamId,
    /// `1 x 1`
    pub class_b: ParamId,
}

impl Decoder {
    pub fn new<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let mut params = ParamStore::new();
        let link_w = params.add("decoder.link.w", glorot(rng, dim, dim));
        let link_b = params.add("decoder.link.b", zeros_bias(dim));
        let class_w = params.add("decoder.class.w", glorot(rng, dim, 1));
        let class_b = params.add("decoder.class.b", zeros_bias(1));
        Self { params, link_w, link_b, class_w, class_b }
    }

    pub fn zeroed(dim: usize) -> Self {
        let mut d = Self::new(dim, &mut rand::rngs::mock::StepRng::new(0, 0));
        d.params.zero_values();
        d
    }

    fn link_side(&self, row: &[f64]) -> Vec<f64> {
        let w = self.params.value(self.link_w);
        let b = self.params.value(self.link_b).data();
        (0..w.cols())
            .map(|j| sigmoid_scalar(row.iter().enumerate().map(|(i, x)| x * w.get(i, j)).sum::<f64>() + b[j]))
            .collect()
    }
}

fn lookup(table: &Tensor, node: NodeId) -> Result<&[f64], TrainError> {
    if node.index() < table.rows() {
        Ok(table.row(node.index()))
    } else {
        Err(TrainError::MissingEmbedding(node))
    }
}

/// Probability of a link between `u` (scored on `current`) and `v` (scored
/// on `previous`).
pub fn lp_score(
    dec: &Decoder,
    current: &Tensor,
    previous: &Tensor,
    u: NodeId,
    v: NodeId,
) -> Result<f64, TrainError> {
    let a = dec.link_side(lookup(current, u)?);
    let b = dec.link_side(lookup(previous, v)?);
    Ok(sigmoid_scalar(a.iter().zip(&b).map(|(x, y)| x * y).sum()))
}

/// Probability that `v` is a start-up.
pub fn nc_score(dec: &Decoder, current: &Tensor, v: NodeId) -> Result<f64, TrainError> {
    let row = lookup(current, v)?;
    let w = dec.params.value(dec.class_w);
    let b = dec.params.value(dec.class_b).item();
    Ok(sigmoid_scalar(row.iter().enumerate().map(|(i, x)| x * w.get(i, 0)).sum::<f64>() + b))
}

/// Link probabilities for row pairs `zu[i]`, `zv[i]` (`n x 1`).
pub fn link_prob_on_tape(
    tape: &mut Tape,
    dec: &Decoder,
    bound: &BoundParams,
    zu: Var,
    zv: Var,
) -> Result<Var, TrainError> {
    let (lw, lb) = (bound.var(dec.link_w), bound.var(dec.link_b));
    let au = tape.affine(zu, lw, lb)?;
    let su = tape.sigmoid(au)?;
    let av = tape.affine(zv, lw, lb)?;
    let sv = tape.sigmoid(av)?;
    let prod = tape.mul(su, sv)?;
    let d = tape.value(prod).cols();
    let ones = tape.constant(Tensor::filled(&[d, 1], 1.0));
    let dot = tape.matmul(prod, ones)?;
    Ok(tape.sigmoid(dot)?)
}

/// Start-up probabilities for the rows of `z` (`n x 1`).
pub fn class_prob_on_tape(tape: &mut Tape, dec: &Decoder, bound: &BoundParams, z: Var) -> Result<Var, TrainError> {
    let logit = tape.affine(z, bound.var(dec.class_w), bound.var(dec.class_b))?;
    Ok(tape.sigmoid(logit)?)
}

/// Copies `prev` and appends a random row for every node the increment
/// adds. New rows depend only on `(seed, period)`.
pub fn init_period_embeddings(
    prev: &EmbeddingTable,
    inc: &GraphIncrement,
    seed: u64,
    init_scale: f64,
) -> Result<EmbeddingTable, TrainError> {
    let d = prev.dim();
    let mut data = prev.vectors.data().to_vec();
    let mut rng = seed::rng(seed, &[seed::INIT, inc.period as u64]);
    let mut next = prev.len();
    for (node, _) in &inc.new_nodes {
        if node.index() != next {
            return Err(TrainError::InvalidConfig(format!(
                "new node {node} does not follow the previous table ({next} rows)"
            )));
        }
        next += 1;
        data.extend((0..d).map(|_| rng.gen_range(-init_scale..=init_scale)));
    }
    Ok(EmbeddingTable { period: inc.period, vectors: Tensor::matrix(next, d, data)? })
}

/// Draws (start-up, person) pairs that are not connected as-of a period.
#[derive(Clone, Debug)]
pub struct NegativeSampler<'g> {
    graph: &'g TemporalGraph,
    period: Period,
    persons: Vec<NodeId>,
    startups: Vec<NodeId>,
    non_edges: usize,
}

impl<'g> NegativeSampler<'g> {
    pub fn new(graph: &'g TemporalGraph, period: Period) -> Self {
        let mut persons = Vec::new();
        let mut startups = Vec::new();
        for n in graph.nodes_as_of(period) {
            match graph.kind(n) {
                NodeKind::Person => persons.push(n),
                NodeKind::StartUp => startups.push(n),
            }
        }
        let non_edges = persons.len() * startups.len() - graph.pair_count(period);
        Self { graph, period, persons, startups, non_edges }
    }

    pub fn non_edges(&self) -> usize {
        self.non_edges
    }

    /// `count` distinct non-edges as `(start-up, person)`.
    pub fn sample<R: Rng>(&self, count: usize, rng: &mut R) -> Result<Vec<(NodeId, NodeId)>, TrainError> {
        if count > self.non_edges {
            return Err(TrainError::InsufficientNonEdges { needed: count, available: self.non_edges });
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let (g, t) = (self.graph, self.period);
        if self.non_edges <= 4 * count {
            let mut all = Vec::with_capacity(self.non_edges);
            for &s in &self.startups {
                for &p in &self.persons {
                    if !g.has_pair(p, s, t) {
                        all.push((s, p));
                    }
                }
            }
            return Ok(sample(rng, all.len(), count).into_iter().map(|i| all[i]).collect());
        }
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let s = self.startups[rng.gen_range(0..self.startups.len())];
            let p = self.persons[rng.gen_range(0..self.persons.len())];
            if !g.has_pair(p, s, t) && chosen.insert((s, p)) {
                out.push((s, p));
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper around [`NegativeSampler`] keyed by a seed.
pub fn sample_negative_links(
    graph: &TemporalGraph,
    period: Period,
    count: usize,
    seed: u64,
) -> Result<Vec<(NodeId, NodeId)>, TrainError> {
    let mut rng = seed::rng(seed, &[seed::NEGATIVES, period as u64]);
    NegativeSampler::new(graph, period).sample(count, &mut rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub period: Period,
    pub epoch: usize,
    pub total: f64,
    pub link: f64,
    pub class: f64,
}

/// Distinct (start-up, person) pairs among the increment's edges, in order.
fn positive_pairs(inc: &GraphIncrement) -> Vec<(NodeId, NodeId)> {
    let mut seen = HashSet::new();
    inc.new_edges
        .iter()
        .map(|e| (e.startup, e.person))
        .filter(|p| seen.insert(*p))
        .collect()
}

/// The embedding model trained across periods: attention stack, decoder
/// heads and their optimiser state.
#[derive(Clone, Debug)]
pub struct IncrementalTrainer {
    pub config: TrainConfig,
    pub stack: GstStack,
    pub decoder: Decoder,
    stack_opt: Adam,
    decoder_opt: Adam,
}

#[derive(Clone, Debug, Default)]
pub struct TrainingRun {
    pub tables: Vec<EmbeddingTable>,
    pub trace: Vec<LossRecord>,
}

impl IncrementalTrainer {
    pub fn new(gst: GstConfig, config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let mut rng = seed::rng(config.seed, &[seed::MODEL]);
        let stack = GstStack::new(gst, "gst1", &mut rng)?;
        let decoder = Decoder::new(gst.dim, &mut rng);
        Ok(Self::from_parts(config, stack, decoder))
    }

    pub fn from_parts(config: TrainConfig, stack: GstStack, decoder: Decoder) -> Self {
        let stack_opt = Adam::new(config.adam, &stack.params);
        let decoder_opt = Adam::new(config.adam, &decoder.params);
        Self { config, stack, decoder, stack_opt, decoder_opt }
    }

    pub fn dim(&self) -> usize {
        self.stack.config.dim
    }

    /// Builds the table for `period` from `prev` (the table of
    /// `period - 1`, or `None` at period 0) and fine-tunes the affected rows.
    pub fn finetune_period(
        &mut self,
        graph: &TemporalGraph,
        period: Period,
        prev: Option<&EmbeddingTable>,
    ) -> Result<(EmbeddingTable, Vec<LossRecord>), TrainError> {
        let cfg = self.config;
        let d = self.dim();
        let inc = graph.increment(period)?;
        let empty = EmbeddingTable::empty(0, d);
        let prev_table = prev.unwrap_or(&empty);
        let mut table = init_period_embeddings(prev_table, &inc, cfg.seed, cfg.init_scale)?;
        if inc.is_empty() {
            return Ok((table, Vec::new()));
        }

        let affected = graph.affected_nodes(&inc, cfg.n_hops);
        let (nbhd, rows) = Neighborhood::from_graph(&affected, |n| graph.neighbors(n, period))?;
        let n_aff = affected.len();
        let local: HashMap<NodeId, usize> = affected.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let context_idx: Vec<usize> = rows[n_aff..].iter().map(|n| n.index()).collect();
        let context = ops::gather_rows(&table.vectors, &context_idx)?;
        let aff_idx: Vec<usize> = affected.iter().map(|n| n.index()).collect();

        let mut rows_store = ParamStore::new();
        let rows_id = rows_store.add("rows", ops::gather_rows(&table.vectors, &aff_idx)?);
        let mut rows_opt = Adam::new(cfg.adam, &rows_store);

        let positives = positive_pairs(&inc);
        let sampler = NegativeSampler::new(graph, period);
        let kinds: Vec<f64> = affected
            .iter()
            .map(|n| if graph.kind(*n) == NodeKind::StartUp { 1.0 } else { 0.0 })
            .collect();
        let class_targets = Tensor::matrix(n_aff, 1, kinds)?;

        let mut trace = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let mut rng = seed::rng(cfg.seed, &[seed::NEGATIVES, period as u64, epoch as u64]);
            let negatives = sampler.sample(positives.len() * cfg.negative_ratio, &mut rng)?;

            let mut tape = Tape::new();
            let gb = tape.bind(&self.stack.params);
            let db = tape.bind(&self.decoder.params);
            let rb = tape.bind(&rows_store);
            let trainable = rb.var(rows_id);
            let input = if context.rows() > 0 {
                let c = tape.constant(context.clone());
                tape.concat_rows(&[trainable, c])?
            } else {
                trainable
            };
            let out = forward_on_tape(&mut tape, &self.stack, &gb, input, &nbhd)?;

            let class_prob = class_prob_on_tape(&mut tape, &self.decoder, &db, out.targets)?;
            let class_loss = tape.bce(class_prob, class_targets.clone())?;

            let link_loss = if positives.is_empty() {
                None
            } else {
                // Rows that link scoring reads: this period's output for
                // affected nodes, fixed table rows for everything else.
                let mut extra: Vec<f64> = Vec::new();
                let mut n_extra = 0usize;
                let mut current_index = |node: NodeId, extra: &mut Vec<f64>| -> usize {
                    match local.get(&node) {
                        Some(&i) => i,
                        None => {
                            extra.extend_from_slice(table.vectors.row(node.index()));
                            n_extra += 1;
                            n_aff + n_extra - 1
                        }
                    }
                };
                let pairs: Vec<(NodeId, NodeId)> = positives.iter().chain(&negatives).copied().collect();
                let mut u_idx = Vec::with_capacity(pairs.len());
                let mut v_cur: Vec<Option<usize>> = Vec::with_capacity(pairs.len());
                for &(u, v) in &pairs {
                    u_idx.push(current_index(u, &mut extra));
                    let use_current = cfg.lp_use_current || v.index() >= prev_table.len();
                    v_cur.push(use_current.then(|| current_index(v, &mut extra)));
                }
                let n_current = n_aff + n_extra;
                let mut prev_rows: Vec<f64> = Vec::new();
                let mut v_idx = Vec::with_capacity(pairs.len());
                for (k, &(_, v)) in pairs.iter().enumerate() {
                    match v_cur[k] {
                        Some(i) => v_idx.push(i),
                        None => {
                            v_idx.push(n_current + prev_rows.len() / d);
                            prev_rows.extend_from_slice(prev_table.vectors.row(v.index()));
                        }
                    }
                }
                let mut parts = vec![out.targets];
                if !extra.is_empty() {
                    parts.push(tape.constant(Tensor::matrix(extra.len() / d, d, extra)?));
                }
                if !prev_rows.is_empty() {
                    parts.push(tape.constant(Tensor::matrix(prev_rows.len() / d, d, prev_rows)?));
                }
                let pool = if parts.len() == 1 { parts[0] } else { tape.concat_rows(&parts)? };
                let zu = tape.gather_rows(pool, Rc::from(u_idx))?;
                let zv = tape.gather_rows(pool, Rc::from(v_idx))?;
                let prob = link_prob_on_tape(&mut tape, &self.decoder, &db, zu, zv)?;
                let mut labels = vec![1.0; positives.len()];
                labels.resize(pairs.len(), 0.0);
                Some(tape.bce(prob, Tensor::matrix(pairs.len(), 1, labels)?)?)
            };

            let weighted_class = tape.scale(class_loss, 1.0 - cfg.beta)?;
            let loss = match link_loss {
                Some(l) => {
                    let wl = tape.scale(l, cfg.beta)?;
                    tape.add(wl, weighted_class)?
                }
                None => weighted_class,
            };
            let link_value = link_loss.map_or(0.0, |l| tape.value(l).item());
            let total = tape.value(loss).item();
            if !total.is_finite() {
                return Err(TrainError::NonFiniteLoss { period, epoch, loss: total });
            }
            trace.push(LossRecord {
                period,
                epoch,
                total,
                link: link_value,
                class: tape.value(class_loss).item(),
            });

            let grads = tape.backward(loss)?;
            self.stack.params.accumulate(&gb, &grads)?;
            self.decoder.params.accumulate(&db, &grads)?;
            rows_store.accumulate(&rb, &grads)?;
            self.stack_opt.step(&mut self.stack.params);
            self.decoder_opt.step(&mut self.decoder.params);
            rows_opt.step(&mut rows_store);
        }

        let trained = rows_store.value(rows_id);
        for (i, node) in affected.iter().enumerate() {
            table.vectors.row_mut(node.index()).copy_from_slice(trained.row(i));
        }
        Ok((table, trace))
    }

    /// Trains every period `0..=graph.max_period()` in order.
    pub fn run_all_periods(&mut self, graph: &TemporalGraph) -> Result<TrainingRun, TrainError> {
        let mut run = TrainingRun::default();
        for t in 0..=graph.max_period() {
            let (table, trace) = self.finetune_period(graph, t, run.tables.last())?;
            run.tables.push(table);
            run.trace.extend(trace);
        }
        Ok(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_decoder_scores() {
        let dec = Decoder::zeroed(4);
        let t = Tensor::matrix(2, 4, vec![0.3, -0.2, 0.9, 0.1, -1.0, 0.5, 0.2, 0.0]).unwrap();
        let p = lp_score(&dec, &t, &t, NodeId(0), NodeId(1)).unwrap();
        assert!((p - sigmoid_scalar(1.0)).abs() < 1e-15);
        assert!((p - 0.7311).abs() < 1e-4);
        assert_eq!(nc_score(&dec, &t, NodeId(1)).unwrap(), 0.5);
        assert_eq!(nc_score(&dec, &t, NodeId(2)), Err(TrainError::MissingEmbedding(NodeId(2))));
    }

    #[test]
    fn beta_outside_unit_interval_is_rejected() {
        let cfg = TrainConfig { beta: 1.5, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
