//! Multi-head graph self-attention with a residual update.
//!
//! Each layer scores every neighbour of a target with scaled dot-product
//! attention, mixes the head-weighted values through an information matrix,
//! and adds the result back onto the target through a concatenation
//! projection:
//!
//! ```text
//! a_h(s, t) = softmax_{s in N(t)} (K_h(s) . Q_h(t) / sqrt(d_head))
//! info(t)   = (sum_s  concat_h a_h(s, t) V_h(s)) W_info
//! H'(t)     = [H(t) ; info(t)] W_update + H(t)
//! ```
//!
//! Computation runs over a *working set*: targets occupy the leading rows
//! and are updated layer by layer; the remaining rows are neighbours that
//! stay frozen at their input values.

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, NodeKind};
use crate::numerics::{glorot, BoundParams, ParamId, ParamStore, Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GstError {
    #[error("no embedding row for node {0}")]
    MissingEmbedding(NodeId),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid attention configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GstConfig {
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    /// Scale scores by sqrt(dim) instead of sqrt(dim / heads).
    pub scale_full_d: bool,
}

impl Default for GstConfig {
    fn default() -> Self {
        Self { dim: 64, heads: 8, layers: 3, scale_full_d: false }
    }
}

impl GstConfig {
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn validate(&self) -> Result<(), GstError> {
        if self.dim == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return Err(GstError::InvalidConfig(format!(
                "dim {} must be a positive multiple of heads {}",
                self.dim, self.heads
            )));
        }
        if self.layers == 0 {
            return Err(GstError::InvalidConfig("at least one layer is required".into()));
        }
        Ok(())
    }

    fn score_scale(&self) -> f64 {
        let denom = if self.scale_full_d { self.dim } else { self.head_dim() };
        1.0 / (denom as f64).sqrt()
    }
}

/// Parameter handles of one layer inside [`GstStack::params`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GstLayer {
    pub key: ParamId,
    pub query: ParamId,
    pub value: ParamId,
    /// `d x d`, mixes the concatenated heads.
    pub info: ParamId,
    /// `2d x d`, projects `[H ; info]` back to `d`.
    pub update: ParamId,
}

#[derive(Clone, Debug)]
pub struct GstStack {
    pub config: GstConfig,
    pub params: ParamStore,
    pub layers: Vec<GstLayer>,
}

impl GstStack {
    pub fn new<R: Rng>(config: GstConfig, prefix: &str, rng: &mut R) -> Result<Self, GstError> {
        config.validate()?;
        let d = config.dim;
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let mut add = |name: &str, rows: usize| {
                params.add(format!("{prefix}.{l}.{name}"), glorot(rng, rows, d))
            };
            let key = add("key", d);
            let query = add("query", d);
            let value = add("value", d);
            let info = add("info", d);
            let update = add("update", 2 * d);
            layers.push(GstLayer { key, query, value, info, update });
        }
        Ok(Self { config, params, layers })
    }

    /// A stack whose weights are all zero; it maps every input to itself.
    pub fn zeroed(config: GstConfig, prefix: &str) -> Result<Self, GstError> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut stack = Self::new(config, prefix, &mut rng)?;
        stack.params.zero_values();
        Ok(stack)
    }
}

/// Working-set topology: rows `0..n_targets` are targets, the rest frozen
/// context. Each edge lets `source` inform `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhood {
    pub n_targets: usize,
    pub n_rows: usize,
    pub edge_target: Rc<[usize]>,
    pub edge_source: Rc<[usize]>,
}

impl Neighborhood {
    pub fn new(n_targets: usize, n_rows: usize, edges: &[(usize, usize)]) -> Result<Self, GstError> {
        if n_targets > n_rows {
            return Err(GstError::InvalidConfig("more targets than working rows".into()));
        }
        for &(t, s) in edges {
            if t >= n_targets {
                return Err(TensorError::IndexOutOfRange { index: t, len: n_targets }.into());
            }
            if s >= n_rows {
                return Err(TensorError::IndexOutOfRange { index: s, len: n_rows }.into());
            }
        }
        Ok(Self {
            n_targets,
            n_rows,
            edge_target: edges.iter().map(|e| e.0).collect(),
            edge_source: edges.iter().map(|e| e.1).collect(),
        })
    }

    /// Working set for `targets` over a graph. Returns the topology and the
    /// node behind every working row (targets first, then context nodes in
    /// order of first appearance).
    pub fn from_graph<F, I>(targets: &[NodeId], mut neighbors: F) -> Result<(Self, Vec<NodeId>), GstError>
    where
        F: FnMut(NodeId) -> I,
        I: IntoIterator<Item = NodeId>,
    {
        let mut rows: Vec<NodeId> = targets.to_vec();
        let mut local: HashMap<NodeId, usize> = HashMap::with_capacity(targets.len() * 2);
        for (i, t) in targets.iter().enumerate() {
            if local.insert(*t, i).is_some() {
                return Err(GstError::InvalidConfig(format!("target {t} listed twice")));
            }
        }
        let mut edges = Vec::new();
        for (ti, t) in targets.iter().enumerate() {
            for s in neighbors(*t) {
                let si = *local.entry(s).or_insert_with(|| {
                    rows.push(s);
                    rows.len() - 1
                });
                edges.push((ti, si));
            }
        }
        let n = rows.len();
        Ok((Self::new(targets.len(), n, &edges)?, rows))
    }

    pub fn n_edges(&self) -> usize {
        self.edge_target.len()
    }
}

/// Tape handles produced by [`forward_on_tape`].
#[derive(Clone, Debug)]
pub struct GstOutput {
    /// `n_targets x d` final-layer target rows.
    pub targets: Var,
    /// Per layer, `n_edges x heads` attention weights.
    pub attention: Vec<Var>,
}

/// Records the stack's forward pass over the working set `input`
/// (`n_rows x d`).
pub fn forward_on_tape(
    tape: &mut Tape,
    stack: &GstStack,
    bound: &BoundParams,
    input: Var,
    nbhd: &Neighborhood,
) -> Result<GstOutput, GstError> {
    let cfg = stack.config;
    let (rows, d) = tape.value(input).dims();
    if d != cfg.dim {
        return Err(GstError::DimensionMismatch { expected: cfg.dim, got: d });
    }
    if rows != nbhd.n_rows {
        return Err(GstError::DimensionMismatch { expected: nbhd.n_rows, got: rows });
    }
    let a = nbhd.n_targets;
    let head_dim = cfg.head_dim();
    let target_idx: Rc<[usize]> = (0..a).collect();
    let frozen = if rows > a {
        let idx: Rc<[usize]> = (a..rows).collect();
        Some(tape.gather_rows(input, idx)?)
    } else {
        None
    };

    let mut h = input;
    let mut attention = Vec::with_capacity(stack.layers.len());
    let mut out = tape.gather_rows(input, target_idx.clone())?;
    for layer in &stack.layers {
        let ht = out;
        let key = tape.matmul(h, bound.var(layer.key))?;
        let value = tape.matmul(h, bound.var(layer.value))?;
        let query = tape.matmul(ht, bound.var(layer.query))?;

        let k_src = tape.gather_rows(key, nbhd.edge_source.clone())?;
        let q_tgt = tape.gather_rows(query, nbhd.edge_target.clone())?;
        let prod = tape.mul(k_src, q_tgt)?;
        let raw = tape.block_sum_cols(prod, head_dim)?;
        let scores = tape.scale(raw, cfg.score_scale())?;
        let att = tape.segment_softmax(scores, nbhd.edge_target.clone(), a)?;
        attention.push(att);

        let v_src = tape.gather_rows(value, nbhd.edge_source.clone())?;
        let spread = tape.repeat_cols(att, head_dim)?;
        let weighted = tape.mul(spread, v_src)?;
        let agg = tape.segment_sum(weighted, nbhd.edge_target.clone(), a)?;
        let info = tape.matmul(agg, bound.var(layer.info))?;

        let joined = tape.concat_cols(&[ht, info])?;
        let proj = tape.matmul(joined, bound.var(layer.update))?;
        out = tape.add(proj, ht)?;
        h = match frozen {
            Some(f) => tape.concat_rows(&[out, f])?,
            None => out,
        };
    }
    Ok(GstOutput { targets: out, attention })
}

/// One attention weight from `source` into `target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub target: NodeId,
    pub source: NodeId,
    pub layer: usize,
    pub head: usize,
    pub score: f64,
}

/// Flattens the per-layer attention tensors of a forward pass into records.
pub fn attention_records(
    tape: &Tape,
    out: &GstOutput,
    nbhd: &Neighborhood,
    rows: &[NodeId],
) -> Vec<AttentionRecord> {
    let mut records = Vec::new();
    for (layer, att) in out.attention.iter().enumerate() {
        let t = tape.value(*att);
        let heads = t.cols();
        for e in 0..nbhd.n_edges() {
            let target = rows[nbhd.edge_target[e]];
            let source = rows[nbhd.edge_source[e]];
            for (head, &score) in t.row(e).iter().enumerate().take(heads) {
                records.push(AttentionRecord { target, source, layer, head, score });
            }
        }
    }
    records
}

/// Evaluates the stack for `targets` against a full embedding table
/// (`n x d`, row = node id). Rows of nodes outside `targets` are left as
/// they are; the returned matrix holds one updated row per target.
pub fn gst_forward<F, I>(
    stack: &GstStack,
    table: &Tensor,
    targets: &[NodeId],
    neighbors: F,
) -> Result<(Tensor, Vec<AttentionRecord>), GstError>
where
    F: FnMut(NodeId) -> I,
    I: IntoIterator<Item = NodeId>,
{
    let (n, d) = table.dims();
    if d != stack.config.dim {
        return Err(GstError::DimensionMismatch { expected: stack.config.dim, got: d });
    }
    let (nbhd, rows) = Neighborhood::from_graph(targets, neighbors)?;
    if let Some(missing) = rows.iter().find(|r| r.index() >= n) {
        return Err(GstError::MissingEmbedding(*missing));
    }
    let idx: Vec<usize> = rows.iter().map(|r| r.index()).collect();
    let input = crate::numerics::ops::gather_rows(table, &idx)?;
    let mut tape = Tape::new();
    let bound = tape.bind_frozen(&stack.params);
    let x = tape.constant(input);
    let out = forward_on_tape(&mut tape, stack, &bound, x, &nbhd)?;
    let records = attention_records(&tape, &out, &nbhd, &rows);
    Ok((tape.value(out.targets).clone(), records))
}

/// Update of a node with no neighbours: the aggregated information is zero,
/// so each layer reduces to `[e ; 0] W_update + e`.
pub fn isolated_node_update(stack: &GstStack, embedding: &[f64]) -> Result<Vec<f64>, GstError> {
    let d = stack.config.dim;
    if embedding.len() != d {
        return Err(GstError::DimensionMismatch { expected: d, got: embedding.len() });
    }
    let table = Tensor::matrix(1, d, embedding.to_vec())?;
    let (out, _) = gst_forward(stack, &table, &[NodeId(0)], |_| std::iter::empty())?;
    Ok(out.into_data())
}

/// The person neighbour of `startup` with the highest head-averaged
/// attention in the last recorded layer. `None` unless the start-up has at
/// least two person neighbours. Ties go to the smaller node id.
pub fn top_attention_person<K>(records: &[AttentionRecord], startup: NodeId, kind_of: K) -> Option<NodeId>
where
    K: Fn(NodeId) -> NodeKind,
{
    let last = records.iter().filter(|r| r.target == startup).map(|r| r.layer).max()?;
    let mut totals: HashMap<NodeId, (f64, usize)> = HashMap::new();
    for r in records {
        if r.target == startup && r.layer == last && kind_of(r.source) == NodeKind::Person {
            let e = totals.entry(r.source).or_insert((0.0, 0));
            e.0 += r.score;
            e.1 += 1;
        }
    }
    if totals.len() < 2 {
        return None;
    }
    let mut best: Option<(NodeId, f64)> = None;
    let mut people: Vec<_> = totals.into_iter().collect();
    people.sort_by_key(|(n, _)| *n);
    for (node, (sum, count)) in people {
        let mean = sum / count as f64;
        if best.map_or(true, |(_, b)| mean > b) {
            best = Some((node, mean));
        }
    }
    best.map(|(n, _)| n)
}
