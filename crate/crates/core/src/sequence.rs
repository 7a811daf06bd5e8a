//! LSTM encoding of a start-up's embedding history.
//!
//! A history is the start-up's rows in the last `k + 1` period tables,
//! oldest first. Periods before the start-up existed are padding: the cell
//! skips them and carries its state unchanged.

use rand::Rng;

use crate::graph::NodeId;
use crate::incremental::EmbeddingTable;
use crate::numerics::{glorot, zeros_bias, BoundParams, ParamId, ParamStore, Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SequenceError {
    #[error("start-up {0} has no row in the period table")]
    UnknownStartup(NodeId),
    #[error("no table for period {0}")]
    MissingPeriod(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSequence {
    pub startup: NodeId,
    /// `k + 1` vectors, oldest first. Padded steps are zero.
    pub vectors: Vec<Vec<f64>>,
    /// `true` where the step holds a real embedding.
    pub present: Vec<bool>,
}

/// History of `startup` over the tables for periods `t - k ..= t`.
/// `tables[p]` must be the table of period `p`.
pub fn build_sequence(
    tables: &[EmbeddingTable],
    startup: NodeId,
    t: usize,
    k: usize,
) -> Result<EmbeddingSequence, SequenceError> {
    let current = tables.get(t).ok_or(SequenceError::MissingPeriod(t))?;
    if current.row(startup).is_none() {
        return Err(SequenceError::UnknownStartup(startup));
    }
    let d = current.dim();
    let mut vectors = Vec::with_capacity(k + 1);
    let mut present = Vec::with_capacity(k + 1);
    for step in 0..=k {
        let row = (t + step).checked_sub(k).and_then(|p| tables[p].row(startup));
        match row {
            Some(r) => {
                vectors.push(r.to_vec());
                present.push(true);
            }
            None => {
                vectors.push(vec![0.0; d]);
                present.push(false);
            }
        }
    }
    Ok(EmbeddingSequence { startup, vectors, present })
}

/// Gate order: input, forget, candidate, output.
#[derive(Clone, Debug)]
pub struct SequenceEncoder {
    pub params: ParamStore,
    pub input_dim: usize,
    pub hidden: usize,
    /// `(input_dim + hidden) x hidden` per gate.
    pub weights: [ParamId; 4],
    /// `1 x hidden` per gate.
    pub biases: [ParamId; 4],
}

const GATES: [&str; 4] = ["input", "forget", "candidate", "output"];

impl SequenceEncoder {
    pub fn new<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut params = ParamStore::new();
        let weights = GATES.map(|g| params.add(format!("lstm.{g}.w"), glorot(rng, input_dim + hidden, hidden)));
        let biases = GATES.map(|g| params.add(format!("lstm.{g}.b"), zeros_bias(hidden)));
        Self { params, input_dim, hidden, weights, biases }
    }

    pub fn zeroed(input_dim: usize, hidden: usize) -> Self {
        let mut e = Self::new(input_dim, hidden, &mut rand::rngs::mock::StepRng::new(0, 0));
        e.params.zero_values();
        e
    }

    /// Final hidden state for each sequence of a batch of equal length,
    /// recorded on `tape` (`batch x hidden`).
    pub fn encode_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        batch: &[&EmbeddingSequence],
    ) -> Result<Var, SequenceError> {
        let b = batch.len();
        let dh = self.hidden;
        let steps = batch.first().map_or(0, |s| s.vectors.len());
        let mut h = tape.constant(Tensor::zeros(&[b, dh]));
        let mut c = tape.constant(Tensor::zeros(&[b, dh]));
        for step in 0..steps {
            if batch.iter().all(|s| !s.present[step]) {
                continue;
            }
            let mut x = Vec::with_capacity(b * self.input_dim);
            let mut keep = Vec::with_capacity(b * dh);
            for s in batch {
                let v = &s.vectors[step];
                if v.len() != self.input_dim {
                    return Err(SequenceError::DimensionMismatch { expected: self.input_dim, got: v.len() });
                }
                x.extend_from_slice(v);
                keep.extend(std::iter::repeat(if s.present[step] { 1.0 } else { 0.0 }).take(dh));
            }
            let x = tape.constant(Tensor::matrix(b, self.input_dim, x)?);
            let xh = tape.concat_cols(&[x, h])?;
            let gate = |g: usize, tape: &mut Tape| -> Result<Var, TensorError> {
                tape.affine(xh, bound.var(self.weights[g]), bound.var(self.biases[g]))
            };
            let zi = gate(0, tape)?;
            let zf = gate(1, tape)?;
            let zg = gate(2, tape)?;
            let zo = gate(3, tape)?;
            let i = tape.sigmoid(zi)?;
            let f = tape.sigmoid(zf)?;
            let g = tape.tanh(zg)?;
            let o = tape.sigmoid(zo)?;
            let fc = tape.mul(f, c)?;
            let ig = tape.mul(i, g)?;
            let c_new = tape.add(fc, ig)?;
            let tc = tape.tanh(c_new)?;
            let h_new = tape.mul(o, tc)?;
            if keep.iter().all(|m| *m == 1.0) {
                c = c_new;
                h = h_new;
            } else {
                let skip: Vec<f64> = keep.iter().map(|m| 1.0 - m).collect();
                let keep = tape.constant(Tensor::matrix(b, dh, keep)?);
                let skip = tape.constant(Tensor::matrix(b, dh, skip)?);
                c = blend(tape, keep, skip, c_new, c)?;
                h = blend(tape, keep, skip, h_new, h)?;
            }
        }
        Ok(h)
    }

    /// Final hidden state of one sequence.
    pub fn encode(&self, seq: &EmbeddingSequence) -> Result<Vec<f64>, SequenceError> {
        let mut tape = Tape::new();
        let bound = tape.bind_frozen(&self.params);
        let h = self.encode_on_tape(&mut tape, &bound, &[seq])?;
        Ok(tape.value(h).data().to_vec())
    }
}

/// `keep * new + skip * old`
fn blend(tape: &mut Tape, keep: Var, skip: Var, new: Var, old: Var) -> Result<Var, TensorError> {
    let a = tape.mul(keep, new)?;
    let b = tape.mul(skip, old)?;
    tape.add(a, b)
}
