//! Straight-line reference transcriptions of the model equations. Plain
//! scalar loops that share nothing with the library beyond reading
//! parameter values.

#![allow(dead_code)]

use std::collections::HashMap;

use vcnet::gst::GstStack;
use vcnet::incremental::Decoder;
use vcnet::numerics::Tensor;
use vcnet::predictor::{Head, SampleFeatures, SuccessModel};
use vcnet::sequence::{EmbeddingSequence, SequenceEncoder};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x M + b` for a row vector.
fn affine(x: &[f64], m: &Tensor, b: Option<&Tensor>) -> Vec<f64> {
    let (r, c) = m.dims();
    assert_eq!(r, x.len());
    (0..c)
        .map(|j| b.map_or(0.0, |b| b.data()[j]) + (0..r).map(|i| x[i] * m.get(i, j)).sum::<f64>())
        .collect()
}

/// Attention stack over `table`, updating only `targets` in each layer.
pub fn gst_script(
    stack: &GstStack,
    table: &[Vec<f64>],
    targets: &[usize],
    adj: &HashMap<usize, Vec<usize>>,
) -> Vec<Vec<f64>> {
    let d = stack.config.dim;
    let heads = stack.config.heads;
    let dh = d / heads;
    let scale = if stack.config.scale_full_d { (d as f64).sqrt() } else { (dh as f64).sqrt() };
    let w = |id| stack.params.value(id).clone();
    let vecmat = |x: &[f64], m: &Tensor| affine(x, m, None);
    let mut h: Vec<Vec<f64>> = table.to_vec();
    for layer in &stack.layers {
        let (wk, wq, wv, wi, wa) =
            (w(layer.key), w(layer.query), w(layer.value), w(layer.info), w(layer.update));
        let mut next = h.clone();
        for &t in targets {
            let q = vecmat(&h[t], &wq);
            let nbrs = adj.get(&t).cloned().unwrap_or_default();
            let mut agg = vec![0.0; d];
            for head in 0..heads {
                let sl = head * dh..(head + 1) * dh;
                let scores: Vec<f64> = nbrs
                    .iter()
                    .map(|&s| {
                        let k = vecmat(&h[s], &wk);
                        k[sl.clone()].iter().zip(&q[sl.clone()]).map(|(a, b)| a * b).sum::<f64>() / scale
                    })
                    .collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                for (i, &s) in nbrs.iter().enumerate() {
                    let v = vecmat(&h[s], &wv);
                    for j in sl.clone() {
                        agg[j] += exps[i] / z * v[j];
                    }
                }
            }
            let info = vecmat(&agg, &wi);
            let mut joined = h[t].clone();
            joined.extend(info);
            let proj = vecmat(&joined, &wa);
            next[t] = proj.iter().zip(&h[t]).map(|(a, b)| a + b).collect();
        }
        h = next;
    }
    targets.iter().map(|&t| h[t].clone()).collect()
}

/// Step-by-step gated recurrence written out with scalar loops.
pub fn lstm_script(enc: &SequenceEncoder, seq: &EmbeddingSequence) -> Vec<f64> {
    let dh = enc.hidden;
    let mut h = vec![0.0; dh];
    let mut c = vec![0.0; dh];
    for (x, present) in seq.vectors.iter().zip(&seq.present) {
        if !present {
            continue;
        }
        let xh: Vec<f64> = x.iter().chain(&h).copied().collect();
        let pre = |g: usize| -> Vec<f64> {
            let w = enc.params.value(enc.weights[g]);
            let b = enc.params.value(enc.biases[g]).data();
            (0..dh).map(|j| b[j] + (0..xh.len()).map(|i| xh[i] * w.get(i, j)).sum::<f64>()).collect()
        };
        let (zi, zf, zg, zo) = (pre(0), pre(1), pre(2), pre(3));
        for j in 0..dh {
            c[j] = sig(zf[j]) * c[j] + sig(zi[j]) * zg[j].tanh();
            h[j] = sig(zo[j]) * c[j].tanh();
        }
    }
    h
}

/// Link probability of `u` (current table) and `v` (previous table).
pub fn lp_script(dec: &Decoder, cur: &Tensor, prev: &Tensor, u: usize, v: usize) -> f64 {
    let w = dec.params.value(dec.link_w);
    let b = dec.params.value(dec.link_b);
    let su: Vec<f64> = affine(cur.row(u), w, Some(b)).into_iter().map(sig).collect();
    let sv: Vec<f64> = affine(prev.row(v), w, Some(b)).into_iter().map(sig).collect();
    sig(su.iter().zip(&sv).map(|(a, b)| a * b).sum())
}

/// Probability that row `u` is a start-up.
pub fn nc_script(dec: &Decoder, cur: &Tensor, u: usize) -> f64 {
    let z = affine(cur.row(u), dec.params.value(dec.class_w), Some(dec.params.value(dec.class_b)));
    sig(z[0])
}

/// Ego-net fusion of one sample: project the start-up (attributes joined
/// with its encoded history) and each person, then run the fusion stack on
/// the star graph with every row as a target.
pub fn fuse_script(model: &SuccessModel, sample: &SampleFeatures) -> Vec<f64> {
    let h = &model.head;
    let p = &h.params;
    let mut start = sample.attributes.clone();
    start.extend(lstm_script(&model.lstm, &sample.sequence));
    let mut rows = vec![affine(&start, p.value(h.startup_w), Some(p.value(h.startup_b)))];
    for input in &sample.person_inputs {
        rows.push(affine(input, p.value(h.person_w), Some(p.value(h.person_b))));
    }
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 1..rows.len() {
        adj.entry(0).or_default().push(i);
        adj.entry(i).or_default().push(0);
    }
    let targets: Vec<usize> = (0..rows.len()).collect();
    gst_script(&model.gst, &rows, &targets, &adj).swap_remove(0)
}

/// Two tanh layers and a sigmoid output.
pub fn predict_script(head: &Head, z: &[f64]) -> f64 {
    let p = &head.params;
    let a: Vec<f64> = affine(z, p.value(head.w1), Some(p.value(head.b1))).into_iter().map(f64::tanh).collect();
    let a: Vec<f64> = affine(&a, p.value(head.w2), Some(p.value(head.b2))).into_iter().map(f64::tanh).collect();
    sig(affine(&a, p.value(head.w3), Some(p.value(head.b3)))[0])
}
