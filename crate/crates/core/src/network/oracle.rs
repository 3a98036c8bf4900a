//! Straight-line reference evaluations on plain vectors, independent of the
//! tape.

use super::{BiLstmIds, LstmIds, ModelParams};
use crate::numerics::Tensor;

pub fn matvec(m: &Tensor, v: &[f64]) -> Vec<f64> {
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    assert_eq!(cols, v.len());
    (0..rows).map(|r| (0..cols).map(|c| m.data()[r * cols + c] * v[c]).sum()).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lstm(model: &ModelParams, ids: &LstmIds, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = model.config().d;
    let (wx, wh, b) = (model.get(ids.w_x), model.get(ids.w_h), model.get(ids.b).data());
    let mut h = vec![0.0; d];
    let mut c = vec![0.0; d];
    let mut out = Vec::new();
    for x in xs {
        let ax = matvec(wx, x);
        let ah = matvec(wh, &h);
        let z: Vec<f64> = (0..4 * d).map(|k| ax[k] + ah[k] + b[k]).collect();
        for j in 0..d {
            let i = sig(z[j]);
            let f = sig(z[d + j]);
            let o = sig(z[2 * d + j]);
            let g = z[3 * d + j].tanh();
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        out.push(h.clone());
    }
    out
}

pub fn bilstm(model: &ModelParams, ids: &BiLstmIds, seq: &Tensor) -> Vec<Vec<f64>> {
    let xs: Vec<Vec<f64>> = (0..seq.rows()).map(|i| seq.row(i).to_vec()).collect();
    let fwd = lstm(model, &ids.fwd, &xs);
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let mut bwd = lstm(model, &ids.bwd, &rev);
    bwd.reverse();
    fwd.into_iter().zip(bwd).map(|(f, b)| [f, b].concat()).collect()
}

fn attend(h: &[Vec<f64>], w: &Tensor, b: f64, q: &[f64]) -> Vec<f64> {
    let wq = matvec(w, q);
    let scores: Vec<f64> = h.iter().map(|row| (dot(row, &wq) + b).tanh()).collect();
    let a = softmax(&scores);
    let mut out = vec![0.0; h[0].len()];
    for (ai, row) in a.iter().zip(h) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += ai * x;
        }
    }
    out
}

pub fn rotary(
    model: &ModelParams,
    hl: &[Vec<f64>],
    ht: &[Vec<f64>],
    hr: &[Vec<f64>],
    tl: &[f64],
    tr: &[f64],
) -> [Vec<f64>; 4] {
    let ids = model.layout().rotary;
    let s = |i: usize, h: &[Vec<f64>], q: &[f64]| {
        let ctx = attend(h, model.get(ids.w_target2context[i]), model.get(ids.b_target2context[i]).item(), q);
        let tgt = attend(ht, model.get(ids.w_context2target[i]), model.get(ids.b_context2target[i]).item(), &ctx);
        (ctx, tgt)
    };
    let (cl, tl) = s(0, hl, tl);
    let (cr, tr) = s(1, hr, tr);
    [cl, tl, tr, cr]
}

pub fn hierarchical(model: &ModelParams, v: &[Vec<f64>; 4]) -> [Vec<f64>; 4] {
    let ids = model.layout().hierarchical;
    let pair = |a: &[f64], b: &[f64], w: &Tensor, bias: f64| {
        let sa = (dot(w.data(), a) + bias).tanh();
        let sb = (dot(w.data(), b) + bias).tanh();
        let al = softmax(&[sa, sb]);
        (
            a.iter().map(|x| 2.0 * al[0] * x).collect::<Vec<_>>(),
            b.iter().map(|x| 2.0 * al[1] * x).collect::<Vec<_>>(),
        )
    };
    let (cl, cr) = pair(&v[0], &v[3], model.get(ids.w_context), model.get(ids.b_context).item());
    let (tl, tr) = pair(&v[1], &v[2], model.get(ids.w_target), model.get(ids.b_target).item());
    [cl, tl, tr, cr]
}

pub fn representation(model: &ModelParams, left: &Tensor, target: &Tensor, right: &Tensor) -> Vec<f64> {
    let l = model.layout();
    let hl = bilstm(model, &l.left, left);
    let ht = bilstm(model, &l.target, target);
    let hr = bilstm(model, &l.right, right);
    let n = ht.len() as f64;
    let mean: Vec<f64> = (0..ht[0].len()).map(|j| ht.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let (mut ql, mut qr) = (mean.clone(), mean);
    let mut quad = None;
    for _ in 0..model.config().hops {
        let hop = rotary(model, &hl, &ht, &hr, &ql, &qr);
        let re = hierarchical(model, &hop);
        ql = re[1].clone();
        qr = re[2].clone();
        quad = Some(re);
    }
    quad.unwrap().concat()
}

pub fn head(model: &ModelParams, v: &[f64]) -> Vec<f64> {
    let ids = model.layout().head;
    let logits: Vec<f64> =
        matvec(model.get(ids.w), v).iter().zip(model.get(ids.b).data()).map(|(a, b)| a + b).collect();
    softmax(&logits)
}

pub fn generator(model: &ModelParams, z: &[f64]) -> Vec<f64> {
    let ids = model.layout().generator;
    let mut h = z.to_vec();
    for l in 0..3 {
        h = matvec(model.get(ids.w[l]), &h).iter().zip(model.get(ids.b[l]).data()).map(|(a, b)| a + b).collect();
        if l < 2 {
            h = h.iter().map(|v| v.tanh()).collect();
        }
    }
    h
}
