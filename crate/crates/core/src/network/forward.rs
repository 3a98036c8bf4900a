//! Tape-level building blocks of the discriminator and the generator, plus
//! tape-free convenience wrappers.

use super::params::{BiLstmIds, LstmIds, ModelParams, NUM_OUTPUTS};
use crate::corpus::EmbeddedInstance;
use crate::numerics::rng::Rng;
use crate::numerics::{NumericsError, ParamId, Tape, Tensor, Var};

type Result<T> = std::result::Result<T, NumericsError>;

/// Dropout setting for one forward pass.
pub enum Dropout<'a> {
    Off,
    On { keep_p: f64, rng: &'a mut Rng },
}

fn p(tape: &mut Tape, model: &ModelParams, id: ParamId) -> Result<Var> {
    tape.param(id, model.get(id))
}

/// One LSTM direction over `rows` in the given order; returns the hidden
/// state after each step, in visiting order.
fn lstm_pass(tape: &mut Tape, model: &ModelParams, ids: &LstmIds, rows: &[Var]) -> Result<Vec<Var>> {
    let d = model.config().d;
    let (w_x, w_h, b) = (p(tape, model, ids.w_x)?, p(tape, model, ids.w_h)?, p(tape, model, ids.b)?);
    let mut h = tape.constant(Tensor::zeros(&[d]))?;
    let mut c = tape.constant(Tensor::zeros(&[d]))?;
    let mut out = Vec::with_capacity(rows.len());
    for &x in rows {
        let zx = tape.affine(w_x, x, b)?;
        let zh = tape.matvec(w_h, h)?;
        let z = tape.add(zx, zh)?;
        let i_pre = tape.slice(z, 0, d)?;
        let f_pre = tape.slice(z, d, d)?;
        let o_pre = tape.slice(z, 2 * d, d)?;
        let g_pre = tape.slice(z, 3 * d, d)?;
        let i = tape.sigmoid(i_pre)?;
        let f = tape.sigmoid(f_pre)?;
        let o = tape.sigmoid(o_pre)?;
        let g = tape.tanh(g_pre)?;
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        c = tape.add(keep, write)?;
        let squashed = tape.tanh(c)?;
        h = tape.mul(o, squashed)?;
        out.push(h);
    }
    Ok(out)
}

/// Bi-LSTM over an `N×d` sequence. Row `i` of the `N×2d` result is the
/// forward state at `i` followed by the backward state at `i`.
pub fn bilstm(tape: &mut Tape, model: &ModelParams, ids: &BiLstmIds, seq: Var) -> Result<Var> {
    let n = tape.value(seq).rows();
    if !tape.value(seq).is_matrix() || tape.value(seq).cols() != model.config().d {
        return Err(NumericsError::Shape(format!(
            "bilstm input {:?}, expected [N, {}]",
            tape.value(seq).shape(),
            model.config().d
        )));
    }
    let rows = (0..n).map(|i| tape.row(seq, i)).collect::<Result<Vec<_>>>()?;
    let fwd = lstm_pass(tape, model, &ids.fwd, &rows)?;
    let rev: Vec<Var> = rows.iter().rev().copied().collect();
    let mut bwd = lstm_pass(tape, model, &ids.bwd, &rev)?;
    bwd.reverse();
    let joined = fwd
        .iter()
        .zip(&bwd)
        .map(|(f, b)| tape.concat(&[*f, *b]))
        .collect::<Result<Vec<_>>>()?;
    tape.stack_rows(&joined)
}

/// `softmax(tanh(H · (W q) + b))`: attention weights over the rows of `h`.
fn bilinear_attention(tape: &mut Tape, h: Var, w: Var, b: Var, query: Var) -> Result<Var> {
    let wq = tape.matvec(w, query)?;
    let raw = tape.matvec(h, wq)?;
    let shifted = tape.add_scalar(raw, b)?;
    let scores = tape.tanh(shifted)?;
    tape.softmax(scores)
}

/// Output of one rotary hop: `[context_left, target_left, target_right,
/// context_right]`, each of length `2d`.
pub type Quad = [Var; 4];

/// Target-to-context then context-to-target attention on both sides.
/// `queries` holds the current `(target_left, target_right)`.
pub fn rotary_hop(
    tape: &mut Tape,
    model: &ModelParams,
    h_left: Var,
    h_target: Var,
    h_right: Var,
    queries: (Var, Var),
) -> Result<Quad> {
    let ids = model.layout().rotary;
    let mut side = |s: usize, h_ctx: Var, query: Var| -> Result<(Var, Var)> {
        let w_c = p(tape, model, ids.w_target2context[s])?;
        let b_c = p(tape, model, ids.b_target2context[s])?;
        let alpha = bilinear_attention(tape, h_ctx, w_c, b_c, query)?;
        let context = tape.vecmat(alpha, h_ctx)?;
        let w_t = p(tape, model, ids.w_context2target[s])?;
        let b_t = p(tape, model, ids.b_context2target[s])?;
        let beta = bilinear_attention(tape, h_target, w_t, b_t, context)?;
        let target = tape.vecmat(beta, h_target)?;
        Ok((context, target))
    };
    let (c_l, t_l) = side(0, h_left, queries.0)?;
    let (c_r, t_r) = side(1, h_right, queries.1)?;
    Ok([c_l, t_l, t_r, c_r])
}

/// Reweights the context pair and the target pair separately:
/// `v ← 2·α·v` with `α` a softmax over `tanh(wᵀv + b)` within the pair.
pub fn hierarchical_attention(tape: &mut Tape, model: &ModelParams, v: Quad) -> Result<Quad> {
    let ids = model.layout().hierarchical;
    let mut pair = |a: Var, b: Var, w: ParamId, bias: ParamId| -> Result<(Var, Var)> {
        let w = p(tape, model, w)?;
        let bias = p(tape, model, bias)?;
        let mut score = |x: Var| -> Result<Var> {
            let s = tape.dot(w, x)?;
            let s = tape.add_scalar(s, bias)?;
            tape.tanh(s)
        };
        let (sa, sb) = (score(a)?, score(b)?);
        let scores = tape.concat(&[sa, sb])?;
        let alpha = tape.softmax(scores)?;
        let weight = tape.scale(alpha, 2.0)?;
        let wa = tape.index(weight, 0)?;
        let wb = tape.index(weight, 1)?;
        Ok((tape.mul_scalar(a, wa)?, tape.mul_scalar(b, wb)?))
    };
    let (c_l, c_r) = pair(v[0], v[3], ids.w_context, ids.b_context)?;
    let (t_l, t_r) = pair(v[1], v[2], ids.w_target, ids.b_target)?;
    Ok([c_l, t_l, t_r, c_r])
}

/// The `8d` representation of an instance, before dropout and the head.
pub fn representation(tape: &mut Tape, model: &ModelParams, x: &EmbeddedInstance) -> Result<Var> {
    let layout = *model.layout();
    let left = tape.constant(x.left.clone())?;
    let target = tape.constant(x.target.clone())?;
    let right = tape.constant(x.right.clone())?;
    let h_l = bilstm(tape, model, &layout.left, left)?;
    let h_t = bilstm(tape, model, &layout.target, target)?;
    let h_r = bilstm(tape, model, &layout.right, right)?;

    let pooled = tape.mean_rows(h_t)?;
    let mut queries = (pooled, pooled);
    let mut quad = None;
    for _ in 0..model.config().hops {
        let hop = rotary_hop(tape, model, h_l, h_t, h_r, queries)?;
        let reweighted = hierarchical_attention(tape, model, hop)?;
        queries = (reweighted[1], reweighted[2]);
        quad = Some(reweighted);
    }
    let quad = quad.expect("hops >= 1");
    tape.concat(&quad)
}

/// Dropout, affine layer and softmax over the four outputs.
pub fn head(tape: &mut Tape, model: &ModelParams, v: Var, dropout: Dropout<'_>) -> Result<Var> {
    let expected = model.config().repr_len();
    if tape.value(v).len() != expected {
        return Err(NumericsError::Shape(format!(
            "representation of length {}, expected {expected}",
            tape.value(v).len()
        )));
    }
    let v = match dropout {
        Dropout::Off => v,
        Dropout::On { keep_p, rng } => tape.dropout(v, keep_p, rng, true)?,
    };
    let ids = model.layout().head;
    let w = p(tape, model, ids.w)?;
    let b = p(tape, model, ids.b)?;
    let logits = tape.affine(w, v, b)?;
    tape.softmax(logits)
}

/// `tanh → tanh → linear` MLP from noise of length `r` to an `8d` vector.
pub fn generator(tape: &mut Tape, model: &ModelParams, z: Var) -> Result<Var> {
    let r = model.config().r;
    if tape.value(z).len() != r {
        return Err(NumericsError::Shape(format!("noise of length {}, expected {r}", tape.value(z).len())));
    }
    let ids = model.layout().generator;
    let mut h = z;
    for layer in 0..3 {
        let w = p(tape, model, ids.w[layer])?;
        let b = p(tape, model, ids.b[layer])?;
        h = tape.affine(w, h, b)?;
        if layer < 2 {
            h = tape.tanh(h)?;
        }
    }
    Ok(h)
}

fn probs(tape: &Tape, v: Var) -> [f64; NUM_OUTPUTS] {
    tape.value(v).data().try_into().expect("four outputs")
}

/// Class probabilities `[negative, neutral, positive, fake]` for an instance.
pub fn discriminator_forward(
    x: &EmbeddedInstance,
    model: &ModelParams,
    dropout: Dropout<'_>,
) -> Result<[f64; NUM_OUTPUTS]> {
    let mut tape = Tape::new();
    let v = representation(&mut tape, model, x)?;
    let out = head(&mut tape, model, v, dropout)?;
    Ok(probs(&tape, out))
}

/// Class probabilities for a ready-made representation vector (the path
/// generated samples take).
pub fn discriminator_forward_vec(
    v: &[f64],
    model: &ModelParams,
    dropout: Dropout<'_>,
) -> Result<[f64; NUM_OUTPUTS]> {
    let mut tape = Tape::new();
    let v = tape.constant(Tensor::vector(v.to_vec()))?;
    let out = head(&mut tape, model, v, dropout)?;
    Ok(probs(&tape, out))
}

pub fn representation_vector(x: &EmbeddedInstance, model: &ModelParams) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let v = representation(&mut tape, model, x)?;
    Ok(tape.value(v).data().to_vec())
}

pub fn generator_forward(z: &[f64], model: &ModelParams) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::vector(z.to_vec()))?;
    let out = generator(&mut tape, model, z)?;
    Ok(tape.value(out).data().to_vec())
}

pub fn bilstm_forward(seq: &Tensor, model: &ModelParams, ids: &BiLstmIds) -> Result<Tensor> {
    let mut tape = Tape::new();
    let s = tape.constant(seq.clone())?;
    let out = bilstm(&mut tape, model, ids, s)?;
    Ok(tape.value(out).clone())
}
