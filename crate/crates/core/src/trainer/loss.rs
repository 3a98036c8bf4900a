//! Batch losses, both as plain functions of predicted probabilities and as
//! tape graphs over the whole model.

use crate::corpus::Polarity;
use crate::network::{self, Dropout, Group, ModelParams, FAKE_CLASS, NUM_OUTPUTS};
use crate::numerics::{NumericsError, Tape, Tensor, Var};

use super::Example;

/// Probabilities are clamped to at least this value before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// One-hot target of every generated sample.
pub const FAKE_LABEL: [f64; NUM_OUTPUTS] = [0.0, 0.0, 0.0, 1.0];

/// Terms of the discriminator loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorLoss {
    /// `−(1/m) Σ log p̂[y]` over real samples.
    pub real: f64,
    /// `−(1/m) Σ log p̂[fake]` over generated samples; zero for an empty batch.
    pub fake: f64,
    /// `λ‖Θ_D‖²`.
    pub penalty: f64,
}

impl DiscriminatorLoss {
    pub fn total(&self) -> f64 {
        self.real + self.fake + self.penalty
    }
}

/// Terms of the generator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorObjective {
    /// `−(1/m) Σ log(1 − D(G(z)))`.
    pub objective: f64,
    /// `λ‖Θ_G‖²`.
    pub penalty: f64,
}

impl GeneratorObjective {
    /// The quantity the generator ascends.
    pub fn net(&self) -> f64 {
        self.objective - self.penalty
    }
}

fn neg_log(p: f64) -> f64 {
    -p.max(PROB_FLOOR).ln()
}

/// Probability mass a prediction puts on the real classes.
pub fn prob_real(p: &[f64; NUM_OUTPUTS]) -> f64 {
    p[..FAKE_CLASS].iter().sum()
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

pub fn loss_discriminator(
    real: &[([f64; NUM_OUTPUTS], Polarity)],
    fake: &[[f64; NUM_OUTPUTS]],
    model: &ModelParams,
    lambda: f64,
) -> Result<DiscriminatorLoss, NumericsError> {
    if real.is_empty() {
        return Err(NumericsError::Shape("empty real batch".into()));
    }
    Ok(DiscriminatorLoss {
        real: mean(real.iter().map(|(p, y)| neg_log(p[y.index()]))),
        fake: mean(fake.iter().map(|p| neg_log(p[FAKE_CLASS]))),
        penalty: lambda * model.norm_sq(Group::Discriminator),
    })
}

/// `1 − D(G(z))` is computed as the fake-class probability so that it stays
/// accurate when `D(G(z))` is close to one.
pub fn loss_generator(
    fake: &[[f64; NUM_OUTPUTS]],
    model: &ModelParams,
    lambda: f64,
) -> Result<GeneratorObjective, NumericsError> {
    if fake.is_empty() {
        return Err(NumericsError::Shape("empty fake batch".into()));
    }
    Ok(GeneratorObjective {
        objective: mean(fake.iter().map(|p| neg_log(p[FAKE_CLASS]))),
        penalty: lambda * model.norm_sq(Group::Generator),
    })
}

/// `−log max(p[class], floor)` on the tape.
pub(crate) fn neg_log_prob(tape: &mut Tape, probs: Var, class: usize) -> Result<Var, NumericsError> {
    let p = tape.index(probs, class)?;
    let lg = tape.log_clamp(p, PROB_FLOOR)?;
    tape.scale(lg, -1.0)
}

fn penalty(tape: &mut Tape, model: &ModelParams, group: Group, lambda: f64) -> Result<Var, NumericsError> {
    let mut acc = tape.constant(Tensor::scalar(0.0))?;
    for id in model.group_ids(group) {
        let v = tape.param(id, model.get(id))?;
        let sq = tape.l2_norm_sq(v)?;
        acc = tape.add(acc, sq)?;
    }
    tape.scale(acc, lambda)
}

fn mean_terms(tape: &mut Tape, terms: &[Var]) -> Result<Var, NumericsError> {
    let mut acc = tape.constant(Tensor::scalar(0.0))?;
    for &t in terms {
        acc = tape.add(acc, t)?;
    }
    tape.scale(acc, 1.0 / terms.len().max(1) as f64)
}

/// The full discriminator loss in a single graph, dropout off. Fakes are
/// generated from `noise` on the same tape.
pub fn discriminator_loss_graph<E: Example>(
    tape: &mut Tape,
    model: &ModelParams,
    real: &[E],
    noise: &[Vec<f64>],
    lambda: f64,
) -> Result<Var, NumericsError> {
    let mut real_terms = Vec::with_capacity(real.len());
    for ex in real {
        let v = ex.represent(tape, model)?;
        let p = network::head(tape, model, v, Dropout::Off)?;
        real_terms.push(neg_log_prob(tape, p, ex.label().index())?);
    }
    let fake_terms = fake_terms(tape, model, noise)?;
    let r = mean_terms(tape, &real_terms)?;
    let f = mean_terms(tape, &fake_terms)?;
    let pen = penalty(tape, model, Group::Discriminator, lambda)?;
    let sum = tape.add(r, f)?;
    tape.add(sum, pen)
}

/// The generator objective net of its penalty, in a single graph, dropout off.
pub fn generator_objective_graph(
    tape: &mut Tape,
    model: &ModelParams,
    noise: &[Vec<f64>],
    lambda: f64,
) -> Result<Var, NumericsError> {
    let terms = fake_terms(tape, model, noise)?;
    let obj = mean_terms(tape, &terms)?;
    let pen = penalty(tape, model, Group::Generator, lambda)?;
    tape.sub(obj, pen)
}

fn fake_terms(tape: &mut Tape, model: &ModelParams, noise: &[Vec<f64>]) -> Result<Vec<Var>, NumericsError> {
    noise
        .iter()
        .map(|z| {
            let z = tape.constant(Tensor::vector(z.clone()))?;
            let g = network::generator(tape, model, z)?;
            let p = network::head(tape, model, g, Dropout::Off)?;
            neg_log_prob(tape, p, FAKE_CLASS)
        })
        .collect()
}
