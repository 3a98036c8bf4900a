//! Adversarial training of the discriminator and the generator.
//!
//! All randomness (batch order, noise, dropout masks) is drawn from streams
//! keyed by the run seed and the iteration number, so a run is a pure
//! function of its hyperparameters and data, independent of thread count,
//! and a saved state resumes bit-exactly.

mod loss;
mod state;
mod trace;

#[cfg(test)]
mod tests;

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

pub use loss::{
    discriminator_loss_graph, generator_objective_graph, loss_discriminator, loss_generator, prob_real,
    DiscriminatorLoss, GeneratorObjective, FAKE_LABEL, PROB_FLOOR,
};
pub use state::TrainState;
pub use trace::{NormSnapshot, TraceRecord, TrainingTrace, TRACE_HEADER};

use crate::corpus::{EmbeddedInstance, Polarity};
use crate::network::{self, CheckpointError, Dropout, Group, ModelParams, NetworkConfig, FAKE_CLASS, NUM_OUTPUTS};
use crate::numerics::{rng, sgd_momentum_step, Gradients, NumericsError, Tape, Tensor, Var};
use crate::parallel::{self, Exec};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid hyperparameters: {0}")]
    Invalid(String),
    #[error("diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    Diverged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Completed => "completed",
            Status::Diverged => "diverged",
        })
    }
}

/// Training hyperparameters. The generator's learning rate and momentum are
/// always derived from the discriminator's through the two multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub lr_dis: f64,
    pub mom_dis: f64,
    pub mu_lr: f64,
    pub mu_mom: f64,
    /// The generator is updated on iterations divisible by `k`.
    pub k: usize,
    pub lambda: f64,
    pub keep_p: f64,
    pub hops: usize,
    pub iterations: usize,
    pub batch_m: usize,
    pub r: usize,
    pub d: usize,
    pub seed: u64,
    /// With `false` the generator is never updated and no fake samples enter
    /// the discriminator loss.
    pub adversarial: bool,
    pub exec: Exec,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lr_dis: 0.02,
            mom_dis: 0.9,
            mu_lr: 0.1,
            mu_mom: 0.4,
            k: 3,
            lambda: 1e-4,
            keep_p: 0.3,
            hops: 3,
            iterations: 200,
            batch_m: 20,
            r: 100,
            d: 768,
            seed: 0,
            adversarial: true,
            exec: Exec::default(),
        }
    }
}

impl Hyperparams {
    /// Keys accepted by [`Hyperparams::set`], in the order [`Hyperparams::entries`] lists them.
    pub const KEYS: [&'static str; 14] = [
        "lr_dis", "mom_dis", "mu_lr", "mu_mom", "k", "lambda", "keep_p", "hops", "iterations", "batch_m", "r", "d",
        "seed", "adversarial",
    ];

    pub fn lr_gen(&self) -> f64 {
        self.mu_lr * self.lr_dis
    }

    pub fn mom_gen(&self) -> f64 {
        self.mu_mom * self.mom_dis
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig::new(self.d, self.r, self.hops)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str| Err(TrainError::Invalid(what.to_string()));
        let non_neg = |x: f64| x.is_finite() && x >= 0.0;
        if !(non_neg(self.lr_dis) && non_neg(self.mom_dis) && non_neg(self.mu_lr) && non_neg(self.mu_mom)) {
            return bad("learning rates, momenta and multipliers must be finite and non-negative");
        }
        if !non_neg(self.lambda) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.keep_p > 0.0 && self.keep_p <= 1.0) {
            return bad("keep_p must lie in (0, 1]");
        }
        if self.k == 0 || self.iterations == 0 || self.batch_m == 0 {
            return bad("k, iterations and batch_m must be at least 1");
        }
        if self.d == 0 || self.r == 0 || self.hops == 0 {
            return bad("d, r and hops must be at least 1");
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("lr_dis", self.lr_dis.to_string()),
            ("mom_dis", self.mom_dis.to_string()),
            ("mu_lr", self.mu_lr.to_string()),
            ("mu_mom", self.mu_mom.to_string()),
            ("k", self.k.to_string()),
            ("lambda", self.lambda.to_string()),
            ("keep_p", self.keep_p.to_string()),
            ("hops", self.hops.to_string()),
            ("iterations", self.iterations.to_string()),
            ("batch_m", self.batch_m.to_string()),
            ("r", self.r.to_string()),
            ("d", self.d.to_string()),
            ("seed", self.seed.to_string()),
            ("adversarial", self.adversarial.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value.trim().parse().map_err(|_| format!("{key}: cannot parse {value:?}"))
        }
        match key {
            "lr_dis" => self.lr_dis = parse(key, value)?,
            "mom_dis" => self.mom_dis = parse(key, value)?,
            "mu_lr" => self.mu_lr = parse(key, value)?,
            "mu_mom" => self.mu_mom = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "keep_p" => self.keep_p = parse(key, value)?,
            "hops" => self.hops = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "batch_m" => self.batch_m = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "adversarial" => self.adversarial = parse(key, value)?,
            _ => return Err(format!("unknown hyperparameter {key:?}")),
        }
        Ok(())
    }
}

/// A labelled training sample: anything that can put its `8d` representation
/// on a tape.
pub trait Example: Sync {
    fn label(&self) -> Polarity;
    fn represent(&self, tape: &mut Tape, model: &ModelParams) -> Result<Var, NumericsError>;
}

impl<T: Example + ?Sized> Example for &T {
    fn label(&self) -> Polarity {
        (**self).label()
    }

    fn represent(&self, tape: &mut Tape, model: &ModelParams) -> Result<Var, NumericsError> {
        (**self).represent(tape, model)
    }
}

impl Example for EmbeddedInstance {
    fn label(&self) -> Polarity {
        self.polarity
    }

    fn represent(&self, tape: &mut Tape, model: &ModelParams) -> Result<Var, NumericsError> {
        network::representation(tape, model, self)
    }
}

/// A ready-made representation vector; training on these exercises only the
/// head (and the generator).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExample {
    pub features: Vec<f64>,
    pub label: Polarity,
}

impl Example for FeatureExample {
    fn label(&self) -> Polarity {
        self.label
    }

    fn represent(&self, tape: &mut Tape, _model: &ModelParams) -> Result<Var, NumericsError> {
        tape.constant(Tensor::vector(self.features.clone()))
    }
}

const TAG_EPOCH: u64 = 0xe90c;
const TAG_NOISE: u64 = 0x9015;
const TAG_DROPOUT: u64 = 0xd209;

const PHASE_GENERATOR: u64 = 1;
const PHASE_REAL: u64 = 2;
const PHASE_FAKE: u64 = 3;

/// Indices of the real minibatch of `iteration` (1-based): consecutive
/// windows over a sequence of per-epoch permutations of `0..n`.
pub fn batch_indices(n: usize, m: usize, seed: u64, iteration: usize) -> Vec<usize> {
    assert!(n > 0 && iteration > 0);
    let start = (iteration - 1) * m;
    let mut cached: Option<(usize, Vec<usize>)> = None;
    (start..start + m)
        .map(|pos| {
            let epoch = pos / n;
            if cached.as_ref().map(|(e, _)| *e) != Some(epoch) {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng::stream(seed, &[TAG_EPOCH, epoch as u64]));
                cached = Some((epoch, perm));
            }
            cached.as_ref().unwrap().1[pos % n]
        })
        .collect()
}

/// `m` noise vectors with components from U(0, 1).
pub fn noise(seed: u64, iteration: usize, phase: u64, m: usize, r: usize) -> Vec<Vec<f64>> {
    let mut g = rng::stream(seed, &[TAG_NOISE, iteration as u64, phase]);
    (0..m).map(|_| (0..r).map(|_| g.random::<f64>()).collect()).collect()
}

/// Noise of the generator step of `iteration`.
pub fn generator_step_noise(hp: &Hyperparams, iteration: usize) -> Vec<Vec<f64>> {
    noise(hp.seed, iteration, PHASE_GENERATOR, hp.batch_m, hp.r)
}

/// Noise of the fake half of the discriminator step of `iteration`.
pub fn discriminator_step_noise(hp: &Hyperparams, iteration: usize) -> Vec<Vec<f64>> {
    noise(hp.seed, iteration, PHASE_FAKE, hp.batch_m, hp.r)
}

/// Where each sample's dropout mask comes from.
#[derive(Debug, Clone, Copy)]
pub struct DropoutPlan {
    pub keep_p: f64,
    pub seed: u64,
    pub iteration: usize,
    pub phase: u64,
}

impl DropoutPlan {
    fn rng(&self, sample: usize) -> rng::Rng {
        rng::stream(self.seed, &[TAG_DROPOUT, self.iteration as u64, self.phase, sample as u64])
    }
}

/// Mean loss term and gradient over a batch, without the L2 penalty.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub mean_term: f64,
    pub grads: Gradients,
    pub probs: Vec<[f64; NUM_OUTPUTS]>,
    pub clamp_hits: usize,
}

struct SampleOut {
    term: f64,
    probs: [f64; NUM_OUTPUTS],
    grads: Gradients,
    clamp_hits: usize,
}

fn sample<F>(model: &ModelParams, plan: Option<DropoutPlan>, index: usize, class: usize, build: F) -> Result<SampleOut, NumericsError>
where
    F: FnOnce(&mut Tape) -> Result<Var, NumericsError>,
{
    let mut tape = Tape::new();
    let v = build(&mut tape)?;
    let mut r;
    let dropout = match plan {
        Some(plan) => {
            r = plan.rng(index);
            Dropout::On { keep_p: plan.keep_p, rng: &mut r }
        }
        None => Dropout::Off,
    };
    let p = network::head(&mut tape, model, v, dropout)?;
    let probs: [f64; NUM_OUTPUTS] = tape.value(p).data().try_into().expect("four outputs");
    let term = loss::neg_log_prob(&mut tape, p, class)?;
    let value = tape.value(term).item();
    let clamp_hits = tape.clamp_hits();
    let grads = tape.backward(term)?;
    Ok(SampleOut { term: value, probs, grads, clamp_hits })
}

/// Ordered reduction, so the result does not depend on how the samples were
/// scheduled.
fn reduce(outs: Vec<Result<SampleOut, NumericsError>>) -> Result<BatchGradients, NumericsError> {
    let n = outs.len();
    let mut acc = BatchGradients { mean_term: 0.0, grads: Gradients::default(), probs: Vec::with_capacity(n), clamp_hits: 0 };
    for out in outs {
        let out = out?;
        acc.mean_term += out.term;
        acc.grads.accumulate(&out.grads);
        acc.probs.push(out.probs);
        acc.clamp_hits += out.clamp_hits;
    }
    if n > 0 {
        acc.mean_term /= n as f64;
        acc.grads.scale(1.0 / n as f64);
    }
    Ok(acc)
}

/// Gradient of `−(1/m) Σ log p̂[y]` over a real batch.
pub fn real_batch_gradients<E: Example>(
    model: &ModelParams,
    batch: &[E],
    plan: Option<DropoutPlan>,
    exec: Exec,
) -> Result<BatchGradients, NumericsError> {
    let outs = parallel::map_range(exec, batch.len(), |i| {
        let ex = &batch[i];
        sample(model, plan, i, ex.label().index(), |tape| ex.represent(tape, model))
    });
    reduce(outs)
}

/// Gradient of `−(1/m) Σ log p̂[fake]` over already generated samples; only
/// head parameters receive gradients.
pub fn fake_batch_gradients(
    model: &ModelParams,
    fakes: &[Vec<f64>],
    plan: Option<DropoutPlan>,
    exec: Exec,
) -> Result<BatchGradients, NumericsError> {
    let outs = parallel::map_range(exec, fakes.len(), |i| {
        sample(model, plan, i, FAKE_CLASS, |tape| tape.constant(Tensor::vector(fakes[i].clone())))
    });
    reduce(outs)
}

/// Gradient of the generator objective `−(1/m) Σ log(1 − D(G(z)))`, through
/// the generator.
pub fn generator_batch_gradients(
    model: &ModelParams,
    noise: &[Vec<f64>],
    plan: Option<DropoutPlan>,
    exec: Exec,
) -> Result<BatchGradients, NumericsError> {
    let outs = parallel::map_range(exec, noise.len(), |i| {
        sample(model, plan, i, FAKE_CLASS, |tape| {
            let z = tape.constant(Tensor::vector(noise[i].clone()))?;
            network::generator(tape, model, z)
        })
    });
    reduce(outs)
}

/// Full descent gradient for one group: `sign · grads + 2λθ`.
pub fn group_gradient(model: &ModelParams, group: Group, grads: &Gradients, sign: f64, lambda: f64) -> Gradients {
    let mut out = Gradients::default();
    for id in model.group_ids(group) {
        let theta = model.get(id);
        let mut g = match grads.get(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(theta.shape()),
        };
        for (gi, ti) in g.data_mut().iter_mut().zip(theta.data()) {
            *gi = sign * *gi + 2.0 * lambda * ti;
        }
        out.insert(id, g);
    }
    out
}

fn apply(
    params: &mut ModelParams,
    velocity: &mut ModelParams,
    group: Group,
    grads: &Gradients,
    lr: f64,
    mom: f64,
) -> Result<(), NumericsError> {
    let ids: Vec<_> = params.group_ids(group).collect();
    for id in ids {
        let g = grads.get(id).expect("group gradient covers every parameter");
        sgd_momentum_step(params.get_mut(id), g, velocity.get_mut(id), lr, mom)?;
    }
    Ok(())
}

fn diverged(iteration: usize) -> impl Fn(NumericsError) -> TrainError {
    move |e| match e {
        NumericsError::NonFinite(op) => TrainError::Diverged { iteration, detail: format!("non-finite value in {op}") },
        other => TrainError::Numerics(other),
    }
}

/// One iteration: a generator step when the iteration number is divisible
/// by `k`, then a discriminator step on a real batch and fresh fakes.
pub fn train_iteration<E: Example>(state: &mut TrainState, data: &[E]) -> Result<TraceRecord, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Invalid("empty training set".into()));
    }
    let t = state.iteration + 1;
    let hp = state.hp.clone();
    let fail = diverged(t);
    let plan = |phase| Some(DropoutPlan { keep_p: hp.keep_p, seed: hp.seed, iteration: t, phase });
    let mut rec = TraceRecord {
        iteration: t,
        d_loss_real: 0.0,
        d_loss_fake: 0.0,
        g_objective: 0.0,
        mean_d_of_g: 0.0,
        g_updated: false,
    };

    if hp.adversarial && t.is_multiple_of(hp.k) {
        let z = generator_step_noise(&hp, t);
        let g = generator_batch_gradients(&state.params, &z, plan(PHASE_GENERATOR), hp.exec).map_err(&fail)?;
        state.clamp_hits += g.clamp_hits;
        rec.g_objective = g.mean_term;
        rec.g_updated = true;
        // ascend the objective net of its penalty
        let step = group_gradient(&state.params, Group::Generator, &g.grads, -1.0, hp.lambda);
        apply(&mut state.params, &mut state.velocity, Group::Generator, &step, hp.lr_gen(), hp.mom_gen())
            .map_err(&fail)?;
    }

    let batch: Vec<&E> = batch_indices(data.len(), hp.batch_m, hp.seed, t).into_iter().map(|i| &data[i]).collect();
    let real = real_batch_gradients(&state.params, &batch, plan(PHASE_REAL), hp.exec).map_err(&fail)?;
    state.clamp_hits += real.clamp_hits;
    rec.d_loss_real = real.mean_term;
    let mut grads = real.grads;
    if hp.adversarial {
        let z = discriminator_step_noise(&hp, t);
        let params = &state.params;
        let fakes = parallel::map_slice(hp.exec, &z, |z| network::generator_forward(z, params))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(&fail)?;
        let fake = fake_batch_gradients(params, &fakes, plan(PHASE_FAKE), hp.exec).map_err(&fail)?;
        state.clamp_hits += fake.clamp_hits;
        rec.d_loss_fake = fake.mean_term;
        rec.mean_d_of_g = fake.probs.iter().map(prob_real).sum::<f64>() / fake.probs.len() as f64;
        if !rec.g_updated {
            rec.g_objective = fake.mean_term;
        }
        grads.accumulate(&fake.grads);
    }
    let step = group_gradient(&state.params, Group::Discriminator, &grads, 1.0, hp.lambda);
    apply(&mut state.params, &mut state.velocity, Group::Discriminator, &step, hp.lr_dis, hp.mom_dis)
        .map_err(&fail)?;

    for v in [rec.d_loss_real, rec.d_loss_fake, rec.g_objective, rec.mean_d_of_g] {
        if !v.is_finite() {
            return Err(fail(NumericsError::NonFinite("trace")));
        }
    }
    state.iteration = t;
    Ok(rec)
}

/// Continues `state` until `until` iterations have completed or the run
/// diverges. The trace covers only the iterations run by this call.
pub fn run<E: Example>(state: &mut TrainState, data: &[E], until: usize) -> Result<(TrainingTrace, Status), TrainError> {
    let mut trace = TrainingTrace::default();
    let hits_before = state.clamp_hits;
    let mut status = Status::Completed;
    while state.iteration < until {
        match train_iteration(state, data) {
            Ok(rec) => {
                trace.records.push(rec);
                if rec.iteration % 10 == 0 {
                    trace.norms.push(NormSnapshot {
                        iteration: rec.iteration,
                        discriminator: state.params.norm_sq(Group::Discriminator),
                        generator: state.params.norm_sq(Group::Generator),
                    });
                }
            }
            Err(TrainError::Diverged { .. }) => {
                status = Status::Diverged;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    trace.clamp_hits = state.clamp_hits - hits_before;
    Ok((trace, status))
}

/// Trains from the seeded initialisation for `hp.iterations` iterations.
/// Parameters are returned even when the run diverged.
pub fn train<E: Example>(data: &[E], hp: &Hyperparams) -> Result<(ModelParams, TrainingTrace, Status), TrainError> {
    if data.is_empty() {
        return Err(TrainError::Invalid("empty training set".into()));
    }
    let mut state = TrainState::new(hp.clone())?;
    let (trace, status) = run(&mut state, data, hp.iterations)?;
    Ok((state.params, trace, status))
}
