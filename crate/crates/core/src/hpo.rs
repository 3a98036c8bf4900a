//! Tree-structured Parzen Estimator search over a finite grid.
//!
//! Every hyperparameter takes one of a few listed values, so each density is
//! a categorical distribution with add-one smoothing and the acquisition
//! `Σ log l(v) − log g(v)` is maximised by scoring the whole grid.

use std::io::Write;

use rand::Rng as _;
use thiserror::Error;

use crate::corpus::{train_test_split, CorpusError, EmbeddedInstance};
use crate::harness::network_predict;
use crate::numerics::rng::{self, Rng};
use crate::parallel::{self, Exec};
use crate::trainer::{self, Hyperparams, Status, TrainError};

#[derive(Debug, Error)]
pub enum HpoError {
    #[error("invalid search setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

/// One value per dimension, in the space's dimension order.
pub type Configuration = Vec<f64>;

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, HpoError> {
        if dims.is_empty() {
            return Err(HpoError::Invalid("search space has no dimensions".into()));
        }
        for d in &dims {
            if d.values.is_empty() || d.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(HpoError::Invalid(format!("{}: values must be non-empty and positive", d.name)));
            }
        }
        Ok(Self { dims })
    }

    /// The standard grid: six learning rates, three momenta, four values
    /// for each multiplier and k from 3 to 5.
    pub fn default_grid() -> Self {
        let dim = |name: &str, values: &[f64]| Dimension { name: name.into(), values: values.to_vec() };
        Self {
            dims: vec![
                dim("lr_dis", &[0.007, 0.01, 0.02, 0.03, 0.05, 0.09]),
                dim("mom_dis", &[0.7, 0.8, 0.9]),
                dim("mu_lr", &[0.1, 0.15, 0.2, 0.4]),
                dim("mu_mom", &[0.4, 0.6, 0.8, 1.6]),
                dim("k", &[3.0, 4.0, 5.0]),
            ],
        }
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.dims.iter().map(|d| d.values.len()).product()
    }

    /// Position of each value in its candidate list, if the configuration
    /// lies on the grid.
    pub fn indices(&self, config: &[f64]) -> Option<Vec<usize>> {
        if config.len() != self.dims.len() {
            return None;
        }
        self.dims.iter().zip(config).map(|(d, v)| d.values.iter().position(|c| c == v)).collect()
    }

    pub fn contains(&self, config: &[f64]) -> bool {
        self.indices(config).is_some()
    }

    /// Every grid point, last dimension varying fastest.
    pub fn grid(&self) -> Vec<Configuration> {
        let mut out = vec![Vec::new()];
        for d in &self.dims {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<f64>| {
                    d.values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push(*v);
                        c
                    })
                })
                .collect();
        }
        out
    }

    pub fn random(&self, rng: &mut Rng) -> Configuration {
        self.dims.iter().map(|d| d.values[rng.random_range(0..d.values.len())]).collect()
    }

    /// Writes the configuration into `hp` by dimension name.
    pub fn apply(&self, config: &[f64], hp: &mut Hyperparams) -> Result<(), HpoError> {
        for (d, v) in self.dims.iter().zip(config) {
            hp.set(&d.name, &v.to_string()).map_err(HpoError::Invalid)?;
        }
        Ok(())
    }
}

/// Optimal values reported for the two benchmark years.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Semeval2015,
    Semeval2016,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Semeval2015 => "semeval2015",
            Preset::Semeval2016 => "semeval2016",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Preset::Semeval2015, Preset::Semeval2016].into_iter().find(|p| p.name() == name)
    }

    /// `(lr_dis, mom_dis, mu_lr, mu_mom, k)` in [`SearchSpace::default_grid`] order.
    pub fn config(self) -> Configuration {
        match self {
            Preset::Semeval2015 => vec![0.02, 0.9, 0.1, 0.4, 3.0],
            Preset::Semeval2016 => vec![0.03, 0.7, 0.15, 0.6, 3.0],
        }
    }

    pub fn apply(self, hp: &mut Hyperparams) {
        SearchSpace::default_grid().apply(&self.config(), hp).expect("preset lies on the grid");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub config: Configuration,
    /// Validation accuracy; zero for diverged trials.
    pub objective: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeSettings {
    /// Fraction of the history treated as good.
    pub gamma: f64,
    /// Trials drawn uniformly before the density model is used.
    pub n_startup: usize,
}

impl Default for TpeSettings {
    fn default() -> Self {
        Self { gamma: 0.25, n_startup: 5 }
    }
}

/// Good and bad sets: the best `⌈γ·n⌉` trials (at least one) by objective,
/// earlier trials first among equals, and the rest.
fn split_history(history: &[Trial], gamma: f64) -> (Vec<&Trial>, Vec<&Trial>) {
    let mut order: Vec<&Trial> = history.iter().collect();
    order.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    let n_good = ((gamma * history.len() as f64).ceil() as usize).clamp(1, history.len());
    let bad = order.split_off(n_good);
    (order, bad)
}

/// Acquisition score of every grid point given good and bad configurations.
pub fn tpe_scores(space: &SearchSpace, good: &[&[f64]], bad: &[&[f64]]) -> Vec<(Configuration, f64)> {
    let log_density = |set: &[&[f64]], dim: usize| -> Vec<f64> {
        let values = &space.dims[dim].values;
        let total = (set.len() + values.len()) as f64;
        values
            .iter()
            .map(|v| {
                let count = set.iter().filter(|c| c[dim] == *v).count();
                ((count + 1) as f64 / total).ln()
            })
            .collect()
    };
    let ratio: Vec<Vec<f64>> = (0..space.dims.len())
        .map(|i| {
            let (l, g) = (log_density(good, i), log_density(bad, i));
            l.iter().zip(&g).map(|(a, b)| a - b).collect()
        })
        .collect();
    space
        .grid()
        .into_iter()
        .map(|c| {
            let idx = space.indices(&c).expect("grid point");
            let score = idx.iter().enumerate().map(|(dim, &i)| ratio[dim][i]).sum();
            (c, score)
        })
        .collect()
}

pub fn tpe_suggest(
    history: &[Trial],
    space: &SearchSpace,
    settings: TpeSettings,
    rng: &mut Rng,
) -> Result<Configuration, HpoError> {
    tpe_suggest_with_pending(history, &[], space, settings, rng)
}

/// As [`tpe_suggest`], with configurations still being evaluated counted as
/// bad (constant liar).
pub fn tpe_suggest_with_pending(
    history: &[Trial],
    pending: &[Configuration],
    space: &SearchSpace,
    settings: TpeSettings,
    rng: &mut Rng,
) -> Result<Configuration, HpoError> {
    if !(settings.gamma > 0.0 && settings.gamma < 1.0) {
        return Err(HpoError::Invalid(format!("gamma must lie in (0, 1), got {}", settings.gamma)));
    }
    if history.is_empty() && settings.n_startup == 0 {
        return Err(HpoError::Invalid("no history and no startup trials".into()));
    }
    if history.len() < settings.n_startup || history.is_empty() {
        return Ok(space.random(rng));
    }
    let (good, bad) = split_history(history, settings.gamma);
    let good: Vec<&[f64]> = good.iter().map(|t| t.config.as_slice()).collect();
    let bad: Vec<&[f64]> = bad.iter().map(|t| t.config.as_slice()).chain(pending.iter().map(|c| c.as_slice())).collect();
    let scores = tpe_scores(space, &good, &bad);
    let best = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<&Configuration> = scores.iter().filter(|(_, s)| best - s <= 1e-12).map(|(c, _)| c).collect();
    Ok(ties[rng.random_range(0..ties.len())].clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpoSettings {
    pub budget: usize,
    pub seed: u64,
    pub tpe: TpeSettings,
    /// Trials evaluated concurrently.
    pub width: usize,
    pub exec: Exec,
}

impl Default for HpoSettings {
    fn default() -> Self {
        Self { budget: 20, seed: 0, tpe: TpeSettings::default(), width: 1, exec: Exec::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpoResult {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

const TAG_SUGGEST: u64 = 0x79e;
const TAG_TRIAL: u64 = 0x7a1;

/// Seed handed to the objective for trial `index`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    rng::sub_seed(seed, &[TAG_TRIAL, index as u64])
}

/// Highest objective; completed trials beat diverged ones, earlier trials
/// win ties.
pub fn best_trial(trials: &[Trial]) -> Option<&Trial> {
    let mut best: Option<&Trial> = None;
    for t in trials {
        let better = match best {
            None => true,
            Some(b) => {
                let (tc, bc) = (t.status == Status::Completed, b.status == Status::Completed);
                (tc && !bc) || (tc == bc && t.objective > b.objective)
            }
        };
        if better {
            best = Some(t);
        }
    }
    best
}

/// TPE search against an arbitrary objective `(config, trial seed) →
/// (score, status)`. Suggestions are made in rounds of `width`; within a
/// round, earlier suggestions act as pending.
pub fn hpo_search<F>(space: &SearchSpace, settings: &HpoSettings, objective: F) -> Result<HpoResult, HpoError>
where
    F: Fn(&[f64], u64) -> Result<(f64, Status), HpoError> + Sync,
{
    search(space, settings, objective, |history, pending, index| {
        let mut r = rng::stream(settings.seed, &[TAG_SUGGEST, index as u64]);
        tpe_suggest_with_pending(history, pending, space, settings.tpe, &mut r)
    })
}

/// Uniform random search with the same budget and trial seeds.
pub fn random_search<F>(space: &SearchSpace, settings: &HpoSettings, objective: F) -> Result<HpoResult, HpoError>
where
    F: Fn(&[f64], u64) -> Result<(f64, Status), HpoError> + Sync,
{
    search(space, settings, objective, |_, _, index| {
        Ok(space.random(&mut rng::stream(settings.seed, &[TAG_SUGGEST, index as u64])))
    })
}

fn search<F, S>(space: &SearchSpace, settings: &HpoSettings, objective: F, suggest: S) -> Result<HpoResult, HpoError>
where
    F: Fn(&[f64], u64) -> Result<(f64, Status), HpoError> + Sync,
    S: Fn(&[Trial], &[Configuration], usize) -> Result<Configuration, HpoError>,
{
    if settings.budget == 0 {
        return Err(HpoError::Invalid("budget must be at least 1".into()));
    }
    let width = settings.width.max(1);
    let mut trials: Vec<Trial> = Vec::with_capacity(settings.budget);
    while trials.len() < settings.budget {
        let round = width.min(settings.budget - trials.len());
        let mut pending: Vec<Configuration> = Vec::with_capacity(round);
        for j in 0..round {
            let c = suggest(&trials, &pending, trials.len() + j)?;
            debug_assert!(space.contains(&c));
            pending.push(c);
        }
        let base = trials.len();
        let results = parallel::map_range(settings.exec, round, |j| objective(&pending[j], trial_seed(settings.seed, base + j)));
        for (j, (config, result)) in pending.into_iter().zip(results).enumerate() {
            let (score, status) = result?;
            let objective = if status == Status::Diverged { 0.0 } else { score };
            trials.push(Trial { index: base + j, config, objective, status });
        }
    }
    let best = best_trial(&trials).expect("budget >= 1").clone();
    Ok(HpoResult { best, trials })
}

/// Searches over `space` on one 80/20 split of `train`: each trial trains on
/// the 80% part and is scored by network-only accuracy on the rest.
pub fn hpo_run(
    train: &[EmbeddedInstance],
    base: &Hyperparams,
    space: &SearchSpace,
    settings: &HpoSettings,
) -> Result<HpoResult, HpoError> {
    let (fit, validation) = train_test_split(train, 0.8, settings.seed)?;
    // trials already run side by side; keep each one sequential inside
    let inner = if settings.width > 1 { Exec::Sequential } else { base.exec };
    hpo_search(space, settings, |config, seed| {
        let mut hp = Hyperparams { seed, exec: inner, ..base.clone() };
        space.apply(config, &mut hp)?;
        let (model, _, status) = trainer::train(&fit, &hp)?;
        if status == Status::Diverged {
            return Ok((0.0, status));
        }
        let mut correct = 0usize;
        for x in &validation {
            let p = network_predict(x, &model).map_err(TrainError::from)?;
            correct += (p == x.polarity) as usize;
        }
        Ok((correct as f64 / validation.len() as f64, status))
    })
}

pub fn write_trials_csv<W: Write>(space: &SearchSpace, trials: &[Trial], mut w: W) -> std::io::Result<()> {
    let names: Vec<&str> = space.dims.iter().map(|d| d.name.as_str()).collect();
    writeln!(w, "trial,{},objective,status", names.join(","))?;
    for t in trials {
        let values: Vec<String> = t.config.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{},{},{}", t.index, values.join(","), t.objective, t.status)?;
    }
    Ok(())
}
