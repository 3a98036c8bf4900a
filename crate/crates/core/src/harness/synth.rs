//! Three-class synthetic corpus with class-dependent token embeddings.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng as _;

use super::{evaluate, EvalError, EvalReport};
use crate::corpus::{embed, synth_embeddings, train_test_split, CorpusError, EmbeddingStore, Polarity, ReviewInstance, Span};
use crate::numerics::rng;
use crate::ontology::Lexicon;
use crate::trainer::{train, Hyperparams, Status, TrainError, TrainingTrace};

pub const SYNTH_MAX_D: usize = 8;
pub const SYNTH_MAX_SIZE: usize = 1000;

/// Distance scale of the class means.
const MEAN: f64 = 1.5;
const SIGMA: f64 = 1.0;
const TAG_SHAPE: u64 = 0x5a9e;

fn class_mean(c: usize, d: usize) -> Vec<f64> {
    (0..d).map(|j| if j % 3 == c { MEAN } else { -MEAN / 2.0 }).collect()
}

/// Box–Muller over consecutive pairs of U(−1, 1) components.
fn gaussianize(u: &mut [f64]) {
    let d = u.len();
    let src = u.to_vec();
    for (j, out) in u.iter_mut().enumerate() {
        let pair = j - j % 2;
        let a = 1.0 - (src[pair] + 1.0) / 2.0;
        let b = (src[(pair + 1) % d] + 1.0) / 2.0;
        let radius = (-2.0 * a.max(f64::MIN_POSITIVE).ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * b;
        *out = radius * if j % 2 == 0 { angle.cos() } else { angle.sin() };
    }
}

/// `size` sentences cycling through the three classes, with contexts of 0–5
/// tokens and targets of 1–2 tokens. Every token vector is drawn from the
/// Gaussian of its sentence's class.
pub fn synth_corpus(seed: u64, size: usize, d: usize) -> Result<(Vec<ReviewInstance>, EmbeddingStore), CorpusError> {
    if !(2..=SYNTH_MAX_D).contains(&d) || size == 0 || size > SYNTH_MAX_SIZE {
        return Err(CorpusError::Invalid(format!(
            "synthetic corpus needs 2 <= d <= {SYNTH_MAX_D} and 1 <= size <= {SYNTH_MAX_SIZE}"
        )));
    }
    let mut instances = Vec::with_capacity(size);
    for i in 0..size {
        let mut g = rng::stream(seed, &[TAG_SHAPE, i as u64]);
        let (l, t, r) = (g.random_range(0..=5usize), g.random_range(1..=2usize), g.random_range(0..=5usize));
        let tokens = (0..l + t + r).map(|j| format!("w{j}")).collect();
        instances.push(ReviewInstance::new(
            format!("synth-{i}"),
            tokens,
            Span { begin: l, end: l + t },
            "SYNTH".into(),
            Polarity::ALL[i % 3],
        )?);
    }
    let mut store = synth_embeddings(&instances, d, seed);
    let class: HashMap<&str, usize> = instances.iter().map(|x| (x.sentence_id.as_str(), x.polarity.index())).collect();
    let means: Vec<Vec<f64>> = (0..3).map(|c| class_mean(c, d)).collect();
    for (id, _, v) in store.vectors_mut() {
        gaussianize(v);
        let mu = &means[class[id]];
        for (x, m) in v.iter_mut().zip(mu) {
            *x = m + SIGMA * *x;
        }
    }
    Ok((instances, store))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutcome {
    pub report: EvalReport,
    pub trace: TrainingTrace,
    pub status: Status,
    pub train_size: usize,
    pub test_size: usize,
}

impl SynthOutcome {
    pub fn to_text(&self) -> String {
        let first = self.trace.records.first().map_or(0.0, |r| r.mean_d_of_g);
        let last = self.trace.records.last().map_or(0.0, |r| r.mean_d_of_g);
        let mut s = String::new();
        let _ = writeln!(s, "status={}", self.status);
        let _ = writeln!(s, "train_size={}", self.train_size);
        let _ = writeln!(s, "test_size={}", self.test_size);
        let _ = writeln!(s, "iterations_completed={}", self.trace.len());
        let _ = writeln!(s, "generator_updates={}", self.trace.generator_updates());
        let _ = writeln!(s, "initial_mean_D_of_G={first}");
        let _ = writeln!(s, "final_mean_D_of_G={last}");
        s.push_str(&self.report.to_text());
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Generates a corpus, trains on 80% of it with `hp` (its seed replaced by
/// `seed`) and scores the network alone on the remaining 20%.
pub fn synth_bench(seed: u64, size: usize, hp: &Hyperparams) -> Result<SynthOutcome, SynthError> {
    let (instances, store) = synth_corpus(seed, size, hp.d)?;
    let (fit, test) = train_test_split(&instances, 0.8, seed)?;
    let embed_all = |xs: &[ReviewInstance]| xs.iter().map(|x| embed(x, &store)).collect::<Result<Vec<_>, _>>();
    let (fit_x, test_x) = (embed_all(&fit)?, embed_all(&test)?);
    let hp = Hyperparams { seed, ..hp.clone() };
    let (model, trace, status) = train(&fit_x, &hp)?;
    let report = evaluate(&test, &test_x, &Lexicon::default(), &model, false, hp.exec)?;
    Ok(SynthOutcome { report, trace, status, train_size: fit.len(), test_size: test.len() })
}
