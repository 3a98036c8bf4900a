//! Hybrid prediction, evaluation reports, the synthetic benchmark and the
//! command-line entry point.

mod cli;
mod synth;

pub use cli::{cli_main, Mode, RunConfig, EXIT_DATA, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE};
pub use synth::{synth_bench, synth_corpus, SynthOutcome, SYNTH_MAX_D, SYNTH_MAX_SIZE};

use std::fmt::Write as _;

use crate::corpus::{EmbeddedInstance, Polarity, ReviewInstance};
use crate::network::{discriminator_forward, Dropout, ModelParams, NUM_OUTPUTS, NUM_REAL_CLASSES};
use crate::numerics::NumericsError;
use crate::ontology::{ontology_classify, Lexicon};
use crate::parallel::{self, Exec};

/// Real class with the highest probability; the fake output is ignored.
/// Ties go to the lower class index.
pub fn predict_from_probs(p: &[f64; NUM_OUTPUTS]) -> Polarity {
    let mut best = 0;
    for c in 1..NUM_REAL_CLASSES {
        if p[c] > p[best] {
            best = c;
        }
    }
    Polarity::from_index(best).expect("real class")
}

pub fn network_predict(x: &EmbeddedInstance, model: &ModelParams) -> Result<Polarity, NumericsError> {
    Ok(predict_from_probs(&discriminator_forward(x, model, Dropout::Off)?))
}

/// The lexicon's verdict when it is conclusive, the network otherwise.
pub fn predict_hybrid(
    instance: &ReviewInstance,
    x: &EmbeddedInstance,
    lexicon: &Lexicon,
    model: &ModelParams,
) -> Result<Polarity, NumericsError> {
    match ontology_classify(instance, lexicon).decided() {
        Some(p) => Ok(p),
        None => network_predict(x, model),
    }
}

pub type Confusion = [[usize; NUM_REAL_CLASSES]; NUM_REAL_CLASSES];

/// Counts behind the hybrid and network-only accuracies of one test set.
/// Confusion matrices are indexed `[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub use_ontology: bool,
    pub total: usize,
    pub ontology_decided: usize,
    pub network_decided: usize,
    pub ontology_correct: usize,
    /// Correct network predictions on the instances the lexicon left open.
    pub network_correct_remainder: usize,
    /// Correct network predictions on every instance.
    pub network_correct: usize,
    pub confusion_hybrid: Confusion,
    pub confusion_network: Confusion,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EvalReport {
    pub fn hybrid_correct(&self) -> usize {
        self.ontology_correct + self.network_correct_remainder
    }

    pub fn hybrid_accuracy(&self) -> f64 {
        self.hybrid_correct() as f64 / self.total as f64
    }

    pub fn network_accuracy(&self) -> f64 {
        self.network_correct as f64 / self.total as f64
    }

    /// Accuracy on the instances the lexicon decided.
    pub fn ontology_accuracy(&self) -> Option<f64> {
        ratio(self.ontology_correct, self.ontology_decided)
    }

    pub fn remainder_accuracy(&self) -> Option<f64> {
        ratio(self.network_correct_remainder, self.network_decided)
    }

    /// Hybrid accuracy as the coverage-weighted mix of the two stages,
    /// checked on integer counts.
    pub fn identity_holds(&self) -> bool {
        let diag: usize = (0..NUM_REAL_CLASSES).map(|c| self.confusion_hybrid[c][c]).sum();
        let rows: usize = self.confusion_hybrid.iter().flatten().sum();
        self.ontology_decided + self.network_decided == self.total
            && diag == self.hybrid_correct()
            && rows == self.total
            && self.confusion_network.iter().flatten().sum::<usize>() == self.total
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let opt = |x: Option<f64>| x.map_or("NA".to_string(), |v| v.to_string());
        let matrix = |m: &Confusion| {
            m.iter()
                .map(|row| row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut s = String::new();
        let _ = writeln!(s, "use_ontology={}", self.use_ontology);
        let _ = writeln!(s, "total={}", self.total);
        let _ = writeln!(s, "ontology_decided={}", self.ontology_decided);
        let _ = writeln!(s, "network_decided={}", self.network_decided);
        let _ = writeln!(s, "ontology_correct={}", self.ontology_correct);
        let _ = writeln!(s, "network_correct_remainder={}", self.network_correct_remainder);
        let _ = writeln!(s, "network_correct={}", self.network_correct);
        let _ = writeln!(s, "hybrid_accuracy={}", self.hybrid_accuracy());
        let _ = writeln!(s, "network_accuracy={}", self.network_accuracy());
        let _ = writeln!(s, "ontology_accuracy={}", opt(self.ontology_accuracy()));
        let _ = writeln!(s, "remainder_accuracy={}", opt(self.remainder_accuracy()));
        let _ = writeln!(s, "confusion_hybrid={}", matrix(&self.confusion_hybrid));
        let _ = writeln!(s, "confusion_network={}", matrix(&self.confusion_network));
        s
    }
}

/// Accuracy grid with rows "w ontology" / "w/o ontology" and columns
/// in-sample / out-of-sample.
pub fn summary_table(in_sample: Option<&EvalReport>, out_of_sample: &EvalReport) -> String {
    let pct = |x: f64| format!("{:.1}%", 100.0 * x);
    let cell = |r: Option<&EvalReport>, hybrid: bool| match r {
        Some(r) if hybrid && !r.use_ontology => "-".to_string(),
        Some(r) => pct(if hybrid { r.hybrid_accuracy() } else { r.network_accuracy() }),
        None => "-".to_string(),
    };
    let mut s = String::new();
    let _ = writeln!(s, "{:<14}{:>12}{:>15}", "", "in-sample", "out-of-sample");
    for (label, hybrid) in [("w ontology", true), ("w/o ontology", false)] {
        let _ = writeln!(s, "{:<14}{:>12}{:>15}", label, cell(in_sample, hybrid), cell(Some(out_of_sample), hybrid));
    }
    s
}

/// Scores hybrid and network-only predictions in one pass.
pub fn evaluate(
    instances: &[ReviewInstance],
    embedded: &[EmbeddedInstance],
    lexicon: &Lexicon,
    model: &ModelParams,
    use_ontology: bool,
    exec: Exec,
) -> Result<EvalReport, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::Empty);
    }
    if instances.len() != embedded.len() {
        return Err(EvalError::Mismatch(instances.len(), embedded.len()));
    }
    let network = parallel::map_slice(exec, embedded, |x| network_predict(x, model))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut r = EvalReport {
        use_ontology,
        total: instances.len(),
        ontology_decided: 0,
        network_decided: 0,
        ontology_correct: 0,
        network_correct_remainder: 0,
        network_correct: 0,
        confusion_hybrid: [[0; NUM_REAL_CLASSES]; NUM_REAL_CLASSES],
        confusion_network: [[0; NUM_REAL_CLASSES]; NUM_REAL_CLASSES],
    };
    for ((inst, x), net) in instances.iter().zip(embedded).zip(network) {
        let gold = x.polarity;
        let lexical = if use_ontology { ontology_classify(inst, lexicon).decided() } else { None };
        let hybrid = match lexical {
            Some(p) => {
                r.ontology_decided += 1;
                r.ontology_correct += (p == gold) as usize;
                p
            }
            None => {
                r.network_decided += 1;
                r.network_correct_remainder += (net == gold) as usize;
                net
            }
        };
        r.network_correct += (net == gold) as usize;
        r.confusion_hybrid[gold.index()][hybrid.index()] += 1;
        r.confusion_network[gold.index()][net.index()] += 1;
    }
    Ok(r)
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("empty test set")]
    Empty,
    #[error("{0} instances but {1} embedded instances")]
    Mismatch(usize, usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
