//! `absa-gan <mode> [flags]`.
//!
//! Settings are resolved in order: built-in defaults, `--config` file,
//! `--preset`, then individual flags.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand};

use super::{evaluate, summary_table, synth_bench, EvalReport};
use crate::corpus::{embed, parse_pretokenized, parse_semeval, synth_embeddings, EmbeddedInstance, EmbeddingStore, ReviewInstance};
use crate::hpo::{hpo_run, write_trials_csv, HpoSettings, Preset, SearchSpace};
use crate::network::{Checkpoint, ModelParams};
use crate::ontology::{ontology_classify, Lexicon, Reason};
use crate::parallel::Exec;
use crate::trainer::{run, Hyperparams, Status, TrainState, TrainingTrace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    Hpo,
    OntologyEval,
    SynthBench,
}

#[derive(Parser, Debug)]
#[command(name = "absa-gan", version, about = "Adversarially trained hybrid aspect sentiment classifier")]
struct Cli {
    #[command(subcommand)]
    mode: ModeArgs,
}

#[derive(Subcommand, Debug)]
enum ModeArgs {
    /// Train on a corpus; writes model.ckpt, trace.csv, norms.csv and report.txt.
    Train(Flags),
    /// Score a checkpoint on a corpus, with and without the lexicon.
    Eval(Flags),
    /// Hyperparameter search on an 80/20 split of a corpus.
    Hpo(Flags),
    /// Lexicon coverage and accuracy on a corpus.
    OntologyEval(Flags),
    /// Train and score on a generated three-class corpus.
    SynthBench(Flags),
}

#[derive(clap::Args, Debug, Default)]
struct Flags {
    /// Annotated corpus (XML or tab-separated pre-tokenized)
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Extra corpus scored as the in-sample column in eval mode
    #[arg(long)]
    in_sample: Option<PathBuf>,
    /// Token embedding file; synthetic vectors are used when absent
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Model to evaluate, or training state to resume
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// File of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// semeval2015 or semeval2016
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Network-only predictions
    #[arg(long, alias = "network-only")]
    no_ontology: bool,
    /// Disable the generator (plain three-class training)
    #[arg(long)]
    plain: bool,
    /// Run without thread parallelism
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_m: Option<usize>,
    #[arg(long)]
    lr_dis: Option<f64>,
    #[arg(long)]
    mom_dis: Option<f64>,
    #[arg(long)]
    mu_lr: Option<f64>,
    #[arg(long)]
    mu_mom: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    keep_p: Option<f64>,
    /// Trials in hpo mode
    #[arg(long)]
    budget: Option<usize>,
    /// Concurrent trials in hpo mode
    #[arg(long)]
    width: Option<usize>,
    /// Corpus size in synth-bench mode
    #[arg(long)]
    size: Option<usize>,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub corpus: Option<PathBuf>,
    pub in_sample: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub hp: Hyperparams,
    pub use_ontology: bool,
    pub budget: usize,
    pub width: usize,
    pub size: usize,
    /// Whether `d` was set explicitly rather than left at its default.
    pub d_explicit: bool,
}

enum CliError {
    Usage(String),
    Data(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data(msg: impl std::fmt::Display) -> CliError {
    CliError::Data(msg.to_string())
}

impl RunConfig {
    pub fn defaults(mode: Mode) -> Self {
        Self {
            mode,
            corpus: None,
            in_sample: None,
            embeddings: None,
            lexicon: None,
            checkpoint: None,
            out: None,
            hp: Hyperparams::default(),
            use_ontology: true,
            budget: 20,
            width: 1,
            size: 300,
            d_explicit: false,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| format!("{key}: cannot parse {v:?}"));
        match key {
            "corpus" => self.corpus = Some(value.into()),
            "in_sample" => self.in_sample = Some(value.into()),
            "embeddings" => self.embeddings = Some(value.into()),
            "lexicon" => self.lexicon = Some(value.into()),
            "checkpoint" => self.checkpoint = Some(value.into()),
            "out" => self.out = Some(value.into()),
            "use_ontology" => self.use_ontology = value.parse().map_err(|_| format!("{key}: expected true or false"))?,
            "budget" => self.budget = parse_usize(value)?,
            "width" => self.width = parse_usize(value)?,
            "size" => self.size = parse_usize(value)?,
            "exec" => {
                self.hp.exec = match value {
                    "parallel" => Exec::Parallel,
                    "sequential" => Exec::Sequential,
                    _ => return Err(format!("exec: expected parallel or sequential, got {value:?}")),
                }
            }
            "preset" => Preset::from_name(value).ok_or_else(|| format!("unknown preset {value:?}"))?.apply(&mut self.hp),
            _ => {
                self.hp.set(key, value)?;
                if key == "d" {
                    self.d_explicit = true;
                }
            }
        }
        Ok(())
    }

    /// Applies a configuration file: `key = value` per line, `#` comments.
    pub fn apply_config_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            self.set(k.trim(), v.trim()).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    fn from_flags(mode: Mode, f: Flags) -> Result<Self, CliError> {
        let mut cfg = Self::defaults(mode);
        if mode == Mode::SynthBench {
            cfg.hp.d = 4;
        }
        if let Some(path) = &f.config {
            let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            cfg.apply_config_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        }
        if let Some(p) = &f.preset {
            cfg.set("preset", p).map_err(usage)?;
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = f.$field {
                    cfg.set(stringify!($field), &v.to_string()).map_err(usage)?;
                }
            )*};
        }
        take!(seed, d, r, hops, iterations, batch_m, lr_dis, mom_dis, mu_lr, mu_mom, k, lambda, keep_p, budget, width, size);
        for (slot, v) in [
            (&mut cfg.corpus, f.corpus),
            (&mut cfg.in_sample, f.in_sample),
            (&mut cfg.embeddings, f.embeddings),
            (&mut cfg.lexicon, f.lexicon),
            (&mut cfg.checkpoint, f.checkpoint),
            (&mut cfg.out, f.out),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
        if f.no_ontology {
            cfg.use_ontology = false;
        }
        if f.plain {
            cfg.hp.adversarial = false;
        }
        if f.sequential {
            cfg.hp.exec = Exec::Sequential;
        }
        Ok(cfg)
    }

    fn require(&self) -> Result<(), CliError> {
        let need: &[(&str, bool)] = match self.mode {
            Mode::Train | Mode::Hpo => &[("--corpus", self.corpus.is_some()), ("--out", self.out.is_some())],
            Mode::Eval => &[
                ("--corpus", self.corpus.is_some()),
                ("--checkpoint", self.checkpoint.is_some()),
                ("--out", self.out.is_some()),
            ],
            Mode::OntologyEval => &[
                ("--corpus", self.corpus.is_some()),
                ("--lexicon", self.lexicon.is_some()),
                ("--out", self.out.is_some()),
            ],
            Mode::SynthBench => &[("--out", self.out.is_some())],
        };
        let missing: Vec<&str> = need.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(usage(format!("missing required {}", missing.join(", "))))
        }
    }
}

fn load_corpus(path: &Path) -> Result<Vec<ReviewInstance>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let parsed = if text.trim_start().starts_with('<') { parse_semeval(&text) } else { parse_pretokenized(&text) };
    let instances = parsed.map_err(|e| data(format!("{}: {e}", path.display())))?;
    if instances.is_empty() {
        return Err(data(format!("{}: no instances with an explicit target", path.display())));
    }
    Ok(instances)
}

/// The embedding file if given (its dimension must agree with an explicit
/// `d`), synthetic vectors otherwise.
fn embeddings_for(cfg: &RunConfig, instances: &[ReviewInstance], d: usize, seed: u64) -> Result<EmbeddingStore, CliError> {
    match &cfg.embeddings {
        Some(path) => {
            let store = EmbeddingStore::load(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            if store.dim() != d {
                return Err(data(format!("{}: dimension {} but d = {d}", path.display(), store.dim())));
            }
            Ok(store)
        }
        None => Ok(synth_embeddings(instances, d, seed)),
    }
}

fn embed_all(instances: &[ReviewInstance], store: &EmbeddingStore) -> Result<Vec<EmbeddedInstance>, CliError> {
    instances.iter().map(|x| embed(x, store)).collect::<Result<_, _>>().map_err(data)
}

/// Adopts the embedding file's dimension when `d` was not given.
fn resolve_d(cfg: &mut RunConfig) -> Result<(), CliError> {
    if let (Some(path), false) = (&cfg.embeddings, cfg.d_explicit) {
        let store = EmbeddingStore::load(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        cfg.hp.d = store.dim();
    }
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn trace_files(dir: &Path, trace: &TrainingTrace) -> Result<(), CliError> {
    write(dir, "trace.csv", trace.to_csv_string().as_bytes())?;
    let mut norms = Vec::new();
    trace.write_norms_csv(&mut norms).expect("in-memory write");
    write(dir, "norms.csv", &norms)
}

fn hp_lines(hp: &Hyperparams) -> String {
    hp.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn run_train(mut cfg: RunConfig) -> Result<Status, CliError> {
    resolve_d(&mut cfg)?;
    cfg.hp.validate().map_err(|e| usage(e.to_string()))?;
    let out = cfg.out.clone().expect("checked");
    let instances = load_corpus(cfg.corpus.as_ref().expect("checked"))?;
    let mut state = match &cfg.checkpoint {
        Some(path) => {
            let mut s = TrainState::load(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            s.hp.exec = cfg.hp.exec;
            s.hp.iterations = cfg.hp.iterations;
            s
        }
        None => TrainState::new(cfg.hp.clone()).map_err(|e| usage(e.to_string()))?,
    };
    let store = embeddings_for(&cfg, &instances, state.hp.d, state.hp.seed)?;
    let xs = embed_all(&instances, &store)?;
    let (trace, status) = run(&mut state, &xs, cfg.hp.iterations).map_err(data)?;

    let mut ck = Vec::new();
    state.to_checkpoint().write(&mut ck).map_err(data)?;
    write(&out, "model.ckpt", &ck)?;
    trace_files(&out, &trace)?;
    let mut report = format!("status={status}\niterations_completed={}\ninstances={}\n", state.iteration, xs.len());
    if let Some(last) = trace.records.last() {
        let _ = write!(
            report,
            "final_d_loss_real={}\nfinal_d_loss_fake={}\nfinal_g_objective={}\nfinal_mean_D_of_G={}\n",
            last.d_loss_real, last.d_loss_fake, last.g_objective, last.mean_d_of_g
        );
    }
    let _ = writeln!(report, "clamp_hits={}", trace.clamp_hits);
    report.push_str(&hp_lines(&state.hp));
    write(&out, "report.txt", report.as_bytes())?;
    Ok(status)
}

fn load_lexicon(cfg: &RunConfig) -> Result<Lexicon, CliError> {
    match (&cfg.lexicon, cfg.use_ontology) {
        (Some(path), true) => Lexicon::load(path).map_err(|e| data(format!("{}: {e}", path.display()))),
        _ => Ok(Lexicon::default()),
    }
}

fn run_eval(cfg: RunConfig) -> Result<Status, CliError> {
    let path = cfg.checkpoint.as_ref().expect("checked");
    let file = fs::File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let ck = Checkpoint::read(BufReader::new(file)).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let (model, seed) = ModelParams::from_checkpoint(&ck).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let lexicon = load_lexicon(&cfg)?;
    let d = model.config().d;
    let score = |corpus: &Path| -> Result<EvalReport, CliError> {
        let instances = load_corpus(corpus)?;
        let store = embeddings_for(&cfg, &instances, d, seed)?;
        let xs = embed_all(&instances, &store)?;
        evaluate(&instances, &xs, &lexicon, &model, cfg.use_ontology, cfg.hp.exec).map_err(data)
    };
    let out_of_sample = score(cfg.corpus.as_ref().expect("checked"))?;
    let in_sample = cfg.in_sample.as_deref().map(score).transpose()?;
    let mut text = String::from("[out_of_sample]\n");
    text.push_str(&out_of_sample.to_text());
    if let Some(r) = &in_sample {
        text.push_str("[in_sample]\n");
        text.push_str(&r.to_text());
    }
    text.push('\n');
    text.push_str(&summary_table(in_sample.as_ref(), &out_of_sample));
    write(cfg.out.as_ref().expect("checked"), "report.txt", text.as_bytes())?;
    print!("{}", summary_table(in_sample.as_ref(), &out_of_sample));
    Ok(Status::Completed)
}

fn run_hpo(mut cfg: RunConfig) -> Result<Status, CliError> {
    resolve_d(&mut cfg)?;
    cfg.hp.validate().map_err(|e| usage(e.to_string()))?;
    if cfg.budget == 0 {
        return Err(usage("budget must be at least 1"));
    }
    let instances = load_corpus(cfg.corpus.as_ref().expect("checked"))?;
    if instances.len() < 2 {
        return Err(data("hpo needs at least two instances"));
    }
    let store = embeddings_for(&cfg, &instances, cfg.hp.d, cfg.hp.seed)?;
    let xs = embed_all(&instances, &store)?;
    let space = SearchSpace::default_grid();
    let settings =
        HpoSettings { budget: cfg.budget, seed: cfg.hp.seed, width: cfg.width.max(1), exec: cfg.hp.exec, ..Default::default() };
    let result = hpo_run(&xs, &cfg.hp, &space, &settings).map_err(data)?;
    let out = cfg.out.as_ref().expect("checked");
    let mut csv = Vec::new();
    write_trials_csv(&space, &result.trials, &mut csv).expect("in-memory write");
    write(out, "trials.csv", &csv)?;
    let best: String =
        space.dims().iter().zip(&result.best.config).map(|(d, v)| format!("{} = {v}\n", d.name)).collect();
    write(out, "best.conf", best.as_bytes())?;
    let diverged = result.trials.iter().filter(|t| t.status == Status::Diverged).count();
    let report = format!(
        "trials={}\ndiverged={diverged}\nbest_trial={}\nbest_objective={}\n",
        result.trials.len(),
        result.best.index,
        result.best.objective
    );
    write(out, "report.txt", report.as_bytes())?;
    Ok(Status::Completed)
}

fn run_ontology_eval(cfg: RunConfig) -> Result<Status, CliError> {
    let instances = load_corpus(cfg.corpus.as_ref().expect("checked"))?;
    let path = cfg.lexicon.as_ref().expect("checked");
    let lexicon = Lexicon::load(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let (mut decided, mut correct, mut conflicts, mut no_hits) = (0usize, 0usize, 0usize, 0usize);
    for x in &instances {
        let v = ontology_classify(x, &lexicon);
        match v.decided() {
            Some(p) => {
                decided += 1;
                correct += (p == x.polarity) as usize;
            }
            None if v.reason == Reason::Conflict => conflicts += 1,
            None => no_hits += 1,
        }
    }
    let n = instances.len();
    let acc = if decided > 0 { (correct as f64 / decided as f64).to_string() } else { "NA".into() };
    let report = format!(
        "total={n}\ndecided={decided}\ncorrect={correct}\nconflicts={conflicts}\nno_hits={no_hits}\ncoverage={}\naccuracy_on_covered={acc}\n",
        decided as f64 / n as f64
    );
    write(cfg.out.as_ref().expect("checked"), "report.txt", report.as_bytes())?;
    print!("{report}");
    Ok(Status::Completed)
}

fn run_synth(cfg: RunConfig) -> Result<Status, CliError> {
    cfg.hp.validate().map_err(|e| usage(e.to_string()))?;
    let outcome = synth_bench(cfg.hp.seed, cfg.size, &cfg.hp).map_err(|e| usage(e.to_string()))?;
    let out = cfg.out.as_ref().expect("checked");
    let mut text = outcome.to_text();
    text.push('\n');
    text.push_str(&summary_table(None, &outcome.report));
    write(out, "report.txt", text.as_bytes())?;
    trace_files(out, &outcome.trace)?;
    print!("{}", summary_table(None, &outcome.report));
    Ok(outcome.status)
}

fn dispatch(cfg: RunConfig) -> Result<Status, CliError> {
    cfg.require()?;
    match cfg.mode {
        Mode::Train => run_train(cfg),
        Mode::Eval => run_eval(cfg),
        Mode::Hpo => run_hpo(cfg),
        Mode::OntologyEval => run_ontology_eval(cfg),
        Mode::SynthBench => run_synth(cfg),
    }
}

/// Runs one invocation and returns the process exit code: 0 success,
/// 1 usage error, 2 divergence, 3 data error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (mode, flags) = match cli.mode {
        ModeArgs::Train(f) => (Mode::Train, f),
        ModeArgs::Eval(f) => (Mode::Eval, f),
        ModeArgs::Hpo(f) => (Mode::Hpo, f),
        ModeArgs::OntologyEval(f) => (Mode::OntologyEval, f),
        ModeArgs::SynthBench(f) => (Mode::SynthBench, f),
    };
    let result = RunConfig::from_flags(mode, flags).and_then(dispatch);
    match result {
        Ok(Status::Completed) => EXIT_OK,
        Ok(Status::Diverged) => {
            eprintln!("error: training diverged");
            EXIT_DIVERGED
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", Cli::command().render_usage());
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DATA
        }
    }
}
