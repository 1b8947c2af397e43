use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pdextract::experiments::{Experiment, ExperimentConfig, GeneratorKind};
use pdextract::protocols::Adversary;
use pdextract::tomography::Backend;

#[derive(Parser, Debug)]
#[command(name = "pdextract", version, about = "Pseudodeterministic extraction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract bits from Haar states through tomography.
    ExtractDemo(Common),
    /// Marginal, block-sum and output-uniformity statistics of Haar states.
    HaarStats(Common),
    /// Seeded generator: modal frequency and output uniformity.
    QprgRun(Common),
    /// Seeded function on random inputs.
    QprfRun(Common),
    /// Majority amplification over the `--s` factors.
    Amplify(Common),
    /// One-time pad built from the generator.
    Potp(Common),
    /// Bit commitment, honest or under `--adversary`.
    Commit(Common),
    /// Nonce-based symmetric encryption.
    Ske(Common),
    /// Timings of the core operations.
    Bench(Common),
}

impl Command {
    pub fn split(&self) -> (Experiment, &Common) {
        match self {
            Command::ExtractDemo(c) => (Experiment::ExtractDemo, c),
            Command::HaarStats(c) => (Experiment::HaarStats, c),
            Command::QprgRun(c) => (Experiment::QprgRun, c),
            Command::QprfRun(c) => (Experiment::QprfRun, c),
            Command::Amplify(c) => (Experiment::Amplify, c),
            Command::Potp(c) => (Experiment::Potp, c),
            Command::Commit(c) => (Experiment::Commit, c),
            Command::Ske(c) => (Experiment::Ske, c),
            Command::Bench(c) => (Experiment::Bench, c),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// Hilbert space dimension(s); repeat or comma-separate.
    #[arg(long = "dim", value_delimiter = ',')]
    pub dims: Vec<usize>,
    /// exact | bounded-noise | multinomial-shots
    #[arg(long)]
    pub backend: Option<Backend>,
    /// Shots per tomography call, or `auto` for the Hoeffding count.
    #[arg(long)]
    pub shots: Option<Shots>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<usize>,
    /// Amplification factors; repeat or comma-separate.
    #[arg(long = "s", value_delimiter = ',')]
    pub s: Vec<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// none | flip-seeds | best-collision
    #[arg(long)]
    pub adversary: Option<Adversary>,
    /// quantum | synthetic | toy
    #[arg(long)]
    pub generator: Option<GeneratorKind>,
    /// Per-call deviation of the synthetic generator.
    #[arg(long)]
    pub deviation: Option<f64>,
    #[arg(long = "fail-prob")]
    pub fail_prob: Option<f64>,
    #[arg(long = "message-len")]
    pub message_len: Option<usize>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// TOML file with config fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for `<experiment>.csv` and `<experiment>.json`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    Auto,
    Fixed(u64),
}

impl std::str::FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Shots::Auto);
        }
        s.parse().map(Shots::Fixed).map_err(|_| format!("expected a shot count or `auto`, got `{s}`"))
    }
}

impl Common {
    /// Layers the flags over `base` (defaults or a config file).
    pub fn apply(&self, experiment: Experiment, mut cfg: ExperimentConfig) -> ExperimentConfig {
        cfg.experiment = experiment;
        if !self.dims.is_empty() {
            cfg.dims = self.dims.clone();
        }
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        match self.shots {
            Some(Shots::Auto) => cfg.shots = None,
            Some(Shots::Fixed(n)) => cfg.shots = Some(n),
            None => {}
        }
        if !self.s.is_empty() {
            cfg.s = self.s.clone();
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(trials, seed, lambda, reps, adversary, generator, deviation, fail_prob);
        if self.message_len.is_some() {
            cfg.message_len = self.message_len;
        }
        cfg
    }
}
