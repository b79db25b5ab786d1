//! Command-line front end: every step of the constrained-inference workflow
//! reads and writes plain files so runs can be scripted and diffed.

pub mod commands;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::run;

#[derive(Debug, Parser)]
#[command(
    name = "temprel",
    version,
    about = "Distributional-constraint inference for temporal relations"
)]
pub struct Cli {
    /// Solver configuration (JSON). Defaults to alpha 5.0, gamma 0.7, theta 0.05.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Overrides the generator seed (synth, pipeline) and the split seed (select).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress tables and progress notes on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Greedy,
    Stability,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Micro,
    Tempeval,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count type pairs and triplets; writes counts.json and stats.txt.
    Stats {
        corpus: PathBuf,
        /// Count gold labels (default).
        #[arg(long, conflicts_with = "pred")]
        gold: bool,
        /// Count argmax predictions.
        #[arg(long)]
        pred: bool,
    },
    /// Choose constraints from train priors and dev predictions; writes
    /// constraints.json and selection.json.
    Select {
        train: PathBuf,
        dev: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Greedy)]
        mode: Mode,
    },
    /// Constrained inference; writes predictions.json, trace.jsonl and infer.json.
    /// Exits with 3 when the solver stops at the iteration limit.
    Infer { corpus: PathBuf, constraints: PathBuf },
    /// Compare the solver with exhaustive search on small instances; writes verify.json.
    Verify {
        corpus: PathBuf,
        constraints: PathBuf,
        /// Instances with more pairs are skipped.
        #[arg(long, default_value_t = 8)]
        max_pairs: usize,
    },
    /// Score predictions against corpus gold; writes eval.json and eval.txt.
    Eval {
        gold: PathBuf,
        pred: PathBuf,
        /// Second system; adds McNemar's test.
        pred_b: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Metric::Micro)]
        metric: Metric,
        /// Closure rules (JSON) for the tempeval metric.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Generate a synthetic corpus from a spec; writes corpus.json.
    Synth { spec: PathBuf },
    /// synth -> stats -> select -> infer -> eval -> gap report, all under --out-dir.
    Pipeline {
        /// Generator spec for the test split; defaults to the built-in
        /// planted-bias spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Share gap of the over-predicted label for the built-in spec.
        #[arg(long, default_value_t = 0.15)]
        target_gap: f64,
    },
}

/// Result of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
    VerificationFailed,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::VerificationFailed => 2,
            Outcome::NotConverged => 3,
        }
    }
}
