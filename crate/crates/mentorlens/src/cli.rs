//! Argument parsing and dispatch for the `mentorlens` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{PipelineConfig, Threads};
use crate::error::Result;
use crate::pipeline;
use crate::synth::SynthConfig;

#[derive(Debug, Parser)]
#[command(name = "mentorlens", version, about = "Infer mentor-mentee relations from co-authorship data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides for the config file; every flag may appear before or after the subcommand.
#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` config file (default: $MENTORLENS_CONFIG)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    /// Worker threads, or AUTO for one per core
    #[arg(long, global = true)]
    pub threads: Option<Threads>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub papers: Option<PathBuf>,
    #[arg(long, global = true)]
    pub authors: Option<PathBuf>,
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    /// Minimum shared papers for a candidate pair
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Share of co-publications inside the dense period, in (60, 100]
    #[arg(long, global = true)]
    pub dense_percent: Option<f64>,
    #[arg(long, global = true)]
    pub search_iterations: Option<u32>,
    #[arg(long, global = true)]
    pub n_rounds: Option<u32>,
    #[arg(long, global = true)]
    pub val_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub glm_alpha: Option<f64>,
    #[arg(long, global = true)]
    pub max_negatives: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the corpus and copy it into the workdir
    Ingest,
    /// Resolve gold pairs to corpus author IDs
    Link,
    /// Build labeled training pairs and the inference pool
    Candidates,
    /// Compute pair features for training pairs and the pool
    Featurize,
    /// Search and fit the two classifier stages
    Train,
    /// Score every candidate pair
    Infer,
    /// Per-author mentorship metrics from the scored edges
    GraphMetrics,
    /// Fit the citation model
    Glm,
    /// Summarize a finished run as Markdown
    Report,
    /// Write a synthetic corpus with planted mentorships
    Synth(SynthArgs),
}

#[derive(Debug, Default, Args)]
pub struct SynthArgs {
    /// Output directory (default: <workdir>/synth)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_mentors: Option<usize>,
    #[arg(long)]
    pub mentees_per_mentor: Option<usize>,
    #[arg(long)]
    pub mega_mentor_factor: Option<usize>,
    #[arg(long)]
    pub noise_authors: Option<usize>,
    #[arg(long)]
    pub first_year: Option<i32>,
    #[arg(long)]
    pub last_year: Option<i32>,
}

impl GlobalArgs {
    /// Defaults, then the config file, then these flags.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::load(self.config.as_deref())?;
        macro_rules! over {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    c.$f = v.clone();
                }
            )*};
        }
        over!(workdir, threads, seed, k, dense_percent, search_iterations, n_rounds, val_fraction, glm_alpha);
        if self.papers.is_some() {
            c.papers = self.papers.clone();
        }
        if self.authors.is_some() {
            c.authors = self.authors.clone();
        }
        if self.gold.is_some() {
            c.gold = self.gold.clone();
        }
        if self.max_negatives.is_some() {
            c.max_negatives = self.max_negatives;
        }
        c.validate()?;
        Ok(c)
    }
}

impl SynthArgs {
    pub fn config(&self, seed: u64) -> SynthConfig {
        let d = SynthConfig::default();
        SynthConfig {
            n_mentors: self.n_mentors.unwrap_or(d.n_mentors),
            mentees_per_mentor: self.mentees_per_mentor.unwrap_or(d.mentees_per_mentor),
            mega_mentor_factor: self.mega_mentor_factor.unwrap_or(d.mega_mentor_factor),
            noise_authors: self.noise_authors.unwrap_or(d.noise_authors),
            first_year: self.first_year.unwrap_or(d.first_year),
            last_year: self.last_year.unwrap_or(d.last_year),
            seed,
            ..d
        }
    }
}

/// Runs an already parsed command line.
pub fn execute(cli: Cli) -> Result<Vec<PathBuf>> {
    let cfg = cli.global.resolve()?;
    let threads = cfg.threads.count();
    pipeline::with_threads(threads, move || match &cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Link => commands::link(&cfg),
        Command::Candidates => commands::candidates(&cfg),
        Command::Featurize => commands::featurize(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Infer => commands::infer(&cfg),
        Command::GraphMetrics => commands::graph_metrics(&cfg),
        Command::Glm => commands::glm(&cfg),
        Command::Report => commands::report(&cfg),
        Command::Synth(a) => commands::synth(&cfg, &a.config(cfg.seed), a.out.clone()),
    })?
}

/// Parses `args`, runs, reports, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(paths) => {
            let mut out = std::io::stdout().lock();
            for p in paths {
                let _ = writeln!(out, "wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
