//! Pipeline settings: built-in defaults, then a flat `key = value` file, then
//! command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mentorlens_core::cohort::{DEFAULT_DENSE_PERCENT, DEFAULT_MIN_COPUBS};
use mentorlens_core::gbdt::{SearchSpace, TrainConfig};
use mentorlens_core::glm::DEFAULT_ALPHA;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::TrainSettings;

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "MENTORLENS_CONFIG";

pub const DEFAULT_WORKDIR: &str = "mentorlens-work";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Threads {
    #[default]
    Auto,
    Fixed(usize),
}

impl Threads {
    pub fn count(self) -> Option<usize> {
        match self {
            Threads::Auto => None,
            Threads::Fixed(n) => Some(n),
        }
    }
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Threads::Fixed(n)),
            _ => Err(format!("threads must be a positive integer or AUTO, got `{s}`")),
        }
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threads::Auto => f.write_str("AUTO"),
            Threads::Fixed(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Corpus inputs for `ingest`; default to the `synth` output in the workdir.
    pub papers: Option<PathBuf>,
    pub authors: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub workdir: PathBuf,
    pub k: u32,
    pub dense_percent: f64,
    pub search_iterations: u32,
    pub n_rounds: u32,
    pub val_fraction: f64,
    pub seed: u64,
    pub glm_alpha: f64,
    pub threads: Threads,
    /// Caps training negatives per gold mentee; unlimited by default.
    pub max_negatives: Option<usize>,
    pub oof_folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            papers: None,
            authors: None,
            gold: None,
            workdir: PathBuf::from(DEFAULT_WORKDIR),
            k: DEFAULT_MIN_COPUBS,
            dense_percent: DEFAULT_DENSE_PERCENT,
            search_iterations: SearchSpace::default().n_iterations,
            n_rounds: TrainConfig::default().n_rounds,
            val_fraction: 0.2,
            seed: 42,
            glm_alpha: DEFAULT_ALPHA,
            threads: Threads::Auto,
            max_negatives: None,
            oof_folds: 5,
        }
    }
}

pub const KEYS: &[&str] = &[
    "papers",
    "authors",
    "gold",
    "workdir",
    "k",
    "dense_percent",
    "search_iterations",
    "n_rounds",
    "val_fraction",
    "seed",
    "glm_alpha",
    "threads",
    "max_negatives",
    "oof_folds",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Usage(format!("invalid value `{value}` for `{key}`: {e}")))
}

impl PipelineConfig {
    /// Sets one key; unknown keys are usage errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "papers" => self.papers = Some(PathBuf::from(v)),
            "authors" => self.authors = Some(PathBuf::from(v)),
            "gold" => self.gold = Some(PathBuf::from(v)),
            "workdir" => self.workdir = PathBuf::from(v),
            "k" => self.k = parse_value(key, v)?,
            "dense_percent" => self.dense_percent = parse_value(key, v)?,
            "search_iterations" => self.search_iterations = parse_value(key, v)?,
            "n_rounds" => self.n_rounds = parse_value(key, v)?,
            "val_fraction" => self.val_fraction = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "glm_alpha" => self.glm_alpha = parse_value(key, v)?,
            "threads" => self.threads = parse_value(key, v)?,
            "max_negatives" => {
                self.max_negatives = if v.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(parse_value(key, v)?)
                }
            }
            "oof_folds" => self.oof_folds = parse_value(key, v)?,
            _ => {
                return Err(Error::Usage(format!(
                    "unknown config key `{key}` (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key = value` document: one pair per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Usage(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    origin.display(),
                    i + 1
                )));
            };
            self.set(key.trim(), value)
                .map_err(|e| Error::Usage(format!("{}:{}: {e}", origin.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut c = Self::default();
        c.apply_text(&text, path)?;
        Ok(c)
    }

    /// Defaults, overlaid by `explicit` or else the file named in `MENTORLENS_CONFIG`.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::from_file(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::from_file(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Usage(m));
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        if !(self.dense_percent > 60.0 && self.dense_percent <= 100.0) {
            return bad(format!("dense_percent must be in (60, 100], got {}", self.dense_percent));
        }
        if self.search_iterations < 1 {
            return bad("search_iterations must be at least 1".into());
        }
        if self.n_rounds < 1 {
            return bad("n_rounds must be at least 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must be in (0, 1), got {}", self.val_fraction));
        }
        if !(self.glm_alpha.is_finite() && self.glm_alpha > 0.0) {
            return bad(format!("glm_alpha must be positive, got {}", self.glm_alpha));
        }
        if self.oof_folds < 2 {
            return bad("oof_folds must be at least 2".into());
        }
        Ok(())
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            space: SearchSpace {
                n_iterations: self.search_iterations,
                n_rounds: self.n_rounds,
                ..SearchSpace::default()
            },
            val_fraction: self.val_fraction,
            seed: self.seed,
            oof_folds: self.oof_folds,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.workdir.join("synth")
    }

    pub fn papers_input(&self) -> PathBuf {
        self.papers.clone().unwrap_or_else(|| self.synth_dir().join("papers.jsonl"))
    }

    /// The configured authors file, else the synth one if it exists.
    pub fn authors_input(&self) -> Option<PathBuf> {
        match &self.authors {
            Some(p) => Some(p.clone()),
            None => {
                let p = self.synth_dir().join("authors.jsonl");
                p.exists().then_some(p)
            }
        }
    }

    pub fn gold_input(&self) -> PathBuf {
        self.gold.clone().unwrap_or_else(|| self.synth_dir().join("gold.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!(c.k, 2);
        assert_eq!(c.dense_percent, 80.0);
        assert_eq!(c.search_iterations, 50);
        assert_eq!(c.n_rounds, 500);
        assert_eq!(c.val_fraction, 0.2);
        assert_eq!(c.glm_alpha, 1.0);
        assert_eq!(c.threads, Threads::Auto);
        c.validate().unwrap();
    }

    #[test]
    fn parses_flat_file() {
        let mut c = PipelineConfig::default();
        let text = "# comment\nk = 3\n\ndense_percent=90 # trailing\nthreads = auto\nmax_negatives = 7\nworkdir = /tmp/x\n";
        c.apply_text(text, Path::new("cfg")).unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(c.dense_percent, 90.0);
        assert_eq!(c.threads, Threads::Auto);
        assert_eq!(c.max_negatives, Some(7));
        assert_eq!(c.workdir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn rejects_unknown_keys_and_garbage() {
        let mut c = PipelineConfig::default();
        let e = c.apply_text("colour = blue", Path::new("cfg")).unwrap_err();
        assert!(e.to_string().contains("unknown config key `colour`"));
        assert_eq!(e.exit_code(), 1);
        assert!(c.apply_text("just words", Path::new("cfg")).is_err());
        assert!(c.apply_text("k = two", Path::new("cfg")).is_err());
        assert!(c.apply_text("threads = 0", Path::new("cfg")).is_err());
    }

    #[test]
    fn validation_bounds() {
        let mut c = PipelineConfig {
            dense_percent: 60.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.dense_percent = 61.0;
        c.validate().unwrap();
        c.k = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn threads_display_round_trips() {
        for t in [Threads::Auto, Threads::Fixed(3)] {
            assert_eq!(t.to_string().parse::<Threads>().unwrap(), t);
        }
    }
}
