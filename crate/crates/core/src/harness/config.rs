//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # synthetic position-based instance
//! env = synthetic
//! click_model = pbm
//! items = 1000
//! dim = 5
//! positions = 10
//! horizon = 1000000
//! seeds = 5
//! algos = recurrank,cascadelinucb,toprank
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. `item` and
//! `examination` may repeat; every other key may appear once.

use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::recurrank::DesignMethod;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    /// Gaussian features passed through the unit-ball transform.
    Synthetic { n_items: usize, dim: usize },
    /// Features extracted from a ratings file.
    MovieLens {
        ratings: PathBuf,
        n_movies: usize,
        dim: usize,
    },
    /// Items and parameter written out in the config.
    Explicit {
        items: Vec<Vec<f64>>,
        theta: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Cascade,
    /// `None` means harmonic biases `1/k`.
    PositionBased(Option<Vec<f64>>),
    DocumentBased,
    Tabular {
        default: f64,
        /// `(prefix items, position, χ)`.
        entries: Vec<(Vec<usize>, usize, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    RecurRank,
    CascadeLinUcb,
    TopRank,
}

impl Algo {
    pub fn label(self) -> &'static str {
        match self {
            Algo::RecurRank => "recurrank",
            Algo::CascadeLinUcb => "cascadelinucb",
            Algo::TopRank => "toprank",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "recurrank" => Ok(Algo::RecurRank),
            "cascadelinucb" => Ok(Algo::CascadeLinUcb),
            "toprank" => Ok(Algo::TopRank),
            other => invalid(format!(
                "unknown algorithm `{other}` (expected recurrank, cascadelinucb or toprank)"
            )),
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let algos: Vec<Self> = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(Self::parse)
            .collect::<Result<_>>()?;
        if algos.is_empty() {
            return invalid("the algorithm list is empty");
        }
        Ok(algos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub model: ModelSpec,
    pub positions: usize,
    /// Seed of the environment draw, shared by every run.
    pub env_seed: u64,
    pub algos: Vec<Algo>,
    pub horizon: u64,
    /// `None` uses `1/√T`.
    pub delta: Option<f64>,
    pub seeds: u64,
    pub first_seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub epsilon: f64,
    pub design: DesignMethod,
    pub cascade_lambda: f64,
    pub cascade_confidence: Option<f64>,
    pub cascade_clip: bool,
    /// `None` checkpoints every `max(1, T/1000)` rounds.
    pub checkpoint: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvSpec::Synthetic {
                n_items: 1000,
                dim: 5,
            },
            model: ModelSpec::Cascade,
            positions: 10,
            env_seed: 0,
            algos: vec![Algo::RecurRank, Algo::CascadeLinUcb, Algo::TopRank],
            horizon: 100_000,
            delta: None,
            seeds: 1,
            first_seed: 0,
            out: PathBuf::from("traces"),
            workers: 1,
            epsilon: crate::design::DEFAULT_EPSILON,
            design: DesignMethod::GOptimal,
            cascade_lambda: 1.0,
            cascade_confidence: None,
            cascade_clip: true,
            checkpoint: None,
        }
    }
}

/// Raw settings before they are assembled into a config.
#[derive(Debug, Default)]
struct Raw {
    env: Option<String>,
    model: Option<String>,
    items: Option<usize>,
    movies: Option<usize>,
    dim: Option<usize>,
    ratings: Option<PathBuf>,
    item_rows: Vec<Vec<f64>>,
    theta: Option<Vec<f64>>,
    biases: Option<Vec<f64>>,
    exam_default: Option<f64>,
    exam_entries: Vec<(Vec<usize>, usize, f64)>,
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{key}`: cannot parse `{value}`")))
}

fn vector(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| number(key, v)).collect()
}

/// `<prefix items> @ <position> : <value>`, e.g. `0 2 @ 2 : 0.4`.
fn examination_entry(value: &str) -> Result<(Vec<usize>, usize, f64)> {
    let bad = || {
        Error::InvalidArgument(format!(
            "`examination`: expected `<items> @ <position> : <value>`, got `{value}`"
        ))
    };
    let (prefix, rest) = value.split_once('@').ok_or_else(bad)?;
    let (position, chi) = rest.split_once(':').ok_or_else(bad)?;
    let prefix = prefix
        .split_whitespace()
        .map(|i| number("examination", i))
        .collect::<Result<Vec<usize>>>()?;
    Ok((
        prefix,
        number("examination", position)?,
        number("examination", chi)?,
    ))
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `overrides` as extra `key = value` lines
    /// that replace earlier settings.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut config = Self::default();
        let mut raw = Raw::default();
        let mut seen = std::collections::HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key != "item" && key != "examination" && !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("`{key}` is set twice"),
                });
            }
            config
                .apply(&mut raw, key, value.trim())
                .map_err(|e| Error::Parse {
                    line: n + 1,
                    message: e.to_string(),
                })?;
        }
        for (key, value) in overrides {
            config.apply(&mut raw, key.trim(), value.trim())?;
        }
        config.assemble(raw)?;
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, raw: &mut Raw, key: &str, value: &str) -> Result<()> {
        match key {
            "env" => raw.env = Some(value.to_ascii_lowercase()),
            "click_model" => raw.model = Some(value.to_ascii_lowercase()),
            "items" => raw.items = Some(number(key, value)?),
            "movies" => raw.movies = Some(number(key, value)?),
            "dim" => raw.dim = Some(number(key, value)?),
            "ratings" => raw.ratings = Some(PathBuf::from(value)),
            "item" => raw.item_rows.push(vector(key, value)?),
            "theta" => raw.theta = Some(vector(key, value)?),
            "position_biases" => {
                raw.biases = (value != "harmonic")
                    .then(|| vector(key, value))
                    .transpose()?
            }
            "examination_default" => raw.exam_default = Some(number(key, value)?),
            "examination" => raw.exam_entries.push(examination_entry(value)?),
            "positions" => self.positions = number(key, value)?,
            "env_seed" => self.env_seed = number(key, value)?,
            "algos" => self.algos = Algo::parse_list(value)?,
            "horizon" => self.horizon = number(key, value)?,
            "delta" => self.delta = Some(number(key, value)?),
            "seeds" => self.seeds = number(key, value)?,
            "first_seed" => self.first_seed = number(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "workers" => self.workers = number(key, value)?,
            "epsilon" => self.epsilon = number(key, value)?,
            "design" => {
                self.design = match value {
                    "goptimal" => DesignMethod::GOptimal,
                    "spanner" => DesignMethod::VolumetricSpanner,
                    other => {
                        return invalid(format!(
                            "`design`: expected goptimal or spanner, got `{other}`"
                        ))
                    }
                }
            }
            "cascade_lambda" => self.cascade_lambda = number(key, value)?,
            "cascade_confidence" => self.cascade_confidence = Some(number(key, value)?),
            "cascade_clip" => {
                self.cascade_clip = match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    other => {
                        return invalid(format!(
                            "`cascade_clip`: expected true or false, got `{other}`"
                        ))
                    }
                }
            }
            "checkpoint" => self.checkpoint = Some(number(key, value)?),
            other => return invalid(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    fn assemble(&mut self, raw: Raw) -> Result<()> {
        self.env = match raw.env.as_deref().unwrap_or("synthetic") {
            "synthetic" => EnvSpec::Synthetic {
                n_items: raw.items.unwrap_or(1000),
                dim: raw.dim.unwrap_or(5),
            },
            "movielens" => EnvSpec::MovieLens {
                ratings: raw.ratings.ok_or_else(|| {
                    Error::InvalidArgument("`env = movielens` needs `ratings`".into())
                })?,
                n_movies: raw.movies.or(raw.items).unwrap_or(1000),
                dim: raw.dim.unwrap_or(5),
            },
            "explicit" => {
                let theta = raw.theta.ok_or_else(|| {
                    Error::InvalidArgument("`env = explicit` needs `theta`".into())
                })?;
                if raw.item_rows.is_empty() {
                    return invalid("`env = explicit` needs at least one `item` line");
                }
                EnvSpec::Explicit {
                    items: raw.item_rows,
                    theta,
                }
            }
            other => {
                return invalid(format!(
                    "`env`: expected synthetic, movielens or explicit, got `{other}`"
                ))
            }
        };
        self.model = match raw.model.as_deref().unwrap_or("cascade") {
            "cascade" | "cm" => ModelSpec::Cascade,
            "pbm" | "position_based" => ModelSpec::PositionBased(raw.biases),
            "dbm" | "document_based" => ModelSpec::DocumentBased,
            "tabular" => ModelSpec::Tabular {
                default: raw.exam_default.unwrap_or(1.0),
                entries: raw.exam_entries,
            },
            other => {
                return invalid(format!(
                    "`click_model`: expected cascade, pbm, dbm or tabular, got `{other}`"
                ))
            }
        };
        Ok(())
    }

    pub fn n_items(&self) -> usize {
        match &self.env {
            EnvSpec::Synthetic { n_items, .. } => *n_items,
            EnvSpec::MovieLens { n_movies, .. } => *n_movies,
            EnvSpec::Explicit { items, .. } => items.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.env {
            EnvSpec::Synthetic { dim, .. } | EnvSpec::MovieLens { dim, .. } => *dim,
            EnvSpec::Explicit { theta, .. } => theta.len(),
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
            .unwrap_or_else(|| 1.0 / (self.horizon.max(1) as f64).sqrt())
    }

    pub fn checkpoint_every(&self) -> u64 {
        self.checkpoint.unwrap_or((self.horizon / 1000).max(1))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|i| self.first_seed + i).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.n_items();
        if self.positions == 0 || self.positions > l {
            return invalid(format!(
                "need 1 <= positions <= items, got {} and {l}",
                self.positions
            ));
        }
        if self.dim() == 0 {
            return invalid("dim must be positive");
        }
        if self.horizon == 0 {
            return invalid("horizon must be at least 1");
        }
        if self.seeds == 0 {
            return invalid("seeds must be at least 1");
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1");
        }
        if self.checkpoint == Some(0) {
            return invalid("checkpoint must be at least 1");
        }
        let delta = self.delta();
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {delta}"));
        }
        if !(self.epsilon > 0.0) {
            return invalid("epsilon must be positive");
        }
        if let ModelSpec::PositionBased(Some(b)) = &self.model {
            if b.len() < self.positions {
                return invalid(format!(
                    "{} position biases given for {} positions",
                    b.len(),
                    self.positions
                ));
            }
        }
        if let EnvSpec::Explicit { items, theta } = &self.env {
            if items.iter().any(|a| a.len() != theta.len()) {
                return invalid("every `item` must have the dimension of `theta`");
            }
        }
        Ok(())
    }
}
