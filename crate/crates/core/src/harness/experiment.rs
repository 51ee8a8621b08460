use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Algo, EnvSpec, ExperimentConfig, ModelSpec};
use super::trace::{read_traces, RegretTrace, Summary};
use super::{simulate, Streams};
use crate::baselines::{CascadeLinUcb, CascadeLinUcbConfig, TopRank};
use crate::design::g_optimal_design;
use crate::env::{
    assumption_audit, generate_synthetic, movielens_features, AuditReport, ClickModel, Environment,
    ExaminationTable, ItemSet, MovieLensConfig, Theta, AUDIT_MAX_ITEMS, AUDIT_MAX_POSITIONS,
};
use crate::error::Error;
use crate::recurrank::{RecurRank, RecurRankConfig};

/// Why an experiment command stopped, with its process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit code 2.
    Config(Error),
    /// Exit code 3.
    Environment(Error),
    /// Exit code 1.
    Run(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Environment(_) => 3,
            Failure::Run(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "invalid configuration: {e}"),
            Failure::Environment(e) => write!(f, "cannot build environment: {e}"),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Failure {}

pub fn build_model(spec: &ModelSpec, n_positions: usize) -> ClickModel {
    match spec {
        ModelSpec::Cascade => ClickModel::Cascade,
        ModelSpec::PositionBased(None) => ClickModel::position_based_harmonic(n_positions),
        ModelSpec::PositionBased(Some(b)) => ClickModel::PositionBased { biases: b.clone() },
        ModelSpec::DocumentBased => ClickModel::DocumentBased,
        ModelSpec::Tabular { default, entries } => {
            let mut table = ExaminationTable::new(*default);
            for (prefix, position, chi) in entries {
                table.insert(prefix, *position, *chi);
            }
            ClickModel::Tabular(table)
        }
    }
}

/// The environment shared by every run of an experiment.
pub fn build_environment(config: &ExperimentConfig) -> crate::Result<Environment> {
    let model = build_model(&config.model, config.positions);
    let (items, theta) = match &config.env {
        EnvSpec::Synthetic { n_items, dim } => generate_synthetic(*n_items, *dim, config.env_seed)?,
        EnvSpec::MovieLens {
            ratings,
            n_movies,
            dim,
        } => {
            let ml = MovieLensConfig::new(*n_movies, *dim, config.env_seed);
            let (items, theta, _) = movielens_features(ratings, &ml)?;
            (items, theta)
        }
        EnvSpec::Explicit { items, theta } => (ItemSet::new(items.clone())?, Theta(theta.clone())),
    };
    Environment::new(items, theta, model)
}

/// Runs one `(algorithm, seed)` pair.
pub fn run_single(
    env: &Environment,
    config: &ExperimentConfig,
    algo: Algo,
    seed: u64,
) -> crate::Result<RegretTrace> {
    let k = config.positions;
    let mut streams = Streams::new(seed);
    let every = config.checkpoint_every();
    match algo {
        Algo::RecurRank => {
            let mut rc = RecurRankConfig::new(config.delta());
            rc.epsilon = config.epsilon;
            rc.design = config.design;
            let mut ranker = RecurRank::new(env.items(), k, rc, &mut streams.alg)?;
            simulate(
                env,
                &mut ranker,
                k,
                config.horizon,
                every,
                seed,
                &mut streams,
            )
        }
        Algo::CascadeLinUcb => {
            let cc = CascadeLinUcbConfig {
                lambda: config.cascade_lambda,
                confidence: config.cascade_confidence,
                clip: config.cascade_clip,
            };
            let mut ranker = CascadeLinUcb::new(env.items(), k, config.horizon, &cc)?;
            simulate(
                env,
                &mut ranker,
                k,
                config.horizon,
                every,
                seed,
                &mut streams,
            )
        }
        Algo::TopRank => {
            let mut ranker = TopRank::new(env.n_items(), k, config.delta())?;
            simulate(
                env,
                &mut ranker,
                k,
                config.horizon,
                every,
                seed,
                &mut streams,
            )
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: Summary,
    pub traces: Vec<RegretTrace>,
    pub trace_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
}

/// Runs every `(algorithm, seed)` pair on a pool of `config.workers`
/// threads and writes one trace file per pair plus `summary.txt` into
/// `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, Failure> {
    config.validate().map_err(Failure::Config)?;
    let env = build_environment(config).map_err(Failure::Environment)?;
    let jobs: Vec<(Algo, u64)> = config
        .algos
        .iter()
        .flat_map(|&a| config.seed_list().into_iter().map(move |s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Failure::Run(Error::InvalidArgument(e.to_string())))?;
    let traces: Vec<RegretTrace> = pool
        .install(|| {
            jobs.par_iter()
                .map(|&(a, s)| run_single(&env, config, a, s))
                .collect::<crate::Result<_>>()
        })
        .map_err(Failure::Run)?;

    let io = |e: std::io::Error| Failure::Run(Error::Io(e));
    fs::create_dir_all(&config.out).map_err(io)?;
    let mut trace_files = Vec::with_capacity(traces.len());
    for tr in &traces {
        let path = config
            .out
            .join(format!("{}-seed{}.csv", tr.label(), tr.seed()));
        let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
        tr.write_csv(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        trace_files.push(path);
    }
    let summary = Summary::from_traces(&traces);
    let summary_file = config.out.join("summary.txt");
    fs::write(&summary_file, summary.to_string()).map_err(io)?;
    Ok(ExperimentOutcome {
        summary,
        traces,
        trace_files,
        summary_file,
    })
}

/// Summary of the trace files in `dir`.
pub fn report(dir: &Path) -> crate::Result<Summary> {
    Ok(Summary::from_traces(&read_traces(dir)?))
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub assumptions: AuditReport,
    pub design_bound: f64,
    /// `(1 + ε) · rank(items)`.
    pub design_limit: f64,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.assumptions.passed() && self.design_bound <= self.design_limit
    }
}

impl fmt::Display for AuditOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rankings checked: {}", self.assumptions.rankings_checked)?;
        match &self.assumptions.violation {
            None => writeln!(f, "assumptions: ok")?,
            Some(v) => writeln!(
                f,
                "assumptions: assumption {} fails for ranking {:?} at position {}: {}",
                v.assumption, v.ranking, v.position, v.detail
            )?,
        }
        let verdict = if self.design_bound <= self.design_limit {
            "ok"
        } else {
            "FAILED"
        };
        writeln!(
            f,
            "design bound: {:.6} <= {:.6}: {verdict}",
            self.design_bound, self.design_limit
        )
    }
}

/// Exhaustive assumption audit and design-bound check of a small instance.
pub fn audit(config: &ExperimentConfig) -> Result<AuditOutcome, Failure> {
    config.validate().map_err(Failure::Config)?;
    if config.n_items() > AUDIT_MAX_ITEMS || config.positions > AUDIT_MAX_POSITIONS {
        return Err(Failure::Config(Error::TooLarge(format!(
            "the audit enumerates every ranking; use at most {AUDIT_MAX_ITEMS} items and \
             {AUDIT_MAX_POSITIONS} positions (set `items` and `positions`), got {} and {}",
            config.n_items(),
            config.positions
        ))));
    }
    let env = build_environment(config).map_err(Failure::Environment)?;
    let assumptions = assumption_audit(env.model(), env.items(), env.theta(), config.positions)
        .map_err(Failure::Run)?;
    let items = env.items().to_vecs();
    let design = g_optimal_design(&items, config.epsilon).map_err(Failure::Run)?;
    Ok(AuditOutcome {
        assumptions,
        design_bound: design.max_norm(),
        design_limit: (1.0 + config.epsilon) * design.rank() as f64,
    })
}
