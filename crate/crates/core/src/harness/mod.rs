//! Simulation loop, experiment runner and regret bookkeeping.

mod config;
mod experiment;
mod trace;

pub use config::{Algo, EnvSpec, ExperimentConfig, ModelSpec};
pub use experiment::{
    audit, build_environment, build_model, report, run_experiment, run_single, AuditOutcome,
    ExperimentOutcome, Failure,
};
pub use trace::{normalized_regret, read_traces, RegretTrace, Summary, SummaryRow, TRACE_HEADER};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::ranker::Ranker;

/// Independent random streams for one run: the ranker's own randomness and
/// the simulated clicks.
#[derive(Debug, Clone)]
pub struct Streams {
    pub alg: ChaCha8Rng,
    pub env: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let mut alg = ChaCha8Rng::seed_from_u64(seed);
        alg.set_stream(1);
        let mut env = ChaCha8Rng::seed_from_u64(seed);
        env.set_stream(2);
        Self { alg, env }
    }
}

/// Plays `ranker` against `env` for `horizon` rounds, recording the
/// cumulative expected regret every `checkpoint_every` rounds and at the
/// last round.
pub fn simulate(
    env: &Environment,
    ranker: &mut dyn Ranker,
    n_positions: usize,
    horizon: u64,
    checkpoint_every: u64,
    seed: u64,
    streams: &mut Streams,
) -> Result<RegretTrace> {
    if horizon == 0 || checkpoint_every == 0 {
        return invalid("horizon and checkpoint interval must be positive");
    }
    if n_positions == 0 || n_positions > env.n_items() {
        return invalid(format!(
            "need 1 <= K <= L, got K = {n_positions}, L = {}",
            env.n_items()
        ));
    }
    let best = env.expected_clicks(&env.optimal_ranking(n_positions));
    let mut trace = RegretTrace::new(ranker.label(), seed);
    let mut regret = 0.0;
    for t in 1..=horizon {
        let ranking = ranker.rank(&mut streams.alg)?;
        if ranking.len() != n_positions {
            return Err(Error::Invariant(format!(
                "{} proposed {} items for {n_positions} positions",
                ranker.label(),
                ranking.len()
            )));
        }
        let clicks = env.sample_clicks(&ranking, &mut streams.env)?;
        regret += best - env.expected_clicks(&ranking);
        ranker.observe(&ranking, &clicks)?;
        if t % checkpoint_every == 0 || t == horizon {
            trace.push(t, regret);
        }
    }
    Ok(trace)
}
