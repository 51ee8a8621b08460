//! How often RecurRank's estimates miss their target precision, measured
//! against the hidden parameter.

use recurrank::env::{generate_synthetic, ClickModel, Environment};
use recurrank::harness::{simulate, Streams};
use recurrank::recurrank::{failure_rate, RecurRank, RecurRankConfig};

fn main() -> recurrank::Result<()> {
    let delta = 0.05;
    for seed in 0..5 {
        let (items, theta) = generate_synthetic(50, 5, seed)?;
        let env = Environment::new(items, theta, ClickModel::position_based_harmonic(5))?;
        let mut streams = Streams::new(seed);
        let mut ranker = RecurRank::new(
            env.items(),
            5,
            RecurRankConfig::new(delta),
            &mut streams.alg,
        )?
        .with_monitor(&env);
        simulate(&env, &mut ranker, 5, 200_000, 10_000, seed, &mut streams)?;
        let monitor = ranker.monitor().expect("monitor enabled");
        let worst = monitor
            .records()
            .iter()
            .map(|r| r.deviation / r.precision)
            .fold(0.0, f64::max);
        println!(
            "seed {seed}: {} calls, failure rate {:.4}, worst deviation {:.3} of precision, {} calls missing an optimal item",
            ranker.history().len(),
            failure_rate(monitor)?,
            worst,
            monitor.misassigned_calls()
        );
    }
    Ok(())
}
