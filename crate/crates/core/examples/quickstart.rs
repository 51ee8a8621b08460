//! Smallest end-to-end use: build a synthetic cascade environment, run
//! RecurRank for a while and print its regret.

use recurrank::env::{generate_synthetic, ClickModel, Environment};
use recurrank::recurrank::run_episode;

fn main() -> recurrank::Result<()> {
    let (items, theta) = generate_synthetic(200, 5, 7)?;
    let env = Environment::new(items, theta, ClickModel::Cascade)?;
    let horizon = 50_000;
    let trace = run_episode(&env, 5, horizon, 1.0 / (horizon as f64).sqrt(), 1)?;
    for &(t, r) in trace.values().iter().step_by(10_000) {
        println!("round {t:>6}: cumulative regret {r:.3}");
    }
    println!(
        "final regret after {horizon} rounds: {:.3}",
        trace.final_regret()
    );
    Ok(())
}
