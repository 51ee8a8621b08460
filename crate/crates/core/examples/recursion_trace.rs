//! Prints every finished RecurRank call: phase, positions, item count,
//! children and eliminations.
//!
//! ```text
//! cargo run --release --example recursion_trace -- pbm 1000000 1000
//! ```
//! Arguments: click model (`cm`, `pbm` or `dbm`), horizon, number of items.

use recurrank::env::{generate_synthetic, ClickModel, Environment};
use recurrank::harness::{simulate, Streams};
use recurrank::recurrank::{failure_rate, RecurRank, RecurRankConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model = match args.first().map_or("pbm", String::as_str) {
        "cm" => ClickModel::Cascade,
        "dbm" => ClickModel::DocumentBased,
        _ => ClickModel::position_based_harmonic(10),
    };
    let horizon: u64 = args.get(1).map_or(Ok(200_000), |s| s.parse())?;
    let n_items: usize = args.get(2).map_or(Ok(1000), |s| s.parse())?;
    let k = 10;

    let (items, theta) = generate_synthetic(n_items, 5, 0)?;
    let env = Environment::new(items, theta, model)?;
    let mut streams = Streams::new(0);
    let config = RecurRankConfig::for_horizon(horizon);
    let mut ranker = RecurRank::new(env.items(), k, config, &mut streams.alg)?.with_monitor(&env);
    let trace = simulate(&env, &mut ranker, k, horizon, horizon / 20, 0, &mut streams)?;

    println!("call parent phase positions  items  rounds  finished  children  eliminated");
    for c in ranker.history() {
        println!(
            "{:>4} {:>6} {:>5} {:>9} {:>6} {:>7} {:>9} {:>9} {:>11}",
            c.id,
            c.parent.map_or("-".to_string(), |p| p.to_string()),
            c.phase,
            format!("{}..{}", c.positions.start, c.positions.end),
            c.items.len(),
            c.head_rounds,
            c.finished_at,
            c.children.len(),
            c.eliminated.len()
        );
    }
    println!("\nlive calls at round {horizon}:");
    for inst in ranker.instances() {
        println!(
            "  phase {} positions {:?} with {} items, {} of {} rounds left",
            inst.phase(),
            inst.positions(),
            inst.items().len(),
            inst.remaining_total(),
            inst.allocation().total()
        );
    }
    println!("\ncumulative regret:");
    for (t, r) in trace.values() {
        println!("  {t:>9} {r:>12.2}");
    }
    if let Some(m) = ranker.monitor() {
        match failure_rate(m) {
            Ok(rate) => println!("failure rate {rate:.4} over {} checks", m.records().len()),
            Err(e) => println!("failure rate: {e}"),
        }
    }
    Ok(())
}
