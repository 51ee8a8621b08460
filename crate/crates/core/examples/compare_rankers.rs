//! RecurRank against CascadeLinUCB and TopRank on a synthetic instance.
//!
//! ```text
//! cargo run --release --example compare_rankers -- pbm 100000 3
//! ```
//! Arguments: click model (`cm` or `pbm`), horizon, number of seeds.

use std::time::Instant;

use recurrank::harness::{
    build_environment, normalized_regret, run_single, Algo, ExperimentConfig, Summary,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model = args.first().map_or("pbm", String::as_str);
    let horizon: u64 = args.get(1).map_or(Ok(100_000), |s| s.parse())?;
    let seeds: u64 = args.get(2).map_or(Ok(3), |s| s.parse())?;

    let config = ExperimentConfig::parse(&format!(
        "env = synthetic\nclick_model = {model}\nitems = 1000\ndim = 5\npositions = 10\n\
         horizon = {horizon}\nseeds = {seeds}\n"
    ))?;
    let env = build_environment(&config)?;
    let mut traces = Vec::new();
    for algo in [Algo::RecurRank, Algo::CascadeLinUcb, Algo::TopRank] {
        for seed in config.seed_list() {
            let start = Instant::now();
            let trace = run_single(&env, &config, algo, seed)?;
            println!(
                "{:<14} seed {seed}: regret {:>12.2}  normalized {:.4}  ({:.1?})",
                algo.label(),
                trace.final_regret(),
                normalized_regret(trace.final_regret(), 1000, 5, 10, horizon),
                start.elapsed()
            );
            traces.push(trace);
        }
    }
    println!();
    print!("{}", Summary::from_traces(&traces));
    Ok(())
}
