//! With orthogonal unit items the least-squares estimate of each call is
//! just the per-item click rate at the head position.

use std::collections::HashMap;

use recurrank::env::{ClickModel, Environment, ItemSet, Theta};
use recurrank::harness::Streams;
use recurrank::recurrank::{RecurRank, RecurRankConfig};
use recurrank::Ranker;

fn main() -> recurrank::Result<()> {
    let d = 8;
    let items = ItemSet::new(
        (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
    )?;
    let theta = Theta(vec![0.9, 0.8, 0.75, 0.5, 0.4, 0.3, 0.2, 0.1]);
    let env = Environment::new(items, theta, ClickModel::DocumentBased)?;
    let horizon = 50_000;
    let mut streams = Streams::new(0);
    let mut rr = RecurRank::new(
        env.items(),
        4,
        RecurRankConfig::for_horizon(horizon),
        &mut streams.alg,
    )?;
    let mut tally: HashMap<(usize, usize), (u64, u64)> = HashMap::new();
    for _ in 0..horizon {
        let ranking = rr.rank(&mut streams.alg)?;
        let clicks = env.sample_clicks(&ranking, &mut streams.env)?;
        for h in rr.heads() {
            let e = tally.entry((h.instance, h.item)).or_default();
            e.0 += u64::from(clicks.clicked(h.position));
            e.1 += 1;
        }
        rr.observe(&ranking, &clicks)?;
    }
    for call in rr.history().iter().take(6) {
        println!(
            "call {} (phase {}, positions {:?}):",
            call.id, call.phase, call.positions
        );
        for &j in &call.items {
            let (c, n) = tally.get(&(call.id, j)).copied().unwrap_or((0, 0));
            println!(
                "    item {j}: estimate {:.6}, click rate {c}/{n}",
                call.theta_hat[j]
            );
        }
    }
    let top: Vec<Vec<usize>> = rr.instances().iter().map(|i| i.items().to_vec()).collect();
    println!("live blocks: {top:?}");
    Ok(())
}
