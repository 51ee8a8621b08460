//! G-optimal design and volumetric spanner on random item sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use recurrank::design::{allocation, g_optimal_design, spanner_design};

fn main() -> recurrank::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (n, d) in [(50, 2), (500, 5), (2000, 10)] {
        let items: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let design = g_optimal_design(&items, 0.05)?;
        let spanner = spanner_design(&items)?;
        println!(
            "L = {n:>4}, d = {d:>2}: g-optimal support {:>3}, bound {:.4} (rank {}); \
             spanner support {:>3}, bound {:.4}",
            design.support().len(),
            design.max_norm(),
            design.rank(),
            spanner.support().len(),
            spanner.max_norm()
        );
        let table = allocation(&design, d as f64, 3, 1e-3, n)?;
        println!("    phase 3 exploration needs {} rounds", table.total());
    }
    Ok(())
}
