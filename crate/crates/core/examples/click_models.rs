//! Simulated clicks under each click model, with the exhaustive
//! assumption audit on a small instance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recurrank::env::{assumption_audit, ClickModel, Environment, ExaminationTable, ItemSet, Theta};
use recurrank::Ranking;

fn main() -> recurrank::Result<()> {
    let items = ItemSet::new(vec![
        vec![0.9, 0.0],
        vec![0.3, 0.4],
        vec![0.1, 0.6],
        vec![0.2, 0.1],
        vec![0.05, 0.05],
    ])?;
    let theta = Theta(vec![1.0, 0.5]);
    let mut increasing = ExaminationTable::new(0.4);
    for i in 0..5 {
        increasing.insert(&[i], 1, 0.8);
    }
    let models = [
        ClickModel::Cascade,
        ClickModel::position_based_harmonic(3),
        ClickModel::DocumentBased,
        ClickModel::Tabular(increasing),
    ];
    let ranking = Ranking::new(vec![1, 0, 2])?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for model in models {
        let env = Environment::new(items.clone(), theta.clone(), model.clone())?;
        let n = 100_000;
        let mut counts = [0u32; 3];
        for _ in 0..n {
            let c = env.sample_clicks(&ranking, &mut rng)?;
            for (p, count) in counts.iter_mut().enumerate() {
                *count += u32::from(c.clicked(p));
            }
        }
        let freq: Vec<String> = counts
            .iter()
            .map(|&c| format!("{:.3}", f64::from(c) / n as f64))
            .collect();
        let expected: Vec<String> = (0..3)
            .map(|p| format!("{:.3}", env.click_probability(&ranking, p)))
            .collect();
        let audit = assumption_audit(&model, &items, &theta, 3)?;
        println!(
            "{:<8} click rates {freq:?} (expected {expected:?}); audit over {} rankings: {}",
            model.name(),
            audit.rankings_checked,
            match audit.violation {
                None => "pass".to_string(),
                Some(v) => format!(
                    "assumption {} fails at position {} of {:?}",
                    v.assumption, v.position, v.ranking
                ),
            }
        );
    }
    Ok(())
}
