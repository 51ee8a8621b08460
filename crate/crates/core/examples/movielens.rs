//! Document-based environment built from a MovieLens-style ratings file
//! (`userId,movieId,rating,timestamp`).
//!
//! ```text
//! cargo run --release --example movielens -- path/to/ratings.csv
//! ```
//! Without an argument a small synthetic ratings table is used instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recurrank::env::{
    features_from_ratings, movielens_features, ClickModel, Environment, MovieLensConfig, Rating,
};
use recurrank::harness::{run_single, Algo, ExperimentConfig};

fn toy_ratings() -> Vec<Rating> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let taste: Vec<f64> = (0..1200).map(|_| rng.random::<f64>()).collect();
    let quality: Vec<f64> = (0..120).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::new();
    for (u, t) in taste.iter().enumerate() {
        for (m, q) in quality.iter().enumerate() {
            if rng.random_bool(0.6) {
                let score = (0.5 + 4.5 * (0.7 * q + 0.3 * t * q)).clamp(0.5, 5.0);
                out.push(Rating {
                    user: u as u64,
                    movie: m as u64,
                    rating: (score * 2.0).round() / 2.0,
                    timestamp: 0,
                });
            }
        }
    }
    out
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1);
    let n_movies = if path.is_some() { 1000 } else { 100 };
    let config = MovieLensConfig::new(n_movies, 5, 0);
    let (items, theta, _) = match &path {
        Some(p) => movielens_features(p, &config)?,
        None => features_from_ratings(&toy_ratings(), &config)?,
    };
    let env = Environment::new(items, theta, ClickModel::DocumentBased)?;
    println!(
        "{} movies, attractiveness of the top five: {:?}",
        env.n_items(),
        env.optimal_ranking(5)
            .items()
            .iter()
            .map(|&i| format!("{:.3}", env.attractiveness(i)))
            .collect::<Vec<_>>()
    );
    // Only the run settings are read from here; the environment is passed in.
    let experiment =
        ExperimentConfig::parse("click_model = dbm\npositions = 10\nhorizon = 100000\n")?;
    for algo in [Algo::RecurRank, Algo::CascadeLinUcb, Algo::TopRank] {
        let trace = run_single(&env, &experiment, algo, 0)?;
        println!("{:<14} regret {:.1}", algo.label(), trace.final_regret());
    }
    Ok(())
}
