//! Click-model environments with linear attractiveness.
//!
//! An [`Environment`] pairs an [`ItemSet`] with a hidden parameter
//! [`Theta`] and a [`ClickModel`]. Attractiveness is `α(a) = ⟨a, θ⟩` and the
//! click probability at a position factors as examination × attractiveness.

mod audit;
mod click_model;
mod movielens;
mod synthetic;

pub use audit::{assumption_audit, AuditReport, Violation, AUDIT_MAX_ITEMS, AUDIT_MAX_POSITIONS};
pub use click_model::{examination, ClickModel, ExaminationTable};
pub use movielens::{
    features_from_ratings, movielens_features, parse_ratings, truncated_svd, MovieLensConfig,
    Rating, TruncatedSvd,
};
pub use synthetic::{feature_transform, generate_synthetic};

use rand::{Rng, RngCore};

use crate::error::{invalid, Result};
use crate::linalg::dot;
use crate::ranker::{ClickVector, Ranking};

/// Attractiveness values may exceed `[0, 1]` by this much from rounding.
const ATTRACTIVENESS_SLACK: f64 = 1e-9;

/// A finite set of feature vectors of equal dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSet {
    dim: usize,
    data: Vec<f64>,
}

impl ItemSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return invalid("item set is empty");
        };
        let dim = first.len();
        if dim == 0 {
            return invalid("items must have at least one coordinate");
        }
        let mut data = Vec::with_capacity(dim * vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return invalid(format!(
                    "item {i} has dimension {}, expected {dim}",
                    v.len()
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return invalid(format!("item {i} has a non-finite coordinate"));
            }
            data.extend_from_slice(v);
        }
        Ok(Self { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Borrowed rows for the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Vec<&[f64]> {
        indices.iter().map(|&i| self.get(i)).collect()
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(|v| v.to_vec()).collect()
    }
}

/// The hidden parameter `θ*` of the attractiveness function.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `α(a) = ⟨a, θ⟩`.
pub fn attractiveness(item: &[f64], theta: &Theta) -> Result<f64> {
    if item.len() != theta.0.len() {
        return invalid(format!(
            "item has dimension {}, parameter has {}",
            item.len(),
            theta.0.len()
        ));
    }
    Ok(dot(item, &theta.0))
}

/// A simulated user population: items, hidden parameter and click model.
#[derive(Debug, Clone)]
pub struct Environment {
    items: ItemSet,
    theta: Theta,
    model: ClickModel,
    attractiveness: Vec<f64>,
    by_attractiveness: Vec<usize>,
}

impl Environment {
    /// Fails unless every item's attractiveness lies in `[0, 1]`.
    pub fn new(items: ItemSet, theta: Theta, model: ClickModel) -> Result<Self> {
        model.validate()?;
        let mut alpha = Vec::with_capacity(items.len());
        for (i, a) in items.iter().enumerate() {
            let v = attractiveness(a, &theta)?;
            if !(-ATTRACTIVENESS_SLACK..=1.0 + ATTRACTIVENESS_SLACK).contains(&v) {
                return invalid(format!("item {i} has attractiveness {v} outside [0, 1]"));
            }
            alpha.push(v.clamp(0.0, 1.0));
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]));
        Ok(Self {
            items,
            theta,
            model,
            attractiveness: alpha,
            by_attractiveness: order,
        })
    }

    pub fn items(&self) -> &ItemSet {
        &self.items
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn model(&self) -> &ClickModel {
        &self.model
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn attractiveness(&self, item: usize) -> f64 {
        self.attractiveness[item]
    }

    /// `A*`: the `k` most attractive items in decreasing order, ties by index.
    pub fn optimal_ranking(&self, k: usize) -> Ranking {
        Ranking::new(self.by_attractiveness[..k.min(self.n_items())].to_vec())
            .expect("sorted indices are distinct")
    }

    /// `χ(A*, k)` for every position of a `k`-slot list.
    pub fn optimal_examination(&self, k: usize) -> Vec<f64> {
        let best = self.optimal_ranking(k);
        (0..best.len())
            .map(|p| self.examination(&best, p))
            .collect()
    }

    pub fn examination(&self, ranking: &Ranking, position: usize) -> f64 {
        examination(&self.model, ranking, position, |i| self.attractiveness[i])
            .expect("position within ranking")
    }

    /// `v(A, k) = χ(A, k) · α(A(k))`.
    pub fn click_probability(&self, ranking: &Ranking, position: usize) -> f64 {
        self.examination(ranking, position) * self.attractiveness[ranking.item(position)]
    }

    /// `Σ_k v(A, k)`.
    pub fn expected_clicks(&self, ranking: &Ranking) -> f64 {
        match &self.model {
            ClickModel::Cascade => {
                let mut skip = 1.0;
                let mut total = 0.0;
                for &i in ranking.items() {
                    let a = self.attractiveness[i];
                    total += skip * a;
                    skip *= 1.0 - a;
                }
                total
            }
            ClickModel::PositionBased { biases } => ranking
                .items()
                .iter()
                .zip(biases)
                .map(|(&i, b)| b * self.attractiveness[i])
                .sum(),
            ClickModel::DocumentBased => ranking
                .items()
                .iter()
                .map(|&i| self.attractiveness[i])
                .sum(),
            ClickModel::Tabular(_) => (0..ranking.len())
                .map(|p| self.click_probability(ranking, p))
                .sum(),
        }
    }

    /// Samples one click vector. Cascade clicks stop at the first click;
    /// the other models click independently across positions.
    pub fn sample_clicks(&self, ranking: &Ranking, rng: &mut dyn RngCore) -> Result<ClickVector> {
        ranking.check_bounds(self.n_items())?;
        if let ClickModel::PositionBased { biases } = &self.model {
            if ranking.len() > biases.len() {
                return invalid(format!(
                    "ranking has {} positions but only {} position biases are defined",
                    ranking.len(),
                    biases.len()
                ));
            }
        }
        let mut clicks = vec![false; ranking.len()];
        match &self.model {
            ClickModel::Cascade => {
                for (p, &i) in ranking.items().iter().enumerate() {
                    if bernoulli(rng, self.attractiveness[i]) {
                        clicks[p] = true;
                        break;
                    }
                }
            }
            _ => {
                for (p, c) in clicks.iter_mut().enumerate() {
                    *c = bernoulli(rng, self.click_probability(ranking, p));
                }
            }
        }
        Ok(ClickVector(clicks))
    }
}

fn bernoulli(rng: &mut dyn RngCore, p: f64) -> bool {
    if p <= 0.0 {
        false
    } else if p >= 1.0 {
        true
    } else {
        rng.random::<f64>() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_env(alphas: &[f64], model: ClickModel) -> Environment {
        let items = ItemSet::new(alphas.iter().map(|&a| vec![a]).collect()).unwrap();
        Environment::new(items, Theta(vec![1.0]), model).unwrap()
    }

    #[test]
    fn attractiveness_examples() {
        let r = 1.0 / 2f64.sqrt();
        let t = Theta(vec![r, r]);
        assert!((attractiveness(&[r, r], &t).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(attractiveness(&[0.0, 0.0], &t).unwrap(), 0.0);
        assert!(attractiveness(&[1.0], &t).is_err());
        // Orthogonal raw directions after the transform meet only in the
        // constant coordinate: ⟨a, θ⟩ = 1/2.
        let a = feature_transform(&[1.0, 0.0]).unwrap();
        let th = Theta(feature_transform(&[0.0, 1.0]).unwrap());
        assert!((attractiveness(&a, &th).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_attractiveness() {
        let items = ItemSet::new(vec![vec![2.0]]).unwrap();
        assert!(Environment::new(items, Theta(vec![1.0]), ClickModel::DocumentBased).is_err());
    }

    #[test]
    fn zero_attractiveness_never_clicks() {
        let env = scalar_env(&[0.0, 0.0, 0.0], ClickModel::DocumentBased);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = Ranking::new(vec![0, 1, 2]).unwrap();
        for _ in 0..100 {
            assert_eq!(env.sample_clicks(&r, &mut rng).unwrap().count(), 0);
        }
    }

    #[test]
    fn certain_click_in_document_model() {
        let env = scalar_env(&[1.0, 1.0], ClickModel::DocumentBased);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = Ranking::new(vec![1, 0]).unwrap();
        for _ in 0..100 {
            assert_eq!(env.sample_clicks(&r, &mut rng).unwrap().0, vec![true, true]);
        }
    }

    #[test]
    fn cascade_stops_at_first_click() {
        let env = scalar_env(&[1.0, 0.7, 0.9], ClickModel::Cascade);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = Ranking::new(vec![0, 1, 2]).unwrap();
        for _ in 0..100 {
            assert_eq!(
                env.sample_clicks(&r, &mut rng).unwrap().0,
                vec![true, false, false]
            );
        }
    }

    #[test]
    fn empirical_click_rates_converge() {
        let alphas = [0.9, 0.5, 0.3, 0.7];
        let models = [
            ClickModel::Cascade,
            ClickModel::position_based_harmonic(4),
            ClickModel::DocumentBased,
        ];
        for model in models {
            let env = scalar_env(&alphas, model);
            let r = Ranking::new(vec![1, 3, 0, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let n = 100_000;
            let mut hits = [0u32; 4];
            for _ in 0..n {
                let c = env.sample_clicks(&r, &mut rng).unwrap();
                for (p, h) in hits.iter_mut().enumerate() {
                    *h += c.clicked(p) as u32;
                }
            }
            for (p, &h) in hits.iter().enumerate() {
                let v = env.click_probability(&r, p);
                let freq = h as f64 / n as f64;
                let se = (v * (1.0 - v) / n as f64).sqrt();
                assert!(
                    (freq - v).abs() <= 3.0 * se + 1e-12,
                    "pos {p}: {freq} vs {v}"
                );
            }
        }
    }

    #[test]
    fn expected_clicks_matches_positionwise_sum() {
        let alphas = [0.2, 0.8, 0.5];
        for model in [
            ClickModel::Cascade,
            ClickModel::position_based_harmonic(3),
            ClickModel::DocumentBased,
        ] {
            let env = scalar_env(&alphas, model);
            let r = Ranking::new(vec![2, 0, 1]).unwrap();
            let direct: f64 = (0..3).map(|p| env.click_probability(&r, p)).sum();
            assert!((env.expected_clicks(&r) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_ranking_sorts_by_attractiveness() {
        let env = scalar_env(&[0.2, 0.8, 0.5, 0.8], ClickModel::DocumentBased);
        assert_eq!(env.optimal_ranking(3).items(), &[1, 3, 2]);
    }
}
