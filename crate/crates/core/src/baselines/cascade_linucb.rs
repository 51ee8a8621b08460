use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::top_k;
use crate::env::ItemSet;
use crate::error::{invalid, Error, Result};
use crate::ranker::{ClickVector, Ranker, Ranking};

/// Rebuild `M⁻¹` from scratch after this many rank-one updates.
const RECOMPUTE_EVERY: u64 = 4096;

#[derive(Debug, Clone)]
pub struct CascadeLinUcbConfig {
    /// Ridge regularisation `λ`.
    pub lambda: f64,
    /// Confidence multiplier; `None` uses the theoretical value for the
    /// horizon.
    pub confidence: Option<f64>,
    /// Cap scores at 1, the largest possible attractiveness.
    pub clip: bool,
}

impl Default for CascadeLinUcbConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            confidence: None,
            clip: true,
        }
    }
}

/// Linear UCB with cascade feedback: every position up to and including
/// the first click counts as an observation.
#[derive(Debug, Clone)]
pub struct CascadeLinUcb<'a> {
    items: &'a ItemSet,
    k: usize,
    lambda: f64,
    confidence: f64,
    clip: bool,
    gram: Vec<f64>,
    gram_inv: Vec<f64>,
    moment: Vec<f64>,
    theta: Vec<f64>,
    scores: Vec<f64>,
    updates: u64,
    scratch: Vec<f64>,
}

impl<'a> CascadeLinUcb<'a> {
    pub fn new(
        items: &'a ItemSet,
        k: usize,
        horizon: u64,
        config: &CascadeLinUcbConfig,
    ) -> Result<Self> {
        if k == 0 || k > items.len() {
            return invalid(format!(
                "need 1 <= K <= L, got K = {k}, L = {}",
                items.len()
            ));
        }
        if !(config.lambda > 0.0) {
            return invalid(format!("lambda must be positive, got {}", config.lambda));
        }
        let d = items.dim();
        let confidence = match config.confidence {
            Some(c) if c >= 0.0 => c,
            Some(c) => return invalid(format!("confidence multiplier must be >= 0, got {c}")),
            None => Self::default_confidence(d, k, horizon, config.lambda),
        };
        let mut gram = vec![0.0; d * d];
        let mut gram_inv = vec![0.0; d * d];
        for i in 0..d {
            gram[i * d + i] = config.lambda;
            gram_inv[i * d + i] = 1.0 / config.lambda;
        }
        Ok(Self {
            items,
            k,
            lambda: config.lambda,
            confidence,
            clip: config.clip,
            gram,
            gram_inv,
            moment: vec![0.0; d],
            theta: vec![0.0; d],
            scores: vec![0.0; items.len()],
            updates: 0,
            scratch: vec![0.0; d],
        })
    }

    /// `√(d ln(1 + TK/(dλ)) + 2 ln(TK)) + √λ`.
    pub fn default_confidence(d: usize, k: usize, horizon: u64, lambda: f64) -> f64 {
        let d = d as f64;
        let tk = (horizon.max(1) as f64) * k as f64;
        (d * (1.0 + tk / (d * lambda)).ln() + 2.0 * tk.max(1.0).ln()).sqrt() + lambda.sqrt()
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta
    }

    /// UCB scores computed by the latest call to `rank`.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.items.dim();
        DMatrix::from_row_slice(d, d, &self.gram)
    }

    fn ucb(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut mean = 0.0;
        let mut width = 0.0;
        for i in 0..d {
            mean += self.theta[i] * x[i];
            let row = &self.gram_inv[i * d..(i + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                s += row[j] * x[j];
            }
            width += x[i] * s;
        }
        let ucb = mean + self.confidence * width.max(0.0).sqrt();
        if self.clip {
            ucb.min(1.0)
        } else {
            ucb
        }
    }

    fn push(&mut self, x: &[f64], reward: f64) {
        let d = x.len();
        for i in 0..d {
            for j in 0..d {
                self.gram[i * d + j] += x[i] * x[j];
            }
            self.moment[i] += reward * x[i];
        }
        // Sherman–Morrison: (M + xxᵀ)⁻¹ = M⁻¹ − M⁻¹x xᵀM⁻¹ / (1 + xᵀM⁻¹x).
        let u = &mut self.scratch;
        let mut denom = 1.0;
        for i in 0..d {
            u[i] = (0..d).map(|j| self.gram_inv[i * d + j] * x[j]).sum();
            denom += x[i] * u[i];
        }
        for i in 0..d {
            for j in 0..d {
                self.gram_inv[i * d + j] -= u[i] * u[j] / denom;
            }
        }
        self.updates += 1;
    }

    fn refresh(&mut self) -> Result<()> {
        let d = self.items.dim();
        if self.updates.is_multiple_of(RECOMPUTE_EVERY) {
            let inv = DMatrix::from_row_slice(d, d, &self.gram)
                .cholesky()
                .ok_or_else(|| {
                    Error::Invariant("regularised gram matrix lost definiteness".into())
                })?
                .inverse();
            for i in 0..d {
                for j in 0..d {
                    self.gram_inv[i * d + j] = inv[(i, j)];
                }
            }
        }
        for i in 0..d {
            self.theta[i] = (0..d)
                .map(|j| self.gram_inv[i * d + j] * self.moment[j])
                .sum();
        }
        Ok(())
    }

    /// Exact ridge solution `(λI + Σxxᵀ)⁻¹ Σ r x` from the stored sums.
    pub fn ridge_solution(&self) -> Result<Vec<f64>> {
        let d = self.items.dim();
        let m = DMatrix::from_row_slice(d, d, &self.gram);
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Invariant("regularised gram matrix lost definiteness".into()))?;
        Ok(chol
            .solve(&DVector::from_column_slice(&self.moment))
            .iter()
            .copied()
            .collect())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Ranker for CascadeLinUcb<'_> {
    fn label(&self) -> &str {
        "cascadelinucb"
    }

    fn rank(&mut self, _rng: &mut dyn RngCore) -> Result<Ranking> {
        for i in 0..self.items.len() {
            self.scores[i] = self.ucb(self.items.get(i));
        }
        Ranking::new(top_k(&self.scores, self.k))
    }

    fn observe(&mut self, ranking: &Ranking, clicks: &ClickVector) -> Result<()> {
        if ranking.len() != self.k || clicks.len() != self.k {
            return invalid("feedback does not match the number of positions");
        }
        let last = clicks.first_click().unwrap_or(self.k - 1);
        let items = self.items;
        for p in 0..=last {
            let reward = if clicks.clicked(p) && p == last {
                1.0
            } else {
                0.0
            };
            self.push(items.get(ranking.item(p)), reward);
        }
        self.refresh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ClickModel, Environment, Theta};
    use crate::harness::{simulate, Streams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn items() -> ItemSet {
        ItemSet::new(vec![
            vec![0.1, 0.0],
            vec![0.0, 0.9],
            vec![0.5, 0.5],
            vec![0.3, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn cold_start_ranks_by_bonus() {
        let set = items();
        let cfg = CascadeLinUcbConfig {
            clip: false,
            ..CascadeLinUcbConfig::default()
        };
        let mut alg = CascadeLinUcb::new(&set, 3, 100, &cfg).unwrap();
        let r = alg.rank(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        // θ̂ = 0, so scores are c·‖x‖ / √λ.
        assert_eq!(r.items(), &[1, 2, 3]);
        let c = alg.confidence();
        assert!((alg.scores()[3] - 0.3 * c).abs() < 1e-12);
    }

    #[test]
    fn clipped_scores_tie_by_index() {
        let set = items();
        let mut alg = CascadeLinUcb::new(&set, 3, 100, &CascadeLinUcbConfig::default()).unwrap();
        let r = alg.rank(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let c = alg.confidence();
        assert!(0.1 * c < 1.0 && 0.3 * c > 1.0);
        assert_eq!(alg.scores(), &[0.1 * c, 1.0, 1.0, 1.0]);
        assert_eq!(r.items(), &[1, 2, 3]);
    }

    #[test]
    fn matches_ridge_oracle() {
        let set = items();
        let mut alg = CascadeLinUcb::new(&set, 3, 100, &CascadeLinUcbConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut observed: Vec<(usize, f64)> = Vec::new();
        for t in 0..200 {
            let r = alg.rank(&mut rng).unwrap();
            let mut c = vec![false; 3];
            c[t % 4 % 3] = t % 4 != 3;
            let clicks = ClickVector(c);
            let last = clicks.first_click().unwrap_or(2);
            for p in 0..=last {
                observed.push((r.item(p), if clicks.clicked(p) { 1.0 } else { 0.0 }));
            }
            alg.observe(&r, &clicks).unwrap();
        }
        // Independent solve of (λI + Σ xxᵀ) θ = Σ r x.
        let mut m = DMatrix::<f64>::identity(2, 2);
        let mut b = DVector::<f64>::zeros(2);
        for &(i, r) in &observed {
            let x = DVector::from_column_slice(set.get(i));
            m += &x * x.transpose();
            b += r * x;
        }
        let want = m.lu().solve(&b).unwrap();
        for i in 0..2 {
            assert!((alg.theta_hat()[i] - want[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_cascade_locks_onto_attractive_item() {
        let set = ItemSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.5]]).unwrap();
        let env = Environment::new(set, Theta(vec![1.0, 0.0]), ClickModel::Cascade).unwrap();
        let mut alg =
            CascadeLinUcb::new(env.items(), 1, 20_000, &CascadeLinUcbConfig::default()).unwrap();
        let mut streams = Streams::new(4);
        let trace = simulate(&env, &mut alg, 1, 20_000, 1, 4, &mut streams).unwrap();
        // The unattractive direction is tried only while its bonus
        // c/√(n+1) beats the leader's index (> 1), i.e. fewer than c² times.
        let v = trace.values();
        let c = alg.confidence();
        let total = v[v.len() - 1].1;
        assert!(total <= c * c);
        assert!(total - v[v.len() / 2].1 <= 0.1 * total);
        assert_eq!(alg.rank(&mut streams.alg).unwrap().items(), &[0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let set = items();
        assert!(CascadeLinUcb::new(&set, 5, 10, &CascadeLinUcbConfig::default()).is_err());
        let cfg = CascadeLinUcbConfig {
            lambda: 0.0,
            ..CascadeLinUcbConfig::default()
        };
        assert!(CascadeLinUcb::new(&set, 2, 10, &cfg).is_err());
    }
}
