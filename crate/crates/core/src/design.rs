//! Exploration designs over finite item sets.
//!
//! [`g_optimal_design`] returns a distribution `π` whose predictive variance
//! bound `max_x ‖x‖²_{Q(π)†}` is within a factor `1 + ε` of the rank of the
//! item set, with support small enough to be explored exhaustively.
//! [`volumetric_spanner`] is a cheaper alternative whose uniform design
//! gives the weaker bound `|S|`. [`allocation`] turns a design into
//! per-item exploration counts for one phase.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::{pseudo_inverse, quad_form, span_basis, Matrix};

/// Default slack on the Kiefer–Wolfowitz bound.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Weights below this are dropped before renormalising.
const PRUNE_BELOW: f64 = 1e-6;

const MAX_ITERATIONS: usize = 200_000;

/// A probability distribution over item indices with small support.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// `(item index, weight)`, sorted by index, every weight strictly positive.
    weights: Vec<(usize, f64)>,
    /// Achieved `max_x ‖x‖²_{Q(π)†}` over the item set the design was built for.
    max_norm: f64,
    rank: usize,
}

impl Design {
    /// Builds a design from explicit weights; entries with zero weight are
    /// dropped. The caller is responsible for `max_norm` being accurate.
    pub fn from_weights(
        mut weights: Vec<(usize, f64)>,
        max_norm: f64,
        rank: usize,
    ) -> Result<Self> {
        if weights.iter().any(|&(_, w)| !(w >= 0.0) || !w.is_finite()) {
            return invalid("design weights must be finite and nonnegative");
        }
        weights.retain(|&(_, w)| w > 0.0);
        weights.sort_by_key(|&(i, _)| i);
        if weights.windows(2).any(|p| p[0].0 == p[1].0) {
            return invalid("design lists an item twice");
        }
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("design weights sum to {total}, not 1"));
        }
        Ok(Self {
            weights,
            max_norm,
            rank,
        })
    }

    pub fn weights(&self) -> &[(usize, f64)] {
        &self.weights
    }

    pub fn weight(&self, item: usize) -> f64 {
        self.weights
            .binary_search_by_key(&item, |&(i, _)| i)
            .map(|k| self.weights[k].1)
            .unwrap_or(0.0)
    }

    pub fn support(&self) -> Vec<usize> {
        self.weights.iter().map(|&(i, _)| i).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    /// Rank of the item set the design was computed for.
    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// `max_x ‖x‖²_{Q(π)†}` computed in the ambient space through the
/// pseudoinverse of `Q(π) = Σ π(a) a aᵀ`.
///
/// Items outside the range of `Q(π)` have no finite norm and yield
/// `f64::INFINITY`.
pub fn design_max_norm<F: AsRef<[f64]>>(items: &[F], design: &Design) -> Result<f64> {
    let Some(first) = items.first() else {
        return invalid("empty item set");
    };
    let d = first.as_ref().len();
    let mut q = Matrix::zeros(d, d);
    for &(i, w) in design.weights() {
        let x = items
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("design item {i} out of range")))?
            .as_ref();
        for r in 0..d {
            for c in 0..d {
                q[(r, c)] += w * x[r] * x[c];
            }
        }
    }
    let qp = pseudo_inverse(&q)?;
    let projector = &q * &qp;
    let mut worst = 0.0_f64;
    for x in items {
        let x = x.as_ref();
        let xv = DVector::from_column_slice(x);
        let residual = &xv - &projector * &xv;
        if residual.norm() > 1e-7 * xv.norm().max(1.0) {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(quad_form(&qp, x));
    }
    Ok(worst)
}

/// Coordinates of every item in an orthonormal basis of the items' span.
struct Projected {
    rank: usize,
    coords: Vec<f64>,
}

impl Projected {
    fn new<F: AsRef<[f64]>>(items: &[F]) -> Result<Self> {
        let basis = span_basis(items)?;
        let rank = basis.ncols();
        let mut coords = Vec::with_capacity(items.len() * rank);
        for x in items {
            let x = x.as_ref();
            for c in 0..rank {
                let col = basis.column(c);
                coords.push(col.iter().zip(x).map(|(b, v)| b * v).sum());
            }
        }
        Ok(Self { rank, coords })
    }

    fn len(&self) -> usize {
        self.coords.len() / self.rank
    }

    fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.rank..(i + 1) * self.rank]
    }

    fn moment(&self, weights: &[f64]) -> Matrix {
        let r = self.rank;
        let mut q = Matrix::zeros(r, r);
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                let y = self.get(i);
                for a in 0..r {
                    for b in 0..r {
                        q[(a, b)] += w * y[a] * y[b];
                    }
                }
            }
        }
        q
    }

    /// Leverages `y_iᵀ Q⁻¹ y_i` for every item, or `None` when `Q` is
    /// numerically singular.
    fn leverages(&self, weights: &[f64]) -> Option<Vec<f64>> {
        let q = self.moment(weights);
        let inv = Cholesky::new(q)?.inverse();
        Some(
            (0..self.len())
                .map(|i| quad_form(&inv, self.get(i)))
                .collect(),
        )
    }

    /// Greedy pivoted Gram–Schmidt: `rank` items that span the set.
    fn spanning_seed(&self) -> Vec<usize> {
        let r = self.rank;
        let n = self.len();
        let mut residual: Vec<Vec<f64>> = (0..n).map(|i| self.get(i).to_vec()).collect();
        let mut chosen = Vec::with_capacity(r);
        for _ in 0..r {
            let (best, norm2) = residual
                .iter()
                .enumerate()
                .filter(|(i, _)| !chosen.contains(i))
                .map(|(i, v)| (i, v.iter().map(|x| x * x).sum::<f64>()))
                .fold(
                    (usize::MAX, -1.0),
                    |acc, cur| if cur.1 > acc.1 { cur } else { acc },
                );
            if best == usize::MAX || norm2 <= 0.0 {
                break;
            }
            chosen.push(best);
            let pivot: Vec<f64> = residual[best].iter().map(|x| x / norm2.sqrt()).collect();
            for v in residual.iter_mut() {
                let proj: f64 = v.iter().zip(&pivot).map(|(a, b)| a * b).sum();
                for (x, p) in v.iter_mut().zip(&pivot) {
                    *x -= proj * p;
                }
            }
        }
        chosen
    }
}

/// Approximate G-optimal design by Frank–Wolfe with away steps on the
/// log-det objective.
///
/// Stops once `max_x ‖x‖²_{Q(π)†} ≤ (1 + epsilon)·rank(items)`. Tiny weights
/// are pruned and the support is then reduced to at most `r(r+1)/2` points
/// without loosening the bound, where `r` is the rank of the item set.
pub fn g_optimal_design<F: AsRef<[f64]>>(items: &[F], epsilon: f64) -> Result<Design> {
    if items.is_empty() {
        return invalid("g-optimal design needs at least one item");
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let proj = Projected::new(items)?;
    let r = proj.rank;
    let n = proj.len();
    let target = (1.0 + epsilon) * r as f64;

    let mut weights = vec![0.0; n];
    let seed = proj.spanning_seed();
    for &i in &seed {
        weights[i] = 1.0 / seed.len() as f64;
    }

    // Run a little past the requested tolerance so that pruning has room;
    // each failed certification halves the inner slack.
    let mut inner_slack = 0.5 * epsilon;
    let mut attempts = 0;
    loop {
        run_away_step_frank_wolfe(&proj, &mut weights, (1.0 + inner_slack) * r as f64)?;
        let mut candidate = weights.clone();
        prune(&mut candidate);
        reduce_support(&proj, &mut candidate);
        if let Some(lev) = proj.leverages(&candidate) {
            let worst = lev.iter().fold(0.0_f64, |a, &b| a.max(b));
            if worst <= target {
                let pairs = candidate
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(i, &w)| (i, w))
                    .collect();
                return Design::from_weights(pairs, worst, r);
            }
        }
        attempts += 1;
        if attempts > 8 {
            return Err(Error::Invariant(
                "design bound could not be certified after pruning".into(),
            ));
        }
        inner_slack *= 0.5;
    }
}

fn run_away_step_frank_wolfe(proj: &Projected, weights: &mut [f64], target: f64) -> Result<()> {
    let r = proj.rank as f64;
    for _ in 0..MAX_ITERATIONS {
        let lev = proj
            .leverages(weights)
            .ok_or_else(|| Error::Invariant("design moment matrix became singular".into()))?;
        let (up, g_up) = argmax(lev.iter().copied());
        if g_up <= target {
            return Ok(());
        }
        let (down, g_down) =
            argmin(
                lev.iter()
                    .zip(weights.iter())
                    .map(|(&g, &w)| if w > 0.0 { g } else { f64::INFINITY }),
            );
        let toward = g_up / r - 1.0;
        let away = 1.0 - g_down / r;
        if toward >= away || weights[down] >= 1.0 {
            let step = (g_up / r - 1.0) / (g_up - 1.0);
            mix(weights, up, step);
        } else {
            let floor = -weights[down] / (1.0 - weights[down]);
            let step = if g_down > 1.0 {
                ((g_down / r - 1.0) / (g_down - 1.0)).max(floor)
            } else {
                floor
            };
            mix(weights, down, step);
            if step == floor {
                weights[down] = 0.0;
            }
        }
    }
    Err(Error::Invariant(
        "frank-wolfe did not reach the design bound".into(),
    ))
}

/// `π ← (1 − λ)π + λ e_i`.
fn mix(weights: &mut [f64], i: usize, step: f64) {
    for w in weights.iter_mut() {
        *w *= 1.0 - step;
    }
    weights[i] += step;
    for w in weights.iter_mut() {
        if *w < 0.0 {
            *w = 0.0;
        }
    }
}

fn argmax(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, g)| if g > acc.1 { (i, g) } else { acc },
    )
}

fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate().fold(
        (0, f64::INFINITY),
        |acc, (i, g)| if g < acc.1 { (i, g) } else { acc },
    )
}

fn prune(weights: &mut [f64]) {
    for w in weights.iter_mut() {
        if *w < PRUNE_BELOW {
            *w = 0.0;
        }
    }
    normalise(weights);
}

fn normalise(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// Carathéodory-style reduction: while the support exceeds `r(r+1)/2`, move
/// along a null direction of the lifted points `vec(y yᵀ)` that does not
/// increase the total mass until some weight vanishes. `Q(π)` only grows in
/// the Loewner order after renormalising, so the bound is preserved.
fn reduce_support(proj: &Projected, weights: &mut [f64]) {
    let r = proj.rank;
    let limit = r * (r + 1) / 2;
    loop {
        let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        if support.len() <= limit {
            break;
        }
        let cols = &support[..limit + 1];
        let mut lifted = DMatrix::zeros(limit, limit + 1);
        for (c, &i) in cols.iter().enumerate() {
            let y = proj.get(i);
            let mut row = 0;
            for a in 0..r {
                for b in a..r {
                    lifted[(row, c)] = y[a] * y[b];
                    row += 1;
                }
            }
        }
        let Some(mut z) = null_vector(&lifted) else {
            break;
        };
        if z.iter().sum::<f64>() > 0.0 {
            z.iter_mut().for_each(|v| *v = -*v);
        }
        // Largest t with w + t z >= 0 on the chosen columns.
        let mut t = f64::INFINITY;
        let mut hit = 0;
        for (c, &zc) in z.iter().enumerate() {
            if zc < 0.0 {
                let cand = weights[cols[c]] / -zc;
                if cand < t {
                    t = cand;
                    hit = c;
                }
            }
        }
        if !t.is_finite() {
            // Null direction with no negative entry: flip to its negative side.
            z.iter_mut().for_each(|v| *v = -*v);
            for (c, &zc) in z.iter().enumerate() {
                if zc < 0.0 {
                    let cand = weights[cols[c]] / -zc;
                    if cand < t {
                        t = cand;
                        hit = c;
                    }
                }
            }
        }
        for (c, &zc) in z.iter().enumerate() {
            weights[cols[c]] = (weights[cols[c]] + t * zc).max(0.0);
        }
        weights[cols[hit]] = 0.0;
        normalise(weights);
    }
}

/// A unit vector in the kernel of an `m × (m + 1)` matrix.
fn null_vector(a: &DMatrix<f64>) -> Option<Vec<f64>> {
    let gram = a.transpose() * a;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let (k, _) = argmin(eig.eigenvalues.iter().copied());
    let v = eig.eigenvectors.column(k);
    let norm = v.norm();
    if norm == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| x / norm).collect())
}

/// Greedy ellipsoid-growing volumetric spanner.
///
/// Starts from a spanning subset and repeatedly adds the item with the
/// largest minimum-norm coefficient vector `‖U† x‖₂` until every item lies in
/// `E(S) = {Σ αᵢ xᵢ : ‖α‖₂ ≤ 1}` up to `1e-6`. Returns indices into `items`.
pub fn volumetric_spanner<F: AsRef<[f64]>>(items: &[F]) -> Result<Vec<usize>> {
    if items.is_empty() {
        return invalid("volumetric spanner needs at least one item");
    }
    let proj = Projected::new(items)?;
    let n = proj.len();
    let mut chosen = proj.spanning_seed();
    loop {
        // ‖U† x‖² = xᵀ (U Uᵀ)⁻¹ x on the span.
        let mut indicator = vec![0.0; n];
        for &i in &chosen {
            indicator[i] = 1.0;
        }
        let lev = proj
            .leverages(&indicator)
            .ok_or_else(|| Error::Invariant("spanner lost full rank".into()))?;
        let (worst, value) = argmax(lev.iter().copied());
        if value <= 1.0 + 1e-6 || chosen.contains(&worst) {
            chosen.sort_unstable();
            return Ok(chosen);
        }
        chosen.push(worst);
    }
}

/// Uniform design over a spanner. Its bound is at most `|S|`.
pub fn spanner_design<F: AsRef<[f64]>>(items: &[F]) -> Result<Design> {
    let support = volumetric_spanner(items)?;
    let w = 1.0 / support.len() as f64;
    let rank = span_basis(items)?.ncols();
    let provisional = Design::from_weights(support.iter().map(|&i| (i, w)).collect(), 0.0, rank)?;
    let bound = design_max_norm(items, &provisional)?;
    Design::from_weights(provisional.weights, bound, rank)
}

/// Per-item exploration counts `T(a)` for one phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationTable {
    counts: Vec<(usize, u64)>,
}

impl AllocationTable {
    /// Explicit counts; used for ablations that override the schedule.
    pub fn from_counts(mut counts: Vec<(usize, u64)>) -> Self {
        counts.sort_by_key(|&(i, _)| i);
        Self { counts }
    }

    pub fn counts(&self) -> &[(usize, u64)] {
        &self.counts
    }

    pub fn count(&self, item: usize) -> u64 {
        self.counts
            .binary_search_by_key(&item, |&(i, _)| i)
            .map(|k| self.counts[k].1)
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| c).sum()
    }
}

/// Exploration counts `T(a) = ⌈ d·π(a) / (2Δ²) · ln(n_items / δ_phase) ⌉`
/// with `Δ = 2^{-phase}`; items outside the design get no entry.
///
/// `dimension` is the design's variance bound (the ambient dimension for an
/// exact design, the certified bound for an approximate one).
pub fn allocation(
    design: &Design,
    dimension: f64,
    phase: u32,
    delta_phase: f64,
    n_items: usize,
) -> Result<AllocationTable> {
    if phase < 1 {
        return invalid("phase numbers start at 1");
    }
    if !(delta_phase > 0.0 && delta_phase < 1.0) {
        return invalid(format!("delta_phase must lie in (0, 1), got {delta_phase}"));
    }
    if n_items == 0 {
        return invalid("allocation over an empty item list");
    }
    let gap = phase_precision(phase);
    let log_term = (n_items as f64 / delta_phase).ln();
    let counts = design
        .weights()
        .iter()
        .map(|&(i, w)| {
            let raw = dimension * w / (2.0 * gap * gap) * log_term;
            (i, raw.ceil() as u64)
        })
        .filter(|&(_, c)| c > 0)
        .collect();
    Ok(AllocationTable { counts })
}

/// `Δ_ℓ = 2^{-ℓ}`.
pub fn phase_precision(phase: u32) -> f64 {
    0.5_f64.powi(phase as i32)
}
