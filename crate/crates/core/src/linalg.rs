//! Dense linear-algebra helpers built on `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Dense real matrix used for Gram matrices and design moment matrices.
pub type Matrix = DMatrix<f64>;

/// Relative eigenvalue cut-off used when deciding the numerical rank of a
/// positive semi-definite matrix.
const PINV_REL_TOL: f64 = 1e-12;

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return invalid(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return invalid(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    Ok(())
}

fn eigen_cutoff(values: &DVector<f64>, n: usize) -> f64 {
    let top = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    top * PINV_REL_TOL * n.max(1) as f64
}

/// Moore–Penrose pseudoinverse of a symmetric positive semi-definite matrix.
///
/// Eigenvalues below a relative cut-off are treated as zero, so the result
/// acts as the inverse on the numerical range of `m` and vanishes on its
/// kernel.
pub fn pseudo_inverse(m: &Matrix) -> Result<Matrix> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let cutoff = eigen_cutoff(&eig.eigenvalues, n);
    let mut out = Matrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let u = eig.eigenvectors.column(k);
            out += (u * u.transpose()) / lambda;
        }
    }
    Ok(out)
}

/// Numerical rank of a symmetric PSD matrix, using the same cut-off as
/// [`pseudo_inverse`].
pub fn psd_rank(m: &Matrix) -> Result<usize> {
    check_symmetric(m)?;
    let eig = SymmetricEigen::new(m.clone());
    let cutoff = eigen_cutoff(&eig.eigenvalues, m.nrows());
    Ok(eig.eigenvalues.iter().filter(|&&l| l > cutoff).count())
}

/// `x^T m x`.
pub fn quad_form(m: &Matrix, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Running sums `V = Σ ββᵀ` and `S = Σ βζ` of a least-squares problem.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    gram: Matrix,
    moment: DVector<f64>,
    count: u64,
}

impl GramAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            gram: Matrix::zeros(dim, dim),
            moment: DVector::zeros(dim),
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn push(&mut self, beta: &[f64], response: f64) -> Result<()> {
        let d = self.dim();
        if beta.len() != d {
            return invalid(format!(
                "feature vector has dimension {}, expected {d}",
                beta.len()
            ));
        }
        for i in 0..d {
            for j in 0..d {
                self.gram[(i, j)] += beta[i] * beta[j];
            }
            self.moment[i] += beta[i] * response;
        }
        self.count += 1;
        Ok(())
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Minimum-norm solution `V† S`.
    pub fn solve(&self) -> Result<Vec<f64>> {
        min_norm_solve(&self.gram, &self.moment)
    }
}

/// `V† S` with one step of iterative refinement on the range of `V`.
pub fn min_norm_solve(gram: &Matrix, moment: &DVector<f64>) -> Result<Vec<f64>> {
    if gram.nrows() != moment.len() {
        return invalid("gram matrix and moment vector disagree in dimension");
    }
    let pinv = pseudo_inverse(gram)?;
    let mut theta = &pinv * moment;
    let residual = moment - gram * &theta;
    theta += &pinv * residual;
    Ok(theta.iter().copied().collect())
}

/// Least-squares estimate `θ̂ = V† S` over a multiset of
/// (feature-vector, response) observations.
pub fn least_squares<F: AsRef<[f64]>>(data: &[(F, f64)]) -> Result<Vec<f64>> {
    let Some((first, _)) = data.first() else {
        return invalid("least squares needs at least one observation");
    };
    let mut acc = GramAccumulator::new(first.as_ref().len());
    for (beta, zeta) in data {
        acc.push(beta.as_ref(), *zeta)?;
    }
    acc.solve()
}

/// Orthonormal basis (as columns) of the span of `items`.
///
/// Directions whose second moment falls below `1e-10` of the leading one
/// are considered numerically absent.
pub fn span_basis<F: AsRef<[f64]>>(items: &[F]) -> Result<Matrix> {
    let Some(first) = items.first() else {
        return invalid("empty item set");
    };
    let d = first.as_ref().len();
    let mut moment = Matrix::zeros(d, d);
    for x in items {
        let x = x.as_ref();
        if x.len() != d {
            return invalid("items have inconsistent dimensions");
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("item contains a non-finite coordinate");
        }
        for i in 0..d {
            for j in 0..d {
                moment[(i, j)] += x[i] * x[j];
            }
        }
    }
    let eig = SymmetricEigen::new(moment);
    let top = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    if top <= 0.0 {
        return Err(Error::Degenerate("all items are zero".into()));
    }
    let keep: Vec<usize> = (0..d)
        .filter(|&k| eig.eigenvalues[k] > 1e-10 * top)
        .collect();
    let mut basis = Matrix::zeros(d, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(k));
    }
    Ok(basis)
}
