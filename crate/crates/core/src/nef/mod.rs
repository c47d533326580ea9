//! Asymptotic fiducial distributions for the mean of a multivariate natural
//! exponential family, and the Schur-complement algebra behind their
//! order invariance.

mod multinomial;

pub use multinomial::{multinomial_fd_d2, multinomial_phi_fd, Order, PhiFd, StepwiseFd};

use crate::error::{Error, Result};
use crate::rng::Stream;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution, Gamma};

/// Smallest Cholesky pivot accepted, relative to the largest diagonal entry.
const PIVOT_TOL: f64 = 1e-12;
/// Tolerance of the identities checked by [`build_schur`], relative to `max |V|`.
const SCHUR_TOL: f64 = 1e-10;

/// A d-dimensional NEF in its mean parameterization.
pub trait NefSpec: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn in_domain(&self, mu: &DVector<f64>) -> bool;
    /// `V(μ)`, the covariance of one observation.
    fn variance(&self, mu: &DVector<f64>) -> DMatrix<f64>;
    /// Mean of `n` observations drawn at `mu`.
    fn sample_mean(&self, mu: &DVector<f64>, n: usize, rng: &mut Stream) -> Result<DVector<f64>>;
}

/// Multinomial cell probabilities `p_1..p_d`; cell `d + 1` takes the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Multinomial {
    d: usize,
}

impl Multinomial {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("multinomial needs at least one free cell".into()));
        }
        Ok(Self { d })
    }
}

impl NefSpec for Multinomial {
    fn name(&self) -> &str {
        "multinomial"
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn in_domain(&self, mu: &DVector<f64>) -> bool {
        mu.len() == self.d && mu.iter().all(|&p| p > 0.0) && mu.sum() < 1.0
    }
    fn variance(&self, mu: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(mu) - mu * mu.transpose()
    }
    fn sample_mean(&self, mu: &DVector<f64>, n: usize, rng: &mut Stream) -> Result<DVector<f64>> {
        if !self.in_domain(mu) {
            return Err(Error::InvalidArgument("multinomial mean outside the simplex".into()));
        }
        // Cells one at a time, each binomial given the ones before it.
        let mut left = n as u64;
        let mut mass = 1.0;
        let mut out = DVector::zeros(self.d);
        for k in 0..self.d {
            let p = (mu[k] / mass).clamp(0.0, 1.0);
            let c = Binomial::new(left, p)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng);
            out[k] = c as f64 / n as f64;
            left -= c;
            mass -= mu[k];
        }
        Ok(out)
    }
}

/// One-dimensional exponential family with `V(μ) = μ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Exponential1D;

impl NefSpec for Exponential1D {
    fn name(&self) -> &str {
        "exponential"
    }
    fn dim(&self) -> usize {
        1
    }
    fn in_domain(&self, mu: &DVector<f64>) -> bool {
        mu.len() == 1 && mu[0] > 0.0 && mu[0].is_finite()
    }
    fn variance(&self, mu: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, mu[0] * mu[0])
    }
    fn sample_mean(&self, mu: &DVector<f64>, n: usize, rng: &mut Stream) -> Result<DVector<f64>> {
        let g = Gamma::new(n as f64, mu[0] / n as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(DVector::from_element(1, g.sample(rng)))
    }
}

/// Symmetric positive definite with every Cholesky pivot at least
/// `1e-12 · max V_kk`.
pub fn check_spd(v: &DMatrix<f64>) -> Result<()> {
    if !v.is_square() || v.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("expected a non-empty square matrix, got {}x{}", v.nrows(), v.ncols())));
    }
    let scale = v.amax().max(f64::MIN_POSITIVE);
    if (v - v.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite("matrix is not symmetric".into()));
    }
    let chol = v.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    let max_diag = v.diagonal().max();
    let min_pivot = chol.l().diagonal().iter().map(|l| l * l).fold(f64::INFINITY, f64::min);
    if min_pivot < PIVOT_TOL * max_diag {
        return Err(Error::NotPositiveDefinite(format!("smallest pivot {min_pivot:e} below tolerance")));
    }
    Ok(())
}

/// Normal fiducial distribution of a mean vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiNormalFD {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl MultiNormalFD {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() {
            return Err(Error::InvalidArgument(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("normal FD mean"));
        }
        check_spd(&covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Reorder coordinates: new coordinate `i` is old coordinate `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&i| i >= d || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        let mean = DVector::from_fn(d, |i, _| self.mean[perm[i]]);
        let covariance = DMatrix::from_fn(d, d, |i, j| self.covariance[(perm[i], perm[j])]);
        Ok(Self { mean, covariance })
    }
}

/// `N(x̄, V(x̄)/n)`.
pub fn asymptotic_fd(spec: &dyn NefSpec, x_bar: &DVector<f64>, n: usize) -> Result<MultiNormalFD> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if x_bar.len() != spec.dim() || !spec.in_domain(x_bar) {
        return Err(Error::InvalidArgument(format!("x_bar = {:?} is outside the {} mean domain", x_bar.as_slice(), spec.name())));
    }
    let v = spec.variance(x_bar);
    check_spd(&v)?;
    MultiNormalFD::new(x_bar.clone(), v / n as f64)
}

/// `V_{[k][k]}^{-1} b` for the leading `k x k` block.
fn solve_leading(v: &DMatrix<f64>, k: usize, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let block = v.view((0, 0), (k, k)).into_owned();
    let lu = block.clone().lu();
    let u_min = lu.u().diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if !(u_min > 1e-14 * block.amax()) {
        return Err(Error::Singular(format!("leading {k}x{k} block of V is singular")));
    }
    lu.solve(rhs).ok_or_else(|| Error::Singular(format!("leading {k}x{k} block of V is singular")))
}

fn check_square(v: &DMatrix<f64>) -> Result<usize> {
    if !v.is_square() || v.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("expected a non-empty square matrix, got {}x{}", v.nrows(), v.ncols())));
    }
    Ok(v.nrows())
}

/// Conditional mean `λ_k` and variance `q_k` of coordinate `k` (1-based)
/// given the first `k - 1`.
pub fn schur_moments(v: &DMatrix<f64>, x_bar: &DVector<f64>, mu: &DVector<f64>, k: usize) -> Result<(f64, f64)> {
    let d = check_square(v)?;
    if x_bar.len() != d || mu.len() != d {
        return Err(Error::InvalidArgument("dimension mismatch between V, x_bar and mu".into()));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={d}, got {k}")));
    }
    let i = k - 1;
    if i == 0 {
        return Ok((mu[0], v[(0, 0)]));
    }
    // β = V_{[k-1][k-1]}^{-1} V_{[k-1]k}
    let cross = v.view((0, i), (i, 1)).column(0).into_owned();
    let beta = solve_leading(v, i, &cross)?;
    let innovation = x_bar.rows(0, i) - mu.rows(0, i);
    Ok((mu[i] + beta.dot(&innovation), v[(i, i)] - beta.dot(&cross)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurDecomposition {
    /// Unit lower triangular.
    pub a: DMatrix<f64>,
    /// Diagonal of `Q = A V Aᵀ`.
    pub q: DVector<f64>,
    /// `max |offdiag(A V Aᵀ)|` and `max |A⁻¹ Q A⁻ᵀ - V|`.
    pub residuals: (f64, f64),
}

impl SchurDecomposition {
    pub fn q_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.q)
    }
}

/// `A` with rows `(-V_{k[k-1]} V_{[k-1][k-1]}^{-1}, 1, 0, ...)` and
/// `Q = diag(q_k)`; both identities are verified before returning.
pub fn build_schur(v: &DMatrix<f64>) -> Result<SchurDecomposition> {
    let d = check_square(v)?;
    let mut a = DMatrix::identity(d, d);
    let mut q = DVector::zeros(d);
    q[0] = v[(0, 0)];
    for i in 1..d {
        let cross = v.view((0, i), (i, 1)).column(0).into_owned();
        let beta = solve_leading(v, i, &cross)?;
        for j in 0..i {
            a[(i, j)] = -beta[j];
        }
        q[i] = v[(i, i)] - beta.dot(&cross);
    }
    if q.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("non-positive conditional variance in {:?}", q.as_slice())));
    }
    let mut avat = &a * v * a.transpose();
    avat.fill_diagonal(0.0);
    let off = avat.amax();
    let a_inv = a.clone().try_inverse().ok_or_else(|| Error::Singular("A is not invertible".into()))?;
    let back = (&a_inv * DMatrix::from_diagonal(&q) * a_inv.transpose() - v).amax();
    let tol = SCHUR_TOL * v.amax().max(1.0);
    if off > tol || back > tol {
        return Err(Error::Singular(format!("Schur identities fail: off-diagonal {off:e}, reconstruction {back:e}")));
    }
    Ok(SchurDecomposition { a, q, residuals: (off, back) })
}

/// Delta-method image of `fd` under `g`: mean `g(x̄)`, covariance `J Σ Jᵀ`.
/// Any nonsingular Jacobian is accepted; lower-triangular maps are the case
/// that preserves the stepwise structure.
pub fn triangular_transform<G, J>(fd: &MultiNormalFD, g: G, jacobian: J) -> Result<MultiNormalFD>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let d = fd.dim();
    let jac = jacobian(&fd.mean);
    let mean = g(&fd.mean);
    if jac.nrows() != d || jac.ncols() != d || mean.len() != d {
        return Err(Error::InvalidArgument("transform must map R^d to R^d".into()));
    }
    let lu = jac.clone().lu();
    let u_min = lu.u().diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if !(u_min > 1e-14 * jac.amax()) {
        return Err(Error::Singular("Jacobian is singular at the mean".into()));
    }
    let cov = &jac * &fd.covariance * jac.transpose();
    MultiNormalFD::new(mean, 0.5 * (&cov + cov.transpose()))
}
