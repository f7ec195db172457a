//! Spectral analysis of `W = K^T K` and shifted Chebyshev polynomials.
//!
//! The dense eigendecomposition serves two purposes: it produces the bounds
//! `lambda1 >= lambda_max(W)` and `0 < lambda2 <= lambda_min^+(W)` consumed by
//! the parameter choosers, and it gives exact matrix functions `f(W)` used as
//! test oracles for the Chebyshev machinery.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::DenseMatrix;
use crate::vecops::dot;

/// Eigenvalues below `DEFAULT_RANK_TOL * lambda_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Largest dimension accepted by the dense eigensolver.
pub const MAX_DENSE_DIM: usize = 2000;

/// Eigen-decomposition of a symmetric positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Ascending.
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `eigenvalues`.
    eigenvectors: DenseMatrix,
}

/// Bounds on the extreme eigenvalues of `W`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SpectralBounds {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda2 > 0.0 && lambda1 >= lambda2 && lambda1.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "spectral bounds need lambda1 >= lambda2 > 0, got ({lambda1}, {lambda2})"
            )));
        }
        Ok(Self { lambda1, lambda2 })
    }

    pub fn chi(&self) -> f64 {
        self.lambda1 / self.lambda2
    }

    pub fn is_degenerate(&self) -> bool {
        self.lambda1 == self.lambda2
    }

    /// `(lambda1 + lambda2) / 2`
    pub fn center(&self) -> f64 {
        0.5 * (self.lambda1 + self.lambda2)
    }

    /// Smallest integer `N` with `N >= sqrt(chi)`.
    pub fn min_chebyshev_degree(&self) -> usize {
        (self.chi().sqrt().ceil() as usize).max(1)
    }
}

/// Full symmetric eigendecomposition of `W = K^T K`.
pub fn eigendecompose_gram(k: &DenseMatrix) -> Result<Spectrum> {
    eigendecompose_symmetric(&k.gram())
}

/// Eigendecomposition of a symmetric PSD matrix; eigenvalues clamped at zero.
pub fn eigendecompose_symmetric(w: &DenseMatrix) -> Result<Spectrum> {
    let d = w.rows();
    if w.cols() != d {
        return Err(Error::DimensionMismatch {
            what: "square matrix columns",
            expected: d,
            found: w.cols(),
        });
    }
    if d > MAX_DENSE_DIM {
        return Err(Error::InvalidInput(format!(
            "dense eigendecomposition limited to dimension {MAX_DENSE_DIM}, got {d}"
        )));
    }
    let eig = nalgebra::SymmetricEigen::new(w.to_nalgebra());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let eigenvectors = DenseMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])])?;
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DenseMatrix {
        &self.eigenvectors
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// The `i`-th eigenvector (column `i`).
    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|r| self.eigenvectors.get(r, i)).collect()
    }

    fn threshold(&self, rank_tol: f64) -> f64 {
        rank_tol * self.lambda_max()
    }

    /// Number of eigenvalues strictly above `rank_tol * lambda_max`.
    pub fn rank(&self, rank_tol: f64) -> usize {
        let thr = self.threshold(rank_tol);
        self.eigenvalues.iter().filter(|&&l| l > thr).count()
    }

    /// Coordinates `V^T x` in the eigenbasis.
    pub fn coordinates(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("spectral coordinates input", self.dim(), x)?;
        Ok(self.eigenvectors.tr_mul_vec(x))
    }

    /// `V diag(c)` applied: reconstructs a vector from eigen-coordinates.
    pub fn synthesize(&self, coords: &[f64]) -> Vec<f64> {
        self.eigenvectors.mul_vec(coords)
    }

    /// `f(W) x`, with `f` applied to each eigenvalue.
    pub fn apply_function(&self, x: &[f64], f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let mut c = self.coordinates(x)?;
        for (ci, &l) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= f(l);
        }
        Ok(self.synthesize(&c))
    }

    /// Explicit `V diag(f(lambda_i)) V^T`.
    pub fn matrix_function(&self, f: impl Fn(f64) -> f64) -> Result<DenseMatrix> {
        let d = self.dim();
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let v = &self.eigenvectors;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            let vi = v.row(i);
            for j in i..d {
                let vj = v.row(j);
                let s: f64 = (0..d).map(|l| vi[l] * fl[l] * vj[l]).sum();
                data[i * d + j] = s;
                data[j * d + i] = s;
            }
        }
        DenseMatrix::from_row_major(d, d, data)
    }

    /// Orthogonal projection onto `ker(W) = ker(K)`.
    pub fn kernel_component(&self, x: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
        let thr = self.threshold(rank_tol);
        self.apply_function(x, |l| if l > thr { 0.0 } else { 1.0 })
    }

    /// Orthogonal projection onto `range(W) = range(K^T)`.
    pub fn range_component(&self, x: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
        let thr = self.threshold(rank_tol);
        self.apply_function(x, |l| if l > thr { 1.0 } else { 0.0 })
    }
}

/// `lambda1 = lambda_max`, `lambda2` = smallest eigenvalue above `rank_tol * lambda_max`.
pub fn spectral_bounds(spec: &Spectrum, rank_tol: f64) -> Result<SpectralBounds> {
    let lmax = spec.lambda_max();
    if !(lmax > 0.0) {
        return Err(Error::DegenerateOperator);
    }
    let thr = rank_tol * lmax;
    let lmin = spec
        .eigenvalues
        .iter()
        .copied()
        .find(|&l| l > thr)
        .ok_or(Error::DegenerateOperator)?;
    SpectralBounds::new(lmax, lmin)
}

/// Orthogonal projection of `y` onto `range(K)`, i.e. `K K^+ y`, computed from
/// the eigendecomposition of `W = K^T K`: with `u_i = K v_i / sqrt(lambda_i)`
/// the positive-eigenvalue directions span `range(K)`.
pub fn project_onto_range(k: &DenseMatrix, spec: &Spectrum, y: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
    check_len("range projection input", k.rows(), y)?;
    // K K^+ y = K W^+ K^T y
    let kty = k.tr_mul_vec(y);
    let thr = rank_tol * spec.lambda_max();
    let s = spec.apply_function(&kty, |l| if l > thr { 1.0 / l } else { 0.0 })?;
    Ok(k.mul_vec(&s))
}

/// Minimum-norm solution `y` of `K^T y = g`, i.e. `(K^T)^+ g = K W^+ g`.
/// The result lies in `range(K)`.
pub fn pinv_transpose_apply(k: &DenseMatrix, spec: &Spectrum, g: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
    let thr = rank_tol * spec.lambda_max();
    let s = spec.apply_function(g, |l| if l > thr { 1.0 / l } else { 0.0 })?;
    Ok(k.mul_vec(&s))
}

/// Chebyshev polynomial of the first kind `T_n(s)`.
///
/// Three-term recurrence on `[-1, 1]`; `cosh` closed form outside.
pub fn chebyshev_t(n: usize, s: f64) -> f64 {
    if s.abs() <= 1.0 {
        let (mut t_prev, mut t) = (1.0, s);
        if n == 0 {
            return 1.0;
        }
        for _ in 1..n {
            let next = 2.0 * s * t - t_prev;
            t_prev = t;
            t = next;
        }
        t
    } else {
        let sign = if s < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        sign * (n as f64 * s.abs().acosh()).cosh()
    }
}

/// `T_n(s) / T_n(a)` for `a > 1`, stable when both would overflow.
fn chebyshev_ratio(n: usize, s: f64, a: f64) -> f64 {
    debug_assert!(a > 1.0);
    let nf = n as f64;
    let big = nf * a.acosh();
    if s.abs() <= 1.0 {
        // |T_n(s)| <= 1, so overflow of the denominator simply means ~0.
        return chebyshev_t(n, s) / big.cosh();
    }
    let sign = if s < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let small = nf * s.abs().acosh();
    // cosh(u)/cosh(v) = e^{u-v} (1 + e^{-2u}) / (1 + e^{-2v})
    sign * (small - big).exp() * (1.0 + (-2.0 * small).exp()) / (1.0 + (-2.0 * big).exp())
}

/// Shifted Chebyshev polynomial `T~_n(t) = T_n((l1+l2-2t)/(l1-l2)) / T_n((l1+l2)/(l1-l2))`,
/// normalised so that `T~_n(0) = 1`.
pub fn shifted_chebyshev_eval(n: usize, bounds: &SpectralBounds, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("Chebyshev degree must be at least 1".into()));
    }
    if bounds.is_degenerate() {
        return Err(Error::DegenerateBounds(bounds.lambda1));
    }
    let (l1, l2) = (bounds.lambda1, bounds.lambda2);
    let width = l1 - l2;
    let a = (l1 + l2) / width;
    let s = (l1 + l2 - 2.0 * t) / width;
    Ok(chebyshev_ratio(n, s, a))
}

/// `max_{t in [lambda2, lambda1]} |T~_n(t)| = 2 zeta^n / (1 + zeta^{2n})`
/// with `zeta = (sqrt(chi) - 1) / (sqrt(chi) + 1)`.
pub fn cheb_sup_bound(n: usize, chi: f64) -> f64 {
    let r = chi.sqrt();
    let zeta = (r - 1.0) / (r + 1.0);
    let zn = zeta.powi(n as i32);
    2.0 * zn / (1.0 + zn * zn)
}

/// Preconditioning polynomial `P(t) = 1 - T~_n(t)`.
pub fn precond_poly_eval(n: usize, bounds: &SpectralBounds, t: f64) -> Result<f64> {
    Ok(1.0 - shifted_chebyshev_eval(n, bounds, t)?)
}

/// Explicit `P(W) = V diag(P(lambda_i)) V^T`.
pub fn precond_matrix(n: usize, bounds: &SpectralBounds, spec: &Spectrum) -> Result<DenseMatrix> {
    // validate once so the closure below cannot fail
    precond_poly_eval(n, bounds, 0.0)?;
    spec.matrix_function(|l| precond_poly_eval(n, bounds, l).expect("validated bounds"))
}

/// Summary printed by the `spectral` CLI subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub lambda_max: f64,
    pub lambda_min_plus: f64,
    pub chi: f64,
    pub rank: usize,
    pub dim: usize,
}

pub fn summarize(spec: &Spectrum, rank_tol: f64) -> Result<SpectralSummary> {
    let b = spectral_bounds(spec, rank_tol)?;
    Ok(SpectralSummary {
        lambda_max: b.lambda1,
        lambda_min_plus: b.lambda2,
        chi: b.chi(),
        rank: spec.rank(rank_tol),
        dim: spec.dim(),
    })
}

/// Residual `max_i |W v_i - lambda_i v_i|` of an eigendecomposition.
pub fn eigen_residual(w: &DenseMatrix, spec: &Spectrum) -> f64 {
    (0..spec.dim())
        .map(|i| {
            let v = spec.eigenvector(i);
            let wv = w.mul_vec(&v);
            let l = spec.eigenvalues[i];
            wv.iter().zip(&v).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

/// `max |V^T V - I|` entrywise.
pub fn orthonormality_defect(spec: &Spectrum) -> f64 {
    let d = spec.dim();
    let cols: Vec<Vec<f64>> = (0..d).map(|i| spec.eigenvector(i)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&cols[i], &cols[j]) - target).abs());
        }
    }
    worst
}
