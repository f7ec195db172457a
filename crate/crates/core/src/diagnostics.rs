//! Quantities from the convergence analysis: the `Q` metric, Lyapunov
//! functions, per-step rate certificates and the per-iteration trace.
//!
//! Everything here reads the raw constraint matrix and objective, so
//! evaluating a diagnostic never moves a solver's oracle counters.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::DenseMatrix;
use crate::problem::{PrimalDualPair, ProblemInstance};
use crate::solvers::{AccelParams, SolverState};
use crate::spectral::{precond_poly_eval, SpectralBounds, Spectrum};
use crate::vecops::{dist_sq, dot, norm, norm_sq, sub};

/// Relative tolerance on `eta * theta * lambda_max <= 1`.
const METRIC_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    /// `|x^k - x*|^2`
    pub err_sq: Option<f64>,
    /// `D_F(x_f^k, x*)`
    pub bregman_f: Option<f64>,
    pub lyapunov: Option<f64>,
    pub kkt_stat: f64,
    pub kkt_feas: f64,
    pub grads: u64,
    #[serde(rename = "matvecs_K")]
    pub matvecs_k: u64,
    #[serde(rename = "matvecs_Kt")]
    pub matvecs_kt: u64,
}

impl TraceRecord {
    pub fn matvecs(&self) -> u64 {
        self.matvecs_k + self.matvecs_kt
    }
}

/// One record per iteration, in iteration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// First record with `err_sq <= level`.
    pub fn first_below(&self, level: f64) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.err_sq.is_some_and(|e| e <= level))
    }

    pub fn lyapunov_values(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.lyapunov).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        if self.records.is_empty() {
            wtr.write_record(TRACE_COLUMNS)?;
        }
        for r in &self.records {
            wtr.serialize(r)?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let records = rdr.deserialize().collect::<std::result::Result<Vec<TraceRecord>, _>>()?;
        Ok(Self { records })
    }
}

impl FromIterator<TraceRecord> for ConvergenceTrace {
    fn from_iter<I: IntoIterator<Item = TraceRecord>>(iter: I) -> Self {
        Self {
            records: iter.into_iter().collect(),
        }
    }
}

pub const TRACE_COLUMNS: [&str; 9] = [
    "k",
    "err_sq",
    "bregman_f",
    "lyapunov",
    "kkt_stat",
    "kkt_feas",
    "grads",
    "matvecs_K",
    "matvecs_Kt",
];

fn check_metric(eta: f64, theta: f64, alpha: f64, lambda_max: f64) -> Result<()> {
    if !(eta > 0.0 && theta > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidInput(format!(
            "metric needs positive eta, theta, alpha; got {eta}, {theta}, {alpha}"
        )));
    }
    let prod = eta * theta * lambda_max;
    if prod > 1.0 + METRIC_TOL {
        return Err(Error::IndefiniteMetric(prod));
    }
    Ok(())
}

/// `(1/eta)|x|^2 + (1/theta)|y|^2 - eta/(1 + eta alpha) |K^T y|^2`.
///
/// `lambda_max` must bound the largest eigenvalue of `K^T K` from above;
/// the metric is refused unless `eta theta lambda_max <= 1`.
pub fn q_norm_sq(eta: f64, theta: f64, alpha: f64, k: &DenseMatrix, lambda_max: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_metric(eta, theta, alpha, lambda_max)?;
    check_len("x", k.cols(), x)?;
    check_len("y", k.rows(), y)?;
    let kty = k.tr_mul_vec(y);
    Ok(norm_sq(x) / eta + norm_sq(y) / theta - eta / (1.0 + eta * alpha) * norm_sq(&kty))
}

/// The `(d+p) x (d+p)` matrix `diag((1/eta) I, (1/theta) I - eta/(1 + eta alpha) K K^T)`.
pub fn assemble_q(eta: f64, theta: f64, alpha: f64, k: &DenseMatrix) -> Result<DenseMatrix> {
    let (p, d) = (k.rows(), k.cols());
    let c = eta / (1.0 + eta * alpha);
    DenseMatrix::from_fn(d + p, d + p, |i, j| {
        if i < d || j < d {
            return if i == j { 1.0 / eta } else { 0.0 };
        }
        let (a, b) = (i - d, j - d);
        let kk: f64 = dot(k.row(a), k.row(b));
        let diag = if a == b { 1.0 / theta } else { 0.0 };
        diag - c * kk
    })
}

/// `2(1 - tau)/tau`, the weight of the Bregman term in the Lyapunov function.
pub fn bregman_weight(tau: f64) -> f64 {
    2.0 * (1.0 - tau) / tau
}

/// `Psi = |(x - x*, y - y*)|_Q^2 + 2(1 - tau)/tau D_F(x_f, x*)` for a state of
/// the accelerated method with dual in `Y`. Uses `params.bounds.lambda1` as
/// the bound on `lambda_max(W)`.
pub fn lyapunov(inst: &ProblemInstance, state: &SolverState, star: &PrimalDualPair, params: &AccelParams) -> Result<f64> {
    check_len("x", inst.dim(), &state.x)?;
    check_len("x_f", inst.dim(), &state.x_f)?;
    check_len("x*", inst.dim(), &star.x_star)?;
    check_len("y*", inst.n_constraints(), &star.y_star)?;
    let dx = sub(&state.x, &star.x_star);
    let dy = sub(&state.dual, &star.y_star);
    let q = q_norm_sq(params.eta, params.theta, params.alpha, inst.k(), params.bounds.lambda1, &dx, &dy)?;
    let weight = bregman_weight(params.tau);
    let breg = if weight == 0.0 {
        0.0
    } else {
        weight * inst.objective.bregman_unchecked(&state.x_f, &star.x_star)
    };
    Ok(q + breg)
}

/// Left side of the final-iterate bound shared by both accelerated methods:
/// `(1/eta)|x - x*|^2 + 2(1 - tau)/tau D_F(x_f, x*)`.
pub fn envelope_lhs(inst: &ProblemInstance, state: &SolverState, star: &PrimalDualPair, params: &AccelParams) -> Result<f64> {
    check_len("x", inst.dim(), &state.x)?;
    check_len("x_f", inst.dim(), &state.x_f)?;
    check_len("x*", inst.dim(), &star.x_star)?;
    let breg = inst.objective.bregman_unchecked(&state.x_f, &star.x_star);
    Ok(dist_sq(&state.x, &star.x_star) / params.eta + bregman_weight(params.tau) * breg)
}

/// `F(x_f) - F(x*) + <y*, K x_f - b>`, the restricted primal-dual gap.
pub fn restricted_gap(inst: &ProblemInstance, x_f: &[f64], star: &PrimalDualPair) -> Result<f64> {
    check_len("x_f", inst.dim(), x_f)?;
    let r: Vec<f64> = inst.k().mul_vec(x_f).iter().zip(inst.b()).map(|(a, b)| a - b).collect();
    Ok(inst.objective.value(x_f)? - inst.objective.value(&star.x_star)? + dot(&star.y_star, &r))
}

/// Defect of the fixed-point representation of one step of the accelerated
/// method with dual in `Y`:
/// `Q (x+ - x, y+ - y)` against
/// `(alpha (x_g - x+) - (grad F(x_g) + K^T y+), K x+ - b)`.
///
/// The difference is divided by the summed norms of the individual terms, so
/// the value stays meaningful once the step itself is at rounding level.
pub fn step_representation_defect(
    inst: &ProblemInstance,
    before: &SolverState,
    after: &SolverState,
    x_g: &[f64],
    grad_g: &[f64],
    params: &AccelParams,
) -> Result<f64> {
    let k = inst.k();
    check_len("x_g", inst.dim(), x_g)?;
    check_len("gradient", inst.dim(), grad_g)?;
    check_len("dual variable", inst.n_constraints(), &before.dual)?;
    check_len("dual variable", inst.n_constraints(), &after.dual)?;
    let (eta, theta, alpha) = (params.eta, params.theta, params.alpha);
    let dx = sub(&after.x, &before.x);
    let dy = sub(&after.dual, &before.dual);

    let c = eta / (1.0 + eta * alpha);
    let kkt_dy = k.mul_vec(&k.tr_mul_vec(&dy));
    let mut lhs: Vec<f64> = dx.iter().map(|v| v / eta).collect();
    lhs.extend(dy.iter().zip(&kkt_dy).map(|(a, b)| a / theta - c * b));

    let kty = k.tr_mul_vec(&after.dual);
    let kx = k.mul_vec(&after.x);
    let mut rhs: Vec<f64> = (0..inst.dim())
        .map(|i| alpha * (x_g[i] - after.x[i]) - (grad_g[i] + kty[i]))
        .collect();
    rhs.extend(kx.iter().zip(inst.b()).map(|(a, b)| a - b));

    let scale = norm(&dx) / eta
        + norm(&dy) / theta
        + c * norm(&kkt_dy)
        + alpha * (norm(x_g) + norm(&after.x))
        + norm(grad_g)
        + norm(&kty)
        + norm(&kx)
        + norm(inst.b());
    Ok(norm(&sub(&lhs, &rhs)) / scale.max(f64::MIN_POSITIVE))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateSource {
    Accelerated,
    Optimal,
    Bounds,
}

/// Guaranteed per-step contraction factor, in `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub rate_inverse: f64,
    pub source: RateSource,
}

impl RateCertificate {
    /// `rate_inverse^k`.
    pub fn after(&self, k: usize) -> f64 {
        self.rate_inverse.powf(k as f64)
    }
}

/// `(1 + min{1/sqrt(kappa chi), 1/chi}/4)^{-1}`.
pub fn rate_accelerated(kappa: f64, chi: f64) -> RateCertificate {
    let m = f64::min(1.0 / (kappa * chi).sqrt(), 1.0 / chi);
    RateCertificate {
        rate_inverse: 1.0 / (1.0 + 0.25 * m),
        source: RateSource::Accelerated,
    }
}

/// `(1 + min{15/19, sqrt(15/(19 kappa))}/4)^{-1}`.
pub fn rate_optimal(kappa: f64) -> RateCertificate {
    let m = f64::min(15.0 / 19.0, (15.0 / (19.0 * kappa)).sqrt());
    RateCertificate {
        rate_inverse: 1.0 / (1.0 + 0.25 * m),
        source: RateSource::Optimal,
    }
}

/// `(1 + min{sqrt(mu lambda2 / (L lambda1)), lambda2/lambda1}/4)^{-1}`.
pub fn rate_from_bounds(mu: f64, lip: f64, bounds: &SpectralBounds) -> RateCertificate {
    let ratio = bounds.lambda2 / bounds.lambda1;
    let m = f64::min((mu / lip * ratio).sqrt(), ratio);
    RateCertificate {
        rate_inverse: 1.0 / (1.0 + 0.25 * m),
        source: RateSource::Bounds,
    }
}

/// Checks `values[k+1] <= rate_inverse * values[k] * (1 + slack)` for every `k`.
/// Returns `None` when all steps pass, otherwise the first offending `k + 1`.
pub fn contraction_check(values: &[f64], cert: &RateCertificate, slack: f64) -> Option<usize> {
    values
        .windows(2)
        .position(|w| !(w[1] <= cert.rate_inverse * w[0] * (1.0 + slack)))
        .map(|k| k + 1)
}

/// Checks `values[k] <= rate_inverse^k * c0 * (1 + slack)`, with `values[0]`
/// belonging to iteration 0. Returns the first offending `k`, if any.
pub fn envelope_check(values: &[f64], cert: &RateCertificate, c0: f64, slack: f64) -> Option<usize> {
    let mut bound = c0 * (1.0 + slack);
    for (k, v) in values.iter().enumerate() {
        if !(*v <= bound) {
            return Some(k);
        }
        bound *= cert.rate_inverse;
    }
    None
}

/// Lyapunov function of the optimal method, evaluated in the equivalent
/// problem with constraint matrix `sqrt(P(W))` and dual `y = sqrt(P(W))^+ u`.
///
/// Built from a dense eigendecomposition of `W`, so restricted to small
/// instances. `u* = -grad F(x*)` lies in `range(W)`.
#[derive(Clone, Debug)]
pub struct TransformedMetric {
    eigenvectors: DenseMatrix,
    /// `P(lambda_i)` on positive eigenvalues, `None` on the kernel.
    weights: Vec<Option<f64>>,
    u_star: Vec<f64>,
}

impl TransformedMetric {
    /// `spec` is the eigendecomposition of `W = K^T K`; eigenvalues at most
    /// `rank_tol * lambda_max` are treated as kernel.
    pub fn new(
        inst: &ProblemInstance,
        spec: &Spectrum,
        star: &PrimalDualPair,
        params: &AccelParams,
        rank_tol: f64,
    ) -> Result<Self> {
        check_len("x*", inst.dim(), &star.x_star)?;
        if spec.dim() != inst.dim() {
            return Err(Error::DimensionMismatch {
                what: "spectrum",
                expected: inst.dim(),
                found: spec.dim(),
            });
        }
        let cut = rank_tol * spec.lambda_max();
        let bounds = params.bounds;
        let weights = spec
            .eigenvalues()
            .iter()
            .map(|&l| {
                if l <= cut {
                    return Ok(None);
                }
                let w = if bounds.is_degenerate() {
                    l / bounds.lambda1
                } else {
                    precond_poly_eval(params.n_inner, &bounds, l)?
                };
                if w <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "preconditioner vanishes at eigenvalue {l}; Chebyshev degree too small"
                    )));
                }
                Ok(Some(w))
            })
            .collect::<Result<Vec<_>>>()?;
        let u_star = inst.objective.grad(&star.x_star)?.iter().map(|g| -g).collect();
        Ok(Self {
            eigenvectors: spec.eigenvectors().clone(),
            weights,
            u_star,
        })
    }

    /// Largest value of `P` on the positive spectrum.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().flatten().fold(0.0, |a, &b| f64::max(a, b))
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().flatten().fold(f64::INFINITY, |a, &b| f64::min(a, b))
    }

    pub fn u_star(&self) -> &[f64] {
        &self.u_star
    }

    /// `(|y - y*|^2, |sqrt(P) (y - y*)|^2)` for the dual `u`.
    fn dual_terms(&self, u: &[f64]) -> (f64, f64) {
        let du = sub(u, &self.u_star);
        let coords = self.eigenvectors.tr_mul_vec(&du);
        let mut y_sq = 0.0;
        let mut ky_sq = 0.0;
        for (c, w) in coords.iter().zip(&self.weights) {
            if let Some(w) = w {
                y_sq += c * c / w;
                ky_sq += c * c;
            }
        }
        (y_sq, ky_sq)
    }

    fn check(&self, params: &AccelParams) -> Result<()> {
        check_metric(params.eta, params.theta, params.alpha, self.max_weight())
    }

    /// `Psi` at a state of the optimal method.
    pub fn lyapunov(&self, inst: &ProblemInstance, state: &SolverState, star: &PrimalDualPair, params: &AccelParams) -> Result<f64> {
        self.check(params)?;
        check_len("dual variable", inst.dim(), &state.dual)?;
        let (y_sq, ky_sq) = self.dual_terms(&state.dual);
        let (eta, theta, alpha) = (params.eta, params.theta, params.alpha);
        let q = dist_sq(&state.x, &star.x_star) / eta + y_sq / theta - eta / (1.0 + eta * alpha) * ky_sq;
        let breg = bregman_weight(params.tau) * inst.objective.bregman_unchecked(&state.x_f, &star.x_star);
        Ok(q + breg)
    }

    /// The constant bounding `Psi^0` from a start at `x0` with zero dual:
    /// `(1/eta)|x0 - x*|^2 + (1/theta)|y*|^2 + 2(1 - tau)/tau D_F(x0, x*)`.
    pub fn initial_constant(&self, inst: &ProblemInstance, x0: &[f64], star: &PrimalDualPair, params: &AccelParams) -> Result<f64> {
        self.check(params)?;
        check_len("x0", inst.dim(), x0)?;
        let (y_sq, _) = self.dual_terms(&vec![0.0; inst.dim()]);
        let breg = bregman_weight(params.tau) * inst.objective.bregman_unchecked(x0, &star.x_star);
        Ok(dist_sq(x0, &star.x_star) / params.eta + y_sq / params.theta + breg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_norm_block_cases() {
        let k = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        // lambda_max = 4; eta theta = 1/4
        let (eta, theta, alpha) = (0.5, 0.5, 1.0);
        let x = [1.0, 2.0];
        let q0 = q_norm_sq(eta, theta, alpha, &k, 4.0, &x, &[0.0, 0.0]).unwrap();
        assert_eq!(q0, 10.0);
        // y in ker(K^T)
        let q1 = q_norm_sq(eta, theta, alpha, &k, 4.0, &x, &[1.0, -1.0]).unwrap();
        assert_eq!(q1, 10.0 + 4.0);
        // y = (1, 1): K^T y = (2, 2), penalty 0.5/1.5 * 8
        let q2 = q_norm_sq(eta, theta, alpha, &k, 4.0, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((q2 - (4.0 - 8.0 / 3.0)).abs() < 1e-15);
        assert!(matches!(
            q_norm_sq(1.0, 1.0, 1.0, &k, 4.0, &x, &[0.0, 0.0]),
            Err(Error::IndefiniteMetric(_))
        ));
    }

    #[test]
    fn assembled_q_matches_closed_form() {
        let k = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.5, -1.0, 1.0]]).unwrap();
        let (eta, theta, alpha) = (0.3, 0.4, 2.0);
        let q = assemble_q(eta, theta, alpha, &k).unwrap();
        let v = [0.2, -1.0, 0.7, 1.5, -0.3];
        let qv = q.mul_vec(&v);
        let direct = q_norm_sq(eta, theta, alpha, &k, 0.0, &v[..3], &v[3..]).unwrap();
        assert!((dot(&v, &qv) - direct).abs() < 1e-12);
    }

    #[test]
    fn rate_values() {
        assert!((rate_accelerated(1.0, 1.0).rate_inverse - 0.8).abs() < 1e-15);
        assert!((rate_accelerated(4.0, 4.0).rate_inverse - 16.0 / 17.0).abs() < 1e-15);
        assert!((rate_optimal(1.0).rate_inverse - 76.0 / 91.0).abs() < 1e-15);
        let r = rate_optimal(1e4).rate_inverse;
        assert!((r - 1.0 / (1.0 + 0.25 * (15.0_f64 / 190_000.0).sqrt())).abs() < 1e-15);
        let b = SpectralBounds::new(4.0, 1.0).unwrap();
        assert_eq!(rate_from_bounds(1.0, 4.0, &b).rate_inverse, rate_accelerated(4.0, 4.0).rate_inverse);
    }

    #[test]
    fn contraction_and_envelope_checks() {
        let cert = rate_accelerated(1.0, 1.0);
        assert_eq!(contraction_check(&[0.0; 5], &cert, 1e-9), None);
        let geo: Vec<f64> = (0..10).map(|k| 3.0 * 0.8_f64.powi(k)).collect();
        assert_eq!(contraction_check(&geo, &cert, 1e-9), None);
        assert_eq!(envelope_check(&geo, &cert, 3.0, 1e-9), None);
        let bad = [1.0, 0.8, 0.7];
        assert_eq!(contraction_check(&bad, &cert, 1e-9), Some(2));
        assert_eq!(envelope_check(&bad, &cert, 1.0, 1e-9), Some(2));
        assert_eq!(contraction_check(&[1.0, f64::NAN], &cert, 1e-9), Some(1));
    }

    #[test]
    fn trace_csv_layout() {
        let mut t = ConvergenceTrace::default();
        t.push(TraceRecord {
            k: 1,
            err_sq: Some(0.5),
            bregman_f: None,
            lyapunov: None,
            kkt_stat: 1.0,
            kkt_feas: 0.25,
            grads: 1,
            matvecs_k: 1,
            matvecs_kt: 2,
        });
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "1,0.5,,,1.0,0.25,1,1,2");
        assert_eq!(ConvergenceTrace::read_csv(s.as_bytes()).unwrap(), t);

        let mut buf = Vec::new();
        ConvergenceTrace::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), TRACE_COLUMNS.join(","));
    }
}
