#![allow(dead_code)]

use affineopt::operators::DenseMatrix;
use affineopt::problem::{PrimalDualPair, ProblemInstance};
use affineopt::solvers::AccelParams;
use affineopt::spectral::{self, Spectrum, DEFAULT_RANK_TOL};

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// `P(W)` assembled from a dense eigendecomposition, or `W / lambda1` for
/// equal bounds.
pub fn explicit_precond(spec: &Spectrum, params: &AccelParams) -> DenseMatrix {
    let b = params.bounds;
    if b.is_degenerate() {
        spec.matrix_function(|l| l / b.lambda1).unwrap()
    } else {
        let cut = DEFAULT_RANK_TOL * spec.lambda_max();
        spec.matrix_function(|l| {
            if l <= cut {
                0.0
            } else {
                spectral::precond_poly_eval(params.n_inner, &b, l).unwrap()
            }
        })
        .unwrap()
    }
}

/// State of the reference recursion.
#[derive(Clone, Debug)]
pub struct RefState {
    pub x: Vec<f64>,
    pub x_f: Vec<f64>,
    pub u: Vec<f64>,
}

/// The accelerated method applied to the constraint `sqrt(P) x = sqrt(P) x*`
/// after the change of variable `u = sqrt(P) y`, with `P` an explicit matrix:
/// `u+ = u + theta P (x_half - x*)`, `x+ = (x - eta(grad F(x_g) - alpha x_g + u+)) / (1 + eta alpha)`.
pub fn reference_step(inst: &ProblemInstance, p: &DenseMatrix, star: &PrimalDualPair, prm: &AccelParams, s: &mut RefState) {
    let d = s.x.len();
    let (tau, eta, theta, alpha) = (prm.tau, prm.eta, prm.theta, prm.alpha);
    let x_g: Vec<f64> = (0..d).map(|i| tau * s.x[i] + (1.0 - tau) * s.x_f[i]).collect();
    let g = inst.objective.grad(&x_g).unwrap();
    let damp = 1.0 / (1.0 + eta * alpha);
    let x_half: Vec<f64> = (0..d)
        .map(|i| damp * (s.x[i] - eta * (g[i] - alpha * x_g[i] + s.u[i])))
        .collect();
    let diff: Vec<f64> = (0..d).map(|i| x_half[i] - star.x_star[i]).collect();
    let pd = p.mul_vec(&diff);
    for (u, v) in s.u.iter_mut().zip(&pd) {
        *u += theta * v;
    }
    let x_new: Vec<f64> = (0..d)
        .map(|i| damp * (s.x[i] - eta * (g[i] - alpha * x_g[i] + s.u[i])))
        .collect();
    let c = 2.0 * tau / (2.0 - tau);
    s.x_f = (0..d).map(|i| x_g[i] + c * (x_new[i] - s.x[i])).collect();
    s.x = x_new;
}
