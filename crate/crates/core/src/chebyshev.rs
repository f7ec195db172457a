//! Chebyshev iteration for `K z = b`, used as a polynomial preconditioner.
//!
//! Starting from `z0`, `N` steps of the iteration give `z^N` with
//! `K^T (K z^N - b) = T~_N(W) K^T (K z0 - b)`. The map
//! `x -> x - z^N(x)` therefore equals `P(W)(x - x*)` with `P = 1 - T~_N`,
//! for any solution `x*` of `K x = b`, without knowing `x*`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::InstrumentedMap;
use crate::spectral::SpectralBounds;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevConfig {
    pub n_inner: usize,
    pub bounds: SpectralBounds,
}

impl ChebyshevConfig {
    pub fn new(n_inner: usize, bounds: SpectralBounds) -> Result<Self> {
        if n_inner == 0 {
            return Err(Error::InvalidInput("number of Chebyshev steps must be at least 1".into()));
        }
        Ok(Self { n_inner, bounds })
    }

    /// `N >= sqrt(chi)`, the degree condition under which `P(W)` has its
    /// positive spectrum in `[11/15, 19/15]`.
    pub fn meets_degree_condition(&self) -> bool {
        (self.n_inner as f64) >= self.bounds.chi().sqrt()
    }
}

/// Runs `N` Chebyshev steps from `z0` and returns `z^N`.
///
/// Costs exactly `N` applications of `K` and `N` of `K^T`.
pub fn chebyshev_iterate(z0: &[f64], map: &mut InstrumentedMap, b: &[f64], cfg: &ChebyshevConfig) -> Result<Vec<f64>> {
    check_len("Chebyshev start point", map.cols(), z0)?;
    check_len("right-hand side", map.rows(), b)?;
    if cfg.n_inner == 0 {
        return Err(Error::InvalidInput("number of Chebyshev steps must be at least 1".into()));
    }
    let SpectralBounds { lambda1, lambda2 } = cfg.bounds;
    if lambda1 == lambda2 {
        return Err(Error::DegenerateBounds(lambda1));
    }

    let rho = (lambda1 - lambda2).powi(2) / 16.0;
    let nu = 0.5 * (lambda1 + lambda2);
    let mut gamma = -nu / 2.0;

    let r0 = map.normal_residual(z0, b)?;
    let mut p: Vec<f64> = r0.iter().map(|r| -r / nu).collect();
    let mut z: Vec<f64> = z0.iter().zip(&p).map(|(a, b)| a + b).collect();

    for _ in 1..cfg.n_inner {
        let beta = rho / gamma;
        gamma = -(nu + beta);
        let r = map.normal_residual(&z, b)?;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = (ri + beta * *pi) / gamma;
        }
        for (zi, pi) in z.iter_mut().zip(&p) {
            *zi += pi;
        }
    }
    Ok(z)
}

/// `x - Chebyshev(x)`, which equals `P(W)(x - x*)`.
pub fn precond_residual(x: &[f64], map: &mut InstrumentedMap, b: &[f64], cfg: &ChebyshevConfig) -> Result<Vec<f64>> {
    let z = chebyshev_iterate(x, map, b, cfg)?;
    Ok(x.iter().zip(&z).map(|(a, b)| a - b).collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::operators::{DenseMatrix, MatvecCounts};
    use crate::spectral::{eigendecompose_gram, spectral_bounds, DEFAULT_RANK_TOL};

    fn small_map() -> InstrumentedMap {
        let k = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0, -1.0], vec![0.5, -1.0, 3.0, 0.0]]).unwrap();
        InstrumentedMap::new(Arc::new(k))
    }

    fn exact_cfg(map: &InstrumentedMap, n: usize) -> ChebyshevConfig {
        let spec = eigendecompose_gram(map.matrix()).unwrap();
        ChebyshevConfig::new(n, spectral_bounds(&spec, DEFAULT_RANK_TOL).unwrap()).unwrap()
    }

    #[test]
    fn feasible_start_is_a_fixed_point() {
        let mut map = small_map();
        let z0 = vec![1.0, -2.0, 0.5, 3.0];
        let b = map.matrix().mul_vec(&z0);
        let cfg = exact_cfg(&map, 5);
        let z = chebyshev_iterate(&z0, &mut map, &b, &cfg).unwrap();
        assert_eq!(z, z0);
        let r = precond_residual(&z0, &mut map, &b, &cfg).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn counts_exactly_n_pairs() {
        let mut map = small_map();
        let b = vec![1.0, 1.0];
        for n in [1, 2, 7] {
            map.reset();
            let cfg = exact_cfg(&map, n);
            chebyshev_iterate(&[0.0; 4], &mut map, &b, &cfg).unwrap();
            assert_eq!(map.counter_snapshot(), MatvecCounts { k: n as u64, kt: n as u64 });
        }
    }

    #[test]
    fn single_step_is_scaled_gradient_step() {
        let mut map = small_map();
        let cfg = exact_cfg(&map, 1);
        let nu = cfg.bounds.center();
        let z0 = [0.3, 0.1, -0.2, 1.0];
        let b = [1.0, -1.0];
        let z1 = chebyshev_iterate(&z0, &mut map, &b, &cfg).unwrap();
        let k = map.matrix().clone();
        let g0 = k.tr_mul_vec(&k.mul_vec(&z0).iter().zip(&b).map(|(a, b)| a - b).collect::<Vec<_>>());
        for i in 0..4 {
            assert!((z1[i] - (z0[i] - g0[i] / nu)).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_and_bad_inputs() {
        let mut map = small_map();
        let cfg = ChebyshevConfig {
            n_inner: 3,
            bounds: SpectralBounds::new(2.0, 2.0).unwrap(),
        };
        assert!(matches!(
            chebyshev_iterate(&[0.0; 4], &mut map, &[0.0; 2], &cfg),
            Err(Error::DegenerateBounds(_))
        ));
        let cfg = exact_cfg(&map, 3);
        assert!(chebyshev_iterate(&[0.0; 3], &mut map, &[0.0; 2], &cfg).is_err());
        assert!(chebyshev_iterate(&[0.0; 4], &mut map, &[0.0; 3], &cfg).is_err());
        assert!(ChebyshevConfig::new(0, cfg.bounds).is_err());
    }

    #[test]
    fn degree_condition_flag() {
        let b = SpectralBounds::new(100.0, 1.0).unwrap();
        assert!(ChebyshevConfig::new(10, b).unwrap().meets_degree_condition());
        assert!(!ChebyshevConfig::new(9, b).unwrap().meets_degree_condition());
    }
}
