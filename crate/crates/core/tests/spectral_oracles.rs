use affineopt::experiments::{exact_bounds, gen_random_quadratic, Rng};
use affineopt::operators::DenseMatrix;
use affineopt::spectral::{
    cheb_sup_bound, chebyshev_t, eigen_residual, eigendecompose_symmetric, orthonormality_defect, precond_poly_eval,
    shifted_chebyshev_eval, SpectralBounds, DEFAULT_RANK_TOL,
};
use proptest::prelude::*;

#[test]
fn sup_bound_frozen_values() {
    // 2 zeta^N / (1 + zeta^(2N)), zeta = (sqrt(chi) - 1)/(sqrt(chi) + 1), N = ceil(sqrt(chi)),
    // evaluated in exact rational arithmetic
    let cases = [
        (4.0, 2, 0.219_512_195_121_951_22),
        (25.0, 5, 0.258_885_023_221_746_9),
        (100.0, 10, 0.264_088_760_371_491_9),
        (1e4, 100, 0.265_785_145_604_343_3),
    ];
    for (chi, n, expect) in cases {
        let v = cheb_sup_bound(n, chi);
        assert!((v - expect).abs() < 1e-13, "chi = {chi}: {v}");
        assert!(v < 0.266);
    }
}

#[test]
fn shifted_chebyshev_is_normalised_and_bounded() {
    let b = SpectralBounds::new(9.0, 1.0).unwrap();
    for n in 1..12 {
        assert!((shifted_chebyshev_eval(n, &b, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let sup = cheb_sup_bound(n, b.chi());
        for i in 0..=200 {
            let t = 1.0 + 8.0 * i as f64 / 200.0;
            assert!(shifted_chebyshev_eval(n, &b, t).unwrap().abs() <= sup * (1.0 + 1e-12));
        }
        // equioscillation reaches the bound at the interval end
        assert!((shifted_chebyshev_eval(n, &b, 9.0).unwrap().abs() - sup).abs() < 1e-12);
    }
}

#[test]
fn shifted_chebyshev_decreases_below_lambda2() {
    let b = SpectralBounds::new(50.0, 2.0).unwrap();
    for n in [1, 3, 8] {
        let mut prev = shifted_chebyshev_eval(n, &b, 0.0).unwrap();
        for i in 1..=100 {
            let v = shifted_chebyshev_eval(n, &b, 2.0 * i as f64 / 100.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}

#[test]
fn eigendecomposition_of_random_symmetric() {
    let mut rng = Rng::new(5);
    let g = DenseMatrix::from_fn(15, 15, |_, _| rng.gaussian()).unwrap();
    let w = g.gram();
    let spec = eigendecompose_symmetric(&w).unwrap();
    assert!(eigen_residual(&w, &spec) < 1e-10);
    assert!(orthonormality_defect(&spec) < 1e-12);
    assert!(spec.eigenvalues().windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn preconditioner_clusters_generated_spectra() {
    for (i, chi) in [4.0, 25.0, 100.0, 1e4].into_iter().enumerate() {
        let inst = gen_random_quadratic(30, 12, 2.0, chi, i as u64).unwrap();
        let (spec, bounds) = exact_bounds(&inst).unwrap();
        let n = bounds.min_chebyshev_degree();
        let cut = DEFAULT_RANK_TOL * spec.lambda_max();
        for &l in spec.eigenvalues().iter().filter(|l| **l > cut) {
            let p = precond_poly_eval(n, &bounds, l).unwrap();
            assert!((11.0 / 15.0 - 1e-9..=19.0 / 15.0 + 1e-9).contains(&p), "chi = {chi}, lambda = {l}: P = {p}");
        }
    }
}

proptest! {
    #[test]
    fn chebyshev_recurrence_matches_trig(n in 0usize..40, s in -1.0..1.0f64) {
        let expect = (n as f64 * s.acos()).cos();
        prop_assert!((chebyshev_t(n, s) - expect).abs() < 1e-11);
    }

    #[test]
    fn chebyshev_outside_matches_cosh(n in 0usize..30, s in 1.0..20.0f64) {
        let expect = (n as f64 * s.acosh()).cosh();
        prop_assert!((chebyshev_t(n, s) - expect).abs() <= 1e-12 * expect);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((chebyshev_t(n, -s) - sign * expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn sup_bound_below_threshold_at_degree(chi in 1.0001..1e6f64) {
        let n = (chi.sqrt()).ceil() as usize;
        prop_assert!(cheb_sup_bound(n, chi) < 0.266);
    }

    #[test]
    fn preconditioner_range_on_interval(l2 in 0.01..1.0f64, ratio in 1.001..1e4f64, t in 0.0..1.0f64) {
        let b = SpectralBounds::new(l2 * ratio, l2).unwrap();
        let n = b.min_chebyshev_degree();
        let x = l2 + t * (b.lambda1 - l2);
        let p = precond_poly_eval(n, &b, x).unwrap();
        prop_assert!((11.0 / 15.0..=19.0 / 15.0).contains(&p));
    }
}
