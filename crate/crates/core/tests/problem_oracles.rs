use affineopt::experiments::{gen_random_quadratic, smoothed_l1_objective};
use affineopt::operators::DenseMatrix;
use affineopt::problem::{solve_kkt_direct, AffineConstraint, Objective, ProblemInstance, QuadraticObjective};
use affineopt::diagnostics::restricted_gap;
use affineopt::vecops::{dist_sq, norm};
use proptest::prelude::*;

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, d)
}

#[test]
fn smoothed_l1_scalar_values() {
    let obj = smoothed_l1_objective(2, 0.5).unwrap();
    // f(0) = e, f'(0) = 0
    assert_eq!(obj.value(&[0.0, 0.0]).unwrap(), 1.0);
    assert_eq!(obj.grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    // t = 1.2, e = 0.5: sqrt(1.44 + 0.25) = 1.3, f = 1.3 + 0.36, f' = 1.2/1.3 + 0.6
    let v = obj.value(&[1.2, 0.0]).unwrap();
    assert!((v - (1.3 + 0.36 + 0.5)).abs() < 1e-15);
    let g = obj.grad(&[1.2, -1.2]).unwrap();
    assert!((g[0] - (1.2 / 1.3 + 0.6)).abs() < 1e-15);
    assert_eq!(g[1], -g[0]);
    assert_eq!((obj.mu(), obj.lip()), (0.5, 2.5));
}

#[test]
fn smoothed_l1_gradient_matches_central_differences() {
    let obj = smoothed_l1_objective(1, 0.1).unwrap();
    let mut rng = affineopt::experiments::Rng::new(11);
    for _ in 0..100 {
        let t = 6.0 * rng.uniform() - 3.0;
        let h = 1e-5;
        let fd = (obj.value(&[t + h]).unwrap() - obj.value(&[t - h]).unwrap()) / (2.0 * h);
        let g = obj.grad(&[t]).unwrap()[0];
        assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "t = {t}: {fd} vs {g}");
    }
}

#[test]
fn kkt_direct_on_random_quadratics() {
    for seed in 0..5 {
        let inst = gen_random_quadratic(10, 4, 20.0, 10.0, seed).unwrap();
        let star = solve_kkt_direct(&inst).unwrap();
        let r = inst.kkt_residual(&star.x_star, &star.y_star).unwrap();
        assert!(r.max() < 1e-10, "{r:?}");
    }
}

#[test]
fn rank_deficient_constraint_has_range_dual() {
    // second row duplicates the first
    let k = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![1.0, 2.0, 0.0]]).unwrap();
    let obj = Objective::Quadratic(QuadraticObjective::from_matrix(DenseMatrix::identity(3).unwrap(), vec![0.0; 3]).unwrap());
    let inst = ProblemInstance::new(obj, AffineConstraint::new(k, vec![5.0, 5.0]).unwrap()).unwrap();
    let star = solve_kkt_direct(&inst).unwrap();
    // minimum-norm solution of x1 + 2 x2 = 5 is (1, 2, 0); y1 = y2 by range(K)
    assert!(dist_sq(&star.x_star, &[1.0, 2.0, 0.0]) < 1e-20);
    assert!((star.y_star[0] - star.y_star[1]).abs() < 1e-12);
    assert!((star.y_star[0] + 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bregman_two_sided_bounds(seed in 0u64..1000, x in vec_strategy(6), y in vec_strategy(6), e in 0.05..2.0f64) {
        let quad = gen_random_quadratic(6, 2, 30.0, 4.0, seed).unwrap().objective;
        let sl1 = smoothed_l1_objective(6, e).unwrap();
        for obj in [quad, sl1] {
            let dsq = dist_sq(&x, &y);
            let d = obj.bregman(&x, &y).unwrap();
            let tol = 1e-12 * (1.0 + dsq);
            prop_assert!(d >= 0.5 * obj.mu() * dsq - tol, "{} below lower bound", obj.kind());
            prop_assert!(d <= 0.5 * obj.lip() * dsq + tol, "{} above upper bound", obj.kind());
        }
    }

    #[test]
    fn bregman_matches_definition(x in vec_strategy(4), y in vec_strategy(4), e in 0.1..2.0f64) {
        let obj = smoothed_l1_objective(4, e).unwrap();
        let g = obj.grad(&y).unwrap();
        let lin: f64 = g.iter().zip(x.iter().zip(&y)).map(|(g, (a, b))| g * (a - b)).sum();
        let def = obj.value(&x).unwrap() - obj.value(&y).unwrap() - lin;
        let d = obj.bregman(&x, &y).unwrap();
        prop_assert!((d - def).abs() <= 1e-10 * (1.0 + obj.value(&x).unwrap()));
    }

    #[test]
    fn restricted_gap_equals_bregman(seed in 0u64..500, xf in vec_strategy(8)) {
        let inst = gen_random_quadratic(8, 3, 10.0, 5.0, seed).unwrap();
        let star = solve_kkt_direct(&inst).unwrap();
        let gap = restricted_gap(&inst, &xf, &star).unwrap();
        let d = inst.objective.bregman(&xf, &star.x_star).unwrap();
        prop_assert!((gap - d).abs() <= 1e-10 * (1.0 + d.abs() + norm(&xf).powi(2)));
    }

    #[test]
    fn kkt_residual_vanishes_only_at_solution(seed in 0u64..500, shift in 1e-3..1.0f64) {
        let inst = gen_random_quadratic(7, 3, 5.0, 3.0, seed).unwrap();
        let star = solve_kkt_direct(&inst).unwrap();
        let mut x = star.x_star.clone();
        x[0] += shift;
        let r = inst.kkt_residual(&x, &star.y_star).unwrap();
        prop_assert!(r.max() > 0.0);
        prop_assert!(r.stationarity >= inst.objective.mu() * shift * (1.0 - 1e-9) - 1e-12);
    }
}
