use std::sync::Arc;

use affineopt::operators::{DenseMatrix, InstrumentedMap, MatvecCounts};
use affineopt::vecops::dot;
use proptest::prelude::*;

fn matrix_strategy() -> impl Strategy<Value = DenseMatrix> {
    (1usize..8, 1usize..8).prop_flat_map(|(p, d)| {
        prop::collection::vec(-10.0..10.0f64, p * d).prop_map(move |v| DenseMatrix::from_row_major(p, d, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn adjoint_identity(k in matrix_strategy(), seed in any::<u64>()) {
        let mut rng = affineopt::experiments::Rng::new(seed);
        let x = rng.gaussian_vec(k.cols());
        let y = rng.gaussian_vec(k.rows());
        let mut map = InstrumentedMap::new(Arc::new(k));
        let lhs = dot(&map.apply(&x).unwrap(), &y);
        let rhs = dot(&x, &map.apply_transpose(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert_eq!(map.counter_snapshot(), MatvecCounts { k: 1, kt: 1 });
    }

    #[test]
    fn counters_track_every_application(k in matrix_strategy(), ops in prop::collection::vec(0u8..3, 0..20)) {
        let (p, d) = (k.rows(), k.cols());
        let mut map = InstrumentedMap::new(Arc::new(k));
        let mut expect = MatvecCounts::default();
        for op in ops {
            match op {
                0 => { map.apply(&vec![1.0; d]).unwrap(); expect.k += 1; }
                1 => { map.apply_transpose(&vec![1.0; p]).unwrap(); expect.kt += 1; }
                _ => { map.normal_residual(&vec![1.0; d], &vec![0.5; p]).unwrap(); expect.k += 1; expect.kt += 1; }
            }
        }
        prop_assert_eq!(map.counter_snapshot(), expect);
    }

    #[test]
    fn csv_round_trip_is_exact(k in matrix_strategy()) {
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let back = DenseMatrix::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, k);
    }

    #[test]
    fn gram_matches_transpose_product(k in matrix_strategy()) {
        let g = k.gram();
        let g2 = k.transpose().matmul(&k).unwrap();
        for (a, b) in g.as_slice().iter().zip(g2.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
