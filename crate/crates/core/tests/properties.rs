mod common;

use proptest::prelude::*;

use picardo::bench::{amari_index, gen_synthetic, DatasetSpec, Mixing};
use picardo::linalg::{expm_skew, polar_factor, sym_inv_sqrt, Mat, SkewSymmetricMatrix};
use picardo::{fastica_solve, solve, SolverConfig};

fn skew(n: usize) -> impl Strategy<Value = SkewSymmetricMatrix> {
    prop::collection::vec(-2.0..2.0f64, n * (n - 1) / 2)
        .prop_map(move |c| SkewSymmetricMatrix::from_upper_coords(n, &c).unwrap())
}

fn square(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| Mat::from_vec(n, n, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_of_skew_is_orthogonal(n in 2usize..8, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let e = common::random_skew(n, 1.5, &mut r);
        let q = expm_skew(&e).unwrap();
        prop_assert!(q.orthogonality_error() < 1e-12);
        prop_assert!((q.as_matrix() - common::expm_series(e.as_matrix())).norm() < 1e-10);
    }

    #[test]
    fn skew_storage_is_exact(e in skew(5)) {
        let m = e.as_matrix();
        prop_assert_eq!(m + m.transpose(), Mat::zeros(5, 5));
        let back = SkewSymmetricMatrix::from_upper_coords(5, &e.upper_coords()).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn polar_agrees_with_svd(c in square(4)) {
        prop_assume!(c.clone().svd(false, false).singular_values.min() > 1e-3);
        let q = polar_factor(&c).unwrap();
        prop_assert!((q.as_matrix() - common::polar_svd(&c)).norm() < 1e-9);
    }

    #[test]
    fn inverse_sqrt_whitens(c in square(4)) {
        let spd = &c * c.transpose() + Mat::identity(4, 4) * 0.05;
        let m = sym_inv_sqrt(&spd, 1e-14).unwrap().matrix;
        prop_assert!((&m - m.transpose()).amax() < 1e-12);
        prop_assert!((&m * &spd * &m - Mat::identity(4, 4)).amax() < 1e-9);
    }

    #[test]
    fn amari_vanishes_only_on_scaled_permutations(
        perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(),
        scales in prop::collection::vec(prop_oneof![-3.0..-0.1f64, 0.1..3.0f64], 4),
        noise in square(4),
    ) {
        let p = Mat::from_fn(4, 4, |i, j| if perm[i] == j { scales[i] } else { 0.0 });
        prop_assert!(amari_index(&p).unwrap() < 1e-15);
        prop_assume!(noise.amax() > 1e-3);
        let dirty = &p + noise * 0.1;
        prop_assert!(amari_index(&dirty).unwrap() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_iterate_stays_white(seed in any::<u64>(), max_iter in 0usize..30, fast in any::<bool>()) {
        let data = gen_synthetic(&DatasetSpec::uniform_laplace(2, 2, 2_000, seed)).unwrap();
        let config = SolverConfig { max_iter, ..SolverConfig::default() };
        let res = if fast { fastica_solve(&data.x, &config) } else { solve(&data.x, &config) }.unwrap();
        prop_assert!(res.y.whiteness_error() < 1e-8);
        prop_assert!(res.rotation.orthogonality_error() < 1e-10);
        prop_assert!(res.trace.n_steps() <= max_iter);
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), identity in any::<bool>()) {
        let spec = DatasetSpec {
            mixing: if identity { Mixing::Identity } else { Mixing::RandomGaussian },
            ..DatasetSpec::uniform_laplace(2, 1, 500, seed)
        };
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.a_true, b.a_true);
        let other = gen_synthetic(&DatasetSpec { seed: seed.wrapping_add(1), ..spec }).unwrap();
        prop_assert_ne!(other.s_true, a.s_true);
    }
}
