//! Randomized invariants across modules.

use nalgebra::DMatrix;
use proptest::collection::vec;
use proptest::prelude::*;

use crate::discrete::{
    local_average_ingest, project_h1, sigma_hat_discrete, sigma_hat_discrete_shifted, CaseTag, DiscreteSample,
    KernelSystem,
};
use crate::estimators::{gamma_hat_from_pairings, rho_qform, sampv_qform, sarcv, PairingSet};
use crate::inference::clt::Interval;
use crate::inference::normal::{normal_cdf, normal_quantile};
use crate::operator::{HSOperator, RankOneTestTensor};
use crate::semigroup::SemigroupSpec;
use crate::simulate::PathSample;
use crate::space::{truncate_basis, Band, GridFunction, SpaceSpec};

fn space_strategy() -> impl Strategy<Value = SpaceSpec> {
    prop_oneof![
        (2usize..24).prop_map(|j| SpaceSpec::l2(0.0, 1.0 + j as f64 / 10.0, j).unwrap()),
        (2usize..24).prop_map(|j| SpaceSpec::h1(j).unwrap()),
        (1usize..24).prop_map(|j| SpaceSpec::spectral(j).unwrap()),
    ]
}

fn function(space: SpaceSpec) -> impl Strategy<Value = GridFunction> {
    vec(-3.0f64..3.0, space.dim()).prop_map(move |c| GridFunction::from_vec(space, c).unwrap())
}

fn pair() -> impl Strategy<Value = (GridFunction, GridFunction)> {
    space_strategy().prop_flat_map(|s| (function(s), function(s)))
}

fn operator(space: SpaceSpec) -> impl Strategy<Value = HSOperator> {
    let j = space.dim();
    vec(-2.0f64..2.0, j * j).prop_map(move |k| HSOperator::new(space, DMatrix::from_vec(j, j, k), false).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_schwarz((f, g) in pair()) {
        prop_assert!(f.inner(&g).unwrap().abs() <= f.norm() * g.norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn hs_norm_is_frobenius_in_an_orthonormal_frame(
        (a, _) in space_strategy().prop_flat_map(|s| (operator(s), Just(s)))
    ) {
        let m = a.orthonormal_matrix().unwrap();
        prop_assert!(close(a.hs_norm(), m.norm(), 1e-9));
    }

    #[test]
    fn operator_adjoint_duality(
        (a, f, g) in space_strategy().prop_flat_map(|s| (operator(s), function(s), function(s)))
    ) {
        let lhs = a.apply(&f).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&a.adjoint().apply(&g).unwrap()).unwrap();
        prop_assert!(close(lhs, rhs, 1e-9));
    }

    #[test]
    fn shift_adjoint_duality_and_semigroup_law(
        j in 4usize..32, a in 0usize..40, b in 0usize..40, sobolev in any::<bool>(),
        seed in vec(-2.0f64..2.0, 33), other in vec(-2.0f64..2.0, 33),
    ) {
        let (space, sg) = if sobolev {
            (SpaceSpec::h1(j + 1).unwrap(), SemigroupSpec::SobolevShift)
        } else {
            (SpaceSpec::l2(0.0, 1.0, j).unwrap(), SemigroupSpec::NilpotentShift)
        };
        let d = space.dim();
        let f = GridFunction::from_vec(space, seed[..d].to_vec()).unwrap();
        let g = GridFunction::from_vec(space, other[..d].to_vec()).unwrap();
        let dx = 1.0 / j as f64;
        let (s, t) = (a as f64 * dx, b as f64 * dx);
        let lhs = sg.apply(s, &f).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&sg.apply_adjoint(s, &g).unwrap()).unwrap();
        prop_assert!(close(lhs, rhs, 1e-9));
        let two = sg.apply(s, &sg.apply(t, &f).unwrap()).unwrap();
        let one = sg.apply((a + b) as f64 * dx, &f).unwrap();
        prop_assert!(two.sub(&one).unwrap().norm() <= 1e-9 * (1.0 + f.norm()));
    }

    #[test]
    fn heat_semigroup_law(modes in 1usize..16, s in 0.0f64..0.2, t in 0.0f64..0.2, kappa in 0.01f64..2.0) {
        let space = SpaceSpec::spectral(modes).unwrap();
        let f = GridFunction::from_fn(space, |x| x * (1.0 - x) + 0.3).unwrap();
        let sg = SemigroupSpec::Heat { kappa };
        let two = sg.apply(s, &sg.apply(t, &f).unwrap()).unwrap();
        prop_assert!(two.sub(&sg.apply(s + t, &f).unwrap()).unwrap().norm() <= 1e-12);
    }

    #[test]
    fn gamma_hat_is_nonnegative(c in vec(-1e3f64..1e3, 2..60), dt in 1e-4f64..1.0) {
        prop_assert!(gamma_hat_from_pairings(&c, dt).unwrap() >= 0.0);
    }

    #[test]
    fn second_order_multipower_is_the_covariation(
        j in 2usize..12, n in 1usize..12, vals in vec(-2.0f64..2.0, 13 * 12), hv in vec(-1.0f64..1.0, 12),
        gv in vec(-1.0f64..1.0, 12),
    ) {
        let space = SpaceSpec::l2(0.0, 1.0, j).unwrap();
        let m = DMatrix::from_fn(j, n + 1, |r, c| vals[c * j + r]);
        let p = PathSample::new(space, m, 1.0 / n as f64, SemigroupSpec::Identity).unwrap();
        let h = GridFunction::from_vec(space, hv[..j].to_vec()).unwrap();
        let g = GridFunction::from_vec(space, gv[..j].to_vec()).unwrap();
        let est = sarcv(&p, &SemigroupSpec::Identity, 1.0).unwrap();
        let tt = RankOneTestTensor::new(vec![h.clone(), g.clone()]).unwrap();
        let s2 = sampv_qform(&p, &SemigroupSpec::Identity, &[2], &[tt], 1.0).unwrap();
        prop_assert!(close(s2, est.quad_form(&g, &h).unwrap(), 1e-10));
    }

    #[test]
    fn gaussian_moments_of_odd_order_vanish(m in 1usize..8, (a, f) in space_strategy().prop_flat_map(|s| (operator(s), function(s)))) {
        let sigma = a.compose(&a.adjoint()).unwrap();
        let v = rho_qform(&sigma, 2 * m - 1, &vec![f.clone(); 2 * m - 1]).unwrap();
        prop_assert_eq!(v, 0.0);
        let two = rho_qform(&sigma, 2, &[f.clone(), f.clone()]).unwrap();
        prop_assert!(close(two, sigma.quad_form(&f, &f).unwrap(), 1e-12));
    }

    #[test]
    fn reproducing_property_on_nodes(j in 2usize..30, k in 0usize..30, vals in vec(-2.0f64..2.0, 30)) {
        let k = k % j;
        let space = SpaceSpec::h1(j).unwrap();
        let f = GridFunction::from_node_values(space, &vals[..j]).unwrap();
        let x = k as f64 / (j - 1) as f64;
        let e = GridFunction::evaluation(space, x).unwrap();
        prop_assert!(close(f.inner(&e).unwrap(), vals[k], 1e-9));
    }

    #[test]
    fn kernel_interpolation_is_node_exact(n in 2usize..64, vals in vec(-5.0f64..5.0, 64)) {
        let ks = KernelSystem::new(n).unwrap();
        let f = project_h1(&vals[..n], &ks).unwrap();
        let nodes = f.node_values().unwrap();
        for jn in 0..n {
            prop_assert!((nodes[jn + 1] - vals[jn]).abs() <= 1e-9);
        }
    }

    #[test]
    fn case_a_is_the_unshifted_estimator(n in 1usize..8, m in 2usize..10, vals in vec(-2.0f64..2.0, 90)) {
        let d = DiscreteSample::new(DMatrix::from_fn(n + 1, m, |i, j| vals[i * m + j]), 0.1, 0.2, CaseTag::A).unwrap();
        prop_assert_eq!(sigma_hat_discrete(&d, CaseTag::A).unwrap(), sigma_hat_discrete_shifted(&d, 0).unwrap());
        let est = sigma_hat_discrete(&d, CaseTag::A).unwrap();
        prop_assert!(est.min_eigenvalue().unwrap() >= -1e-9 * (1.0 + est.hs_norm()));
    }

    #[test]
    fn local_averaging_is_idempotent(m in 1usize..10, r in 1usize..4, n in 1usize..4, vals in vec(-2.0f64..2.0, 200)) {
        let fine = SpaceSpec::l2(0.0, 1.0, m * r).unwrap();
        let values = DMatrix::from_fn(m * r, n + 1, |i, j| vals[(j * m * r + i) % 200]);
        let p = PathSample::new(fine, values, 0.5, SemigroupSpec::Identity).unwrap();
        let once = local_average_ingest(&p, m).unwrap();
        let coarse = SpaceSpec::l2(0.0, 1.0, m).unwrap();
        let back = PathSample::new(coarse, once.values().transpose(), 0.5, SemigroupSpec::Identity).unwrap();
        let twice = local_average_ingest(&back, m).unwrap();
        for (a, b) in once.values().iter().zip(twice.values().iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn spectral_bands_split_a_function(modes in 1usize..20, cut in 1usize..20, vals in vec(-2.0f64..2.0, 20)) {
        let cut = cut.min(modes);
        let space = SpaceSpec::spectral(modes).unwrap();
        let f = GridFunction::from_vec(space, vals[..modes].to_vec()).unwrap();
        let low = truncate_basis(&f, cut, Band::KeepLow).unwrap();
        let sum = if cut < modes {
            low.add(&truncate_basis(&f, cut + 1, Band::KeepHigh).unwrap()).unwrap()
        } else {
            low
        };
        prop_assert_eq!(sum, f);
    }

    #[test]
    fn intervals_widen_with_level(c in vec(0.0f64..1.0, 3..40), a in 0.5f64..0.9, b in 0.9f64..0.999) {
        let dt = 1.0 / c.len() as f64;
        let lo = Interval::from_pairings(&c, dt, a).unwrap();
        let hi = Interval::from_pairings(&c, dt, b).unwrap();
        prop_assert!(lo.lower <= lo.estimate && lo.estimate <= lo.upper);
        prop_assert!(hi.width() >= lo.width());
    }

    #[test]
    fn normal_quantile_inverts_the_cdf(x in -6.0f64..6.0) {
        prop_assert!((normal_quantile(normal_cdf(x)) - x).abs() <= 1e-6 * (1.0 + x.abs()));
    }
}

#[test]
fn pairing_counts_are_double_factorials() {
    let mut df = 1usize;
    for m in (2..=10).step_by(2) {
        df *= m - 1;
        assert_eq!(PairingSet::new(m).len(), df);
    }
}

#[test]
fn tensor_square_of_a_vector_has_its_squared_norm() {
    let s = SpaceSpec::h1(7).unwrap();
    let f = GridFunction::from_vec(s, vec![0.5, -1.0, 2.0, 0.0, 0.3, 0.1, -0.7]).unwrap();
    let t = HSOperator::tensor_square(&f);
    assert!((t.hs_norm() - f.norm().powi(2)).abs() < 1e-12);
}
