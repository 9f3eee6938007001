mod common;

use cise_core::solver::{orthonormality_error, penalized_objective, CiseOptions, CiseProblem};
use cise_core::{
    adaptive_weights, cise_fit, osdre, penalty_rho, subspace_distance, KernelMeta, KernelPair, MethodTag,
    PenaltyWeights, SymMatrix,
};
use nalgebra::{dmatrix, DMatrix};
use proptest::prelude::*;

use common::{generalized_eigen, normal_matrix, random_orthogonal, random_psd, random_spd, rng, span_distance};

fn random_pair(seed: u64, p: usize) -> KernelPair {
    let mut r = rng(seed);
    let m = random_psd(&mut r, p, p);
    let n = random_spd(&mut r, p);
    KernelPair::new(SymMatrix::new(m).unwrap(), SymMatrix::new(n).unwrap(), MethodTag::Pca, KernelMeta::None).unwrap()
}

fn elementwise_l1(v: &DMatrix<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn pd() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=10).prop_flat_map(|p| (Just(p), 1usize..=p.min(3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn zero_penalty_reproduces_osdre(seed in any::<u64>(), (p, d) in pd()) {
        let kp = random_pair(seed, p);
        let est = cise_fit(&kp, d, &PenaltyWeights::zeros(p), &CiseOptions::default()).unwrap();
        let base = osdre(&kp, d).unwrap();
        prop_assert_eq!(est.active.len(), p);
        prop_assert!(subspace_distance(est.basis.matrix(), base.basis.matrix()).unwrap() < 1e-8);
    }

    #[test]
    fn fitted_bases_are_n_orthonormal(seed in any::<u64>(), (p, d) in pd(), theta in 0.0f64..0.5) {
        let kp = random_pair(seed, p);
        let w = adaptive_weights(&osdre(&kp, d).unwrap().basis, theta, 0.5).unwrap();
        if let Ok(est) = cise_fit(&kp, d, &w, &CiseOptions::default()) {
            prop_assert!(orthonormality_error(est.basis.matrix(), &kp.nn) < 1e-8);
            let zero_rows = (0..p).filter(|i| !est.active.contains(i));
            for i in zero_rows {
                prop_assert!(est.basis.matrix().row(i).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn descent_on_fixed_active_sets(seed in any::<u64>(), (p, d) in pd(), theta in 0.0f64..0.5) {
        let kp = random_pair(seed, p);
        let w = adaptive_weights(&osdre(&kp, d).unwrap().basis, theta, 0.5).unwrap();
        if let Ok(est) = cise_fit(&kp, d, &w, &CiseOptions::default()) {
            for pair in est.trace.windows(2) {
                if pair[0].active == pair[1].active && !pair[1].dropped {
                    prop_assert!(pair[1].objective <= pair[0].objective + 1e-10, "{:?}", pair);
                }
            }
        }
    }

    #[test]
    fn fit_is_invariant_to_rotating_the_start(seed in any::<u64>(), (p, d) in pd(), theta in 0.01f64..0.3) {
        let kp = random_pair(seed, p);
        let problem = CiseProblem::new(&kp).unwrap();
        let start = problem.osdre(d).unwrap();
        let w = adaptive_weights(&start.basis, theta, 0.5).unwrap();
        let o = random_orthogonal(&mut rng(seed.wrapping_add(1)), d);
        let rotated = start.basis.matrix() * o;
        let opts = CiseOptions::default();
        match (problem.fit(d, &w, &opts, Some(start.basis.matrix())), problem.fit(d, &w, &opts, Some(&rotated))) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.active, &b.active);
                prop_assert!(subspace_distance(a.basis.matrix(), b.basis.matrix()).unwrap() < 1e-8);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "outcomes differ: {:?} vs {:?}", a.map(|e| e.active), b.map(|e| e.active)),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn osdre_matches_generalized_eigen_oracle(seed in any::<u64>(), p in 1usize..=6, d_raw in 1usize..=6) {
        let d = d_raw.min(p);
        let kp = random_pair(seed, p);
        let fit = osdre(&kp, d).unwrap();
        let (vals, delta) = generalized_eigen(kp.m.as_matrix(), kp.nn.as_matrix(), d);
        prop_assert!(span_distance(fit.basis.matrix(), &delta) < 1e-8);
        for (a, b) in fit.eigenvalues.iter().zip(&vals) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn group_penalty_is_rotation_invariant(seed in any::<u64>(), p in 1usize..10, d in 1usize..5) {
        let mut r = rng(seed);
        let v = normal_matrix(&mut r, p, d);
        let o = random_orthogonal(&mut r, d);
        let theta: Vec<f64> = (0..p).map(|i| 0.1 + i as f64 * 0.3).collect();
        let w = PenaltyWeights::new(theta).unwrap();
        let vo = &v * &o;
        prop_assert!((penalty_rho(&vo, &w) - penalty_rho(&v, &w)).abs() < 1e-12 * (1.0 + penalty_rho(&v, &w)));
        let m = SymMatrix::new(random_psd(&mut r, p, p)).unwrap();
        let (q0, q1) = (penalized_objective(&m, &v, &w), penalized_objective(&m, &vo, &w));
        prop_assert!((q0 - q1).abs() < 1e-10 * (1.0 + q0.abs()));
    }
}

#[test]
fn elementwise_l1_is_coordinate_dependent() {
    let v = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let o = dmatrix![c, -c; c, c];
    assert!((elementwise_l1(&(&v * &o)) - elementwise_l1(&v)).abs() > 0.8);
    let w = PenaltyWeights::new(vec![1.0; 3]).unwrap();
    assert!((penalty_rho(&(&v * &o), &w) - penalty_rho(&v, &w)).abs() < 1e-15);

    // Generic random bases: the elementwise penalty moves under rotation.
    let mut r = rng(11);
    let moved = (0..200)
        .filter(|_| {
            let v = normal_matrix(&mut r, 6, 2);
            let o = random_orthogonal(&mut r, 2);
            (elementwise_l1(&(&v * o)) - elementwise_l1(&v)).abs() > 1e-6
        })
        .count();
    assert!(moved > 190);
}

/// Minimizes `−vᵀMv + Σθ_i|v_i|` over `vᵀNv = 1` in two dimensions by scanning the angle.
fn brute_force_line(m: &DMatrix<f64>, n: &DMatrix<f64>, theta: [f64; 2]) -> DMatrix<f64> {
    let q = |phi: f64| {
        let u = dmatrix![phi.cos(); phi.sin()];
        let v = &u / (u.transpose() * n * &u)[(0, 0)].sqrt();
        let obj = -(v.transpose() * m * &v)[(0, 0)] + theta[0] * v[0].abs() + theta[1] * v[1].abs();
        (obj, v)
    };
    let steps = 200_000;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..steps {
        let phi = std::f64::consts::PI * k as f64 / steps as f64;
        let (obj, _) = q(phi);
        if obj < best.0 {
            best = (obj, phi);
        }
    }
    // Golden-section polish around the best grid angle.
    let h = std::f64::consts::PI / steps as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if q(c).0 < q(d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    q((a + b) / 2.0).1
}

#[test]
fn reduced_problem_oracle() {
    // M lives on the first two coordinates; N couples them to the last two.
    let m = dmatrix![
        2.0, 0.8, 0.0, 0.0;
        0.8, 1.0, 0.0, 0.0;
        0.0, 0.0, 0.0, 0.0;
        0.0, 0.0, 0.0, 0.0
    ];
    let n = dmatrix![
        1.0, 0.3, 0.4, 0.1;
        0.3, 1.0, 0.2, 0.3;
        0.4, 0.2, 1.0, 0.25;
        0.1, 0.3, 0.25, 1.0
    ];
    let kp = KernelPair::new(SymMatrix::new(m.clone()).unwrap(), SymMatrix::new(n.clone()).unwrap(), MethodTag::Pca, KernelMeta::None)
        .unwrap();

    // Unpenalized, the last two rows are nonzero.
    let free = osdre(&kp, 1).unwrap();
    assert!(free.basis.matrix().rows(2, 2).norm() > 0.1);

    for t in [0.0, 0.02, 0.05, 0.1] {
        let w = PenaltyWeights::new(vec![t, t, 5.0, 5.0]).unwrap();
        let est = cise_fit(&kp, 1, &w, &CiseOptions { max_iter: 5000, ..CiseOptions::default() }).unwrap();
        assert!(est.converged, "t = {t}");
        assert_eq!(est.active, vec![0, 1], "t = {t}");
        assert!(est.basis.matrix().rows(2, 2).iter().all(|&x| x == 0.0));

        let sub = brute_force_line(&m.view((0, 0), (2, 2)).into_owned(), &n.view((0, 0), (2, 2)).into_owned(), [t, t]);
        let got = est.basis.matrix().rows(0, 2).into_owned();
        assert!(subspace_distance(&got, &sub).unwrap() < 1e-6, "t = {t}");
    }
}
