//! Property tests for invariants that span several modules.

use framecs_core::drip::{exact_drip, support_delta};
use framecs_core::frames::{best_s_term, coherence_of};
use framecs_core::guarantees::{
    certify, error_bound, q_admissible, q_zero, rho_general, rho_special, threshold_general, threshold_special,
    Regime,
};
use framecs_core::harness::{run_experiment, ExperimentConfig, WithinBound};
use framecs_core::numerics::{least_squares_min_norm, operator_norm, orthonormal_range_basis, sym_eig_extremes};
use framecs_core::rng;
use framecs_core::sensing::{gen_gaussian, measure};
use framecs_core::solvers::{objective, project_l2_ball, solve_p0_oracle, solve_p1};
use framecs_core::numerics::EIG_TOL;
use framecs_core::{DenseMatrix, NoiseMode, Program, SolverOptions, TightFrame, Vector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(len: usize, g: &mut impl Rng) -> Vector {
    Vector::from_fn(len, |_, _| Distribution::<f64>::sample(&StandardNormal, g))
}

fn sparse_synthesis(frame: &TightFrame, s: usize, g: &mut impl Rng) -> Vector {
    let mut v = Vector::zeros(frame.d());
    for i in rand::seq::index::sample(g, frame.d(), s) {
        v[i] = Distribution::<f64>::sample(&StandardNormal, g);
    }
    frame.synthesize(&v).unwrap()
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn range_basis_is_orthonormal_and_spans(rows in 1usize..9, cols in 1usize..9, rank in 1usize..9, seed in any::<u64>()) {
        let rank = rank.min(rows).min(cols);
        let a = gen_gaussian(rows, rank, seed).unwrap() * gen_gaussian(rank, cols, seed ^ 1).unwrap();
        let b = orthonormal_range_basis(&a, 1e-10);
        prop_assert_eq!(b.ncols(), rank);
        let eye = DenseMatrix::identity(rank, rank);
        prop_assert!((b.tr_mul(&b) - eye).amax() <= 1e-9);
        prop_assert!((&a - &b * b.tr_mul(&a)).norm() <= 1e-9 * a.norm());
    }

    #[test]
    fn min_norm_least_squares_beats_perturbations(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
        let a = gen_gaussian(rows, cols, seed).unwrap();
        let mut g = rng::stream(seed, 5);
        let b = gaussian(rows, &mut g);
        let (x, r) = least_squares_min_norm(&a, &b, 1e-10).unwrap();
        for _ in 0..200 {
            let p = &x + gaussian(cols, &mut g) * 1e-3;
            prop_assert!(r <= (&a * p - &b).norm() + 1e-12);
        }
    }

    #[test]
    fn power_iteration_matches_eigen_extremes(rows in 1usize..10, cols in 1usize..10, seed in any::<u64>()) {
        let a = gen_gaussian(rows, cols, seed).unwrap();
        let (_, hi) = sym_eig_extremes(&a.tr_mul(&a), EIG_TOL).unwrap();
        let est = operator_norm(&a, 500, seed);
        prop_assert!(est <= hi.sqrt() * (1.0 + 1e-12));
        prop_assert!((est - hi.sqrt()).abs() <= 1e-5 * hi.sqrt());
    }

    #[test]
    fn random_frames_are_parseval(n in 2usize..10, extra in 0usize..10, seed in any::<u64>()) {
        let frame = TightFrame::random(n, n + extra, seed).unwrap();
        let mut g = rng::stream(seed, 1);
        for _ in 0..50 {
            let f = gaussian(n, &mut g);
            let x = frame.analysis(&f).unwrap();
            prop_assert!((x.norm() - f.norm()).abs() <= 1e-8 * f.norm());
            prop_assert!((frame.synthesize(&x).unwrap() - &f).norm() <= 1e-8 * f.norm());
        }
        let c = coherence_of(frame.matrix()).unwrap();
        let scaled = coherence_of(&(frame.matrix() * 3.7)).unwrap();
        prop_assert!((c - scaled).abs() <= 1e-14);
    }

    #[test]
    fn best_s_term_beats_every_support(len in 1usize..10, s in 0usize..10, seed in any::<u64>()) {
        let s = s.min(len);
        let mut g = rng::stream(seed, 2);
        let x = gaussian(len, &mut g);
        let best = best_s_term(&x, s, 1.0).unwrap();
        let err = (&x - &best.x_best).norm();
        for mask in 0u32..(1 << len) {
            if mask.count_ones() as usize != s {
                continue;
            }
            let xs = Vector::from_fn(len, |i, _| if mask >> i & 1 == 1 { x[i] } else { 0.0 });
            prop_assert!(err <= (&x - xs).norm() + 1e-15);
        }
    }

    #[test]
    fn measurement_is_reproducible(m in 1usize..8, n in 1usize..8, eps in 0.001f64..1.0, seed in any::<u64>()) {
        let a = gen_gaussian(m, n, seed).unwrap();
        let mut g = rng::stream(seed, 3);
        let f = gaussian(n, &mut g);
        let model = measure(&a, &f, NoiseMode::Bounded { eps }, seed).unwrap();
        let z = model.z.as_ref().unwrap();
        prop_assert_eq!(&(&a * &f + z), &model.y);
        prop_assert!((z.norm() - eps).abs() <= 1e-12 * eps);
    }

    #[test]
    fn drip_is_monotone_and_witnessed(n in 3usize..7, extra in 0usize..3, m in 2usize..8, seed in any::<u64>()) {
        let frame = TightFrame::random(n, n + extra, seed).unwrap();
        let a = gen_gaussian(m, n, seed ^ 7).unwrap();
        let mut prev = 0.0;
        for s in 1..=4usize.min(n + extra) {
            let r = exact_drip(&a, &frame, s).unwrap();
            prop_assert!(r.delta >= prev - 1e-12);
            prev = r.delta;
            prop_assert!((support_delta(&a, &frame, &r.witness_support) - r.delta).abs() <= 1e-10);
        }
    }

    #[test]
    fn inner_products_obey_the_drip_bound(n in 3usize..7, extra in 0usize..3, s in 1usize..3, seed in any::<u64>()) {
        let d = n + extra;
        let frame = TightFrame::random(n, d, seed).unwrap();
        let a = gen_gaussian(2 * n, n, seed ^ 9).unwrap();
        let delta = exact_drip(&a, &frame, 2 * s).unwrap().delta;
        let mut g = rng::stream(seed, 4);
        for _ in 0..200 {
            let (du, dv) = (sparse_synthesis(&frame, s, &mut g), sparse_synthesis(&frame, s, &mut g));
            let lhs = (&a * &du).dot(&(&a * &dv));
            prop_assert!(lhs <= delta * du.norm() * dv.norm() + du.dot(&dv) + 1e-8);
        }
    }

    #[test]
    fn certificates_match_their_preconditions(delta in 0.0f64..1.0, n in 1usize..20, s in 1usize..6, q in 0.05f64..1.0) {
        for c in certify(delta, n, s, Some(q)) {
            let expected = match c.regime {
                Regime::GeneralL1 => delta < threshold_general(),
                Regime::SpecialNLe4s => n <= 4 * s && delta < threshold_special(),
                Regime::Lq => q_admissible(delta, q).unwrap(),
            };
            prop_assert_eq!(c.applicable, expected, "{:?}", c);
            prop_assert_eq!(c.bound(0.1, 0.1).is_some(), c.applicable);
        }
    }
}

#[test]
fn rho_is_increasing_and_q_zero_nonincreasing() {
    let grid = |hi: f64| (0..1000).map(move |i| hi * i as f64 / 1000.0);
    let mut prev = -1.0;
    for d in grid(threshold_general()) {
        let r = rho_general(d).unwrap();
        assert!(r > prev, "rho_general not increasing at {d}");
        prev = r;
    }
    let mut prev = -1.0;
    for d in grid(threshold_special()) {
        let r = rho_special(d).unwrap();
        assert!(r > prev, "rho_special not increasing at {d}");
        prev = r;
    }
    let mut prev = f64::INFINITY;
    for d in grid(0.5) {
        let q0 = q_zero(d).unwrap();
        assert!(q0 <= prev + 1e-12, "q_zero increases at {d}");
        prev = q0;
    }
}

fn noisy_instance(seed: u64, eps: f64) -> (TightFrame, framecs_core::SensingModel) {
    let frame = TightFrame::random(6, 9, seed).unwrap();
    let a = gen_gaussian(5, 6, seed + 100).unwrap();
    let mut x = Vector::zeros(9);
    x[(seed % 9) as usize] = 1.0;
    x[((seed + 4) % 9) as usize] = -0.7;
    let f = frame.synthesize(&x).unwrap();
    let noise = if eps > 0.0 { NoiseMode::Bounded { eps } } else { NoiseMode::None };
    let model = measure(&a, &f, noise, seed).unwrap();
    (frame, model)
}

#[test]
fn l1_results_are_feasible_optimal_and_beat_the_truth() {
    let opts = SolverOptions::default();
    for seed in 0..8 {
        for eps in [0.0, 0.05] {
            let (frame, model) = noisy_instance(seed, eps);
            let res = solve_p1(&frame, &model, &opts).unwrap();
            assert!(res.converged, "seed {seed} eps {eps}");
            assert!(res.residual <= eps * (1.0 + 1e-6) + 1e-9);
            let d_t = frame.matrix().transpose();
            let truth = model.f_true.as_ref().unwrap();
            assert!(res.objective <= objective(&d_t, truth, Program::P1) + 1e-6);

            // Perturbations pulled back into the constraint set never do better.
            let null = framecs_core::numerics::null_space_basis(&model.a, 1e-10);
            let mut g = rng::stream(seed, 6);
            for _ in 0..100 {
                let step = gaussian(frame.n(), &mut g) * 1e-3;
                let cand = if eps == 0.0 {
                    &res.f_hat + &null * null.tr_mul(&step)
                } else {
                    let pinv = framecs_core::numerics::pseudo_inverse(&model.a, 1e-10).unwrap();
                    let moved = &res.f_hat + step;
                    let r = &model.a * &moved;
                    let target = project_l2_ball(&r, &model.y, eps);
                    &moved + pinv * (target - r)
                };
                assert!(model.residual(&cand) <= eps * (1.0 + 1e-6) + 1e-9);
                assert!(objective(&d_t, &cand, Program::P1) >= res.objective - 1e-6);
            }
        }
    }
}

#[test]
fn l0_oracle_never_exceeds_the_true_sparsity() {
    for seed in 0..6 {
        let frame = TightFrame::dct(8).unwrap();
        let a = gen_gaussian(6, 8, seed).unwrap();
        let mut x = Vector::zeros(8);
        x[(seed % 8) as usize] = 1.0;
        x[((seed + 3) % 8) as usize] = 2.0;
        let f = frame.synthesize(&x).unwrap();
        let model = measure(&a, &f, NoiseMode::None, seed).unwrap();
        let res = solve_p0_oracle(&frame, &model, 3, 1e-9).unwrap();
        assert!(res.converged);
        assert!(res.objective <= 2.0);
    }
}

const CONFIG: &str = r#"{
    "n": 6, "d": 9, "m": 40, "s": 1, "eps": 0.05, "trials": 6,
    "frame": {"kind": "random", "seed": 11},
    "matrix": {"kind": "gaussian", "seed": 12, "scaling": "optimal"},
    "signal": {"model": "synthesis", "seed": 13},
    "noise": {"kind": "bounded", "seed": 14}
}"#;

#[test]
fn records_reproduce_their_bounds_and_never_overclaim() {
    for text in [
        CONFIG.to_string(),
        CONFIG.replace(r#""m": 40"#, r#""m": 4"#),
        CONFIG.replace(r#""trials": 6"#, r#""trials": 6, "q": 0.5"#),
        CONFIG.replace(r#""trials": 6"#, r#""trials": 6, "delta_method": {"kind": "lower_bound", "trials": 20}"#),
    ] {
        let config = ExperimentConfig::from_json(&text).unwrap();
        for rec in run_experiment(&config).unwrap() {
            let row = &rec.row;
            if let (Some(c0), Some(c1), Some(bound)) = (row.c0, row.c1, row.bound) {
                let q = row.q.unwrap_or(1.0);
                assert_eq!(error_bound(c0, c1, row.tail, row.s, row.eps, q).to_bits(), bound.to_bits());
            }
            if row.within_bound != WithinBound::NotAsserted {
                assert_eq!(rec.delta_method, framecs_core::RipMethod::Exact);
                assert!(row.bound.is_some());
                let within = row.err_l2 <= row.bound.unwrap() * (1.0 + 1e-6) + 1e-9;
                assert_eq!(row.within_bound == WithinBound::True, within);
            }
        }
    }
}
