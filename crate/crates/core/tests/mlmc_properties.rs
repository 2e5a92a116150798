use std::sync::Arc;

use taem_mlmc::analysis::builtin_functional;
use taem_mlmc::mlmc::{
    calibrate_constants, estimate, estimate_with, mean_variance, plan, predicted_cost,
    telescoping_sum, EstimateOptions, LevelStats, PlanInputs,
};
use taem_mlmc::model::{linear_test_model, FnCoefficients};
use taem_mlmc::{
    benchmark_model, Error, Functional, Generator, JumpDriver, LevelLadder, Lipschitz,
    ModelMetadata, RegimeModel,
};

fn inputs(epsilon: f64) -> PlanInputs {
    PlanInputs {
        epsilon,
        alpha: -1.0,
        k0: 0.05,
        k1: 2.0,
        k2: 0.2,
        ratio: 2,
        l_phi: 3f64.sqrt(),
    }
}

fn ceil_tol(v: f64) -> f64 {
    if (v - v.round()).abs() <= 1e-12 * v.abs().max(1.0) {
        v.round()
    } else {
        v.ceil()
    }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn plan_matches_closed_form() {
    for eps in [0.2, 0.1, 0.05, 0.01] {
        let i = inputs(eps);
        let p = plan(&i).unwrap();
        let t = ceil_tol((eps * eps / (6.0 * i.k1 * i.k1)).ln() / i.alpha).max(1.0);
        let l = ceil_tol((2.0 * eps.ln().abs() + (6.0 * i.k0 * i.l_phi * i.l_phi).ln()) / 2f64.ln()).max(1.0);
        assert_eq!(p.horizon, t);
        assert_eq!(p.max_level as f64, l);
        assert_eq!(p.samples.len(), p.max_level as usize + 1);
        for (lvl, &n) in p.samples.iter().enumerate() {
            let expected = ceil_tol(3.0 * i.k2 * (l + 1.0) / (eps * eps * 2f64.powi(lvl as i32)));
            assert_eq!(n as f64, expected);
        }
        let cost: f64 = p
            .samples
            .iter()
            .enumerate()
            .map(|(lvl, &n)| n as f64 * t * 2f64.powi(lvl as i32))
            .sum();
        assert!((predicted_cost(&p) - cost).abs() <= 1e-9 * cost);
    }
}

#[test]
fn plan_rejects_bad_inputs() {
    let mut i = inputs(0.1);
    i.alpha = 0.0;
    assert!(matches!(plan(&i), Err(Error::NotErgodic(_))));
    let mut i = inputs(0.1);
    i.epsilon = -1.0;
    assert!(plan(&i).is_err());
    let mut i = inputs(0.1);
    i.ratio = 1;
    assert!(plan(&i).is_err());
}

#[test]
fn level_means_telescope() {
    let correctors: Vec<Vec<f64>> = vec![
        vec![1.0, 1.5, 0.5, 1.0],
        vec![0.25, -0.25, 0.1],
        vec![0.01, 0.03],
    ];
    let levels: Vec<LevelStats> = correctors
        .iter()
        .enumerate()
        .map(|(l, v)| LevelStats::from_correctors(l as u32, v, 10))
        .collect();
    let direct: f64 = correctors
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .sum();
    assert!((telescoping_sum(&levels) - direct).abs() < 1e-12);
    let (m, v) = mean_variance(&[2.0, 4.0, 6.0]);
    assert!((m - 4.0).abs() < 1e-15);
    assert!((v - 4.0).abs() < 1e-15);
}

#[test]
fn constant_functional_is_estimated_exactly() {
    let m = benchmark_model();
    let driver = JumpDriver::benchmark_finite();
    for c in [0.0, 2.5, -1.0 / 3.0] {
        let mut i = inputs(0.2);
        i.l_phi = 0.0;
        let p = plan(&i).unwrap();
        let est = estimate(&p, &m, &driver, &Functional::constant(c), 7).unwrap();
        assert_eq!(est.estimate, c);
        assert_eq!(est.levels[0].variance, 0.0);
        assert!(est.levels[1..].iter().all(|l| l.mean == 0.0 && l.variance == 0.0));
    }
}

#[test]
fn estimate_is_deterministic_and_worker_independent() {
    let m = benchmark_model();
    let driver = JumpDriver::benchmark_finite();
    let phi = builtin_functional("phi1", 3).unwrap();
    let p = plan(&inputs(0.3)).unwrap();
    let a = pool(1).install(|| estimate(&p, &m, &driver, &phi, 11).unwrap());
    let b = pool(3).install(|| estimate(&p, &m, &driver, &phi, 11).unwrap());
    let c = estimate(&p, &m, &driver, &phi, 12).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.levels, b.levels);
    assert_eq!(a.total_steps, b.total_steps);
    assert_ne!(a.estimate, c.estimate);
}

#[test]
fn linear_model_mean_is_recovered() {
    let m = linear_test_model(3, 1.0, 0.5).unwrap().with_initial_state(vec![1.0, -1.0, 0.5]).unwrap();
    let driver = JumpDriver::none(3);
    let mean = Functional::new("x1", Lipschitz::Global(1.0), |x| x[0]);
    let i = PlanInputs {
        epsilon: 0.05,
        alpha: -2.0,
        k0: 0.01,
        k1: 2.0,
        k2: 0.2,
        ratio: 2,
        l_phi: 1.0,
    };
    let p = plan(&i).unwrap();
    let est = estimate(&p, &m, &driver, &mean, 3).unwrap();
    assert!(est.estimate.abs() < 3.0 * 0.05, "estimate {}", est.estimate);
    assert_eq!(est.levels.len(), p.samples.len());
    for (l, s) in est.levels.iter().zip(&p.samples) {
        assert_eq!(l.samples, *s);
        assert_eq!(l.failures, 0);
    }
}

#[test]
fn ladder_ratio_must_match_plan() {
    let p = plan(&inputs(0.3)).unwrap();
    let opts = EstimateOptions {
        ladder: LevelLadder::new(0.25, 4).unwrap(),
        failure_threshold: 0.01,
    };
    let phi = builtin_functional("phi1", 3).unwrap();
    assert!(estimate_with(&p, &benchmark_model(), &JumpDriver::none(3), &phi, &opts, 0).is_err());
}

#[test]
fn failing_levels_abort_the_estimate() {
    let coeffs = FnCoefficients::new(
        |_, x, out| out.fill(if x[0].abs() > 0.5 { f64::NAN } else { 0.0 }),
        |_, _, out| out.fill(1.0),
        |_, _, out| out.fill(0.0),
    );
    let m = RegimeModel::new("fragile", 1, Generator::trivial(), Arc::new(coeffs), ModelMetadata::default()).unwrap();
    let mut i = inputs(0.3);
    i.l_phi = 1.0;
    let p = plan(&i).unwrap();
    let phi = Functional::new("x", Lipschitz::Global(1.0), |x| x[0]);
    let err = estimate(&p, &m, &JumpDriver::none(1), &phi, 0).unwrap_err();
    assert!(matches!(err, Error::TooManyFailures { .. }), "{err}");
    assert!(err.is_simulation_failure());
}

#[test]
fn calibration_on_linear_model() {
    let m = linear_test_model(3, 1.0, 0.5).unwrap();
    let phi = Functional::new("x1", Lipschitz::Global(1.0), |x| x[0]);
    let ladder = LevelLadder::default();
    let cal = calibrate_constants(&m, &JumpDriver::none(3), &phi, &ladder, 2.0, 4, 200, 5).unwrap();
    assert!(cal.k0 > 0.0 && cal.k2 > 0.0);
    assert!(cal.k2 >= cal.level0_variance.unwrap());
    assert_eq!(cal.variances.len(), 4);
    // the tamed diffusion differs between levels by O(√Δ), so decay is slow but present
    assert!(cal.decay_exponent() < 0.0, "slope {}", cal.decay_exponent());
    let expected_k0 = cal.k2 / (2.0 * 1.0 * 3.0);
    assert!((cal.k0 - expected_k0).abs() < 1e-12 * expected_k0);
}

#[test]
fn zero_dynamics_give_zero_estimate() {
    let m = taem_mlmc::model::zero_model(3, 2).unwrap();
    let phi = builtin_functional("phi1", 3).unwrap();
    let p = plan(&inputs(0.2)).unwrap();
    let est = estimate(&p, &m, &JumpDriver::benchmark_finite(), &phi, 1).unwrap();
    assert_eq!(est.estimate, 0.0);
}

#[test]
fn independent_seeds_agree_within_two_epsilon() {
    let m = benchmark_model();
    let driver = JumpDriver::benchmark_finite();
    let phi = builtin_functional("phi1", 3).unwrap();
    let eps = 0.2;
    let i = PlanInputs {
        epsilon: eps,
        alpha: -1.0,
        k0: 9.77e-3,
        k1: 2.57,
        k2: 0.176,
        ratio: 2,
        l_phi: 3f64.sqrt(),
    };
    let p = plan(&i).unwrap();
    let a = estimate(&p, &m, &driver, &phi, 100).unwrap();
    let b = estimate(&p, &m, &driver, &phi, 200).unwrap();
    assert!((a.estimate - b.estimate).abs() <= 2.0 * eps, "{} vs {}", a.estimate, b.estimate);
}
