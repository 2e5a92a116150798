use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use taem_mlmc::noise::{
    brownian_increment, gamma_jump_increment, sample_chain, sample_jump_schedule, JumpPath,
};
use taem_mlmc::{Generator, JumpDriver, SeedTree};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, s)
}

#[test]
fn brownian_increments_are_gaussian() {
    let mut r = rng(1);
    let dt = 0.01;
    let mut z: Vec<f64> = (0..20_000)
        .map(|_| brownian_increment(&mut r, dt, 1)[0] / dt.sqrt())
        .collect();
    let (m, v) = mean_var(&z);
    assert!(m.abs() < 4.0 / (z.len() as f64).sqrt());
    assert!((v - 1.0).abs() < 0.05);

    z.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = z.len() as f64;
    let ks = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    // 0.1% critical value of the Kolmogorov distribution
    assert!(ks < 1.95 / n.sqrt(), "KS statistic {ks}");
}

#[test]
fn brownian_coordinates_are_uncorrelated() {
    let mut r = rng(2);
    let n = 20_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|_| brownian_increment(&mut r, 1.0, 3)).collect();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let c = draws.iter().map(|d| d[a] * d[b]).sum::<f64>() / n as f64;
        assert!(c.abs() < 4.0 / (n as f64).sqrt(), "corr({a},{b}) = {c}");
    }
}

#[test]
fn symmetric_chain_spends_half_its_time_in_each_state() {
    let g = Generator::two_state(1.0, 1.0).unwrap();
    let horizon = 2000.0;
    let path = sample_chain(&g, 0, horizon, &mut rng(3));
    let occ0 = path.occupation_time(0) / horizon;
    let occ1 = path.occupation_time(1) / horizon;
    assert!((occ0 + occ1 - 1.0).abs() < 1e-12);
    assert!((occ0 - 0.5).abs() < 0.05, "occupation {occ0}");
    // transitions form a Poisson process of rate 1
    let count = path.transitions().len() as f64;
    assert!((count - horizon).abs() < 4.0 * horizon.sqrt(), "{count} transitions");
    for w in path.transitions().windows(2) {
        assert!(w[0].0 < w[1].0);
        assert_ne!(w[0].1, w[1].1);
    }
}

#[test]
fn chain_jumps_follow_generator_rates() {
    let g = Generator::new(vec![
        vec![-3.0, 1.0, 2.0],
        vec![1.0, -1.0, 0.0],
        vec![1.0, 0.0, -1.0],
    ])
    .unwrap();
    let path = sample_chain(&g, 0, 5000.0, &mut rng(4));
    let mut from0 = [0usize; 3];
    let mut state = path.initial_state();
    for &(_, next) in path.transitions() {
        if state == 0 {
            from0[next] += 1;
        }
        assert!(g.rate(state, next) > 0.0);
        state = next;
    }
    let total = (from0[1] + from0[2]) as f64;
    let p2 = from0[2] as f64 / total;
    assert!((p2 - 2.0 / 3.0).abs() < 0.03, "P(0 -> 2) = {p2}");
    // stationary law (1/4, 3/8, 3/8)
    let occ0 = path.occupation_time(0) / 5000.0;
    assert!((occ0 - 0.25).abs() < 0.03, "occupation {occ0}");
}

#[test]
fn poisson_jump_counts_match_intensity() {
    let driver = JumpDriver::compound_poisson(3, 10.0, 0.0, 0.4).unwrap();
    let horizon = 2.0;
    let reps = 2000;
    let mut r = rng(5);
    let counts: Vec<f64> = (0..reps)
        .map(|_| sample_jump_schedule(&driver, horizon, &mut r).unwrap().jump_count() as f64)
        .collect();
    let (m, v) = mean_var(&counts);
    let expected = 3.0 * 10.0 * horizon;
    assert!((m - expected).abs() < 4.0 * (expected / reps as f64).sqrt(), "mean {m}");
    assert!((v / expected - 1.0).abs() < 0.15, "variance {v}");
}

#[test]
fn compound_poisson_increment_moments() {
    let driver = JumpDriver::compound_poisson(3, 10.0, 0.2, 0.4).unwrap();
    assert_eq!(driver.compensator(), vec![2.0; 3]);
    let unit = driver.unit_variance();
    assert!((unit[0] - 10.0 * (0.16 + 0.04)).abs() < 1e-12);
    let mut r = rng(6);
    let samples: Vec<f64> = (0..10_000)
        .map(|_| {
            let s = sample_jump_schedule(&driver, 1.0, &mut r).unwrap();
            s.value_at(1, 1.0)
        })
        .collect();
    let (m, v) = mean_var(&samples);
    assert!(m.abs() < 4.0 * (unit[1] / 1e4).sqrt(), "mean {m}");
    assert!((v / unit[1] - 1.0).abs() < 0.06, "variance {v}");
}

#[test]
fn schedule_increments_telescope() {
    let driver = JumpDriver::benchmark_finite();
    let schedule = sample_jump_schedule(&driver, 3.0, &mut rng(7)).unwrap();
    let mut path = JumpPath::new(&driver, 3.0, &mut rng(7));
    let mut aux = rng(0);
    let mut total = [0.0; 3];
    let mut out = [0.0; 3];
    let grid: Vec<f64> = (0..=30).map(|k| k as f64 * 0.1).collect();
    for w in grid.windows(2) {
        path.increment(w[0], w[1], &mut aux, &mut out);
        for (t, o) in total.iter_mut().zip(&out) {
            *t += o;
        }
    }
    for (k, t) in total.iter().enumerate() {
        assert!((t - schedule.value_at(k, 3.0)).abs() < 1e-10);
    }
}

#[test]
fn bilateral_gamma_increment_moments() {
    let driver = JumpDriver::bilateral_gamma(3, 1.0, 10.0).unwrap();
    assert_eq!(driver.unit_variance(), vec![0.02; 3]);
    let mut r = rng(8);
    let dt = 0.5;
    let draws: Vec<Vec<f64>> = (0..20_000)
        .map(|_| gamma_jump_increment(&driver, &mut r, dt).unwrap())
        .collect();
    for k in 0..3 {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let (m, v) = mean_var(&col);
        assert!(m.abs() < 4.0 * (0.01f64 / 2e4).sqrt(), "mean {m}");
        assert!((v / (0.02 * dt) - 1.0).abs() < 0.06, "variance {v}");
    }
    let c = draws.iter().map(|d| d[0] * d[2]).sum::<f64>() / draws.len() as f64;
    assert!(c.abs() < 4.0 * 0.01 / (2e4f64).sqrt());
}

#[test]
fn levy_moments_in_closed_form() {
    let cp = JumpDriver::compound_poisson(3, 10.0, 0.0, 0.4).unwrap();
    assert!((cp.levy_moment(2.0).unwrap() - 3.0 * 10.0 * 0.16).abs() < 1e-12);
    // E|N(0, s^2)| = s sqrt(2 / pi)
    let m1 = 3.0 * 10.0 * 0.4 * (2.0 / std::f64::consts::PI).sqrt();
    assert!((cp.levy_moment(1.0).unwrap() - m1).abs() < 1e-12);
    assert!((cp.levy_moment(4.0).unwrap() - 3.0 * 10.0 * 3.0 * 0.4f64.powi(4)).abs() < 1e-12);

    // shifted jumps go through quadrature: E xi^2 = mu^2 + s^2
    let shifted = JumpDriver::compound_poisson(1, 2.0, 0.3, 0.5).unwrap();
    assert!((shifted.levy_moment(2.0).unwrap() - 2.0 * (0.09 + 0.25)).abs() < 1e-8);

    // 2 a Γ(p) / b^p per coordinate
    let bg = JumpDriver::bilateral_gamma(3, 1.0, 10.0).unwrap();
    assert!((bg.levy_moment(2.0).unwrap() - 3.0 * 0.02).abs() < 1e-12);
    assert!((bg.levy_moment(3.0).unwrap() - 3.0 * 2.0 * 2.0 / 1000.0).abs() < 1e-12);
    assert!(bg.levy_moment(0.0).is_err());
}

#[test]
fn streams_are_reproducible_and_distinct() {
    use rand::Rng;
    let tree = SeedTree::new(99);
    let mut a = tree.sample_streams(3, 17);
    let mut b = tree.sample_streams(3, 17);
    let mut c = tree.sample_streams(3, 18);
    let va: Vec<u64> = (0..8).map(|_| a.brownian.random()).collect();
    let vb: Vec<u64> = (0..8).map(|_| b.brownian.random()).collect();
    let vc: Vec<u64> = (0..8).map(|_| c.brownian.random()).collect();
    let vj: Vec<u64> = (0..8).map(|_| a.jumps.random()).collect();
    assert_eq!(va, vb);
    assert_ne!(va, vc);
    assert_ne!(va, vj);
}
