//! Multilevel Monte Carlo estimation of invariant-measure expectations.
//!
//! The estimator is the telescoping sum
//!
//! ```text
//! Y = mean_n φ(X^0_T) + Σ_{l=1..L} mean_n [φ(X^l_T) - φ(X^{l-1}_T)]
//! ```
//!
//! where each corrector pair shares its driving noise. Horizon, finest level
//! and per-level sample counts follow from the target accuracy `ε` and the
//! constants of the error model: `E|X^l_T - X_T|^2 <= K0 M^-l`, bias decay
//! `K1 e^{αT/2}` and corrector variance `K2 M^-l`.

use std::io::Write;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use crate::analysis::{ols, RegressionFit};
use crate::error::{Error, Result};
use crate::model::{Functional, RegimeModel};
use crate::noise::{JumpDriver, SeedTree};
use crate::taem::{simulate_coupled_pair, simulate_terminal, LevelLadder, TaemConfig};

/// Inputs of the parameter selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanInputs {
    pub epsilon: f64,
    pub alpha: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub ratio: u32,
    pub l_phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlmcPlan {
    pub inputs: PlanInputs,
    /// Integer horizon `T`.
    pub horizon: f64,
    pub max_level: u32,
    /// `N_0, ..., N_L`.
    pub samples: Vec<usize>,
    /// The horizon formula gave a value below 1.
    pub horizon_clamped: bool,
    /// The level formula gave a value below 1.
    pub level_clamped: bool,
}

impl MlmcPlan {
    pub fn epsilon(&self) -> f64 {
        self.inputs.epsilon
    }

    pub fn ratio(&self) -> u32 {
        self.inputs.ratio
    }

    /// Same horizon and levels with every sample count multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> MlmcPlan {
        let mut p = self.clone();
        p.samples.iter_mut().for_each(|n| *n *= factor);
        p
    }
}

/// Ceiling that ignores relative rounding noise below 1e-12.
fn ceil_tol(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-12 * v.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

/// Chooses `T`, `L` and `N_l` so that the estimator's mean square error is
/// at most `ε^2` under the error model. `T` and `L` are clamped to at least 1.
pub fn plan(inputs: &PlanInputs) -> Result<MlmcPlan> {
    let PlanInputs {
        epsilon,
        alpha,
        k0,
        k1,
        k2,
        ratio,
        l_phi,
    } = *inputs;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::config("epsilon", format!("{epsilon} must be > 0")));
    }
    if !(alpha < 0.0) {
        return Err(Error::NotErgodic(alpha));
    }
    for (name, v) in [("k0", k0), ("k1", k1), ("k2", k2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(name, format!("{v} must be > 0")));
        }
    }
    if !(l_phi >= 0.0 && l_phi.is_finite()) {
        return Err(Error::config("l_phi", format!("{l_phi} must be >= 0")));
    }
    if ratio < 2 {
        return Err(Error::config("ratio", format!("{ratio} < 2")));
    }
    let m = ratio as f64;
    let eps2 = epsilon * epsilon;

    let t_raw = ceil_tol((eps2 / (6.0 * k1 * k1)).ln() / alpha);
    let horizon_clamped = t_raw < 1.0;
    let horizon = t_raw.max(1.0);

    // A constant functional (L_φ = 0) has no discretization error; the level formula tends to -inf.
    let l_raw = if l_phi == 0.0 {
        f64::NEG_INFINITY
    } else {
        ceil_tol((2.0 * epsilon.ln().abs() + (6.0 * k0 * l_phi * l_phi).ln()) / m.ln())
    };
    let level_clamped = l_raw < 1.0;
    let max_level = l_raw.max(1.0) as u32;

    let samples = (0..=max_level)
        .map(|l| {
            let n = ceil_tol(3.0 * k2 * (max_level as f64 + 1.0) / (eps2 * m.powi(l as i32)));
            n.max(1.0) as usize
        })
        .collect();

    Ok(MlmcPlan {
        inputs: *inputs,
        horizon,
        max_level,
        samples,
        horizon_clamped,
        level_clamped,
    })
}

/// Bias constant `L_φ (|x0| + rms)`, an upper bound for `L_φ (E|x0 - Y|^2)^{1/2}`
/// when `Y` is invariant and `rms = (E|Y|^2)^{1/2}`.
pub fn default_k1(l_phi: f64, x0: &[f64], stationary_rms: f64) -> f64 {
    l_phi * (crate::linalg::norm(x0) + stationary_rms)
}

/// `(mean |X_T|^2)^{1/2}` over `samples` level-0 paths.
pub fn pilot_rms(
    model: &RegimeModel,
    driver: &JumpDriver,
    ladder: &LevelLadder,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::config("pilot_samples", "need at least 1 sample"));
    }
    let config = TaemConfig::for_level(ladder, 0, horizon)?;
    let tree = SeedTree::new(seed).child(u64::MAX);
    let sq: Vec<Result<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut streams = tree.sample_streams(0, i);
            let r = simulate_terminal(model, driver, &config, &mut streams)?;
            Ok(crate::linalg::norm_sq(&r.terminal))
        })
        .collect();
    let mut total = 0.0;
    for v in sq {
        total += v?;
    }
    Ok((total / samples as f64).sqrt())
}

/// Expected cost `Σ N_l T M^l` in units of scheme steps (up to the `h0` scale).
pub fn predicted_cost(plan: &MlmcPlan) -> f64 {
    let m = plan.ratio() as f64;
    plan.samples
        .iter()
        .enumerate()
        .map(|(l, &n)| n as f64 * plan.horizon * m.powi(l as i32))
        .sum()
}

/// Sample statistics of one level's correctors.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub level: u32,
    pub attempted: usize,
    pub samples: usize,
    pub failures: usize,
    pub mean: f64,
    /// Unbiased sample variance; zero with fewer than two samples.
    pub variance: f64,
    /// Scheme steps summed over both paths of every sample.
    pub steps: u64,
}

impl LevelStats {
    pub fn from_correctors(level: u32, values: &[f64], steps: u64) -> Self {
        let (mean, variance) = mean_variance(values);
        Self {
            level,
            attempted: values.len(),
            samples: values.len(),
            failures: 0,
            mean,
            variance,
            steps,
        }
    }
}

/// Mean (with a one-step residual correction, exact for constant data) and
/// unbiased variance, accumulated in index order.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mut mean = values.iter().sum::<f64>() / nf;
    mean += values.iter().map(|v| v - mean).sum::<f64>() / nf;
    let var = if n < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0)
    };
    (mean, var)
}

/// `Σ_l mean_l`.
pub fn telescoping_sum(levels: &[LevelStats]) -> f64 {
    levels.iter().map(|l| l.mean).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlmcEstimate {
    pub estimate: f64,
    pub levels: Vec<LevelStats>,
    pub plan: MlmcPlan,
    pub root_seed: u64,
    pub total_steps: u64,
    pub wall_seconds: f64,
}

impl MlmcEstimate {
    /// `Σ_l V_l / N_l`.
    pub fn variance_estimate(&self) -> f64 {
        self.levels
            .iter()
            .filter(|l| l.samples > 0)
            .map(|l| l.variance / l.samples as f64)
            .sum()
    }

    /// Per-level CSV: `level, samples, failures, mean, variance, steps`.
    pub fn write_levels_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "samples", "failures", "mean", "variance", "steps"])?;
        for l in &self.levels {
            w.write_record(&[
                l.level.to_string(),
                l.samples.to_string(),
                l.failures.to_string(),
                format!("{:e}", l.mean),
                format!("{:e}", l.variance),
                l.steps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Deterministic summary as `key, value` rows. Wall-clock time is not included.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let p = &self.plan;
        let rows: Vec<(&str, String)> = vec![
            ("estimate", format!("{:e}", self.estimate)),
            ("variance_estimate", format!("{:e}", self.variance_estimate())),
            ("epsilon", format!("{:e}", p.epsilon())),
            ("horizon", p.horizon.to_string()),
            ("max_level", p.max_level.to_string()),
            ("ratio", p.ratio().to_string()),
            ("horizon_clamped", p.horizon_clamped.to_string()),
            ("level_clamped", p.level_clamped.to_string()),
            ("predicted_cost", format!("{:e}", predicted_cost(p))),
            ("realized_steps", self.total_steps.to_string()),
            ("seed", self.root_seed.to_string()),
        ];
        w.write_record(["key", "value"])?;
        for (k, v) in rows {
            w.write_record([k, v.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Execution settings of [`estimate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub ladder: LevelLadder,
    /// Largest tolerated fraction of failed samples per level.
    pub failure_threshold: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            ladder: LevelLadder::default(),
            failure_threshold: 0.01,
        }
    }
}

/// Runs the plan with the default level ladder (`Δ_l = 2^-l / 4`).
pub fn estimate(
    plan: &MlmcPlan,
    model: &RegimeModel,
    driver: &JumpDriver,
    phi: &Functional,
    root_seed: u64,
) -> Result<MlmcEstimate> {
    let opts = EstimateOptions {
        ladder: LevelLadder::new(0.25, plan.ratio())?,
        ..Default::default()
    };
    estimate_with(plan, model, driver, phi, &opts, root_seed)
}

pub fn estimate_with(
    plan: &MlmcPlan,
    model: &RegimeModel,
    driver: &JumpDriver,
    phi: &Functional,
    opts: &EstimateOptions,
    root_seed: u64,
) -> Result<MlmcEstimate> {
    if opts.ladder.ratio() != plan.ratio() {
        return Err(Error::config(
            "ratio",
            format!("ladder ratio {} differs from plan ratio {}", opts.ladder.ratio(), plan.ratio()),
        ));
    }
    phi.check_dim(model.dim())?;
    if !phi.lipschitz().is_global() {
        warn!("functional {} is not globally Lipschitz; the error bound does not apply", phi.name());
    }
    let start = Instant::now();
    let tree = SeedTree::new(root_seed);
    let mut levels = Vec::with_capacity(plan.samples.len());
    for (l, &n) in plan.samples.iter().enumerate() {
        levels.push(run_level(
            model,
            driver,
            phi,
            &opts.ladder,
            l as u32,
            plan.horizon,
            n,
            &tree,
            opts.failure_threshold,
        )?);
    }
    let total_steps = levels.iter().map(|l| l.steps).sum();
    Ok(MlmcEstimate {
        estimate: telescoping_sum(&levels),
        levels,
        plan: plan.clone(),
        root_seed,
        total_steps,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Draws `n` correctors of level `level` (plain samples at level 0) and
/// reduces them in sample order.
#[allow(clippy::too_many_arguments)]
pub fn run_level(
    model: &RegimeModel,
    driver: &JumpDriver,
    phi: &Functional,
    ladder: &LevelLadder,
    level: u32,
    horizon: f64,
    n: usize,
    tree: &SeedTree,
    failure_threshold: f64,
) -> Result<LevelStats> {
    let config = TaemConfig::for_level(ladder, level, horizon)?;
    if level > 0 {
        TaemConfig::for_level(ladder, level - 1, horizon)?;
    }
    driver.check_dim(model.dim())?;

    let outcomes: Vec<Result<(f64, u64)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut streams = tree.sample_streams(level, i);
            if level == 0 {
                let r = simulate_terminal(model, driver, &config, &mut streams)?;
                Ok((phi.eval(&r.terminal), r.steps as u64))
            } else {
                let c = simulate_coupled_pair(model, driver, ladder, level, horizon, &mut streams)?;
                Ok((
                    phi.eval(&c.fine) - phi.eval(&c.coarse),
                    (c.fine_steps + c.coarse_steps) as u64,
                ))
            }
        })
        .collect();

    let mut values = Vec::with_capacity(n);
    let mut steps = 0u64;
    let mut failures = 0usize;
    for o in outcomes {
        match o {
            Ok((v, s)) => {
                values.push(v);
                steps += s;
            }
            Err(e) if e.is_simulation_failure() => {
                warn!("level {level}: sample failed: {e}");
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if n > 0 && failures as f64 / n as f64 > failure_threshold {
        return Err(Error::TooManyFailures {
            level,
            failed: failures,
            attempted: n,
            threshold: failure_threshold,
        });
    }
    let mut stats = LevelStats::from_correctors(level, &values, steps);
    stats.attempted = n;
    stats.failures = failures;
    Ok(stats)
}

/// Constants fitted from a pilot run.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub k0: f64,
    pub k2: f64,
    /// Fit of `log_M V_l` against `l` over the corrector levels.
    pub fit: RegressionFit,
    /// Variance of `φ(X^0_T)`, if level 0 was part of the pilot.
    pub level0_variance: Option<f64>,
    /// `(level, V_l)` for the corrector levels.
    pub variances: Vec<(u32, f64)>,
    /// The fitted decay is slower than half the nominal `M^-l`.
    pub decay_violated: bool,
}

impl Calibration {
    /// Fitted per-level decay exponent (about -1 when `V_l ~ M^-l`).
    pub fn decay_exponent(&self) -> f64 {
        self.fit.slope
    }
}

/// Fits `V_l ≈ K2 M^-l` by least squares in `log_M` coordinates.
///
/// The level-0 variance is not a corrector variance, but the planner applies
/// `K2` to level 0 as well, so `K2` is raised to cover it when given.
/// `K0 = K2 / (2 L_φ^2 (1 + M))`.
pub fn fit_variance_decay(
    variances: &[(u32, f64)],
    level0_variance: Option<f64>,
    ratio: u32,
    l_phi: f64,
) -> Result<Calibration> {
    if let Some(&(l, v)) = variances.iter().find(|&&(_, v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateVariance(format!(
            "level {l} corrector variance {v} is not positive"
        )));
    }
    let lm = (ratio as f64).ln();
    let xs: Vec<f64> = variances.iter().map(|&(l, _)| l as f64).collect();
    let ys: Vec<f64> = variances.iter().map(|&(_, v)| v.ln() / lm).collect();
    let fit = ols(&xs, &ys)?;
    let mut k2 = (fit.intercept * lm).exp();
    if let Some(v0) = level0_variance {
        k2 = k2.max(v0);
    }
    let m = ratio as f64;
    Ok(Calibration {
        k0: k2 / (2.0 * l_phi * l_phi * (1.0 + m)),
        k2,
        decay_violated: fit.slope > -0.5,
        fit,
        level0_variance,
        variances: variances.to_vec(),
    })
}

/// Pilot run over levels `0..=pilot_levels` with `pilot_samples` samples each.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_constants(
    model: &RegimeModel,
    driver: &JumpDriver,
    phi: &Functional,
    ladder: &LevelLadder,
    horizon: f64,
    pilot_levels: u32,
    pilot_samples: usize,
    seed: u64,
) -> Result<Calibration> {
    if pilot_levels < 2 {
        return Err(Error::config("pilot_levels", "need at least 2 corrector levels"));
    }
    if pilot_samples < 2 {
        return Err(Error::config("pilot_samples", "need at least 2 samples"));
    }
    let tree = SeedTree::new(seed);
    let mut level0 = None;
    let mut variances = Vec::new();
    for l in 0..=pilot_levels {
        let s = run_level(model, driver, phi, ladder, l, horizon, pilot_samples, &tree, 0.01)?;
        if l == 0 {
            level0 = Some(s.variance);
        } else {
            variances.push((l, s.variance));
        }
    }
    let cal = fit_variance_decay(&variances, level0, ladder.ratio(), phi.lipschitz().constant())?;
    if cal.decay_violated {
        warn!(
            "corrector variances decay with exponent {:.3} per level; expected about -1",
            cal.decay_exponent()
        );
    }
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_inputs(epsilon: f64) -> PlanInputs {
        PlanInputs {
            epsilon,
            alpha: -1.0,
            k0: 1.0,
            k1: 1.0,
            k2: 1.0,
            ratio: 2,
            l_phi: 1.0,
        }
    }

    #[test]
    fn plan_formulas() {
        let p = plan(&unit_inputs(0.1)).unwrap();
        assert_eq!(p.horizon, 7.0);
        assert_eq!(p.max_level, 10);
        assert_eq!(p.samples[0], 3300);
        assert_eq!(p.samples[10], 4);
        assert_eq!(p.samples.len(), 11);
        assert!(!p.horizon_clamped && !p.level_clamped);
        assert!(p.samples.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn plan_clamps_horizon() {
        // ε^2 = 6 K1^2 makes the log term vanish.
        let p = plan(&unit_inputs(6f64.sqrt())).unwrap();
        assert_eq!(p.horizon, 1.0);
        assert!(p.horizon_clamped);
        assert!(p.max_level >= 1);
    }

    #[test]
    fn constant_functional_uses_one_level() {
        let mut i = unit_inputs(0.1);
        i.l_phi = 0.0;
        let p = plan(&i).unwrap();
        assert_eq!(p.max_level, 1);
        assert!(p.level_clamped);
    }

    #[test]
    fn plan_rejects_nonnegative_alpha() {
        let mut i = unit_inputs(0.1);
        i.alpha = 0.0;
        assert!(matches!(plan(&i), Err(Error::NotErgodic(_))));
        i.alpha = -1.0;
        i.epsilon = 0.0;
        assert!(plan(&i).is_err());
    }

    #[test]
    fn halving_epsilon_scales_level_zero() {
        let a = plan(&unit_inputs(0.1)).unwrap();
        let b = plan(&unit_inputs(0.05)).unwrap();
        let ratio = b.samples[0] as f64 / a.samples[0] as f64;
        let expected = 4.0 * (b.max_level as f64 + 1.0) / (a.max_level as f64 + 1.0);
        assert!((ratio - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn predicted_cost_single_level() {
        let p = MlmcPlan {
            inputs: unit_inputs(0.1),
            horizon: 5.0,
            max_level: 0,
            samples: vec![10],
            horizon_clamped: false,
            level_clamped: false,
        };
        assert_eq!(predicted_cost(&p), 50.0);
        assert_eq!(predicted_cost(&p.scaled(2)), 100.0);
    }

    #[test]
    fn predicted_cost_matches_direct_sum() {
        let p = plan(&unit_inputs(0.1)).unwrap();
        let direct: f64 = (0..=10).map(|l| p.samples[l] as f64 * 7.0 * 2f64.powi(l as i32)).sum();
        assert_eq!(predicted_cost(&p), direct);
    }

    #[test]
    fn mean_is_exact_for_constant_data() {
        let v = vec![0.1; 37];
        let (m, var) = mean_variance(&v);
        assert_eq!(m, 0.1);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn synthetic_variance_decay() {
        let v: Vec<(u32, f64)> = (1..=5).map(|l| (l, 8.0 * 2f64.powi(-(l as i32)))).collect();
        let c = fit_variance_decay(&v, None, 2, 1.0).unwrap();
        assert!((c.k2 - 8.0).abs() < 1e-12);
        assert!((c.decay_exponent() + 1.0).abs() < 1e-12);
        assert!((c.k0 - 8.0 / 6.0).abs() < 1e-12);
        assert!(!c.decay_violated);
    }

    #[test]
    fn flat_variances_flag_violation() {
        let v: Vec<(u32, f64)> = (1..=4).map(|l| (l, 0.3)).collect();
        let c = fit_variance_decay(&v, None, 2, 1.0).unwrap();
        assert!(c.decay_exponent().abs() < 1e-12);
        assert!(c.decay_violated);
    }

    #[test]
    fn nonpositive_variance_is_an_error() {
        let v = vec![(1, 0.5), (2, 0.0)];
        assert!(matches!(
            fit_variance_decay(&v, None, 2, 1.0),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn level0_variance_raises_k2() {
        let v: Vec<(u32, f64)> = (1..=3).map(|l| (l, 2f64.powi(-(l as i32)))).collect();
        let c = fit_variance_decay(&v, Some(5.0), 2, 1.0).unwrap();
        assert_eq!(c.k2, 5.0);
    }
}
