//! Empirical studies: strong error between levels, rate regression,
//! variance and cost scaling of the multilevel estimator, and contraction.

use std::io::Write;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mlmc::{self, predicted_cost, EstimateOptions, PlanInputs};
use crate::model::{Functional, Lipschitz, RegimeModel};
use crate::noise::{JumpDriver, SeedTree};
use crate::taem::{simulate_coupled_pair, simulate_paired_starts, LevelLadder};

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`.
    pub r_squared: f64,
    pub points: usize,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Result<RegressionFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateRegression("non-finite data".into()));
    }
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(Error::DegenerateRegression(format!("{} point(s)", xs.len())));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
        return Err(Error::DegenerateRegression("fewer than two distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let sse: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - slope * x - intercept;
                r * r
            })
            .sum();
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        points: xs.len(),
    })
}

/// `MSE(l, T)` between levels `l` and `l + 1` for a range of `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorTable {
    pub horizon: f64,
    pub levels: Vec<u32>,
    pub mse: Vec<f64>,
    /// Requested coupled pairs per level.
    pub samples: usize,
    pub failures: Vec<usize>,
    /// Mean scheme steps of the level-`l` path.
    pub mean_coarse_steps: Vec<f64>,
    /// Mean scheme steps of the level-`l + 1` path.
    pub mean_fine_steps: Vec<f64>,
}

impl StrongErrorTable {
    pub fn log2_mse(&self) -> Vec<f64> {
        self.mse.iter().map(|m| m.log2()).collect()
    }

    /// Columns `horizon, level, samples, failures, mse, log2_mse, mean_steps_coarse, mean_steps_fine`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        write_table_header(&mut w)?;
        self.write_rows(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub(crate) fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for (k, &l) in self.levels.iter().enumerate() {
            w.write_record(&[
                self.horizon.to_string(),
                l.to_string(),
                self.samples.to_string(),
                self.failures[k].to_string(),
                format!("{:e}", self.mse[k]),
                format!("{:.4}", self.mse[k].log2()),
                format!("{:.3}", self.mean_coarse_steps[k]),
                format!("{:.3}", self.mean_fine_steps[k]),
            ])?;
        }
        Ok(())
    }
}

pub(crate) fn write_table_header<W: Write>(w: &mut csv::Writer<W>) -> Result<()> {
    w.write_record([
        "horizon",
        "level",
        "samples",
        "failures",
        "mse",
        "log2_mse",
        "mean_steps_coarse",
        "mean_steps_fine",
    ])?;
    Ok(())
}

/// Largest tolerated fraction of failed pairs per level in the studies.
pub const FAILURE_THRESHOLD: f64 = 0.01;

/// Runs `samples` coupled pairs at `(l, l + 1)` for every `l` in `levels`
/// and averages the squared terminal gaps. Levels index `ladder`.
pub fn strong_error_table(
    model: &RegimeModel,
    driver: &JumpDriver,
    ladder: &LevelLadder,
    levels: &[u32],
    horizon: f64,
    samples: usize,
    root_seed: u64,
) -> Result<StrongErrorTable> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::config("levels", "need at least two consecutive levels"));
    }
    if samples < 2 {
        return Err(Error::config("samples", "need at least 2 samples"));
    }
    let tree = SeedTree::new(root_seed);
    let mut table = StrongErrorTable {
        horizon,
        levels: levels.to_vec(),
        mse: Vec::new(),
        samples,
        failures: Vec::new(),
        mean_coarse_steps: Vec::new(),
        mean_fine_steps: Vec::new(),
    };
    for &l in levels {
        let outcomes: Vec<_> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut streams = tree.sample_streams(l + 1, i);
                simulate_coupled_pair(model, driver, ladder, l + 1, horizon, &mut streams)
            })
            .collect();
        let mut sq = Vec::with_capacity(samples);
        let (mut coarse, mut fine, mut failed) = (0usize, 0usize, 0usize);
        for o in outcomes {
            match o {
                Ok(c) => {
                    sq.push(linalg::dist_sq(&c.fine, &c.coarse));
                    coarse += c.coarse_steps;
                    fine += c.fine_steps;
                }
                Err(e) if e.is_simulation_failure() => {
                    warn!("level {l}: pair failed: {e}");
                    failed += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if failed as f64 > FAILURE_THRESHOLD * samples as f64 {
            return Err(Error::TooManyFailures {
                level: l,
                failed,
                attempted: samples,
                threshold: FAILURE_THRESHOLD,
            });
        }
        let n = sq.len() as f64;
        table.mse.push(sq.iter().sum::<f64>() / n);
        table.failures.push(failed);
        table.mean_coarse_steps.push(coarse as f64 / n);
        table.mean_fine_steps.push(fine as f64 / n);
    }
    Ok(table)
}

/// Regression of `log2 MSE(l)` on `l` and the rate `Λ0 = -slope / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub fit: RegressionFit,
    pub lambda0: f64,
    /// Levels left out because their MSE was zero.
    pub excluded: Vec<u32>,
}

pub fn fit_rate(table: &StrongErrorTable) -> Result<RateFit> {
    fit_rate_points(&table.levels, &table.mse)
}

pub fn fit_rate_points(levels: &[u32], mse: &[f64]) -> Result<RateFit> {
    if levels.len() != mse.len() {
        return Err(Error::DimensionMismatch {
            expected: levels.len(),
            got: mse.len(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (&l, &m) in levels.iter().zip(mse) {
        if m > 0.0 {
            xs.push(l as f64);
            ys.push(m.log2());
        } else {
            warn!("level {l}: MSE is {m}; excluded from the rate fit");
            excluded.push(l);
        }
    }
    let fit = ols(&xs, &ys)?;
    Ok(RateFit {
        lambda0: -fit.slope / 2.0,
        fit,
        excluded,
    })
}

/// `φ1 = x1 + x2 + x3`, `φ2 = |x|^2`, `φ3 = s / (s + 1)` with `s = |x1 + x2 + x3|`.
///
/// `φ2` is not globally Lipschitz; it carries its Lipschitz constant on the
/// unit-scale ball `|x| <= √3` as a planning surrogate.
pub fn builtin_functionals(dim: usize) -> Result<Vec<Functional>> {
    if dim != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: dim });
    }
    let r3 = 3f64.sqrt();
    Ok(vec![
        Functional::new("phi1", Lipschitz::Global(r3), |x| x[0] + x[1] + x[2]).with_dim(3),
        Functional::new("phi2", Lipschitz::Local { surrogate: 2.0 * r3 }, linalg::norm_sq).with_dim(3),
        Functional::new("phi3", Lipschitz::Global(r3), |x| {
            let s = (x[0] + x[1] + x[2]).abs();
            s / (s + 1.0)
        })
        .with_dim(3),
    ])
}

/// Looks up `phi1`, `phi2` or `phi3`.
pub fn builtin_functional(name: &str, dim: usize) -> Result<Functional> {
    builtin_functionals(dim)?
        .into_iter()
        .find(|f| f.name() == name)
        .ok_or_else(|| Error::config("functional", format!("unknown functional {name:?}")))
}

/// Seed of repetition `rep` at accuracy index `eps_index`.
pub fn repetition_seed(root_seed: u64, eps_index: usize, rep: usize) -> u64 {
    SeedTree::new(root_seed).child(eps_index as u64).child(rep as u64).root()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariancePoint {
    pub epsilon: f64,
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub predicted_cost: f64,
    pub realized_steps: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceStudy {
    pub functional: String,
    pub points: Vec<VariancePoint>,
    /// `log2 Var(Y)` against `log2 ε`.
    pub fit: RegressionFit,
}

impl VarianceStudy {
    /// Columns `functional, epsilon, repetitions, mean, variance, log2_epsilon, log2_variance, predicted_cost, realized_steps`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "functional",
            "epsilon",
            "repetitions",
            "mean",
            "variance",
            "log2_epsilon",
            "log2_variance",
            "predicted_cost",
            "realized_steps",
        ])?;
        for p in &self.points {
            w.write_record(&[
                self.functional.clone(),
                format!("{:e}", p.epsilon),
                p.estimates.len().to_string(),
                format!("{:e}", p.mean),
                format!("{:e}", p.variance),
                format!("{:.4}", p.epsilon.log2()),
                format!("{:.4}", p.variance.log2()),
                format!("{:e}", p.predicted_cost),
                p.realized_steps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::config("epsilons", "all values must be > 0"));
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::config("epsilons", "need at least two distinct values"));
    }
    Ok(())
}

/// Repeats the estimator `repetitions[i]` times at each `epsilons[i]` and
/// fits `log2` of the sample variance of the estimates on `log2 ε`.
///
/// `template.epsilon` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn variance_study(
    model: &RegimeModel,
    driver: &JumpDriver,
    phi: &Functional,
    epsilons: &[f64],
    repetitions: &[usize],
    template: &PlanInputs,
    options: &EstimateOptions,
    root_seed: u64,
) -> Result<VarianceStudy> {
    variance_study_seeded(model, driver, phi, epsilons, repetitions, template, options, |i, r| {
        repetition_seed(root_seed, i, r)
    })
}

/// [`variance_study`] with an explicit seed for every `(ε index, repetition)`.
#[allow(clippy::too_many_arguments)]
pub fn variance_study_seeded<S>(
    model: &RegimeModel,
    driver: &JumpDriver,
    phi: &Functional,
    epsilons: &[f64],
    repetitions: &[usize],
    template: &PlanInputs,
    options: &EstimateOptions,
    seed: S,
) -> Result<VarianceStudy>
where
    S: Fn(usize, usize) -> u64,
{
    check_epsilons(epsilons)?;
    if repetitions.len() != epsilons.len() {
        return Err(Error::config("repetitions", "need one repetition count per epsilon"));
    }
    if repetitions.iter().any(|&r| r < 2) {
        return Err(Error::config("repetitions", "need at least 2 repetitions"));
    }
    let mut points = Vec::with_capacity(epsilons.len());
    for (i, (&epsilon, &reps)) in epsilons.iter().zip(repetitions).enumerate() {
        let plan = mlmc::plan(&PlanInputs { epsilon, ..*template })?;
        let mut estimates = Vec::with_capacity(reps);
        let mut steps = 0;
        let mut wall = 0.0;
        for r in 0..reps {
            let e = mlmc::estimate_with(&plan, model, driver, phi, options, seed(i, r))?;
            estimates.push(e.estimate);
            steps += e.total_steps;
            wall += e.wall_seconds;
        }
        let (mean, variance) = mlmc::mean_variance(&estimates);
        if !(variance > 0.0) {
            return Err(Error::DegenerateVariance(format!(
                "estimates at epsilon = {epsilon} have zero variance"
            )));
        }
        points.push(VariancePoint {
            epsilon,
            estimates,
            mean,
            variance,
            predicted_cost: predicted_cost(&plan),
            realized_steps: steps,
            wall_seconds: wall,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.epsilon.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.variance.log2()).collect();
    Ok(VarianceStudy {
        functional: phi.name().to_string(),
        fit: ols(&xs, &ys)?,
        points,
    })
}

/// Fits `log2 predicted_cost` on `log2 ε` for plans built from `template`.
pub fn predicted_cost_fit(template: &PlanInputs, epsilons: &[f64]) -> Result<RegressionFit> {
    check_epsilons(epsilons)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &epsilon in epsilons {
        let plan = mlmc::plan(&PlanInputs { epsilon, ..*template })?;
        xs.push(epsilon.log2());
        ys.push(predicted_cost(&plan).log2());
    }
    ols(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostPoint {
    pub epsilon: f64,
    pub estimate: f64,
    pub predicted_cost: f64,
    pub realized_steps: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostStudy {
    pub points: Vec<CostPoint>,
    pub predicted_fit: RegressionFit,
    pub steps_fit: RegressionFit,
    /// Hardware dependent.
    pub wall_fit: RegressionFit,
}

impl CostStudy {
    /// Deterministic columns `epsilon, estimate, predicted_cost, realized_steps`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "estimate", "predicted_cost", "realized_steps"])?;
        for p in &self.points {
            w.write_record(&[
                format!("{:e}", p.epsilon),
                format!("{:e}", p.estimate),
                format!("{:e}", p.predicted_cost),
                p.realized_steps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `epsilon, wall_seconds`.
    pub fn write_timing_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "wall_seconds"])?;
        for p in &self.points {
            w.write_record(&[format!("{:e}", p.epsilon), format!("{:.6}", p.wall_seconds)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One estimate per `ε`, recording predicted cost, realized steps and wall-clock time.
pub fn cost_study(
    model: &RegimeModel,
    driver: &JumpDriver,
    phi: &Functional,
    epsilons: &[f64],
    template: &PlanInputs,
    options: &EstimateOptions,
    root_seed: u64,
) -> Result<CostStudy> {
    check_epsilons(epsilons)?;
    let mut points = Vec::with_capacity(epsilons.len());
    for (i, &epsilon) in epsilons.iter().enumerate() {
        let plan = mlmc::plan(&PlanInputs { epsilon, ..*template })?;
        let start = Instant::now();
        let e = mlmc::estimate_with(&plan, model, driver, phi, options, repetition_seed(root_seed, i, 0))?;
        points.push(CostPoint {
            epsilon,
            estimate: e.estimate,
            predicted_cost: predicted_cost(&plan),
            realized_steps: e.total_steps,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.epsilon.log2()).collect();
    let fit = |f: &dyn Fn(&CostPoint) -> f64| -> Result<RegressionFit> {
        ols(&xs, &points.iter().map(|p| f(p).log2()).collect::<Vec<_>>())
    };
    Ok(CostStudy {
        predicted_fit: fit(&|p| p.predicted_cost)?,
        steps_fit: fit(&|p| p.realized_steps as f64)?,
        wall_fit: fit(&|p| p.wall_seconds.max(1e-9))?,
        points,
    })
}

/// Mean-square gaps `E|X_t - Y_t|^2` of paired paths started at `x0` and `y0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionResult {
    pub times: Vec<f64>,
    pub mean_gap: Vec<f64>,
    pub initial_gap: f64,
    pub samples: usize,
}

impl ContractionResult {
    /// `mean_gap / |x0 - y0|^2`; `None` when the starts coincide.
    pub fn normalized(&self) -> Option<Vec<f64>> {
        (self.initial_gap > 0.0).then(|| self.mean_gap.iter().map(|g| g / self.initial_gap).collect())
    }
}

/// Runs `samples` pairs with shared noise at step parameter `step` and
/// averages the squared gap at every time in `t_grid` (sorted, within `(0, max]`).
#[allow(clippy::too_many_arguments)]
pub fn contraction_test(
    model: &RegimeModel,
    driver: &JumpDriver,
    step: f64,
    x0: &[f64],
    y0: &[f64],
    t_grid: &[f64],
    samples: usize,
    root_seed: u64,
) -> Result<ContractionResult> {
    if t_grid.is_empty() {
        return Err(Error::config("t_grid", "need at least one observation time"));
    }
    if samples == 0 {
        return Err(Error::config("samples", "need at least 1 sample"));
    }
    let horizon = t_grid.iter().cloned().fold(0.0, f64::max);
    let tree = SeedTree::new(root_seed);
    let runs: Vec<Result<Vec<f64>>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut streams = tree.sample_streams(0, i);
            let obs = simulate_paired_starts(model, driver, step, x0, y0, horizon, t_grid, &mut streams)?;
            Ok(obs.iter().map(|(x, y)| linalg::dist_sq(x, y)).collect())
        })
        .collect();
    let mut sums = vec![0.0; t_grid.len()];
    for r in runs {
        for (s, g) in sums.iter_mut().zip(r?) {
            *s += g;
        }
    }
    Ok(ContractionResult {
        times: t_grid.to_vec(),
        mean_gap: sums.iter().map(|s| s / samples as f64).collect(),
        initial_gap: linalg::dist_sq(x0, y0),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::zero_model;

    #[test]
    fn ols_recovers_exact_line() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64 * 0.5 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -1.7 * x + 0.3).collect();
        let f = ols(&xs, &ys).unwrap();
        assert!((f.slope + 1.7).abs() < 1e-12);
        assert!((f.intercept - 0.3).abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
        assert_eq!(f.points, 7);
    }

    #[test]
    fn ols_rejects_repeated_abscissa() {
        assert!(matches!(
            ols(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateRegression(_))
        ));
        assert!(ols(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn synthetic_rate() {
        let levels: Vec<u32> = (2..=6).collect();
        let mse: Vec<f64> = levels.iter().map(|&l| 2f64.powf(-1.2 * l as f64)).collect();
        let r = fit_rate_points(&levels, &mse).unwrap();
        assert!((r.lambda0 - 0.6).abs() < 1e-12);
        assert!((r.fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mse_is_excluded() {
        let r = fit_rate_points(&[1, 2, 3], &[0.0, 0.25, 0.0625]).unwrap();
        assert_eq!(r.excluded, vec![1]);
        assert!((r.lambda0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn builtin_values() {
        let f = builtin_functionals(3).unwrap();
        assert_eq!(f[0].eval(&[1.0, 1.0, 1.0]), 3.0);
        assert_eq!(f[1].eval(&[1.0, 2.0, 3.0]), 14.0);
        assert_eq!(f[2].eval(&[0.0, 0.0, 0.0]), 0.0);
        assert!(!f[1].lipschitz().is_global());
        assert!(builtin_functionals(2).is_err());
        assert!(builtin_functional("phi4", 3).is_err());
    }

    #[test]
    fn zero_dynamics_have_zero_mse() {
        let m = zero_model(3, 2).unwrap();
        let t = strong_error_table(
            &m,
            &JumpDriver::none(3),
            &LevelLadder::unit(2).unwrap(),
            &[1, 2],
            1.0,
            4,
            3,
        )
        .unwrap();
        assert_eq!(t.mse, vec![0.0, 0.0]);
    }

    #[test]
    fn strong_error_needs_consecutive_levels() {
        let m = zero_model(1, 1).unwrap();
        let d = JumpDriver::none(1);
        let lad = LevelLadder::unit(2).unwrap();
        assert!(strong_error_table(&m, &d, &lad, &[2], 1.0, 4, 0).is_err());
        assert!(strong_error_table(&m, &d, &lad, &[2, 4], 1.0, 4, 0).is_err());
        assert!(strong_error_table(&m, &d, &lad, &[2, 3], 1.0, 1, 0).is_err());
    }

    #[test]
    fn epsilon_list_checks() {
        assert!(check_epsilons(&[0.1]).is_err());
        assert!(check_epsilons(&[0.1, 0.1]).is_err());
        assert!(check_epsilons(&[0.1, -0.1]).is_err());
        assert!(check_epsilons(&[0.1, 0.05]).is_ok());
    }

    #[test]
    fn equal_starts_have_zero_gap() {
        let m = crate::benchmark_model();
        let r = contraction_test(
            &m,
            &JumpDriver::benchmark_finite(),
            0.25,
            &[0.5, 0.0, 0.0],
            &[0.5, 0.0, 0.0],
            &[0.5, 1.0],
            3,
            9,
        )
        .unwrap();
        assert_eq!(r.mean_gap, vec![0.0, 0.0]);
        assert!(r.normalized().is_none());
    }
}
