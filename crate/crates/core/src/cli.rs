//! Command-line front end.
//!
//! Every command reads a [`RunConfig`] (defaults, then `--config`, then
//! flags), writes CSV files into the output directory and prints a short
//! plain-text summary. Wall-clock times only appear in `*_timing.csv` files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 simulation failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};

use crate::analysis::{self, fit_rate, strong_error_table, RegressionFit, VarianceStudy};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::mlmc::{self, Calibration, EstimateOptions, PlanInputs};
use crate::model::{probe_conditions, Functional, RegimeModel};
use crate::noise::{JumpDriver, StreamRng};
use crate::taem::{simulate_path, LevelLadder, TaemConfig};

#[derive(Debug, Parser)]
#[command(name = "taem", version, about = "Tamed-adaptive Euler-Maruyama and multilevel Monte Carlo for invariant measures")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed of all random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Model name: benchmark, linear or zero.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Jump driver: compound-poisson, bilateral-gamma or none.
    #[arg(long, global = true)]
    pub driver: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and write its grid points.
    Path(PathArgs),
    /// Mean squared error between consecutive levels and the fitted rate.
    StrongError(StrongErrorArgs),
    /// Plan and run a multilevel estimate.
    Mlmc(MlmcArgs),
    /// Variance of repeated estimates against the target accuracy.
    VarianceStudy(StudyArgs),
    /// Predicted and realized cost against the target accuracy.
    CostStudy(StudyArgs),
    /// Spot-check the dissipativity and contraction inequalities.
    ProbeConditions(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StrongErrorArgs {
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    /// Comma-separated consecutive levels.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<u32>>,
}

#[derive(Debug, Args)]
pub struct MlmcArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub k0: Option<f64>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Comma-separated accuracies.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Comma-separated repetition counts (variance study).
    #[arg(long, value_delimiter = ',')]
    pub repetitions: Option<Vec<usize>>,
    /// Comma-separated functional names.
    #[arg(long, value_delimiter = ',')]
    pub functionals: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub cloud_size: Option<usize>,
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_simulation_failure() || matches!(e, Error::DegenerateVariance(_) | Error::DegenerateRegression(_)) {
        3
    } else {
        2
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Builds the effective configuration of `cli`.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(m) = &cli.model {
        cfg.model.name = m.clone();
    }
    if let Some(d) = &cli.driver {
        cfg.driver.kind = d.clone();
    }
    match &cli.command {
        Command::Path(a) => {
            set(&mut cfg.path.horizon, a.horizon);
            set(&mut cfg.path.step, a.step);
        }
        Command::StrongError(a) => {
            set(&mut cfg.strong_error.samples, a.samples);
            set(&mut cfg.strong_error.horizons, a.horizons.clone());
            set(&mut cfg.strong_error.levels, a.levels.clone());
        }
        Command::Mlmc(a) => {
            set(&mut cfg.mlmc.epsilon, a.epsilon);
            set(&mut cfg.mlmc.functional, a.functional.clone());
            cfg.mlmc.k0 = a.k0.or(cfg.mlmc.k0);
            cfg.mlmc.k1 = a.k1.or(cfg.mlmc.k1);
            cfg.mlmc.k2 = a.k2.or(cfg.mlmc.k2);
            cfg.model.alpha = a.alpha.or(cfg.model.alpha);
        }
        Command::VarianceStudy(a) | Command::CostStudy(a) => {
            set(&mut cfg.study.epsilons, a.epsilons.clone());
            set(&mut cfg.study.functionals, a.functionals.clone());
            match a.repetitions.clone() {
                Some(r) => cfg.study.repetitions = r,
                None if cfg.study.repetitions.len() != cfg.study.epsilons.len() => {
                    cfg.study.repetitions = default_repetitions(cfg.study.epsilons.len());
                }
                None => {}
            }
        }
        Command::ProbeConditions(a) => {
            set(&mut cfg.probe.cloud_size, a.cloud_size);
            set(&mut cfg.probe.pairs, a.pairs);
            set(&mut cfg.probe.half_width, a.half_width);
        }
    }
    Ok(cfg)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// `2^(n+4), ..., 32, 16, ...` down to 2 for the finest accuracy.
fn default_repetitions(n: usize) -> Vec<usize> {
    (0..n).map(|k| 2usize << (n - 1 - k).min(30)).collect()
}

fn execute(cli: Cli) -> Result<String> {
    let cfg = resolve_config(&cli)?;
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Path(_) => cmd_path(&cfg),
        Command::StrongError(_) => cmd_strong_error(&cfg),
        Command::Mlmc(_) => cmd_mlmc(&cfg),
        Command::VarianceStudy(_) => cmd_variance_study(&cfg),
        Command::CostStudy(_) => cmd_cost_study(&cfg),
        Command::ProbeConditions(_) => cmd_probe_conditions(&cfg),
    })
}

fn create(cfg: &RunConfig, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(&cfg.out)?;
    Ok(BufWriter::new(File::create(cfg.out.join(name))?))
}

fn finish(cfg: &RunConfig, name: &str, summary: String) -> Result<String> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join(name), &summary)?;
    Ok(summary)
}

fn fit_line(label: &str, f: &RegressionFit) -> String {
    format!(
        "{label}: slope = {:.4}, intercept = {:.4}, R^2 = {:.4}, points = {}\n",
        f.slope, f.intercept, f.r_squared, f.points
    )
}

/// Writes `path.csv` with columns `t, regime, x_1..x_d`.
pub fn cmd_path(cfg: &RunConfig) -> Result<String> {
    let model = cfg.build_model()?;
    let driver = cfg.build_driver()?;
    let tc = TaemConfig::new(cfg.path.step, cfg.path.horizon)?;
    let mut streams = crate::noise::SampleStreams::from_seed(cfg.seed);
    let r = simulate_path(&model, &driver, &tc, &mut streams)?;
    r.write_skeleton_csv(create(cfg, "path.csv")?)?;
    let summary = format!(
        "path: model {}, driver {}, T = {}, step = {}, {} steps\nterminal = {:?}\n",
        model.name(),
        driver.variant_name(),
        tc.horizon,
        tc.step,
        r.steps,
        r.terminal
    );
    finish(cfg, "path_summary.txt", summary)
}

/// Writes `strong_error.csv` (one block of rows per horizon) and `strong_error_fit.csv`.
pub fn cmd_strong_error(cfg: &RunConfig) -> Result<String> {
    let model = cfg.build_model()?;
    let driver = cfg.build_driver()?;
    let s = &cfg.strong_error;
    let ladder = LevelLadder::unit(s.ratio)?;
    let mut table_w = csv::Writer::from_writer(create(cfg, "strong_error.csv")?);
    analysis::write_table_header(&mut table_w)?;
    let mut fit_w = csv::Writer::from_writer(create(cfg, "strong_error_fit.csv")?);
    fit_w.write_record(["horizon", "lambda0", "slope", "intercept", "r_squared", "points"])?;
    let mut summary = format!(
        "strong error: model {}, driver {}, {} pairs per level\n",
        model.name(),
        driver.variant_name(),
        s.samples
    );
    for &horizon in &s.horizons {
        let table = strong_error_table(&model, &driver, &ladder, &s.levels, horizon, s.samples, cfg.seed)?;
        table.write_rows(&mut table_w)?;
        let rate = fit_rate(&table)?;
        fit_w.write_record(&[
            horizon.to_string(),
            format!("{:.4}", rate.lambda0),
            format!("{:.4}", rate.fit.slope),
            format!("{:.4}", rate.fit.intercept),
            format!("{:.4}", rate.fit.r_squared),
            rate.fit.points.to_string(),
        ])?;
        let row: Vec<String> = table.log2_mse().iter().map(|v| format!("{v:.2}")).collect();
        let _ = writeln!(summary, "T = {horizon}: log2 MSE = [{}], Lambda0 = {:.3}", row.join(", "), rate.lambda0);
    }
    table_w.flush()?;
    fit_w.flush()?;
    finish(cfg, "strong_error_summary.txt", summary)
}

/// Error-model constants used by the planner and where they came from.
#[derive(Debug, Clone)]
pub struct ResolvedConstants {
    pub alpha: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub calibration: Option<Calibration>,
    pub pilot_rms: Option<f64>,
}

impl ResolvedConstants {
    pub fn plan_inputs(&self, epsilon: f64, ratio: u32, l_phi: f64) -> PlanInputs {
        PlanInputs {
            epsilon,
            alpha: self.alpha,
            k0: self.k0,
            k1: self.k1,
            k2: self.k2,
            ratio,
            l_phi,
        }
    }
}

/// Takes configured constants and fits the missing ones with a pilot run.
pub fn resolve_constants(
    cfg: &RunConfig,
    model: &RegimeModel,
    driver: &JumpDriver,
    phi: &Functional,
) -> Result<ResolvedConstants> {
    let m = &cfg.mlmc;
    let alpha = model.meta().contraction_rate;
    if !(alpha < 0.0) {
        return Err(Error::NotErgodic(alpha));
    }
    let ladder = cfg.mlmc_ladder()?;
    let pilot_seed = crate::noise::SeedTree::new(cfg.seed).child(0x50_494c_4f54).root();
    let calibration = if m.k0.is_none() || m.k2.is_none() {
        Some(mlmc::calibrate_constants(
            model,
            driver,
            phi,
            &ladder,
            m.pilot_horizon,
            m.pilot_levels,
            m.pilot_samples,
            pilot_seed,
        )?)
    } else {
        None
    };
    let pilot_rms = match m.k1 {
        Some(_) => None,
        None => Some(mlmc::pilot_rms(model, driver, &ladder, m.pilot_horizon, m.pilot_samples, pilot_seed)?),
    };
    let l_phi = phi.lipschitz().constant();
    Ok(ResolvedConstants {
        alpha,
        k0: m.k0.or(calibration.as_ref().map(|c| c.k0)).expect("k0 resolved"),
        k1: m
            .k1
            .unwrap_or_else(|| mlmc::default_k1(l_phi, model.x0(), pilot_rms.expect("rms resolved"))),
        k2: m.k2.or(calibration.as_ref().map(|c| c.k2)).expect("k2 resolved"),
        calibration,
        pilot_rms,
    })
}

fn estimate_options(cfg: &RunConfig) -> Result<EstimateOptions> {
    Ok(EstimateOptions {
        ladder: cfg.mlmc_ladder()?,
        failure_threshold: cfg.mlmc.failure_threshold,
    })
}

fn write_constants(cfg: &RunConfig, name: &str, rows: &[(String, &ResolvedConstants)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(cfg, name)?);
    w.write_record(["functional", "alpha", "k0", "k1", "k2", "calibrated", "decay_exponent", "pilot_rms"])?;
    for (name, c) in rows {
        w.write_record(&[
            name.clone(),
            c.alpha.to_string(),
            format!("{:e}", c.k0),
            format!("{:e}", c.k1),
            format!("{:e}", c.k2),
            c.calibration.is_some().to_string(),
            c.calibration
                .as_ref()
                .map_or(String::new(), |c| format!("{:.4}", c.decay_exponent())),
            c.pilot_rms.map_or(String::new(), |r| format!("{r:.6}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `mlmc_levels.csv`, `mlmc_summary.csv`, `mlmc_constants.csv` and `mlmc_timing.csv`.
pub fn cmd_mlmc(cfg: &RunConfig) -> Result<String> {
    let model = cfg.build_model()?;
    let driver = cfg.build_driver()?;
    let phi = cfg.functional(&cfg.mlmc.functional)?;
    let consts = resolve_constants(cfg, &model, &driver, &phi)?;
    let inputs = consts.plan_inputs(cfg.mlmc.epsilon, cfg.mlmc.ratio, phi.lipschitz().constant());
    let plan = mlmc::plan(&inputs)?;
    let est = mlmc::estimate_with(&plan, &model, &driver, &phi, &estimate_options(cfg)?, cfg.seed)?;

    est.write_levels_csv(create(cfg, "mlmc_levels.csv")?)?;
    est.write_summary_csv(create(cfg, "mlmc_summary.csv")?)?;
    write_constants(cfg, "mlmc_constants.csv", &[(phi.name().to_string(), &consts)])?;
    let mut t = csv::Writer::from_writer(create(cfg, "mlmc_timing.csv")?);
    t.write_record(["wall_seconds"])?;
    t.write_record([format!("{:.6}", est.wall_seconds)])?;
    t.flush()?;

    let mut s = format!(
        "mlmc: {} on model {}, driver {}, epsilon = {}\n",
        phi.name(),
        model.name(),
        driver.variant_name(),
        plan.epsilon()
    );
    let _ = writeln!(
        s,
        "constants: alpha = {}, K0 = {:.4e}, K1 = {:.4e}, K2 = {:.4e}",
        consts.alpha, consts.k0, consts.k1, consts.k2
    );
    let _ = writeln!(
        s,
        "plan: T = {}{}, L = {}{}, N = {:?}",
        plan.horizon,
        if plan.horizon_clamped { " (clamped)" } else { "" },
        plan.max_level,
        if plan.level_clamped { " (clamped)" } else { "" },
        plan.samples
    );
    for l in &est.levels {
        let _ = writeln!(s, "  level {}: mean = {:.6e}, var = {:.4e}, failures = {}", l.level, l.mean, l.variance, l.failures);
    }
    let _ = writeln!(
        s,
        "estimate = {:.6}, estimator variance = {:.3e}, steps = {}",
        est.estimate,
        est.variance_estimate(),
        est.total_steps
    );
    finish(cfg, "mlmc_summary.txt", s)
}

fn study_functionals(cfg: &RunConfig) -> Result<Vec<Functional>> {
    cfg.study.functionals.iter().map(|f| cfg.functional(f)).collect()
}

/// Runs the variance study for every configured functional with the
/// constants [`resolve_constants`] picks for it.
pub fn run_variance_studies(cfg: &RunConfig) -> Result<Vec<(ResolvedConstants, VarianceStudy)>> {
    let model = cfg.build_model()?;
    let driver = cfg.build_driver()?;
    let opts = estimate_options(cfg)?;
    let mut out = Vec::new();
    for (k, phi) in study_functionals(cfg)?.iter().enumerate() {
        let c = resolve_constants(cfg, &model, &driver, phi)?;
        let template = c.plan_inputs(cfg.study.epsilons[0], cfg.mlmc.ratio, phi.lipschitz().constant());
        let study = analysis::variance_study(
            &model,
            &driver,
            phi,
            &cfg.study.epsilons,
            &cfg.study.repetitions,
            &template,
            &opts,
            analysis::repetition_seed(cfg.seed, usize::MAX, k),
        )?;
        out.push((c, study));
    }
    Ok(out)
}

/// Writes `variance_study.csv`, `variance_fit.csv`, `variance_constants.csv`.
pub fn cmd_variance_study(cfg: &RunConfig) -> Result<String> {
    let model = cfg.build_model()?;
    let driver = cfg.build_driver()?;
    let studies = run_variance_studies(cfg)?;
    let mut points_w = create(cfg, "variance_study.csv")?;
    let mut fit_w = csv::Writer::from_writer(create(cfg, "variance_fit.csv")?);
    fit_w.write_record(["functional", "slope", "intercept", "r_squared", "points"])?;
    let mut summary = format!("variance study: model {}, driver {}\n", model.name(), driver.variant_name());
    for (k, (_, study)) in studies.iter().enumerate() {
        if k == 0 {
            study.write_csv(&mut points_w)?;
        } else {
            let mut buf = Vec::new();
            study.write_csv(&mut buf)?;
            let body = buf.splitn(2, |&b| b == b'\n').nth(1).unwrap_or(&[]);
            std::io::Write::write_all(&mut points_w, body)?;
        }
        fit_w.write_record(&[
            study.functional.clone(),
            format!("{:.4}", study.fit.slope),
            format!("{:.4}", study.fit.intercept),
            format!("{:.4}", study.fit.r_squared),
            study.fit.points.to_string(),
        ])?;
        summary.push_str(&fit_line(&format!("log2 Var vs log2 eps, {}", study.functional), &study.fit));
    }
    fit_w.flush()?;
    let rows: Vec<(String, &ResolvedConstants)> = studies.iter().map(|(c, s)| (s.functional.clone(), c)).collect();
    write_constants(cfg, "variance_constants.csv", &rows)?;
    finish(cfg, "variance_summary.txt", summary)
}

/// Writes `cost_study.csv`, `cost_fit.csv` and `cost_timing.csv`.
pub fn cmd_cost_study(cfg: &RunConfig) -> Result<String> {
    let model = cfg.build_model()?;
    let driver = cfg.build_driver()?;
    let opts = estimate_options(cfg)?;
    let mut summary = format!("cost study: model {}, driver {}\n", model.name(), driver.variant_name());
    let mut data_w = csv::Writer::from_writer(create(cfg, "cost_study.csv")?);
    data_w.write_record(["functional", "epsilon", "estimate", "predicted_cost", "realized_steps"])?;
    let mut fit_w = csv::Writer::from_writer(create(cfg, "cost_fit.csv")?);
    fit_w.write_record(["functional", "cost", "slope", "intercept", "r_squared", "points"])?;
    let mut time_w = csv::Writer::from_writer(create(cfg, "cost_timing.csv")?);
    time_w.write_record(["functional", "epsilon", "wall_seconds", "fit_slope", "fit_intercept", "fit_r_squared"])?;
    for (k, phi) in study_functionals(cfg)?.iter().enumerate() {
        let c = resolve_constants(cfg, &model, &driver, phi)?;
        let template = c.plan_inputs(cfg.study.epsilons[0], cfg.mlmc.ratio, phi.lipschitz().constant());
        let study = analysis::cost_study(
            &model,
            &driver,
            phi,
            &cfg.study.epsilons,
            &template,
            &opts,
            analysis::repetition_seed(cfg.seed, usize::MAX, k),
        )?;
        for p in &study.points {
            data_w.write_record(&[
                phi.name().to_string(),
                format!("{:e}", p.epsilon),
                format!("{:e}", p.estimate),
                format!("{:e}", p.predicted_cost),
                p.realized_steps.to_string(),
            ])?;
            time_w.write_record(&[
                phi.name().to_string(),
                format!("{:e}", p.epsilon),
                format!("{:.6}", p.wall_seconds),
                format!("{:.4}", study.wall_fit.slope),
                format!("{:.4}", study.wall_fit.intercept),
                format!("{:.4}", study.wall_fit.r_squared),
            ])?;
        }
        for (kind, f) in [("predicted", &study.predicted_fit), ("steps", &study.steps_fit)] {
            fit_w.write_record(&[
                phi.name().to_string(),
                kind.to_string(),
                format!("{:.4}", f.slope),
                format!("{:.4}", f.intercept),
                format!("{:.4}", f.r_squared),
                f.points.to_string(),
            ])?;
        }
        summary.push_str(&fit_line(&format!("{} predicted cost", phi.name()), &study.predicted_fit));
        summary.push_str(&fit_line(&format!("{} realized steps", phi.name()), &study.steps_fit));
        summary.push_str(&fit_line(&format!("{} wall clock", phi.name()), &study.wall_fit));
    }
    data_w.flush()?;
    fit_w.flush()?;
    time_w.flush()?;
    finish(cfg, "cost_summary.txt", summary)
}

/// Writes `probe.csv` (estimated constants) and `probe_violations.csv`.
pub fn cmd_probe_conditions(cfg: &RunConfig) -> Result<String> {
    let model = cfg.build_model()?;
    let driver = cfg.build_driver()?;
    let p = &cfg.probe;
    let mut rng = StreamRng::seed_from_u64(cfg.seed);
    let d = model.dim();
    let point = |rng: &mut StreamRng| -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-p.half_width..=p.half_width)).collect()
    };
    let cloud: Vec<Vec<f64>> = (0..p.cloud_size).map(|_| point(&mut rng)).collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..p.pairs).map(|_| (point(&mut rng), point(&mut rng))).collect();
    let report = probe_conditions(&model, &driver, &cloud, &pairs)?;
    let meta = model.meta();

    let mut w = csv::Writer::from_writer(create(cfg, "probe.csv")?);
    w.write_record(["quantity", "declared", "estimated"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    w.write_record(["zeta0".into(), meta.zeta0.to_string(), opt(report.zeta0_hat)])?;
    w.write_record(["zeta1".into(), meta.zeta1.to_string(), format!("{:.6}", report.zeta1_hat)])?;
    w.write_record(["alpha".into(), meta.contraction_rate.to_string(), opt(report.alpha_hat)])?;
    w.flush()?;

    let mut v = csv::Writer::from_writer(create(cfg, "probe_violations.csv")?);
    v.write_record(["condition", "regime", "point", "other", "lhs", "bound"])?;
    let fmt_pt = |x: &[f64]| x.iter().map(|c| format!("{c:.6}")).collect::<Vec<_>>().join(" ");
    for viol in &report.violations {
        v.write_record(&[
            viol.condition.to_string(),
            viol.regime.to_string(),
            fmt_pt(&viol.point),
            viol.other.as_deref().map_or(String::new(), fmt_pt),
            format!("{:e}", viol.lhs),
            format!("{:e}", viol.bound),
        ])?;
    }
    v.flush()?;

    let summary = format!(
        "probe: model {}, driver {}, {} points, {} pairs in [-{w}, {w}]^{d}\n\
         zeta0: declared {}, smallest consistent {}\n\
         zeta1: declared {}, smallest consistent {:.4}\n\
         alpha: declared {}, smallest consistent {}\n\
         violations: {}\n",
        model.name(),
        driver.variant_name(),
        report.cloud_size,
        report.pair_count,
        meta.zeta0,
        opt(report.zeta0_hat),
        meta.zeta1,
        report.zeta1_hat,
        meta.contraction_rate,
        opt(report.alpha_hat),
        report.violations.len(),
        w = p.half_width,
    );
    finish(cfg, "probe_summary.txt", summary)
}
