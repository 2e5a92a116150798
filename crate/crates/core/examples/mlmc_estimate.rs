//! Multilevel estimate of the invariant mean of `x1 + x2 + x3` for the
//! benchmark model, with constants fitted from a pilot run.
//!
//! ```text
//! cargo run --release --example mlmc_estimate -- [epsilon]
//! ```

use taem_mlmc::analysis::builtin_functional;
use taem_mlmc::mlmc::{self, EstimateOptions, PlanInputs};
use taem_mlmc::{benchmark_model, JumpDriver, LevelLadder};

fn main() -> taem_mlmc::Result<()> {
    let epsilon: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let model = benchmark_model();
    let driver = JumpDriver::benchmark_finite();
    let phi = builtin_functional("phi1", 3)?;
    let ladder = LevelLadder::new(0.25, 2)?;

    let cal = mlmc::calibrate_constants(&model, &driver, &phi, &ladder, 3.0, 4, 400, 1)?;
    let rms = mlmc::pilot_rms(&model, &driver, &ladder, 3.0, 400, 1)?;
    let l_phi = phi.lipschitz().constant();
    let inputs = PlanInputs {
        epsilon,
        alpha: model.meta().contraction_rate,
        k0: cal.k0,
        k1: mlmc::default_k1(l_phi, model.x0(), rms),
        k2: cal.k2,
        ratio: 2,
        l_phi,
    };
    let plan = mlmc::plan(&inputs)?;
    println!("pilot decay exponent {:.3}, K0 = {:.3e}, K2 = {:.3e}", cal.decay_exponent(), cal.k0, cal.k2);
    println!("T = {}, L = {}, N = {:?}", plan.horizon, plan.max_level, plan.samples);

    let opts = EstimateOptions {
        ladder,
        ..Default::default()
    };
    let est = mlmc::estimate_with(&plan, &model, &driver, &phi, &opts, 2024)?;
    for l in &est.levels {
        println!("level {}: N = {}, mean = {:+.5e}, var = {:.3e}", l.level, l.samples, l.mean, l.variance);
    }
    println!(
        "estimate {:.5} +/- {:.5} ({} steps, {:.1}s)",
        est.estimate,
        est.variance_estimate().sqrt(),
        est.total_steps,
        est.wall_seconds
    );
    Ok(())
}
