//! Variance of repeated multilevel estimates against the target accuracy.
//!
//! ```text
//! cargo run --release --example variance_study -- [phi1|phi2|phi3]
//! ```

use taem_mlmc::analysis::{builtin_functional, variance_study};
use taem_mlmc::mlmc::{EstimateOptions, PlanInputs};
use taem_mlmc::{benchmark_model, JumpDriver};

fn main() -> taem_mlmc::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "phi1".into());
    let model = benchmark_model();
    let driver = JumpDriver::benchmark_finite();
    let phi = builtin_functional(&name, 3)?;

    // Constants of the order a pilot run reports for phi1.
    let template = PlanInputs {
        epsilon: 1.0,
        alpha: -1.0,
        k0: 1e-2,
        k1: 2.5,
        k2: 0.2,
        ratio: 2,
        l_phi: phi.lipschitz().constant(),
    };
    let epsilons = [0.8, 0.4, 0.2, 0.1];
    let repetitions = [16, 8, 4, 2];
    let study = variance_study(
        &model,
        &driver,
        &phi,
        &epsilons,
        &repetitions,
        &template,
        &EstimateOptions::default(),
        7,
    )?;
    for p in &study.points {
        println!("eps {:<6} reps {:>2}  mean {:.4}  var {:.3e}", p.epsilon, p.estimates.len(), p.mean, p.variance);
    }
    println!("log2 Var = {:.3} log2 eps + {:.3} (R^2 {:.3})", study.fit.slope, study.fit.intercept, study.fit.r_squared);
    Ok(())
}
