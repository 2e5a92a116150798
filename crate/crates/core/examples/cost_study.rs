//! Predicted cost `Σ N_l T M^l` of the planner and realized step counts.
//!
//! ```text
//! cargo run --release --example cost_study
//! ```

use taem_mlmc::analysis::{builtin_functional, cost_study, predicted_cost_fit};
use taem_mlmc::mlmc::{EstimateOptions, PlanInputs};
use taem_mlmc::{benchmark_model, JumpDriver};

fn main() -> taem_mlmc::Result<()> {
    let model = benchmark_model();
    let driver = JumpDriver::benchmark_finite();
    let phi = builtin_functional("phi1", 3)?;
    let template = PlanInputs {
        epsilon: 1.0,
        alpha: -1.0,
        k0: 1e-2,
        k1: 2.5,
        k2: 0.2,
        ratio: 2,
        l_phi: phi.lipschitz().constant(),
    };

    let tiny: Vec<f64> = (4..=16).map(|k| 2f64.powi(-k)).collect();
    let f = predicted_cost_fit(&template, &tiny)?;
    println!("planner only, eps in [2^-16, 2^-4]: slope {:.3}", f.slope);

    let study = cost_study(&model, &driver, &phi, &[0.4, 0.2, 0.1], &template, &EstimateOptions::default(), 3)?;
    for p in &study.points {
        println!(
            "eps {:<5} predicted {:>10.0} realized steps {:>10} ({:.2}s)",
            p.epsilon, p.predicted_cost, p.realized_steps, p.wall_seconds
        );
    }
    println!("predicted slope {:.3}", study.predicted_fit.slope);
    println!("realized step slope {:.3}", study.steps_fit.slope);
    println!("wall-clock slope {:.3}", study.wall_fit.slope);
    Ok(())
}
