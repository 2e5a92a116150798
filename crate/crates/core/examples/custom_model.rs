//! A user-defined two-regime double-well model with a skewed switching
//! generator and a compensated compound Poisson driver.
//!
//! ```text
//! cargo run --release --example custom_model
//! ```

use std::sync::Arc;

use taem_mlmc::model::FnCoefficients;
use taem_mlmc::taem::simulate_terminal;
use taem_mlmc::{Generator, JumpDriver, ModelMetadata, RegimeModel, SampleStreams, SeedTree, TaemConfig};

fn main() -> taem_mlmc::Result<()> {
    let coefficients = FnCoefficients::new(
        |regime, x, out| {
            let tilt = if regime == 0 { 0.2 } else { -0.2 };
            out[0] = tilt + x[0] - x[0].powi(3);
        },
        |_, x, out| out[0] = 0.3 * (1.0 + x[0] * x[0]).sqrt(),
        |_, _, out| out[0] = 0.1,
    );
    let meta = ModelMetadata {
        drift_growth: 2.0,
        diffusion_growth: 1.0,
        moment_order: 4.0,
        zeta0: -0.5,
        zeta1: 2.0,
        contraction_rate: -0.5,
        ..Default::default()
    };
    let generator = Generator::two_state(0.5, 2.0)?;
    let model = RegimeModel::new("double-well", 1, generator, Arc::new(coefficients), meta)?
        .with_initial_state(vec![-1.0])?;
    // Jumps with nonzero mean are compensated so the driver stays centered.
    let driver = JumpDriver::compound_poisson(1, 3.0, 0.2, 0.3)?;

    let config = TaemConfig::new(0.05, 20.0)?;
    let tree = SeedTree::new(99);
    let n = 2000u64;
    let mut right = 0;
    for i in 0..n {
        let mut streams: SampleStreams = tree.sample_streams(0, i);
        let r = simulate_terminal(&model, &driver, &config, &mut streams)?;
        if r.terminal[0] > 0.0 {
            right += 1;
        }
    }
    println!("fraction in the right well at T = 20: {:.3}", right as f64 / n as f64);
    Ok(())
}
