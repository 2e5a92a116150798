//! Sampled check of the dissipativity and contraction inequalities.
//!
//! ```text
//! cargo run --release --example probe_conditions
//! ```

use rand::{Rng, SeedableRng};
use taem_mlmc::model::probe_conditions;
use taem_mlmc::noise::StreamRng;
use taem_mlmc::{benchmark_model, JumpDriver};

fn main() -> taem_mlmc::Result<()> {
    let model = benchmark_model();
    let mut rng = StreamRng::seed_from_u64(5);
    let mut point = || -> Vec<f64> { (0..3).map(|_| rng.random_range(-3.0..=3.0)).collect() };
    let cloud: Vec<Vec<f64>> = (0..5000).map(|_| point()).collect();
    let pairs: Vec<_> = (0..5000).map(|_| (point(), point())).collect();

    for driver in [JumpDriver::benchmark_finite(), JumpDriver::benchmark_infinite()] {
        let r = probe_conditions(&model, &driver, &cloud, &pairs)?;
        println!(
            "{:<16} zeta0 >= {:.3}  zeta1 >= {:.3}  alpha >= {:.3}  violations {}",
            driver.variant_name(),
            r.zeta0_hat.unwrap_or(f64::NAN),
            r.zeta1_hat,
            r.alpha_hat.unwrap_or(f64::NAN),
            r.violations.len()
        );
    }
    let m = model.meta();
    println!("declared: zeta0 = {}, zeta1 = {}, alpha = {}", m.zeta0, m.zeta1, m.contraction_rate);
    Ok(())
}
