//! Two paths from different starts driven by the same noise forget their
//! initial gap at an exponential rate.
//!
//! ```text
//! cargo run --release --example contraction
//! ```

use taem_mlmc::analysis::contraction_test;
use taem_mlmc::model::linear_test_model;
use taem_mlmc::{benchmark_model, JumpDriver};

fn main() -> taem_mlmc::Result<()> {
    let times = [0.5, 1.0, 2.0, 3.0, 5.0];

    let model = benchmark_model();
    let r = contraction_test(
        &model,
        &JumpDriver::benchmark_finite(),
        1.0 / 16.0,
        &[0.0; 3],
        &[1.0, 0.0, 0.0],
        &times,
        200,
        1,
    )?;
    println!("benchmark, |x0 - y0| = 1");
    for (t, g) in r.times.iter().zip(&r.mean_gap) {
        println!("  t = {t:<4} E|X - Y|^2 = {g:.4e}");
    }

    let linear = linear_test_model(3, 1.0, 0.0)?;
    let r = contraction_test(&linear, &JumpDriver::none(3), 1.0 / 256.0, &[0.0; 3], &[1.0, 0.0, 0.0], &times, 1, 1)?;
    println!("linear drift -x");
    for (t, g) in r.times.iter().zip(r.normalized().unwrap_or_default()) {
        println!("  t = {t:<4} gap ratio {g:.5}  exp(-2t) {:.5}", (-2.0 * t).exp());
    }
    Ok(())
}
