//! Strong error between consecutive levels for the benchmark model and the
//! fitted convergence rate.
//!
//! ```text
//! cargo run --release --example strong_error -- [samples] [horizon] [finite|infinite]
//! ```

use std::time::Instant;

use taem_mlmc::analysis::{fit_rate, strong_error_table};
use taem_mlmc::{benchmark_model, JumpDriver, LevelLadder};

fn main() -> taem_mlmc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let samples = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let horizon = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let driver = match args.get(3).map(String::as_str) {
        Some("infinite") => JumpDriver::benchmark_infinite(),
        _ => JumpDriver::benchmark_finite(),
    };

    let model = benchmark_model();
    let levels: Vec<u32> = (2..=6).collect();
    let start = Instant::now();
    let table = strong_error_table(&model, &driver, &LevelLadder::unit(2)?, &levels, horizon, samples, 2024)?;
    let rate = fit_rate(&table)?;

    println!("{} driver, T = {horizon}, {samples} pairs per level", driver.variant_name());
    println!("{:>5} {:>10} {:>12} {:>12}", "level", "log2 MSE", "steps(l)", "steps(l+1)");
    for (k, l) in table.levels.iter().enumerate() {
        println!(
            "{l:>5} {:>10.3} {:>12.1} {:>12.1}",
            table.mse[k].log2(),
            table.mean_coarse_steps[k],
            table.mean_fine_steps[k]
        );
    }
    println!("Lambda0 = {:.3} (R^2 = {:.4})", rate.lambda0, rate.fit.r_squared);
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
