//! One benchmark path with its grid points written as CSV.
//!
//! ```text
//! cargo run --release --example simulate_path > path.csv
//! ```

use taem_mlmc::taem::simulate_path;
use taem_mlmc::{benchmark_model, JumpDriver, SampleStreams, TaemConfig};

fn main() -> taem_mlmc::Result<()> {
    let model = benchmark_model();
    let driver = JumpDriver::benchmark_finite();
    let config = TaemConfig::new(0.25, 5.0)?;
    let mut streams = SampleStreams::from_seed(11);

    let path = simulate_path(&model, &driver, &config, &mut streams)?;
    eprintln!("{} steps, terminal state {:?}", path.steps, path.terminal);
    path.write_skeleton_csv(std::io::stdout().lock())
}
