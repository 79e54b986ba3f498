//! Generate a small synthetic driving dataset and look at its composition.
//!
//! Run with: `cargo run --release --example simulate_dataset`

use sideslip::data::write_dataset;
use sideslip::sim::{generate_dataset, SimConfig};
use sideslip::RAD2DEG;

fn main() -> sideslip::Result<()> {
    let cfg = SimConfig { hours: 0.05, seed: 7, ..SimConfig::default() };
    let scenarios = generate_dataset(&cfg)?;

    println!("{} scenarios:", scenarios.len());
    let mut total = 0usize;
    let mut tail = 0usize;
    for s in &scenarios {
        let max_beta = s.beta_gt.iter().fold(0.0f64, |m, b| m.max(b.abs())) * RAD2DEG;
        let mean_v = s.frames.iter().map(|f| f.v_s).sum::<f64>() / s.len() as f64;
        println!(
            "  {:<28} {:>5.1} s  v ~ {:>4.1} m/s  max|beta| {:>5.2} deg",
            s.id,
            s.len() as f64 / s.rate_hz,
            mean_v,
            max_beta
        );
        total += s.len();
        tail += s.beta_gt.iter().filter(|b| b.abs() * RAD2DEG > 2.0).count();
    }
    println!(
        "\n{total} samples, {:.1}% above 2 deg (long tail)",
        100.0 * tail as f64 / total as f64
    );

    let dir = std::env::temp_dir().join("sideslip_demo_dataset");
    write_dataset(&scenarios, &dir)?;
    println!("dataset written to {}", dir.display());
    Ok(())
}
