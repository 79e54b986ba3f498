//! Empirical check that motion-model simplification errors propagate into
//! every residual channel at once: the sideslip residual of the geometric
//! model correlates with its yaw-rate residual.
//!
//! Run with: `cargo run --release --example hypothesis_check`

use sideslip::eval::residual_correlation;
use sideslip::sim::{generate_dataset, SimConfig};
use sideslip::vmm::collect_residuals_vmm1;

fn main() -> sideslip::Result<()> {
    let cfg = SimConfig { hours: 0.05, seed: 21, ..SimConfig::default() };
    let scenarios = generate_dataset(&cfg)?;
    let records = collect_residuals_vmm1(&scenarios, &cfg.geometry)?;
    let stats = residual_correlation(&records)?;

    println!("geometric-model residuals over {} steps", stats.n);
    println!("  Pearson r          {:.4}", stats.r);
    println!("  t statistic        {:.1}", stats.t_star);
    println!("  two-sided p value  {:.3e}", stats.p_value);
    println!(
        "  -> independence {} at the 99% level",
        if stats.reject_at_99 { "rejected" } else { "not rejected" }
    );

    // coarse scatter of the relationship
    println!("\n  e_yaw bin (rad/s)    mean e_beta (rad)");
    let mut bins = vec![(0.0f64, 0usize); 8];
    let max_yaw = records.iter().map(|r| r.e_yaw).fold(0.0f64, f64::max);
    for r in &records {
        let idx = ((r.e_yaw / max_yaw) * 7.99) as usize;
        bins[idx].0 += r.e_beta;
        bins[idx].1 += 1;
    }
    for (i, (sum, count)) in bins.iter().enumerate() {
        if *count == 0 {
            continue;
        }
        let mean = sum / *count as f64;
        println!(
            "  {:>6.3}..{:<6.3}      {:.5} {}",
            i as f64 / 8.0 * max_yaw,
            (i + 1) as f64 / 8.0 * max_yaw,
            mean,
            "*".repeat((mean * 2000.0) as usize)
        );
    }
    Ok(())
}
