//! Train the sequence model on a miniature dataset and watch the Student-t
//! head express uncertainty.
//!
//! Run with: `cargo run --release --example train_ml_toy`

use sideslip::data::{make_windows, scenario_split, SplitRatios};
use sideslip::ml::{predict_with_uncertainty, train_ml, Model, ModelConfig, TrainOptions};
use sideslip::pipeline::RunConfig;
use sideslip::sim::{generate_dataset, SimConfig};
use sideslip::RAD2DEG;

fn main() -> sideslip::Result<()> {
    let sim = SimConfig { hours: 0.05, seed: 5, ..SimConfig::default() };
    let scenarios = generate_dataset(&sim)?;
    let (train, val, test) = scenario_split(scenarios, SplitRatios::default(), 3)?;

    let cfg = ModelConfig {
        d: 16,
        heads: 2,
        l_obs: 30,
        b_ctx: 8,
        f_horizon: 3,
        u_factor: 4.0,
        d_ff: 32,
        seed: 1,
        delta_floor: false,
    };
    let wcfg = cfg.window();
    let collect = |set: &[sideslip::data::Scenario], stride: usize| -> sideslip::Result<Vec<_>> {
        let mut out = Vec::new();
        for s in set {
            out.extend(
                make_windows(s, &wcfg)?
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| i % stride == 0)
                    .map(|(_, w)| w),
            );
        }
        Ok(out)
    };
    let train_w = collect(&train, 10)?;
    let val_w = collect(&val, 10)?;
    let test_w = collect(&test, 25)?;
    println!(
        "{} train / {} val / {} test windows",
        train_w.len(),
        val_w.len(),
        test_w.len()
    );

    let mut model = Model::new(cfg)?;
    let opt = TrainOptions { lr: 1e-3, epochs: 5, ..TrainOptions::default() };
    let (log, _) = train_ml(&mut model, &train_w, &val_w, &opt)?;
    for e in &log.epochs {
        println!(
            "epoch {}: train NLL {:>8.4}  val NLL {:>8.4}  val MAE {:>6.3} deg",
            e.epoch, e.train_nll, e.val_nll, e.val_mae_deg
        );
    }
    println!("best epoch: {}", log.best_epoch);

    println!("\nper-window estimates on test data (first 8):");
    for w in test_w.iter().take(8) {
        let p = model.predict(&w.x)?;
        let est = predict_with_uncertainty(&p[0], false);
        println!(
            "  beta {:>7.3} deg (gt {:>7.3}), sigma {:.4}, nu {:>6.1}, variance {:.2e}",
            est.beta * RAD2DEG,
            w.y[0] * RAD2DEG,
            p[0].sigma,
            p[0].nu,
            est.delta
        );
    }

    // the pipeline wires the same pieces together from a TOML config
    let default_cfg = RunConfig::default();
    println!(
        "\npipeline desk defaults: d={}, L={}, {} epochs",
        default_cfg.ml.d, default_cfg.window.l_obs, default_cfg.ml.epochs
    );
    Ok(())
}
