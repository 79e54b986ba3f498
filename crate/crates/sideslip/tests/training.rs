//! Learning-behavior tests for the sequence model: trivially learnable
//! targets, optimization sanity and uncertainty calibration.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sideslip::data::{Window, INPUT_DIM};
use sideslip::ml::{train_ml, Model, ModelConfig, TrainOptions};
use sideslip::{DEG2RAD, RAD2DEG};

fn tiny_cfg(seed: u64) -> ModelConfig {
    ModelConfig {
        d: 16,
        heads: 2,
        l_obs: 12,
        b_ctx: 4,
        f_horizon: 2,
        u_factor: 3.0,
        d_ff: 32,
        seed,
        delta_floor: false,
    }
}

fn window(cfg: &ModelConfig, rng: &mut ChaCha8Rng, target: f64) -> Window {
    Window {
        x: Array2::from_shape_fn((cfg.l_obs, INPUT_DIM), |_| rng.gen_range(-1.0..1.0)),
        y: Array1::from_elem(cfg.f_horizon + 1, target),
        t_index: cfg.l_obs - 1,
    }
}

// Oracle: a constant target is trivially learnable; the trained model must
// nail it far below the 0.05 degree bar.
#[test]
fn constant_target_toy_task_converges() {
    let cfg = tiny_cfg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let target = 0.3 * DEG2RAD;
    let train: Vec<Window> = (0..600).map(|_| window(&cfg, &mut rng, target)).collect();
    let val: Vec<Window> = (0..60).map(|_| window(&cfg, &mut rng, target)).collect();

    let mut model = Model::new(cfg).unwrap();
    let opt = TrainOptions {
        lr: 3e-3,
        lr_final_factor: 0.01,
        epochs: 70,
        batch: 32,
        ..TrainOptions::default()
    };
    let (log, _) = train_ml(&mut model, &train, &val, &opt).unwrap();

    let best = log.epochs.iter().map(|e| e.val_mae_deg).fold(f64::INFINITY, f64::min);
    assert!(best < 0.05, "best val MAE {best:.4} deg");

    // the retained parameters are the best-validation snapshot
    let mut mae = 0.0;
    for w in &val {
        mae += (model.predict(&w.x).unwrap()[0].mu - target).abs();
    }
    mae = mae / val.len() as f64 * RAD2DEG;
    assert!(mae < 0.05, "restored-model val MAE {mae:.4} deg");
}

// Optimization sanity: epoch-mean loss never rises over a 5-epoch horizon
// on the toy task.
#[test]
fn training_loss_non_increasing_over_five_epoch_horizon() {
    let cfg = tiny_cfg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let train: Vec<Window> = (0..200)
        .map(|_| {
            let t = rng.gen_range(-0.01..0.01);
            window(&cfg, &mut rng, t)
        })
        .collect();
    let val: Vec<Window> = train[..40].to_vec();

    let mut model = Model::new(cfg).unwrap();
    let opt = TrainOptions { lr: 1e-3, epochs: 12, batch: 32, ..TrainOptions::default() };
    let (log, _) = train_ml(&mut model, &train, &val, &opt).unwrap();
    let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_nll).collect();
    for i in 0..losses.len().saturating_sub(5) {
        assert!(
            losses[i + 5] <= losses[i] + 1e-9,
            "loss rose over 5 epochs: {} -> {}",
            losses[i],
            losses[i + 5]
        );
    }
}

// Heteroscedasticity: with two noise regimes flagged in the input, the
// predicted uncertainty must be higher in the noisy regime.
#[test]
fn predicted_uncertainty_tracks_noise_regime() {
    let cfg = tiny_cfg(5);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let make = |noisy: bool, rng: &mut ChaCha8Rng| -> Window {
        let flag = if noisy { 1.0 } else { -1.0 };
        let sigma = if noisy { 0.05 } else { 0.002 };
        let mut x = Array2::from_shape_fn((cfg.l_obs, INPUT_DIM), |_| rng.gen_range(-0.3..0.3));
        for r in 0..cfg.l_obs {
            x[(r, 0)] = flag;
        }
        let y = Array1::from_shape_fn(cfg.f_horizon + 1, |_| sigma * rng.gen_range(-2.0..2.0));
        Window { x, y, t_index: cfg.l_obs - 1 }
    };
    let train: Vec<Window> = (0..400).map(|i| make(i % 2 == 0, &mut rng)).collect();
    let val: Vec<Window> = (0..80).map(|i| make(i % 2 == 0, &mut rng)).collect();

    let mut model = Model::new(cfg.clone()).unwrap();
    let opt = TrainOptions { lr: 1e-3, epochs: 12, batch: 32, ..TrainOptions::default() };
    train_ml(&mut model, &train, &val, &opt).unwrap();

    let mean_delta = |noisy: bool| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut sum = 0.0;
        let n = 40;
        for _ in 0..n {
            let w = make(noisy, &mut rng);
            let p = model.predict(&w.x).unwrap();
            sum += p[0].nu / (p[0].nu - 2.0) * p[0].sigma * p[0].sigma;
        }
        sum / n as f64
    };
    let hi = mean_delta(true);
    let lo = mean_delta(false);
    assert!(
        hi > lo,
        "predicted variance in the noisy regime ({hi:.3e}) not above the quiet regime ({lo:.3e})"
    );
}
