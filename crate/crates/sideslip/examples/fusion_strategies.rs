//! The three fusion strategies side by side on a hand-built situation:
//! a confident learned estimate, then an uncertain one.
//!
//! Run with: `cargo run --release --example fusion_strategies`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sideslip::data::{FusionInput, Maneuver};
use sideslip::fusion::{
    df_forward, expert_fuse_detailed, gf_predict, train_df, DfTrainOptions, EfBranch,
    ExpertFusionConfig, FeatureNorm, FusionRow, GaussianFusion, UncertaintyCalibration,
    em_fit, EmOptions,
};
use sideslip::fusion::gmr::joint_matrix;
use sideslip::RAD2DEG;

/// Synthetic fusion rows: the learned branch is good at low uncertainty and
/// drifts when its uncertainty grows; the motion models stay mediocre but
/// stable.
fn make_rows(n: usize, seed: u64) -> Vec<FusionRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let y = rng.gen_range(-0.08..0.08);
            let delta_ml = rng.gen_range(0.0..1.0f64).powi(3) * 2.0;
            let ml_err = 0.002 + 0.05 * delta_ml;
            let input = FusionInput {
                beta_ml: y + rng.gen_range(-ml_err..ml_err),
                delta_ml,
                beta_vm1: y + rng.gen_range(-0.015..0.015),
                delta_vm1: rng.gen_range(0.0..0.2),
                beta_vm2: y + rng.gen_range(-0.008..0.008),
                delta_vm2: rng.gen_range(0.0..0.01),
            };
            FusionRow {
                scenario_id: format!("s{}", i % 9),
                maneuver: Maneuver::Slalom,
                t_index: i,
                t: i as f64 * 0.02,
                v_s: rng.gen_range(3.0..25.0),
                a_y: rng.gen_range(-6.0..6.0),
                input,
                y,
            }
        })
        .collect()
}

fn main() -> sideslip::Result<()> {
    let rows = make_rows(9000, 2);
    let (train, rest) = rows.split_at(7000);
    let (val, test) = rest.split_at(1000);

    // expert fusion: normalize the learned uncertainty on validation data
    let cal = UncertaintyCalibration::fit(
        &val.iter().map(|r| r.input.delta_ml).collect::<Vec<_>>(),
    )?;
    let ef_cfg = ExpertFusionConfig::default();

    // deep fusion
    let (df, _) = train_df(train, val, &DfTrainOptions::default())?;

    // mixture fusion
    let norm = FeatureNorm::fit(&train.iter().map(|r| r.input).collect::<Vec<_>>())?;
    let pairs: Vec<_> = train.iter().map(|r| (r.input, r.y)).collect();
    let (gmm, _) = em_fit(&joint_matrix(&pairs, &norm), &EmOptions { k: 4, ..EmOptions::default() })?;
    let gf = GaussianFusion { gmm, norm };

    let mut mae = [0.0f64; 4]; // ml, ef, df, gf
    for r in test {
        let normalized = FusionInput {
            delta_ml: cal.normalize(r.input.delta_ml),
            ..r.input
        };
        let (ef, _) = expert_fuse_detailed(&normalized, r.v_s, &ef_cfg);
        mae[0] += (r.input.beta_ml - r.y).abs();
        mae[1] += (ef - r.y).abs();
        mae[2] += (df_forward(&df, &r.input) - r.y).abs();
        mae[3] += (gf_predict(&gf, &r.input)? - r.y).abs();
    }
    for m in &mut mae {
        *m = *m / test.len() as f64 * RAD2DEG;
    }
    println!("test MAE (deg):");
    println!("  learned branch alone  {:.4}", mae[0]);
    println!("  expert fusion         {:.4}", mae[1]);
    println!("  deep fusion           {:.4}", mae[2]);
    println!("  mixture fusion        {:.4}", mae[3]);

    // the expert rule in detail on two situations
    let confident = FusionInput {
        beta_ml: 0.020,
        delta_ml: cal.normalize(0.01),
        beta_vm1: 0.050,
        delta_vm1: 0.02,
        beta_vm2: 0.030,
        delta_vm2: 0.002,
    };
    let (out, branch) = expert_fuse_detailed(&confident, 10.0, &ef_cfg);
    println!(
        "\nconfident estimate at 10 m/s -> {:?}, output {:.2} deg (learned branch passes through)",
        branch,
        out * RAD2DEG
    );
    let uncertain = FusionInput { delta_ml: cal.normalize(1.9), ..confident };
    let (out, branch) = expert_fuse_detailed(&uncertain, 3.0, &ef_cfg);
    assert_eq!(branch, EfBranch::BlendVm1);
    println!(
        "uncertain estimate at 3 m/s  -> {:?}, output {:.2} deg (blend toward the geometric model)",
        branch,
        out * RAD2DEG
    );
    Ok(())
}
