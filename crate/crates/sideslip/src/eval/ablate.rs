//! Ablation of the deep fuser: refit on every two-of-three branch subset by
//! zero-masking the excluded branch's estimate and uncertainty columns.

use serde::{Deserialize, Serialize};

use super::{compute_metrics, Metrics};
use crate::data::FusionInput;
use crate::error::Result;
use crate::fusion::{df_forward, train_df, DfTrainOptions, FusionRow};

/// Branch subsets evaluated by the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchSubset {
    MlVm1,
    MlVm2,
    Vm1Vm2,
}

impl BranchSubset {
    pub const ALL: [BranchSubset; 3] = [
        BranchSubset::MlVm1,
        BranchSubset::MlVm2,
        BranchSubset::Vm1Vm2,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            BranchSubset::MlVm1 => "ml+vm1",
            BranchSubset::MlVm2 => "ml+vm2",
            BranchSubset::Vm1Vm2 => "vm1+vm2",
        }
    }

    /// Indices of the masked (excluded) columns in the fusion input.
    fn masked_cols(&self) -> [usize; 2] {
        match self {
            BranchSubset::MlVm1 => [4, 5],
            BranchSubset::MlVm2 => [2, 3],
            BranchSubset::Vm1Vm2 => [0, 1],
        }
    }

    pub fn mask(&self, h: &FusionInput) -> FusionInput {
        let mut a = h.as_array();
        for c in self.masked_cols() {
            a[c] = 0.0;
        }
        FusionInput::from_array(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub subset: String,
    pub metrics: Metrics,
}

fn mask_rows(rows: &[FusionRow], subset: BranchSubset) -> Vec<FusionRow> {
    rows.iter()
        .map(|r| FusionRow { input: subset.mask(&r.input), ..r.clone() })
        .collect()
}

/// Refits the deep fuser on each masked variant and scores it on the masked
/// test rows.
pub fn run_ablation(
    train: &[FusionRow],
    val: &[FusionRow],
    test: &[FusionRow],
    opt: &DfTrainOptions,
) -> Result<Vec<AblationRow>> {
    let mut out = Vec::with_capacity(BranchSubset::ALL.len());
    for subset in BranchSubset::ALL {
        let train_m = mask_rows(train, subset);
        let val_m = mask_rows(val, subset);
        let test_m = mask_rows(test, subset);
        let (df, _) = train_df(&train_m, &val_m, opt)?;
        let pred: Vec<f64> = test_m.iter().map(|r| df_forward(&df, &r.input)).collect();
        let gt: Vec<f64> = test_m.iter().map(|r| r.y).collect();
        out.push(AblationRow {
            subset: subset.label().to_string(),
            metrics: compute_metrics(&pred, &gt)?,
        });
        log::info!(
            "ablation {}: MAE {:.3} deg",
            subset.label(),
            out.last().unwrap().metrics.mae_deg
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masking_zeroes_exactly_the_excluded_branch() {
        let h = FusionInput::from_array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let m = BranchSubset::MlVm2.mask(&h);
        assert_eq!(m.as_array(), [0.1, 0.2, 0.0, 0.0, 0.5, 0.6]);
        let m = BranchSubset::Vm1Vm2.mask(&h);
        assert_eq!(m.as_array(), [0.0, 0.0, 0.3, 0.4, 0.5, 0.6]);
        let m = BranchSubset::MlVm1.mask(&h);
        assert_eq!(m.as_array(), [0.1, 0.2, 0.3, 0.4, 0.0, 0.0]);
    }
}
