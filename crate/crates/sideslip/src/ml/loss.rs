//! Student-t negative log-likelihood, in plain form for reporting and as a
//! tape program for training.

use ndarray::{Array1, Array2};

use super::model::StudentTParams;
use super::tape::{NodeId, Tape};
use crate::special::ln_gamma;

/// NLL of one observation under a Student-t density:
///
/// `-ln[ Γ((ν+1)/2) / (σ √(νπ) Γ(ν/2)) · (1 + (y-μ)²/(νσ²))^(-(ν+1)/2) ]`
pub fn studentt_nll_scalar(p: &StudentTParams, y: f64) -> f64 {
    let z2 = (y - p.mu) * (y - p.mu) / (p.nu * p.sigma * p.sigma);
    -ln_gamma((p.nu + 1.0) / 2.0)
        + ln_gamma(p.nu / 2.0)
        + p.sigma.ln()
        + 0.5 * (p.nu * std::f64::consts::PI).ln()
        + 0.5 * (p.nu + 1.0) * z2.ln_1p()
}

/// Sum of per-step NLL over a predicted sequence.
pub fn studentt_nll(params: &[StudentTParams], y: &[f64]) -> f64 {
    assert_eq!(params.len(), y.len(), "prediction/target length mismatch");
    params
        .iter()
        .zip(y)
        .map(|(p, &target)| studentt_nll_scalar(p, target))
        .sum()
}

/// Tape version over column vectors `mu`, `sigma`, `nu` ((F+1)×1 each):
/// returns the 1×1 summed loss node.
pub fn studentt_nll_on_tape(
    tape: &mut Tape,
    mu: NodeId,
    sigma: NodeId,
    nu: NodeId,
    y: &Array1<f64>,
) -> NodeId {
    let n = y.len();
    debug_assert_eq!(tape.value(mu).nrows(), n);
    let y_col = tape.leaf(
        Array2::from_shape_vec((n, 1), y.to_vec()).expect("column target"),
    );

    // ((nu+1)/2) * ln(1 + (y-mu)^2 / (nu sigma^2))
    let resid = tape.sub(y_col, mu);
    let resid2 = tape.mul(resid, resid);
    let sigma2 = tape.mul(sigma, sigma);
    let nu_sigma2 = tape.mul(nu, sigma2);
    let ratio = tape.div(resid2, nu_sigma2);
    let one_plus = tape.offset(ratio, 1.0);
    let ln_term = tape.ln(one_plus);
    let nu_plus1 = tape.offset(nu, 1.0);
    let half_nu_plus1 = tape.scale(nu_plus1, 0.5);
    let tail = tape.mul(half_nu_plus1, ln_term);

    // + ln sigma + 0.5 ln(nu pi) + ln Γ(nu/2) - ln Γ((nu+1)/2)
    let ln_sigma = tape.ln(sigma);
    let nu_pi = tape.scale(nu, std::f64::consts::PI);
    let ln_nu_pi = tape.ln(nu_pi);
    let half_ln_nu_pi = tape.scale(ln_nu_pi, 0.5);
    let half_nu = tape.scale(nu, 0.5);
    let lg_half_nu = tape.ln_gamma(half_nu);
    let lg_half_nu_plus1 = tape.ln_gamma(half_nu_plus1);
    let neg_lg = tape.scale(lg_half_nu_plus1, -1.0);

    let s1 = tape.add(tail, ln_sigma);
    let s2 = tape.add(s1, half_ln_nu_pi);
    let s3 = tape.add(s2, lg_half_nu);
    let s4 = tape.add(s3, neg_lg);
    tape.sum_all(s4)
}
