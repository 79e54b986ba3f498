//! Time-series export of one scenario's estimates for external plotting.

use std::path::Path;

use crate::error::{Error, Result};

/// One model's trace: per-step estimates and (when the model provides one)
/// per-step uncertainties. Models without an uncertainty export zeros.
#[derive(Debug, Clone)]
pub struct TraceSeries {
    pub model: String,
    pub beta: Vec<f64>,
    pub delta: Option<Vec<f64>>,
}

/// Writes `t,beta_gt` followed by `beta_<model>,delta_<model>` pairs, so the
/// column count is `2 + 2 * models`. Ground truth is passed through
/// unchanged.
pub fn write_trace_csv(
    path: &Path,
    t: &[f64],
    beta_gt: &[f64],
    series: &[TraceSeries],
) -> Result<()> {
    if t.len() != beta_gt.len() {
        return Err(Error::Misaligned {
            what: "trace time/gt".into(),
            left: t.len(),
            right: beta_gt.len(),
        });
    }
    for s in series {
        if s.beta.len() != t.len() {
            return Err(Error::Misaligned {
                what: format!("trace series `{}`", s.model),
                left: s.beta.len(),
                right: t.len(),
            });
        }
        if let Some(d) = &s.delta {
            if d.len() != t.len() {
                return Err(Error::Misaligned {
                    what: format!("trace uncertainty `{}`", s.model),
                    left: d.len(),
                    right: t.len(),
                });
            }
        }
    }

    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    let mut header = vec!["t".to_string(), "beta_gt".to_string()];
    for s in series {
        header.push(format!("beta_{}", s.model));
        header.push(format!("delta_{}", s.model));
    }
    w.write_record(&header)
        .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;

    for i in 0..t.len() {
        let mut row = vec![format!("{}", t[i]), format!("{}", beta_gt[i])];
        for s in series {
            row.push(format!("{}", s.beta[i]));
            row.push(format!(
                "{}",
                s.delta.as_ref().map_or(0.0, |d| d[i])
            ));
        }
        w.write_record(&row)
            .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
