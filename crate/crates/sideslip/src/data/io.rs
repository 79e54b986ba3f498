//! Dataset persistence: one CSV file per scenario plus a JSON manifest.
//!
//! Numbers are written as shortest round-trip decimal text, so a write/read
//! cycle reproduces every value bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Maneuver, Scenario, SensorFrame};
use crate::error::{Error, Result};

pub const SCENARIO_CSV_HEADER: &str =
    "t,v_s,theta_sw,yaw_rate_obd,a_y,p_br,v_fl,v_fr,v_rl,v_rr,beta_gt";

/// One manifest row describing a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub maneuver: Maneuver,
    pub rate_hz: f64,
    pub path: String,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes a scenario as CSV with the fixed 11-column schema.
pub fn write_scenario_csv(scenario: &Scenario, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    w.write_record(SCENARIO_CSV_HEADER.split(','))
        .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    for (f, b) in scenario.frames.iter().zip(&scenario.beta_gt) {
        let row = [
            f.t, f.v_s, f.theta_sw, f.yaw_rate_obd, f.a_y, f.p_br, f.v_fl, f.v_fr, f.v_rl,
            f.v_rr, *b,
        ];
        w.write_record(row.iter().map(|v| format!("{v}")))
            .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Reads a scenario CSV written by [`write_scenario_csv`].
pub fn load_scenario_csv(
    path: &Path,
    id: &str,
    maneuver: Maneuver,
    rate_hz: f64,
) -> Result<Scenario> {
    let pstr = path.display().to_string();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Parse { path: pstr.clone(), msg: e.to_string() })?;

    let mut frames = Vec::new();
    let mut beta_gt = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { path: pstr.clone(), msg: e.to_string() })?;
        if line == 0 {
            let header = rec.iter().collect::<Vec<_>>().join(",");
            if header != SCENARIO_CSV_HEADER {
                return Err(Error::Parse {
                    path: pstr,
                    msg: format!("unexpected header `{header}`"),
                });
            }
            continue;
        }
        if rec.len() != 11 {
            return Err(Error::Parse {
                path: pstr,
                msg: format!("row {line}: expected 11 columns, got {}", rec.len()),
            });
        }
        let mut vals = [0f64; 11];
        for (i, field) in rec.iter().enumerate() {
            vals[i] = field.parse::<f64>().map_err(|e| Error::Parse {
                path: pstr.clone(),
                msg: format!("row {line} col {i}: {e}"),
            })?;
        }
        frames.push(SensorFrame {
            t: vals[0],
            v_s: vals[1],
            theta_sw: vals[2],
            yaw_rate_obd: vals[3],
            a_y: vals[4],
            p_br: vals[5],
            v_fl: vals[6],
            v_fr: vals[7],
            v_rl: vals[8],
            v_rr: vals[9],
        });
        beta_gt.push(vals[10]);
    }
    let scenario = Scenario { id: id.to_string(), maneuver, frames, beta_gt, rate_hz };
    scenario.validate()?;
    Ok(scenario)
}

/// Writes all scenarios plus the manifest into `dir`.
pub fn write_dataset(scenarios: &[Scenario], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut manifest = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let file = format!("{}.csv", s.id);
        write_scenario_csv(s, &dir.join(&file))?;
        manifest.push(ManifestEntry {
            id: s.id.clone(),
            maneuver: s.maneuver,
            rate_hz: s.rate_hz,
            path: file,
        });
    }
    let manifest_path = dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Parse { path: manifest_path.display().to_string(), msg: e.to_string() })?;
    fs::write(&manifest_path, json)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    Ok(())
}

/// Loads every scenario listed in `dir/manifest.json`, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<Scenario>> {
    let manifest_path = dir.join(MANIFEST_NAME);
    if !manifest_path.exists() {
        return Err(Error::MissingArtifact {
            stage: "load-dataset".into(),
            path: manifest_path.display().to_string(),
        });
    }
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let manifest: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.display().to_string(),
        msg: e.to_string(),
    })?;
    manifest
        .iter()
        .map(|m| load_scenario_csv(&resolve(dir, &m.path), &m.id, m.maneuver, m.rate_hz))
        .collect()
}

fn resolve(dir: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scenario(seed: u64, n: usize) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = (0..n)
            .map(|i| SensorFrame {
                t: i as f64 * 0.02,
                v_s: rng.gen_range(0.0..30.0),
                theta_sw: rng.gen_range(-2.0..2.0),
                yaw_rate_obd: rng.gen_range(-1.0..1.0),
                a_y: rng.gen_range(-8.0..8.0),
                p_br: rng.gen_range(0.0..50.0),
                v_fl: rng.gen_range(0.0..30.0),
                v_fr: rng.gen_range(0.0..30.0),
                v_rl: rng.gen_range(0.0..30.0),
                v_rr: rng.gen_range(0.0..30.0),
            })
            .collect();
        Scenario {
            id: format!("rt{seed}"),
            maneuver: Maneuver::FigureEight,
            frames,
            beta_gt: (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect(),
            rate_hz: 50.0,
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for seed in 0..5 {
            let s = random_scenario(seed, 64);
            let path = dir.path().join(format!("{}.csv", s.id));
            write_scenario_csv(&s, &path).unwrap();
            let back = load_scenario_csv(&path, &s.id, s.maneuver, s.rate_hz).unwrap();
            assert_eq!(s, back);
        }
    }

    #[test]
    fn dataset_round_trip_preserves_manifest_order_and_content() {
        let dir = tempfile::tempdir().unwrap();
        let scenarios: Vec<Scenario> = (0..4).map(|i| random_scenario(i, 32)).collect();
        write_dataset(&scenarios, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(scenarios, back);
    }

    #[test]
    fn missing_manifest_is_a_dependency_error() {
        let dir = tempfile::tempdir().unwrap();
        match load_dataset(dir.path()) {
            Err(Error::MissingArtifact { .. }) => {}
            other => panic!("expected missing artifact, got {other:?}"),
        }
    }
}
