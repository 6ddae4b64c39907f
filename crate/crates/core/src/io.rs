//! JSON and CSV artifacts written by the command-line tool.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::channel::ObservationSet;
use crate::crlb::{Bound, CrlbReport};
use crate::error::Result;

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Complex samples are stored as `[re, im]` pairs.
pub fn write_observation(path: &Path, obs: &ObservationSet) -> Result<()> {
    write_json(path, obs)
}

pub fn read_observation(path: &Path) -> Result<ObservationSet> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn bound_json(b: &Bound) -> Value {
    let mut v = json!({
        "param": b.param.label(),
        "variance": b.variance,
        "variance_unit": b.unit,
        "std": b.std(),
        "std_unit": b.param.unit(),
    });
    if b.param.is_phase() {
        v["std_deg"] = json!(b.std().to_degrees());
    }
    v
}

/// Report with standard deviations (and degrees for phases) next to the
/// variances.
pub fn crlb_report_json(report: &CrlbReport) -> Value {
    json!({
        "variant": report.variant,
        "map": report.map,
        "direction": report.direction,
        "bandwidth_hz": report.bandwidth_hz,
        "num_subcarriers": report.num_subcarriers,
        "snr_linear": report.snr_used,
        "snr_db": 10.0 * report.snr_used.log10(),
        "bounds": report.bounds.iter().map(bound_json).collect::<Vec<_>>(),
        "closed_form": report.closed_form.as_ref().map(|c| c.iter().map(bound_json).collect::<Vec<_>>()),
        "fim": report.fim,
    })
}

/// Everything needed to rerun a command. Holds no timestamps so that two
/// identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_path: Option<String>,
    /// Observation file read by `estimate`.
    pub input_path: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub resolved_config: Value,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}
