//! Dataset file: a [`container`](crate::container) with magic `SCNDSET1`.
//!
//! The JSON header records the grid shape, class names, per-scenario labels
//! and presence masks, the split tag and the normalization statistics. The
//! payload holds `count × 2700` values in physical units, scenario-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BehaviorClass, Dataset, Normalization, Scenario, SplitTag, FEATURES, N_MAX, SCENARIO_LEN, T_OBS};
use crate::container;
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 8] = b"SCNDSET1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    shape: [usize; 3],
    features: [String; FEATURES],
    classes: Vec<BehaviorClass>,
    count: usize,
    split: SplitTag,
    labels: Vec<BehaviorClass>,
    presence: Vec<u16>,
    normalization: Option<Normalization>,
}

pub fn to_bytes(dataset: &Dataset) -> Result<Vec<u8>> {
    let header = Header {
        format: "scenario-dataset".into(),
        version: FORMAT_VERSION,
        shape: [N_MAX, FEATURES, T_OBS],
        features: ["x".into(), "y".into(), "vx".into(), "vy".into()],
        classes: BehaviorClass::ALL.to_vec(),
        count: dataset.len(),
        split: dataset.split,
        labels: dataset.labels(),
        presence: dataset.scenarios.iter().map(Scenario::presence_mask).collect(),
        normalization: dataset.normalization,
    };
    let mut values = Vec::with_capacity(dataset.len() * SCENARIO_LEN);
    for s in &dataset.scenarios {
        values.extend_from_slice(s.values());
    }
    container::encode(DATASET_MAGIC, &header, &values)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let (header, values): (Header, Vec<f64>) = container::decode(DATASET_MAGIC, bytes)?;
    let bad = |detail: String| Error::Format {
        what: "dataset file",
        detail,
    };
    if header.version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {}", header.version)));
    }
    if header.shape != [N_MAX, FEATURES, T_OBS] {
        return Err(bad(format!("unsupported shape {:?}", header.shape)));
    }
    if header.classes != BehaviorClass::ALL {
        return Err(bad("unexpected class ordering".into()));
    }
    if header.labels.len() != header.count
        || header.presence.len() != header.count
        || values.len() != header.count * SCENARIO_LEN
    {
        return Err(bad("count does not match labels, presence or payload".into()));
    }
    let scenarios = values
        .chunks_exact(SCENARIO_LEN)
        .zip(header.labels.iter().zip(&header.presence))
        .map(|(v, (&label, &mask))| Scenario::new(v.to_vec(), Scenario::presence_from_mask(mask), label))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        scenarios,
        split: header.split,
        normalization: header.normalization,
    })
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let bytes = to_bytes(dataset)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
