//! Versioned JSON checkpoints guarded by a CRC32 over the canonical body.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{FienoModel, ModelConfig, ModelError};

pub const CHECKPOINT_VERSION: u64 = 1;

/// On-disk form. Fixed layers are not stored; they are regenerated from
/// `elm_seed` and the widths in `config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u64,
    pub config: ModelConfig,
    pub elm_seed: u64,
    pub lambda: f64,
    pub arrays: BTreeMap<String, Vec<f64>>,
    pub checksum: u32,
}

/// CRC32 of the compact JSON of `body` without its `checksum` field.
/// `serde_json` maps are key-sorted, so this serialisation is canonical.
fn checksum_of(body: &Value) -> u32 {
    let mut v = body.clone();
    if let Value::Object(map) = &mut v {
        map.remove("checksum");
    }
    crc32fast::hash(v.to_string().as_bytes())
}

impl Checkpoint {
    pub fn from_model(model: &FienoModel) -> Self {
        let arrays = model
            .param_names()
            .iter()
            .zip(model.params())
            .filter(|(n, _)| n.as_str() != "lambda")
            .map(|(n, t)| (n.clone(), t.data().to_vec()))
            .collect();
        let mut ck = Self {
            format_version: CHECKPOINT_VERSION,
            config: model.config().clone(),
            elm_seed: model.config().kan.elm_seed,
            lambda: model.lambda(),
            arrays,
            checksum: 0,
        };
        ck.checksum = checksum_of(&serde_json::to_value(&ck).expect("checkpoint serialises"));
        ck
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    /// Parses and verifies a checkpoint: version first, then checksum.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| ModelError::Checksum(format!("unreadable checkpoint: {e}")))?;
        let version = value.get("format_version").and_then(Value::as_u64);
        if version != Some(CHECKPOINT_VERSION) {
            return Err(ModelError::Version {
                found: version.unwrap_or(0),
                expected: CHECKPOINT_VERSION,
            });
        }
        let stored = value
            .get("checksum")
            .and_then(Value::as_u64)
            .ok_or_else(|| ModelError::Checksum("missing checksum".into()))?;
        let actual = checksum_of(&value);
        if stored != u64::from(actual) {
            return Err(ModelError::Checksum(format!("stored {stored:08x}, computed {actual:08x}")));
        }
        serde_json::from_value(value).map_err(|e| ModelError::Layout(e.to_string()))
    }

    pub fn into_model(self) -> Result<FienoModel, ModelError> {
        if self.elm_seed != self.config.kan.elm_seed {
            return Err(ModelError::Layout("elm_seed disagrees with config".into()));
        }
        let mut arrays = self.arrays;
        let layout = self.config.parameter_layout()?;
        let mut params = Vec::with_capacity(layout.len());
        for (name, _) in &layout {
            let data = if name == "lambda" {
                vec![self.lambda]
            } else {
                arrays
                    .remove(name)
                    .ok_or_else(|| ModelError::Layout(format!("missing array {name}")))?
            };
            params.push((name.clone(), data));
        }
        if let Some(extra) = arrays.keys().next() {
            return Err(ModelError::Layout(format!("unexpected array {extra}")));
        }
        FienoModel::from_parts(self.config, params)
    }
}

impl FienoModel {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, Checkpoint::from_model(self).to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(path)?;
        let text = String::from_utf8(bytes).map_err(|_| ModelError::Checksum("checkpoint is not UTF-8".into()))?;
        Checkpoint::from_json(&text)?.into_model()
    }
}
