//! Run manifests and the config layer.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "bootband";

/// Everything needed to rerun a command bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub input_sha256: String,
    /// Fully resolved settings, defaults included.
    pub settings: Map<String, Value>,
    /// Seconds per stage; only with `--timings`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, input_sha256: String) -> Self {
        Self {
            tool: TOOL.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            seed,
            input_sha256,
            settings: Map::new(),
            timings: None,
        }
    }

    /// Merges a resolved flag group into `settings`.
    pub fn record<T: Serialize>(&mut self, group: &T) {
        if let Value::Object(map) = serde_json::to_value(group).expect("flag groups serialize") {
            self.settings.extend(map);
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        if m.tool != TOOL {
            return Err(CliError::Manifest(format!("not a {TOOL} manifest")));
        }
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Settings read from a TOML file or a manifest.
#[derive(Debug, Clone, Default)]
pub struct ConfigLayer {
    values: Map<String, Value>,
}

impl ConfigLayer {
    pub fn from_map(values: Map<String, Value>) -> Self {
        Self { values }
    }

    /// Parses a flat TOML table of `key = value` lines.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("config file: {e}")))?;
        match serde_json::to_value(table).map_err(|e| CliError::Usage(e.to_string()))? {
            Value::Object(values) => Ok(Self { values }),
            _ => unreachable!("a TOML table is an object"),
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("config {}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    /// Rejects keys no group of the current command understands.
    pub fn check_keys(&self, known: &[&[&str]]) -> Result<(), CliError> {
        for key in self.values.keys() {
            let snake = key.replace('-', "_");
            if !known.iter().any(|group| group.contains(&snake.as_str())) {
                return Err(CliError::Usage(format!("unknown setting `{key}`")));
            }
        }
        Ok(())
    }

    pub fn get<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        serde_json::from_value(Value::Object(self.values.clone()))
            .map_err(|e| CliError::Usage(format!("config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::{MethodArg, TrainArgs};
    use bootband::Method;

    #[test]
    fn toml_layer_feeds_groups() {
        let layer = ConfigLayer::from_toml("method = \"nbb\"\nlookback = 7\nlr = 1\n").unwrap();
        let m: MethodArg = layer.get().unwrap();
        assert_eq!(m.method, Some(Method::Nbb));
        let t: TrainArgs = layer.get().unwrap();
        assert_eq!(t.lookback, Some(7));
        assert_eq!(t.lr, Some(1.0));
        assert!(layer
            .check_keys(&[MethodArg::KEYS, TrainArgs::KEYS])
            .is_ok());
        assert!(layer.check_keys(&[TrainArgs::KEYS]).is_err());
    }

    #[test]
    fn flags_beat_config_beat_defaults() {
        let layer = ConfigLayer::from_toml("epochs = 4\nhidden = 9\n").unwrap();
        let flags = TrainArgs {
            epochs: Some(2),
            ..TrainArgs::default()
        };
        let merged = flags.or(layer.get().unwrap()).or(TrainArgs::defaults());
        assert_eq!(merged.epochs, Some(2));
        assert_eq!(merged.hidden, Some(9));
        assert_eq!(merged.lookback, Some(5));
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = RunManifest::new("band", 7, sha256_hex(b"abc"));
        m.record(&TrainArgs::defaults());
        let text = serde_json::to_string(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            m.input_sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let layer = ConfigLayer::from_map(back.settings);
        assert_eq!(layer.get::<TrainArgs>().unwrap(), TrainArgs::defaults());
    }
}
