use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dbcr::eval::EvalConfig;
use dbcr::pipeline::{DescriptorConfig, Fingerprint};
use serde::{Deserialize, Serialize};

use crate::{CliResult, Failure};

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub descriptor: DescriptorConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        cfg.descriptor.validate().map_err(dbcr::Error::from)?;
        cfg.eval.validate().map_err(dbcr::Error::from)?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> CliResult<RunConfig> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }
}

/// Provenance record written next to every index and report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command_line: Vec<String>,
    pub fingerprint: Fingerprint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<DescriptorConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(
        descriptor: Option<DescriptorConfig>,
        eval: Option<EvalConfig>,
        started_unix: u64,
    ) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line: std::env::args().collect(),
            fingerprint: descriptor
                .as_ref()
                .map_or(Fingerprint([0; 32]), DescriptorConfig::fingerprint),
            descriptor,
            eval,
            outputs: Vec::new(),
            started_unix,
            finished_unix: started_unix,
        }
    }

    /// `<file>.manifest.json`
    pub fn path_for(file: &Path) -> PathBuf {
        let mut name = file.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write(mut self, beside: &Path) -> CliResult {
        self.finished_unix = unix_now();
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        let path = RunManifest::path_for(beside);
        fs::write(&path, json + "\n")
            .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read(beside: &Path) -> CliResult<Option<RunManifest>> {
        let path = RunManifest::path_for(beside);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(Failure::data(format!(
                    "cannot read {}: {e}",
                    path.display()
                )))
            }
        };
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Failure::data(format!("{}: {e}", path.display())))
    }
}
