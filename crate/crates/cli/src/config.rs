use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{usage, CliResult};

pub const DEFAULT_WIDTH: usize = 1024;
pub const DEFAULT_SIZE_N: usize = 225;

/// Defaults read from `--config`; every field can be overridden by a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub size_n: Option<usize>,
    pub tile: Option<usize>,
    pub phi: Option<String>,
    pub phis: Option<Vec<String>>,
    pub theta: Option<String>,
    pub interp: Option<String>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub mirror: Option<bool>,
    pub class_map: Option<PathBuf>,
    pub classes: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// 0 = all cores.
    pub threads: Option<usize>,
}

impl CliConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| omniproj::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}
