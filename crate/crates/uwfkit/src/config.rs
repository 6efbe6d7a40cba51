//! TOML configuration with an environment default and CLI overrides.

use std::path::{Path, PathBuf};

use thiserror::Error;
use uwfkit_core::pipeline::{ConfigError, PipelineConfig};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "UWFKIT_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ConfigError),
}

pub fn parse_config(text: &str, path: &Path) -> Result<PipelineConfig, ConfigFileError> {
    toml::from_str(text).map_err(|source| ConfigFileError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// The explicit path if given, else the file named by `UWFKIT_CONFIG`, else
/// the defaults. Not yet validated: callers apply flag overrides first.
pub fn load_config(explicit: Option<&Path>) -> Result<PipelineConfig, ConfigFileError> {
    let env = std::env::var_os(CONFIG_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let Some(path) = explicit.map(Path::to_path_buf).or(env) else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigFileError::Read {
        path: path.clone(),
        source,
    })?;
    parse_config(&text, &path)
}

pub fn to_toml(cfg: &PipelineConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = parse_config(
            "dice_gate = 0.6\n[ransac]\nmax_iter = 500\n",
            Path::new("c.toml"),
        )
        .unwrap();
        assert_eq!(cfg.dice_gate, 0.6);
        assert_eq!(cfg.ransac.max_iter, 500);
        assert_eq!(cfg.working_resolution, 1024);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_config("dice_gat = 0.6\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn roundtrip() {
        let cfg = PipelineConfig::synthetic();
        assert_eq!(
            parse_config(&to_toml(&cfg), Path::new("c.toml")).unwrap(),
            cfg
        );
    }
}
