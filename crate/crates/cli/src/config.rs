//! Configuration layering: command-line flags (or their `WSBM_*`
//! environment variables) override values from a TOML file given with
//! `--config`, which override built-in defaults.
//!
//! A config file uses the long flag names as keys, e.g.
//!
//! ```toml
//! model = "wsibm"
//! alpha = 0.1
//! burn-in = 5000
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Reads a TOML file into an options record. Unknown keys are rejected by
/// the record's `deny_unknown_fields`.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })
}

/// Overlays every option set in `flags` on top of `file`.
pub fn layer<T: Serialize + DeserializeOwned>(flags: &T, file: T) -> CliResult<T> {
    let to_value = |t: &T| {
        serde_json::to_value(t).map_err(|e| CliError::Usage(format!("internal config error: {e}")))
    };
    let mut merged = to_value(&file)?;
    if let (Value::Object(base), Value::Object(top)) = (&mut merged, to_value(flags)?) {
        for (k, v) in top {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| CliError::Usage(format!("internal config error: {e}")))
}

/// Resolves the options of one subcommand.
pub fn resolve<T: Serialize + DeserializeOwned + Default>(flags: &T, config: Option<&Path>) -> CliResult<T> {
    match config {
        Some(path) => layer(flags, load(path)?),
        None => layer(flags, T::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, rename_all = "kebab-case")]
    struct Opts {
        seed: Option<u64>,
        burn_in: Option<usize>,
        name: Option<String>,
    }

    #[test]
    fn flags_override_file() {
        let file: Opts = toml::from_str("seed = 3\nburn-in = 10\n").unwrap();
        let flags = Opts {
            seed: Some(9),
            ..Opts::default()
        };
        let m = layer(&flags, file).unwrap();
        assert_eq!(m, Opts { seed: Some(9), burn_in: Some(10), name: None });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Opts>("sede = 3\n").is_err());
    }
}
