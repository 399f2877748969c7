//! Run configuration: a plain `key = value` text file with `#` comments.
//!
//! Unknown keys are errors so typos never silently fall back to defaults.

use std::collections::BTreeSet;
use std::path::Path;

use super::IoError;

/// Training hyperparameters. Defaults follow the reference setup: learning
/// rate 1e-4, batch size 2, 20 epochs, smoothness weight 1, 20 m depth cap.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda_smooth: f64,
    pub depth_cap: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            learning_rate: 1e-4,
            batch_size: 2,
            epochs: 20,
            lambda_smooth: 1.0,
            depth_cap: 20.0,
            seed: 1,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_config_str(&text, path)
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<RunConfig, IoError> {
    let mut config = RunConfig::default();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| IoError::Config {
            path: path.display().to_string(),
            line: lineno,
            message: format!("expected 'key = value', found {raw:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(IoError::Config {
                path: path.display().to_string(),
                line: lineno,
                message: format!("duplicate key {key:?}"),
            });
        }
        let bad_value = |msg: &str| IoError::Config {
            path: path.display().to_string(),
            line: lineno,
            message: format!("{key}: {msg}: {value:?}"),
        };
        match key {
            "learning_rate" => {
                config.learning_rate = value.parse().map_err(|_| bad_value("not a number"))?;
                if !(config.learning_rate >= 0.0) {
                    return Err(bad_value("must be >= 0"));
                }
            }
            "batch_size" => {
                config.batch_size = value.parse().map_err(|_| bad_value("not an integer"))?;
                if config.batch_size == 0 {
                    return Err(bad_value("must be >= 1"));
                }
            }
            "epochs" => {
                config.epochs = value.parse().map_err(|_| bad_value("not an integer"))?;
            }
            "lambda_smooth" => {
                config.lambda_smooth = value.parse().map_err(|_| bad_value("not a number"))?;
            }
            "depth_cap" => {
                config.depth_cap = value.parse().map_err(|_| bad_value("not a number"))?;
                if !(config.depth_cap > 0.0) {
                    return Err(bad_value("must be > 0"));
                }
            }
            "seed" => {
                config.seed = value.parse().map_err(|_| bad_value("not an integer"))?;
            }
            other => {
                return Err(IoError::Config {
                    path: path.display().to_string(),
                    line: lineno,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, IoError> {
        parse_config_str(text, Path::new("test.cfg"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.batch_size, 2);
        assert_eq!(c.epochs, 20);
        assert_eq!(c.lambda_smooth, 1.0);
        assert_eq!(c.depth_cap, 20.0);
    }

    #[test]
    fn overrides_and_comments() {
        let c = parse("# tuned for the tiny rig\nlambda_smooth = 0.5\nepochs = 3  # short\n").unwrap();
        assert_eq!(c.lambda_smooth, 0.5);
        assert_eq!(c.epochs, 3);
        assert_eq!(c.batch_size, 2);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse("lerning_rate = 1\n").unwrap_err().to_string();
        assert!(err.contains("unknown key"), "{err}");
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn unparseable_value_is_an_error() {
        assert!(parse("epochs = soon\n").is_err());
        assert!(parse("batch_size = 0\n").is_err());
        assert!(parse("depth_cap = -3\n").is_err());
    }

    #[test]
    fn duplicate_key_is_an_error() {
        assert!(parse("seed = 1\nseed = 2\n").is_err());
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(parse_config(Path::new("/nonexistent/path.cfg")).is_err());
    }
}
