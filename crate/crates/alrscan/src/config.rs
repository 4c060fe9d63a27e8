//! Key-value experiment configuration files.
//!
//! Format: one `key = value` per line, `#` comments, blank lines ignored.
//! Lists are comma separated. Missing keys are reported by name.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("missing config key `{0}`")]
    Missing(String),
    #[error("config key `{key}`: cannot parse {value:?} as {ty}")]
    Parse {
        key: String,
        value: String,
        ty: &'static str,
    },
}

/// A parsed key-value configuration.
#[derive(Debug, Clone, Default)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: lineno + 1,
                    text: raw.to_string(),
                });
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn get_str(&self, key: &str) -> Result<&str, ConfigError> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(
        &self,
        key: &str,
        value: &str,
        ty: &'static str,
    ) -> Result<T, ConfigError> {
        value.parse().map_err(|_| ConfigError::Parse {
            key: key.to_string(),
            value: value.to_string(),
            ty,
        })
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.parse(key, self.get_str(key)?, "number")
    }

    pub fn get_u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.parse(key, self.get_str(key)?, "integer")
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.parse(key, self.get_str(key)?, "integer")
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get_str(key)?
            .split(',')
            .map(|v| self.parse(key, v.trim(), "number list"))
            .collect()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.opt_str(key) {
            None => Ok(default),
            Some(v) => self.parse(key, v, "number"),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.opt_str(key) {
            None => Ok(default),
            Some(v) => self.parse(key, v, "integer"),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.opt_str(key) {
            None => Ok(default),
            Some(v) => self.parse(key, v, "integer"),
        }
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.opt_str(key) {
            None => Ok(default.to_vec()),
            Some(_) => self.get_f64_list(key),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.opt_str(key).unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_lists_and_comments() {
        let cfg = Config::from_str_contents(
            "# experiment\nreplicates = 100\ntheta = 0, 0.2, 0.4\nmode = gaussian\n",
        )
        .unwrap();
        assert_eq!(cfg.get_u64("replicates").unwrap(), 100);
        assert_eq!(cfg.get_f64_list("theta").unwrap(), vec![0.0, 0.2, 0.4]);
        assert_eq!(cfg.get_str("mode").unwrap(), "gaussian");
        assert_eq!(cfg.u64_or("absent", 7).unwrap(), 7);
    }

    #[test]
    fn missing_key_is_named() {
        let cfg = Config::from_str_contents("a = 1\n").unwrap();
        let err = cfg.get_f64("p0").unwrap_err();
        assert!(err.to_string().contains("p0"));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = Config::from_str_contents("a = 1\nnot a pair\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
    }
}
