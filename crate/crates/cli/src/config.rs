//! Plain-text `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tractghg::{Error, Result};

/// Keys accepted in a config file.
pub const KEYS: [&str; 19] = [
    "tracts",
    "roads",
    "census",
    "panel",
    "ef_model",
    "weights",
    "formula",
    "model_spec",
    "group",
    "estimators",
    "scenario",
    "fit",
    "out_dir",
    "seed",
    "side",
    "gamma",
    "lambda",
    "sigma",
    "method",
];

/// Keys whose values are paths, resolved against the config file's
/// directory when relative.
const PATH_KEYS: [&str; 9] = [
    "tracts",
    "roads",
    "census",
    "panel",
    "ef_model",
    "model_spec",
    "scenario",
    "fit",
    "out_dir",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = tractghg::io::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn parse(text: &str, source_name: &str, base: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| Error::Parse {
                path: source_name.into(),
                line: i + 1,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(format!("unknown key {k:?}")));
            }
            if values.contains_key(k) {
                return Err(err(format!("key {k} set twice")));
            }
            let v = if PATH_KEYS.contains(&k) && Path::new(v).is_relative() {
                base.join(v).display().to_string()
            } else {
                v.to_string()
            };
            values.insert(k.to_string(), v);
        }
        Ok(Self { values })
    }

    /// Command-line flags win over file values.
    pub fn set(&mut self, key: &str, value: Option<String>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    /// A path that must be configured and must exist.
    pub fn input(&self, key: &str) -> Result<PathBuf> {
        let p = self
            .path(key)
            .ok_or_else(|| Error::Invalid(format!("no {key} path configured (--{} or `{key} =`)", key.replace('_', "-"))))?;
        if !p.is_file() {
            return Err(Error::Invalid(format!("{key} file {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.path("out_dir").unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        Ok(dir)
    }

    pub fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Invalid(format!("{key} = {v:?} is not a valid number")))
            })
            .transpose()
    }
}
