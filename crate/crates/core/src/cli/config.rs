//! Flat key=value run configuration: file values, flag overrides, unknown
//! key rejection, and the resolved-config echo written next to outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct Resolver {
    /// Current value per key: file first, then flag overrides.
    values: BTreeMap<String, String>,
    /// Keys that came from the config file and must all be consumed.
    file_keys: BTreeSet<String>,
    /// Fully resolved values, including applied defaults.
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn from_file(path: Option<&Path>) -> Result<Self> {
        let mut r = Resolver::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "{}:{}: expected key=value, got `{line}`",
                        path.display(),
                        i + 1
                    ))
                })?;
                r.values.insert(k.trim().to_string(), v.trim().to_string());
                r.file_keys.insert(k.trim().to_string());
            }
        }
        Ok(r)
    }

    /// Flag override; flags win over file values.
    pub fn set<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn set_flag(&mut self, key: &str, on: bool) {
        if on {
            self.values.insert(key.to_string(), "true".to_string());
        }
    }

    pub fn get(&mut self, key: &str, default: &str) -> String {
        let v = self.values.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.to_string(), v.clone());
        self.file_keys.remove(key);
        v
    }

    pub fn get_parse<T: FromStr>(&mut self, key: &str, default: &str) -> Result<T> {
        let v = self.get(key, default);
        v.parse()
            .map_err(|_| Error::Config(format!("bad value `{v}` for key `{key}`")))
    }

    pub fn get_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        let v = self.get(key, if default { "true" } else { "false" });
        match v.as_str() {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            _ => Err(Error::Config(format!("bad value `{v}` for boolean key `{key}`"))),
        }
    }

    pub fn get_required(&mut self, key: &str) -> Result<String> {
        let v = self.get(key, "");
        if v.is_empty() {
            return Err(Error::Usage(format!("missing required key `{key}`")));
        }
        Ok(v)
    }

    /// Unconsumed file keys are configuration mistakes.
    pub fn reject_unknown(&self) -> Result<()> {
        if let Some(key) = self.file_keys.iter().next() {
            return Err(Error::Config(format!("unknown configuration key `{key}`")));
        }
        Ok(())
    }

    /// Deterministic key=value echo of every consumed key. Paths are left
    /// out so reruns into different directories stay byte-identical.
    pub fn resolved_text(&self) -> String {
        self.resolved
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

/// Exclusive ownership of an output directory for the run's duration.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Usage(format!(
                "output directory {} is locked by another run (stale? remove {})",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// `<out>/<command>/`, created, locked, with the resolved config echoed.
pub fn open_output(out: &Path, command: &str, resolver: &Resolver) -> Result<(PathBuf, DirLock)> {
    let dir = out.join(command);
    fs::create_dir_all(&dir)?;
    let lock = DirLock::acquire(&dir)?;
    fs::write(dir.join("config.resolved"), resolver.resolved_text())?;
    Ok((dir, lock))
}
