use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;

use crate::{Error, Result};

/// Keys the driver understands. A trailing `*` matches any suffix.
const KNOWN: &[&str] = &[
    "type",
    "solver_type",
    "element_type",
    "volume_conductor.grid.filename",
    "volume_conductor.tensors.filename",
    "source_model.type",
    "source_model.reference_length",
    "source_model.regularization",
    "source_model.volume_order",
    "source_model.surface_order",
    "solver.tolerance",
    "solver.preconditioner",
    "solver.max_iterations",
    "transfer.tolerance",
    "electrodes.max_distance",
    "meg.quadrature_order",
    "meg.include_primary",
    "sphere.center",
    "sphere.radii",
    "sphere.conductivities",
    "sphere.order",
    "threads",
];

/// Flat key/value tree with dotted paths.
///
/// Text form: `[section]` headers prefix the keys below them, `key = value`
/// lines, `#` or `;` comments. Relative file names are resolved against the
/// directory of the file they were read from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
    base: Option<PathBuf>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        let mut c = Self::new();
        for (k, v) in pairs {
            c.set(k, v);
        }
        c
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut c = Self::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(path, i + 1, "unterminated section header"))?
                    .trim();
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `key = value`"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(path, i + 1, "empty key"));
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            c.values.insert(key, unquote(v.trim()).to_string());
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text, path)?;
        c.base = path.parent().map(Path::to_path_buf);
        Ok(c)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.values.insert(key.into(), value.into());
    }

    /// Apply a `key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| Error::InvalidValue {
            key: assignment.into(),
            msg: "override must have the form key=value".into(),
        })?;
        self.set(k.trim(), unquote(v.trim()));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::MissingKey(key.into()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Parsed value or `default` when absent.
    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| Error::InvalidValue {
                key: key.into(),
                msg: format!("`{v}`: {e}"),
            }),
        }
    }

    /// Optional parsed value.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|e: T::Err| Error::InvalidValue {
                    key: key.into(),
                    msg: format!("`{v}`: {e}"),
                })
            })
            .transpose()
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key).map(str::to_ascii_lowercase).as_deref() {
            None => Ok(default),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(v) => Err(Error::InvalidValue {
                key: key.into(),
                msg: format!("`{v}` is not a boolean"),
            }),
        }
    }

    /// Comma or whitespace separated numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        v.split([',', ' ', '\t'])
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::InvalidValue {
                    key: key.into(),
                    msg: format!("`{t}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// File name resolved against the config file's directory.
    pub fn path(&self, key: &str) -> Result<PathBuf> {
        let p = PathBuf::from(self.require(key)?);
        Ok(match &self.base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        })
    }

    /// Keys the driver does not recognize; each is logged as a warning.
    pub fn unknown_keys(&self) -> Vec<String> {
        let unknown: Vec<String> = self.values.keys().filter(|k| !KNOWN.contains(&k.as_str())).cloned().collect();
        for k in &unknown {
            warn!("unknown config key `{k}` ignored");
        }
        unknown
    }
}

fn unquote(v: &str) -> &str {
    for q in ['"', '\''] {
        if let Some(inner) = v.strip_prefix(q).and_then(|s| s.strip_suffix(q)) {
            return inner;
        }
    }
    v
}
