//! Run settings: command-line flags over the seed environment variable over
//! a JSON config file over built-in defaults.

use std::path::Path;

use anyhow::{Context, Result};
use equicantor::{Alphabet, SumMethod};
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const SEED_ENV: &str = "EQUICANTOR_SEED";
pub const THREADS_ENV: &str = "EQUICANTOR_THREADS";

/// Every setting any subcommand understands. Config files use the same
/// keys; a run manifest is accepted too (its `config` entry is used).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pole: Option<[f64; 2]>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($field:ident),*) => {
        Settings { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl Settings {
    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        overlay!(
            self, lower, a, r, alphabet, n, seed, walks, depth, eps, budget, method, control,
            force, search, samples, pole
        )
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("config").filter(|_| value_is_manifest(&text)) {
            value = inner.take();
        }
        serde_json::from_value(value)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    pub fn from_env() -> Result<Settings> {
        let seed =
            match std::env::var(SEED_ENV) {
                Ok(s) => Some(s.trim().parse().map_err(|_| {
                    UsageError(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
                })?),
                Err(_) => None,
            };
        Ok(Settings {
            seed,
            ..Settings::default()
        })
    }

    pub fn a(&self) -> f64 {
        self.a.unwrap_or(2.217)
    }

    pub fn r(&self) -> f64 {
        self.r.unwrap_or(0.0623)
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        let s = self.alphabet.as_deref().unwrap_or("line");
        s.parse::<Alphabet>()
            .map_err(|e| UsageError(e.to_string()).into())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn method(&self) -> Result<SumMethod> {
        let s = self.method.as_deref().unwrap_or("naive");
        s.parse::<SumMethod>()
            .map_err(|e| UsageError(e.to_string()).into())
    }

    pub fn flag(v: bool) -> Option<bool> {
        v.then_some(true)
    }
}

fn value_is_manifest(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .map(|v| v.get("tool_version").is_some())
        .unwrap_or(false)
}

/// Worker cap from the environment, if any.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(UsageError(format!("{THREADS_ENV}={s:?} is not a positive integer")).into()),
        },
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file_values() {
        let flags = Settings {
            a: Some(2.0),
            ..Settings::default()
        };
        let file = Settings {
            a: Some(1.5),
            r: Some(0.05),
            ..Settings::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.a, Some(2.0));
        assert_eq!(merged.r, Some(0.05));
        assert_eq!(merged.alphabet, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"a": 2.0, "colour": "red"}"#).unwrap();
        let err = Settings::load(&path).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn manifests_are_accepted_as_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"{"tool_version": "0", "config": {"a": 2.5, "n": 4}}"#,
        )
        .unwrap();
        let s = Settings::load(&path).unwrap();
        assert_eq!(s.a, Some(2.5));
        assert_eq!(s.n, Some(4));
    }
}
