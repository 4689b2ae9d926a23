//! Flat `key = value` run configuration shared by config files, manifests
//! and command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum ConfigError {
    UnknownKey(String),
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    Syntax {
        line: usize,
        text: String,
    },
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown config key `{k}`"),
            ConfigError::BadValue { key, value, reason } => {
                write!(f, "invalid value `{value}` for `{key}`: {reason}")
            }
            ConfigError::Syntax { line, text } => {
                write!(f, "config line {line} is not `key = value`: {text}")
            }
            ConfigError::Io(path, e) => write!(f, "cannot read {}: {e}", path.display()),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A value that can live in a config file.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! scalar_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.trim().parse().map_err(|e| format!("{e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

scalar_value!(u64, usize, f64, bool);

impl ConfigValue for String {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(s.trim().to_string())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

/// Empty means unset.
impl ConfigValue for Option<u64> {
    fn parse_value(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| format!("{e}"))
        }
    }
    fn render(&self) -> String {
        self.map(|v| v.to_string()).unwrap_or_default()
    }
}

/// Comma-separated list.
impl ConfigValue for Vec<f64> {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse().map_err(|e| format!("{e}")))
            .collect()
    }
    fn render(&self) -> String {
        self.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    parse_config_text(&text)
}

/// Fields shared by every subcommand config.
pub trait RunConfig: Default {
    const COMMAND: &'static str;
    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError>;
    fn entries(&self) -> Vec<(&'static str, String)>;

    /// Defaults, then the file, then flag overrides.
    fn resolve(
        file: Option<&Path>,
        overrides: &[(&'static str, String)],
    ) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            // Manifests carry a `command` line naming their subcommand.
            for (k, v) in read_config_file(path)? {
                if k == "command" {
                    if v != Self::COMMAND {
                        return Err(ConfigError::BadValue {
                            key: k,
                            value: v,
                            reason: format!("this is a `{}` config", Self::COMMAND),
                        });
                    }
                    continue;
                }
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Manifest text: a comment header plus every resolved key, loadable
    /// again with `--config`.
    fn manifest(&self, notes: &BTreeMap<String, String>) -> String {
        let mut out = format!(
            "# avoidnet {} manifest\n# rerun with: avoidnet {} --config <this file>\n",
            Self::COMMAND,
            Self::COMMAND
        );
        for (k, v) in notes {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&format!("command = {}\n", Self::COMMAND));
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// Declares a subcommand config: the resolved struct with defaults, and a
/// clap argument group with one optional `--key` flag per field.
macro_rules! run_config {
    (
        $command:literal, $name:ident, $args:ident {
            $( $(#[doc = $doc:literal])* $field:ident : $ty:ty = $default:expr ),* $(,)?
        }
    ) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            $( $(#[doc = $doc])* pub $field: $ty, )*
        }

        impl Default for $name {
            fn default() -> Self {
                $name { $( $field: $default, )* }
            }
        }

        impl $crate::config::RunConfig for $name {
            const COMMAND: &'static str = $command;

            fn set(&mut self, key: &str, value: &str) -> Result<(), $crate::config::ConfigError> {
                use $crate::config::ConfigValue;
                match key {
                    $( stringify!($field) => {
                        self.$field = <$ty>::parse_value(value).map_err(|reason| {
                            $crate::config::ConfigError::BadValue {
                                key: key.to_string(),
                                value: value.to_string(),
                                reason,
                            }
                        })?;
                    } )*
                    _ => return Err($crate::config::ConfigError::UnknownKey(key.to_string())),
                }
                Ok(())
            }

            fn entries(&self) -> Vec<(&'static str, String)> {
                use $crate::config::ConfigValue;
                vec![ $( (stringify!($field), self.$field.render()), )* ]
            }
        }

        #[derive(clap::Args, Clone, Debug, Default)]
        pub struct $args {
            /// Config file (`key = value` lines); flags override it.
            #[arg(long, value_name = "PATH")]
            pub config: Option<std::path::PathBuf>,
            $(
                $(#[doc = $doc])*
                #[arg(long, value_name = "VALUE")]
                pub $field: Option<String>,
            )*
        }

        impl $args {
            pub fn overrides(&self) -> Vec<(&'static str, String)> {
                let mut v = Vec::new();
                $( if let Some(x) = &self.$field { v.push((stringify!($field), x.clone())); } )*
                v
            }

            pub fn resolve(&self) -> Result<$name, $crate::config::ConfigError> {
                <$name as $crate::config::RunConfig>::resolve(self.config.as_deref(), &self.overrides())
            }
        }
    };
}

pub(crate) use run_config;
