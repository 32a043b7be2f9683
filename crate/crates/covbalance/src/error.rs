use std::io;
use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A configuration value or command-line argument is invalid. `key`
    /// names the offending setting, e.g. `optimizer.lr` or `--axis`.
    #[error("invalid `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("cannot parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },

    #[error(transparent)]
    Core(#[from] covbalance_core::Error),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Error for a name that is not one of `valid`.
    pub fn unknown(key: &str, what: &str, value: &str, valid: &[&str]) -> Self {
        Self::config(
            key,
            format!("unknown {what} `{value}`; valid options: {}", valid.join(", ")),
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Format {
            what: what.into(),
            message: message.into(),
        }
    }

    /// 2 for configuration and usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Parse { .. } => 2,
            _ => 1,
        }
    }
}
