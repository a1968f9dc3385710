use thiserror::Error;

/// Failures of the command-line harness.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` expects {expected}, got `{value}`")]
    Type {
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("config key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Core(#[from] gmgan_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Syntax { .. } => "config-syntax",
            HarnessError::UnknownKey(_) => "config-unknown-key",
            HarnessError::Type { .. } => "config-type",
            HarnessError::Invalid { .. } => "config-invalid",
            HarnessError::Core(e) => e.kind(),
            HarnessError::Io(_) => "io",
        }
    }

    /// Single-line `error kind=<kind> message=<text>` form for stderr.
    pub fn machine_line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error kind={} message={msg:?}", self.kind())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
