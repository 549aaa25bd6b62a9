use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: nsalpha_core::Error,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attach a context string to solver errors.
pub trait Context<T> {
    fn context(self, context: impl Into<String>) -> CliResult<T>;
}

impl<T> Context<T> for nsalpha_core::Result<T> {
    fn context(self, context: impl Into<String>) -> CliResult<T> {
        self.map_err(|source| CliError::Solver {
            context: context.into(),
            source,
        })
    }
}

impl<T> Context<T> for std::io::Result<T> {
    fn context(self, context: impl Into<String>) -> CliResult<T> {
        self.map_err(|source| CliError::Io {
            context: context.into(),
            source,
        })
    }
}
