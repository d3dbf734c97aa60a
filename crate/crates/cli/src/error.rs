use serde_json::json;

/// Exit status for usage errors (unknown subcommand, bad flag).
pub const EXIT_USAGE: i32 = 2;
/// Exit status for malformed inputs, schema and configuration errors.
pub const EXIT_VALIDATION: i32 = 3;
/// Exit status for numeric failures, including a failed gradient check.
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: caprouter::Error,
    },

    #[error("gradient check failed: max relative error {max_rel_err:e} (tolerance {tolerance:e})")]
    GradCheck { max_rel_err: f64, tolerance: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core { source, .. } => match source.class() {
                caprouter::ErrorClass::Numeric => EXIT_NUMERIC,
                caprouter::ErrorClass::Validation | caprouter::ErrorClass::Io => EXIT_VALIDATION,
            },
            CliError::GradCheck { .. } => EXIT_NUMERIC,
        }
    }

    /// The `{code, message, context}` record written to stderr.
    pub fn record(&self) -> serde_json::Value {
        let (message, context) = match self {
            CliError::Usage(m) => (m.clone(), "usage".to_string()),
            CliError::Core { context, source } => (source.to_string(), format!("{context} ({})", source.class())),
            CliError::GradCheck { .. } => (self.to_string(), "gradcheck".to_string()),
        };
        json!({ "code": self.exit_code(), "message": message, "context": context })
    }
}

/// Attaches a context string to library errors.
pub trait Context<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T, E: Into<caprouter::Error>> Context<T> for Result<T, E> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| CliError::Core { context: ctx(), source: e.into() })
    }
}
