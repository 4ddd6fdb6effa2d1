use thiserror::Error;

/// Errors raised while loading configurations and running experiments.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },

    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Solver(#[from] ehlc_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn config_invalid(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::ConfigInvalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Prefixes the field of a model validation error with its config section.
pub(crate) fn in_section(section: &str, err: ehlc_core::Error) -> CliError {
    match err {
        ehlc_core::Error::InvalidParameter { field, reason } if field.starts_with(section) => config_invalid(field, reason),
        ehlc_core::Error::InvalidParameter { field, reason } => config_invalid(format!("{section}.{field}"), reason),
        other => config_invalid(section, other.to_string()),
    }
}
