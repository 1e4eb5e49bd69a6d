use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("duplicate node `{0}`")]
    DuplicateNode(String),

    #[error("relation {label} from {from_label} `{from}` to {to_label} `{to}` violates the map schema")]
    SchemaViolation {
        label: String,
        from: String,
        from_label: String,
        to: String,
        to_label: String,
    },

    #[error("lane `{0}` has no centerline")]
    MissingCenterline(String),

    #[error("entity `{0}` has no position")]
    MissingPosition(String),

    #[error("`{0}` is not localized on any lane")]
    NotLocalized(String),

    #[error("sample grids differ: {0} vs {1} steps")]
    GridMismatch(usize, usize),

    #[error("no valid cell in cost table")]
    NoValidCell,

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("config override `{key}`: {reason}")]
    Override { key: String, reason: String },

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
