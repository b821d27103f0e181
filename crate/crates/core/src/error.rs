use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error(
        "altitude {altitude} m is infeasible; coverage requires altitude below {max_feasible} m"
    )]
    InfeasibleAltitude { altitude: f64, max_feasible: f64 },

    #[error("separation {distance} m is inside the collision radius")]
    CollisionDomain { distance: f64 },

    #[error("collision at t = {time} s between agents {i} and {k} ({distance} m)")]
    Collision {
        time: f64,
        i: usize,
        k: usize,
        distance: f64,
    },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("trial {trial} (seed {seed}): {source}")]
    Trial {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that stem from user configuration rather than a
    /// runtime fault.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::Json(_) => true,
            Error::InfeasibleAltitude { .. } | Error::InvalidTopology(_) => true,
            Error::Trial { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
