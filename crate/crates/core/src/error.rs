use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("nonpositive density {rho:e} at grid index {index}")]
    DegenerateDensity { index: usize, rho: f64 },

    #[error("non-finite value detected in the state at t = {t}")]
    NonFinite { t: f64 },

    #[error("symmetric eigendecomposition produced non-finite values")]
    Eigen,

    #[error("damping fit needs at least {required} peaks, found {found}")]
    TooFewPeaks { found: usize, required: usize },

    #[error("fit window [{lo}, {hi}] holds {samples} usable samples")]
    FitWindow { lo: f64, hi: f64, samples: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
