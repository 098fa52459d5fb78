use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero separation: the contact term of the Green's function is excluded; only i != j couplings are evaluated")]
    ZeroSeparation,

    #[error("|q| = {q} lies on the light circle |q| = k = {k}; offset the sampling grid")]
    PoleOnLightCircle { q: f64, k: f64 },

    #[error(
        "reciprocal sum did not converge: a_ho = {a_ho}, cutoff radius {radius} exceeds cap {cap}"
    )]
    NonConvergence { a_ho: f64, radius: f64, cap: f64 },

    #[error("band grouping undefined: gap is closed (delta = {delta})")]
    GapClosed { delta: f64 },

    #[error("overlap link magnitude {magnitude:.3e} below threshold; refine the k-grid")]
    RefineGrid { magnitude: f64 },

    #[error("lattice error: {0}")]
    Lattice(String),

    #[error("integration unstable at t = {t}: norm grew from {before:.6e} to {after:.6e} with the drive off")]
    Unstable { t: f64, before: f64, after: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::RefineGrid { .. }
                | Error::Unstable { .. }
                | Error::Fit(_)
                | Error::Linalg(_)
                | Error::PoleOnLightCircle { .. }
        )
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
