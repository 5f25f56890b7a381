use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate geometry: sites {0} and {1} coincide")]
    DegenerateGeometry(usize, usize),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NonHermitian(f64),

    #[error("non-finite generator entries")]
    NonFiniteGenerator,

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("no successful transport (final trap population {0:e})")]
    NoSuccessfulTransport(f64),

    #[error("no exciton loss (final ground population {0:e})")]
    NoLoss(f64),

    #[error("non-unique steady state ({0} near-null directions)")]
    NonUniqueSteadyState(usize),

    #[error("steady-state current {0:e} is below the floor")]
    NoSteadyCurrent(f64),

    #[error("distribution too noisy: every grid point fell below the cutoff")]
    DistributionTooNoisy,

    #[error("perturbed run for parameter {index} ({label}) failed: {source}")]
    PerturbedRun {
        index: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible ensemble spec: {0}")]
    InfeasibleSpec(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::DegenerateGeometry(..)
                | Error::InfeasibleSpec(_)
                | Error::Json(_)
        )
    }
}
