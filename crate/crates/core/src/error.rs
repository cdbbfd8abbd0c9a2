use thiserror::Error;

/// Everything that can go wrong between loading a population and producing a report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(&'static str),
    #[error("non-numeric or non-finite value in column `{column}` at data row {row}")]
    NonNumericCell { row: usize, column: &'static str },
    #[error("population needs at least 3 units, found {0}")]
    TooFewRows(usize),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("degenerate variance: all {0} values are identical")]
    DegenerateVariance(&'static str),
    #[error("population mean of {0} is zero")]
    ZeroMean(&'static str),
    #[error("invalid sizes: N={pop_size}, n={n}, n'={n_prime:?}")]
    InvalidSizes {
        pop_size: usize,
        n: usize,
        n_prime: Option<usize>,
    },
    #[error("two-phase factors requested without a first-phase size n'")]
    MissingFirstPhase,
    #[error("invalid synthetic population spec: {0}")]
    InvalidSyntheticSpec(String),
    #[error("synthetic population target unreachable after {0} attempts")]
    TargetUnreachable(usize),

    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("sample mean of x is zero")]
    ZeroSampleMeanX,
    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(&'static str),
    #[error("non-positive base in {0} with a non-integer exponent")]
    NonPositiveBase(&'static str),
    #[error("weights sum to {0}, not 1")]
    WeightsNotNormalized(f64),

    #[error("singular weight system: rows {row_opt:?} and {row_bias:?} are linearly dependent")]
    SingularSystem {
        row_opt: [f64; 3],
        row_bias: [f64; 3],
    },
    #[error("weight solution violates constraints (sum {sum:e}, opt {opt:e}, bias {bias:e})")]
    ResidualTooLarge { sum: f64, opt: f64, bias: f64 },

    #[error("MSE of the compared estimator is not positive")]
    ZeroMse,
    #[error("{count} subsets exceed the enumeration limit of {limit}")]
    TooManySubsets { count: u128, limit: u128 },
    #[error("estimator failed on sample {indices:?}: {source}")]
    EstimatorFailed {
        indices: Vec<usize>,
        #[source]
        source: Box<Error>,
    },
    #[error("estimator failed on Monte Carlo replicate {replicate}: {source}")]
    ReplicateFailed {
        replicate: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("Monte Carlo needs at least {min} replicates, got {got}")]
    TooFewReplicates { got: u64, min: u64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

impl Error {
    /// True for failures caused by the numbers themselves rather than by
    /// malformed input (zero variances, singular systems, bad bases).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateVariance(_)
            | Error::ZeroMean(_)
            | Error::ZeroSampleMeanX
            | Error::DegenerateDenominator(_)
            | Error::NonPositiveBase(_)
            | Error::SingularSystem { .. }
            | Error::ResidualTooLarge { .. }
            | Error::ZeroMse
            | Error::TargetUnreachable(_) => true,
            Error::EstimatorFailed { source, .. } | Error::ReplicateFailed { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
