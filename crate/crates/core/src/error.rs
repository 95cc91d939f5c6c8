use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One schema problem in an input file; `line` is the 1-based CSV line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub file: String,
    pub line: Option<u64>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.file, l, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("payoff gap changes sign {crossings} times at theta={theta}")]
    NonMonotoneIndifference { theta: f64, crossings: usize },

    #[error("no sampled type applies under the {arm} arm")]
    EmptyApplicantSet { arm: String },

    #[error("label counts {counts:?} do not sum to {units} units")]
    CountMismatch { units: usize, counts: Vec<usize> },

    #[error("item {item} is degenerate (all responses identical)")]
    DegenerateItem { item: String },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("empty cell: {0}")]
    EmptyCell(String),

    #[error("cannot impute baseline distribution for {0}")]
    UnimputableCell(String),

    #[error("teacher {0} has no sampled pupils")]
    NoPupils(usize),

    #[error("missing input for teacher {0}")]
    MissingInput(usize),

    #[error("district {0} has no teachers")]
    EmptyDistrict(usize),

    #[error("design matrix is rank deficient; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("applicant pool is empty: {0}")]
    EmptyPool(String),

    #[error("empty sample")]
    EmptySample,

    #[error("statistic failed on {failures} of {total} permutations (first indices {first:?})")]
    StatisticFailure {
        failures: usize,
        total: usize,
        first: Vec<usize>,
    },

    #[error("only one round available; persistent teacher variance is not identified")]
    SingleRound,

    #[error("schema violations: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Schema(Vec<Violation>),

    #[error("integrity violations: {}", .0.join("; "))]
    Integrity(Vec<String>),

    #[error("file {0} has no data rows")]
    EmptyFile(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage {stage} failed (input digest {digest}): {source}")]
    Stage {
        stage: String,
        digest: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Invalid(_)
            | Error::CountMismatch { .. }
            | Error::Schema(_)
            | Error::Integrity(_)
            | Error::EmptyFile(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
