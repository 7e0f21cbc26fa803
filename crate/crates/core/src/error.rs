use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Columns picked by a switch position are (numerically) linearly dependent.
    #[error(
        "selection {subset:?} is rank deficient (relative smallest singular value {ratio:.3e})"
    )]
    Singular { subset: Vec<usize>, ratio: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "family of {count} subsets exceeds the cap of {cap}; use a banked or Frankl-Babai family"
    )]
    FamilyTooLarge { count: u128, cap: u128 },

    #[error("Frankl-Babai construction infeasible: largest prime q = {q} <= L/K is below K = {k} (L = {l}; L >= 2K^2 = {bound} guarantees feasibility)")]
    Infeasible {
        q: u64,
        k: usize,
        l: usize,
        bound: usize,
    },

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("leading block is ill-conditioned (condition number {0:.3e}); reorder columns first, e.g. with greedy_permute")]
    IllConditioned(f64),

    #[error("channel estimation overhead exceeds the coherence budget (pre-log factor {0})")]
    OverheadInfeasible(f64),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Parse(_)
            | Error::Argument(_)
            | Error::Io(_)
            | Error::Infeasible { .. }
            | Error::FamilyTooLarge { .. } => 2,
            _ => 3,
        }
    }
}
