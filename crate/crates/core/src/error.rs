use thiserror::Error;

use crate::solver4::SixReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building or reconstructing a Mueller matrix.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Stokes vector: {0}")]
    InvalidStokes(String),

    /// Input and output Stokes vectors carry different Lorentz invariants, so no
    /// Mueller matrix in the group can relate them.
    #[error("invariant mismatch: input {input:e}, output {output:e}")]
    InvariantMismatch { input: f64, output: f64 },

    #[error("constraint violated ({what}): residual {residual:e}")]
    ConstraintViolation { what: &'static str, residual: f64 },

    #[error("factor product has imaginary part {max_imag:e}")]
    NonRealProduct { max_imag: f64 },

    #[error("division by zero: |k0| = {0:e}")]
    DivisionByZero(f64),

    #[error("antipodal input: S^2 + S.S' = {0:e}")]
    AntipodalInput(f64),

    #[error("polarization vector lengths differ: |S| = {input}, |S'| = {output}")]
    LengthMismatch { input: f64, output: f64 },

    #[error("half-turn rotation has no Gibbs vector (n0 = {0:e})")]
    HalfTurn(f64),

    #[error("measurement pairs are inconsistent: residual {residual:e}")]
    InconsistentPairs { residual: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("negative square {name} = {value:e}")]
    NegativeSquare { name: &'static str, value: f64 },

    #[error("no real root: discriminant {0:e}")]
    NoRealRoot(f64),

    #[error("leading and linear coefficients both vanish")]
    DegenerateLeadingCoefficient,

    #[error("lifted unknowns are not rank one: xy residual {xy:e}, zw residual {zw:e}")]
    Rank1Violation { xy: f64, zw: f64 },

    #[error("no sign assignment reproduces all measurements (best residual {:e})", .0.best_residual())]
    NoValidCandidate(Box<SixReport>),

    #[error("no start converged ({starts} starts)")]
    NoConvergedRoot { starts: usize },

    /// The duplicate projections of the expansion disagree: the parameter does not map this pair.
    #[error("parameter does not map this pair: mismatch {0:e}")]
    InconsistentParameter(f64),

    #[error("requested axis lies outside the little-group domain (n0^2 = {0:e})")]
    OutOfDomain(f64),

    #[error("stacked system is rank deficient (rank {rank} of {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("expected {expected} measurement pairs, found {found}")]
    PairCount { expected: &'static str, found: usize },
}

impl Error {
    /// True for failures that mean the data admit no consistent solution, as
    /// opposed to malformed input.
    pub fn is_inconsistency(&self) -> bool {
        matches!(
            self,
            Error::InconsistentPairs { .. }
                | Error::DegenerateGeometry(_)
                | Error::SingularSystem(_)
                | Error::NegativeSquare { .. }
                | Error::NoRealRoot(_)
                | Error::DegenerateLeadingCoefficient
                | Error::Rank1Violation { .. }
                | Error::NoValidCandidate(_)
                | Error::NoConvergedRoot { .. }
                | Error::InconsistentParameter(_)
                | Error::OutOfDomain(_)
                | Error::RankDeficient { .. }
                | Error::AntipodalInput(_)
                | Error::HalfTurn(_)
                | Error::DivisionByZero(_)
        )
    }

    /// Variant name, used as a machine-readable label.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidStokes(_) => "InvalidStokes",
            Error::InvariantMismatch { .. } => "InvariantMismatch",
            Error::ConstraintViolation { .. } => "ConstraintViolation",
            Error::NonRealProduct { .. } => "NonRealProduct",
            Error::DivisionByZero(_) => "DivisionByZero",
            Error::AntipodalInput(_) => "AntipodalInput",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::HalfTurn(_) => "HalfTurn",
            Error::InconsistentPairs { .. } => "InconsistentPairs",
            Error::DegenerateGeometry(_) => "DegenerateGeometry",
            Error::SingularSystem(_) => "SingularSystem",
            Error::NegativeSquare { .. } => "NegativeSquare",
            Error::NoRealRoot(_) => "NoRealRoot",
            Error::DegenerateLeadingCoefficient => "DegenerateLeadingCoefficient",
            Error::Rank1Violation { .. } => "Rank1Violation",
            Error::NoValidCandidate(_) => "NoValidCandidate",
            Error::NoConvergedRoot { .. } => "NoConvergedRoot",
            Error::InconsistentParameter(_) => "InconsistentParameter",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::PairCount { .. } => "PairCount",
        }
    }
}
