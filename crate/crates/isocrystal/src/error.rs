use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("no Conway polynomial for F_{p}^{q} in the built-in table")]
    UnknownField { p: u64, q: usize },
    #[error("{p}^{n} does not fit in 62 bits")]
    PrecisionTooLarge { p: u64, n: u32 },
    #[error("operands live in different rings")]
    RingMismatch,
    #[error("element is not a unit")]
    NotAUnit,
    #[error("F_{p}^{from} does not embed into F_{p}^{to}")]
    NoEmbedding { p: u64, from: usize, to: usize },
    #[error("matrix is singular at the working precision")]
    SingularAtPrecision,
    #[error("argument lies outside the domain of the truncated exponential")]
    OutsideExpDomain,
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("precision exhausted: need {needed}, have {available}")]
    PrecisionExhausted { needed: u32, available: u32 },
    #[error("unknown corpus name `{0}`")]
    UnknownCorpusName(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("nonzero shift; clear denominators first")]
    ShiftUnsupported,
    #[error("search space too large for exhaustive enumeration")]
    SearchSpaceTooLarge,
    #[error("no solution found in extensions of degree up to {0}")]
    ExtensionCapExceeded(usize),
    #[error("no Dieudonne-Fontaine lattice construction applies to this crystal")]
    UnsupportedShape,
    #[error("twist congruence level {have} is below the required {need}")]
    PreconditionTooWeak { have: u32, need: u32 },
    #[error("lattice is not closed under multiplication")]
    NotMultiplicative,
    #[error("crystal is not a Dieudonne module")]
    NotDieudonne,
    #[error("no split form available")]
    NoSplitForm,
    #[error("lift failed: {0}")]
    LiftFailed(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
