use thiserror::Error;

/// Errors raised by the library. The CLI maps `Usage`-like variants to exit
/// status 2 and everything else to 1.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {d} outside supported range {min}..={max}")]
    Dimension { d: u32, min: u32, max: u32 },

    #[error("probability {0} outside the open interval (0, 1/2)")]
    Probability(f64),

    #[error("could not parse probability {0:?} as a decimal")]
    ProbabilityParse(String),

    #[error("vertex {v} does not fit in dimension {d}")]
    Vertex { v: u64, d: u32 },

    #[error("radius {r} exceeds dimension {d}")]
    Radius { r: u32, d: u32 },

    #[error("argument {0} must lie strictly inside (0, 1)")]
    OpenUnit(f64),

    #[error("invalid cube subgraph: {0}")]
    InvalidSubgraph(String),

    #[error("dimension {d} is smaller than span {span}")]
    SpanExceedsDimension { d: u32, span: u32 },

    #[error("size {t} exceeds enumeration cap {cap}")]
    EnumerationCap { t: usize, cap: usize },

    #[error("{what} {value} exceeds cap {cap}")]
    Cap { what: &'static str, value: u64, cap: u64 },

    #[error("unsupported component size {0}: closed forms exist for t in 1..=3")]
    UnsupportedSize(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(u32, u32),

    #[error("zero variance in sample")]
    ZeroVariance,

    #[error("sample too small: {0}")]
    Undersized(String),

    #[error("fragment is not stored explicitly ({0} oversize components)")]
    FragmentNotStored(u64),

    #[error("internal fault: {0}")]
    Internal(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
