//! Error type shared by all engine modules.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("duplicate generator `{0}`")]
    DuplicateGenerator(String),
    #[error("relation on `{lead}` is not homogeneous: lead degree {lead_degree}, term degree {term_degree}")]
    NonHomogeneousRelation {
        lead: String,
        lead_degree: usize,
        term_degree: usize,
    },
    #[error("relation on `{lead}` does not decrease the monomial order (term `{term}`)")]
    NonterminatingRewrite { lead: String, term: String },
    #[error("rewriting is not confluent at `{monomial}` (degree {degree})")]
    NonConfluent { monomial: String, degree: usize },
    #[error("degree {degree} is outside the window 0..={truncation}")]
    DegreeOutOfWindow { degree: usize, truncation: usize },
    #[error("operation leaves the degree window: degree {degree} exceeds truncation {truncation}")]
    DegreeOverflow { degree: usize, truncation: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("base ring has a generator of odd degree {degree} (`{name}`)")]
    BaseNotEven { name: String, degree: usize },
    #[error("no differential assigned for generator `{0}` and its target is not forced zero")]
    UnassignedGenerator(String),
    #[error("differential does not square to zero at bidegree ({k},{l})")]
    DifferentialNotSquareZero { k: usize, l: usize },
    #[error(
        "Leibniz rule is inconsistent with the ring relations at ({k1},{l1}) x ({k2},{l2}): {detail}"
    )]
    LeibnizInconsistent {
        k1: usize,
        l1: usize,
        k2: usize,
        l2: usize,
        detail: String,
    },
    #[error("value at bidegree ({k},{l}) is not a surviving class on page {r}")]
    NotASurvivingClass { k: usize, l: usize, r: u32 },
    #[error("characteristic class must be homogeneous of degree 2, got degree {0:?}")]
    WrongDegreeAlpha(Option<usize>),
    #[error("element does not live in the expected ring")]
    ForeignElement,
    #[error("malformed presentation JSON: {0}")]
    MalformedPresentation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
