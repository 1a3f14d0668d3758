use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("singular Wronskian: {0}")]
    SingularWronskian(String),

    #[error("kernel negativity: {0}")]
    KernelNegativity(String),

    #[error("weight error: {0}")]
    Weight(String),

    #[error("exponent degeneracy: {0}")]
    ExponentDegeneracy(String),

    #[error("power domain error: {0}")]
    PowerDomain(String),

    #[error("degenerate integrand: {0}")]
    DegenerateIntegrand(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
