use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("fields live on incompatible grids")]
    GridMismatch,

    #[error("invalid group element: {0}")]
    InvalidGroupElement(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    /// Modulation extraction failed; the field has most likely left the soliton tube.
    #[error("modulation extraction did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The time stepper produced a non-finite or exploding field.
    #[error("solution diverged after t = {last_valid_t}")]
    Diverged { last_valid_t: f64 },

    #[error("operator {0} acts on real fields only")]
    RealOperatorComplexInput(&'static str),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    ConfigParse(String),
}
