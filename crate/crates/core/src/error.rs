use std::fmt;

/// Errors produced by the test pipeline, the harness and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid bandwidth {h}: {reason}")]
    InvalidBandwidth { h: f64, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{n} observations are fewer than the {needed} required")]
    TooFewObservations { n: usize, needed: usize },

    #[error("rank-deficient design: effective rank {rank} of {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("degenerate bandwidth {h}: density estimate vanishes at points {}", PointList(.points))]
    DegenerateBandwidth { h: f64, points: Vec<usize> },

    #[error("model evaluation is not finite at theta = {theta:?}")]
    NonFiniteModel { theta: Vec<f64> },

    #[error("least-squares solution {theta:?} leaves the parameter box")]
    OutsideParameterBox { theta: Vec<f64> },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("data error at row {row}, column {column}: {reason}")]
    DataCell {
        row: usize,
        column: usize,
        reason: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("bootstrap replicate {replicate} failed: {source}")]
    Bootstrap {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures caused by the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RankDeficient { .. }
            | Error::DegenerateBandwidth { .. }
            | Error::NonFiniteModel { .. }
            | Error::Degenerate(_) => true,
            Error::Bootstrap { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

struct PointList<'a>(&'a [usize]);

impl fmt::Display for PointList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 10;
        for (k, p) in self.0.iter().take(SHOWN).enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        if self.0.len() > SHOWN {
            write!(f, " and {} more", self.0.len() - SHOWN)?;
        }
        Ok(())
    }
}
