use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("matrix has {found} entries, expected {rows}x{cols}")]
    EntryCount {
        rows: usize,
        cols: usize,
        found: usize,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("rank deficient: |R[{column},{column}]| = {diag:e} below threshold {threshold:e}")]
    RankDeficient {
        column: usize,
        diag: f64,
        threshold: f64,
    },

    #[error("rank collapse: sigma_r = {sigma_r:e}, sigma_1 = {sigma_1:e}")]
    RankCollapse { sigma_r: f64, sigma_1: f64 },

    #[error("degenerate spectrum: sigma_2r = {upper:e}, sigma_2r+1 = {lower:e}")]
    DegenerateSpectrum { upper: f64, lower: f64 },

    #[error("tangent vectors live on different base points")]
    BaseMismatch,

    #[error("point is not on the manifold: {0}")]
    NotOnManifold(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures that come from the numerics rather than from bad
    /// input. Non-finite entries count: mid-run they mean the iteration diverged.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankCollapse { .. }
                | Error::DegenerateSpectrum { .. }
                | Error::RankDeficient { .. }
                | Error::NonFinite { .. }
        )
    }
}

pub(crate) fn check_shape(
    op: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op,
            expected,
            found,
        })
    }
}
