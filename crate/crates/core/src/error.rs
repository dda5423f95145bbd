use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    RankDeficient { condition: f64 },
    NotOnManifold { residual: f64 },
    SingularPivotBlock,
    NonConvergence { iterations: usize, residual: f64 },
    StepRejected { halvings: usize },
    SingularMetric,
    SingularV,
    ZeroOnContour { min_abs: f64 },
    BadOrder { from: usize, to: usize },
    OddLength(usize),
    LengthMismatch { expected: usize, found: usize },
    InvalidLevels,
    RangeEmpty,
    JTooSmall { j: u32, min: u32 },
    DegeneratePolygon,
    ZeroArea,
    EmptyMask,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::RankDeficient { condition } => {
                write!(f, "no pivot block with acceptable condition (best {condition:e})")
            }
            Error::NotOnManifold { residual } => {
                write!(f, "point is not on the manifold (residual {residual:e})")
            }
            Error::SingularPivotBlock => write!(f, "pivot block is singular"),
            Error::NonConvergence { iterations, residual } => {
                write!(f, "newton did not converge after {iterations} iterations (residual {residual:e})")
            }
            Error::StepRejected { halvings } => {
                write!(f, "step rejected after {halvings} halvings")
            }
            Error::SingularMetric => write!(f, "metric matrix is not positive definite"),
            Error::SingularV => write!(f, "eigenvector matrix is singular"),
            Error::ZeroOnContour { min_abs } => {
                write!(f, "mask vanishes on the integration contour (min |H| = {min_abs:e})")
            }
            Error::BadOrder { from, to } => write!(f, "cannot pad order {from} to order {to}"),
            Error::OddLength(n) => write!(f, "signal length {n} is not even"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::InvalidLevels => write!(f, "resolution levels must satisfy j0 <= j1 <= j2"),
            Error::RangeEmpty => write!(f, "admissible coefficient range is empty"),
            Error::JTooSmall { j, min } => write!(f, "level {j} is below the minimum level {min}"),
            Error::DegeneratePolygon => write!(f, "polygon is degenerate"),
            Error::ZeroArea => write!(f, "contour encloses zero area"),
            Error::EmptyMask => write!(f, "rasterization is empty"),
        }
    }
}

impl core::error::Error for Error {}
