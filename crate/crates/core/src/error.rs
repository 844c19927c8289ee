use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh mixes element kinds ({0})")]
    MixedElements(String),
    #[error("element {0} is inverted or degenerate")]
    InvertedElement(usize),
    #[error("element {element} references vertex {vertex}, but the mesh has {count} vertices")]
    DanglingVertex {
        element: usize,
        vertex: usize,
        count: usize,
    },
    #[error("face shared by more than two elements (element {0})")]
    NonManifold(usize),
    #[error("no conductivity bound to tissue label {0}")]
    MissingLabel(i64),
    #[error("conductivity tensor for label {label} is not positive definite (eigenvalues {eigenvalues:?})")]
    NotPositiveDefinite { label: i64, eigenvalues: [f64; 3] },
    #[error("point ({:.6}, {:.6}, {:.6}) lies outside-domain", .0.x, .0.y, .0.z)]
    OutsideDomain(crate::Vec3),
    #[error("right-hand side violates the compatibility condition: sum {sum:e}, norm {norm:e}")]
    IncompatibleRhs { sum: f64, norm: f64 },
    #[error("conjugate gradients did not converge after {} iterations (residual {:e})", .0.iterations, .0.residual)]
    NotConverged(Box<crate::fem::Solution>),
    #[error("sensor {sensor}: {source}")]
    SensorRow {
        sensor: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("electrodes too far from the mesh: {0:?}")]
    ElectrodesTooFar(Vec<(usize, f64)>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("modality mismatch: transfer matrix is {found}, query is {wanted}")]
    Modality { found: String, wanted: String },
    #[error("subtraction source model requires an isotropic tensor in the dipole element {0}")]
    AnisotropicSource(usize),
    #[error("coil {0} lies inside or on the mesh")]
    CoilInside(usize),
    #[error("evaluation point coincides with the dipole position")]
    Singular,
    #[error("missing required config key `{0}`")]
    MissingKey(String),
    #[error("config key `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
    #[error("{0} not implemented, out of scope")]
    Unsupported(String),
    #[error("transfer matrix was computed for a different volume conductor (checksum mismatch)")]
    ChecksumMismatch,
    #[error("zero-norm input: {0}")]
    ZeroNorm(&'static str),
    #[error("invalid file format: {0}")]
    Format(String),
    #[error("{} item(s) failed: {}", .0.len(), format_batch(.0))]
    Batch(Vec<(usize, Error)>),
    #[error("series did not converge: last term {last:e}, partial sum {sum:e}")]
    SeriesNotConverged { last: f64, sum: f64 },
    #[error("{0}")]
    Invalid(String),
}

fn format_batch(items: &[(usize, Error)]) -> String {
    items
        .iter()
        .map(|(i, e)| format!("#{i}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical pipeline, as opposed to bad input
    /// or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotConverged(_)
            | Error::IncompatibleRhs { .. }
            | Error::SeriesNotConverged { .. }
            | Error::Singular => true,
            Error::SensorRow { source, .. } => source.is_numerical(),
            Error::Batch(items) => items.iter().all(|(_, e)| e.is_numerical()),
            _ => false,
        }
    }
}
