use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the projection reach of boundary component {component} (distance {distance}, reach {reach})")]
    OutsideReach {
        x: f64,
        y: f64,
        component: usize,
        distance: f64,
        reach: f64,
    },
    #[error("point ({x}, {y}) is not on boundary component {component} (offset {offset:e})")]
    NotOnCurve {
        x: f64,
        y: f64,
        component: usize,
        offset: f64,
    },
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("degenerate triangle {0} (det J = {1:e})")]
    DegenerateTriangle(usize, f64),
    #[error("singular BDM degrees-of-freedom matrix for k = {0}")]
    SingularDofMatrix(usize),
    #[error("derivative order {requested} exceeds available order {available}")]
    DerivativeOrder { requested: usize, available: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("uncorrected strong imposition requires homogeneous Neumann data (max |g_N| = {0:e})")]
    NonhomogeneousStrongBoundary(f64),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("invalid input for order computation: {0}")]
    Eoc(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
