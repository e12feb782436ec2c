use thiserror::Error;

#[derive(Debug, Error)]
pub enum GwError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("Coulomb matrix is not positive definite: eigenvalue {value:e} at index {index}")]
    NonSpdCoulomb { index: usize, value: f64 },
    #[error("degenerate Fermi level: gap {gap:e} <= {tol:e}")]
    DegenerateFermiLevel { gap: f64, tol: f64 },
    #[error("hartree iteration did not converge after {iterations} steps (change {change:e})")]
    HartreeNotConverged { iterations: usize, change: f64 },
    #[error("sector dimension {dim} exceeds basis cap {cap}")]
    SectorTooLarge { dim: usize, cap: usize },
    #[error("degenerate ground state: gap {gap:e} <= {tol:e}")]
    DegenerateGroundState { gap: f64, tol: f64 },
    #[error("excitation window violated: e_minus={e_minus:e}, e_plus={e_plus:e}")]
    Window { e_minus: f64, e_plus: f64 },
    #[error("evaluation point {z} is within {dist:e} of a pole")]
    PoleProximity { z: String, dist: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("polarizability has positive eigenvalue {0:e}")]
    PositiveP0(f64),
    #[error("near-singular resolvent at omega={omega:e}, lambda={lambda}: condition {cond:e}")]
    Singular { omega: f64, lambda: f64, cond: f64 },
    #[error("picard iteration diverged at lambda={lambda}, mixing={mixing}")]
    Divergence { lambda: f64, mixing: f64 },
    #[error("iterative solver failed: {0}")]
    Solver(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },
    #[error("config field '{field}': {msg}")]
    ConfigField { field: String, msg: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<GwError>,
    },
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed track file: {0}")]
    Track(String),
}

pub type Result<T> = std::result::Result<T, GwError>;

impl GwError {
    pub fn at(self, stage: &'static str) -> GwError {
        GwError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
