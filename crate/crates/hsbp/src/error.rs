use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every variant names the module it originates from in its message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sbp1d: unsupported half-order p={0} (expected 1, 2 or 3)")]
    UnsupportedOrder(usize),
    #[error("sbp1d: N={n} too small for the 2p={order} closure (need N >= {min})")]
    TooFewIntervals { order: usize, n: usize, min: usize },
    #[error("sbp1d: coefficient entry {index} is not strictly positive ({value})")]
    NonPositiveCoefficient { index: usize, value: f64 },
    #[error("{module}: length mismatch, expected {expected}, got {got}")]
    LengthMismatch {
        module: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("sbp1d: invariant violated: {0}")]
    Invariant(String),
    #[error("sbp2d: invalid face index {0} (expected 1..=4)")]
    InvalidFace(usize),
    #[error("sbp2d: grid index ({i}, {j}) outside 0..={n}")]
    GridIndex { i: usize, j: usize, n: usize },
    #[error("{module}: coefficient matrix not SPD at node {node}: crr={crr}, css={css}, crs={crs}")]
    CoefficientNotSpd {
        module: &'static str,
        node: usize,
        crr: f64,
        css: f64,
        crs: f64,
    },
    #[error("geometry: degenerate mapping, J={jac} at (r, s)=({r}, {s})")]
    DegenerateMapping { r: f64, s: f64, jac: f64 },
    #[error("geometry: physical tensor b not SPD at ({x}, {y})")]
    TensorNotSpd { x: f64, y: f64 },
    #[error("geometry: zero-length tangent on face {face}")]
    DegenerateEdge { face: usize },
    #[error("geometry: edge curves do not meet at corner {corner} (gap {gap:e})")]
    CornerMismatch { corner: usize, gap: f64 },
    #[error("mesh: line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("mesh: io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("local_problem: {0}")]
    Local(String),
    #[error("global_assembly: {0}")]
    Global(String),
    #[error("solve: factorization failed{}: {msg}", block.map(|b| format!(" in block {b}")).unwrap_or_default())]
    Factorization { block: Option<usize>, msg: String },
    #[error("solve: {0}")]
    Solve(String),
    #[error("verify: {0}")]
    Verify(String),
}
