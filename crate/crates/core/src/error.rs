use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} violates bound: {bound}")]
    Domain {
        name: &'static str,
        value: f64,
        bound: String,
    },

    #[error("correlation matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("column {column} is constant; correlation undefined")]
    ConstantColumn { column: usize },

    #[error("fixed-point iteration did not converge after {iterations} steps (last residual {residual:.3e}) at z = {z_re}+{z_im}i")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        z_re: f64,
        z_im: f64,
    },

    #[error("solution left the lower half-plane: Im x = {im_x:.3e} at z = {z_re}+{z_im}i")]
    WrongBranch { im_x: f64, z_re: f64, z_im: f64 },

    #[error("symbol vanishes on the quadrature grid (|f1| = {modulus:.3e} at theta = {theta})")]
    SingularSymbol { modulus: f64, theta: f64 },

    #[error("pole in c(x, rho): denominator {denominator:.3e}")]
    Pole { denominator: f64 },

    #[error("degenerate subordination value x = {re}+{im}i")]
    Degenerate { re: f64, im: f64 },

    #[error("solver failed at energy {energy}: {source}")]
    AtEnergy {
        energy: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("negative density {density:.3e} at energy {energy}")]
    NegativeDensity { energy: f64, density: f64 },

    #[error("density curve is not normalized: total mass {mass}")]
    NotNormalized { mass: f64 },

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, bound: impl Into<String>) -> Error {
    Error::Domain {
        name,
        value,
        bound: bound.into(),
    }
}
