use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain(&'static str),
    /// Two objects that must agree in size do not.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// The least-squares system has more unknowns than equations.
    OverParameterized { unknowns: usize, equations: usize },
    /// The combinatorial search would exceed its budget.
    BudgetExceeded { combinations: u128, limit: u128 },
    /// An eigensolver or factorization failed, or an iterate became non-finite.
    NumericalFailure(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch for {what}: expected {expected}, found {found}"),
            Error::OverParameterized { unknowns, equations } => write!(
                f,
                "over-parameterized system: {unknowns} unknowns for {equations} equations"
            ),
            Error::BudgetExceeded { combinations, limit } => write!(
                f,
                "search budget exceeded: {combinations} combinations (limit {limit})"
            ),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
