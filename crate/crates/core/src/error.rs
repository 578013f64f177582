use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the inputs was violated (bad parameter, wrong shape, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("t = {t} is outside the weight domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },

    #[error("non-finite integrand value at s = {at}")]
    NonFinite { at: f64 },

    #[error("quadrature did not reach tolerance {tol:e} within {budget} subintervals (error estimate {estimate:e})")]
    QuadratureBudget {
        tol: f64,
        budget: usize,
        estimate: f64,
    },

    #[error("ODE integration failed at s = {at}: {reason}")]
    Integration { at: f64, reason: String },

    #[error("Riccati variable blew up at s = {at} before w reached 1")]
    BlowUp { at: f64 },

    #[error("critical length undetermined beyond horizon cap {cap} (w = {w} still increasing)")]
    Undetermined { cap: f64, w: f64 },

    #[error("{name} = {value} exceeds the critical length a* = {a_star}")]
    BeyondCriticalLength {
        name: &'static str,
        value: f64,
        a_star: f64,
    },

    #[error("resolvent is singular at omega + i*{s}: the line touches the spectrum")]
    SingularResolvent { s: f64 },

    #[error("discretization needs {required} entries, above the memory budget of {budget}")]
    MemoryBudget { required: usize, budget: usize },

    #[error("denominator vanishes: {0}")]
    ZeroDenominator(String),

    #[error("admissible parameter set is empty: {0}")]
    EmptyAdmissibleSet(String),

    #[error("majorant is not admissible at t = {t}: |S(t)| = {norm} > m(t) = {bound}")]
    InadmissibleMajorant { t: f64, norm: f64, bound: f64 },

    #[error("degenerate construction: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors that stem from bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::OutsideDomain { .. }
                | Error::BeyondCriticalLength { .. }
                | Error::EmptyAdmissibleSet(_)
                | Error::InadmissibleMajorant { .. }
                | Error::MemoryBudget { .. }
        )
    }
}
