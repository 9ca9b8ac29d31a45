//! Symbolic and numerical workbench for the second Painleve hierarchy.
//!
//! The crate builds every member of the hierarchy from the Lenard recursion
//! ([`hierarchy`]), computes its divergent power-series solutions near
//! infinity ([`asymptotics`]), rewrites it in Boutroux variables and
//! evaluates the exponential rates that separate neighbouring solutions
//! ([`frames`], [`variational`]), and integrates it along paths in the
//! complex plane with pole detection ([`integrator`]).

pub mod asymptotics;
pub mod cli;
pub mod diffpoly;
pub mod error;
pub mod frames;
pub mod hierarchy;
pub mod integrator;
pub mod ring;
pub mod variational;

pub use diffpoly::{JetPolynomial, Monomial, MultiIndexNorm};
pub use error::{Error, Result};
pub use hierarchy::HierarchyEquation;

/// Version string embedded in every emitted artifact.
pub const ARTIFACT_VERSION: &str = concat!("p2-hierarchy ", env!("CARGO_PKG_VERSION"));

/// Which formal solution family near infinity is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Algebraic growth `V ~ A x^{1/(2n)}`.
    Infty,
    /// Decay `V ~ -alpha/x`.
    Zero,
}

impl std::str::FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "infty" | "inf" | "infinity" => Ok(Kind::Infty),
            "zero" | "0" => Ok(Kind::Zero),
            other => Err(Error::Validation(format!("unknown kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Infty => "infty",
            Kind::Zero => "zero",
        })
    }
}
