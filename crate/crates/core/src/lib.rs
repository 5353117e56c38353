//! Total variation flow on finite metric measure spaces.
//!
//! Solutions are obtained by minimizing exponentially weighted space-time
//! functionals and letting the weight parameter go to zero; the crate also
//! checks the quantitative estimates such solutions must satisfy.

pub mod bv;
mod chain;
pub mod error;
pub mod io;
pub mod mms;
pub mod oracle;
pub mod relax;
pub mod timefn;
pub mod varsol;

pub use bv::{Derivation, TVValue, VertexFunction};
pub use error::{Error, Result};
pub use mms::{Ball, Domain, EdgeSpec, MetricMeasureSpace};
pub use relax::{RelaxConfig, SolverOptions, SolverReport};
pub use timefn::{MollifiedFunction, SpaceTimeFunction, TimeGrid};
pub use varsol::{CandidateSolution, Check, VerificationReport};
