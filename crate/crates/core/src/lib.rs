//! Pareto-optimal risk sharing between one rank-dependent utility agent and
//! any number of expected-utility agents.

pub mod distortion;
pub mod economy;
pub mod envelope;
pub mod error;
pub mod numeric;
pub mod nudge;
pub mod oracle;
pub mod welfare;

pub use economy::{solve_allocation, AllocationDistribution, Economy, UtilityFunction};
pub use distortion::{Shape, ShapeReport, WeightingFunction};
pub use envelope::{build_envelope, EnvelopeResult};
pub use error::{Error, Result};
pub use numeric::level::Level;
