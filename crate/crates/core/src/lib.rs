//! Extreme eigenvalues of products of complex Ginibre matrices: scaling constants, limit
//! laws, rates, tail bounds, reproducible samplers and empirical distances.

pub mod edgeworth;
pub mod empirics;
pub mod error;
pub mod ginibre_oracle;
pub mod grid;
pub mod limits;
pub mod rates;
pub mod sampler;
pub mod scalar;
pub mod scaling;
pub(crate) mod serde_ext;
pub mod specfun;
pub mod tailbounds;

pub use empirics::{DistanceReport, Ecdf};
pub use error::{Error, Result};
pub use grid::GridPolicy;
pub use limits::LimitLaw;
pub use rates::RateReport;
pub use sampler::{SampleBatch, SeedSpec};
pub use scalar::Real;
pub use scaling::{Ensemble, RegimeDecl};

/// Scaling constants in double precision.
pub type ScalingConstants = scaling::ScalingConstants<f64>;
/// Scaling constants in single precision.
pub type ScalingConstantsF32 = scaling::ScalingConstants<f32>;
