//! Vine-copula likelihood inference for right-censored clustered event
//! times.
//!
//! The numerical core ([`copula`], [`quadrature`], [`vine`], [`likelihood`])
//! is generic over the floating-point type; margins, estimation and
//! simulation work in `f64`. The aliases below fix the scalar for the
//! common cases.

pub mod copula;
pub mod error;
pub mod estimation;
pub mod likelihood;
pub mod margins;
pub mod optim;
pub mod quadrature;
pub mod scalar;
pub mod simulation;
pub mod vine;

pub use copula::{Conditioning, Family, PairCopula};
pub use error::{Error, Result};
pub use estimation::{FitMethod, FitOptions, FitResult};
pub use likelihood::{ObservedCluster, PseudoCluster};
pub use margins::{KaplanMeierCurve, MarginMethod, WeibullMargin};
pub use quadrature::GaussLegendre;
pub use scalar::Scalar;
pub use vine::{CensoringPattern, DVineModel};

pub type PairCopulaF64 = PairCopula<f64>;
pub type DVineModelF64 = DVineModel<f64>;
pub type PseudoClusterF64 = PseudoCluster<f64>;
pub type GaussLegendreF64 = GaussLegendre<f64>;

pub type PairCopulaF32 = PairCopula<f32>;
pub type DVineModelF32 = DVineModel<f32>;
pub type PseudoClusterF32 = PseudoCluster<f32>;
pub type GaussLegendreF32 = GaussLegendre<f32>;
