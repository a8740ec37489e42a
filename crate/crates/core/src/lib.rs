//! Throughput and energy of relay-assisted uplink transmission in cellular
//! networks with Poisson-distributed interferers.
//!
//! Two independent engines evaluate the same model: [`analytic`] computes
//! decoding probabilities through Laplace functionals of the interference,
//! [`simulator`] samples deployments, fading and protocol executions.
//! Both are generic over the scalar type; the aliases below fix it to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod interference;
pub mod model;
pub mod quad;
pub mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NetworkParams = model::NetworkParams<f64>;
pub type AntennaPattern = model::AntennaPattern<f64>;
pub type UePolar = model::UePolar<f64>;
pub type LinkGeometry = model::LinkGeometry<f64>;
pub type SchemeSpec = model::SchemeSpec<f64>;
pub type ScMode = model::ScMode<f64>;
pub type Tolerance = quad::Tolerance<f64>;
pub type AnalyticOptions = analytic::AnalyticOptions<f64>;
pub type ChiExpectations = analytic::ChiExpectations<f64>;
pub type CellAverage = analytic::CellAverage<f64>;
pub type CdfCurve = analytic::CdfCurve<f64>;
pub type McEstimate = simulator::McEstimate<f64>;

/// Single-precision aliases.
pub mod single {
    pub type NetworkParams = crate::model::NetworkParams<f32>;
    pub type UePolar = crate::model::UePolar<f32>;
    pub type SchemeSpec = crate::model::SchemeSpec<f32>;
    pub type Tolerance = crate::quad::Tolerance<f32>;
}
