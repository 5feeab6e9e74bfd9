pub mod elliptic;
pub mod config;
pub mod error;
pub mod fixpoint;
pub mod gas;
pub mod geometry;
pub mod grid;
pub mod norms;
pub mod pipeline;
pub mod polar;
pub mod scalar;
pub mod sparse;
pub mod spline;
pub mod stability;
pub mod survey;

pub use error::{Error, Result, WindowSide};
pub use scalar::Scalar;

pub type GasModel = gas::GasModel<f64>;
pub type VelocityState = gas::VelocityState<f64>;
pub type UpstreamSpec = polar::UpstreamSpec<f64>;
pub type BackgroundSolution = polar::BackgroundSolution<f64>;
pub type PolarDiagnostics = polar::PolarDiagnostics<f64>;
pub type StabilityCertificate = stability::StabilityCertificate<f64>;
