//! Single-exciton transport on small molecular networks: open-system
//! dynamics under a non-secular Bloch-Redfield master equation, transport
//! figures of merit, and Fisher-information parameter sensitivity.

pub mod dynamics;
pub mod ensemble;
pub mod environment;
pub mod error;
pub mod infogeom;
pub mod linalg;
pub mod model;
pub mod units;

pub use dynamics::{
    arrival_moments, arrival_time_distribution, evolve, loss_time_distribution, steady_state,
    ArrivalDistribution, DistributionKind, EvolveOptions, SteadyState, Trajectory,
};
pub use environment::{build_generator, build_generator_with, Channels, Generator, Mode, SpectralDensity};
pub use error::{Error, Result};
pub use infogeom::{
    fim, importance_by_group, scalar_sensitivity, sloppiness_metrics, FimOptions, FimResult, FomKind,
    Group, ParameterVector,
};
pub use model::{NetworkConfig, SiteSpec, SpectralKind, Spherical};
pub use units::UnitSystem;
