//! Deterministic velocity-grid solver for the spatially homogeneous
//! Boltzmann–Fermi–Dirac equation with cutoff hard-potential kernels, plus
//! numerical checks of its conservation, entropy, moment and envelope
//! properties.

pub mod config;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod exec;
pub mod grid;
pub mod integrator;
pub mod kernel;
pub mod operator;
pub mod snapshot;
mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Exec;
pub use grid::{DistributionField, Vec3, VelocityGrid};
pub use kernel::{AngularLaw, CollisionKernel, SphereQuadrature};
pub use operator::{CollisionOperator, CollisionRates, Production};
