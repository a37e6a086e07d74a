//! Numerical toolkit for the symmetric restricted three-body problem on the
//! unit sphere: Hamiltonian and Hill regions in the rotating stereographic
//! chart, contact-type certification around each primary, Moser
//! regularization of collisions, the neck at the first Lagrange point and
//! trajectory integration.

pub mod charts;
pub mod config;
pub mod consts;
pub mod contact;
pub mod dynamics;
pub mod error;
pub mod figures;
pub mod golden;
pub mod hamiltonian;
pub mod hill;
pub mod neck;
pub mod numdiff;
pub mod output;
pub mod regularization;
pub mod report;
pub mod runner;

pub use charts::{FlipState, PlanarPhaseState, PolarPosition, SphereCotangentState};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use hamiltonian::{EnergySpec, HamiltonianTerms, Primary};
