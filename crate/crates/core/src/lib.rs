//! Dynamics of freely expanding Bose-Einstein condensates under a
//! logarithmic Gross-Pitaevskii equation.
//!
//! The [`variational`] module integrates the Gaussian-ansatz width
//! equations, [`dkc`] applies delta-kick collimation pulses, [`pde`] evolves
//! the full radial field as an independent check and [`analysis`] holds the
//! far-field rate, error budget and difference-map tools.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dkc;
pub mod error;
pub mod experiment;
pub mod model;
pub mod pde;
pub mod units;
pub mod variational;

pub use error::{Axis, Error, Result};
pub use experiment::{Experiment, ExperimentRun};
pub use model::{BECParams, GaussianState, Species, TrapSchedule, TrapSegment, WidthTrajectory};
pub use units::{Dimension, UnitSystem};
pub use variational::IntegratorSettings;
