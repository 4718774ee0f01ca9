//! Simulator for a pin-array terrain gripper.
//!
//! The gripper is a 3 x 7 array of split pins that passively conform to a
//! terrain when pressed, then lock by sliding one holder sideways so the
//! elastic pin tips hook their spines into the terrain. Each pin carries a
//! pressure sensor whose reading gives the pin height, which turns the same
//! hardware into a tactile heightfield scanner.
//!
//! Modules follow the experiment pipeline:
//!
//! - [`terrain`]: heightfields, emulated test terrains and the asperity model.
//! - [`gripper`]: geometry, pin state and the approach/adapt/lock phases.
//! - [`mechanics`]: spine pushing force, local friction, holding force and the
//!   Monte Carlo pull test.
//! - [`sensing`]: per-pin sensor calibration, forward/inverse resistance model
//!   and shape recognition.
//! - [`mapping`]: translate-press-read scanning, point clouds and column
//!   averaging against ground truth.
//! - [`config`]: flat key-value configuration file.
//!
//! Units: lengths in mm, forces in N, angles in degrees. The beam constants
//! (E in Pa, I in m^4, lever length in m) stay in SI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod gripper;
pub mod mapping;
pub mod mechanics;
pub mod rng;
pub mod sensing;
pub mod terrain;

pub use config::SimConfig;
pub use error::{Result, SimError};
