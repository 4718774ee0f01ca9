use thiserror::Error;

use crate::gripper::Phase;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point ({x:.3}, {y:.3}) mm lies outside the terrain footprint")]
    OutsideFootprint { x: f64, y: f64 },

    #[error("pin index (j = {j}, k = {k}) out of range")]
    PinIndex { j: usize, k: usize },

    #[error("`{op}` requires the {expected:?} phase but the gripper is in {actual:?}")]
    Phase {
        op: &'static str,
        expected: Phase,
        actual: Phase,
    },

    #[error("press too deep: pin (j = {j}, k = {k}) would retract {required_mm:.3} mm, travel is {travel_mm:.3} mm")]
    PressTooDeep {
        j: usize,
        k: usize,
        required_mm: f64,
        travel_mm: f64,
    },

    #[error("no pin touched the terrain during press {step}")]
    NoContact { step: usize },

    #[error("asperity angle {beta_deg:.6} deg is inside the self-locking band for mu = {mu}")]
    SelfLocking { beta_deg: f64, mu: f64 },

    #[error("malformed grid file: {0}")]
    Parse(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
