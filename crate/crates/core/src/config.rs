//! Flat key-value configuration file (TOML syntax, no tables).
//!
//! Lengths are in mm, forces in N and angles in degrees, except the beam
//! constants of the elastic tip, which stay in SI (Pa, m^4, m). Every key is
//! optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gripper::{GripperConfig, PressPolicy};
use crate::mapping::{GridSpec, ScanPlan, TruthReference};
use crate::mechanics::{BaselineConfig, PullTestOptions, ReleaseModel};
use crate::sensing::SensorModel;
use crate::terrain::AsperityModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    #[serde(flatten)]
    pub gripper: GripperConfig,
    #[serde(flatten)]
    pub asperity: AsperityModel,
    #[serde(flatten)]
    pub sensor: SensorModel,

    pub pull_phis_deg: Vec<f64>,
    pub pull_trials: usize,
    pub terrain_weight_n: f64,
    pub placement_jitter_mm: f64,
    pub terrain_resolution_mm: f64,
    pub pull_press_fraction: f64,
    pub release_model: ReleaseModel,
    pub baseline_fingers: usize,
    pub baseline_radius_mm: f64,
    pub baseline_preload_mm: f64,

    pub recognition_presses: usize,
    pub recognition_press_fraction: f64,

    pub scan_start_x_mm: f64,
    pub scan_dx_mm: f64,
    pub scan_steps: usize,
    pub scan_press_fraction: f64,
    pub grid_dx_mm: f64,
    pub grid_dy_mm: f64,
    pub truth_reference: TruthReference,
    pub include_clamped: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let pull = PullTestOptions::default();
        let baseline = BaselineConfig::default();
        let plan = ScanPlan::default();
        let grid = GridSpec::default();
        SimConfig {
            gripper: GripperConfig::default(),
            asperity: AsperityModel::default(),
            sensor: SensorModel::default(),
            pull_phis_deg: vec![-90.0, -60.0, -30.0, 0.0, 30.0, 60.0, 90.0],
            pull_trials: 10,
            terrain_weight_n: pull.terrain_weight_n,
            placement_jitter_mm: pull.placement_jitter_mm,
            terrain_resolution_mm: pull.resolution_mm,
            pull_press_fraction: pull.press.in_range_fraction,
            release_model: pull.release,
            baseline_fingers: baseline.fingers,
            baseline_radius_mm: baseline.radius_mm,
            baseline_preload_mm: baseline.preload_mm,
            recognition_presses: 10,
            recognition_press_fraction: PressPolicy::default().in_range_fraction,
            scan_start_x_mm: plan.start_x_mm,
            scan_dx_mm: plan.dx_mm,
            scan_steps: plan.steps,
            scan_press_fraction: plan.press.in_range_fraction,
            grid_dx_mm: grid.dx_mm,
            grid_dy_mm: grid.dy_mm,
            truth_reference: grid.truth,
            include_clamped: true,
        }
    }
}

fn fraction(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(SimError::param(name, format!("must lie in (0, 1], got {v}")))
    }
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| SimError::Config(e.to_string()))?;
        let known = toml::Table::try_from(SimConfig::default()).map_err(|e| SimError::Config(e.to_string()))?;
        let mut unknown: Vec<&str> = table
            .keys()
            .filter(|k| !known.contains_key(*k))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            unknown.sort_unstable();
            return Err(SimError::Config(format!("unknown key(s): {}", unknown.join(", "))));
        }
        if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(SimError::Config(format!("`{k}`: nested tables are not allowed")));
        }
        let cfg: SimConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        let body = toml::to_string(self).expect("config serializes");
        format!(
            "# pinarray simulator configuration\n\
             # lengths mm, forces N, angles deg; elastic_modulus_pa in Pa,\n\
             # second_moment_m4 in m^4, spine_lever_m in m\n{body}"
        )
    }

    /// The default configuration as a config file.
    pub fn default_toml() -> String {
        SimConfig::default().to_toml()
    }

    pub fn validate(&self) -> Result<()> {
        self.gripper.validate()?;
        self.asperity.validate()?;
        self.sensor.validate()?;
        if self.pull_phis_deg.iter().any(|p| !(-90.0..=90.0).contains(p)) {
            return Err(SimError::param("pull_phis_deg", "angles must lie in [-90, 90]"));
        }
        if self.pull_trials == 0 {
            return Err(SimError::param("pull_trials", "must be >= 1"));
        }
        if !(self.terrain_weight_n >= 0.0) {
            return Err(SimError::param("terrain_weight_n", "must be >= 0"));
        }
        if !(self.placement_jitter_mm >= 0.0) {
            return Err(SimError::param("placement_jitter_mm", "must be >= 0"));
        }
        if !(self.terrain_resolution_mm > 0.0) {
            return Err(SimError::param("terrain_resolution_mm", "must be > 0"));
        }
        fraction("pull_press_fraction", self.pull_press_fraction)?;
        fraction("recognition_press_fraction", self.recognition_press_fraction)?;
        fraction("scan_press_fraction", self.scan_press_fraction)?;
        if self.recognition_presses == 0 {
            return Err(SimError::param("recognition_presses", "must be >= 1"));
        }
        if !(self.grid_dx_mm > 0.0 && self.grid_dy_mm > 0.0) {
            return Err(SimError::param("grid_dx_mm", "column sizes must be > 0"));
        }
        self.scan_plan().validate()
    }

    pub fn pull_options(&self) -> PullTestOptions {
        PullTestOptions {
            terrain_weight_n: self.terrain_weight_n,
            placement_jitter_mm: self.placement_jitter_mm,
            resolution_mm: self.terrain_resolution_mm,
            press: PressPolicy {
                in_range_fraction: self.pull_press_fraction,
                min_z_mm: None,
            },
            release: self.release_model,
        }
    }

    pub fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            fingers: self.baseline_fingers,
            radius_mm: self.baseline_radius_mm,
            preload_mm: self.baseline_preload_mm,
        }
    }

    pub fn recognition_press(&self) -> PressPolicy {
        PressPolicy {
            in_range_fraction: self.recognition_press_fraction,
            min_z_mm: None,
        }
    }

    pub fn scan_plan(&self) -> ScanPlan {
        ScanPlan {
            start_x_mm: self.scan_start_x_mm,
            dx_mm: self.scan_dx_mm,
            steps: self.scan_steps,
            press: PressPolicy {
                in_range_fraction: self.scan_press_fraction,
                min_z_mm: None,
            },
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            dx_mm: self.grid_dx_mm,
            dy_mm: self.grid_dy_mm,
            origin: [0.0, 0.0],
            truth: self.truth_reference,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let text = SimConfig::default_toml();
        assert_eq!(SimConfig::parse(&text).unwrap(), SimConfig::default());
        assert!(text.contains("x_pitch_mm = 14.0"));
        assert!(text.contains("y_pitch_mm = 17.4"));
        assert!(text.contains("release_model = \"progressive\""));
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = SimConfig::parse("mu = 0.4\nscan_steps = 5\nx_pitch_mm = 15\n").unwrap();
        assert_eq!(cfg.asperity.mu, 0.4);
        assert_eq!(cfg.scan_steps, 5);
        assert_eq!(cfg.gripper.x_pitch_mm, 15.0);
        assert_eq!(cfg.gripper.y_pitch_mm, 17.4);
        assert_eq!(SimConfig::parse("").unwrap(), SimConfig::default());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(SimConfig::parse("x_pich_mm = 14"), Err(SimError::Config(_))));
        assert!(matches!(SimConfig::parse("mu = "), Err(SimError::Config(_))));
        assert!(matches!(SimConfig::parse("mu = \"high\""), Err(SimError::Config(_))));
        assert!(SimConfig::parse("pull_trials = 0").is_err());
        assert!(SimConfig::parse("x_pitch_mm = -1").is_err());
        assert!(SimConfig::parse("pull_phis_deg = [120]").is_err());
        assert!(SimConfig::parse("release_model = \"sticky\"").is_err());
    }
}
