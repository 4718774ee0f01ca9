//! Per-pin pressure sensors and tactile shape recognition.
//!
//! Inside the sensing window a pin's resistance is linear in its retraction
//! `h`. The window starts at `h_offset` (resistance `R_max`) and ends
//! `stroke` further in (resistance `R_min`), so pushing a pin in lowers its
//! resistance. The inverse used for readout is
//! `h = L (r - R_max) / (R_min - R_max) + h_offset`.
//!
//! A pin retracted less than `h_offset` has not reached the sensor yet and
//! reads like one at the window start. Noise is added in the height domain.
//! The sensor stays linear for `readout_margin` beyond each end of the
//! window and saturates after that, so noisy readings near the window edges
//! are still converted, but flagged as out of range.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gripper::{self, GripperConfig, GripperState, PinIndex, Pose, PressPolicy};
use crate::rng::{derive_rng, stream};
use crate::terrain::{Heightfield, ShapeKind};

/// Nominal resistances and spread used when drawing a sensor bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub r_max_ohm: f64,
    pub r_min_ohm: f64,
    /// Relative standard deviation of each pin's R_max and R_min.
    pub r_spread: f64,
    pub sigma_min_mm: f64,
    pub sigma_max_mm: f64,
    /// Shape parameters of the Beta law placing sigma in its range.
    pub sigma_beta_a: f64,
    pub sigma_beta_b: f64,
    pub readout_margin_mm: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            r_max_ohm: 10_000.0,
            r_min_ohm: 3_000.0,
            r_spread: 0.05,
            sigma_min_mm: 0.16,
            sigma_max_mm: 6.69,
            sigma_beta_a: 2.0,
            sigma_beta_b: 3.83,
            readout_margin_mm: 5.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max_ohm > self.r_min_ohm && self.r_min_ohm > 0.0) {
            return Err(SimError::param("r_min_ohm", "need r_max_ohm > r_min_ohm > 0"));
        }
        if !(0.0..0.2).contains(&self.r_spread) {
            return Err(SimError::param("r_spread", "must lie in [0, 0.2)"));
        }
        if !(self.sigma_min_mm >= 0.0 && self.sigma_max_mm >= self.sigma_min_mm) {
            return Err(SimError::param(
                "sigma_max_mm",
                "need 0 <= sigma_min_mm <= sigma_max_mm",
            ));
        }
        if !(self.sigma_beta_a > 0.0 && self.sigma_beta_b > 0.0) {
            return Err(SimError::param("sigma_beta_a", "Beta shape parameters must be > 0"));
        }
        if !(self.readout_margin_mm >= 0.0) {
            return Err(SimError::param("readout_margin_mm", "must be >= 0"));
        }
        Ok(())
    }

    /// Mean noise level of banks drawn from this model.
    pub fn mean_sigma_mm(&self) -> f64 {
        let frac = self.sigma_beta_a / (self.sigma_beta_a + self.sigma_beta_b);
        self.sigma_min_mm + (self.sigma_max_mm - self.sigma_min_mm) * frac
    }
}

/// Calibration of one pin's sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinSensor {
    pub index: PinIndex,
    pub r_max_ohm: f64,
    pub r_min_ohm: f64,
    pub sigma_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorCalibration {
    pub pins: Vec<PinSensor>,
    pub stroke_mm: f64,
    pub h_offset_mm: f64,
    pub readout_margin_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinReading {
    pub index: PinIndex,
    pub resistance_ohm: f64,
    pub height_mm: f64,
    pub in_range: bool,
}

impl SensorCalibration {
    /// Every pin at the nominal resistances with the same noise level.
    pub fn uniform(config: &GripperConfig, model: &SensorModel, sigma_mm: f64) -> Self {
        SensorCalibration {
            pins: config
                .pin_indices()
                .map(|index| PinSensor {
                    index,
                    r_max_ohm: model.r_max_ohm,
                    r_min_ohm: model.r_min_ohm,
                    sigma_mm,
                })
                .collect(),
            stroke_mm: config.stroke_l_mm,
            h_offset_mm: config.h_offset_mm,
            readout_margin_mm: model.readout_margin_mm,
        }
    }

    /// Same calibration with every noise level set to zero.
    pub fn noiseless(&self) -> Self {
        let mut out = self.clone();
        for p in &mut out.pins {
            p.sigma_mm = 0.0;
        }
        out
    }

    pub fn pin(&self, index: PinIndex) -> Result<&PinSensor> {
        self.pins
            .iter()
            .find(|p| p.index == index)
            .ok_or(SimError::PinIndex { j: index.j, k: index.k })
    }

    fn slope(&self, s: &PinSensor) -> f64 {
        (s.r_min_ohm - s.r_max_ohm) / self.stroke_mm
    }

    /// Resistance range the sensor can physically produce.
    pub fn physical_range(&self, s: &PinSensor) -> (f64, f64) {
        let pad = -self.slope(s) * self.readout_margin_mm;
        (s.r_min_ohm - pad, s.r_max_ohm + pad)
    }

    /// Resistance for a pin retracted by `height_mm`, with the pin's noise
    /// applied in the height domain. Always consumes one normal draw.
    pub fn forward_resistance<R: Rng + ?Sized>(&self, index: PinIndex, height_mm: f64, rng: &mut R) -> Result<f64> {
        let s = self.pin(index)?;
        let z: f64 = rng.sample(StandardNormal);
        // the spring only reaches the sensor after h_offset of travel
        let h = height_mm.max(self.h_offset_mm) + s.sigma_mm * z;
        let r = s.r_max_ohm + (h - self.h_offset_mm) * self.slope(s);
        let (lo, hi) = self.physical_range(s);
        Ok(r.clamp(lo, hi))
    }

    /// Height reading for a resistance. Values beyond the physical range are
    /// treated as saturated.
    pub fn invert_height(&self, index: PinIndex, resistance_ohm: f64) -> Result<PinReading> {
        let s = self.pin(index)?;
        let (lo, hi) = self.physical_range(s);
        let r = resistance_ohm.clamp(lo, hi);
        let height_mm = self.stroke_mm * (r - s.r_max_ohm) / (s.r_min_ohm - s.r_max_ohm) + self.h_offset_mm;
        Ok(PinReading {
            index,
            resistance_ohm,
            height_mm,
            in_range: resistance_ohm >= s.r_min_ohm && resistance_ohm <= s.r_max_ohm,
        })
    }

    /// Reads every pin of an adapted gripper, in pin order.
    pub fn read_all<R: Rng + ?Sized>(&self, state: &GripperState, rng: &mut R) -> Result<Vec<PinReading>> {
        state
            .pins
            .iter()
            .map(|p| {
                let r = self.forward_resistance(p.index, p.retraction_mm, rng)?;
                self.invert_height(p.index, r)
            })
            .collect()
    }

    /// Calibration table: `pin_j,pin_k,R_max_ohm,R_min_ohm,sigma_mm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "pin_j,pin_k,R_max_ohm,R_min_ohm,sigma_mm")?;
        for p in &self.pins {
            writeln!(
                out,
                "{},{},{:.3},{:.3},{:.6}",
                p.index.j, p.index.k, p.r_max_ohm, p.r_min_ohm, p.sigma_mm
            )?;
        }
        Ok(())
    }
}

/// Draws a sensor bank: per-pin resistances scattered around the nominal
/// values and per-pin noise levels from a scaled Beta law.
pub fn calibrate_bank(config: &GripperConfig, model: &SensorModel, seed: u64) -> Result<SensorCalibration> {
    config.validate()?;
    model.validate()?;
    let beta = Beta::new(model.sigma_beta_a, model.sigma_beta_b)
        .map_err(|e| SimError::param("sigma_beta_a", e.to_string()))?;
    let mut rng = derive_rng(seed, stream::CALIBRATION, 0);
    let pins = config
        .pin_indices()
        .map(|index| {
            let zmax: f64 = rng.sample(StandardNormal);
            let zmin: f64 = rng.sample(StandardNormal);
            let r_max_ohm = model.r_max_ohm * (1.0 + model.r_spread * zmax.clamp(-3.0, 3.0));
            let r_min_ohm = model.r_min_ohm * (1.0 + model.r_spread * zmin.clamp(-3.0, 3.0));
            let sigma_mm = model.sigma_min_mm + (model.sigma_max_mm - model.sigma_min_mm) * beta.sample(&mut rng);
            PinSensor {
                index,
                r_max_ohm,
                r_min_ohm,
                sigma_mm,
            }
        })
        .collect::<Vec<_>>();
    // spread < 0.2 keeps the 3-sigma clamps well apart for any sane nominal pair
    if let Some(p) = pins.iter().find(|p| !(p.r_max_ohm > p.r_min_ohm && p.r_min_ohm > 0.0)) {
        return Err(SimError::param(
            "r_spread",
            format!("pin ({}, {}) drew R_max <= R_min", p.index.j, p.index.k),
        ));
    }
    Ok(SensorCalibration {
        pins,
        stroke_mm: config.stroke_l_mm,
        h_offset_mm: config.h_offset_mm,
        readout_margin_mm: model.readout_margin_mm,
    })
}

/// Per-pin statistics of the heights read over repeated presses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinProfile {
    pub index: PinIndex,
    pub mean_h_mm: f64,
    pub std_h_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recognition {
    pub presses: usize,
    pub pins: Vec<PinProfile>,
    /// Mean reading of the central columns minus that of the outer ones.
    pub center_minus_edge_mm: f64,
    pub shape: ShapeKind,
}

impl Recognition {
    /// Mean over pins of the per-pin standard deviation.
    pub fn mean_std_mm(&self) -> f64 {
        self.pins.iter().map(|p| p.std_h_mm).sum::<f64>() / self.pins.len() as f64
    }

    /// Recognition table: `pin_j,pin_k,mean_h_mm,std_h_mm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "pin_j,pin_k,mean_h_mm,std_h_mm")?;
        for p in &self.pins {
            writeln!(out, "{},{},{:.6},{:.6}", p.index.j, p.index.k, p.mean_h_mm, p.std_h_mm)?;
        }
        Ok(())
    }
}

impl fmt::Display for Recognition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (center - edge = {:.3} mm over {} presses)",
            self.shape, self.center_minus_edge_mm, self.presses
        )
    }
}

/// Presses the gripper `presses` times at `x_g` and summarises each pin's
/// readings. Press `i` draws its noise from the generator derived from
/// `(seed, i)`.
pub fn recognize_shape(
    config: &GripperConfig,
    calib: &SensorCalibration,
    terrain: &Heightfield,
    x_g: f64,
    press: &PressPolicy,
    presses: usize,
    seed: u64,
) -> Result<Recognition> {
    if presses == 0 {
        return Err(SimError::param("presses", "must be >= 1"));
    }
    let z_g = gripper::press_height(config, terrain, x_g, press)?;
    let state = GripperState::new(config, Pose::new(x_g, z_g));
    let adapted = gripper::adapt(config, &state, terrain)?;
    if adapted.contact_count() == 0 {
        return Err(SimError::NoContact { step: 0 });
    }
    let reads = (0..presses)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, stream::RECOGNITION, i as u64);
            calib.read_all(&adapted, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = presses as f64;
    let pins: Vec<PinProfile> = adapted
        .pins
        .iter()
        .enumerate()
        .map(|(p, pin)| {
            let hs: Vec<f64> = reads.iter().map(|r| r[p].height_mm).collect();
            let mean = hs.iter().sum::<f64>() / n;
            let std = if presses > 1 {
                (hs.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            PinProfile {
                index: pin.index,
                mean_h_mm: mean,
                std_h_mm: std,
            }
        })
        .collect();
    let center_minus_edge_mm = center_minus_edge(config, &pins);
    let shape = if center_minus_edge_mm >= 0.0 {
        ShapeKind::Convex
    } else {
        ShapeKind::Concave
    };
    Ok(Recognition {
        presses,
        pins,
        center_minus_edge_mm,
        shape,
    })
}

/// The central three columns against the rest. A raised centre pushes its
/// pins further in.
fn center_minus_edge(config: &GripperConfig, pins: &[PinProfile]) -> f64 {
    let mid = config.pins_per_block.div_ceil(2);
    let is_center = |j: usize| j + 1 >= mid && j <= mid + 1;
    let mean = |pred: &dyn Fn(usize) -> bool| {
        let sel: Vec<f64> = pins.iter().filter(|p| pred(p.index.j)).map(|p| p.mean_h_mm).collect();
        if sel.is_empty() {
            0.0
        } else {
            sel.iter().sum::<f64>() / sel.len() as f64
        }
    };
    mean(&is_center) - mean(&|j| !is_center(j))
}

/// Gripper offset that centres the array over `center_x`.
pub fn centered_x_g(config: &GripperConfig, center_x: f64) -> f64 {
    center_x - (config.pins_per_block + 1) as f64 / 2.0 * config.x_pitch_mm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::make_recognition_block;

    fn cfg() -> GripperConfig {
        GripperConfig::default()
    }

    fn idx(j: usize, k: usize) -> PinIndex {
        PinIndex { j, k }
    }

    #[test]
    fn invert_endpoints_and_midpoint() {
        let c = SensorCalibration::uniform(&cfg(), &SensorModel::default(), 0.0);
        let at = |r| c.invert_height(idx(1, 1), r).unwrap();
        assert_eq!(at(10_000.0).height_mm, 16.0);
        assert_eq!(at(3_000.0).height_mm, 36.0);
        assert_eq!(at(6_500.0).height_mm, 26.0);
        assert!(at(6_500.0).in_range);
        assert!(!at(11_000.0).in_range);
        assert!(!at(2_000.0).in_range);
    }

    #[test]
    fn forward_endpoints() {
        let c = SensorCalibration::uniform(&cfg(), &SensorModel::default(), 0.0);
        let mut rng = derive_rng(0, 0, 0);
        assert_eq!(c.forward_resistance(idx(2, 2), 16.0, &mut rng).unwrap(), 10_000.0);
        assert_eq!(c.forward_resistance(idx(2, 2), 36.0, &mut rng).unwrap(), 3_000.0);
        assert_eq!(c.forward_resistance(idx(2, 2), 26.0, &mut rng).unwrap(), 6_500.0);
        // travel before the window does not reach the sensor
        for h in [0.0, 9.0, 15.9] {
            assert_eq!(c.forward_resistance(idx(2, 2), h, &mut rng).unwrap(), 10_000.0);
        }
    }

    #[test]
    fn zero_margin_clamps_to_window() {
        let model = SensorModel {
            readout_margin_mm: 0.0,
            ..SensorModel::default()
        };
        let c = SensorCalibration::uniform(&cfg(), &model, 0.0);
        let mut rng = derive_rng(0, 0, 0);
        for h in [0.0, 10.0, 20.0, 40.0] {
            let r = c.forward_resistance(idx(1, 1), h, &mut rng).unwrap();
            let back = c.invert_height(idx(1, 1), r).unwrap().height_mm;
            assert_eq!(back, h.clamp(16.0, 36.0));
        }
    }

    #[test]
    fn unknown_pin_is_an_error() {
        let c = SensorCalibration::uniform(&cfg(), &SensorModel::default(), 0.0);
        assert!(c.invert_height(idx(8, 1), 5_000.0).is_err());
        assert!(c.invert_height(idx(1, 4), 5_000.0).is_err());
    }

    #[test]
    fn noisy_readings_match_sigma() {
        let c = SensorCalibration::uniform(&cfg(), &SensorModel::default(), 1.5);
        let mut rng = derive_rng(3, 0, 0);
        let hs: Vec<f64> = (0..10_000)
            .map(|_| {
                let r = c.forward_resistance(idx(4, 2), 26.0, &mut rng).unwrap();
                c.invert_height(idx(4, 2), r).unwrap().height_mm
            })
            .collect();
        let (_, std) = crate::mechanics::mean_std(&hs);
        assert!((std - 1.5).abs() < 0.05 * 1.5, "std {std}");
    }

    #[test]
    fn pins_are_independent() {
        let c = SensorCalibration::uniform(&cfg(), &SensorModel::default(), 2.0);
        let mut rng = derive_rng(5, 0, 0);
        let n = 10_000;
        let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            a.push(c.forward_resistance(idx(1, 1), 26.0, &mut rng).unwrap());
            b.push(c.forward_resistance(idx(2, 1), 26.0, &mut rng).unwrap());
        }
        let (ma, sa) = crate::mechanics::mean_std(&a);
        let (mb, sb) = crate::mechanics::mean_std(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n as f64 - 1.0);
        let rho = cov / (sa * sb);
        // 4 standard errors of a null correlation
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho {rho}");
    }

    #[test]
    fn bank_invariants() {
        let model = SensorModel::default();
        let a = calibrate_bank(&cfg(), &model, 11).unwrap();
        let b = calibrate_bank(&cfg(), &model, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pins.len(), 21);
        for p in &a.pins {
            assert!(p.r_max_ohm > p.r_min_ohm && p.r_min_ohm > 0.0);
            assert!((0.16..=6.69).contains(&p.sigma_mm));
            let (lo, _) = a.physical_range(p);
            assert!(lo > 0.0);
        }
        assert_ne!(a, calibrate_bank(&cfg(), &model, 12).unwrap());
    }

    #[test]
    fn bank_sigma_ensemble_mean() {
        let model = SensorModel::default();
        let sigmas: Vec<f64> = (0..1000)
            .flat_map(|s| {
                calibrate_bank(&cfg(), &model, s)
                    .unwrap()
                    .pins
                    .into_iter()
                    .map(|p| p.sigma_mm)
            })
            .collect();
        let mean = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
        assert!((2.0..=2.8).contains(&mean), "mean {mean}");
        // Beta(a, b) scaled to [lo, hi] has mean lo + (hi - lo) a / (a + b)
        let want = 0.16 + 6.53 * 2.0 / 5.83;
        assert!((mean - want).abs() < 0.02, "{mean} vs {want}");
        assert!((model.mean_sigma_mm() - want).abs() < 1e-12);
    }

    #[test]
    fn noiseless_recognition_matches_geometry() {
        let c = cfg();
        let calib = calibrate_bank(&c, &SensorModel::default(), 0).unwrap().noiseless();
        for kind in [ShapeKind::Convex, ShapeKind::Concave] {
            let t = make_recognition_block(kind);
            let x_g = centered_x_g(&c, 56.0);
            let press = PressPolicy::default();
            let rec = recognize_shape(&c, &calib, &t, x_g, &press, 3, 0).unwrap();
            assert_eq!(rec.shape, kind);
            let z_g = gripper::press_height(&c, &t, x_g, &press).unwrap();
            for p in &rec.pins {
                let x = x_g + p.index.j as f64 * c.x_pitch_mm;
                let truth = t.sample(x, p.index.k as f64 * c.y_pitch_mm).unwrap() - z_g;
                assert!((p.mean_h_mm - truth).abs() < 1e-9, "{kind} {:?}", p.index);
                assert!(p.std_h_mm < 1e-12);
            }
            let expect = if kind == ShapeKind::Convex { 20.0 } else { -20.0 };
            assert!((rec.center_minus_edge_mm - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn recognition_rejects_zero_presses() {
        let c = cfg();
        let calib = SensorCalibration::uniform(&c, &SensorModel::default(), 1.0);
        let t = make_recognition_block(ShapeKind::Convex);
        assert!(recognize_shape(&c, &calib, &t, 0.0, &PressPolicy::default(), 0, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = SensorCalibration::uniform(&cfg(), &SensorModel::default(), 0.5);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("pin_j,pin_k,R_max_ohm,R_min_ohm,sigma_mm"));
        assert_eq!(lines.next(), Some("1,1,10000.000,3000.000,0.500000"));
        assert_eq!(text.lines().count(), 22);
    }
}
