//! Translate-press-read terrain scanning.
//!
//! Each step moves the gripper `dx` along x, presses it onto the terrain,
//! reads every pin and lifts off. Pin `(j, k)` read at pose `(x_g, z_g)`
//! with height reading `h` becomes the point
//! `(x_g + j * x_pitch, k * y_pitch, z_g + h)`. The cloud is then averaged
//! over a grid of rectangular columns and compared with the true terrain.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gripper::{self, GripperConfig, GripperState, PinIndex, Pose, PressPolicy};
use crate::rng::{derive_rng, stream};
use crate::sensing::SensorCalibration;
use crate::terrain::Heightfield;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPlan {
    /// Gripper x before the first move.
    pub start_x_mm: f64,
    pub dx_mm: f64,
    pub steps: usize,
    pub press: PressPolicy,
}

impl Default for ScanPlan {
    fn default() -> Self {
        ScanPlan {
            start_x_mm: -20.0,
            dx_mm: 10.0,
            steps: 12,
            press: PressPolicy::default(),
        }
    }
}

impl ScanPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx_mm > 0.0 && self.dx_mm.is_finite()) {
            return Err(SimError::param("dx_mm", "must be > 0"));
        }
        if self.steps == 0 {
            return Err(SimError::param("steps", "must be >= 1"));
        }
        if !self.start_x_mm.is_finite() {
            return Err(SimError::param("start_x_mm", "must be finite"));
        }
        Ok(())
    }

    /// Gripper x during step `step` (1-based).
    pub fn x_g(&self, step: usize) -> f64 {
        self.start_x_mm + step as f64 * self.dx_mm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub step: usize,
    pub pin: PinIndex,
    pub pose: Pose,
    /// Height reading the point was built from.
    pub h_mm: f64,
    pub in_range: bool,
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<ScanPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Drops readings that fell outside the calibrated resistance range.
    pub fn without_clamped(&self) -> PointCloud {
        PointCloud {
            points: self.points.iter().filter(|p| p.in_range).copied().collect(),
        }
    }

    /// ASCII PLY with one `double x y z` vertex per point.
    pub fn write_ply<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "ply")?;
        writeln!(out, "format ascii 1.0")?;
        writeln!(out, "element vertex {}", self.points.len())?;
        writeln!(out, "property double x")?;
        writeln!(out, "property double y")?;
        writeln!(out, "property double z")?;
        writeln!(out, "end_header")?;
        for p in &self.points {
            writeln!(out, "{} {} {}", p.x_mm, p.y_mm, p.z_mm)?;
        }
        Ok(())
    }

    /// Raw points: `step,j,k,x_mm,y_mm,z_mm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,j,k,x_mm,y_mm,z_mm")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.step, p.pin.j, p.pin.k, p.x_mm, p.y_mm, p.z_mm
            )?;
        }
        Ok(())
    }
}

/// World coordinates of a reading.
pub fn point_from_reading(config: &GripperConfig, pose: Pose, pin: PinIndex, h_mm: f64) -> Result<(f64, f64, f64)> {
    let (x, y) = gripper::pin_world_xy(config, pose, pin.j, pin.k)?;
    Ok((x, y, pose.z_mm + h_mm))
}

/// Runs the scan. Step `s` draws its sensor noise from the generator
/// derived from `(seed, s)`.
pub fn run_scan(
    config: &GripperConfig,
    calib: &SensorCalibration,
    terrain: &Heightfield,
    plan: &ScanPlan,
    seed: u64,
) -> Result<PointCloud> {
    plan.validate()?;
    let mut points = Vec::with_capacity(plan.steps * config.pin_count());
    for step in 1..=plan.steps {
        let x_g = plan.x_g(step);
        let z_g = gripper::press_height(config, terrain, x_g, &plan.press)?;
        let pose = Pose::new(x_g, z_g);
        let adapted = gripper::adapt(config, &GripperState::new(config, pose), terrain)?;
        if adapted.contact_count() == 0 {
            return Err(SimError::NoContact { step });
        }
        let mut rng = derive_rng(seed, stream::SCAN, step as u64);
        for reading in calib.read_all(&adapted, &mut rng)? {
            let (x_mm, y_mm, z_mm) = point_from_reading(config, pose, reading.index, reading.height_mm)?;
            points.push(ScanPoint {
                step,
                pin: reading.index,
                pose,
                h_mm: reading.height_mm,
                in_range: reading.in_range,
                x_mm,
                y_mm,
                z_mm,
            });
        }
        // lift-off: the next step starts from a fresh, fully extended array
    }
    Ok(PointCloud { points })
}

/// Where a column's ground truth is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthReference {
    /// Terrain height at the column centre.
    #[default]
    Center,
    /// Mean terrain height at the column's points.
    PointMean,
}

impl std::str::FromStr for TruthReference {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(TruthReference::Center),
            "point-mean" => Ok(TruthReference::PointMean),
            _ => Err(SimError::param("truth_reference", format!("unknown reference {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dx_mm: f64,
    pub dy_mm: f64,
    pub origin: [f64; 2],
    pub truth: TruthReference,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            dx_mm: 10.0,
            dy_mm: 15.0,
            origin: [0.0, 0.0],
            truth: TruthReference::Center,
        }
    }
}

impl GridSpec {
    pub fn column_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin[0]) / self.dx_mm).floor() as i64,
            ((y - self.origin[1]) / self.dy_mm).floor() as i64,
        )
    }

    pub fn center_of(&self, col: (i64, i64)) -> (f64, f64) {
        (
            self.origin[0] + (col.0 as f64 + 0.5) * self.dx_mm,
            self.origin[1] + (col.1 as f64 + 0.5) * self.dy_mm,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub index: (i64, i64),
    pub center: (f64, f64),
    /// `None` for an empty column.
    pub mean_z_mm: Option<f64>,
    pub n_samples: usize,
    pub truth_z_mm: f64,
    pub abs_err_mm: Option<f64>,
    /// Largest distance of a single point from the column's truth.
    pub max_point_err_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub spec: GridSpec,
    /// Every column of the covered range, in (x, y) order.
    pub columns: Vec<Column>,
}

impl GridMap {
    /// Mean absolute error over non-empty columns.
    pub fn e_bar_mm(&self) -> f64 {
        let errs: Vec<f64> = self.columns.iter().filter_map(|c| c.abs_err_mm).collect();
        if errs.is_empty() {
            return f64::NAN;
        }
        errs.iter().sum::<f64>() / errs.len() as f64
    }

    pub fn column(&self, index: (i64, i64)) -> Option<&Column> {
        self.columns.iter().find(|c| c.index == index)
    }

    /// Column table: `col_x,col_y,mean_z_mm,n_samples,abs_err_mm`, with
    /// empty columns leaving both value fields blank.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "col_x,col_y,mean_z_mm,n_samples,abs_err_mm")?;
        for c in &self.columns {
            match (c.mean_z_mm, c.abs_err_mm) {
                (Some(m), Some(e)) => writeln!(out, "{},{},{:.6},{},{:.6}", c.center.0, c.center.1, m, c.n_samples, e)?,
                _ => writeln!(out, "{},{},,0,", c.center.0, c.center.1)?,
            }
        }
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "e_bar_mm")?;
        writeln!(out, "{:.6}", self.e_bar_mm())
    }
}

/// Averages the cloud per column and compares each column with the
/// terrain's ground truth.
pub fn bin_average(cloud: &PointCloud, ground_truth: &Heightfield, spec: &GridSpec) -> Result<GridMap> {
    if cloud.is_empty() {
        return Err(SimError::param("cloud", "must contain at least one point"));
    }
    if !(spec.dx_mm > 0.0 && spec.dy_mm > 0.0) {
        return Err(SimError::param("grid", "column sizes must be > 0"));
    }
    let mut bins: BTreeMap<(i64, i64), Vec<&ScanPoint>> = BTreeMap::new();
    for p in &cloud.points {
        bins.entry(spec.column_of(p.x_mm, p.y_mm)).or_default().push(p);
    }
    let keys: Vec<_> = bins.keys().copied().collect();
    let (x0, x1) = (
        keys.iter().map(|k| k.0).min().unwrap(),
        keys.iter().map(|k| k.0).max().unwrap(),
    );
    let (y0, y1) = (
        keys.iter().map(|k| k.1).min().unwrap(),
        keys.iter().map(|k| k.1).max().unwrap(),
    );
    let mut columns = Vec::new();
    for cx in x0..=x1 {
        for cy in y0..=y1 {
            let index = (cx, cy);
            let center = spec.center_of(index);
            let pts = bins.get(&index).map(Vec::as_slice).unwrap_or(&[]);
            let truth_at = |x: f64, y: f64| {
                ground_truth
                    .ground_truth(x, y)
                    .ok_or(SimError::OutsideFootprint { x, y })
            };
            let truth_z_mm = match (spec.truth, pts.is_empty()) {
                (TruthReference::PointMean, false) => {
                    let mut s = 0.0;
                    for p in pts {
                        s += truth_at(p.x_mm, p.y_mm)?;
                    }
                    s / pts.len() as f64
                }
                _ if pts.is_empty() => ground_truth.ground_truth(center.0, center.1).unwrap_or(f64::NAN),
                _ => truth_at(center.0, center.1)?,
            };
            let mean = (!pts.is_empty()).then(|| pts.iter().map(|p| p.z_mm).sum::<f64>() / pts.len() as f64);
            columns.push(Column {
                index,
                center,
                mean_z_mm: mean,
                n_samples: pts.len(),
                truth_z_mm,
                abs_err_mm: mean.map(|m| (m - truth_z_mm).abs()),
                max_point_err_mm: pts.iter().map(|p| (p.z_mm - truth_z_mm).abs()).fold(0.0, f64::max),
            });
        }
    }
    Ok(GridMap { spec: *spec, columns })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttenuationRow {
    pub index: (i64, i64),
    pub n_samples: usize,
    pub max_point_err_mm: f64,
    pub averaged_err_mm: f64,
}

/// Worst single point against the averaged error, for every non-empty
/// column. Averaging can never be worse than the worst point.
pub fn outlier_attenuation_report(map: &GridMap) -> Vec<AttenuationRow> {
    let rows: Vec<AttenuationRow> = map
        .columns
        .iter()
        .filter_map(|c| {
            c.abs_err_mm.map(|e| AttenuationRow {
                index: c.index,
                n_samples: c.n_samples,
                max_point_err_mm: c.max_point_err_mm,
                averaged_err_mm: e,
            })
        })
        .collect();
    for r in &rows {
        assert!(
            r.averaged_err_mm <= r.max_point_err_mm + 1e-9,
            "column {:?}: mean error {} above worst point {}",
            r.index,
            r.averaged_err_mm,
            r.max_point_err_mm
        );
    }
    rows
}
