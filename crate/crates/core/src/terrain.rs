//! Terrain heightfields, the emulated test terrains and the micro-asperity
//! model that drives spine friction.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SimError};

/// Default grid spacing for generated terrains.
pub const DEFAULT_RESOLUTION_MM: f64 = 1.0;

/// Exact elevation function a generated heightfield was sampled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Flat {
        z: f64,
    },
    /// Ridge (`phi > 0`) or notch (`phi < 0`) running along y, centred at
    /// `center_x`, with a flat crest (or floor) of width `crest`.
    Wedge {
        center_x: f64,
        phi_deg: f64,
        apex: f64,
        crest: f64,
    },
    /// Step feature constant along y: raised (convex) or sunk (concave)
    /// between `x0` and `x1`.
    Block {
        kind: ShapeKind,
        x0: f64,
        x1: f64,
        height: f64,
    },
    Mapping(MappingLayout),
}

impl Profile {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Profile::Flat { z } => z,
            Profile::Wedge {
                center_x,
                phi_deg,
                apex,
                crest,
            } => {
                if phi_deg == 0.0 {
                    return 0.0;
                }
                let ridge = ridge_height((x - center_x).abs() - crest / 2.0, phi_deg.abs(), apex);
                if phi_deg > 0.0 {
                    ridge
                } else {
                    apex - ridge
                }
            }
            Profile::Block { kind, x0, x1, height } => {
                let inside = x >= x0 && x <= x1;
                match (kind, inside) {
                    (ShapeKind::Convex, true) | (ShapeKind::Concave, false) => height,
                    _ => 0.0,
                }
            }
            Profile::Mapping(layout) => layout.eval(x, y),
        }
    }
}

/// Height of a symmetric ridge at horizontal distance `u` beyond its crest.
fn ridge_height(u: f64, phi_abs_deg: f64, apex: f64) -> f64 {
    if u <= 0.0 {
        apex
    } else if phi_abs_deg >= 90.0 {
        0.0
    } else {
        (apex - u * phi_abs_deg.to_radians().tan()).max(0.0)
    }
}

/// Rectangular elevation grid with bilinear sampling.
///
/// Values are stored row-major with rows along y. Node `(i, r)` sits at
/// `origin + (i, r) * cell_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightfield {
    origin: [f64; 2],
    cell_size: f64,
    cols: usize,
    rows: usize,
    values: Vec<f64>,
    profile: Option<Profile>,
}

impl Heightfield {
    pub fn new(origin: [f64; 2], cell_size: f64, cols: usize, rows: usize, values: Vec<f64>) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(SimError::param("cell_size", format!("must be > 0, got {cell_size}")));
        }
        if cols < 2 || rows < 2 {
            return Err(SimError::param(
                "dimensions",
                format!("grid must be at least 2 x 2, got {cols} x {rows}"),
            ));
        }
        if values.len() != cols * rows {
            return Err(SimError::param(
                "values",
                format!("expected {} elevations, got {}", cols * rows, values.len()),
            ));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(SimError::param("values", format!("elevation #{bad} is not finite")));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(SimError::param("origin", "must be finite"));
        }
        Ok(Heightfield {
            origin,
            cell_size,
            cols,
            rows,
            values,
            profile: None,
        })
    }

    /// Samples `profile` at every node and keeps it for exact ground truth.
    pub fn from_profile(origin: [f64; 2], cell_size: f64, cols: usize, rows: usize, profile: Profile) -> Result<Self> {
        let mut values = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            let y = origin[1] + r as f64 * cell_size;
            for i in 0..cols {
                let x = origin[0] + i as f64 * cell_size;
                values.push(profile.eval(x, y));
            }
        }
        let mut field = Heightfield::new(origin, cell_size, cols, rows, values)?;
        field.profile = Some(profile);
        Ok(field)
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn profile(&self) -> Option<&Profile> {
        self.profile.as_ref()
    }

    /// Footprint as (width, depth) in mm.
    pub fn footprint(&self) -> (f64, f64) {
        (
            (self.cols - 1) as f64 * self.cell_size,
            (self.rows - 1) as f64 * self.cell_size,
        )
    }

    pub fn node(&self, i: usize, r: usize) -> f64 {
        self.values[r * self.cols + i]
    }

    pub fn min_elevation(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_elevation(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tol = 1e-9 * self.cell_size;
        let (w, d) = self.footprint();
        let (u, v) = (x - self.origin[0], y - self.origin[1]);
        u >= -tol && u <= w + tol && v >= -tol && v <= d + tol
    }

    /// Bilinear elevation at `(x, y)`, or `None` outside the footprint.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        if !self.contains(x, y) {
            return None;
        }
        let (i0, tx) = Self::locate((x - self.origin[0]) / self.cell_size, self.cols);
        let (r0, ty) = Self::locate((y - self.origin[1]) / self.cell_size, self.rows);
        let z00 = self.node(i0, r0);
        let z10 = self.node(i0 + 1, r0);
        let z01 = self.node(i0, r0 + 1);
        let z11 = self.node(i0 + 1, r0 + 1);
        // weights written as a*(1-t) + b*t so both nodes are reproduced exactly
        let lower = z00 * (1.0 - tx) + z10 * tx;
        let upper = z01 * (1.0 - tx) + z11 * tx;
        Some(lower * (1.0 - ty) + upper * ty)
    }

    fn locate(f: f64, n: usize) -> (usize, f64) {
        let f = f.clamp(0.0, (n - 1) as f64);
        let i = (f.floor() as usize).min(n - 2);
        (i, f - i as f64)
    }

    /// Exact elevation from the generating profile when there is one,
    /// otherwise the bilinear sample.
    pub fn ground_truth(&self, x: f64, y: f64) -> Option<f64> {
        if !self.contains(x, y) {
            return None;
        }
        match &self.profile {
            Some(p) => Some(p.eval(x, y)),
            None => self.sample(x, y),
        }
    }

    /// Plain-text grid: header `cols rows cell_size origin_x origin_y`, then
    /// one line of elevations per row. Floats use the shortest exact
    /// representation, so reading back gives identical values.
    pub fn write_grid<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "{} {} {} {} {}",
            self.cols, self.rows, self.cell_size, self.origin[0], self.origin[1]
        )?;
        for row in self.values.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_grid<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut header: Option<Vec<String>> = None;
        for line in input.lines() {
            let line = line?;
            let words = line.split_whitespace().map(str::to_owned);
            if header.is_none() {
                let h: Vec<String> = words.collect();
                if h.is_empty() {
                    continue;
                }
                header = Some(h);
            } else {
                tokens.extend(words);
            }
        }
        let header = header.ok_or_else(|| SimError::Parse("empty input".into()))?;
        if header.len() != 5 {
            return Err(SimError::Parse(format!(
                "header needs 5 fields, found {}",
                header.len()
            )));
        }
        let cols: usize = parse_token(&header[0], "cols")?;
        let rows: usize = parse_token(&header[1], "rows")?;
        let cell: f64 = parse_token(&header[2], "cell_size")?;
        let ox: f64 = parse_token(&header[3], "origin_x")?;
        let oy: f64 = parse_token(&header[4], "origin_y")?;
        let values = tokens
            .iter()
            .map(|t| parse_token::<f64>(t, "elevation"))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != cols.saturating_mul(rows) {
            return Err(SimError::Parse(format!(
                "expected {} elevations, found {}",
                cols.saturating_mul(rows),
                values.len()
            )));
        }
        Heightfield::new([ox, oy], cell, cols, rows, values)
    }
}

fn parse_token<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| SimError::Parse(format!("bad {what} `{tok}`")))
}

/// Convex/concave classification shared by terrains and recognition output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Convex,
    Concave,
}

impl ShapeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeKind::Convex => "convex",
            ShapeKind::Concave => "concave",
        }
    }
}

impl std::fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ShapeKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex" => Ok(ShapeKind::Convex),
            "concave" => Ok(ShapeKind::Concave),
            other => Err(SimError::InvalidSpec(format!("unknown shape `{other}`"))),
        }
    }
}

/// Emulated pull-test terrain: a ridge or notch whose faces are inclined at
/// `|phi_deg|` from horizontal. Negative angles are concave.
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeSpec {
    pub phi_deg: f64,
    pub apex_height_mm: f64,
    pub width_mm: f64,
    pub depth_mm: f64,
    /// Flat top of a ridge or floor of a notch. Must be positive for
    /// vertical faces.
    pub crest_width_mm: f64,
    /// Abrasive grit number of the surface covering (informational).
    pub grit: u32,
}

impl WedgeSpec {
    /// Pull-test terrain with the default 20 mm relief on a 140 x 70 mm plate.
    pub fn new(phi_deg: f64) -> Self {
        WedgeSpec {
            phi_deg,
            apex_height_mm: 20.0,
            width_mm: 140.0,
            depth_mm: 70.0,
            crest_width_mm: 14.0,
            grit: 40,
        }
    }

    pub fn shape(&self) -> Option<ShapeKind> {
        if self.phi_deg > 0.0 {
            Some(ShapeKind::Convex)
        } else if self.phi_deg < 0.0 {
            Some(ShapeKind::Concave)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if !(self.phi_deg.is_finite() && (-90.0..=90.0).contains(&self.phi_deg)) {
            return bad(format!("phi must lie in [-90, 90] deg, got {}", self.phi_deg));
        }
        for (name, v) in [
            ("apex_height_mm", self.apex_height_mm),
            ("width_mm", self.width_mm),
            ("depth_mm", self.depth_mm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.crest_width_mm >= 0.0 && self.crest_width_mm < self.width_mm) {
            return bad(format!(
                "crest_width_mm must lie in [0, width), got {}",
                self.crest_width_mm
            ));
        }
        if self.phi_deg.abs() == 90.0 && self.crest_width_mm == 0.0 {
            return bad("vertical faces need a positive crest width".into());
        }
        Ok(())
    }

    pub fn center_x(&self) -> f64 {
        self.width_mm / 2.0
    }
}

fn grid_count(extent: f64, resolution: f64) -> Result<usize> {
    let n = (extent / resolution).round();
    if n < 1.0 {
        return Err(SimError::param(
            "resolution",
            format!("{resolution} mm is coarser than the {extent} mm extent"),
        ));
    }
    Ok(n as usize + 1)
}

pub fn make_wedge(spec: &WedgeSpec, resolution_mm: f64) -> Result<Heightfield> {
    spec.validate()?;
    if !(resolution_mm > 0.0 && resolution_mm.is_finite()) {
        return Err(SimError::param(
            "resolution",
            format!("must be > 0, got {resolution_mm}"),
        ));
    }
    let cols = grid_count(spec.width_mm, resolution_mm)?;
    let rows = grid_count(spec.depth_mm, resolution_mm)?;
    let profile = Profile::Wedge {
        center_x: spec.center_x(),
        phi_deg: spec.phi_deg,
        apex: spec.apex_height_mm,
        crest: spec.crest_width_mm,
    };
    Heightfield::from_profile([0.0, 0.0], resolution_mm, cols, rows, profile)
}

/// Shape-recognition target: a 20 mm step, 42 mm wide, constant along y,
/// centred under a gripper posed at `x_g = 0`.
pub fn make_recognition_block(kind: ShapeKind) -> Heightfield {
    let profile = Profile::Block {
        kind,
        x0: 35.0,
        x1: 77.0,
        height: 20.0,
    };
    Heightfield::from_profile([0.0, 0.0], DEFAULT_RESOLUTION_MM, 113, 71, profile)
        .expect("recognition block parameters are valid")
}

/// Layout of the 200 x 40 mm mapping terrain: a raised block, a sunk notch
/// and a band sloping along y, all on a 25 mm plinth.
///
/// Feature edges sit half-way between grid nodes so that the 1 mm grid and
/// the exact profile agree at every node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingLayout {
    pub origin_y: f64,
    pub depth: f64,
    pub plinth: f64,
    pub convex: (f64, f64),
    pub concave: (f64, f64),
    pub slope_start: f64,
    pub relief: f64,
}

impl Default for MappingLayout {
    fn default() -> Self {
        MappingLayout {
            origin_y: 15.0,
            depth: 40.0,
            plinth: 25.0,
            convex: (20.5, 60.5),
            concave: (80.5, 120.5),
            slope_start: 140.5,
            relief: 20.0,
        }
    }
}

impl MappingLayout {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        if x >= self.convex.0 && x < self.convex.1 {
            self.plinth + self.relief
        } else if x >= self.concave.0 && x < self.concave.1 {
            self.plinth - self.relief
        } else if x >= self.slope_start {
            let t = ((y - self.origin_y) / self.depth).clamp(0.0, 1.0);
            self.plinth - self.relief / 2.0 + self.relief * t
        } else {
            self.plinth
        }
    }
}

pub fn make_mapping_terrain() -> Heightfield {
    let layout = MappingLayout::default();
    Heightfield::from_profile(
        [0.0, layout.origin_y],
        DEFAULT_RESOLUTION_MM,
        201,
        41,
        Profile::Mapping(layout),
    )
    .expect("mapping terrain parameters are valid")
}

/// Stochastic micro-asperity model.
///
/// Asperities are triangular bumps with engagement angle beta. The mean
/// angle falls linearly as the face steepens:
/// `beta_mean(phi) = beta0 + gain * (90 - |phi|)`, and samples follow a
/// normal law truncated to `[atan(mu) + floor_margin, 90]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsperityModel {
    pub mu: f64,
    pub beta0_deg: f64,
    pub beta_gain: f64,
    pub beta_spread_deg: f64,
    pub beta_floor_margin_deg: f64,
    pub breakage_force_n: f64,
}

impl Default for AsperityModel {
    fn default() -> Self {
        AsperityModel {
            mu: 0.3,
            beta0_deg: 15.0,
            beta_gain: 0.5,
            beta_spread_deg: 7.0,
            beta_floor_margin_deg: 1.0,
            breakage_force_n: 12.0,
        }
    }
}

impl AsperityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(SimError::param("mu", "must be > 0"));
        }
        if self.beta_gain < 0.0 {
            return Err(SimError::param("beta_gain", "must be >= 0"));
        }
        if self.beta_spread_deg < 0.0 {
            return Err(SimError::param("beta_spread_deg", "must be >= 0"));
        }
        if !(self.beta_floor_margin_deg > 0.0) {
            return Err(SimError::param("beta_floor_margin_deg", "must be > 0"));
        }
        if self.beta_floor_deg() >= 90.0 {
            return Err(SimError::param(
                "mu",
                "leaves no admissible asperity angle below 90 deg",
            ));
        }
        if !(self.breakage_force_n > 0.0) {
            return Err(SimError::param("breakage_force_n", "must be > 0"));
        }
        Ok(())
    }

    pub fn beta_mean_deg(&self, phi_deg: f64) -> f64 {
        self.beta0_deg + self.beta_gain * (90.0 - phi_deg.abs().min(90.0))
    }

    /// Lowest angle ever emitted by the sampler.
    pub fn beta_floor_deg(&self) -> f64 {
        self.mu.atan().to_degrees() + self.beta_floor_margin_deg
    }

    /// Draws one asperity angle for a face inclined at `phi_deg`.
    ///
    /// Inverse-CDF sampling of the truncated normal: exactly one uniform is
    /// consumed per call whatever the parameters.
    pub fn sample_beta<R: Rng + ?Sized>(&self, phi_deg: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let lo = self.beta_floor_deg();
        let hi = 90.0;
        let mean = self.beta_mean_deg(phi_deg);
        let spread = self.beta_spread_deg;
        if spread == 0.0 {
            return mean.clamp(lo, hi);
        }
        let std = Normal::standard();
        let a = std.cdf((lo - mean) / spread);
        let b = std.cdf((hi - mean) / spread);
        if b - a < 1e-12 {
            // window lies in a far tail; the nearest bound is the limit
            return mean.clamp(lo, hi);
        }
        let p = a + u * (b - a);
        (mean + spread * std.inverse_cdf(p)).clamp(lo, hi)
    }
}
