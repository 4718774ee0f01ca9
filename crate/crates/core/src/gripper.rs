//! Pin-array geometry, per-pin state and the approach/adapt/lock phases.
//!
//! Pins are numbered `(j, k)` with `j = 1..=pins_per_block` along x and
//! `k = 1..=blocks` along y. A pin sits at `x = x_g + j * x_pitch`,
//! `y = k * y_pitch` and its tip rests at `z = z_g + retraction`, where
//! `z_g` is the elevation of the tip plane with every pin fully extended.
//!
//! Each pin is split into a front half, carried by the sliding holder and
//! pushed toward +x on locking, and a back half in the fixed holder that
//! bears toward -x. Each half carries one effective spine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::terrain::{AsperityModel, Heightfield};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperConfig {
    pub blocks: usize,
    pub pins_per_block: usize,
    pub x_pitch_mm: f64,
    pub y_pitch_mm: f64,
    /// Width of the linear sensing window.
    pub stroke_l_mm: f64,
    /// Retraction at which the sensing window starts.
    pub h_offset_mm: f64,
    pub holder_slide_max_mm: f64,
    /// Young's modulus of the elastic tip (Pa).
    pub elastic_modulus_pa: f64,
    /// Second moment of area of the elastic tip (m^4).
    pub second_moment_m4: f64,
    /// Distance from the clamped end of the elastic tip to the spine (m).
    pub spine_lever_m: f64,
    pub pin_width_mm: f64,
    /// Height of the spine point above the pin's terrain contact.
    pub spine_height_mm: f64,
    /// Engagement probability on a face of zero horizontal extent.
    pub engage_probability_floor: f64,
    /// Ray-march step when searching for a face along the slide axis.
    pub gap_step_mm: f64,
}

impl Default for GripperConfig {
    fn default() -> Self {
        GripperConfig {
            blocks: 3,
            pins_per_block: 7,
            x_pitch_mm: 14.0,
            y_pitch_mm: 17.4,
            stroke_l_mm: 20.0,
            h_offset_mm: 16.0,
            holder_slide_max_mm: 6.0,
            elastic_modulus_pa: 2.4e9,
            second_moment_m4: 4.5e-13,
            spine_lever_m: 0.030,
            pin_width_mm: 5.0,
            spine_height_mm: 2.0,
            engage_probability_floor: 0.3,
            gap_step_mm: 0.1,
        }
    }
}

impl GripperConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.pins_per_block == 0 {
            return Err(SimError::param("blocks", "pin array must be non-empty"));
        }
        let positive = [
            ("x_pitch_mm", self.x_pitch_mm),
            ("y_pitch_mm", self.y_pitch_mm),
            ("stroke_l_mm", self.stroke_l_mm),
            ("holder_slide_max_mm", self.holder_slide_max_mm),
            ("elastic_modulus_pa", self.elastic_modulus_pa),
            ("second_moment_m4", self.second_moment_m4),
            ("spine_lever_m", self.spine_lever_m),
            ("pin_width_mm", self.pin_width_mm),
            ("gap_step_mm", self.gap_step_mm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::param(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.h_offset_mm >= 0.0) {
            return Err(SimError::param("h_offset_mm", "must be >= 0"));
        }
        if !(self.spine_height_mm >= 0.0) {
            return Err(SimError::param("spine_height_mm", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.engage_probability_floor) {
            return Err(SimError::param("engage_probability_floor", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn pin_count(&self) -> usize {
        self.blocks * self.pins_per_block
    }

    /// Mechanical travel of a pin from fully extended to bottomed out.
    pub fn travel_mm(&self) -> f64 {
        self.h_offset_mm + self.stroke_l_mm
    }

    /// All pin indices, block by block.
    pub fn pin_indices(&self) -> impl Iterator<Item = PinIndex> + '_ {
        (1..=self.blocks).flat_map(move |k| (1..=self.pins_per_block).map(move |j| PinIndex { j, k }))
    }

    /// Horizontal spine stiffness 3EI/l^3 in N per mm of deflection.
    pub fn spine_stiffness_n_per_mm(&self) -> f64 {
        3.0 * self.elastic_modulus_pa * self.second_moment_m4 / self.spine_lever_m.powi(3) * 1e-3
    }

    /// Chance that a spine bites a face whose horizontal extent beyond the
    /// contact point is `extent_mm`: 1 at one pin width or more, falling
    /// linearly to the floor as the extent vanishes.
    pub fn engage_probability(&self, extent_mm: f64) -> f64 {
        let frac = (extent_mm / self.pin_width_mm).clamp(0.0, 1.0);
        self.engage_probability_floor + (1.0 - self.engage_probability_floor) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PinIndex {
    pub j: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x_mm: f64,
    pub z_mm: f64,
}

impl Pose {
    pub fn new(x_mm: f64, z_mm: f64) -> Self {
        Pose { x_mm, z_mm }
    }
}

pub fn pin_world_xy(config: &GripperConfig, pose: Pose, j: usize, k: usize) -> Result<(f64, f64)> {
    if j < 1 || j > config.pins_per_block || k < 1 || k > config.blocks {
        return Err(SimError::PinIndex { j, k });
    }
    Ok((pose.x_mm + j as f64 * config.x_pitch_mm, k as f64 * config.y_pitch_mm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Approach,
    Adapt,
    Lock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Half {
    Front,
    Back,
}

impl Half {
    /// Direction the half bears along x when the holder slides.
    pub fn direction(self) -> f64 {
        match self {
            Half::Front => 1.0,
            Half::Back => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Half::Front => "front",
            Half::Back => "back",
        }
    }
}

/// Spine state of one pin half after locking.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpineHalf {
    /// Clearance to the nearest face along the bearing direction, capped at
    /// the holder slide when nothing is in reach.
    pub gap_mm: f64,
    /// Tip deflection once the holder has slid; zero if no face was reached.
    pub delta_mm: f64,
    /// Horizontal extent of the rising face beyond the contact point.
    pub face_extent_mm: f64,
    /// Mean inclination of that face from horizontal (deg).
    pub face_inclination_deg: f64,
    pub engaged: bool,
    pub beta_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinState {
    pub index: PinIndex,
    pub x_mm: f64,
    pub y_mm: f64,
    /// Distance the pin is pushed in from its fully extended position.
    pub retraction_mm: f64,
    pub in_contact: bool,
    pub front: SpineHalf,
    pub back: SpineHalf,
    pub locked: bool,
}

impl PinState {
    pub fn half(&self, half: Half) -> &SpineHalf {
        match half {
            Half::Front => &self.front,
            Half::Back => &self.back,
        }
    }

    pub fn tip_z(&self, pose: Pose) -> f64 {
        pose.z_mm + self.retraction_mm
    }

    pub fn any_engaged(&self) -> bool {
        self.front.engaged || self.back.engaged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GripperState {
    pub pose: Pose,
    pub pins: Vec<PinState>,
    pub phase: Phase,
    pub holder_slide_mm: f64,
}

impl GripperState {
    /// Gripper hovering at `pose` with every pin fully extended.
    pub fn new(config: &GripperConfig, pose: Pose) -> Self {
        let pins = config
            .pin_indices()
            .map(|index| {
                let (x_mm, y_mm) = pin_world_xy(config, pose, index.j, index.k).expect("indices come from the config");
                PinState {
                    index,
                    x_mm,
                    y_mm,
                    retraction_mm: 0.0,
                    in_contact: false,
                    front: SpineHalf::default(),
                    back: SpineHalf::default(),
                    locked: false,
                }
            })
            .collect();
        GripperState {
            pose,
            pins,
            phase: Phase::Approach,
            holder_slide_mm: 0.0,
        }
    }

    pub fn pin(&self, j: usize, k: usize) -> Option<&PinState> {
        self.pins.iter().find(|p| p.index == PinIndex { j, k })
    }

    pub fn contact_count(&self) -> usize {
        self.pins.iter().filter(|p| p.in_contact).count()
    }

    fn expect_phase(&self, op: &'static str, expected: Phase) -> Result<()> {
        if self.phase != expected {
            return Err(SimError::Phase {
                op,
                expected,
                actual: self.phase,
            });
        }
        Ok(())
    }
}

/// Stopping rule for pressing the gripper into a terrain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressPolicy {
    /// Descend until at least this fraction of pins sits inside the
    /// sensing window.
    pub in_range_fraction: f64,
    /// Lowest allowed `z_g`.
    pub min_z_mm: Option<f64>,
}

impl Default for PressPolicy {
    fn default() -> Self {
        PressPolicy {
            in_range_fraction: 0.8,
            min_z_mm: None,
        }
    }
}

/// Gripper height at which a downward press over `x_g` stops.
///
/// Descending from above, pin `p` enters the sensing window at
/// `z_g = t_p - h_offset`. The press stops at the first height where the
/// required fraction of pins is in the window, but never so low that a pin
/// bottoms out, and never below `min_z_mm`.
pub fn press_height(config: &GripperConfig, terrain: &Heightfield, x_g: f64, policy: &PressPolicy) -> Result<f64> {
    if !(policy.in_range_fraction > 0.0 && policy.in_range_fraction <= 1.0) {
        return Err(SimError::param("in_range_fraction", "must lie in (0, 1]"));
    }
    let pose = Pose::new(x_g, 0.0);
    let mut heights = Vec::with_capacity(config.pin_count());
    for idx in config.pin_indices() {
        let (x, y) = pin_world_xy(config, pose, idx.j, idx.k)?;
        heights.push(terrain.sample(x, y).ok_or(SimError::OutsideFootprint { x, y })?);
    }
    let top = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut entries: Vec<f64> = heights.iter().map(|t| t - config.h_offset_mm).collect();
    entries.sort_by(|a, b| b.total_cmp(a));
    let needed = ((policy.in_range_fraction * entries.len() as f64).ceil() as usize).clamp(1, entries.len());
    let mut z = entries[needed - 1].max(top - config.travel_mm());
    if let Some(floor) = policy.min_z_mm {
        z = z.max(floor);
    }
    Ok(z)
}

/// Presses the gripper onto the terrain at its current pose: every pin
/// whose terrain point lies within travel retracts to touch it, the rest
/// stay fully extended.
pub fn adapt(config: &GripperConfig, state: &GripperState, terrain: &Heightfield) -> Result<GripperState> {
    state.expect_phase("adapt", Phase::Approach)?;
    let travel = config.travel_mm();
    let mut next = state.clone();
    for pin in &mut next.pins {
        let (x, y) = (pin.x_mm, pin.y_mm);
        let surface = terrain.sample(x, y).ok_or(SimError::OutsideFootprint { x, y })?;
        let required = surface - state.pose.z_mm;
        if required > travel {
            return Err(SimError::PressTooDeep {
                j: pin.index.j,
                k: pin.index.k,
                required_mm: required,
                travel_mm: travel,
            });
        }
        if required >= 0.0 {
            pin.retraction_mm = required;
            pin.in_contact = true;
        } else {
            pin.retraction_mm = 0.0;
            pin.in_contact = false;
        }
    }
    next.phase = Phase::Adapt;
    Ok(next)
}

/// First distance along the unit vector `dir` (in `step` increments, up to
/// `reach`) at which the terrain rises above `z`.
pub(crate) fn march_to_face(
    terrain: &Heightfield,
    (x, y): (f64, f64),
    dir: (f64, f64),
    z: f64,
    reach: f64,
    step: f64,
) -> Option<f64> {
    let n = (reach / step + 1e-9).floor() as usize;
    for s in 1..=n {
        let d = s as f64 * step;
        match terrain.sample(x + dir.0 * d, y + dir.1 * d) {
            Some(h) if h > z => return Some(d),
            Some(_) => {}
            None => return None,
        }
    }
    None
}

/// Horizontal run and mean inclination of the rising face that starts at
/// `(x, y)`, followed along `dir` for at most `cap` mm.
pub(crate) fn probe_face(
    terrain: &Heightfield,
    (x, y): (f64, f64),
    dir: (f64, f64),
    cap: f64,
    step: f64,
) -> (f64, f64) {
    let Some(z0) = terrain.sample(x, y) else {
        return (0.0, 90.0);
    };
    let n = (cap / step + 1e-9).floor() as usize;
    let mut run = 0.0;
    let mut z_prev = z0;
    for s in 1..=n {
        let d = s as f64 * step;
        match terrain.sample(x + dir.0 * d, y + dir.1 * d) {
            Some(h) if h > z_prev + 1e-9 => {
                run = d;
                z_prev = h;
            }
            _ => break,
        }
    }
    let rise = z_prev - z0;
    let inclination = if run > 0.0 { rise.atan2(run).to_degrees() } else { 90.0 };
    (run, inclination)
}

/// Slides the movable holder by `holder_slide_max`, deflecting every spine
/// that reaches a terrain face and sampling its asperity.
///
/// The generator is advanced by the same amount for every pin half,
/// whatever the geometry, so runs with the same seed stay aligned.
pub fn lock<R: Rng + ?Sized>(
    config: &GripperConfig,
    state: &GripperState,
    terrain: &Heightfield,
    asperity: &AsperityModel,
    rng: &mut R,
) -> Result<GripperState> {
    state.expect_phase("lock", Phase::Adapt)?;
    let slide = config.holder_slide_max_mm;
    let mut next = state.clone();
    next.holder_slide_mm = slide;
    for pin in &mut next.pins {
        let spine_z = pin.tip_z(state.pose) + config.spine_height_mm;
        for half in [Half::Front, Half::Back] {
            let gate: f64 = rng.random();
            let mut spine = SpineHalf {
                gap_mm: slide,
                ..SpineHalf::default()
            };
            let dir = (half.direction(), 0.0);
            let hit = if pin.in_contact {
                march_to_face(terrain, (pin.x_mm, pin.y_mm), dir, spine_z, slide, config.gap_step_mm)
            } else {
                None
            };
            if let Some(gap) = hit {
                let (extent, incl) = probe_face(
                    terrain,
                    (pin.x_mm + dir.0 * gap, pin.y_mm),
                    dir,
                    config.pin_width_mm,
                    config.gap_step_mm,
                );
                spine.gap_mm = gap;
                spine.delta_mm = (slide - gap).max(0.0);
                spine.face_extent_mm = extent;
                spine.face_inclination_deg = incl;
            }
            let beta = asperity.sample_beta(spine.face_inclination_deg, rng);
            if spine.delta_mm > 0.0 && gate < config.engage_probability(spine.face_extent_mm) {
                spine.engaged = true;
                spine.beta_deg = Some(beta);
            }
            match half {
                Half::Front => pin.front = spine,
                Half::Back => pin.back = spine,
            }
        }
        pin.locked = true;
    }
    next.phase = Phase::Lock;
    Ok(next)
}

/// Slides the holder back and lifts off. A no-op unless locked.
pub fn release(state: &GripperState) -> GripperState {
    if state.phase != Phase::Lock {
        return state.clone();
    }
    let mut next = state.clone();
    next.holder_slide_mm = 0.0;
    for pin in &mut next.pins {
        pin.retraction_mm = 0.0;
        pin.in_contact = false;
        pin.locked = false;
        pin.front = SpineHalf::default();
        pin.back = SpineHalf::default();
    }
    next.phase = Phase::Approach;
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use crate::terrain::{make_recognition_block, make_wedge, Profile, ShapeKind, WedgeSpec};
    use rand::SeedableRng;

    fn flat(z: f64) -> Heightfield {
        Heightfield::from_profile([-50.0, 0.0], 1.0, 301, 71, Profile::Flat { z }).unwrap()
    }

    fn adapted(config: &GripperConfig, terrain: &Heightfield, x_g: f64) -> GripperState {
        let z = press_height(config, terrain, x_g, &PressPolicy::default()).unwrap();
        adapt(config, &GripperState::new(config, Pose::new(x_g, z)), terrain).unwrap()
    }

    #[test]
    fn pin_coordinates() {
        let c = GripperConfig::default();
        assert_eq!(pin_world_xy(&c, Pose::new(0.0, 0.0), 1, 1).unwrap(), (14.0, 17.4));
        let (x, y) = pin_world_xy(&c, Pose::new(10.0, 0.0), 7, 3).unwrap();
        assert_eq!(x, 108.0);
        assert!((y - 52.2).abs() < 1e-12);
        assert_eq!(
            pin_world_xy(&c, Pose::new(3.0, 1.0), 4, 2).unwrap(),
            pin_world_xy(&c, Pose::new(3.0, 1.0), 4, 2).unwrap()
        );
        assert!(pin_world_xy(&c, Pose::default(), 0, 1).is_err());
        assert!(pin_world_xy(&c, Pose::default(), 8, 1).is_err());
        assert!(pin_world_xy(&c, Pose::default(), 1, 4).is_err());
    }

    #[test]
    fn flat_terrain_all_pins_conform_equally() {
        let c = GripperConfig::default();
        let s = adapted(&c, &flat(3.0), 0.0);
        assert_eq!(s.phase, Phase::Adapt);
        assert_eq!(s.contact_count(), 21);
        let r0 = s.pins[0].retraction_mm;
        assert!(s.pins.iter().all(|p| p.retraction_mm == r0));
        assert_eq!(r0, c.h_offset_mm);
    }

    #[test]
    fn convex_block_retracts_middle_pins() {
        let c = GripperConfig::default();
        let hf = make_recognition_block(ShapeKind::Convex);
        let s = adapted(&c, &hf, 0.0);
        for k in 1..=3 {
            let edge = s.pin(1, k).unwrap().retraction_mm;
            for j in 3..=5 {
                let mid = s.pin(j, k).unwrap().retraction_mm;
                assert!((mid - edge - 20.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pin_over_chasm_stays_extended() {
        let c = GripperConfig::default();
        let chasm = Profile::Block {
            kind: ShapeKind::Concave,
            x0: 40.0,
            x1: 60.0,
            height: 100.0,
        };
        let hf = Heightfield::from_profile([0.0, 0.0], 1.0, 121, 71, chasm).unwrap();
        let s = adapt(&c, &GripperState::new(&c, Pose::new(0.0, 80.0)), &hf).unwrap();
        let p = s.pin(4, 2).unwrap(); // x = 56, over the chasm
        assert!(!p.in_contact);
        assert_eq!(p.retraction_mm, 0.0);
        assert!(s.pin(1, 2).unwrap().in_contact);
    }

    #[test]
    fn adapt_reports_footprint_escape_and_phase_errors() {
        let c = GripperConfig::default();
        let hf = make_recognition_block(ShapeKind::Convex);
        let s = GripperState::new(&c, Pose::new(50.0, 0.0));
        assert!(matches!(adapt(&c, &s, &hf), Err(SimError::OutsideFootprint { .. })));
        let s = GripperState::new(&c, Pose::new(0.0, -30.0));
        assert!(matches!(adapt(&c, &s, &hf), Err(SimError::PressTooDeep { .. })));
        let s = adapted(&c, &hf, 0.0);
        assert!(matches!(adapt(&c, &s, &hf), Err(SimError::Phase { .. })));
        let mut rng = SimRng::seed_from_u64(0);
        let fresh = GripperState::new(&c, Pose::new(0.0, 0.0));
        assert!(lock(&c, &fresh, &hf, &AsperityModel::default(), &mut rng).is_err());
    }

    #[test]
    fn press_height_never_bottoms_out() {
        let c = GripperConfig::default();
        let hf = make_recognition_block(ShapeKind::Concave);
        let z = press_height(&c, &hf, 0.0, &PressPolicy::default()).unwrap();
        let s = adapt(&c, &GripperState::new(&c, Pose::new(0.0, z)), &hf).unwrap();
        let in_window = s
            .pins
            .iter()
            .filter(|p| p.retraction_mm >= c.h_offset_mm && p.retraction_mm <= c.travel_mm())
            .count();
        assert_eq!(in_window, 21);
        let floor = PressPolicy {
            min_z_mm: Some(z + 5.0),
            ..PressPolicy::default()
        };
        assert_eq!(press_height(&c, &hf, 0.0, &floor).unwrap(), z + 5.0);
    }

    #[test]
    fn flat_terrain_nothing_to_hook() {
        let c = GripperConfig::default();
        let hf = flat(0.0);
        let s = adapted(&c, &hf, 0.0);
        let mut rng = SimRng::seed_from_u64(1);
        let s = lock(&c, &s, &hf, &AsperityModel::default(), &mut rng).unwrap();
        assert_eq!(s.phase, Phase::Lock);
        assert!(s.pins.iter().all(|p| p.locked));
        for p in &s.pins {
            assert_eq!(p.front.delta_mm, 0.0);
            assert_eq!(p.back.delta_mm, 0.0);
            assert_eq!(p.front.gap_mm, c.holder_slide_max_mm);
            assert!(!p.any_engaged());
        }
    }

    fn locked_wedge(phi: f64, seed: u64) -> (GripperConfig, GripperState) {
        let c = GripperConfig::default();
        let hf = make_wedge(&WedgeSpec::new(phi), 1.0).unwrap();
        let s = adapted(&c, &hf, 70.0 - 4.0 * c.x_pitch_mm + 3.0);
        let mut rng = SimRng::seed_from_u64(seed);
        let s = lock(&c, &s, &hf, &AsperityModel::default(), &mut rng).unwrap();
        (c, s)
    }

    #[test]
    fn convex_wedge_is_pinched_from_outside() {
        let (_, s) = locked_wedge(60.0, 2);
        // left of the crest only front halves bear uphill, right only back
        let mut any = false;
        for p in &s.pins {
            if p.x_mm < 63.0 {
                assert_eq!(p.back.delta_mm, 0.0);
                any |= p.front.delta_mm > 0.0;
            }
            if p.x_mm > 77.0 {
                assert_eq!(p.front.delta_mm, 0.0);
                any |= p.back.delta_mm > 0.0;
            }
        }
        assert!(any);
    }

    #[test]
    fn concave_notch_is_expanded_from_inside() {
        let (_, s) = locked_wedge(-60.0, 2);
        let inside: Vec<_> = s.pins.iter().filter(|p| (p.x_mm - 70.0).abs() < 18.5).collect();
        assert!(!inside.is_empty());
        assert!(inside.iter().any(|p| p.front.delta_mm > 0.0 || p.back.delta_mm > 0.0));
        // pins on the rim see the ground fall away in both directions
        for p in s.pins.iter().filter(|p| (p.x_mm - 70.0).abs() > 26.0) {
            assert_eq!(p.front.delta_mm + p.back.delta_mm, 0.0);
        }
    }

    #[test]
    fn delta_only_when_gap_inside_slide() {
        let (c, s) = locked_wedge(30.0, 9);
        for p in &s.pins {
            for h in [p.front, p.back] {
                if h.delta_mm > 0.0 {
                    assert!(p.locked);
                    assert!(h.gap_mm < c.holder_slide_max_mm);
                    assert!((h.delta_mm + h.gap_mm - c.holder_slide_max_mm).abs() < 1e-12);
                }
                if h.engaged {
                    assert!(h.beta_deg.is_some());
                }
            }
        }
    }

    #[test]
    fn release_resets_and_is_idempotent() {
        let c = GripperConfig::default();
        let hf = make_wedge(&WedgeSpec::new(60.0), 1.0).unwrap();
        let (_, locked) = locked_wedge(60.0, 4);
        let released = release(&locked);
        assert_eq!(released.phase, Phase::Approach);
        assert_eq!(released.holder_slide_mm, 0.0);
        assert!(released
            .pins
            .iter()
            .all(|p| !p.locked && p.front.delta_mm == 0.0 && p.back.delta_mm == 0.0));
        assert_eq!(release(&released), released);

        let relocked = {
            let s = adapt(&c, &released, &hf).unwrap();
            let mut rng = SimRng::seed_from_u64(4);
            lock(&c, &s, &hf, &AsperityModel::default(), &mut rng).unwrap()
        };
        assert_eq!(relocked, locked);
    }

    #[test]
    fn translation_equivariance() {
        let c = GripperConfig::default();
        let spec = WedgeSpec::new(-60.0);
        let a = make_wedge(&spec, 1.0).unwrap();
        let shift = 32.0;
        let b = Heightfield::new([shift, 0.0], a.cell_size(), a.cols(), a.rows(), a.values().to_vec()).unwrap();
        let x_g = 17.0;
        let run = |hf: &Heightfield, x: f64| {
            let s = adapted(&c, hf, x);
            let mut rng = SimRng::seed_from_u64(8);
            lock(&c, &s, hf, &AsperityModel::default(), &mut rng).unwrap()
        };
        let sa = run(&a, x_g);
        let sb = run(&b, x_g + shift);
        for (pa, pb) in sa.pins.iter().zip(&sb.pins) {
            assert_eq!(pa.index, pb.index);
            assert!((pa.retraction_mm - pb.retraction_mm).abs() < 1e-9);
            assert_eq!(pa.in_contact, pb.in_contact);
            assert_eq!(pa.front, pb.front);
            assert_eq!(pa.back, pb.back);
        }
    }

    #[test]
    fn wedge_mirror_gives_same_deflections() {
        // pins centred on the wedge axis map onto each other under x -> 140 - x
        let c = GripperConfig::default();
        for phi in [60.0, -60.0, 30.0, 90.0] {
            let hf = make_wedge(&WedgeSpec::new(phi), 1.0).unwrap();
            let s = adapted(&c, &hf, 70.0 - 4.0 * c.x_pitch_mm);
            let mut rng = SimRng::seed_from_u64(0);
            let s = lock(&c, &s, &hf, &AsperityModel::default(), &mut rng).unwrap();
            for p in &s.pins {
                let m = s.pin(8 - p.index.j, p.index.k).unwrap();
                assert!((p.front.delta_mm - m.back.delta_mm).abs() < 1e-9, "phi {phi}");
                assert!((p.front.gap_mm - m.back.gap_mm).abs() < 1e-9);
            }
        }
    }
}
