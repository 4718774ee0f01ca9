//! Spine mechanics and the simulated pull test.
//!
//! A deflected elastic tip pushes its spine into the terrain with the
//! cantilever force `P = 3 delta E I / l^3`. Hooked on an asperity of angle
//! beta, the spine holds a vertical load `f` as long as `f < mu' P` with
//! `mu' = (1 + mu tan beta) / (tan beta - mu)`. The gripper as a whole holds
//! while the load stays below the sum of `mu' P` over every engaged spine
//! half.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gripper::{self, GripperConfig, GripperState, Half, PinIndex, Pose, PressPolicy};
use crate::rng::{derive_rng, derive_seed, stream};
use crate::terrain::{make_wedge, AsperityModel, Heightfield, WedgeSpec};

/// Width of the band above `atan(mu)` treated as self-locking (rad).
pub const SINGULARITY_EPS_RAD: f64 = 1e-5;

/// Cantilever pushing force in N for a tip deflection of `delta_mm`.
pub fn pushing_force(delta_mm: f64, e_pa: f64, i_m4: f64, l_m: f64) -> Result<f64> {
    for (name, v) in [("E", e_pa), ("I", i_m4), ("l", l_m)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SimError::param(name, format!("must be > 0, got {v}")));
        }
    }
    if !(delta_mm >= 0.0 && delta_mm.is_finite()) {
        return Err(SimError::param("delta", format!("must be >= 0, got {delta_mm}")));
    }
    Ok(3.0 * (delta_mm * 1e-3) * e_pa * i_m4 / l_m.powi(3))
}

/// Local friction coefficient of a spine on an asperity of angle `beta_deg`.
///
/// Returns exactly `mu` at 90 deg. Angles within [`SINGULARITY_EPS_RAD`] of
/// `atan(mu)` (or below it) are self-locking and reported as an error.
pub fn local_friction(mu: f64, beta_deg: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(SimError::param("mu", format!("must be > 0, got {mu}")));
    }
    if !(beta_deg <= 90.0) {
        return Err(SimError::param("beta", format!("must be <= 90 deg, got {beta_deg}")));
    }
    if beta_deg == 90.0 {
        return Ok(mu);
    }
    let beta = beta_deg.to_radians();
    if beta <= mu.atan() + SINGULARITY_EPS_RAD {
        return Err(SimError::SelfLocking { beta_deg, mu });
    }
    let t = beta.tan();
    Ok((1.0 + mu * t) / (t - mu))
}

/// One engaged spine half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactRecord {
    pub pin: PinIndex,
    pub half: Half,
    pub delta_mm: f64,
    pub beta_deg: f64,
    pub pushing_force_n: f64,
    /// `None` when the asperity is self-locking.
    pub mu_prime: Option<f64>,
    /// Asperity sheared off; the spine only slides with plain friction.
    pub broken: bool,
}

impl ContactRecord {
    /// Largest vertical load this contact carries before slipping.
    pub fn capacity(&self, asperity: &AsperityModel) -> f64 {
        if self.broken {
            return asperity.mu * self.pushing_force_n;
        }
        match self.mu_prime {
            None => asperity.breakage_force_n,
            Some(m) => (m * self.pushing_force_n).min(asperity.breakage_force_n),
        }
    }

    /// Whether the capacity is set by asperity breakage rather than friction.
    pub fn breakage_limited(&self, asperity: &AsperityModel) -> bool {
        !self.broken
            && self
                .mu_prime
                .is_none_or(|m| m * self.pushing_force_n >= asperity.breakage_force_n)
    }
}

/// Contact records for every engaged spine half of a locked gripper, in pin
/// order, front half first.
pub fn contacts_from_state(
    config: &GripperConfig,
    state: &GripperState,
    asperity: &AsperityModel,
) -> Result<Vec<ContactRecord>> {
    let mut out = Vec::new();
    for pin in state.pins.iter().filter(|p| p.locked) {
        for half in [Half::Front, Half::Back] {
            let spine = pin.half(half);
            let (true, Some(beta)) = (spine.engaged, spine.beta_deg) else {
                continue;
            };
            out.push(contact(config, asperity, pin.index, half, spine.delta_mm, beta)?);
        }
    }
    Ok(out)
}

fn contact(
    config: &GripperConfig,
    asperity: &AsperityModel,
    pin: PinIndex,
    half: Half,
    delta_mm: f64,
    beta_deg: f64,
) -> Result<ContactRecord> {
    let p = pushing_force(
        delta_mm,
        config.elastic_modulus_pa,
        config.second_moment_m4,
        config.spine_lever_m,
    )?;
    let mu_prime = match local_friction(asperity.mu, beta_deg) {
        Ok(m) => Some(m),
        Err(SimError::SelfLocking { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ContactRecord {
        pin,
        half,
        delta_mm,
        beta_deg,
        pushing_force_n: p,
        mu_prime,
        broken: false,
    })
}

/// Largest vertical load the contacts can hold together: the sum of the
/// per-contact capacities. Each pin contributes one term per engaged half,
/// which is where the factor of two for split pins comes from.
pub fn holding_condition(contacts: &[ContactRecord], asperity: &AsperityModel) -> f64 {
    contacts.iter().map(|c| c.capacity(asperity)).sum()
}

/// What happens once the weakest pin slips under an equally shared load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReleaseModel {
    /// The slipping pin drops out and the rest take up its share; the pull
    /// keeps rising while the survivors can carry it.
    #[default]
    Progressive,
    /// The first slip lets the whole grasp go.
    Brittle,
}

impl std::str::FromStr for ReleaseModel {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "progressive" => Ok(ReleaseModel::Progressive),
            "brittle" => Ok(ReleaseModel::Brittle),
            _ => Err(SimError::param("release_model", format!("unknown model {s:?}"))),
        }
    }
}

/// Outcome of ramping a vertical pull on a set of contacts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Release {
    /// Largest load sustained before the grasp lets go.
    pub load_n: f64,
    /// Pins sharing the load at the start of the pull.
    pub pins: usize,
    /// The pin that slips first.
    pub first_slip: Option<PinIndex>,
}

/// Ramps a vertical load shared equally by the contacting pins. A pin's
/// bound is the sum of its engaged halves' capacities.
pub fn release_load(contacts: &[ContactRecord], asperity: &AsperityModel, model: ReleaseModel) -> Release {
    let mut per_pin: Vec<(PinIndex, f64)> = Vec::new();
    for c in contacts {
        let cap = c.capacity(asperity);
        match per_pin.iter_mut().find(|(p, _)| *p == c.pin) {
            Some(entry) => entry.1 += cap,
            None => per_pin.push((c.pin, cap)),
        }
    }
    per_pin.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let n = per_pin.len();
    let load_n = match (model, per_pin.first()) {
        (_, None) => 0.0,
        (ReleaseModel::Brittle, Some(&(_, weakest))) => weakest * n as f64,
        // after the i weakest pins have slipped, n - i pins share the load
        (ReleaseModel::Progressive, _) => per_pin
            .iter()
            .enumerate()
            .map(|(i, &(_, cap))| cap * (n - i) as f64)
            .fold(0.0, f64::max),
    };
    Release {
        load_n,
        pins: n,
        first_slip: per_pin.first().map(|p| p.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullTestOptions {
    /// Weight of the emulated terrain hanging from the gripper. Grasps that
    /// cannot carry it are scored 0 N.
    pub terrain_weight_n: f64,
    /// Half-width of the uniform placement error of the gripper centre.
    pub placement_jitter_mm: f64,
    pub resolution_mm: f64,
    pub press: PressPolicy,
    pub release: ReleaseModel,
}

impl Default for PullTestOptions {
    fn default() -> Self {
        PullTestOptions {
            terrain_weight_n: 4.9,
            placement_jitter_mm: 7.0,
            resolution_mm: 1.0,
            // grasping presses until every pin touches down or one bottoms out
            press: PressPolicy {
                in_range_fraction: 1.0,
                min_z_mm: None,
            },
            release: ReleaseModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub holding_force_n: f64,
    /// Pins (or fingers) with at least one engaged spine.
    pub contact_count: usize,
    pub per_pin_share_n: f64,
    pub contacts: Vec<ContactRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullTestResult {
    pub phi_deg: f64,
    pub trials: usize,
    pub holding_forces_n: Vec<f64>,
    pub contact_counts: Vec<usize>,
    pub per_pin_share_n: Vec<f64>,
    pub mean_n: f64,
    pub std_n: f64,
}

impl PullTestResult {
    fn from_outcomes(phi_deg: f64, outcomes: Vec<TrialOutcome>) -> Self {
        let forces: Vec<f64> = outcomes.iter().map(|o| o.holding_force_n).collect();
        let (mean_n, std_n) = mean_std(&forces);
        PullTestResult {
            phi_deg,
            trials: outcomes.len(),
            contact_counts: outcomes.iter().map(|o| o.contact_count).collect(),
            per_pin_share_n: outcomes.iter().map(|o| o.per_pin_share_n).collect(),
            holding_forces_n: forces,
            mean_n,
            std_n,
        }
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn score(contacts: Vec<ContactRecord>, asperity: &AsperityModel, opts: &PullTestOptions) -> TrialOutcome {
    let mut contacts = contacts;
    let rel = release_load(&contacts, asperity, opts.release);
    if let Some(pin) = rel.first_slip {
        for c in contacts.iter_mut().filter(|c| c.pin == pin) {
            c.broken = c.breakage_limited(asperity);
        }
    }
    // a grasp too weak for the terrain's own weight drops it
    let held = rel.load_n > 0.0 && rel.load_n >= opts.terrain_weight_n;
    let force = if held { rel.load_n } else { 0.0 };
    TrialOutcome {
        holding_force_n: force,
        contact_count: rel.pins,
        per_pin_share_n: if rel.pins > 0 { force / rel.pins as f64 } else { 0.0 },
        contacts,
    }
}

fn trial_rng(seed: u64, stream_id: u64, phi_deg: f64, trial: usize) -> crate::rng::SimRng {
    derive_rng(derive_seed(seed, stream_id, phi_deg.to_bits()), 0, trial as u64)
}

fn jitter<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    let u: f64 = rng.random();
    (2.0 * u - 1.0) * half_width
}

/// One grasp-and-pull of the pin-array gripper on `terrain`.
pub fn pull_trial<R: Rng + ?Sized>(
    config: &GripperConfig,
    asperity: &AsperityModel,
    terrain: &Heightfield,
    center_x: f64,
    opts: &PullTestOptions,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let centre_pin = (config.pins_per_block + 1) as f64 / 2.0;
    let x_g = center_x - centre_pin * config.x_pitch_mm + jitter(rng, opts.placement_jitter_mm);
    let z_g = gripper::press_height(config, terrain, x_g, &opts.press)?;
    let state = GripperState::new(config, Pose::new(x_g, z_g));
    let state = gripper::adapt(config, &state, terrain)?;
    let state = gripper::lock(config, &state, terrain, asperity, rng)?;
    let contacts = contacts_from_state(config, &state, asperity)?;
    Ok(score(contacts, asperity, opts))
}

fn validate_run(config: &GripperConfig, asperity: &AsperityModel, trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(SimError::param("trials", "must be >= 1"));
    }
    config.validate()?;
    asperity.validate()
}

/// Repeated pull tests on one emulated terrain. Trial `t` draws from a
/// generator derived from `(seed, phi, t)`, so the result is identical
/// however the trials are scheduled.
pub fn pull_test(
    config: &GripperConfig,
    asperity: &AsperityModel,
    spec: &WedgeSpec,
    trials: usize,
    seed: u64,
    opts: &PullTestOptions,
) -> Result<PullTestResult> {
    validate_run(config, asperity, trials)?;
    let terrain = make_wedge(spec, opts.resolution_mm)?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, stream::PULL_TEST, spec.phi_deg, t);
            pull_trial(config, asperity, &terrain, spec.center_x(), opts, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PullTestResult::from_outcomes(spec.phi_deg, outcomes))
}

/// Conventional comparison gripper: spined fingers evenly spaced on a
/// circle that close radially toward the centre.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub fingers: usize,
    pub radius_mm: f64,
    /// Tip deflection once a closing finger meets a face.
    pub preload_mm: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            fingers: 8,
            radius_mm: 30.0,
            preload_mm: 6.0,
        }
    }
}

/// One grasp-and-pull of the radial-finger gripper.
///
/// Each finger rests on the terrain and closes toward the centre. A finger
/// can only hook a face it closes around: one standing lower than the
/// terrain under the centre. Concave features, where the centre is the low
/// point, are never gripped.
pub fn baseline_trial<R: Rng + ?Sized>(
    config: &GripperConfig,
    baseline: &BaselineConfig,
    asperity: &AsperityModel,
    terrain: &Heightfield,
    center: (f64, f64),
    opts: &PullTestOptions,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let cx = center.0 + jitter(rng, opts.placement_jitter_mm);
    let cy = center.1;
    let centre_z = terrain
        .sample(cx, cy)
        .ok_or(SimError::OutsideFootprint { x: cx, y: cy })?;
    let reach = (baseline.radius_mm - 1.0).max(0.0);
    let mut contacts = Vec::new();
    for m in 0..baseline.fingers {
        let theta = std::f64::consts::TAU * m as f64 / baseline.fingers as f64;
        let (x, y) = (
            cx + baseline.radius_mm * theta.cos(),
            cy + baseline.radius_mm * theta.sin(),
        );
        let tip_z = terrain.sample(x, y).ok_or(SimError::OutsideFootprint { x, y })?;
        let dir = (-theta.cos(), -theta.sin());
        let gate: f64 = rng.random();
        let hit = if tip_z < centre_z {
            gripper::march_to_face(
                terrain,
                (x, y),
                dir,
                tip_z + config.spine_height_mm,
                reach,
                config.gap_step_mm,
            )
        } else {
            None
        };
        let (extent, incl) = match hit {
            Some(d) => gripper::probe_face(
                terrain,
                (x + dir.0 * d, y + dir.1 * d),
                dir,
                config.pin_width_mm,
                config.gap_step_mm,
            ),
            None => (0.0, 0.0),
        };
        let beta = asperity.sample_beta(incl, rng);
        if hit.is_some() && gate < config.engage_probability(extent) {
            let finger = PinIndex { j: m + 1, k: 1 };
            contacts.push(contact(
                config,
                asperity,
                finger,
                Half::Front,
                baseline.preload_mm,
                beta,
            )?);
        }
    }
    Ok(score(contacts, asperity, opts))
}

pub fn baseline_pull_test(
    config: &GripperConfig,
    baseline: &BaselineConfig,
    asperity: &AsperityModel,
    spec: &WedgeSpec,
    trials: usize,
    seed: u64,
    opts: &PullTestOptions,
) -> Result<PullTestResult> {
    validate_run(config, asperity, trials)?;
    if baseline.fingers == 0 || !(baseline.radius_mm > 0.0) || !(baseline.preload_mm >= 0.0) {
        return Err(SimError::param(
            "baseline",
            "needs fingers, a positive radius and preload >= 0",
        ));
    }
    let terrain = make_wedge(spec, opts.resolution_mm)?;
    let center = (spec.center_x(), (config.blocks + 1) as f64 / 2.0 * config.y_pitch_mm);
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, stream::BASELINE, spec.phi_deg, t);
            baseline_trial(config, baseline, asperity, &terrain, center, opts, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PullTestResult::from_outcomes(spec.phi_deg, outcomes))
}

/// Per-trial rows: `phi_deg,trial,F_N,n_contacts`.
pub fn write_trials_csv<W: Write>(mut out: W, results: &[PullTestResult]) -> std::io::Result<()> {
    writeln!(out, "phi_deg,trial,F_N,n_contacts")?;
    for r in results {
        for (t, (f, n)) in r.holding_forces_n.iter().zip(&r.contact_counts).enumerate() {
            writeln!(out, "{},{},{:.6},{}", r.phi_deg, t, f, n)?;
        }
    }
    Ok(())
}

/// Summary rows: `phi_deg,mean_F,std_F`.
pub fn write_summary_csv<W: Write>(mut out: W, results: &[PullTestResult]) -> std::io::Result<()> {
    writeln!(out, "phi_deg,mean_F,std_F")?;
    for r in results {
        writeln!(out, "{},{:.6},{:.6}", r.phi_deg, r.mean_n, r.std_n)?;
    }
    Ok(())
}
