use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pinarray::mapping::{bin_average, run_scan};
use pinarray::mechanics::{self, baseline_pull_test, pull_test, PullTestResult};
use pinarray::sensing::{calibrate_bank, recognize_shape};
use pinarray::terrain::{make_mapping_terrain, make_recognition_block, make_wedge, ShapeKind, WedgeSpec};
use pinarray::{SimConfig, SimError};

const UNITS: &str = "Units: lengths in mm, forces in N, angles in degrees. \
The config file keeps the beam constants in SI: elastic_modulus_pa in Pa, \
second_moment_m4 in m^4, spine_lever_m in m.";

/// Pin-array gripper simulator: pull tests, shape recognition and terrain mapping.
#[derive(Parser, Debug)]
#[command(name = "pinarray", version, after_help = UNITS)]
struct Cli {
    /// Print the default configuration file and exit.
    #[arg(long)]
    dump_default_config: bool,

    /// Flat key-value config file; missing keys keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grasp-and-pull campaign on the emulated wedge terrains, proposed
    /// gripper against the finger baseline.
    PullTest {
        /// Face inclinations in degrees (repeat or comma-separate); negative is concave.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        phi: Vec<f64>,
        /// Trials per inclination and gripper.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Repeated presses on a 20 mm block and convex/concave classification.
    Recognize {
        #[arg(long, default_value = "convex")]
        shape: ShapeKind,
        #[arg(long)]
        presses: Option<usize>,
        /// Use noiseless sensors.
        #[arg(long)]
        no_noise: bool,
    },
    /// Translate-press-read scan of the mapping terrain.
    Map {
        #[arg(long)]
        steps: Option<usize>,
        /// Translation per step in mm.
        #[arg(long)]
        dx_mm: Option<f64>,
        #[arg(long)]
        no_noise: bool,
        /// Drop readings outside the calibrated resistance range.
        #[arg(long)]
        exclude_clamped: bool,
    },
    /// Write a terrain heightfield grid.
    GenTerrain {
        #[arg(long, value_enum, default_value = "wedge")]
        kind: TerrainKind,
        /// Face inclination of a wedge terrain in degrees.
        #[arg(long, default_value_t = 60.0, allow_hyphen_values = true)]
        phi: f64,
    },
    /// Print the effective configuration (defaults merged with --config).
    DumpConfig,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TerrainKind {
    Wedge,
    Convex,
    Concave,
    Mapping,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn config_err(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        err: err.into(),
    }
}

fn sim_err(err: SimError) -> Failure {
    let code = match err {
        SimError::Config(_) | SimError::InvalidParameter { .. } => 2,
        _ => 3,
    };
    Failure { code, err: err.into() }
}

fn io_err(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        err: err.into(),
    }
}

/// Files of one command, written only after everything was computed.
struct Outputs {
    files: Vec<(&'static str, Vec<u8>)>,
    stdout: String,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            files: Vec::new(),
            stdout: String::new(),
        }
    }

    fn add(
        &mut self,
        name: &'static str,
        write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<(), Failure> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(io_err)?;
        self.files.push((name, buf));
        Ok(())
    }
}

fn check_targets(dir: &Path, names: &[&str], force: bool) -> Result<(), Failure> {
    if force {
        return Ok(());
    }
    let existing: Vec<String> = names
        .iter()
        .map(|n| dir.join(n))
        .filter(|p| p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if existing.is_empty() {
        Ok(())
    } else {
        Err(config_err(anyhow!(
            "refusing to overwrite {} (pass --force)",
            existing.join(", ")
        )))
    }
}

fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(io_err)?;
    for (name, bytes) in &outputs.files {
        let path = dir.join(name);
        fs::write(&path, bytes)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(io_err)?;
    }
    Ok(())
}

fn pull_files() -> Vec<&'static str> {
    vec![
        "pull_trials_proposed.csv",
        "pull_trials_baseline.csv",
        "pull_summary_proposed.csv",
        "pull_summary_baseline.csv",
        "pull_comparison.csv",
    ]
}

fn cmd_pull_test(cfg: &SimConfig, seed: u64, phi: &[f64]) -> Result<Outputs, Failure> {
    let phis = if phi.is_empty() {
        cfg.pull_phis_deg.clone()
    } else {
        phi.to_vec()
    };
    let opts = cfg.pull_options();
    let mut proposed = Vec::new();
    let mut baseline = Vec::new();
    for &p in &phis {
        let spec = WedgeSpec::new(p);
        proposed.push(pull_test(&cfg.gripper, &cfg.asperity, &spec, cfg.pull_trials, seed, &opts).map_err(sim_err)?);
        baseline.push(
            baseline_pull_test(
                &cfg.gripper,
                &cfg.baseline(),
                &cfg.asperity,
                &spec,
                cfg.pull_trials,
                seed,
                &opts,
            )
            .map_err(sim_err)?,
        );
    }
    let mut out = Outputs::new();
    out.add("pull_trials_proposed.csv", |b| {
        mechanics::write_trials_csv(b, &proposed)
    })?;
    out.add("pull_trials_baseline.csv", |b| {
        mechanics::write_trials_csv(b, &baseline)
    })?;
    out.add("pull_summary_proposed.csv", |b| {
        mechanics::write_summary_csv(b, &proposed)
    })?;
    out.add("pull_summary_baseline.csv", |b| {
        mechanics::write_summary_csv(b, &baseline)
    })?;
    out.add("pull_comparison.csv", |b| write_comparison(b, &proposed, &baseline))?;
    let mut table = format!("{:>8} {:>20} {:>20}\n", "phi_deg", "proposed F (N)", "baseline F (N)");
    for (p, b) in proposed.iter().zip(&baseline) {
        table += &format!(
            "{:>8} {:>11.2} ± {:<6.2} {:>11.2} ± {:<6.2}\n",
            p.phi_deg, p.mean_n, p.std_n, b.mean_n, b.std_n
        );
    }
    out.stdout = table;
    Ok(out)
}

fn write_comparison(b: &mut Vec<u8>, proposed: &[PullTestResult], baseline: &[PullTestResult]) -> std::io::Result<()> {
    use std::io::Write;
    writeln!(
        b,
        "phi_deg,proposed_mean_F,proposed_std_F,baseline_mean_F,baseline_std_F"
    )?;
    for (p, q) in proposed.iter().zip(baseline) {
        writeln!(
            b,
            "{},{:.6},{:.6},{:.6},{:.6}",
            p.phi_deg, p.mean_n, p.std_n, q.mean_n, q.std_n
        )?;
    }
    Ok(())
}

fn cmd_recognize(cfg: &SimConfig, seed: u64, shape: ShapeKind, no_noise: bool) -> Result<Outputs, Failure> {
    let mut calib = calibrate_bank(&cfg.gripper, &cfg.sensor, seed).map_err(sim_err)?;
    if no_noise {
        calib = calib.noiseless();
    }
    let terrain = make_recognition_block(shape);
    let rec = recognize_shape(
        &cfg.gripper,
        &calib,
        &terrain,
        0.0,
        &cfg.recognition_press(),
        cfg.recognition_presses,
        seed,
    )
    .map_err(sim_err)?;
    let mut out = Outputs::new();
    out.add("recognition.csv", |b| rec.write_csv(b))?;
    out.add("calibration.csv", |b| calib.write_csv(b))?;
    let line = format!("{}\n", rec.shape);
    out.add("classification.txt", |b| {
        b.extend_from_slice(line.as_bytes());
        Ok(())
    })?;
    out.stdout = format!("{rec}\nmean pin std = {:.3} mm\n", rec.mean_std_mm());
    Ok(out)
}

fn cmd_map(cfg: &SimConfig, seed: u64, no_noise: bool, exclude_clamped: bool) -> Result<Outputs, Failure> {
    let mut calib = calibrate_bank(&cfg.gripper, &cfg.sensor, seed).map_err(sim_err)?;
    if no_noise {
        calib = calib.noiseless();
    }
    let terrain = make_mapping_terrain();
    let mut cloud = run_scan(&cfg.gripper, &calib, &terrain, &cfg.scan_plan(), seed).map_err(sim_err)?;
    if exclude_clamped || !cfg.include_clamped {
        cloud = cloud.without_clamped();
    }
    let map = bin_average(&cloud, &terrain, &cfg.grid()).map_err(sim_err)?;
    let mut out = Outputs::new();
    out.add("scan_points.ply", |b| cloud.write_ply(b))?;
    out.add("scan_points.csv", |b| cloud.write_csv(b))?;
    out.add("grid.csv", |b| map.write_csv(b))?;
    out.add("summary.txt", |b| map.write_summary(b))?;
    let summary = String::from_utf8(out.files[3].1.clone()).expect("summary is ASCII");
    let e_bar = summary.lines().nth(1).unwrap_or_default();
    out.stdout = format!("points = {}\ne_bar_mm = {e_bar}\n", cloud.len());
    Ok(out)
}

fn cmd_gen_terrain(cfg: &SimConfig, kind: TerrainKind, phi: f64) -> Result<Outputs, Failure> {
    let (name, terrain) = match kind {
        TerrainKind::Wedge => (
            "terrain_wedge.txt",
            make_wedge(&WedgeSpec::new(phi), cfg.terrain_resolution_mm).map_err(sim_err)?,
        ),
        TerrainKind::Convex => ("terrain_convex.txt", make_recognition_block(ShapeKind::Convex)),
        TerrainKind::Concave => ("terrain_concave.txt", make_recognition_block(ShapeKind::Concave)),
        TerrainKind::Mapping => ("terrain_mapping.txt", make_mapping_terrain()),
    };
    let mut out = Outputs::new();
    out.add(name, |b| terrain.write_grid(b))?;
    out.stdout = format!("{} x {} nodes\n", terrain.cols(), terrain.rows());
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.dump_default_config {
        print!("{}", SimConfig::default_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(config_err(anyhow!("no command given (see --help)")));
    };
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::load(path).map_err(config_err)?,
        None => SimConfig::default(),
    };
    let names: Vec<&'static str> = match &command {
        Command::PullTest { trials, .. } => {
            if let Some(t) = trials {
                cfg.pull_trials = *t;
            }
            pull_files()
        }
        Command::Recognize { presses, .. } => {
            if let Some(p) = presses {
                cfg.recognition_presses = *p;
            }
            vec!["recognition.csv", "calibration.csv", "classification.txt"]
        }
        Command::Map { steps, dx_mm, .. } => {
            if let Some(s) = steps {
                cfg.scan_steps = *s;
            }
            if let Some(dx) = dx_mm {
                cfg.scan_dx_mm = *dx;
            }
            vec!["scan_points.ply", "scan_points.csv", "grid.csv", "summary.txt"]
        }
        Command::GenTerrain { kind, .. } => vec![match kind {
            TerrainKind::Wedge => "terrain_wedge.txt",
            TerrainKind::Convex => "terrain_convex.txt",
            TerrainKind::Concave => "terrain_concave.txt",
            TerrainKind::Mapping => "terrain_mapping.txt",
        }],
        Command::DumpConfig => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
    };
    cfg.validate().map_err(config_err)?;
    check_targets(&cli.out, &names, cli.force)?;

    let outputs = match command {
        Command::PullTest { phi, .. } => {
            if let Some(p) = phi.iter().find(|p| !(-90.0..=90.0).contains(*p)) {
                return Err(config_err(anyhow!("--phi {p} lies outside [-90, 90]")));
            }
            cmd_pull_test(&cfg, cli.seed, &phi)?
        }
        Command::Recognize { shape, no_noise, .. } => cmd_recognize(&cfg, cli.seed, shape, no_noise)?,
        Command::Map {
            no_noise,
            exclude_clamped,
            ..
        } => cmd_map(&cfg, cli.seed, no_noise, exclude_clamped)?,
        Command::GenTerrain { kind, phi } => cmd_gen_terrain(&cfg, kind, phi)?,
        Command::DumpConfig => unreachable!(),
    };
    write_outputs(&cli.out, &outputs)?;
    print!("{}", outputs.stdout);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
