//! `bnls`: ground states, collapse simulations and their analysis.

mod error;
mod manifest;
mod rundir;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;

use bnls::analysis::{analyze, write_figure_tables, AnalysisReport, AnalysisSettings, Regime, RunRecord};
use bnls::asymptotics::{gn_bound_check, random_band_limited_field};
use bnls::fd::RadialOperators;
use bnls::grid::{FieldSnapshot, InitialCondition, RadialGrid};
use bnls::presets::{ground_state_preset, simulation_preset, GroundStateConfig};
use bnls::srm::{export_ground_state, radial_profile, solve_ground_state};
use bnls::timestepper::{ground_state_profile, run_simulation, SimulationConfig};
use bnls::BnlsError;

use error::{io_at, CliError, CliResult};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "bnls", version, about = "Biharmonic NLS ground states, collapse runs and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a shipped configuration.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a ground state and write its radial profile and metadata.
    Groundstate {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Also check H ≥ 0 on 50 random fields below the critical power, seeded with this value.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a simulation and write its series, snapshots and manifest.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the focusing level at which the run stops.
        #[arg(long)]
        l_stop: Option<f64>,
    },
    /// Analyse a simulation directory; writes `analysis/` inside it.
    Analyze {
        run_dir: PathBuf,
    },
    /// Simulate, analyse and print a summary.
    Report {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        l_stop: Option<f64>,
    },
    /// List the shipped configurations.
    Presets,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_at(path))
}

/// The simulation config and the directory relative paths in it refer to.
fn load_simulation(source: &Source) -> CliResult<(SimulationConfig, PathBuf)> {
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let cfg = SimulationConfig::from_toml(&read_text(path)?)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((cfg, base))
        }
        (None, Some(name)) => Ok((simulation_preset(name)?, PathBuf::from("."))),
        (None, None) => Err(CliError::Usage("pass --config or --preset".into())),
    }
}

fn load_ground_state_config(source: &Source) -> CliResult<GroundStateConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => Ok(GroundStateConfig::from_toml(&read_text(path)?)?),
        (None, Some(name)) => Ok(ground_state_preset(name)?),
        (None, None) => Err(CliError::Usage("pass --config or --preset".into())),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))
}

#[derive(serde::Serialize)]
struct GnSummary {
    seed: u64,
    fields: usize,
    power_fraction: f64,
    min_hamiltonian: f64,
    all_hold: bool,
}

fn gn_check(profile: &FieldSnapshot, p_cr: f64, seed: u64) -> CliResult<GnSummary> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let support = 0.5 * profile.grid().r_max();
    let grid = std::sync::Arc::new(RadialGrid::uniform(801, 2.0 * support, profile.dim())?);
    let ops = RadialOperators::assemble(std::sync::Arc::clone(&grid))?;
    let (fields, fraction) = (50, 0.9);
    let mut min_h = f64::INFINITY;
    let mut all = true;
    for _ in 0..fields {
        let f = random_band_limited_field(&mut rng, std::sync::Arc::clone(&grid), profile.sigma(), 6, support)?;
        let c = gn_bound_check(&f, &ops, p_cr, fraction, 0.0)?;
        min_h = min_h.min(c.hamiltonian);
        all &= c.holds;
    }
    Ok(GnSummary { seed, fields, power_fraction: fraction, min_hamiltonian: min_h, all_hold: all })
}

fn cmd_groundstate(source: &Source, out_dir: &Path, seed: Option<u64>) -> CliResult<ExitCode> {
    let cfg = load_ground_state_config(source)?;
    create_dir(out_dir)?;
    let start = Instant::now();
    let settings = cfg.settings();
    let gs = solve_ground_state(cfg.dim, cfg.sigma, &settings)?;
    let profile = radial_profile(&gs, settings.points / 2 + 1)?;
    let meta = export_ground_state(&gs, &profile, out_dir, "ground_state")?;
    let mut manifest = RunManifest::new("groundstate", serde_json::to_value(&cfg).expect("config serializes"));
    manifest.add_output(out_dir, &out_dir.join("ground_state.dat"))?;
    manifest.add_output(out_dir, &out_dir.join("ground_state.json"))?;
    if let Some(seed) = seed {
        if !meta.critical {
            return Err(CliError::Usage("--seed needs a critical ground state (σd = 4)".into()));
        }
        let summary = gn_check(&profile.to_snapshot(cfg.sigma)?, meta.power, seed)?;
        let path = out_dir.join("gn_check.json");
        fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes")).map_err(io_at(&path))?;
        manifest.add_output(out_dir, &path)?;
        println!("H >= 0 on {} random fields at {} P_cr: {}", summary.fields, summary.power_fraction, summary.all_hold);
    }
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.write(out_dir)?;
    let label = if meta.critical { "P_cr" } else { "power" };
    println!("d={} sigma={} {label}={:.6} residual={:.2e} iterations={}", meta.dim, meta.sigma, meta.power, meta.residual, meta.iterations);
    Ok(ExitCode::SUCCESS)
}

fn simulate(source: &Source, out_dir: &Path, l_stop: Option<f64>) -> CliResult<(SimulationConfig, bnls::timestepper::RunOutput)> {
    let (mut cfg, base) = load_simulation(source)?;
    if let Some(l) = l_stop {
        cfg.l_stop = l;
        cfg.validate()?;
    }
    // store an absolute ground-state path so that the run directory stands alone
    if let InitialCondition::GroundState { file: Some(f), .. } = &mut cfg.initial {
        let path = base.join(&*f);
        *f = fs::canonicalize(&path).map_err(io_at(&path))?.to_string_lossy().into_owned();
    }
    let gs = rundir::ground_state_file(&cfg, &base)?;
    let out = run_simulation(&cfg, gs.as_ref())?;
    rundir::write_run(out_dir, &cfg, &out)?;
    Ok((cfg, out))
}

fn cmd_simulate(source: &Source, out_dir: &Path, l_stop: Option<f64>) -> CliResult<ExitCode> {
    let (_, out) = simulate(source, out_dir, l_stop)?;
    let last = out.series.last().expect("a run records its first step");
    println!(
        "halt={:?} steps={} t={:.10} L={:.3e} wall={:.1}s",
        out.halt,
        out.final_state.step,
        last.t.value(),
        last.focusing,
        out.wall_seconds
    );
    if let Some(m) = &out.message {
        eprintln!("{m}");
    }
    Ok(ExitCode::from(out.halt.exit_code() as u8))
}

fn ground_state_for(record: &RunRecord) -> CliResult<Option<FieldSnapshot>> {
    if Regime::of(record.config.dim, record.config.sigma) != Regime::Critical {
        return Ok(None);
    }
    if let Some(gs) = rundir::ground_state_file(&record.config, Path::new("."))? {
        return Ok(Some(gs));
    }
    Ok(Some(ground_state_profile(&record.config)?))
}

fn cmd_analyze_dir(run_dir: &Path) -> CliResult<AnalysisReport> {
    let record = rundir::read_run(run_dir)?;
    let gs = ground_state_for(&record)?;
    let report = analyze(&record, gs.as_ref(), &AnalysisSettings::default())?;
    let dir = run_dir.join("analysis");
    create_dir(&dir)?;
    let mut manifest = RunManifest::new("analyze", serde_json::to_value(AnalysisSettings::default()).expect("settings serialize"));
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes")).map_err(io_at(&path))?;
    manifest.add_output(&dir, &path)?;
    for table in write_figure_tables(&record, &report, &dir)? {
        manifest.add_output(&dir, &table)?;
    }
    manifest.write(&dir)?;
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.5}"))
}

fn print_summary(r: &AnalysisReport) {
    println!("{} (d={}, sigma={}, {:?}): halt={:?}, L {:.3e} -> {:.3e}", r.name, r.dim, r.sigma, r.regime, r.halt, r.initial_focusing, r.final_focusing);
    if let Some(f) = &r.blowup_fit {
        println!("  L ~ {:.5} (T_c - t)^{:.5}, T_c = {:.6}", f.kappa, f.p, f.collapse_time());
    }
    if let Some(l) = &r.l3lt {
        println!("  L^3 L_t -> {:.5} (kappa {:.5}), slope over last decade {:+.2e}", l.limit, l.kappa, l.trend_slope);
    }
    let c = &r.conservation;
    println!("  drifts: power {:.2e}, J {:.2e}, H {:.2e}", c.power_drift, c.dilation_drift, c.hamiltonian_drift);
    if let Some(d) = &r.profiles.late {
        println!("  profile distance L={:.0e} vs {:.0e}: {:.2e}", d.focusing_a, d.focusing_b, d.distance);
    }
    if let Some(d) = r.profiles.ground_state_distance {
        println!("  distance to ground state: {d:.2e}");
    }
    if let Some(f) = &r.farfield {
        println!("  far field ~ rho^{:.4}", f.exponent);
    }
    if let Some(b) = &r.bifurcation {
        for row in &b.rows {
            println!("  1/L = {:.0}: rho* = {}, r_c = {}", row.inverse_focusing, fmt_opt(row.rho_star), fmt_opt(row.r_c));
        }
    }
    println!("  amplitude growth {:.3e}", r.amplitude_growth);
}

fn cmd_report(source: &Source, out_dir: &Path, l_stop: Option<f64>) -> CliResult<ExitCode> {
    let (_, out) = simulate(source, out_dir, l_stop)?;
    let report = cmd_analyze_dir(out_dir)?;
    print_summary(&report);
    Ok(ExitCode::from(out.halt.exit_code() as u8))
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Groundstate { source, out_dir, seed } => cmd_groundstate(&source, &out_dir, seed),
        Command::Simulate { source, out_dir, l_stop } => cmd_simulate(&source, &out_dir, l_stop),
        Command::Analyze { run_dir } => {
            print_summary(&cmd_analyze_dir(&run_dir)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { source, out_dir, l_stop } => cmd_report(&source, &out_dir, l_stop),
        Command::Presets => {
            for name in bnls::presets::ground_state_names().chain(bnls::presets::simulation_names()) {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Exit statuses outside the halt codes: 1 run failure, 2 bad input, 8 damaged run directory.
fn failure_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => 2,
        CliError::Core(BnlsError::InvalidConfig(_) | BnlsError::Parse(_) | BnlsError::UnsupportedDimension(_)) => 2,
        CliError::Checksum { .. } | CliError::Corrupt { .. } => 8,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}
