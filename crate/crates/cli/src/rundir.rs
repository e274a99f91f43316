//! Reading and writing run directories.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bnls::analysis::RunRecord;
use bnls::diagnostics::TimeSeries;
use bnls::grid::{FieldSnapshot, InitialCondition};
use bnls::timestepper::{ArchivedSnapshot, RegridEvent, RunOutput, SimulationConfig};

use crate::error::{io_at, CliError, CliResult};
use crate::manifest::{ArchiveEntry, RunManifest};

pub const SERIES: &str = "series.csv";
pub const REGRIDS: &str = "regrids.json";

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_at(path))?))
}

pub fn write_snapshot(path: &Path, snap: &FieldSnapshot) -> CliResult<()> {
    let mut out = create(path)?;
    snap.write_to(&mut out)?;
    out.flush().map_err(io_at(path))
}

pub fn read_snapshot(path: &Path) -> CliResult<FieldSnapshot> {
    let file = File::open(path).map_err(io_at(path))?;
    FieldSnapshot::read_from(BufReader::new(file)).map_err(|e| CliError::Corrupt { path: path.into(), message: e.to_string() })
}

pub fn archive_name(level: f64) -> String {
    format!("snapshot_L{level:.0e}.dat")
}

/// Writes every output of a simulation and the manifest describing them.
pub fn write_run(dir: &Path, config: &SimulationConfig, out: &RunOutput) -> CliResult<RunManifest> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut manifest = RunManifest::new("simulate", serde_json::to_value(config).expect("config serializes"));
    manifest.wall_seconds = out.wall_seconds;
    manifest.halt = Some(out.halt);
    manifest.message = out.message.clone();

    let mut written: Vec<PathBuf> = Vec::new();
    let path = dir.join("config.toml");
    fs::write(&path, toml::to_string(config).expect("config serializes")).map_err(io_at(&path))?;
    written.push(path);

    let path = dir.join(SERIES);
    let mut f = create(&path)?;
    out.series.write_csv(&mut f)?;
    f.flush().map_err(io_at(&path))?;
    written.push(path);

    let path = dir.join(REGRIDS);
    fs::write(&path, serde_json::to_string_pretty(&out.regrids).expect("regrids serialize")).map_err(io_at(&path))?;
    written.push(path);

    for (name, snap) in [("initial.dat", &out.initial), ("final.dat", &out.final_state.snapshot)] {
        let path = dir.join(name);
        write_snapshot(&path, snap)?;
        written.push(path);
    }
    for a in &out.archive {
        let name = archive_name(a.level);
        let path = dir.join(&name);
        write_snapshot(&path, &a.snapshot)?;
        written.push(path);
        manifest.archive.push(ArchiveEntry { level: a.level, focusing: a.focusing, path: name });
    }
    for p in &written {
        manifest.add_output(dir, p)?;
    }
    manifest.write(dir)?;
    Ok(manifest)
}

/// Loads a simulation directory after checking every checksum.
pub fn read_run(dir: &Path) -> CliResult<RunRecord> {
    if !dir.join(crate::manifest::MANIFEST_NAME).exists() {
        return Err(CliError::Usage(format!("{} holds no run manifest", dir.display())));
    }
    let manifest = RunManifest::read(dir)?;
    if manifest.command != "simulate" {
        return Err(CliError::Usage(format!("{} holds a {} run, not a simulation", dir.display(), manifest.command)));
    }
    manifest.verify(dir)?;
    let manifest_path = dir.join(crate::manifest::MANIFEST_NAME);
    let corrupt = |message: String| CliError::Corrupt { path: manifest_path.clone(), message };
    let config: SimulationConfig = serde_json::from_value(manifest.config.clone()).map_err(|e| corrupt(e.to_string()))?;
    let halt = manifest.halt.ok_or_else(|| corrupt("missing halt reason".into()))?;
    for required in [SERIES, REGRIDS] {
        if !manifest.lists(required) {
            return Err(corrupt(format!("{required} is not listed")));
        }
    }
    let path = dir.join(SERIES);
    let series = TimeSeries::read_csv(BufReader::new(File::open(&path).map_err(io_at(&path))?))
        .map_err(|e| CliError::Corrupt { path: path.clone(), message: e.to_string() })?;
    let path = dir.join(REGRIDS);
    let text = fs::read_to_string(&path).map_err(io_at(&path))?;
    let regrids: Vec<RegridEvent> = serde_json::from_str(&text).map_err(|e| CliError::Corrupt { path, message: e.to_string() })?;
    let mut archive = Vec::new();
    for entry in &manifest.archive {
        if !manifest.lists(&entry.path) {
            return Err(corrupt(format!("{} is not listed", entry.path)));
        }
        let snapshot = read_snapshot(&dir.join(&entry.path))?;
        archive.push(ArchivedSnapshot { level: entry.level, focusing: entry.focusing, snapshot });
    }
    Ok(RunRecord { config, series, archive, halt, regrids })
}

/// The ground-state profile named by the initial condition, if it names a file.
/// Relative paths are taken from `base`.
pub fn ground_state_file(config: &SimulationConfig, base: &Path) -> CliResult<Option<FieldSnapshot>> {
    match &config.initial {
        InitialCondition::GroundState { file: Some(f), .. } => {
            let path = base.join(f);
            Ok(Some(read_snapshot(&path)?))
        }
        _ => Ok(None),
    }
}
