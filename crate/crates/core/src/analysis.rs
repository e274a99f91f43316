//! Post-processing of a finished run: fits, drifts, profile comparisons and
//! the CSV tables behind each plot.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asymptotics::{profile_hamiltonian, relative_residual, selfsimilar_profile, selfsimilar_residual, ProfileOperator};
use crate::diagnostics::{
    bifurcation_position, farfield_decay_fit, fit_blowup, h2_focusing_factor, l3lt_series, power_in_ball, profile_distance,
    rescale_snapshot, BlowupFit, FarFieldFit, FitWindow, RescaledProfile, TimeSeries,
};
use crate::error::{BnlsError, Result};
use crate::fd::RadialOperators;
use crate::grid::FieldSnapshot;
use crate::timestepper::{ArchivedSnapshot, HaltReason, RegridEvent, RunOutput, SimulationConfig};

/// What the analysis needs from a run, whether fresh or read back from disk.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: SimulationConfig,
    pub series: TimeSeries,
    pub archive: Vec<ArchivedSnapshot>,
    pub halt: HaltReason,
    pub regrids: Vec<RegridEvent>,
}

impl RunRecord {
    pub fn new(config: &SimulationConfig, out: &RunOutput) -> Self {
        Self {
            config: config.clone(),
            series: out.series.clone(),
            archive: out.archive.clone(),
            halt: out.halt,
            regrids: out.regrids.clone(),
        }
    }

    /// Archived snapshot closest to `level` (in log L), within a factor 1.5.
    pub fn snapshot_near(&self, level: f64) -> Option<&ArchivedSnapshot> {
        self.archive
            .iter()
            .filter(|a| (a.focusing / level).ln().abs() < 1.5f64.ln())
            .min_by(|a, b| (a.focusing / level).ln().abs().total_cmp(&(b.focusing / level).ln().abs()))
    }

    /// The most focused archived snapshot.
    pub fn deepest(&self) -> Option<&ArchivedSnapshot> {
        self.archive.iter().min_by(|a, b| a.focusing.total_cmp(&b.focusing))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSettings {
    pub fit_window: FitWindow,
    /// Profiles are compared on `ρ ≤ profile_rho_max`.
    pub profile_rho_max: f64,
    pub farfield_rho: (f64, f64),
    /// Relative separation that marks the bifurcation point.
    pub bifurcation_threshold: f64,
    /// Window for the self-similar residual.
    pub residual_rho_max: f64,
    /// Extent and resolution of the extracted self-similar profile.
    pub profile_extent: f64,
    pub profile_nodes: usize,
    /// The Hamiltonian drift is measured while `L ≥ resolved_fraction · L(0)`.
    pub resolved_fraction: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            fit_window: FitWindow::default(),
            profile_rho_max: 4.0,
            farfield_rho: (10.0, 100.0),
            bifurcation_threshold: 0.05,
            residual_rho_max: 10.0,
            profile_extent: 200.0,
            profile_nodes: 8001,
            resolved_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn of(dim: usize, sigma: f64) -> Self {
        let s = sigma * dim as f64;
        if (s - 4.0).abs() < 1e-9 {
            Regime::Critical
        } else if s < 4.0 {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// `max |P - P(0)| / P(0)`.
    pub power_drift: f64,
    /// `max |J - J(0)|` over the scale `max |∫ r Im(ψ*ψ_r)|`; `J` is invariant only when `σd = 4`.
    pub dilation_drift: f64,
    pub dilation_conserved: bool,
    /// `max |H - H(0)| / |H(0)|` while `L ≥ resolved_fraction · L(0)`.
    pub hamiltonian_drift: f64,
    /// `max |H - H(0)| / ‖Δψ‖²` over the whole run: `H` is a difference of
    /// terms growing like `L⁻⁴`, so this is the scale its error is set by.
    pub hamiltonian_drift_kinetic: f64,
    pub max_regrid_power_change: f64,
    pub max_spacing_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L3LtSummary {
    pub kappa: f64,
    pub limit: f64,
    pub trend_slope: f64,
    pub trend_start: f64,
    pub trend_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistance {
    pub focusing_a: f64,
    pub focusing_b: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    /// Successive archived decades.
    pub successive: Vec<ProfileDistance>,
    /// `L = 10⁻³` against the deepest snapshot.
    pub late: Option<ProfileDistance>,
    /// The deepest rescaled profile against the rescaled ground state.
    pub ground_state_distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRow {
    pub inverse_focusing: f64,
    pub rho_star: Option<f64>,
    pub r_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub reference_focusing: f64,
    pub rows: Vec<BifurcationRow>,
    /// Mean of `r_c = ρ*·L` over the rows where it was found.
    pub r_c_mean: Option<f64>,
    /// `max |r_c / mean - 1|`: zero when `ρ*` is exactly linear in `1/L`.
    pub linearity_spread: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarReport {
    pub focusing: f64,
    /// Length scale matched to the phase rate at the origin.
    pub matched_scale: f64,
    /// Blowup rate converted to the matched scale.
    pub kappa: f64,
    /// `sup |residual| / sup |B|` on `ρ ≤ residual_rho_max`.
    pub residual: f64,
    /// The same with `κ = 0`.
    pub residual_unit_rate: f64,
    /// `|H[B]| / ‖Δ_ρ B‖²`.
    pub hamiltonian_ratio: f64,
    pub divergent_tail: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// `K` such that `r < K ℓ` holds 99.9% of the ground state's power.
    pub radius_factor: f64,
    pub ball_power: f64,
    pub critical_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub name: String,
    pub dim: usize,
    pub sigma: f64,
    pub regime: Regime,
    pub halt: HaltReason,
    pub samples: usize,
    pub t_end: f64,
    pub initial_focusing: f64,
    pub final_focusing: f64,
    /// `max|ψ|` at the end over `max|ψ|` at the start.
    pub amplitude_growth: f64,
    pub conservation: ConservationReport,
    pub blowup_fit: Option<BlowupFit>,
    pub fit_error: Option<String>,
    pub l3lt: Option<L3LtSummary>,
    /// `max ℓ(t) (T_c - t)^{-1/4}` over the fit window.
    pub lower_bound_ratio: Option<f64>,
    pub profiles: ProfileReport,
    pub farfield: Option<FarFieldFit>,
    pub bifurcation: Option<BifurcationReport>,
    pub selfsimilar: Option<SelfSimilarReport>,
    pub concentration: Option<ConcentrationReport>,
}

fn max_relative_drift(values: impl Iterator<Item = f64>, reference: f64, scale: f64) -> f64 {
    values.map(|v| (v - reference).abs()).fold(0.0, f64::max) / scale
}

fn conservation(record: &RunRecord, settings: &AnalysisSettings) -> Result<ConservationReport> {
    let rec = &record.series.records;
    let first = rec.first().ok_or(BnlsError::TooFewSamples { need: 1, got: 0 })?;
    let l0 = first.focusing;
    let power_drift = max_relative_drift(rec.iter().map(|r| r.power), first.power, first.power);
    let h0 = first.hamiltonian;
    let h_scale = h0.abs().max(f64::MIN_POSITIVE);
    let resolved = rec.iter().filter(|r| r.focusing >= settings.resolved_fraction * l0).map(|r| r.hamiltonian);
    let hamiltonian_drift = max_relative_drift(resolved, h0, h_scale);
    let hamiltonian_drift_kinetic =
        rec.iter().filter(|r| r.ell > 0.0).map(|r| (r.hamiltonian - h0).abs() * r.ell.powi(4)).fold(0.0, f64::max);
    // the series holds J = ∫ r Im(ψ*ψ_r) - 4tH(0); the integral alone sets the scale
    let j_scale = rec.iter().map(|r| (r.dilation + 4.0 * r.t.value() * h0).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let dilation_drift = max_relative_drift(rec.iter().map(|r| r.dilation), first.dilation, j_scale);
    Ok(ConservationReport {
        power_drift,
        dilation_drift,
        dilation_conserved: Regime::of(record.config.dim, record.config.sigma) == Regime::Critical,
        hamiltonian_drift,
        hamiltonian_drift_kinetic,
        max_regrid_power_change: record.regrids.iter().map(|e| e.power_change.abs()).fold(0.0, f64::max),
        max_spacing_ratio: record.regrids.iter().map(|e| e.max_spacing_ratio).fold(0.0, f64::max),
    })
}

fn rescaled_archive(record: &RunRecord) -> Result<Vec<RescaledProfile>> {
    let mut out: Vec<RescaledProfile> = record.archive.iter().map(|a| rescale_snapshot(&a.snapshot)).collect::<Result<_>>()?;
    out.sort_by(|a, b| b.focusing.total_cmp(&a.focusing));
    Ok(out)
}

fn profile_report(record: &RunRecord, profiles: &[RescaledProfile], ground_state: Option<&FieldSnapshot>, settings: &AnalysisSettings) -> Result<ProfileReport> {
    let rho = settings.profile_rho_max;
    let successive = profiles
        .windows(2)
        .map(|w| Ok(ProfileDistance { focusing_a: w[0].focusing, focusing_b: w[1].focusing, distance: profile_distance(&w[0], &w[1], rho)? }))
        .collect::<Result<Vec<_>>>()?;
    let deepest = profiles.last();
    let late = match (record.snapshot_near(1e-3), deepest) {
        (Some(a), Some(b)) if a.focusing > b.focusing => {
            let a = rescale_snapshot(&a.snapshot)?;
            Some(ProfileDistance { focusing_a: a.focusing, focusing_b: b.focusing, distance: profile_distance(&a, b, rho)? })
        }
        _ => None,
    };
    let ground_state_distance = match (ground_state, deepest) {
        (Some(gs), Some(b)) => Some(profile_distance(b, &rescale_snapshot(gs)?, rho)?),
        _ => None,
    };
    Ok(ProfileReport { successive, late, ground_state_distance })
}

fn bifurcation_report(record: &RunRecord, profiles: &[RescaledProfile], settings: &AnalysisSettings) -> Result<Option<BifurcationReport>> {
    let Some(reference) = profiles.last() else { return Ok(None) };
    let mut rows = Vec::new();
    for level in [1e-1, 1e-2, 1e-3] {
        let Some(a) = record.snapshot_near(level) else { continue };
        if a.focusing <= 10.0 * reference.focusing {
            continue;
        }
        let a = rescale_snapshot(&a.snapshot)?;
        let b = bifurcation_position(&a, reference, settings.bifurcation_threshold, f64::INFINITY)?;
        rows.push(BifurcationRow { inverse_focusing: 1.0 / a.focusing, rho_star: b.rho(), r_c: b.rho().map(|r| r * a.focusing) });
    }
    if rows.is_empty() {
        return Ok(None);
    }
    let found: Vec<f64> = rows.iter().filter_map(|r| r.r_c).collect();
    let (r_c_mean, linearity_spread) = if found.is_empty() {
        (None, None)
    } else {
        let mean = found.iter().sum::<f64>() / found.len() as f64;
        (Some(mean), Some(found.iter().map(|r| (r / mean - 1.0).abs()).fold(0.0, f64::max)))
    };
    Ok(Some(BifurcationReport { reference_focusing: reference.focusing, rows, r_c_mean, linearity_spread }))
}

fn selfsimilar_report(snapshot: &ArchivedSnapshot, kappa: f64, settings: &AnalysisSettings) -> Result<SelfSimilarReport> {
    let ops = RadialOperators::assemble(snapshot.snapshot.shared_grid())?;
    let extracted = selfsimilar_profile(&snapshot.snapshot, &ops, settings.profile_extent, settings.profile_nodes)?;
    let kappa = extracted.matched_kappa(kappa);
    let profile = &extracted.profile;
    let pops = RadialOperators::assemble(profile.shared_grid())?;
    let res = selfsimilar_residual(profile, &pops, kappa, ProfileOperator::Biharmonic)?;
    let res0 = selfsimilar_residual(profile, &pops, 0.0, ProfileOperator::Biharmonic)?;
    let h = profile_hamiltonian(profile, &pops)?;
    Ok(SelfSimilarReport {
        focusing: snapshot.focusing,
        matched_scale: extracted.scale,
        kappa,
        residual: relative_residual(profile, &res, settings.residual_rho_max),
        residual_unit_rate: relative_residual(profile, &res0, settings.residual_rho_max),
        hamiltonian_ratio: h.value.abs() / h.kinetic,
        divergent_tail: h.divergent_tail,
    })
}

fn concentration_report(snapshot: &FieldSnapshot, ground_state: &FieldSnapshot) -> Result<ConcentrationReport> {
    let p_cr = ground_state.power();
    let gs_ops = RadialOperators::assemble(ground_state.shared_grid())?;
    let ell_gs = h2_focusing_factor(ground_state, &gs_ops)?;
    // bisect for the 99.9% radius of the ground state
    let (mut lo, mut hi) = (0.0, ground_state.grid().r_max());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if power_in_ball(ground_state, mid)? < 0.999 * p_cr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let radius_factor = hi / ell_gs;
    let ops = RadialOperators::assemble(snapshot.shared_grid())?;
    let ell = h2_focusing_factor(snapshot, &ops)?;
    let radius = (radius_factor * ell).min(snapshot.grid().r_max());
    Ok(ConcentrationReport { radius_factor, ball_power: power_in_ball(snapshot, radius)?, critical_power: p_cr })
}

/// All diagnostics of one run. `ground_state` is the radial profile of `R`
/// for the same `d` and `σ`, used by the critical-regime comparisons.
pub fn analyze(record: &RunRecord, ground_state: Option<&FieldSnapshot>, settings: &AnalysisSettings) -> Result<AnalysisReport> {
    let rec = &record.series.records;
    if rec.len() < 2 {
        return Err(BnlsError::TooFewSamples { need: 2, got: rec.len() });
    }
    let (first, last) = (&rec[0], &rec[rec.len() - 1]);
    let regime = Regime::of(record.config.dim, record.config.sigma);
    let conservation = conservation(record, settings)?;

    let (blowup_fit, fit_error) = match fit_blowup(&record.series, settings.fit_window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let l3lt = if regime == Regime::Subcritical {
        None
    } else {
        l3lt_series(&record.series).ok().map(|l| L3LtSummary {
            kappa: l.kappa,
            limit: l.limit,
            trend_slope: l.trend_slope,
            trend_start: l.trend_start,
            trend_end: l.trend_end,
        })
    };
    let lower_bound_ratio = blowup_fit.map(|f| {
        rec.iter()
            .filter(|r| r.focusing <= f.window.l_hi && r.focusing >= f.window.l_lo && r.ell > 0.0)
            .map(|r| r.ell * f.t_c.diff(r.t).powf(-0.25))
            .fold(0.0, f64::max)
    });

    let profiles = rescaled_archive(record)?;
    let gs_for_profiles = if regime == Regime::Critical { ground_state } else { None };
    let profile = profile_report(record, &profiles, gs_for_profiles, settings)?;
    let deepest = record.deepest();
    let collapsed = deepest.is_some_and(|d| d.focusing <= settings.fit_window.l_hi);

    let (farfield, bifurcation) = if regime == Regime::Supercritical && collapsed {
        let far = profiles.last().and_then(|p| farfield_decay_fit(p, settings.farfield_rho.0, settings.farfield_rho.1).ok());
        (far, bifurcation_report(record, &profiles, settings)?)
    } else {
        (None, None)
    };
    let selfsimilar = match (deepest, &l3lt) {
        (Some(d), Some(l)) if collapsed => selfsimilar_report(d, l.kappa, settings).ok(),
        _ => None,
    };
    let concentration = match (deepest, gs_for_profiles) {
        (Some(d), Some(gs)) if collapsed => Some(concentration_report(&d.snapshot, gs)?),
        _ => None,
    };

    Ok(AnalysisReport {
        name: record.config.name.clone(),
        dim: record.config.dim,
        sigma: record.config.sigma,
        regime,
        halt: record.halt,
        samples: rec.len(),
        t_end: last.t.value(),
        initial_focusing: first.focusing,
        final_focusing: last.focusing,
        amplitude_growth: last.max_amplitude / first.max_amplitude,
        conservation,
        blowup_fit,
        fit_error,
        l3lt,
        lower_bound_ratio,
        profiles: profile,
        farfield,
        bifurcation,
        selfsimilar,
        concentration,
    })
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path)?;
    written.push(path);
    Ok(BufWriter::new(file))
}

/// Writes the plot tables next to the report and returns their paths.
pub fn write_figure_tables(record: &RunRecord, report: &AnalysisReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let rec = &record.series.records;

    let mut out = create(dir, "amplitude.csv", &mut written)?;
    writeln!(out, "t,max_amplitude,focusing")?;
    for r in rec {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", r.t.value(), r.max_amplitude, r.focusing)?;
    }
    out.flush()?;

    if let Some(fit) = &report.blowup_fit {
        let mut out = create(dir, "powerlaw.csv", &mut written)?;
        writeln!(out, "log_tc_minus_t,log_focusing,log_fit")?;
        for r in rec {
            let gap = fit.t_c.diff(r.t);
            if gap > 0.0 {
                let x = gap.ln();
                writeln!(out, "{:.16e},{:.16e},{:.16e}", x, r.focusing.ln(), fit.kappa.ln() + fit.p * x)?;
            }
        }
        out.flush()?;
    }

    if report.l3lt.is_some() {
        let mut out = create(dir, "l3lt.csv", &mut written)?;
        writeln!(out, "inverse_focusing,l3lt")?;
        for r in rec {
            if let Some(v) = r.l3lt {
                writeln!(out, "{:.16e},{:.16e}", 1.0 / r.focusing, v)?;
            }
        }
        out.flush()?;
    }

    for a in &record.archive {
        let p = rescale_snapshot(&a.snapshot)?;
        let mut out = create(dir, &format!("profile_L{:.0e}.csv", a.level), &mut written)?;
        p.write_csv(&mut out)?;
        out.flush()?;
    }

    if let (Some(fit), Some(deep)) = (&report.farfield, record.deepest()) {
        let p = rescale_snapshot(&deep.snapshot)?;
        let mut out = create(dir, "farfield.csv", &mut written)?;
        writeln!(out, "rho,value,fit")?;
        for (r, v) in p.rho().iter().zip(&p.values) {
            if *r >= 1.0 && *v > 0.0 {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", r, v, fit.prefactor * r.powf(fit.exponent))?;
            }
        }
        out.flush()?;
    }

    if let Some(b) = &report.bifurcation {
        let mut out = create(dir, "bifurcation.csv", &mut written)?;
        writeln!(out, "inverse_focusing,rho_star,r_c")?;
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.16e}"));
        for row in &b.rows {
            writeln!(out, "{:.16e},{},{}", row.inverse_focusing, fmt(row.rho_star), fmt(row.r_c))?;
        }
        out.flush()?;
    }
    Ok(written)
}
