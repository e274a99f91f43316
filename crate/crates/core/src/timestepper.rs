//! Predictor-corrector Crank-Nicolson integration of `i ψ_t = Δ²ψ - |ψ|^{2σ}ψ`
//! with a step that shrinks like `L⁴` and grid redistribution as the core focuses.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{conserved_quantities, focusing_factor, h2_focusing_factor, SeriesRecord, TimeSeries};
use crate::error::{BnlsError, Result};
use crate::fd::{RadialOperators, ShiftedFactorization};
use crate::grid::{evaluate_initial_condition, FieldSnapshot, InitialCondition, RadialGrid};
use crate::precise::PreciseTime;
use crate::sgr::{core_node_count, regrid, regrid_needed, SgrSettings};
use crate::srm::{radial_profile, solve_ground_state, SrmSettings};

/// Everything that defines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub name: String,
    pub dim: usize,
    pub sigma: f64,
    pub initial: InitialCondition,
    pub r_max: f64,
    pub nodes: usize,
    /// Step size while `L ≥ L(0)`.
    pub dt0: f64,
    #[serde(default = "default_l_stop")]
    pub l_stop: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Stop at this time if no singularity forms first.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_correctors")]
    pub corrector_passes: usize,
    /// Record every n-th step (the last step is always recorded).
    #[serde(default = "default_cadence")]
    pub output_every: usize,
    /// Focusing levels at which snapshots are archived; decades down to `l_stop` when empty.
    #[serde(default)]
    pub archive_levels: Vec<f64>,
    #[serde(default)]
    pub sgr: SgrSettings,
    /// Settings for computing the ground state when the initial condition needs one.
    #[serde(default)]
    pub ground_state: Option<SrmSettings>,
    /// Drop the nonlinear term (testing aid).
    #[serde(default)]
    pub linear: bool,
}

fn default_l_stop() -> f64 {
    1e-5
}
fn default_max_steps() -> usize {
    2_000_000
}
fn default_correctors() -> usize {
    2
}
fn default_cadence() -> usize {
    1
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BnlsError::InvalidConfig(m));
        if !(1..=3).contains(&self.dim) {
            return Err(BnlsError::UnsupportedDimension(self.dim));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.r_max > 0.0) {
            return Err(BnlsError::NonPositiveRadius(self.r_max));
        }
        if self.nodes < crate::grid::MIN_NODES {
            return Err(BnlsError::TooFewNodes { min: crate::grid::MIN_NODES, got: self.nodes });
        }
        if !(self.dt0 > 0.0) {
            return bad(format!("dt0 must be positive, got {}", self.dt0));
        }
        if !(self.l_stop > 0.0) {
            return bad(format!("l_stop must be positive, got {}", self.l_stop));
        }
        if self.output_every == 0 {
            return bad("output_every must be at least 1".into());
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return bad(format!("t_max must be positive, got {t}"));
            }
        }
        match &self.initial {
            InitialCondition::Gaussian { amplitude, exponent } => {
                if !amplitude.is_finite() || !(*exponent > 0.0) {
                    return bad("gaussian needs a finite amplitude and positive exponent".into());
                }
            }
            InitialCondition::GroundState { scale, .. } => {
                if !scale.is_finite() {
                    return bad("ground-state scale must be finite".into());
                }
            }
        }
        Ok(())
    }

    /// `σ d ≥ 4`: the regime where singular solutions are studied.
    pub fn may_collapse(&self) -> bool {
        self.sigma * self.dim as f64 >= 4.0 - 1e-12
    }

    pub fn archive_targets(&self) -> Vec<f64> {
        if !self.archive_levels.is_empty() {
            let mut v = self.archive_levels.clone();
            v.sort_by(|a, b| b.total_cmp(a));
            return v;
        }
        let mut v = Vec::new();
        let mut level = 0.1;
        while level >= self.l_stop * (1.0 - 1e-9) {
            v.push(level);
            level /= 10.0;
        }
        v
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    None,
    TargetReached,
    TimeLimit,
    MaxSteps,
    SolverFailure,
    NonFinite,
    Overflow,
}

impl HaltReason {
    /// Process exit status for the command-line driver.
    pub fn exit_code(self) -> i32 {
        match self {
            HaltReason::None | HaltReason::TargetReached | HaltReason::TimeLimit => 0,
            HaltReason::MaxSteps => 3,
            HaltReason::SolverFailure => 4,
            HaltReason::NonFinite => 5,
            HaltReason::Overflow => 6,
        }
    }
}

/// State carried between steps.
#[derive(Debug, Clone)]
pub struct RunState {
    pub snapshot: FieldSnapshot,
    pub dt: f64,
    pub step: usize,
    pub last_regrid_focusing: f64,
    /// `∫ dt / L⁴`.
    pub tau: f64,
    pub halt: HaltReason,
    pub message: Option<String>,
}

impl RunState {
    pub fn new(snapshot: FieldSnapshot, dt: f64) -> Result<Self> {
        let l = focusing_factor(&snapshot).unwrap_or(1.0);
        Ok(Self { snapshot, dt, step: 0, last_regrid_focusing: l, tau: 0.0, halt: HaltReason::None, message: None })
    }

    fn fail(mut self, reason: HaltReason, err: impl ToString) -> Self {
        self.halt = reason;
        self.message = Some(err.to_string());
        self
    }
}

fn nonlinear_term(values: &[Complex64], sigma: f64, out: &mut [Complex64]) {
    for (o, v) in out.iter_mut().zip(values) {
        *o = v * v.norm_sqr().powf(sigma);
    }
}

/// Zeroes values below `1e-100 max|ψ|`; left alone they decay into subnormals,
/// which are exact to no purpose and slow the banded solves by orders of magnitude.
fn flush_negligible(values: &mut [Complex64]) {
    let floor = 1e-100 * values.iter().fold(0.0f64, |m, v| m.max(v.norm_sqr())).sqrt();
    for v in values.iter_mut() {
        if v.re.abs() < floor && v.im.abs() < floor {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

/// Options for a single step that are not part of the state.
#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub corrector_passes: usize,
    pub linear: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { corrector_passes: 2, linear: false }
    }
}

/// One step of size `state.dt`. The nonlinear term is taken at `ψⁿ` in the
/// predictor and at the midpoint average in each corrector pass; every pass
/// solves `(I + i dt/2 A) ψ^{n+1} = (I - i dt/2 A) ψⁿ + i dt N(ψ_mid)`.
pub fn cn_step(state: RunState, ops: &RadialOperators, options: StepOptions) -> RunState {
    if state.halt != HaltReason::None {
        return state;
    }
    let dt = state.dt;
    let alpha = Complex64::new(0.0, 0.5 * dt);
    let factor = match ShiftedFactorization::new(&ops.biharmonic, alpha) {
        Ok(f) => f,
        Err(e) => return state.fail(HaltReason::SolverFailure, e),
    };
    let psi = state.snapshot.values();
    let n = psi.len();
    let sigma = state.snapshot.sigma();
    let a_psi = ops.biharmonic.apply_unchecked(psi);
    let base: Vec<Complex64> = psi.iter().zip(&a_psi).map(|(p, ap)| p - alpha * ap).collect();
    let kick = Complex64::new(0.0, dt);
    let mut mid = psi.to_vec();
    let mut nl = vec![Complex64::new(0.0, 0.0); n];
    let mut next = Vec::new();
    for pass in 0..=options.corrector_passes {
        let mut rhs = base.clone();
        if !options.linear {
            nonlinear_term(&mid, sigma, &mut nl);
            for (r, v) in rhs.iter_mut().zip(&nl) {
                *r += kick * v;
            }
        }
        // ψ = ψ' = 0 at the outer closure nodes
        rhs[n - 2] = Complex64::new(0.0, 0.0);
        rhs[n - 1] = Complex64::new(0.0, 0.0);
        next = match factor.solve(&rhs) {
            Ok(x) => x,
            Err(BnlsError::NonFinite(i)) => return state.fail(HaltReason::NonFinite, format!("non-finite value at node {i}")),
            Err(e) => return state.fail(HaltReason::SolverFailure, e),
        };
        if pass < options.corrector_passes && !options.linear {
            for ((m, a), b) in mid.iter_mut().zip(psi).zip(&next) {
                *m = 0.5 * (a + b);
            }
        } else if options.linear {
            break;
        }
    }
    flush_negligible(&mut next);
    let time = state.snapshot.time().add(dt);
    let grid = state.snapshot.shared_grid();
    match FieldSnapshot::new(grid, next, time, sigma) {
        Ok(snapshot) => {
            let tau = state.tau + dt * focusing_factor(&snapshot).map(|l| l.powi(-4)).unwrap_or(0.0);
            RunState { snapshot, step: state.step + 1, tau, ..state }
        }
        Err(e) => state.fail(HaltReason::NonFinite, e),
    }
}

/// `dt₀ min(1, (L/L₀)⁴)`.
pub fn adapt_dt(dt0: f64, focusing: f64, initial_focusing: f64) -> f64 {
    dt0 * (focusing / initial_focusing).powi(4).min(1.0)
}

/// A snapshot kept at a focusing level.
#[derive(Debug, Clone)]
pub struct ArchivedSnapshot {
    pub level: f64,
    pub focusing: f64,
    pub snapshot: FieldSnapshot,
}

/// One grid redistribution during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegridEvent {
    pub step: usize,
    pub t: f64,
    pub focusing: f64,
    pub iterations: usize,
    pub converged: bool,
    pub power_change: f64,
    pub max_spacing_ratio: f64,
    /// Nodes within `core_radius · L` of the peak.
    pub core_nodes: usize,
}

impl RegridEvent {
    fn new(out: &crate::sgr::RegridOutcome, step: usize, focusing: f64, settings: &SgrSettings) -> Self {
        Self {
            step,
            t: out.snapshot.t(),
            focusing,
            iterations: out.iterations,
            converged: out.converged,
            power_change: out.power_change,
            max_spacing_ratio: out.grid().max_spacing_ratio(),
            core_nodes: core_node_count(&out.snapshot, focusing, settings),
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub archive: Vec<ArchivedSnapshot>,
    pub initial: FieldSnapshot,
    pub final_state: RunState,
    pub halt: HaltReason,
    pub message: Option<String>,
    pub regrids: Vec<RegridEvent>,
    pub initial_hamiltonian: f64,
    pub initial_focusing: f64,
    pub wall_seconds: f64,
}

/// The ground-state radial profile as a snapshot, read from `file` or computed.
pub fn ground_state_profile(config: &SimulationConfig) -> Result<FieldSnapshot> {
    let settings = config.ground_state.unwrap_or_else(|| SrmSettings::for_dimension(config.dim));
    let gs = solve_ground_state(config.dim, config.sigma, &settings)?;
    radial_profile(&gs, settings.points / 2 + 1)?.to_snapshot(config.sigma)
}

/// The `t = 0` field on a uniform grid. `ground_state` is required for the
/// ground-state family unless it may be computed on the fly.
pub fn prepare_initial(config: &SimulationConfig, ground_state: Option<&FieldSnapshot>) -> Result<FieldSnapshot> {
    config.validate()?;
    let grid = Arc::new(RadialGrid::uniform(config.nodes, config.r_max, config.dim)?);
    let computed;
    let gs = match (&config.initial, ground_state) {
        (InitialCondition::GroundState { .. }, None) => {
            computed = ground_state_profile(config)?;
            Some(&computed)
        }
        (_, g) => g,
    };
    let snap = evaluate_initial_condition(&config.initial, grid, config.sigma, gs)?;
    let mut values = snap.values().to_vec();
    let n = values.len();
    values[n - 2] = Complex64::new(0.0, 0.0);
    values[n - 1] = Complex64::new(0.0, 0.0);
    flush_negligible(&mut values);
    FieldSnapshot::new(snap.shared_grid(), values, PreciseTime::ZERO, config.sigma)
}

fn record(state: &RunState, ops: &RadialOperators, h0: f64, regridded: bool) -> Result<SeriesRecord> {
    let snap = &state.snapshot;
    let q = conserved_quantities(snap, ops)?;
    let t = snap.time();
    Ok(SeriesRecord {
        t,
        dt: state.dt,
        max_amplitude: snap.max_amplitude(),
        focusing: focusing_factor(snap).unwrap_or(f64::INFINITY),
        power: q.power,
        hamiltonian: q.hamiltonian,
        momentum: q.momentum,
        dilation: q.dilation_invariant(t.value(), h0),
        l3lt: None,
        regrid: regridded,
        tau: state.tau,
        ell: h2_focusing_factor(snap, ops).unwrap_or(f64::INFINITY),
    })
}

/// Runs from a prepared initial field until the target focusing level or a halt.
pub fn run_from(config: &SimulationConfig, initial: FieldSnapshot) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let options = StepOptions { corrector_passes: config.corrector_passes, linear: config.linear };
    let overflow = f64::MAX.powf(1.0 / (2.0 * config.sigma + 1.0)) / 10.0;
    let l0 = focusing_factor(&initial).unwrap_or(1.0);
    let mut state = RunState::new(initial.clone(), config.dt0)?;
    let mut regrids = Vec::new();

    let mut regridded = false;
    if regrid_needed(&state.snapshot, l0, l0, &config.sgr) && initial.max_amplitude() > 0.0 {
        let out = regrid(&state.snapshot, &config.sgr)?;
        regrids.push(RegridEvent::new(&out, 0, l0, &config.sgr));
        state.snapshot = out.snapshot;
        regridded = true;
    }
    let mut ops = RadialOperators::assemble(state.snapshot.shared_grid())?;
    let h0 = conserved_quantities(&state.snapshot, &ops)?.hamiltonian;
    let mut series = TimeSeries::default();
    series.push(record(&state, &ops, h0, regridded)?);

    let targets = config.archive_targets();
    let mut next_target = 0;
    let mut archive = Vec::new();
    let mut focusing = l0;

    loop {
        if focusing <= config.l_stop {
            state.halt = HaltReason::TargetReached;
        } else if state.step >= config.max_steps {
            state.halt = HaltReason::MaxSteps;
        } else if config.t_max.is_some_and(|t| state.snapshot.t() >= t * (1.0 - 1e-15)) {
            state.halt = HaltReason::TimeLimit;
        } else if state.snapshot.max_amplitude() > overflow {
            state.halt = HaltReason::Overflow;
        }
        if state.halt != HaltReason::None {
            break;
        }

        let mut dt = adapt_dt(config.dt0, focusing, l0);
        if let Some(t_max) = config.t_max {
            dt = dt.min(PreciseTime::from_f64(t_max).diff(state.snapshot.time()));
        }
        state.dt = dt;
        state = cn_step(state, &ops, options);
        if state.halt != HaltReason::None {
            break;
        }
        focusing = match focusing_factor(&state.snapshot) {
            Ok(l) => l,
            Err(_) => f64::INFINITY,
        };

        let mut regridded = false;
        if focusing.is_finite() && regrid_needed(&state.snapshot, focusing, state.last_regrid_focusing, &config.sgr) {
            match regrid(&state.snapshot, &config.sgr) {
                Ok(out) => {
                    regrids.push(RegridEvent::new(&out, state.step, focusing, &config.sgr));
                    state.snapshot = out.snapshot;
                    state.last_regrid_focusing = focusing;
                    regridded = true;
                    ops = RadialOperators::assemble(state.snapshot.shared_grid())?;
                    focusing = focusing_factor(&state.snapshot).unwrap_or(focusing);
                }
                Err(e) => {
                    state = state.fail(HaltReason::SolverFailure, e);
                    break;
                }
            }
        }

        while next_target < targets.len() && focusing <= targets[next_target] {
            archive.push(ArchivedSnapshot { level: targets[next_target], focusing, snapshot: state.snapshot.clone() });
            next_target += 1;
        }
        let last_step = focusing <= config.l_stop
            || state.step >= config.max_steps
            || config.t_max.is_some_and(|t| state.snapshot.t() >= t * (1.0 - 1e-15));
        if regridded || last_step || state.step % config.output_every == 0 {
            series.push(record(&state, &ops, h0, regridded)?);
        }
    }
    if series.last().map(|r| r.t) != Some(state.snapshot.time()) {
        if let Ok(r) = record(&state, &ops, h0, false) {
            series.push(r);
        }
    }
    let _ = series.fill_l3lt();
    let halt = state.halt;
    let message = state.message.clone();
    Ok(RunOutput {
        series,
        archive,
        initial,
        final_state: state,
        halt,
        message,
        regrids,
        initial_hamiltonian: h0,
        initial_focusing: l0,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn run_simulation(config: &SimulationConfig, ground_state: Option<&FieldSnapshot>) -> Result<RunOutput> {
    let initial = prepare_initial(config, ground_state)?;
    run_from(config, initial)
}
