//! Measured quantities along a run: focusing factors, conserved integrals,
//! rescaled profiles and the fits that extract the blowup rate.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{BnlsError, Result};
use crate::fd::RadialOperators;
use crate::grid::{interpolate_values, surface_constant, FieldSnapshot, RadialGrid};
use crate::precise::PreciseTime;
use crate::stencil::GAUSS6;

/// `L = ‖ψ‖_∞^{-σ/2}`.
pub fn focusing_factor(snapshot: &FieldSnapshot) -> Result<f64> {
    let peak = snapshot.max_amplitude();
    if peak == 0.0 {
        return Err(BnlsError::ZeroField);
    }
    Ok(peak.powf(-0.5 * snapshot.sigma()))
}

fn laplacian_norm_sq(snapshot: &FieldSnapshot, ops: &RadialOperators) -> Result<f64> {
    let lap = ops.laplacian.apply(snapshot.values())?;
    let dens: Vec<f64> = lap.iter().map(|v| v.norm_sqr()).collect();
    Ok(snapshot.grid().integrate(&dens))
}

/// `ℓ = ‖Δψ‖₂^{-1/2}`.
pub fn h2_focusing_factor(snapshot: &FieldSnapshot, ops: &RadialOperators) -> Result<f64> {
    let n = laplacian_norm_sq(snapshot, ops)?;
    if n == 0.0 {
        return Err(BnlsError::ZeroField);
    }
    Ok(n.powf(-0.25))
}

/// Integrals of a snapshot that the evolution conserves (or that enter a conserved combination).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedQuantities {
    pub power: f64,
    pub hamiltonian: f64,
    /// `‖Δψ‖₂²`
    pub kinetic: f64,
    /// `∫ Im(ψ* ψ_r)` over the ball.
    pub momentum: f64,
    /// `∫ r Im(ψ* ψ_r)` over the ball; `J = this - 4tH` is conserved.
    pub dilation: f64,
    /// `∫ r² |ψ|²`.
    pub variance: f64,
}

impl ConservedQuantities {
    /// `J(t) = ∫ r Im(ψ*ψ_r) - 4 t H`, with `H` supplied by the caller.
    pub fn dilation_invariant(&self, t: f64, hamiltonian: f64) -> f64 {
        self.dilation - 4.0 * t * hamiltonian
    }
}

pub fn conserved_quantities(snapshot: &FieldSnapshot, ops: &RadialOperators) -> Result<ConservedQuantities> {
    let grid = snapshot.grid();
    let values = snapshot.values();
    let sigma = snapshot.sigma();
    let kinetic = laplacian_norm_sq(snapshot, ops)?;
    let grad = ops.gradient.apply(values)?;
    let n = grid.len();
    let mut nl = vec![0.0; n];
    let mut mom = vec![0.0; n];
    let mut dil = vec![0.0; n];
    let mut var = vec![0.0; n];
    for m in 0..n {
        let r = grid.nodes()[m];
        let a2 = values[m].norm_sqr();
        nl[m] = a2.powf(sigma + 1.0);
        let im = (values[m].conj() * grad[m]).im;
        mom[m] = im;
        dil[m] = r * im;
        var[m] = r * r * a2;
    }
    let nonlinear = grid.integrate(&nl);
    Ok(ConservedQuantities {
        power: snapshot.power(),
        hamiltonian: kinetic - nonlinear / (sigma + 1.0),
        kinetic,
        momentum: grid.integrate(&mom),
        dilation: grid.integrate(&dil),
        variance: grid.integrate(&var),
    })
}

/// `|ψ|` rescaled as `L^{2/σ} |ψ(ρ L)|` on `ρ = r / L`.
#[derive(Debug, Clone)]
pub struct RescaledProfile {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
    pub focusing: f64,
    pub t: f64,
}

impl RescaledProfile {
    pub fn rho(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Degree-six interpolation of the profile at `rho`.
    pub fn sample(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let vals: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Ok(interpolate_values(&self.grid, &vals, rho)?.into_iter().map(|v| v.re).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rho,value")?;
        for (r, v) in self.rho().iter().zip(&self.values) {
            writeln!(out, "{r:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

pub fn rescale_snapshot(snapshot: &FieldSnapshot) -> Result<RescaledProfile> {
    let l = focusing_factor(snapshot)?;
    let amp = l.powf(2.0 / snapshot.sigma());
    let rho: Vec<f64> = snapshot.grid().nodes().iter().map(|r| r / l).collect();
    let grid = Arc::new(RadialGrid::new(rho, snapshot.dim())?);
    let values = snapshot.values().iter().map(|v| v.norm() * amp).collect();
    Ok(RescaledProfile { grid, values, focusing: l, t: snapshot.t() })
}

/// `sup |a - b|` over the nodes of `a` with `ρ ≤ rho_max`, `b` interpolated.
pub fn profile_distance(a: &RescaledProfile, b: &RescaledProfile, rho_max: f64) -> Result<f64> {
    let limit = rho_max.min(b.grid.r_max());
    let count = a.grid.count_below(limit + 1e-12 * limit);
    let rho = &a.rho()[..count];
    let bv = b.sample(rho)?;
    Ok(a.values[..count].iter().zip(&bv).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// `∫_{r<radius} |ψ|²`, integrating the squared local interpolant.
pub fn power_in_ball(snapshot: &FieldSnapshot, radius: f64) -> Result<f64> {
    let grid = snapshot.grid();
    let radius = radius.clamp(0.0, grid.r_max());
    let nodes = grid.nodes();
    let dim = grid.dim();
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    for m in 0..grid.len() - 1 {
        let a = nodes[m];
        if a >= radius {
            break;
        }
        let b = nodes[m + 1].min(radius);
        let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
        for &(x, w) in GAUSS6.iter() {
            let r = mid + half * x;
            targets.push(r);
            weights.push(w * half * r.powi(dim as i32 - 1));
        }
    }
    if targets.is_empty() {
        return Ok(0.0);
    }
    let vals = interpolate_values(grid, snapshot.values(), &targets)?;
    Ok(surface_constant(dim) * vals.iter().zip(&weights).map(|(v, w)| v.norm_sqr() * w).sum::<f64>())
}

/// Result of a log-log fit `|ψ| ≈ c ρ^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub points: usize,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (intercept, slope, (rss / n).sqrt())
}

pub fn farfield_decay_fit(profile: &RescaledProfile, rho_lo: f64, rho_hi: f64) -> Result<FarFieldFit> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (r, v) in profile.rho().iter().zip(&profile.values) {
        if *r >= rho_lo && *r <= rho_hi && *v > 0.0 {
            x.push(r.ln());
            y.push(v.ln());
        }
    }
    if x.len() < 5 {
        return Err(BnlsError::TooFewSamples { need: 5, got: x.len() });
    }
    let (a, q, _) = linear_fit(&x, &y);
    Ok(FarFieldFit { exponent: q, prefactor: a.exp(), points: x.len(), rho_lo, rho_hi })
}

/// Where two rescaled profiles first separate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bifurcation {
    At { rho: f64 },
    BeyondRange { rho_end: f64 },
}

impl Bifurcation {
    pub fn rho(&self) -> Option<f64> {
        match self {
            Bifurcation::At { rho } => Some(*rho),
            Bifurcation::BeyondRange { .. } => None,
        }
    }
}

/// Smallest `ρ` at which `|a - b| > threshold·|b|`; `a` is the less focused profile.
pub fn bifurcation_position(a: &RescaledProfile, b: &RescaledProfile, threshold: f64, rho_max: f64) -> Result<Bifurcation> {
    if a.focusing < b.focusing {
        return Err(BnlsError::InvalidConfig("first profile must be the less focused one".into()));
    }
    let end = rho_max.min(a.grid.r_max()).min(b.grid.r_max());
    let count = a.grid.count_below(end);
    let rho = &a.rho()[..count];
    let bv = b.sample(rho)?;
    for (i, (&av, &b)) in a.values[..count].iter().zip(&bv).enumerate() {
        if (av - b).abs() > threshold * b.abs() {
            return Ok(Bifurcation::At { rho: rho[i] });
        }
    }
    Ok(Bifurcation::BeyondRange { rho_end: end })
}

/// One row of the per-step record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub t: PreciseTime,
    pub dt: f64,
    pub max_amplitude: f64,
    pub focusing: f64,
    pub power: f64,
    pub hamiltonian: f64,
    pub momentum: f64,
    pub dilation: f64,
    pub l3lt: Option<f64>,
    pub regrid: bool,
    pub tau: f64,
    pub ell: f64,
}

/// Per-step diagnostics of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub records: Vec<SeriesRecord>,
}

const SERIES_HEADER: &str = "t,dt,max_amp,L,power,H,momentum,J,L3Lt,regrid,t_lo,tau,ell";

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: SeriesRecord) {
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&SeriesRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SERIES_HEADER}")?;
        for r in &self.records {
            let l3lt = r.l3lt.map(|v| format!("{v:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{:.17e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e}",
                r.t.hi,
                r.dt,
                r.max_amplitude,
                r.focusing,
                r.power,
                r.hamiltonian,
                r.momentum,
                r.dilation,
                l3lt,
                u8::from(r.regrid),
                r.t.lo,
                r.tau,
                r.ell
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| BnlsError::Parse("empty series".into()))??;
        if header.trim() != SERIES_HEADER {
            return Err(BnlsError::Parse(format!("unexpected series header {header:?}")));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 13 {
                return Err(BnlsError::Parse(format!("series row {} has {} fields", i + 1, f.len())));
            }
            let num = |k: usize| -> Result<f64> {
                f[k].trim().parse::<f64>().map_err(|e| BnlsError::Parse(format!("row {}, field {k}: {e}", i + 1)))
            };
            records.push(SeriesRecord {
                t: PreciseTime { hi: num(0)?, lo: num(10)? },
                dt: num(1)?,
                max_amplitude: num(2)?,
                focusing: num(3)?,
                power: num(4)?,
                hamiltonian: num(5)?,
                momentum: num(6)?,
                dilation: num(7)?,
                l3lt: if f[8].trim().is_empty() { None } else { Some(num(8)?) },
                regrid: f[9].trim() == "1",
                tau: num(11)?,
                ell: num(12)?,
            });
        }
        Ok(Self { records })
    }

    /// Fills the `L³L_t` column from [`l3lt_series`].
    pub fn fill_l3lt(&mut self) -> Result<()> {
        let l = l3lt_series(self)?;
        for (r, v) in self.records.iter_mut().zip(l.values) {
            r.l3lt = v;
        }
        Ok(())
    }
}

/// Focusing-level window `L ∈ [lo, hi]` used by the fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub l_hi: f64,
    pub l_lo: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { l_hi: 1e-2, l_lo: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Full,
    FixedCollapseTime,
}

/// `L ≈ κ (T_c - t)^p` over a window of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub kappa: f64,
    pub p: f64,
    pub t_c: PreciseTime,
    pub window: FitWindow,
    pub rms: f64,
    pub samples: usize,
    pub method: FitMethod,
}

impl BlowupFit {
    pub fn collapse_time(&self) -> f64 {
        self.t_c.value()
    }
}

struct LinearFit {
    intercept: f64,
    slope: f64,
    rms: f64,
}

fn fit_fixed_offset(s: &[f64], y: &[f64], delta: f64) -> LinearFit {
    let x: Vec<f64> = s.iter().map(|v| (v + delta).ln()).collect();
    let (intercept, slope, rms) = linear_fit(&x, y);
    LinearFit { intercept, slope, rms }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Fits `log L = log κ + p log(T_c - t)` to samples with precise times.
///
/// Times are handled as offsets `s_i = t_last - t_i`, with `T_c = t_last + δ`;
/// for fixed `δ` the problem is linear, so `δ` is found by a one-dimensional
/// search on `log δ`, followed by Gauss-Newton on all three parameters.
pub fn fit_power_law(times: &[PreciseTime], focusing: &[f64]) -> Result<(f64, f64, PreciseTime, f64)> {
    let n = times.len();
    if n < 4 || focusing.len() != n {
        return Err(BnlsError::TooFewSamples { need: 4, got: n.min(focusing.len()) });
    }
    let last = times[n - 1];
    let s: Vec<f64> = times.iter().map(|t| last.diff(*t)).collect();
    let y: Vec<f64> = focusing.iter().map(|l| l.ln()).collect();
    let smallest = s.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let largest = s[0];
    if !(smallest.is_finite() && largest > 0.0) {
        return Err(BnlsError::FitFailed("sample times do not advance".into()));
    }
    let objective = |u: f64| fit_fixed_offset(&s, &y, u.exp()).rms;
    let (lo, hi) = ((smallest * 1e-8).ln(), (largest * 10.0).ln());
    let steps = 400;
    let grid: Vec<f64> = (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&u| objective(u)).collect();
    let best = (0..=steps).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    if best == 0 || best == steps {
        return Err(BnlsError::FitFailed("collapse-time offset at the edge of the search range".into()));
    }
    let mut u = golden_min(objective, grid[best - 1], grid[best + 1], 1e-13);
    let lin = fit_fixed_offset(&s, &y, u.exp());
    let (mut a, mut p) = (lin.intercept, lin.slope);
    // Gauss-Newton polish in (a, p, u)
    let rss = |a: f64, p: f64, u: f64| -> f64 {
        let d = u.exp();
        s.iter().zip(&y).map(|(si, yi)| (yi - a - p * (si + d).ln()).powi(2)).sum()
    };
    let mut current = rss(a, p, u);
    for _ in 0..20 {
        let d = u.exp();
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (si, yi) in s.iter().zip(&y) {
            let x = (si + d).ln();
            let r = yi - a - p * x;
            let j = [1.0, x, p * d / (si + d)];
            for i in 0..3 {
                jtr[i] += j[i] * r;
                for k in 0..3 {
                    jtj[i][k] += j[i] * j[k];
                }
            }
        }
        let Some(step) = solve3(jtj, jtr) else { break };
        let (na, np, nu) = (a + step[0], p + step[1], u + step[2]);
        let next = rss(na, np, nu);
        if !(next < current) {
            break;
        }
        let done = (current - next) <= 1e-15 * current;
        (a, p, u, current) = (na, np, nu, next);
        if done {
            break;
        }
    }
    let rms = (current / n as f64).sqrt();
    Ok((a.exp(), p, last.add(u.exp()), rms))
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// Collapse time from the last samples, extrapolating `L⁴` linearly to zero.
fn extrapolated_collapse(times: &[PreciseTime], focusing: &[f64]) -> Option<PreciseTime> {
    let n = times.len();
    if n < 2 {
        return None;
    }
    let k = n.saturating_sub(5);
    let last = times[n - 1];
    let ds = last.diff(times[k]);
    let d4 = focusing[k].powi(4) - focusing[n - 1].powi(4);
    if !(ds > 0.0 && d4 > 0.0) {
        return None;
    }
    Some(last.add(focusing[n - 1].powi(4) * ds / d4))
}

/// Rate fit over the window; needs at least 50 samples inside it.
pub fn fit_blowup(series: &TimeSeries, window: FitWindow) -> Result<BlowupFit> {
    let inside: Vec<&SeriesRecord> =
        series.records.iter().filter(|r| r.focusing <= window.l_hi && r.focusing >= window.l_lo).collect();
    if inside.len() < 50 {
        return Err(BnlsError::TooFewSamples { need: 50, got: inside.len() });
    }
    let times: Vec<PreciseTime> = inside.iter().map(|r| r.t).collect();
    let ls: Vec<f64> = inside.iter().map(|r| r.focusing).collect();
    match fit_power_law(&times, &ls) {
        Ok((kappa, p, t_c, rms)) if rms.is_finite() && kappa > 0.0 => {
            Ok(BlowupFit { kappa, p, t_c, window, rms, samples: inside.len(), method: FitMethod::Full })
        }
        _ => {
            let t_c = extrapolated_collapse(&times, &ls).ok_or_else(|| BnlsError::FitFailed("no collapse-time estimate".into()))?;
            let s: Vec<f64> = times.iter().map(|t| t_c.diff(*t)).collect();
            let y: Vec<f64> = ls.iter().map(|l| l.ln()).collect();
            let lin = fit_fixed_offset(&s, &y, 0.0);
            Ok(BlowupFit {
                kappa: lin.intercept.exp(),
                p: lin.slope,
                t_c,
                window,
                rms: lin.rms,
                samples: inside.len(),
                method: FitMethod::FixedCollapseTime,
            })
        }
    }
}

/// `L³L_t` per sample and its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L3LtSeries {
    pub values: Vec<Option<f64>>,
    /// `(-4 lim L³L_t)^{1/4}` from the final tenth of the samples.
    pub kappa: f64,
    /// Mean `L³L_t` over the final tenth.
    pub limit: f64,
    /// Slope of `L³L_t` against `log10(1/L)` over the last decade of focusing.
    pub trend_slope: f64,
    pub trend_start: f64,
    pub trend_end: f64,
}

/// `L³L_t = (L⁴)_t / 4`, with `(L⁴)_t` from a least-squares quadratic through five samples.
pub fn l3lt_series(series: &TimeSeries) -> Result<L3LtSeries> {
    let n = series.len();
    if n < 5 {
        return Err(BnlsError::TooFewSamples { need: 5, got: n });
    }
    let rec = &series.records;
    let mut values = vec![None; n];
    for i in 2..n - 2 {
        let (mut x, mut y) = ([0.0; 5], [0.0; 5]);
        for k in 0..5 {
            x[k] = rec[i - 2 + k].t.diff(rec[i].t);
            y[k] = rec[i - 2 + k].focusing.powi(4);
        }
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        let mut m = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for k in 0..5 {
            let u = x[k] / scale;
            let basis = [1.0, u, u * u];
            for a in 0..3 {
                b[a] += basis[a] * y[k];
                for c in 0..3 {
                    m[a][c] += basis[a] * basis[c];
                }
            }
        }
        if let Some(c) = solve3(m, b) {
            values[i] = Some(0.25 * c[1] / scale);
        }
    }
    let defined: Vec<(usize, f64)> = values.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    if defined.is_empty() {
        return Err(BnlsError::TooFewSamples { need: 5, got: 0 });
    }
    let tail = &defined[defined.len() - (defined.len() / 10).max(1)..];
    let limit = tail.iter().map(|(_, v)| v).sum::<f64>() / tail.len() as f64;
    let kappa = tail.iter().map(|(_, v)| (-4.0 * v).max(0.0).powf(0.25)).sum::<f64>() / tail.len() as f64;

    let l_end = rec[defined.last().unwrap().0].focusing;
    let decade: Vec<(f64, f64)> = defined
        .iter()
        .filter(|(i, _)| rec[*i].focusing <= 10.0 * l_end)
        .map(|(i, v)| ((1.0 / rec[*i].focusing).log10(), *v))
        .collect();
    let (trend_slope, trend_start, trend_end) = if decade.len() >= 3 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = decade.iter().cloned().unzip();
        let (a, b, _) = linear_fit(&xs, &ys);
        (b, a + b * xs[0], a + b * xs[xs.len() - 1])
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(L3LtSeries { values, kappa, limit, trend_slope, trend_start, trend_end })
}
