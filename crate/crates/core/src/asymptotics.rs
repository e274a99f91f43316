//! Far-field branches of the supercritical self-similar profile equation
//! `-B + i b³ (2B/σ + ρB') - Δ²B + |B|^{2σ}B = 0`, `b³ = κ⁴/4`, and checks on
//! profiles extracted from simulations.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{conserved_quantities, focusing_factor};
use crate::error::{BnlsError, Result};
use crate::fd::{BandedOperator, RadialOperators};
use crate::grid::{interpolate_values, FieldSnapshot, RadialGrid};
use crate::precise::PreciseTime;
use crate::stencil::{fornberg_weights, GAUSS6};

/// One of the four WKB solutions of the linearised profile equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbBranch {
    /// 1: `ρ^{-2/σ - i/b³}`; 2: oscillatory; 3: growing; 4: decaying.
    pub index: u8,
    pub kappa: f64,
    pub sigma: f64,
    pub dim: usize,
}

impl WkbBranch {
    pub fn new(index: u8, kappa: f64, sigma: f64, dim: usize) -> Result<Self> {
        if !(1..=4).contains(&index) {
            return Err(BnlsError::InvalidConfig(format!("WKB branch must be 1..=4, got {index}")));
        }
        if !(kappa > 0.0) || !(sigma > 0.0) {
            return Err(BnlsError::InvalidConfig("WKB branches need κ > 0 and σ > 0".into()));
        }
        Ok(Self { index, kappa, sigma, dim })
    }

    /// `b = (κ⁴/4)^{1/3}`.
    pub fn b(&self) -> f64 {
        (self.kappa.powi(4) / 4.0).cbrt()
    }

    /// `α` in `w₀ = α ρ^{4/3}`; zero for branch 1.
    pub fn alpha(&self) -> Complex64 {
        let b = self.b();
        let s3 = 3f64.sqrt();
        let unit = match self.index {
            2 => Complex64::new(0.0, -1.0),
            3 => Complex64::new(s3 / 2.0, 0.5),
            4 => Complex64::new(-s3 / 2.0, 0.5),
            _ => Complex64::new(0.0, 0.0),
        };
        unit * (0.75 * b)
    }

    /// Coefficient of `log ρ` in the exponent.
    pub fn log_coefficient(&self) -> Complex64 {
        let b3 = self.b().powi(3);
        let s = self.sigma;
        match self.index {
            1 => Complex64::new(-2.0 / s, -1.0 / b3),
            _ => Complex64::new((2.0 / s - 2.0 * self.dim as f64) / 3.0, 1.0 / (3.0 * b3)),
        }
    }

    /// Real part of the algebraic decay exponent, `|B| ~ ρ^{-q}` apart from exponential factors.
    pub fn algebraic_decay(&self) -> f64 {
        -self.log_coefficient().re
    }

    /// `log B(ρ)`.
    pub fn log_value(&self, rho: f64) -> Complex64 {
        self.alpha() * rho.powf(4.0 / 3.0) + self.log_coefficient() * rho.ln()
    }
}

/// `B_k(ρ)` for `ρ ≥ 1`.
pub fn wkb_value(branch: &WkbBranch, rho: f64) -> Result<Complex64> {
    if !(rho >= 1.0) {
        return Err(BnlsError::OutsideAsymptoticRange(rho));
    }
    Ok(branch.log_value(rho).exp())
}

/// `(f, f', f'', f''', f'''')` at `x0` by a nine-point stencil of spacing `h`.
fn derivatives(f: impl Fn(f64) -> Complex64, x0: f64, h: f64) -> [Complex64; 5] {
    let nodes: Vec<f64> = (-4..=4).map(|k| x0 + k as f64 * h).collect();
    let w = fornberg_weights(x0, &nodes, 4);
    let vals: Vec<Complex64> = nodes.iter().map(|&x| f(x)).collect();
    let mut out = [Complex64::new(0.0, 0.0); 5];
    for (k, o) in out.iter_mut().enumerate() {
        *o = w[k].iter().zip(&vals).map(|(c, v)| v * *c).sum();
    }
    out
}

fn radial_biharmonic(d: [Complex64; 5], rho: f64, dim: usize) -> Complex64 {
    let a = (dim as f64 - 1.0) * (dim as f64 - 3.0);
    d[4] + 2.0 * (dim as f64 - 1.0) / rho * d[3] + a / (rho * rho) * d[2] - a / rho.powi(3) * d[1]
}

fn radial_laplacian(d: [Complex64; 5], rho: f64, dim: usize) -> Complex64 {
    d[2] + (dim as f64 - 1.0) / rho * d[1]
}

/// Which spatial operator the profile equation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileOperator {
    /// `Δ²`, as the self-similar reduction of the equation produces.
    #[default]
    Biharmonic,
    /// `Δ`, as the reduced equation is sometimes written.
    Laplacian,
}

/// Residual of the branch in the linear far-field equation, divided by the
/// largest of the individual terms. Derivatives are taken numerically on the
/// closed form; values are scaled by `B(ρ)` first so that neither the growing
/// nor the decaying branch leaves floating-point range.
pub fn wkb_linear_residual(branch: &WkbBranch, rho: f64, operator: ProfileOperator) -> Result<f64> {
    if !(rho >= 1.0) {
        return Err(BnlsError::OutsideAsymptoticRange(rho));
    }
    let base = branch.log_value(rho);
    // branch 1 varies on the scale ρ, the others on ρ^{-1/3}/b
    let h = match branch.index {
        1 => 0.02 * rho,
        _ => 0.05 * rho.powf(-1.0 / 3.0) / branch.b(),
    };
    let d = derivatives(|x| (branch.log_value(x) - base).exp(), rho, h);
    let b3 = branch.b().powi(3);
    let dispersion = match operator {
        ProfileOperator::Biharmonic => radial_biharmonic(d, rho, branch.dim),
        ProfileOperator::Laplacian => radial_laplacian(d, rho, branch.dim),
    };
    let drift = Complex64::new(0.0, b3) * (2.0 / branch.sigma * d[0] + rho * d[1]);
    let residual = -d[0] - dispersion + drift;
    let scale = d[0].norm().max(dispersion.norm()).max(drift.norm());
    Ok(residual.norm() / scale)
}

/// `log₁₀`-slope of `∫₁^P |B₁|² ρ^{d-1} dρ` between `p_lo` and `p_hi`.
pub fn b1_norm_growth_slope(kappa: f64, sigma: f64, dim: usize, p_lo: f64, p_hi: f64) -> Result<f64> {
    let branch = WkbBranch::new(1, kappa, sigma, dim)?;
    if !(p_lo > 1.0 && p_hi > p_lo) {
        return Err(BnlsError::InvalidConfig("need 1 < p_lo < p_hi".into()));
    }
    let integral = |upper: f64| -> f64 {
        // Gauss-Legendre on panels uniform in log ρ
        let panels = 400;
        let (a, b) = (0.0, upper.ln());
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for &(x, w) in GAUSS6.iter() {
                let u = mid + 0.5 * h * x;
                let rho = u.exp();
                let v = branch.log_value(rho).exp().norm_sqr();
                acc += w * 0.5 * h * v * rho.powi(dim as i32);
            }
        }
        acc
    };
    Ok((integral(p_hi).ln() - integral(p_lo).ln()) / (p_hi.ln() - p_lo.ln()))
}

/// Node-wise `-B + i (κ⁴/4)(2B/σ + ρB') - D B + |B|^{2σ}B` on the profile's grid,
/// with `D` the biharmonic or (printed-form switch) the Laplacian.
pub fn selfsimilar_residual(
    profile: &FieldSnapshot,
    ops: &RadialOperators,
    kappa: f64,
    operator: ProfileOperator,
) -> Result<Vec<Complex64>> {
    let grid = profile.grid();
    if grid.len() < 7 {
        return Err(BnlsError::TooFewNodes { min: 7, got: grid.len() });
    }
    let b = profile.values();
    let sigma = profile.sigma();
    let dispersion = match operator {
        ProfileOperator::Biharmonic => ops.biharmonic.apply(b)?,
        ProfileOperator::Laplacian => ops.laplacian.apply(b)?,
    };
    let grad = ops.gradient.apply(b)?;
    let drift = Complex64::new(0.0, kappa.powi(4) / 4.0);
    Ok(grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(m, &rho)| {
            -b[m] + drift * (2.0 / sigma * b[m] + rho * grad[m]) - dispersion[m] + b[m] * b[m].norm_sqr().powf(sigma)
        })
        .collect())
}

/// `sup |residual| / sup |B|` over `ρ ≤ rho_max`.
pub fn relative_residual(profile: &FieldSnapshot, residual: &[Complex64], rho_max: f64) -> f64 {
    let count = profile.grid().count_below(rho_max * (1.0 + 1e-12));
    let sup = |v: &[Complex64]| v[..count].iter().fold(0.0f64, |m, x| m.max(x.norm()));
    sup(residual) / sup(profile.values())
}

/// A simulation snapshot rescaled so that the phase at the origin rotates at unit rate
/// in `τ`: `B(ρ) = L_s^{2/σ} ψ(ρ L_s) e^{-iφ(0)}`, with `L_s⁻⁴` the instantaneous
/// frequency `-Re(F/ψ)(0)`, `F = Δ²ψ - |ψ|^{2σ}ψ`.
#[derive(Debug, Clone)]
pub struct SelfSimilarProfile {
    pub profile: FieldSnapshot,
    /// `L_s`, the length scale matched to the phase rate.
    pub scale: f64,
    /// `L = ‖ψ‖_∞^{-σ/2}` of the snapshot.
    pub focusing: f64,
}

impl SelfSimilarProfile {
    /// Converts a blowup rate measured with `L` into one for `L_s`.
    pub fn matched_kappa(&self, kappa: f64) -> f64 {
        kappa * self.scale / self.focusing
    }
}

pub fn selfsimilar_profile(snapshot: &FieldSnapshot, ops: &RadialOperators, rho_max: f64, nodes: usize) -> Result<SelfSimilarProfile> {
    let sigma = snapshot.sigma();
    let psi0 = snapshot.values()[0];
    if psi0.norm() == 0.0 {
        return Err(BnlsError::ZeroField);
    }
    let bih = ops.biharmonic.apply(snapshot.values())?;
    let force = bih[0] - psi0 * psi0.norm_sqr().powf(sigma);
    let frequency = -(force / psi0).re;
    if !(frequency > 0.0) {
        return Err(BnlsError::FitFailed(format!("phase rate at the origin is {frequency:e}, not positive")));
    }
    let scale = frequency.powf(-0.25);
    let focusing = focusing_factor(snapshot)?;
    let limit = (snapshot.grid().r_max() / scale).min(rho_max);
    let grid = Arc::new(RadialGrid::uniform(nodes, limit, snapshot.dim())?);
    let targets: Vec<f64> = grid.nodes().iter().map(|rho| rho * scale).collect();
    let rotate = Complex64::from_polar(scale.powf(2.0 / sigma), -psi0.arg());
    let values = interpolate_values(snapshot.grid(), snapshot.values(), &targets)?.into_iter().map(|v| v * rotate).collect();
    let profile = FieldSnapshot::new(grid, values, PreciseTime::ZERO, sigma)?;
    Ok(SelfSimilarProfile { profile, scale, focusing })
}

/// `H[B]` with an estimate of the part beyond the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileHamiltonian {
    /// On-grid value plus the tail estimate.
    pub value: f64,
    pub on_grid: f64,
    pub tail: f64,
    /// `‖Δ_ρ B‖²` on the grid.
    pub kinetic: f64,
    /// Fitted `q` in `|B| ~ ρ^{-q}` over the outer fifth of the grid.
    pub decay_exponent: f64,
    /// The fitted decay is too slow for the integrals to converge.
    pub divergent_tail: bool,
}

pub fn profile_hamiltonian(profile: &FieldSnapshot, ops: &RadialOperators) -> Result<ProfileHamiltonian> {
    let grid = profile.grid();
    let n = grid.len();
    let sigma = profile.sigma();
    let d = grid.dim() as f64;
    let nodes = grid.nodes();
    let values = profile.values();
    // rows past n-6 reach the closure nodes, where a truncated profile is cut to zero
    let cut = n - 6;
    let inner = RadialGrid::new(nodes[..cut].to_vec(), grid.dim())?;
    let lap = ops.laplacian.apply(values)?;
    let kin_density: Vec<f64> = lap[..cut].iter().map(|v| v.norm_sqr()).collect();
    let pot_density: Vec<f64> = values[..cut].iter().map(|v| v.norm_sqr().powf(sigma + 1.0)).collect();
    let kinetic = inner.integrate(&kin_density);
    let on_grid = kinetic - inner.integrate(&pot_density) / (sigma + 1.0);

    // decay law over the outer fifth of the retained nodes
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for m in cut - cut / 5..cut {
        let a = values[m].norm();
        if a > 0.0 && nodes[m] > 0.0 {
            x.push(nodes[m].ln());
            y.push(a.ln());
        }
    }
    if x.len() < 3 {
        return Ok(ProfileHamiltonian { value: on_grid, on_grid, tail: 0.0, kinetic, decay_exponent: f64::INFINITY, divergent_tail: false });
    }
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    let decay = -slope;
    // |ΔB|² ρ^{d-1} ~ ρ^{-2q-4+d-1}; |B|^{2σ+2} ρ^{d-1} ~ ρ^{-(2σ+2)q+d-1}
    let kin_exp = -2.0 * decay - 4.0 + d - 1.0;
    let pot_exp = -(2.0 * sigma + 2.0) * decay + d - 1.0;
    let divergent = kin_exp >= -1.0 || pot_exp >= -1.0;
    let tail = if divergent {
        f64::INFINITY
    } else {
        let rho = nodes[cut - 1];
        let a = values[cut - 1].norm();
        let lap = decay * (decay + 2.0 - d) * a / (rho * rho);
        let surface = crate::grid::surface_constant(grid.dim());
        let kin = surface * lap * lap * rho.powf(d) / (-kin_exp - 1.0);
        let pot = surface * a.powf(2.0 * sigma + 2.0) * rho.powf(d) / (-pot_exp - 1.0) / (sigma + 1.0);
        kin - pot
    };
    Ok(ProfileHamiltonian { value: on_grid + tail, on_grid, tail, kinetic, decay_exponent: decay, divergent_tail: divergent })
}

/// Outcome of one Gagliardo-Nirenberg bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnCheck {
    pub power: f64,
    pub hamiltonian: f64,
    pub kinetic: f64,
    pub holds: bool,
}

/// `‖f‖² ≤ P_cr ⟹ H[f] ≥ 0`: rescales `field` to power `fraction · P_cr` and evaluates `H`.
/// `slack` absorbs discretization error in the equality case.
pub fn gn_bound_check(field: &FieldSnapshot, ops: &RadialOperators, critical_power: f64, fraction: f64, slack: f64) -> Result<GnCheck> {
    let p = field.power();
    if p == 0.0 {
        return Err(BnlsError::ZeroField);
    }
    let c = (fraction * critical_power / p).sqrt();
    let values = field.values().iter().map(|v| v * c).collect();
    let scaled = FieldSnapshot::new(field.shared_grid(), values, field.time(), field.sigma())?;
    let q = conserved_quantities(&scaled, ops)?;
    Ok(GnCheck { power: q.power, hamiltonian: q.hamiltonian, kinetic: q.kinetic, holds: q.hamiltonian >= -slack * q.kinetic })
}

/// A smooth random radial field: a few random even modes under a compact window.
/// The last two nodes are zero, as the boundary closure requires.
pub fn random_band_limited_field(rng: &mut impl Rng, grid: Arc<RadialGrid>, sigma: f64, modes: usize, support: f64) -> Result<FieldSnapshot> {
    let coeffs: Vec<(Complex64, f64)> = (0..modes)
        .map(|n| {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (1.0 + n as f64);
            let k = std::f64::consts::PI * n as f64 / support;
            (c, k)
        })
        .collect();
    let n = grid.len();
    let values = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(m, &r)| {
            if r >= support || m + 2 >= n {
                return Complex64::new(0.0, 0.0);
            }
            let window = (1.0 - (r / support).powi(2)).powi(4);
            coeffs.iter().map(|(c, k)| c * (k * r).cos()).sum::<Complex64>() * window
        })
        .collect();
    FieldSnapshot::new(grid, values, PreciseTime::ZERO, sigma)
}

/// Biharmonic of the profile alone, for callers that need `Δ²B` separately.
pub fn profile_biharmonic(profile: &FieldSnapshot) -> Result<Vec<Complex64>> {
    BandedOperator::biharmonic(profile.shared_grid())?.apply(profile.values())
}
