//! Ground states of `-Δ²R - R + |R|^{2σ}R = 0` by spectral renormalization
//! (a Petviashvili-type fixed-point iteration) on a periodic tensor grid.
//!
//! No radial symmetry is imposed: the field lives on `N^d` points and the
//! radial profile is extracted afterwards, together with a score measuring
//! how far the solution is from radial.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{BnlsError, Result};
use crate::grid::{FieldSnapshot, RadialGrid};
use crate::precise::PreciseTime;

/// Periodic box `[-X, X)^d` sampled with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl TensorGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(BnlsError::UnsupportedDimension(dim));
        }
        if !(half_width > 0.0) {
            return Err(BnlsError::NonPositiveRadius(half_width));
        }
        if points < 16 || points % 2 != 0 {
            return Err(BnlsError::InvalidConfig(format!("points per axis must be even and >= 16, got {points}")));
        }
        Ok(Self { dim, half_width, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Signed angular wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.points as isize;
        let j = j as isize;
        let signed = if j < n / 2 { j } else { j - n };
        std::f64::consts::PI * signed as f64 / self.half_width
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Flat index of the point closest to the origin (exactly the origin).
    pub fn origin_index(&self) -> usize {
        let c = self.points / 2;
        (0..self.dim).fold(0, |acc, _| acc * self.points + c)
    }

    fn axes(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
        out
    }

    fn radius(&self, idx: usize) -> f64 {
        let ax = self.axes(idx);
        (0..self.dim).map(|a| self.coordinate(ax[a]).powi(2)).sum::<f64>().sqrt()
    }
}

/// Iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SrmSettings {
    pub half_width: f64,
    pub points: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub guess_amplitude: f64,
}

impl SrmSettings {
    pub fn for_dimension(dim: usize) -> Self {
        let points = match dim {
            1 => 512,
            2 => 256,
            _ => 128,
        };
        Self { half_width: 16.0, points, tol: 1e-12, max_iters: 2000, guess_amplitude: 2.0 }
    }
}

impl Default for SrmSettings {
    fn default() -> Self {
        Self::for_dimension(1)
    }
}

struct Spectral {
    grid: TensorGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `|k|⁴` per flat index.
    symbol: Vec<f64>,
}

fn rotate_axes(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    let rest = src.len() / n;
    dst.par_chunks_mut(rest).enumerate().for_each(|(k, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = src[i * n + k];
        }
    });
}

impl Spectral {
    fn new(grid: TensorGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points);
        let inverse = planner.plan_fft_inverse(grid.points);
        let symbol = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let ax = grid.axes(idx);
                let k2: f64 = (0..grid.dim).map(|a| grid.wavenumber(ax[a]).powi(2)).sum();
                k2 * k2
            })
            .collect();
        Self { grid, forward, inverse, symbol }
    }

    fn transform(&self, data: &mut Vec<Complex64>, inverse: bool) {
        let n = self.grid.points;
        let fft = if inverse { &self.inverse } else { &self.forward };
        let scratch_len = fft.get_inplace_scratch_len();
        let mut rotated = if self.grid.dim > 1 { vec![Complex64::new(0.0, 0.0); data.len()] } else { Vec::new() };
        for _ in 0..self.grid.dim {
            data.par_chunks_mut(n).for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, line| fft.process_with_scratch(line, scratch),
            );
            if self.grid.dim > 1 {
                rotate_axes(data, &mut rotated, n);
                std::mem::swap(data, &mut rotated);
            }
        }
        if inverse {
            let scale = 1.0 / data.len() as f64;
            data.par_iter_mut().for_each(|v| *v *= scale);
        }
    }

    fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, true);
        data.into_iter().map(|v| v.re).collect()
    }
}

fn nonlinear(values: &[f64], sigma: f64) -> Vec<f64> {
    values.par_iter().map(|&v| v.abs().powf(2.0 * sigma) * v).collect()
}

fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// One renormalized iterate with the integrals that produced it.
#[derive(Debug, Clone)]
pub struct SrmIterate {
    pub values: Vec<f64>,
    /// `C = (SL/SR)^{1/(2σ)}`, equal to one at a fixed point.
    pub renormalization: f64,
    pub sl: f64,
    pub sr: f64,
}

fn step_with(spectral: &Spectral, values: &[f64], sigma: f64, iteration: usize) -> Result<SrmIterate> {
    if values.iter().all(|&v| v == 0.0) {
        return Err(BnlsError::ZeroField);
    }
    let field_hat = spectral.forward_real(values);
    let nl_hat = spectral.forward_real(&nonlinear(values, sigma));
    let (sl, sr) = field_hat
        .par_iter()
        .zip(nl_hat.par_iter())
        .zip(spectral.symbol.par_iter())
        .map(|((f, g), k4)| (f.norm_sqr(), (g * f.conj()).re / (k4 + 1.0)))
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if !(sr > 0.0) || !sl.is_finite() || !sr.is_finite() {
        return Err(BnlsError::SrmDivergence { iteration, reason: format!("SR = {sr:e}") });
    }
    let ratio = sl / sr;
    let factor = ratio.powf(1.0 + 1.0 / (2.0 * sigma));
    let next_hat: Vec<Complex64> =
        nl_hat.into_par_iter().zip(spectral.symbol.par_iter()).map(|(g, k4)| g * (factor / (k4 + 1.0))).collect();
    let next = spectral.inverse_real(next_hat);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(BnlsError::SrmDivergence { iteration, reason: "non-finite iterate".into() });
    }
    Ok(SrmIterate { values: next, renormalization: ratio.powf(1.0 / (2.0 * sigma)), sl, sr })
}

/// A single spectral-renormalization update of `values` on `grid`.
pub fn srm_step(values: &[f64], grid: &TensorGrid, sigma: f64) -> Result<SrmIterate> {
    if values.len() != grid.len() {
        return Err(BnlsError::LengthMismatch { expected: grid.len(), got: values.len() });
    }
    step_with(&Spectral::new(*grid), values, sigma, 0)
}

fn residual_with(spectral: &Spectral, values: &[f64], sigma: f64, frequency: f64) -> f64 {
    let mut hat = spectral.forward_real(values);
    hat.par_iter_mut().zip(spectral.symbol.par_iter()).for_each(|(v, k4)| *v *= *k4);
    let bih = spectral.inverse_real(hat);
    let worst = values
        .par_iter()
        .zip(bih.par_iter())
        .map(|(&r, &b)| (-b - frequency * r + r.abs().powf(2.0 * sigma) * r).abs())
        .reduce(|| 0.0, f64::max);
    worst / sup_norm(values)
}

/// `‖-Δ²R - ωR + |R|^{2σ}R‖_∞ / ‖R‖_∞` with the biharmonic evaluated spectrally.
pub fn standing_wave_residual(values: &[f64], grid: &TensorGrid, sigma: f64, frequency: f64) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(BnlsError::LengthMismatch { expected: grid.len(), got: values.len() });
    }
    if values.iter().all(|&v| v == 0.0) {
        return Err(BnlsError::ZeroField);
    }
    Ok(residual_with(&Spectral::new(*grid), values, sigma, frequency))
}

/// `∫|f|²` on the tensor grid (rectangle rule, spectrally accurate for periodic data).
pub fn tensor_power(values: &[f64], grid: &TensorGrid) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()
}

/// `(‖ΔR‖², ∫|R|^{2σ+2}/(σ+1))` on the tensor grid, the first by Parseval.
pub fn tensor_hamiltonian_terms(values: &[f64], grid: &TensorGrid, sigma: f64) -> Result<(f64, f64)> {
    if values.len() != grid.len() {
        return Err(BnlsError::LengthMismatch { expected: grid.len(), got: values.len() });
    }
    let spectral = Spectral::new(*grid);
    let hat = spectral.forward_real(values);
    let kinetic = hat.par_iter().zip(spectral.symbol.par_iter()).map(|(v, k4)| k4 * v.norm_sqr()).sum::<f64>()
        * grid.cell_volume()
        / grid.len() as f64;
    let potential = values.par_iter().map(|v| v.abs().powf(2.0 * sigma + 2.0)).sum::<f64>() * grid.cell_volume() / (sigma + 1.0);
    Ok((kinetic, potential))
}

/// A converged standing wave.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub grid: TensorGrid,
    pub sigma: f64,
    pub values: Vec<f64>,
    pub power: f64,
    pub residual: f64,
    /// `|SL/SR - 1|` at the final iterate.
    pub integral_mismatch: f64,
    pub iterations: usize,
    pub guess_amplitude: f64,
}

impl GroundState {
    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Whether `σ d = 4`, where the power of the ground state is the critical power.
    pub fn is_critical(&self) -> bool {
        (self.sigma * self.grid.dim as f64 - 4.0).abs() < 1e-12
    }

    pub fn peak(&self) -> f64 {
        self.values[self.grid.origin_index()]
    }
}

/// Gaussian guess `A e^{-r²}` on the tensor grid.
pub fn gaussian_guess(grid: &TensorGrid, amplitude: f64) -> Vec<f64> {
    (0..grid.len()).into_par_iter().map(|idx| amplitude * (-grid.radius(idx).powi(2)).exp()).collect()
}

/// Iterates [`srm_step`] from `guess` until both the relative update and
/// `|C - 1|` drop below `tol`, then verifies the result.
pub fn srm_solve(guess: &[f64], grid: &TensorGrid, sigma: f64, tol: f64, max_iters: usize) -> Result<GroundState> {
    if guess.len() != grid.len() {
        return Err(BnlsError::LengthMismatch { expected: grid.len(), got: guess.len() });
    }
    if !(sigma > 0.0) {
        return Err(BnlsError::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    let spectral = Spectral::new(*grid);
    let mut current = guess.to_vec();
    for iteration in 1..=max_iters {
        let next = step_with(&spectral, &current, sigma, iteration)?;
        let scale = sup_norm(&current);
        let change = current.iter().zip(&next.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        current = next.values;
        if change < tol && (next.renormalization - 1.0).abs() < tol {
            return verify(spectral, current, sigma, iteration, next.sl, next.sr);
        }
    }
    Err(BnlsError::SrmMaxIterations(max_iters))
}

fn verify(spectral: Spectral, values: Vec<f64>, sigma: f64, iterations: usize, sl: f64, sr: f64) -> Result<GroundState> {
    let grid = spectral.grid;
    let residual = residual_with(&spectral, &values, sigma, 1.0);
    if !(residual < 1e-6) {
        return Err(BnlsError::GroundStateInvalid(format!("residual {residual:e}")));
    }
    let integral_mismatch = (sl / sr - 1.0).abs();
    if !(integral_mismatch < 1e-8) {
        return Err(BnlsError::GroundStateInvalid(format!("SL/SR - 1 = {integral_mismatch:e}")));
    }
    let peak = values[grid.origin_index()];
    if peak.abs() < sup_norm(&values) * (1.0 - 1e-9) {
        return Err(BnlsError::GroundStateInvalid("maximum is not at the origin".into()));
    }
    let power = tensor_power(&values, &grid);
    Ok(GroundState { grid, sigma, values, power, residual, integral_mismatch, iterations, guess_amplitude: f64::NAN })
}

/// Ground state from a Gaussian guess with the given settings.
pub fn solve_ground_state(dim: usize, sigma: f64, settings: &SrmSettings) -> Result<GroundState> {
    let grid = TensorGrid::new(dim, settings.half_width, settings.points)?;
    let guess = gaussian_guess(&grid, settings.guess_amplitude);
    let mut gs = srm_solve(&guess, &grid, sigma, settings.tol, settings.max_iters)?;
    gs.guess_amplitude = settings.guess_amplitude;
    Ok(gs)
}

/// `‖R‖₂²`, labelled as the critical power only when `σ d = 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerReport {
    pub value: f64,
    pub critical: bool,
}

pub fn critical_power(gs: &GroundState) -> PowerReport {
    PowerReport { value: tensor_power(&gs.values, &gs.grid), critical: gs.is_critical() }
}

/// Residual of the dilated field `λ^{2/σ} R(λx)` in the equation with
/// frequency `λ⁴`, sampled on the box shrunk by `λ`.
pub fn scale_covariance_residual(gs: &GroundState, lambda: f64) -> Result<f64> {
    let grid = TensorGrid::new(gs.grid.dim, gs.grid.half_width / lambda, gs.grid.points)?;
    let amp = lambda.powf(2.0 / gs.sigma);
    let values: Vec<f64> = gs.values.iter().map(|v| amp * v).collect();
    standing_wave_residual(&values, &grid, gs.sigma, lambda.powi(4))
}

/// Radial samples of a ground state and its departure from radial symmetry.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
    /// Largest standard deviation over sampled spherical shells, relative to `‖R‖_∞`.
    pub asymmetry: f64,
}

impl RadialProfile {
    pub fn to_snapshot(&self, sigma: f64) -> Result<FieldSnapshot> {
        let values = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FieldSnapshot::new(Arc::clone(&self.grid), values, PreciseTime::ZERO, sigma)
    }

    /// Number of sign changes along the profile, ignoring the numerically zero tail.
    pub fn sign_changes(&self) -> usize {
        let floor = 1e-8 * sup_norm(&self.values);
        let signs: Vec<bool> = self.values.iter().filter(|v| v.abs() > floor).map(|&v| v > 0.0).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

fn phases(grid: &TensorGrid, x: f64) -> Vec<Complex64> {
    (0..grid.points).map(|j| Complex64::from_polar(1.0, grid.wavenumber(j) * (x + grid.half_width))).collect()
}

/// Trigonometric interpolant of the field at arbitrary points.
fn evaluate_points(grid: &TensorGrid, hat: &[Complex64], points: &[[f64; 3]]) -> Vec<f64> {
    let n = grid.points;
    let norm = 1.0 / grid.len() as f64;
    points
        .par_iter()
        .map(|p| {
            let e: Vec<Vec<Complex64>> = (0..grid.dim).map(|a| phases(grid, p[a])).collect();
            let sum = match grid.dim {
                1 => hat.iter().zip(&e[0]).map(|(h, x)| h * x).sum::<Complex64>(),
                2 => hat
                    .chunks(n)
                    .zip(&e[0])
                    .map(|(row, x0)| x0 * row.iter().zip(&e[1]).map(|(h, x)| h * x).sum::<Complex64>())
                    .sum(),
                _ => hat
                    .chunks(n * n)
                    .zip(&e[0])
                    .map(|(plane, x0)| {
                        x0 * plane
                            .chunks(n)
                            .zip(&e[1])
                            .map(|(row, x1)| x1 * row.iter().zip(&e[2]).map(|(h, x)| h * x).sum::<Complex64>())
                            .sum::<Complex64>()
                    })
                    .sum(),
            };
            sum.re * norm
        })
        .collect()
}

fn shell_directions(dim: usize) -> Vec<[f64; 3]> {
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..24)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.37) / 24.0;
                [th.cos(), th.sin(), 0.0]
            })
            .collect(),
        _ => {
            // Fibonacci lattice on the sphere
            let count = 26;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let s = (1.0 - z * z).sqrt();
                    let ph = golden * i as f64;
                    [s * ph.cos(), s * ph.sin(), z]
                })
                .collect()
        }
    }
}

/// Samples the ground state along the first axis at `nodes` uniform radii on
/// `[0, X]` and measures the spread over spherical shells.
pub fn radial_profile(gs: &GroundState, nodes: usize) -> Result<RadialProfile> {
    let grid = gs.grid;
    let rgrid = Arc::new(RadialGrid::uniform(nodes, grid.half_width, grid.dim)?);
    let spectral = Spectral::new(grid);
    let hat = spectral.forward_real(&gs.values);
    let n = grid.points;
    // sum out the transverse axes: the other coordinates are zero, so their
    // phases are (-1)^k
    let rest = grid.len() / n;
    let line: Vec<Complex64> = hat
        .chunks(rest)
        .map(|block| {
            block
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    let mut idx = i;
                    let mut parity = 0usize;
                    for _ in 1..grid.dim {
                        let j = idx % n;
                        idx /= n;
                        let signed = if j < n / 2 { j } else { n - j };
                        parity += signed;
                    }
                    if parity % 2 == 0 { *h } else { -h }
                })
                .sum()
        })
        .collect();
    let norm = 1.0 / grid.len() as f64;
    let values: Vec<f64> = rgrid
        .nodes()
        .par_iter()
        .map(|&r| phases(&grid, r).iter().zip(&line).map(|(e, h)| e * h).sum::<Complex64>().re * norm)
        .collect();

    let peak = sup_norm(&gs.values);
    let dirs = shell_directions(grid.dim);
    let radii: Vec<f64> = (1..=8).map(|i| i as f64 * grid.half_width / 16.0).collect();
    let points: Vec<[f64; 3]> =
        radii.iter().flat_map(|&r| dirs.iter().map(move |d| [r * d[0], r * d[1], r * d[2]])).collect();
    let samples = evaluate_points(&grid, &hat, &points);
    let asymmetry = samples
        .chunks(dirs.len())
        .map(|shell| {
            let mean = shell.iter().sum::<f64>() / shell.len() as f64;
            (shell.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / shell.len() as f64).sqrt()
        })
        .fold(0.0, f64::max)
        / peak;
    Ok(RadialProfile { grid: rgrid, values, asymmetry })
}

/// Metadata written next to an exported ground-state profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateMetadata {
    pub dim: usize,
    pub sigma: f64,
    pub half_width: f64,
    pub points: usize,
    pub power: f64,
    pub critical: bool,
    pub residual: f64,
    pub integral_mismatch: f64,
    pub asymmetry: f64,
    pub iterations: usize,
    pub guess: String,
    pub sign_changes: usize,
}

/// Writes `<stem>.dat` (snapshot text) and `<stem>.json` (metadata).
pub fn export_ground_state(gs: &GroundState, profile: &RadialProfile, dir: &Path, stem: &str) -> Result<GroundStateMetadata> {
    let meta = GroundStateMetadata {
        dim: gs.grid.dim,
        sigma: gs.sigma,
        half_width: gs.grid.half_width,
        points: gs.grid.points,
        power: gs.power,
        critical: gs.is_critical(),
        residual: gs.residual,
        integral_mismatch: gs.integral_mismatch,
        asymmetry: profile.asymmetry,
        iterations: gs.iterations,
        guess: format!("{} exp(-r^2)", gs.guess_amplitude),
        sign_changes: profile.sign_changes(),
    };
    let snapshot = profile.to_snapshot(gs.sigma)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.dat")))?);
    snapshot.write_to(&mut f)?;
    f.flush()?;
    let json = serde_json::to_string_pretty(&meta).map_err(|e| BnlsError::Parse(e.to_string()))?;
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(points: usize) -> SrmSettings {
        SrmSettings { points, ..SrmSettings::for_dimension(1) }
    }

    #[test]
    fn fft_round_trip_in_three_dimensions() {
        let grid = TensorGrid::new(3, 4.0, 16).unwrap();
        let spectral = Spectral::new(grid);
        let values: Vec<f64> = (0..grid.len()).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let back = spectral.inverse_real(spectral.forward_real(&values));
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn spectral_biharmonic_of_gaussian() {
        let grid = TensorGrid::new(2, 12.0, 128).unwrap();
        let values = gaussian_guess(&grid, 1.0);
        let spectral = Spectral::new(grid);
        let mut hat = spectral.forward_real(&values);
        hat.iter_mut().zip(&spectral.symbol).for_each(|(v, k4)| *v *= *k4);
        let bih = spectral.inverse_real(hat);
        for idx in (0..grid.len()).step_by(97) {
            let r2 = grid.radius(idx).powi(2);
            let exact = (16.0 * r2 * r2 - 64.0 * r2 + 32.0) * (-r2).exp();
            assert!((bih[idx] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn one_dimensional_ground_state() {
        let gs = solve_ground_state(1, 4.0, &settings(512)).unwrap();
        assert!(gs.is_critical());
        assert!((gs.power - 2.9868).abs() / 2.9868 < 0.01, "P = {}", gs.power);
        assert!(gs.residual < 1e-6);

        // the converged state is a fixed point of the step
        let next = srm_step(&gs.values, &gs.grid, gs.sigma).unwrap();
        assert!((next.renormalization - 1.0).abs() < 1e-10);
        let change = gs.values.iter().zip(&next.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(change / gs.peak() < 1e-10);

        let profile = radial_profile(&gs, 257).unwrap();
        // uniform profile nodes coincide with the positive half of the box
        let c = gs.grid.points / 2;
        for (i, v) in profile.values.iter().enumerate().take(100) {
            assert!((v - gs.values[c + i]).abs() < 1e-12);
        }
        assert!(profile.asymmetry < 1e-10);
        assert!(profile.sign_changes() >= 1);

        let p = critical_power(&gs);
        assert!(p.critical && (p.value - gs.power).abs() < 1e-12);
        let doubled: Vec<f64> = gs.values.iter().map(|v| 2.0 * v).collect();
        assert!((tensor_power(&doubled, &gs.grid) - 4.0 * gs.power).abs() < 1e-12 * gs.power);
        assert_eq!(tensor_power(&vec![0.0; gs.grid.len()], &gs.grid), 0.0);

        assert!(scale_covariance_residual(&gs, 2.0).unwrap() < 1e-5);
    }

    #[test]
    fn box_size_does_not_change_power() {
        let small = solve_ground_state(1, 4.0, &settings(512)).unwrap();
        let big = solve_ground_state(1, 4.0, &SrmSettings { half_width: 32.0, ..settings(1024) }).unwrap();
        assert!((small.power - big.power).abs() / small.power < 1e-3);
    }

    #[test]
    fn subcritical_power_is_not_labelled_critical() {
        let gs = solve_ground_state(1, 2.0, &settings(256)).unwrap();
        assert!(!critical_power(&gs).critical);
    }

    #[test]
    fn zero_guess_is_rejected() {
        let grid = TensorGrid::new(1, 16.0, 64).unwrap();
        assert!(matches!(srm_step(&vec![0.0; 64], &grid, 4.0), Err(BnlsError::ZeroField)));
    }
}
