//! Radial grids, complex fields on them, quadrature and interpolation.
//!
//! Every field is radial and even in `r`: stencils and interpolation
//! windows that reach below `r = 0` use the mirrored node `-r_j` carrying
//! the value at `r_j`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{BnlsError, Result};
use crate::precise::PreciseTime;
use crate::stencil::{lagrange_weights, GAUSS6};

/// Smallest node count that leaves room for a seven-point stencil plus closures.
pub const MIN_NODES: usize = 16;

/// Area of the unit sphere in `R^d`; for `d = 1` the two half-lines.
pub fn surface_constant(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    dim: usize,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(nodes: Vec<f64>, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(BnlsError::UnsupportedDimension(dim));
        }
        if nodes.len() < MIN_NODES {
            return Err(BnlsError::TooFewNodes { min: MIN_NODES, got: nodes.len() });
        }
        if nodes[0] != 0.0 {
            return Err(BnlsError::NonMonotoneGrid(0));
        }
        for m in 1..nodes.len() {
            if !(nodes[m] > nodes[m - 1]) || !nodes[m].is_finite() {
                return Err(BnlsError::NonMonotoneGrid(m));
            }
        }
        let weights = quadrature_weights(&nodes, dim);
        Ok(Self { nodes, dim, weights })
    }

    /// Uniform nodes `r_m = m R_max / (M - 1)`.
    pub fn uniform(m: usize, r_max: f64, dim: usize) -> Result<Self> {
        if m < MIN_NODES {
            return Err(BnlsError::TooFewNodes { min: MIN_NODES, got: m });
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(BnlsError::NonPositiveRadius(r_max));
        }
        let h = r_max / (m - 1) as f64;
        let mut nodes: Vec<f64> = (0..m).map(|i| i as f64 * h).collect();
        nodes[m - 1] = r_max;
        Self::new(nodes, dim)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `Δr_m = r_{m+1} - r_m` for `m = 0..M-1`.
    pub fn spacings(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `Δ²r_m = Δr_{m+1} - Δr_m` for `m = 0..M-2`.
    pub fn second_differences(&self) -> Vec<f64> {
        let dr = self.spacings();
        dr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Largest ratio between adjacent spacings, taken in either direction.
    pub fn max_spacing_ratio(&self) -> f64 {
        let dr = self.spacings();
        dr.windows(2).map(|w| (w[1] / w[0]).max(w[0] / w[1])).fold(1.0, f64::max)
    }

    /// Quadrature weights including the sphere surface constant.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f r^{d-1} dS` over the ball of radius `R_max`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    /// Number of nodes with `r < radius`.
    pub fn count_below(&self, radius: f64) -> usize {
        self.nodes.partition_point(|&r| r < radius)
    }

    /// Position of node `i`, mirrored through the origin for negative `i`.
    #[inline]
    pub(crate) fn mirrored_position(&self, i: isize) -> f64 {
        if i < 0 {
            -self.nodes[(-i) as usize]
        } else {
            self.nodes[i as usize]
        }
    }

    /// Index of the interval `[r_m, r_{m+1}]` containing `r` (clamped).
    pub(crate) fn interval_of(&self, r: f64) -> usize {
        let p = self.nodes.partition_point(|&x| x <= r);
        p.saturating_sub(1).min(self.len() - 2)
    }
}

/// Composite rule integrating, on every interval, the degree-seven
/// interpolant through the eight surrounding nodes (even-reflected at the
/// origin), times the exact radial weight `r^{d-1}`.
fn quadrature_weights(nodes: &[f64], dim: usize) -> Vec<f64> {
    let m_count = nodes.len();
    let surface = surface_constant(dim);
    let mut weights = vec![0.0; m_count];
    let position = |i: isize| if i < 0 { -nodes[(-i) as usize] } else { nodes[i as usize] };
    let mut window = [0.0f64; 8];
    for m in 0..m_count - 1 {
        let mut start = m as isize - 3;
        if start + 7 > m_count as isize - 1 {
            start = m_count as isize - 8;
        }
        for (k, w) in window.iter_mut().enumerate() {
            *w = position(start + k as isize);
        }
        let (a, b) = (nodes[m], nodes[m + 1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(xg, wg) in GAUSS6.iter() {
            let x = mid + half * xg;
            let radial = x.powi(dim as i32 - 1);
            let basis = lagrange_weights(x, &window);
            for (k, l) in basis.iter().enumerate() {
                let j = (start + k as isize).unsigned_abs();
                weights[j] += surface * wg * half * radial * l;
            }
        }
    }
    weights
}

/// Seven-node interpolation window for a point in interval `m`.
fn interpolation_window(grid: &RadialGrid, m: usize, x: f64) -> isize {
    let n = grid.len() as isize;
    let m = m as isize;
    let mut start = m - 3;
    // prefer the more centred of the two candidate windows
    if m + 4 <= n - 1 && grid.mirrored_position(m + 4) - x < x - grid.mirrored_position(m - 3) {
        start = m - 2;
    }
    if start + 6 > n - 1 {
        start = n - 7;
    }
    start
}

/// Degree-six local interpolation of node values onto arbitrary radii.
pub fn interpolate_values(
    grid: &RadialGrid,
    values: &[Complex64],
    targets: &[f64],
) -> Result<Vec<Complex64>> {
    if values.len() != grid.len() {
        return Err(BnlsError::LengthMismatch { expected: grid.len(), got: values.len() });
    }
    let r_max = grid.r_max();
    let mut out = Vec::with_capacity(targets.len());
    let mut window = [0.0f64; 7];
    for (index, &r) in targets.iter().enumerate() {
        if !(r >= 0.0) || r > r_max * (1.0 + 1e-14) {
            return Err(BnlsError::OutsideRange { index, r, r_max });
        }
        let r = r.min(r_max);
        let m = grid.interval_of(r);
        let start = interpolation_window(grid, m, r);
        for (k, w) in window.iter_mut().enumerate() {
            *w = grid.mirrored_position(start + k as isize);
        }
        let basis = lagrange_weights(r, &window);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, l) in basis.iter().enumerate() {
            acc += values[(start + k as isize).unsigned_abs()] * *l;
        }
        out.push(acc);
    }
    Ok(out)
}

/// A complex radial field at one instant.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    grid: Arc<RadialGrid>,
    values: Vec<Complex64>,
    time: PreciseTime,
    sigma: f64,
}

impl FieldSnapshot {
    pub fn new(
        grid: Arc<RadialGrid>,
        values: Vec<Complex64>,
        time: PreciseTime,
        sigma: f64,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BnlsError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(BnlsError::NonFinite(i));
        }
        Ok(Self { grid, values, time, sigma })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<RadialGrid> {
        Arc::clone(&self.grid)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn time(&self) -> PreciseTime {
        self.time
    }

    pub fn t(&self) -> f64 {
        self.time.value()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `‖ψ‖₂²`.
    pub fn power(&self) -> f64 {
        let dens: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        self.grid.integrate(&dens)
    }

    /// Writes the text snapshot: a header `d, sigma, t, M`, then `r, Re ψ, Im ψ` rows.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{}, {:.16e}, {:.16e}, {}",
            self.dim(),
            self.sigma,
            self.t(),
            self.values.len()
        )?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(out, "{:.16e}, {:.16e}, {:.16e}", r, v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| BnlsError::Parse("empty snapshot".into()))??;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(BnlsError::Parse(format!("bad snapshot header: {header}")));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| BnlsError::Parse(format!("{s}: {e}")));
        let parse_u = |s: &str| s.parse::<usize>().map_err(|e| BnlsError::Parse(format!("{s}: {e}")));
        let dim = parse_u(fields[0])?;
        let sigma = parse_f(fields[1])?;
        let t = parse_f(fields[2])?;
        let m = parse_u(fields[3])?;
        let mut nodes = Vec::with_capacity(m);
        let mut values = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(BnlsError::Parse(format!("bad snapshot row: {line}")));
            }
            nodes.push(parse_f(cols[0])?);
            values.push(Complex64::new(parse_f(cols[1])?, parse_f(cols[2])?));
        }
        if nodes.len() != m {
            return Err(BnlsError::LengthMismatch { expected: m, got: nodes.len() });
        }
        let grid = Arc::new(RadialGrid::new(nodes, dim)?);
        Self::new(grid, values, PreciseTime::from_f64(t), sigma)
    }
}

/// Interpolates a snapshot onto another grid spanning part of its range.
pub fn interpolate_to_grid(src: &FieldSnapshot, dst: Arc<RadialGrid>) -> Result<FieldSnapshot> {
    let values = interpolate_values(src.grid(), src.values(), dst.nodes())?;
    FieldSnapshot::new(dst, values, src.time(), src.sigma())
}

/// Initial data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `A exp(-r^k)`.
    Gaussian { amplitude: f64, exponent: f64 },
    /// `c R(r)` with `R` a computed ground state.
    GroundState {
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<String>,
    },
}

impl InitialCondition {
    pub fn gaussian(amplitude: f64, exponent: f64) -> Self {
        Self::Gaussian { amplitude, exponent }
    }
}

/// Evaluates the initial condition at `t = 0`. A ground-state descriptor
/// needs the ground-state radial profile; it is taken as zero beyond the
/// profile's last node.
pub fn evaluate_initial_condition(
    ic: &InitialCondition,
    grid: Arc<RadialGrid>,
    sigma: f64,
    ground_state: Option<&FieldSnapshot>,
) -> Result<FieldSnapshot> {
    let values = match ic {
        InitialCondition::Gaussian { amplitude, exponent } => grid
            .nodes()
            .iter()
            .map(|&r| Complex64::new(amplitude * (-r.powf(*exponent)).exp(), 0.0))
            .collect(),
        InitialCondition::GroundState { scale, .. } => {
            let gs = ground_state.ok_or(BnlsError::MissingGroundState)?;
            let limit = gs.grid().r_max();
            let inside: Vec<f64> = grid.nodes().iter().copied().take_while(|&r| r <= limit).collect();
            let mut values = interpolate_values(gs.grid(), gs.values(), &inside)?;
            values.resize(grid.len(), Complex64::new(0.0, 0.0));
            values.iter_mut().for_each(|v| *v *= *scale);
            values
        }
    };
    FieldSnapshot::new(grid, values, PreciseTime::ZERO, sigma)
}

/// Closed-form `‖A exp(-r^k)‖₂²` in dimension `d`.
pub fn gaussian_power(amplitude: f64, exponent: f64, dim: usize) -> f64 {
    let a = dim as f64 / exponent;
    amplitude * amplitude * surface_constant(dim) * gamma(a) / (exponent * 2f64.powf(a))
}

/// Amplitude of `A exp(-r^k)` carrying the given power.
pub fn gaussian_amplitude_for_power(power: f64, exponent: f64, dim: usize) -> f64 {
    (power / gaussian_power(1.0, exponent, dim)).sqrt()
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for positive arguments.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + G + 0.5;
        for (i, c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_nodes_and_spacing() {
        let g = RadialGrid::uniform(17, 16.0, 1).unwrap();
        for (m, r) in g.nodes().iter().enumerate() {
            assert_eq!(*r, m as f64);
        }
        let g = RadialGrid::uniform(16, 1.0, 2).unwrap();
        for dr in g.spacings() {
            assert!((dr - 1.0 / 15.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(RadialGrid::uniform(5, 4.0, 1), Err(BnlsError::TooFewNodes { .. })));
        assert!(matches!(RadialGrid::uniform(32, 0.0, 1), Err(BnlsError::NonPositiveRadius(_))));
        assert!(matches!(RadialGrid::uniform(32, -1.0, 1), Err(BnlsError::NonPositiveRadius(_))));
        let mut nodes: Vec<f64> = (0..20).map(|i| i as f64).collect();
        nodes[7] = nodes[6];
        assert!(matches!(RadialGrid::new(nodes, 1), Err(BnlsError::NonMonotoneGrid(7))));
    }

    #[test]
    fn quadrature_examples() {
        let g = RadialGrid::uniform(101, 1.0, 1).unwrap();
        let ones = vec![1.0; g.len()];
        assert!((g.integrate(&ones) - 2.0).abs() < 1e-13);

        let g2 = RadialGrid::uniform(2001, 20.0, 2).unwrap();
        let f: Vec<f64> = g2.nodes().iter().map(|r| (-2.0 * r * r).exp()).collect();
        assert!((g2.integrate(&f) - PI / 2.0).abs() < 1e-10);

        let g1 = RadialGrid::uniform(2001, 20.0, 1).unwrap();
        let f: Vec<f64> = g1.nodes().iter().map(|r| (-2.0 * r * r).exp()).collect();
        assert!((g1.integrate(&f) - (PI / 2.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn gaussian_power_closed_forms() {
        assert!((gaussian_power(1.0, 2.0, 1) - (PI / 2.0).sqrt()).abs() < 1e-14);
        assert!((gaussian_power(1.0, 2.0, 2) - PI / 2.0).abs() < 1e-14);
        assert!((gaussian_power(1.0, 2.0, 3) - (PI / 2.0).powf(1.5)).abs() < 1e-13);
        assert!((gamma(0.25) - 3.625_609_908_221_908).abs() < 1e-12);
    }

    #[test]
    fn initial_condition_power_matches_closed_form() {
        for (dim, amp) in [(1usize, 1.618), (2, 3.034), (3, 2.0)] {
            let g = Arc::new(RadialGrid::uniform(4001, 12.0, dim).unwrap());
            let snap = evaluate_initial_condition(&InitialCondition::gaussian(amp, 2.0), g, 4.0 / dim as f64, None)
                .unwrap();
            let exact = gaussian_power(amp, 2.0, dim);
            assert!(((snap.power() - exact) / exact).abs() < 1e-8, "d={dim}");
        }
        let g = Arc::new(RadialGrid::uniform(64, 4.0, 1).unwrap());
        let zero = evaluate_initial_condition(&InitialCondition::gaussian(0.0, 2.0), g, 4.0, None).unwrap();
        assert_eq!(zero.power(), 0.0);
        assert!(zero.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn ground_state_descriptor_requires_profile() {
        let g = Arc::new(RadialGrid::uniform(64, 4.0, 1).unwrap());
        let ic = InitialCondition::GroundState { scale: 1.001, file: None };
        assert!(matches!(
            evaluate_initial_condition(&ic, g, 4.0, None),
            Err(BnlsError::MissingGroundState)
        ));
    }

    #[test]
    fn interpolation_polynomial_exactness() {
        let nodes: Vec<f64> = (0..40).map(|i| (i as f64 / 39.0).powf(1.5) * 3.0).collect();
        let src = RadialGrid::new(nodes, 1).unwrap();
        let targets: Vec<f64> = (0..57).map(|i| 3.0 * i as f64 / 56.0).collect();
        for p in [2, 4, 6] {
            let vals: Vec<Complex64> = src.nodes().iter().map(|r| Complex64::new(r.powi(p), 0.0)).collect();
            let out = interpolate_values(&src, &vals, &targets).unwrap();
            for (r, v) in targets.iter().zip(&out) {
                let exact = r.powi(p);
                assert!((v.re - exact).abs() <= 1e-10 * exact.max(1e-3), "p={p} r={r}");
            }
        }
    }

    #[test]
    fn interpolation_of_gaussian_onto_nonuniform_grid() {
        let src = RadialGrid::uniform(2001, 10.0, 1).unwrap();
        let vals: Vec<Complex64> = src.nodes().iter().map(|r| Complex64::new((-r * r).exp(), 0.0)).collect();
        let targets: Vec<f64> = (0..501).map(|i| 10.0 * (i as f64 / 500.0).powi(2)).collect();
        let out = interpolate_values(&src, &vals, &targets).unwrap();
        let err = targets.iter().zip(&out).map(|(r, v)| (v.re - (-r * r).exp()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err:e}");
    }

    #[test]
    fn interpolation_rejects_points_outside() {
        let src = RadialGrid::uniform(32, 1.0, 1).unwrap();
        let vals = vec![Complex64::new(1.0, 0.0); 32];
        assert!(matches!(
            interpolate_values(&src, &vals, &[0.5, 1.5]),
            Err(BnlsError::OutsideRange { index: 1, .. })
        ));
    }

    #[test]
    fn snapshot_text_round_trip() {
        let g = Arc::new(RadialGrid::uniform(20, 2.0, 2).unwrap());
        let vals: Vec<Complex64> = g.nodes().iter().map(|r| Complex64::new(r.cos() / 3.0, r.sin() * 1e-7)).collect();
        let snap = FieldSnapshot::new(g, vals, PreciseTime::from_f64(0.0123), 2.0).unwrap();
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        let back = FieldSnapshot::read_from(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.grid().nodes(), snap.grid().nodes());
        assert_eq!(back.values(), snap.values());
        assert_eq!(back.t(), 0.0123);
        assert_eq!(back.dim(), 2);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let g = Arc::new(RadialGrid::uniform(20, 2.0, 1).unwrap());
        let mut vals = vec![Complex64::new(0.0, 0.0); 20];
        vals[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(FieldSnapshot::new(g, vals, PreciseTime::ZERO, 4.0), Err(BnlsError::NonFinite(3))));
    }
}
