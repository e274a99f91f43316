//! Static grid redistribution: a new grid with the same node count that
//! equidistributes a composite weight built from the field gradient, the
//! local spacing and the second difference of the node positions.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{BnlsError, Result};
use crate::grid::{interpolate_to_grid, FieldSnapshot, RadialGrid};
use crate::stencil::fornberg_weights;

/// Parameters of the redistribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgrSettings {
    /// Multiplies `|ψ_r| / ‖ψ‖_∞` inside `w1`; sets the share of nodes in the core.
    pub monitor_scale: f64,
    /// Spacing scale of `w2`.
    pub spacing_cap: f64,
    /// Coefficient of `w2` in the composite weight.
    pub alpha: f64,
    /// Coefficient of `w3` in the composite weight.
    pub beta: f64,
    /// Upper bound on adjacent spacing ratios enforced by the density limiter.
    pub ratio_limit: f64,
    pub max_iters: usize,
    /// Convergence threshold for node motion, relative to the local spacing.
    pub move_tol: f64,
    /// Regrid when `L` has shrunk by this factor since the last regrid.
    pub trigger_ratio: f64,
    /// Minimum number of nodes in `r < core_radius·L`.
    pub core_nodes: usize,
    pub core_radius: f64,
}

impl Default for SgrSettings {
    fn default() -> Self {
        Self {
            monitor_scale: 40.0,
            spacing_cap: 0.05,
            alpha: 1.0,
            beta: 1.0,
            ratio_limit: 1.05,
            max_iters: 10,
            move_tol: 1e-3,
            trigger_ratio: 1.25,
            core_nodes: 64,
            core_radius: 4.0,
        }
    }
}

/// Gradient monitor `sqrt(1 + s²|ψ_r|²/‖ψ‖_∞²)` with monitor scale `s`.
pub fn weight_w1_scaled(snapshot: &FieldSnapshot, scale: f64) -> Result<Vec<f64>> {
    let peak = snapshot.max_amplitude();
    let grid = snapshot.grid();
    let n = grid.len();
    if peak == 0.0 {
        return Ok(vec![1.0; n]);
    }
    let nodes = grid.nodes();
    let values = snapshot.values();
    let mut window = [0.0f64; 7];
    let mut w = Vec::with_capacity(n);
    for m in 0..n {
        // seven nearest nodes, mirrored through the origin, shifted inward at the top
        let start = (m as isize - 3).min(n as isize - 7);
        for (k, x) in window.iter_mut().enumerate() {
            let i = start + k as isize;
            *x = if i < 0 { -nodes[(-i) as usize] } else { nodes[i as usize] };
        }
        let c = fornberg_weights(nodes[m], &window, 1);
        let g: Complex64 = (0..7).map(|k| values[(start + k as isize).unsigned_abs()] * c[1][k]).sum();
        w.push((1.0 + (scale * g.norm() / peak).powi(2)).sqrt());
    }
    Ok(w)
}

/// Arc-length monitor `sqrt(1 + |ψ_r|²/‖ψ‖_∞²)`.
pub fn weight_w1(snapshot: &FieldSnapshot) -> Result<Vec<f64>> {
    weight_w1_scaled(snapshot, 1.0)
}

/// Spacing penalty `sqrt(1 + (Δr_m/cap)²)`; the last node reuses the last interval.
pub fn weight_w2(grid: &RadialGrid, cap: f64) -> Vec<f64> {
    let dr = grid.spacings();
    let mut w: Vec<f64> = dr.iter().map(|h| (1.0 + (h / cap).powi(2)).sqrt()).collect();
    w.push(*w.last().unwrap());
    w
}

/// Second-difference penalty `sqrt(1 + |Δ²r_m|/Δr_m)` with `Δ²r_m = Δr_m - Δr_{m-1}`.
pub fn weight_w3(grid: &RadialGrid) -> Vec<f64> {
    let dr = grid.spacings();
    let n = grid.len();
    let mut w = vec![1.0; n];
    for m in 1..n - 1 {
        w[m] = (1.0 + (dr[m] - dr[m - 1]).abs() / dr[m]).sqrt();
    }
    w[0] = w[1];
    w[n - 1] = w[n - 2];
    w
}

/// Per-node weights contributing to a redistribution.
#[derive(Debug, Clone)]
pub struct WeightProfile {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
    pub composite: Vec<f64>,
}

impl WeightProfile {
    pub fn new(w1: Vec<f64>, w2: Vec<f64>, w3: Vec<f64>, alpha: f64, beta: f64) -> Self {
        let composite = w1.iter().zip(&w2).zip(&w3).map(|((a, b), c)| a + alpha * b + beta * c).collect();
        Self { w1, w2, w3, composite }
    }
}

fn check_weights(positions: &[f64], weights: &[f64]) -> Result<()> {
    if positions.len() != weights.len() {
        return Err(BnlsError::LengthMismatch { expected: positions.len(), got: weights.len() });
    }
    if positions.len() < 2 {
        return Err(BnlsError::TooFewNodes { min: 2, got: positions.len() });
    }
    if let Some((i, &w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0) || !w.is_finite()) {
        return Err(BnlsError::NonPositiveWeight { index: i, value: w });
    }
    Ok(())
}

fn cumulative(positions: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(positions.len());
    c.push(0.0);
    for i in 1..positions.len() {
        let seg = 0.5 * (weights[i] + weights[i - 1]) * (positions[i] - positions[i - 1]);
        c.push(c[i - 1] + seg);
    }
    c
}

/// Builds `m` nodes on `[positions[0], positions.last()]` such that the
/// piecewise-linear weight has the same integral over every interval.
pub fn equidistribute(positions: &[f64], weights: &[f64], m: usize, dim: usize) -> Result<RadialGrid> {
    check_weights(positions, weights)?;
    let cum = cumulative(positions, weights);
    let total = *cum.last().unwrap();
    let mut nodes = Vec::with_capacity(m);
    nodes.push(positions[0]);
    let mut seg = 0;
    for k in 1..m - 1 {
        let target = total * k as f64 / (m - 1) as f64;
        while cum[seg + 1] < target {
            seg += 1;
        }
        let (a, b) = (positions[seg], positions[seg + 1]);
        let (wa, wb) = (weights[seg], weights[seg + 1]);
        let slope = (wb - wa) / (b - a);
        let need = target - cum[seg];
        // solve wa t + slope t²/2 = need in the stable form
        let t = 2.0 * need / (wa + (wa * wa + 2.0 * slope * need).max(0.0).sqrt());
        nodes.push((a + t).min(b));
    }
    nodes.push(*positions.last().unwrap());
    RadialGrid::new(nodes, dim)
}

/// Integral of the piecewise-linear weight over each interval of `grid`.
pub fn interval_integrals(positions: &[f64], weights: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let cum = cumulative(positions, weights);
    let at = |r: f64| {
        let i = positions.partition_point(|&x| x <= r).clamp(1, positions.len() - 1) - 1;
        let (a, b) = (positions[i], positions[i + 1]);
        let slope = (weights[i + 1] - weights[i]) / (b - a);
        let t = r - a;
        cum[i] + weights[i] * t + 0.5 * slope * t * t
    };
    grid.nodes().windows(2).map(|w| at(w[1]) - at(w[0])).collect()
}

/// Max relative deviation of the interval integrals from their mean.
pub fn equidistribution_residual(positions: &[f64], weights: &[f64], grid: &RadialGrid) -> f64 {
    let parts = interval_integrals(positions, weights, grid);
    let mean = parts.iter().sum::<f64>() / parts.len() as f64;
    parts.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max) / mean
}

fn linear_resample(src: &[f64], values: &[f64], targets: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(targets.len());
    let mut i = 0;
    for &x in targets {
        while i + 2 < src.len() && src[i + 1] <= x {
            i += 1;
        }
        let t = ((x - src[i]) / (src[i + 1] - src[i])).clamp(0.0, 1.0);
        out.push(values[i] + t * (values[i + 1] - values[i]));
    }
    out
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        if out.last().map_or(true, |&l: &f64| next > l) {
            out.push(next);
        }
    }
    out
}

/// Raises the weight so that `1/w` is Lipschitz with constant `(limit - 1)·c`,
/// where `c` is the per-interval integral of the limited weight for `m` nodes.
/// A spacing `h ∝ 1/w` then grows by at most the limit between neighbours.
fn limit_density(positions: &[f64], weights: &mut [f64], m: usize, limit: f64) {
    let base: Vec<f64> = weights.to_vec();
    let mut per_interval = *cumulative(positions, weights).last().unwrap() / (m - 1) as f64;
    for _ in 0..20 {
        let slope = (limit - 1.0) / per_interval;
        let mut f: Vec<f64> = base.iter().map(|w| 1.0 / w).collect();
        for i in 1..f.len() {
            f[i] = f[i].min(f[i - 1] + slope * (positions[i] - positions[i - 1]));
        }
        for i in (0..f.len() - 1).rev() {
            f[i] = f[i].min(f[i + 1] + slope * (positions[i + 1] - positions[i]));
        }
        for (w, fi) in weights.iter_mut().zip(&f) {
            *w = 1.0 / fi;
        }
        let next = *cumulative(positions, weights).last().unwrap() / (m - 1) as f64;
        let done = (next - per_interval).abs() <= 1e-9 * next;
        per_interval = next;
        if done {
            break;
        }
    }
}

/// Result of [`regrid`].
#[derive(Debug, Clone)]
pub struct RegridOutcome {
    pub snapshot: FieldSnapshot,
    pub weights: WeightProfile,
    pub iterations: usize,
    pub converged: bool,
    /// Largest node motion in the last iteration, relative to the local spacing.
    pub last_move: f64,
    pub power_change: f64,
}

impl RegridOutcome {
    pub fn grid(&self) -> &RadialGrid {
        self.snapshot.grid()
    }

    /// Writes `m, r_m, Δr_m, w1, w2, w3` rows for the final grid.
    pub fn write_trace<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m,r,dr,w1,w2,w3")?;
        let g = self.grid();
        let dr = g.spacings();
        for (m, r) in g.nodes().iter().enumerate() {
            let h = dr.get(m).copied().unwrap_or(dr[dr.len() - 1]);
            writeln!(
                out,
                "{m},{r:.16e},{h:.16e},{:.16e},{:.16e},{:.16e}",
                self.weights.w1[m], self.weights.w2[m], self.weights.w3[m]
            )?;
        }
        Ok(())
    }
}

/// Redistributes the snapshot's nodes and interpolates the field onto them.
pub fn regrid(snapshot: &FieldSnapshot, settings: &SgrSettings) -> Result<RegridOutcome> {
    let src = snapshot.grid();
    let m = src.len();
    let dim = src.dim();
    let w1_src = weight_w1_scaled(snapshot, settings.monitor_scale)?;
    let mut candidate = src.clone();
    let mut iterations = 0;
    let mut last_move = f64::INFINITY;
    while iterations < settings.max_iters {
        iterations += 1;
        let positions = merge_sorted(src.nodes(), candidate.nodes());
        let w1 = linear_resample(src.nodes(), &w1_src, &positions);
        let w2 = linear_resample(candidate.nodes(), &weight_w2(&candidate, settings.spacing_cap), &positions);
        let w3 = linear_resample(candidate.nodes(), &weight_w3(&candidate), &positions);
        let mut w: Vec<f64> = (0..positions.len())
            .map(|i| w1[i] + settings.alpha * w2[i] + settings.beta * w3[i])
            .collect();
        limit_density(&positions, &mut w, m, settings.ratio_limit);
        let next = equidistribute(&positions, &w, m, dim)?;
        let dr = next.spacings();
        last_move = next
            .nodes()
            .iter()
            .zip(candidate.nodes())
            .enumerate()
            .map(|(i, (a, b))| (a - b).abs() / dr[i.min(dr.len() - 1)].min(dr[i.saturating_sub(1)]))
            .fold(0.0, f64::max);
        candidate = next;
        if last_move < settings.move_tol {
            break;
        }
    }
    let converged = last_move < settings.move_tol;
    let dst = Arc::new(candidate);
    let out = interpolate_to_grid(snapshot, Arc::clone(&dst))?;
    let before = snapshot.power();
    let power_change = if before > 0.0 { (out.power() - before).abs() / before } else { 0.0 };
    let w1 = linear_resample(src.nodes(), &w1_src, dst.nodes());
    let weights = WeightProfile::new(w1, weight_w2(&dst, settings.spacing_cap), weight_w3(&dst), settings.alpha, settings.beta);
    Ok(RegridOutcome { snapshot: out, weights, iterations, converged, last_move, power_change })
}

/// Nodes within `core_radius·L` of the peak of `|ψ|`. The peak sits at the origin for
/// collapse onto a point, but flat-topped data in d = 1 collapse off-centre.
pub fn core_node_count(snapshot: &FieldSnapshot, focusing: f64, settings: &SgrSettings) -> usize {
    let peak = snapshot
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map_or(0, |(i, _)| i);
    let grid = snapshot.grid();
    let centre = grid.nodes()[peak];
    let half = settings.core_radius * focusing;
    grid.count_below(centre + half) - grid.count_below((centre - half).max(0.0))
}

/// Whether the field has focused enough since the last regrid, or the core is under-resolved.
pub fn regrid_needed(snapshot: &FieldSnapshot, focusing: f64, last_regrid_focusing: f64, settings: &SgrSettings) -> bool {
    focusing < last_regrid_focusing / settings.trigger_ratio || core_node_count(snapshot, focusing, settings) < settings.core_nodes
}

/// Redistribution of a grid for a field given directly as node values.
pub fn regrid_values(grid: Arc<RadialGrid>, values: Vec<Complex64>, sigma: f64, settings: &SgrSettings) -> Result<RegridOutcome> {
    let snap = FieldSnapshot::new(grid, values, crate::precise::PreciseTime::ZERO, sigma)?;
    regrid(&snap, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precise::PreciseTime;
    use proptest::prelude::*;

    fn snapshot(grid: RadialGrid, f: impl Fn(f64) -> f64) -> FieldSnapshot {
        let values = grid.nodes().iter().map(|&r| Complex64::new(f(r), 0.0)).collect();
        FieldSnapshot::new(Arc::new(grid), values, PreciseTime::ZERO, 4.0).unwrap()
    }

    #[test]
    fn constant_field_has_unit_w1() {
        let s = snapshot(RadialGrid::uniform(50, 5.0, 1).unwrap(), |_| 3.0);
        assert!(weight_w1(&s).unwrap().iter().all(|w| (w - 1.0).abs() < 1e-9));
        let z = snapshot(RadialGrid::uniform(50, 5.0, 1).unwrap(), |_| 0.0);
        assert!(weight_w1(&z).unwrap().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn w1_peaks_at_steepest_gradient_and_ignores_scale() {
        let grid = RadialGrid::uniform(801, 2.0, 1).unwrap();
        let a = 0.1;
        let s = snapshot(grid.clone(), |r| (-(r / a).powi(2)).exp());
        let w = weight_w1(&s).unwrap();
        let arg = w.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0;
        let exact = a / 2f64.sqrt();
        let h = grid.nodes()[1];
        assert!((grid.nodes()[arg] - exact).abs() <= h, "{} vs {exact}", grid.nodes()[arg]);
        let s2 = snapshot(grid, |r| 2.0 * (-(r / a).powi(2)).exp());
        let w2 = weight_w1(&s2).unwrap();
        for (x, y) in w.iter().zip(&w2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn w2_examples() {
        let grid = RadialGrid::uniform(21, 1.0, 1).unwrap();
        assert!(weight_w2(&grid, 0.05).iter().all(|w| (w - 2f64.sqrt()).abs() < 1e-12));
        assert!(weight_w2(&grid, 1e9).iter().all(|w| (w - 1.0).abs() < 1e-12));
        // fine core, coarse exterior
        let mut nodes: Vec<f64> = (0..40).map(|i| i as f64 * 0.001).collect();
        nodes.extend((1..40).map(|i| 0.039 + i as f64 * 0.1));
        let bi = RadialGrid::new(nodes, 1).unwrap();
        let w = weight_w2(&bi, 0.01);
        assert!(w[10] < 1.01 && w[60] > 9.0);
    }

    #[test]
    fn w3_matches_definition() {
        let nodes: Vec<f64> = (0..30).map(|i| (i as f64).powi(2) * 0.01).collect();
        let grid = RadialGrid::new(nodes.clone(), 1).unwrap();
        let w = weight_w3(&grid);
        for m in 1..29 {
            let d1 = nodes[m + 1] - nodes[m];
            let d0 = nodes[m] - nodes[m - 1];
            assert!((w[m] - (1.0 + (d1 - d0).abs() / d1).sqrt()).abs() < 1e-14);
        }
        assert!(w.iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn equidistribute_examples() {
        let pos: Vec<f64> = (0..11).map(|i| i as f64 * 0.2).collect();
        let g = equidistribute(&pos, &[1.0; 11], 21, 1).unwrap();
        for (i, r) in g.nodes().iter().enumerate() {
            assert!((r - i as f64 * 0.1).abs() < 1e-12);
        }

        // w = 1 + 9·1[r<1] on [0, 2] as a sharp piecewise-linear step
        let eps = 1e-9;
        let pos = [0.0, 1.0 - eps, 1.0 + eps, 2.0];
        let w = [10.0, 10.0, 1.0, 1.0];
        let g = equidistribute(&pos, &w, 111, 1).unwrap();
        let inside = g.nodes()[1..110].iter().filter(|&&r| r < 1.0).count();
        assert!((99..=100).contains(&inside), "{inside}");
        assert!(equidistribution_residual(&pos, &w, &g) < 1e-6);

        assert!(matches!(equidistribute(&pos, &[1.0, 0.0, 1.0, 1.0], 20, 1), Err(BnlsError::NonPositiveWeight { index: 1, .. })));
    }

    #[test]
    fn monotone_weight_gives_monotone_density() {
        let pos: Vec<f64> = (0..101).map(|i| i as f64 * 0.05).collect();
        let w: Vec<f64> = pos.iter().map(|r| 1.0 + 5.0 * (-r).exp()).collect();
        let g = equidistribute(&pos, &w, 64, 2).unwrap();
        let dr = g.spacings();
        assert!(dr.windows(2).all(|p| p[1] >= p[0] - 1e-12));
    }

    #[test]
    fn regrid_focused_gaussian() {
        let settings = SgrSettings::default();
        let width = 1e-3;
        let f = |r: f64| (-(r / width).powi(2)).exp() / width.sqrt() + (-r * r).exp();
        // the uniform grid barely sees the core; a few passes with the field
        // re-sampled on each new grid settle the distribution
        let mut grid = Arc::new(RadialGrid::uniform(4001, 40.0, 1).unwrap());
        for _ in 0..4 {
            let s = snapshot((*grid).clone(), f);
            grid = regrid(&s, &settings).unwrap().snapshot.shared_grid();
        }
        assert!(grid.count_below(4.0 * width) >= 64, "{} nodes in core", grid.count_below(4.0 * width));
        assert!(grid.max_spacing_ratio() <= 1.5, "ratio {}", grid.max_spacing_ratio());
        assert_eq!(grid.len(), 4001);
        assert_eq!(grid.r_max(), 40.0);
    }

    #[test]
    fn regrid_fixed_point() {
        let settings = SgrSettings::default();
        let s = snapshot(RadialGrid::uniform(2001, 30.0, 2).unwrap(), |r| 2.0 * (-r * r).exp());
        let mut current = s;
        for _ in 0..4 {
            current = regrid(&current, &settings).unwrap().snapshot;
        }
        let again = regrid(&current, &settings).unwrap();
        let moved = again
            .grid()
            .nodes()
            .iter()
            .zip(current.grid().nodes())
            .zip(current.grid().spacings().iter().chain([0.0].iter()))
            .map(|((a, b), h)| if *h > 0.0 { (a - b).abs() / h } else { 0.0 })
            .fold(0.0, f64::max);
        assert!(moved < 1e-3, "moved {moved}");
        assert!(again.power_change < 1e-8);
    }

    #[test]
    fn regrid_needed_cases() {
        let settings = SgrSettings::default();
        let s = snapshot(RadialGrid::uniform(1001, 10.0, 1).unwrap(), |r| (-r * r).exp());
        assert!(!regrid_needed(&s, 1.0, 1.0, &settings));
        assert!(regrid_needed(&s, 0.5, 1.0, &settings));
        // 4L = 0.32 holds 32 nodes
        assert!(regrid_needed(&s, 0.08, 0.08, &settings));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn equidistribution_is_exact(seed in proptest::collection::vec(0.05f64..20.0, 10..60), m in 16usize..300) {
            let pos: Vec<f64> = (0..seed.len()).map(|i| i as f64 * 0.3).collect();
            let g = equidistribute(&pos, &seed, m, 1).unwrap();
            prop_assert!(equidistribution_residual(&pos, &seed, &g) < 1e-6);
        }

        #[test]
        fn limited_density_bounds_spacing_ratio(width in 1e-5f64..1e-1, amp in 1.0f64..1e3) {
            let settings = SgrSettings::default();
            let mut src = snapshot(RadialGrid::uniform(1201, 20.0, 1).unwrap(), |r| amp * (-(r / 0.5).powi(2)).exp());
            // march the core down to the requested width
            let mut w = 0.5;
            while w > width {
                w = (w / 1.25).max(width);
                let grid = src.shared_grid();
                let v = grid.nodes().iter().map(|&r| Complex64::new(amp / w.sqrt() * (-(r / w).powi(2)).exp() + (-r * r).exp(), 0.0)).collect();
                let s = FieldSnapshot::new(grid, v, PreciseTime::ZERO, 4.0).unwrap();
                src = regrid(&s, &settings).unwrap().snapshot;
            }
            prop_assert!(src.grid().max_spacing_ratio() <= 1.5, "ratio {}", src.grid().max_spacing_ratio());
            let w3max = weight_w3(src.grid()).iter().cloned().fold(0.0, f64::max);
            prop_assert!(w3max < 4.0);
        }
    }
}
