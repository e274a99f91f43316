//! Seven-point radial finite-difference operators on non-uniform grids.
//!
//! Row `m` is obtained by differentiating the degree-six interpolant through
//! nodes `m-3..=m+3` and combining the derivatives into the radial operator.
//! Nodes below the origin are mirrored (even extension). The last two nodes
//! carry `ψ = ψ' = 0`: their rows are empty and every coefficient that lands
//! on them is dropped.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{BnlsError, Result};
use crate::grid::RadialGrid;
use crate::stencil::fornberg_weights;

pub const HALF_WIDTH: usize = 3;
pub const BANDWIDTH: usize = 2 * HALF_WIDTH + 1;

/// Which radial differential operator a [`BandedOperator`] discretises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialOperator {
    /// `∂_r`
    Gradient,
    /// `Δ_r = ∂_r² + (d-1)/r ∂_r`
    Laplacian,
    /// `Δ_r² = ∂_r⁴ + 2(d-1)/r ∂_r³ + (d-1)(d-3)/r² ∂_r² - (d-1)(d-3)/r³ ∂_r`
    Biharmonic,
}

impl RadialOperator {
    fn combine(self, r: f64, dim: usize, w: &[Vec<f64>], j: usize) -> f64 {
        let dm1 = dim as f64 - 1.0;
        let dm3 = dim as f64 - 3.0;
        if r == 0.0 {
            // odd derivatives vanish; limits of the singular coefficients
            let d = dim as f64;
            return match self {
                RadialOperator::Gradient => w[1][j],
                RadialOperator::Laplacian => d * w[2][j],
                RadialOperator::Biharmonic => d * (d + 2.0) / 3.0 * w[4][j],
            };
        }
        match self {
            RadialOperator::Gradient => w[1][j],
            RadialOperator::Laplacian => w[2][j] + dm1 / r * w[1][j],
            RadialOperator::Biharmonic => {
                w[4][j] + 2.0 * dm1 / r * w[3][j] + dm1 * dm3 / (r * r) * w[2][j]
                    - dm1 * dm3 / (r * r * r) * w[1][j]
            }
        }
    }

    fn order(self) -> usize {
        match self {
            RadialOperator::Gradient => 1,
            RadialOperator::Laplacian => 2,
            RadialOperator::Biharmonic => 4,
        }
    }
}

/// A banded (seven-diagonal) real operator on a radial grid.
#[derive(Debug, Clone)]
pub struct BandedOperator {
    grid: Arc<RadialGrid>,
    kind: RadialOperator,
    /// `rows[m][k]` multiplies node `m + k - 3`.
    rows: Vec<[f64; BANDWIDTH]>,
}

impl BandedOperator {
    pub fn assemble(grid: Arc<RadialGrid>, kind: RadialOperator) -> Result<Self> {
        let n = grid.len();
        let nodes = grid.nodes();
        let dim = grid.dim();
        for m in 0..n - 1 {
            let scale = nodes[m + 1].abs().max(nodes[m].abs());
            if nodes[m + 1] - nodes[m] <= 1e-14 * scale {
                return Err(BnlsError::DegenerateGrid(m, m + 1));
            }
        }
        let last_dr = nodes[n - 1] - nodes[n - 2];
        let position = |i: isize| -> f64 {
            if i < 0 {
                -nodes[(-i) as usize]
            } else if (i as usize) < n {
                nodes[i as usize]
            } else {
                nodes[n - 1] + (i as usize - (n - 1)) as f64 * last_dr
            }
        };
        let active = n - 2;
        let mut rows = vec![[0.0; BANDWIDTH]; n];
        let mut window = [0.0f64; BANDWIDTH];
        for (m, row) in rows.iter_mut().enumerate().take(active) {
            for (k, w) in window.iter_mut().enumerate() {
                *w = position(m as isize + k as isize - HALF_WIDTH as isize);
            }
            let r = nodes[m];
            let w = fornberg_weights(r, &window, kind.order().max(1));
            for k in 0..BANDWIDTH {
                let coeff = kind.combine(r, dim, &w, k);
                let col = (m as isize + k as isize - HALF_WIDTH as isize).unsigned_abs();
                if col >= active {
                    continue;
                }
                let slot = col + HALF_WIDTH - m;
                row[slot] += coeff;
            }
        }
        Ok(Self { grid, kind, rows })
    }

    pub fn biharmonic(grid: Arc<RadialGrid>) -> Result<Self> {
        Self::assemble(grid, RadialOperator::Biharmonic)
    }

    pub fn laplacian(grid: Arc<RadialGrid>) -> Result<Self> {
        Self::assemble(grid, RadialOperator::Laplacian)
    }

    pub fn gradient(grid: Arc<RadialGrid>) -> Result<Self> {
        Self::assemble(grid, RadialOperator::Gradient)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<RadialGrid> {
        Arc::clone(&self.grid)
    }

    pub fn kind(&self) -> RadialOperator {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, m: usize) -> &[f64; BANDWIDTH] {
        &self.rows[m]
    }

    /// Coefficient of column `col` in row `m`, zero outside the band.
    pub fn entry(&self, m: usize, col: usize) -> f64 {
        let k = col as isize - m as isize + HALF_WIDTH as isize;
        if (0..BANDWIDTH as isize).contains(&k) {
            self.rows[m][k as usize]
        } else {
            0.0
        }
    }

    /// Banded matrix-vector product.
    pub fn apply(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.rows.len();
        if values.len() != n {
            return Err(BnlsError::LengthMismatch { expected: n, got: values.len() });
        }
        Ok(self.apply_unchecked(values))
    }

    pub(crate) fn apply_unchecked(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.rows.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (m, (row, o)) in self.rows.iter().zip(out.iter_mut()).enumerate() {
            let lo = m.saturating_sub(HALF_WIDTH);
            let hi = (m + HALF_WIDTH).min(n - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for col in lo..=hi {
                acc += values[col] * row[col + HALF_WIDTH - m];
            }
            *o = acc;
        }
        out
    }

    pub fn apply_real(&self, values: &[f64]) -> Vec<f64> {
        let n = self.rows.len();
        let mut out = vec![0.0; n];
        for (m, (row, o)) in self.rows.iter().zip(out.iter_mut()).enumerate() {
            let lo = m.saturating_sub(HALF_WIDTH);
            let hi = (m + HALF_WIDTH).min(n - 1);
            *o = (lo..=hi).map(|col| values[col] * row[col + HALF_WIDTH - m]).sum();
        }
        out
    }
}

/// The three operators needed for stepping and diagnostics on one grid.
#[derive(Debug, Clone)]
pub struct RadialOperators {
    pub biharmonic: BandedOperator,
    pub laplacian: BandedOperator,
    pub gradient: BandedOperator,
}

impl RadialOperators {
    pub fn assemble(grid: Arc<RadialGrid>) -> Result<Self> {
        Ok(Self {
            biharmonic: BandedOperator::biharmonic(Arc::clone(&grid))?,
            laplacian: BandedOperator::laplacian(Arc::clone(&grid))?,
            gradient: BandedOperator::gradient(grid)?,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        self.biharmonic.grid()
    }
}

/// LU factorisation with partial pivoting of `I + α A` for banded `A`.
#[derive(Debug, Clone)]
pub struct ShiftedFactorization {
    n: usize,
    /// Row `i` holds columns `i - KL ..= i + KL + KU`.
    upper: Vec<[Complex64; LU_WIDTH]>,
    multipliers: Vec<[Complex64; KL]>,
    pivots: Vec<usize>,
}

const KL: usize = HALF_WIDTH;
const KU: usize = HALF_WIDTH;
const LU_WIDTH: usize = 2 * KL + KU + 1;

/// Pivots smaller than this are treated as a singular system.
pub const PIVOT_FLOOR: f64 = 1e-30;

impl ShiftedFactorization {
    pub fn new(op: &BandedOperator, alpha: Complex64) -> Result<Self> {
        let n = op.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut a = vec![[zero; LU_WIDTH]; n];
        for i in 0..n {
            let lo = i.saturating_sub(KL);
            let hi = (i + KU).min(n - 1);
            for j in lo..=hi {
                let mut v = alpha * op.entry(i, j);
                if i == j {
                    v += 1.0;
                }
                a[i][j + KL - i] = v;
            }
        }
        let mut multipliers = vec![[zero; KL]; n];
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last = (k + KL).min(n - 1);
            let mut p = k;
            let mut best = a[k][KL].norm();
            for i in k + 1..=last {
                let v = a[i][k + KL - i].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best >= PIVOT_FLOOR) {
                return Err(BnlsError::SingularSystem { row: k, pivot: best });
            }
            pivots[k] = p;
            let right = (k + KL + KU).min(n - 1);
            if p != k {
                for j in k..=right {
                    let (sk, sp) = (j + KL - k, j + KL - p);
                    let tmp = a[k][sk];
                    a[k][sk] = a[p][sp];
                    a[p][sp] = tmp;
                }
            }
            let pivot = a[k][KL];
            for i in k + 1..=last {
                let l = a[i][k + KL - i] / pivot;
                multipliers[k][i - k - 1] = l;
                a[i][k + KL - i] = zero;
                if l == zero {
                    continue;
                }
                for j in k + 1..=right {
                    let u = a[k][j + KL - k];
                    a[i][j + KL - i] -= l * u;
                }
            }
        }
        Ok(Self { n, upper: a, multipliers, pivots })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        if rhs.len() != self.n {
            return Err(BnlsError::LengthMismatch { expected: self.n, got: rhs.len() });
        }
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            let last = (k + KL).min(n - 1);
            for i in k + 1..=last {
                x[i] -= self.multipliers[k][i - k - 1] * xk;
            }
        }
        for i in (0..n).rev() {
            let right = (i + KL + KU).min(n - 1);
            let mut acc = x[i];
            for j in i + 1..=right {
                acc -= self.upper[i][j + KL - i] * x[j];
            }
            x[i] = acc / self.upper[i][KL];
        }
        if let Some(i) = x.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(BnlsError::NonFinite(i));
        }
        Ok(x)
    }
}

/// Solves `(I + α A) x = rhs`.
pub fn solve_shifted(op: &BandedOperator, alpha: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    ShiftedFactorization::new(op, alpha)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_grid(n: usize, dim: usize, seed: u64, max_ratio: f64) -> Arc<RadialGrid> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = vec![0.0];
        let mut dr: f64 = 0.05;
        for _ in 1..n {
            let f: f64 = rng.gen_range(1.0 / max_ratio.sqrt()..max_ratio.sqrt());
            dr = (dr * f).clamp(0.01, 0.2);
            nodes.push(nodes.last().unwrap() + dr);
        }
        Arc::new(RadialGrid::new(nodes, dim).unwrap())
    }

    #[test]
    fn biharmonic_of_r4_is_constant() {
        for dim in 1..=3 {
            let expected = 8.0 * dim as f64 * (dim as f64 + 2.0);
            let grids = [(Arc::new(RadialGrid::uniform(40, 4.0, dim).unwrap()), 1e-9), (random_grid(80, dim, 7, 4.0), 1e-6)];
            for (grid, tol) in grids {
                let op = BandedOperator::biharmonic(Arc::clone(&grid)).unwrap();
                let v: Vec<Complex64> = grid.nodes().iter().map(|r| c(r.powi(4))).collect();
                let out = op.apply(&v).unwrap();
                // rows whose stencil stays clear of the two boundary nodes
                for (m, o) in out.iter().enumerate().take(grid.len() - 5) {
                    assert!(((o.re - expected) / expected).abs() < tol, "d={dim} m={m} got {}", o.re);
                }
            }
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let grid = random_grid(60, 2, 3, 3.0);
        for kind in [RadialOperator::Gradient, RadialOperator::Laplacian, RadialOperator::Biharmonic] {
            let op = BandedOperator::assemble(Arc::clone(&grid), kind).unwrap();
            let out = op.apply(&vec![c(1.0); 60]).unwrap();
            for o in out.iter().take(60 - 5) {
                assert!(o.norm() < 1e-6, "{kind:?}: {o}");
            }
        }
    }

    #[test]
    fn fourth_derivative_of_gaussian() {
        let grid = Arc::new(RadialGrid::uniform(1001, 10.0, 1).unwrap());
        let op = BandedOperator::biharmonic(Arc::clone(&grid)).unwrap();
        let v: Vec<Complex64> = grid.nodes().iter().map(|r| c((-r * r).exp())).collect();
        let out = op.apply(&v).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(&out)
            .take(grid.len() - 2)
            .map(|(r, o)| {
                let r2 = r * r;
                (o.re - (16.0 * r2 * r2 - 48.0 * r2 + 12.0) * (-r2).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "max error {err:e}");
    }

    #[test]
    fn error_shrinks_at_least_third_order() {
        let max_err = |h: f64| {
            let m = (12.0 / h).round() as usize + 1;
            let grid = Arc::new(RadialGrid::uniform(m, 12.0, 2).unwrap());
            let op = BandedOperator::biharmonic(Arc::clone(&grid)).unwrap();
            let v: Vec<Complex64> = grid.nodes().iter().map(|r| c((-r * r).exp())).collect();
            let out = op.apply(&v).unwrap();
            grid.nodes()
                .iter()
                .zip(&out)
                .take(m - 2)
                .map(|(r, o)| {
                    let r2 = r * r;
                    // Δ² e^{-r²} in two dimensions
                    (o.re - (16.0 * r2 * r2 - 64.0 * r2 + 32.0) * (-r2).exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = max_err(0.04) / max_err(0.02);
        assert!(ratio >= 6.4, "ratio {ratio}");
    }

    #[test]
    fn laplacian_and_gradient_of_gaussian_in_two_dimensions() {
        let grid = Arc::new(RadialGrid::uniform(801, 8.0, 2).unwrap());
        let lap = BandedOperator::laplacian(Arc::clone(&grid)).unwrap();
        let grad = BandedOperator::gradient(Arc::clone(&grid)).unwrap();
        let v: Vec<Complex64> = grid.nodes().iter().map(|r| c((-r * r).exp())).collect();
        let l = lap.apply(&v).unwrap();
        let g = grad.apply(&v).unwrap();
        for (m, r) in grid.nodes().iter().enumerate().take(grid.len() - 5) {
            let e = (-r * r).exp();
            assert!((l[m].re - (4.0 * r * r - 4.0) * e).abs() < 1e-7, "lap at {r}");
            assert!((g[m].re + 2.0 * r * e).abs() < 1e-8, "grad at {r}");
        }
    }

    #[test]
    fn even_polynomials_at_origin() {
        for dim in 1..=3 {
            let d = dim as f64;
            let grid = random_grid(40, dim, 11, 3.0);
            let op = BandedOperator::biharmonic(Arc::clone(&grid)).unwrap();
            // Δ² (r⁶) = 24 (d+2)(d+4) r², Δ² r⁴ = 8 d (d+2)
            let v: Vec<Complex64> = grid.nodes().iter().map(|r| c(r.powi(6) + 3.0 * r.powi(4) - r * r + 2.0)).collect();
            let out = op.apply(&v).unwrap();
            for m in 0..4 {
                let r = grid.nodes()[m];
                let exact = 24.0 * (d + 2.0) * (d + 4.0) * r * r + 24.0 * d * (d + 2.0);
                assert!(((out[m].re - exact) / exact).abs() < 1e-9, "d={dim} m={m}");
            }
        }
    }

    #[test]
    fn operator_is_linear() {
        let grid = random_grid(120, 2, 5, 4.0);
        let op = BandedOperator::biharmonic(Arc::clone(&grid)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let psi: Vec<Complex64> = (0..120).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let phi: Vec<Complex64> = (0..120).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let combo: Vec<Complex64> = psi.iter().zip(&phi).map(|(p, q)| a * p + b * q).collect();
        let lhs = op.apply(&combo).unwrap();
        let (ap, aq) = (op.apply(&psi).unwrap(), op.apply(&phi).unwrap());
        let scale = lhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..120 {
            assert!((lhs[i] - (a * ap[i] + b * aq[i])).norm() < 1e-12 * scale);
        }
        assert!(op.apply(&vec![c(0.0); 120]).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn shifted_solve_identity_and_round_trip() {
        let grid = random_grid(200, 1, 17, 3.0);
        let op = BandedOperator::biharmonic(Arc::clone(&grid)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rhs: Vec<Complex64> = (0..200).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let x = solve_shifted(&op, Complex64::new(0.0, 0.0), &rhs).unwrap();
        assert_eq!(x, rhs);

        for alpha in [Complex64::new(0.0, 1e-6), Complex64::new(0.0, 1e-3), Complex64::new(1e-4, 0.0)] {
            let x = solve_shifted(&op, alpha, &rhs).unwrap();
            let ax = op.apply(&x).unwrap();
            let res = x.iter().zip(&ax).zip(&rhs).map(|((xi, axi), b)| (xi + alpha * axi - b).norm()).fold(0.0, f64::max);
            let scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(res / scale < 1e-10, "alpha {alpha}: residual {:e}", res / scale);
        }
    }

    #[test]
    fn shifted_solve_neumann_series() {
        let grid = Arc::new(RadialGrid::uniform(101, 2.0, 1).unwrap());
        let op = BandedOperator::biharmonic(Arc::clone(&grid)).unwrap();
        let alpha = 1e-8;
        let rhs: Vec<Complex64> = grid.nodes().iter().map(|r| c(r.powi(4))).collect();
        let x = solve_shifted(&op, c(alpha), &rhs).unwrap();
        for (m, r) in grid.nodes().iter().enumerate().take(60) {
            let approx = r.powi(4) - alpha * 24.0;
            assert!((x[m].re - approx).abs() < 1e-11, "m={m}: {} vs {}", x[m].re, approx);
        }
    }

    proptest::proptest! {
        #[test]
        fn interior_rows_exact_on_monomials(seed in 0u64..1000, dim in 1usize..=3, p in 0i32..=6) {
            let grid = random_grid(48, dim, seed, 10.0);
            let op = BandedOperator::biharmonic(Arc::clone(&grid)).unwrap();
            let v: Vec<f64> = grid.nodes().iter().map(|r| r.powi(p)).collect();
            let out = op.apply_real(&v);
            let (d, pf) = (dim as f64, p as f64);
            for m in 3..grid.len() - 5 {
                let r = grid.nodes()[m];
                let exact = if p < 4 && p % 2 == 0 && p + dim as i32 <= 3 {
                    0.0
                } else {
                    pf * (pf + d - 2.0) * (pf - 2.0) * (pf + d - 4.0) * r.powi(p - 4)
                };
                let h = grid.nodes()[m + 1] - grid.nodes()[m - 1];
                let scale = grid.nodes()[m + 3].powi(p) / h.powi(4);
                proptest::prop_assert!((out[m] - exact).abs() < 1e-8 * scale.max(1.0), "m={} got {} want {}", m, out[m], exact);
            }
        }
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        let mut nodes: Vec<f64> = (0..30).map(|i| i as f64).collect();
        nodes[10] = nodes[9] * (1.0 + 1e-16) + 1e-15;
        let grid = Arc::new(RadialGrid::new(nodes, 1).unwrap());
        assert!(matches!(BandedOperator::biharmonic(grid), Err(BnlsError::DegenerateGrid(9, 10))));
    }
}
