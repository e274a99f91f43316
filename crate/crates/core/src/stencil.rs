//! Finite-difference and interpolation weights on arbitrary nodes.
//!
//! Weights come from Fornberg's recursion, which is algebraically the same
//! as differentiating the interpolating polynomial through the nodes: with
//! seven nodes every derivative is exact on polynomials of degree six.

/// Weights `w[k][j]` such that `sum_j w[k][j] f(x_j)` approximates the
/// `k`-th derivative of `f` at `x0`, for `k = 0..=max_order`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Lagrange basis values at `x` for the given nodes.
pub fn lagrange_weights(x: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        for (k, &xk) in nodes.iter().enumerate() {
            if k != j {
                *wj *= (x - xk) / (nodes[j] - xk);
            }
        }
    }
    w
}

/// Gauss-Legendre nodes and weights on [-1, 1] (six points, exact to degree 11).
pub const GAUSS6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152_1, 0.171_324_492_379_170_35),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691_04),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691_04),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152_1, 0.171_324_492_379_170_35),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_fourth_derivative_weights() {
        let nodes: Vec<f64> = (-3..=3).map(|i| i as f64).collect();
        let w = fornberg_weights(0.0, &nodes, 4);
        let expected = [-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0];
        for (a, b) in w[4].iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn derivatives_exact_on_sextics_at_irregular_nodes() {
        let nodes = [0.0, 0.13, 0.3, 0.52, 0.9, 1.4, 2.2];
        let x0 = 0.61;
        let w = fornberg_weights(x0, &nodes, 4);
        // f = x^6
        let f: Vec<f64> = nodes.iter().map(|x| x.powi(6)).collect();
        let exact = [x0.powi(6), 6.0 * x0.powi(5), 30.0 * x0.powi(4), 120.0 * x0.powi(3), 360.0 * x0 * x0];
        for k in 0..=4 {
            let approx: f64 = w[k].iter().zip(&f).map(|(a, b)| a * b).sum();
            assert!((approx - exact[k]).abs() < 1e-9 * exact[k].abs().max(1.0), "order {k}");
        }
    }

    #[test]
    fn gauss_rule_integrates_degree_eleven() {
        let s: f64 = GAUSS6.iter().map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        let total: f64 = GAUSS6.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
