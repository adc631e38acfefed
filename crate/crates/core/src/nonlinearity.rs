//! Cut-off mobility, entropy densities and the element matrix Θ.
//!
//! For `0 < δ < 1 < L` the cut-off `β(s) = clamp(s, δ, L)` and the
//! regularized entropy `G_δ^L` satisfy `β(s) (G_δ^L)''(s) = 1` for all `s`.
//! On each element, Θ is built from difference quotients of `(G_δ^L)'` along
//! the edges `P_0 P_j` so that the discrete chain rule
//!
//! ```text
//! Θ ∇π_h[(G_δ^L)'(φ_h)] = ∇φ_h
//! ```
//!
//! holds exactly.

use alloc::format;

use crate::math;
use crate::mesh::AffineMap;
use crate::{Error, Result};

/// Relative gap below which two vertex values are treated as equal in Θ.
pub const EQUAL_VALUE_RTOL: f64 = 1e-14;

/// Lower and upper cut-off `(δ, L)` with `0 < δ < 1 < L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffParams {
    delta: f64,
    l_cap: f64,
}

impl CutoffParams {
    pub fn new(delta: f64, l_cap: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0 && l_cap > 1.0 && l_cap.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cut-off needs 0 < delta < 1 < L, got delta = {delta}, L = {l_cap}"
            )));
        }
        Ok(Self { delta, l_cap })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn l_cap(&self) -> f64 {
        self.l_cap
    }
}

/// `β_δ^L(s) = clamp(s, δ, L)`.
pub fn beta(s: f64, p: CutoffParams) -> f64 {
    s.clamp(p.delta, p.l_cap)
}

/// Regularized entropy `G_δ^L(s)`: quadratic below `δ` and above `L`,
/// `s(ln s − 1) + 1` in between, glued with matching second derivatives.
pub fn g_reg(s: f64, p: CutoffParams) -> f64 {
    let (d, l) = (p.delta, p.l_cap);
    if s <= d {
        (s * s - d * d) / (2.0 * d) + (math::ln(d) - 1.0) * s + 1.0
    } else if s >= l {
        (s * s - l * l) / (2.0 * l) + (math::ln(l) - 1.0) * s + 1.0
    } else {
        entropy_density(s)
    }
}

/// `(G_δ^L)'(s)`.
pub fn g_reg_d1(s: f64, p: CutoffParams) -> f64 {
    let (d, l) = (p.delta, p.l_cap);
    if s <= d {
        s / d + math::ln(d) - 1.0
    } else if s >= l {
        s / l + math::ln(l) - 1.0
    } else {
        math::ln(s)
    }
}

/// `(G_δ^L)''(s) = 1 / β_δ^L(s)`.
pub fn g_reg_d2(s: f64, p: CutoffParams) -> f64 {
    1.0 / beta(s, p)
}

/// Derivative order for [`g_reg_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

pub fn g_reg_order(s: f64, p: CutoffParams, order: Order) -> f64 {
    match order {
        Order::Value => g_reg(s, p),
        Order::First => g_reg_d1(s, p),
        Order::Second => g_reg_d2(s, p),
    }
}

/// Boltzmann entropy density `G(s) = s(ln s − 1) + 1`, with `G(0) = 1`.
pub fn g_entropy(s: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::NegativeEntropyArgument(s));
    }
    Ok(entropy_density(s))
}

fn entropy_density(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if (s - 1.0).abs() < 0.25 {
        // Near s = 1 the closed form cancels; sum G(1 + t) = Σ_{k≥2} (−t)^k / (k(k − 1)).
        let t = s - 1.0;
        let mut pow = t * t;
        let mut sum = 0.0;
        for k in 2..60 {
            let term = pow / (k * (k - 1)) as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            pow *= -t;
        }
        sum
    } else {
        s * (math::ln(s) - 1.0) + 1.0
    }
}

/// Diagonal of `Θ̃` for vertex values `(φ(P_0), φ(P_1), φ(P_2))`.
pub fn theta_diagonal(values: [f64; 3], p: CutoffParams) -> [f64; 2] {
    let v0 = values[0];
    let g0 = g_reg_d1(v0, p);
    let mut out = [0.0; 2];
    for j in 1..3 {
        let vj = values[j];
        let scale = v0.abs().max(vj.abs()).max(1.0);
        out[j - 1] =
            if (vj - v0).abs() <= EQUAL_VALUE_RTOL * scale { beta(vj, p) } else { (vj - v0) / (g_reg_d1(vj, p) - g0) };
    }
    out
}

/// `Θ = (Bᵀ)⁻¹ Θ̃ Bᵀ` on one element.
pub fn theta_matrix(values: [f64; 3], map: &AffineMap, p: CutoffParams) -> [[f64; 2]; 2] {
    let d = theta_diagonal(values, p);
    let bt = map.transpose();
    let bit = map.inverse_transpose();
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = (0..2).map(|k| bit[i][k] * d[k] * bt[k][j]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::E;
    use proptest::prelude::*;

    fn params(d: f64, l: f64) -> CutoffParams {
        CutoffParams::new(d, l).unwrap()
    }

    fn identity_map() -> AffineMap {
        AffineMap { b: [[1.0, 0.0], [0.0, 1.0]], p0: [0.0, 0.0] }
    }

    #[test]
    fn cutoff_validation() {
        assert!(CutoffParams::new(0.0, 2.0).is_err());
        assert!(CutoffParams::new(1.0, 2.0).is_err());
        assert!(CutoffParams::new(0.1, 1.0).is_err());
        assert!(CutoffParams::new(0.1, f64::INFINITY).is_err());
    }

    #[test]
    fn beta_examples() {
        let p = params(0.1, 2.0);
        assert_eq!(beta(0.5, p), 0.5);
        assert_eq!(beta(-3.0, p), 0.1);
        assert_eq!(beta(7.0, p), 2.0);
    }

    #[test]
    fn g_reg_examples() {
        let p = params(0.1, 2.0);
        assert_eq!(g_reg_d1(1.0, p), 0.0);
        assert_abs_diff_eq!(g_reg_d2(0.05, p), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g_reg_order(-1.0, p, Order::Second), 10.0, epsilon = 1e-12);
        for s in [-1.0, 0.05, 1.0, 2.0, 6.0] {
            assert_abs_diff_eq!(beta(s, p) * g_reg_d2(s, p), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn g_reg_is_c2_at_the_joins() {
        let p = params(0.1, 2.0);
        for knot in [0.1, 2.0] {
            let e = 1e-9;
            assert_abs_diff_eq!(g_reg(knot - e, p), g_reg(knot + e, p), epsilon = 1e-8);
            assert_abs_diff_eq!(g_reg_d1(knot - e, p), g_reg_d1(knot + e, p), epsilon = 1e-7);
            assert_abs_diff_eq!(g_reg_d2(knot - e, p), g_reg_d2(knot + e, p), epsilon = 1e-6);
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(g_entropy(1.0).unwrap(), 0.0);
        assert_eq!(g_entropy(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(g_entropy(E).unwrap(), 1.0, epsilon = 1e-15);
        assert!(g_entropy(-1e-3).is_err());
        // Near 1: G(1 + t) = t²/2 − t³/6 + …
        let s = 1.0 + 1e-6;
        let t = s - 1.0;
        assert_abs_diff_eq!(g_entropy(s).unwrap(), t * t / 2.0 - t * t * t / 6.0, epsilon = 1e-24);
        // Both branches agree where they meet.
        assert_abs_diff_eq!(g_entropy(1.25 - 1e-15).unwrap(), g_entropy(1.25 + 1e-15).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(g_entropy(0.75 - 1e-15).unwrap(), g_entropy(0.75 + 1e-15).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn theta_examples() {
        let p = params(0.01, 10.0);
        let t = theta_matrix([0.7, 0.7, 0.7], &identity_map(), p);
        assert_abs_diff_eq!(t[0][0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1][1], 0.7, epsilon = 1e-15);
        assert_eq!(t[0][1], 0.0);

        let d = theta_diagonal([1.0, E, 1.0], p);
        assert_abs_diff_eq!(d[0], E - 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn negative_tail_bound() {
        let p = params(0.05, 4.0);
        for i in 1..200 {
            let s = -0.02 * i as f64;
            let bound = s * s / (2.0 * p.delta());
            assert!(g_reg(s, p) >= bound - 1e-14);
            assert!(s * g_reg_d1(s, p) >= bound - 1e-14);
        }
    }

    fn grad_p1(values: [f64; 3], map: &AffineMap) -> [f64; 2] {
        let bit = map.inverse_transpose();
        let r = [values[1] - values[0], values[2] - values[0]];
        [bit[0][0] * r[0] + bit[0][1] * r[1], bit[1][0] * r[0] + bit[1][1] * r[1]]
    }

    proptest! {
        #[test]
        fn chain_rule_identity(
            v in prop::array::uniform3(-0.5f64..12.0),
            b in prop::array::uniform4(-2.0f64..2.0),
            d in 0.001f64..0.5, l in 1.5f64..8.0,
        ) {
            let map = AffineMap { b: [[b[0], b[1]], [b[2], b[3]]], p0: [0.0, 0.0] };
            prop_assume!(map.det().abs() > 0.05);
            let p = params(d, l);
            let theta = theta_matrix(v, &map, p);
            let g = grad_p1([g_reg_d1(v[0], p), g_reg_d1(v[1], p), g_reg_d1(v[2], p)], &map);
            let lhs = [theta[0][0] * g[0] + theta[0][1] * g[1], theta[1][0] * g[0] + theta[1][1] * g[1]];
            let rhs = grad_p1(v, &map);
            let scale = rhs[0].abs().max(rhs[1].abs()).max(1.0);
            prop_assert!((lhs[0] - rhs[0]).abs() <= 1e-12 * scale);
            prop_assert!((lhs[1] - rhs[1]).abs() <= 1e-12 * scale);
        }

        #[test]
        fn beta_is_monotone_lipschitz(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let p = params(0.2, 3.0);
            let (x, y) = (a.min(b), a.max(b));
            prop_assert!(beta(x, p) <= beta(y, p));
            prop_assert!(beta(y, p) - beta(x, p) <= y - x + 1e-15);
            prop_assert!((0.2..=3.0).contains(&beta(a, p)));
            let g2 = g_reg_d2(a, p);
            prop_assert!((1.0 / 3.0 - 1e-15..=5.0 + 1e-12).contains(&g2));
        }

        #[test]
        fn diagonal_bounds(v in prop::array::uniform3(-3.0f64..9.0), xi in prop::array::uniform2(-1.0f64..1.0)) {
            let p = params(0.05, 4.0);
            let d = theta_diagonal(v, p);
            let q = d[0] * xi[0] * xi[0] + d[1] * xi[1] * xi[1];
            let n2 = xi[0] * xi[0] + xi[1] * xi[1];
            prop_assert!(q >= p.delta() * n2 * (1.0 - 1e-12));
            prop_assert!(q <= p.l_cap() * n2 * (1.0 + 1e-12));
        }

        #[test]
        fn diagonal_lipschitz(v in prop::array::uniform3(-1.0f64..6.0), w in prop::array::uniform3(-1.0f64..6.0)) {
            let p = params(0.1, 5.0);
            let (a, b) = (theta_diagonal(v, p), theta_diagonal(w, p));
            let rhs = (1..3).map(|j| (v[j] - w[j]).abs() + (v[0] - w[0]).abs()).fold(0.0, f64::max);
            let lhs = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
            prop_assert!(lhs <= p.l_cap() / p.delta() * rhs + 1e-12);
        }
    }
}
