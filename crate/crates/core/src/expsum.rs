//! Gaussian sums for `1/rho` and the one-dimensional cell integrals they
//! induce.
//!
//! `1/rho = (2/sqrt(pi)) int_0^inf exp(-rho^2 t^2) dt`; substituting
//! `t = e^s` and applying the trapezoidal (sinc) rule with step `ds` gives
//! `1/rho ~ sum_k w_k exp(-t_k^2 rho^2)`, `t_k = e^{k ds}`,
//! `w_k = (2/sqrt(pi)) ds t_k`. The nodes sit on a fixed lattice in `s`, so
//! two sums built with the same step agree term by term on their common
//! range.

use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct ExpSum {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    step: f64,
}

/// Sinc step that keeps the discretization error near `delta` (relative).
pub fn sinc_step(delta: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0, "relative accuracy must lie in (0, 1)");
    PI * PI / (2.0 * ((1.0 / delta).ln() + 2.0))
}

impl ExpSum {
    /// All lattice nodes `t_k = e^{k ds}` with `t_min <= t_k <= t_max`
    /// (widened by one node on each side).
    pub fn from_range(t_min: f64, t_max: f64, step: f64) -> Self {
        assert!(t_min > 0.0 && t_max > t_min && step > 0.0);
        let lo = (t_min.ln() / step).floor() as i64 - 1;
        let hi = (t_max.ln() / step).ceil() as i64 + 1;
        let c = 2.0 / PI.sqrt() * step;
        let nodes: Vec<f64> = (lo..=hi).map(|k| (k as f64 * step).exp()).collect();
        let weights = nodes.iter().map(|t| c * t).collect();
        Self { nodes, weights, step }
    }

    /// Approximation of `1/rho` to relative accuracy `delta` on
    /// `[rho_min, rho_max]`.
    pub fn inverse_distance(rho_min: f64, rho_max: f64, delta: f64) -> Self {
        assert!(rho_min > 0.0 && rho_max >= rho_min);
        let step = sinc_step(delta);
        // tail below t_min contributes at most 2 t_min rho / sqrt(pi)
        let t_min = delta * PI.sqrt() / (4.0 * rho_max);
        // tail above t_max is erfc(rho t_max) / rho
        let t_max = ((2.0 / delta).ln().sqrt() + 1.0) / rho_min;
        Self::from_range(t_min, t_max, step)
    }

    /// Sum suited for Galerkin integrals over pairs of `h`-cells inside a
    /// region of diameter `rho_max`: the large-`t` cutoff is set by the
    /// `1/t^2` decay of the self-cell contributions instead of a minimal
    /// distance.
    pub fn for_cells(h: f64, rho_max: f64, delta: f64) -> Self {
        let step = sinc_step(delta);
        let t_min = delta * PI.sqrt() / (4.0 * rho_max);
        let t_max = 2.0 / (h * delta.sqrt());
        Self::from_range(t_min, t_max, step)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(t, w)| w * (-(t * rho).powi(2)).exp()).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_m(z), p0 = P_{m-1}(z)
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Quadrature rule used for the smooth regime of
/// [`CellQuadrature::cell_pair_integral`].
pub struct CellQuadrature {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl CellQuadrature {
    pub fn new() -> Self {
        let (x, w) = gauss_legendre(20);
        // map to [0, 1]
        Self { x: x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w: w.iter().map(|v| 0.5 * v).collect() }
    }

    /// `int_{cell 0} int_{cell d} exp(-t^2 (x - x')^2) dx' dx` for cells of
    /// width `h`, i.e. `int_{-h}^{h} (h - |s|) exp(-t^2 (d h + s)^2) ds`.
    pub fn cell_pair_integral(&self, d: usize, h: f64, t: f64) -> f64 {
        let th = t * h;
        if th <= 1.0 {
            let dh = d as f64 * h;
            let mut s = 0.0;
            for (x, w) in self.x.iter().zip(&self.w) {
                let u = x * h;
                let g = |y: f64| (-(t * y) * (t * y)).exp();
                s += w * (h - u) * (g(dh + u) + g(dh - u));
            }
            s * h
        } else {
            // second difference of P(y) = y int_0^y e^{-t^2u^2} du + e^{-t^2y^2}/(2t^2),
            // with the linear part of P removed where it cancels exactly
            let p = |y: f64| (-(t * y) * (t * y)).exp() / (2.0 * t * t) - y * PI.sqrt() / (2.0 * t) * libm::erfc(t * y);
            if d == 0 {
                h * PI.sqrt() / t - 1.0 / (t * t) + 2.0 * p(h)
            } else {
                let y = d as f64 * h;
                p(y + h) - 2.0 * p(y) + p(y - h)
            }
        }
    }
}

impl Default for CellQuadrature {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // degree 12 monomial: int_{-1}^{1} x^12 = 2/13
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_distance_accuracy_over_range() {
        for delta in [1e-4, 1e-8, 1e-12] {
            let e = ExpSum::inverse_distance(1e-3, 50.0, delta);
            let mut worst: f64 = 0.0;
            for k in 0..=400 {
                let rho = 1e-3 * (50.0f64 / 1e-3).powf(k as f64 / 400.0);
                worst = worst.max((e.eval(rho) * rho - 1.0).abs());
            }
            assert!(worst <= delta, "delta {delta}: worst {worst}");
        }
    }

    #[test]
    fn lattice_nodes_are_shared() {
        let a = ExpSum::inverse_distance(0.1, 10.0, 1e-8);
        let b = ExpSum::inverse_distance(0.1, 40.0, 1e-8);
        let common = a.nodes().iter().filter(|t| b.nodes().iter().any(|u| u == *t)).count();
        assert_eq!(common, a.len());
    }

    #[test]
    fn both_regimes_agree_with_direct_quadrature() {
        let q = CellQuadrature::new();
        let h = 0.7;
        // crude but independent: composite midpoint on a fine mesh
        let reference = |d: usize, t: f64| {
            let m = 200_000;
            let ds = 2.0 * h / m as f64;
            (0..m)
                .map(|i| {
                    let s = -h + (i as f64 + 0.5) * ds;
                    (h - s.abs()) * (-(t * (d as f64 * h + s)).powi(2)).exp() * ds
                })
                .sum::<f64>()
        };
        for &t in &[0.3, 1.3, 1.5, 4.0] {
            for d in 0..4 {
                let a = q.cell_pair_integral(d, h, t);
                let r = reference(d, t);
                assert!((a - r).abs() <= 1e-9 * reference(0, t), "t {t} d {d}: {a} vs {r}");
            }
        }
    }

    #[test]
    fn regimes_match_at_the_switch() {
        let q = CellQuadrature::new();
        let h = 1.0;
        for d in 0..5 {
            let below = q.cell_pair_integral(d, h, 1.0);
            let above = q.cell_pair_integral(d, h, 1.0 + 1e-12);
            assert!((below - above).abs() < 1e-11 * q.cell_pair_integral(0, h, 1.0), "d {d}: {below} {above}");
        }
    }
}
