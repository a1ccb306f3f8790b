//! Anderson (Pulay) mixing for fixed-point iterations `x = G(x)`.
//!
//! With inputs `x_j` and residuals `r_j = G(x_j) - x_j` from the last `m`
//! steps, the coefficients minimize `|| sum a_j r_j ||` subject to
//! `sum a_j = 1` (solved through the Lagrange system) and the next input is
//! `sum a_j (x_j + beta r_j)`.
//!
//! The history is cleared whenever a residual is larger than its
//! predecessor: the SCF map carries orbital state besides the density, so
//! old pairs stop describing it once the iteration moves.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::tucker::TuckerTensor;

/// Vector space operations the mixer needs.
pub trait MixVector: Clone {
    fn dot(&self, other: &Self) -> f64;
    fn combine(terms: &[(f64, &Self)]) -> Self;
}

impl MixVector for Vec<f64> {
    fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    fn combine(terms: &[(f64, &Self)]) -> Self {
        let mut out = vec![0.0; terms[0].1.len()];
        for (c, v) in terms {
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o += c * x;
            }
        }
        out
    }
}

/// Tucker tensor whose combinations are accumulated term by term with
/// rounding to relative accuracy `eps`, so ranks stay near those of the
/// inputs instead of adding up.
#[derive(Clone, Debug)]
pub struct RoundedTensor {
    pub tensor: TuckerTensor,
    pub eps: f64,
}

impl RoundedTensor {
    pub fn new(tensor: TuckerTensor, eps: f64) -> Self {
        Self { tensor, eps }
    }
}

impl MixVector for RoundedTensor {
    fn dot(&self, other: &Self) -> f64 {
        self.tensor.inner(&other.tensor)
    }

    fn combine(terms: &[(f64, &Self)]) -> Self {
        let eps = terms.iter().map(|(_, t)| t.eps).fold(f64::INFINITY, f64::min);
        let mut acc = terms[0].1.tensor.scale(terms[0].0);
        for (c, t) in &terms[1..] {
            acc = TuckerTensor::linear_combination(&[(1.0, &acc), (*c, &t.tensor)]).round(eps);
        }
        Self { tensor: acc, eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixKind {
    Anderson,
    /// Plain `(1 - beta) x + beta G(x)`, used for the first step and
    /// whenever the Lagrange system is singular.
    Simple,
}

#[derive(Clone, Debug)]
pub struct AndersonMixer<V> {
    depth: usize,
    beta: f64,
    history: VecDeque<(V, V)>,
    fallbacks: usize,
    restarts: usize,
}

impl<V: MixVector> AndersonMixer<V> {
    pub fn new(depth: usize, beta: f64) -> Self {
        assert!(depth >= 1, "mixing depth must be at least one");
        assert!(beta > 0.0 && beta <= 1.0, "mixing parameter must lie in (0, 1]");
        Self { depth, beta, history: VecDeque::new(), fallbacks: 0, restarts: 0 }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Times the singular-system fallback was taken.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// Times the history was dropped after a residual increase.
    pub fn restarts(&self) -> usize {
        self.restarts
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Records the pair `(x, G(x))` and returns the next input.
    pub fn mix(&mut self, input: V, output: &V) -> (V, MixKind) {
        let residual = V::combine(&[(1.0, output), (-1.0, &input)]);
        if let Some((_, last)) = self.history.back() {
            if residual.dot(&residual) > last.dot(last) {
                self.history.clear();
                self.restarts += 1;
            }
        }
        self.history.push_back((input, residual));
        while self.history.len() > self.depth {
            self.history.pop_front();
        }
        let k = self.history.len();
        if k > 1 {
            if let Some(alpha) = self.coefficients() {
                let mut terms = Vec::with_capacity(2 * k);
                for (a, (x, r)) in alpha.iter().zip(&self.history) {
                    terms.push((*a, x));
                    terms.push((a * self.beta, r));
                }
                return (V::combine(&terms), MixKind::Anderson);
            }
            self.fallbacks += 1;
            // keep only the newest pair so the next steps can rebuild
            while self.history.len() > 1 {
                self.history.pop_front();
            }
        }
        let (x, r) = self.history.back().expect("just pushed");
        (V::combine(&[(1.0, x), (self.beta, r)]), MixKind::Simple)
    }

    fn coefficients(&self) -> Option<Vec<f64>> {
        let k = self.history.len();
        let mut b = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = self.history[i].1.dot(&self.history[j].1);
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
        let dmax = (0..k).map(|i| b[(i, i)]).fold(0.0, f64::max);
        if !(dmax > 0.0 && dmax.is_finite()) {
            return None;
        }
        // bordered system on the scaled overlaps; B itself may be singular
        // (more pairs than independent residuals) while this stays regular
        let mut sys = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for i in 0..k {
            for j in 0..k {
                sys[(i, j)] = b[(i, j)] / dmax;
            }
            sys[(i, k)] = 1.0;
            sys[(k, i)] = 1.0;
        }
        rhs[k] = 1.0;
        let (_, sv, _) = crate::linalg::svd(&sys);
        let (smin, smax) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if smin < 1e-12 * smax {
            return None;
        }
        let sol = sys.lu().solve(&rhs)?;
        let alpha: Vec<f64> = sol.iter().take(k).copied().collect();
        if alpha.iter().all(|a| a.is_finite()) {
            Some(alpha)
        } else {
            None
        }
    }
}
