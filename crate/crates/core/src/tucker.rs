//! Tucker-format tensors on `n^3` grids.
//!
//! A tensor is stored as a core `g` of shape `(r1, r2, r3)` and three factor
//! matrices `U (n x r1)`, `V (n x r2)`, `W (n x r3)` with
//! `a[i,j,k] = sum g[a,b,c] U[i,a] V[j,b] W[k,c]`. Cores and dense blocks are
//! column-major (first index fastest).
//!
//! Tolerances are always relative to the Frobenius norm of the tensor.

use nalgebra::DMatrix;

use crate::dense::DenseTensor;
use crate::linalg::{left_svd, mode_product, other_modes, rank_for_tail, truncated_range, unfold};

/// Index selection along one mode for block evaluation.
#[derive(Clone, Copy, Debug)]
pub enum Indices<'a> {
    All,
    Subset(&'a [usize]),
}

impl Indices<'_> {
    pub fn len(&self, n: usize) -> usize {
        match self {
            Indices::All => n,
            Indices::Subset(s) => s.len(),
        }
    }

    pub fn is_empty(&self, n: usize) -> bool {
        self.len(n) == 0
    }

    #[inline]
    pub fn get(&self, pos: usize) -> usize {
        match self {
            Indices::All => pos,
            Indices::Subset(s) => s[pos],
        }
    }
}

#[derive(Clone, Debug)]
pub struct TuckerTensor {
    n: usize,
    ranks: [usize; 3],
    core: Vec<f64>,
    factors: [DMatrix<f64>; 3],
}

impl TuckerTensor {
    pub fn new(core: Vec<f64>, factors: [DMatrix<f64>; 3]) -> Self {
        let n = factors[0].nrows();
        let ranks = [factors[0].ncols(), factors[1].ncols(), factors[2].ncols()];
        for f in &factors {
            assert_eq!(f.nrows(), n, "all factors must have n rows");
        }
        assert_eq!(core.len(), ranks.iter().product::<usize>(), "core size must match factor ranks");
        Self { n, ranks, core, factors }
    }

    /// Rank-(1,1,1) zero tensor.
    pub fn zeros(n: usize) -> Self {
        let mut e = DMatrix::zeros(n, 1);
        e[(0, 0)] = 1.0;
        Self::new(vec![0.0], [e.clone(), e.clone(), e])
    }

    pub fn rank_one(u: &[f64], v: &[f64], w: &[f64]) -> Self {
        assert!(u.len() == v.len() && v.len() == w.len());
        let n = u.len();
        Self::new(
            vec![1.0],
            [
                DMatrix::from_column_slice(n, 1, u),
                DMatrix::from_column_slice(n, 1, v),
                DMatrix::from_column_slice(n, 1, w),
            ],
        )
    }

    /// Tensor of all ones.
    pub fn ones(n: usize) -> Self {
        let one = vec![1.0; n];
        Self::rank_one(&one, &one, &one)
    }

    /// HOSVD compression of a dense array to relative accuracy `eps`.
    pub fn from_dense(a: &DenseTensor, eps: f64) -> Self {
        assert!(eps > 0.0, "tolerance must be positive");
        let n = a.n();
        let total = a.norm();
        if total == 0.0 {
            return Self::zeros(n);
        }
        let tol = eps * total / 3f64.sqrt();
        let mut data = a.data().to_vec();
        let mut dims = [n, n, n];
        let mut factors: Vec<DMatrix<f64>> = Vec::with_capacity(3);
        for mode in 0..3 {
            let (u, s) = left_svd(&unfold(&data, dims, mode));
            let r = rank_for_tail(&s, tol);
            let u = u.columns(0, r).into_owned();
            let (next, nd) = mode_product(&data, dims, mode, &u.transpose());
            data = next;
            dims = nd;
            factors.push(u);
        }
        let [u, v, w]: [DMatrix<f64>; 3] = factors.try_into().expect("three modes");
        Self::new(data, [u, v, w])
    }

    /// Exact Tucker form of a canonical sum `sum_k weights[k] a_k (x) b_k (x) c_k`
    /// (columns of the three factor matrices), compressed so that the factor
    /// bases keep the columns to relative accuracy `eps`.
    pub fn from_canonical(weights: &[f64], factors: [&DMatrix<f64>; 3], eps: f64) -> Self {
        let n = factors[0].nrows();
        let terms = weights.len();
        for f in &factors {
            assert_eq!(f.ncols(), terms);
            assert_eq!(f.nrows(), n);
        }
        if terms == 0 {
            return Self::zeros(n);
        }
        let mut bases = Vec::with_capacity(3);
        let mut coeffs = Vec::with_capacity(3);
        for f in factors {
            let weighted = DMatrix::from_fn(n, terms, |i, k| f[(i, k)] * weights[k].abs().cbrt());
            let mut q = truncated_range(&weighted, eps * 1e-2 * weighted.norm(), n);
            if q.ncols() == 0 {
                q = DMatrix::zeros(n, 1);
                q[(0, 0)] = 1.0;
            }
            coeffs.push(q.transpose() * f);
            bases.push(q);
        }
        let ranks = [bases[0].ncols(), bases[1].ncols(), bases[2].ncols()];
        let mut core = vec![0.0; ranks.iter().product()];
        for k in 0..terms {
            let (a, b, c) = (coeffs[0].column(k), coeffs[1].column(k), coeffs[2].column(k));
            let wk = weights[k];
            for z in 0..ranks[2] {
                let wz = wk * c[z];
                for y in 0..ranks[1] {
                    let wyz = wz * b[y];
                    let off = ranks[0] * (y + ranks[1] * z);
                    for x in 0..ranks[0] {
                        core[off + x] += wyz * a[x];
                    }
                }
            }
        }
        let [u, v, w]: [DMatrix<f64>; 3] = bases.try_into().expect("three modes");
        Self::new(core, [u, v, w]).round(eps)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn ranks(&self) -> [usize; 3] {
        self.ranks
    }

    pub fn max_rank(&self) -> usize {
        *self.ranks.iter().max().expect("three ranks")
    }

    #[inline]
    pub fn core(&self) -> &[f64] {
        &self.core
    }

    #[inline]
    pub fn factor(&self, mode: usize) -> &DMatrix<f64> {
        &self.factors[mode]
    }

    pub fn factors(&self) -> &[DMatrix<f64>; 3] {
        &self.factors
    }

    pub fn into_parts(self) -> (Vec<f64>, [DMatrix<f64>; 3]) {
        (self.core, self.factors)
    }

    /// Number of stored parameters `r1 r2 r3 + n (r1 + r2 + r3)`.
    pub fn storage(&self) -> usize {
        self.core.len() + self.n * self.ranks.iter().sum::<usize>()
    }

    /// Single element.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let [r1, r2, r3] = self.ranks;
        let (u, v, w) = (&self.factors[0], &self.factors[1], &self.factors[2]);
        let mut s = 0.0;
        for c in 0..r3 {
            let wc = w[(k, c)];
            if wc == 0.0 {
                continue;
            }
            for b in 0..r2 {
                let vb = v[(j, b)] * wc;
                let off = r1 * (b + r2 * c);
                let mut t = 0.0;
                for a in 0..r1 {
                    t += self.core[off + a] * u[(i, a)];
                }
                s += t * vb;
            }
        }
        s
    }

    /// Dense sub-block on the given index sets, column-major over
    /// `(len0, len1, len2)`.
    pub fn eval_block(&self, idx: [Indices<'_>; 3]) -> Vec<f64> {
        let n = self.n;
        let subs: Vec<DMatrix<f64>> = (0..3)
            .map(|m| match idx[m] {
                Indices::All => self.factors[m].clone(),
                Indices::Subset(rows) => {
                    let f = &self.factors[m];
                    DMatrix::from_fn(rows.len(), f.ncols(), |i, j| f[(rows[i], j)])
                }
            })
            .collect();
        let lens = [idx[0].len(n), idx[1].len(n), idx[2].len(n)];
        if lens.contains(&0) {
            return Vec::new();
        }
        // Contract the modes that shrink the intermediate the most first.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = lens[a] as f64 / self.ranks[a] as f64;
            let rb = lens[b] as f64 / self.ranks[b] as f64;
            ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut data = self.core.clone();
        let mut dims = self.ranks;
        for &m in &order {
            let (next, nd) = mode_product(&data, dims, m, &subs[m]);
            data = next;
            dims = nd;
        }
        data
    }

    /// Mode-`mode` fibers through the index pairs `pairs` of the other two
    /// modes (lower mode first), as the columns of an `n x pairs.len()`
    /// matrix.
    pub fn eval_fibers(&self, mode: usize, pairs: &[(usize, usize)]) -> DMatrix<f64> {
        let (a, b) = other_modes(mode);
        let r = self.ranks;
        let mut x = DMatrix::zeros(r[mode], pairs.len());
        let mut idx = [0usize; 3];
        for (p, &(ja, jb)) in pairs.iter().enumerate() {
            for gb in 0..r[b] {
                let wb = self.factors[b][(jb, gb)];
                if wb == 0.0 {
                    continue;
                }
                idx[b] = gb;
                for ga in 0..r[a] {
                    let w = wb * self.factors[a][(ja, ga)];
                    if w == 0.0 {
                        continue;
                    }
                    idx[a] = ga;
                    for gm in 0..r[mode] {
                        idx[mode] = gm;
                        x[(gm, p)] += w * self.core[idx[0] + r[0] * (idx[1] + r[1] * idx[2])];
                    }
                }
            }
        }
        &self.factors[mode] * x
    }

    pub fn to_dense(&self) -> DenseTensor {
        assert!(
            self.n <= 4 * crate::dense::DENSE_LIMIT,
            "refusing to densify an n = {} tensor",
            self.n
        );
        DenseTensor::from_vec(self.n, self.eval_block([Indices::All; 3]))
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.core.iter_mut().for_each(|g| *g *= c);
        out
    }

    /// Exact sum; ranks add up.
    pub fn add(&self, other: &Self) -> Self {
        Self::linear_combination(&[(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    /// Exact `sum_t c_t x_t` with a block-diagonal core.
    pub fn linear_combination(terms: &[(f64, &Self)]) -> Self {
        assert!(!terms.is_empty(), "empty linear combination");
        let n = terms[0].1.n;
        for (_, t) in terms {
            assert_eq!(t.n, n, "shape mismatch in linear combination");
        }
        let mut ranks = [0usize; 3];
        for (_, t) in terms {
            for m in 0..3 {
                ranks[m] += t.ranks[m];
            }
        }
        let factors: Vec<DMatrix<f64>> = (0..3)
            .map(|m| {
                let mut f = DMatrix::zeros(n, ranks[m]);
                let mut off = 0;
                for (_, t) in terms {
                    f.columns_mut(off, t.ranks[m]).copy_from(&t.factors[m]);
                    off += t.ranks[m];
                }
                f
            })
            .collect();
        let mut core = vec![0.0; ranks.iter().product()];
        let mut off = [0usize; 3];
        for (c, t) in terms {
            let [r1, r2, r3] = t.ranks;
            for z in 0..r3 {
                for y in 0..r2 {
                    for x in 0..r1 {
                        let dst = (off[0] + x) + ranks[0] * ((off[1] + y) + ranks[1] * (off[2] + z));
                        core[dst] = c * t.core[x + r1 * (y + r2 * z)];
                    }
                }
            }
            for m in 0..3 {
                off[m] += t.ranks[m];
            }
        }
        let [u, v, w]: [DMatrix<f64>; 3] = factors.try_into().expect("three modes");
        Self::new(core, [u, v, w])
    }

    /// Frobenius inner product via factor Gram matrices; nothing is densified.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "shape mismatch in inner product");
        let mut data = other.core.clone();
        let mut dims = other.ranks;
        for m in 0..3 {
            let gram = self.factors[m].transpose() * &other.factors[m];
            let (next, nd) = mode_product(&data, dims, m, &gram);
            data = next;
            dims = nd;
        }
        self.core.iter().zip(&data).map(|(a, b)| a * b).sum()
    }

    /// Frobenius norm, computed from the core after orthogonalizing factors.
    pub fn norm(&self) -> f64 {
        let orth = self.orthogonalized();
        orth.core.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Sum of all elements.
    pub fn sum(&self) -> f64 {
        let mut data = self.core.clone();
        let mut dims = self.ranks;
        for m in 0..3 {
            let ones = DMatrix::from_element(1, self.n, 1.0);
            let colsum = ones * &self.factors[m];
            let (next, nd) = mode_product(&data, dims, m, &colsum);
            data = next;
            dims = nd;
        }
        data[0]
    }

    /// Same tensor with orthonormal factor columns (QR per factor).
    pub fn orthogonalized(&self) -> Self {
        let mut data = self.core.clone();
        let mut dims = self.ranks;
        let mut factors = Vec::with_capacity(3);
        for m in 0..3 {
            let qr = self.factors[m].clone().qr();
            let (q, r) = (qr.q(), qr.r());
            let (next, nd) = mode_product(&data, dims, m, &r);
            data = next;
            dims = nd;
            factors.push(q);
        }
        let [u, v, w]: [DMatrix<f64>; 3] = factors.try_into().expect("three modes");
        Self::new(data, [u, v, w])
    }

    /// SVD-based rounding to relative accuracy `eps`.
    ///
    /// Factors are orthogonalized, then the small core is truncated mode by
    /// mode (sequential HOSVD) with a per-mode budget of `eps / sqrt(3)`.
    pub fn round(&self, eps: f64) -> Self {
        self.round_capped(eps, usize::MAX)
    }

    /// Rounding with an additional upper bound on every rank.
    pub fn round_capped(&self, eps: f64, max_rank: usize) -> Self {
        assert!(eps > 0.0, "tolerance must be positive");
        let orth = self.orthogonalized();
        let total = orth.core.iter().map(|x| x * x).sum::<f64>().sqrt();
        if total == 0.0 {
            return Self::zeros(self.n);
        }
        let tol = eps * total / 3f64.sqrt();
        let mut data = orth.core;
        let mut dims = orth.ranks;
        let mut factors = Vec::with_capacity(3);
        for (m, q) in orth.factors.iter().enumerate() {
            let (u, s) = left_svd(&unfold(&data, dims, m));
            let r = rank_for_tail(&s, tol).min(max_rank).max(1);
            let u = u.columns(0, r).into_owned();
            let (next, nd) = mode_product(&data, dims, m, &u.transpose());
            data = next;
            dims = nd;
            factors.push(q * u);
        }
        let [u, v, w]: [DMatrix<f64>; 3] = factors.try_into().expect("three modes");
        Self::new(data, [u, v, w])
    }

    /// Replaces one factor by `op * factor` (a linear operator along that mode).
    pub fn map_factor(&self, mode: usize, op: impl FnOnce(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        let mut out = self.clone();
        let f = op(&self.factors[mode]);
        assert_eq!(f.ncols(), self.ranks[mode], "factor map must keep the rank");
        assert_eq!(f.nrows(), self.n, "factor map must keep the mode size");
        out.factors[mode] = f;
        out
    }

    /// Applies the same linear operator along all three modes.
    pub fn map_factors(&self, op: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        let factors = [op(&self.factors[0]), op(&self.factors[1]), op(&self.factors[2])];
        for (m, f) in factors.iter().enumerate() {
            assert_eq!(f.ncols(), self.ranks[m]);
        }
        Self::new(self.core.clone(), factors)
    }

    /// Largest deviation of `U^T U` from the identity over the three factors.
    pub fn orthonormality_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| {
                let g = f.transpose() * f;
                (g - DMatrix::identity(f.ncols(), f.ncols())).amax()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tucker(n: usize, r: [usize; 3], seed: u64) -> TuckerTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let core = (0..r.iter().product()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |rng: &mut ChaCha8Rng, k| DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0));
        let u = f(&mut rng, r[0]);
        let v = f(&mut rng, r[1]);
        let w = f(&mut rng, r[2]);
        TuckerTensor::new(core, [u, v, w])
    }

    /// Reconstruction straight from the defining triple sum.
    fn triple_sum(t: &TuckerTensor, i: usize, j: usize, k: usize) -> f64 {
        let [r1, r2, r3] = t.ranks();
        let mut s = 0.0;
        for c in 0..r3 {
            for b in 0..r2 {
                for a in 0..r1 {
                    s += t.core()[a + r1 * (b + r2 * c)]
                        * t.factor(0)[(i, a)]
                        * t.factor(1)[(j, b)]
                        * t.factor(2)[(k, c)];
                }
            }
        }
        s
    }

    #[test]
    fn block_and_element_evaluation_match_triple_sum() {
        let t = random_tucker(7, [2, 3, 4], 1);
        let d = t.to_dense();
        for (i, j, k) in [(0, 0, 0), (6, 2, 3), (3, 5, 1)] {
            let s = triple_sum(&t, i, j, k);
            assert!((d.get(i, j, k) - s).abs() < 1e-13);
            assert!((t.get(i, j, k) - s).abs() < 1e-13);
        }
        let rows0 = [1, 5];
        let rows2 = [6, 0, 3];
        let blk = t.eval_block([Indices::Subset(&rows0), Indices::All, Indices::Subset(&rows2)]);
        assert_eq!(blk.len(), 2 * 7 * 3);
        for (c, &k) in rows2.iter().enumerate() {
            for j in 0..7 {
                for (a, &i) in rows0.iter().enumerate() {
                    let v = blk[a + 2 * (j + 7 * c)];
                    assert!((v - d.get(i, j, k)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn fibers_match_dense_values() {
        let t = random_tucker(6, [3, 2, 4], 2);
        let d = t.to_dense();
        let pairs = [(0, 5), (4, 1), (2, 2)];
        for mode in 0..3 {
            let f = t.eval_fibers(mode, &pairs);
            for (p, &(x, y)) in pairs.iter().enumerate() {
                for i in 0..6 {
                    let v = match mode {
                        0 => d.get(i, x, y),
                        1 => d.get(x, i, y),
                        _ => d.get(x, y, i),
                    };
                    assert!((f[(i, p)] - v).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn zero_tensor_is_rank_one() {
        let z = TuckerTensor::from_dense(&DenseTensor::zeros(8), 1e-8);
        assert_eq!(z.ranks(), [1, 1, 1]);
        assert_eq!(z.norm(), 0.0);
        assert_eq!(z.round(1e-3).ranks(), [1, 1, 1]);
    }

    #[test]
    fn rank_one_outer_product_is_recovered_exactly() {
        let u: Vec<f64> = (0..10).map(|i| (i as f64).sin() + 2.0).collect();
        let v: Vec<f64> = (0..10).map(|i| (i as f64 * 0.3).cos()).collect();
        let w: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let dense = DenseTensor::from_fn(10, |i, j, k| u[i] * v[j] * w[k]);
        let t = TuckerTensor::from_dense(&dense, 0.1);
        assert_eq!(t.ranks(), [1, 1, 1]);
        assert!(t.to_dense().rel_error(&dense) < 1e-14);
    }

    #[test]
    fn duplicated_factor_columns_round_to_rank_one() {
        let u: Vec<f64> = (0..9).map(|i| 1.0 + i as f64).collect();
        let base = TuckerTensor::rank_one(&u, &u, &u);
        let (_, f) = base.clone().into_parts();
        let mut u2 = DMatrix::zeros(9, 2);
        u2.column_mut(0).copy_from(&f[0].column(0));
        u2.column_mut(1).copy_from(&f[0].column(0));
        let padded = TuckerTensor::new(vec![0.25, 0.75], [u2, f[1].clone(), f[2].clone()]);
        let r = padded.round(1e-10);
        assert_eq!(r.ranks(), [1, 1, 1]);
        assert!(r.to_dense().rel_error(&base.to_dense()) < 1e-12);
    }

    #[test]
    fn rounding_orthonormalizes_and_meets_tolerance() {
        let t = random_tucker(12, [5, 5, 5], 2);
        let dense = t.to_dense();
        for eps in [1e-1, 1e-3, 1e-12] {
            let r = t.round(eps);
            assert!(r.orthonormality_defect() < 1e-12);
            assert!(r.to_dense().rel_error(&dense) <= eps * (1.0 + 1e-9));
            let ranks = r.ranks();
            assert!(ranks.iter().all(|&x| x <= 5));
        }
    }

    #[test]
    fn zero_combination_rounds_to_zero() {
        let t = random_tucker(8, [2, 3, 2], 3);
        let z = t.add(&t.scale(-1.0)).round(1e-10);
        assert!(z.norm() <= 1e-12 * t.norm());
        assert!(t.scale(0.0).round(1e-6).norm() == 0.0);
    }

    #[test]
    fn sum_of_elements() {
        let t = random_tucker(6, [2, 2, 3], 4);
        assert!((t.sum() - t.to_dense().sum()).abs() < 1e-12);
    }

    #[test]
    fn canonical_sum_converts_exactly() {
        let n = 11;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(n, 4, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, 4, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(n, 4, |_, _| rng.gen_range(-1.0..1.0));
        let w = [1.0, -2.0, 0.5, 3.0];
        let t = TuckerTensor::from_canonical(&w, [&a, &b, &c], 1e-12);
        let dense = DenseTensor::from_fn(n, |i, j, k| (0..4).map(|q| w[q] * a[(i, q)] * b[(j, q)] * c[(k, q)]).sum());
        assert!(t.to_dense().rel_error(&dense) < 1e-11);
    }
}
