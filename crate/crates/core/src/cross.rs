//! Adaptive Tucker cross approximation from element evaluations.
//!
//! The array is only touched through [`ElementOracle`]. Each sweep samples,
//! for every mode, a few full fibers, extracts a basis by truncated pivoted
//! QR and picks pivot rows by maxvol. The array is then sampled on the small
//! block `I1 x I2 x I3` of pivot rows (plus a few random rows); the
//! approximation interpolates it on the pivots, and maxvol on the unfoldings
//! of the block picks the fibers of the next sweep. Per sweep the cost is
//! `O(n r)` evaluations plus the `O(r^3)` block.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{maxvol, mode_product, other_modes, pseudo_inverse, select_rows, truncated_range, unfold};
use crate::tucker::{Indices, TuckerTensor};

/// Element access to an implicit `n^3` array.
pub trait ElementOracle {
    fn size(&self) -> usize;

    /// Fills `out` (column-major over the selected index lengths) with the
    /// array restricted to the given index sets.
    fn eval_block(&self, idx: [Indices<'_>; 3], out: &mut [f64]);

    fn eval(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut out = [0.0];
        self.eval_block([Indices::Subset(&[i]), Indices::Subset(&[j]), Indices::Subset(&[k])], &mut out);
        out[0]
    }

    /// Mode-`mode` fibers through the index pairs `pairs` of the other two
    /// modes (lower mode first); `out` is `n x pairs.len()`, column-major.
    fn eval_fibers(&self, mode: usize, pairs: &[(usize, usize)], out: &mut [f64]) {
        let n = self.size();
        let (a, b) = other_modes(mode);
        for (p, &(ja, jb)) in pairs.iter().enumerate() {
            let (sa, sb) = ([ja], [jb]);
            let mut idx = [Indices::All; 3];
            idx[a] = Indices::Subset(&sa);
            idx[b] = Indices::Subset(&sb);
            self.eval_block(idx, &mut out[p * n..(p + 1) * n]);
        }
    }

    /// Rows worth starting from in the given mode, if the oracle knows any.
    fn pivot_hints(&self, _mode: usize) -> Option<Vec<usize>> {
        None
    }
}

/// Oracle defined by a closure over integer indices.
pub struct FnOracle<F> {
    n: usize,
    f: F,
}

impl<F: Fn(usize, usize, usize) -> f64> FnOracle<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(usize, usize, usize) -> f64> ElementOracle for FnOracle<F> {
    fn size(&self) -> usize {
        self.n
    }

    fn eval_block(&self, idx: [Indices<'_>; 3], out: &mut [f64]) {
        let n = self.n;
        let l = [idx[0].len(n), idx[1].len(n), idx[2].len(n)];
        let mut p = 0;
        for c in 0..l[2] {
            let k = idx[2].get(c);
            for b in 0..l[1] {
                let j = idx[1].get(b);
                for a in 0..l[0] {
                    out[p] = (self.f)(idx[0].get(a), j, k);
                    p += 1;
                }
            }
        }
    }
}

/// Pointwise function of one or more Tucker tensors,
/// `a[i,j,k] = f(x_1[i,j,k], ..., x_m[i,j,k])`.
pub struct TuckerMap<'a, F> {
    inputs: Vec<&'a TuckerTensor>,
    f: F,
}

impl<'a, F: Fn(&[f64]) -> f64> TuckerMap<'a, F> {
    pub fn new(inputs: Vec<&'a TuckerTensor>, f: F) -> Self {
        assert!(!inputs.is_empty(), "a map needs at least one input");
        let n = inputs[0].n();
        assert!(inputs.iter().all(|t| t.n() == n), "inputs must share the grid");
        Self { inputs, f }
    }
}

impl<F: Fn(&[f64]) -> f64> ElementOracle for TuckerMap<'_, F> {
    fn size(&self) -> usize {
        self.inputs[0].n()
    }

    fn eval_block(&self, idx: [Indices<'_>; 3], out: &mut [f64]) {
        let blocks: Vec<Vec<f64>> = self.inputs.iter().map(|t| t.eval_block(idx)).collect();
        let mut args = vec![0.0; blocks.len()];
        for (p, o) in out.iter_mut().enumerate() {
            for (a, b) in args.iter_mut().zip(&blocks) {
                *a = b[p];
            }
            *o = (self.f)(&args);
        }
    }

    fn eval_fibers(&self, mode: usize, pairs: &[(usize, usize)], out: &mut [f64]) {
        let fibers: Vec<DMatrix<f64>> = self.inputs.iter().map(|t| t.eval_fibers(mode, pairs)).collect();
        let mut args = vec![0.0; fibers.len()];
        for (p, o) in out.iter_mut().enumerate() {
            for (a, f) in args.iter_mut().zip(&fibers) {
                *a = f.as_slice()[p];
            }
            *o = (self.f)(&args);
        }
    }

    fn pivot_hints(&self, mode: usize) -> Option<Vec<usize>> {
        let mut rows = Vec::new();
        for t in &self.inputs {
            let q = t.factor(mode).clone().qr().q();
            for r in maxvol(&q) {
                if !rows.contains(&r) {
                    rows.push(r);
                }
            }
        }
        Some(rows)
    }
}

#[derive(Clone, Debug)]
pub struct CrossOptions {
    /// Target relative accuracy in the Frobenius norm.
    pub eps: f64,
    pub max_rank: usize,
    pub max_sweeps: usize,
    /// Rank used for random starting index sets when no hints exist.
    pub initial_rank: usize,
    pub seed: u64,
}

impl CrossOptions {
    pub fn new(eps: f64) -> Self {
        Self { eps, max_rank: 128, max_sweeps: 12, initial_rank: 4, seed: 0x5eed }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_rank(mut self, r: usize) -> Self {
        self.max_rank = r;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrossReport {
    pub evaluations: usize,
    pub sweeps: usize,
    pub ranks: [usize; 3],
    pub converged: bool,
    /// Relative change between the last two sweeps.
    pub last_change: f64,
    /// Relative error estimated on random fibers off the cross.
    pub residual_estimate: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrossError {
    #[error("non-finite value {value} at index ({i}, {j}, {k})")]
    NonFinite { i: usize, j: usize, k: usize, value: f64 },
    #[error("empty array")]
    Empty,
}

struct Counter<'a, O: ?Sized> {
    oracle: &'a O,
    n: usize,
    evaluations: usize,
}

impl<O: ElementOracle + ?Sized> Counter<'_, O> {
    fn block(&mut self, idx: [Indices<'_>; 3]) -> Result<Vec<f64>, CrossError> {
        let n = self.n;
        let l = [idx[0].len(n), idx[1].len(n), idx[2].len(n)];
        let mut out = vec![0.0; l[0] * l[1] * l[2]];
        self.oracle.eval_block(idx, &mut out);
        self.evaluations += out.len();
        if let Some(p) = out.iter().position(|v| !v.is_finite()) {
            let a = p % l[0];
            let b = (p / l[0]) % l[1];
            let c = p / (l[0] * l[1]);
            return Err(CrossError::NonFinite { i: idx[0].get(a), j: idx[1].get(b), k: idx[2].get(c), value: out[p] });
        }
        Ok(out)
    }

    fn fibers(&mut self, mode: usize, pairs: &[(usize, usize)]) -> Result<DMatrix<f64>, CrossError> {
        let n = self.n;
        let mut out = vec![0.0; n * pairs.len()];
        self.oracle.eval_fibers(mode, pairs, &mut out);
        self.evaluations += out.len();
        if let Some(p) = out.iter().position(|v| !v.is_finite()) {
            let (i, (ja, jb)) = (p % n, pairs[p / n]);
            let (a, b) = other_modes(mode);
            let mut at = [0usize; 3];
            at[mode] = i;
            at[a] = ja;
            at[b] = jb;
            return Err(CrossError::NonFinite { i: at[0], j: at[1], k: at[2], value: out[p] });
        }
        Ok(DMatrix::from_vec(n, pairs.len(), out))
    }
}

/// Fiber positions for `mode`: maxvol columns of the mode unfolding of the
/// sampled block, plus a few random pairs that let the rank grow.
fn choose_pairs(
    block: &[f64],
    sets: &[Vec<usize>],
    mode: usize,
    eps: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let (a, b) = other_modes(mode);
    let dims = [sets[0].len(), sets[1].len(), sets[2].len()];
    let mat = unfold(block, dims, mode).transpose();
    let q = truncated_range(&mat, 0.02 * eps * mat.norm(), dims[mode]);
    let mut pairs: Vec<(usize, usize)> =
        maxvol(&q).into_iter().map(|c| (sets[a][c % dims[a]], sets[b][c / dims[a]])).collect();
    let extra = 2 + pairs.len() / 8;
    let mut added = 0;
    let mut tries = 0;
    while added < extra && tries < 20 * extra {
        let p = (rng.gen_range(0..n), rng.gen_range(0..n));
        tries += 1;
        if !pairs.contains(&p) {
            pairs.push(p);
            added += 1;
        }
    }
    pairs
}

fn random_rows(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(count.min(n).max(1));
    all
}

/// Pivot rows plus a few random extras that let the rank grow next sweep.
fn extend_rows(pivots: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let extra = 2 + pivots.len() / 8;
    let mut rows = pivots.to_vec();
    let mut pool: Vec<usize> = (0..n).filter(|r| !pivots.contains(r)).collect();
    pool.shuffle(rng);
    rows.extend(pool.into_iter().take(extra));
    rows
}

/// Approximates the array behind `oracle` in Tucker format.
pub fn cross_approximate<O: ElementOracle + ?Sized>(
    oracle: &O,
    opts: &CrossOptions,
) -> Result<(TuckerTensor, CrossReport), CrossError> {
    let n = oracle.size();
    if n == 0 {
        return Err(CrossError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut counter = Counter { oracle, n, evaluations: 0 };
    let max_rank = opts.max_rank.min(n).max(1);

    let mut sets: Vec<Vec<usize>> = (0..3)
        .map(|m| {
            let mut rows = oracle.pivot_hints(m).unwrap_or_default();
            rows.retain(|&r| r < n);
            rows.truncate(max_rank);
            if rows.len() < opts.initial_rank {
                let mut extra = random_rows(n, opts.initial_rank, &mut rng);
                extra.retain(|r| !rows.contains(r));
                rows.extend(extra.into_iter().take(opts.initial_rank - rows.len()));
            }
            extend_rows(&rows, n, &mut rng)
        })
        .collect();

    let mut report = CrossReport::default();
    let mut previous: Option<TuckerTensor> = None;
    let mut current = TuckerTensor::zeros(n);
    let mut stable = 0usize;
    let block = counter.block([Indices::Subset(&sets[0]), Indices::Subset(&sets[1]), Indices::Subset(&sets[2])])?;
    let mut pairs: Vec<Vec<(usize, usize)>> =
        (0..3).map(|m| choose_pairs(&block, &sets, m, opts.eps, n, &mut rng)).collect();

    for sweep in 1..=opts.max_sweeps {
        let mut bases: Vec<DMatrix<f64>> = Vec::with_capacity(3);
        let mut ranks = [0usize; 3];
        for m in 0..3 {
            let fibers = counter.fibers(m, &pairs[m])?;
            let scale = fibers.norm();
            let mut q = truncated_range(&fibers, 0.02 * opts.eps * scale, max_rank);
            if q.ncols() == 0 {
                q = DMatrix::zeros(n, 1);
                q[(sets[m][0], 0)] = 1.0;
            }
            let rows = maxvol(&q);
            ranks[m] = rows.len();
            sets[m] = extend_rows(&rows, n, &mut rng);
            bases.push(q);
        }

        // sample the block on the extended sets; the pivots lead each set,
        // so the core is its leading sub-block
        let block = counter.block([Indices::Subset(&sets[0]), Indices::Subset(&sets[1]), Indices::Subset(&sets[2])])?;
        let dims = [sets[0].len(), sets[1].len(), sets[2].len()];
        let mut data = Vec::with_capacity(ranks.iter().product());
        for c in 0..ranks[2] {
            for b in 0..ranks[1] {
                for a in 0..ranks[0] {
                    data.push(block[a + dims[0] * (b + dims[1] * c)]);
                }
            }
        }
        let mut cdims = ranks;
        for m in 0..3 {
            let sq = select_rows(&bases[m], &sets[m][..ranks[m]]);
            let inv = sq.clone().try_inverse().unwrap_or_else(|| pseudo_inverse(&sq, 1e-14));
            let (next, nd) = mode_product(&data, cdims, m, &inv);
            data = next;
            cdims = nd;
        }
        let [u, v, w]: [DMatrix<f64>; 3] = bases.try_into().expect("three modes");
        current = TuckerTensor::new(data, [u, v, w]).round(opts.eps * 0.25);
        pairs = (0..3).map(|m| choose_pairs(&block, &sets, m, opts.eps, n, &mut rng)).collect();

        report.sweeps = sweep;
        let norm = current.norm();
        let change = match &previous {
            Some(p) => {
                let d = current.sub(p).norm();
                if norm > 0.0 {
                    d / norm
                } else {
                    d
                }
            }
            None => f64::INFINITY,
        };
        report.last_change = change;
        log::trace!("cross sweep {sweep}: ranks {:?}, change {change:.3e}", current.ranks());
        if change <= opts.eps || norm == 0.0 {
            stable += 1;
        } else {
            stable = 0;
        }
        if stable >= 1 && sweep >= 2 {
            let resid = validation_error(&mut counter, &current, &mut rng)?;
            report.residual_estimate = resid;
            if resid <= opts.eps || norm == 0.0 {
                report.converged = true;
                break;
            }
        }
        previous = Some(current.clone());
    }
    if !report.converged {
        report.residual_estimate = validation_error(&mut counter, &current, &mut rng)?;
        log::debug!(
            "cross approximation stopped after {} sweeps without converging (change {:.3e}, residual {:.3e})",
            report.sweeps,
            report.last_change,
            report.residual_estimate
        );
    }
    let out = current.round(opts.eps * 0.5);
    report.ranks = out.ranks();
    report.evaluations = counter.evaluations;
    Ok((out, report))
}

/// Relative error on random fibers, scaled up to the full array.
fn validation_error<O: ElementOracle + ?Sized>(
    counter: &mut Counter<'_, O>,
    approx: &TuckerTensor,
    rng: &mut ChaCha8Rng,
) -> Result<f64, CrossError> {
    let n = counter.n;
    let t = 3.min(n);
    let mut err2 = 0.0;
    let mut count = 0usize;
    for m in 0..3 {
        let (a, b) = other_modes(m);
        let sa = random_rows(n, t, rng);
        let sb = random_rows(n, t, rng);
        let mut idx = [Indices::All; 3];
        idx[a] = Indices::Subset(&sa);
        idx[b] = Indices::Subset(&sb);
        let exact = counter.block(idx)?;
        let approx_block = approx.eval_block(idx);
        err2 += exact.iter().zip(&approx_block).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        count += exact.len();
    }
    let norm = approx.norm();
    let total = (err2 / count as f64 * (n * n * n) as f64).sqrt();
    Ok(if norm > 0.0 { total / norm } else { total })
}
