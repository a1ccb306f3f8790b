//! Small dense kernels shared by the tensor code: truncated pivoted QR,
//! maxvol row selection, SVD-based left bases and 3-way mode products.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

/// Orthonormal basis of the dominant column space of `a`.
///
/// Householder QR with column pivoting, stopped as soon as the Frobenius norm
/// of the not-yet-eliminated columns drops to `tol` (absolute) or `max_rank`
/// columns were taken. The returned `Q` satisfies
/// `||(I - Q Q^T) a||_F <= tol` unless the rank cap was hit.
pub fn truncated_range(a: &DMatrix<f64>, tol: f64, max_rank: usize) -> DMatrix<f64> {
    let (m, ncols) = a.shape();
    let kmax = m.min(ncols).min(max_rank);
    let mut w = a.clone();
    let mut norms: Vec<f64> = (0..ncols).map(|j| w.column(j).norm_squared()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(kmax);

    for k in 0..kmax {
        let remaining: f64 = norms[k..].iter().sum();
        if remaining.sqrt() <= tol {
            break;
        }
        let mut p = k;
        for j in k + 1..ncols {
            if norms[j] > norms[p] {
                p = j;
            }
        }
        if p != k {
            w.swap_columns(k, p);
            norms.swap(k, p);
        }

        let mut v: Vec<f64> = (k..m).map(|i| w[(i, k)]).collect();
        let xnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            break;
        }
        let alpha = if v[0] >= 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);

        for j in k..ncols {
            let mut col = w.column_mut(j);
            let dot: f64 = v.iter().zip(k..m).map(|(vi, i)| vi * col[i]).sum();
            for (vi, i) in v.iter().zip(k..m) {
                col[i] -= 2.0 * vi * dot;
            }
        }
        for j in k + 1..ncols {
            norms[j] = (k + 1..m).map(|i| w[(i, j)] * w[(i, j)]).sum();
        }
        norms[k] = 0.0;
        reflectors.push(v);
    }

    let r = reflectors.len();
    let mut q = DMatrix::<f64>::zeros(m, r);
    for j in 0..r {
        q[(j, j)] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        for j in 0..r {
            let mut col = q.column_mut(j);
            let dot: f64 = v.iter().zip(k..m).map(|(vi, i)| vi * col[i]).sum();
            if dot != 0.0 {
                for (vi, i) in v.iter().zip(k..m) {
                    col[i] -= 2.0 * vi * dot;
                }
            }
        }
    }
    q
}

/// Rows of `q` (tall, full column rank) spanning a submatrix of locally
/// maximal volume.
///
/// Starts from partial-pivoting elimination and then swaps rows while some
/// coefficient of `q q[I]^{-1}` exceeds `1 + 1e-2` in magnitude. Ties go to
/// the first index.
pub fn maxvol(q: &DMatrix<f64>) -> Vec<usize> {
    let (n, r) = q.shape();
    if r == 0 {
        return Vec::new();
    }
    assert!(n >= r, "maxvol needs at least as many rows as columns");

    let mut work = q.clone();
    let mut used = vec![false; n];
    let mut rows = Vec::with_capacity(r);
    for c in 0..r {
        let mut p = usize::MAX;
        let mut best = -1.0;
        for i in 0..n {
            if !used[i] && work[(i, c)].abs() > best {
                best = work[(i, c)].abs();
                p = i;
            }
        }
        used[p] = true;
        rows.push(p);
        let pivot = work[(p, c)];
        if pivot == 0.0 {
            continue;
        }
        for i in 0..n {
            if used[i] {
                continue;
            }
            let f = work[(i, c)] / pivot;
            if f != 0.0 {
                for cc in c..r {
                    let t = work[(p, cc)];
                    work[(i, cc)] -= f * t;
                }
            }
        }
    }

    let sub = select_rows(q, &rows);
    let Some(inv) = sub.try_inverse() else {
        return rows;
    };
    let mut b = q * inv;
    for _ in 0..(100 * r).max(200) {
        let mut bi = 0;
        let mut bj = 0;
        let mut best = -1.0;
        for j in 0..r {
            for i in 0..n {
                let v = b[(i, j)].abs();
                if v > best {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if best <= 1.0 + 1e-2 {
            break;
        }
        rows[bj] = bi;
        let pivot = b[(bi, bj)];
        let col = b.column(bj).clone_owned();
        let mut row = b.row(bi).clone_owned();
        row[bj] -= 1.0;
        b -= (col * row) / pivot;
    }
    rows
}

pub fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Left singular vectors and singular values (descending) of `a`.
///
/// Wide matrices go through a QR of the transpose first so the SVD only
/// sees a square factor.
pub fn left_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (m, k) = a.shape();
    if m == 0 || k == 0 {
        return (DMatrix::zeros(m, 0), Vec::new());
    }
    let small = if k > m {
        let r = a.transpose().qr().r();
        r.transpose()
    } else {
        a.clone()
    };
    let (u, s, _) = svd(&small);
    (u, s)
}

/// Thin SVD `a = u diag(s) v_t` with singular values sorted descending.
///
/// The bidiagonal solver occasionally returns a wrong factorization for
/// exactly rank-deficient input, so the result is checked and recomputed
/// from the transpose, then from the eigen-decomposition of `a^T a`.
pub fn svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let scale = a.norm();
    let accept = |u: &DMatrix<f64>, s: &[f64], v_t: &DMatrix<f64>| {
        let rebuilt = u * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(s)) * v_t;
        (rebuilt - a).norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
    };
    let direct = a.clone().svd(true, true);
    let (u, s, v_t) = (direct.u.expect("requested"), direct.singular_values, direct.v_t.expect("requested"));
    let (u, s, v_t) = if accept(&u, s.as_slice(), &v_t) {
        (u, s.as_slice().to_vec(), v_t)
    } else {
        let t = a.transpose().svd(true, true);
        let (tu, ts, tv_t) = (t.v_t.expect("requested").transpose(), t.singular_values, t.u.expect("requested").transpose());
        if accept(&tu, ts.as_slice(), &tv_t) {
            (tu, ts.as_slice().to_vec(), tv_t)
        } else {
            log::debug!("SVD check failed twice; using the Gram eigen-decomposition");
            gram_svd(a)
        }
    };
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&x, &y| s[y].partial_cmp(&s[x]).unwrap_or(std::cmp::Ordering::Equal));
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let v_sorted = DMatrix::from_fn(order.len(), v_t.ncols(), |i, j| v_t[(order[i], j)]);
    (u_sorted, order.iter().map(|&j| s[j]).collect(), v_sorted)
}

/// Moore-Penrose inverse dropping singular values below `rcond * s_max`.
pub fn pseudo_inverse(a: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let (u, s, v_t) = svd(a);
    let cut = rcond * s.first().copied().unwrap_or(0.0);
    let inv: Vec<f64> = s.iter().map(|&x| if x > cut { 1.0 / x } else { 0.0 }).collect();
    v_t.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(inv)) * u.transpose()
}

/// SVD through the symmetric eigen-decomposition of `a^T a`; left vectors
/// of negligible singular values are completed by QR.
fn gram_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, k) = a.shape();
    let p = m.min(k);
    let eig = (a.transpose() * a).symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap_or(std::cmp::Ordering::Equal));
    let v = DMatrix::from_fn(k, p, |i, j| eig.eigenvectors[(i, order[j])]);
    let av = a * &v;
    let s: Vec<f64> = (0..p).map(|j| av.column(j).norm()).collect();
    let floor = 1e-13 * s.first().copied().unwrap_or(0.0);
    // orthonormalize A v column by column, replacing tiny columns
    let mut u = DMatrix::zeros(m, p);
    let mut fill = 0;
    for j in 0..p {
        let mut col = if s[j] > floor { av.column(j) / s[j] } else { nalgebra::DVector::zeros(m) };
        loop {
            for q in 0..j {
                let d = u.column(q).dot(&col);
                col -= u.column(q) * d;
            }
            let nrm = col.norm();
            if nrm > 0.5 {
                u.set_column(j, &(col / nrm));
                break;
            }
            col = nalgebra::DVector::zeros(m);
            col[fill % m] = 1.0;
            fill += 1;
        }
    }
    (u, s, v.transpose())
}

/// Smallest `r >= 1` whose discarded tail `sqrt(sum_{i>=r} s_i^2)` is at most `tol`.
pub fn rank_for_tail(s: &[f64], tol: f64) -> usize {
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next.sqrt() > tol {
            break;
        }
        tail = next;
        r -= 1;
    }
    r.max(1)
}

/// Mode-`mode` product of a column-major 3-way array with `m` (`p x dims[mode]`).
pub fn mode_product(data: &[f64], dims: [usize; 3], mode: usize, m: &DMatrix<f64>) -> (Vec<f64>, [usize; 3]) {
    assert_eq!(m.ncols(), dims[mode], "mode product dimension mismatch");
    let p = m.nrows();
    let mut out_dims = dims;
    out_dims[mode] = p;
    let mut out = vec![0.0; out_dims.iter().product()];
    if out.is_empty() || data.is_empty() {
        return (out, out_dims);
    }
    match mode {
        0 => {
            let x = DMatrixView::from_slice(data, dims[0], dims[1] * dims[2]);
            let mut y = DMatrixViewMut::from_slice(&mut out, p, dims[1] * dims[2]);
            y.gemm(1.0, m, &x, 0.0);
        }
        1 => {
            let mt = m.transpose();
            let in_slab = dims[0] * dims[1];
            let out_slab = dims[0] * p;
            for k in 0..dims[2] {
                let x = DMatrixView::from_slice(&data[k * in_slab..(k + 1) * in_slab], dims[0], dims[1]);
                let mut y = DMatrixViewMut::from_slice(&mut out[k * out_slab..(k + 1) * out_slab], dims[0], p);
                y.gemm(1.0, &x, &mt, 0.0);
            }
        }
        2 => {
            let x = DMatrixView::from_slice(data, dims[0] * dims[1], dims[2]);
            let mut y = DMatrixViewMut::from_slice(&mut out, dims[0] * dims[1], p);
            y.gemm(1.0, &x, &m.transpose(), 0.0);
        }
        _ => panic!("mode must be 0, 1 or 2"),
    }
    (out, out_dims)
}

/// Mode-`mode` unfolding as a `dims[mode] x (product of the others)` matrix.
pub fn unfold(data: &[f64], dims: [usize; 3], mode: usize) -> DMatrix<f64> {
    let (a, b) = other_modes(mode);
    DMatrix::from_fn(dims[mode], dims[a] * dims[b], |row, col| {
        let ia = col % dims[a];
        let ib = col / dims[a];
        let mut idx = [0usize; 3];
        idx[mode] = row;
        idx[a] = ia;
        idx[b] = ib;
        data[idx[0] + dims[0] * (idx[1] + dims[1] * idx[2])]
    })
}

#[inline]
pub fn other_modes(mode: usize) -> (usize, usize) {
    match mode {
        0 => (1, 2),
        1 => (0, 2),
        2 => (0, 1),
        _ => panic!("mode must be 0, 1 or 2"),
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.l())
}
