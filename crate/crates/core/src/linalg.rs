//! Sparse symmetric matrices and the generalized eigensolver K x = λ M x.
//!
//! Large problems go through reverse Cuthill–McKee ordering, an envelope
//! Cholesky factorization of K + τM and block Lanczos on the shift-inverted
//! operator with full M-orthogonalization. The count of converged values is
//! certified by Sylvester inertia of K − sM. Small problems are solved densely.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("eigensolver converged {converged} of {wanted} eigenvalues")]
    NotConverged { converged: usize, wanted: usize },
    #[error("inertia check found {found} eigenvalues below {shift}, expected {expected}")]
    InertiaMismatch { shift: f64, expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("requested {wanted} eigenvalues of a problem of size {size}")]
    TooManyEigenvalues { wanted: usize, size: usize },
}

/// Compressed sparse rows; both triangles of symmetric matrices are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = (usize::MAX, usize::MAX);
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) outside {n}x{n}");
            if (i, j) == last {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = (i, j);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// x·(A y)
    pub fn quad(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// α A + β B over the union of both patterns.
    pub fn combine(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, alpha), (other, beta)] {
            for i in 0..m.n {
                let (c, v) = m.row(i);
                t.extend(c.iter().zip(v).map(|(&j, &a)| (i, j, s * a)));
            }
        }
        CsrMatrix::from_triplets(self.n, t)
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                d[(i, j)] += a;
            }
        }
        d
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).all(|(&j, &a)| (a - self.get(j, i)).abs() <= tol * a.abs().max(1.0))
        })
    }

    /// Reverse Cuthill–McKee permutation: `perm[new] = old`.
    pub fn rcm(&self) -> Vec<usize> {
        let n = self.n;
        let deg: Vec<usize> = (0..n).map(|i| self.row(i).0.iter().filter(|&&j| j != i).count()).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let mut start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (deg[i], i)).unwrap();
            // pseudo-peripheral start node
            let mut depth = bfs_levels(self, start, &visited, &deg).len();
            loop {
                let lv = bfs_levels(self, start, &visited, &deg);
                let cand = *lv.last().unwrap().iter().min_by_key(|&&j| (deg[j], j)).unwrap();
                let d = bfs_levels(self, cand, &visited, &deg).len();
                if d <= depth {
                    break;
                }
                depth = d;
                start = cand;
            }
            for level in bfs_levels(self, start, &visited, &deg) {
                for u in level {
                    visited[u] = true;
                    order.push(u);
                }
            }
        }
        order.reverse();
        order
    }

    /// P A Pᵀ with `perm[new] = old`.
    pub fn permute(&self, perm: &[usize]) -> CsrMatrix {
        let mut inv = vec![0; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (c, v) = self.row(i);
            t.extend(c.iter().zip(v).map(|(&j, &a)| (inv[i], inv[j], a)));
        }
        CsrMatrix::from_triplets(self.n, t)
    }
}

/// Cuthill–McKee level sets from `start`, neighbours by increasing degree.
fn bfs_levels(a: &CsrMatrix, start: usize, blocked: &[bool], deg: &[usize]) -> Vec<Vec<usize>> {
    let mut mark = blocked.to_vec();
    mark[start] = true;
    let mut out = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &u in out.last().unwrap() {
            let mut nb: Vec<usize> = a.row(u).0.iter().copied().filter(|&j| !mark[j]).collect();
            nb.sort_unstable_by_key(|&j| (deg[j], j));
            for j in nb {
                if !mark[j] {
                    mark[j] = true;
                    next.push(j);
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        out.push(next);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower envelope storage: row i holds columns `first[i]..=i`.
#[derive(Debug, Clone)]
struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl Envelope {
    fn from_csr(a: &CsrMatrix) -> Self {
        let n = a.n();
        let first: Vec<usize> = (0..n).map(|i| a.row(i).0.first().copied().unwrap_or(i).min(i)).collect();
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            start.push(total);
            total += i - f + 1;
        }
        start.push(total);
        let mut data = vec![0.0; total];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    data[start[i] + j - first[i]] += x;
                }
            }
        }
        Self { first, start, data }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.start[i]..self.start[i + 1]]
    }

    fn len(&self) -> usize {
        self.first.len()
    }
}

/// Cholesky factor L of a permuted SPD matrix in envelope form.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    env: Envelope,
}

impl EnvelopeCholesky {
    #[allow(clippy::needless_range_loop)]
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self, LinalgError> {
        let pa = a.permute(&perm);
        let mut env = Envelope::from_csr(&pa);
        let n = env.len();
        for i in 0..n {
            let fi = env.first[i];
            for j in fi..=i {
                let fj = env.first[j];
                let lo = fi.max(fj);
                let s = {
                    let ri = &env.data[env.start[i]..env.start[i + 1]];
                    let rj = &env.data[env.start[j]..env.start[j + 1]];
                    dot(&ri[lo - fi..j - fi], &rj[lo - fj..j - fj])
                };
                let idx = env.start[i] + j - fi;
                if j < i {
                    let djj = env.data[env.start[j + 1] - 1];
                    env.data[idx] = (env.data[idx] - s) / djj;
                } else {
                    let d = env.data[idx] - s;
                    if !(d > 0.0) {
                        return Err(LinalgError::NotPositiveDefinite { row: perm[i], pivot: d });
                    }
                    env.data[idx] = d.sqrt();
                }
            }
        }
        Ok(Self { perm, env })
    }

    pub fn envelope_size(&self) -> usize {
        self.env.data.len()
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.env.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.env.first[i];
            let r = self.env.row(i);
            let s = dot(&r[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / r[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.env.first[i];
            let r = self.env.row(i);
            y[i] /= r[i - fi];
            let yi = y[i];
            for (k, &l) in r[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Number of negative pivots of an unpivoted LDLᵀ of A.
pub fn inertia_negative(a: &CsrMatrix, perm: &[usize]) -> Result<usize, LinalgError> {
    let pa = a.permute(perm);
    let mut env = Envelope::from_csr(&pa);
    let n = env.len();
    let mut d = vec![0.0; n];
    let mut t = Vec::new();
    let mut negative = 0;
    for i in 0..n {
        let fi = env.first[i];
        t.clear();
        t.resize(i - fi, 0.0);
        // t_j = L_ij D_j
        for j in fi..i {
            let fj = env.first[j];
            let lo = fi.max(fj);
            let rj = &env.data[env.start[j]..env.start[j + 1]];
            let s: f64 = (lo..j).map(|k| t[k - fi] * rj[k - fj]).sum();
            t[j - fi] = env.data[env.start[i] + j - fi] - s;
        }
        let mut dii = env.data[env.start[i + 1] - 1];
        for j in fi..i {
            let l = t[j - fi] / d[j];
            dii -= t[j - fi] * l;
            env.data[env.start[i] + j - fi] = l;
        }
        let scale = pa.get(i, i).abs().max(f64::MIN_POSITIVE);
        if dii.abs() <= 1e-14 * scale {
            return Err(LinalgError::NotPositiveDefinite { row: perm[i], pivot: dii });
        }
        d[i] = dii;
        if dii < 0.0 {
            negative += 1;
        }
    }
    Ok(negative)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    pub count: usize,
    /// Shift τ > 0 in the factored operator K + τM.
    pub shift: f64,
    pub block: usize,
    pub tol: f64,
    pub seed: u64,
    pub dense_threshold: usize,
    pub certify: bool,
}

impl EigenOptions {
    pub fn new(count: usize) -> Self {
        Self {
            count,
            shift: 1.0,
            block: 12,
            tol: 1e-11,
            seed: 0x5eed_c0de,
            dense_threshold: 400,
            certify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    /// Ascending generalized eigenvalues.
    pub values: Vec<f64>,
    /// Relative residual bound per value (zero for the dense path).
    pub residuals: Vec<f64>,
    /// Set when an inertia count confirmed that no eigenvalue was skipped.
    pub certified: bool,
    pub dense: bool,
}

/// The `count` smallest eigenvalues of K x = λ M x, K symmetric semidefinite, M SPD.
pub fn smallest_eigenvalues(k: &CsrMatrix, m: &CsrMatrix, opts: &EigenOptions) -> Result<EigenResult, LinalgError> {
    let n = k.n();
    if m.n() != n {
        return Err(LinalgError::Dimension(format!("K is {n}x{n}, M is {0}x{0}", m.n())));
    }
    if opts.count > n {
        return Err(LinalgError::TooManyEigenvalues {
            wanted: opts.count,
            size: n,
        });
    }
    if n <= opts.dense_threshold || opts.count > n / 3 {
        return dense_eigenvalues(k, m, opts.count);
    }
    lanczos(k, m, opts)
}

/// Dense generalized eigenproblem via Cholesky of M.
pub fn dense_eigenvalues(k: &CsrMatrix, m: &CsrMatrix, count: usize) -> Result<EigenResult, LinalgError> {
    let kd = k.to_dense();
    let md = m.to_dense();
    let l = md
        .cholesky()
        .ok_or(LinalgError::NotPositiveDefinite { row: 0, pivot: f64::NAN })?
        .l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(LinalgError::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    let c = &linv * kd * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(count);
    Ok(EigenResult {
        residuals: vec![0.0; vals.len()],
        values: vals,
        certified: true,
        dense: true,
    })
}

/// C (k×p) = Aᵀ B for column-major A (n×k) and B (n×p).
fn gemm_tn(a: &[f64], b: &[f64], n: usize, k: usize, p: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * p];
    if k * p == 0 {
        return c;
    }
    // SAFETY: the buffers hold n·k, n·p and k·p elements with the given strides
    unsafe {
        matrixmultiply::dgemm(
            k, n, p, 1.0,
            a.as_ptr(), n as isize, 1,
            b.as_ptr(), 1, n as isize,
            0.0,
            c.as_mut_ptr(), 1, k as isize,
        );
    }
    c
}

/// W (n×p) −= A (n×k)·H (k×p), all column-major.
fn gemm_sub(w: &mut [f64], a: &[f64], h: &[f64], n: usize, k: usize, p: usize) {
    if k * p == 0 {
        return;
    }
    // SAFETY: as in gemm_tn; w does not alias a or h
    unsafe {
        matrixmultiply::dgemm(
            n, k, p, -1.0,
            a.as_ptr(), 1, n as isize,
            h.as_ptr(), 1, k as isize,
            1.0,
            w.as_mut_ptr(), 1, n as isize,
        );
    }
}

/// Classical Gram–Schmidt pass of the columns of `w` against the
/// M-orthonormal `basis` (column-major, n rows). Returns Bᵀ M w (k×p).
fn project_block(w: &mut [f64], basis: &[f64], m: &CsrMatrix) -> Vec<f64> {
    let n = m.n();
    let (k, p) = (basis.len() / n, w.len() / n);
    let mut mw = vec![0.0; n * p];
    for (src, dst) in w.chunks(n).zip(mw.chunks_mut(n)) {
        m.mul_vec(src, dst);
    }
    let h = gemm_tn(basis, &mw, n, k, p);
    gemm_sub(w, basis, &h, n, k, p);
    h
}

/// M-orthonormalizes the block `w` (column-major, n×p) against `basis`
/// (two classical passes, coefficients accumulated into `coeff`, k×p) and
/// then within itself. Returns the block's M-images and the triangular
/// factor R with w_in = Q R + basis·coeff.
fn m_orthonormalize(
    w: &mut Vec<f64>,
    basis: &[f64],
    m: &CsrMatrix,
    rng: &mut ChaCha8Rng,
    coeff: &mut [f64],
) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.n();
    let p = w.len() / n;
    for _ in 0..2 {
        let h = project_block(w, basis, m);
        coeff.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    let scale = w
        .chunks(n)
        .map(|c| m.quad(c, c).max(0.0).sqrt())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut r = DMatrix::zeros(p, p);
    let mut q: Vec<f64> = Vec::with_capacity(n * p);
    let mut mq: Vec<f64> = Vec::with_capacity(n * p);
    for j in 0..p {
        let mut v = w[j * n..(j + 1) * n].to_vec();
        let mut fresh = false;
        loop {
            for pass in 0..2 {
                for x in 0..j {
                    let c = dot(&mq[x * n..(x + 1) * n], &v);
                    if pass == 0 && !fresh {
                        r[(x, j)] = c;
                    }
                    v.iter_mut().zip(&q[x * n..(x + 1) * n]).for_each(|(a, b)| *a -= c * b);
                }
                if fresh {
                    project_block(&mut v, basis, m);
                }
            }
            let mv = m.apply(&v);
            let nrm = dot(&v, &mv).max(0.0).sqrt();
            let floor = if fresh { 1e-8 } else { 1e-10 * scale };
            if nrm > floor {
                if !fresh {
                    r[(j, j)] = nrm;
                }
                q.extend(v.iter().map(|a| a / nrm));
                mq.extend(mv.iter().map(|a| a / nrm));
                break;
            }
            // breakdown: continue the Krylov space with a random direction
            fresh = true;
            v = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        }
    }
    *w = q;
    (mq, r)
}

fn lanczos(k: &CsrMatrix, m: &CsrMatrix, opts: &EigenOptions) -> Result<EigenResult, LinalgError> {
    let n = k.n();
    let p = opts.block.max(1);
    // extra values so that a spectral gap after `count` can be located
    let want = (opts.count + p).min(n - 1);
    let max_basis = (3 * want + 8 * p).min(n);
    let op = k.combine(1.0, m, opts.shift);
    let perm = op.rcm();
    let chol = EnvelopeCholesky::factor(&op, perm.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // basis vectors, column-major n×dim
    let mut basis: Vec<f64> = Vec::with_capacity(n * (max_basis + p));
    let mut w: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() - 0.5).collect();
    let (mut mq, _) = m_orthonormalize(&mut w, &basis, m, &mut rng, &mut []);
    let mut t = DMatrix::<f64>::zeros(max_basis + p, max_basis + p);
    let mut last = None;
    let mut next_check = want + 2 * p;
    while basis.len() / n + p <= max_basis {
        let j0 = basis.len() / n;
        let mut next: Vec<f64> = Vec::with_capacity(n * p);
        for col in mq.chunks(n) {
            next.extend(chol.solve(col));
        }
        basis.extend_from_slice(&w);
        let j1 = basis.len() / n;
        let mut coeff = vec![0.0; j1 * p];
        let (nmq, r) = m_orthonormalize(&mut next, &basis, m, &mut rng, &mut coeff);
        for c in 0..p {
            for i in 0..j1 {
                t[(i, j0 + c)] = coeff[i + c * j1];
            }
        }
        for a in 0..p {
            for b in 0..p {
                t[(j1 + a, j0 + b)] = r[(a, b)];
            }
        }
        w = next;
        mq = nmq;

        let dim = basis.len() / n;
        if dim < next_check && dim + p <= max_basis {
            continue;
        }
        next_check = dim + (2 * p).max(dim / 4);
        let tm = t.view((0, 0), (dim, dim)).into_owned();
        let tm = (&tm + tm.transpose()) * 0.5;
        let eig = SymmetricEigen::new(tm);
        let mut idx: Vec<usize> = (0..dim).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut vals = Vec::with_capacity(want);
        let mut res = Vec::with_capacity(want);
        for &c in idx.iter().take(want) {
            let theta = eig.eigenvalues[c];
            // ‖R s_last‖ bounds the residual of the shift-inverted problem
            let mut rn = 0.0;
            for a in 0..p {
                let mut s = 0.0;
                for b in 0..p {
                    s += r[(a, b)] * eig.eigenvectors[(dim - p + b, c)];
                }
                rn += s * s;
            }
            vals.push(1.0 / theta - opts.shift);
            res.push(rn.sqrt() / theta.abs());
        }
        let done = res.iter().all(|&r| r < opts.tol);
        last = Some((vals, res));
        if done {
            break;
        }
    }
    let (vals, res) = last.ok_or(LinalgError::NotConverged {
        converged: 0,
        wanted: opts.count,
    })?;
    let converged = res.iter().take_while(|&&r| r < opts.tol.sqrt()).count();
    if converged < opts.count + 1 {
        return Err(LinalgError::NotConverged {
            converged,
            wanted: opts.count,
        });
    }
    let mut certified = false;
    if opts.certify {
        // split at the widest relative gap after the requested values
        let (mut best, mut split) = (0.0, opts.count);
        for i in opts.count..converged {
            let g = (vals[i] - vals[i - 1]) / vals[i].abs().max(1e-300);
            if g > best {
                best = g;
                split = i;
            }
        }
        if best > 1e-8 {
            let s = 0.5 * (vals[split - 1] + vals[split]);
            let shifted = k.combine(1.0, m, -s);
            let found = inertia_negative(&shifted, &perm)?;
            if found != split {
                return Err(LinalgError::InertiaMismatch {
                    shift: s,
                    expected: split,
                    found,
                });
            }
            certified = true;
        }
    }
    Ok(EigenResult {
        values: vals[..opts.count].to_vec(),
        residuals: res[..opts.count].to_vec(),
        certified,
        dense: false,
    })
}
