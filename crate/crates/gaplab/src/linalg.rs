//! Matrix-free and banded linear algebra kernels used by the eigensolvers:
//! symmetric tridiagonal eigenpairs via Sturm-sequence bisection plus inverse
//! iteration, banded symmetric LDL^T factorization with inertia counts,
//! shift-invert Lanczos with full reorthogonalization, small dense symmetric
//! eigensolves, and least-squares slope fits.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: diagonal `d` (length n) and off-diagonal
/// `e` (length n-1).
#[derive(Clone, Debug)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        assert_eq!(e.len() + 1, d.len(), "tridiagonal size mismatch");
        SymTridiag { d, e }
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Number of eigenvalues below `sigma` (Sturm sequence via the LDL^T
    /// pivot signs of `T - sigma I`; an exact-zero pivot is pushed to the
    /// negative side so the count stays monotone in `sigma`).
    pub fn count_below(&self, sigma: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.n() {
            let off = if i > 0 {
                self.e[i - 1] * self.e[i - 1]
            } else {
                0.0
            };
            q = (self.d[i] - sigma) - off / q;
            if q < 0.0 {
                count += 1;
            } else if q == 0.0 {
                q = -1e-300;
                count += 1;
            }
            if q.abs() < 1e-300 {
                q = q.signum() * 1e-300;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// The j-th eigenvalue (1-based, ascending) by bisection.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        debug_assert!(j >= 1 && j <= self.n(), "eigenvalue index is 1-based");
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) >= j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * scale {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues, ascending.  Intended for the small projected matrices
    /// inside Lanczos; cost is O(n^2 log) which is fine there.
    pub fn eigenvalues_all(&self) -> Vec<f64> {
        (1..=self.n()).map(|j| self.eigenvalue(j)).collect()
    }

    /// Lowest `k` eigenpairs by bisection plus inverse iteration.  Vectors
    /// are l2-orthonormal; the sign convention (first nonzero component
    /// positive) is applied by the caller if it needs one.
    pub fn eigen_lowest(&self, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(Error::numerical(format!(
                "eigen_lowest: k={k} outside 1..={n}"
            )));
        }
        let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
        for j in 1..=k {
            let lambda = self.eigenvalue(j);
            let mut v = self.inverse_iteration(lambda, &pairs)?;
            normalize(&mut v);
            pairs.push((lambda, v));
        }
        Ok(pairs)
    }

    fn inverse_iteration(&self, lambda: f64, previous: &[(f64, Vec<f64>)]) -> Result<Vec<f64>> {
        let n = self.n();
        let scale: f64 = self.d.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
        // Tiny shift off the eigenvalue keeps the factorization solvable.
        let shifted = lambda + 1e-12 * scale;
        let mut v = splitmix_vector(n, 0x5eed_1234);
        for (mu, w) in previous {
            if (mu - lambda).abs() < 1e-8 * scale {
                orthogonalize_against(&mut v, w);
            }
        }
        normalize(&mut v);
        for _ in 0..4 {
            v = self.solve_shifted(shifted, &v)?;
            for (mu, w) in previous {
                if (mu - lambda).abs() < 1e-8 * scale {
                    orthogonalize_against(&mut v, w);
                }
            }
            normalize(&mut v);
        }
        Ok(v)
    }

    /// Solves (T - sigma I) x = b by tridiagonal LU with partial pivoting;
    /// row swaps push fill-in into a second superdiagonal.
    fn solve_shifted(&self, sigma: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        // Rows stored as (diag, sup1, sup2); sub is eliminated on the fly.
        let mut diag: Vec<f64> = self.d.iter().map(|x| x - sigma).collect();
        let mut sup1 = vec![0.0; n];
        let mut sup2 = vec![0.0; n];
        sup1[..n - 1].copy_from_slice(&self.e);
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            let mut sub = self.e[i];
            if sub.abs() > diag[i].abs() {
                std::mem::swap(&mut diag[i], &mut sub);
                std::mem::swap(&mut sup1[i], &mut diag[i + 1]);
                std::mem::swap(&mut sup2[i], &mut sup1[i + 1]);
                x.swap(i, i + 1);
            }
            if diag[i].abs() < 1e-300 {
                diag[i] = 1e-300;
            }
            let m = sub / diag[i];
            diag[i + 1] -= m * sup1[i];
            sup1[i + 1] -= m * sup2[i];
            x[i + 1] -= m * x[i];
        }
        if diag[n - 1].abs() < 1e-300 {
            diag[n - 1] = 1e-300;
        }
        // Back substitution.
        x[n - 1] /= diag[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - sup1[n - 2] * x[n - 1]) / diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - sup1[i] * x[i + 1] - sup2[i] * x[i + 2]) / diag[i];
        }
        Ok(x)
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize_against(v: &mut [f64], w: &[f64]) {
    let c = dot(v, w) / dot(w, w);
    for (x, y) in v.iter_mut().zip(w) {
        *x -= c * y;
    }
}

/// Deterministic pseudo-random vector with entries in [-1, 1), splitmix64
/// driven.  Used for reproducible solver starts and randomized checks.
pub fn splitmix_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

/// Symmetric banded matrix, upper triangle stored by diagonals:
/// `data[i * (bw + 1) + j]` holds `A[i][i + j]` for `0 <= j <= bw`.
#[derive(Clone, Debug)]
pub struct BandedSym {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        if c - r > self.bw {
            0.0
        } else {
            self.data[r * (self.bw + 1) + (c - r)]
        }
    }

    /// Sets `A[i][j]` (and its mirror).  `|i - j|` must fit in the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        assert!(c - r <= self.bw, "entry outside band");
        self.data[r * (self.bw + 1) + (c - r)] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = row[0] * x[i];
            let jmax = (self.n - 1 - i).min(self.bw);
            for j in 1..=jmax {
                acc += row[j] * x[i + j];
                y[i + j] += row[j] * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// LDL^T factorization of `A - shift I` without pivoting.  Works for any
    /// shift that does not land on an eigenvalue of a leading principal
    /// submatrix; the pivot signs give the inertia (Sylvester).
    pub fn factor_ldl(&self, shift: f64) -> Result<BandedLdl> {
        let n = self.n;
        let bw = self.bw;
        let scale: f64 = (0..n)
            .map(|i| self.get(i, i).abs())
            .fold(0.0, f64::max)
            .max(1.0);
        let mut l = vec![0.0; n * bw]; // l[i*bw + (r-i-1)] = L[r][i]
        let mut d = vec![0.0; n];
        let mut negative_pivots = 0usize;
        for j in 0..n {
            let c0 = j.saturating_sub(bw);
            let mut dj = self.get(j, j) - shift;
            for c in c0..j {
                let ljc = l[c * bw + (j - c - 1)];
                dj -= ljc * ljc * d[c];
            }
            if dj.abs() < 1e-13 * scale {
                return Err(Error::numerical(format!(
                    "banded LDL^T: pivot {dj:e} at column {j} too close to zero \
                     (shift {shift} grazes a leading-submatrix eigenvalue)"
                )));
            }
            if dj < 0.0 {
                negative_pivots += 1;
            }
            d[j] = dj;
            let rmax = (j + bw).min(n - 1);
            for r in j + 1..=rmax {
                let mut v = if r - j <= bw { self.get(r, j) } else { 0.0 };
                let cstart = r.saturating_sub(bw).max(c0);
                for c in cstart..j {
                    v -= l[c * bw + (r - c - 1)] * l[c * bw + (j - c - 1)] * d[c];
                }
                l[j * bw + (r - j - 1)] = v / dj;
            }
        }
        Ok(BandedLdl {
            n,
            bw,
            l,
            d,
            negative_pivots,
        })
    }
}

/// Banded unit-lower LDL^T factor.
pub struct BandedLdl {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
    /// Number of negative pivots = number of eigenvalues below the shift.
    pub negative_pivots: usize,
}

impl BandedLdl {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        let (n, bw) = (self.n, self.bw);
        for j in 0..n {
            let xj = x[j];
            let rmax = (j + bw).min(n - 1);
            for r in j + 1..=rmax {
                x[r] -= self.l[j * bw + (r - j - 1)] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let rmax = (j + bw).min(n - 1);
            let mut acc = x[j];
            for r in j + 1..=rmax {
                acc -= self.l[j * bw + (r - j - 1)] * x[r];
            }
            x[j] = acc;
        }
        x
    }
}

/// Number of eigenvalues of `a` strictly below `sigma`, by banded LDL^T.
/// Nudges the shift a few times if it grazes a pivot breakdown.
pub fn inertia_below(a: &BandedSym, sigma: f64) -> Result<usize> {
    let scale: f64 = (0..a.n)
        .map(|i| a.get(i, i).abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let mut s = sigma;
    for attempt in 0..4 {
        match a.factor_ldl(s) {
            Ok(f) => return Ok(f.negative_pivots),
            Err(_) if attempt < 3 => s += 3e-12 * scale * (attempt + 1) as f64,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

/// Result of a shift-invert Lanczos run.
pub struct LanczosOutcome {
    /// Lowest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Matching l2-orthonormal eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// Explicit residual norms `||A v - lambda v||`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Lowest `k` eigenpairs of the symmetric banded matrix `a` by Lanczos on
/// `(A - sigma I)^{-1}` with full reorthogonalization.  `sigma` must lie
/// strictly below the spectrum; this is verified via the pivot signs of the
/// factorization.  Deterministic for a fixed `seed`.
pub fn shift_invert_lanczos(
    a: &BandedSym,
    sigma: f64,
    k: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<LanczosOutcome> {
    let n = a.n;
    if k == 0 || k >= n {
        return Err(Error::numerical(format!(
            "shift_invert_lanczos: k={k} outside 1..{n}"
        )));
    }
    let factor = a.factor_ldl(sigma)?;
    if factor.negative_pivots != 0 {
        return Err(Error::numerical(format!(
            "shift-invert shift {sigma} is not below the spectrum \
             ({} eigenvalues beneath it)",
            factor.negative_pivots
        )));
    }

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut v = splitmix_vector(n, seed);
    normalize(&mut v);
    basis.push(v);

    for m in 1..=max_iter {
        let vj = basis.last().unwrap().clone();
        let mut w = factor.solve(&vj);
        let alpha = dot(&w, &vj);
        alphas.push(alpha);
        // Full reorthogonalization (twice) also removes the alpha and
        // beta_{j-1} components, so no explicit three-term update is needed.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let beta = norm2(&w);
        if m >= k + 2 || beta < 1e-14 {
            // Check convergence of the projected problem.
            let trid = SymTridiag::new(alphas.clone(), betas.clone());
            let theta_all = trid.eigenvalues_all();
            // Largest k thetas of the inverse operator = lowest k of A.
            if theta_all.len() >= k {
                let converged =
                    check_ritz(a, &factor, &trid, &theta_all, &basis, sigma, k, tol, beta);
                if let Some(outcome) = converged? {
                    return Ok(LanczosOutcome {
                        iterations: m,
                        ..outcome
                    });
                }
            }
        }
        if beta < 1e-14 {
            return Err(Error::numerical(
                "lanczos: invariant subspace hit before convergence".to_string(),
            ));
        }
        betas.push(beta);
        for x in w.iter_mut() {
            *x /= beta;
        }
        basis.push(w);
    }
    Err(Error::numerical(format!(
        "lanczos: no convergence in {max_iter} iterations"
    )))
}

#[allow(clippy::too_many_arguments)]
fn check_ritz(
    a: &BandedSym,
    _factor: &BandedLdl,
    trid: &SymTridiag,
    theta_all: &[f64],
    basis: &[Vec<f64>],
    sigma: f64,
    k: usize,
    tol: f64,
    _beta_last: f64,
) -> Result<Option<LanczosOutcome>> {
    let m = trid.n();
    let n = basis[0].len();
    // Top-k thetas are the last k entries of the ascending list.
    let mut outcome_vals = Vec::with_capacity(k);
    let mut outcome_vecs = Vec::with_capacity(k);
    let mut outcome_res = Vec::with_capacity(k);
    for idx in 0..k {
        let theta = theta_all[m - 1 - idx];
        if theta <= 0.0 {
            return Ok(None); // inverse operator must be positive here
        }
        let lambda = sigma + 1.0 / theta;
        // Ritz vector for this theta via inverse iteration on the projected
        // tridiagonal.
        let s = projected_vector(trid, theta)?;
        let mut y = vec![0.0; n];
        for (c, b) in s.iter().zip(basis) {
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi += c * bi;
            }
        }
        normalize(&mut y);
        let ay = a.matvec(&y);
        let mut res = 0.0;
        for i in 0..n {
            let r = ay[i] - lambda * y[i];
            res += r * r;
        }
        let res = res.sqrt();
        if res > tol * lambda.abs().max(1.0) {
            return Ok(None);
        }
        outcome_vals.push(lambda);
        outcome_vecs.push(y);
        outcome_res.push(res);
    }
    // Ascending eigenvalues: largest theta gave the smallest lambda already,
    // so the collected order is ascending.
    Ok(Some(LanczosOutcome {
        eigenvalues: outcome_vals,
        vectors: outcome_vecs,
        residuals: outcome_res,
        iterations: 0,
    }))
}

/// Eigenvector of the small projected tridiagonal for eigenvalue `theta`.
fn projected_vector(trid: &SymTridiag, theta: f64) -> Result<Vec<f64>> {
    let mut v = splitmix_vector(trid.n(), 0x0a11_ce55);
    normalize(&mut v);
    for _ in 0..3 {
        v = trid.solve_shifted(theta + 1e-13 * theta.abs().max(1.0), &v)?;
        normalize(&mut v);
    }
    Ok(v)
}

/// Dense symmetric eigenvalues for small matrices (cyclic Jacobi).
/// `a` is overwritten; returns eigenvalues ascending.
pub fn sym_eigen_small(a: &mut [Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}

/// Largest `|lambda|` of the pencil `M v = lambda G v` with `G` symmetric
/// positive definite (small dense matrices).
pub fn pencil_extreme_abs(m: &[Vec<f64>], g: &[Vec<f64>]) -> Result<f64> {
    let n = m.len();
    // Dense Cholesky G = R^T R.
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = g[i][i];
        for k in 0..i {
            diag -= r[k][i] * r[k][i];
        }
        if diag <= 0.0 {
            return Err(Error::numerical(
                "pencil_extreme_abs: Gram matrix not positive definite".to_string(),
            ));
        }
        r[i][i] = diag.sqrt();
        for j in i + 1..n {
            let mut v = g[i][j];
            for k in 0..i {
                v -= r[k][i] * r[k][j];
            }
            r[i][j] = v / r[i][i];
        }
    }
    // B = R^{-T} M R^{-1}, computed column by column.
    let solve_rt = |b: &mut [f64]| {
        for i in 0..n {
            for k in 0..i {
                b[i] -= r[k][i] * b[k];
            }
            b[i] /= r[i][i];
        }
    };
    let mut b = vec![vec![0.0; n]; n];
    // First X = R^{-T} M (solve R^T X = M column-wise on the left).
    let mut x = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut col: Vec<f64> = (0..n).map(|i| m[i][j]).collect();
        solve_rt(&mut col);
        for i in 0..n {
            x[i][j] = col[i];
        }
    }
    // Then B = X R^{-1}: solve R^T (B^T) = X^T, i.e. rows of B.
    for i in 0..n {
        let mut row: Vec<f64> = x[i].clone();
        solve_rt(&mut row);
        b[i] = row;
    }
    // Symmetrize against rounding before Jacobi.
    let mut bs = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            bs[i][j] = 0.5 * (b[i][j] + b[j][i]);
        }
    }
    let vals = sym_eigen_small(&mut bs);
    Ok(vals.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// Ordinary least-squares line fit `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::numerical("linear_fit: need >= 2 points".to_string()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::numerical(
            "linear_fit: degenerate abscissae".to_string(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok((slope, intercept, r2))
}

/// Log-log least squares: fits `y ~ C x^slope`; all inputs must be positive.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::numerical(
            "log_log_fit: inputs must be positive".to_string(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, _, r2) = linear_fit(&lx, &ly)?;
    Ok((slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn tridiagonal_eigenvalues_match_closed_form() {
        let n = 50;
        let t = free_laplacian(n);
        let pairs = t.eigen_lowest(5).unwrap();
        for (j, (lambda, _)) in pairs.iter().enumerate() {
            let want = 4.0
                * ((j + 1) as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64))
                    .sin()
                    .powi(2);
            assert!(
                (lambda - want).abs() < 1e-12,
                "lambda_{} = {lambda}, want {want}",
                j + 1
            );
        }
    }

    #[test]
    fn tridiagonal_eigenvectors_have_small_residuals() {
        let n = 80;
        let t = free_laplacian(n);
        let pairs = t.eigen_lowest(4).unwrap();
        for (lambda, v) in &pairs {
            // residual of T v - lambda v
            let mut worst = 0.0f64;
            for i in 0..n {
                let mut av = t.d[i] * v[i];
                if i > 0 {
                    av += t.e[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    av += t.e[i] * v[i + 1];
                }
                worst = worst.max((av - lambda * v[i]).abs());
            }
            assert!(worst < 1e-10, "residual {worst:e}");
        }
        // orthonormality
        for i in 0..pairs.len() {
            for j in 0..pairs.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = dot(&pairs[i].1, &pairs[j].1);
                assert!((got - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sturm_count_brackets_eigenvalues() {
        let t = free_laplacian(30);
        let pairs = t.eigen_lowest(4).unwrap();
        let l3 = pairs[2].0;
        let l4 = pairs[3].0;
        assert_eq!(t.count_below(0.5 * (l3 + l4)), 3);
        assert_eq!(t.count_below(l3 - 1e-9), 2);
    }

    #[test]
    fn banded_factor_solves_and_counts_inertia() {
        // 1-D Dirichlet Laplacian as a bandwidth-1 banded matrix.
        let n = 40;
        let mut a = BandedSym::zeros(n, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        let f = a.factor_ldl(0.0).unwrap();
        assert_eq!(f.negative_pivots, 0);
        let b = splitmix_vector(n, 7);
        let x = f.solve(&b);
        let r = a.matvec(&x);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-10);
        }
        // inertia between lambda_2 and lambda_3
        let lam = |j: usize| {
            4.0 * ((j as f64) * std::f64::consts::PI / (2.0 * (n + 1) as f64))
                .sin()
                .powi(2)
        };
        let count = inertia_below(&a, 0.5 * (lam(2) + lam(3))).unwrap();
        assert_eq!(count, 2);
    }

    #[test]
    fn banded_matvec_matches_dense() {
        let n = 25;
        let bw = 4;
        let mut a = BandedSym::zeros(n, bw);
        let vals = splitmix_vector(n * (bw + 1), 99);
        let mut idx = 0;
        for i in 0..n {
            for j in i..(i + bw + 1).min(n) {
                let v = if i == j { 10.0 + vals[idx] } else { vals[idx] };
                a.set(i, j, v);
                idx += 1;
            }
        }
        let x = splitmix_vector(n, 3);
        let y = a.matvec(&x);
        for i in 0..n {
            let mut want = 0.0;
            for j in 0..n {
                want += a.get(i, j) * x[j];
            }
            assert!((y[i] - want).abs() < 1e-12);
        }
    }

    /// 2-D Dirichlet Laplacian on an nx-by-ny unit-spaced grid, y fastest.
    fn grid_laplacian(nx: usize, ny: usize) -> BandedSym {
        let n = nx * ny;
        let mut a = BandedSym::zeros(n, ny);
        for ix in 0..nx {
            for iy in 0..ny {
                let m = ix * ny + iy;
                a.set(m, m, 4.0);
                if iy + 1 < ny {
                    a.set(m, m + 1, -1.0);
                }
                if ix + 1 < nx {
                    a.set(m, m + ny, -1.0);
                }
            }
        }
        a
    }

    #[test]
    fn lanczos_matches_grid_laplacian_closed_form() {
        let (nx, ny) = (40, 12);
        let a = grid_laplacian(nx, ny);
        let out = shift_invert_lanczos(&a, -0.1, 3, 42, 1e-10, 300).unwrap();
        let mode = |j: usize, m: usize| {
            4.0 * ((j as f64) * std::f64::consts::PI / (2.0 * (m + 1) as f64))
                .sin()
                .powi(2)
        };
        let mut wants = Vec::new();
        for jx in 1..=3 {
            for jy in 1..=3 {
                wants.push(mode(jx, nx) + mode(jy, ny));
            }
        }
        wants.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for i in 0..3 {
            assert!(
                (out.eigenvalues[i] - wants[i]).abs() < 1e-8,
                "lambda_{} = {}, want {}",
                i + 1,
                out.eigenvalues[i],
                wants[i]
            );
            assert!(out.residuals[i] < 1e-8);
        }
        // orthonormality of returned vectors
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&out.vectors[i], &out.vectors[j]) - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lanczos_is_deterministic() {
        let a = grid_laplacian(20, 9);
        let r1 = shift_invert_lanczos(&a, -0.05, 2, 11, 1e-10, 200).unwrap();
        let r2 = shift_invert_lanczos(&a, -0.05, 2, 11, 1e-10, 200).unwrap();
        assert_eq!(r1.eigenvalues, r2.eigenvalues);
        assert_eq!(r1.vectors, r2.vectors);
    }

    #[test]
    fn lanczos_rejects_interior_shift() {
        let a = grid_laplacian(10, 5);
        // First eigenvalue is ~ 0.4; a shift above it must be refused.
        assert!(shift_invert_lanczos(&a, 1.0, 2, 1, 1e-10, 100).is_err());
    }

    #[test]
    fn small_jacobi_and_pencil() {
        let mut a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let vals = sym_eigen_small(&mut a);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);

        let m = vec![vec![0.0, 0.3], vec![0.3, 0.0]];
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let ext = pencil_extreme_abs(&m, &g).unwrap();
        assert!((ext - 0.3).abs() < 1e-12);
    }

    #[test]
    fn fits_recover_known_slopes() {
        let xs: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.7 * x.powf(0.5)).collect();
        let (slope, r2) = log_log_fit(&xs, &ys).unwrap();
        assert!((slope - 0.5).abs() < 1e-12);
        assert!(r2 > 0.999999);

        let ys2: Vec<f64> = xs.iter().map(|x| -2.0 * x + 1.0).collect();
        let (s, b, r2) = linear_fit(&xs, &ys2).unwrap();
        assert!((s + 2.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
        assert!(r2 > 0.999999);
    }
}
