//! Rescaled two-dimensional eigenproblems on the thin rectangle, the
//! separation-of-variables trial functions, and quantitative comparisons
//! between the separable and the full problem.
//!
//! The rescaled domain is the rectangle `(0, x_max) x (-1, 1)` with
//! `x_max = delta^{-1/3}(t0 + tau0)`: `x` measures depth below the top of
//! the collapsing domain in units of `delta^{1/3}`, `y = s/eps` is the
//! scaled cross-section coordinate.  Two weighted operators act on it:
//!
//! * the *separable* one freezes the metric to the center column `s = 0`,
//!   so its eigenfunctions factor as `h(x) cos(pi y/2)`;
//! * the *full* one keeps the curved metric `jac(eps y, t0 - delta^{1/3}x)`.
//!
//! Both are discretized by conservative five-point stencils with flux
//! coefficients sampled at half nodes, which keeps them exactly
//! self-adjoint in their discrete weighted inner products.  In both cases
//! the transverse derivative carries the singular scale `delta^{2/3}/eps^2`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CurvatureProfile, DomainParams, FermiMetric};
use crate::linalg::{inertia_below, linear_fit, shift_invert_lanczos, splitmix_vector, BandedSym};
use crate::sturm_liouville::{fix_sign, Grid1D, InnerProductTag, Spectrum};

/// Reference transverse cell count.  141 nodes keep the gap between the
/// discrete and continuum lowest transverse eigenvalue near 1e-4 in
/// operator units, safely inside the eigenvalue comparison bands.
pub const REFERENCE_NY: usize = 140;

/// Seed for the deterministic Lanczos starting vector.
const LANCZOS_SEED: u64 = 0x5eed_2d00;

/// Tensor grid on the rectangle: `x_i = i h_x` on `[0, x_max]` and
/// `y_j = -1 + j h_y` on `[-1, 1]`.  Node arrays are stored y-fastest,
/// entry `i * (n_y_cells + 1) + j`.
#[derive(Clone, Copy, Debug)]
pub struct Grid2D {
    pub x: Grid1D,
    pub n_y_cells: usize,
    pub h_y: f64,
}

impl Grid2D {
    pub fn new(x: Grid1D, n_y_cells: usize) -> Result<Self> {
        if n_y_cells < 8 {
            return Err(Error::domain(format!(
                "grid2d: {n_y_cells} transverse cells is below the minimum of 8"
            )));
        }
        Ok(Grid2D {
            x,
            n_y_cells,
            h_y: 2.0 / n_y_cells as f64,
        })
    }

    /// Reference resolution for all calibrated bands.
    pub fn reference(x_max: f64) -> Result<Self> {
        let n_x = 1200usize.max((30.0 * x_max).ceil() as usize);
        Grid2D::new(Grid1D::new(x_max, n_x)?, REFERENCE_NY)
    }

    pub fn n_y_nodes(&self) -> usize {
        self.n_y_cells + 1
    }

    pub fn y_node(&self, j: usize) -> f64 {
        -1.0 + self.h_y * j as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.x.n_nodes() * self.n_y_nodes()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * self.n_y_nodes() + j
    }

    /// Number of interior unknowns.
    pub fn interior_len(&self) -> usize {
        (self.x.n_cells - 1) * (self.n_y_cells - 1)
    }
}

/// Discrete `-(1/rho) div(coefficient grad) + q` on the rectangle with
/// homogeneous Dirichlet boundary, self-adjoint under the inner product
/// `<u, v> = sum_ij rho_ij u_ij v_ij h_x h_y`.
#[derive(Clone, Debug)]
pub struct WeightedOperator2D {
    pub grid: Grid2D,
    pub tag: InnerProductTag,
    /// x-flux coefficient at `(x_{i+1/2}, y_j)`: `ax[i*(n_y+1)+j]`, `i < n_x`.
    ax: Vec<f64>,
    /// y-flux coefficient at `(x_i, y_{j+1/2})`, including the transverse
    /// scale `delta^{2/3}/eps^2`: `ay[i*n_y + j]`, `j < n_y`.
    ay: Vec<f64>,
    /// Node weight `jac/jac0(t0)` (full) or `jac0/jac0(t0)` (separable).
    rho: Vec<f64>,
    /// Diagonal term at nodes; zero unless a potential was added.
    qdiag: Vec<f64>,
}

/// Separable operator: metric frozen to the center column `s = 0`, so the
/// transverse part is `(delta^{2/3}/eps^2) g0^{ss}(t) (-d^2/dy^2)` and the
/// weight is `jac0(t0 - delta^{1/3}x)/jac0(t0)`.
pub fn assemble_separable(
    metric: &FermiMetric,
    params: &DomainParams,
    grid: Grid2D,
) -> Result<WeightedOperator2D> {
    assemble(metric, params, grid, InnerProductTag::SeparableXy)
}

/// Full operator: divergence form of the Laplace-Beltrami operator in the
/// rescaled coordinates, with `jac = J(eps y, t0 - delta^{1/3}x)` and
/// transverse coefficient `jac * g^{ss} = 1/jac`.
pub fn assemble_full(
    metric: &FermiMetric,
    params: &DomainParams,
    grid: Grid2D,
) -> Result<WeightedOperator2D> {
    assemble(metric, params, grid, InnerProductTag::FullXy)
}

fn assemble(
    metric: &FermiMetric,
    params: &DomainParams,
    grid: Grid2D,
    tag: InnerProductTag,
) -> Result<WeightedOperator2D> {
    let x_max = params.x_max();
    if (grid.x.x_max - x_max).abs() > 1e-9 * x_max.max(1.0) {
        return Err(Error::config(format!(
            "operator2d: grid spans {} but the experiment needs {x_max}",
            grid.x.x_max
        )));
    }
    let sample = |y: f64, t: f64| -> Result<f64> {
        match tag {
            InnerProductTag::SeparableXy => metric.jac0(t),
            InnerProductTag::FullXy => metric.jac(params.eps * y, t),
            InnerProductTag::ModelX => Err(Error::config(
                "operator2d: a one-dimensional tag cannot be assembled on the rectangle",
            )),
        }
    };
    let d13 = params.delta.cbrt();
    let cy = params.delta.powf(2.0 / 3.0) / (params.eps * params.eps);
    let j_top = metric.jac0(params.t0)?;
    let nx = grid.x.n_cells;
    let ny = grid.n_y_cells;
    let nyn = ny + 1;

    let mut rho = Vec::with_capacity((nx + 1) * nyn);
    for i in 0..=nx {
        let t = params.t0 - d13 * grid.x.node(i);
        for j in 0..=ny {
            let v = sample(grid.y_node(j), t)? / j_top;
            if !(v > 0.0) {
                return Err(Error::numerical(format!(
                    "operator2d: nonpositive weight {v} at node ({i}, {j})"
                )));
            }
            rho.push(v);
        }
    }
    let mut ax = Vec::with_capacity(nx * nyn);
    for i in 0..nx {
        let t = params.t0 - d13 * (grid.x.node(i) + 0.5 * grid.x.h);
        for j in 0..=ny {
            ax.push(sample(grid.y_node(j), t)? / j_top);
        }
    }
    // Conservative transverse flux: the coefficient inside D_y is
    // rho * (delta^{2/3}/eps^2) g^{ss} = cy / (J * jac0(t0)); on the center
    // column J = jac0 this reduces to cy * g0^{ss} * jac0 / jac0(t0).
    let mut ay = Vec::with_capacity((nx + 1) * ny);
    for i in 0..=nx {
        let t = params.t0 - d13 * grid.x.node(i);
        for j in 0..ny {
            let jv = sample(grid.y_node(j) + 0.5 * grid.h_y, t)?;
            ay.push(cy / (jv * j_top));
        }
    }
    Ok(WeightedOperator2D {
        grid,
        tag,
        ax,
        ay,
        rho,
        qdiag: vec![0.0; (nx + 1) * nyn],
    })
}

impl WeightedOperator2D {
    /// Operator action on a full node array.  Neighbor values on the
    /// rectangle boundary are treated as zero (homogeneous Dirichlet), so
    /// boundary entries of `u` never influence the result; output boundary
    /// entries are zero.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (nx, ny, nyn) = (g.x.n_cells, g.n_y_cells, g.n_y_nodes());
        assert_eq!(u.len(), g.n_nodes(), "operator2d: node array length");
        let hx2 = g.x.h * g.x.h;
        let hy2 = g.h_y * g.h_y;
        let mut out = vec![0.0; u.len()];
        for i in 1..nx {
            for j in 1..ny {
                let p = i * nyn + j;
                let right = if i + 1 == nx { 0.0 } else { u[p + nyn] };
                let left = if i == 1 { 0.0 } else { u[p - nyn] };
                let up = if j + 1 == ny { 0.0 } else { u[p + 1] };
                let down = if j == 1 { 0.0 } else { u[p - 1] };
                let fx = self.ax[i * nyn + j] * (right - u[p])
                    - self.ax[(i - 1) * nyn + j] * (u[p] - left);
                let fy =
                    self.ay[i * ny + j] * (up - u[p]) - self.ay[i * ny + j - 1] * (u[p] - down);
                out[p] = -(fx / hx2 + fy / hy2) / self.rho[p] + self.qdiag[p] * u[p];
            }
        }
        out
    }

    pub fn weighted_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0;
        for ((&w, &x), &y) in self.rho.iter().zip(a).zip(b) {
            sum += w * x * y;
        }
        sum * self.grid.x.h * self.grid.h_y
    }

    pub fn weighted_norm(&self, a: &[f64]) -> f64 {
        self.weighted_inner(a, a).sqrt()
    }

    pub fn rayleigh(&self, u: &[f64]) -> f64 {
        let au = self.apply(u);
        self.weighted_inner(&au, u) / self.weighted_inner(u, u)
    }

    /// New operator with a diagonal potential (values at all nodes) added.
    pub fn with_potential(&self, pot: &[f64]) -> Result<Self> {
        if pot.len() != self.qdiag.len() {
            return Err(Error::config(format!(
                "operator2d: potential has {} values, the grid {} nodes",
                pot.len(),
                self.qdiag.len()
            )));
        }
        let mut out = self.clone();
        for (q, &p) in out.qdiag.iter_mut().zip(pot) {
            *q += p;
        }
        Ok(out)
    }

    /// Symmetrized interior matrix `D^{1/2} A D^{-1/2}`, `D = diag(rho)`;
    /// y-fastest interior ordering, bandwidth `n_y_cells - 1`.
    fn banded_symmetrized(&self) -> BandedSym {
        let g = self.grid;
        let (nx, ny, nyn) = (g.x.n_cells, g.n_y_cells, g.n_y_nodes());
        let my = ny - 1;
        let hx2 = g.x.h * g.x.h;
        let hy2 = g.h_y * g.h_y;
        let mut s = BandedSym::zeros((nx - 1) * my, my);
        for i in 1..nx {
            for j in 1..ny {
                let p = (i - 1) * my + (j - 1);
                let node = i * nyn + j;
                let diag = (self.ax[(i - 1) * nyn + j] + self.ax[i * nyn + j])
                    / (self.rho[node] * hx2)
                    + (self.ay[i * ny + j - 1] + self.ay[i * ny + j]) / (self.rho[node] * hy2)
                    + self.qdiag[node];
                s.set(p, p, diag);
                if j + 1 < ny {
                    let v =
                        -self.ay[i * ny + j] / (hy2 * (self.rho[node] * self.rho[node + 1]).sqrt());
                    s.set(p, p + 1, v);
                }
                if i + 1 < nx {
                    let v = -self.ax[i * nyn + j]
                        / (hx2 * (self.rho[node] * self.rho[node + nyn]).sqrt());
                    s.set(p, p + my, v);
                }
            }
        }
        s
    }
}

/// Shift just below the Rayleigh quotient of a trial vector; the margin
/// keeps the shifted operator positive definite even when the trial
/// quotient sits slightly above the lowest eigenvalue.
pub fn shift_from_guess(op: &WeightedOperator2D, guess: &[f64]) -> f64 {
    let rq = op.rayleigh(guess);
    rq - 1.0f64.max(0.02 * rq.abs())
}

/// Lowest `k_max` eigenpairs of an assembled operator by shift-invert
/// Lanczos with full reorthogonalization.  `shift` must lie below the
/// spectrum (normally from [`shift_from_guess`]); if the factorization
/// reports eigenvalues beneath it, the shift is lowered and the solve
/// retried.  After convergence the factorization inertia at the midpoints
/// between consecutive eigenvalues is verified, so a missed or spurious
/// eigenvalue is reported as an error instead of silently returned.
pub fn solve_eigen(op: &WeightedOperator2D, k_max: usize, shift: f64) -> Result<Spectrum> {
    if k_max == 0 || k_max > 6 {
        return Err(Error::config(format!(
            "solve_eigen: k_max = {k_max} outside 1..=6"
        )));
    }
    let g = op.grid;
    let s = op.banded_symmetrized();
    let mut sigma = shift;
    let mut step = 1.0f64.max(0.02 * shift.abs());
    let mut outcome = None;
    let mut last_err = None;
    for _ in 0..5 {
        match shift_invert_lanczos(&s, sigma, k_max, LANCZOS_SEED, 1e-9, 300) {
            Ok(o) => {
                outcome = Some(o);
                break;
            }
            Err(e) => {
                last_err = Some(e);
                sigma -= step;
                step *= 2.0;
            }
        }
    }
    let outcome = match outcome {
        Some(o) => o,
        None => return Err(last_err.expect("no attempts made")),
    };
    for jj in 0..outcome.eigenvalues.len().saturating_sub(1) {
        let lo = outcome.eigenvalues[jj];
        let hi = outcome.eigenvalues[jj + 1];
        if hi - lo < 1e-8 * hi.abs().max(1.0) {
            // midpoint inside a near-degenerate cluster proves nothing
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let count = inertia_below(&s, mid)?;
        if count != jj + 1 {
            return Err(Error::numerical(format!(
                "solve_eigen: {count} eigenvalues beneath {mid:.8}, solver returned {}",
                jj + 1
            )));
        }
    }
    let (nx, ny, nyn) = (g.x.n_cells, g.n_y_cells, g.n_y_nodes());
    let my = ny - 1;
    let cell = g.x.h * g.h_y;
    let mut eigenvectors = Vec::with_capacity(outcome.vectors.len());
    for z in &outcome.vectors {
        let mut v = vec![0.0; g.n_nodes()];
        for i in 1..nx {
            for j in 1..ny {
                let node = i * nyn + j;
                v[node] = z[(i - 1) * my + (j - 1)] / (op.rho[node] * cell).sqrt();
            }
        }
        fix_sign(&mut v);
        eigenvectors.push(v);
    }
    Ok(Spectrum {
        eigenvalues: outcome.eigenvalues,
        eigenvectors,
        weight: op.rho.clone(),
        cell_measure: cell,
        tag: op.tag,
    })
}

/// Separation-of-variables trial function `h_k(x) cos(pi y / 2)`,
/// normalized in the separable weighted inner product, sign fixed.  The
/// one-dimensional spectrum must live on the rectangle's x-grid.
pub fn guess_eigenfunction(k: usize, model: &Spectrum, grid: Grid2D) -> Result<Vec<f64>> {
    if !matches!(model.tag, InnerProductTag::ModelX) {
        return Err(Error::config(
            "guess: expected a one-dimensional model spectrum",
        ));
    }
    if k == 0 || k > model.eigenvectors.len() {
        return Err(Error::config(format!(
            "guess: k = {k} not among the {} solved modes",
            model.eigenvectors.len()
        )));
    }
    let h = &model.eigenvectors[k - 1];
    if h.len() != grid.x.n_nodes() {
        return Err(Error::config(format!(
            "guess: model grid has {} nodes, the rectangle {}",
            h.len(),
            grid.x.n_nodes()
        )));
    }
    let nyn = grid.n_y_nodes();
    let mut u = vec![0.0; grid.n_nodes()];
    for i in 1..grid.x.n_cells {
        for j in 1..grid.n_y_cells {
            u[i * nyn + j] = h[i] * (FRAC_PI_2 * grid.y_node(j)).cos();
        }
    }
    // Separable weight is the model x-weight, constant in y.
    let mut nrm2 = 0.0;
    for i in 0..=grid.x.n_cells {
        let mut row = 0.0;
        for j in 0..=grid.n_y_cells {
            row += u[i * nyn + j] * u[i * nyn + j];
        }
        nrm2 += model.weight[i] * row;
    }
    nrm2 *= grid.x.h * grid.h_y;
    if !(nrm2 > 0.0) {
        return Err(Error::numerical("guess: zero trial function"));
    }
    let scale = nrm2.sqrt();
    for v in &mut u {
        *v /= scale;
    }
    fix_sign(&mut u);
    Ok(u)
}

/// `||(A - lambda) u||` in the operator's weighted norm.
pub fn residual_norm(op: &WeightedOperator2D, u: &[f64], lambda: f64) -> f64 {
    let mut r = op.apply(u);
    for (ri, &ui) in r.iter_mut().zip(u) {
        *ri -= lambda * ui;
    }
    op.weighted_norm(&r)
}

/// Projection onto the lowest transverse profile at each depth:
/// `h(x_i) = integral of u(x_i, y) cos(pi y/2) dy`.  The plain node sum is
/// already the trapezoid rule because the endpoint factors vanish.
pub fn project_slices(u: &[f64], grid: Grid2D) -> Vec<f64> {
    let nyn = grid.n_y_nodes();
    let mut h = vec![0.0; grid.x.n_nodes()];
    for (i, hi) in h.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..nyn {
            acc += u[i * nyn + j] * (FRAC_PI_2 * grid.y_node(j)).cos();
        }
        *hi = acc * grid.h_y;
    }
    h
}

/// Tensor lift `h(x) cos(pi y/2)` onto the rectangle.
pub fn tensor_with_profile(h: &[f64], grid: Grid2D) -> Vec<f64> {
    let nyn = grid.n_y_nodes();
    let mut u = vec![0.0; grid.x.n_nodes() * nyn];
    for (i, &hi) in h.iter().enumerate() {
        for j in 0..nyn {
            u[i * nyn + j] = hi * (FRAC_PI_2 * grid.y_node(j)).cos();
        }
    }
    u
}

/// Component of `u` orthogonal to the lowest transverse profile in every
/// slice (the profile is normalized in the discrete y-product, so the
/// slice projection is an orthogonal one).
pub fn transverse_remainder(u: &[f64], grid: Grid2D) -> Vec<f64> {
    let lift = tensor_with_profile(&project_slices(u, grid), grid);
    u.iter().zip(&lift).map(|(&a, &b)| a - b).collect()
}

/// Fitted decay of the per-slice transverse energy of an eigenfunction.
#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    /// `e(x_i) = (1/2) integral of u(x_i, y)^2 dy` per x-node.
    #[serde(skip)]
    pub energies: Vec<f64>,
    /// Nominal fit window `[x_star, x_max - 2]`, when it holds enough
    /// usable nodes.
    pub window: Option<(f64, f64)>,
    /// Log-linear slope over the nominal window.
    pub slope: Option<f64>,
    /// Wider window starting `x_star - 8`, reported when the domain is too
    /// short for the nominal one.
    pub fallback_window: Option<(f64, f64)>,
    pub fallback_slope: Option<f64>,
    /// True when no fitted energy exceeds the unit-rate exponential
    /// envelope through the window's left endpoint (5% slack).
    pub envelope_ok: bool,
}

/// Computes slice energies and fits their logarithmic decay beyond
/// `x_star`.  Energies beneath `1e-28 * max` are treated as numerical
/// noise and excluded from fits.
pub fn slice_energy_decay(u: &[f64], grid: Grid2D, x_star: f64) -> Result<DecayReport> {
    if u.len() != grid.n_nodes() {
        return Err(Error::config(format!(
            "decay: array has {} values, the grid {} nodes",
            u.len(),
            grid.n_nodes()
        )));
    }
    let nyn = grid.n_y_nodes();
    let mut energies = Vec::with_capacity(grid.x.n_nodes());
    for i in 0..grid.x.n_nodes() {
        let mut acc = 0.0;
        for j in 0..nyn {
            acc += u[i * nyn + j] * u[i * nyn + j];
        }
        energies.push(0.5 * acc * grid.h_y);
    }
    let floor = energies.iter().cloned().fold(0.0f64, f64::max) * 1e-28;
    let x_hi = grid.x.x_max - 2.0;

    let fit_from = |x_lo: f64| -> Option<(f64, f64, (f64, f64))> {
        let mut xs = Vec::new();
        let mut ls = Vec::new();
        for (i, &e) in energies.iter().enumerate() {
            let x = grid.x.node(i);
            if x >= x_lo && x <= x_hi && e > floor {
                xs.push(x);
                ls.push(e.ln());
            }
        }
        if xs.len() < 8 {
            return None;
        }
        let (slope, _, _) = linear_fit(&xs, &ls).ok()?;
        // envelope through the left endpoint at unit rate
        let e_left = ls[0].exp();
        let x_left = xs[0];
        let mut violations = 0usize;
        for (&x, &l) in xs.iter().zip(&ls) {
            if l.exp() > 1.05 * e_left * (-(x - x_left)).exp() {
                violations += 1;
            }
        }
        Some((slope, violations as f64, (xs[0], *xs.last().unwrap())))
    };

    let nominal = fit_from(x_star);
    let fallback = if nominal.is_none() {
        fit_from(x_star - 8.0)
    } else {
        None
    };
    let (window, slope, fb_window, fb_slope, violations) = match (&nominal, &fallback) {
        (Some((s, v, w)), _) => (Some(*w), Some(*s), None, None, *v),
        (None, Some((s, v, w))) => (None, None, Some(*w), Some(*s), *v),
        (None, None) => (None, None, None, None, 0.0),
    };
    Ok(DecayReport {
        energies,
        window,
        slope,
        fallback_window: fb_window,
        fallback_slope: fb_slope,
        envelope_ok: violations == 0.0,
    })
}

/// Deviation families between the full, separable and one-dimensional
/// spectra at matched parameters, for modes `1..=k`.  Vector distances use
/// the separable weighted norm after sign alignment.
#[derive(Clone, Debug, Serialize)]
pub struct SpectraComparison {
    /// `|lambda_sep_k - lambda_ode_k|`.
    pub sep_vs_ode: Vec<f64>,
    /// `|lambda_full_k - lambda_sep_k|`.
    pub full_vs_sep: Vec<f64>,
    /// `||u_sep_k - guess_k||` in the separable norm.
    pub guess_to_sep: Vec<f64>,
    /// `||u_full_k - u_sep_k||` in the separable norm.
    pub full_to_sep_vec: Vec<f64>,
    /// `||u_full_k - guess_k||` in the separable norm.
    pub guess_to_full: Vec<f64>,
}

fn aligned_distance(norm_of: &Spectrum, a: &[f64], b: &[f64]) -> f64 {
    let s = if norm_of.weighted_inner(a, b) < 0.0 {
        -1.0
    } else {
        1.0
    };
    let d: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - s * y).collect();
    norm_of.weighted_norm(&d)
}

pub fn compare_spectra(
    full: &Spectrum,
    sep: &Spectrum,
    model: &Spectrum,
    guesses: &[Vec<f64>],
    k: usize,
) -> Result<SpectraComparison> {
    if full.eigenvalues.len() < k || sep.eigenvalues.len() < k || model.eigenvalues.len() < k {
        return Err(Error::config(format!(
            "compare_spectra: need {k} modes in every spectrum"
        )));
    }
    if guesses.len() < k {
        return Err(Error::config(format!(
            "compare_spectra: need {k} trial functions, got {}",
            guesses.len()
        )));
    }
    let mut out = SpectraComparison {
        sep_vs_ode: Vec::new(),
        full_vs_sep: Vec::new(),
        guess_to_sep: Vec::new(),
        full_to_sep_vec: Vec::new(),
        guess_to_full: Vec::new(),
    };
    for kk in 0..k {
        out.sep_vs_ode
            .push((sep.eigenvalues[kk] - model.eigenvalues[kk]).abs());
        out.full_vs_sep
            .push((full.eigenvalues[kk] - sep.eigenvalues[kk]).abs());
        out.guess_to_sep
            .push(aligned_distance(sep, &sep.eigenvectors[kk], &guesses[kk]));
        out.full_to_sep_vec.push(aligned_distance(
            sep,
            &full.eigenvectors[kk],
            &sep.eigenvectors[kk],
        ));
        out.guess_to_full
            .push(aligned_distance(sep, &full.eigenvectors[kk], &guesses[kk]));
    }
    Ok(out)
}

/// Measured compatibility constant between the full and separable inner
/// products: `|<w1,w2> - <w1,w2>_0| <= eps_comp ||w1||_0 ||w2||_0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EpsCompReport {
    /// Largest relative discrepancy over the sampled random pairs.
    pub sampled: f64,
    /// Exact supremum `max |rho/rho0 - 1|` over nodes; for diagonal
    /// weights this bounds every pair, so `sampled <= pointwise`.
    pub pointwise: f64,
}

pub fn measure_eps_comp(
    full: &WeightedOperator2D,
    sep: &WeightedOperator2D,
    pairs: usize,
    seed: u64,
) -> Result<EpsCompReport> {
    let n = full.grid.n_nodes();
    if sep.grid.n_nodes() != n {
        return Err(Error::config("eps_comp: operators on different grids"));
    }
    let mut pointwise = 0.0f64;
    for (&r, &r0) in full.rho.iter().zip(&sep.rho) {
        pointwise = pointwise.max((r / r0 - 1.0).abs());
    }
    let mut sampled = 0.0f64;
    for p in 0..pairs {
        let w1 = splitmix_vector(n, seed.wrapping_add(2 * p as u64));
        let w2 = splitmix_vector(n, seed.wrapping_add(2 * p as u64 + 1));
        let d = (full.weighted_inner(&w1, &w2) - sep.weighted_inner(&w1, &w2)).abs();
        sampled = sampled.max(d / (sep.weighted_norm(&w1) * sep.weighted_norm(&w2)));
    }
    Ok(EpsCompReport { sampled, pointwise })
}

/// Quadratic-form difference `|<A_full v, v>_full - <A_sep v, v>_sep|`.
pub fn form_difference(full: &WeightedOperator2D, sep: &WeightedOperator2D, v: &[f64]) -> f64 {
    let qf = full.weighted_inner(&full.apply(v), v);
    let q0 = sep.weighted_inner(&sep.apply(v), v);
    (qf - q0).abs()
}

/// Sup-norm distances between two operators' coefficient arrays.  The
/// x-flux and weight arrays are O(1) (normalized by `jac0(t0)`) and are
/// compared absolutely; the y-flux carries the large transverse scale and
/// is compared relatively.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoefficientDeviation {
    pub ax_abs: f64,
    pub ay_rel: f64,
    pub rho_abs: f64,
}

impl CoefficientDeviation {
    pub fn max(&self) -> f64 {
        self.ax_abs.max(self.ay_rel).max(self.rho_abs)
    }
}

/// Compares the assembled coefficient arrays of two operators on the same
/// grid; on a metric whose warping factor does not depend on `s` the full
/// and separable assemblies coincide to rounding.
pub fn coefficient_deviation(
    a: &WeightedOperator2D,
    b: &WeightedOperator2D,
) -> Result<CoefficientDeviation> {
    if a.grid.n_nodes() != b.grid.n_nodes() || a.grid.n_y_cells != b.grid.n_y_cells {
        return Err(Error::config(
            "coefficient comparison: operators on different grids",
        ));
    }
    let sup_abs = |p: &[f64], q: &[f64]| {
        p.iter()
            .zip(q)
            .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
    };
    let sup_rel = |p: &[f64], q: &[f64]| {
        p.iter().zip(q).fold(0.0f64, |m, (&x, &y)| {
            m.max((x - y).abs() / y.abs().max(1e-300))
        })
    };
    Ok(CoefficientDeviation {
        ax_abs: sup_abs(&a.ax, &b.ax),
        ay_rel: sup_rel(&a.ay, &b.ay),
        rho_abs: sup_abs(&a.rho, &b.rho),
    })
}

/// Metric whose s-grid is aligned with the scaled transverse nodes *and*
/// half-nodes of an `n_y_cells` rectangle: columns at `eps(-1 + m h_y/2)`.
pub fn rectangle_metric(
    profile: CurvatureProfile,
    t0: f64,
    eps: f64,
    n_y_cells: usize,
) -> Result<FermiMetric> {
    let n_s = 2 * n_y_cells + 1;
    let depth = 0.3 * t0 + 0.1;
    FermiMetric::build(profile, eps, n_s, -depth, t0, 1e-3)
}

/// A fully assembled rescaled experiment: metric, derived parameters,
/// rectangle grid, and both operators.
#[derive(Clone, Debug)]
pub struct Rescaled2D {
    pub metric: FermiMetric,
    pub params: DomainParams,
    pub grid: Grid2D,
    pub op_sep: WeightedOperator2D,
    pub op_full: WeightedOperator2D,
}

impl Rescaled2D {
    /// Builds the experiment at reference resolution.
    pub fn build(profile: CurvatureProfile, t0: f64, eps: f64, t_p: f64) -> Result<Self> {
        Self::build_sized(profile, t0, eps, t_p, None, REFERENCE_NY)
    }

    /// Builds with explicit grid sizes; tests use coarser x-grids, which
    /// is safe because the transverse resolution is what the calibrated
    /// eigenvalue comparisons are sensitive to.
    pub fn build_sized(
        profile: CurvatureProfile,
        t0: f64,
        eps: f64,
        t_p: f64,
        n_x_cells: Option<usize>,
        n_y_cells: usize,
    ) -> Result<Self> {
        let metric = rectangle_metric(profile, t0, eps, n_y_cells)?;
        let params = crate::cross_section::experiment_params(&metric, t0, eps, t_p)?;
        let x_max = params.x_max();
        let n_x = n_x_cells.unwrap_or_else(|| 1200usize.max((30.0 * x_max).ceil() as usize));
        let grid = Grid2D::new(Grid1D::new(x_max, n_x)?, n_y_cells)?;
        let op_sep = assemble_separable(&metric, &params, grid)?;
        let op_full = assemble_full(&metric, &params, grid)?;
        Ok(Rescaled2D {
            metric,
            params,
            grid,
            op_sep,
            op_full,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airy;
    use crate::sturm_liouville::{assemble_model_ode, solve_model_ode};

    /// Discrete Dirichlet eigenvalue of `-D^2` on `n` cells of width `h`.
    fn disc_eig(n: usize, h: f64, m: usize) -> f64 {
        let t = (m as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin();
        (2.0 / h * t) * (2.0 / h * t)
    }

    fn constant_operator(x_max: f64, nx: usize, ny: usize, cy: f64) -> WeightedOperator2D {
        let grid = Grid2D::new(Grid1D::new(x_max, nx).unwrap(), ny).unwrap();
        WeightedOperator2D {
            grid,
            tag: InnerProductTag::SeparableXy,
            ax: vec![1.0; nx * (ny + 1)],
            ay: vec![cy; (nx + 1) * ny],
            rho: vec![1.0; (nx + 1) * (ny + 1)],
            qdiag: vec![0.0; (nx + 1) * (ny + 1)],
        }
    }

    #[test]
    fn tensor_product_oracle() {
        let (nx, ny, cy) = (300usize, 40usize, 0.7);
        let op = constant_operator(3.0, nx, ny, cy);
        let mut exact = Vec::new();
        for m in 1..=6 {
            for l in 1..=6 {
                exact.push(disc_eig(nx, op.grid.x.h, m) + cy * disc_eig(ny, op.grid.h_y, l));
            }
        }
        exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let spec = solve_eigen(&op, 5, 0.5 * exact[0]).unwrap();
        for k in 0..5 {
            assert!(
                (spec.eigenvalues[k] - exact[k]).abs() < 1e-8,
                "mode {k}: {} vs {}",
                spec.eigenvalues[k],
                exact[k]
            );
        }
        assert!(spec.orthonormality_defect() < 1e-10);
        for v in &spec.eigenvectors {
            assert!(v[op.grid.node_index(1, 1)] > 0.0, "sign convention");
        }
    }

    #[test]
    fn shift_above_spectrum_recovers() {
        let (nx, ny, cy) = (220usize, 8usize, 0.5);
        let op = constant_operator(2.0, nx, ny, cy);
        let lam1 = disc_eig(nx, op.grid.x.h, 1) + cy * disc_eig(ny, op.grid.h_y, 1);
        let lam2 = disc_eig(nx, op.grid.x.h, 2) + cy * disc_eig(ny, op.grid.h_y, 1);
        // a shift well above the bottom of the spectrum must be walked down
        let spec = solve_eigen(&op, 2, lam2 + 0.5).unwrap();
        assert!((spec.eigenvalues[0] - lam1).abs() < 1e-8);
    }

    #[test]
    fn weighted_symmetry_on_curved_geometry() {
        let exp = Rescaled2D::build_sized(CurvatureProfile::g3(), 1.0, 0.2, 0.375, Some(240), 24)
            .unwrap();
        for (op, seed) in [(&exp.op_full, 0x11u64), (&exp.op_sep, 0x12u64)] {
            let n = op.grid.n_nodes();
            let u = splitmix_vector(n, seed);
            let v = splitmix_vector(n, seed + 100);
            let lhs = op.weighted_inner(&op.apply(&u), &v);
            let rhs = op.weighted_inner(&u, &op.apply(&v));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * scale,
                "asymmetry {} at scale {scale}",
                (lhs - rhs).abs()
            );
        }
    }

    #[test]
    fn straight_geometry_operators_coincide() {
        let exp = Rescaled2D::build_sized(CurvatureProfile::g1(), 1.0, 0.1, 0.375, Some(240), 16)
            .unwrap();
        let f = &exp.op_full;
        let s = &exp.op_sep;
        let sup = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(&x, &y)| (x - y).abs())
                .fold(0.0f64, f64::max)
        };
        assert!(sup(&f.ax, &s.ax) <= 1e-14);
        assert!(sup(&f.rho, &s.rho) <= 1e-14);
        let rel =
            f.ay.iter()
                .zip(&s.ay)
                .map(|(&x, &y)| ((x - y) / y).abs())
                .fold(0.0f64, f64::max);
        assert!(rel <= 1e-14);
    }

    #[test]
    fn curved_coefficient_difference_shrinks_with_eps() {
        let mut sups = Vec::new();
        for eps in [0.2, 0.1] {
            let exp =
                Rescaled2D::build_sized(CurvatureProfile::g3(), 1.0, eps, 0.375, Some(240), 24)
                    .unwrap();
            let rel_sup = |a: &[f64], b: &[f64]| {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| ((x - y) / y).abs())
                    .fold(0.0f64, f64::max)
            };
            let m = rel_sup(&exp.op_full.ax, &exp.op_sep.ax)
                .max(rel_sup(&exp.op_full.ay, &exp.op_sep.ay))
                .max(rel_sup(&exp.op_full.rho, &exp.op_sep.rho));
            assert!(m <= 0.5 * eps, "coefficient difference {m} at eps {eps}");
            assert!(m >= 1e-5, "difference suspiciously small: {m}");
            sups.push(m);
        }
        assert!(sups[1] < sups[0], "difference must shrink with eps");
    }

    /// The big separation pipeline on the straight geometry: eigenvalues
    /// of the separable rectangle operator against the interval operator
    /// on the matched x-grid, trial-function residuals, slice projections,
    /// and decay fits.
    #[test]
    fn straight_geometry_separation_pipeline() {
        let exp = Rescaled2D::build_sized(
            CurvatureProfile::g1(),
            1.0,
            0.05,
            0.375,
            Some(360),
            REFERENCE_NY,
        )
        .unwrap();
        let problem = assemble_model_ode(&exp.metric, &exp.params, exp.grid.x).unwrap();
        let model = solve_model_ode(&problem, 3).unwrap();
        let guess1 = guess_eigenfunction(1, &model, exp.grid).unwrap();
        let guess2 = guess_eigenfunction(2, &model, exp.grid).unwrap();

        assert!((exp.op_sep.weighted_norm(&guess1) - 1.0).abs() < 1e-10);
        // Dirichlet trace on all four sides
        let nyn = exp.grid.n_y_nodes();
        for i in 0..exp.grid.x.n_nodes() {
            assert_eq!(guess1[i * nyn], 0.0);
            assert_eq!(guess1[i * nyn + exp.grid.n_y_cells], 0.0);
        }
        for j in 0..nyn {
            assert_eq!(guess1[j], 0.0);
            assert_eq!(guess1[exp.grid.x.n_cells * nyn + j], 0.0);
        }

        let shift = shift_from_guess(&exp.op_sep, &guess1);
        let sep = solve_eigen(&exp.op_sep, 3, shift).unwrap();
        let full = solve_eigen(&exp.op_full, 3, shift).unwrap();

        // On the straight geometry the two operators are identical, so the
        // spectra agree to solver accuracy.
        for k in 0..3 {
            assert!((full.eigenvalues[k] - sep.eigenvalues[k]).abs() <= 1e-12);
        }
        // Rectangle vs interval eigenvalues: the only surviving term is
        // the transverse discretization gap, which the 141-node y-grid
        // keeps within the 5e-4 band.
        for k in 0..2 {
            let dev = (sep.eigenvalues[k] - model.eigenvalues[k]).abs();
            assert!(dev <= 5e-4, "mode {k} deviation {dev}");
            assert!(dev >= 1e-6, "deviation suspiciously small: {dev}");
        }
        // simplicity of the low spectrum
        assert!(sep.eigenvalues[1] - sep.eigenvalues[0] >= 1.0);
        assert!(sep.eigenvalues[2] - sep.eigenvalues[1] >= 1.0);

        // trial-function residual sits at the transverse discretization
        // floor; an O(1) eigenvalue error moves it to O(1)
        let r1 = residual_norm(&exp.op_sep, &guess1, model.eigenvalues[0]);
        assert!(r1 <= 5e-4, "residual {r1}");
        assert!(r1 >= 1e-5, "residual suspiciously small: {r1}");
        let shifted = residual_norm(&exp.op_sep, &guess1, model.eigenvalues[0] + 1.0);
        assert!(shifted >= 0.9);

        let comparison =
            compare_spectra(&full, &sep, &model, &[guess1.clone(), guess2.clone()], 2).unwrap();
        assert!(comparison.guess_to_sep[0] <= 2e-3);
        assert!(comparison.guess_to_sep[1] <= 2e-3);
        assert!(comparison.full_to_sep_vec[0] <= 1e-10);

        // slice projection of the trial function recovers its profile
        let back = project_slices(&guess1, exp.grid);
        let sup = back
            .iter()
            .zip(&model.eigenvectors[0])
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup <= 1e-8, "slice recovery error {sup}");

        // Gram matrix of the slice profiles of the separable modes
        let s1 = project_slices(&sep.eigenvectors[0], exp.grid);
        let s2 = project_slices(&sep.eigenvectors[1], exp.grid);
        assert!((model.weighted_inner(&s1, &s1) - 1.0).abs() <= 1e-6);
        assert!((model.weighted_inner(&s2, &s2) - 1.0).abs() <= 1e-6);
        assert!(model.weighted_inner(&s1, &s2).abs() <= 1e-6);

        // separable modes carry no transverse remainder
        let rem = transverse_remainder(&sep.eigenvectors[0], exp.grid);
        assert!(exp.op_sep.weighted_norm(&rem) <= 1e-8);

        // the domain is too short for the nominal decay window here, so
        // the fallback window is fitted; the tail decays much faster than
        // the unit rate
        let x_star = airy::airy_zero(1).unwrap() + 10.0;
        let report = slice_energy_decay(&full.eigenvectors[0], exp.grid, x_star).unwrap();
        assert!(report.window.is_none());
        let fb = report.fallback_slope.expect("fallback window");
        assert!(fb <= -1.0, "fallback slope {fb}");
        assert!(report.envelope_ok);
    }

    #[test]
    fn constant_function_violates_envelope() {
        let grid = Grid2D::new(Grid1D::new(20.0, 400).unwrap(), 16).unwrap();
        let u = vec![1.0; grid.n_nodes()];
        let x_star = airy::airy_zero(1).unwrap() + 10.0;
        let report = slice_energy_decay(&u, grid, x_star).unwrap();
        let slope = report.slope.expect("nominal window");
        assert!(slope.abs() < 1e-12, "constant energies fit slope {slope}");
        assert!(!report.envelope_ok);
    }

    #[test]
    fn inner_product_compatibility_scales_with_eps() {
        let exp = Rescaled2D::build_sized(CurvatureProfile::g3(), 1.0, 0.2, 0.375, Some(240), 24)
            .unwrap();
        let r = measure_eps_comp(&exp.op_full, &exp.op_sep, 64, 0x77).unwrap();
        assert!(r.sampled <= r.pointwise + 1e-12);
        assert!(r.pointwise <= 0.15 * 0.2, "eps_comp {}", r.pointwise);
        assert!(r.pointwise >= 1e-4, "eps_comp suspiciously small");
    }

    #[test]
    fn form_difference_small_on_curved_geometry() {
        let exp = Rescaled2D::build_sized(CurvatureProfile::g3(), 1.0, 0.2, 0.375, Some(240), 24)
            .unwrap();
        let problem = assemble_model_ode(&exp.metric, &exp.params, exp.grid.x).unwrap();
        let model = solve_model_ode(&problem, 2).unwrap();
        let guess1 = guess_eigenfunction(1, &model, exp.grid).unwrap();
        let shift = shift_from_guess(&exp.op_sep, &guess1);
        let full = solve_eigen(&exp.op_full, 2, shift).unwrap();
        let d16 = exp.params.delta.powf(1.0 / 6.0);
        for v in &full.eigenvectors {
            let d = form_difference(&exp.op_full, &exp.op_sep, v);
            assert!(d <= 1.0 * d16, "form difference {d} vs delta^(1/6) {d16}");
        }
    }

    #[test]
    fn rejects_mismatched_grid_and_bad_k() {
        let exp = Rescaled2D::build_sized(CurvatureProfile::g1(), 1.0, 0.2, 0.375, Some(240), 16)
            .unwrap();
        let bad = Grid2D::new(Grid1D::new(exp.params.x_max() * 2.0, 240).unwrap(), 16).unwrap();
        assert!(assemble_separable(&exp.metric, &exp.params, bad).is_err());
        assert!(solve_eigen(&exp.op_sep, 0, 1.0).is_err());
        assert!(solve_eigen(&exp.op_sep, 7, 1.0).is_err());
    }
}
