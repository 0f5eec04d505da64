//! The headline experiments: the Dirichlet problem in the original
//! coordinates, the gap integral `int P (u2^2 - u1^2) dvol`, its
//! Hellmann-Feynman finite-difference cross-check, and the sweep that
//! drives every solver and certificate across a list of cross-section
//! widths.
//!
//! The unrescaled operator reuses the rectangle assembly with `delta = 1`:
//! that rescaling is the identity, so the rectangle `(0, t0 + tau0) x
//! (-1, 1)` with transverse scale `1/eps^2` *is* the conservative
//! discretization of `-(1/J) d_t (J d_t) - (1/J) d_s (J^{-1} d_s)` on
//! `(-tau0, t0) x (-eps, eps)` under `t = t0 - x`, `s = eps y` — no
//! interpolation separates the two formulations.  On matched grids the
//! direct matrix is exactly `delta^{-2/3}` times the rescaled one.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use crate::airy;
use crate::cross_section::{experiment_params, CrossSection};
use crate::error::{Error, Result};
use crate::geometry::{
    convexity_report, potential, potential_convexity_report, potential_prime, ConvexityReport,
    CurvatureProfile, DomainParams, FermiMetric, PotentialConvexityReport,
};
use crate::linalg::log_log_fit;
use crate::perturbation::{
    check_guess_lemma, check_two_norm_perturbation, span_form_bound, FormBounds, GuessCertificate,
    TwoNormReport,
};
use crate::spectral2d::{
    assemble_full, assemble_separable, coefficient_deviation, compare_spectra, guess_eigenfunction,
    measure_eps_comp, project_slices, rectangle_metric, shift_from_guess, slice_energy_decay,
    solve_eigen, CoefficientDeviation, EpsCompReport, Grid2D, SpectraComparison, REFERENCE_NY,
};
use crate::sturm_liouville::{
    assemble_model_ode, h1_norm, solve_model_ode, Grid1D, InnerProductTag, Spectrum,
};

/// Default seed for the randomized compatibility checks.
pub const DEFAULT_SEED: u64 = 0x5eed_cafe;

/// Parameter twin with `delta = 1`, under which the rescaled rectangle is
/// the original `(t, s)` coordinate patch itself.
pub fn direct_params(params: &DomainParams) -> Result<DomainParams> {
    DomainParams::new(params.t0, params.tau0, params.eps, params.t_p, 1.0)
}

fn direct_grid(
    direct: &DomainParams,
    n_x_cells: Option<usize>,
    n_y_cells: usize,
) -> Result<Grid2D> {
    let x_max = direct.x_max();
    let n_x = n_x_cells.unwrap_or_else(|| 1200usize.max((30.0 * x_max).ceil() as usize));
    Grid2D::new(Grid1D::new(x_max, n_x)?, n_y_cells)
}

/// Potential values `r P(t(x_i))` on all grid nodes (constant across `y`).
fn potential_on_grid(grid: Grid2D, params: &DomainParams, r: f64) -> Result<Vec<f64>> {
    let d13 = params.delta.cbrt();
    let nyn = grid.n_y_nodes();
    let mut out = Vec::with_capacity(grid.n_nodes());
    for i in 0..grid.x.n_nodes() {
        let t = (params.t0 - d13 * grid.x.node(i)).max(-params.tau0);
        let p = r * potential(t, params)?;
        out.extend(std::iter::repeat_n(p, nyn));
    }
    Ok(out)
}

/// Analytic shift strictly beneath the lowest direct eigenvalue: the
/// transverse floor `eps^{-2} mu_1(t0)` plus the layer term offset well
/// below its Airy value.  Adding a non-negative potential only raises the
/// spectrum, so one shift serves the whole coupled family.
fn unrescaled_shift(metric: &FermiMetric, params: &DomainParams) -> Result<f64> {
    let mu1 = CrossSection::new(metric).mu1(params.t0)?;
    let a1 = airy::airy_zero(1)?;
    Ok(mu1 / (params.eps * params.eps) + (a1 - 2.5) / params.delta.powf(2.0 / 3.0))
}

/// Lowest three eigenpairs of `-Delta + r P` on `(-tau0, t0) x (-eps, eps)`
/// with Dirichlet boundary, at reference resolution, weighted by `J`.
pub fn solve_unrescaled(metric: &FermiMetric, params: &DomainParams, r: f64) -> Result<Spectrum> {
    Ok(solve_unrescaled_sized(metric, params, r, 3, None, REFERENCE_NY)?.0)
}

/// As [`solve_unrescaled`] with explicit mode count and grid sizes; the
/// coupled families of the derivative check run on a coarser grid, which
/// is sound because the discrete eigenvalue derivative equals the discrete
/// gap integral on *any* grid.
pub fn solve_unrescaled_sized(
    metric: &FermiMetric,
    params: &DomainParams,
    r: f64,
    k_max: usize,
    n_x_cells: Option<usize>,
    n_y_cells: usize,
) -> Result<(Spectrum, Grid2D)> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!(
            "unrescaled solve: coupling r = {r} must be finite and non-negative"
        )));
    }
    let direct = direct_params(params)?;
    let grid = direct_grid(&direct, n_x_cells, n_y_cells)?;
    let mut op = assemble_full(metric, &direct, grid)?;
    if r > 0.0 {
        op = op.with_potential(&potential_on_grid(grid, &direct, r)?)?;
    }
    let shift = unrescaled_shift(metric, params)?;
    let spectrum = solve_eigen(&op, k_max, shift)?;
    Ok((spectrum, grid))
}

/// Weighted expectation difference `<f(t) u2, u2> - <f(t) u1, u1>` over the
/// spectrum's first two modes, each normalized in its own discrete measure.
/// The value is invariant under the depth rescaling and under eigenvector
/// normalization and sign, so one routine serves the direct and the
/// rescaled solves alike.
pub fn gap_observable(
    spec: &Spectrum,
    grid: Grid2D,
    params: &DomainParams,
    f: &dyn Fn(f64) -> Result<f64>,
) -> Result<f64> {
    if spec.eigenvectors.len() < 2 {
        return Err(Error::config("gap observable: need two solved modes"));
    }
    if matches!(spec.tag, InnerProductTag::ModelX) {
        return Err(Error::config(
            "gap observable: expected a spectrum on the rectangle",
        ));
    }
    if spec.eigenvectors[0].len() != grid.n_nodes() || spec.weight.len() != grid.n_nodes() {
        return Err(Error::config(format!(
            "gap observable: spectrum on {} nodes, grid has {}",
            spec.eigenvectors[0].len(),
            grid.n_nodes()
        )));
    }
    let d13 = params.delta.cbrt();
    let nyn = grid.n_y_nodes();
    let u1 = &spec.eigenvectors[0];
    let u2 = &spec.eigenvectors[1];
    let mut mass = [0.0f64; 2];
    let mut norm = [0.0f64; 2];
    for i in 0..grid.x.n_nodes() {
        let t = (params.t0 - d13 * grid.x.node(i)).max(-params.tau0);
        let fv = f(t)?;
        let mut row_mass = [0.0f64; 2];
        let mut row_norm = [0.0f64; 2];
        for j in 0..nyn {
            let p = i * nyn + j;
            let w = spec.weight[p];
            row_mass[0] += w * u1[p] * u1[p];
            row_mass[1] += w * u2[p] * u2[p];
        }
        row_norm[0] = row_mass[0];
        row_norm[1] = row_mass[1];
        mass[0] += fv * row_mass[0];
        mass[1] += fv * row_mass[1];
        norm[0] += row_norm[0];
        norm[1] += row_norm[1];
    }
    if !(norm[0] > 0.0 && norm[1] > 0.0) {
        return Err(Error::numerical("gap observable: zero-mass eigenvector"));
    }
    Ok(mass[1] / norm[1] - mass[0] / norm[0])
}

/// The gap integral `int P(t) (u2^2 - u1^2) J ds dt` with `J`-normalized
/// eigenfunctions.
pub fn gap_integral(spec: &Spectrum, grid: Grid2D, params: &DomainParams) -> Result<f64> {
    gap_observable(spec, grid, params, &|t| potential(t, params))
}

/// Grid sizes and coupling step of the gap-derivative experiment.
#[derive(Clone, Debug)]
pub struct GapOptions {
    /// Coupling step; `None` selects `1e-2 delta^{-1/3}`, large enough to
    /// move the gap above the solver floor yet inside the linear regime.
    pub r_step: Option<f64>,
    pub n_x_cells: Option<usize>,
    pub n_y_cells: usize,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            r_step: None,
            n_x_cells: Some(600),
            n_y_cells: 70,
        }
    }
}

/// Measured outcome of the finite-difference derivative check.
#[derive(Clone, Debug, Serialize)]
pub struct HfReport {
    pub r_step: f64,
    /// Lowest three eigenvalues at each solved coupling, `r = 0` first.
    pub levels: Vec<(f64, Vec<f64>)>,
    pub gamma_0: f64,
    /// `(r, gap)` for the three positive couplings `{1, 2, 4} r_step`.
    pub gamma_r: Vec<(f64, f64)>,
    /// Gap integral of the `r = 0` pair on this family's own grid.
    pub i_eps: f64,
    /// One-sided quotient `(Gamma(h) - Gamma(0)) / h`.
    pub fd: f64,
    /// Two-step extrapolation `2 fd(h) - fd(2h)`, cancelling the O(h) term.
    pub richardson: f64,
    pub rel_dev_fd: f64,
    pub rel_dev_richardson: f64,
    /// `Gamma(r) < Gamma(0)` strictly for all three couplings.
    pub strict_decrease: bool,
}

/// Solves the coupled family `r in {0, 1, 2, 4} r_step` on one shared grid
/// and compares the difference quotients of the gap against the gap
/// integral.  For the discrete family `A + r diag(P)` the derivative of a
/// simple eigenvalue *is* the diagonal expectation, so the comparison is
/// meaningful at any resolution; errors out when a near-degenerate pair
/// makes the derivative ill-defined.
pub fn hellmann_feynman_check(
    metric: &FermiMetric,
    params: &DomainParams,
    opts: &GapOptions,
) -> Result<HfReport> {
    let h = opts.r_step.unwrap_or(1e-2 / params.delta.cbrt());
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!(
            "derivative check: r_step = {h} must be finite and positive"
        )));
    }
    let mut levels = Vec::new();
    let mut gaps = Vec::new();
    let mut base = None;
    for r in [0.0, h, 2.0 * h, 4.0 * h] {
        let (spec, grid) =
            solve_unrescaled_sized(metric, params, r, 3, opts.n_x_cells, opts.n_y_cells)?;
        let l = &spec.eigenvalues;
        let scale = l[1].abs().max(1.0);
        if l[1] - l[0] <= 1e-8 * scale || l[2] - l[1] <= 1e-8 * scale {
            return Err(Error::numerical(format!(
                "derivative check: near-degenerate spectrum at r = {r}: {l:?}"
            )));
        }
        gaps.push((r, l[1] - l[0]));
        levels.push((r, l.clone()));
        if base.is_none() {
            base = Some((spec, grid));
        }
    }
    let (spec0, grid0) = base.expect("r = 0 solved first");
    let i_eps = gap_integral(&spec0, grid0, &direct_params(params)?)?;
    let gamma_0 = gaps[0].1;
    let fd = (gaps[1].1 - gamma_0) / h;
    let fd2 = (gaps[2].1 - gamma_0) / (2.0 * h);
    let richardson = 2.0 * fd - fd2;
    let denom = i_eps.abs().max(1e-300);
    Ok(HfReport {
        r_step: h,
        gamma_0,
        gamma_r: gaps[1..].to_vec(),
        i_eps,
        fd,
        richardson,
        rel_dev_fd: (fd - i_eps).abs() / denom,
        rel_dev_richardson: (richardson - i_eps).abs() / denom,
        strict_decrease: gaps[1..].iter().all(|&(_, g)| g < gamma_0),
        levels,
    })
}

/// Gap experiment summary for one domain: the unperturbed gap, the gaps
/// under the coupled potential, the gap integral with its rescaled limit
/// comparison, and the derivative cross-check.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub eps: f64,
    pub delta: f64,
    pub gamma_0: f64,
    pub gamma_r: Vec<(f64, f64)>,
    /// Reference-resolution gap integral when the caller supplies one,
    /// else the coupled family's own.
    pub i_eps: f64,
    /// `delta^{-1/3} i_eps / P'(t0)`.
    pub rescaled_i: f64,
    /// Extrapolated finite-difference derivative of the gap at `r = 0`.
    pub hf_derivative: f64,
    /// `-(2/3)(a2 - a1)`, the limit of `rescaled_i`.
    pub limit_target: f64,
    /// `t0 + tau0`, the length of the center section.
    pub diameter_floor: f64,
    pub hf: HfReport,
    /// Strict gap decrease, derivative within `hf_band`, negative integral.
    pub pass: bool,
}

pub fn gap_report(
    metric: &FermiMetric,
    params: &DomainParams,
    opts: &GapOptions,
    i_eps_reference: Option<f64>,
    hf_band: f64,
) -> Result<GapReport> {
    let hf = hellmann_feynman_check(metric, params, opts)?;
    if !(hf.gamma_0 > 0.0) {
        return Err(Error::numerical(format!(
            "gap report: non-positive unperturbed gap {}",
            hf.gamma_0
        )));
    }
    let i_eps = i_eps_reference.unwrap_or(hf.i_eps);
    let slope = potential_prime(params.t0, params)?;
    let rescaled_i = i_eps / (params.delta.cbrt() * slope);
    let limit_target = -(2.0 / 3.0) * (airy::airy_zero(2)? - airy::airy_zero(1)?);
    let pass = hf.strict_decrease && hf.rel_dev_richardson <= hf_band && i_eps < 0.0;
    Ok(GapReport {
        eps: params.eps,
        delta: params.delta,
        gamma_0: hf.gamma_0,
        gamma_r: hf.gamma_r.clone(),
        i_eps,
        rescaled_i,
        hf_derivative: hf.richardson,
        limit_target,
        diameter_floor: params.diameter_floor(),
        hf,
        pass,
    })
}

/// One experiment family: a curvature profile swept over cross-section
/// widths at fixed depth `t0`.
#[derive(Clone, Debug)]
pub struct SweepSettings {
    pub profile: CurvatureProfile,
    pub t0: f64,
    /// Strictly decreasing widths.
    pub eps_list: Vec<f64>,
    /// Potential corner as a fraction of `t0`, inside `(1/4, 1/2)`.
    pub t_p_fraction: f64,
    /// Depth cells of the rescaled grids; `None` picks the reference count.
    pub n_x_cells: Option<usize>,
    pub n_y_cells: usize,
    /// Gap experiments per row; `None` skips them.
    pub gap: Option<GapOptions>,
    /// Per-width coupling steps, matched to `eps_list` by position; `None`
    /// (or `None` entries) defers to the automatic step.
    pub r_steps: Option<Vec<f64>>,
    /// Relative band for the derivative cross-check.
    pub hf_band: f64,
    pub seed: u64,
    /// Worker cap; `None` defers to `GAPLAB_THREADS`, then to 2.
    pub threads: Option<usize>,
}

impl SweepSettings {
    pub fn new(profile: CurvatureProfile, t0: f64, eps_list: Vec<f64>) -> Self {
        SweepSettings {
            profile,
            t0,
            eps_list,
            t_p_fraction: 0.4,
            n_x_cells: None,
            n_y_cells: REFERENCE_NY,
            gap: Some(GapOptions::default()),
            r_steps: None,
            hf_band: 0.05,
            seed: DEFAULT_SEED,
            threads: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Completed,
    /// Admissibility or convexity certification failed; nothing was solved.
    ConvexityFail,
    /// A solver or assembly step failed; see `error`.
    Failed,
}

/// Per-eigenfunction decay summary (scalar part of the decay report).
#[derive(Clone, Debug, Serialize)]
pub struct DecaySummary {
    pub k: usize,
    pub x_star: f64,
    pub window: Option<(f64, f64)>,
    pub slope: Option<f64>,
    pub fallback_window: Option<(f64, f64)>,
    pub fallback_slope: Option<f64>,
    pub envelope_ok: bool,
}

/// Everything measured at one width.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub status: RowStatus,
    pub gate_message: Option<String>,
    pub error: Option<String>,
    pub delta: Option<f64>,
    pub x_max: Option<f64>,
    pub diameter_floor: Option<f64>,
    /// Leading model eigenvalue scale `delta^{2/3} eps^{-2} mu_1(t0)`.
    pub q0: Option<f64>,
    pub convexity: Option<ConvexityReport>,
    pub potential_convexity: Option<PotentialConvexityReport>,
    pub lambda_ode: Vec<f64>,
    pub lambda_sep: Vec<f64>,
    pub lambda_full: Vec<f64>,
    /// `|lambda_ode_k - q0 - a_k|` for k = 1, 2.
    pub ode_offsets: Vec<f64>,
    /// Elementwise deviation between the full and separable assemblies;
    /// exactly zero (to rounding) on arclength-independent curvature.
    pub coefficient_deviation: Option<CoefficientDeviation>,
    pub comparison: Option<SpectraComparison>,
    pub guess_certificates: Vec<GuessCertificate>,
    pub eps_comp: Option<EpsCompReport>,
    pub two_norm: Option<TwoNormReport>,
    /// `max |<p_k, p_l>_w - delta_kl|` over the projected slices of the
    /// leading full eigenfunctions.
    pub gram_defect: Option<f64>,
    pub decay: Vec<DecaySummary>,
    /// Gap integral of the full rescaled pair on the reference grid.
    pub i_eps: Option<f64>,
    pub rescaled_i: Option<f64>,
    pub gap: Option<GapReport>,
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

impl SweepRow {
    fn empty(eps: f64) -> Self {
        SweepRow {
            eps,
            status: RowStatus::Failed,
            gate_message: None,
            error: None,
            delta: None,
            x_max: None,
            diameter_floor: None,
            q0: None,
            convexity: None,
            potential_convexity: None,
            lambda_ode: Vec::new(),
            lambda_sep: Vec::new(),
            lambda_full: Vec::new(),
            ode_offsets: Vec::new(),
            coefficient_deviation: None,
            comparison: None,
            guess_certificates: Vec::new(),
            eps_comp: None,
            two_norm: None,
            gram_defect: None,
            decay: Vec::new(),
            i_eps: None,
            rescaled_i: None,
            gap: None,
            elapsed_seconds: 0.0,
        }
    }

    pub fn completed(&self) -> bool {
        self.status == RowStatus::Completed
    }

    /// Mechanical certification failures of this row (gates, certificate
    /// checkers, gap experiment).  Calibrated-band checks live with the
    /// tolerance file, not here.
    pub fn certification_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.status {
            RowStatus::Completed => {}
            RowStatus::ConvexityFail => {
                out.push(format!(
                    "eps {}: convexity gate failed ({})",
                    self.eps,
                    self.gate_message.as_deref().unwrap_or("no detail")
                ));
                return out;
            }
            RowStatus::Failed => {
                out.push(format!(
                    "eps {}: {}",
                    self.eps,
                    self.error.as_deref().unwrap_or("unknown failure")
                ));
                return out;
            }
        }
        if let Some(c) = &self.convexity {
            if !c.pass {
                out.push(format!("eps {}: boundary convexity failed", self.eps));
            }
        }
        if let Some(c) = &self.potential_convexity {
            if !c.pass {
                out.push(format!("eps {}: potential convexity failed", self.eps));
            }
        }
        for (i, cert) in self.guess_certificates.iter().enumerate() {
            if !cert.passed() {
                out.push(format!(
                    "eps {}: trial-eigenpair certificate k = {} failed",
                    self.eps,
                    i + 1
                ));
            }
        }
        if let Some(t) = &self.two_norm {
            if !t.passed() {
                out.push(format!(
                    "eps {}: two-operator eigenvalue sandwich failed",
                    self.eps
                ));
            }
        }
        if let Some(g) = &self.gap {
            if !g.pass {
                out.push(format!("eps {}: gap experiment failed", self.eps));
            }
        }
        out
    }
}

/// Fitted log-log slope of one tracked deviation family against `delta`.
#[derive(Clone, Debug, Serialize)]
pub struct FitEntry {
    pub name: String,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepFits {
    pub entries: Vec<FitEntry>,
}

impl SweepFits {
    pub fn get(&self, name: &str) -> Option<&FitEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub fits: SweepFits,
}

impl SweepResult {
    pub fn certification_failures(&self) -> Vec<String> {
        self.rows
            .iter()
            .flat_map(|r| r.certification_failures())
            .collect()
    }
}

pub(crate) fn validate_eps_list(eps_list: &[f64]) -> Result<()> {
    for (i, &e) in eps_list.iter().enumerate() {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::config(format!(
                "eps_list[{i}] = {e} must be finite and positive"
            )));
        }
        if i > 0 && e >= eps_list[i - 1] {
            return Err(Error::config(format!(
                "eps_list must be strictly decreasing; entry {i} is {e} after {}",
                eps_list[i - 1]
            )));
        }
    }
    Ok(())
}

/// Runs all experiments and certifications at every width of the list.
/// Rows are computed independently (up to `GAPLAB_THREADS` workers, or the
/// explicit `threads` cap) and merged in list order, so results do not
/// depend on scheduling.  Inadmissible or non-convex widths are marked and
/// skipped; solver failures are recorded on their row and the sweep
/// continues.
pub fn epsilon_sweep(settings: &SweepSettings) -> Result<SweepResult> {
    if !(settings.t_p_fraction > 0.25 && settings.t_p_fraction < 0.5) {
        return Err(Error::config(format!(
            "t_p_fraction = {} outside (0.25, 0.5)",
            settings.t_p_fraction
        )));
    }
    validate_eps_list(&settings.eps_list)?;
    if let Some(steps) = &settings.r_steps {
        if steps.len() != settings.eps_list.len() {
            return Err(Error::config(format!(
                "r_steps has {} entries for {} widths",
                steps.len(),
                settings.eps_list.len()
            )));
        }
        if let Some(&bad) = steps.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::config(format!(
                "r_steps entries must be finite and positive, got {bad}"
            )));
        }
    }
    let n = settings.eps_list.len();
    if n == 0 {
        return Ok(SweepResult {
            rows: Vec::new(),
            fits: SweepFits::default(),
        });
    }
    let workers = settings
        .threads
        .or_else(|| {
            std::env::var("GAPLAB_THREADS")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(2)
        .clamp(1, n);
    let slots: Vec<Mutex<Option<SweepRow>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let row = sweep_row(settings, i);
                *slots[i].lock().expect("row slot") = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("row slot").expect("row computed"))
        .collect();
    let fits = compute_fits(&rows);
    Ok(SweepResult { rows, fits })
}

fn sweep_row(settings: &SweepSettings, index: usize) -> SweepRow {
    let start = Instant::now();
    let eps = settings.eps_list[index];
    let mut row = SweepRow::empty(eps);
    match fill_row(settings, index, &mut row) {
        Ok(()) => {}
        Err(e) => {
            // Domain errors before the parameters exist are inadmissible
            // widths: the gate itself, not a solver fault.
            if row.delta.is_none() && matches!(e, Error::Domain(_)) {
                row.status = RowStatus::ConvexityFail;
                row.gate_message = Some(e.to_string());
            } else {
                row.status = RowStatus::Failed;
                row.error = Some(e.to_string());
            }
        }
    }
    row.elapsed_seconds = start.elapsed().as_secs_f64();
    row
}

fn fill_row(settings: &SweepSettings, index: usize, row: &mut SweepRow) -> Result<()> {
    let eps = settings.eps_list[index];
    let t0 = settings.t0;
    let t_p = settings.t_p_fraction * t0;
    let metric = rectangle_metric(settings.profile.clone(), t0, eps, settings.n_y_cells)?;
    let params = experiment_params(&metric, t0, eps, t_p)?;
    row.delta = Some(params.delta);
    row.x_max = Some(params.x_max());
    row.diameter_floor = Some(params.diameter_floor());

    // Gates run before any solve.
    let conv = convexity_report(&metric, t0, params.tau0, eps)?;
    let pconv = potential_convexity_report(&metric, &params)?;
    let gates_pass = conv.pass && pconv.pass;
    row.convexity = Some(conv);
    row.potential_convexity = Some(pconv);
    if !gates_pass {
        row.status = RowStatus::ConvexityFail;
        row.gate_message = Some("convexity certification reported a negative margin".into());
        return Ok(());
    }

    let x_max = params.x_max();
    let n_x = settings
        .n_x_cells
        .unwrap_or_else(|| 1200usize.max((30.0 * x_max).ceil() as usize));
    let grid = Grid2D::new(Grid1D::new(x_max, n_x)?, settings.n_y_cells)?;

    let model = solve_model_ode(&assemble_model_ode(&metric, &params, grid.x)?, 3)?;
    let q0 = params.delta.powf(2.0 / 3.0) / (eps * eps) * CrossSection::new(&metric).mu1(t0)?;
    let a = [airy::airy_zero(1)?, airy::airy_zero(2)?];
    row.q0 = Some(q0);
    row.lambda_ode = model.eigenvalues.clone();
    row.ode_offsets = (0..2)
        .map(|k| (model.eigenvalues[k] - q0 - a[k]).abs())
        .collect();

    let op_sep = assemble_separable(&metric, &params, grid)?;
    let op_full = assemble_full(&metric, &params, grid)?;
    row.coefficient_deviation = Some(coefficient_deviation(&op_full, &op_sep)?);
    let guesses: Vec<Vec<f64>> = (1..=2)
        .map(|k| guess_eigenfunction(k, &model, grid))
        .collect::<Result<_>>()?;
    let shift = shift_from_guess(&op_sep, &guesses[0]);
    let sep = solve_eigen(&op_sep, 3, shift)?;
    let full = solve_eigen(&op_full, 3, shift)?;
    row.lambda_sep = sep.eigenvalues.clone();
    row.lambda_full = full.eigenvalues.clone();
    row.comparison = Some(compare_spectra(&full, &sep, &model, &guesses, 2)?);

    for k in 1..=2usize {
        row.guess_certificates.push(check_guess_lemma(
            &sep,
            |u| op_sep.apply(u),
            model.eigenvalues[k - 1],
            &guesses[k - 1],
        )?);
    }

    let ec = measure_eps_comp(&op_full, &op_sep, 8, settings.seed ^ eps.to_bits())?;
    let eps_comp = ec.pointwise.max(ec.sampled);
    row.eps_comp = Some(ec);
    let apply_diff = |v: &[f64]| -> Vec<f64> {
        let a = op_sep.apply(v);
        let b = op_full.apply(v);
        a.iter().zip(&b).map(|(&x, &y)| x - y).collect()
    };
    let mut bounds = Vec::new();
    for k in 1..=2usize {
        let upper = span_form_bound(&sep.eigenvectors[..k], apply_diff, |a, b| {
            full.weighted_inner(a, b)
        })?;
        let lower = span_form_bound(&full.eigenvectors[..k], apply_diff, |a, b| {
            sep.weighted_inner(a, b)
        })?;
        bounds.push(FormBounds { upper, lower });
    }
    row.two_norm = Some(check_two_norm_perturbation(&full, &sep, eps_comp, &bounds)?);

    let projections: Vec<Vec<f64>> = full.eigenvectors[..2]
        .iter()
        .map(|u| project_slices(u, grid))
        .collect();
    let mut gram: f64 = 0.0;
    for (i, pi) in projections.iter().enumerate() {
        for (j, pj) in projections.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            gram = gram.max((model.weighted_inner(pi, pj) - target).abs());
        }
    }
    row.gram_defect = Some(gram);

    for k in 1..=2usize {
        let x_star = a[k - 1] + 10.0;
        let rep = slice_energy_decay(&full.eigenvectors[k - 1], grid, x_star)?;
        row.decay.push(DecaySummary {
            k,
            x_star,
            window: rep.window,
            slope: rep.slope,
            fallback_window: rep.fallback_window,
            fallback_slope: rep.fallback_slope,
            envelope_ok: rep.envelope_ok,
        });
    }

    let i_eps = gap_integral(&full, grid, &params)?;
    row.i_eps = Some(i_eps);
    row.rescaled_i = Some(i_eps / (params.delta.cbrt() * potential_prime(t0, &params)?));

    if let Some(opts) = &settings.gap {
        let mut opts = opts.clone();
        if let Some(step) = settings.r_steps.as_ref().and_then(|s| s.get(index)) {
            opts.r_step = Some(*step);
        }
        row.gap = Some(gap_report(
            &metric,
            &params,
            &opts,
            Some(i_eps),
            settings.hf_band,
        )?);
    }
    row.status = RowStatus::Completed;
    Ok(())
}

fn compute_fits(rows: &[SweepRow]) -> SweepFits {
    let target = match (airy::airy_zero(1), airy::airy_zero(2)) {
        (Ok(a1), Ok(a2)) => -(2.0 / 3.0) * (a2 - a1),
        _ => return SweepFits::default(),
    };
    type Extract = Box<dyn Fn(&SweepRow) -> Option<f64>>;
    let families: Vec<(&str, Extract)> = vec![
        (
            "ode_offset_k1",
            Box::new(|r: &SweepRow| r.ode_offsets.first().copied()),
        ),
        (
            "ode_offset_k2",
            Box::new(|r: &SweepRow| r.ode_offsets.get(1).copied()),
        ),
        (
            "sep_vs_ode_k1",
            Box::new(|r: &SweepRow| {
                r.comparison
                    .as_ref()
                    .and_then(|c| c.sep_vs_ode.first().copied())
            }),
        ),
        (
            "guess_to_full_k1",
            Box::new(|r: &SweepRow| {
                r.comparison
                    .as_ref()
                    .and_then(|c| c.guess_to_full.first().copied())
            }),
        ),
        (
            "rescaled_i_dev",
            Box::new(move |r: &SweepRow| r.rescaled_i.map(|v| (v - target).abs())),
        ),
    ];
    let mut fits = SweepFits::default();
    for (name, extract) in families {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for row in rows.iter().filter(|r| r.completed()) {
            if let (Some(d), Some(v)) = (row.delta, extract(row)) {
                if v > 0.0 {
                    xs.push(d);
                    ys.push(v);
                }
            }
        }
        if xs.len() < 2 {
            continue;
        }
        if let Ok((slope, r2)) = log_log_fit(&xs, &ys) {
            fits.entries.push(FitEntry {
                name: name.to_string(),
                slope,
                r_squared: r2,
                points: xs.len(),
            });
        }
    }
    fits
}

/// Gap experiment alone at one width: admissibility, the convexity gates,
/// and the coupled-family report, without the reference sweep machinery.
#[derive(Clone, Debug, Serialize)]
pub struct GapRow {
    pub eps: f64,
    pub status: RowStatus,
    pub gate_message: Option<String>,
    pub error: Option<String>,
    pub convexity: Option<ConvexityReport>,
    pub potential_convexity: Option<PotentialConvexityReport>,
    pub report: Option<GapReport>,
}

pub fn gap_only(
    profile: &CurvatureProfile,
    t0: f64,
    eps: f64,
    t_p_fraction: f64,
    opts: &GapOptions,
    hf_band: f64,
) -> GapRow {
    let mut row = GapRow {
        eps,
        status: RowStatus::Failed,
        gate_message: None,
        error: None,
        convexity: None,
        potential_convexity: None,
        report: None,
    };
    let mut past_admissibility = false;
    let outcome = (|| -> Result<()> {
        let metric = rectangle_metric(profile.clone(), t0, eps, opts.n_y_cells)?;
        let params = experiment_params(&metric, t0, eps, t_p_fraction * t0)?;
        past_admissibility = true;
        let conv = convexity_report(&metric, t0, params.tau0, eps)?;
        let pconv = potential_convexity_report(&metric, &params)?;
        let gates_pass = conv.pass && pconv.pass;
        row.convexity = Some(conv);
        row.potential_convexity = Some(pconv);
        if !gates_pass {
            row.status = RowStatus::ConvexityFail;
            row.gate_message = Some("convexity certification reported a negative margin".into());
            return Ok(());
        }
        row.report = Some(gap_report(&metric, &params, opts, None, hf_band)?);
        row.status = RowStatus::Completed;
        Ok(())
    })();
    if let Err(e) = outcome {
        if !past_admissibility && matches!(e, Error::Domain(_)) {
            row.status = RowStatus::ConvexityFail;
            row.gate_message = Some(e.to_string());
        } else {
            row.status = RowStatus::Failed;
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Model-level convergence data: eigenvalues and offsets of the
/// one-dimensional problem alone, on its own fine default grids.  Cheap
/// enough to run at widths where the rectangle solves are not warranted.
#[derive(Clone, Debug, Serialize)]
pub struct ModelOffsetsRow {
    pub eps: f64,
    pub delta: f64,
    pub q0: f64,
    pub lambda: Vec<f64>,
    /// `|lambda_k - q0 - a_k|`.
    pub offsets: Vec<f64>,
    pub h1_norms: Vec<f64>,
}

pub fn model_offsets_sweep(
    profile: &CurvatureProfile,
    t0: f64,
    eps_list: &[f64],
    t_p_fraction: f64,
    k_max: usize,
) -> Result<Vec<ModelOffsetsRow>> {
    if !(t_p_fraction > 0.25 && t_p_fraction < 0.5) {
        return Err(Error::config(format!(
            "t_p_fraction = {t_p_fraction} outside (0.25, 0.5)"
        )));
    }
    validate_eps_list(eps_list)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let metric = rectangle_metric(profile.clone(), t0, eps, 8)?;
        let params = experiment_params(&metric, t0, eps, t_p_fraction * t0)?;
        let grid = Grid1D::model_default(params.x_max())?;
        let model = solve_model_ode(&assemble_model_ode(&metric, &params, grid)?, k_max)?;
        let q0 = params.delta.powf(2.0 / 3.0) / (eps * eps) * CrossSection::new(&metric).mu1(t0)?;
        let mut offsets = Vec::with_capacity(k_max);
        let mut h1_norms = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            offsets.push((model.eigenvalues[k - 1] - q0 - airy::airy_zero(k)?).abs());
            h1_norms.push(h1_norm(&model, k)?);
        }
        rows.push(ModelOffsetsRow {
            eps,
            delta: params.delta,
            q0,
            lambda: model.eigenvalues.clone(),
            offsets,
            h1_norms,
        });
    }
    Ok(rows)
}
