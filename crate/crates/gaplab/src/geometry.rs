//! Fermi-coordinate metrics on negatively curved surfaces.
//!
//! A surface metric in Fermi coordinates around a unit-speed geodesic reads
//! `g = dt^2 + J(s, t)^2 ds^2`, where `t` is the signed distance to the
//! geodesic `{t = 0}` and `J` solves the Jacobi equation along each normal
//! line:
//!
//! ```text
//! d^2 J / dt^2 = -K(s, t) J,    J(s, 0) = 1,    dJ/dt (s, 0) = 0.
//! ```
//!
//! With `K <= -k_floor < 0` the field `J` is strictly convex in `t`, which
//! makes the coordinate rectangles used elsewhere convex domains: their top
//! and bottom edges are curves of positive inward geodesic curvature
//! `dJ/dt / J`, and their sides are geodesics (weakly convex).
//!
//! The Jacobi equation is integrated per `s`-column by classical RK4 from
//! `t = 0` in both directions on a uniform `t`-grid; evaluation between
//! nodes is cubic Hermite interpolation fed by the stored values and
//! derivatives (for `dJ/dt`, the second derivative comes from the ODE
//! itself), so interpolation keeps the O(h^4) accuracy of the integrator.

use serde::Serialize;

use crate::error::{Error, Result};

/// Curvature profile `K(s, t) = -(c00 + c20 s^2 + c02 t^2 + c22 s^2 t^2)`
/// with `c00 > 0` and the other coefficients non-negative, so that
/// `K <= -c00 < 0` everywhere.
#[derive(Clone, Debug)]
pub struct CurvatureProfile {
    pub name: String,
    coeffs: [f64; 4],
    /// `K <= -k_floor` everywhere.
    pub k_floor: f64,
}

impl CurvatureProfile {
    /// G1: constant curvature `K = -1` (hyperbolic plane).
    pub fn g1() -> Self {
        Self::custom("G1", 1.0, 0.0, 0.0, 0.0).unwrap()
    }

    /// G2: `K = -1 - 0.2 t^2`, varying across but not along the geodesic.
    pub fn g2() -> Self {
        Self::custom("G2", 1.0, 0.0, 0.2, 0.0).unwrap()
    }

    /// G3: `K = -(1 + 0.5 s^2)(1 + 0.2 t^2)`, varying in both coordinates.
    pub fn g3() -> Self {
        Self::custom("G3", 1.0, 0.5, 0.2, 0.1).unwrap()
    }

    pub fn custom(name: &str, c00: f64, c20: f64, c02: f64, c22: f64) -> Result<Self> {
        if !(c00 > 0.0) || c20 < 0.0 || c02 < 0.0 || c22 < 0.0 {
            return Err(Error::domain(format!(
                "curvature profile {name}: need c00 > 0 and c20, c02, c22 >= 0 \
                 (got {c00}, {c20}, {c02}, {c22})"
            )));
        }
        Ok(CurvatureProfile {
            name: name.to_string(),
            coeffs: [c00, c20, c02, c22],
            k_floor: c00,
        })
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "G1" => Ok(Self::g1()),
            "G2" => Ok(Self::g2()),
            "G3" => Ok(Self::g3()),
            other => Err(Error::config(format!(
                "unknown geometry {other:?}; expected G1, G2, or G3"
            ))),
        }
    }

    pub fn k(&self, s: f64, t: f64) -> f64 {
        let [c00, c20, c02, c22] = self.coeffs;
        -(c00 + c20 * s * s + c02 * t * t + c22 * s * s * t * t)
    }

    /// Whether the curvature ignores the arclength, making the metric a
    /// product and the full operator algebraically separable.
    pub fn s_independent(&self) -> bool {
        self.coeffs[1] == 0.0 && self.coeffs[3] == 0.0
    }
}

/// Gridded Jacobi field of a curvature profile: `J` and `dJ/dt` on a uniform
/// `s`-grid times a uniform `t`-grid containing `t = 0`.
#[derive(Clone, Debug)]
pub struct FermiMetric {
    pub profile: CurvatureProfile,
    pub s_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    h_t: f64,
    jac: Vec<Vec<f64>>,
    djac: Vec<Vec<f64>>,
}

impl FermiMetric {
    /// Integrates the Jacobi field for every column of a symmetric `s`-grid
    /// with `n_s` nodes on `[-s_max, s_max]` (`n_s` odd so `s = 0` is a
    /// node), over `t` in `[t_min - h_t, t_max + h_t]`.
    pub fn build(
        profile: CurvatureProfile,
        s_max: f64,
        n_s: usize,
        t_min: f64,
        t_max: f64,
        h_t: f64,
    ) -> Result<Self> {
        if n_s == 0 || (n_s > 1 && n_s.is_multiple_of(2)) {
            return Err(Error::domain(format!(
                "metric build: n_s = {n_s} must be odd so the s-grid contains 0"
            )));
        }
        if n_s > 1 && !(s_max > 0.0) {
            return Err(Error::domain("metric build: s_max must be positive"));
        }
        if !(t_min < 0.0 && t_max > 0.0 && h_t > 0.0) {
            return Err(Error::domain(format!(
                "metric build: need t_min < 0 < t_max and h_t > 0 \
                 (got {t_min}, {t_max}, {h_t})"
            )));
        }
        let s_grid: Vec<f64> = if n_s == 1 {
            vec![0.0]
        } else {
            let h_s = 2.0 * s_max / (n_s - 1) as f64;
            (0..n_s).map(|i| -s_max + h_s * i as f64).collect()
        };
        let n_down = ((-t_min) / h_t).ceil() as usize + 1;
        let n_up = (t_max / h_t).ceil() as usize + 1;
        let t_grid: Vec<f64> = (0..=(n_down + n_up))
            .map(|i| (i as f64 - n_down as f64) * h_t)
            .collect();

        let mut jac = Vec::with_capacity(s_grid.len());
        let mut djac = Vec::with_capacity(s_grid.len());
        for &s in &s_grid {
            let (col_j, col_dj) = integrate_column(&profile, s, n_down, n_up, h_t);
            jac.push(col_j);
            djac.push(col_dj);
        }
        Ok(FermiMetric {
            profile,
            s_grid,
            t_grid,
            h_t,
            jac,
            djac,
        })
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t_grid[0], *self.t_grid.last().unwrap())
    }

    pub fn t_step(&self) -> f64 {
        self.h_t
    }

    /// Index of the `s`-grid node matching `s`; evaluation is only supported
    /// on grid columns, so an off-grid `s` is an error, not an interpolation.
    pub fn s_index(&self, s: f64) -> Result<usize> {
        if self.s_grid.len() == 1 {
            return if s.abs() < 1e-9 {
                Ok(0)
            } else {
                Err(Error::domain(format!(
                    "metric has only the s = 0 column, got s = {s}"
                )))
            };
        }
        let h_s = self.s_grid[1] - self.s_grid[0];
        let idx = ((s - self.s_grid[0]) / h_s).round();
        if idx < 0.0 || idx >= self.s_grid.len() as f64 {
            return Err(Error::domain(format!("s = {s} outside metric s-grid")));
        }
        let i = idx as usize;
        if (self.s_grid[i] - s).abs() > 1e-9 * (1.0 + s.abs()) {
            return Err(Error::domain(format!(
                "s = {s} not on the metric s-grid (nearest node {})",
                self.s_grid[i]
            )));
        }
        Ok(i)
    }

    fn bracket_t(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.t_range();
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(Error::domain(format!(
                "t = {t} outside metric t-grid [{lo}, {hi}]"
            )));
        }
        let pos = (t - lo) / self.h_t;
        let mut i = pos.floor() as isize;
        if i < 0 {
            i = 0;
        }
        let max = self.t_grid.len() as isize - 2;
        if i > max {
            i = max;
        }
        let i = i as usize;
        let frac = (t - self.t_grid[i]) / self.h_t;
        Ok((i, frac))
    }

    /// `J(s, t)`; `s` must be a grid column, `t` anywhere in range.
    pub fn jac(&self, s: f64, t: f64) -> Result<f64> {
        let si = self.s_index(s)?;
        self.jac_col(si, t)
    }

    pub fn jac_col(&self, si: usize, t: f64) -> Result<f64> {
        let (i, u) = self.bracket_t(t)?;
        if u.abs() < 1e-13 {
            return Ok(self.jac[si][i]);
        }
        Ok(hermite(
            u,
            self.h_t,
            self.jac[si][i],
            self.jac[si][i + 1],
            self.djac[si][i],
            self.djac[si][i + 1],
        ))
    }

    /// `dJ/dt (s, t)`; Hermite on the stored derivative, with the curvature
    /// equation supplying the second derivative at the nodes.
    pub fn djac_dt(&self, s: f64, t: f64) -> Result<f64> {
        let si = self.s_index(s)?;
        let (i, u) = self.bracket_t(t)?;
        if u.abs() < 1e-13 {
            return Ok(self.djac[si][i]);
        }
        let sv = self.s_grid[si];
        let dd0 = -self.profile.k(sv, self.t_grid[i]) * self.jac[si][i];
        let dd1 = -self.profile.k(sv, self.t_grid[i + 1]) * self.jac[si][i + 1];
        Ok(hermite(
            u,
            self.h_t,
            self.djac[si][i],
            self.djac[si][i + 1],
            dd0,
            dd1,
        ))
    }

    /// Center-column shorthand `J(0, t)`.
    pub fn jac0(&self, t: f64) -> Result<f64> {
        let si = self.s_index(0.0)?;
        self.jac_col(si, t)
    }

    pub fn djac0_dt(&self, t: f64) -> Result<f64> {
        self.djac_dt(0.0, t)
    }

    /// Step-halved rebuild for convergence checks.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let s_max = self.s_grid.last().copied().unwrap_or(0.0);
        let (t_min, t_max) = self.t_range();
        FermiMetric::build(
            self.profile.clone(),
            s_max,
            self.s_grid.len(),
            t_min + self.h_t,
            t_max - self.h_t,
            self.h_t / factor as f64,
        )
    }
}

/// Cubic Hermite on one interval; `u` is the fractional position in [0, 1].
fn hermite(u: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

fn integrate_column(
    profile: &CurvatureProfile,
    s: f64,
    n_down: usize,
    n_up: usize,
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = n_down + n_up + 1;
    let mut j = vec![0.0; n];
    let mut dj = vec![0.0; n];
    j[n_down] = 1.0;
    dj[n_down] = 0.0;
    let mut state = (1.0, 0.0);
    for i in 0..n_up {
        let t = h * i as f64;
        state = rk4_step(profile, s, t, state, h);
        j[n_down + i + 1] = state.0;
        dj[n_down + i + 1] = state.1;
    }
    state = (1.0, 0.0);
    for i in 0..n_down {
        let t = -h * i as f64;
        state = rk4_step(profile, s, t, state, -h);
        j[n_down - i - 1] = state.0;
        dj[n_down - i - 1] = state.1;
    }
    (j, dj)
}

#[inline]
fn rk4_step(profile: &CurvatureProfile, s: f64, t: f64, y: (f64, f64), h: f64) -> (f64, f64) {
    let f = |t: f64, y: (f64, f64)| (y.1, -profile.k(s, t) * y.0);
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, (y.0 + 0.5 * h * k1.0, y.1 + 0.5 * h * k1.1));
    let k3 = f(t + 0.5 * h, (y.0 + 0.5 * h * k2.0, y.1 + 0.5 * h * k2.1));
    let k4 = f(t + h, (y.0 + h * k3.0, y.1 + h * k3.1));
    (
        y.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Geometric data of one thin-domain experiment: the coordinate rectangle
/// `(-tau0, t0) x (-eps, eps)`, the potential corner `t_p`, and the layer
/// width parameter `delta = eps^2 / (-mu_1'(t0))`.
#[derive(Clone, Copy, Debug)]
pub struct DomainParams {
    pub t0: f64,
    pub tau0: f64,
    pub eps: f64,
    pub t_p: f64,
    pub delta: f64,
}

impl DomainParams {
    /// Validates the parameter ranges; in particular the potential corner
    /// must sit in `(t0/4, t0/2)` so the potential vanishes on the whole
    /// lower part of the domain yet its support stays away from the top.
    pub fn new(t0: f64, tau0: f64, eps: f64, t_p: f64, delta: f64) -> Result<Self> {
        if !(t0 > 0.0) {
            return Err(Error::domain(format!("t0 = {t0} must be positive")));
        }
        if !(tau0 > 0.0) {
            return Err(Error::domain(format!("tau0 = {tau0} must be positive")));
        }
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(Error::domain(format!("eps = {eps} outside (0, 0.5]")));
        }
        if !(t_p > t0 / 4.0 && t_p < t0 / 2.0) {
            return Err(Error::domain(format!(
                "t_p = {t_p} outside (t0/4, t0/2) = ({}, {})",
                t0 / 4.0,
                t0 / 2.0
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::domain(format!("delta = {delta} must be positive")));
        }
        Ok(DomainParams {
            t0,
            tau0,
            eps,
            t_p,
            delta,
        })
    }

    /// Height of the rescaled domain, `delta^{-1/3} (t0 + tau0)`.
    pub fn x_max(&self) -> f64 {
        (self.t0 + self.tau0) / self.delta.cbrt()
    }

    /// Lower bound on the domain diameter (the length of the `s = 0` section).
    pub fn diameter_floor(&self) -> f64 {
        self.t0 + self.tau0
    }
}

/// How the straight side edges `s = +-eps` are treated in the convexity
/// certification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SideCurveStatus {
    /// The sides are geodesics: weakly convex, carried as a flag rather than
    /// a certified positive margin.
    GeodesicWeaklyConvex,
}

/// Margins of the boundary-convexity certification.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    /// `min_{|s| <= eps} dJ/dt / J` at `t = t0` (top edge, inward curvature).
    pub top_margin: f64,
    /// `min_{|s| <= eps} -dJ/dt / J` at `t = -tau0` (bottom edge).
    pub bottom_margin: f64,
    pub side_status: SideCurveStatus,
    pub pass: bool,
}

/// Certifies that the coordinate rectangle `(-tau0, t0) x (-eps, eps)` has
/// convex boundary: positive inward curvature on top and bottom, geodesic
/// sides flagged as weakly convex.
pub fn convexity_report(
    metric: &FermiMetric,
    t0: f64,
    tau0: f64,
    eps: f64,
) -> Result<ConvexityReport> {
    let mut top = f64::INFINITY;
    let mut bottom = f64::INFINITY;
    let mut seen = 0;
    for &s in &metric.s_grid {
        if s.abs() > eps + 1e-12 {
            continue;
        }
        seen += 1;
        top = top.min(metric.djac_dt(s, t0)? / metric.jac(s, t0)?);
        bottom = bottom.min(-metric.djac_dt(s, -tau0)? / metric.jac(s, -tau0)?);
    }
    if seen == 0 {
        return Err(Error::domain(
            "convexity_report: no metric s-columns inside |s| <= eps",
        ));
    }
    Ok(ConvexityReport {
        top_margin: top,
        bottom_margin: bottom,
        side_status: SideCurveStatus::GeodesicWeaklyConvex,
        pass: top > 0.0 && bottom > 0.0,
    })
}

/// The cubic hinge potential: `P(t) = 0` for `t <= t_p`, `(t - t_p)^3`
/// beyond.  C^2 across the corner; defined on `[-tau0, t0]` only.
pub fn potential(t: f64, params: &DomainParams) -> Result<f64> {
    if t < -params.tau0 - 1e-9 || t > params.t0 + 1e-9 {
        return Err(Error::domain(format!(
            "potential: t = {t} outside [{}, {}]",
            -params.tau0, params.t0
        )));
    }
    let d = t - params.t_p;
    Ok(if d <= 0.0 { 0.0 } else { d * d * d })
}

/// `dP/dt`, needed by the gap-derivative normalizations.
pub fn potential_prime(t: f64, params: &DomainParams) -> Result<f64> {
    if t < -params.tau0 - 1e-9 || t > params.t0 + 1e-9 {
        return Err(Error::domain(format!(
            "potential_prime: t = {t} outside [{}, {}]",
            -params.tau0, params.t0
        )));
    }
    let d = t - params.t_p;
    Ok(if d <= 0.0 { 0.0 } else { 3.0 * d * d })
}

/// Margins of the potential-convexity certification: `P'' >= 0` and the
/// alignment `(dJ/dt / J) P' >= 0` across the domain (the latter is the
/// Hessian condition for a function of the distance coordinate alone).
#[derive(Clone, Debug, Serialize)]
pub struct PotentialConvexityReport {
    pub min_second_derivative: f64,
    pub min_alignment: f64,
    pub pass: bool,
}

pub fn potential_convexity_report(
    metric: &FermiMetric,
    params: &DomainParams,
) -> Result<PotentialConvexityReport> {
    let mut min_dd = f64::INFINITY;
    let mut min_align = f64::INFINITY;
    let n_t = 400;
    for i in 0..=n_t {
        let t = -params.tau0 + (params.t0 + params.tau0) * i as f64 / n_t as f64;
        let d = t - params.t_p;
        let pdd = if d <= 0.0 { 0.0 } else { 6.0 * d };
        let pd = if d <= 0.0 { 0.0 } else { 3.0 * d * d };
        min_dd = min_dd.min(pdd);
        for &s in &metric.s_grid {
            if s.abs() > params.eps + 1e-12 {
                continue;
            }
            let align = metric.djac_dt(s, t)? / metric.jac(s, t)? * pd;
            min_align = min_align.min(align);
        }
    }
    Ok(PotentialConvexityReport {
        min_second_derivative: min_dd,
        min_alignment: min_align,
        pass: min_dd >= 0.0 && min_align >= -1e-14,
    })
}
