//! Cross-sectional eigendata of the thin domains.
//!
//! At height `t` the cross section of the rescaled domain is the interval
//! `(-1, 1)` in `y = s / eps`, carrying the operator
//! `-g0ss(t) d^2/dy^2` with Dirichlet ends, where `g0ss(t) = J(0,t)^{-2}`
//! is the inverse metric coefficient of the center column.  In dimension
//! two everything is closed-form:
//!
//! ```text
//! mu_1(t)  = (pi/2)^2 / J(0,t)^2,        f_1(y) = cos(pi y / 2),
//! mu_1'(t) = -2 (pi/2)^2 J_t(0,t) / J(0,t)^3,
//! ```
//!
//! with `f_1` L^2-normalized on `(-1, 1)` and independent of `t` (the
//! first eigenfunction of an interval does not feel the interval's length
//! after rescaling).  That independence is a genuine degeneracy of the
//! two-dimensional setting and is exposed as [`CrossSection::f1_depends_on_t`]
//! so downstream bounds involving `d f_1 / dt` can skip the vacuous terms
//! explicitly rather than silently.
//!
//! The derived constants live here too: the bottom depth `tau_0` (largest
//! grid depth whose cross-section eigenvalue still dominates the value at
//! `t_0 / 4`, plus one grid step of margin) and the layer width parameter
//! `delta = eps^2 / (-mu_1'(t_0))`.

use crate::error::{Error, Result};
use crate::geometry::{DomainParams, FermiMetric};
use std::f64::consts::PI;

/// Cross-section eigendata bound to a metric.
#[derive(Clone, Copy, Debug)]
pub struct CrossSection<'a> {
    pub metric: &'a FermiMetric,
}

impl<'a> CrossSection<'a> {
    pub fn new(metric: &'a FermiMetric) -> Self {
        CrossSection { metric }
    }

    /// First Dirichlet eigenvalue `(pi/2)^2 / J(0,t)^2` of the section at
    /// height `t`.
    pub fn mu1(&self, t: f64) -> Result<f64> {
        let j = self.metric.jac0(t)?;
        Ok((PI / 2.0) * (PI / 2.0) / (j * j))
    }

    /// `d mu_1 / dt = -2 (pi/2)^2 J_t(0,t) / J(0,t)^3`.
    pub fn mu1_prime(&self, t: f64) -> Result<f64> {
        let j = self.metric.jac0(t)?;
        let dj = self.metric.djac0_dt(t)?;
        Ok(-2.0 * (PI / 2.0) * (PI / 2.0) * dj / (j * j * j))
    }

    /// Normalized first eigenfunction of the section, `cos(pi y / 2)` on
    /// `[-1, 1]`; zero outside by the Dirichlet condition.
    pub fn f1(&self, y: f64) -> f64 {
        if !(-1.0..=1.0).contains(&y) {
            return 0.0;
        }
        (PI * y / 2.0).cos()
    }

    /// Dimension-2 degeneracy flag: `f_1` does not vary with the height, so
    /// every bound involving `d f_1 / dt` holds with the left side
    /// identically zero.
    pub fn f1_depends_on_t(&self) -> bool {
        false
    }
}

/// Largest grid depth `tau` with `mu_1(-tau) >= mu_1(t_0 / 4)`, plus one
/// grid step of margin.  The scan walks the metric's own `t`-grid; running
/// off its negative end before the threshold is found is a configuration
/// error (the metric was built too shallow).
pub fn choose_tau0(metric: &FermiMetric, t0: f64) -> Result<f64> {
    if !(t0 > 0.0) {
        return Err(Error::domain(format!(
            "choose_tau0: t0 = {t0} must be positive"
        )));
    }
    let section = CrossSection::new(metric);
    let threshold = section.mu1(t0 / 4.0)?;
    let h = metric.t_step();
    let (t_min, _) = metric.t_range();
    let mut last_passing = 0.0;
    let mut i = 1usize;
    loop {
        let tau = h * i as f64;
        if -tau < t_min - 1e-12 {
            return Err(Error::config(format!(
                "choose_tau0: no grid depth below t = {t_min} fails the \
                 threshold; build the metric deeper"
            )));
        }
        if section.mu1(-tau)? >= threshold {
            last_passing = tau;
            i += 1;
        } else {
            break;
        }
    }
    let tau0 = last_passing + h;
    if -tau0 < t_min - 1e-12 {
        return Err(Error::config(format!(
            "choose_tau0: tau0 = {tau0} exceeds the metric depth {}",
            -t_min
        )));
    }
    Ok(tau0)
}

/// Layer width parameter `delta = eps^2 / (-mu_1'(t_0))`.  A non-negative
/// `mu_1'(t_0)` signals a geometry without the required monotone
/// cross-section profile and is rejected.
pub fn delta(metric: &FermiMetric, t0: f64, eps: f64) -> Result<f64> {
    let slope = CrossSection::new(metric).mu1_prime(t0)?;
    if !(slope < 0.0) {
        return Err(Error::domain(format!(
            "delta: mu_1'({t0}) = {slope} is not negative; cross-section \
             eigenvalue must decrease toward the top"
        )));
    }
    Ok(eps * eps / (-slope))
}

/// Assembles the full parameter set of one experiment from the free choices
/// `(t0, eps, t_p)`: picks `tau0` by the grid scan and `delta` from the
/// eigenvalue slope at the top.
pub fn experiment_params(
    metric: &FermiMetric,
    t0: f64,
    eps: f64,
    t_p: f64,
) -> Result<DomainParams> {
    let tau0 = choose_tau0(metric, t0)?;
    let d = delta(metric, t0, eps)?;
    DomainParams::new(t0, tau0, eps, t_p, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurvatureProfile;
    use crate::linalg::SymTridiag;

    fn metric(profile: CurvatureProfile) -> FermiMetric {
        FermiMetric::build(profile, 0.2, 5, -1.3, 1.5, 1e-3).unwrap()
    }

    #[test]
    fn mu1_matches_closed_forms() {
        let m = metric(CurvatureProfile::g1());
        let cs = CrossSection::new(&m);
        assert!((cs.mu1(0.0).unwrap() - (PI / 2.0) * (PI / 2.0)).abs() < 1e-12);
        assert!((cs.mu1(0.0).unwrap() - 2.4674011).abs() < 1e-6);
        let want = (PI / 2.0) * (PI / 2.0) / 1.0f64.cosh().powi(2);
        assert!((cs.mu1(1.0).unwrap() - want).abs() < 1e-10);
        assert!((cs.mu1(1.0).unwrap() - 1.0362446).abs() < 1e-6);
    }

    #[test]
    fn mu1_agrees_with_discrete_interval_eigensolve() {
        // Brute-force check of the closed form: assemble -g0ss(1) d^2/dy^2
        // on 2001 nodes of [-1, 1] and take the lowest Dirichlet eigenvalue.
        let m = metric(CurvatureProfile::g1());
        let cs = CrossSection::new(&m);
        let g = 1.0 / m.jac0(1.0).unwrap().powi(2);
        let n = 2001usize; // interior nodes
        let h = 2.0 / (n + 1) as f64;
        let trid = SymTridiag::new(vec![2.0 * g / (h * h); n], vec![-g / (h * h); n - 1]);
        let low = trid.eigenvalue(1);
        assert!(
            (low - cs.mu1(1.0).unwrap()).abs() < 1e-6,
            "discrete {low} vs closed form {}",
            cs.mu1(1.0).unwrap()
        );
    }

    #[test]
    fn f1_is_normalized_with_dirichlet_trace() {
        let m = metric(CurvatureProfile::g2());
        let cs = CrossSection::new(&m);
        assert!(cs.f1(1.0).abs() < 1e-16);
        assert!(cs.f1(-1.0).abs() < 1e-16);
        assert_eq!(cs.f1(1.5), 0.0);
        // Simpson quadrature of f1^2 over (-1, 1).
        let n = 2000;
        let h = 2.0 / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let y = -1.0 + h * i as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += w * cs.f1(y).powi(2);
        }
        sum *= h / 3.0;
        assert!((sum - 1.0).abs() < 1e-12, "norm^2 = {sum}");
        assert!(!cs.f1_depends_on_t());
    }

    #[test]
    fn mu1_prime_matches_closed_form_and_differences() {
        let m = metric(CurvatureProfile::g1());
        let cs = CrossSection::new(&m);
        assert_eq!(cs.mu1_prime(0.0).unwrap(), 0.0);
        let at_one = cs.mu1_prime(1.0).unwrap();
        assert!((at_one - (-1.5783)).abs() < 1e-3);
        let want = -2.0 * (PI / 2.0) * (PI / 2.0) * 1.0f64.sinh() / 1.0f64.cosh().powi(3);
        assert!((at_one - want).abs() < 1e-10);
        // Centered differences of mu1 at a few heights.
        let fd_step = 1e-4;
        for &t in &[0.3, 0.7, 1.0, 1.2] {
            let fd =
                (cs.mu1(t + fd_step).unwrap() - cs.mu1(t - fd_step).unwrap()) / (2.0 * fd_step);
            assert!(
                (cs.mu1_prime(t).unwrap() - fd).abs() < 1e-6,
                "slope mismatch at t = {t}"
            );
        }
    }

    #[test]
    fn mu1_prime_negative_up_to_t0() {
        let m = metric(CurvatureProfile::g3());
        let cs = CrossSection::new(&m);
        let mut prev = cs.mu1(0.0).unwrap();
        for i in 1..=100 {
            let t = i as f64 / 100.0;
            assert!(cs.mu1_prime(t).unwrap() < 0.0, "mu1' >= 0 at t = {t}");
            let cur = cs.mu1(t).unwrap();
            assert!(cur < prev, "mu1 not decreasing at t = {t}");
            prev = cur;
        }
    }

    #[test]
    fn g2_slope_matches_reference_integration() {
        // 30-digit reference for -2 (pi/2)^2 J'(0,1)/J(0,1)^3 on G2.
        let m = metric(CurvatureProfile::g2());
        let cs = CrossSection::new(&m);
        assert!((cs.mu1_prime(1.0).unwrap() - (-1.63528431655552444)).abs() < 1e-9);
    }

    #[test]
    fn tau0_sits_one_step_past_the_threshold() {
        let m = metric(CurvatureProfile::g1());
        let tau0 = choose_tau0(&m, 1.0).unwrap();
        // Evenness of J makes the exact threshold t0/4; the scan adds one
        // grid step of margin.
        assert!((tau0 - 0.251).abs() < 1e-12, "tau0 = {tau0}");
        let cs = CrossSection::new(&m);
        assert!(cs.mu1(-(tau0 - m.t_step())).unwrap() >= cs.mu1(0.25).unwrap());
        assert!(cs.mu1(-tau0).unwrap() < cs.mu1(0.25).unwrap());
        // G2/G3 share the center column, hence the same scan result.
        let m3 = metric(CurvatureProfile::g3());
        assert!((choose_tau0(&m3, 1.0).unwrap() - 0.251).abs() < 1e-12);
    }

    #[test]
    fn tau0_degenerates_to_one_step_for_tiny_t0() {
        let m = metric(CurvatureProfile::g1());
        let tau0 = choose_tau0(&m, 1e-3).unwrap();
        assert_eq!(tau0, m.t_step());
    }

    #[test]
    fn tau0_needs_a_deep_enough_metric() {
        let shallow = FermiMetric::build(CurvatureProfile::g1(), 0.2, 5, -0.1, 1.5, 1e-3).unwrap();
        assert!(choose_tau0(&shallow, 1.0).is_err());
    }

    #[test]
    fn delta_matches_references_and_scaling() {
        let m = metric(CurvatureProfile::g1());
        let d05 = delta(&m, 1.0, 0.05).unwrap();
        assert!((d05 - 1.5840e-3).abs() < 1e-6);
        let d10 = delta(&m, 1.0, 0.1).unwrap();
        assert!((d10 - 6.336e-3).abs() < 4e-6);
        assert!((d10 / d05 - 4.0).abs() < 1e-12); // scales as eps^2
        assert!((d05.cbrt() - 0.11658).abs() < 2e-5);
        // G2 reference from the 30-digit integration.
        let m2 = metric(CurvatureProfile::g2());
        assert!((delta(&m2, 1.0, 0.05).unwrap() - 1.5287861411560936e-3).abs() < 1e-12);
        assert!((delta(&m2, 1.0, 0.2).unwrap() - 2.4460578258497497e-2).abs() < 1e-10);
    }

    #[test]
    fn delta_rejects_flat_slope() {
        let m = metric(CurvatureProfile::g1());
        assert!(delta(&m, 0.0, 0.05).is_err()); // mu_1'(0) = 0
    }

    #[test]
    fn experiment_params_assembles_the_full_set() {
        let m = metric(CurvatureProfile::g1());
        let p = experiment_params(&m, 1.0, 0.05, 0.3).unwrap();
        assert!((p.tau0 - 0.251).abs() < 1e-12);
        assert!((p.delta - 1.5840e-3).abs() < 1e-6);
        assert!((p.x_max() - 1.251 / p.delta.cbrt()).abs() < 1e-12);
    }
}
