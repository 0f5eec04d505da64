//! Airy function `Ai`, its negative zeros, and the normalized half-line
//! eigenfunctions built from shifted copies of `Ai`.
//!
//! The operator `-d^2/dx^2 + x` on `(0, inf)` with a Dirichlet condition at
//! the origin has eigenvalues `a_k` (the negated zeros of `Ai`, so
//! `Ai(-a_k) = 0`) and eigenfunctions `v_k(x) = Ai(x - a_k) / N_k`, where
//! `N_k^2 = int_0^inf Ai(x - a_k)^2 dx`.  These modes are the limit shapes of
//! the thin-domain eigenfunctions elsewhere in the crate, and the integral
//! `int_0^inf x (v_2^2 - v_1^2) dx = (2/3)(a_2 - a_1)` is the limiting value
//! of the rescaled gap derivative.
//!
//! Evaluation strategy for `Ai(x)`:
//!
//! * `|x| <= 8`: Maclaurin series `Ai(x) = Ai(0) f(x) + Ai'(0) g(x)` with
//!   `f = sum 3^k (1/3)_k x^{3k} / (3k)!` and
//!   `g = sum 3^k (2/3)_k x^{3k+1} / (3k+1)!`.  Near `x = 8` the two halves
//!   cancel to 14 decimal digits (`f`, `g` grow like `e^{ζ}` while `Ai`
//!   decays like `e^{-ζ}`, `ζ = (2/3) x^{3/2}`), so the terms and the sum are
//!   carried in double-double arithmetic; plain f64 would lose the result
//!   entirely.
//! * `x >= 8`: the decaying asymptotic expansion
//!   `Ai(x) ~ e^{-ζ} / (2 sqrt(pi) x^{1/4}) * sum (-1)^k u_k ζ^{-k}`,
//!   truncated at the smallest term.  At the switch point the optimal
//!   truncation error is about `e^{-2ζ(8)} ~ 8e-14`.
//! * `x <= -8`: the oscillatory expansion (DLMF 9.7.9)
//!   `Ai(-z) = (cos(ζ - pi/4) P(ζ) + sin(ζ - pi/4) Q(ζ)) / (sqrt(pi) z^{1/4})`.
//!
//! Relative error is at most `1e-10` for `|x| <= 50` (on the negative axis,
//! relative to the oscillation envelope `|x|^{-1/4} / sqrt(pi)`; exactly at a
//! zero the absolute error is what is bounded).

use crate::error::{Error, Result};

/// Largest zero index supported by [`airy_zero`].
pub const MAX_ZERO_INDEX: usize = 10;

const SERIES_SWITCH: f64 = 8.0;

// Ai(0) and Ai'(0) split into double-double legs; the low legs matter because
// after the 14-digit cancellation at x near 8 an f64-rounded constant alone
// would leave an error of order 1e-7 in the result.
const AI0_HI: f64 = 0.3550280538878172;
const AI0_LO: f64 = 2.05233632436212e-17;
const AIP0_HI: f64 = -0.2588194037928068;
const AIP0_LO: f64 = 2.522243111610832e-17;

/// Double-double value: `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

impl Dd {
    #[inline]
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = ((self.hi - p) - e + self.lo) / d;
        let (hi, lo) = two_sum(q1, r);
        Dd { hi, lo }
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// The Airy function `Ai(x)`.
pub fn ai(x: f64) -> f64 {
    assert!(x.is_finite(), "ai: non-finite argument");
    if x.abs() <= SERIES_SWITCH {
        ai_series(x)
    } else if x > 0.0 {
        ai_asymptotic_positive(x)
    } else {
        ai_asymptotic_negative(x)
    }
}

fn ai_series(x: f64) -> f64 {
    // x^3 in double-double; the series recurrences multiply by it repeatedly
    // and an f64-rounded cube would cap the attainable accuracy at ~1e-16
    // relative to the large partial sums, which is not enough after
    // cancellation.
    let (x2_hi, x2_lo) = two_prod(x, x);
    let x3 = Dd {
        hi: x2_hi,
        lo: x2_lo,
    }
    .mul(Dd::from(x));

    let mut term_f = Dd::from(1.0);
    let mut term_g = Dd::from(x);
    let mut sum = Dd {
        hi: AI0_HI,
        lo: AI0_LO,
    }
    .mul(term_f)
    .add(
        Dd {
            hi: AIP0_HI,
            lo: AIP0_LO,
        }
        .mul(term_g),
    );

    for k in 0..80u32 {
        let k = f64::from(k);
        term_f = term_f.mul(x3).div_f64((3.0 * k + 2.0) * (3.0 * k + 3.0));
        term_g = term_g.mul(x3).div_f64((3.0 * k + 3.0) * (3.0 * k + 4.0));
        let incr = Dd {
            hi: AI0_HI,
            lo: AI0_LO,
        }
        .mul(term_f)
        .add(
            Dd {
                hi: AIP0_HI,
                lo: AIP0_LO,
            }
            .mul(term_g),
        );
        sum = sum.add(incr);
        if incr.hi.abs() < 1e-40 + 1e-25 * sum.hi.abs() {
            break;
        }
    }
    sum.to_f64()
}

/// Terms of the asymptotic series: u_0 = 1,
/// u_{k+1} = u_k (3k + 5/2)(3k + 3/2)(3k + 1/2) / (54 (k+1)(k + 1/2)).
#[inline]
fn u_next(u: f64, k: f64) -> f64 {
    u * ((3.0 * k + 2.5) * (3.0 * k + 1.5) * (3.0 * k + 0.5)) / (54.0 * (k + 1.0) * (k + 0.5))
}

fn ai_asymptotic_positive(x: f64) -> f64 {
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let mut sum = 1.0;
    let mut u = 1.0;
    let mut sign = -1.0;
    let mut prev = 1.0;
    for k in 0..120 {
        u = u_next(u, f64::from(k));
        let term = u / zeta.powi(k + 1);
        if term > prev {
            break; // past the smallest term; stop before divergence
        }
        sum += sign * term;
        prev = term;
        sign = -sign;
        if term < 1e-18 * sum.abs() {
            break;
        }
    }
    let pref = (-zeta).exp() / (2.0 * std::f64::consts::PI.sqrt() * x.powf(0.25));
    pref * sum
}

fn ai_asymptotic_negative(x: f64) -> f64 {
    let z = -x;
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    // P collects even-index u terms, Q odd-index ones, alternating signs.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut u = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..240 {
        u = u_next(u, f64::from(k - 1));
        let term = u / zeta.powi(k);
        if term > prev {
            break;
        }
        prev = term;
        // sign pattern: +, +, -, -, +, +, ... on successive k
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        if term < 1e-18 {
            break;
        }
    }
    let phase = zeta - std::f64::consts::FRAC_PI_4;
    (phase.cos() * p + phase.sin() * q) / (std::f64::consts::PI.sqrt() * z.powf(0.25))
}

/// The k-th negative zero `a_k` of `Ai` (so `Ai(-a_k) = 0`), `1 <= k <= 10`.
///
/// Brackets sign changes of `t -> Ai(-t)` by a 0.25-step scan of `(0, 13.5)`
/// and bisects each bracket to width `1e-13`.  The step must stay below the
/// zero spacing, which has dropped to 0.89 by `a_10 = 12.83`.
pub fn airy_zero(k: usize) -> Result<f64> {
    if k == 0 || k > MAX_ZERO_INDEX {
        return Err(Error::domain(format!(
            "airy_zero: index {k} outside 1..={MAX_ZERO_INDEX}"
        )));
    }
    let step = 0.25;
    let n_steps = 54; // covers (0, 13.5]
    let mut found = 0usize;
    let mut lo = 0.0;
    let mut f_lo = ai(-lo);
    for j in 1..=n_steps {
        let hi = step * j as f64;
        let f_hi = ai(-hi);
        if f_lo == 0.0 {
            found += 1;
            if found == k {
                return Ok(lo);
            }
        } else if f_lo * f_hi < 0.0 {
            found += 1;
            if found == k {
                return Ok(bisect_zero(lo, hi, f_lo));
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::numerical(format!(
        "airy_zero: bracket scan found only {found} zeros, wanted {k}"
    )))
}

fn bisect_zero(mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let sign_lo = f_lo.signum();
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let f_mid = ai(-mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper limit of the quadrature interval for the half-line integrals; the
/// integrands carry factors `Ai(x - a_k)^2` with `a_k < 13`, which at `x = 40`
/// are below `1e-80`.
const QUAD_UPPER: f64 = 40.0;
const QUAD_INTERVALS: usize = 8000;

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(
        n >= 2 && n.is_multiple_of(2),
        "simpson: interval count must be even"
    );
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

/// A normalized Dirichlet eigenfunction of `-d^2/dx^2 + x` on the half-line:
/// `v_k(x) = Ai(x - a_k) / N_k` with eigenvalue `a_k`.
#[derive(Clone, Debug)]
pub struct AiryMode {
    pub k: usize,
    /// Eigenvalue `a_k`.
    pub zero: f64,
    /// `N_k = ||Ai(. - a_k)||_{L^2(0, inf)}`.
    pub norm: f64,
}

impl AiryMode {
    pub fn eval(&self, x: f64) -> f64 {
        ai(x - self.zero) / self.norm
    }
}

/// Builds the k-th normalized half-line eigenfunction.  The norm is a
/// composite-Simpson integral of `Ai(x - a_k)^2` over `(0, 40)`.
pub fn airy_eigenfunction(k: usize) -> Result<AiryMode> {
    let zero = airy_zero(k)?;
    let norm_sq = simpson(|x| ai(x - zero).powi(2), 0.0, QUAD_UPPER, QUAD_INTERVALS);
    Ok(AiryMode {
        k,
        zero,
        norm: norm_sq.sqrt(),
    })
}

/// The limiting gap-derivative integral `int_0^inf x (v_2^2 - v_1^2) dx`,
/// computed by quadrature.  Equals `(2/3)(a_2 - a_1)` exactly; the closed
/// form is kept out of this routine so the two can be checked against each
/// other.
pub fn model_integral() -> Result<f64> {
    let v1 = airy_eigenfunction(1)?;
    let v2 = airy_eigenfunction(2)?;
    Ok(simpson(
        |x| x * (v2.eval(x).powi(2) - v1.eval(x).powi(2)),
        0.0,
        QUAD_UPPER,
        QUAD_INTERVALS,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values to 16+ digits from 40-digit arithmetic (DLMF 9.2).
    const AI_REFERENCE: &[(f64, f64)] = &[
        (-50.0, -0.1618814236123209239),
        (-25.0, 0.1635265788304294695),
        (-12.5, -0.2762745613811602482),
        (-8.0, -0.05270505035638620262),
        (-5.0, 0.3507610090241143198),
        (-2.0, 0.2274074282016855760),
        (-0.5, 0.4757280916105395888),
        (0.0, 0.3550280538878172393),
        (0.5, 0.2316936064808334898),
        (1.0, 0.1352924163128814155),
        (2.0, 0.03492413042327437914),
        (5.0, 1.083444281360744173e-4),
        (8.0, 4.692207616099231626e-8),
        (12.5, 2.396827826078049936e-14),
        (25.0, 8.116026824691386684e-38),
        (50.0, 4.584941724074828478e-104),
    ];

    // First ten negative zeros of Ai (DLMF 9.9).
    const ZEROS: [f64; 10] = [
        2.338107410459767038,
        4.087949444130970617,
        5.520559828095551059,
        6.786708090071758999,
        7.944133587120853123,
        9.022650853340980380,
        10.040174341558085931,
        11.008524303733262893,
        11.936015563236262517,
        12.828776752865757200,
    ];

    #[test]
    fn ai_matches_reference_values() {
        for &(x, want) in AI_REFERENCE {
            let got = ai(x);
            let rel = ((got - want) / want).abs();
            assert!(
                rel <= 1e-10,
                "ai({x}) = {got:e}, want {want:e}, rel err {rel:e}"
            );
        }
    }

    #[test]
    fn ai_region_switches_are_continuous() {
        for &x in &[8.0f64, -8.0] {
            let inside = ai(x - 1e-9 * x.signum());
            let outside = ai(x + 1e-9 * x.signum());
            let scale = inside.abs().max(1e-12);
            assert!(
                ((inside - outside) / scale).abs() < 1e-6,
                "ai jumps across |x|=8 switch at {x}: {inside:e} vs {outside:e}"
            );
        }
    }

    #[test]
    fn ai_satisfies_airy_ode() {
        // Second central difference vs x * Ai(x); h small enough for the
        // O(h^2) truncation yet large enough to dominate rounding.
        let h = 1e-4;
        for &x in &[-10.0, -5.0, -2.0, -0.7, 0.5, 1.0, 2.0, 4.0, 9.0] {
            let dd = (ai(x + h) - 2.0 * ai(x) + ai(x - h)) / (h * h);
            let want = x * ai(x);
            let rel = ((dd - want) / want).abs();
            assert!(
                rel < 1e-5,
                "ODE residual at x={x}: D2 = {dd:e}, x*Ai = {want:e}"
            );
        }
    }

    #[test]
    fn zeros_match_frozen_values() {
        for (i, &want) in ZEROS.iter().enumerate() {
            let got = airy_zero(i + 1).unwrap();
            assert!(
                (got - want).abs() < 1e-10,
                "a_{} = {got}, want {want}",
                i + 1
            );
            assert!(
                ai(-got).abs() <= 1e-10,
                "Ai(-a_{}) = {:e}, not a zero",
                i + 1,
                ai(-got)
            );
        }
    }

    #[test]
    fn zero_index_range_is_enforced() {
        assert!(airy_zero(0).is_err());
        assert!(airy_zero(11).is_err());
    }

    #[test]
    fn eigenfunction_norms_match_derivative_identity() {
        // For a Dirichlet eigenfunction built from Ai, the half-line norm has
        // the closed form N_k^2 = Ai'(-a_k)^2; values from 40-digit
        // arithmetic.  This checks the quadrature path independently.
        let want = [0.4916966179006288499, 0.6449878720689115501];
        for k in 1..=2 {
            let mode = airy_eigenfunction(k).unwrap();
            let got = mode.norm * mode.norm;
            assert!(
                (got - want[k - 1]).abs() < 1e-6,
                "N_{k}^2 = {got}, want {}",
                want[k - 1]
            );
        }
    }

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let v1 = airy_eigenfunction(1).unwrap();
        let v2 = airy_eigenfunction(2).unwrap();
        let dot = |a: &AiryMode, b: &AiryMode| {
            simpson(|x| a.eval(x) * b.eval(x), 0.0, QUAD_UPPER, QUAD_INTERVALS)
        };
        assert!((dot(&v1, &v1) - 1.0).abs() < 1e-6);
        assert!((dot(&v2, &v2) - 1.0).abs() < 1e-6);
        assert!(dot(&v1, &v2).abs() < 1e-6);
    }

    #[test]
    fn model_integral_matches_closed_form() {
        let got = model_integral().unwrap();
        let a1 = airy_zero(1).unwrap();
        let a2 = airy_zero(2).unwrap();
        let closed = 2.0 / 3.0 * (a2 - a1);
        assert!(
            (got - closed).abs() < 1e-6,
            "quadrature {got} vs closed form {closed}"
        );
        assert!((got - 1.166561355780802).abs() < 1e-6);
    }
}
