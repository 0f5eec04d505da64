//! Frozen tolerance bands for the certification suite.
//!
//! Every calibrated band lives in `tolerances.json`, embedded at compile
//! time and versioned with the repository.  Bands were measured once at
//! reference resolution and frozen with headroom; they are not rescaled
//! per run, so a regression that moves a quantity past its recorded
//! headroom fails loudly.
//!
//! Band conventions: `*_abs` entries are absolute deviations; `*_delta13`
//! and `*_delta16` entries multiply `delta^{1/3}` and `delta^{1/6}` of the
//! row they apply to; `*_per_eps2` multiplies `eps^2`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOLERANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub schema_version: u32,
    pub airy: AiryBands,
    pub separation: SeparationBands,
    pub model_ode: ModelOdeBands,
    pub pde: PdeBands,
    pub gap: GapBands,
    pub certificates: CertificateBands,
}

/// Closed-form oracles; no calibration involved.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AiryBands {
    pub zero_abs: f64,
    pub model_integral_abs: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationBands {
    /// Max deviation between the full and separable coefficient arrays on
    /// a geometry whose curvature does not depend on the arclength, where
    /// the two assemblies are algebraically identical.
    pub coefficient_identity_abs: f64,
    /// Rectangle eigenvalues against the one-dimensional model problem at
    /// reference resolution.
    pub sep_vs_ode_abs: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOdeBands {
    /// Window for the fitted log-log slope of the Airy offsets against
    /// the depth parameter.
    pub slope_window: [f64; 2],
    pub offset_k1_delta13: f64,
    pub offset_k2_delta13: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PdeBands {
    /// `|lambda_2 - lambda_1 - (a_2 - a_1)|` against `delta^{1/6}`.
    pub gap_band_delta16: f64,
    /// Both leading rescaled gaps stay above this.
    pub leading_gap_floor: f64,
    /// Slice-energy log-slope ceiling beyond the classically forbidden
    /// threshold (energies decay at least this fast).
    pub decay_slope_max: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GapBands {
    /// `|delta^{-1/3} I_eps / P'(t0) + (2/3)(a_2 - a_1)|` at the smallest
    /// swept width.
    pub rescaled_integral_band: f64,
    /// Relative band for the extrapolated finite-difference derivative of
    /// the gap against the gap integral.
    pub hf_rel_band: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateBands {
    /// Slice-projection Gram defect against `delta^{1/3}`.
    pub gram_delta13: f64,
    /// Measured operator compatibility against `eps^2`.
    pub eps_comp_per_eps2: f64,
}

fn parse_embedded() -> Result<Tolerances> {
    let t: Tolerances = serde_json::from_str(include_str!("../tolerances.json"))
        .map_err(|e| Error::config(format!("tolerances.json: {e}")))?;
    if t.schema_version != TOLERANCE_SCHEMA_VERSION {
        return Err(Error::config(format!(
            "tolerances.json schema_version {} unsupported (expected {TOLERANCE_SCHEMA_VERSION})",
            t.schema_version
        )));
    }
    Ok(t)
}

/// The embedded, frozen bands.
pub fn tolerances() -> &'static Tolerances {
    static CACHE: OnceLock<Tolerances> = OnceLock::new();
    CACHE.get_or_init(|| parse_embedded().expect("embedded tolerances.json is valid"))
}
