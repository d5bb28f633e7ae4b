//! Berry–Esseen constants for `V` and `S`.
//!
//! The finite-`n` bounds are instances of the generic size-bias bound
//! [`size_bias_ks_bound`]: for `V` with `mu = E V`, `B = phi`; for
//! `W = n - S` with `mu = n - E S`, `B = kappa_d + 1`. In both cases the
//! conditional-variance term is `Delta = sqrt(eta(n, rho) / n)`.

use serde::{Deserialize, Serialize};

use crate::analytic::{self, std_normal_pdf, unit_ball_volume, QuadratureSpec};
use crate::error::{Error, Result};
use crate::geometry::ModelParams;
use crate::moments::MomentSet;

/// Packing constants: the largest number of pairwise disjoint closed unit
/// balls that can all meet a closed unit ball at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KissingConstants {
    pub kappa: u32,
    pub kappa_plus: u32,
}

impl KissingConstants {
    pub fn for_dimension(d: usize) -> Result<Self> {
        let kappa = match d {
            // Two disjoint unit intervals can meet [-1, 1], one on each side; a
            // third would have to overlap one of them.
            1 => 2,
            // Six would have to touch the central disk and each other.
            2 => 5,
            3 => 12,
            _ => return Err(Error::UnsupportedDimension(d)),
        };
        Ok(KissingConstants {
            kappa,
            kappa_plus: kappa + 1,
        })
    }
}

/// Ratio `(2n - c)/(n - c)`, which tends to 2.
fn rational_factor(n: f64, c: f64) -> f64 {
    (2.0 * n - c) / (n - c)
}

/// `eta_V(n, rho)`; `n = None` gives the `n -> infinity` limit.
fn eta_v_at(d: usize, phi: f64, n: Option<f64>) -> f64 {
    let p2 = 2f64.powi(d as i32);
    let p3 = 3f64.powi(d as i32);
    let p4 = 4f64.powi(d as i32);
    let p6 = 6f64.powi(d as i32);
    let ratio_six = n.map_or(2.0, |n| rational_factor(n, p6 * phi));
    let ratio_three_two = n.map_or(2.0, |n| rational_factor(n, 3.0 * p2 * phi));
    let two_over_n = n.map_or(0.0, |n| 2.0 / n);

    let radius_factor = 2.0 * phi * phi * ((p3 + 1.0) * phi + 1.0).powi(2);
    let first_bracket = 1.0 + (p2 + 1.0) * p6 * phi + ratio_six * p6 * p6 * phi * phi;
    let second_bracket = 3.0 * (p4 + p2) * phi + 3.0 * p4 * phi * phi * ratio_three_two + 4.0 + two_over_n;
    radius_factor * first_bracket + 2.0 * phi.powi(4) * second_bracket
}

/// `eta_S(n, rho)`; `n = None` gives the limit.
fn eta_s_at(d: usize, phi: f64, kissing: KissingConstants, n: Option<f64>) -> f64 {
    let p2 = 2f64.powi(d as i32);
    let p3 = 3f64.powi(d as i32);
    let p9 = 9f64.powi(d as i32);
    let kappa = kissing.kappa as f64;
    let kappa_plus = kissing.kappa_plus as f64;
    let c_pair = 2.0 * p2 + 1.0;
    let ratio_three = n.map_or(2.0, |n| rational_factor(n, p3 * phi));
    let ratio_pair = n.map_or(2.0, |n| rational_factor(n, c_pair * phi));
    let end_ratio = n.map_or(4.0, |n| (4.0 * n - 2.0) / (n - 1.0));

    let first = 2.0 * (1.0 + 2.0 * kappa).powi(2) * (1.0 + (p2 + 1.0) * p3 * phi + ratio_three * p9 * phi * phi);
    let second = kappa_plus * kappa_plus / 2.0
        * ((p2 + 2.0 * p3 + 3.0) * phi + c_pair * ratio_pair * phi * phi + end_ratio);
    first + second
}

pub fn eta_v(params: &ModelParams) -> Result<f64> {
    params.require_theorem_v()?;
    Ok(eta_v_at(params.d, params.phi, Some(params.n as f64)))
}

pub fn eta_s(params: &ModelParams) -> Result<f64> {
    let kissing = KissingConstants::for_dimension(params.d)?;
    params.require_theorem_s()?;
    Ok(eta_s_at(params.d, params.phi, kissing, Some(params.n as f64)))
}

pub fn eta_v_limit(rho: f64, d: usize) -> Result<f64> {
    let phi = unit_ball_volume(d)? * rho.powi(d as i32);
    Ok(eta_v_at(d, phi, None))
}

pub fn eta_s_limit(rho: f64, d: usize) -> Result<f64> {
    let kissing = KissingConstants::for_dimension(d)?;
    let phi = unit_ball_volume(d)? * rho.powi(d as i32);
    Ok(eta_s_at(d, phi, kissing, None))
}

/// Kolmogorov-distance bound for a non-negative `Y` with mean `mu`, variance
/// `sigma2`, and a size-biased coupling satisfying `|Y^s - Y| <= b` and
/// `sqrt(Var E[Y^s - Y | Y]) <= delta`:
///
/// `mu / (5 sigma^2) * (sqrt(11 b^2 / sigma + 5 delta) + 2 b / sqrt(sigma))^2`.
pub fn size_bias_ks_bound(mu: f64, sigma2: f64, b: f64, delta: f64) -> Result<f64> {
    if !(mu > 0.0) || !(sigma2 > 0.0) || !(b > 0.0) {
        return Err(Error::domain("size-bias bound needs mu, sigma^2 and B positive"));
    }
    if !(delta >= 0.0) {
        return Err(Error::domain("size-bias bound needs Delta >= 0"));
    }
    let sigma = sigma2.sqrt();
    let root = (11.0 * b * b / sigma + 5.0 * delta).sqrt() + 2.0 * b / sigma.sqrt();
    Ok(mu / (5.0 * sigma2) * root * root)
}

/// Finite-`n` bound on `D_V`.
pub fn theorem_bound_v(params: &ModelParams, moments: &MomentSet) -> Result<f64> {
    params.require_theorem_v()?;
    params.require_variance_formulas()?;
    let eta = eta_v(params)?;
    size_bias_ks_bound(
        moments.mu_v,
        moments.var_v,
        params.phi,
        (eta / params.n as f64).sqrt(),
    )
}

/// Finite-`n` bound on `D_S`, via the size-biased coupling of `W = n - S`.
pub fn theorem_bound_s(params: &ModelParams, moments: &MomentSet) -> Result<f64> {
    let kissing = KissingConstants::for_dimension(params.d)?;
    params.require_theorem_s()?;
    params.require_variance_formulas()?;
    let eta = eta_s(params)?;
    size_bias_ks_bound(
        params.n as f64 - moments.mu_s,
        moments.var_s,
        kissing.kappa_plus as f64,
        (eta / params.n as f64).sqrt(),
    )
}

fn asymptotic(mean_fraction: f64, g: f64, b: f64, eta: f64) -> f64 {
    let root = (11.0 * b * b / g.sqrt() + 5.0 * eta.sqrt()).sqrt() + 2.0 * b / g.powf(0.25);
    mean_fraction / (5.0 * g) * root * root
}

/// `limsup sqrt(n) D_V` bound.
pub fn delta_v(rho: f64, d: usize, spec: &QuadratureSpec) -> Result<f64> {
    let phi = unit_ball_volume(d)? * rho.powi(d as i32);
    let g = analytic::g_v(rho, d, spec)?;
    Ok(asymptotic(-(-phi).exp_m1(), g, phi, eta_v_limit(rho, d)?))
}

/// `limsup sqrt(n) D_S` bound.
pub fn delta_s(rho: f64, d: usize, spec: &QuadratureSpec) -> Result<f64> {
    let kissing = KissingConstants::for_dimension(d)?;
    let phi = unit_ball_volume(d)? * rho.powi(d as i32);
    let g = analytic::g_s(rho, d, spec)?;
    Ok(asymptotic(
        -(-phi).exp_m1(),
        g,
        kissing.kappa_plus as f64,
        eta_s_limit(rho, d)?,
    ))
}

/// `liminf sqrt(n) D_S >= (8 pi g_S(rho))^{-1/2}`.
pub fn lower_bound_s(rho: f64, d: usize, spec: &QuadratureSpec) -> Result<f64> {
    let g = analytic::g_s(rho, d, spec)?;
    Ok(1.0 / (8.0 * std::f64::consts::PI * g).sqrt())
}

/// `(1/2) sigma_S^{-1} f_Z(sigma_S^{-1})`: the integer lattice of `S` forces a
/// Kolmogorov gap at least this large (slack factor `1 - eps` taken to 1).
pub fn finite_n_lower_bound_s(params: &ModelParams, moments: &MomentSet) -> Result<f64> {
    params.require_variance_formulas()?;
    Ok(lattice_gap_bound(moments.sd_s()))
}

/// `(1/2) f_Z(1/sigma) / sigma` for an integer-valued variable with SD `sigma`.
pub fn lattice_gap_bound(sigma: f64) -> f64 {
    0.5 * std_normal_pdf(1.0 / sigma) / sigma
}

/// Every constant for one parameter triple. Entries whose preconditions fail
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub params: ModelParams,
    pub eta_v: Option<f64>,
    pub eta_s: Option<f64>,
    pub d_v_bound: Option<f64>,
    pub d_s_bound: Option<f64>,
    pub finite_n_lower_s: Option<f64>,
    pub eta_v_limit: f64,
    pub eta_s_limit: Option<f64>,
    pub delta_v: f64,
    pub delta_s: Option<f64>,
    pub lower_s: f64,
}

impl BoundReport {
    /// Fails only if neither theorem applies; partial reports keep `None`
    /// for the side whose preconditions are violated.
    pub fn compute(params: &ModelParams, spec: &QuadratureSpec) -> Result<Self> {
        params.require_variance_formulas()?;
        if !params.validity.theorem_v && !params.validity.theorem_s {
            params.require_theorem_v()?;
        }
        let moments = MomentSet::compute(params, spec)?;
        let s_supported = params.d <= 3;
        let (eta_s_val, d_s_bound) = if s_supported && params.validity.theorem_s {
            (Some(eta_s(params)?), Some(theorem_bound_s(params, &moments)?))
        } else {
            (None, None)
        };
        let (eta_v_val, d_v_bound) = if params.validity.theorem_v {
            (Some(eta_v(params)?), Some(theorem_bound_v(params, &moments)?))
        } else {
            (None, None)
        };
        Ok(BoundReport {
            params: *params,
            eta_v: eta_v_val,
            eta_s: eta_s_val,
            d_v_bound,
            d_s_bound,
            finite_n_lower_s: Some(finite_n_lower_bound_s(params, &moments)?),
            eta_v_limit: eta_v_limit(params.rho, params.d)?,
            eta_s_limit: if s_supported { Some(eta_s_limit(params.rho, params.d)?) } else { None },
            delta_v: delta_v(params.rho, params.d, spec)?,
            delta_s: if s_supported { Some(delta_s(params.rho, params.d, spec)?) } else { None },
            lower_s: lower_bound_s(params.rho, params.d, spec)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn kissing_table() {
        for (d, k) in [(1, 2), (2, 5), (3, 12)] {
            let c = KissingConstants::for_dimension(d).unwrap();
            assert_eq!(c.kappa, k);
            assert_eq!(c.kappa_plus, k + 1);
        }
        assert!(matches!(KissingConstants::for_dimension(4), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn generic_bound_examples() {
        let b = size_bias_ks_bound(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((b - (15.0 + 4.0 * 11f64.sqrt()) / 5.0).abs() < 1e-12);
        let lo = size_bias_ks_bound(10.0, 3.0, 1.0, 0.5).unwrap();
        let hi = size_bias_ks_bound(10.0, 3.0, 1.0, 1.0).unwrap();
        assert!(hi > lo);
        assert!(size_bias_ks_bound(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(size_bias_ks_bound(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(size_bias_ks_bound(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(size_bias_ks_bound(1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn eta_limits() {
        // Agreement to six significant figures: within half a unit of the sixth digit.
        let six_figures = |a: f64, b: f64| (a - b).abs() <= 0.5 * 10f64.powi(b.abs().log10().floor() as i32 - 5);
        let p = ModelParams::new(1, 100_000_000, 1.0).unwrap();
        assert!(six_figures(eta_v(&p).unwrap(), eta_v_limit(1.0, 1).unwrap()));
        let p = ModelParams::new(3, 100_000_000, 1.0).unwrap();
        assert!(six_figures(eta_s(&p).unwrap(), eta_s_limit(1.0, 3).unwrap()));
        let p = ModelParams::new(1, 1_000_000_000_000, 1.0).unwrap();
        assert!((eta_s(&p).unwrap() / eta_s_limit(1.0, 1).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eta_d2_finite_n_exceeds_limit() {
        let p = ModelParams::new(2, 1_000, 1.0).unwrap();
        let e = eta_v(&p).unwrap();
        assert!(e.is_finite() && e > eta_v_limit(1.0, 2).unwrap());
        let p = ModelParams::new(2, 100, 1.0).unwrap();
        assert!(matches!(eta_v(&p), Err(Error::Validity(_))));
    }

    // Frozen from a 50-digit mpmath evaluation of the same expression.
    #[test]
    fn eta_s_d2_extended_precision() {
        let p = ModelParams::new(2, 1_000, 1.0).unwrap();
        let e = eta_s(&p).unwrap();
        assert!(((e - ETA_S_D2_N1000) / ETA_S_D2_N1000).abs() < 1e-12, "{e}");
    }

    const ETA_S_D2_N1000: f64 = 431_741.170_030_490_8;

    #[test]
    fn lower_bound_identity_and_sandwich() {
        for d in 1..=3 {
            let lb = lower_bound_s(1.0, d, &spec()).unwrap();
            let g = analytic::g_s(1.0, d, &spec()).unwrap();
            assert!((lb * lb * 8.0 * std::f64::consts::PI * g - 1.0).abs() < 1e-12);
            assert!(lb < delta_s(1.0, d, &spec()).unwrap());
        }
    }

    #[test]
    fn lower_bound_d1_closed_form() {
        let e = |x: f64| x.exp();
        let g = e(-2.0) + 2.0 * e(-3.0) - 7.0 * e(-4.0);
        let want = 1.0 / (8.0 * std::f64::consts::PI * g).sqrt();
        assert!((lower_bound_s(1.0, 1, &spec()).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn lattice_gap_at_unit_sd() {
        assert!((lattice_gap_bound(1.0) - 0.120_985_362_259_571_6).abs() < 1e-15);
    }

    #[test]
    fn bounds_positive_on_lattice() {
        for d in 1..=3 {
            for rho in [0.5, 1.0, 2.0] {
                for n in [1_000u64, 10_000, 100_000] {
                    let p = ModelParams::new(d, n, rho).unwrap();
                    if !p.validity.variance_formulas {
                        continue;
                    }
                    let m = MomentSet::compute(&p, &spec()).unwrap();
                    if p.validity.theorem_v {
                        assert!(theorem_bound_v(&p, &m).unwrap() > 0.0);
                    }
                    if p.validity.theorem_s {
                        assert!(theorem_bound_s(&p, &m).unwrap() > 0.0);
                    }
                    // exp(-1/(2 var)) underflows once Var(S) is tiny
                    let lb = finite_n_lower_bound_s(&p, &m).unwrap();
                    assert!(lb >= 0.0);
                    if m.var_s > 0.01 {
                        assert!(lb > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn bound_scales_like_inverse_root_n() {
        let a = ModelParams::new(2, 10_000, 1.0).unwrap();
        let b = ModelParams::new(2, 40_000, 1.0).unwrap();
        let ba = theorem_bound_v(&a, &MomentSet::compute(&a, &spec()).unwrap()).unwrap();
        let bb = theorem_bound_v(&b, &MomentSet::compute(&b, &spec()).unwrap()).unwrap();
        let ratio = bb / ba;
        assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn report_for_d3() {
        let p = ModelParams::new(3, 100_000, 1.0).unwrap();
        let r = BoundReport::compute(&p, &spec()).unwrap();
        assert!(r.d_s_bound.unwrap() > 0.0);
        assert!(r.lower_s < r.delta_s.unwrap());
    }
}
