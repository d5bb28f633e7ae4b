//! Exact finite-`n` means and variances of the covered volume `V` and the
//! isolated count `S`, and their `n -> infinity` limits.
//!
//! Powers `(1 - x/n)^n` are evaluated as `exp(n log1p(-x/n))`. The two
//! `O(n^2)` terms whose difference is `O(n)` are combined analytically before
//! any subtraction happens, see [`pair_term_v`].

use serde::{Deserialize, Serialize};

use crate::analytic::{self, omega, unit_ball_volume, QuadratureSpec};
use crate::error::{Error, Result};
use crate::geometry::{ModelParams, ValidityFlags};
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub mu_v: f64,
    pub mu_s: f64,
    pub var_v: f64,
    pub var_s: f64,
    pub validity: ValidityFlags,
}

impl MomentSet {
    /// All four moments; needs `4 rho < n^{1/d}`.
    pub fn compute(params: &ModelParams, spec: &QuadratureSpec) -> Result<Self> {
        Ok(MomentSet {
            mu_v: mean_v(params)?,
            mu_s: mean_s(params)?,
            var_v: variance_v(params, spec)?,
            var_s: variance_s(params, spec)?,
            validity: params.validity,
        })
    }

    pub fn sd_v(&self) -> f64 {
        self.var_v.sqrt()
    }

    pub fn sd_s(&self) -> f64 {
        self.var_s.sqrt()
    }
}

pub fn mean_v(params: &ModelParams) -> Result<f64> {
    params.require_mean_formulas()?;
    let n = params.n as f64;
    Ok(-n * (n * (-params.phi / n).ln_1p()).exp_m1())
}

pub fn mean_s(params: &ModelParams) -> Result<f64> {
    params.require_mean_formulas()?;
    let n = params.n as f64;
    Ok(n * ((n - 1.0) * (-params.phi / n).ln_1p()).exp())
}

/// `n (n - 2^d phi)(1 - 2 phi/n)^n - n^2 (1 - phi/n)^{2n}` without cancellation.
pub fn pair_term_v(n: f64, d: usize, phi: f64) -> f64 {
    let x = phi / n;
    let b = 2.0 * n * (-x).ln_1p();
    let c = n * (-(phi / (n - phi)).powi(2)).ln_1p();
    let k = 2f64.powi(d as i32) * x;
    n * n * b.exp() * (c.exp_m1() * (1.0 - k) - k)
}

/// `n (n-1) [(1 - 2^d phi/n)(1 - 2 phi/n)^{n-2} - (1 - phi/n)^{2n-2}]` without cancellation.
pub fn pair_term_s(n: f64, d: usize, phi: f64) -> f64 {
    let x = phi / n;
    let l1 = (-x).ln_1p();
    let b = (2.0 * n - 2.0) * l1;
    let c = (n - 2.0) * (-(x / (1.0 - x)).powi(2)).ln_1p() - 2.0 * l1;
    let k = 2f64.powi(d as i32) * x;
    n * (n - 1.0) * b.exp() * (c.exp_m1() * (1.0 - k) - k)
}

/// `rho^d d pi_d \int_lo^hi (1 - rho^d omega_d(s)/n)^power s^{d-1} ds`, the
/// ball (or annulus) integral after the substitution `|y| = rho s`.
fn radial_vacancy_integral(
    params: &ModelParams,
    lo: f64,
    hi: f64,
    power: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let d = params.d;
    let n = params.n as f64;
    let rho_d = params.rho.powi(d as i32);
    let surface = d as f64 * unit_ball_volume(d)?;
    let inner = QuadratureSpec {
        abs_tol: (spec.abs_tol * 1e-2).max(1e-15),
        rel_tol: (spec.rel_tol * 1e-2).max(2e-14),
        ..*spec
    };
    let failure = std::cell::RefCell::new(None);
    let val = integrate(
        |s| match omega(d, s.clamp(0.0, 2.0), &inner) {
            Ok(w) => (power * (-rho_d * w / n).ln_1p()).exp() * s.powi(d as i32 - 1),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        spec,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(rho_d * surface * val?.value)
}

fn checked_variance(v: f64, n: f64, name: &str) -> Result<f64> {
    if v < -1e-6 * n {
        return Err(Error::numerical(format!("catastrophic cancellation in {name}: {v}"), v.abs()));
    }
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::numerical(format!("{name} evaluated to non-positive {v}"), v.abs()));
    }
    Ok(v)
}

/// Exact `Var(V)`; needs `4 rho < n^{1/d}`.
pub fn variance_v(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    params.require_variance_formulas()?;
    let n = params.n as f64;
    let ball = radial_vacancy_integral(params, 0.0, 2.0, n, spec)?;
    let v = n * ball + pair_term_v(n, params.d, params.phi);
    checked_variance(v, n, "Var(V)")
}

/// Exact `Var(S)`; needs `4 rho < n^{1/d}`.
pub fn variance_s(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    params.require_variance_formulas()?;
    let n = params.n as f64;
    let log_q = (n - 1.0) * (-params.phi / n).ln_1p();
    let single = n * log_q.exp() * -log_q.exp_m1();
    let annulus = radial_vacancy_integral(params, 1.0, 2.0, n - 2.0, spec)?;
    let v = single + (n - 1.0) * annulus + pair_term_s(n, params.d, params.phi);
    checked_variance(v, n, "Var(S)")
}

/// Common limit of `1 - mu_V/n` and `mu_S/n`, namely `e^{-phi}`.
pub fn mean_fraction_limit(rho: f64, d: usize) -> Result<f64> {
    Ok((-unit_ball_volume(d)? * rho.powi(d as i32)).exp())
}

pub fn variance_v_limit(rho: f64, d: usize, spec: &QuadratureSpec) -> Result<f64> {
    analytic::g_v(rho, d, spec)
}

pub fn variance_s_limit(rho: f64, d: usize, spec: &QuadratureSpec) -> Result<f64> {
    analytic::g_s(rho, d, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn small_phi_mean_v_is_first_order() {
        let p = ModelParams::new(1, 1_000_000, 1e-6).unwrap();
        let ratio = mean_v(&p).unwrap() / (p.n as f64 * p.phi);
        assert!((0.999..=1.001).contains(&ratio), "{ratio}");
    }

    #[test]
    fn mean_s_limit() {
        let p = ModelParams::new(1, 10_000_000, 1.0).unwrap();
        let frac = mean_s(&p).unwrap() / p.n as f64;
        assert!((frac - (-2f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn validity_is_enforced() {
        let p = ModelParams::new(2, 9, 1.0).unwrap();
        assert!(mean_v(&p).is_ok());
        assert!(matches!(variance_v(&p, &spec()), Err(Error::Validity(_))));
        assert!(matches!(variance_s(&p, &spec()), Err(Error::Validity(_))));
        let p = ModelParams::new(1, 4, 2.5).unwrap();
        assert!(matches!(mean_s(&p), Err(Error::Validity(_))));
    }

    // Frozen from a 50-digit mpmath evaluation of the naive two-term expression.
    #[test]
    fn pair_terms_match_extended_precision() {
        let v1 = pair_term_v(1e6, 1, 2.0);
        let want_v1 = PAIR_V_1E6_D1;
        assert!(((v1 - want_v1) / want_v1).abs() < 1e-8, "{v1} vs {want_v1}");
        let v2 = pair_term_v(1e6, 2, std::f64::consts::PI);
        assert!(((v2 - PAIR_V_1E6_D2) / PAIR_V_1E6_D2).abs() < 1e-8, "{v2}");
        let s1 = pair_term_s(1e6, 1, 2.0);
        assert!(((s1 - PAIR_S_1E6_D1) / PAIR_S_1E6_D1).abs() < 1e-8, "{s1}");
        let s3 = pair_term_s(1e8, 3, 4.0 * std::f64::consts::PI / 3.0);
        assert!(((s3 - PAIR_S_1E8_D3) / PAIR_S_1E8_D3).abs() < 1e-8, "{s3}");
    }

    const PAIR_V_1E6_D1: f64 = -146_524.378_484_757_47;
    const PAIR_V_1E6_D2: f64 = -41_897.278_200_552_49;
    const PAIR_S_1E6_D1: f64 = -73_262.555_554_814_62;
    const PAIR_S_1E8_D3: f64 = -981_463.640_993_407_6;

    #[test]
    fn lattice_variances_positive() {
        for d in 1..=3 {
            for rho in [0.5, 1.0, 2.0] {
                for n in [100u64, 1_000, 10_000] {
                    let p = ModelParams::new(d, n, rho).unwrap();
                    if !p.validity.variance_formulas {
                        continue;
                    }
                    let m = MomentSet::compute(&p, &spec()).unwrap();
                    assert!(m.var_v > 0.0 && m.var_s > 0.0, "{d} {rho} {n}");
                    assert!(m.mu_v > 0.0 && m.mu_v < n as f64);
                    assert!(m.mu_s > 0.0 && m.mu_s < n as f64);
                }
            }
        }
    }

    #[test]
    fn sparse_var_s_is_below_n() {
        let p = ModelParams::new(1, 100, 1e-3).unwrap();
        let v = variance_s(&p, &spec()).unwrap();
        assert!(v > 0.0 && v < 100.0, "{v}");
    }

    #[test]
    fn variance_v_approaches_limit_monotonically_in_d1() {
        let g = analytic::g_v(1.0, 1, &spec()).unwrap();
        let gaps: Vec<f64> = [1_000u64, 10_000, 100_000]
            .iter()
            .map(|&n| {
                let p = ModelParams::new(1, n, 1.0).unwrap();
                (variance_v(&p, &spec()).unwrap() / n as f64 - g).abs()
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn variance_s_close_to_limit() {
        let g = analytic::g_s(1.0, 1, &spec()).unwrap();
        let p = ModelParams::new(1, 100_000, 1.0).unwrap();
        let v = variance_s(&p, &spec()).unwrap() / 1e5;
        assert!((v - g).abs() < 1e-3);
    }
}
