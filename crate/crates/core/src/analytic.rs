//! Ball volumes, the two-ball union volume, the radial integral `J_{r,d}`,
//! the limiting variance constants and the standard normal distribution.

use std::f64::consts::PI;

use crate::error::{Error, Result};
pub use crate::quadrature::QuadratureSpec;
use crate::quadrature::integrate;

/// Volume of the unit ball in `d` dimensions, `pi^{d/2} / Gamma(1 + d/2)`.
///
/// Evaluated by the recurrence `V_d = V_{d-2} * 2 pi / d` from `V_0 = 1`,
/// `V_1 = 2`, which is exact in the low dimensions.
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    Ok(v)
}

fn inner_spec(spec: &QuadratureSpec) -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: (spec.abs_tol * 1e-2).max(1e-15),
        rel_tol: (spec.rel_tol * 1e-2).max(2e-14),
        max_subdivisions: spec.max_subdivisions,
    }
}

/// Volume of the union of two unit balls whose centres are `u` apart, `0 <= u <= 2`.
pub fn omega(d: usize, u: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(0.0..=2.0).contains(&u) {
        return Err(Error::domain(format!("omega needs 0 <= u <= 2, got {u}")));
    }
    let pd = unit_ball_volume(d)?;
    if d == 1 {
        return Ok(2.0 + u);
    }
    let pd1 = unit_ball_volume(d - 1)?;
    let half_exp = (d as f64 - 1.0) / 2.0;
    let lens = integrate(
        |t| (1.0 - 0.25 * t * t).max(0.0).powf(half_exp),
        0.0,
        u,
        spec,
    )?;
    Ok(pd + pd1 * lens.value)
}

/// `J_{r,d}(rho) = d pi_d \int_0^r exp(-rho^d omega_d(t)) t^{d-1} dt`.
///
/// `rho = 0` is accepted and gives `pi_d r^d`.
pub fn integral_j(r: f64, d: usize, rho: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(0.0..=2.0).contains(&r) {
        return Err(Error::domain(format!("J needs 0 <= r <= 2, got {r}")));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("J needs rho >= 0, got {rho}")));
    }
    let pd = unit_ball_volume(d)?;
    let scale = rho.powi(d as i32);
    if d == 1 {
        let val = integrate(|t| (-scale * (2.0 + t)).exp(), 0.0, r, spec)?;
        return Ok(pd * val.value);
    }
    let inner = inner_spec(spec);
    // The closure cannot return Result; stash the first failure.
    let failure = std::cell::RefCell::new(None);
    let val = integrate(
        |t| match omega(d, t.clamp(0.0, 2.0), &inner) {
            Ok(w) => (-scale * w).exp() * t.powi(d as i32 - 1),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        r,
        spec,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(d as f64 * pd * val?.value)
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("rho must be positive and finite, got {rho}")))
    }
}

/// Limit of `Var(V) / n`.
pub fn g_v(rho: f64, d: usize, spec: &QuadratureSpec) -> Result<f64> {
    check_rho(rho)?;
    let phi = unit_ball_volume(d)? * rho.powi(d as i32);
    let j2 = integral_j(2.0, d, rho, spec)?;
    let pow2 = 2f64.powi(d as i32);
    let g = rho.powi(d as i32) * j2 - (pow2 * phi + phi * phi) * (-2.0 * phi).exp();
    positive(g, "g_V")
}

/// Limit of `Var(S) / n`.
pub fn g_s(rho: f64, d: usize, spec: &QuadratureSpec) -> Result<f64> {
    check_rho(rho)?;
    let phi = unit_ball_volume(d)? * rho.powi(d as i32);
    let j2 = integral_j(2.0, d, rho, spec)?;
    let j1 = integral_j(1.0, d, rho, spec)?;
    let pow2 = 2f64.powi(d as i32);
    // e^{-phi} - (1 + (2^d - 2) phi + phi^2) e^{-2 phi}, arranged so the small-phi
    // cancellation happens inside expm1.
    let e1 = (-phi).exp();
    let head = -(-phi).exp_m1() * e1 - ((pow2 - 2.0) * phi + phi * phi) * e1 * e1;
    let g = head + rho.powi(d as i32) * (j2 - j1);
    positive(g, "g_S")
}

fn positive(g: f64, name: &str) -> Result<f64> {
    if g > 0.0 && g.is_finite() {
        Ok(g)
    } else {
        Err(Error::numerical(format!("{name} evaluated to non-positive {g}"), g.abs()))
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_87;

pub fn std_normal_pdf(t: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

/// `Phi(t) = erfc(-t / sqrt 2) / 2`; erfc is the fdlibm rational approximation.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}
