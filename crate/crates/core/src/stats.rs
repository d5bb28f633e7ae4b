//! Kolmogorov distance to the standard normal, chi-square goodness of fit, and
//! the comparison of empirical distances with the Berry-Esseen bounds.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analytic::{std_normal_cdf, QuadratureSpec};
use crate::bounds::{finite_n_lower_bound_s, theorem_bound_s, theorem_bound_v};
use crate::error::{Error, Result};
use crate::geometry::ModelParams;
use crate::moments::MomentSet;
use crate::simulate::ReplicateBatch;

/// Confidence level of the DKW band.
pub const DKW_ALPHA: f64 = 0.05;

/// Half-width of the `1 - alpha` Dvoretzky-Kiefer-Wolfowitz band.
pub fn dkw_band(sample_size: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * sample_size as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovResult {
    pub statistic: f64,
    pub sample_size: usize,
    pub dkw_band: f64,
}

/// `sup_t |F_R(t) - Phi(t)|` for the samples standardised by the given exact
/// mean and standard deviation. Tied samples are handled by evaluating both
/// one-sided gaps at every order statistic.
pub fn ks_distance(samples: &[f64], mu: f64, sigma: f64) -> Result<KolmogorovResult> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if samples.len() < 2 {
        return Err(Error::domain("Kolmogorov distance needs at least 2 samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("samples must be finite"));
    }
    let mut w: Vec<f64> = samples.iter().map(|&x| (x - mu) / sigma).collect();
    w.sort_by(f64::total_cmp);
    let r = w.len() as f64;
    let statistic = w
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let phi = std_normal_cdf(t);
            ((i + 1) as f64 / r - phi).abs().max((i as f64 / r - phi).abs())
        })
        .fold(0.0, f64::max);
    Ok(KolmogorovResult {
        statistic,
        sample_size: w.len(),
        dkw_band: dkw_band(w.len(), DKW_ALPHA),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub critical_value: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// Pearson goodness of fit of category counts against probabilities. Cells
/// with expected count below 5 are pooled with their neighbour towards the
/// centre.
pub fn chi_square_test(observed: &[u64], probs: &[f64], alpha: f64) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::domain("chi-square needs matching count and probability vectors"));
    }
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut cells: Vec<(f64, f64)> = observed.iter().zip(probs).map(|(&o, &p)| (o as f64, p * total)).collect();
    // Pool small cells from both ends inwards.
    while cells.len() > 2 && cells[0].1 < 5.0 {
        let (o, e) = cells.remove(0);
        cells[0].0 += o;
        cells[0].1 += e;
    }
    while cells.len() > 2 && cells[cells.len() - 1].1 < 5.0 {
        let (o, e) = cells.pop().expect("non-empty");
        let last = cells.len() - 1;
        cells[last].0 += o;
        cells[last].1 += e;
    }
    let statistic: f64 = cells
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = cells.len() - 1;
    let law = ChiSquared::new(dof as f64).map_err(|e| Error::domain(e.to_string()))?;
    let critical_value = law.inverse_cdf(1.0 - alpha);
    Ok(ChiSquareResult {
        statistic,
        dof,
        critical_value,
        p_value: law.sf(statistic),
        pass: statistic <= critical_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    V,
    S,
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(Statistic::V),
            "S" | "s" => Ok(Statistic::S),
            other => Err(Error::domain(format!("unknown statistic {other:?}, expected V or S"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichOptions {
    /// Multiplier on the finite-n lower bound.
    pub lower_factor: f64,
    pub quadrature: QuadratureSpec,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        SandwichOptions {
            lower_factor: 0.8,
            quadrature: QuadratureSpec::default(),
        }
    }
}

/// Empirical Kolmogorov distance against the theorem bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub which: Statistic,
    pub n: u64,
    pub d: usize,
    pub rho: f64,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "D_empirical")]
    pub d_empirical: f64,
    pub dkw_band: f64,
    pub upper_bound: f64,
    /// Scaled finite-n lower bound; `S` only.
    pub lower_bound: Option<f64>,
    pub pass_upper: bool,
    pub pass_lower: Option<bool>,
    /// No value of the statistic in `[0, 1]` could have failed either clause.
    pub inconclusive: bool,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.pass_upper && self.pass_lower.unwrap_or(true)
    }
}

pub fn sandwich_test(
    params: &ModelParams,
    batch: &ReplicateBatch,
    which: Statistic,
    options: &SandwichOptions,
) -> Result<SandwichReport> {
    if batch.params != *params {
        return Err(Error::domain("batch was generated with different parameters"));
    }
    let moments = MomentSet::compute(params, &options.quadrature)?;
    let (samples, mu, sigma, upper, lower) = match which {
        Statistic::V => (
            batch.samples_v.clone(),
            moments.mu_v,
            moments.sd_v(),
            theorem_bound_v(params, &moments)?,
            None,
        ),
        Statistic::S => (
            batch.samples_s.iter().map(|&s| s as f64).collect(),
            moments.mu_s,
            moments.sd_s(),
            theorem_bound_s(params, &moments)?,
            Some(options.lower_factor * finite_n_lower_bound_s(params, &moments)?),
        ),
    };
    let ks = ks_distance(&samples, mu, sigma)?;
    Ok(SandwichReport {
        which,
        n: params.n,
        d: params.d,
        rho: params.rho,
        r: ks.sample_size,
        d_empirical: ks.statistic,
        dkw_band: ks.dkw_band,
        upper_bound: upper,
        lower_bound: lower,
        pass_upper: ks.statistic <= upper + ks.dkw_band,
        pass_lower: lower.map(|l| ks.statistic >= l - ks.dkw_band),
        inconclusive: upper + ks.dkw_band >= 1.0 && lower.is_none_or(|l| l - ks.dkw_band <= 0.0),
    })
}
