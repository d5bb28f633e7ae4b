//! Size-biased couplings.
//!
//! The binomial step: with `N ~ Bin(m, p)` built from explicit indicators,
//! flip a coin with success probability `pi_N` and, on success, switch on the
//! indicator of a uniformly chosen trial. The result `M` has the law of `N`
//! given `N > 0`.
//!
//! The point-process version takes `p = phi / n`, the chance that a uniform
//! point falls in the ball around a uniform anchor `U_0`, and realises the
//! switch by moving the chosen point to a uniform location in that ball. For
//! the covered volume the anchor is an extra point outside the configuration;
//! for the nonisolated count `W = n - S` it is one of the `n` points.

use std::io::Write;

use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{eta_s, eta_v, KissingConstants};
use crate::error::{Error, Result};
use crate::geometry::{
    format_f64, sample_configuration, uniform_in_ball, uniform_point, ModelParams, PointConfiguration, TorusPoint,
};
use crate::rng::{self, StreamRng};
use crate::simulate::{covered_volume, nonisolated_count, replicate_seed, VolumeMethod};

/// Clamping tolerance for `pi_k` at the ends of `[0, 1]`.
const CLAMP_SLACK: f64 = 1e-9;

/// Largest `m` accepted by the exact rational checks.
pub const EXACT_MAX_M: u64 = 60;

fn check_binomial(m: u64, p: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// `log(1 + e^a)`.
fn log1p_exp(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// The coin probabilities `pi_0, ..., pi_m` for one `(m, p)`.
///
/// With `R_k = P[N > k] / P[N = k]` the definition reduces to
/// `pi_k = c m R_k / (m - k)` where `c = q^m / (1 - q^m)`, and `R_k` obeys
/// `R_k = (m - k)/(k + 1) (p/q) (R_{k+1} + 1)` with `R_m = 0`. The recursion
/// runs down from the top of the support in log space, so the upper tails are
/// sums of positive terms and nothing cancels.
#[derive(Debug, Clone, PartialEq)]
pub struct PiTable {
    m: u64,
    p: f64,
    values: Vec<f64>,
}

impl PiTable {
    pub fn new(m: u64, p: f64) -> Result<Self> {
        check_binomial(m, p)?;
        let mf = m as f64;
        let ln_q = (-p).ln_1p();
        let log_qm = mf * ln_q;
        let log_c = log_qm - (-log_qm.exp_m1()).ln();
        let log_odds = p.ln() - ln_q;
        let mut values = vec![0.0; m as usize + 1];
        let mut log_r_next = f64::NEG_INFINITY;
        for k in (0..m).rev() {
            let kf = k as f64;
            let tail = log1p_exp(log_r_next);
            let log_pi = log_c + (mf / (kf + 1.0)).ln() + log_odds + tail;
            log_r_next = ((mf - kf) / (kf + 1.0)).ln() + log_odds + tail;
            values[k as usize] = clamp_probability(log_pi.exp(), m, k)?;
        }
        values[0] = 1.0;
        Ok(PiTable { m, p, values })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn get(&self, k: u64) -> Result<f64> {
        self.values
            .get(k as usize)
            .copied()
            .ok_or_else(|| Error::domain(format!("k = {k} exceeds m = {}", self.m)))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn clamp_probability(pi: f64, m: u64, k: u64) -> Result<f64> {
    if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&pi) {
        return Err(Error::numerical(
            format!("pi_{k} for m = {m} evaluated to {pi}, outside [0, 1]"),
            (pi - pi.clamp(0.0, 1.0)).abs(),
        ));
    }
    Ok(pi.clamp(0.0, 1.0))
}

/// `pi_k` for `N ~ Bin(m, p)`.
pub fn pi_k(m: u64, p: f64, k: u64) -> Result<f64> {
    check_binomial(m, p)?;
    if k > m {
        return Err(Error::domain(format!("k = {k} exceeds m = {m}")));
    }
    PiTable::new(m, p)?.get(k)
}

/// Exact rational versions of the binomial quantities, for small `m`.
pub mod exact {
    use super::*;

    /// Exact value of a finite float.
    pub fn rational(x: f64) -> Result<BigRational> {
        BigRational::from_float(x).ok_or_else(|| Error::domain(format!("{x} is not finite")))
    }

    fn binomial(m: u64, j: u64) -> BigInt {
        let mut c = BigInt::one();
        for i in 0..j {
            c = c * BigInt::from(m - i) / BigInt::from(i + 1);
        }
        c
    }

    /// `P[Bin(m, p) = j]`.
    pub fn pmf(m: u64, p: &BigRational, j: u64) -> BigRational {
        let q = BigRational::one() - p;
        BigRational::from_integer(binomial(m, j)) * num::pow(p.clone(), j as usize) * num::pow(q, (m - j) as usize)
    }

    /// `P[Bin(m, p) = j]` for `j = 0..=m`.
    pub fn pmf_table(m: u64, p: &BigRational) -> Vec<BigRational> {
        let q = BigRational::one() - p;
        let odds = p / &q;
        let mut out = Vec::with_capacity(m as usize + 1);
        out.push(num::pow(q, m as usize));
        for j in 0..m {
            let step = BigRational::new(BigInt::from(m - j), BigInt::from(j + 1)) * &odds;
            let next = &out[j as usize] * step;
            out.push(next);
        }
        out
    }

    /// `P[Bin(m, p) >= k]` for `k = 0..=m + 1`.
    pub fn tail_table(m: u64, p: &BigRational) -> Vec<BigRational> {
        let pmf = pmf_table(m, p);
        let mut out = vec![BigRational::zero(); m as usize + 2];
        for k in (0..=m as usize).rev() {
            out[k] = &out[k + 1] + &pmf[k];
        }
        out
    }

    /// `P[Bin(m, p) >= k]`.
    pub fn tail(m: u64, p: &BigRational, k: u64) -> BigRational {
        (k..=m).map(|j| pmf(m, p, j)).fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn pi_k(m: u64, p: &BigRational, k: u64) -> BigRational {
        if k == m {
            return BigRational::zero();
        }
        let q_m = pmf(m, p, 0);
        let above = tail(m, p, k + 1);
        let conditioned = above.clone() / (BigRational::one() - q_m);
        let scale = BigRational::new(BigInt::from(m - k), BigInt::from(m));
        (conditioned - above) / (pmf(m, p, k) * scale)
    }

    /// `pi_0, ..., pi_m`, sharing the pmf and tail computations.
    pub fn pi_table(m: u64, p: &BigRational) -> Vec<BigRational> {
        let pmf = pmf_table(m, p);
        let positive = BigRational::one() - &pmf[0];
        let mut above = BigRational::zero();
        let mut out = vec![BigRational::zero(); m as usize + 1];
        for k in (0..m).rev() {
            above += &pmf[k as usize + 1];
            let gain = &above / &positive - &above;
            let scale = BigRational::new(BigInt::from(m - k), BigInt::from(m));
            out[k as usize] = gain / (&pmf[k as usize] * scale);
        }
        out
    }

    pub fn in_unit_interval(x: &BigRational) -> bool {
        !x.is_negative() && *x <= BigRational::one()
    }
}

/// Checks `P[N >= k] <= P[N >= k | N > 0] <= P[N'' >= k]` for `k = 1..=m` in
/// exact arithmetic, where `N ~ Bin(m, p)` and `N'' - 1 ~ Bin(m - 1, p)`.
pub fn dominance_check(m: u64, p: f64) -> Result<bool> {
    check_binomial(m, p)?;
    if m > EXACT_MAX_M {
        return Err(Error::domain(format!("exact dominance check needs m <= {EXACT_MAX_M}")));
    }
    let p = exact::rational(p)?;
    let plain = exact::tail_table(m, &p);
    let shifted = exact::tail_table(m - 1, &p);
    let positive = plain[1].clone();
    Ok((1..=m as usize).all(|k| {
        let conditioned = &plain[k] / &positive;
        plain[k] <= conditioned && conditioned <= shifted[k - 1]
    }))
}

/// Draws from the binomial coupling for a fixed `(m, p)`.
#[derive(Debug, Clone)]
pub struct BinomialCoupler {
    table: PiTable,
}

impl BinomialCoupler {
    pub fn new(m: u64, p: f64) -> Result<Self> {
        Ok(BinomialCoupler {
            table: PiTable::new(m, p)?,
        })
    }

    /// Returns `(N, M)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let m = self.table.m;
        let p = self.table.p;
        let xi: Vec<bool> = (0..m).map(|_| rng.random::<f64>() < p).collect();
        let n = xi.iter().filter(|&&x| x).count() as u64;
        let coin = rng.random::<f64>() < self.table.values[n as usize];
        let i = rng.random_range(0..m as usize);
        let switch = coin && !xi[i];
        (n, n + switch as u64)
    }
}

/// One draw of `(N, M)`.
pub fn couple_binomial(m: u64, p: f64, seed: u64) -> Result<(u64, u64)> {
    let coupler = BinomialCoupler::new(m, p)?;
    Ok(coupler.sample(&mut rng::stream(seed, &[rng::domain::COUPLING])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Covered volume.
    V,
    /// Number of nonisolated points, `n - S`.
    W,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::V => "V",
            Variant::W => "W",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(Variant::V),
            "W" | "w" => Ok(Variant::W),
            other => Err(Error::domain(format!("unknown variant {other:?}, expected V or W"))),
        }
    }
}

/// One realisation of `(Y, Y')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDraw {
    pub y: f64,
    pub y_prime: f64,
    pub anchor: TorusPoint,
    pub bernoulli: bool,
    /// The point that was moved; set whenever the coin succeeded.
    pub moved_index: Option<usize>,
    /// Where it was moved to.
    pub target: Option<TorusPoint>,
    /// Points of the binomial part inside the anchor ball, before and after.
    pub ball_count_before: usize,
    pub ball_count_after: usize,
}

/// Shared state for many draws at one parameter triple.
#[derive(Debug, Clone)]
pub struct ProcessCoupler {
    params: ModelParams,
    variant: Variant,
    method: VolumeMethod,
    table: PiTable,
}

impl ProcessCoupler {
    pub fn new(params: &ModelParams, variant: Variant, method: VolumeMethod) -> Result<Self> {
        params.require_mean_formulas()?;
        let m = match variant {
            Variant::V => params.n,
            Variant::W => {
                KissingConstants::for_dimension(params.d)?;
                params.n - 1
            }
        };
        Ok(ProcessCoupler {
            params: *params,
            variant,
            method,
            table: PiTable::new(m, params.phi / params.n as f64)?,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `Y` of a configuration: `V` of all points, or `W` of all points.
    pub fn value(&self, config: &PointConfiguration) -> Result<f64> {
        match self.variant {
            Variant::V => Ok(covered_volume(config, self.params.rho, self.method)?.value),
            Variant::W => Ok(nonisolated_count(config, self.params.rho)? as f64),
        }
    }

    /// Runs the coupling on a fixed configuration with known `Y`.
    ///
    /// For `V` the anchor is drawn fresh. For `W`, `anchor_index` names the
    /// configuration point playing `U_0`; the other points form the binomial
    /// part.
    pub fn step(
        &self,
        config: &PointConfiguration,
        y: f64,
        anchor_index: Option<usize>,
        rng: &mut StreamRng,
    ) -> Result<CouplingDraw> {
        let rho = self.params.rho;
        let side = self.params.side;
        let (anchor, own) = match (self.variant, anchor_index) {
            (Variant::V, None) => (uniform_point(rng, self.params.d, side), 0),
            (Variant::W, Some(a)) if a < config.len() => (config.point(a).to_vec(), 1),
            _ => return Err(Error::domain("anchor index must be given exactly for the W variant")),
        };
        let before = config.count_within(&anchor, rho)? - own;
        let coin = rng.random::<f64>() < self.table.get(before as u64)?;
        let mut pick = rng.random_range(0..self.table.m as usize);
        if let Some(a) = anchor_index {
            if pick >= a {
                pick += 1;
            }
        }
        let target = uniform_in_ball(rng, &anchor, rho, side);
        let anchor = TorusPoint::wrapped(&anchor, side);
        if !coin {
            return Ok(CouplingDraw {
                y,
                y_prime: y,
                anchor,
                bernoulli: false,
                moved_index: None,
                target: None,
                ball_count_before: before,
                ball_count_after: before,
            });
        }
        let moved = config.with_point_moved(pick, &target);
        Ok(CouplingDraw {
            y,
            y_prime: self.value(&moved)?,
            ball_count_after: moved.count_within(anchor.coords(), rho)? - own,
            anchor,
            bernoulli: true,
            moved_index: Some(pick),
            target: Some(TorusPoint::wrapped(&target, side)),
            ball_count_before: before,
        })
    }

    /// A complete draw: fresh configuration, then the coupling step.
    pub fn draw(&self, seed: u64) -> Result<CouplingDraw> {
        let config = sample_configuration(&self.params, seed);
        let y = self.value(&config)?;
        let anchor = match self.variant {
            Variant::V => None,
            // The last of the n i.i.d. points serves as U_0.
            Variant::W => Some(config.len() - 1),
        };
        self.step(&config, y, anchor, &mut rng::stream(seed, &[rng::domain::COUPLING]))
    }
}

fn default_method(params: &ModelParams) -> VolumeMethod {
    VolumeMethod::auto(params.d)
}

pub fn size_biased_pair_v(params: &ModelParams, seed: u64, method: VolumeMethod) -> Result<CouplingDraw> {
    ProcessCoupler::new(params, Variant::V, method)?.draw(seed)
}

pub fn size_biased_pair_w(params: &ModelParams, seed: u64) -> Result<CouplingDraw> {
    ProcessCoupler::new(params, Variant::W, default_method(params))?.draw(seed)
}

/// Independent coupling draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingBatch {
    pub variant: Variant,
    pub params: ModelParams,
    pub seed: u64,
    pub draws: Vec<CouplingDraw>,
}

impl CouplingBatch {
    /// CSV with header `y,y_prime,bernoulli`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "y,y_prime,bernoulli")?;
        for d in &self.draws {
            writeln!(out, "{},{},{}", format_f64(d.y), format_f64(d.y_prime), d.bernoulli)?;
        }
        Ok(())
    }

    pub fn ys(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.y).collect()
    }

    pub fn y_primes(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.y_prime).collect()
    }
}

/// `count` independent draws, seeded per draw; parallel on the current pool.
pub fn coupling_draws(
    params: &ModelParams,
    variant: Variant,
    count: usize,
    seed: u64,
    method: VolumeMethod,
) -> Result<CouplingBatch> {
    let coupler = ProcessCoupler::new(params, variant, method)?;
    let draws = (0..count)
        .into_par_iter()
        .map(|i| coupler.draw(replicate_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingBatch {
        variant,
        params: *params,
        seed,
        draws,
    })
}

/// Comparison of `E[g(Y')]` with `E[Y g(Y)] / E[Y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBiasCheck {
    pub draws: usize,
    pub mean_g_y_prime: f64,
    pub se_g_y_prime: f64,
    pub size_biased_mean: f64,
    pub se_size_biased_mean: f64,
    /// Gap in units of `se_g_y_prime + se_size_biased_mean`, an upper bound on
    /// the standard error of the difference whatever the correlation.
    pub z: f64,
    pub pass: bool,
}

fn mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    s / c as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs.iter().copied());
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Size-bias identity check at `z_max` standard errors.
pub fn size_bias_check(ys: &[f64], y_primes: &[f64], g: impl Fn(f64) -> f64, z_max: f64) -> Result<SizeBiasCheck> {
    let k = ys.len();
    if k < 2 || y_primes.len() != k {
        return Err(Error::domain("size-bias check needs two equally long samples of length >= 2"));
    }
    let kf = k as f64;
    let gp: Vec<f64> = y_primes.iter().map(|&y| g(y)).collect();
    let mean_gp = mean(gp.iter().copied());
    let se_gp = (sample_variance(&gp) / kf).sqrt();

    let top: Vec<f64> = ys.iter().map(|&y| y * g(y)).collect();
    let a = mean(top.iter().copied());
    let b = mean(ys.iter().copied());
    if !(b > 0.0) {
        return Err(Error::domain("size-bias check needs a positive mean"));
    }
    let ratio = a / b;
    // Delta method for a ratio of means.
    let linear: Vec<f64> = top.iter().zip(ys).map(|(t, y)| t - ratio * y).collect();
    let se_ratio = (sample_variance(&linear) / kf).sqrt() / b;

    let se = se_gp + se_ratio;
    let gap = mean_gp - ratio;
    let z = if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SizeBiasCheck {
        draws: k,
        mean_g_y_prime: mean_gp,
        se_g_y_prime: se_gp,
        size_biased_mean: ratio,
        se_size_biased_mean: se_ratio,
        z,
        pass: z.abs() <= z_max,
    })
}

/// Bootstrap resamples used by [`estimate_delta`].
pub const BOOTSTRAP_RESAMPLES: usize = 500;

/// Nested estimate of `sqrt(Var E[Y' - Y | configuration])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub variant: Variant,
    pub n: u64,
    pub d: usize,
    pub rho: f64,
    pub delta_hat: f64,
    pub std_error: f64,
    /// `sqrt(eta / n)`.
    pub bound: f64,
    /// The bias-corrected variance came out negative and was reported as 0.
    pub degenerate: bool,
}

fn corrected_delta(means: &[f64], vars: &[f64], inner: usize, idx: impl Iterator<Item = usize> + Clone) -> f64 {
    let r = idx.clone().count() as f64;
    let mu = idx.clone().map(|i| means[i]).sum::<f64>() / r;
    let outer_var = idx.clone().map(|i| (means[i] - mu).powi(2)).sum::<f64>() / (r - 1.0);
    let noise = idx.map(|i| vars[i]).sum::<f64>() / r / inner as f64;
    outer_var - noise
}

/// Estimates `Delta` by `outer` configurations with `inner` coupling redraws
/// each. Conditioning on the whole configuration rather than on `Y` can only
/// enlarge the variance, so the estimate is biased upward.
pub fn estimate_delta(params: &ModelParams, variant: Variant, outer: usize, inner: usize, seed: u64) -> Result<DeltaEstimate> {
    if outer < 100 || inner < 100 {
        return Err(Error::domain(format!(
            "estimate_delta needs outer >= 100 and inner >= 100, got {outer} and {inner}"
        )));
    }
    let eta = match variant {
        Variant::V => eta_v(params)?,
        Variant::W => eta_s(params)?,
    };
    let coupler = ProcessCoupler::new(params, variant, default_method(params))?;
    let stats = (0..outer)
        .into_par_iter()
        .map(|r| {
            let config = sample_configuration(params, rng::derive_seed(seed, &[rng::domain::DELTA_OUTER, r as u64]));
            let y = coupler.value(&config)?;
            let mut rng = rng::stream(seed, &[rng::domain::DELTA_INNER, r as u64]);
            let mut diffs = Vec::with_capacity(inner);
            for _ in 0..inner {
                let anchor = match variant {
                    Variant::V => None,
                    Variant::W => Some(rng.random_range(0..config.len())),
                };
                let draw = coupler.step(&config, y, anchor, &mut rng)?;
                diffs.push(draw.y_prime - draw.y);
            }
            Ok((mean(diffs.iter().copied()), sample_variance(&diffs)))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (means, vars): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();

    let point = corrected_delta(&means, &vars, inner, 0..outer);
    let mut boot_rng = rng::stream(seed, &[rng::domain::BOOTSTRAP]);
    let mut boots = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut idx = vec![0usize; outer];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for slot in idx.iter_mut() {
            *slot = boot_rng.random_range(0..outer);
        }
        boots.push(corrected_delta(&means, &vars, inner, idx.iter().copied()).max(0.0).sqrt());
    }
    Ok(DeltaEstimate {
        variant,
        n: params.n,
        d: params.d,
        rho: params.rho,
        delta_hat: point.max(0.0).sqrt(),
        std_error: sample_variance(&boots).sqrt(),
        bound: (eta / params.n as f64).sqrt(),
        degenerate: point < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_k_endpoints() {
        for m in [1u64, 2, 7, 60, 500] {
            for p in [0.01, 0.3, 0.9] {
                assert_eq!(pi_k(m, p, 0).unwrap(), 1.0);
                assert_eq!(pi_k(m, p, m).unwrap(), 0.0);
            }
        }
        assert!(pi_k(5, 0.3, 6).is_err());
        assert!(pi_k(5, 1.0, 1).is_err());
    }

    #[test]
    fn pi_k_matches_rational_oracle() {
        let p = exact::rational(0.3).unwrap();
        let want = exact::pi_k(10, &p, 3);
        let want_f: f64 = num::ToPrimitive::to_f64(&want).unwrap();
        let got = pi_k(10, 0.3, 3).unwrap();
        assert!((got - want_f).abs() < 1e-12, "{got} vs {want_f}");
        assert_eq!(exact::pi_table(10, &p)[3], want);
        assert!(exact::pi_table(10, &p)[0].is_one());
        assert_eq!(exact::tail_table(10, &p)[4], exact::tail(10, &p, 4));
        for m in [2u64, 9, 31] {
            for pf in [0.05, 0.5, 0.95] {
                let table = PiTable::new(m, pf).unwrap();
                let pr = exact::rational(pf).unwrap();
                for k in 0..=m {
                    let e: f64 = num::ToPrimitive::to_f64(&exact::pi_k(m, &pr, k)).unwrap();
                    assert!((table.get(k).unwrap() - e).abs() < 1e-12, "m={m} p={pf} k={k}");
                }
            }
        }
    }

    #[test]
    fn huge_m_table_stays_in_range() {
        let t = PiTable::new(2_000, 0.5).unwrap();
        assert!(t.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let t = PiTable::new(1_000_000, 3.14e-6).unwrap();
        assert!(t.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn dominance_examples() {
        assert!(dominance_check(1, 0.5).unwrap());
        assert!(dominance_check(20, 0.3).unwrap());
        assert!(dominance_check(61, 0.3).is_err());
    }

    #[test]
    fn binomial_coupling_shape() {
        let c = BinomialCoupler::new(6, 0.2).unwrap();
        let mut rng = rng::stream(1, &[]);
        for _ in 0..10_000 {
            let (n, m) = c.sample(&mut rng);
            assert!(m == n || m == n + 1);
            assert!(m >= 1);
        }
        assert_eq!(couple_binomial(6, 0.2, 5).unwrap(), couple_binomial(6, 0.2, 5).unwrap());
    }

    #[test]
    fn process_draws_respect_bounds() {
        let p = ModelParams::new(2, 40, 1.0).unwrap();
        let batch = coupling_draws(&p, Variant::V, 300, 2, VolumeMethod::Exact2d).unwrap();
        for d in &batch.draws {
            assert!((d.y_prime - d.y).abs() <= p.phi + 1e-9);
            assert!(d.ball_count_after >= 1);
            if !d.bernoulli {
                assert_eq!(d.y, d.y_prime);
            }
        }
        let batch = coupling_draws(&p, Variant::W, 300, 2, VolumeMethod::Exact2d).unwrap();
        for d in &batch.draws {
            assert!((d.y_prime - d.y).abs() <= 6.0);
            assert!(d.ball_count_after >= 1);
            assert_eq!(d.y.fract(), 0.0);
        }
        let mut csv = Vec::new();
        batch.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("y,y_prime,bernoulli\n"));
    }

    #[test]
    fn size_bias_check_on_exact_law() {
        // Y uniform on {1, 2}; Y' equal to 2 with probability 2/3.
        let ys: Vec<f64> = (0..3000).map(|i| 1.0 + (i % 2) as f64).collect();
        let yp: Vec<f64> = (0..3000).map(|i| if i % 3 == 0 { 1.0 } else { 2.0 }).collect();
        let c = size_bias_check(&ys, &yp, |y| y, 4.0).unwrap();
        assert!((c.size_biased_mean - 5.0 / 3.0).abs() < 1e-12);
        assert!(c.pass);
    }

    #[test]
    fn delta_rejects_small_loops() {
        let p = ModelParams::new(1, 100, 1.0).unwrap();
        assert!(estimate_delta(&p, Variant::V, 99, 100, 1).is_err());
    }
}
