//! Covered volume and isolated-point count of a configuration, and batches of
//! independent replicates.
//!
//! The planar union area is computed exactly. Each disk keeps the boundary
//! arcs that no other disk covers; Green's theorem with the field
//! `F = (x, y) / 2` turns the area of the union inside the fundamental square
//! `[0, side)^2` into a sum over those arcs, each shifted into the square, plus
//! the flux of `F` through the two square edges `x = side` and `y = side`.
//! That flux is `side / 2` times the covered length of each edge, which is a
//! one-dimensional union of chords.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::ops::ControlFlow;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{format_f64, min_image, sample_configuration, ModelParams, PointConfiguration};
use crate::rng;

/// How the covered volume is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeMethod {
    /// Arc union on the circle; `d = 1` only.
    Exact1d,
    /// Circular-arc boundary decomposition; `d = 2` only.
    Exact2d,
    /// Grid-stratified Monte Carlo with `samples` uniform points.
    MonteCarlo { samples: u64, seed: u64 },
}

impl VolumeMethod {
    /// Exact for `d <= 2`, otherwise Monte Carlo with `10^6` samples.
    pub fn auto(d: usize) -> Self {
        match d {
            1 => VolumeMethod::Exact1d,
            2 => VolumeMethod::Exact2d,
            _ => VolumeMethod::MonteCarlo {
                samples: 1_000_000,
                seed: 0,
            },
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, VolumeMethod::MonteCarlo { .. })
    }

    fn reseeded(self, seed: u64) -> Self {
        match self {
            VolumeMethod::MonteCarlo { samples, .. } => VolumeMethod::MonteCarlo { samples, seed },
            exact => exact,
        }
    }
}

/// Covered volume with its standard error (zero for the exact modes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Volume of the union of the closed `rho`-balls around the points.
pub fn covered_volume(config: &PointConfiguration, rho: f64, method: VolumeMethod) -> Result<VolumeEstimate> {
    if !(rho > 0.0) || rho > config.rho() * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "volume radius {rho} must be positive and at most the index radius {}",
            config.rho()
        )));
    }
    let exact = |value| Ok(VolumeEstimate { value, std_error: 0.0 });
    match method {
        VolumeMethod::Exact1d => {
            if config.dim() != 1 {
                return Err(Error::domain("exact-1d needs d = 1"));
            }
            check_no_self_overlap(config, rho)?;
            exact(union_length_1d(config.coords(), rho, config.side()))
        }
        VolumeMethod::Exact2d => {
            if config.dim() != 2 {
                return Err(Error::domain("exact-2d needs d = 2"));
            }
            check_no_self_overlap(config, rho)?;
            exact(union_area_2d(config, rho)?)
        }
        VolumeMethod::MonteCarlo { samples, seed } => monte_carlo_volume(config, rho, samples, seed),
    }
}

fn check_no_self_overlap(config: &PointConfiguration, rho: f64) -> Result<()> {
    if 2.0 * rho >= config.side() {
        return Err(Error::domain(format!(
            "exact volume needs 2 rho < side ({} >= {})",
            2.0 * rho,
            config.side()
        )));
    }
    Ok(())
}

/// Length of the union of arcs `[start, start + len)` on a circle of the given
/// circumference. Starts may be any real number.
pub fn circle_union_length(arcs: &[(f64, f64)], circumference: f64) -> f64 {
    let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(arcs.len() + 4);
    for &(start, len) in arcs {
        if len <= 0.0 {
            continue;
        }
        if len >= circumference {
            return circumference;
        }
        let s = start.rem_euclid(circumference);
        let e = s + len;
        if e > circumference {
            pieces.push((s, circumference));
            pieces.push((0.0, e - circumference));
        } else {
            pieces.push((s, e));
        }
    }
    merged(&mut pieces).iter().map(|(a, b)| b - a).sum()
}

/// Sorts and merges overlapping closed intervals.
fn merged(pieces: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for &(a, b) in pieces.iter() {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn union_length_1d(coords: &[f64], rho: f64, side: f64) -> f64 {
    let arcs: Vec<(f64, f64)> = coords.iter().map(|&x| (x - rho, 2.0 * rho)).collect();
    circle_union_length(&arcs, side)
}

/// Angular intervals of the circle of disk `i` covered by other disks, or
/// `None` if the disk duplicates a lower-indexed one.
fn covered_angles(config: &PointConfiguration, i: usize, r: f64) -> Result<Option<Vec<(f64, f64)>>> {
    const COINCIDENT: f64 = 1e-12;
    let side = config.side();
    let c = config.point(i);
    let mut intervals = Vec::new();
    let mut shadowed = false;
    config.visit_within(c, 2.0 * r, |j, _| {
        if j == i {
            return ControlFlow::Continue(());
        }
        let q = config.point(j);
        let raw = [q[0] - c[0], q[1] - c[1]];
        for sx in [-1.0, 0.0, 1.0] {
            for sy in [-1.0, 0.0, 1.0] {
                let dx = raw[0] + sx * side;
                let dy = raw[1] + sy * side;
                let dist = dx.hypot(dy);
                if dist >= 2.0 * r {
                    continue;
                }
                if dist < COINCIDENT {
                    if j < i {
                        shadowed = true;
                        return ControlFlow::Break(());
                    }
                    continue;
                }
                let centre = dy.atan2(dx);
                let half = (dist / (2.0 * r)).min(1.0).acos();
                intervals.push((centre - half, 2.0 * half));
            }
        }
        ControlFlow::Continue(())
    })?;
    Ok(if shadowed { None } else { Some(intervals) })
}

/// Complement in `[0, 2 pi)` of a union of angular arcs.
fn free_arcs(covered: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pieces = Vec::with_capacity(covered.len() + 2);
    for &(start, len) in covered {
        if len >= TAU {
            return Vec::new();
        }
        let s = start.rem_euclid(TAU);
        let e = s + len;
        if e > TAU {
            pieces.push((s, TAU));
            pieces.push((0.0, e - TAU));
        } else {
            pieces.push((s, e));
        }
    }
    let mut free = Vec::new();
    let mut cursor = 0.0;
    for (a, b) in merged(&mut pieces) {
        if a > cursor {
            free.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if cursor < TAU {
        free.push((cursor, TAU));
    }
    free
}

/// Angles in `[0, 2 pi)` where the circle meets the lines `x = 0 (mod side)`
/// or `y = 0 (mod side)`.
fn seam_angles(c: &[f64], r: f64, side: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(4);
    for seam in [0.0, side] {
        let cx = (seam - c[0]) / r;
        if cx.abs() < 1.0 {
            let a = cx.acos();
            out.push(a);
            out.push(TAU - a);
        }
        let sy = (seam - c[1]) / r;
        if sy.abs() < 1.0 {
            let a = sy.asin();
            out.push(a.rem_euclid(TAU));
            out.push((PI - a).rem_euclid(TAU));
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Flux of `(x, y)/2` through the arc `[a, b]` of the circle centred at `c`.
fn arc_flux(cx: f64, cy: f64, r: f64, a: f64, b: f64) -> f64 {
    0.5 * (r * r * (b - a) + r * (cx * (b.sin() - a.sin()) - cy * (b.cos() - a.cos())))
}

fn union_area_2d(config: &PointConfiguration, r: f64) -> Result<f64> {
    let side = config.side();
    let mut flux = 0.0;
    for i in 0..config.len() {
        let Some(covered) = covered_angles(config, i, r)? else {
            continue;
        };
        let arcs = free_arcs(&covered);
        if arcs.is_empty() {
            continue;
        }
        let c = config.point(i);
        let cuts = seam_angles(c, r, side);
        for (a, b) in arcs {
            let mut lo = a;
            for &cut in cuts.iter().filter(|&&t| t > a && t < b) {
                flux += shifted_arc_flux(c, r, side, lo, cut);
                lo = cut;
            }
            flux += shifted_arc_flux(c, r, side, lo, b);
        }
    }
    let edge_x = edge_cover(config, r, 0);
    let edge_y = edge_cover(config, r, 1);
    Ok(flux + 0.5 * side * (edge_x + edge_y))
}

/// Arc flux after translating the arc into the fundamental square.
fn shifted_arc_flux(c: &[f64], r: f64, side: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mid = 0.5 * (a + b);
    let px = c[0] + r * mid.cos();
    let py = c[1] + r * mid.sin();
    let sx = -side * (px / side).floor();
    let sy = -side * (py / side).floor();
    arc_flux(c[0] + sx, c[1] + sy, r, a, b)
}

/// Covered length of the line `coord[axis] = 0` on the torus.
fn edge_cover(config: &PointConfiguration, r: f64, axis: usize) -> f64 {
    let side = config.side();
    let other = 1 - axis;
    let chords: Vec<(f64, f64)> = (0..config.len())
        .filter_map(|i| {
            let p = config.point(i);
            let off = min_image(p[axis], side);
            (off.abs() < r).then(|| {
                let h = (r * r - off * off).sqrt();
                (p[other] - h, 2.0 * h)
            })
        })
        .collect();
    circle_union_length(&chords, side)
}

const MC_CHUNK: u64 = 1 << 16;

fn monte_carlo_volume(config: &PointConfiguration, rho: f64, samples: u64, seed: u64) -> Result<VolumeEstimate> {
    if samples == 0 {
        return Err(Error::domain("monte-carlo needs at least one sample"));
    }
    let dim = config.dim();
    let side = config.side();
    let (k, edge) = config.grid_shape();
    let cells = k.pow(dim as u32);
    let per_cell = (samples / cells as u64).max(1);
    let total_volume = side.powi(dim as i32);
    let cell_volume = total_volume / cells as f64;

    let hits: Vec<u64> = (0..cells)
        .into_par_iter()
        .map(|cell| {
            let mut origin = vec![0.0; dim];
            let mut rem = cell;
            for o in origin.iter_mut() {
                *o = (rem % k) as f64 * edge;
                rem /= k;
            }
            let mut hit = 0u64;
            let mut point = vec![0.0; dim];
            let chunks = per_cell.div_ceil(MC_CHUNK);
            for chunk in 0..chunks {
                let mut rng = rng::stream(seed, &[rng::domain::VOLUME_MC, cell as u64, chunk]);
                let m = MC_CHUNK.min(per_cell - chunk * MC_CHUNK);
                for _ in 0..m {
                    for (p, o) in point.iter_mut().zip(&origin) {
                        *p = (o + rng.random::<f64>() * edge).min(side * (1.0 - f64::EPSILON));
                    }
                    if is_covered(config, &point, rho) {
                        hit += 1;
                    }
                }
            }
            hit
        })
        .collect();

    let m = per_cell as f64;
    let value = cell_volume * hits.iter().map(|&h| h as f64 / m).sum::<f64>();
    let variance: f64 = hits
        .iter()
        .map(|&h| {
            let p = h as f64 / m;
            cell_volume * cell_volume * p * (1.0 - p) / (m - 1.0).max(1.0)
        })
        .sum();
    Ok(VolumeEstimate {
        value,
        std_error: variance.sqrt(),
    })
}

fn is_covered(config: &PointConfiguration, x: &[f64], rho: f64) -> bool {
    let mut found = false;
    config
        .visit_within(x, rho, |_, _| {
            found = true;
            ControlFlow::Break(())
        })
        .expect("radius within index support");
    found
}

/// Compares the exact planar area against a coarse Monte Carlo estimate and
/// fails if they differ by more than six standard errors.
pub fn exact_area_self_check(config: &PointConfiguration, rho: f64, seed: u64) -> Result<()> {
    let exact = covered_volume(config, rho, VolumeMethod::Exact2d)?.value;
    let mc = monte_carlo_volume(config, rho, 100_000, seed)?;
    let gap = (exact - mc.value).abs();
    if gap > 6.0 * mc.std_error.max(1e-9) {
        return Err(Error::numerical(
            format!("exact area {exact} disagrees with Monte Carlo {}", mc.value),
            gap,
        ));
    }
    Ok(())
}

/// Number of points with no other point within closed distance `rho`.
pub fn isolated_count(config: &PointConfiguration, rho: f64) -> Result<u64> {
    let mut isolated = 0;
    for i in 0..config.len() {
        let mut alone = true;
        config.visit_within(config.point(i), rho, |j, _| {
            if j != i {
                alone = false;
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        if alone {
            isolated += 1;
        }
    }
    Ok(isolated)
}

/// Number of points that have another point within closed distance `rho`.
pub fn nonisolated_count(config: &PointConfiguration, rho: f64) -> Result<u64> {
    Ok(config.len() as u64 - isolated_count(config, rho)?)
}

/// Seed of replicate `index` in a batch seeded with `seed`.
pub fn replicate_seed(seed: u64, index: u64) -> u64 {
    rng::derive_seed(seed, &[index])
}

/// Independent samples of `V` and `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateBatch {
    pub params: ModelParams,
    pub seed: u64,
    pub samples_v: Vec<f64>,
    pub samples_s: Vec<u64>,
}

impl ReplicateBatch {
    pub fn len(&self) -> usize {
        self.samples_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples_s.is_empty()
    }

    /// CSV with header `replicate,V,S`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "replicate,V,S")?;
        for (i, (v, s)) in self.samples_v.iter().zip(&self.samples_s).enumerate() {
            writeln!(out, "{i},{},{s}", format_f64(*v))?;
        }
        Ok(())
    }
}

/// Runs `count` independent replicates on a pool of `parallelism` threads.
/// Results depend only on `seed`, never on the thread count.
pub fn run_replicates(
    params: &ModelParams,
    count: usize,
    seed: u64,
    method: VolumeMethod,
    parallelism: usize,
) -> Result<ReplicateBatch> {
    if count == 0 {
        return Err(Error::domain("replicate count must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let results: Result<Vec<(f64, u64)>> = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let rs = replicate_seed(seed, i as u64);
                let config = sample_configuration(params, rs);
                let v = covered_volume(&config, params.rho, method.reseeded(rs))?.value;
                let s = isolated_count(&config, params.rho)?;
                Ok((v, s))
            })
            .collect()
    });
    let (samples_v, samples_s) = results?.into_iter().unzip();
    Ok(ReplicateBatch {
        params: *params,
        seed,
        samples_v,
        samples_s,
    })
}
