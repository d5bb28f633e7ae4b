//! Points on the flat torus `[0, n^{1/d})^d`, the toroidal metric and a
//! uniform-grid index for closed-ball queries.

use std::io::{BufRead, Read, Write};
use std::ops::ControlFlow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::unit_ball_volume;
use crate::error::{Error, Result};
use crate::rng;

/// Largest dimension accepted by [`ModelParams::new`].
pub const MAX_DIMENSION: usize = 5;

/// Which closed-form results hold for a parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityFlags {
    /// `2 rho < n^{1/d}`
    pub mean_formulas: bool,
    /// `4 rho < n^{1/d}`
    pub variance_formulas: bool,
    /// `n > 6^d phi`
    pub theorem_v: bool,
    /// `n > max(3^d, 2^{d+1} + 1) phi`
    pub theorem_s: bool,
}

/// Dimension `d`, point count `n` (also the torus volume) and grain radius `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub n: u64,
    pub rho: f64,
    /// Torus side `n^{1/d}`.
    pub side: f64,
    /// Grain volume `pi_d rho^d`.
    pub phi: f64,
    pub validity: ValidityFlags,
}

impl ModelParams {
    pub fn new(d: usize, n: u64, rho: f64) -> Result<Self> {
        if d > MAX_DIMENSION {
            return Err(Error::UnsupportedDimension(d));
        }
        Self::new_any_dimension(d, n, rho)
    }

    /// As [`ModelParams::new`] without the dimension cap.
    pub fn new_any_dimension(d: usize, n: u64, rho: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if n < 4 {
            return Err(Error::domain(format!("n must be at least 4, got {n}")));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::domain(format!("rho must be positive and finite, got {rho}")));
        }
        let nf = n as f64;
        let side = torus_side(n, d);
        let phi = unit_ball_volume(d)? * rho.powi(d as i32);
        let six = 6f64.powi(d as i32);
        let s_factor = 3f64.powi(d as i32).max(2f64.powi(d as i32 + 1) + 1.0);
        let validity = ValidityFlags {
            mean_formulas: 2.0 * rho < side,
            variance_formulas: 4.0 * rho < side,
            theorem_v: nf > six * phi,
            theorem_s: nf > s_factor * phi,
        };
        Ok(ModelParams {
            d,
            n,
            rho,
            side,
            phi,
            validity,
        })
    }

    pub fn require_mean_formulas(&self) -> Result<()> {
        check(self.validity.mean_formulas, "2 rho < n^(1/d)")
    }

    pub fn require_variance_formulas(&self) -> Result<()> {
        check(self.validity.variance_formulas, "4 rho < n^(1/d)")
    }

    pub fn require_theorem_v(&self) -> Result<()> {
        check(self.validity.theorem_v, "n > 6^d phi")
    }

    pub fn require_theorem_s(&self) -> Result<()> {
        check(self.validity.theorem_s, "n > max(3^d, 2^(d+1) + 1) phi")
    }
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validity(what))
    }
}

/// `n^{1/d}`, exact for perfect powers.
pub fn torus_side(n: u64, d: usize) -> f64 {
    let nf = n as f64;
    match d {
        1 => nf,
        2 => nf.sqrt(),
        3 => nf.cbrt(),
        _ => nf.powf(1.0 / d as f64),
    }
}

#[inline]
fn wrap_coord(c: f64, side: f64) -> f64 {
    let w = c.rem_euclid(side);
    if w >= side {
        0.0
    } else {
        w
    }
}

/// Minimum-image difference `b - a` along one axis.
#[inline]
pub fn min_image(delta: f64, side: f64) -> f64 {
    delta - side * (delta / side).round()
}

/// Squared toroidal distance between coordinate slices of equal length.
#[inline]
pub fn toroidal_distance_sq(a: &[f64], b: &[f64], side: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let dx = min_image(y - x, side);
            dx * dx
        })
        .sum()
}

/// A point of the torus; every coordinate lies in `[0, side)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: Vec<f64>, side: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("a point needs at least one coordinate"));
        }
        if let Some(c) = coords.iter().find(|c| !(**c >= 0.0 && **c < side)) {
            return Err(Error::domain(format!("coordinate {c} outside [0, {side})")));
        }
        Ok(TorusPoint(coords))
    }

    /// Reduces arbitrary real coordinates onto the torus.
    pub fn wrapped(coords: &[f64], side: f64) -> Self {
        TorusPoint(coords.iter().map(|&c| wrap_coord(c, side)).collect())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn toroidal_distance(x: &TorusPoint, y: &TorusPoint, side: f64) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::domain(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(toroidal_distance_sq(x.coords(), y.coords(), side).sqrt())
}

/// Uniform grid over the torus, stored in compressed-row form.
#[derive(Debug, Clone)]
struct GridIndex {
    cells_per_axis: usize,
    cell_edge: f64,
    start: Vec<u32>,
    items: Vec<u32>,
}

impl GridIndex {
    fn build(coords: &[f64], dim: usize, side: f64, rho: f64, count: usize) -> Self {
        let mut k = ((side / rho).floor() as usize).max(1);
        // Keep the table proportional to the point count when rho is tiny.
        let cap = ((4 * count.max(1)) as f64).powf(1.0 / dim as f64).floor().max(1.0) as usize;
        k = k.min(cap);
        let cell_edge = side / k as f64;
        let total = k.pow(dim as u32);
        let mut counts = vec![0u32; total + 1];
        let cell_ids: Vec<usize> = coords
            .chunks_exact(dim)
            .map(|p| Self::cell_of(p, k, cell_edge))
            .collect();
        for &c in &cell_ids {
            counts[c + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; cell_ids.len()];
        for (id, &c) in cell_ids.iter().enumerate() {
            items[fill[c] as usize] = id as u32;
            fill[c] += 1;
        }
        GridIndex {
            cells_per_axis: k,
            cell_edge,
            start: counts,
            items,
        }
    }

    #[inline]
    fn axis_cell(c: f64, k: usize, edge: f64) -> usize {
        ((c / edge) as usize).min(k - 1)
    }

    fn cell_of(p: &[f64], k: usize, edge: f64) -> usize {
        p.iter()
            .rev()
            .fold(0, |acc, &c| acc * k + Self::axis_cell(c, k, edge))
    }

    fn cell_members(&self, cell: usize) -> &[u32] {
        &self.items[self.start[cell] as usize..self.start[cell + 1] as usize]
    }
}

/// `n` points on the torus together with their grid index.
#[derive(Debug, Clone)]
pub struct PointConfiguration {
    dim: usize,
    side: f64,
    rho: f64,
    coords: Vec<f64>,
    grid: GridIndex,
}

impl PointConfiguration {
    /// Builds a configuration from flat coordinates (`dim` per point). `rho`
    /// sets the grid resolution; queries up to `3 rho` are supported.
    pub fn from_coords(dim: usize, side: f64, rho: f64, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::domain("coordinate buffer length must be a multiple of dim"));
        }
        if !(side > 0.0) || !(rho > 0.0) {
            return Err(Error::domain("side and rho must be positive"));
        }
        if let Some(c) = coords.iter().find(|c| !(**c >= 0.0 && **c < side)) {
            return Err(Error::domain(format!("coordinate {c} outside [0, {side})")));
        }
        let count = coords.len() / dim;
        let grid = GridIndex::build(&coords, dim, side, rho, count);
        Ok(PointConfiguration {
            dim,
            side,
            rho,
            coords,
            grid,
        })
    }

    pub fn from_points(side: f64, rho: f64, points: &[TorusPoint]) -> Result<Self> {
        let dim = points
            .first()
            .map(TorusPoint::dim)
            .ok_or_else(|| Error::domain("empty point list"))?;
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::domain("points of mixed dimension"));
        }
        let coords = points.iter().flat_map(|p| p.coords().iter().copied()).collect();
        Self::from_coords(dim, side, rho, coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn torus_point(&self, i: usize) -> TorusPoint {
        TorusPoint(self.point(i).to_vec())
    }

    /// Grid cells per axis and cell edge length.
    pub fn grid_shape(&self) -> (usize, f64) {
        (self.grid.cells_per_axis, self.grid.cell_edge)
    }

    /// Copy with point `i` relocated to `to`.
    pub fn with_point_moved(&self, i: usize, to: &[f64]) -> Self {
        let mut coords = self.coords.clone();
        coords[i * self.dim..(i + 1) * self.dim].copy_from_slice(to);
        let grid = GridIndex::build(&coords, self.dim, self.side, self.rho, self.len());
        PointConfiguration { coords, grid, ..*self }
    }

    /// Copy with `extra` appended as the last point.
    pub fn with_point_added(&self, extra: &[f64]) -> Self {
        let mut coords = self.coords.clone();
        coords.extend_from_slice(extra);
        let grid = GridIndex::build(&coords, self.dim, self.side, self.rho, coords.len() / self.dim);
        PointConfiguration { coords, grid, ..*self }
    }

    /// Copy without point `i` (later points shift down by one).
    pub fn with_point_removed(&self, i: usize) -> Self {
        let mut coords = self.coords.clone();
        coords.drain(i * self.dim..(i + 1) * self.dim);
        let grid = GridIndex::build(&coords, self.dim, self.side, self.rho, coords.len() / self.dim);
        PointConfiguration { coords, grid, ..*self }
    }

    fn check_query(&self, center: &[f64], r: f64) -> Result<()> {
        if center.len() != self.dim {
            return Err(Error::domain("query dimension mismatch"));
        }
        if !(r >= 0.0) {
            return Err(Error::domain("query radius must be non-negative"));
        }
        if r > 3.0 * self.rho * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "query radius {r} exceeds the supported 3 rho = {}",
                3.0 * self.rho
            )));
        }
        Ok(())
    }

    /// Visits every point within closed toroidal distance `r` of `center`,
    /// passing its id and squared distance. The visitor may stop early.
    pub fn visit_within<F>(&self, center: &[f64], r: f64, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, f64) -> ControlFlow<()>,
    {
        self.check_query(center, r)?;
        let k = self.grid.cells_per_axis;
        let edge = self.grid.cell_edge;
        let reach = (r / edge).ceil() as usize;
        let axes: Vec<Vec<usize>> = center
            .iter()
            .map(|&c| {
                let home = GridIndex::axis_cell(wrap_coord(c, self.side), k, edge);
                if 2 * reach + 1 >= k {
                    (0..k).collect()
                } else {
                    (0..=2 * reach).map(|o| (home + k + o - reach) % k).collect()
                }
            })
            .collect();
        let r2 = r * r;
        let mut odometer = vec![0usize; self.dim];
        'cells: loop {
            let cell = odometer
                .iter()
                .enumerate()
                .rev()
                .fold(0, |acc, (axis, &o)| acc * k + axes[axis][o]);
            for &id in self.grid.cell_members(cell) {
                let id = id as usize;
                let dist2 = toroidal_distance_sq(center, self.point(id), self.side);
                if dist2 <= r2 && visit(id, dist2).is_break() {
                    return Ok(());
                }
            }
            for axis in 0..self.dim {
                odometer[axis] += 1;
                if odometer[axis] < axes[axis].len() {
                    continue 'cells;
                }
                odometer[axis] = 0;
            }
            break;
        }
        Ok(())
    }

    /// Ids of all points within closed toroidal distance `r` of `center`, ascending.
    pub fn neighbors_within(&self, center: &[f64], r: f64) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.visit_within(center, r, |id, _| {
            out.push(id);
            ControlFlow::Continue(())
        })?;
        out.sort_unstable();
        Ok(out)
    }

    /// Number of points within closed distance `r` of `center`.
    pub fn count_within(&self, center: &[f64], r: f64) -> Result<usize> {
        let mut n = 0;
        self.visit_within(center, r, |_, _| {
            n += 1;
            ControlFlow::Continue(())
        })?;
        Ok(n)
    }

    /// Coordinates as CSV with header `x0,x1,..` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for p in self.coords.chunks_exact(self.dim) {
            let row: Vec<String> = p.iter().map(|c| format_f64(*c)).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, side: f64, rho: f64) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Io("empty csv".into()))??;
        let dim = header.split(',').count();
        let mut coords = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<&str> = line.split(',').collect();
            if row.len() != dim {
                return Err(Error::Io(format!("row has {} fields, expected {dim}", row.len())));
            }
            for f in row {
                coords.push(f.trim().parse::<f64>().map_err(|e| Error::Io(e.to_string()))?);
            }
        }
        Self::from_coords(dim, side, rho, coords)
    }

    /// Coordinates as a flat little-endian `f64` stream.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        for c in &self.coords {
            out.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R, dim: usize, side: f64, rho: f64) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Io("binary length is not a multiple of 8".into()));
        }
        let coords = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        Self::from_coords(dim, side, rho, coords)
    }
}

/// 17 significant digits, the shortest width that always round-trips.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Uniform point of the torus.
pub fn uniform_point<R: Rng + ?Sized>(rng: &mut R, dim: usize, side: f64) -> Vec<f64> {
    (0..dim).map(|_| wrap_coord(rng.random::<f64>() * side, side)).collect()
}

/// Uniform point of the closed ball `B_r(center)`, reduced onto the torus.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &[f64], r: f64, side: f64) -> Vec<f64> {
    let dim = center.len();
    let offset = loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let radius = r * rng.random::<f64>().powf(1.0 / dim as f64);
            break g.into_iter().map(|x| x * radius / norm).collect::<Vec<f64>>();
        }
    };
    center
        .iter()
        .zip(offset)
        .map(|(&c, o)| wrap_coord(c + o, side))
        .collect()
}

/// `n` i.i.d. uniform points on the torus of `params`, indexed at radius `rho`.
pub fn sample_configuration(params: &ModelParams, seed: u64) -> PointConfiguration {
    let mut rng = rng::stream(seed, &[rng::domain::CONFIGURATION]);
    let count = params.n as usize;
    let mut coords = Vec::with_capacity(count * params.d);
    for _ in 0..count {
        coords.extend(uniform_point(&mut rng, params.d, params.side));
    }
    PointConfiguration::from_coords(params.d, params.side, params.rho, coords)
        .expect("sampled coordinates lie on the torus")
}
