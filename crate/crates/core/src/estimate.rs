//! Interrogation grids, the naive density estimator, area-averaging and error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::model::Vec2;

pub const DEFAULT_FLOOR_FRACTION: f64 = 1e-3;
pub const DEFAULT_N_CAP: usize = 20;

/// Cell layout of a uniform rectangular grid. Cells are row-major with `j` (y) outer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridGeometry {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        let g = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::config("grid", "nx and ny must be >= 1"));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::config("grid", "x extents must be finite and increasing"));
        }
        if !(self.y_min.is_finite() && self.y_max.is_finite() && self.y_max > self.y_min) {
            return Err(Error::config("grid", "y extents must be finite and increasing"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    fn x_edge(&self, i: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * i as f64 / self.nx as f64
    }

    fn y_edge(&self, j: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * j as f64 / self.ny as f64
    }

    pub fn centroid(&self, i: usize, j: usize) -> Vec2 {
        [
            self.x_min + (i as f64 + 0.5) * self.dx(),
            self.y_min + (j as f64 + 0.5) * self.dy(),
        ]
    }

    fn bin(lo: f64, hi: f64, n: usize, v: f64, edge: impl Fn(usize) -> f64) -> Option<usize> {
        if !(v >= lo && v < hi) {
            return None;
        }
        let mut i = (((v - lo) / (hi - lo)) * n as f64).floor() as usize;
        i = i.min(n - 1);
        if v < edge(i) {
            i -= 1;
        } else if i + 1 < n && v >= edge(i + 1) {
            i += 1;
        }
        Some(i)
    }

    /// Half-open cell containing `p`; a point on an interior edge goes to the higher index.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let i = Self::bin(self.x_min, self.x_max, self.nx, p[0], |k| self.x_edge(k))?;
        let j = Self::bin(self.y_min, self.y_max, self.ny, p[1], |k| self.y_edge(k))?;
        Some((i, j))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Per-snapshot accumulated walker weight on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InterrogationGrid {
    pub geometry: GridGeometry,
    /// Elapsed times since launch, ascending.
    pub snapshot_times: Vec<f64>,
    pub cells: Vec<Vec<f64>>,
}

impl InterrogationGrid {
    pub fn new(geometry: GridGeometry, mut snapshot_times: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::config("time.snapshots", "snapshot times must be finite and >= 0"));
        }
        snapshot_times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let cells = vec![vec![0.0; geometry.len()]; snapshot_times.len()];
        Ok(Self {
            geometry,
            snapshot_times,
            cells,
        })
    }

    pub fn total_weight(&self, snapshot: usize) -> f64 {
        self.cells[snapshot].iter().sum()
    }
}

/// Adds the weight of every alive walker inside the grid to its cell.
pub fn accumulate_snapshot(
    grid: &mut InterrogationGrid,
    snapshot: usize,
    positions: &[Vec2],
    weights: &[f64],
    alive: &[bool],
) -> Result<()> {
    if snapshot >= grid.cells.len() {
        return Err(Error::Precondition(format!("snapshot index {snapshot} out of range")));
    }
    let g = grid.geometry;
    let cells = &mut grid.cells[snapshot];
    for ((p, w), a) in positions.iter().zip(weights).zip(alive) {
        if !*a {
            continue;
        }
        if let Some((i, j)) = g.cell_of(*p) {
            cells[g.index(i, j)] += *w;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowShape {
    #[default]
    Square,
    Circular,
}

/// Provenance carried with a field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    /// Launched walkers; 0 for analytic fields.
    pub n_walkers: u64,
    pub dt: f64,
    pub cell_area: f64,
    pub respawn: bool,
    pub window: Option<usize>,
    pub window_shape: Option<WindowShape>,
    pub seed: Option<u64>,
    /// Elapsed time since launch.
    pub tau: f64,
    pub source: String,
}

/// Green's function values on a grid at one snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct GreensField {
    pub geometry: GridGeometry,
    /// Time label in forward time.
    pub time: f64,
    pub values: Vec<f64>,
    pub meta: FieldMeta,
}

impl GreensField {
    pub fn zeros(geometry: GridGeometry, time: f64) -> Self {
        Self {
            geometry,
            time,
            values: vec![0.0; geometry.len()],
            meta: FieldMeta {
                cell_area: geometry.cell_area(),
                ..FieldMeta::default()
            },
        }
    }

    /// Samples `f` at every cell centroid.
    pub fn from_fn(geometry: GridGeometry, time: f64, mut f: impl FnMut(Vec2) -> Result<f64>) -> Result<Self> {
        let mut out = Self::zeros(geometry, time);
        for j in 0..geometry.ny {
            for i in 0..geometry.nx {
                out.values[geometry.index(i, j)] = f(geometry.centroid(i, j))?;
            }
        }
        Ok(out)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.geometry.index(i, j)]
    }

    /// `sum(values) * cell_area`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.cell_area()
    }

    fn check_same_grid(&self, other: &GreensField) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch(format!(
                "{:?} vs {:?}",
                self.geometry, other.geometry
            )));
        }
        Ok(())
    }
}

/// `G = W / (N * dA)` per cell.
pub fn naive_estimate(grid: &InterrogationGrid, snapshot: usize, n_walkers: u64) -> Result<GreensField> {
    if n_walkers == 0 {
        return Err(Error::Precondition("n_walkers must be > 0".into()));
    }
    let Some(cells) = grid.cells.get(snapshot) else {
        return Err(Error::Precondition(format!("snapshot index {snapshot} out of range")));
    };
    let da = grid.geometry.cell_area();
    if !(da > 0.0) {
        return Err(Error::Precondition("cell area must be > 0".into()));
    }
    let scale = 1.0 / (n_walkers as f64 * da);
    let tau = grid.snapshot_times[snapshot];
    Ok(GreensField {
        geometry: grid.geometry,
        time: tau,
        values: cells.iter().map(|w| w * scale).collect(),
        meta: FieldMeta {
            n_walkers,
            cell_area: da,
            tau,
            source: "estimate".into(),
            ..FieldMeta::default()
        },
    })
}

/// Multiplies every value by `exp(-gamma * tau)`.
pub fn apply_decay(field: &GreensField, gamma: f64, tau: f64) -> Result<GreensField> {
    if !(gamma >= 0.0 && tau >= 0.0) {
        return Err(Error::Precondition("gamma and tau must be >= 0".into()));
    }
    let mut out = field.clone();
    if gamma != 0.0 {
        let s = (-gamma * tau).exp();
        out.values.iter_mut().for_each(|v| *v *= s);
    }
    Ok(out)
}

/// Mean absolute deviation over cells where the two fields are not both zero.
pub fn sigma_g(est: &GreensField, reference: &GreensField) -> Result<f64> {
    est.check_same_grid(reference)?;
    let mut sum = 0.0;
    let mut m = 0usize;
    for (a, b) in est.values.iter().zip(&reference.values) {
        if *a == 0.0 && *b == 0.0 {
            continue;
        }
        sum += (a - b).abs();
        m += 1;
    }
    if m == 0 {
        return Err(Error::UndefinedMetric("no cells in the inclusion set".into()));
    }
    Ok(sum / m as f64)
}

/// Maximum relative error and the number of cells it ranges over.
///
/// Only cells with `exact >= floor_fraction * max(exact)` and `exact > 0` count.
pub fn emax_with_count(est: &GreensField, exact: &GreensField, floor_fraction: f64) -> Result<(f64, usize)> {
    est.check_same_grid(exact)?;
    if !(0.0..1.0).contains(&floor_fraction) {
        return Err(Error::Precondition("floor_fraction must be in [0, 1)".into()));
    }
    let peak = exact.values.iter().cloned().fold(0.0_f64, f64::max);
    if !(peak > 0.0) {
        return Err(Error::UndefinedMetric("exact field is identically zero".into()));
    }
    let cut = floor_fraction * peak;
    let mut worst = 0.0_f64;
    let mut count = 0usize;
    for (e, x) in est.values.iter().zip(&exact.values) {
        if *x > 0.0 && *x >= cut {
            worst = worst.max((e - x).abs() / x);
            count += 1;
        }
    }
    Ok((worst, count))
}

pub fn emax(est: &GreensField, exact: &GreensField, floor_fraction: f64) -> Result<f64> {
    emax_with_count(est, exact, floor_fraction).map(|(e, _)| e)
}

/// How the smoothing window is chosen.
#[derive(Clone, Debug)]
pub struct SmoothingConfig<'a> {
    pub shape: WindowShape,
    /// Candidate half-widths are `0..=n_cap`.
    pub n_cap: usize,
    /// Reference field for the variance-minimizing search.
    pub reference: Option<&'a GreensField>,
    /// Half-width used when there is no reference.
    pub fixed: Option<usize>,
}

impl Default for SmoothingConfig<'_> {
    fn default() -> Self {
        Self {
            shape: WindowShape::Square,
            n_cap: DEFAULT_N_CAP,
            reference: None,
            fixed: None,
        }
    }
}

/// Largest admissible half-width per cell: limited by the domain boundary and the grid edge.
fn window_limits(g: &GridGeometry, domain: &Domain) -> Vec<usize> {
    let h = g.dx().max(g.dy());
    let mut out = vec![0usize; g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.centroid(i, j);
            let edge = i.min(g.nx - 1 - i).min(j).min(g.ny - 1 - j);
            let lim = if domain.contains(c) {
                let d = domain.distance_to_boundary(c);
                if d.is_finite() {
                    ((d / h).floor() as usize).min(edge)
                } else {
                    edge
                }
            } else {
                0
            };
            out[g.index(i, j)] = lim;
        }
    }
    out
}

struct Prefix {
    /// 2-D summed-area table, (nx+1) x (ny+1).
    sat: Vec<f64>,
    /// Per-row prefix sums, ny rows of nx+1.
    rows: Vec<f64>,
    nx: usize,
}

impl Prefix {
    fn new(g: &GridGeometry, v: &[f64]) -> Self {
        let (nx, ny) = (g.nx, g.ny);
        let mut sat = vec![0.0; (nx + 1) * (ny + 1)];
        let mut rows = vec![0.0; (nx + 1) * ny];
        for j in 0..ny {
            let mut run = 0.0;
            for i in 0..nx {
                run += v[j * nx + i];
                rows[j * (nx + 1) + i + 1] = run;
                sat[(j + 1) * (nx + 1) + i + 1] = sat[j * (nx + 1) + i + 1] + run;
            }
        }
        Self { sat, rows, nx }
    }

    /// Sum over cells `i0..=i1`, `j0..=j1`.
    fn rect(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        let w = self.nx + 1;
        self.sat[(j1 + 1) * w + i1 + 1] - self.sat[j0 * w + i1 + 1] - self.sat[(j1 + 1) * w + i0]
            + self.sat[j0 * w + i0]
    }

    fn row(&self, j: usize, i0: usize, i1: usize) -> f64 {
        let w = self.nx + 1;
        self.rows[j * w + i1 + 1] - self.rows[j * w + i0]
    }
}

/// Half-widths of each row of a circular window of radius `k * dx`.
fn circle_rows(k: usize, dx: f64, dy: f64) -> Vec<usize> {
    let r = k as f64 * dx;
    let r2 = r * r * (1.0 + 1e-12);
    let kj = (r / dy + 1e-9).floor() as usize;
    (0..=kj)
        .map(|dj| {
            let y = dj as f64 * dy;
            let rem = r2 - y * y;
            if rem < 0.0 {
                0
            } else {
                ((rem.sqrt() / dx) + 1e-9).floor() as usize
            }
        })
        .collect()
}

fn smooth_with_limits(field: &GreensField, a: usize, shape: WindowShape, limits: &[usize], prefix: &Prefix) -> Vec<f64> {
    let g = field.geometry;
    let mut out = field.values.clone();
    if a == 0 {
        return out;
    }
    let mut shapes: Vec<Option<Vec<usize>>> = vec![None; a + 1];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.index(i, j);
            let k = a.min(limits[idx]);
            if k == 0 {
                continue;
            }
            let (sum, count) = match shape {
                WindowShape::Square => {
                    let s = prefix.rect(i - k, i + k, j - k, j + k);
                    (s, ((2 * k + 1) * (2 * k + 1)) as f64)
                }
                WindowShape::Circular => {
                    let rows = shapes[k].get_or_insert_with(|| circle_rows(k, g.dx(), g.dy()));
                    let mut s = 0.0;
                    let mut c = 0usize;
                    for (dj, &w) in rows.iter().enumerate() {
                        let w = w.min(k);
                        if dj > k {
                            break;
                        }
                        s += prefix.row(j + dj, i - w, i + w);
                        c += 2 * w + 1;
                        if dj > 0 {
                            s += prefix.row(j - dj, i - w, i + w);
                            c += 2 * w + 1;
                        }
                    }
                    (s, c as f64)
                }
            };
            out[idx] = sum / count;
        }
    }
    out
}

/// Area-averages `field` with half-width `a` (clipped per cell).
pub fn smooth_fixed(field: &GreensField, a: usize, shape: WindowShape, domain: &Domain) -> GreensField {
    let limits = window_limits(&field.geometry, domain);
    let prefix = Prefix::new(&field.geometry, &field.values);
    let mut out = field.clone();
    out.values = smooth_with_limits(field, a, shape, &limits, &prefix);
    out.meta.window = Some(a);
    out.meta.window_shape = Some(shape);
    out
}

/// Result of a window search.
#[derive(Clone, Debug)]
pub struct SmoothingOutcome {
    pub field: GreensField,
    pub window: usize,
    /// `sigma_g` for every candidate, when a reference was given.
    pub scores: Vec<f64>,
}

/// Area-averaging with the window minimizing `sigma_g` against the reference,
/// or a caller-fixed window when there is no reference.
pub fn smooth_field(field: &GreensField, config: &SmoothingConfig<'_>, domain: &Domain) -> Result<SmoothingOutcome> {
    let limits = window_limits(&field.geometry, domain);
    let prefix = Prefix::new(&field.geometry, &field.values);
    let Some(reference) = config.reference else {
        let a = config.fixed.ok_or_else(|| {
            Error::config("smoothing.window", "a fixed window is required without a reference")
        })?;
        let mut out = field.clone();
        out.values = smooth_with_limits(field, a, config.shape, &limits, &prefix);
        out.meta.window = Some(a);
        out.meta.window_shape = Some(config.shape);
        return Ok(SmoothingOutcome {
            field: out,
            window: a,
            scores: Vec::new(),
        });
    };
    field.check_same_grid(reference)?;
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut scores = Vec::with_capacity(config.n_cap + 1);
    for a in 0..=config.n_cap {
        let vals = smooth_with_limits(field, a, config.shape, &limits, &prefix);
        let mut cand = field.clone();
        cand.values = vals;
        let s = sigma_g(&cand, reference)
            .map_err(|_| Error::SmoothingDegenerate("empty inclusion set".into()))?;
        scores.push(s);
        if best.as_ref().is_none_or(|(_, bs, _)| s < *bs) {
            best = Some((a, s, cand.values));
        }
    }
    let (a, _, values) = best.expect("candidate set contains 0");
    let mut out = field.clone();
    out.values = values;
    out.meta.window = Some(a);
    out.meta.window_shape = Some(config.shape);
    Ok(SmoothingOutcome {
        field: out,
        window: a,
        scores,
    })
}

/// Grid extents `[0, mu_x + sigma_x] x [0, mu_y + sigma_y]` from the weighted
/// mean and standard deviation of alive walker positions.
pub fn grid_from_swarm_extent(positions: &[Vec2], weights: &[f64], alive: &[bool]) -> Result<Vec2> {
    let mut wsum = 0.0;
    let mut m = [0.0; 2];
    for ((p, w), a) in positions.iter().zip(weights).zip(alive) {
        if *a {
            wsum += w;
            m[0] += w * p[0];
            m[1] += w * p[1];
        }
    }
    if !(wsum > 0.0) {
        return Err(Error::Precondition("swarm is empty".into()));
    }
    m[0] /= wsum;
    m[1] /= wsum;
    let mut v = [0.0; 2];
    for ((p, w), a) in positions.iter().zip(weights).zip(alive) {
        if *a {
            v[0] += w * (p[0] - m[0]).powi(2);
            v[1] += w * (p[1] - m[1]).powi(2);
        }
    }
    Ok([m[0] + (v[0] / wsum).sqrt(), m[1] + (v[1] / wsum).sqrt()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BcKind;

    fn unit(n: usize) -> GridGeometry {
        GridGeometry::new(0.0, 1.0, 0.0, 1.0, n, n).unwrap()
    }

    #[test]
    fn centroid_and_edge_binning() {
        let g = unit(4);
        let mut grid = InterrogationGrid::new(g, vec![0.0]).unwrap();
        accumulate_snapshot(&mut grid, 0, &[g.centroid(1, 2), [0.25, 0.6], [1.0, 0.5]], &[1.0; 3], &[true; 3]).unwrap();
        // centroid plus an interior-edge point that belongs to the higher cell
        assert_eq!(grid.cells[0][g.index(1, 2)], 2.0);
        assert_eq!(grid.total_weight(0), 2.0);
    }

    #[test]
    fn additivity() {
        let g = unit(2);
        let mut grid = InterrogationGrid::new(g, vec![0.0]).unwrap();
        accumulate_snapshot(&mut grid, 0, &[[0.1, 0.1]; 4], &[0.5; 4], &[true; 4]).unwrap();
        assert_eq!(grid.cells[0][0], 2.0);
    }

    #[test]
    fn naive_arithmetic() {
        let g = GridGeometry::new(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        let mut grid = InterrogationGrid::new(g, vec![1.0]).unwrap();
        grid.cells[0][0] = 2.0;
        let f = naive_estimate(&grid, 0, 4).unwrap();
        assert_eq!(f.values[0], 2.0);
        assert_eq!(f.values[1], 0.0);
    }

    #[test]
    fn decay_scaling() {
        let f = GreensField::from_fn(unit(3), 0.0, |p| Ok(p[0] + 1.0)).unwrap();
        assert_eq!(apply_decay(&f, 0.0, 2.0).unwrap(), f);
        let d = apply_decay(&f, 0.5, 2.0).unwrap();
        for (a, b) in d.values.iter().zip(&f.values) {
            assert!((a - b * (-1.0f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn metrics() {
        let f = GreensField::from_fn(unit(5), 0.0, |p| Ok(1.0 + p[0])).unwrap();
        assert_eq!(emax(&f, &f, 0.1).unwrap(), 0.0);
        let mut g = f.clone();
        g.values.iter_mut().for_each(|v| *v *= 1.1);
        assert!((emax(&g, &f, 0.0).unwrap() - 0.1).abs() < 1e-12);
        let mut h = f.clone();
        h.values.iter_mut().for_each(|v| *v += 0.25);
        assert!((sigma_g(&h, &f).unwrap() - 0.25).abs() < 1e-12);
        let z = GreensField::zeros(unit(5), 0.0);
        assert!(matches!(emax(&f, &z, 0.1), Err(Error::UndefinedMetric(_))));
        assert!(matches!(sigma_g(&z, &z), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn constant_field_picks_identity() {
        let d = Domain::unbounded();
        let f = GreensField::from_fn(unit(10), 0.0, |_| Ok(2.0)).unwrap();
        let mut r = f.clone();
        r.values[0] = 2.5;
        for shape in [WindowShape::Square, WindowShape::Circular] {
            let cfg = SmoothingConfig {
                shape,
                n_cap: 4,
                reference: Some(&r),
                fixed: None,
            };
            let out = smooth_field(&f, &cfg, &d).unwrap();
            assert_eq!(out.window, 0);
            assert_eq!(out.field.values, f.values);
        }
    }

    #[test]
    fn boundary_clipping() {
        let d = Domain::unit_square(BcKind::Dirichlet);
        let f = GreensField::from_fn(unit(10), 0.0, |p| Ok(p[0] * 7.0 + p[1])).unwrap();
        let s = smooth_fixed(&f, 3, WindowShape::Square, &d);
        // edge cells have no room for a window
        assert_eq!(s.get(0, 5), f.get(0, 5));
        // linear field is reproduced by symmetric windows
        assert!((s.get(5, 5) - f.get(5, 5)).abs() < 1e-12);
    }

    #[test]
    fn missing_reference_needs_fixed_window() {
        let f = GreensField::zeros(unit(3), 0.0);
        let e = smooth_field(&f, &SmoothingConfig::default(), &Domain::unbounded()).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
    }

    #[test]
    fn swarm_extent() {
        let e = grid_from_swarm_extent(&[[1.0, 2.0]; 3], &[1.0; 3], &[true; 3]).unwrap();
        assert_eq!(e, [1.0, 2.0]);
    }
}
