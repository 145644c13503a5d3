//! Time-step and swarm-size planning from the interrogation-cell size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::InterrogationGrid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPlan {
    pub dx: f64,
    pub dy: f64,
    pub da: f64,
    pub dt: f64,
    pub n_walkers: u64,
    pub predicted_variation: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(name, format!("must be positive and finite, got {v}")))
    }
}

/// Step whose diffusion length covers one cell: `dA / D0`.
pub fn recommended_dt(da: f64, d0: f64) -> Result<f64> {
    positive("dA", da)?;
    positive("D0", d0)?;
    Ok(da / d0)
}

fn variation_constant(d0: f64, dt: f64, dx: f64, dy: f64) -> f64 {
    4.0 * std::f64::consts::PI * 0.25f64.exp() * d0 * dt / (dx * dy)
}

/// Largest relative spatial variation of captured walkers at early time:
/// `4 pi e^(1/4) D0 dt / (N dx dy)`.
pub fn predicted_variation(d0: f64, dt: f64, dx: f64, dy: f64, n_walkers: u64) -> Result<f64> {
    for (k, v) in [("D0", d0), ("dt", dt), ("dx", dx), ("dy", dy)] {
        positive(k, v)?;
    }
    if n_walkers == 0 {
        return Err(Error::config("n_walkers", "must be >= 1"));
    }
    Ok(variation_constant(d0, dt, dx, dy) / n_walkers as f64)
}

/// Smallest `N` with `predicted_variation(N) <= target`.
pub fn walkers_for_variation(target: f64, d0: f64, dt: f64, dx: f64, dy: f64) -> Result<u64> {
    positive("target", target)?;
    let k = variation_constant(d0, dt, dx, dy);
    let guess = (k / target).ceil();
    if !(guess < 9.0e15) {
        return Err(Error::config("target", "target variation is too small"));
    }
    let mut n = (guess as u64).max(1);
    let pv = |n: u64| predicted_variation(d0, dt, dx, dy, n);
    while n > 1 && pv(n - 1)? <= target {
        n -= 1;
    }
    while pv(n)? > target {
        n += 1;
    }
    Ok(n)
}

/// Order-of-magnitude decay of capture scatter with elapsed time, `(dt / tau)^(1/4)`.
pub fn capture_scatter_scaling(dt: f64, tau: f64) -> Result<f64> {
    positive("dt", dt)?;
    positive("tau", tau)?;
    Ok((dt / tau).powf(0.25))
}

/// Plan for square-ish cells `dx x dy` at a target early-time variation.
pub fn plan(dx: f64, dy: f64, d0: f64, target: f64) -> Result<ParamPlan> {
    positive("dx", dx)?;
    positive("dy", dy)?;
    let da = dx * dy;
    let dt = recommended_dt(da, d0)?;
    let n = walkers_for_variation(target, d0, dt, dx, dy)?;
    Ok(ParamPlan {
        dx,
        dy,
        da,
        dt,
        n_walkers: n,
        predicted_variation: predicted_variation(d0, dt, dx, dy, n)?,
    })
}

/// Merges independent runs on a common grid: cellwise weight sums and `sum N`.
///
/// Each cell is summed in ascending order of its contributions, so the result
/// does not depend on the order of `runs`.
pub fn pool_runs(runs: &[(InterrogationGrid, u64)]) -> Result<(InterrogationGrid, u64)> {
    let Some((first, _)) = runs.first() else {
        return Err(Error::config("runs", "at least one run is required"));
    };
    for (g, _) in &runs[1..] {
        if g.geometry != first.geometry || g.snapshot_times != first.snapshot_times {
            return Err(Error::config("runs", "runs must share grid geometry and snapshot times"));
        }
    }
    let mut pooled = first.clone();
    let mut buf = Vec::with_capacity(runs.len());
    for (s, cells) in pooled.cells.iter_mut().enumerate() {
        for (c, out) in cells.iter_mut().enumerate() {
            buf.clear();
            buf.extend(runs.iter().map(|(g, _)| g.cells[s][c]));
            buf.sort_by(f64::total_cmp);
            *out = buf.iter().sum();
        }
    }
    let n = runs.iter().map(|(_, n)| *n).sum();
    Ok((pooled, n))
}
