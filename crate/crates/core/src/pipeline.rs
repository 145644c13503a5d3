//! Config-driven estimation runs shared by the command-line tool and tests.

use std::sync::Arc;

use crate::analytic::{
    magic_rule_solve, mollified_delta, reference_field, DiskGf, FreeSpaceGf, GreensFunction,
    GroundwaterGf, InitialField, MagicRuleProblem, RectangleGf, ScalarField,
};
use crate::config::{DataSpec, GridConfig, ModelConfig, RunConfig, SolveConfig};
use crate::error::{Error, Result};
use crate::estimate::{
    accumulate_snapshot, apply_decay, emax_with_count, grid_from_swarm_extent, naive_estimate,
    sigma_g, smooth_field, GreensField, GridGeometry, InterrogationGrid, SmoothingConfig,
};
use crate::geometry::{BcKind, Domain, Shape};
use crate::sde::{simulate_swarm, SwarmAudit, SwarmConfig};

/// Exact Green's function for a config, when one is known.
///
/// The boolean is true when the function already includes decay.
pub fn exact_greens_function(cfg: &RunConfig, domain: &Domain) -> Option<(Box<dyn GreensFunction>, bool)> {
    let series = cfg
        .reference
        .as_ref()
        .and_then(|r| r.series)
        .unwrap_or_default();
    if let ModelConfig::Groundwater(p) = &cfg.model {
        return Some((Box::new(GroundwaterGf { params: *p }), true));
    }
    let d0 = cfg.model.pure_diffusivity()?;
    let all_dirichlet = domain.segments().iter().all(|b| *b == BcKind::Dirichlet);
    let gf: Box<dyn GreensFunction> = match *domain.shape() {
        Shape::Unbounded => Box::new(FreeSpaceGf { d0 }),
        Shape::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } if all_dirichlet => Box::new(RectangleGf {
            d0,
            extents: [x_min, x_max, y_min, y_max],
            params: series,
        }),
        Shape::Disk { center, radius } if all_dirichlet => Box::new(DiskGf {
            d0,
            center,
            radius,
            params: series,
        }),
        _ => return None,
    };
    Some((gf, false))
}

/// Exact field for one snapshot of a config.
pub fn exact_field(cfg: &RunConfig, domain: &Domain, geometry: GridGeometry, tau: f64, label: f64) -> Result<GreensField> {
    let (gf, has_decay) = exact_greens_function(cfg, domain).ok_or_else(|| {
        Error::config("reference", "no exact Green's function is available for this model and domain")
    })?;
    let f = reference_field(gf.as_ref(), geometry, domain, cfg.launch, tau, cfg.direction, label)?;
    if has_decay {
        Ok(f)
    } else {
        apply_decay(&f, cfg.model.decay(), tau)
    }
}

#[derive(Clone, Debug)]
pub struct SnapshotResult {
    /// Forward-time label.
    pub label: f64,
    pub tau: f64,
    /// Naive estimate with decay applied.
    pub raw: GreensField,
    pub smoothed: Option<GreensField>,
    pub reference: Option<GreensField>,
    pub window: Option<usize>,
    pub emax_raw: Option<f64>,
    pub emax_smoothed: Option<f64>,
    pub sigma_raw: Option<f64>,
    pub sigma_smoothed: Option<f64>,
    pub masked_cells: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct EstimateRun {
    pub snapshots: Vec<SnapshotResult>,
    pub audit: SwarmAudit,
}

pub fn swarm_config(cfg: &RunConfig, horizon: f64) -> SwarmConfig {
    SwarmConfig {
        launch: cfg.launch,
        launch_time: cfg.time.launch_time,
        n_walkers: cfg.swarm.n_walkers,
        dt: cfg.time.dt,
        horizon,
        respawn: cfg.swarm.respawn,
        reorder_interval: cfg.swarm.reorder_interval,
        ledger_scope: cfg.swarm.ledger_scope,
        shards: cfg.swarm.shards,
        bridge_correction: cfg.swarm.bridge_correction,
        seed: cfg.seed,
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Simulates the configured swarm and post-processes every snapshot.
pub fn run_estimate(cfg: &RunConfig) -> Result<EstimateRun> {
    cfg.validate()?;
    let model = cfg.model.to_model(cfg.direction)?;
    let domain = cfg.domain.to_domain()?;
    let sched = cfg.schedule()?;
    let scfg = swarm_config(cfg, sched.horizon);

    let (grid, audit) = match &cfg.grid {
        GridConfig::Fixed { extents, nx, ny } => {
            let g = GridGeometry::new(extents[0], extents[1], extents[2], extents[3], *nx, *ny)?;
            let grid = InterrogationGrid::new(g, sched.elapsed.clone())?;
            let r = with_threads(cfg.threads, || simulate_swarm(&scfg, &model, &domain, grid))??;
            (r.grid, r.audit)
        }
        GridConfig::Auto { nx, ny } => {
            let placeholder = GridGeometry::new(0.0, 1.0, 0.0, 1.0, 1, 1)?;
            let grid = InterrogationGrid::new(placeholder, Vec::new())?;
            let r = with_threads(cfg.threads, || simulate_swarm(&scfg, &model, &domain, grid))??;
            let ext = grid_from_swarm_extent(&r.swarm.positions, &r.swarm.weights, &r.swarm.alive)?;
            let g = GridGeometry::new(0.0, ext[0], 0.0, ext[1], *nx, *ny)
                .map_err(|e| Error::Domain(format!("degenerate swarm extent: {e}")))?;
            let mut grid = InterrogationGrid::new(g, vec![sched.horizon])?;
            accumulate_snapshot(&mut grid, 0, &r.swarm.positions, &r.swarm.weights, &r.swarm.alive)?;
            (grid, r.audit)
        }
    };

    let mut out = Vec::with_capacity(sched.labels.len());
    for (&label, &tau) in sched.labels.iter().zip(&sched.elapsed) {
        let idx = grid
            .snapshot_times
            .iter()
            .position(|t| *t == tau)
            .expect("every scheduled time is on the grid");
        let mut raw = naive_estimate(&grid, idx, cfg.swarm.n_walkers as u64)?;
        raw.time = label;
        raw.meta.dt = cfg.time.dt;
        raw.meta.respawn = cfg.swarm.respawn;
        raw.meta.seed = Some(cfg.seed);
        let raw = apply_decay(&raw, cfg.model.decay(), tau)?;

        let reference = match &cfg.reference {
            Some(_) => Some(exact_field(cfg, &domain, raw.geometry, tau, label)?),
            None => None,
        };
        let floor = cfg.reference.as_ref().map(|r| r.floor_fraction).unwrap_or_default();

        let (smoothed, window) = match &cfg.smoothing {
            Some(s) => {
                let sc = SmoothingConfig {
                    shape: s.shape,
                    n_cap: s.n_cap,
                    reference: reference.as_ref(),
                    fixed: s.window,
                };
                let o = smooth_field(&raw, &sc, &domain)?;
                (Some(o.field), Some(o.window))
            }
            None => (None, None),
        };

        let mut res = SnapshotResult {
            label,
            tau,
            raw,
            smoothed,
            reference,
            window,
            emax_raw: None,
            emax_smoothed: None,
            sigma_raw: None,
            sigma_smoothed: None,
            masked_cells: None,
        };
        if let Some(exact) = &res.reference {
            let (e, n) = emax_with_count(&res.raw, exact, floor)?;
            res.emax_raw = Some(e);
            res.masked_cells = Some(n);
            res.sigma_raw = sigma_g(&res.raw, exact).ok();
            if let Some(s) = &res.smoothed {
                res.emax_smoothed = Some(emax_with_count(s, exact, floor)?.0);
                res.sigma_smoothed = sigma_g(s, exact).ok();
            }
        }
        out.push(res);
    }
    Ok(EstimateRun {
        snapshots: out,
        audit,
    })
}

fn eigenmode(domain: &Domain) -> Result<impl Fn(crate::model::Vec2) -> f64 + Send + Sync + 'static> {
    match *domain.shape() {
        Shape::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } => Ok(move |p: crate::model::Vec2| {
            (std::f64::consts::PI * (p[0] - x_min) / (x_max - x_min)).sin()
                * (std::f64::consts::PI * (p[1] - y_min) / (y_max - y_min)).sin()
        }),
        _ => Err(Error::config("initial.kind", "eigenmode data needs a rectangle")),
    }
}

fn spatial(spec: &DataSpec, domain: &Domain, key: &str) -> Result<Option<InitialField>> {
    Ok(match spec {
        DataSpec::Zero => None,
        DataSpec::Constant { value } => {
            let v = *value;
            Some(Arc::new(move |_| v))
        }
        DataSpec::Eigenmode => Some(Arc::new(
            eigenmode(domain).map_err(|_| Error::config(key, "eigenmode data needs a rectangle"))?,
        )),
        DataSpec::Delta { at, width } => {
            if !(*width > 0.0) {
                return Err(Error::config(key, "delta width must be > 0"));
            }
            Some(mollified_delta(*at, *width))
        }
    })
}

fn space_time(spec: &DataSpec, domain: &Domain, key: &str) -> Result<Option<ScalarField>> {
    Ok(spatial(spec, domain, key)?.map(|f| -> ScalarField { Arc::new(move |p, _| f(p)) }))
}

/// Builds the convolution problem and the matching Green's function for a solve config.
pub fn solve_problem(cfg: &SolveConfig) -> Result<(MagicRuleProblem, Box<dyn GreensFunction>)> {
    let domain = cfg.domain.to_domain()?;
    let series = cfg.series.unwrap_or_default();
    let all_dirichlet = domain.segments().iter().all(|b| *b == BcKind::Dirichlet);
    let gf: Box<dyn GreensFunction> = match *domain.shape() {
        Shape::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } if all_dirichlet => Box::new(RectangleGf {
            d0: cfg.d0,
            extents: [x_min, x_max, y_min, y_max],
            params: series,
        }),
        Shape::Disk { center, radius } if all_dirichlet => Box::new(DiskGf {
            d0: cfg.d0,
            center,
            radius,
            params: series,
        }),
        _ => {
            return Err(Error::config(
                "domain",
                "the solver supports Dirichlet rectangles and disks",
            ))
        }
    };
    let mut p = MagicRuleProblem::new(domain.clone(), cfg.d0);
    p.initial = spatial(&cfg.initial, &domain, "initial")?;
    p.source = space_time(&cfg.source, &domain, "source")?;
    p.dirichlet = space_time(&cfg.dirichlet, &domain, "dirichlet")?;
    p.neumann_flux = space_time(&cfg.neumann, &domain, "neumann")?;
    p.space_cells = cfg.quadrature.space_cells;
    p.time_slabs = cfg.quadrature.time_slabs;
    p.tolerance = cfg.quadrature.tolerance;
    Ok((p, gf))
}

pub type SolveOutput = (Vec<(crate::model::Vec2, f64)>, Option<GreensField>);

/// Point values and, when a grid is configured, a solution field.
pub fn run_solve(cfg: &SolveConfig) -> Result<SolveOutput> {
    let (problem, gf) = solve_problem(cfg)?;
    let mut points = Vec::with_capacity(cfg.points.len());
    for &x in &cfg.points {
        points.push((x, magic_rule_solve(&problem, gf.as_ref(), x, cfg.time)?));
    }
    let field = match &cfg.grid {
        Some(GridConfig::Fixed { extents, nx, ny }) => {
            let g = GridGeometry::new(extents[0], extents[1], extents[2], extents[3], *nx, *ny)?;
            let mut f = GreensField::from_fn(g, cfg.time, |c| {
                if problem.domain.contains(c) {
                    magic_rule_solve(&problem, gf.as_ref(), c, cfg.time)
                } else {
                    Ok(0.0)
                }
            })?;
            f.meta.source = "solve".into();
            Some(f)
        }
        _ => None,
    };
    Ok((points, field))
}
