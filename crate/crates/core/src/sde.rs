//! Euler–Maruyama stepping of walker swarms with boundary handling and respawning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{accumulate_snapshot, InterrogationGrid};
use crate::geometry::{robin_absorption_probability, BcKind, Domain, Shape, StepOutcome, MAX_REFLECTIONS};
use crate::model::{Direction, TransportModel, Vec2};
use crate::respawn::{is_binary_fraction, LedgerScope, WalkerSwarm, WeightLedger, DEFAULT_REORDER_INTERVAL};
use crate::rng::RngStream;

pub const DEFAULT_SHARDS: usize = 32;

/// One step with given standard-normal factors `z`.
pub fn em_step_with(pos: Vec2, t: f64, dt: f64, model: &TransportModel, z: [f64; 2]) -> Result<Vec2> {
    if !(dt > 0.0) {
        return Err(Error::Precondition("dt must be > 0".into()));
    }
    let b = model.drift(pos, t);
    let d = model.diffusion_at(pos, t);
    let bad = || Error::ModelEvaluation {
        x: pos[0],
        y: pos[1],
        t,
    };
    if !(b[0].is_finite() && b[1].is_finite() && d[0].is_finite() && d[1].is_finite()) || d[0] < 0.0 || d[1] < 0.0 {
        return Err(bad());
    }
    Ok([
        pos[0] + b[0] * dt + (2.0 * d[0] * dt).sqrt() * z[0],
        pos[1] + b[1] * dt + (2.0 * d[1] * dt).sqrt() * z[1],
    ])
}

/// One Euler–Maruyama step; consumes exactly two normal draws.
pub fn em_step(pos: Vec2, t: f64, dt: f64, model: &TransportModel, stream: &mut RngStream) -> Result<Vec2> {
    let z = [stream.standard_normal(), stream.standard_normal()];
    em_step_with(pos, t, dt, model, z)
}

/// Run controls for [`simulate_swarm`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub launch: Vec2,
    /// Forward time at launch: the response time for backward runs, the impulse time for forward runs.
    pub launch_time: f64,
    pub n_walkers: usize,
    pub dt: f64,
    /// Elapsed time simulated.
    pub horizon: f64,
    pub respawn: bool,
    pub reorder_interval: usize,
    pub ledger_scope: LedgerScope,
    pub shards: usize,
    /// Absorb walkers whose Brownian bridge touched a Dirichlet wall between steps.
    pub bridge_correction: bool,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            launch: [0.5, 0.5],
            launch_time: 0.0,
            n_walkers: 0,
            dt: 1e-3,
            horizon: 1.0,
            respawn: true,
            reorder_interval: DEFAULT_REORDER_INTERVAL,
            ledger_scope: LedgerScope::Shard,
            shards: DEFAULT_SHARDS,
            bridge_correction: true,
            seed: 0,
        }
    }
}

/// Per-step bookkeeping. Entry 0 is the launch state, entry `k` the state after step `k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SwarmAudit {
    pub alive: Vec<usize>,
    pub total_weight: Vec<f64>,
    pub absorbed: Vec<usize>,
    pub absorbed_weight: Vec<f64>,
    pub splits: Vec<usize>,
    /// Absorptions triggered by the bridge test rather than an observed crossing.
    pub bridge_absorptions: u64,
    /// True while every live weight has been an exact power of two.
    pub weights_binary: bool,
}

impl SwarmAudit {
    pub fn cumulative_absorbed_weight(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.absorbed_weight
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SwarmResult {
    pub grid: InterrogationGrid,
    pub audit: SwarmAudit,
    pub swarm: WalkerSwarm,
}

/// Integer step count for an elapsed time, if it is a multiple of `dt`.
pub fn steps_for(time: f64, dt: f64) -> Option<usize> {
    let k = (time / dt).round();
    if k < 0.0 || !k.is_finite() {
        return None;
    }
    let tol = 1e-9 * time.abs().max(dt);
    ((k * dt - time).abs() <= tol).then_some(k as usize)
}

struct StepContext<'a> {
    model: &'a TransportModel,
    domain: &'a Domain,
    dt: f64,
    t: f64,
    bridge: bool,
    bounded: bool,
}

enum Fate {
    Alive(Vec2),
    Absorbed { at: Vec2, bridge: bool },
}

fn advance(ctx: &StepContext<'_>, p0: Vec2, stream: &mut RngStream) -> Result<Fate> {
    let mut p1 = em_step(p0, ctx.t, ctx.dt, ctx.model, stream)?;
    if !ctx.bounded {
        return Ok(Fate::Alive(p1));
    }
    let mut origin = p0;
    for iter in 0..=MAX_REFLECTIONS {
        match ctx.domain.classify_step(origin, p1)? {
            StepOutcome::Inside => {
                if ctx.bridge && iter == 0 {
                    let (p, _) = ctx.domain.bridge_hit_probability(p0, p1, ctx.model, ctx.t, ctx.dt);
                    if p > 0.0 && stream.uniform() < p {
                        return Ok(Fate::Absorbed { at: p1, bridge: true });
                    }
                }
                return Ok(Fate::Alive(p1));
            }
            StepOutcome::Crossed {
                segment, hit_point, ..
            } => {
                let reflect = match ctx.domain.bc(segment) {
                    BcKind::Dirichlet => false,
                    BcKind::Neumann => true,
                    BcKind::Robin { kappa } => {
                        let dn = ctx.domain.normal_diffusion(segment, hit_point, ctx.model, ctx.t);
                        let p = robin_absorption_probability(kappa, dn, ctx.dt);
                        if p >= 1.0 {
                            false
                        } else if p <= 0.0 {
                            true
                        } else {
                            stream.uniform() >= p
                        }
                    }
                };
                if !reflect {
                    return Ok(Fate::Absorbed {
                        at: hit_point,
                        bridge: false,
                    });
                }
                p1 = ctx.domain.mirror(p1, segment, hit_point);
                origin = ctx.domain.nudge_inside(hit_point);
            }
        }
    }
    Err(Error::DegenerateStep(MAX_REFLECTIONS))
}

struct ShardStep {
    absorbed: Vec<usize>,
    absorbed_weight: f64,
    bridge: u64,
}

fn step_shard(
    ctx: &StepContext<'_>,
    positions: &mut [Vec2],
    weights: &[f64],
    alive: &mut [bool],
    stream: &mut RngStream,
    respawn: bool,
) -> Result<ShardStep> {
    let mut out = ShardStep {
        absorbed: Vec::new(),
        absorbed_weight: 0.0,
        bridge: 0,
    };
    for i in 0..positions.len() {
        if !alive[i] {
            continue;
        }
        match advance(ctx, positions[i], stream)? {
            Fate::Alive(p) => positions[i] = p,
            Fate::Absorbed { at, bridge } => {
                positions[i] = at;
                out.absorbed.push(i);
                out.absorbed_weight += weights[i];
                out.bridge += bridge as u64;
                if !respawn {
                    alive[i] = false;
                }
            }
        }
    }
    Ok(out)
}

fn shard_size(n: usize, shards: usize) -> usize {
    n.div_ceil(shards.clamp(1, n.max(1)))
}

fn model_time(cfg: &SwarmConfig, model: &TransportModel, elapsed: f64) -> f64 {
    match model.direction {
        Direction::Backward => cfg.launch_time - elapsed,
        Direction::Forward => cfg.launch_time + elapsed,
    }
}

/// Launches `n_walkers` at `launch`, steps them to `horizon` and accumulates
/// walker weight on `grid` at each of its snapshot times (elapsed since launch).
///
/// Results depend on the seed and shard count only, never on the thread count.
pub fn simulate_swarm(
    cfg: &SwarmConfig,
    model: &TransportModel,
    domain: &Domain,
    grid: InterrogationGrid,
) -> Result<SwarmResult> {
    model.validate()?;
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::config("time.dt", "dt must be positive"));
    }
    let n_steps = steps_for(cfg.horizon, cfg.dt)
        .ok_or_else(|| Error::config("time.horizon", "horizon must be a multiple of dt"))?;
    let mut snap_steps = Vec::with_capacity(grid.snapshot_times.len());
    for &s in &grid.snapshot_times {
        let k = steps_for(s, cfg.dt).ok_or_else(|| {
            Error::config("time.snapshots", format!("snapshot {s} is not a multiple of dt"))
        })?;
        if k > n_steps {
            return Err(Error::config("time.snapshots", format!("snapshot {s} lies beyond the horizon")));
        }
        snap_steps.push(k);
    }
    if !domain.contains(cfg.launch) {
        return Err(Error::Domain(format!(
            "launch point ({}, {}) is not strictly inside the domain",
            cfg.launch[0], cfg.launch[1]
        )));
    }
    let mut grid = grid;
    let n = cfg.n_walkers;
    let interval = cfg.reorder_interval.max(1);
    let mut swarm = WalkerSwarm::launch(cfg.launch, n, interval);
    let mut audit = SwarmAudit {
        weights_binary: true,
        ..SwarmAudit::default()
    };
    if n == 0 {
        return Ok(SwarmResult { grid, audit, swarm });
    }

    let size = shard_size(n, cfg.shards);
    let n_shards = n.div_ceil(size);
    let mut streams: Vec<RngStream> = (0..n_shards as u64).map(|s| RngStream::new(cfg.seed, s)).collect();
    let mut ledgers: Vec<WeightLedger> = match cfg.ledger_scope {
        LedgerScope::Shard => (0..n_shards)
            .map(|s| WeightLedger::new(size.min(n - s * size), interval))
            .collect(),
        LedgerScope::Global => vec![WeightLedger::new(n, interval)],
    };
    let bounded = !matches!(domain.shape(), Shape::Unbounded);
    let bridge = cfg.bridge_correction && domain.has_dirichlet();

    audit.alive.push(n);
    audit.total_weight.push(n as f64);
    audit.absorbed.push(0);
    audit.absorbed_weight.push(0.0);
    audit.splits.push(0);
    let mut snap_iter = snap_steps.iter().enumerate().peekable();
    let mut take_snapshots = |k: usize, swarm: &WalkerSwarm, grid: &mut InterrogationGrid| -> Result<()> {
        while let Some(&(idx, &sk)) = snap_iter.peek() {
            if sk != k {
                break;
            }
            accumulate_snapshot(grid, idx, &swarm.positions, &swarm.weights, &swarm.alive)?;
            snap_iter.next();
        }
        Ok(())
    };
    take_snapshots(0, &swarm, &mut grid)?;

    for k in 1..=n_steps {
        let ctx = StepContext {
            model,
            domain,
            dt: cfg.dt,
            t: model_time(cfg, model, (k - 1) as f64 * cfg.dt),
            bridge,
            bounded,
        };
        let steps: Vec<Result<ShardStep>> = swarm
            .positions
            .par_chunks_mut(size)
            .zip(swarm.weights.par_chunks(size))
            .zip(swarm.alive.par_chunks_mut(size))
            .zip(streams.par_iter_mut())
            .map(|(((p, w), a), s)| step_shard(&ctx, p, w, a, s, cfg.respawn))
            .collect();
        let steps: Vec<ShardStep> = steps.into_iter().collect::<Result<_>>()?;

        let absorbed_count: usize = steps.iter().map(|s| s.absorbed.len()).sum();
        let absorbed_weight: f64 = steps.iter().map(|s| s.absorbed_weight).sum();
        audit.bridge_absorptions += steps.iter().map(|s| s.bridge).sum::<u64>();
        let splits_before: u64 = ledgers.iter().map(|l| l.split_count).sum();

        if cfg.respawn {
            match cfg.ledger_scope {
                LedgerScope::Shard => {
                    let results: Vec<Result<()>> = swarm
                        .positions
                        .par_chunks_mut(size)
                        .zip(swarm.weights.par_chunks_mut(size))
                        .zip(swarm.alive.par_chunks_mut(size))
                        .zip(ledgers.par_iter_mut())
                        .zip(steps.par_iter())
                        .map(|((((p, w), a), l), st)| {
                            l.absorb_and_split(p, w, a, &st.absorbed, k)?;
                            l.maybe_reorder(w, k);
                            Ok(())
                        })
                        .collect();
                    results.into_iter().collect::<Result<Vec<()>>>()?;
                }
                LedgerScope::Global => {
                    let ids: Vec<usize> = steps
                        .iter()
                        .enumerate()
                        .flat_map(|(s, st)| st.absorbed.iter().map(move |i| s * size + i))
                        .collect();
                    let l = &mut ledgers[0];
                    l.absorb_and_split(&mut swarm.positions, &mut swarm.weights, &mut swarm.alive, &ids, k)?;
                    l.maybe_reorder(&swarm.weights, k);
                }
            }
        }
        let splits_after: u64 = ledgers.iter().map(|l| l.split_count).sum();

        let mut alive = 0usize;
        let mut total = 0.0;
        for (w, a) in swarm.weights.iter().zip(&swarm.alive) {
            if *a {
                alive += 1;
                total += *w;
                if !is_binary_fraction(*w) {
                    audit.weights_binary = false;
                }
            }
        }
        audit.alive.push(alive);
        audit.total_weight.push(total);
        audit.absorbed.push(absorbed_count);
        audit.absorbed_weight.push(absorbed_weight);
        audit.splits.push((splits_after - splits_before) as usize);
        take_snapshots(k, &swarm, &mut grid)?;
    }
    if cfg.ledger_scope == LedgerScope::Global || n_shards == 1 {
        swarm.ledger = ledgers.swap_remove(0);
    } else {
        swarm.ledger.split_count = ledgers.iter().map(|l| l.split_count).sum();
        swarm.ledger.absorbed_weight = ledgers.iter().map(|l| l.absorbed_weight).sum();
    }
    Ok(SwarmResult { grid, audit, swarm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::GridGeometry;
    use crate::model::{DiffusionField, VelocityField};

    fn drift_only(v: Vec2, dir: Direction) -> TransportModel {
        TransportModel {
            velocity: VelocityField::Constant(v),
            diffusion: DiffusionField::Constant([0.0, 0.0]),
            decay: 0.0,
            direction: dir,
        }
    }

    #[test]
    fn zero_noise_identity() {
        let m = TransportModel::isotropic(0.05, Direction::Backward);
        assert_eq!(em_step_with([0.3, 0.4], 0.0, 0.1, &m, [0.0, 0.0]).unwrap(), [0.3, 0.4]);
    }

    #[test]
    fn pure_drift_both_directions() {
        let f = em_step_with([0.2, 0.2], 0.0, 0.1, &drift_only([1.0, 0.0], Direction::Forward), [0.3, -0.2]).unwrap();
        assert!((f[0] - 0.3).abs() < 1e-15 && (f[1] - 0.2).abs() < 1e-15);
        let b = em_step_with([0.3, 0.2], 0.0, 0.1, &drift_only([1.0, 0.0], Direction::Backward), [0.3, -0.2]).unwrap();
        assert!((b[0] - 0.2).abs() < 1e-15 && (b[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn two_draws_per_step() {
        let m = TransportModel::isotropic(0.05, Direction::Backward);
        let mut s = RngStream::new(3, 0);
        em_step([0.0, 0.0], 0.0, 1e-3, &m, &mut s).unwrap();
        assert_eq!(s.counter(), 2);
    }

    #[test]
    fn non_finite_model() {
        let m = TransportModel {
            velocity: VelocityField::Custom(std::sync::Arc::new(|_, _| [f64::NAN, 0.0])),
            diffusion: DiffusionField::Constant([0.1, 0.1]),
            decay: 0.0,
            direction: Direction::Forward,
        };
        let e = em_step_with([0.1, 0.2], 3.0, 0.1, &m, [0.0, 0.0]).unwrap_err();
        assert!(matches!(e, Error::ModelEvaluation { x, y, t } if x == 0.1 && y == 0.2 && t == 3.0));
    }

    #[test]
    fn snapshot_must_be_step_multiple() {
        let g = InterrogationGrid::new(GridGeometry::new(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap(), vec![0.0105]).unwrap();
        let cfg = SwarmConfig {
            n_walkers: 10,
            horizon: 0.02,
            dt: 1e-3,
            ..SwarmConfig::default()
        };
        let m = TransportModel::isotropic(0.05, Direction::Backward);
        let d = Domain::unit_square(BcKind::Dirichlet);
        assert!(matches!(simulate_swarm(&cfg, &m, &d, g), Err(Error::Config { .. })));
    }

    #[test]
    fn empty_swarm() {
        let g = InterrogationGrid::new(GridGeometry::new(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap(), vec![0.01]).unwrap();
        let cfg = SwarmConfig {
            n_walkers: 0,
            horizon: 0.01,
            ..SwarmConfig::default()
        };
        let m = TransportModel::isotropic(0.05, Direction::Backward);
        let r = simulate_swarm(&cfg, &m, &Domain::unit_square(BcKind::Dirichlet), g).unwrap();
        assert_eq!(r.grid.total_weight(0), 0.0);
        assert!(r.audit.alive.is_empty());
    }

    #[test]
    fn launch_outside() {
        let g = InterrogationGrid::new(GridGeometry::new(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap(), vec![]).unwrap();
        let cfg = SwarmConfig {
            n_walkers: 5,
            launch: [1.5, 0.5],
            horizon: 0.01,
            ..SwarmConfig::default()
        };
        let m = TransportModel::isotropic(0.05, Direction::Backward);
        let e = simulate_swarm(&cfg, &m, &Domain::unit_square(BcKind::Dirichlet), g).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
    }

    #[test]
    fn small_square_run_conserves_count() {
        let g = InterrogationGrid::new(GridGeometry::new(0.0, 1.0, 0.0, 1.0, 10, 10).unwrap(), vec![0.5]).unwrap();
        let cfg = SwarmConfig {
            n_walkers: 200,
            horizon: 0.5,
            dt: 1e-3,
            shards: 4,
            seed: 9,
            ..SwarmConfig::default()
        };
        let m = TransportModel::isotropic(0.05, Direction::Backward);
        let r = simulate_swarm(&cfg, &m, &Domain::unit_square(BcKind::Dirichlet), g).unwrap();
        assert!(r.audit.alive.iter().all(|&a| a == 200));
        assert!(r.audit.weights_binary);
    }
}
