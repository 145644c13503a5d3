//! Domains, first-crossing detection and walker/boundary interaction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TransportModel, Vec2};
use crate::rng::RngStream;

/// Geometric tolerance for hit points and corner detection.
pub const GEOM_TOL: f64 = 1e-12;

/// Maximum number of successive reflections for one step.
pub const MAX_REFLECTIONS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BcKind {
    Dirichlet,
    Neumann,
    /// Partially absorbing wall with reaction coefficient `kappa` (1/length).
    Robin { kappa: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Rectangle {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    Disk {
        center: Vec2,
        radius: f64,
    },
    /// Open first quadrant `x > 0, y > 0`.
    Quadrant,
    Unbounded,
}

/// A shape together with one boundary condition per boundary segment.
///
/// Segment order: rectangle `left, right, bottom, top`; disk `circle`;
/// quadrant `x = 0, y = 0`; unbounded has none.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    shape: Shape,
    segments: Vec<BcKind>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    Inside,
    Crossed {
        segment: usize,
        hit_point: Vec2,
        hit_fraction: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkerState {
    pub position: Vec2,
    pub weight: f64,
    pub alive: bool,
}

impl WalkerState {
    pub fn launched(position: Vec2) -> Self {
        Self {
            position,
            weight: 1.0,
            alive: true,
        }
    }
}

impl Domain {
    pub fn new(shape: Shape, segments: Vec<BcKind>) -> Result<Self> {
        let expected = match shape {
            Shape::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                if !(x_min < x_max && y_min < y_max) {
                    return Err(Error::config("domain", "rectangle extents must be increasing"));
                }
                4
            }
            Shape::Disk { radius, .. } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::config("domain.radius", "radius must be positive"));
                }
                1
            }
            Shape::Quadrant => 2,
            Shape::Unbounded => 0,
        };
        if segments.len() != expected {
            return Err(Error::config(
                "domain.segments",
                format!("expected {expected} boundary segments, got {}", segments.len()),
            ));
        }
        for bc in &segments {
            if let BcKind::Robin { kappa } = bc {
                if !(kappa.is_finite() && *kappa >= 0.0) {
                    return Err(Error::config("domain.segments", "robin kappa must be finite and >= 0"));
                }
            }
        }
        Ok(Self { shape, segments })
    }

    /// Same condition on every segment of `shape`.
    pub fn uniform(shape: Shape, bc: BcKind) -> Result<Self> {
        let n = match shape {
            Shape::Rectangle { .. } => 4,
            Shape::Disk { .. } => 1,
            Shape::Quadrant => 2,
            Shape::Unbounded => 0,
        };
        Self::new(shape, vec![bc; n])
    }

    pub fn unit_square(bc: BcKind) -> Self {
        Self::uniform(
            Shape::Rectangle {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            },
            bc,
        )
        .expect("unit square is valid")
    }

    pub fn unbounded() -> Self {
        Self {
            shape: Shape::Unbounded,
            segments: Vec::new(),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn segments(&self) -> &[BcKind] {
        &self.segments
    }

    pub fn bc(&self, segment: usize) -> BcKind {
        self.segments[segment]
    }

    pub fn has_dirichlet(&self) -> bool {
        self.segments.contains(&BcKind::Dirichlet)
    }

    /// Strict interior test.
    pub fn contains(&self, p: Vec2) -> bool {
        match self.shape {
            Shape::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => p[0] > x_min && p[0] < x_max && p[1] > y_min && p[1] < y_max,
            Shape::Disk { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
            Shape::Quadrant => p[0] > 0.0 && p[1] > 0.0,
            Shape::Unbounded => p[0].is_finite() && p[1].is_finite(),
        }
    }

    /// Euclidean distance from an interior point to the nearest boundary segment.
    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        match self.shape {
            Shape::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => (p[0] - x_min)
                .min(x_max - p[0])
                .min(p[1] - y_min)
                .min(y_max - p[1]),
            Shape::Disk { center, radius } => {
                radius - ((p[0] - center[0]).hypot(p[1] - center[1]))
            }
            Shape::Quadrant => p[0].min(p[1]),
            Shape::Unbounded => f64::INFINITY,
        }
    }

    /// Outward unit normal of `segment` at boundary point `at`.
    pub fn outward_normal(&self, segment: usize, at: Vec2) -> Vec2 {
        match self.shape {
            Shape::Rectangle { .. } => match segment {
                0 => [-1.0, 0.0],
                1 => [1.0, 0.0],
                2 => [0.0, -1.0],
                _ => [0.0, 1.0],
            },
            Shape::Disk { center, .. } => {
                let dx = at[0] - center[0];
                let dy = at[1] - center[1];
                let r = dx.hypot(dy);
                if r > 0.0 {
                    [dx / r, dy / r]
                } else {
                    [1.0, 0.0]
                }
            }
            Shape::Quadrant => {
                if segment == 0 {
                    [-1.0, 0.0]
                } else {
                    [0.0, -1.0]
                }
            }
            Shape::Unbounded => [0.0, 0.0],
        }
    }

    /// Point just inside the domain next to boundary point `p`.
    pub fn nudge_inside(&self, p: Vec2) -> Vec2 {
        match self.shape {
            Shape::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                let ex = GEOM_TOL * (x_max - x_min).max(1.0);
                let ey = GEOM_TOL * (y_max - y_min).max(1.0);
                [
                    p[0].clamp(x_min + ex, x_max - ex),
                    p[1].clamp(y_min + ey, y_max - ey),
                ]
            }
            Shape::Disk { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let r = dx.hypot(dy);
                let limit = radius * (1.0 - GEOM_TOL);
                if r >= limit && r > 0.0 {
                    [center[0] + dx * limit / r, center[1] + dy * limit / r]
                } else {
                    p
                }
            }
            Shape::Quadrant => [p[0].max(GEOM_TOL), p[1].max(GEOM_TOL)],
            Shape::Unbounded => p,
        }
    }

    fn check_inside(&self, p: Vec2, what: &str) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "{what} ({}, {}) is not strictly inside the domain",
                p[0], p[1]
            )))
        }
    }

    /// Picks among simultaneous crossings: earliest, with Dirichlet winning corner ties.
    fn earliest(&self, candidates: &[(usize, f64)]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &(seg, t) in candidates {
            best = match best {
                None => Some((seg, t)),
                Some((bs, bt)) => {
                    let tie = (t - bt).abs() <= GEOM_TOL
                        && self.segments[seg] == BcKind::Dirichlet
                        && self.segments[bs] != BcKind::Dirichlet;
                    if t < bt - GEOM_TOL || tie {
                        Some((seg, t))
                    } else {
                        Some((bs, bt))
                    }
                }
            };
        }
        best
    }

    /// First boundary crossing of the chord `p0 -> p1`, if any.
    pub fn classify_step(&self, p0: Vec2, p1: Vec2) -> Result<StepOutcome> {
        self.check_inside(p0, "step origin")?;
        if self.contains(p1) {
            return Ok(StepOutcome::Inside);
        }
        let d = [p1[0] - p0[0], p1[1] - p0[1]];
        let crossed = match self.shape {
            Shape::Unbounded => return Ok(StepOutcome::Inside),
            Shape::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                let mut c: Vec<(usize, f64)> = Vec::with_capacity(2);
                if p1[0] <= x_min {
                    c.push((0, (x_min - p0[0]) / d[0]));
                }
                if p1[0] >= x_max {
                    c.push((1, (x_max - p0[0]) / d[0]));
                }
                if p1[1] <= y_min {
                    c.push((2, (y_min - p0[1]) / d[1]));
                }
                if p1[1] >= y_max {
                    c.push((3, (y_max - p0[1]) / d[1]));
                }
                let (seg, t) = self.earliest(&c).expect("p1 outside implies a crossing");
                let t = t.clamp(0.0, 1.0);
                let mut h = [p0[0] + t * d[0], p0[1] + t * d[1]];
                match seg {
                    0 => h[0] = x_min,
                    1 => h[0] = x_max,
                    2 => h[1] = y_min,
                    _ => h[1] = y_max,
                }
                h[0] = h[0].clamp(x_min, x_max);
                h[1] = h[1].clamp(y_min, y_max);
                (seg, h, t)
            }
            Shape::Quadrant => {
                let mut c: Vec<(usize, f64)> = Vec::with_capacity(2);
                if p1[0] <= 0.0 {
                    c.push((0, p0[0] / (p0[0] - p1[0])));
                }
                if p1[1] <= 0.0 {
                    c.push((1, p0[1] / (p0[1] - p1[1])));
                }
                let (seg, t) = self.earliest(&c).expect("p1 outside implies a crossing");
                let t = t.clamp(0.0, 1.0);
                let mut h = [p0[0] + t * d[0], p0[1] + t * d[1]];
                if seg == 0 {
                    h[0] = 0.0;
                } else {
                    h[1] = 0.0;
                }
                h[0] = h[0].max(0.0);
                h[1] = h[1].max(0.0);
                (seg, h, t)
            }
            Shape::Disk { center, radius } => {
                let f = [p0[0] - center[0], p0[1] - center[1]];
                let a = d[0] * d[0] + d[1] * d[1];
                let b = 2.0 * (f[0] * d[0] + f[1] * d[1]);
                let c = f[0] * f[0] + f[1] * f[1] - radius * radius;
                // c < 0 (p0 inside), so the roots have opposite signs.
                let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
                let q = -0.5 * (b + b.signum() * disc);
                let (r1, r2) = (q / a, c / q);
                let t = if r1 > 0.0 { r1 } else { r2 };
                let t = t.clamp(0.0, 1.0);
                let raw = [f[0] + t * d[0], f[1] + t * d[1]];
                let r = raw[0].hypot(raw[1]);
                let h = [
                    center[0] + radius * raw[0] / r,
                    center[1] + radius * raw[1] / r,
                ];
                (0, h, t)
            }
        };
        Ok(StepOutcome::Crossed {
            segment: crossed.0,
            hit_point: crossed.1,
            hit_fraction: crossed.2,
        })
    }

    /// Mirror image of `p` across the tangent line of `segment` at `hit`.
    pub fn mirror(&self, p: Vec2, segment: usize, hit: Vec2) -> Vec2 {
        let n = self.outward_normal(segment, hit);
        let s = (p[0] - hit[0]) * n[0] + (p[1] - hit[1]) * n[1];
        [p[0] - 2.0 * s * n[0], p[1] - 2.0 * s * n[1]]
    }

    /// Specular reflection of an exited endpoint back into the domain.
    pub fn reflect(&self, p1: Vec2, outcome: StepOutcome) -> Result<Vec2> {
        let StepOutcome::Crossed {
            segment, hit_point, ..
        } = outcome
        else {
            return Err(Error::Precondition("reflect requires a crossing".into()));
        };
        let mut p = self.mirror(p1, segment, hit_point);
        let mut origin = self.nudge_inside(hit_point);
        for _ in 0..MAX_REFLECTIONS {
            match self.classify_step(origin, p)? {
                StepOutcome::Inside => return Ok(p),
                StepOutcome::Crossed {
                    segment, hit_point, ..
                } => {
                    p = self.mirror(p, segment, hit_point);
                    origin = self.nudge_inside(hit_point);
                }
            }
        }
        if self.contains(p) {
            Ok(p)
        } else {
            Err(Error::DegenerateStep(MAX_REFLECTIONS))
        }
    }

    /// Diffusion coefficient normal to `segment` at `at`.
    pub fn normal_diffusion(&self, segment: usize, at: Vec2, model: &TransportModel, t: f64) -> f64 {
        let n = self.outward_normal(segment, at);
        let d = model.diffusion_at(at, t);
        n[0] * n[0] * d[0] + n[1] * n[1] * d[1]
    }

    /// Probability that the Brownian bridge between two interior endpoints
    /// touched a Dirichlet segment during a step of length `dt`.
    ///
    /// Returns the combined probability and the most likely segment.
    pub fn bridge_hit_probability(
        &self,
        p0: Vec2,
        p1: Vec2,
        model: &TransportModel,
        t: f64,
        dt: f64,
    ) -> (f64, usize) {
        let mid = [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])];
        let diff = model.diffusion_at(mid, t);
        let term = |d0: f64, d1: f64, dn: f64| -> f64 {
            let denom = dn * dt;
            if denom <= 0.0 || d0 <= 0.0 || d1 <= 0.0 {
                return 0.0;
            }
            let e = d0 * d1 / denom;
            if e > 40.0 {
                0.0
            } else {
                (-e).exp()
            }
        };
        let mut survive = 1.0;
        let mut best = (0.0, 0);
        let mut consider = |seg: usize, p: f64| {
            survive *= 1.0 - p;
            if p > best.0 {
                best = (p, seg);
            }
        };
        match self.shape {
            Shape::Unbounded => {}
            Shape::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                for seg in 0..4 {
                    if self.segments[seg] != BcKind::Dirichlet {
                        continue;
                    }
                    let p = match seg {
                        0 => term(p0[0] - x_min, p1[0] - x_min, diff[0]),
                        1 => term(x_max - p0[0], x_max - p1[0], diff[0]),
                        2 => term(p0[1] - y_min, p1[1] - y_min, diff[1]),
                        _ => term(y_max - p0[1], y_max - p1[1], diff[1]),
                    };
                    consider(seg, p);
                }
            }
            Shape::Quadrant => {
                if self.segments[0] == BcKind::Dirichlet {
                    consider(0, term(p0[0], p1[0], diff[0]));
                }
                if self.segments[1] == BcKind::Dirichlet {
                    consider(1, term(p0[1], p1[1], diff[1]));
                }
            }
            Shape::Disk { center, radius } => {
                if self.segments[0] == BcKind::Dirichlet {
                    let d0 = radius - (p0[0] - center[0]).hypot(p0[1] - center[1]);
                    let d1 = radius - (p1[0] - center[0]).hypot(p1[1] - center[1]);
                    let n = self.outward_normal(0, mid);
                    let dn = n[0] * n[0] * diff[0] + n[1] * n[1] * diff[1];
                    consider(0, term(d0, d1, dn));
                }
            }
        }
        (1.0 - survive, best.1)
    }
}

/// Marks a live walker absorbed. Its weight is kept so the caller can tally it.
pub fn absorb(walker: &WalkerState) -> Result<WalkerState> {
    if !walker.alive {
        return Err(Error::Precondition("cannot absorb a dead walker".into()));
    }
    Ok(WalkerState {
        alive: false,
        ..*walker
    })
}

/// Absorption probability at a Robin wall for one step: `min(1, kappa * sqrt(pi * D_n * dt))`.
pub fn robin_absorption_probability(kappa: f64, normal_diffusion: f64, dt: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    if kappa.is_infinite() {
        return 1.0;
    }
    (kappa * (std::f64::consts::PI * normal_diffusion * dt).sqrt()).min(1.0)
}

/// Partial absorption at a Robin wall; survivors are reflected.
///
/// `walker.position` is the proposed (exited) endpoint of the step. A uniform
/// draw is consumed only when the absorption probability is strictly between
/// 0 and 1.
pub fn robin_interact(
    walker: &WalkerState,
    outcome: StepOutcome,
    kappa: f64,
    domain: &Domain,
    model: &TransportModel,
    t: f64,
    dt: f64,
    stream: &mut RngStream,
) -> Result<WalkerState> {
    let StepOutcome::Crossed {
        segment, hit_point, ..
    } = outcome
    else {
        return Err(Error::Precondition("robin_interact requires a crossing".into()));
    };
    if !(kappa >= 0.0) {
        return Err(Error::Precondition("kappa must be >= 0".into()));
    }
    let dn = domain.normal_diffusion(segment, hit_point, model, t);
    let p_abs = robin_absorption_probability(kappa, dn, dt);
    let absorbed = if p_abs >= 1.0 {
        true
    } else if p_abs <= 0.0 {
        false
    } else {
        stream.uniform() < p_abs
    };
    if absorbed {
        let mut w = absorb(walker)?;
        w.position = hit_point;
        Ok(w)
    } else {
        Ok(WalkerState {
            position: domain.reflect(walker.position, outcome)?,
            ..*walker
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Direction;

    fn disk() -> Domain {
        Domain::uniform(
            Shape::Disk {
                center: [0.5, 0.5],
                radius: 0.5,
            },
            BcKind::Dirichlet,
        )
        .unwrap()
    }

    #[test]
    fn square_inside() {
        let d = Domain::unit_square(BcKind::Dirichlet);
        assert_eq!(d.classify_step([0.5, 0.5], [0.6, 0.6]).unwrap(), StepOutcome::Inside);
    }

    #[test]
    fn square_right_wall_crossing() {
        let d = Domain::unit_square(BcKind::Dirichlet);
        match d.classify_step([0.99, 0.5], [1.01, 0.5]).unwrap() {
            StepOutcome::Crossed {
                segment,
                hit_point,
                hit_fraction,
            } => {
                assert_eq!(segment, 1);
                assert!((hit_point[0] - 1.0).abs() < GEOM_TOL);
                assert!((hit_point[1] - 0.5).abs() < GEOM_TOL);
                assert!((hit_fraction - 0.5).abs() < 1e-9);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn disk_chord_crossing() {
        match disk().classify_step([0.95, 0.5], [1.05, 0.5]).unwrap() {
            StepOutcome::Crossed {
                hit_point,
                hit_fraction,
                ..
            } => {
                assert!((hit_point[0] - 1.0).abs() < GEOM_TOL);
                assert!((hit_point[1] - 0.5).abs() < GEOM_TOL);
                assert!((hit_fraction - 0.5).abs() < 1e-9);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn origin_outside_is_rejected() {
        let d = Domain::unit_square(BcKind::Dirichlet);
        assert!(matches!(
            d.classify_step([1.5, 0.5], [0.5, 0.5]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn corner_prefers_dirichlet() {
        let d = Domain::new(
            Shape::Rectangle {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            },
            vec![BcKind::Neumann, BcKind::Neumann, BcKind::Neumann, BcKind::Dirichlet],
        )
        .unwrap();
        match d.classify_step([0.9, 0.9], [1.1, 1.1]).unwrap() {
            StepOutcome::Crossed { segment, .. } => assert_eq!(segment, 3),
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn absorb_tallies_weight() {
        let w = WalkerState {
            position: [0.1, 0.1],
            weight: 0.25,
            alive: true,
        };
        let a = absorb(&w).unwrap();
        assert!(!a.alive);
        assert_eq!(a.weight, 0.25);
        assert!(absorb(&a).is_err());
    }

    #[test]
    fn square_mirror() {
        let d = Domain::unit_square(BcKind::Neumann);
        let o = d.classify_step([0.99, 0.5], [1.01, 0.5]).unwrap();
        let p = d.reflect([1.01, 0.5], o).unwrap();
        assert!((p[0] - 0.99).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disk_radial_mirror() {
        let d = disk();
        let o = d.classify_step([0.97, 0.5], [1.02, 0.5]).unwrap();
        let p = d.reflect([1.02, 0.5], o).unwrap();
        assert!((p[0] - 0.98).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn corner_double_reflection() {
        let d = Domain::unit_square(BcKind::Neumann);
        let o = d.classify_step([0.95, 0.97], [1.05, 1.03]).unwrap();
        let p = d.reflect([1.05, 1.03], o).unwrap();
        assert!(d.contains(p));
        assert!((p[0] - 0.95).abs() < 1e-9 && (p[1] - 0.97).abs() < 1e-9);
    }

    #[test]
    fn robin_limits() {
        let d = Domain::unit_square(BcKind::Robin { kappa: 0.0 });
        let m = TransportModel::isotropic(0.05, Direction::Backward);
        let w = WalkerState {
            position: [1.01, 0.5],
            weight: 1.0,
            alive: true,
        };
        let o = d.classify_step([0.99, 0.5], [1.01, 0.5]).unwrap();
        let mut s = RngStream::new(1, 0);
        let r = robin_interact(&w, o, 0.0, &d, &m, 0.0, 1e-3, &mut s).unwrap();
        assert!(r.alive);
        assert_eq!(r.position, d.reflect([1.01, 0.5], o).unwrap());
        assert_eq!(s.counter(), 0);
        let r = robin_interact(&w, o, f64::INFINITY, &d, &m, 0.0, 1e-3, &mut s).unwrap();
        assert!(!r.alive);
        assert_eq!(r.weight, 1.0);
    }

    #[test]
    fn robin_probability_formula() {
        let p = robin_absorption_probability(2.0, 0.05, 1e-3);
        assert!((p - 2.0 * (std::f64::consts::PI * 0.05e-3).sqrt()).abs() < 1e-15);
        assert_eq!(robin_absorption_probability(1e9, 0.05, 1e-3), 1.0);
    }

    #[test]
    fn bridge_probability_vanishes_far_from_walls() {
        let d = Domain::unit_square(BcKind::Dirichlet);
        let m = TransportModel::isotropic(0.05, Direction::Backward);
        let (p, _) = d.bridge_hit_probability([0.5, 0.5], [0.51, 0.5], &m, 0.0, 1e-3);
        assert_eq!(p, 0.0);
        let (p, seg) = d.bridge_hit_probability([0.995, 0.5], [0.996, 0.5], &m, 0.0, 1e-3);
        assert!(p > 0.1 && p < 1.0);
        assert_eq!(seg, 1);
    }
}
