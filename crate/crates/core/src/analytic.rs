//! Exact Green's functions and the convolution ("magic rule") solver.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{GreensField, GridGeometry};
use crate::geometry::{BcKind, Domain, Shape};
use crate::model::{Direction, Vec2};

/// Truncation controls for eigenfunction series.
///
/// A series stops once the bound on the remaining terms falls below
/// `tail_tolerance` times the running sum of term bounds. Term bounds rather
/// than signed terms are used so that points on a wall, where every term is
/// zero, still terminate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams {
    pub max_terms: usize,
    pub tail_tolerance: f64,
    pub bessel_zeros: usize,
    pub bessel_orders: usize,
}

impl Default for SeriesParams {
    fn default() -> Self {
        Self {
            max_terms: 200,
            tail_tolerance: 1e-10,
            bessel_zeros: 60,
            bessel_orders: 30,
        }
    }
}

impl SeriesParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 1 || self.bessel_zeros < 1 || self.bessel_orders < 1 {
            return Err(Error::config("reference.series", "term counts must be >= 1"));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(Error::config("reference.series.tail_tolerance", "must be > 0"));
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("elapsed time must be > 0, got {tau}")))
    }
}

/// Planar heat kernel `exp(-|x - x'|^2 / (4 D tau)) / (4 pi D tau)`.
pub fn gf_free_space(x: Vec2, xp: Vec2, tau: f64, d0: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(d0 > 0.0) {
        return Err(Error::Domain("D0 must be > 0".into()));
    }
    let r2 = (x[0] - xp[0]).powi(2) + (x[1] - xp[1]).powi(2);
    let s = 4.0 * d0 * tau;
    Ok((-r2 / s).exp() / (PI * s))
}

/// 1-D Dirichlet heat kernel on `[lo, lo + len]` as a sine series.
pub fn sine_series_1d(x: f64, xp: f64, lo: f64, len: f64, d0: f64, tau: f64, params: &SeriesParams) -> Result<f64> {
    check_tau(tau)?;
    let tol = 1e-12 * len;
    if x < lo - tol || x > lo + len + tol || xp < lo - tol || xp > lo + len + tol {
        return Err(Error::Domain(format!("points {x}, {xp} outside [{lo}, {}]", lo + len)));
    }
    let c = PI * PI * d0 * tau / (len * len);
    let (u, up) = ((x - lo) / len, (xp - lo) / len);
    let amp = 2.0 / len;
    let mut sum = 0.0;
    let mut env = 0.0;
    for n in 1..=params.max_terms {
        let nf = n as f64;
        let b = amp * (-nf * nf * c).exp();
        sum += b * (nf * PI * u).sin() * (nf * PI * up).sin();
        env += b;
        let n1 = nf + 1.0;
        let ratio = (-(2.0 * nf + 3.0) * c).exp();
        let tail = amp * (-n1 * n1 * c).exp() / (1.0 - ratio).max(f64::MIN_POSITIVE);
        if tail < params.tail_tolerance * env {
            return Ok(sum);
        }
    }
    Err(Error::Convergence(format!(
        "sine series needs more than {} terms at tau = {tau}",
        params.max_terms
    )))
}

/// Dirichlet Green's function of the rectangle `[x_min, x_max] x [y_min, y_max]`.
pub fn gf_rectangle_dirichlet(
    x: Vec2,
    xp: Vec2,
    tau: f64,
    d0: f64,
    extents: [f64; 4],
    params: &SeriesParams,
) -> Result<f64> {
    let [x0, x1, y0, y1] = extents;
    let gx = sine_series_1d(x[0], xp[0], x0, x1 - x0, d0, tau, params)?;
    let gy = sine_series_1d(x[1], xp[1], y0, y1 - y0, d0, tau, params)?;
    Ok(gx * gy)
}

/// Dirichlet Green's function of the unit square.
pub fn gf_square_dirichlet(x: Vec2, xp: Vec2, tau: f64, d0: f64, params: &SeriesParams) -> Result<f64> {
    gf_rectangle_dirichlet(x, xp, tau, d0, [0.0, 1.0, 0.0, 1.0], params)
}

/// Bessel function of the first kind `J_m(x)` by Miller's backward recurrence,
/// normalized with `J_0 + 2 sum J_2k = 1`.
pub fn bessel_j(m: usize, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(m, -x);
        return if m.is_multiple_of(2) { v } else { -v };
    }
    if x == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let big = m.max(x.ceil() as usize);
    let start = 2 * ((big + 16 + (40.0 * big as f64).sqrt() as usize) / 2) + 2;
    let mut jkp1 = 0.0;
    let mut jk = 1e-30;
    let mut sum = 0.0;
    let mut ans = 0.0;
    for k in (1..=start).rev() {
        let jkm1 = 2.0 * k as f64 / x * jk - jkp1;
        jkp1 = jk;
        jk = jkm1;
        if jk.abs() > 1e250 {
            jk *= 1e-250;
            jkp1 *= 1e-250;
            sum *= 1e-250;
            ans *= 1e-250;
        }
        let order = k - 1;
        if order == m {
            ans = jk;
        }
        if order % 2 == 0 {
            sum += if order == 0 { jk } else { 2.0 * jk };
        }
    }
    ans / sum
}

/// Positive zeros `j_{m,k}` and `1 / J_{m+1}(j_{m,k})^2` for orders `0..orders`.
#[derive(Debug)]
pub struct BesselZeroTable {
    pub zeros: Vec<Vec<f64>>,
    pub inv_norm: Vec<Vec<f64>>,
}

fn compute_zero_table(orders: usize, count: usize) -> BesselZeroTable {
    let mut zeros = Vec::with_capacity(orders);
    let mut inv_norm = Vec::with_capacity(orders);
    for m in 0..orders {
        let mut zs = Vec::with_capacity(count);
        let step = 0.25;
        let mut a = m as f64 + 0.5;
        let mut fa = bessel_j(m, a);
        while zs.len() < count {
            let b = a + step;
            let fb = bessel_j(m, b);
            if fa == 0.0 {
                zs.push(a);
            } else if fa.signum() != fb.signum() {
                let (mut lo, mut hi, mut flo) = (a, b, fa);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = bessel_j(m, mid);
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                zs.push(0.5 * (lo + hi));
            }
            a = b;
            fa = fb;
        }
        let ns = zs.iter().map(|&j| 1.0 / bessel_j(m + 1, j).powi(2)).collect();
        zeros.push(zs);
        inv_norm.push(ns);
    }
    BesselZeroTable { zeros, inv_norm }
}

/// Shared zero table with at least `orders` orders and `count` zeros each.
pub fn bessel_zero_table(orders: usize, count: usize) -> Arc<BesselZeroTable> {
    type Cache = Mutex<HashMap<(usize, usize), Arc<BesselZeroTable>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("zero table cache poisoned");
    guard
        .entry((orders, count))
        .or_insert_with(|| Arc::new(compute_zero_table(orders, count)))
        .clone()
}

fn bessel_envelope(m: usize, x: f64) -> f64 {
    // |J_m(x)| <= min(1, (x/2)^m / m!)
    let mut v = 1.0;
    let h = 0.5 * x.abs();
    for k in 1..=m {
        v *= h / k as f64;
        if v < 1e-300 {
            return 0.0;
        }
    }
    v.min(1.0)
}

/// Dirichlet Green's function of a disk as a Bessel–Fourier series.
pub fn gf_disk_dirichlet(
    x: Vec2,
    xp: Vec2,
    tau: f64,
    d0: f64,
    center: Vec2,
    radius: f64,
    params: &SeriesParams,
) -> Result<f64> {
    check_tau(tau)?;
    let polar = |p: Vec2| {
        let dx = p[0] - center[0];
        let dy = p[1] - center[1];
        (dx.hypot(dy), dy.atan2(dx))
    };
    let (r, th) = polar(x);
    let (rp, thp) = polar(xp);
    let lim = radius * (1.0 + 1e-12);
    if r > lim || rp > lim {
        return Err(Error::Domain("points must lie inside the disk".into()));
    }
    let (u, up) = ((r / radius).min(1.0), (rp / radius).min(1.0));
    let table = bessel_zero_table(params.bessel_orders, params.bessel_zeros);
    let a = d0 * tau / (radius * radius);
    let pref = 1.0 / (PI * radius * radius);
    let tol = params.tail_tolerance;
    let dth = th - thp;
    let mut sum = 0.0;
    let mut env_sum = 0.0;
    for m in 0..params.bessel_orders {
        let eps = if m == 0 { 1.0 } else { 2.0 };
        let ang = (m as f64 * dth).cos();
        let mut order_bound = 0.0;
        let mut converged = false;
        for k in 0..params.bessel_zeros {
            let j = table.zeros[m][k];
            let coef = eps * pref * table.inv_norm[m][k] * (-j * j * a).exp();
            env_sum += coef;
            order_bound += coef * bessel_envelope(m, j * u) * bessel_envelope(m, j * up);
            if coef != 0.0 {
                let t = bessel_j(m, j * u) * bessel_j(m, j * up);
                sum += coef * t * ang;
            }
            // Coefficients decay once j^2 a > 1/2.
            if j * j * a > 0.5 && coef < tol * env_sum {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence(format!(
                "Bessel zero table exhausted at order {m} (tau = {tau})"
            )));
        }
        if m > 0 && order_bound < tol * env_sum {
            return Ok(sum);
        }
    }
    Err(Error::Convergence(format!(
        "more than {} angular orders needed (tau = {tau})",
        params.bessel_orders
    )))
}

/// Linearly accelerating groundwater flow with quadratic dispersion:
/// `D_xx = d0 (a1 x + a2)^2 psi1`, `v_x = v0 (a1 x + a2) psi1`, likewise in y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundwaterParams {
    pub d0: f64,
    pub v0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub gamma: f64,
}

impl GroundwaterParams {
    /// The standard accelerating-aquifer case: `D0 = 0.05, v0 = 0.2, a1 = b1 = 1, a2 = b2 = 0, psi = 1, gamma = 0.5`.
    pub fn standard() -> Self {
        Self {
            d0: 0.05,
            v0: 0.2,
            a1: 1.0,
            a2: 0.0,
            b1: 1.0,
            b2: 0.0,
            psi1: 1.0,
            psi2: 1.0,
            gamma: 0.5,
        }
    }
}

/// Transition density along one axis where `D = d0 (a u + b)^2 psi` and `v = v0 (a u + b) psi`.
///
/// With `a != 0` the variable `U = a u + b` is a geometric Brownian motion,
/// so `ln U` is Gaussian with drift `(a v0 - a^2 d0) psi` and variance rate
/// `2 a^2 d0 psi`. With `a = 0` the coefficients are constant.
pub fn groundwater_axis_density(u: f64, up: f64, tau: f64, d0: f64, v0: f64, a: f64, b: f64, psi: f64) -> Result<f64> {
    check_tau(tau)?;
    if a == 0.0 {
        let d = d0 * b * b * psi;
        let v = v0 * b * psi;
        if !(d > 0.0) {
            return Err(Error::Domain("degenerate constant dispersion".into()));
        }
        let s2 = 2.0 * d * tau;
        let m = up + v * tau;
        return Ok((-(u - m).powi(2) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt());
    }
    let uu = a * u + b;
    let uup = a * up + b;
    if !(uu > 0.0 && uup > 0.0) {
        return Err(Error::Domain(format!(
            "points {u}, {up} lie outside the region where a u + b > 0"
        )));
    }
    let s2 = 2.0 * a * a * d0 * psi * tau;
    if !(s2 > 0.0) {
        return Err(Error::Domain("degenerate dispersion".into()));
    }
    let mu = uup.ln() + (a * v0 - a * a * d0) * psi * tau;
    let z = uu.ln() - mu;
    Ok(a.abs() * (-z * z / (2.0 * s2)).exp() / (uu * (2.0 * PI * s2).sqrt()))
}

/// Response at `(x, t)` to a unit impulse at `(xp, tp)`, including decay `exp(-gamma (t - tp))`.
pub fn gf_groundwater(x: Vec2, t: f64, xp: Vec2, tp: f64, p: &GroundwaterParams) -> Result<f64> {
    if !(t > tp) {
        return Err(Error::Domain(format!("response time {t} must exceed impulse time {tp}")));
    }
    let tau = t - tp;
    let gx = groundwater_axis_density(x[0], xp[0], tau, p.d0, p.v0, p.a1, p.a2, p.psi1)?;
    let gy = groundwater_axis_density(x[1], xp[1], tau, p.d0, p.v0, p.b1, p.b2, p.psi2)?;
    Ok(gx * gy * (-p.gamma * tau).exp())
}

/// A Green's function `G(x, t | x', t')`, zero for `t' >= t`.
pub trait GreensFunction: Send + Sync {
    /// Value at elapsed time `tau = t - t' > 0`.
    fn kernel(&self, x: Vec2, xp: Vec2, tau: f64) -> Result<f64>;

    fn eval(&self, x: Vec2, t: f64, xp: Vec2, tp: f64) -> Result<f64> {
        if tp >= t {
            Ok(0.0)
        } else {
            self.kernel(x, xp, t - tp)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FreeSpaceGf {
    pub d0: f64,
}

impl GreensFunction for FreeSpaceGf {
    fn kernel(&self, x: Vec2, xp: Vec2, tau: f64) -> Result<f64> {
        gf_free_space(x, xp, tau, self.d0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RectangleGf {
    pub d0: f64,
    pub extents: [f64; 4],
    pub params: SeriesParams,
}

impl GreensFunction for RectangleGf {
    fn kernel(&self, x: Vec2, xp: Vec2, tau: f64) -> Result<f64> {
        gf_rectangle_dirichlet(x, xp, tau, self.d0, self.extents, &self.params)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DiskGf {
    pub d0: f64,
    pub center: Vec2,
    pub radius: f64,
    pub params: SeriesParams,
}

impl GreensFunction for DiskGf {
    fn kernel(&self, x: Vec2, xp: Vec2, tau: f64) -> Result<f64> {
        gf_disk_dirichlet(x, xp, tau, self.d0, self.center, self.radius, &self.params)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GroundwaterGf {
    pub params: GroundwaterParams,
}

impl GreensFunction for GroundwaterGf {
    fn kernel(&self, x: Vec2, xp: Vec2, tau: f64) -> Result<f64> {
        gf_groundwater(x, tau, xp, 0.0, &self.params)
    }
}

/// Exact field matching an estimate: over impulse points `x'` for backward
/// runs launched at the response point, over response points `x` for forward
/// runs launched at the impulse point. Cells whose centroid lies outside
/// `domain` are zero.
pub fn reference_field(
    gf: &dyn GreensFunction,
    geometry: GridGeometry,
    domain: &Domain,
    launch: Vec2,
    tau: f64,
    direction: Direction,
    time_label: f64,
) -> Result<GreensField> {
    let mut f = GreensField::from_fn(geometry, time_label, |c| {
        if !domain.contains(c) {
            return Ok(0.0);
        }
        match direction {
            Direction::Backward => gf.kernel(launch, c, tau),
            Direction::Forward => gf.kernel(c, launch, tau),
        }
    })?;
    f.meta.tau = tau;
    f.meta.source = "reference".into();
    Ok(f)
}

pub type ScalarField = Arc<dyn Fn(Vec2, f64) -> f64 + Send + Sync>;
pub type InitialField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Vec2, f64) -> Vec2 + Send + Sync>;

/// Advective (inflow/outflow) boundary data.
#[derive(Clone)]
pub struct AdvectiveBoundary {
    pub segments: Vec<usize>,
    pub eta: ScalarField,
    pub velocity: VectorField,
}

/// Forcing, initial and boundary data for the convolution solver.
#[derive(Clone)]
pub struct MagicRuleProblem {
    pub domain: Domain,
    pub d0: f64,
    pub source: Option<ScalarField>,
    pub initial: Option<InitialField>,
    /// Prescribed values on Dirichlet segments.
    pub dirichlet: Option<ScalarField>,
    /// Prescribed outward normal derivative on Neumann segments.
    pub neumann_flux: Option<ScalarField>,
    pub advective: Option<AdvectiveBoundary>,
    /// Cells per axis (rectangle) or radial rings (disk).
    pub space_cells: usize,
    pub time_slabs: usize,
    /// When set, a half-resolution solve is compared against the full one.
    pub tolerance: Option<f64>,
}

impl MagicRuleProblem {
    pub fn new(domain: Domain, d0: f64) -> Self {
        Self {
            domain,
            d0,
            source: None,
            initial: None,
            dirichlet: None,
            neumann_flux: None,
            advective: None,
            space_cells: 40,
            time_slabs: 40,
            tolerance: None,
        }
    }
}

struct AreaNode {
    p: Vec2,
    w: f64,
}

struct EdgeNode {
    segment: usize,
    p: Vec2,
    n: Vec2,
    w: f64,
}

struct Quadrature {
    area: Vec<AreaNode>,
    edge: Vec<EdgeNode>,
    h: f64,
}

fn build_quadrature(domain: &Domain, cells: usize) -> Result<Quadrature> {
    let nf = cells as f64;
    match *domain.shape() {
        Shape::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } => {
            let (dx, dy) = ((x_max - x_min) / nf, (y_max - y_min) / nf);
            let mut area = Vec::with_capacity(cells * cells);
            for j in 0..cells {
                for i in 0..cells {
                    area.push(AreaNode {
                        p: [x_min + (i as f64 + 0.5) * dx, y_min + (j as f64 + 0.5) * dy],
                        w: dx * dy,
                    });
                }
            }
            let mut edge = Vec::with_capacity(4 * cells);
            for k in 0..cells {
                let sx = x_min + (k as f64 + 0.5) * dx;
                let sy = y_min + (k as f64 + 0.5) * dy;
                edge.push(EdgeNode { segment: 0, p: [x_min, sy], n: [-1.0, 0.0], w: dy });
                edge.push(EdgeNode { segment: 1, p: [x_max, sy], n: [1.0, 0.0], w: dy });
                edge.push(EdgeNode { segment: 2, p: [sx, y_min], n: [0.0, -1.0], w: dx });
                edge.push(EdgeNode { segment: 3, p: [sx, y_max], n: [0.0, 1.0], w: dx });
            }
            Ok(Quadrature {
                area,
                edge,
                h: 0.5 * dx.min(dy),
            })
        }
        Shape::Disk { center, radius } => {
            let dr = radius / nf;
            let nth = 4 * cells;
            let dth = 2.0 * PI / nth as f64;
            let mut area = Vec::with_capacity(cells * nth);
            for i in 0..cells {
                let r = (i as f64 + 0.5) * dr;
                for k in 0..nth {
                    let th = (k as f64 + 0.5) * dth;
                    area.push(AreaNode {
                        p: [center[0] + r * th.cos(), center[1] + r * th.sin()],
                        w: r * dr * dth,
                    });
                }
            }
            let edge = (0..nth)
                .map(|k| {
                    let th = (k as f64 + 0.5) * dth;
                    let n = [th.cos(), th.sin()];
                    EdgeNode {
                        segment: 0,
                        p: [center[0] + radius * n[0], center[1] + radius * n[1]],
                        n,
                        w: radius * dth,
                    }
                })
                .collect();
            Ok(Quadrature {
                area,
                edge,
                h: 0.5 * dr,
            })
        }
        _ => Err(Error::Precondition(
            "the convolution solver needs a bounded rectangle or disk".into(),
        )),
    }
}

fn magic_rule_at(problem: &MagicRuleProblem, gf: &dyn GreensFunction, x: Vec2, t: f64, cells: usize, slabs: usize) -> Result<f64> {
    let q = build_quadrature(&problem.domain, cells)?;
    let dt = t / slabs as f64;
    let mut eta = 0.0;
    if let Some(phi) = &problem.initial {
        for a in &q.area {
            let v = phi(a.p);
            if v != 0.0 {
                eta += gf.eval(x, t, a.p, 0.0)? * v * a.w;
            }
        }
    }
    for k in 0..slabs {
        let tp = (k as f64 + 0.5) * dt;
        if let Some(f) = &problem.source {
            for a in &q.area {
                let v = f(a.p, tp);
                if v != 0.0 {
                    eta += gf.eval(x, t, a.p, tp)? * v * a.w * dt;
                }
            }
        }
        for e in &q.edge {
            let bc = problem.domain.bc(e.segment);
            if let (BcKind::Dirichlet, Some(g)) = (bc, &problem.dirichlet) {
                let v = g(e.p, tp);
                if v != 0.0 {
                    // One-sided second-order normal derivative from inside the domain.
                    let h = q.h;
                    let p1 = [e.p[0] - h * e.n[0], e.p[1] - h * e.n[1]];
                    let p2 = [e.p[0] - 2.0 * h * e.n[0], e.p[1] - 2.0 * h * e.n[1]];
                    let g0 = gf.eval(x, t, e.p, tp)?;
                    let g1 = gf.eval(x, t, p1, tp)?;
                    let g2 = gf.eval(x, t, p2, tp)?;
                    let dgdn = (3.0 * g0 - 4.0 * g1 + g2) / (2.0 * h);
                    eta -= problem.d0 * v * dgdn * e.w * dt;
                }
            }
            if let (BcKind::Neumann, Some(hf)) = (bc, &problem.neumann_flux) {
                let v = hf(e.p, tp);
                if v != 0.0 {
                    eta += problem.d0 * gf.eval(x, t, e.p, tp)? * v * e.w * dt;
                }
            }
            if let Some(adv) = &problem.advective {
                if adv.segments.contains(&e.segment) {
                    let vel = (adv.velocity)(e.p, tp);
                    let vn = vel[0] * e.n[0] + vel[1] * e.n[1];
                    let v = (adv.eta)(e.p, tp) * vn;
                    if v != 0.0 {
                        eta -= gf.eval(x, t, e.p, tp)? * v * e.w * dt;
                    }
                }
            }
        }
    }
    Ok(eta)
}

/// Evaluates `eta(x, t)` as convolutions of `gf` with the problem data,
/// each integral by composite midpoint quadrature in space and time.
pub fn magic_rule_solve(problem: &MagicRuleProblem, gf: &dyn GreensFunction, x: Vec2, t: f64) -> Result<f64> {
    if problem.space_cells < 2 || problem.time_slabs < 2 {
        return Err(Error::Precondition("quadrature resolutions must be >= 2".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Precondition("solution time must be > 0".into()));
    }
    let fine = magic_rule_at(problem, gf, x, t, problem.space_cells, problem.time_slabs)?;
    if let Some(tol) = problem.tolerance {
        let (c, s) = (problem.space_cells / 2, problem.time_slabs / 2);
        if c >= 1 && s >= 1 {
            let coarse = magic_rule_at(problem, gf, x, t, c, s)?;
            let estimate = (fine - coarse).abs() / 3.0;
            let limit = 10.0 * tol * fine.abs().max(f64::MIN_POSITIVE);
            if estimate > limit {
                return Err(Error::Resolution { estimate, limit });
            }
        }
    }
    Ok(fine)
}

/// Gaussian of standard deviation `width` centred at `x0`, unit mass.
pub fn mollified_delta(x0: Vec2, width: f64) -> InitialField {
    let s2 = width * width;
    Arc::new(move |p: Vec2| {
        let r2 = (p[0] - x0[0]).powi(2) + (p[1] - x0[1]).powi(2);
        (-r2 / (2.0 * s2)).exp() / (2.0 * PI * s2)
    })
}
