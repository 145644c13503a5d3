//! Finite-difference oracles shared by integration and acceptance tests.
#![allow(dead_code)]

/// Solves a tridiagonal system in place (Thomas algorithm).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    c[0] = upper[0] / b;
    rhs[0] /= b;
    for i in 1..n {
        b = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / b;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Linear operator `L p` as a tridiagonal (lower, diag, upper), `dp/dt = L p`.
struct Tri {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tri {
    fn apply(&self, p: &[f64]) -> Vec<f64> {
        let n = p.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * p[i];
                if i > 0 {
                    v += self.lower[i] * p[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * p[i + 1];
                }
                v
            })
            .collect()
    }

    /// Advances `p` by `dt` with the theta scheme (0.5 = Crank-Nicolson, 1 = implicit Euler).
    fn step(&self, p: &mut Vec<f64>, dt: f64, theta: f64) {
        let lp = self.apply(p);
        let mut rhs: Vec<f64> = p.iter().zip(&lp).map(|(a, b)| a + (1.0 - theta) * dt * b).collect();
        let lower: Vec<f64> = self.lower.iter().map(|v| -theta * dt * v).collect();
        let upper: Vec<f64> = self.upper.iter().map(|v| -theta * dt * v).collect();
        let diag: Vec<f64> = self.diag.iter().map(|v| 1.0 - theta * dt * v).collect();
        thomas(&lower, &diag, &upper, &mut rhs);
        *p = rhs;
    }
}

/// Crank-Nicolson with four implicit half steps at the start to damp the initial spike.
fn integrate(op: &Tri, p: &mut Vec<f64>, tau: f64, dt: f64) {
    let steps = (tau / dt).round() as usize;
    assert!(steps >= 2);
    for _ in 0..4 {
        op.step(p, dt / 2.0, 1.0);
    }
    for _ in 2..steps {
        op.step(p, dt, 0.5);
    }
}

fn interp(xs: &[f64], ps: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|v| *v <= x);
    if k == 0 || k == xs.len() {
        return 0.0;
    }
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ps[k - 1] * (1.0 - t) + ps[k] * t
}

/// 1-D heat kernel on `[0, 1]` with zero end values, from a point source at a grid node.
pub struct HeatDirichlet1d {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl HeatDirichlet1d {
    /// `intervals` must place `source` on a node.
    pub fn solve(d: f64, source: f64, tau: f64, intervals: usize, dt: f64) -> Self {
        let h = 1.0 / intervals as f64;
        let m = intervals - 1;
        let k = d / (h * h);
        let op = Tri {
            lower: vec![k; m],
            diag: vec![-2.0 * k; m],
            upper: vec![k; m],
        };
        let mut p = vec![0.0; m];
        let src = (source / h).round() as usize;
        assert!((src as f64 * h - source).abs() < 1e-12 && src >= 1 && src <= m);
        p[src - 1] = 1.0 / h;
        integrate(&op, &mut p, tau, dt);
        let mut nodes = vec![0.0];
        let mut values = vec![0.0];
        for (i, v) in p.into_iter().enumerate() {
            nodes.push((i + 1) as f64 * h);
            values.push(v);
        }
        nodes.push(1.0);
        values.push(0.0);
        Self { nodes, values }
    }

    pub fn at(&self, x: f64) -> f64 {
        interp(&self.nodes, &self.values, x)
    }
}

/// 1-D Fokker-Planck density `p_t = (D p)_xx - (v p)_x` with `D = d0 x^2 psi`, `v = v0 x psi`,
/// solved by finite volumes on a geometric grid over `(0, inf)` with zero-flux ends.
pub struct FokkerPlanck1d {
    centers: Vec<f64>,
    density: Vec<f64>,
}

impl FokkerPlanck1d {
    pub fn solve(d0: f64, v0: f64, psi: f64, source: f64, tau: f64, cells: usize, dt: f64) -> Self {
        let (lo0, hi) = (1e-5f64, 1e3f64);
        let r = (hi / lo0).ln() / cells as f64;
        // Place the impulse at the center of cell `src`.
        let src = ((source / lo0).ln() / r).floor() as usize;
        let lo = source / ((r * src as f64).exp() * 0.5 * (1.0 + r.exp()));
        let faces: Vec<f64> = (0..=cells).map(|i| lo * (r * i as f64).exp()).collect();
        let centers: Vec<f64> = faces.windows(2).map(|f| 0.5 * (f[0] + f[1])).collect();
        let widths: Vec<f64> = faces.windows(2).map(|f| f[1] - f[0]).collect();
        let dcoef = |x: f64| d0 * x * x * psi;
        let vcoef = |x: f64| v0 * x * psi;

        // Flux at interior face f between cells f-1 and f:
        // F = v_f (p_l + p_r) / 2 - (D_r p_r - D_l p_l) / (x_r - x_l)
        let n = cells;
        let mut op = Tri {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        };
        #[allow(clippy::needless_range_loop)]
        for f in 1..n {
            let (l, rr) = (f - 1, f);
            let vf = vcoef(faces[f]);
            let gap = centers[rr] - centers[l];
            let cl = 0.5 * vf + dcoef(centers[l]) / gap;
            let cr = 0.5 * vf - dcoef(centers[rr]) / gap;
            // Flux leaves cell l and enters cell r.
            op.diag[l] -= cl / widths[l];
            op.upper[l] -= cr / widths[l];
            op.lower[rr] += cl / widths[rr];
            op.diag[rr] += cr / widths[rr];
        }
        let mut p = vec![0.0; n];
        p[src] = 1.0 / widths[src];
        integrate(&op, &mut p, tau, dt);
        Self { centers, density: p }
    }

    pub fn at(&self, x: f64) -> f64 {
        interp(&self.centers, &self.density, x)
    }
}

/// Radially symmetric heat kernel on a disk of radius `radius` with zero wall
/// value, for a unit source at the center. Finite volumes in `r`.
pub struct RadialDirichlet {
    centers: Vec<f64>,
    values: Vec<f64>,
}

impl RadialDirichlet {
    pub fn solve(d: f64, radius: f64, tau: f64, cells: usize, dt: f64) -> Self {
        let h = radius / cells as f64;
        let n = cells;
        let mut op = Tri {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        };
        // Annulus i spans [i h, (i + 1) h]; area factor r dr.
        let area = |i: usize| 0.5 * h * h * ((i + 1) as f64).powi(2) - 0.5 * h * h * (i as f64).powi(2);
        for f in 1..=n {
            let rf = f as f64 * h;
            let c = d * rf / h;
            let l = f - 1;
            if f < n {
                op.diag[l] -= c / area(l);
                op.upper[l] += c / area(l);
                op.lower[f] += c / area(f);
                op.diag[f] -= c / area(f);
            } else {
                // Wall value zero half a cell beyond the last center.
                op.diag[l] -= 2.0 * c / area(l);
            }
        }
        let mut p = vec![0.0; n];
        p[0] = 1.0 / (std::f64::consts::TAU * area(0));
        integrate(&op, &mut p, tau, dt);
        let mut centers: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let mut values = p;
        centers.push(radius);
        values.push(0.0);
        Self { centers, values }
    }

    pub fn at(&self, r: f64) -> f64 {
        if r <= self.centers[0] {
            return self.values[0];
        }
        interp(&self.centers, &self.values, r)
    }
}
