//! Transport coefficients: drift, diagonal diffusion and first-order decay.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

/// Direction in which walkers are integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Launched from the response point; drift is the reversed velocity.
    Backward,
    /// Launched from the impulse point; drift is the velocity itself.
    Forward,
}

type FieldFn = Arc<dyn Fn(Vec2, f64) -> Vec2 + Send + Sync>;

/// Coefficients of the linear-in-position "aquifer" family:
/// component x is `scale * (a1 * x + a2) * psi1`, component y likewise with `b1, b2, psi2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProfile {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(default = "one")]
    pub psi1: f64,
    #[serde(default = "one")]
    pub psi2: f64,
}

fn one() -> f64 {
    1.0
}

impl LinearProfile {
    pub const IDENTITY: LinearProfile = LinearProfile {
        a1: 1.0,
        a2: 0.0,
        b1: 1.0,
        b2: 0.0,
        psi1: 1.0,
        psi2: 1.0,
    };

    fn lin(&self, p: Vec2) -> Vec2 {
        [self.a1 * p[0] + self.a2, self.b1 * p[1] + self.b2]
    }
}

#[derive(Clone)]
pub enum VelocityField {
    Zero,
    Constant(Vec2),
    /// `v = v0 * (a1 x + a2) psi1, v0 * (b1 y + b2) psi2`.
    Linear { v0: f64, profile: LinearProfile },
    Custom(FieldFn),
}

#[derive(Clone)]
pub enum DiffusionField {
    Constant(Vec2),
    /// `D = d0 * (a1 x + a2)^2 psi1, d0 * (b1 y + b2)^2 psi2`.
    QuadraticLinear { d0: f64, profile: LinearProfile },
    Custom(FieldFn),
}

impl VelocityField {
    #[inline]
    pub fn eval(&self, p: Vec2, t: f64) -> Vec2 {
        match self {
            VelocityField::Zero => [0.0, 0.0],
            VelocityField::Constant(v) => *v,
            VelocityField::Linear { v0, profile } => {
                let l = profile.lin(p);
                [v0 * l[0] * profile.psi1, v0 * l[1] * profile.psi2]
            }
            VelocityField::Custom(f) => f(p, t),
        }
    }
}

impl DiffusionField {
    #[inline]
    pub fn eval(&self, p: Vec2, t: f64) -> Vec2 {
        match self {
            DiffusionField::Constant(d) => *d,
            DiffusionField::QuadraticLinear { d0, profile } => {
                let l = profile.lin(p);
                [d0 * l[0] * l[0] * profile.psi1, d0 * l[1] * l[1] * profile.psi2]
            }
            DiffusionField::Custom(f) => f(p, t),
        }
    }

    /// Constant isotropic value when the field is spatially uniform and isotropic.
    pub fn isotropic_constant(&self) -> Option<f64> {
        match self {
            DiffusionField::Constant([a, b]) if a == b => Some(*a),
            _ => None,
        }
    }
}

impl fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VelocityField::Zero => write!(f, "Zero"),
            VelocityField::Constant(v) => write!(f, "Constant({v:?})"),
            VelocityField::Linear { v0, profile } => write!(f, "Linear({v0}, {profile:?})"),
            VelocityField::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl fmt::Debug for DiffusionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffusionField::Constant(d) => write!(f, "Constant({d:?})"),
            DiffusionField::QuadraticLinear { d0, profile } => {
                write!(f, "QuadraticLinear({d0}, {profile:?})")
            }
            DiffusionField::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Drift, diagonal diffusion and decay of a linear transport problem.
///
/// Only the diagonal of the diffusion tensor is representable; a cross term
/// cannot be expressed, which is what the walker construction requires.
#[derive(Clone, Debug)]
pub struct TransportModel {
    pub velocity: VelocityField,
    pub diffusion: DiffusionField,
    pub decay: f64,
    pub direction: Direction,
}

impl TransportModel {
    /// Pure isotropic diffusion with coefficient `d0`.
    pub fn isotropic(d0: f64, direction: Direction) -> Self {
        Self {
            velocity: VelocityField::Zero,
            diffusion: DiffusionField::Constant([d0, d0]),
            decay: 0.0,
            direction,
        }
    }

    /// Groundwater model: linearly accelerating flow with quadratic dispersion.
    pub fn groundwater(params: &crate::analytic::GroundwaterParams, direction: Direction) -> Self {
        let profile = LinearProfile {
            a1: params.a1,
            a2: params.a2,
            b1: params.b1,
            b2: params.b2,
            psi1: params.psi1,
            psi2: params.psi2,
        };
        Self {
            velocity: VelocityField::Linear {
                v0: params.v0,
                profile,
            },
            diffusion: DiffusionField::QuadraticLinear {
                d0: params.d0,
                profile,
            },
            decay: params.gamma,
            direction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(Error::config("model.decay", "decay must be finite and >= 0"));
        }
        match &self.diffusion {
            DiffusionField::Constant(d) if d.iter().any(|x| !(x.is_finite() && *x >= 0.0)) => {
                Err(Error::config(
                    "model.diffusion",
                    "diffusion entries must be finite and >= 0",
                ))
            }
            DiffusionField::QuadraticLinear { d0, .. } if !(d0.is_finite() && *d0 >= 0.0) => {
                Err(Error::config("model.diffusion.d0", "d0 must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// Drift applied to walkers at `(p, t)`: `-v` backward, `+v` forward.
    #[inline]
    pub fn drift(&self, p: Vec2, t: f64) -> Vec2 {
        let v = self.velocity.eval(p, t);
        match self.direction {
            Direction::Backward => [-v[0], -v[1]],
            Direction::Forward => v,
        }
    }

    #[inline]
    pub fn diffusion_at(&self, p: Vec2, t: f64) -> Vec2 {
        self.diffusion.eval(p, t)
    }
}
