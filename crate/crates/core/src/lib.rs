//! Stochastic estimation of Green's functions for linear advection–diffusion–reaction
//! problems from random-walker swarms.
//!
//! Walkers are integrated with Euler–Maruyama steps, tallied on an
//! interrogation grid and turned into density estimates `W / (N dA)`.
//! Absorbed walkers can be replaced by splitting heavier ones so the swarm
//! never thins out, and estimates can be area-averaged against an exact
//! reference.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod analytic;
pub mod config;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod io;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod respawn;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
