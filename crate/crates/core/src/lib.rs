//! Controllability analysis, subalgebra covers, control synthesis and exact
//! simulation for driftless bilinear systems and their parameterized ensembles
//! on SO(n), SE(n) and SU(2).

pub mod covering;
pub mod error;
pub mod function_closure;
pub mod larc;
pub mod lie_core;
pub mod par;
pub mod simulator;
pub mod spec;
pub mod synthesis;

pub use error::{Error, Result};
