//! Numerical geometry of delta-state manifolds in kernel Hilbert and Krein
//! spaces, Schrödinger dynamics as geodesic motion, wave-packet shadows and
//! diffusion models of collapse.

pub mod action;
pub mod born;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod metric;
pub mod packet;
pub mod potential;
pub mod spin;
pub mod stencil;

pub use error::{Error, Result};
pub use grid::{GridSpec, KernelKind, KernelSpec, StateFunction};
pub use potential::Potential;
