//! Numerical toolkit for Engel-type sub-Lorentzian structures on 4-space:
//! exact polynomial frames, geodesic flow, barrier functions from Cauchy
//! problems and sampled reachable sets.

pub mod barriers;
pub mod error;
pub mod frames;
pub mod hamiltonian;
pub mod ode;
pub mod poly;
pub mod reachability;
pub mod report;

pub use error::{Error, Result};
pub use frames::{FrameStructure, Point};
pub use poly::Poly4;
