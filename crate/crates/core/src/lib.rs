//! Pseudomode (mesoscopic-lead) representations of fermionic baths.

pub mod bathmodel;
pub mod error;
pub mod forward;
pub mod inversion;
pub mod linalg;
pub mod manymode;
pub mod neldermead;
pub mod ode;
pub mod pronyfit;
pub mod quadrature;
pub mod registry;
pub mod repro;
pub mod scattering;
pub mod serial;
pub mod spline;
pub mod tolerance;

pub use error::{Error, Result};
pub use tolerance::Tolerances;
