//! Pseudo-spectral simulation of the one-phase Muskat problem in conformal
//! (Riemann-mapping) coordinates on the 2π-periodic torus.

pub mod diagnostics;
pub mod integrator;
pub mod model;
pub mod oracle;
pub mod snapshot;
pub mod spectral;
