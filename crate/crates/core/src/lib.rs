//! Numerical local models for near-symplectic 4-manifolds and singular
//! Lefschetz pencils.

pub mod forms4d;
pub mod local_model;
pub mod numerics;
pub mod holo_coords;
pub mod sections;
pub mod estimates;
pub mod pencil;
