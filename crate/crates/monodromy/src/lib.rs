//! Homology-level monodromy calculus for singular Lefschetz fibrations.
//!
//! Everything is exact integer arithmetic in Sp(2g, ℤ). Equality of
//! matrices is a necessary condition for equality in the mapping class
//! group, never a sufficient one.

pub mod examples;
pub mod fibration;
pub mod regions;
pub mod symplectic;

pub use fibration::{
    blowup_isotropic, consistency_check, insert_critical_circle, lift_monodromy, ConsistencyReport, Factor,
    FibrationCombinatorics, Gluing, Side,
};
pub use regions::{euler_char_fibration, Region, RegionDecomposition};
pub use symplectic::{a_class, b_class, dehn_twist_matrix, pairing, twist_product, Class, SymplecticMatrix};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MonodromyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not symplectic")]
    NotSymplectic,
    #[error("non-trivial braids are not supported")]
    NonTrivialBraid,
    #[error("inconsistent decomposition: {0}")]
    Inconsistent(String),
    #[error("no isolated critical point with that vanishing cycle")]
    NoSuchCriticalPoint,
    #[error("integer overflow")]
    Overflow,
    #[error("invalid data: {0}")]
    InvalidData(String),
}
