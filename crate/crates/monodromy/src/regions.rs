//! Euler characteristic of a fibred 4-manifold from a decomposition of the base.

use serde::{Deserialize, Serialize};

use crate::MonodromyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    /// χ of the open base region: 1 for a disc, 0 for an annulus, 1 − h for a disc with h holes.
    pub chi: i64,
    /// χ of the generic fibre over it.
    pub fibre_chi: i64,
    /// Isolated Lefschetz points over the region.
    pub isolated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionDecomposition {
    pub regions: Vec<Region>,
}

impl RegionDecomposition {
    pub fn base_chi(&self) -> i64 {
        self.regions.iter().map(|r| r.chi).sum()
    }

    /// Split region i into two pieces with the given base χ, putting all isolated points in the first.
    pub fn split(&self, i: usize, chi_a: i64) -> Self {
        let r = self.regions[i];
        let mut regions = self.regions.clone();
        regions[i] = Region { chi: chi_a, ..r };
        regions.insert(i + 1, Region { chi: r.chi - chi_a, isolated: 0, ..r });
        Self { regions }
    }
}

/// χ(X) = Σ χ(Rᵢ)·χ(Fᵢ) + b − n. Circles of critical values contribute
/// χ(S¹)·χ(fibre) = 0; each Lefschetz point adds one; blowing down the n
/// exceptional sections removes n.
pub fn euler_char_fibration(rd: &RegionDecomposition, b: usize, n: usize) -> Result<i64, MonodromyError> {
    if rd.base_chi() != 2 {
        return Err(MonodromyError::Inconsistent(format!("region χ sums to {}, not χ(S²) = 2", rd.base_chi())));
    }
    if let Some(r) = rd.regions.iter().find(|r| r.chi > 1) {
        return Err(MonodromyError::Inconsistent(format!("planar region with χ = {}", r.chi)));
    }
    let listed: usize = rd.regions.iter().map(|r| r.isolated).sum();
    if listed != b {
        return Err(MonodromyError::Inconsistent(format!("{listed} isolated points in regions, b = {b}")));
    }
    let s: i64 = rd.regions.iter().map(|r| r.chi * r.fibre_chi).sum();
    Ok(s + b as i64 - n as i64)
}
