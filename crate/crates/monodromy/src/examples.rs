//! The named genus 0/1 fibrations with one critical circle.

use crate::fibration::{FibrationCombinatorics, Gluing};

pub const SPHERE_TRIVIAL: &str = "trivial";
/// Generator of π₁Diff(S²) = ℤ/2.
pub const SPHERE_ROTATION: &str = "rotation";
pub const TORUS_TRIVIAL: &str = "trivial";
/// Unit translation of T² transverse to the vanishing cycle.
pub const TORUS_TRANSVERSE_UNIT: &str = "transverse-unit";

/// Genus 0 over the north, genus 1 over the south, no isolated singular fibres.
pub fn genus_zero_one(sphere_twisted: bool, torus_twisted: bool) -> FibrationCombinatorics {
    let mut fc = FibrationCombinatorics::product(0, 1);
    fc.gluing = Gluing {
        plus: if sphere_twisted { SPHERE_ROTATION } else { SPHERE_TRIVIAL }.into(),
        minus: if torus_twisted { TORUS_TRANSVERSE_UNIT } else { TORUS_TRIVIAL }.into(),
    };
    fc
}

pub fn all_genus_zero_one() -> Vec<FibrationCombinatorics> {
    [(false, false), (true, false), (false, true), (true, true)]
        .into_iter()
        .map(|(s, t)| genus_zero_one(s, t))
        .collect()
}

/// Diffeomorphism type of the total space, where it is known.
pub fn total_space_label(fc: &FibrationCombinatorics) -> Option<&'static str> {
    let base = FibrationCombinatorics { gluing: Gluing::default(), ..fc.clone() };
    if base != FibrationCombinatorics::product(0, 1) {
        return None;
    }
    match (fc.gluing.plus.as_str(), fc.gluing.minus.as_str()) {
        (SPHERE_TRIVIAL, TORUS_TRIVIAL) => Some("(S¹×S³)#(S²×S²)"),
        (SPHERE_ROTATION, TORUS_TRIVIAL) => Some("(S¹×S³)#ℂP²#ℂP̄²"),
        (SPHERE_TRIVIAL, TORUS_TRANSVERSE_UNIT) => Some("S⁴"),
        _ => None,
    }
}
