//! Combinatorial data of a singular Lefschetz fibration over S² with the
//! critical circle Γ along the equator, read at the level of H₁.
//!
//! Σ₊ (genus g₊) sits over the northern disc, Σ₋ (genus g₊ + m) over the
//! southern one. H₁(Σ₋) is H₁(Σ₊) with the m handle pairs (γᵢ, γᵢ*) appended,
//! γᵢ being the core of the handle that Γᵢ attaches.

use serde::{Deserialize, Serialize};

use crate::regions::{euler_char_fibration, Region, RegionDecomposition};
use crate::symplectic::{a_class, dehn_twist_matrix, Class, SymplecticMatrix};
use crate::MonodromyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

/// One factor of a disc monodromy, in the order of the product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    /// Isolated Lefschetz point with this vanishing cycle.
    Twist(Class),
    /// Critical circle bounding a small disc of lower genus inside the
    /// region, with trivial braid and the given relative framing. Its
    /// outer monodromy is T_γ^framing.
    Circle { gamma: Class, framing: i64 },
}

impl Factor {
    pub fn class(&self) -> &Class {
        match self {
            Factor::Twist(c) | Factor::Circle { gamma: c, .. } => c,
        }
    }

    pub fn matrix(&self, genus: usize) -> Result<SymplecticMatrix, MonodromyError> {
        match self {
            Factor::Twist(c) => dehn_twist_matrix(c, genus),
            Factor::Circle { gamma, framing } => dehn_twist_matrix(gamma, genus)?.pow(*framing),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gluing {
    /// Element of π₁Diff(Σ₊, A), as a label.
    pub plus: String,
    pub minus: String,
}

impl Default for Gluing {
    fn default() -> Self {
        Self { plus: "trivial".into(), minus: "trivial".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FibrationCombinatorics {
    pub g_plus: usize,
    /// Number of components of Γ on the equator.
    pub m: usize,
    /// Base points.
    pub n: usize,
    pub cycles_plus: Vec<Factor>,
    pub cycles_minus: Vec<Factor>,
    /// Colour pairing of the 2m strand points of L.
    pub pairing: Vec<(usize, usize)>,
    /// Whether L is the trivial braid. Only trivial braids are supported.
    pub braid_trivial: bool,
    pub framing: Vec<i64>,
    pub gluing: Gluing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub pass: bool,
    /// lift(ψ₊, framing)·ψ₋, which must be the identity.
    pub residual: SymplecticMatrix,
}

fn trivial_pairing(m: usize) -> Vec<(usize, usize)> {
    (0..m).map(|i| (2 * i, 2 * i + 1)).collect()
}

impl FibrationCombinatorics {
    /// No isolated singular fibres, zero framing, trivial braid and gluings.
    pub fn product(g_plus: usize, m: usize) -> Self {
        Self {
            g_plus,
            m,
            n: 0,
            cycles_plus: vec![],
            cycles_minus: vec![],
            pairing: trivial_pairing(m),
            braid_trivial: true,
            framing: vec![0; m],
            gluing: Gluing::default(),
        }
    }

    pub fn g_minus(&self) -> usize {
        self.g_plus + self.m
    }

    pub fn genus(&self, side: Side) -> usize {
        match side {
            Side::Plus => self.g_plus,
            Side::Minus => self.g_minus(),
        }
    }

    pub fn chi_sigma(&self, side: Side) -> i64 {
        2 - 2 * self.genus(side) as i64
    }

    pub fn factors(&self, side: Side) -> &[Factor] {
        match side {
            Side::Plus => &self.cycles_plus,
            Side::Minus => &self.cycles_minus,
        }
    }

    fn factors_mut(&mut self, side: Side) -> &mut Vec<Factor> {
        match side {
            Side::Plus => &mut self.cycles_plus,
            Side::Minus => &mut self.cycles_minus,
        }
    }

    /// Class of the handle core γᵢ in H₁(Σ₋).
    pub fn gamma(&self, i: usize) -> Class {
        a_class(self.g_plus + i, self.g_minus())
    }

    pub fn isolated_count(&self) -> usize {
        [Side::Plus, Side::Minus]
            .iter()
            .map(|&s| self.factors(s).iter().filter(|f| matches!(f, Factor::Twist(_))).count())
            .sum()
    }

    pub fn circle_count(&self) -> usize {
        self.cycles_plus.len() + self.cycles_minus.len() - self.isolated_count()
    }

    /// Components of the critical locus: m on the equator plus inner circles.
    pub fn components(&self) -> usize {
        self.m + self.circle_count()
    }

    pub fn validate(&self) -> Result<(), MonodromyError> {
        if !self.braid_trivial {
            return Err(MonodromyError::NonTrivialBraid);
        }
        if self.framing.len() != self.m {
            return Err(MonodromyError::Dimension { expected: self.m, got: self.framing.len() });
        }
        if self.pairing.len() != self.m {
            return Err(MonodromyError::InvalidData(format!("{} colour pairs for m = {}", self.pairing.len(), self.m)));
        }
        let mut seen = vec![false; 2 * self.m];
        for &(p, q) in &self.pairing {
            for s in [p, q] {
                if s >= 2 * self.m || seen[s] {
                    return Err(MonodromyError::InvalidData(format!("strand {s} paired twice or out of range")));
                }
                seen[s] = true;
            }
        }
        for side in [Side::Plus, Side::Minus] {
            let g = self.genus(side);
            for f in self.factors(side) {
                if f.class().len() != 2 * g {
                    return Err(MonodromyError::Dimension { expected: 2 * g, got: f.class().len() });
                }
                if matches!(f, Factor::Circle { .. }) && g == 0 {
                    return Err(MonodromyError::InvalidData("critical circle in a genus-0 region".into()));
                }
            }
        }
        Ok(())
    }

    /// Ordered product of the factor monodromies of one disc.
    pub fn psi(&self, side: Side) -> Result<SymplecticMatrix, MonodromyError> {
        let g = self.genus(side);
        self.factors(side).iter().try_fold(SymplecticMatrix::identity(g), |acc, f| acc.mul(&f.matrix(g)?))
    }

    pub fn region_decomposition(&self) -> RegionDecomposition {
        let mut regions = Vec::new();
        for side in [Side::Plus, Side::Minus] {
            let fs = self.factors(side);
            let holes = fs.iter().filter(|f| matches!(f, Factor::Circle { .. })).count() as i64;
            let isolated = fs.len() - holes as usize;
            regions.push(Region { chi: 1 - holes, fibre_chi: self.chi_sigma(side), isolated });
            for _ in 0..holes {
                regions.push(Region { chi: 1, fibre_chi: self.chi_sigma(side) + 2, isolated: 0 });
            }
        }
        // collar of the equator, a bundle over S¹
        regions.push(Region { chi: 0, fibre_chi: self.chi_sigma(Side::Minus), isolated: 0 });
        RegionDecomposition { regions }
    }

    pub fn euler_characteristic(&self) -> Result<i64, MonodromyError> {
        self.validate()?;
        euler_char_fibration(&self.region_decomposition(), self.isolated_count(), self.n)
    }
}

/// (ψ₊ ⊕ Id)·Π T_{γᵢ}^{kᵢ} on H₁(Σ₋), for a trivial braid.
pub fn lift_monodromy(psi_plus: &SymplecticMatrix, framing: &[i64], m: usize) -> Result<SymplecticMatrix, MonodromyError> {
    if framing.len() != m {
        return Err(MonodromyError::Dimension { expected: m, got: framing.len() });
    }
    let g = psi_plus.genus();
    let gm = g + m;
    let mut out = psi_plus.extend(m);
    for (i, &k) in framing.iter().enumerate() {
        if k != 0 {
            out = out.mul(&dehn_twist_matrix(&a_class(g + i, gm), gm)?.pow(k)?)?;
        }
    }
    Ok(out)
}

/// The boundary twist δ_A is invisible on closed-surface homology, so the
/// necessary condition is lift(ψ₊, framing)·ψ₋ = Id.
pub fn consistency_check(fc: &FibrationCombinatorics) -> Result<ConsistencyReport, MonodromyError> {
    fc.validate()?;
    let lift = lift_monodromy(&fc.psi(Side::Plus)?, &fc.framing, fc.m)?;
    let residual = lift.mul(&fc.psi(Side::Minus)?)?;
    Ok(ConsistencyReport { pass: residual.is_identity(), residual })
}

/// Isotropic blow-up near Γ_component: an extra Lefschetz point in the
/// southern disc with vanishing cycle γ, and framing lowered by one.
pub fn blowup_isotropic(fc: &FibrationCombinatorics, component: usize) -> Result<FibrationCombinatorics, MonodromyError> {
    fc.validate()?;
    if component >= fc.m {
        return Err(MonodromyError::InvalidData(format!("no component {component} (m = {})", fc.m)));
    }
    let mut out = fc.clone();
    // prepended so that T_γ meets the T_γ⁻¹ at the end of the lift
    out.cycles_minus.insert(0, Factor::Twist(fc.gamma(component)));
    out.framing[component] -= 1;
    Ok(out)
}

/// Replace the first isolated Lefschetz point with vanishing cycle at_cycle
/// by a critical circle with framing +1 around a disc of genus one less.
pub fn insert_critical_circle(fc: &FibrationCombinatorics, at_cycle: &[i64]) -> Result<FibrationCombinatorics, MonodromyError> {
    fc.validate()?;
    for side in [Side::Minus, Side::Plus] {
        let pos = fc.factors(side).iter().position(|f| matches!(f, Factor::Twist(c) if c.as_slice() == at_cycle));
        if let Some(i) = pos {
            if fc.genus(side) == 0 {
                return Err(MonodromyError::InvalidData("cannot lower genus below 0".into()));
            }
            let mut out = fc.clone();
            out.factors_mut(side)[i] = Factor::Circle { gamma: at_cycle.to_vec(), framing: 1 };
            return Ok(out);
        }
    }
    Err(MonodromyError::NoSuchCriticalPoint)
}
