//! Integer symplectic matrices acting on H₁ of a closed surface.
//!
//! Classes are written in a symplectic basis (a₁, b₁, a₂, b₂, …) with
//! ⟨aᵢ, bᵢ⟩ = 1, so J₀ is block diagonal with blocks [[0, 1], [-1, 0]].

use serde::{Deserialize, Serialize};

use crate::MonodromyError;

/// Integer homology class in the symplectic basis.
pub type Class = Vec<i64>;

/// ⟨x, y⟩ = Σ xₐyᵦ − xᵦyₐ over the hyperbolic pairs.
pub fn pairing(x: &[i64], y: &[i64]) -> i64 {
    debug_assert_eq!(x.len(), y.len());
    x.chunks(2).zip(y.chunks(2)).map(|(a, b)| a[0] * b[1] - a[1] * b[0]).sum()
}

/// Unit class a_i (0-based handle index) in genus g.
pub fn a_class(i: usize, g: usize) -> Class {
    let mut v = vec![0; 2 * g];
    v[2 * i] = 1;
    v
}

pub fn b_class(i: usize, g: usize) -> Class {
    let mut v = vec![0; 2 * g];
    v[2 * i + 1] = 1;
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymplecticMatrix {
    genus: usize,
    /// Row-major 2g × 2g entries.
    entries: Vec<i64>,
}

impl SymplecticMatrix {
    /// Checks MᵀJ₀M = J₀ before accepting the entries.
    pub fn new(genus: usize, entries: Vec<i64>) -> Result<Self, MonodromyError> {
        let n = 2 * genus;
        if entries.len() != n * n {
            return Err(MonodromyError::Dimension { expected: n * n, got: entries.len() });
        }
        let m = Self { genus, entries };
        if !m.is_symplectic() {
            return Err(MonodromyError::NotSymplectic);
        }
        Ok(m)
    }

    pub fn identity(genus: usize) -> Self {
        let n = 2 * genus;
        let mut entries = vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        Self { genus, entries }
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn dim(&self) -> usize {
        2 * self.genus
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.dim() + j]
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.dim().max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.genus)
    }

    /// Exact test of MᵀJ₀M = J₀, i.e. ⟨Mx, My⟩ = ⟨x, y⟩ on basis vectors.
    pub fn is_symplectic(&self) -> bool {
        let n = self.dim();
        let cols: Vec<Vec<i128>> =
            (0..n).map(|j| (0..n).map(|i| self.get(i, j) as i128).collect()).collect();
        for j in 0..n {
            for k in 0..n {
                let got: i128 = cols[j]
                    .chunks(2)
                    .zip(cols[k].chunks(2))
                    .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
                    .sum();
                let want = match (j % 2, k % 2) {
                    (0, 1) if j / 2 == k / 2 => 1,
                    (1, 0) if j / 2 == k / 2 => -1,
                    _ => 0,
                };
                if got != want {
                    return false;
                }
            }
        }
        true
    }

    pub fn apply(&self, x: &[i64]) -> Result<Class, MonodromyError> {
        let n = self.dim();
        if x.len() != n {
            return Err(MonodromyError::Dimension { expected: n, got: x.len() });
        }
        (0..n)
            .map(|i| {
                let mut s = 0i64;
                for (j, &xj) in x.iter().enumerate() {
                    s = self.get(i, j).checked_mul(xj).and_then(|t| s.checked_add(t)).ok_or(MonodromyError::Overflow)?;
                }
                Ok(s)
            })
            .collect()
    }

    /// Matrix product self · other (other acts first).
    pub fn mul(&self, other: &Self) -> Result<Self, MonodromyError> {
        let n = self.dim();
        if other.dim() != n {
            return Err(MonodromyError::Dimension { expected: n, got: other.dim() });
        }
        let mut entries = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0i64;
                for k in 0..n {
                    s = self
                        .get(i, k)
                        .checked_mul(other.get(k, j))
                        .and_then(|t| s.checked_add(t))
                        .ok_or(MonodromyError::Overflow)?;
                }
                entries[i * n + j] = s;
            }
        }
        Ok(Self { genus: self.genus, entries })
    }

    /// M⁻¹ = −J₀MᵀJ₀. In the block basis that is (M⁻¹)ᵢⱼ = sᵢsⱼ M_{j̄ ī}
    /// where ī swaps a/b within a pair and sᵢ = +1 on a-slots, −1 on b-slots.
    pub fn inverse(&self) -> Self {
        let n = self.dim();
        let bar = |i: usize| i ^ 1;
        let sgn = |i: usize| if i % 2 == 0 { 1 } else { -1 };
        let mut entries = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = sgn(i) * sgn(j) * self.get(bar(j), bar(i));
            }
        }
        Self { genus: self.genus, entries }
    }

    /// Mᵏ for any integer k.
    pub fn pow(&self, k: i64) -> Result<Self, MonodromyError> {
        let mut base = if k < 0 { self.inverse() } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Self::identity(self.genus);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// M ⊕ Id on genus + extra handles, with the new pairs appended.
    pub fn extend(&self, extra: usize) -> Self {
        let n = self.dim();
        let mut out = Self::identity(self.genus + extra);
        let big = out.dim();
        for i in 0..n {
            for j in 0..n {
                out.entries[i * big + j] = self.get(i, j);
            }
        }
        out
    }

    /// Leading 2g × 2g block.
    pub fn restrict(&self, genus: usize) -> Self {
        let n = 2 * genus;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(self.get(i, j));
            }
        }
        Self { genus, entries }
    }
}

/// Transvection T_γ(x) = x + ⟨γ, x⟩γ, the action of a positive Dehn twist.
pub fn dehn_twist_matrix(gamma: &[i64], genus: usize) -> Result<SymplecticMatrix, MonodromyError> {
    let n = 2 * genus;
    if gamma.len() != n {
        return Err(MonodromyError::Dimension { expected: n, got: gamma.len() });
    }
    let mut m = SymplecticMatrix::identity(genus);
    for j in 0..n {
        let e = {
            let mut e = vec![0; n];
            e[j] = 1;
            e
        };
        let c = pairing(gamma, &e);
        for i in 0..n {
            let t = c.checked_mul(gamma[i]).ok_or(MonodromyError::Overflow)?;
            m.entries[i * n + j] = m.entries[i * n + j].checked_add(t).ok_or(MonodromyError::Overflow)?;
        }
    }
    Ok(m)
}

/// Ordered product T_{γ₁}·T_{γ₂}·…·T_{γₖ}.
pub fn twist_product(cycles: &[Class], genus: usize) -> Result<SymplecticMatrix, MonodromyError> {
    cycles.iter().try_fold(SymplecticMatrix::identity(genus), |acc, c| acc.mul(&dehn_twist_matrix(c, genus)?))
}
