//! The explicit local pencil: f^I = phi(wp(z + 1/2)) on C / (2Z + 2 pi i Z) with
//! z = Q / eps + i eps t, and the staged perturbations f^II, f^III, f^IV by the
//! leafwise functions F+ + F-.
//!
//! Sphere-valued maps are carried as homogeneous pairs (num, den). Gauges are
//! measured in the affine chart u = num/den or u = den/num, whichever has
//! |u| <= 1 at the base point.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::holo_coords::{HoloCoords, NULL_CONE_TOL};
use crate::local_model::{cartesian_from_coords, x0_from_qh, ModelError, ModelGeometry, ModelPoint, Sheet, SingularCoords};
use crate::numerics::Cutoff;
use crate::sections::{g_frame, sigma_bar_minus, sigma_value};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Distance to a lattice point below which wp_eval refuses to answer.
pub const POLE_TOL: f64 = 1e-6;
/// Inside this radius around a pole, 1/wp comes from the Laurent series.
const LAURENT_RADIUS: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PencilError {
    #[error("z = {0} lies within 1e-6 of a lattice point")]
    Pole(Complex64),
    #[error("invalid stage parameters: {0}")]
    InvalidParams(String),
    #[error("alpha = {alpha} is not below the measured threshold {threshold}")]
    AlphaTooLarge { alpha: f64, threshold: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// lattice and wp

/// Rectangular lattice re_period Z + i im_period Z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub re_period: f64,
    pub im_period: f64,
}

impl Lattice {
    pub fn standard() -> Self {
        Lattice { re_period: 2.0, im_period: 2.0 * PI }
    }

    /// Representative with Re in [-L1/2, L1/2], Im in [-L2/2, L2/2]; the nearest lattice point is 0.
    pub fn reduce(&self, z: Complex64) -> Complex64 {
        let re = z.re - self.re_period * (z.re / self.re_period).round();
        let im = z.im - self.im_period * (z.im / self.im_period).round();
        Complex64::new(re, im)
    }

    fn rows(&self) -> i32 {
        // row n contributes ~ exp(-2 pi^2 (|n| - 1/2) L2 / (pi L1)); stop well below 1e-18
        let decay = 2.0 * PI * self.im_period / self.re_period;
        ((42.0 / decay) + 1.5).ceil() as i32
    }

    fn row_constant(&self) -> f64 {
        let k = PI / self.re_period;
        let mut c = k * k / 3.0;
        for n in 1..=self.rows() {
            let y = k * self.im_period * n as f64;
            let s = y.sinh();
            c -= 2.0 * k * k / (s * s);
        }
        c
    }
}

fn csc2_cot(u: Complex64) -> (Complex64, Complex64) {
    let s = u.sin();
    let c = u.cos();
    let csc2 = (s * s).inv();
    (csc2, c / s)
}

/// wp and wp' by rows: sum_m (z - m L1 - i n L2)^-2 = (pi/L1)^2 csc^2(pi (z - i n L2) / L1).
fn wp_rows(zr: Complex64, lat: &Lattice) -> (Complex64, Complex64) {
    let k = PI / lat.re_period;
    let mut w = ZERO;
    let mut dw = ZERO;
    for n in -lat.rows()..=lat.rows() {
        let u = (zr - I * lat.im_period * n as f64) * k;
        let (csc2, cot) = csc2_cot(u);
        w += csc2;
        dw += csc2 * cot;
    }
    (w * k * k - lat.row_constant(), dw * (-2.0 * k * k * k))
}

pub fn wp_eval(z: Complex64, lat: &Lattice) -> Result<Complex64, PencilError> {
    let zr = lat.reduce(z);
    if zr.norm() < POLE_TOL {
        return Err(PencilError::Pole(z));
    }
    Ok(wp_rows(zr, lat).0)
}

pub fn wp_prime(z: Complex64, lat: &Lattice) -> Result<Complex64, PencilError> {
    let zr = lat.reduce(z);
    if zr.norm() < POLE_TOL {
        return Err(PencilError::Pole(z));
    }
    Ok(wp_rows(zr, lat).1)
}

// ---------------------------------------------------------------------------
// Riemann sphere values

/// Point of CP^1 as a homogeneous pair; the value is num / den.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proj {
    pub num: Complex64,
    pub den: Complex64,
}

impl Proj {
    pub fn finite(w: Complex64) -> Self {
        Proj { num: w, den: Complex64::new(1.0, 0.0) }
    }

    pub fn is_infinite(&self) -> bool {
        self.den == ZERO
    }

    /// num/den, or None at infinity.
    pub fn value(&self) -> Option<Complex64> {
        if self.is_infinite() {
            None
        } else {
            Some(self.num / self.den)
        }
    }

    /// True when the chart at infinity (den/num) is the bounded one.
    pub fn prefers_inverse(&self) -> bool {
        self.num.norm() > self.den.norm()
    }

    pub fn chart(&self, inverse: bool) -> Complex64 {
        if inverse {
            self.den / self.num
        } else {
            self.num / self.den
        }
    }

    /// Chordal distance |f - g| / sqrt((1 + |f|^2)(1 + |g|^2)).
    pub fn chordal(&self, other: &Proj) -> f64 {
        let cross = self.num * other.den - other.num * self.den;
        let n1 = (self.num.norm_sqr() + self.den.norm_sqr()).sqrt();
        let n2 = (other.num.norm_sqr() + other.den.norm_sqr()).sqrt();
        cross.norm() / (n1 * n2)
    }

    /// f + w in homogeneous form.
    pub fn add(&self, w: Complex64) -> Proj {
        Proj { num: self.num + w * self.den, den: self.den }
    }

    fn abs_value(&self) -> f64 {
        if self.den == ZERO {
            f64::INFINITY
        } else {
            (self.num / self.den).norm()
        }
    }

    fn normalized(self) -> Proj {
        let s = self.num.norm().max(self.den.norm());
        Proj { num: self.num / s, den: self.den / s }
    }
}

// ---------------------------------------------------------------------------
// Weierstrass data and f^I

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassData {
    pub lattice: Lattice,
    /// wp(1)
    pub a: f64,
    /// wp(1/2)^2 - 2 wp(1/2) wp(1)
    pub b: f64,
    /// radius of the circle |w - a| = R fixed by w -> (a wbar + b)/(wbar - a)
    pub r: f64,
    /// wp at the half periods 1, i pi, 1 + i pi (the last two are real as well)
    pub e: [f64; 3],
    pub g2: f64,
    pub g3: f64,
}

impl WeierstrassData {
    pub fn new(lattice: Lattice) -> Result<Self, PencilError> {
        let w1 = lattice.re_period / 2.0;
        let w3 = Complex64::new(0.0, lattice.im_period / 2.0);
        let a = wp_eval(Complex64::new(w1, 0.0), &lattice)?.re;
        let half = wp_eval(Complex64::new(w1 / 2.0, 0.0), &lattice)?.re;
        let b = half * half - 2.0 * half * a;
        let r2 = a * a + b;
        if r2 <= 0.0 {
            return Err(PencilError::InvalidParams(format!("a^2 + b = {r2} <= 0")));
        }
        let e2 = wp_eval(w3, &lattice)?.re;
        let e3 = wp_eval(w3 + w1, &lattice)?.re;
        let e = [a, e2, e3];
        let g2 = -4.0 * (e[0] * e[1] + e[0] * e[2] + e[1] * e[2]);
        let g3 = 4.0 * e[0] * e[1] * e[2];
        Ok(WeierstrassData { lattice, a, b, r: r2.sqrt(), e, g2, g3 })
    }

    pub fn standard() -> Self {
        WeierstrassData::new(Lattice::standard()).expect("standard lattice")
    }

    /// Involution whose fixed circle is Theta.
    pub fn reflect(&self, w: Complex64) -> Complex64 {
        let wb = w.conj();
        (wb * self.a + self.b) / (wb - self.a)
    }

    /// phi(w) = (w - a - R)/(w - a + R) on a homogeneous pair (w1 : w0).
    pub fn phi(&self, w: Proj) -> Proj {
        Proj {
            num: w.num - w.den * (self.a + self.r),
            den: w.num - w.den * (self.a - self.r),
        }
    }

    /// wp(z) and wp'(z) as homogeneous pairs; near a pole (1 : 1/wp) from the Laurent series.
    fn wp_proj(&self, z: Complex64) -> (Proj, Proj) {
        let zr = self.lattice.reduce(z);
        if zr.norm() < LAURENT_RADIUS {
            let c2 = self.g2 / 20.0;
            let c3 = self.g3 / 28.0;
            let c4 = self.g2 * self.g2 / 1200.0;
            let z2 = zr * zr;
            let z4 = z2 * z2;
            // wp = z^-2 D, D = 1 + c2 z^4 + c3 z^6 + c4 z^8
            let d = Complex64::new(1.0, 0.0) + z4 * (c2 + z2 * (c3 + z2 * c4));
            let dd = zr * z2 * (4.0 * c2 + z2 * (6.0 * c3 + z2 * 8.0 * c4));
            let h = z2 / d;
            let dh = (2.0 * zr * d - z2 * dd) / (d * d);
            let one = Complex64::new(1.0, 0.0);
            (Proj { num: one, den: h }, Proj { num: ZERO, den: dh })
        } else {
            let (w, dw) = wp_rows(zr, &self.lattice);
            (Proj::finite(w), Proj { num: dw, den: ZERO })
        }
    }

    pub fn f_i(&self, z: Complex64) -> Proj {
        self.phi(self.wp_proj(z + 0.5).0).normalized()
    }

    /// (chart used, u, du/dz) for f^I; the chart is chosen at z unless forced.
    pub fn f_i_chart(&self, z: Complex64, inverse: Option<bool>) -> (bool, Complex64, Complex64) {
        let (w, dw) = self.wp_proj(z + 0.5);
        let f = self.phi(w);
        // phi is linear on pairs, so it acts on derivatives the same way
        let df = Proj {
            num: dw.num - dw.den * (self.a + self.r),
            den: dw.num - dw.den * (self.a - self.r),
        };
        let inv = inverse.unwrap_or_else(|| f.prefers_inverse());
        let (n, d, dn, ddn) = if inv {
            (f.den, f.num, df.den, df.num)
        } else {
            (f.num, f.den, df.num, df.den)
        };
        (inv, n / d, (dn * d - n * ddn) / (d * d))
    }

    /// Critical points of f^I by Newton on the chart derivative, seeded on an n x n grid of a
    /// fundamental domain; reduced and deduplicated.
    pub fn critical_points(&self, n: usize) -> Vec<BranchPoint> {
        let (l1, l2) = (self.lattice.re_period, self.lattice.im_period);
        let mut found: Vec<BranchPoint> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let seed = Complex64::new(
                    -l1 / 2.0 + (i as f64 + 0.37) * l1 / n as f64,
                    -l2 / 2.0 + (j as f64 + 0.61) * l2 / n as f64,
                );
                for cap in [1.0, 1e8] {
                    let Some(z) = self.newton_critical(seed, cap) else { continue };
                    let z = self.lattice.reduce(z);
                    if found.iter().any(|b| self.lattice.reduce(b.z - z).norm() < 1e-6) {
                        continue;
                    }
                    let (_, _, du) = self.f_i_chart(z, None);
                    let re_half = (z.re.abs() - 0.5).abs();
                    found.push(BranchPoint { z, value: self.f_i(z), derivative_residual: du.norm(), re_half_residual: re_half });
                }
            }
        }
        found.sort_by(|a, b| (a.z.re, a.z.im).partial_cmp(&(b.z.re, b.z.im)).unwrap());
        found
    }

    /// Newton in the chart u = f while |f| <= cap, u = 1/f beyond. Along Im z = pi the chart
    /// |u| <= 1 is nearly flat and the affine one nearly singular, so both are tried.
    fn newton_critical(&self, seed: Complex64, cap: f64) -> Option<Complex64> {
        let eta = 1e-5;
        let mut z = seed;
        for _ in 0..80 {
            let inv = self.f_i(z).abs_value() > cap;
            let (_, _, du) = self.f_i_chart(z, Some(inv));
            let d2 = (self.f_i_chart(z + eta, Some(inv)).2 - self.f_i_chart(z - eta, Some(inv)).2) / (2.0 * eta);
            if d2.norm() == 0.0 {
                return None;
            }
            let mut step = du / d2;
            if step.norm() > 0.25 {
                step *= 0.25 / step.norm();
            }
            z -= step;
            if step.norm() < 1e-14 {
                break;
            }
        }
        let (_, _, du) = self.f_i_chart(z, None);
        (du.norm() < 1e-10).then_some(z)
    }

    /// f^I along the imaginary axis: realness defect, Cayley-angle monotonicity and speed.
    pub fn axis_scan(&self, n: usize) -> AxisScan {
        let period = self.lattice.im_period;
        let mut max_re = 0.0f64;
        let mut min_speed = f64::INFINITY;
        let mut incs = Vec::with_capacity(n);
        let mut prev: Option<f64> = None;
        for k in 0..=n {
            let z = Complex64::new(0.0, -period / 2.0 + period * k as f64 / n as f64);
            let f = self.f_i(z);
            let (_, u, du) = self.f_i_chart(z, None);
            max_re = max_re.max(u.re.abs());
            min_speed = min_speed.min(du.norm());
            // Cayley transform (f - 1)/(f + 1) takes iR + infinity to the unit circle
            let c = (f.num - f.den) / (f.num + f.den);
            let ang = c.arg();
            if let Some(p) = prev {
                let mut d = ang - p;
                while d > PI {
                    d -= 2.0 * PI;
                }
                while d < -PI {
                    d += 2.0 * PI;
                }
                incs.push(d);
            }
            prev = Some(ang);
        }
        let monotone = incs.iter().all(|&d| d > 0.0) || incs.iter().all(|&d| d < 0.0);
        let winding = incs.iter().sum::<f64>() / (2.0 * PI);
        AxisScan { samples: n + 1, max_re_residual: max_re, monotone, winding, min_speed }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub z: Complex64,
    pub value: Proj,
    pub derivative_residual: f64,
    /// ||Re z| - 1/2|
    pub re_half_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisScan {
    pub samples: usize,
    pub max_re_residual: f64,
    pub monotone: bool,
    /// turns of the Cayley angle over one period
    pub winding: f64,
    pub min_speed: f64,
}

// ---------------------------------------------------------------------------
// stage parameters and staged maps

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    pub epsilon: f64,
    pub alpha: f64,
    /// tube radius in the z-plane
    pub delta: f64,
    /// chi: 1 on |x| <= 5, 0 on |x| >= 10
    pub chi: Cutoff,
    /// rho: 0 on |x| <= 1, 1 on |x| >= 2 (stored as the decreasing 1 - rho)
    pub one_minus_rho: Cutoff,
    /// global cutoff plateau |x| <= c / eps
    pub c_global: f64,
}

impl StageParams {
    pub fn new(epsilon: f64, alpha: f64, delta: f64) -> Result<Self, PencilError> {
        let sp = StageParams {
            epsilon,
            alpha,
            delta,
            chi: Cutoff::new(5.0, 10.0),
            one_minus_rho: Cutoff::new(1.0, 2.0),
            c_global: 0.5,
        };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<(), PencilError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.125) {
            return Err(PencilError::InvalidParams(format!("epsilon = {} outside (0, 1/8)", self.epsilon)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(PencilError::InvalidParams(format!("alpha = {}", self.alpha)));
        }
        // branch points sit at Re z in Z + 1/2, so |Re z_r| > 2 delta and disjoint tubes need delta < 1/4
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return Err(PencilError::InvalidParams(format!("delta = {} outside (0, 1/4)", self.delta)));
        }
        Ok(())
    }

    pub fn beta(&self) -> Cutoff {
        Cutoff::new(0.5 * self.delta, self.delta)
    }

    pub fn z_of(&self, x: &ModelPoint) -> Complex64 {
        Complex64::new(x.q() / self.epsilon, self.epsilon * x.t)
    }

    /// Nearest branch point: Re in Z + 1/2, Im in pi Z.
    pub fn nearest_branch(z: Complex64) -> Complex64 {
        Complex64::new(z.re.floor() + 0.5, PI * (z.im / PI).round())
    }
}

#[derive(Clone, Debug)]
pub struct Pencil {
    pub wd: WeierstrassData,
    pub sp: StageParams,
    pub geom: ModelGeometry,
    pub holo: &'static HoloCoords,
}

/// F+ extended by zero off its domain (Q > 0 with x0 <= 0).
fn f_plus_ext(holo: &HoloCoords, q: f64, x0: f64, theta: f64) -> Result<Complex64, ModelError> {
    if q > -NULL_CONE_TOL && x0 <= 0.0 {
        return Ok(ZERO);
    }
    holo.f_plus_raw(q, x0, theta)
}

/// F+ + F- at (Q, x0, theta).
pub fn f_pair(holo: &HoloCoords, q: f64, x0: f64, theta: f64) -> Result<Complex64, ModelError> {
    Ok(f_plus_ext(holo, q, x0, theta)? + f_plus_ext(holo, q, -x0, -theta)?)
}

impl Pencil {
    pub fn new(sp: StageParams) -> Result<Self, PencilError> {
        sp.validate()?;
        Ok(Pencil {
            wd: WeierstrassData::standard(),
            sp,
            geom: ModelGeometry::new(sp.epsilon)?,
            holo: HoloCoords::shared(),
        })
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, PencilError> {
        let mut sp = self.sp;
        sp.alpha = alpha;
        Pencil::new(sp)
    }

    pub fn f_i_at(&self, x: &ModelPoint) -> Proj {
        self.wd.f_i(self.sp.z_of(x))
    }

    /// beta_r at x for the nearest branch point.
    pub fn beta_at(&self, x: &ModelPoint) -> f64 {
        let z = self.sp.z_of(x);
        self.sp.beta().value((z - StageParams::nearest_branch(z)).norm())
    }

    fn pair_at(&self, x: &ModelPoint) -> Result<Complex64, PencilError> {
        Ok(f_pair(self.holo, x.q(), x.x0, x.theta())?)
    }

    /// (F+ + F-) composed with tau_z: same (H, theta) on the quadric of the nearest branch point.
    pub fn pair_frozen(&self, x: &ModelPoint) -> Result<Complex64, PencilError> {
        let z = self.sp.z_of(x);
        let qr = self.sp.epsilon * StageParams::nearest_branch(z).re;
        let sheet = if x.x0 < 0.0 { Sheet::Minus } else { Sheet::Plus };
        let x0r = x0_from_qh(qr, x.h(), sheet)?;
        Ok(f_pair(self.holo, qr, x0r, x.theta())?)
    }

    fn tilde_pair(&self, x: &ModelPoint) -> Result<Complex64, PencilError> {
        let (e, d) = (self.sp.epsilon, self.sp.delta);
        Ok(self.holo.f_tilde_plus_at(x, e, d)? + self.holo.f_tilde_minus_at(x, e, d)?)
    }

    fn stage_ii_term(&self, x: &ModelPoint) -> Result<Complex64, PencilError> {
        let b = self.beta_at(x);
        if b == 0.0 {
            return Ok(ZERO);
        }
        Ok(self.pair_at(x)? * b)
    }

    pub fn f_ii(&self, x: &ModelPoint) -> Result<Proj, PencilError> {
        Ok(self.f_i_at(x).add(self.stage_ii_term(x)? * self.sp.alpha))
    }

    fn outer_term(&self, x: &ModelPoint, chi: f64) -> Result<Complex64, PencilError> {
        if chi == 1.0 {
            return Ok(ZERO);
        }
        Ok(self.tilde_pair(x)? * (1.0 - chi))
    }

    pub fn f_iii(&self, x: &ModelPoint) -> Result<Proj, PencilError> {
        let chi = self.sp.chi.value(x.norm3());
        let mut s = self.outer_term(x, chi)?;
        if chi > 0.0 {
            s += self.stage_ii_term(x)? * chi;
        }
        Ok(self.f_i_at(x).add(s * self.sp.alpha))
    }

    pub fn f_iv(&self, x: &ModelPoint) -> Result<Proj, PencilError> {
        let n = x.norm3();
        let chi = self.sp.chi.value(n);
        let mut s = self.outer_term(x, chi)?;
        let b = self.beta_at(x);
        if chi > 0.0 && b > 0.0 {
            let w = self.sp.one_minus_rho.value(n);
            let mut pair = if w < 1.0 { self.pair_at(x)? * (1.0 - w) } else { ZERO };
            if w > 0.0 {
                pair += self.pair_frozen(x)? * w;
            }
            s += pair * (chi * b);
        }
        Ok(self.f_i_at(x).add(s * self.sp.alpha))
    }

    pub fn stage(&self, k: Stage) -> impl Fn(&ModelPoint) -> Result<Proj, PencilError> + Sync + '_ {
        move |x| match k {
            Stage::I => Ok(self.f_i_at(x)),
            Stage::II => self.f_ii(x),
            Stage::III => self.f_iii(x),
            Stage::IV => self.f_iv(x),
        }
    }

    /// Point with the given z and leaf coordinates (x0, theta); None if x0 is off the quadric.
    pub fn leaf_point(&self, z: Complex64, x0: f64, theta: f64) -> Option<ModelPoint> {
        let q = self.sp.epsilon * z.re;
        let r2 = 2.0 * (x0 * x0 - q);
        if r2 < 0.0 {
            return None;
        }
        let r = r2.sqrt();
        Some(ModelPoint::new(x0, r * theta.cos(), r * theta.sin(), z.im / self.sp.epsilon))
    }

    /// Random points inside tubes |z - z_r| < delta with r_lo <= |x| <= r_hi.
    pub fn tube_samples(&self, n: usize, r_lo: f64, r_hi: f64, seed: u64) -> Vec<ModelPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = self.sp.epsilon;
        let (qlo, qhi) = (-0.5 * r_hi * r_hi, r_hi * r_hi);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let zr = Complex64::new((rng.gen_range(qlo..qhi) / eps).floor() + 0.5, PI * rng.gen_range(-3..=3) as f64);
            let rad = self.sp.delta * rng.gen::<f64>().sqrt();
            let z = zr + Complex64::from_polar(rad, rng.gen_range(0.0..2.0 * PI));
            let x0 = rng.gen_range(-r_hi..r_hi);
            let Some(x) = self.leaf_point(z, x0, rng.gen_range(-PI..PI)) else { continue };
            let m = x.norm3();
            if m >= r_lo && m <= r_hi && x.r() > 1e-3 {
                out.push(x);
            }
        }
        out
    }

    /// Random points with r_lo <= |x| <= r_hi, t in [0, 2 pi / eps).
    pub fn shell_samples(&self, n: usize, r_lo: f64, r_hi: f64, seed: u64) -> Vec<ModelPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let m = rng.gen_range(r_lo..=r_hi);
                let c = rng.gen_range(-1.0f64..1.0);
                let s = (1.0 - c * c).sqrt();
                let ph = rng.gen_range(0.0..2.0 * PI);
                let t = rng.gen_range(0.0..2.0 * PI / self.sp.epsilon);
                ModelPoint::new(m * c, m * s * ph.cos(), m * s * ph.sin(), t)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    I,
    II,
    III,
    IV,
}

// ---------------------------------------------------------------------------
// gauges

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeSample {
    pub x: [f64; 4],
    pub z: Complex64,
    pub d: f64,
    pub dbar: f64,
    /// smallest singular value of the derivative of (d f) in the frame, when computed
    pub sigma_min: Option<f64>,
    pub inverse_chart: bool,
}

fn shift(x: &ModelPoint, v: &[f64; 4], h: f64) -> ModelPoint {
    ModelPoint::new(x.x0 + h * v[0], x.x1 + h * v[1], x.x2 + h * v[2], x.t + h * v[3])
}

/// (d f, dbar f) components along the complex lines (e1, e2) and (e3, e4), in a fixed chart.
pub fn d_dbar<F>(f: &F, geom: &ModelGeometry, x: &ModelPoint, inverse: bool, h: f64) -> Result<([Complex64; 2], [Complex64; 2]), PencilError>
where
    F: Fn(&ModelPoint) -> Result<Proj, PencilError>,
{
    let frame = g_frame(geom.psi_at(x), x);
    let mut dd = [ZERO; 4];
    for k in 0..4 {
        let up = f(&shift(x, &frame[k], h))?.chart(inverse);
        let dn = f(&shift(x, &frame[k], -h))?.chart(inverse);
        dd[k] = (up - dn) / (2.0 * h);
    }
    let d = [0.5 * (dd[0] - I * dd[1]), 0.5 * (dd[2] - I * dd[3])];
    let db = [0.5 * (dd[0] + I * dd[1]), 0.5 * (dd[2] + I * dd[3])];
    Ok((d, db))
}

fn cnorm(v: &[Complex64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

const H_INNER: f64 = 5e-4;
const H_OUTER: f64 = 5e-3;

/// Gauges at x; `chart` forces u = f (false) or u = 1/f (true), otherwise |u| <= 1 decides.
pub fn gauge_at<F>(f: &F, geom: &ModelGeometry, x: &ModelPoint, eps: f64, chart: Option<bool>) -> Result<GaugeSample, PencilError>
where
    F: Fn(&ModelPoint) -> Result<Proj, PencilError>,
{
    let inv = match chart {
        Some(c) => c,
        None => f(x)?.prefers_inverse(),
    };
    let (d, db) = d_dbar(f, geom, x, inv, H_INNER)?;
    Ok(GaugeSample {
        x: x.to_vec(),
        z: Complex64::new(x.q() / eps, eps * x.t),
        d: cnorm(&d),
        dbar: cnorm(&db),
        sigma_min: None,
        inverse_chart: inv,
    })
}

/// Smallest singular value of the real 4x4 derivative of x -> (d f)(x) along the frame.
pub fn sigma_min_at<F>(f: &F, geom: &ModelGeometry, x: &ModelPoint, inverse: bool) -> Result<f64, PencilError>
where
    F: Fn(&ModelPoint) -> Result<Proj, PencilError>,
{
    let frame = g_frame(geom.psi_at(x), x);
    let mut m = Matrix4::<f64>::zeros();
    for k in 0..4 {
        let (dp, _) = d_dbar(f, geom, &shift(x, &frame[k], H_OUTER), inverse, H_INNER)?;
        let (dm, _) = d_dbar(f, geom, &shift(x, &frame[k], -H_OUTER), inverse, H_INNER)?;
        for c in 0..2 {
            let g = (dp[c] - dm[c]) / (2.0 * H_OUTER);
            m[(2 * c, k)] = g.re;
            m[(2 * c + 1, k)] = g.im;
        }
    }
    Ok(m.svd(false, false).singular_values.min())
}

/// Product grid in (Re z over one period, Im z over one period) x leaf (x0, theta),
/// repeated on several Q-bands across r_in < |x| < r_out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub r_in: f64,
    pub r_out: f64,
    pub bands: usize,
    pub n_re: usize,
    pub n_im: usize,
    pub n_s: usize,
    pub n_theta: usize,
    /// 0.5 puts grid lines through the branch points; 0.0 is the staggered grid
    pub shift: f64,
    /// points closer than this to the x0-axis are skipped (the frame degenerates there)
    pub r_min: f64,
}

impl ScanGrid {
    pub fn annulus(r_in: f64, r_out: f64) -> Self {
        ScanGrid { r_in, r_out, bands: 5, n_re: 16, n_im: 8, n_s: 12, n_theta: 8, shift: 0.5, r_min: 0.05 }
    }

    pub fn staggered(&self) -> Self {
        ScanGrid { shift: 0.5 - self.shift, ..*self }
    }

    pub fn points(&self, eps: f64) -> Vec<ModelPoint> {
        let (qlo, qhi) = (-0.5 * self.r_out * self.r_out, self.r_out * self.r_out);
        let mut out = Vec::new();
        for b in 0..self.bands {
            let qc = qlo + (b as f64 + 0.5) * (qhi - qlo) / self.bands as f64;
            let k = (qc / (2.0 * eps)).round();
            for j in 0..self.n_re {
                let u = -1.0 + (j as f64 + 0.5 + self.shift) * 2.0 / self.n_re as f64;
                let q = eps * (2.0 * k + u);
                let lo2 = ((self.r_in * self.r_in + 2.0 * q) / 3.0).max(q + 0.5 * self.r_min * self.r_min).max(0.0);
                let hi2 = (self.r_out * self.r_out + 2.0 * q) / 3.0;
                if hi2 <= lo2 {
                    continue;
                }
                let (lo, hi) = (lo2.sqrt(), hi2.sqrt());
                let x0s: Vec<f64> = if lo == 0.0 {
                    (0..self.n_s).map(|i| -hi + (i as f64 + 0.5) * 2.0 * hi / self.n_s as f64).collect()
                } else {
                    let half = self.n_s.div_ceil(2);
                    (0..half)
                        .flat_map(|i| {
                            let v = lo + (i as f64 + 0.5) * (hi - lo) / half as f64;
                            [v, -v]
                        })
                        .collect()
                };
                for l in 0..self.n_im {
                    let v = -PI + (l as f64 + 0.5 + self.shift) * 2.0 * PI / self.n_im as f64;
                    let t = v / eps;
                    for &x0 in &x0s {
                        let r = (2.0 * (x0 * x0 - q)).max(0.0).sqrt();
                        for m in 0..self.n_theta {
                            let th = (m as f64 + 0.5 + self.shift) * 2.0 * PI / self.n_theta as f64;
                            let x = ModelPoint::new(x0, r * th.cos(), r * th.sin(), t);
                            let n3 = x.norm3();
                            if n3 > self.r_in && n3 < self.r_out && x.r() >= self.r_min {
                                out.push(x);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H3Failure {
    pub x: [f64; 4],
    pub d: f64,
    pub dbar: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub epsilon: f64,
    pub points: usize,
    pub verify_points: usize,
    pub kappa1: f64,
    pub kappa1_at: [f64; 4],
    pub kappa1_z: Complex64,
    /// kappa1 restricted to the rows Im z ~ 0 and Im z ~ pi (mod 2 pi)
    pub kappa1_rows: [f64; 2],
    pub kappa2: f64,
    pub kappa3: f64,
    pub max_dbar: f64,
    pub max_dbar_at: [f64; 4],
    pub sigma_evaluations: usize,
    pub failures: Vec<H3Failure>,
    pub failure_count: usize,
}

impl TransversalityReport {
    pub fn passed(&self) -> bool {
        self.kappa1 > 0.0 && self.failure_count == 0
    }
}

/// 0 for Im z within pi/2 of 2 pi Z, 1 otherwise.
pub fn branch_row(z: Complex64) -> usize {
    let y = z.im - 2.0 * PI * (z.im / (2.0 * PI)).round();
    usize::from(y.abs() >= 0.5 * PI)
}

fn h3_bound(s: &GaugeSample, eps: f64, k2: f64, k3: f64) -> f64 {
    (eps * k2).max(s.d - k3)
}

/// kappa1 = min over the grid of max(|d f|, sigma_min(nabla d f)); kappa3 = kappa1 / 2; kappa2 the
/// smallest value (times 1.25) making |dbar f| <= max(eps kappa2, |d f| - kappa3) hold on the grid.
/// The inequality is then checked with these constants on the staggered grid as well.
pub fn transversality_scan<F>(f: &F, geom: &ModelGeometry, grid: &ScanGrid) -> Result<TransversalityReport, PencilError>
where
    F: Fn(&ModelPoint) -> Result<Proj, PencilError> + Sync,
{
    let eps = geom.epsilon();
    let gauges = |g: &ScanGrid| -> Result<Vec<GaugeSample>, PencilError> {
        g.points(eps).par_iter().map(|x| gauge_at(f, geom, x, eps, None)).collect()
    };
    let mut samples = gauges(grid)?;
    samples.sort_by(|a, b| a.d.partial_cmp(&b.d).unwrap());
    // the min of max(d, sigma) only needs sigma where d is below the running minimum;
    // run separately on the rows Im z ~ 0 and Im z ~ pi
    let mut rows = [f64::INFINITY; 2];
    let mut row_idx = [0usize; 2];
    let mut n_sigma = 0;
    for row in 0..2 {
        for i in 0..samples.len() {
            if branch_row(samples[i].z) != row {
                continue;
            }
            if samples[i].d >= rows[row] {
                break;
            }
            let x = ModelPoint::from_vec(&samples[i].x);
            let s = sigma_min_at(f, geom, &x, samples[i].inverse_chart)?;
            n_sigma += 1;
            samples[i].sigma_min = Some(s);
            let g = samples[i].d.max(s);
            if g < rows[row] {
                rows[row] = g;
                row_idx[row] = i;
            }
        }
    }
    let k1_idx = if rows[0] <= rows[1] { row_idx[0] } else { row_idx[1] };
    let kappa1 = rows[0].min(rows[1]);
    let kappa3 = 0.5 * kappa1;
    let need = samples
        .iter()
        .filter(|s| s.dbar > s.d - kappa3)
        .map(|s| s.dbar / eps)
        .fold(0.0f64, f64::max);
    let kappa2 = 1.25 * need;

    let verify = gauges(&grid.staggered())?;
    let mut failures: Vec<H3Failure> = samples
        .iter()
        .chain(verify.iter())
        .filter_map(|s| {
            let bound = h3_bound(s, eps, kappa2, kappa3);
            (s.dbar > bound).then_some(H3Failure { x: s.x, d: s.d, dbar: s.dbar, bound })
        })
        .collect();
    let failure_count = failures.len();
    failures.truncate(20);
    let worst = samples
        .iter()
        .chain(verify.iter())
        .max_by(|a, b| a.dbar.partial_cmp(&b.dbar).unwrap())
        .copied()
        .unwrap_or(GaugeSample { x: [0.0; 4], z: ZERO, d: 0.0, dbar: 0.0, sigma_min: None, inverse_chart: false });
    let k1s = samples.get(k1_idx).copied();
    Ok(TransversalityReport {
        epsilon: eps,
        points: samples.len(),
        verify_points: verify.len(),
        kappa1: if kappa1.is_finite() { kappa1 } else { 0.0 },
        kappa1_at: k1s.map(|s| s.x).unwrap_or([0.0; 4]),
        kappa1_z: k1s.map(|s| s.z).unwrap_or(ZERO),
        kappa1_rows: rows.map(|r| if r.is_finite() { r } else { 0.0 }),
        kappa2,
        kappa3,
        max_dbar: worst.dbar,
        max_dbar_at: worst.x,
        sigma_evaluations: n_sigma,
        failures,
        failure_count,
    })
}

/// Gauges of f over a point list, for CSV export.
pub fn gauge_field<F>(f: &F, geom: &ModelGeometry, points: &[ModelPoint]) -> Result<Vec<GaugeSample>, PencilError>
where
    F: Fn(&ModelPoint) -> Result<Proj, PencilError> + Sync,
{
    let eps = geom.epsilon();
    points.par_iter().map(|x| gauge_at(f, geom, x, eps, None)).collect()
}

// ---------------------------------------------------------------------------
// Lefschetz check inside |x| <= 1

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeGrid {
    pub r_max: f64,
    pub n_rad: usize,
    pub n_ang: usize,
    pub n_s: usize,
    pub n_theta: usize,
    pub r_min: f64,
}

impl Default for TubeGrid {
    fn default() -> Self {
        TubeGrid { r_max: 1.0, n_rad: 3, n_ang: 8, n_s: 6, n_theta: 4, r_min: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafCritical {
    pub z_r: Complex64,
    pub q_r: f64,
    pub x0: f64,
    pub theta: f64,
    /// |det| of the complex Hessian of f^IV in the frame (e1, e3)
    pub hessian_det: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LefschetzReport {
    pub alpha: f64,
    pub epsilon: f64,
    /// min |(f^I)'| over the annuli delta/2 <= |z - z_r| <= delta
    pub big_k1: f64,
    /// max |beta'|
    pub k1: f64,
    /// max |F+,r + F-,r| over the grid
    pub k2: f64,
    pub threshold: f64,
    pub tubes: usize,
    pub points: usize,
    /// min over annulus points of |d f| - |dbar f|
    pub min_margin: f64,
    pub max_ratio: f64,
    pub failures: Vec<[f64; 4]>,
    pub critical: Vec<LeafCritical>,
    pub min_hessian_det: f64,
}

impl LefschetzReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.min_margin > 0.0 && (self.critical.is_empty() || self.min_hessian_det > 0.0)
    }
}

/// Branch points z_r whose quadric Q = eps Re z_r meets |x| <= r_max.
pub fn inner_branch_points(eps: f64, r_max: f64) -> Vec<Complex64> {
    let (qlo, qhi) = (-0.5 * r_max * r_max, r_max * r_max);
    let n_lo = (qlo / eps - 0.5).ceil() as i64;
    let n_hi = (qhi / eps - 0.5).floor() as i64;
    (n_lo..=n_hi)
        .flat_map(|n| [0.0, PI].map(|im| Complex64::new(n as f64 + 0.5, im)))
        .collect()
}

/// Newton on (H, theta) for d_theta g = 0, g = F+ + F- on the quadric Q; holomorphy makes this
/// the full critical-point condition.
pub fn leaf_critical_point(holo: &HoloCoords, q: f64, seed: (f64, f64)) -> Option<(f64, f64)> {
    let g = |h: f64, th: f64| -> Option<Complex64> {
        let sheet = if h < 0.0 { Sheet::Minus } else { Sheet::Plus };
        let x0 = x0_from_qh(q, h, sheet).ok()?;
        f_pair(holo, q, x0, th).ok()
    };
    let e = 1e-5;
    let gt = |h: f64, th: f64| -> Option<Complex64> { Some((g(h, th + e)? - g(h, th - e)?) / (2.0 * e)) };
    let (mut h, mut th) = seed;
    for _ in 0..60 {
        let v = gt(h, th)?;
        let a = (gt(h + e, th)? - gt(h - e, th)?) / (2.0 * e);
        let b = (gt(h, th + e)? - gt(h, th - e)?) / (2.0 * e);
        let det = a.re * b.im - a.im * b.re;
        if det == 0.0 {
            return None;
        }
        let dh = (v.re * b.im - v.im * b.re) / det;
        let dth = (a.re * v.im - a.im * v.re) / det;
        h -= dh;
        th -= dth;
        if dh.abs() + dth.abs() < 1e-13 {
            break;
        }
    }
    let v = gt(h, th)?;
    let x0 = x0_from_qh(q, h, if h < 0.0 { Sheet::Minus } else { Sheet::Plus }).ok()?;
    (v.norm() < 1e-8).then_some((x0, crate::sections::wrap_angle(th)))
}

impl Pencil {
    /// Annulus points delta/2 < |z - z_r| <= delta in every inner tube, on leaves with |x| <= r_max.
    pub fn tube_annulus_points(&self, grid: &TubeGrid) -> Vec<(Complex64, ModelPoint)> {
        let eps = self.sp.epsilon;
        let delta = self.sp.delta;
        let mut out = Vec::new();
        for zr in inner_branch_points(eps, grid.r_max) {
            for i in 0..grid.n_rad {
                let rad = delta * (0.5 + 0.5 * (i as f64 + 1.0) / grid.n_rad as f64);
                for j in 0..grid.n_ang {
                    let z = zr + Complex64::from_polar(rad, (j as f64 + 0.5) * 2.0 * PI / grid.n_ang as f64);
                    let q = eps * z.re;
                    let hi2 = (grid.r_max * grid.r_max + 2.0 * q) / 3.0;
                    let lo2 = (q + 0.5 * grid.r_min * grid.r_min).max(0.0);
                    if hi2 <= lo2 {
                        continue;
                    }
                    let hi = hi2.sqrt();
                    let lo = lo2.sqrt();
                    for k in 0..grid.n_s {
                        let s = (k as f64 + 0.5) / grid.n_s as f64;
                        let x0 = if lo == 0.0 { -hi + 2.0 * hi * s } else if k % 2 == 0 { lo + (hi - lo) * s } else { -(lo + (hi - lo) * s) };
                        for m in 0..grid.n_theta {
                            let th = (m as f64 + 0.25) * 2.0 * PI / grid.n_theta as f64;
                            if let Some(x) = self.leaf_point(z, x0, th) {
                                if x.norm3() <= grid.r_max && x.r() >= grid.r_min {
                                    out.push((zr, x));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// |d f^IV| > |dbar f^IV| on the tube annuli inside |x| <= 1, the product-structure threshold
    /// alpha < K1 / (2 k1 k2), and nondegenerate critical points inside the discs.
    pub fn lefschetz_check_inner(&self, grid: &TubeGrid) -> Result<LefschetzReport, PencilError> {
        let eps = self.sp.epsilon;
        let pts = self.tube_annulus_points(grid);
        let f = self.stage(Stage::IV);
        let beta = self.sp.beta();
        let k1 = (0..=400)
            .map(|i| beta.deriv(beta.inner + (beta.outer - beta.inner) * i as f64 / 400.0).abs())
            .fold(0.0, f64::max);
        struct Row {
            x: ModelPoint,
            fi_speed: f64,
            g: f64,
            d: f64,
            dbar: f64,
        }
        let rows: Vec<Row> = pts
            .par_iter()
            .map(|(_, x)| {
                let z = self.sp.z_of(x);
                let (_, _, du) = self.wd.f_i_chart(z, Some(false));
                let g = self.pair_frozen(x)?.norm();
                let s = gauge_at(&f, &self.geom, x, eps, Some(false))?;
                Ok(Row { x: *x, fi_speed: du.norm(), g, d: s.d, dbar: s.dbar })
            })
            .collect::<Result<_, PencilError>>()?;
        let big_k1 = rows.iter().map(|r| r.fi_speed).fold(f64::INFINITY, f64::min);
        let k2 = rows.iter().map(|r| r.g).fold(0.0, f64::max);
        let threshold = big_k1 / (2.0 * k1 * k2);
        if self.sp.alpha >= threshold {
            return Err(PencilError::AlphaTooLarge { alpha: self.sp.alpha, threshold });
        }
        let min_margin = rows.iter().map(|r| r.d - r.dbar).fold(f64::INFINITY, f64::min);
        let max_ratio = rows.iter().map(|r| r.dbar / r.d).fold(0.0, f64::max);
        let failures: Vec<[f64; 4]> = rows.iter().filter(|r| r.dbar >= r.d).map(|r| r.x.to_vec()).collect();

        let mut critical = Vec::new();
        if self.sp.alpha > 0.0 {
            for zr in inner_branch_points(eps, grid.r_max) {
                let q = eps * zr.re;
                if q >= 0.0 {
                    // on Q > 0 each sheet carries one of F+-, a coordinate without critical points
                    continue;
                }
                // H scales like |Q|^(3/2) on the leaf
                let hs = 0.2 * (-q).powf(1.5);
                for seed in [(hs, 0.2), (-hs, PI - 0.25)] {
                    let Some((x0, th)) = leaf_critical_point(self.holo, q, seed) else { continue };
                    let Some(x) = self.leaf_point(zr, x0, th) else { continue };
                    if x.norm3() > grid.r_max {
                        continue;
                    }
                    let det = self.hessian_det(&x)?;
                    critical.push(LeafCritical { z_r: zr, q_r: q, x0, theta: th, hessian_det: det });
                }
            }
        }
        let min_hessian_det = critical.iter().map(|c| c.hessian_det).fold(f64::INFINITY, f64::min);
        Ok(LefschetzReport {
            alpha: self.sp.alpha,
            epsilon: eps,
            big_k1,
            k1,
            k2,
            threshold,
            tubes: inner_branch_points(eps, grid.r_max).len(),
            points: rows.len(),
            min_margin,
            max_ratio,
            failures,
            critical,
            min_hessian_det: if min_hessian_det.is_finite() { min_hessian_det } else { 0.0 },
        })
    }

    /// |H_11 H_33 - H_13^2| for second derivatives of f^IV (affine chart) along the coordinate
    /// curves of e1 = psi dQ and e3 = p r dH. Straight Cartesian steps would move Q at second
    /// order, which z = Q / eps amplifies.
    pub fn hessian_det(&self, x: &ModelPoint) -> Result<f64, PencilError> {
        let f = self.stage(Stage::IV);
        let (q, hh, th, t) = (x.q(), x.h(), x.theta(), x.t);
        let sheet = if x.x0 < 0.0 { Sheet::Minus } else { Sheet::Plus };
        let (s1, s3) = (self.geom.psi_at(x), x.p() * x.r());
        let h = 1e-3;
        let u = |a: f64, b: f64| -> Result<Complex64, PencilError> {
            let c = SingularCoords::new(q + s1 * a, hh + s3 * b, th, t).with_sheet(sheet);
            Ok(f(&cartesian_from_coords(&c)?)?.chart(false))
        };
        let c = u(0.0, 0.0)?;
        let h11 = (u(h, 0.0)? - 2.0 * c + u(-h, 0.0)?) / (h * h);
        let h33 = (u(0.0, h)? - 2.0 * c + u(0.0, -h)?) / (h * h);
        let h13 = (u(h, h)? - u(h, -h)? - u(-h, h)? + u(-h, -h)?) / (4.0 * h * h);
        Ok((h11 * h33 - h13 * h13).norm())
    }
}

// ---------------------------------------------------------------------------
// overlaps, odd case, global cutoff

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub samples: usize,
    /// f^II against f^I where every beta_r vanishes
    pub outside_tubes: f64,
    /// f^III against f^II on |x| <= 5
    pub chi_plateau: f64,
    /// f^IV against f^III on |x| >= 2
    pub outer_band: f64,
    /// f^IV against f^III on 1 <= |x| <= 2 (chordal), and that over eps
    pub inner_band: f64,
    pub inner_band_over_eps: f64,
}

impl Pencil {
    pub fn overlap_residuals(&self, n: usize, seed: u64) -> Result<OverlapReport, PencilError> {
        let mut outside: f64 = 0.0;
        let mut plateau: f64 = 0.0;
        let mut outer: f64 = 0.0;
        let mut inner: f64 = 0.0;
        let shell = self.shell_samples(n, 0.6, 9.5, seed);
        for x in &shell {
            if self.beta_at(x) == 0.0 {
                outside = outside.max(self.f_ii(x)?.chordal(&self.f_i_at(x)));
            }
        }
        let mut tubes = self.tube_samples(n, 0.6, 9.5, seed + 1);
        tubes.extend(shell);
        for x in &tubes {
            let m = x.norm3();
            let f3 = self.f_iii(x)?;
            if m <= 5.0 {
                plateau = plateau.max(f3.chordal(&self.f_ii(x)?));
            }
            if m >= 2.0 {
                outer = outer.max(self.f_iv(x)?.chordal(&f3));
            }
        }
        for x in &self.tube_samples(n, 1.0, 2.0, seed + 2) {
            inner = inner.max(self.f_iv(x)?.chordal(&self.f_iii(x)?));
        }
        Ok(OverlapReport {
            samples: tubes.len(),
            outside_tubes: outside,
            chi_plateau: plateau,
            outer_band: outer,
            inner_band: inner,
            inner_band_over_eps: inner / self.sp.epsilon,
        })
    }

    /// max chordal |f^IV(sigma-bar_- x) - f^IV(x)| over the points.
    pub fn odd_residual(&self, points: &[ModelPoint]) -> Result<f64, PencilError> {
        let mut worst: f64 = 0.0;
        for x in points {
            let y = sigma_bar_minus(x, self.sp.epsilon);
            worst = worst.max(self.f_iv(&y)?.chordal(&self.f_iv(x)?));
        }
        Ok(worst)
    }

    /// Size of what the global cutoff phi (1 on |x| <= c/eps, 0 beyond 2c/eps) introduces:
    /// sup over c/eps <= |x| <= 2c/eps of |sigma| (1 + |d phi|) + |d sigma|, with |theta_i| <= 1.
    pub fn cutoff_tail(&self, n: usize, seed: u64) -> CutoffTail {
        let eps = self.sp.epsilon;
        let r0 = self.sp.c_global / eps;
        let phi = Cutoff::new(r0, 2.0 * r0);
        let pts = self.shell_samples(n, r0, 2.0 * r0, seed);
        let h = 1e-3;
        let mut worst: f64 = 0.0;
        for x in &pts {
            let frame = g_frame(self.geom.psi_at(x), x);
            let mut dphi2 = 0.0;
            let mut dsig2 = 0.0;
            for e in &frame {
                let (a, b) = (shift(x, e, h), shift(x, e, -h));
                let dp = (phi.value(a.norm3()) - phi.value(b.norm3())) / (2.0 * h);
                let ds = (sigma_value(a.p()) - sigma_value(b.p())) / (2.0 * h);
                dphi2 += dp * dp;
                dsig2 += ds * ds;
            }
            let s = sigma_value(x.p());
            worst = worst.max(s * (1.0 + dphi2.sqrt()) + dsig2.sqrt());
        }
        CutoffTail { epsilon: eps, plateau_radius: r0, samples: pts.len(), max_term: worst, over_eps: worst / eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffTail {
    pub epsilon: f64,
    pub plateau_radius: f64,
    pub samples: usize,
    pub max_term: f64,
    pub over_eps: f64,
}
