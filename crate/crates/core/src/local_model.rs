//! The standard local model near the zero circle: the form Omega, singular
//! coordinates (Q, H, theta, t), the psi profile, and the psi-scaled
//! almost-complex structure and metric.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms4d::{MetricTensor, TwoForm, Vec4};
use crate::numerics::{rk4_integrate, smoothstep, smoothstep_d1, smoothstep_d2, Cutoff};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("coordinates outside the image of the model: {0}")]
    Domain(String),
    #[error("epsilon = {0} is too large (need 0 < epsilon <= 1/4)")]
    EpsilonTooLarge(f64),
    #[error("point outside the modelled region: {0}")]
    Region(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
    pub t: f64,
}

impl ModelPoint {
    pub fn new(x0: f64, x1: f64, x2: f64, t: f64) -> Self {
        ModelPoint { x0, x1, x2, t }
    }

    pub fn from_vec(v: &Vec4) -> Self {
        ModelPoint::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vec(&self) -> Vec4 {
        [self.x0, self.x1, self.x2, self.t]
    }

    pub fn r2(&self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }

    pub fn r(&self) -> f64 {
        self.r2().sqrt()
    }

    pub fn p4(&self) -> f64 {
        4.0 * self.x0 * self.x0 + self.r2()
    }

    pub fn p(&self) -> f64 {
        self.p4().sqrt().sqrt()
    }

    /// Euclidean norm of the spatial part.
    pub fn norm3(&self) -> f64 {
        (self.x0 * self.x0 + self.r2()).sqrt()
    }

    pub fn q(&self) -> f64 {
        self.x0 * self.x0 - 0.5 * self.r2()
    }

    pub fn h(&self) -> f64 {
        self.x0 * self.r2()
    }

    pub fn theta(&self) -> f64 {
        if self.r2() == 0.0 {
            0.0
        } else {
            self.x2.atan2(self.x1)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sheet {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularCoords {
    pub q: f64,
    pub h: f64,
    pub theta: f64,
    pub t: f64,
    pub sheet: Sheet,
}

impl SingularCoords {
    pub fn new(q: f64, h: f64, theta: f64, t: f64) -> Self {
        let sheet = if h < 0.0 { Sheet::Minus } else { Sheet::Plus };
        SingularCoords { q, h, theta, t, sheet }
    }

    pub fn with_sheet(mut self, sheet: Sheet) -> Self {
        self.sheet = sheet;
        self
    }
}

/// Omega = dQ^dt + *(dQ^dt).
pub fn omega_model(x: &ModelPoint) -> TwoForm {
    let (x0, x1, x2) = (x.x0, x.x1, x.x2);
    TwoForm([-x2, x1, 2.0 * x0, 2.0 * x0, -x1, -x2])
}

pub fn coords_from_cartesian(x: &ModelPoint) -> SingularCoords {
    let sheet = if x.x0 < 0.0 { Sheet::Minus } else { Sheet::Plus };
    SingularCoords {
        q: x.q(),
        h: x.h(),
        theta: x.theta(),
        t: x.t,
        sheet,
    }
}

/// Real root of x^3 - q x - h/2 = 0 carrying the sign of h (h != 0).
fn cubic_root_signed(q: f64, h: f64) -> f64 {
    let c = 0.5 * h;
    // Cardano on the depressed cubic x^3 + px + r = 0 with p = -q, r = -c.
    let disc = c * c / 4.0 - q * q * q / 27.0;
    let mut x = if disc > 0.0 {
        let s = disc.sqrt();
        (0.5 * c + s).cbrt() + (0.5 * c - s).cbrt()
    } else {
        let m = 2.0 * (q / 3.0).sqrt();
        let arg = (3.0 * c / (q * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        if h > 0.0 {
            m * phi.cos()
        } else {
            m * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
        }
    };
    // Bracket for the signed root: |x| in [sqrt(max(q,0)), sqrt(max(q,0)) + |c|^(1/3)].
    let lo = q.max(0.0).sqrt();
    let hi = lo + c.abs().cbrt();
    let sgn = h.signum();
    let mut y = (x * sgn).clamp(lo, hi);
    let f = |y: f64| y * y * y - q * y - c.abs();
    for _ in 0..60 {
        let fy = f(y);
        let dfy = 3.0 * y * y - q;
        let step = if dfy > 0.0 { fy / dfy } else { 0.0 };
        let next = y - step;
        let next = if next.is_finite() && next >= lo && next <= hi && dfy > 0.0 {
            next
        } else {
            // bisection fallback
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(m) > 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            0.5 * (a + b)
        };
        if (next - y).abs() <= 1e-16 * y.abs().max(1e-300) {
            y = next;
            break;
        }
        y = next;
    }
    x = sgn * y;
    x
}

/// Recover x0 on the quadric from (Q, H, sheet).
pub fn x0_from_qh(q: f64, h: f64, sheet: Sheet) -> Result<f64, ModelError> {
    if !q.is_finite() || !h.is_finite() {
        return Err(ModelError::Domain(format!("non-finite (Q,H) = ({q},{h})")));
    }
    if h != 0.0 {
        return Ok(cubic_root_signed(q, h));
    }
    if q > 0.0 {
        let s = q.sqrt();
        Ok(if sheet == Sheet::Plus { s } else { -s })
    } else {
        Ok(0.0)
    }
}

pub fn cartesian_from_coords(c: &SingularCoords) -> Result<ModelPoint, ModelError> {
    let x0 = x0_from_qh(c.q, c.h, c.sheet)?;
    let r2 = if c.h == 0.0 {
        (2.0 * (x0 * x0 - c.q)).max(0.0)
    } else if x0 * x0 > c.q.abs() {
        c.h / x0
    } else {
        2.0 * (x0 * x0 - c.q)
    };
    if r2 < 0.0 {
        return Err(ModelError::Domain(format!("r^2 = {r2} < 0")));
    }
    let r = r2.sqrt();
    Ok(ModelPoint::new(x0, r * c.theta.cos(), r * c.theta.sin(), c.t))
}

/// Rows: dQ, dt, dH, dtheta in the Cartesian coframe (x0, x1, x2, t).
pub fn singular_jacobian(x: &ModelPoint) -> Matrix4<f64> {
    let (x0, x1, x2) = (x.x0, x.x1, x.x2);
    let r2 = x.r2();
    Matrix4::new(
        2.0 * x0, -x1, -x2, 0.0,
        0.0, 0.0, 0.0, 1.0,
        r2, 2.0 * x0 * x1, 2.0 * x0 * x2, 0.0,
        0.0, -x2 / r2, x1 / r2, 0.0,
    )
}

/// Columns: d/dQ, d/dt, d/dH, d/dtheta as Cartesian vectors.
pub fn singular_frame(x: &ModelPoint) -> Matrix4<f64> {
    singular_jacobian(x)
        .try_inverse()
        .expect("singular coordinates are regular off the axis")
}

// ---------------------------------------------------------------------------
// psi profile

/// Step function alpha_T: smoothstep up on [0,1], 1 on [1,T], down on [T,T+1].
fn alpha_t(u: f64, t: f64) -> f64 {
    if u <= 0.0 || u >= t + 1.0 {
        0.0
    } else if u < 1.0 {
        smoothstep(u)
    } else if u <= t {
        1.0
    } else {
        1.0 - smoothstep(u - t)
    }
}

fn alpha_t_d1(u: f64, t: f64) -> f64 {
    if u <= 0.0 || u >= t + 1.0 {
        0.0
    } else if u < 1.0 {
        smoothstep_d1(u)
    } else if u <= t {
        0.0
    } else {
        -smoothstep_d1(u - t)
    }
}

/// Closed-form log f for the smoothstep alpha_T (oracle for the RK4 table).
pub fn log_f_closed(u: f64, t: f64) -> f64 {
    use crate::numerics::smoothstep_integral as si;
    if u <= 0.0 {
        0.0
    } else if u < 1.0 {
        si(u)
    } else if u <= t {
        0.5 + (u - 1.0)
    } else if u < t + 1.0 {
        let v = u - t;
        0.5 + (t - 1.0) + (v - si(v))
    } else {
        t
    }
}

fn g_outer(t: f64) -> (f64, f64, f64) {
    let w = 0.15;
    let s = (t - 0.75) / w;
    let (a, a1, a2) = (smoothstep(s), smoothstep_d1(s) / w, smoothstep_d2(s) / (w * w));
    let d = t - 0.5;
    (0.5 + d * a, a + d * a1, 2.0 * a1 + d * a2)
}

pub const PSI_RK4_STEP: f64 = 1e-3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiProfile {
    pub epsilon: f64,
    /// Ramp length parameter T with L(T) = eps^(-3/2)/2.
    pub t_param: f64,
    pub l_target: f64,
    /// Horizontal compression of the ramp; 1 when T < eps^(-1/2)/4 already.
    pub scale: f64,
    pub p_lo: f64,
    pub p0: f64,
    pub p_hi: f64,
    pub step: f64,
    /// f on the RK4 grid u_k = k * step, k = 0..=n.
    pub table: Vec<f64>,
}

fn rk4_f_table(t: f64, h: f64) -> Vec<f64> {
    let n = ((t + 1.0) / h).ceil() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut y = [1.0];
    out.push(1.0);
    let rhs = |u: f64, y: &[f64; 1]| [alpha_t(u, t) * y[0]];
    for k in 0..n {
        y = crate::numerics::rk4_step(&rhs, k as f64 * h, &y, h);
        out.push(y[0]);
    }
    out
}

fn l_of_t(t: f64, h: f64) -> f64 {
    *rk4_f_table(t, h).last().unwrap()
}

pub fn psi_build(epsilon: f64) -> Result<PsiProfile, ModelError> {
    if !(epsilon > 0.0 && epsilon <= 0.25) {
        return Err(ModelError::EpsilonTooLarge(epsilon));
    }
    let l_target = 0.5 * epsilon.powf(-1.5);
    let h = PSI_RK4_STEP;
    let (mut lo, mut hi) = (1.0, 2.0 * l_target.ln() + 4.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if l_of_t(mid, h) < l_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    // lower end: the table then ends at or just below L and the splice at p0 steps up, never down
    let t_param = lo;
    let root = epsilon.powf(-0.5);
    let room = 0.9 * 0.25 * root;
    let scale = ((t_param + 1.0) / room).max(1.0);
    // grid spacing in u such that the last node sits at or beyond T+1
    let table = rk4_f_table(t_param, h);
    Ok(PsiProfile {
        epsilon,
        t_param,
        l_target,
        scale,
        p_lo: 0.5 * root,
        p0: 0.75 * root,
        p_hi: 0.9 * root,
        step: h,
        table,
    })
}

impl PsiProfile {
    /// (f, f', f'') at u from the RK4 table, cubic Hermite in f with f' = alpha f.
    pub fn f_eval(&self, u: f64) -> (f64, f64, f64) {
        let t = self.t_param;
        let last = *self.table.last().unwrap();
        if u <= 0.0 {
            return (1.0, 0.0, 0.0);
        }
        let n = self.table.len() - 1;
        if u >= n as f64 * self.step || u >= t + 1.0 {
            return (last, 0.0, 0.0);
        }
        let k = ((u / self.step).floor() as usize).min(n - 1);
        let (u0, u1) = (k as f64 * self.step, (k + 1) as f64 * self.step);
        let (f0, f1) = (self.table[k], self.table[k + 1]);
        let (d0, d1) = (alpha_t(u0, t) * f0, alpha_t(u1, t) * f1);
        let hh = self.step;
        let s = (u - u0) / hh;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let _ = u1;
        // cubic Hermite can dip below f0 where f starts like 1 + O(u^4); the table is increasing
        let f = (h00 * f0 + h10 * hh * d0 + h01 * f1 + h11 * hh * d1).clamp(f0, f1);
        let a = alpha_t(u, t);
        let a1 = alpha_t_d1(u, t);
        (f, a * f, (a1 + a * a) * f)
    }

    /// (psi, psi', psi'') at p.
    pub fn eval(&self, p: f64) -> (f64, f64, f64) {
        let eps = self.epsilon;
        if p <= self.p_lo {
            (eps, 0.0, 0.0)
        } else if p >= self.p_hi {
            (p, 1.0, 0.0)
        } else if p <= self.p0 {
            let s = self.scale;
            let (f, f1, f2) = self.f_eval(s * (p - self.p_lo));
            (eps * f, eps * s * f1, eps * s * s * f2)
        } else {
            let re = eps.sqrt();
            let (g, g1, g2) = g_outer(re * p);
            (g / re, g1, re * g2)
        }
    }

    pub fn psi(&self, p: f64) -> f64 {
        self.eval(p).0
    }

    /// Empirical constants of the profile inequalities on a dense grid over [1, eps^(-1/2)].
    pub fn constants(&self, n: usize) -> PsiConstants {
        let eps = self.epsilon;
        let top = eps.powf(-0.5);
        let mut c = PsiConstants::default();
        for i in 0..=n {
            let p = 1.0 + (top - 1.0) * i as f64 / n as f64;
            let (v, d1, d2) = self.eval(p);
            c.c0_linear = c.c0_linear.max(v / p);
            c.c0_quartic = c.c0_quartic.max(v / (eps * p.powi(4)));
            c.c1 = c.c1.max((d1 / v).abs() / (eps * p * p));
            c.c2 = c.c2.max((d2 / v).abs() / (eps * p.powi(4)));
            if i > 0 {
                let prev = self.psi(1.0 + (top - 1.0) * (i - 1) as f64 / n as f64);
                if v < prev {
                    c.monotone = false;
                }
            }
        }
        c
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PsiConstants {
    pub c0_linear: f64,
    pub c0_quartic: f64,
    pub c1: f64,
    pub c2: f64,
    pub monotone: bool,
}

impl Default for PsiConstants {
    fn default() -> Self {
        PsiConstants {
            c0_linear: 0.0,
            c0_quartic: 0.0,
            c1: 0.0,
            c2: 0.0,
            monotone: true,
        }
    }
}

// ---------------------------------------------------------------------------
// J and g

/// |x| >= 10: the region K; |x| >= 1: the region X0.
pub const K_RADIUS: f64 = 10.0;
pub const X0_RADIUS: f64 = 1.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelGeometry {
    pub psi: PsiProfile,
    /// k = eps^(-3).
    pub k: f64,
}

impl ModelGeometry {
    pub fn new(epsilon: f64) -> Result<Self, ModelError> {
        Ok(ModelGeometry {
            psi: psi_build(epsilon)?,
            k: epsilon.powi(-3),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.psi.epsilon
    }

    pub fn psi_at(&self, x: &ModelPoint) -> f64 {
        self.psi.psi(x.p())
    }

    pub fn in_k(&self, x: &ModelPoint) -> bool {
        x.norm3() >= K_RADIUS
    }

    pub fn in_x0(&self, x: &ModelPoint) -> bool {
        x.norm3() >= X0_RADIUS
    }
}

fn check_admissible(x: &ModelPoint) -> Result<(), ModelError> {
    if x.r2() == 0.0 {
        return Err(ModelError::Region("r = 0 (axis)".into()));
    }
    if x.p() < 1.0 {
        return Err(ModelError::Region(format!("p = {} < 1", x.p())));
    }
    Ok(())
}

/// J in the singular frame (Q, t, H, theta); columns are images of basis vectors.
pub fn acs_singular(psi: f64, p: f64, r: f64) -> Matrix4<f64> {
    let k = 1.0 / (p * p * r * r);
    let mut m = Matrix4::zeros();
    m[(1, 0)] = 1.0 / (psi * psi);
    m[(0, 1)] = -psi * psi;
    m[(3, 2)] = k;
    m[(2, 3)] = -1.0 / k;
    m
}

/// J acting on Cartesian vectors, same formula as acs_J but without the region checks.
pub fn acs_unchecked(psi: f64, x: &ModelPoint) -> Matrix4<f64> {
    let d = singular_jacobian(x);
    let b = d.try_inverse().expect("regular off the axis");
    b * acs_singular(psi, x.p(), x.r()) * d
}

#[allow(non_snake_case)]
pub fn acs_J(geom: &ModelGeometry, x: &ModelPoint) -> Result<Matrix4<f64>, ModelError> {
    check_admissible(x)?;
    Ok(acs_unchecked(geom.psi_at(x), x))
}

/// Standard structure J0 = -W/|W| of the self-dual form Omega.
pub fn j0_standard(x: &ModelPoint) -> Matrix4<f64> {
    let w = omega_model(x).to_matrix();
    let lam = (w.transpose() * w).trace().sqrt() / 2.0;
    -w / lam
}

pub fn metric_unchecked(psi: f64, x: &ModelPoint) -> Matrix4<f64> {
    let d = singular_jacobian(x);
    let (p, r) = (x.p(), x.r());
    let diag = Matrix4::from_diagonal(&Vector4::new(
        1.0 / (psi * psi),
        psi * psi,
        1.0 / (p * p * r * r),
        p * p * r * r,
    ));
    d.transpose() * diag * d
}

pub fn metric_g(geom: &ModelGeometry, x: &ModelPoint) -> Result<MetricTensor, ModelError> {
    check_admissible(x)?;
    MetricTensor::new(metric_unchecked(geom.psi_at(x), x))
        .map_err(|e| ModelError::Region(e.to_string()))
}

/// Compatibility metric Omega(u, Jv). With Omega normalised so that Omega^2 = p^4 vol the scale factor is 1.
pub fn compat_metric(geom: &ModelGeometry, x: &ModelPoint) -> Result<Matrix4<f64>, ModelError> {
    let j = acs_J(geom, x)?;
    let w = omega_model(x).to_matrix();
    Ok(w * j)
}

// ---------------------------------------------------------------------------
// converse-direction local forms

/// d( chi(|t|) x0 (x1 dx2 - x2 dx1) ).
pub fn step1_form(x: &ModelPoint, chi: &Cutoff) -> TwoForm {
    let at = x.t.abs();
    let c = chi.value(at);
    let cp = chi.deriv(at) * if x.t < 0.0 { -1.0 } else { 1.0 };
    let (x0, x1, x2) = (x.x0, x.x1, x.x2);
    TwoForm([-c * x2, c * x1, 0.0, 2.0 * c * x0, cp * x0 * x2, -cp * x0 * x1])
}

/// phi(z) = (lambda + |z|^2)^(1/2) z / |z|.
pub fn radial_embedding(z: &[Complex64; 2], lambda: f64) -> Result<[Complex64; 2], ModelError> {
    let rho = z[0].norm_sqr() + z[1].norm_sqr();
    if rho == 0.0 {
        return Err(ModelError::Domain("z = 0".into()));
    }
    if lambda < 0.0 {
        return Err(ModelError::Domain("lambda < 0".into()));
    }
    let s = ((lambda + rho) / rho).sqrt();
    Ok([z[0] * s, z[1] * s])
}

fn c2_to_r4(z: &[Complex64; 2]) -> Vec4 {
    [z[0].re, z[0].im, z[1].re, z[1].im]
}

fn r4_to_c2(v: &Vec4) -> [Complex64; 2] {
    [Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])]
}

/// omega_0 + lambda (omega_0 / |z|^2 - e ^ beta / |z|^4), in real coordinates (x1,y1,x2,y2),
/// where e = sum x dx + y dy and beta = sum x dy - y dx.
pub fn radial_target_form(z: &[Complex64; 2], lambda: f64) -> TwoForm {
    let v = c2_to_r4(z);
    let rho: f64 = v.iter().map(|c| c * c).sum();
    let w0 = TwoForm::basis(0, 1).add(&TwoForm::basis(2, 3));
    let e = v;
    let beta = [-v[1], v[0], -v[3], v[2]];
    let eb = TwoForm::wedge1(&e, &beta);
    w0.add(&w0.scale(1.0 / rho).sub(&eb.scale(1.0 / (rho * rho))).scale(lambda))
}

/// Finite-difference pullback of omega_0 under the radial embedding at z.
pub fn radial_pullback_fd(z: &[Complex64; 2], lambda: f64, h: f64) -> Result<TwoForm, ModelError> {
    let v = c2_to_r4(z);
    let mut jac = Matrix4::zeros();
    for c in 0..4 {
        let mut vp = v;
        let mut vm = v;
        vp[c] += h;
        vm[c] -= h;
        let fp = c2_to_r4(&radial_embedding(&r4_to_c2(&vp), lambda)?);
        let fm = c2_to_r4(&radial_embedding(&r4_to_c2(&vm), lambda)?);
        for r in 0..4 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    let w0 = TwoForm::basis(0, 1).add(&TwoForm::basis(2, 3)).to_matrix();
    Ok(TwoForm::from_matrix(&(jac.transpose() * w0 * jac)))
}

/// Parallel transport of the L2 connection -i(Q + eps/2) dt around one t-period at fixed Q.
pub fn l2_holonomy(epsilon: f64, q: f64, steps: usize) -> Complex64 {
    let c = q + 0.5 * epsilon;
    let period = 2.0 * std::f64::consts::PI / epsilon;
    let h = period / steps as f64;
    let y = rk4_integrate(|_, y: &[f64; 2]| [-c * y[1], c * y[0]], 0.0, [1.0, 0.0], period, h);
    Complex64::new(y[0], y[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_examples() {
        let c = coords_from_cartesian(&ModelPoint::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!((c.q, c.h, c.sheet), (1.0, 0.0, Sheet::Plus));
        let c = coords_from_cartesian(&ModelPoint::new(0.0, 1.0, 0.0, 0.0));
        assert_eq!((c.q, c.h, c.theta), (-0.5, 0.0, 0.0));
        let c = coords_from_cartesian(&ModelPoint::new(1.0, 1.0, 0.0, 0.0));
        assert_eq!((c.q, c.h, c.theta), (0.5, 1.0, 0.0));
    }

    #[test]
    fn inverse_examples() {
        let x = cartesian_from_coords(&SingularCoords::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(x, ModelPoint::new(1.0, 0.0, 0.0, 0.0));
        let x = cartesian_from_coords(&SingularCoords::new(1.0, 0.0, 0.0, 0.0).with_sheet(Sheet::Minus))
            .unwrap();
        assert_eq!(x.x0, -1.0);
        let x = cartesian_from_coords(&SingularCoords::new(-0.5, 0.0, 0.0, 0.0)).unwrap();
        assert!((x.x1 - 1.0).abs() < 1e-15 && x.x0 == 0.0);
        assert!(cartesian_from_coords(&SingularCoords::new(f64::NAN, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn omega_vanishes_on_axis() {
        assert_eq!(omega_model(&ModelPoint::new(0.0, 0.0, 0.0, 3.0)), TwoForm::zero());
    }

    #[test]
    fn psi_plateaus() {
        let p = psi_build(0.01).unwrap();
        assert_eq!(p.psi(1.0), 0.01);
        assert_eq!(p.psi(10.0), 10.0);
        assert_eq!(p.psi(5.0), 0.01);
        assert!(psi_build(0.3).is_err());
        assert!(psi_build(0.0).is_err());
    }

    #[test]
    fn psi_table_matches_closed_form() {
        let p = psi_build(0.05).unwrap();
        assert!((p.t_param - p.l_target.ln()).abs() < 1e-9);
        for i in 0..500 {
            let u = i as f64 * (p.t_param + 1.0) / 499.0;
            let (f, _, _) = p.f_eval(u);
            let exact = log_f_closed(u, p.t_param).exp();
            assert!((f / exact - 1.0).abs() < 1e-9, "u={u} f={f} exact={exact}");
        }
    }

    #[test]
    fn holonomy_minus_one() {
        let h = l2_holonomy(0.05, 0.0, 4000);
        assert!((h - Complex64::new(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn radial_modulus() {
        let z = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let w = radial_embedding(&z, 3.0).unwrap();
        assert!(((w[0].norm_sqr() + w[1].norm_sqr()).sqrt() - 2.0).abs() < 1e-14);
        assert_eq!(radial_embedding(&z, 0.0).unwrap(), z);
        assert!(radial_embedding(&[Complex64::new(0.0, 0.0); 2], 1.0).is_err());
    }
}
