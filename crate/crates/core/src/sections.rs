//! Localized sections of L1 (connection -iH dtheta), L2 (connection
//! -i(Q + eps/2) dt) and their tensor product, with the Gaussian decay gauges
//! used to bound them.
//!
//! Phases are fixed by declaring every section real and positive at its base
//! point; only moduli are meaningful when comparing against other gauges.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::holo_coords::HoloCoords;
use crate::local_model::{
    cartesian_from_coords, singular_frame, x0_from_qh, ModelError, ModelGeometry, ModelPoint, Sheet,
    SingularCoords,
};
use crate::numerics::{integrate, scan_min, smoothstep, smoothstep_integral, Cutoff};

const I: Complex64 = Complex64::new(0.0, 1.0);

// ---------------------------------------------------------------------------
// sample type

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trivialization {
    /// connection -iH dtheta
    L1,
    /// connection -i(Q + eps/2) dt
    L2,
    Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionSample {
    pub value: Complex64,
    pub triv: Trivialization,
    /// Covariant derivative along the g-orthonormal frame (e1..e4), when computed.
    pub cov: Option<[Complex64; 4]>,
}

impl SectionSample {
    pub fn new(value: Complex64, triv: Trivialization) -> Self {
        SectionSample { value, triv, cov: None }
    }

    pub fn zero(triv: Trivialization) -> Self {
        SectionSample::new(Complex64::new(0.0, 0.0), triv)
    }

    pub fn norm(&self) -> f64 {
        self.value.norm()
    }
}

/// g-orthonormal frame at x as Cartesian vectors:
/// e1 = psi dQ, e2 = psi^-1 dt, e3 = p r dH, e4 = dtheta / (p r), with J e1 = e2, J e3 = e4.
pub fn g_frame(psi: f64, x: &ModelPoint) -> [[f64; 4]; 4] {
    let b: Matrix4<f64> = singular_frame(x);
    let pr = x.p() * x.r();
    let sc = [psi, 1.0 / psi, pr, 1.0 / pr];
    let mut out = [[0.0; 4]; 4];
    for (k, s) in sc.iter().enumerate() {
        for i in 0..4 {
            out[k][i] = s * b[(i, k)];
        }
    }
    out
}

fn shift(x: &ModelPoint, v: &[f64; 4], h: f64) -> ModelPoint {
    ModelPoint::new(x.x0 + h * v[0], x.x1 + h * v[1], x.x2 + h * v[2], x.t + h * v[3])
}

/// Connection form of the trivialization evaluated on a Cartesian vector.
fn connection(triv: Trivialization, x: &ModelPoint, v: &[f64; 4], eps: f64) -> Complex64 {
    let r2 = x.r2();
    let dtheta = (x.x1 * v[2] - x.x2 * v[1]) / r2;
    let a1 = -I * x.h() * dtheta;
    let a2 = -I * (x.q() + 0.5 * eps) * v[3];
    match triv {
        Trivialization::L1 => a1,
        Trivialization::L2 => a2,
        Trivialization::Tensor => a1 + a2,
    }
}

/// Covariant derivatives along e1..e4 by central differences.
pub fn covariant_fd<F>(f: F, x: &ModelPoint, triv: Trivialization, psi: f64, eps: f64, h: f64) -> Result<[Complex64; 4], ModelError>
where
    F: Fn(&ModelPoint) -> Result<Complex64, ModelError>,
{
    let frame = g_frame(psi, x);
    let f0 = f(x)?;
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for k in 0..4 {
        let d = (f(&shift(x, &frame[k], h))? - f(&shift(x, &frame[k], -h))?) / (2.0 * h);
        out[k] = d + connection(triv, x, &frame[k], eps) * f0;
    }
    Ok(out)
}

/// (dbar along (e1,e2), dbar along (e3,e4)) = 1/2 (nabla_e + i nabla_Je).
pub fn dbar_fd<F>(f: F, x: &ModelPoint, triv: Trivialization, psi: f64, eps: f64, h: f64) -> Result<[Complex64; 2], ModelError>
where
    F: Fn(&ModelPoint) -> Result<Complex64, ModelError>,
{
    let c = covariant_fd(f, x, triv, psi, eps, h)?;
    Ok([0.5 * (c[0] + I * c[1]), 0.5 * (c[2] + I * c[3])])
}

// ---------------------------------------------------------------------------
// sigma

pub fn sigma_value(p: f64) -> f64 {
    (-p.powi(6) / 18.0).exp()
}

pub fn sigma_eval(x: &ModelPoint) -> SectionSample {
    SectionSample::new(Complex64::new(sigma_value(x.p()), 0.0), Trivialization::L1)
}

/// p^4 = 6 x0^2 - 2Q on a quadric.
fn p_on_quadric(q: f64, x0: f64) -> f64 {
    (6.0 * x0 * x0 - 2.0 * q).max(0.0).sqrt().sqrt()
}

// ---------------------------------------------------------------------------
// eta, g, SectionParams

/// D(x0) = (p^2 - x0) r^2 u(x0) on the quadric Q = -1.
pub fn d_quadric(holo: &HoloCoords, x0: f64) -> f64 {
    let p2 = (6.0 * x0 * x0 + 2.0).sqrt();
    (p2 - x0) * 2.0 * (x0 * x0 + 1.0) * holo.u_eval(x0)
}

pub fn eta_compute(holo: &HoloCoords) -> f64 {
    eta_scan(holo, 4000)
}

pub fn eta_scan(holo: &HoloCoords, n: usize) -> f64 {
    scan_min(|x| d_quadric(holo, x), -10.0, 10.0, n, 1e-12).1
}

/// w(s) = g(h) - |h| at s = |h|.
pub fn g_excess(s: f64, delta: f64) -> f64 {
    let s = s.abs();
    if s <= 0.25 * delta {
        0.5 * delta - s
    } else if s < 0.75 * delta {
        let u = (s - 0.25 * delta) / (0.5 * delta);
        0.5 * delta * (0.5 - u + smoothstep_integral(u))
    } else {
        0.0
    }
}

/// Even interpolation g(h) >= |h|, constant delta/2 near 0, equal to |h| beyond 3 delta/4.
pub fn g_even(h: f64, delta: f64) -> f64 {
    h.abs() + g_excess(h, delta)
}

pub fn g_even_d1(h: f64, delta: f64) -> f64 {
    let u = (h.abs() - 0.25 * delta) / (0.5 * delta);
    h.signum() * smoothstep(u)
}

/// U(h) = u(x0) at the point of the Q = -1 quadric with H = h.
pub fn u_of_h(holo: &HoloCoords, h: f64) -> f64 {
    let sheet = if h < 0.0 { Sheet::Minus } else { Sheet::Plus };
    let x0 = x0_from_qh(-1.0, h, sheet).unwrap_or(0.0);
    holo.u_eval(x0)
}

/// Largest dyadic delta with w(h) U(h) <= eta for all h > 0.
pub fn delta_g_compute(holo: &HoloCoords, eta: f64) -> f64 {
    let mut delta = 16.0;
    while delta > 1e-6 {
        let n = 400;
        let ok = (1..=n).all(|i| {
            let h = 0.75 * delta * i as f64 / n as f64;
            g_excess(h, delta) * u_of_h(holo, h) <= eta
        });
        if ok {
            return delta;
        }
        delta *= 0.5;
    }
    delta
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionParams {
    pub b1: f64,
    pub b2: f64,
    pub delta_g: f64,
    pub eta: f64,
    /// psi <= c0 eps p^4 on p >= 1.
    pub c0: f64,
}

impl SectionParams {
    pub fn compute(geom: &ModelGeometry, holo: &HoloCoords) -> Self {
        let c0 = geom.psi.constants(4000).c0_quartic;
        let eta = eta_compute(holo);
        SectionParams {
            b1: 0.1,
            b2: 0.05 / c0,
            delta_g: delta_g_compute(holo, eta),
            eta,
            c0,
        }
    }

    pub fn g(&self, h: f64) -> f64 {
        g_even(h, self.delta_g)
    }

    /// phi(h) = (h + g(h)) / 2; alpha = a^3 phi(H0/a^3), beta = a^3 phi(-H0/a^3).
    pub fn phi(&self, h: f64) -> f64 {
        0.5 * (h + self.g(h))
    }
}

// ---------------------------------------------------------------------------
// tau

/// The section tau_{H0, theta0}: leafwise holomorphic, modulus 1 at (H0, theta0) on each quadric.
#[derive(Clone, Copy, Debug)]
pub struct Tau<'a> {
    pub holo: &'a HoloCoords,
    pub params: SectionParams,
    pub h0: f64,
    pub theta0: f64,
}

impl<'a> Tau<'a> {
    pub fn new(holo: &'a HoloCoords, params: SectionParams, h0: f64, theta0: f64) -> Result<Self, ModelError> {
        if h0 == 0.0 || !h0.is_finite() {
            return Err(ModelError::Domain("tau is not defined for H0 = 0".into()));
        }
        Ok(Tau { holo, params, h0, theta0 })
    }

    /// (alpha, beta) on the quadric Q < 0.
    pub fn weights(&self, q: f64) -> (f64, f64) {
        let a3 = (-q).powf(1.5);
        (a3 * self.params.phi(self.h0 / a3), a3 * self.params.phi(-self.h0 / a3))
    }

    /// Whether (Q, x0) lies in G+ (H0 > 0) or G- (H0 < 0).
    pub fn in_domain(&self, q: f64, x0: f64) -> bool {
        q < 0.0 || self.h0 * x0 > 0.0
    }

    /// log tau at the point (Q, x0, theta) of the quadric.
    pub fn log_value(&self, q: f64, x0: f64, theta: f64) -> Result<Complex64, ModelError> {
        if !self.in_domain(q, x0) {
            return Err(ModelError::Domain(format!("(Q, x0) = ({q}, {x0}) outside the domain of tau")));
        }
        let sheet = if self.h0 < 0.0 { Sheet::Minus } else { Sheet::Plus };
        let xb = x0_from_qh(q, self.h0, sheet)?;
        let log_sigma = -(p_on_quadric(q, x0).powi(6) - p_on_quadric(q, xb).powi(6)) / 18.0;
        let h = self.holo;
        let mut out = Complex64::new(log_sigma, 0.0);
        if q < 0.0 {
            let (alpha, beta) = self.weights(q);
            if alpha != 0.0 {
                let f0 = h.f_plus_raw(q, xb, self.theta0)?;
                out += alpha * (h.f_plus_raw(q, x0, theta)? / f0 - 1.0);
            }
            if beta != 0.0 {
                let f0 = h.f_minus_raw(q, xb, self.theta0)?;
                out += beta * (h.f_minus_raw(q, x0, theta)? / f0 - 1.0);
            }
        } else if self.h0 > 0.0 {
            let f0 = h.f_plus_raw(q, xb, self.theta0)?;
            out += self.h0 * (h.f_plus_raw(q, x0, theta)? / f0 - 1.0);
        } else {
            let f0 = h.f_minus_raw(q, xb, self.theta0)?;
            out += -self.h0 * (h.f_minus_raw(q, x0, theta)? / f0 - 1.0);
        }
        Ok(out)
    }

    pub fn value_at(&self, x: &ModelPoint) -> Result<Complex64, ModelError> {
        Ok(self.log_value(x.q(), x.x0, x.theta())?.exp())
    }

    pub fn eval(&self, c: &SingularCoords) -> Result<SectionSample, ModelError> {
        let x = cartesian_from_coords(c)?;
        Ok(SectionSample::new(self.log_value(c.q, x.x0, c.theta)?.exp(), Trivialization::L1))
    }
}

pub fn tau_eval(holo: &HoloCoords, h0: f64, theta0: f64, c: &SingularCoords, params: &SectionParams) -> Result<SectionSample, ModelError> {
    Tau::new(holo, *params, h0, theta0)?.eval(c)
}

// ---------------------------------------------------------------------------
// context bundling geometry, parameters and the F tables

#[derive(Clone, Debug)]
pub struct SectionContext {
    pub geom: ModelGeometry,
    pub params: SectionParams,
    pub holo: &'static HoloCoords,
}

/// sigma_-(x0, x1, x2) = (-x0, x1, -x2); sigma-bar_- also shifts t by 2 pi / eps.
pub fn sigma_minus(x: &ModelPoint) -> ModelPoint {
    ModelPoint::new(-x.x0, x.x1, -x.x2, x.t)
}

pub fn sigma_bar_minus(x: &ModelPoint, eps: f64) -> ModelPoint {
    ModelPoint::new(-x.x0, x.x1, -x.x2, x.t + 2.0 * PI / eps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSample {
    pub total: Complex64,
    /// Sum over even nu.
    pub even: Complex64,
    pub odd: Complex64,
    /// Bound on the discarded terms.
    pub tail_bound: f64,
}

impl SectionContext {
    pub fn new(epsilon: f64) -> Result<Self, ModelError> {
        let geom = ModelGeometry::new(epsilon)?;
        let holo = HoloCoords::shared();
        let params = SectionParams::compute(&geom, holo);
        Ok(SectionContext { geom, params, holo })
    }

    pub fn with_params(geom: ModelGeometry, params: SectionParams) -> Self {
        SectionContext { geom, params, holo: HoloCoords::shared() }
    }

    pub fn epsilon(&self) -> f64 {
        self.geom.epsilon()
    }

    pub fn tau(&self, h0: f64, theta0: f64) -> Result<Tau<'static>, ModelError> {
        Tau::new(self.holo, self.params, h0, theta0)
    }

    /// L-hat for the side sign (+1 / -1); 1 on G0, the Q-cutoff on G \ G0, 0 off G.
    pub fn l_hat(&self, x: &ModelPoint, side: f64) -> f64 {
        let q = x.q();
        let p4 = x.p4();
        let pr = &self.params;
        if q + pr.b2 * pr.c0 * p4 < 0.0 || side * x.x0 > 0.0 {
            return 1.0;
        }
        if q < 0.0 {
            let psi = self.geom.psi_at(x);
            Cutoff::new(-1.0, -0.5).value(self.epsilon() / pr.b2 * q / psi)
        } else {
            0.0
        }
    }

    /// L^pm = chi(2/|x|) L-hat^pm; zero on |x| <= 1.
    pub fn l_cut(&self, x: &ModelPoint, side: f64) -> f64 {
        let n = x.norm3();
        if n <= 1.0 {
            return 0.0;
        }
        let c = Cutoff::standard().value(2.0 / n);
        if c == 0.0 {
            return 0.0;
        }
        c * self.l_hat(x, side)
    }

    fn check_base(xp: &ModelPoint) -> Result<(), ModelError> {
        if xp.norm3() <= 3.0 {
            return Err(ModelError::Region(format!("base point |x'| = {} <= 3", xp.norm3())));
        }
        if xp.h() == 0.0 {
            return Err(ModelError::Domain("base point has H = 0".into()));
        }
        Ok(())
    }

    pub fn tau_star_value(&self, xp: &ModelPoint, x: &ModelPoint) -> Result<Complex64, ModelError> {
        Self::check_base(xp)?;
        let h0 = xp.h();
        let side = h0.signum();
        let l = self.l_cut(x, side);
        if l == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(l * self.tau(h0, xp.theta())?.value_at(x)?)
    }

    pub fn tau_star_eval(&self, xp: &ModelPoint, x: &ModelPoint) -> Result<SectionSample, ModelError> {
        Ok(SectionSample::new(self.tau_star_value(xp, x)?, Trivialization::L1))
    }

    /// rho-hat in the L2 gauge: phase U = (Q + Q0 + eps)(t - t')/2 times the Gaussian.
    pub fn rho_hat(&self, xp: &ModelPoint, tp: f64, x: &ModelPoint) -> Complex64 {
        let psi0 = self.geom.psi_at(xp);
        rho_hat_raw(self.epsilon(), psi0, xp.q(), tp, x.q(), x.t)
    }

    pub fn rho_cut(&self, xp: &ModelPoint, q: f64) -> f64 {
        let psi0 = self.geom.psi_at(xp);
        Cutoff::standard().value(self.epsilon() / self.params.b1 * (q - xp.q()).abs() / psi0)
    }

    pub fn rho_value(&self, xp: &ModelPoint, tp: f64, x: &ModelPoint) -> Complex64 {
        let c = self.rho_cut(xp, x.q());
        if c == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        c * self.rho_hat(xp, tp, x)
    }

    pub fn rho_eval(&self, xp: &ModelPoint, tp: f64, x: &ModelPoint) -> SectionSample {
        SectionSample::new(self.rho_value(xp, tp, x), Trivialization::L2)
    }

    pub fn s_value(&self, xp: &ModelPoint, tp: f64, x: &ModelPoint) -> Result<Complex64, ModelError> {
        let r = self.rho_value(xp, tp, x);
        if r == Complex64::new(0.0, 0.0) {
            return Ok(r);
        }
        Ok(self.tau_star_value(xp, x)? * r)
    }

    pub fn s_eval(&self, xp: &ModelPoint, tp: f64, x: &ModelPoint) -> Result<SectionSample, ModelError> {
        Ok(SectionSample::new(self.s_value(xp, tp, x)?, Trivialization::Tensor))
    }

    /// Periodization over translates t'_nu = t' + 2 pi nu / eps, |nu - nu_c| <= n with
    /// nu_c the translate nearest to t.
    pub fn theta_eval(&self, xp: &ModelPoint, tp: f64, x: &ModelPoint, n: usize) -> ThetaSample {
        let eps = self.epsilon();
        let psi0 = self.geom.psi_at(xp);
        theta_raw(eps, psi0, xp.q(), tp, x.q(), x.t, n)
    }

    /// s = chi_{Q0} (Theta+ tau*_{x'} + Theta- tau*_{sigma_-(x')}).
    pub fn s_odd_value(&self, xp: &ModelPoint, tp: f64, x: &ModelPoint, n: usize) -> Result<Complex64, ModelError> {
        let c = self.rho_cut(xp, x.q());
        if c == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let th = self.theta_eval(xp, tp, x, n);
        let a = self.tau_star_value(xp, x)?;
        let b = self.tau_star_value(&sigma_minus(xp), x)?;
        Ok(c * (th.even * a + th.odd * b))
    }

    pub fn decay_gauge(&self, xp: &ModelPoint, tp: f64) -> Result<DecayGauge, ModelError> {
        DecayGauge::new(&self.geom, xp, tp)
    }

    pub fn localized_system(&self, xp: &ModelPoint, tp: f64) -> Result<LocalizedSystem<'_>, ModelError> {
        LocalizedSystem::new(self, *xp, tp, 1e-4)
    }
}

pub fn rho_hat_raw(eps: f64, psi0: f64, q0: f64, tp: f64, q: f64, t: f64) -> Complex64 {
    let dt = t - tp;
    let dq = q - q0;
    let u = 0.5 * (q + q0 + eps) * dt;
    let m = (-(psi0 * psi0 * dt * dt + dq * dq / (psi0 * psi0)) / 4.0).exp();
    Complex64::from_polar(m, u)
}

pub fn theta_raw(eps: f64, psi0: f64, q0: f64, tp: f64, q: f64, t: f64, n: usize) -> ThetaSample {
    let period = 2.0 * PI / eps;
    let nu_c = ((t - tp) / period).round() as i64;
    let n = n as i64;
    let mut even = Complex64::new(0.0, 0.0);
    let mut odd = Complex64::new(0.0, 0.0);
    for nu in (nu_c - n)..=(nu_c + n) {
        let v = rho_hat_raw(eps, psi0, q0, tp + nu as f64 * period, q, t);
        if nu.rem_euclid(2) == 0 {
            even += v;
        } else {
            odd += v;
        }
    }
    ThetaSample {
        total: even + odd,
        even,
        odd,
        tail_bound: theta_tail_bound(psi0, eps, n as usize),
    }
}

/// 2 sum_{nu > n} exp(-psi0^2 ((nu - 1/2) 2 pi / eps)^2 / 4).
pub fn theta_tail_bound(psi0: f64, eps: f64, n: usize) -> f64 {
    let period = 2.0 * PI / eps;
    let mut s = 0.0;
    for nu in (n + 1)..(n + 50) {
        let d = (nu as f64 - 0.5) * period;
        s += (-psi0 * psi0 * d * d / 4.0).exp();
    }
    2.0 * s
}

// ---------------------------------------------------------------------------
// localized triple

/// (s, s', s'') with s', s'' obtained by differentiating s in the base parameters t'
/// and H0 (at fixed Q0, theta0), shifted so that s'/s and s''/s vanish at the base point.
pub struct LocalizedSystem<'a> {
    pub ctx: &'a SectionContext,
    pub xp: ModelPoint,
    pub tp: f64,
    pub step: f64,
    shift: [Complex64; 2],
}

impl<'a> LocalizedSystem<'a> {
    pub fn new(ctx: &'a SectionContext, xp: ModelPoint, tp: f64, step: f64) -> Result<Self, ModelError> {
        SectionContext::check_base(&xp)?;
        let mut sys = LocalizedSystem {
            ctx,
            xp,
            tp,
            step,
            shift: [Complex64::new(0.0, 0.0); 2],
        };
        let mut base = xp;
        base.t = tp;
        let d = sys.raw_derivatives(&base)?;
        sys.shift = [d[1] / d[0], d[2] / d[0]];
        Ok(sys)
    }

    fn moved_base(&self, dh: f64) -> Result<ModelPoint, ModelError> {
        let c = SingularCoords::new(self.xp.q(), self.xp.h() + dh, self.xp.theta(), 0.0);
        cartesian_from_coords(&c)
    }

    /// (s, ds/dt', ds/dH0) by central differences.
    fn raw_derivatives(&self, x: &ModelPoint) -> Result<[Complex64; 3], ModelError> {
        let c = self.ctx;
        let h = self.step;
        let s0 = c.s_value(&self.xp, self.tp, x)?;
        let st = (c.s_value(&self.xp, self.tp + h, x)? - c.s_value(&self.xp, self.tp - h, x)?) / (2.0 * h);
        let hh = h * self.xp.h().abs().max(1.0);
        let xa = self.moved_base(hh)?;
        let xb = self.moved_base(-hh)?;
        let sh = (c.s_value(&xa, self.tp, x)? - c.s_value(&xb, self.tp, x)?) / (2.0 * hh);
        Ok([s0, st, sh])
    }

    pub fn eval(&self, x: &ModelPoint) -> Result<[Complex64; 3], ModelError> {
        let d = self.raw_derivatives(x)?;
        Ok([d[0], d[1] - self.shift[0] * d[0], d[2] - self.shift[1] * d[0]])
    }

    pub fn ratios(&self, x: &ModelPoint) -> Result<[Complex64; 2], ModelError> {
        let v = self.eval(x)?;
        Ok([v[1] / v[0], v[2] / v[0]])
    }

    /// |det| of the real 4x4 Jacobian of (s'/s, s''/s) along the g-frame at (x', t').
    pub fn jacobian_at_base(&self, h: f64) -> Result<f64, ModelError> {
        let mut base = self.xp;
        base.t = self.tp;
        let psi = self.ctx.geom.psi_at(&base);
        let frame = g_frame(psi, &base);
        let mut m = Matrix4::zeros();
        for k in 0..4 {
            let a = self.ratios(&shift(&base, &frame[k], h))?;
            let b = self.ratios(&shift(&base, &frame[k], -h))?;
            let d0 = (a[0] - b[0]) / (2.0 * h);
            let d1 = (a[1] - b[1]) / (2.0 * h);
            m[(0, k)] = d0.re;
            m[(1, k)] = d0.im;
            m[(2, k)] = d1.re;
            m[(3, k)] = d1.im;
        }
        Ok(m.determinant().abs())
    }
}

// ---------------------------------------------------------------------------
// decay gauges

/// Signed g-length of the arc x0 = a .. b at fixed (Q, theta): int p^3 / r dx0.
pub fn arc_between(q: f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if q > 0.0 {
        // both ends on one sheet with |x0| >= sqrt(Q); x0 = sign (sqrt(Q) + w^2)
        let s = a.signum();
        let c = q.sqrt();
        let wa = (a.abs() - c).max(0.0).sqrt();
        let wb = (b.abs() - c).max(0.0).sqrt();
        let f = |w: f64| {
            let y = c + w * w;
            2.0 * p_on_quadric(q, y).powi(3) / (2.0 * (y + c)).sqrt()
        };
        return s * integrate(f, wa, wb, 1e-12);
    }
    let f = |x0: f64| p_on_quadric(q, x0).powi(3) / (2.0 * (x0 * x0 - q)).sqrt();
    integrate(f, a, b, 1e-12)
}

/// Decay gauges attached to a base point (x', t').
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayGauge {
    pub h0: f64,
    pub theta0: f64,
    pub q0: f64,
    pub tp: f64,
    pub psi0: f64,
    pub epsilon: f64,
}

impl DecayGauge {
    pub fn new(geom: &ModelGeometry, xp: &ModelPoint, tp: f64) -> Result<Self, ModelError> {
        if xp.r() <= 0.0 {
            return Err(ModelError::Region("base point on the axis".into()));
        }
        Ok(DecayGauge {
            h0: xp.h(),
            theta0: xp.theta(),
            q0: xp.q(),
            tp,
            psi0: geom.psi_at(xp),
            epsilon: geom.epsilon(),
        })
    }

    /// x0 of the point (Q, H0) on the quadric through x.
    fn x0_base(&self, q: f64) -> Result<f64, ModelError> {
        let sheet = if self.h0 < 0.0 { Sheet::Minus } else { Sheet::Plus };
        x0_from_qh(q, self.h0, sheet)
    }

    /// g-distance along the quadric (fixed theta) from x to the point with H = H0.
    pub fn s_arc(&self, x: &ModelPoint) -> Result<f64, ModelError> {
        let q = x.q();
        let xb = self.x0_base(q)?;
        if q > 0.0 && x.x0 * xb < 0.0 {
            return Err(ModelError::Domain("x and the base lie on different sheets".into()));
        }
        Ok(arc_between(q, x.x0, xb).abs())
    }

    /// p r at (Q, H0) on the quadric through x.
    pub fn l_orbit(&self, x: &ModelPoint) -> Result<f64, ModelError> {
        let q = x.q();
        let xb = self.x0_base(q)?;
        let r2 = 2.0 * (xb * xb - q);
        Ok(p_on_quadric(q, xb) * r2.max(0.0).sqrt())
    }

    /// S^2 + (theta - theta0)^2 L^2 with the angle taken in (-pi, pi].
    pub fn d2(&self, x: &ModelPoint) -> Result<f64, ModelError> {
        let s = self.s_arc(x)?;
        let l = self.l_orbit(x)?;
        let dth = wrap_angle(x.theta() - self.theta0);
        Ok(s * s + dth * dth * l * l)
    }

    pub fn e_alpha(&self, x: &ModelPoint, alpha: f64) -> Result<f64, ModelError> {
        Ok((-alpha * self.d2(x)?).exp())
    }

    pub fn f_alpha(&self, x: &ModelPoint, alpha: f64) -> f64 {
        let dq = x.q() - self.q0;
        let dt = x.t - self.tp;
        (-alpha * (dq * dq / (self.psi0 * self.psi0) + self.psi0 * self.psi0 * dt * dt)).exp()
    }

    /// Psi = psi/psi0 + psi0/psi.
    pub fn psi_ratio(&self, psi: f64) -> f64 {
        psi / self.psi0 + self.psi0 / psi
    }

    /// delta = |psi/psi0 - psi0/psi|.
    pub fn delta(&self, psi: f64) -> f64 {
        (psi / self.psi0 - self.psi0 / psi).abs()
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

// ---------------------------------------------------------------------------
// leaf lemmas on the Q = 1, x0 > 0 sheet

/// Arc length s from the axis point x0 = 1 on Q = 1.
pub fn leaf_s(x0: f64) -> f64 {
    arc_between(1.0, 1.0, x0)
}

/// (v, f(v) = p^6/18, f''(v) closed form) on Q = 1 at x0 > 1.
pub fn leaf_f(holo: &HoloCoords, x0: f64) -> Result<(f64, f64, f64), ModelError> {
    let v = holo.v_eval(x0)?;
    let p = p_on_quadric(1.0, x0);
    let r2 = 2.0 * (x0 * x0 - 1.0);
    Ok((v, p.powi(6) / 18.0, r2 / (v * v) * (p * p - x0)))
}

/// f'' by differencing f'(v) = H/v in x0 and dividing by dv/dx0 (both by FD).
pub fn leaf_f2_fd(holo: &HoloCoords, x0: f64, h: f64) -> Result<f64, ModelError> {
    let fp = |y: f64| -> Result<f64, ModelError> { Ok(2.0 * y * (y * y - 1.0) / holo.v_eval(y)?) };
    let num = (fp(x0 + h)? - fp(x0 - h)?) / (2.0 * h);
    let den = (holo.v_eval(x0 + h)? - holo.v_eval(x0 - h)?) / (2.0 * h);
    Ok(num / den)
}

/// Delta_f(v, v0) = f(v) - f(v0) - (v - v0) f'(v0) with f'(v0) = H0/v0.
pub fn leaf_delta_f(holo: &HoloCoords, x0: f64, x0b: f64) -> Result<f64, ModelError> {
    let (v, f, _) = leaf_f(holo, x0)?;
    let (v0, f0, _) = leaf_f(holo, x0b)?;
    let h0 = 2.0 * x0b * (x0b * x0b - 1.0);
    Ok(f - f0 - (v - v0) * h0 / v0)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LeafLemmaReport {
    pub min_f2: f64,
    pub max_f2_rel_err: f64,
    /// min of Delta_f / ((1+v)^(l/2) - (1+v0)^(l/2))^2, l = sqrt 6
    pub delta_c: f64,
    /// max of ((s-s0)^2 + s0^2 th^2) / ((s-s0)^2 + (v/v0) s0^2 th^2)
    pub ratio_c: f64,
}

/// Scan the leaf lemmas on an n-point grid in x0 in (1, x_max] and n_theta angles.
pub fn leaf_lemma_scan(holo: &HoloCoords, n: usize, n_theta: usize, x_max: f64) -> Result<LeafLemmaReport, ModelError> {
    let lam = 6f64.sqrt();
    let xs: Vec<f64> = (1..=n).map(|i| 1.0 + (x_max - 1.0) * (i as f64 / n as f64).powi(2)).collect();
    let mut rep = LeafLemmaReport {
        min_f2: f64::INFINITY,
        max_f2_rel_err: 0.0,
        delta_c: f64::INFINITY,
        ratio_c: 0.0,
    };
    let mut vals = Vec::with_capacity(n);
    for &x in &xs {
        let (v, _, f2) = leaf_f(holo, x)?;
        let fd = leaf_f2_fd(holo, x, 1e-5 * x)?;
        rep.min_f2 = rep.min_f2.min(f2);
        rep.max_f2_rel_err = rep.max_f2_rel_err.max((fd - f2).abs() / f2);
        vals.push((x, v, leaf_s(x)));
    }
    for &(xb, v0, s0) in &vals {
        for &(x, v, s) in &vals {
            if x == xb {
                continue;
            }
            let d = leaf_delta_f(holo, x, xb)?;
            let den = ((1.0 + v).powf(lam / 2.0) - (1.0 + v0).powf(lam / 2.0)).powi(2);
            rep.delta_c = rep.delta_c.min(d / den);
            for k in 0..n_theta {
                let th = -PI + 2.0 * PI * (k as f64 + 0.5) / n_theta as f64;
                let a = (s - s0).powi(2) + s0 * s0 * th * th;
                let b = (s - s0).powi(2) + v / v0 * s0 * s0 * th * th;
                rep.ratio_c = rep.ratio_c.max(a / b);
            }
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// decay scans

/// x in Omega+_c for tau with H0 > 0: in G+, |x| > 1, and Q < -c when x0 < 0.
pub fn in_omega_plus(x: &ModelPoint, c: f64) -> bool {
    let q = x.q();
    let in_g = q < 0.0 || x.x0 > 0.0;
    in_g && x.norm3() > 1.0 && (x.x0 >= 0.0 || q < -c)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecaySample {
    pub base: usize,
    pub x: ModelPoint,
    pub tau: f64,
    pub d2: f64,
}

/// Cylindrical grid (x0, r, theta) over 1 < |x| <= r_max restricted to Omega+_c.
pub fn omega_grid(n: usize, r_max: f64, c: f64) -> Vec<ModelPoint> {
    let mut pts = Vec::new();
    for i in 0..n {
        let x0 = -r_max + 2.0 * r_max * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let r = r_max * (j as f64 + 0.5) / n as f64;
            for k in 0..n {
                let th = -PI + 2.0 * PI * (k as f64 + 0.5) / n as f64;
                let x = ModelPoint::new(x0, r * th.cos(), r * th.sin(), 0.0);
                if x.norm3() <= r_max && in_omega_plus(&x, c) {
                    pts.push(x);
                }
            }
        }
    }
    pts
}

pub fn decay_samples(ctx: &SectionContext, bases: &[(f64, f64)], pts: &[ModelPoint]) -> Result<Vec<DecaySample>, ModelError> {
    let mut out = Vec::new();
    for (bi, &(h0, th0)) in bases.iter().enumerate() {
        let tau = ctx.tau(h0, th0)?;
        let xb = cartesian_from_coords(&SingularCoords::new(-1.0, h0, th0, 0.0))?;
        let gauge = DecayGauge::new(&ctx.geom, &xb, 0.0)?;
        let part: Result<Vec<DecaySample>, ModelError> = pts
            .par_iter()
            .map(|x| {
                Ok(DecaySample {
                    base: bi,
                    x: *x,
                    tau: tau.value_at(x)?.norm(),
                    d2: gauge.d2(x)?,
                })
            })
            .collect();
        out.extend(part?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub c: f64,
}

/// alpha = 1/2 min(-log|tau| / D^2) over D^2 >= 1; C = max(e^alpha, max |tau| / E_alpha).
/// The e^alpha floor covers D^2 < 1, where |tau| <= 1 <= e^alpha E_alpha.
pub fn fit_decay(samples: &[DecaySample]) -> DecayFit {
    let mut m = f64::INFINITY;
    for s in samples {
        if s.d2 >= 1.0 {
            let l = if s.tau > 0.0 { -s.tau.ln() } else { f64::INFINITY };
            m = m.min(l / s.d2);
        }
    }
    let alpha = 0.5 * m;
    let mut c = alpha.exp();
    for s in samples {
        c = c.max(s.tau / (-alpha * s.d2).exp());
    }
    DecayFit { alpha, c }
}

/// Worst ratio |tau| / (C E_alpha) over the samples.
pub fn decay_worst(fit: &DecayFit, samples: &[DecaySample]) -> f64 {
    samples
        .iter()
        .map(|s| s.tau / (fit.c * (-fit.alpha * s.d2).exp()))
        .fold(0.0, f64::max)
}

/// |dbar tau| = (psi/2) |d tau / dQ| at fixed (H, theta).
pub fn dbar_tau(ctx: &SectionContext, tau: &Tau, x: &ModelPoint) -> Result<f64, ModelError> {
    let c = SingularCoords::new(x.q(), x.h(), x.theta(), 0.0).with_sheet(if x.x0 < 0.0 { Sheet::Minus } else { Sheet::Plus });
    let h = 1e-5 * x.q().abs().max(1.0);
    let mut a = c;
    a.q += h;
    let mut b = c;
    b.q -= h;
    let d = (tau.eval(&a)?.value - tau.eval(&b)?.value) / (2.0 * h);
    Ok(0.5 * ctx.geom.psi_at(x) * d.norm())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionDecayReport {
    pub epsilon: f64,
    pub coarse: DecayFit,
    pub coarse_points: usize,
    pub fine_points: usize,
    pub fine_worst: f64,
    /// max |dbar tau| / (eps E_{alpha/2}) over |x| >= 3
    pub dbar_const: f64,
    /// largest |tau| found off the base point on the (H, theta) grids, and whether
    /// the grid maximum sat at the base
    pub max_off_base: f64,
    pub unique_max: bool,
}

pub const DECAY_BASES: [(f64, f64); 3] = [(0.5, 0.3), (3.0, -1.0), (20.0, 2.5)];

pub fn section_decay_suite(ctx: &SectionContext, n_coarse: usize, r_max: f64) -> Result<SectionDecayReport, ModelError> {
    let coarse_pts = omega_grid(n_coarse, r_max, 0.1);
    let fine_pts = omega_grid(2 * n_coarse, r_max, 0.1);
    let coarse = decay_samples(ctx, &DECAY_BASES, &coarse_pts)?;
    let fit = fit_decay(&coarse);
    let fine = decay_samples(ctx, &DECAY_BASES, &fine_pts)?;
    let fine_worst = decay_worst(&fit, &fine);
    let eps = ctx.epsilon();
    let mut dbar_const: f64 = 0.0;
    for &(h0, th0) in &DECAY_BASES {
        let tau = ctx.tau(h0, th0)?;
        let xb = cartesian_from_coords(&SingularCoords::new(-1.0, h0, th0, 0.0))?;
        let gauge = DecayGauge::new(&ctx.geom, &xb, 0.0)?;
        let vals: Result<Vec<f64>, ModelError> = coarse_pts
            .par_iter()
            .filter(|x| x.norm3() >= 3.0 && x.h().abs() > 1e-9 && x.q().abs() > 0.1)
            .map(|x| {
                let e = gauge.e_alpha(x, 0.5 * fit.alpha)?;
                Ok(dbar_tau(ctx, &tau, x)? / (eps * e))
            })
            .collect();
        dbar_const = vals?.into_iter().fold(dbar_const, f64::max);
    }
    let (max_off_base, unique_max) = tau_max_scan(ctx, &[-4.0, -1.0, 1.0, 4.0], 200, 64)?;
    Ok(SectionDecayReport {
        epsilon: eps,
        coarse: fit,
        coarse_points: coarse.len(),
        fine_points: fine.len(),
        fine_worst,
        dbar_const,
        max_off_base,
        unique_max,
    })
}

/// On each quadric, a (H, theta) grid containing (H0, theta0): max |tau| away from the base.
pub fn tau_max_scan(ctx: &SectionContext, qs: &[f64], nh: usize, nt: usize) -> Result<(f64, bool), ModelError> {
    let mut worst: f64 = 0.0;
    let mut unique = true;
    for &(h0, th0) in &DECAY_BASES {
        let tau = ctx.tau(h0, th0)?;
        for &q in qs {
            let lo = if q > 0.0 { 1e-3 * h0 } else { -4.0 * h0.max(4.0) };
            let hi = 4.0 * h0.max(4.0);
            let mut hs: Vec<f64> = (0..nh).map(|i| lo + (hi - lo) * i as f64 / (nh - 1) as f64).collect();
            hs.push(h0);
            for &h in &hs {
                for k in 0..nt {
                    let th = th0 + 2.0 * PI * k as f64 / nt as f64;
                    let v = tau.eval(&SingularCoords::new(q, h, th, 0.0))?.norm();
                    if h == h0 && k == 0 {
                        if (v - 1.0).abs() > 1e-12 {
                            unique = false;
                        }
                    } else {
                        worst = worst.max(v);
                        if v >= 1.0 {
                            unique = false;
                        }
                    }
                }
            }
        }
    }
    Ok((worst, unique))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> SectionContext {
        SectionContext::new(0.1).unwrap()
    }

    #[test]
    fn g_properties() {
        for &d in &[0.25, 1.0, 2.0] {
            for i in 0..400 {
                let h = -2.0 * d + 4.0 * d * i as f64 / 399.0;
                assert!(g_even(h, d) >= h.abs());
                assert_eq!(g_even(h, d), g_even(-h, d));
                if h.abs() >= 0.75 * d {
                    assert_eq!(g_even(h, d), h.abs());
                }
                let fd = (g_even(h + 1e-7, d) - g_even(h - 1e-7, d)) / 2e-7;
                assert!((fd - g_even_d1(h, d)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn eta_and_d() {
        let h = HoloCoords::shared();
        assert!((d_quadric(h, 0.0) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(d_quadric(h, 30.0) > d_quadric(h, 5.0));
        assert!(d_quadric(h, -30.0) > d_quadric(h, -5.0));
        let eta = eta_compute(h);
        assert!(eta > 0.0 && eta <= 2.0 * 2f64.sqrt());
        assert!((eta_scan(h, 8000) - eta).abs() < 1e-6);
    }

    #[test]
    fn tau_normalized_and_stationary() {
        let c = ctx();
        for &(q, h0, th0) in &[(-1.0, 0.7, 0.2), (-4.0, -3.0, 1.0), (1.0, 2.0, -0.5), (4.0, 30.0, 0.0)] {
            let tau = c.tau(h0, th0).unwrap();
            let v = tau.eval(&SingularCoords::new(q, h0, th0, 0.0)).unwrap().value;
            assert!((v - 1.0).norm() < 1e-12, "{v}");
            let l = |dh: f64, dt: f64| {
                tau.eval(&SingularCoords::new(q, h0 + dh, th0 + dt, 0.0)).unwrap().norm().ln()
            };
            let e = 1e-5;
            assert!(((l(e, 0.0) - l(-e, 0.0)) / (2.0 * e)).abs() < 1e-6);
            assert!(((l(0.0, e) - l(0.0, -e)) / (2.0 * e)).abs() < 1e-6);
        }
        assert!(c.tau(0.0, 0.0).is_err());
    }

    #[test]
    fn tau_weights_split() {
        let c = ctx();
        let tau = c.tau(0.3, 0.0).unwrap();
        for &q in &[-0.5, -1.0, -3.0] {
            let (a, b) = tau.weights(q);
            let a3 = (-q as f64).powf(1.5);
            assert!((a - b - 0.3).abs() < 1e-12);
            assert!((a + b - a3 * c.params.g(0.3 / a3)).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_hat_holomorphic_for_constant_psi() {
        let eps = 0.1;
        let psi0 = 0.7;
        let f = |q: f64, t: f64| rho_hat_raw(eps, psi0, 1.3, 0.4, q, t);
        let (q, t, h) = (1.9, 0.1, 1e-5);
        let dq = (f(q + h, t) - f(q - h, t)) / (2.0 * h);
        let dt = (f(q, t + h) - f(q, t - h)) / (2.0 * h);
        let res = dq + I / (psi0 * psi0) * (dt - I * (q + 0.5 * eps) * f(q, t));
        assert!(res.norm() < 1e-7);
    }

    #[test]
    fn theta_periodic() {
        let eps = 0.1;
        let per = 2.0 * PI / eps;
        for &t in &[-3.0, 0.0, 17.0, 40.0] {
            let a = theta_raw(eps, 0.3, 0.5, 0.2, 0.45, t, 10);
            let b = theta_raw(eps, 0.3, 0.5, 0.2, 0.45, t + per, 10);
            assert!((a.total - b.total).norm() < 1e-12);
            assert!((a.even - b.odd).norm() < 1e-12);
            assert!((a.even + a.odd - a.total).norm() < 1e-15);
        }
    }

    #[test]
    fn arc_additive() {
        for &(q, a, m, b) in &[(-1.0, -2.0, 0.3, 3.0), (1.0, 1.2, 2.0, 5.0), (0.5, 3.0, 1.0, 0.8)] {
            let s = arc_between(q, a, m) + arc_between(q, m, b);
            assert!((s - arc_between(q, a, b)).abs() < 1e-8);
        }
    }

    #[test]
    fn flat_gaussian_ratio() {
        // s(z; z') = exp(-|z|^2/4 + conj(z') z / 2 - |z'|^2/4)
        let s = |z: Complex64, zp: Complex64| (-z.norm_sqr() / 4.0 + zp.conj() * z / 2.0 - zp.norm_sqr() / 4.0).exp();
        let zp = Complex64::new(0.4, -0.7);
        let h = 1e-5;
        for &z in &[Complex64::new(0.1, 0.2), Complex64::new(-1.0, 0.5)] {
            let dx = (s(z, zp + h) - s(z, zp - h)) / (2.0 * h);
            let r = (dx - 0.5 * I * zp.im * s(z, zp)) / s(z, zp);
            assert!((r - 0.5 * (z - zp)).norm() < 1e-8);
        }
    }
}
