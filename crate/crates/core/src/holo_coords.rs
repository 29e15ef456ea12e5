//! Leafwise-holomorphic coordinates on the quadrics {Q = const}: the radial
//! profiles u, v, the constant A, and the functions F+/F- with their cut-off
//! variants.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::local_model::{cartesian_from_coords, ModelError, ModelPoint, SingularCoords};
use crate::numerics::{integrate, Cutoff, GaussLegendre};

/// nu = sqrt(3/2).
pub fn nu() -> f64 {
    1.5f64.sqrt()
}

/// Integrand of log u.
pub fn k_u(x: f64) -> f64 {
    (3.0 * x * x + 1.0).sqrt() / (std::f64::consts::SQRT_2 * (x * x + 1.0))
}

/// Integrand of log v (x > 1).
pub fn k_v(x: f64) -> f64 {
    (3.0 * x * x - 1.0).sqrt() / (std::f64::consts::SQRT_2 * (x * x - 1.0))
}

/// k_v(x) - 1/(2(x-1)), written without cancellation; equals 1/2 at x = 1.
fn k_v_regular(x: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    (5.0 * x + 3.0) / (s2 * (x + 1.0) * (2.0 * (3.0 * x * x - 1.0).sqrt() + s2 * (x + 1.0)))
}

pub fn a_closed() -> f64 {
    (2.0 * 3f64.sqrt()).powf(nu()) * (3f64.sqrt() - 2f64.sqrt())
}

/// log A = int_0^inf (k_u(x) - nu x/(x^2+1)) dx, split at 1 with x = 1/s on the tail.
pub fn log_a_quadrature() -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    let s3 = 3f64.sqrt();
    let head = integrate(
        |x| 1.0 / (s2 * (x * x + 1.0) * ((3.0 * x * x + 1.0).sqrt() + s3 * x)),
        0.0,
        1.0,
        1e-15,
    );
    let tail = integrate(
        |s| s / (s2 * (1.0 + s * s) * ((3.0 + s * s).sqrt() + s3)),
        0.0,
        1.0,
        1e-15,
    );
    head + tail
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HoloConstants {
    pub nu: f64,
    pub a_closed: f64,
    pub a_quadrature: f64,
}

impl HoloConstants {
    pub fn compute() -> Self {
        HoloConstants {
            nu: nu(),
            a_closed: a_closed(),
            a_quadrature: log_a_quadrature().exp(),
        }
    }
}

pub const X_MAX: f64 = 1e6;
const V_MATCH: f64 = 1e4;

fn graded_nodes(start: f64) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=20).map(|i| start + 0.05 * i as f64).collect();
    let mut x = start + 1.0;
    while x < X_MAX {
        x *= 1.05;
        nodes.push(x.min(X_MAX));
    }
    nodes
}

fn cumulative<F: Fn(f64) -> f64 + Copy>(nodes: &[f64], f: F) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in nodes.windows(2) {
        acc += integrate(f, w[0], w[1], 1e-15);
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialProfileU {
    pub nodes: Vec<f64>,
    pub log_values: Vec<f64>,
    pub log_a: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialProfileV {
    pub nodes: Vec<f64>,
    /// R(x) = int_1^x k_v_regular.
    pub regular: Vec<f64>,
    /// log v = c_norm + (1/2) ln(x-1) + R(x).
    pub c_norm: f64,
    pub log_a: f64,
}

fn node_eval<F: Fn(f64) -> f64>(nodes: &[f64], vals: &[f64], x: f64, f: F, gl: &GaussLegendre) -> f64 {
    let k = nodes.partition_point(|&n| n <= x).saturating_sub(1);
    vals[k] + gl.integrate(f, nodes[k], x)
}

fn gl10() -> &'static GaussLegendre {
    static GL: OnceLock<GaussLegendre> = OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(10))
}

impl RadialProfileU {
    pub fn build(log_a: f64) -> Self {
        let nodes = graded_nodes(0.0);
        let log_values = cumulative(&nodes, k_u);
        RadialProfileU { nodes, log_values, log_a }
    }

    pub fn log_u(&self, x: f64) -> f64 {
        if x < 0.0 {
            return -self.log_u(-x);
        }
        if x >= X_MAX {
            let nu = nu();
            return self.log_a + nu * x.ln() + 5.0 * nu / (12.0 * x * x);
        }
        node_eval(&self.nodes, &self.log_values, x, k_u, gl10())
    }

    pub fn u(&self, x: f64) -> f64 {
        self.log_u(x).exp()
    }
}

impl RadialProfileV {
    pub fn build(log_a: f64) -> Self {
        let nodes = graded_nodes(1.0);
        let regular = cumulative(&nodes, k_v_regular);
        let mut prof = RadialProfileV {
            nodes,
            regular,
            c_norm: 0.0,
            log_a,
        };
        let nu = nu();
        let x = V_MATCH;
        let target = log_a + nu * x.ln() - 5.0 * nu / (12.0 * x * x);
        prof.c_norm = target - 0.5 * (x - 1.0).ln() - prof.regular_at(x);
        prof
    }

    fn regular_at(&self, x: f64) -> f64 {
        node_eval(&self.nodes, &self.regular, x, k_v_regular, gl10())
    }

    /// log v for x > 1.
    pub fn log_v(&self, x: f64) -> f64 {
        if x >= X_MAX {
            let nu = nu();
            return self.log_a + nu * x.ln() - 5.0 * nu / (12.0 * x * x);
        }
        self.c_norm + 0.5 * (x - 1.0).ln() + self.regular_at(x)
    }

    pub fn v(&self, x: f64) -> Result<f64, ModelError> {
        if x < 1.0 || x.is_nan() {
            return Err(ModelError::Domain(format!("v needs x >= 1, got {x}")));
        }
        if x == 1.0 {
            return Ok(0.0);
        }
        Ok(self.log_v(x).exp())
    }
}

/// |Q| below this is treated as the null cone.
pub const NULL_CONE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HoloCoords {
    pub constants: HoloConstants,
    pub u: RadialProfileU,
    pub v: RadialProfileV,
}

impl HoloCoords {
    pub fn build() -> Self {
        let log_a = log_a_quadrature();
        HoloCoords {
            constants: HoloConstants::compute(),
            u: RadialProfileU::build(log_a),
            v: RadialProfileV::build(log_a),
        }
    }

    /// Process-wide instance; the tables are immutable once built.
    pub fn shared() -> &'static HoloCoords {
        static H: OnceLock<HoloCoords> = OnceLock::new();
        H.get_or_init(HoloCoords::build)
    }

    pub fn a(&self) -> f64 {
        self.u.log_a.exp()
    }

    pub fn u_eval(&self, x: f64) -> f64 {
        self.u.u(x)
    }

    pub fn v_eval(&self, x: f64) -> Result<f64, ModelError> {
        self.v.v(x)
    }

    /// log|F+| and arg F+ at a point given by (Q, x0, theta); None encodes the value 0.
    fn log_f_plus(&self, q: f64, x0: f64) -> Result<Option<f64>, ModelError> {
        let nu = nu();
        if q.abs() < NULL_CONE_TOL {
            if x0 > 0.0 {
                return Ok(Some(self.u.log_a + nu * x0.ln()));
            }
            if q < 0.0 {
                return Ok(None);
            }
            return Err(ModelError::Domain(format!("F+ undefined at Q={q}, x0={x0}")));
        }
        if q < 0.0 {
            let a = (-q).sqrt();
            return Ok(Some(nu * a.ln() + self.u.log_u(x0 / a)));
        }
        if x0 <= 0.0 {
            return Err(ModelError::Domain(format!("F+ undefined at Q={q} > 0 with x0={x0}")));
        }
        let b = q.sqrt();
        let y = x0 / b;
        if y <= 1.0 {
            return Ok(None);
        }
        Ok(Some(nu * b.ln() + self.v.log_v(y)))
    }

    pub fn f_plus_raw(&self, q: f64, x0: f64, theta: f64) -> Result<Complex64, ModelError> {
        Ok(match self.log_f_plus(q, x0)? {
            Some(l) => Complex64::from_polar(l.exp(), theta),
            None => Complex64::new(0.0, 0.0),
        })
    }

    /// F- is F+ composed with (x0, theta) -> (-x0, -theta).
    pub fn f_minus_raw(&self, q: f64, x0: f64, theta: f64) -> Result<Complex64, ModelError> {
        self.f_plus_raw(q, -x0, -theta)
    }

    pub fn f_plus(&self, c: &SingularCoords) -> Result<Complex64, ModelError> {
        let x = cartesian_from_coords(c)?;
        self.f_plus_raw(c.q, x.x0, c.theta)
    }

    pub fn f_minus(&self, c: &SingularCoords) -> Result<Complex64, ModelError> {
        let x = cartesian_from_coords(c)?;
        self.f_minus_raw(c.q, x.x0, c.theta)
    }

    pub fn f_plus_at(&self, x: &ModelPoint) -> Result<Complex64, ModelError> {
        self.f_plus_raw(x.q(), x.x0, x.theta())
    }

    pub fn f_minus_at(&self, x: &ModelPoint) -> Result<Complex64, ModelError> {
        self.f_minus_raw(x.q(), x.x0, x.theta())
    }

    /// gamma_+ F_+ with gamma_+ = 1 for x0 > 0 and gamma_eps(Q) otherwise.
    pub fn f_tilde_plus_at(&self, x: &ModelPoint, eps: f64, delta: f64) -> Result<Complex64, ModelError> {
        self.f_tilde(x, eps, delta, 1.0)
    }

    pub fn f_tilde_minus_at(&self, x: &ModelPoint, eps: f64, delta: f64) -> Result<Complex64, ModelError> {
        self.f_tilde(x, eps, delta, -1.0)
    }

    fn f_tilde(&self, x: &ModelPoint, eps: f64, delta: f64, side: f64) -> Result<Complex64, ModelError> {
        if x.norm3() <= 0.5 {
            return Err(ModelError::Region(format!("|x| = {} <= 0.5", x.norm3())));
        }
        let q = x.q();
        let gamma = if side * x.x0 > 0.0 {
            1.0
        } else {
            gamma_eps(q, eps, delta)
        };
        if gamma == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let f = if side > 0.0 {
            self.f_plus_at(x)?
        } else {
            self.f_minus_at(x)?
        };
        Ok(f * gamma)
    }

    pub fn f_tilde_plus(&self, c: &SingularCoords, eps: f64, delta: f64) -> Result<Complex64, ModelError> {
        self.f_tilde_plus_at(&cartesian_from_coords(c)?, eps, delta)
    }

    pub fn f_tilde_minus(&self, c: &SingularCoords, eps: f64, delta: f64) -> Result<Complex64, ModelError> {
        self.f_tilde_minus_at(&cartesian_from_coords(c)?, eps, delta)
    }
}

pub const DEFAULT_DELTA: f64 = 0.2;

/// 1 for Q <= -delta eps, 0 for Q >= -delta eps / 2.
pub fn gamma_eps(q: f64, eps: f64, delta: f64) -> f64 {
    Cutoff::new(-delta * eps, -0.5 * delta * eps).value(q)
}

/// |df/dH + i p^-2 r^-2 df/dtheta| by central differences at fixed (Q, t).
pub fn cr_residual_on_quadric<F>(f: F, c: &SingularCoords, h: f64) -> Result<f64, ModelError>
where
    F: Fn(&SingularCoords) -> Result<Complex64, ModelError>,
{
    cr_residual_connection(f, c, h, 0.0)
}

/// Same with the L1 connection -iH dtheta: |df/dH + i k (df/dtheta - iH f)|.
pub fn cr_residual_l1<F>(f: F, c: &SingularCoords, h: f64) -> Result<f64, ModelError>
where
    F: Fn(&SingularCoords) -> Result<Complex64, ModelError>,
{
    cr_residual_connection(f, c, h, 1.0)
}

fn cr_residual_connection<F>(f: F, c: &SingularCoords, h: f64, conn: f64) -> Result<f64, ModelError>
where
    F: Fn(&SingularCoords) -> Result<Complex64, ModelError>,
{
    let x = cartesian_from_coords(c)?;
    let k = 1.0 / (x.p().powi(2) * x.r2());
    let at = |dh: f64, dt: f64| {
        let mut cc = *c;
        cc.h += dh;
        cc.theta += dt;
        f(&cc)
    };
    let d_h = (at(h, 0.0)? - at(-h, 0.0)?) / (2.0 * h);
    let d_t = (at(0.0, h)? - at(0.0, -h)?) / (2.0 * h);
    let i = Complex64::new(0.0, 1.0);
    let f0 = f(c)?;
    Ok((d_h + i * k * (d_t - i * conn * c.h * f0)).norm())
}
