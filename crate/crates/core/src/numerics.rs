//! Small numerical kernels shared by the geometry modules: smoothstep cutoffs,
//! Gauss-Legendre / Gauss-Kronrod quadrature, RK4, central differences,
//! golden-section search.

use serde::{Deserialize, Serialize};

/// 6s^5 - 15s^4 + 10s^3 clamped to [0,1].
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

pub fn smoothstep_d1(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        30.0 * s * s * (1.0 - s) * (1.0 - s)
    }
}

pub fn smoothstep_d2(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
    }
}

/// Antiderivative of the smoothstep on [0,1], vanishing at 0.
pub fn smoothstep_integral(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    let s4 = s * s * s * s;
    s4 * (2.5 + s * (-3.0 + s))
}

/// Decreasing cutoff: 1 for s <= inner, 0 for s >= outer, smoothstep between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(outer > inner, "cutoff needs outer > inner");
        Cutoff { inner, outer }
    }

    /// The "standard" cutoff: 1 on [0,1], 0 beyond 2.
    pub fn standard() -> Self {
        Cutoff::new(1.0, 2.0)
    }

    pub fn value(&self, s: f64) -> f64 {
        1.0 - smoothstep((s - self.inner) / (self.outer - self.inner))
    }

    pub fn deriv(&self, s: f64) -> f64 {
        let w = self.outer - self.inner;
        -smoothstep_d1((s - self.inner) / w) / w
    }
}

/// Gauss-Legendre rule on [-1,1], nodes by Newton on P_n.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 0 { 1.0 } else { p1 };
                dp = nf * (x * pn - p0) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) with absolute-or-relative tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let width = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        let local_tol = tol * ((hi - lo).abs() / width).max(1e-3);
        if err <= local_tol.max(1e-15 * val.abs()) || depth > 48 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// One classical RK4 step for y' = f(t, y) on a fixed-size state.
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let add = |y: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += s * k[i];
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = f(t + h, &add(y, &k3, h));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrate with fixed RK4 steps, landing exactly on t1.
pub fn rk4_integrate<const N: usize, F>(f: F, t0: f64, y0: [f64; N], t1: f64, h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let n = ((t1 - t0) / h).abs().ceil().max(1.0) as usize;
    let step = (t1 - t0) / n as f64;
    let mut y = y0;
    for i in 0..n {
        y = rk4_step(&f, t0 + i as f64 * step, &y, step);
    }
    y
}

pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Golden-section minimisation on [a,b]; returns (argmin, min).
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Scan [a,b] on n points, then refine the best bracket by golden section.
pub fn scan_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize, tol: f64) -> (f64, f64) {
    let step = (b - a) / n as f64;
    let mut best = (a, f(a));
    for i in 1..=n {
        let x = a + i as f64 * step;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let lo = (best.0 - step).max(a);
    let hi = (best.0 + step).min(b);
    let refined = golden_min(&f, lo, hi, tol);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_ends_and_integral() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
        assert!((smoothstep_integral(1.0) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for &s in &[0.1, 0.37, 0.8] {
            let fd = (smoothstep(s + h) - smoothstep(s - h)) / (2.0 * h);
            assert!((fd - smoothstep_d1(s)).abs() < 1e-8);
            let fd2 = (smoothstep_d1(s + h) - smoothstep_d1(s - h)) / (2.0 * h);
            assert!((fd2 - smoothstep_d2(s)).abs() < 1e-6);
            let fi = (smoothstep_integral(s + h) - smoothstep_integral(s - h)) / (2.0 * h);
            assert!((fi - smoothstep(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn gl_exact_on_polynomials() {
        let gl = GaussLegendre::new(10);
        let v = gl.integrate(|x| x.powi(19) + x.powi(18), -1.0, 1.0);
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_quadrature() {
        let v = integrate(|x| 1.0 / (1.0 + x * x), 0.0, 1e3, 1e-13);
        assert!((v - 1e3f64.atan()).abs() < 1e-11);
        let w = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((w - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn rk4_exponential() {
        let y = rk4_integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1.0, 1e-3);
        assert!((y[0] - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn golden_finds_parabola_min() {
        let (x, v) = scan_min(|x| (x - 0.3) * (x - 0.3) + 1.0, -2.0, 2.0, 50, 1e-10);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }
}
