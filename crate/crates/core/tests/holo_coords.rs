use nslab_core::holo_coords::*;
use nslab_core::local_model::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h() -> &'static HoloCoords {
    HoloCoords::shared()
}

/// Composite Simpson on [0, x] with n panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let dx = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * dx);
    }
    s * dx / 3.0
}

fn ku_oracle(x: f64) -> f64 {
    (3.0 * x * x + 1.0).sqrt() / (2f64.sqrt() * (x * x + 1.0))
}

/// d/dx by a five-point stencil.
fn d5<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

#[test]
fn asymptotic_constant() {
    let c = HoloConstants::compute();
    assert_eq!(c.nu, 1.5f64.sqrt());
    let closed = (2.0 * 3f64.sqrt()).powf(1.5f64.sqrt()) * (3f64.sqrt() - 2f64.sqrt());
    assert!((c.a_closed - closed).abs() < 1e-15);
    assert!((c.a_quadrature - c.a_closed).abs() < 1e-9);
    let back: HoloConstants = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back.a_closed, c.a_closed);
    assert!((h().a() - c.a_closed).abs() < 1e-9);
}

#[test]
fn u_profile() {
    assert_eq!(h().u_eval(0.0), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..40 {
        let x: f64 = rng.gen_range(0.0..60.0);
        let want = simpson(ku_oracle, 0.0, x, 40_000).exp();
        assert!((h().u_eval(x) - want).abs() < 1e-9 * want, "x = {x}");
        assert!((h().u_eval(x) * h().u_eval(-x) - 1.0).abs() < 1e-10);
    }
    let big = 1e4f64;
    assert!((h().u_eval(big) / big.powf(nu()) - a_closed()).abs() < 1e-3);
    let mut prev = 0.0;
    for i in 0..2000 {
        let x = -20.0 + 0.02 * i as f64;
        let u = h().u_eval(x);
        assert!(u > prev);
        prev = u;
    }
    // the defining integrand is p^2/r^2 on the quadric Q = -1
    for i in 0..50 {
        let x0 = -5.0 + 0.2 * i as f64;
        let r = (2.0 * (x0 * x0 + 1.0)).sqrt();
        let x = ModelPoint::new(x0, r, 0.0, 0.0);
        assert!((x.q() + 1.0).abs() < 1e-12);
        assert!((k_u(x0) - x.p().powi(2) / x.r2()).abs() < 1e-14);
        let du = d5(|y| h().u_eval(y), x0, 1e-3);
        assert!((du - x.p().powi(2) / x.r2() * h().u_eval(x0)).abs() < 1e-9 * du);
    }
}

#[test]
fn v_profile() {
    assert_eq!(h().v_eval(1.0).unwrap(), 0.0);
    assert!(h().v_eval(0.5).is_err());
    assert!(h().v_eval(f64::NAN).is_err());
    // square-root onset: slope of log v against log (x - 1)
    let hs = [1e-6f64, 1e-5, 1e-4];
    let pts: Vec<(f64, f64)> = hs.iter().map(|&d| (d.ln(), h().v_eval(1.0 + d).unwrap().ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.5).abs() < 0.01, "slope {slope}");
    // ODE (log v)' = sqrt(3x^2 - 1) / (sqrt 2 (x^2 - 1))
    for k in -5..=5 {
        let x = 1.0 + 10f64.powi(k);
        let d = 1e-3 * (x - 1.0);
        let got = d5(|y| h().v_eval(y).unwrap().ln(), x, d);
        let want = (3.0 * x * x - 1.0).sqrt() / (2f64.sqrt() * (x * x - 1.0));
        assert!(((got - want) / want).abs() < 1e-8, "x = {x}: {got} vs {want}");
    }
    let r = h().v_eval(1e3).unwrap() / 1e3f64.powf(nu());
    assert!((r - a_closed()).abs() < 1e-2);
    let mut prev = 0.0;
    for i in 1..2000 {
        let v = h().v_eval(1.0 + 0.01 * i as f64).unwrap();
        assert!(v > prev);
        prev = v;
    }
}

fn point_with_q(rng: &mut ChaCha8Rng, qr: (f64, f64), xr: (f64, f64)) -> ModelPoint {
    let q = rng.gen_range(qr.0..qr.1);
    let x0 = rng.gen_range(xr.0..xr.1);
    let r = (2.0 * (x0 * x0 - q)).sqrt();
    let th: f64 = rng.gen_range(-3.0..3.0);
    ModelPoint::new(x0, r * th.cos(), r * th.sin(), rng.gen_range(-1.0..1.0))
}

#[test]
fn f_plus_and_minus() {
    let f = h().f_plus(&SingularCoords::new(-1.0, 0.0, 0.0, 0.0)).unwrap();
    assert!((f - 1.0).norm() < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let x = point_with_q(&mut rng, (-20.0, -0.01), (-8.0, 8.0));
        let prod = h().f_plus_at(&x).unwrap() * h().f_minus_at(&x).unwrap();
        let want = (-x.q()).powf(nu());
        assert!((prod - want).norm() < 1e-9 * want);
        // modulus and phase from the definition
        let a = (-x.q()).sqrt();
        let fp = h().f_plus_at(&x).unwrap();
        assert!((fp.norm() - a.powf(nu()) * h().u_eval(x.x0 / a)).abs() < 1e-12 * fp.norm());
        assert!((fp / fp.norm() - Complex64::from_polar(1.0, x.theta())).norm() < 1e-12);
    }
    // null cone from both sides at x0 = 2
    let target = a_closed() * 2f64.powf(nu());
    for q in [-1e-6, 1e-6, -1e-7] {
        let v = h().f_plus_raw(q, 2.0, 0.0).unwrap();
        assert!((v.re - target).abs() < 1e-3 * target, "q = {q}");
    }
    assert!((h().f_plus_raw(0.0, 2.0, 0.0).unwrap().re - target).abs() < 1e-9);
    assert_eq!(h().f_plus_raw(-1e-12, -2.0, 0.0).unwrap(), Complex64::new(0.0, 0.0));
    assert!(h().f_plus_raw(-1e-9, -2.0, 0.0).unwrap().norm() < 1e-12);
    assert!(h().f_plus_raw(1.0, -2.0, 0.0).is_err());
    // inner boundary x0 = b of the Q > 0 component
    assert_eq!(h().f_plus_raw(1.0, 1.0, 0.0).unwrap(), Complex64::new(0.0, 0.0));
}

#[test]
fn homogeneity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = point_with_q(&mut rng, (-5.0, 5.0), (2.5, 6.0));
        let l: f64 = rng.gen_range(0.2..5.0);
        let y = ModelPoint::new(l * x.x0, l * x.x1, l * x.x2, x.t);
        let (a, b) = (h().f_plus_at(&x).unwrap(), h().f_plus_at(&y).unwrap());
        assert!((b - a * l.powf(nu())).norm() < 1e-9 * b.norm());
    }
}

#[test]
fn singular_coordinate_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let c = SingularCoords::new(rng.gen_range(-3.0..-0.1), rng.gen_range(-5.0..5.0), 0.3, 0.0);
        let x = cartesian_from_coords(&c).unwrap();
        let d = 1e-4;
        let at = |dh: f64| cartesian_from_coords(&SingularCoords::new(c.q, c.h + dh, c.theta, 0.0)).unwrap();
        let dx0 = (at(d).x0 - at(-d).x0) / (2.0 * d);
        let dp = (at(d).p() - at(-d).p()) / (2.0 * d);
        assert!((dx0 - x.p().powi(-4)).abs() < 1e-7);
        let want = 3.0 * x.x0 / x.p().powi(7);
        assert!((dp - want).abs() < 1e-6 * want.abs().max(1.0), "{c:?}: {dp} vs {want}");
    }
}

#[test]
fn cauchy_riemann_on_quadrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fp = |c: &SingularCoords| h().f_plus(c);
    let sq = |c: &SingularCoords| h().f_plus(c).map(|z| z * z);
    for _ in 0..100 {
        let c = SingularCoords::new(-1.0, rng.gen_range(-4.0..4.0), rng.gen_range(-3.0..3.0), 0.0);
        let scale = h().f_plus(&c).unwrap().norm().max(1.0);
        assert!(cr_residual_on_quadric(fp, &c, 1e-4).unwrap() < 1e-6 * scale);
        assert!(cr_residual_on_quadric(sq, &c, 1e-4).unwrap() < 1e-6 * scale * scale);
        let cm = |c: &SingularCoords| h().f_minus(c);
        assert!(cr_residual_on_quadric(cm, &c, 1e-4).unwrap() < 1e-6 * h().f_minus(&c).unwrap().norm().max(1.0));
        // not holomorphic: theta
        let x = cartesian_from_coords(&c).unwrap();
        let res = cr_residual_on_quadric(|c| Ok(Complex64::new(c.theta, 0.0)), &c, 1e-4).unwrap();
        assert!((res - 1.0 / (x.p().powi(2) * x.r2())).abs() < 1e-8);
    }
    // the x0 > b component of Q = 1
    for _ in 0..50 {
        let c = SingularCoords::new(1.0, rng.gen_range(0.5..20.0), rng.gen_range(-3.0..3.0), 0.0);
        let x = cartesian_from_coords(&c).unwrap();
        if x.x0 < 1.2 {
            continue;
        }
        let scale = h().f_plus(&c).unwrap().norm().max(1.0);
        assert!(cr_residual_on_quadric(fp, &c, 1e-5).unwrap() < 1e-6 * scale);
    }
}

#[test]
fn smoothed_coordinates() {
    let (eps, delta) = (0.05, DEFAULT_DELTA);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let x = point_with_q(&mut rng, (-5.0, 0.3), (0.6, 5.0));
        assert_eq!(h().f_tilde_plus_at(&x, eps, delta).unwrap(), h().f_plus_at(&x).unwrap());
        let y = ModelPoint::new(-x.x0, -x.x1, -x.x2, x.t);
        assert_eq!(h().f_tilde_minus_at(&y, eps, delta).unwrap(), h().f_minus_at(&y).unwrap());
    }
    // x0 < 0: full below -delta eps, zero above -delta eps / 2, monotone in between
    let x0 = -1.0;
    let mut prev = f64::INFINITY;
    for i in 0..=400 {
        let q = -2.0 * delta * eps + 2.0 * delta * eps * i as f64 / 400.0;
        let r = (2.0 * (x0 * x0 - q)).sqrt();
        let x = ModelPoint::new(x0, r, 0.0, 0.0);
        let v = h().f_tilde_plus_at(&x, eps, delta).unwrap().norm();
        assert!(v <= prev);
        prev = v;
        if q <= -delta * eps {
            assert_eq!(v, h().f_plus_at(&x).unwrap().norm());
        }
        if q >= -0.5 * delta * eps {
            assert_eq!(v, 0.0);
        }
    }
    assert!(h().f_tilde_plus_at(&ModelPoint::new(0.3, 0.2, 0.1, 0.0), eps, delta).is_err());
    assert_eq!(gamma_eps(-delta * eps, eps, delta), 1.0);
    assert_eq!(gamma_eps(-0.5 * delta * eps, eps, delta), 0.0);
}

proptest! {
    #[test]
    fn u_reciprocal(x in -1e5f64..1e5) {
        prop_assert!((h().u_eval(x) * h().u_eval(-x) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn f_product(q in -10.0f64..-1e-3, x0 in -10.0f64..10.0, th in -3.0f64..3.0) {
        let p = h().f_plus_raw(q, x0, th).unwrap() * h().f_minus_raw(q, x0, th).unwrap();
        prop_assert!((p - (-q).powf(nu())).norm() < 1e-9 * (-q).powf(nu()));
    }

    #[test]
    fn cr_prop(hh in -3.0f64..3.0, th in -3.0f64..3.0, q in -4.0f64..-0.2) {
        let c = SingularCoords::new(q, hh, th, 0.0);
        let scale = h().f_plus(&c).unwrap().norm().max(1.0);
        prop_assert!(cr_residual_on_quadric(|c| h().f_plus(c), &c, 1e-4).unwrap() < 1e-6 * scale);
    }
}
