use nalgebra::{Matrix4, Vector4};
use nslab_core::forms4d::*;
use nslab_core::local_model::*;
use nslab_core::numerics::Cutoff;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_point(rng: &mut ChaCha8Rng, s: f64) -> ModelPoint {
    ModelPoint::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-10.0..10.0))
}

/// dQ∧dt + dH∧dθ from hand-computed partials.
fn omega_from_coords(x: &ModelPoint) -> TwoForm {
    let (x0, x1, x2) = (x.x0, x.x1, x.x2);
    let r2 = x1 * x1 + x2 * x2;
    let dq = [2.0 * x0, -x1, -x2, 0.0];
    let dt = [0.0, 0.0, 0.0, 1.0];
    let dh = [r2, 2.0 * x0 * x1, 2.0 * x0 * x2, 0.0];
    let dth = [0.0, -x2 / r2, x1 / r2, 0.0];
    TwoForm::wedge1(&dq, &dt).add(&TwoForm::wedge1(&dh, &dth))
}

#[test]
fn omega_in_singular_coordinates() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut n = 0;
    while n < 100 {
        let x = rand_point(&mut rng, 4.0);
        if x.r() <= 0.1 {
            continue;
        }
        assert!(omega_model(&x).sub(&omega_from_coords(&x)).norm() < 1e-10);
        n += 1;
    }
    assert_eq!(omega_model(&ModelPoint::new(0.0, 0.0, 0.0, 7.0)), TwoForm::zero());
    assert_eq!(liouville(&omega_model(&ModelPoint::new(0.0, 1.0, 0.0, 0.0))), 1.0);
}

#[test]
fn liouville_density_is_p4() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let x = rand_point(&mut rng, 5.0);
        let w = omega_model(&x);
        assert!((liouville(&w) - x.p4()).abs() < 1e-12 * x.p4().max(1.0));
        assert!((x.p4() - (6.0 * x.x0 * x.x0 - 2.0 * x.q())).abs() < 1e-12 * x.p4().max(1.0));
    }
}

#[test]
fn coordinate_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..10_000 {
        let s = [0.01, 1.0, 30.0][i % 3];
        let x = rand_point(&mut rng, s);
        let c = coords_from_cartesian(&x);
        let y = cartesian_from_coords(&c).unwrap();
        let d = ((x.x0 - y.x0).powi(2) + (x.x1 - y.x1).powi(2) + (x.x2 - y.x2).powi(2)).sqrt();
        assert!(d < 1e-10 * x.norm3().max(1.0), "{x:?} -> {c:?} -> {y:?}");
        assert_eq!(x.t, y.t);
    }
    // out of image: Q > 0, H = 0 is fine, but r^2 < 0 cannot happen on a real root; NaN is rejected
    assert!(cartesian_from_coords(&SingularCoords::new(f64::INFINITY, 1.0, 0.0, 0.0)).is_err());
}

#[test]
fn psi_profile_properties() {
    let p = psi_build(0.01).unwrap();
    assert_eq!(p.psi(1.0), 0.01);
    assert_eq!(p.psi(10.0), 10.0);
    let mut consts = Vec::new();
    for eps in [0.1, 0.05, 0.02] {
        let prof = psi_build(eps).unwrap();
        let root = eps.powf(-0.5);
        for i in 0..=200 {
            let q = 1.0 + (0.5 * root - 1.0) * i as f64 / 200.0;
            assert_eq!(prof.psi(q), eps);
            let q = 0.9 * root + i as f64 * 0.01;
            assert_eq!(prof.psi(q), q);
        }
        let c = prof.constants(20_000);
        assert!(c.monotone, "eps {eps}");
        // derivative consistency with a central difference, away from the splice points
        for i in 1..100 {
            let q = 0.5 * root + 0.4 * root * i as f64 / 100.0;
            let h = 1e-6;
            let fd = (prof.psi(q + h) - prof.psi(q - h)) / (2.0 * h);
            let (_, d1, _) = prof.eval(q);
            assert!((fd - d1).abs() < 1e-5 * d1.abs().max(1.0), "eps {eps} p {q}: {fd} vs {d1}");
        }
        consts.push(c);
    }
    let ratio = |f: fn(&PsiConstants) -> f64| {
        let v: Vec<f64> = consts.iter().map(f).collect();
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    assert!(ratio(|c| c.c0_linear) < 3.0);
    assert!(ratio(|c| c.c0_quartic) < 3.0);
    assert!(ratio(|c| c.c1) < 3.0, "{consts:?}");
    assert!(psi_build(0.3).is_err());
    let js = serde_json::to_string(&psi_build(0.1).unwrap()).unwrap();
    let back: PsiProfile = serde_json::from_str(&js).unwrap();
    assert_eq!(back.psi(2.0), psi_build(0.1).unwrap().psi(2.0));
}

fn admissible(rng: &mut ChaCha8Rng, r_max: f64) -> ModelPoint {
    loop {
        let x = rand_point(rng, r_max);
        if x.p() >= 1.0 && x.r() > 0.05 {
            return x;
        }
    }
}

#[test]
fn almost_complex_structure() {
    let geom = ModelGeometry::new(0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let x = admissible(&mut rng, 12.0);
        let j = acs_J(&geom, &x).unwrap();
        assert!((j * j + Matrix4::identity()).abs().max() < 1e-9 * j.abs().max().powi(2).max(1.0));
        // quadric tangent planes {dQ = dt = 0} are preserved
        let f = singular_frame(&x);
        let d = singular_jacobian(&x);
        for col in [2, 3] {
            let v = j * f.column(col);
            let w = d * v;
            assert!(w[0].abs() < 1e-9 * v.norm().max(1.0) && w[1].abs() < 1e-9 * v.norm().max(1.0));
        }
    }
    let eps = geom.epsilon();
    for _ in 0..200 {
        let x = admissible(&mut rng, 2.0);
        if x.p() > 0.5 / eps.sqrt() {
            continue;
        }
        let f = singular_frame(&x);
        let jq = acs_J(&geom, &x).unwrap() * f.column(0);
        assert!((jq - f.column(1) / (eps * eps)).norm() < 1e-8 * jq.norm());
    }
    for _ in 0..200 {
        let x = admissible(&mut rng, 12.0);
        if x.p() < 0.9 / eps.sqrt() {
            continue;
        }
        assert!((acs_J(&geom, &x).unwrap() - j0_standard(&x)).abs().max() < 1e-9);
    }
    assert!(acs_J(&geom, &ModelPoint::new(0.1, 0.1, 0.0, 0.0)).is_err());
    assert!(acs_J(&geom, &ModelPoint::new(2.0, 0.0, 0.0, 0.0)).is_err());
}

#[test]
fn metric_from_singular_frame() {
    let geom = ModelGeometry::new(0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let x = admissible(&mut rng, 12.0);
        let g = metric_g(&geom, &x).unwrap();
        let psi = geom.psi_at(&x);
        let et = Vector4::new(0.0, 0.0, 0.0, 1.0);
        assert!(((et.transpose() * g.0 * et)[0] - psi * psi).abs() < 1e-10 * psi * psi);
        let f = singular_frame(&x);
        let gqt = (f.column(0).transpose() * g.0 * f.column(1))[0];
        assert!(gqt.abs() < 1e-8 * g.0.abs().max());
        assert!(g.eigenvalues().iter().all(|&l| l > 0.0));
        let c = compat_metric(&geom, &x).unwrap();
        assert!((c - g.0).abs().max() < 1e-8 * g.0.abs().max());
    }
}

#[test]
fn step1_form_properties() {
    let chi = Cutoff::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let x = ModelPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0));
        let d = exterior_derivative_fd(|y| step1_form(&ModelPoint::from_vec(y), &chi), &x.to_vec(), 1e-4);
        let m = d.0.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        assert!(m < 1e-6, "d = {m} at {x:?}");
        if x.r() > 0.1 {
            // on the (Q, t) fibres: dH∧dθ weighted by chi
            let f = singular_frame(&x);
            let u: Vec4 = std::array::from_fn(|i| f[(i, 2)]);
            let v: Vec4 = std::array::from_fn(|i| f[(i, 3)]);
            let val = step1_form(&x, &chi).eval(&u, &v);
            assert!((val - chi.value(x.t.abs())).abs() < 1e-10);
            assert!(val >= -1e-12);
        }
    }
    assert_eq!(step1_form(&ModelPoint::new(0.0, 0.0, 0.0, 0.3), &chi), TwoForm::zero());
}

#[test]
fn radial_embedding_pulls_back_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let z = [Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)), Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))];
        if z[0].norm_sqr() + z[1].norm_sqr() < 0.1 {
            continue;
        }
        let pb = radial_pullback_fd(&z, 1.0, 1e-5).unwrap();
        assert!(pb.sub(&radial_target_form(&z, 1.0)).norm() < 1e-7);
        let w = radial_embedding(&z, 1.0).unwrap();
        let m = w[0].norm_sqr() + w[1].norm_sqr();
        assert!((m - 1.0 - z[0].norm_sqr() - z[1].norm_sqr()).abs() < 1e-12 * m);
    }
    let z = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
    let w = radial_embedding(&z, 3.0).unwrap();
    assert!(((w[0].norm_sqr() + w[1].norm_sqr()).sqrt() - 2.0).abs() < 1e-14);
    assert_eq!(radial_embedding(&z, 0.0).unwrap(), z);
}

#[test]
fn holonomy_on_gamma() {
    for eps in [0.1, 0.05, 0.02] {
        assert!((l2_holonomy(eps, 0.0, 4000) + 1.0).norm() < 1e-10);
    }
}

proptest! {
    #[test]
    fn roundtrip_prop(x0 in -20.0f64..20.0, x1 in -20.0f64..20.0, x2 in -20.0f64..20.0) {
        let x = ModelPoint::new(x0, x1, x2, 1.0);
        let y = cartesian_from_coords(&coords_from_cartesian(&x)).unwrap();
        prop_assert!((x.x0 - y.x0).abs() + (x.x1 - y.x1).abs() + (x.x2 - y.x2).abs() < 1e-10 * x.norm3().max(1.0));
    }

    #[test]
    fn j_squares_to_minus_one(x0 in -8.0f64..8.0, x1 in -8.0f64..8.0, x2 in -8.0f64..8.0, eps in prop::sample::select(vec![0.1, 0.05, 0.02])) {
        let x = ModelPoint::new(x0, x1, x2, 0.0);
        prop_assume!(x.p() >= 1.0 && x.r() > 0.05);
        let j = acs_unchecked(psi_build(eps).unwrap().psi(x.p()), &x);
        prop_assert!((j * j + Matrix4::identity()).abs().max() < 1e-9 * j.abs().max().powi(2).max(1.0));
    }
}
