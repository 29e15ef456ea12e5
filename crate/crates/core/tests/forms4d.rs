use nalgebra::{Matrix4, Matrix6, Vector6};
use nslab_core::forms4d::*;
use nslab_core::local_model::{omega_model, ModelPoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn perm_sign(p: [usize; 4]) -> f64 {
    if p.iter().enumerate().any(|(i, a)| p[i + 1..].contains(a)) {
        return 0.0;
    }
    let mut inv = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 { 1.0 } else { -1.0 }
}

/// a∧b / vol by expanding over the basis with Levi-Civita signs.
fn wedge_oracle(a: &TwoForm, b: &TwoForm) -> f64 {
    let mut s = 0.0;
    for (i, &(p, q)) in PAIRS.iter().enumerate() {
        for (j, &(r, t)) in PAIRS.iter().enumerate() {
            s += a.0[i] * b.0[j] * perm_sign([p, q, r, t]);
        }
    }
    s
}

/// Star from α∧⋆β = ⟨α, β⟩_g √det g, solved against the wedge Gram matrix.
fn star_oracle(w: &TwoForm, g: &Matrix4<f64>) -> TwoForm {
    let gi = g.try_inverse().unwrap();
    let vol = g.determinant().sqrt();
    let gram = Matrix6::from_fn(|i, j| wedge_oracle(&TwoForm::basis(PAIRS[i].0, PAIRS[i].1), &TwoForm::basis(PAIRS[j].0, PAIRS[j].1)));
    let rhs = Vector6::from_fn(|i, _| {
        let (a, b) = PAIRS[i];
        PAIRS
            .iter()
            .enumerate()
            .map(|(j, &(c, d))| w.0[j] * (gi[(a, c)] * gi[(b, d)] - gi[(a, d)] * gi[(b, c)]))
            .sum::<f64>()
            * vol
    });
    let s = gram.try_inverse().unwrap() * rhs;
    TwoForm([s[0], s[1], s[2], s[3], s[4], s[5]])
}

fn random_pd(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let a = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    a.transpose() * a + Matrix4::identity() * 0.3
}

fn random_form(rng: &mut ChaCha8Rng) -> TwoForm {
    TwoForm(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)))
}

#[test]
fn wedge_examples_and_oracle() {
    let w = omega_model(&ModelPoint::new(1.0, 0.0, 0.0, 0.0));
    assert_eq!(liouville(&w), 4.0);
    assert_eq!(wedge_pair(&TwoForm::basis(0, 1), &TwoForm::basis(2, 3)), 1.0);
    assert_eq!(wedge_pair(&TwoForm::basis(0, 1), &TwoForm::basis(0, 2)), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let (a, b) = (random_form(&mut rng), random_form(&mut rng));
        assert!((wedge_pair(&a, &b) - wedge_oracle(&a, &b)).abs() < 1e-12);
    }
}

#[test]
fn star_matches_oracle_and_is_an_involution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..300 {
        let g = random_pd(&mut rng);
        let mt = MetricTensor::new(g).unwrap();
        let w = random_form(&mut rng);
        let s = hodge_star(&w, &mt);
        assert!(s.sub(&star_oracle(&w, &g)).norm() < 1e-9 * w.norm().max(1.0));
        assert!(hodge_star(&s, &mt).sub(&w).norm() < 1e-9 * w.norm());
        // ±1 eigenspaces of dimension 3
        let sm = star_matrix(&mt);
        for sign in [1.0, -1.0] {
            let sv = (sm - Matrix6::identity() * sign).singular_values();
            assert_eq!(sv.iter().filter(|&&v| v > 1e-8).count(), 3);
        }
    }
    for x in [[0.3, -1.0, 2.0, 5.0], [1.0, 0.0, 0.0, 0.0], [-2.0, 0.5, 0.1, 0.0]] {
        let w = omega_model(&ModelPoint::from_vec(&x));
        assert!(hodge_star(&w, &MetricTensor::euclidean()).sub(&w).norm() < 1e-14);
    }
    let bad = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
    assert!(MetricTensor::new(bad).is_err());
}

#[test]
fn wedge_signature_three_three() {
    let ev = nalgebra::SymmetricEigen::new(wedge_gram()).eigenvalues;
    assert_eq!(ev.iter().filter(|&&l| l > 0.0).count(), 3);
    assert_eq!(ev.iter().filter(|&&l| l < 0.0).count(), 3);
}

fn test_field(x: &Vec4) -> TwoForm {
    let mut w = TwoForm::zero();
    w.set(1, 2, (x[0] + 2.0 * x[3]).sin());
    w.set(0, 3, x[1].exp() * x[2]);
    w
}

fn test_field_d(x: &Vec4) -> [f64; 4] {
    let c = (x[0] + 2.0 * x[3]).cos();
    // (012), (013), (023), (123)
    [c, -x[1].exp() * x[2], -x[1].exp(), 2.0 * c]
}

#[test]
fn exterior_derivative_is_second_order() {
    let x = [0.3, -0.4, 0.7, 0.2];
    let exact = test_field_d(&x);
    let err = |h: f64| {
        let d = exterior_derivative_fd(test_field, &x, h);
        d.0.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let ratio = err(1e-2) / err(5e-3);
    assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let x: Vec4 = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
        let d = exterior_derivative_fd(|y| omega_model(&ModelPoint::from_vec(y)), &x, 1e-4);
        assert!(d.0.iter().all(|c| c.abs() < 1e-8));
    }
}

#[test]
fn near_symplectic_classification() {
    let om = |y: &Vec4| omega_model(&ModelPoint::from_vec(y));
    assert_eq!(near_symplectic_check(om, &[1.0, 0.0, 0.0, 0.0]), Diagnosis::Symplectic);
    assert_eq!(near_symplectic_check(om, &[0.0, 0.0, 0.0, 2.5]), Diagnosis::TransverseZero);
    assert_eq!(near_symplectic_check(|_| TwoForm::basis(0, 1), &[0.0; 4]), Diagnosis::Violation);
    // vanishing to second order is not transverse
    let quad = |y: &Vec4| omega_model(&ModelPoint::from_vec(y)).scale(y[0]);
    assert_eq!(near_symplectic_check(quad, &[0.0, 0.0, 0.0, 0.0]), Diagnosis::Violation);
}

#[test]
fn metric_from_form_self_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut n = 0;
    while n < 1000 {
        let w = random_form(&mut rng);
        if wedge_pair(&w, &w) < 0.05 * w.norm().powi(2) {
            continue;
        }
        let g = metric_from_form(&w).unwrap();
        assert!((g.det() - 1.0).abs() < 1e-9);
        assert!(star_oracle(&w, &g.0).sub(&w).norm() < 1e-10 * w.norm());
        n += 1;
    }
    let std = TwoForm::basis(0, 1).add(&TwoForm::basis(2, 3));
    assert!((metric_from_form(&std).unwrap().0 - Matrix4::identity()).abs().max() < 1e-12);
    let g2 = metric_from_form(&std.scale(2.0)).unwrap();
    assert!((g2.0 - Matrix4::identity()).abs().max() < 1e-12);
    let w = omega_model(&ModelPoint::new(1.0, 1.0, 0.0, 0.0));
    let g = metric_from_form(&w).unwrap();
    assert!(hodge_star(&w, &g).sub(&w).norm() < 1e-10);
    assert!(metric_from_form(&TwoForm::basis(0, 1)).is_err());
    assert!(metric_from_form(&TwoForm::basis(0, 1).sub(&TwoForm::basis(2, 3))).is_err());
}

proptest! {
    #[test]
    fn wedge_is_symmetric_bilinear(a in prop::array::uniform6(-5.0f64..5.0), b in prop::array::uniform6(-5.0f64..5.0), s in -3.0f64..3.0) {
        let (a, b) = (TwoForm(a), TwoForm(b));
        prop_assert!((wedge_pair(&a, &b) - wedge_pair(&b, &a)).abs() < 1e-12);
        prop_assert!((wedge_pair(&a.scale(s), &b) - s * wedge_pair(&a, &b)).abs() < 1e-10);
    }

    #[test]
    fn star_involution_random_metric(seed in any::<u64>(), w in prop::array::uniform6(-5.0f64..5.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = MetricTensor::new(random_pd(&mut rng)).unwrap();
        let w = TwoForm(w);
        prop_assert!(hodge_star(&hodge_star(&w, &g), &g).sub(&w).norm() < 1e-9 * w.norm().max(1.0));
    }
}
