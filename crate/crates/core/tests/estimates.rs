use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::Vector4;
use nslab_core::estimates::*;
use nslab_core::local_model::{cartesian_from_coords, metric_unchecked, ModelGeometry, ModelPoint, Sheet, SingularCoords};
use nslab_core::numerics::integrate;
use nslab_core::sections::{wrap_angle, SectionContext};
use proptest::prelude::*;

struct Run {
    ctx: SectionContext,
    cs: CentreSet,
    stats: CoverStats,
}

fn run(eps: f64) -> &'static Run {
    static A: OnceLock<Run> = OnceLock::new();
    static B: OnceLock<Run> = OnceLock::new();
    let cell = if eps == 0.1 { &A } else { &B };
    cell.get_or_init(|| {
        let ctx = SectionContext::new(eps).unwrap();
        let (cs, stats) = build_cover(&ctx.geom, CoverRegion::default(), 10_000, 11, 20).unwrap();
        Run { ctx, cs, stats }
    })
}

#[test]
fn arc_tables_match_direct_quadrature() {
    let t = ArcTables::shared();
    for &(q, x0) in &[(-4.0f64, 3.0f64), (-1.0, -0.7), (-0.01, 2.0), (0.0, 1.5), (2.0, 3.0), (9.0, -4.0), (1e-6, 0.5)] {
        // arc length = integral of p^3 / r dx0; on Q > 0 substitute x0 = sqrt(Q) + w^2,
        // which turns dx0 / r into 2 dw / sqrt(2 (x0 + sqrt Q))
        let p3 = |x: f64| (6.0 * x * x - 2.0 * q).powf(0.75);
        let direct = if q > 0.0 {
            let a = q.sqrt();
            let w1 = (x0.abs() - a).sqrt();
            x0.signum() * integrate(|w| 2.0 * p3(a + w * w) / (2.0 * (2.0 * a + w * w)).sqrt(), 0.0, w1, 1e-13)
        } else {
            let lo = if q == 0.0 { 1e-300 * x0.signum() } else { 0.0 };
            integrate(|x| p3(x) / (2.0 * (x * x - q)).sqrt(), lo, x0, 1e-13)
        };
        let a = t.arc(q, x0);
        assert!((a - direct).abs() < 1e-8 * direct.abs().max(1.0), "Q {q} x0 {x0}: {a} vs {direct}");
        let back = t.x0_at(q, a);
        assert!((back - x0).abs() < 1e-9 * x0.abs().max(1.0), "inverse at Q {q}: {back} vs {x0}");
    }
}

/// g-length of a path given in singular coordinates, by fine polyline in Cartesian space.
fn path_length(geom: &ModelGeometry, f: impl Fn(f64) -> SingularCoords, n: usize) -> f64 {
    let pt = |s: f64| Vector4::from(cartesian_from_coords(&f(s)).unwrap().to_vec());
    let mut total = 0.0;
    for i in 0..n {
        let (a, b) = (pt(i as f64 / n as f64), pt((i + 1) as f64 / n as f64));
        let m = (a + b) * 0.5;
        let mid = ModelPoint::new(m[0], m[1], m[2], m[3]);
        let g = metric_unchecked(geom.psi_at(&mid), &mid);
        let d = b - a;
        total += (d.transpose() * g * d)[(0, 0)].max(0.0).sqrt();
    }
    total
}

#[test]
fn cover_distances_agree_with_metric_oracle() {
    let r = run(0.1);
    let cs = &r.cs;
    let geom = &r.ctx.geom;
    let mut checked = 0;
    for x in cs.samples(150, 10.0, 5) {
        let near = cs.near_centres(&x, 0.1);
        let (id, bound) = near.iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).copied().unwrap();
        let nd = cs.node(id.k, id.seg, id.j);
        if x.r() < 0.2 || nd.r < 0.2 {
            continue;
        }
        let qk = cs.levels[id.k].q;
        let sheet = if x.x0 < 0.0 { Sheet::Minus } else { Sheet::Plus };
        let (q, h, th, t) = (x.q(), x.h(), x.theta(), x.t);
        let th_c = 2.0 * PI * id.m as f64 / cs.orbit_size(&nd) as f64;
        let t_c = id.nu as f64 / (cs.m_trans as f64 * nd.psi);
        let dth = wrap_angle(th_c - th);
        let c = |q, h, th, t| SingularCoords::new(q, h, th, t).with_sheet(sheet);
        let legs = path_length(geom, |s| c(q + s * (qk - q), h, th, t), 200)
            + path_length(geom, |s| c(qk, h + s * (nd.h - h), th, t), 400)
            + path_length(geom, |s| c(qk, nd.h, th + s * dth, t), 200)
            + path_length(geom, |s| c(qk, nd.h, th + dth, t + s * (t_c - t)), 50);
        assert!(legs <= bound * (1.0 + 1e-4) + 1e-9, "oracle {legs} > bound {bound}");
        assert!(legs < 0.1);
        let cp = cs.centre_point(&id);
        assert!(cp.norm3() >= 3.0 - 1e-9);
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn cover_is_sound_for_both_epsilons() {
    for eps in [0.1, 0.05] {
        let r = run(eps);
        assert_eq!(r.stats.samples, 10_000);
        assert_eq!(r.stats.uncovered, 0);
        assert!(r.stats.worst_distance < 0.1);
        assert!(r.stats.psi_ratio_max <= 1.1);
        // the lattice density varies by at most 2 per direction, which bounds the multiplicity
        assert!(r.stats.n_max <= 48, "n_max {}", r.stats.n_max);
    }
    let (a, b) = (run(0.1).stats.n_max as f64, run(0.05).stats.n_max as f64);
    assert!(a / b < 1.6 && b / a < 1.6);
}

#[test]
fn centre_invariants() {
    let cs = &run(0.1).cs;
    let mut seen_pr5 = false;
    for x in cs.samples(300, 10.0, 9) {
        for (id, _) in cs.near_centres(&x, 0.1) {
            let nd = cs.node(id.k, id.seg, id.j);
            let pr = nd.p * nd.r;
            let mj = nd.m_j(cs.m_rot);
            assert!((mj - pr).abs() <= 1.0 / cs.m_rot as f64 + 1e-12);
            if (pr - 5.0).abs() < 0.05 {
                seen_pr5 = true;
                assert!(mj > 2.5 && mj < 10.0);
            }
            if cs.orbit_size(&nd) == 1 {
                assert!(pr < 1.0 / cs.m_rot as f64 + 1e-12);
            }
            // translations nu / (M' psi0): spacing h / psi0 in t, h in g
            let step = 1.0 / (cs.m_trans as f64 * nd.psi);
            assert!((step * nd.psi - cs.h).abs() < 1e-12);
            assert!(cs.centre_point(&id).norm3() >= 3.0 - 1e-9);
        }
    }
    assert!(seen_pr5);
}

#[test]
fn sums_vanish_far_from_supports() {
    let r = run(0.1);
    let far = ModelPoint::new(30.0, 20.0, 5.0, 1.0);
    let e = r.cs.sum_at(&far, 4.0, 1, r.ctx.params.b1, r.ctx.params.b2, None);
    assert_eq!(e.sum, 0.0);
    assert_eq!(e.delta_sum, 0.0);
}

#[test]
fn sums_stable_across_epsilon() {
    let reps: Vec<SumReport> = [0.1, 0.05]
        .iter()
        .map(|&eps| {
            let r = run(eps);
            let s = r.cs.samples(24, 10.0, 3);
            sum_localized(&r.cs, &s, 4.0, 1, r.ctx.params.b1, r.ctx.params.b2)
        })
        .collect();
    for r in &reps {
        assert!(r.entries.iter().all(|e| e.sum.is_finite() && e.sum > 0.0));
    }
    let ratio = reps[1].max_sum / reps[0].max_sum;
    assert!((ratio - 1.0).abs() < 0.1, "sum ratio {ratio}");
    let dr = reps[1].max_delta_sum_over_eps / reps[0].max_delta_sum_over_eps;
    assert!(dr < 2.0 && dr > 0.5, "delta ratio {dr}");
    let orr = reps[1].orbit_const / reps[0].orbit_const;
    assert!((orr - 1.0).abs() < 0.1, "orbit ratio {orr}");
}

#[test]
fn colouring_separates_and_scales() {
    let r = run(0.1);
    let s = r.cs.samples(8, 10.0, 21);
    let c3 = partition_colouring(&r.cs, 3.0, &s, 4.0, r.ctx.params.b1, r.ctx.params.b2);
    assert!(c3.leakage_const < 1e-6, "{c3:?}");
    let c2 = partition_colouring(&r.cs, 2.0, &[], 4.0, 1.0, 1.0);
    let c4 = partition_colouring(&r.cs, 4.0, &[], 4.0, 1.0, 1.0);
    let g = c4.classes as f64 / c2.classes as f64;
    assert!(g <= 16.0 * 1.05, "count growth {g}");
}

#[test]
fn build_cover_rejects_bad_region() {
    let g = ModelGeometry::new(0.1).unwrap();
    let bad = CoverRegion { r_in: 2.0, r_out: 5.0, margin: 2.0 };
    assert!(CentreSet::build(&g, bad, 20).is_err());
}

#[test]
fn centre_set_json_roundtrip() {
    let g = ModelGeometry::new(0.1).unwrap();
    let reg = CoverRegion { r_in: 4.0, r_out: 4.5, margin: 0.5 };
    let cs = CentreSet::build(&g, reg, 12).unwrap();
    let js = serde_json::to_string(&cs).unwrap();
    let back: CentreSet = serde_json::from_str(&js).unwrap();
    assert_eq!(back.levels.len(), cs.levels.len());
    let x = cs.samples(1, 1.0, 1)[0];
    assert_eq!(back.near_centres(&x, 0.1), cs.near_centres(&x, 0.1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn arithmetic_progression_lemma(a in 0.01f64..5.0, b in 0.01f64..5.0, c in -10.0f64..10.0) {
        let (s, bound) = arithmetic_sum(a, b, c);
        prop_assert!(s <= bound + 1e-12);
    }

    #[test]
    fn arc_is_monotone(q in -20.0f64..20.0, u in 0.0f64..5.0, du in 0.001f64..1.0) {
        let t = ArcTables::shared();
        let base = if q > 0.0 { q.sqrt() } else { 0.0 };
        let (x1, x2) = (base + u, base + u + du);
        prop_assert!(t.arc(q, x2) > t.arc(q, x1));
        prop_assert!((t.arc(q, -x1) + t.arc(q, x1)).abs() < 1e-9 * t.arc(q, x1).abs().max(1.0));
    }
}
