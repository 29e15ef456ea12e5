use anyhow::Result;
use nalgebra::Matrix4;
use nslab_core::forms4d::{liouville, TwoForm, Vec4};
use nslab_core::local_model::*;
use rand::Rng;

use super::{rng, spread};
use crate::{Part, RunConfig, SuiteReport};

pub(crate) static PARTS: &[Part] = &[
    Part { criteria: &[1], run: identities },
    Part { criteria: &[4], run: psi_bounds },
    Part { criteria: &[4], run: structures },
];

fn point(r: &mut impl Rng, s: f64) -> ModelPoint {
    ModelPoint::new(r.gen_range(-s..s), r.gen_range(-s..s), r.gen_range(-s..s), r.gen_range(-10.0..10.0))
}

fn row(m: &Matrix4<f64>, i: usize) -> Vec4 {
    std::array::from_fn(|j| m[(i, j)])
}

fn identities(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let n = cfg.grid("identities", 10_000);
    let mut r = rng(cfg.seed, 10);
    let (mut vol, mut quart, mut split, mut round) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let x = point(&mut r, 5.0);
        let w = omega_model(&x);
        let scale = x.p4().max(1.0);
        vol = vol.max((liouville(&w) - x.p4()).abs() / scale);
        quart = quart.max((x.p4() - (6.0 * x.x0 * x.x0 - 2.0 * x.q())).abs() / scale);
        if x.r() > 0.1 {
            // rows of the Jacobian are dQ, dt, dH, dtheta
            let j = singular_jacobian(&x);
            let sc = TwoForm::wedge1(&row(&j, 0), &row(&j, 1)).add(&TwoForm::wedge1(&row(&j, 2), &row(&j, 3)));
            split = split.max(w.sub(&sc).norm());
        }
        let y = cartesian_from_coords(&coords_from_cartesian(&x))?;
        let d = (x.x0 - y.x0).abs().max((x.x1 - y.x1).abs()).max((x.x2 - y.x2).abs());
        round = round.max(d / x.norm3().max(1.0));
    }
    rep.below("omega_squared_eq_p4", Some(1), vol, cfg.tol("omega_squared_eq_p4", 1e-12));
    rep.below("omega_eq_dq_dt_plus_dh_dtheta", Some(1), split, cfg.tol("omega_eq_dq_dt_plus_dh_dtheta", 1e-10));
    rep.below("p4_eq_6x0sq_minus_2q", Some(1), quart, cfg.tol("p4_eq_6x0sq_minus_2q", 1e-12));
    rep.below("coordinate_roundtrip", None, round, cfg.tol("coordinate_roundtrip", 1e-10));
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for eps in cfg.eps_or(&[0.1, 0.05, 0.02]) {
        let h = l2_holonomy(eps, 0.0, 20_000);
        worst = worst.max((h + 1.0).norm());
        rows.push(vec![eps.into(), h.re.into(), h.im.into()]);
    }
    rep.below("l2_holonomy_minus_one", Some(1), worst, cfg.tol("l2_holonomy_minus_one", 1e-10));
    rep.table("holonomy", &["epsilon", "re", "im"], rows);
    Ok(())
}

fn psi_bounds(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let eps_list = cfg.eps_or(&[0.1, 0.05, 0.02]);
    let n = cfg.grid("psi", 400);
    let mut consts = Vec::new();
    let mut rows = Vec::new();
    let mut plateau_miss = 0usize;
    let mut monotone = true;
    for &eps in &eps_list {
        let prof = psi_build(eps)?;
        let root = eps.powf(-0.5);
        for i in 0..=n {
            let p = 1.0 + (0.5 * root - 1.0) * i as f64 / n as f64;
            plateau_miss += usize::from(prof.psi(p) != eps);
            let p = 0.9 * root * (1.0 + i as f64 / n as f64);
            plateau_miss += usize::from(prof.psi(p) != p);
        }
        for i in 0..=n {
            let p = 1.0 + (root - 1.0) * i as f64 / n as f64;
            let (v, d1, d2) = prof.eval(p);
            rows.push(vec![eps.into(), p.into(), v.into(), d1.into(), d2.into()]);
        }
        let c = prof.constants(20_000);
        monotone &= c.monotone;
        rep.constant(&format!("psi_c0_linear_eps{eps}"), c.c0_linear);
        rep.constant(&format!("psi_c0_quartic_eps{eps}"), c.c0_quartic);
        rep.constant(&format!("psi_c1_eps{eps}"), c.c1);
        rep.constant(&format!("psi_c2_eps{eps}"), c.c2);
        consts.push(c);
    }
    rep.push("psi_plateaus_exact", Some(4), plateau_miss as f64, 0.0, plateau_miss == 0);
    rep.flag("psi_monotone", Some(4), monotone);
    if consts.len() >= 2 {
        let f = |g: fn(&PsiConstants) -> f64| spread(&consts.iter().map(g).collect::<Vec<_>>());
        let lim = cfg.tol("psi_constant_spread", 3.0);
        rep.below("psi_c0_linear_spread", Some(4), f(|c| c.c0_linear), lim);
        rep.below("psi_c0_quartic_spread", Some(4), f(|c| c.c0_quartic), lim);
        rep.below("psi_c1_spread", Some(4), f(|c| c.c1), lim);
        rep.constant("psi_c2_spread", f(|c| c.c2));
    }
    rep.table("psi", &["epsilon", "p", "psi", "dpsi", "d2psi"], rows);
    Ok(())
}

fn admissible(r: &mut impl Rng, s: f64) -> ModelPoint {
    loop {
        let x = point(r, s);
        if x.p() >= 1.0 && x.r() > 0.05 {
            return x;
        }
    }
}

fn structures(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let eps = cfg.eps_or(&[0.05])[0];
    let geom = ModelGeometry::new(eps)?;
    let n = cfg.grid("structures", 1000);
    let mut r = rng(cfg.seed, 11);
    let (mut sq, mut tang, mut plateau, mut outer, mut compat) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut positive = true;
    let root = eps.powf(-0.5);
    for _ in 0..n {
        let x = admissible(&mut r, 1.2 * root);
        let j = acs_J(&geom, &x)?;
        let sc = j.abs().max().powi(2).max(1.0);
        sq = sq.max((j * j + Matrix4::identity()).abs().max() / sc);
        let f = singular_frame(&x);
        let d = singular_jacobian(&x);
        for col in [2, 3] {
            let v = j * f.column(col);
            let w = d * v;
            tang = tang.max(w[0].abs().max(w[1].abs()) / v.norm().max(1.0));
        }
        if x.p() <= 0.5 * root {
            let jq = j * f.column(0);
            plateau = plateau.max((jq - f.column(1) / (eps * eps)).norm() / jq.norm());
        }
        if x.p() >= 0.9 * root {
            outer = outer.max((j - j0_standard(&x)).abs().max());
        }
        let g = metric_g(&geom, &x)?;
        positive &= g.eigenvalues().iter().all(|&l| l > 0.0);
        compat = compat.max((compat_metric(&geom, &x)? - g.0).abs().max() / g.0.abs().max());
    }
    rep.below("j_squared_minus_identity", Some(4), sq, cfg.tol("j_squared_minus_identity", 1e-9));
    rep.below("j_preserves_quadric_planes", None, tang, cfg.tol("j_preserves_quadric_planes", 1e-9));
    rep.below("j_plateau_dq_to_dt", Some(4), plateau, cfg.tol("j_plateau_dq_to_dt", 1e-8));
    rep.below("j_equals_j0_outside", Some(4), outer, cfg.tol("j_equals_j0_outside", 1e-9));
    rep.flag("metric_positive", None, positive);
    rep.below("metric_equals_omega_j", None, compat, cfg.tol("metric_equals_omega_j", 1e-8));
    Ok(())
}
