use anyhow::Result;
use nslab_core::local_model::{cartesian_from_coords, ModelPoint};
use nslab_core::sections::*;
use rand::Rng;

use super::holo::{cr_scan, Leaf, CR_QUADRICS};
use super::{max_of, rng, spread};
use crate::{Part, RunConfig, SuiteReport};

pub(crate) static PARTS: &[Part] = &[
    Part { criteria: &[3], run: cr_sections },
    Part { criteria: &[5], run: decay },
    Part { criteria: &[9], run: odd_case },
];

const BASES: [ModelPoint; 3] = [
    ModelPoint { x0: 1.2, x1: 3.0, x2: -1.5, t: 0.0 },
    ModelPoint { x0: -0.5, x1: -2.0, x2: 3.5, t: 0.0 },
    ModelPoint { x0: 3.5, x1: 0.5, x2: 0.2, t: 0.0 },
];

fn cr_sections(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let ctx = SectionContext::new(cfg.eps_or(&[0.1])[0])?;
    let (nh, nt) = (cfg.grid("leaf_h", 200), cfg.grid("leaf_theta", 64));
    let tol = cfg.tol("cr_residual", 1e-6);
    let mut rows = Vec::new();
    let mut ws = 0.0f64;
    for q in CR_QUADRICS {
        let (s, n) = cr_scan(|c| Ok(sigma_eval(&cartesian_from_coords(c)?).value), q, Leaf::Plus, nh, nt, true, |_| true)?;
        ws = max_of([ws, s]);
        rows.push(vec!["sigma".into(), q.into(), 0.0.into(), n.into(), s.into()]);
    }
    rep.below("cr_sigma", Some(3), ws, tol);
    let mut wt = 0.0f64;
    for &(h0, th0) in &DECAY_BASES {
        let tau = ctx.tau(h0, th0)?;
        for q in CR_QUADRICS {
            let keep = |c: &nslab_core::local_model::SingularCoords| cartesian_from_coords(c).map(|x| tau.in_domain(c.q, x.x0)).unwrap_or(false);
            let (s, n) = cr_scan(|c| Ok(tau.eval(c)?.value), q, Leaf::Plus, nh, nt, true, keep)?;
            wt = max_of([wt, s]);
            rows.push(vec!["tau".into(), q.into(), h0.into(), n.into(), s.into()]);
        }
    }
    rep.below("cr_tau", Some(3), wt, tol);
    rep.table("cr", &["function", "q", "h0", "points", "max_rel_residual"], rows);
    Ok(())
}

fn decay(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let n = cfg.grid("decay", 12);
    let mut rows = Vec::new();
    let mut dbar = Vec::new();
    for eps in cfg.eps_or(&[0.1, 0.05]) {
        let ctx = SectionContext::new(eps)?;
        let r = section_decay_suite(&ctx, n, 6.0)?;
        rep.below(&format!("decay_refined_eps{eps}"), Some(5), r.fine_worst, cfg.tol("decay_refined", 1.1) + 1e-12);
        rep.flag(&format!("tau_unique_max_eps{eps}"), Some(5), r.unique_max);
        rep.push(&format!("dbar_tau_bounded_eps{eps}"), Some(5), r.dbar_const, f64::INFINITY, r.dbar_const.is_finite() && r.dbar_const > 0.0);
        rep.constant(&format!("decay_alpha_eps{eps}"), r.coarse.alpha);
        rep.constant(&format!("decay_c_eps{eps}"), r.coarse.c);
        rep.constant(&format!("dbar_tau_const_eps{eps}"), r.dbar_const);
        dbar.push((eps, r.dbar_const));
        rows.push(vec![
            eps.into(),
            r.coarse.alpha.into(),
            r.coarse.c.into(),
            r.coarse_points.into(),
            r.fine_points.into(),
            r.fine_worst.into(),
            r.dbar_const.into(),
            r.max_off_base.into(),
        ]);
    }
    // the bound is uniform in epsilon, so only growth as epsilon shrinks counts against it
    let mut by_eps = dbar.clone();
    by_eps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let growth = max_of(by_eps.windows(2).map(|w| w[1].1 / w[0].1));
    if by_eps.len() >= 2 {
        rep.constant("dbar_tau_const_spread", spread(&dbar.iter().map(|d| d.1).collect::<Vec<_>>()));
        rep.below("dbar_tau_const_growth", Some(5), growth, cfg.tol("dbar_tau_const_growth", 2.0));
    }
    rep.table("decay", &["epsilon", "alpha", "c", "coarse_points", "fine_points", "fine_worst", "dbar_const", "max_off_base"], rows);
    Ok(())
}

fn odd_case(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let eps = cfg.eps_or(&[0.1])[0];
    let ctx = SectionContext::new(eps)?;
    let n = cfg.grid("odd", 100);
    let mut r = rng(cfg.seed, 30);
    let (mut inv, mut split) = (0.0f64, 0.0f64);
    let mut rows = Vec::new();
    for (b, xp) in BASES.iter().enumerate() {
        for _ in 0..n {
            let x = ModelPoint::new(r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0), r.gen_range(-40.0..40.0));
            let a = ctx.s_odd_value(xp, 0.3, &x, 10)?;
            let c = ctx.s_odd_value(xp, 0.3, &sigma_bar_minus(&x, eps), 10)?;
            let th = ctx.theta_eval(xp, 0.3, &x, 10);
            let d = (a - c).norm();
            let s = (th.even + th.odd - th.total).norm();
            inv = max_of([inv, d]);
            split = max_of([split, s]);
            rows.push(vec![b.into(), x.x0.into(), x.x1.into(), x.x2.into(), x.t.into(), a.norm().into(), d.into(), s.into()]);
        }
    }
    rep.below("s_odd_invariance", Some(9), inv, cfg.tol("s_odd_invariance", 1e-10));
    rep.below("theta_even_plus_odd", Some(9), split, cfg.tol("theta_even_plus_odd", 1e-12));
    rep.table("odd", &["base", "x0", "x1", "x2", "t", "abs_s_odd", "invariance_residual", "split_residual"], rows);
    Ok(())
}
