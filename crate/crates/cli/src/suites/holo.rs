use std::f64::consts::PI;

use anyhow::Result;
use nslab_core::holo_coords::*;
use nslab_core::local_model::{ModelError, SingularCoords};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{max_of, rng};
use crate::{Cell, Part, RunConfig, SuiteReport};

pub(crate) static PARTS: &[Part] = &[
    Part { criteria: &[1], run: identities },
    Part { criteria: &[2], run: constant_a },
    Part { criteria: &[], run: profiles },
    Part { criteria: &[3], run: cr_f },
];

pub(crate) const CR_QUADRICS: [f64; 4] = [-4.0, -1.0, 1.0, 4.0];

/// Which part of a quadric a leaf scan covers.
#[derive(Clone, Copy)]
pub(crate) enum Leaf {
    /// Q < 0: H in [-h, h]; Q > 0: the x0 > 0 sheet.
    Plus,
    /// Q < 0: H in [-h, h]; Q > 0: the x0 < 0 sheet.
    Minus,
}

pub(crate) fn leaf_h(q: f64, leaf: Leaf, i: usize, nh: usize) -> f64 {
    let s = i as f64 / (nh - 1) as f64;
    if q < 0.0 {
        -20.0 + 40.0 * s
    } else {
        let h = 1.0 + 39.0 * s;
        match leaf {
            Leaf::Plus => h,
            Leaf::Minus => -h,
        }
    }
}

/// Max over a (H, theta) grid of residual / max(|f|, 1), with or without the L1 connection.
pub(crate) fn cr_scan<F>(f: F, q: f64, leaf: Leaf, nh: usize, nt: usize, l1: bool, keep: impl Fn(&SingularCoords) -> bool + Sync) -> Result<(f64, usize)>
where
    F: Fn(&SingularCoords) -> Result<Complex64, ModelError> + Sync,
{
    let pts: Vec<SingularCoords> = (0..nh)
        .flat_map(|i| (0..nt).map(move |k| (i, k)))
        .map(|(i, k)| SingularCoords::new(q, leaf_h(q, leaf, i, nh), -PI + 2.0 * PI * (k as f64 + 0.5) / nt as f64, 0.0))
        .filter(|c| keep(c))
        .collect();
    let res: Vec<f64> = pts
        .par_iter()
        .map(|c| {
            let step = 1e-5;
            let r = if l1 { cr_residual_l1(&f, c, step)? } else { cr_residual_on_quadric(&f, c, step)? };
            Ok(r / f(c)?.norm().max(1.0))
        })
        .collect::<Result<_, ModelError>>()?;
    Ok((max_of(res), pts.len()))
}

fn identities(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let h = HoloCoords::shared();
    let n = cfg.grid("identities", 10_000);
    let mut r = rng(cfg.seed, 20);
    let mut prod = 0.0f64;
    for _ in 0..n {
        let q = -r.gen_range(1e-3..20.0);
        let (x0, th) = (r.gen_range(-10.0..10.0), r.gen_range(-PI..PI));
        let v = h.f_plus_raw(q, x0, th)? * h.f_minus_raw(q, x0, th)?;
        let want = (-q).powf(nu());
        prod = prod.max((v - want).norm() / want);
    }
    rep.below("f_plus_f_minus_eq_minus_q_pow_nu", Some(1), prod, cfg.tol("f_plus_f_minus_eq_minus_q_pow_nu", 1e-9));
    rep.push("u_at_zero", Some(1), h.u_eval(0.0), 1.0, h.u_eval(0.0) == 1.0);
    let recip = max_of((0..n).map(|_| {
        let x: f64 = r.gen_range(-1e3..1e3);
        (h.u_eval(x) * h.u_eval(-x) - 1.0).abs()
    }));
    rep.below("u_reciprocal", Some(1), recip, cfg.tol("u_reciprocal", 1e-10));
    Ok(())
}

fn constant_a(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let c = HoloConstants::compute();
    rep.constant("nu", c.nu);
    rep.constant("a_closed", c.a_closed);
    rep.constant("a_quadrature", c.a_quadrature);
    rep.below("a_quadrature_vs_closed", Some(2), (c.a_quadrature - c.a_closed).abs(), cfg.tol("a_quadrature_vs_closed", 1e-9));
    let x = 1e4f64;
    let ratio = HoloCoords::shared().u_eval(x) / x.powf(c.nu);
    rep.constant("u_1e4_over_x_nu", ratio);
    rep.below("u_asymptotic_a", Some(2), (ratio - c.a_closed).abs(), cfg.tol("u_asymptotic_a", 1e-3));
    Ok(())
}

fn profiles(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let h = HoloCoords::shared();
    rep.flag("v_at_one_zero", None, h.v_eval(1.0)? == 0.0);
    let hs = [1e-6f64, 1e-5, 1e-4];
    let pts: Vec<(f64, f64)> = hs.iter().map(|&d| Ok((d.ln(), h.v_eval(1.0 + d)?.ln()))).collect::<Result<_, ModelError>>()?;
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    rep.constant("v_onset_exponent", slope);
    rep.below("v_onset_half_power", None, (slope - 0.5).abs(), cfg.tol("v_onset_half_power", 0.01));
    let vr = h.v_eval(1e3)? / 1e3f64.powf(nu());
    rep.below("v_asymptotic_a", None, (vr - a_closed()).abs(), cfg.tol("v_asymptotic_a", 1e-2));
    let n = cfg.grid("profiles", 400);
    let mut rows: Vec<Vec<Cell>> = Vec::new();
    let mut mono = true;
    let (mut pu, mut pv) = (0.0, 0.0);
    for i in 0..=n {
        let x = 1.0 + 99.0 * (i as f64 / n as f64).powi(2);
        let (u, v) = (h.u_eval(x), h.v_eval(x)?);
        mono &= u > pu && (i == 0 || v > pv);
        (pu, pv) = (u, v);
        rows.push(vec![x.into(), u.into(), v.into(), (u / x.powf(nu())).into(), (v / x.powf(nu())).into()]);
    }
    rep.flag("profiles_increasing", None, mono);
    rep.table("profiles", &["x0", "u", "v", "u_over_x_nu", "v_over_x_nu"], rows);
    Ok(())
}

fn cr_f(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let h = HoloCoords::shared();
    let (nh, nt) = (cfg.grid("leaf_h", 200), cfg.grid("leaf_theta", 64));
    let tol = cfg.tol("cr_residual", 1e-6);
    let mut rows = Vec::new();
    let mut worst = [0.0f64; 2];
    for q in CR_QUADRICS {
        let (a, na) = cr_scan(|c| h.f_plus(c), q, Leaf::Plus, nh, nt, false, |_| true)?;
        let (b, nb) = cr_scan(|c| h.f_minus(c), q, Leaf::Minus, nh, nt, false, |_| true)?;
        worst[0] = max_of([worst[0], a]);
        worst[1] = max_of([worst[1], b]);
        rows.push(vec!["f_plus".into(), q.into(), na.into(), a.into()]);
        rows.push(vec!["f_minus".into(), q.into(), nb.into(), b.into()]);
    }
    rep.below("cr_f_plus", Some(3), worst[0], tol);
    rep.below("cr_f_minus", Some(3), worst[1], tol);
    rep.table("cr", &["function", "q", "points", "max_rel_residual"], rows);
    Ok(())
}
