use std::f64::consts::PI;

use anyhow::{anyhow, Result};
use nslab_core::pencil::*;
use num_complex::Complex64;
use rand::Rng;

use super::{max_of, rng};
use crate::{Part, RunConfig, SuiteReport};

pub(crate) static PARTS: &[Part] = &[Part { criteria: &[7], run: weierstrass }, Part { criteria: &[7], run: staged_maps }];

fn weierstrass(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let lat = Lattice::standard();
    let wd = WeierstrassData::standard();
    let mut r = rng(cfg.seed, 40);
    let n = cfg.grid("weierstrass", 100);
    let (mut per, mut refl) = (0.0f64, 0.0f64);
    let mut k = 0;
    while k < n {
        let z = Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-PI..PI));
        if lat.reduce(z).norm() < 0.05 || lat.reduce(z - 1.0).norm() < 0.05 {
            continue;
        }
        let w = wp_eval(z, &lat)?;
        let s = w.norm().max(1.0);
        per = max_of([per, (wp_eval(z + 2.0, &lat)? - w).norm() / s, (wp_eval(z + Complex64::new(0.0, 2.0 * PI), &lat)? - w).norm() / s]);
        let lhs = wp_eval(Complex64::new(1.0, 0.0) - z, &lat)?;
        refl = max_of([refl, (lhs - (w * wd.a + wd.b) / (w - wd.a)).norm() / lhs.norm().max(1.0)]);
        k += 1;
    }
    rep.below("wp_periodicity", Some(7), per, cfg.tol("wp_periodicity", 1e-8));
    rep.below("wp_reflection_identity", Some(7), refl, cfg.tol("wp_reflection_identity", 1e-8));
    let axis = wd.axis_scan(100);
    rep.below("f_i_axis_imaginary", Some(7), axis.max_re_residual, cfg.tol("f_i_axis_imaginary", 1e-8));
    let bps = wd.critical_points(8);
    let bres = max_of(bps.iter().map(|b| b.re_half_residual));
    rep.push("branch_points_re_half", Some(7), bres, cfg.tol("branch_points_re_half", 1e-8), bps.len() == 4 && bres < cfg.tol("branch_points_re_half", 1e-8));
    rep.table("branch_points", &["re", "im", "re_half_residual"], bps.iter().map(|b| vec![b.z.re.into(), b.z.im.into(), b.re_half_residual.into()]).collect());
    Ok(())
}

fn staged_maps(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let eps = cfg.eps_or(&[0.05])[0];
    let p = Pencil::new(StageParams::new(eps, 0.01, 0.2)?)?;
    let mut grid = ScanGrid::annulus(2.0, 5.0);
    grid.n_re = cfg.grid("scan_re", grid.n_re);
    let f = p.stage(Stage::II);
    let t = transversality_scan(&f, &p.geom, &grid)?;
    rep.push("transversality_kappa1_positive", Some(7), t.kappa1, 0.0, t.kappa1 > 0.0);
    rep.push("transversality_h3_gridwise", Some(7), t.failure_count as f64, 0.0, t.passed());
    for (name, v) in [("kappa1", t.kappa1), ("kappa1_row_im0", t.kappa1_rows[0]), ("kappa1_row_impi", t.kappa1_rows[1]), ("kappa2", t.kappa2), ("kappa3", t.kappa3), ("max_dbar", t.max_dbar)] {
        rep.constant(name, v);
    }
    let l = p.lefschetz_check_inner(&TubeGrid::default())?;
    rep.push("lefschetz_inner_margin", Some(7), l.min_margin, 0.0, l.passed() && l.min_margin > 0.0);
    rep.constant("lefschetz_alpha_threshold", l.threshold);
    rep.constant("lefschetz_min_hessian_det", l.min_hessian_det);
    let cp = l.critical.first().ok_or_else(|| anyhow!("no leaf critical points found"))?;
    rep.constant("lefschetz_first_critical_x0", cp.x0);
    rep.table(
        "critical",
        &["z_re", "z_im", "q", "x0", "theta", "hessian_det"],
        l.critical.iter().map(|c| vec![c.z_r.re.into(), c.z_r.im.into(), c.q_r.into(), c.x0.into(), c.theta.into(), c.hessian_det.into()]).collect(),
    );
    Ok(())
}
