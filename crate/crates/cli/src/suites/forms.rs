use anyhow::Result;
use nalgebra::{Matrix4, Matrix6, SymmetricEigen};
use nslab_core::forms4d::*;
use nslab_core::local_model::{omega_model, ModelPoint};
use rand::Rng;

use super::{max_of, rng};
use crate::{Part, RunConfig, SuiteReport};

pub(crate) static PARTS: &[Part] = &[Part { criteria: &[], run: algebra }, Part { criteria: &[], run: calculus }];

fn random_form(r: &mut impl Rng) -> TwoForm {
    TwoForm(std::array::from_fn(|_| r.gen_range(-2.0..2.0)))
}

fn algebra(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let ev = SymmetricEigen::new(wedge_gram()).eigenvalues;
    let pos = ev.iter().filter(|&&l| l > 0.0).count();
    rep.flag("wedge_signature_3_3", None, pos == 3 && ev.iter().filter(|&&l| l < 0.0).count() == 3);

    let n = cfg.grid("forms", 200);
    let mut r = rng(cfg.seed, 1);
    let mut rows = Vec::new();
    let (mut inv, mut eig_ok) = (0.0f64, true);
    for i in 0..n {
        let a = Matrix4::from_fn(|_, _| r.gen_range(-1.0..1.0));
        let g = MetricTensor::new(a.transpose() * a + Matrix4::identity() * 0.3)?;
        let w = random_form(&mut r);
        let res = hodge_star(&hodge_star(&w, &g), &g).sub(&w).norm() / w.norm();
        inv = inv.max(res);
        let sm = star_matrix(&g);
        for s in [1.0, -1.0] {
            let rank = (sm - Matrix6::identity() * s).singular_values().iter().filter(|&&v| v > 1e-8).count();
            eig_ok &= rank == 3;
        }
        rows.push(vec![i.into(), res.into(), g.det().into()]);
    }
    rep.below("star_involution", None, inv, cfg.tol("star_involution", 1e-9));
    rep.flag("star_eigenspaces_3_3", None, eig_ok);
    rep.table("star", &["index", "involution_residual", "det_g"], rows);

    let mut sd = 0.0f64;
    let mut det = 0.0f64;
    let mut k = 0;
    while k < n {
        let w = random_form(&mut r);
        if wedge_pair(&w, &w) < 0.05 * w.norm().powi(2) {
            continue;
        }
        let g = metric_from_form(&w)?;
        sd = sd.max(hodge_star(&w, &g).sub(&w).norm() / w.norm());
        det = det.max((g.det() - 1.0).abs());
        k += 1;
    }
    rep.below("metric_from_form_self_dual", None, sd, cfg.tol("metric_from_form_self_dual", 1e-10));
    rep.below("metric_from_form_unit_volume", None, det, cfg.tol("metric_from_form_unit_volume", 1e-9));
    Ok(())
}

fn calculus(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let mut r = rng(cfg.seed, 2);
    let n = cfg.grid("forms", 200);
    let om = |y: &Vec4| omega_model(&ModelPoint::from_vec(y));
    let d = max_of((0..n).map(|_| {
        let x: Vec4 = std::array::from_fn(|_| r.gen_range(-3.0..3.0));
        max_of(exterior_derivative_fd(om, &x, 1e-4).0.iter().map(|c| c.abs()))
    }));
    rep.below("d_omega_zero", None, d, cfg.tol("d_omega_zero", 1e-8));
    let ok = near_symplectic_check(om, &[1.0, 0.0, 0.0, 0.0]) == Diagnosis::Symplectic
        && near_symplectic_check(om, &[0.0, 0.0, 0.0, 2.5]) == Diagnosis::TransverseZero
        && near_symplectic_check(|_| TwoForm::basis(0, 1), &[0.0; 4]) == Diagnosis::Violation;
    rep.flag("near_symplectic_diagnosis", None, ok);
    Ok(())
}
