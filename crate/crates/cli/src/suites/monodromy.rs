use anyhow::Result;
use nslab_monodromy::examples::{all_genus_zero_one, total_space_label};
use nslab_monodromy::*;

use crate::{Part, RunConfig, SuiteReport};

pub(crate) static PARTS: &[Part] = &[Part { criteria: &[8], run: homology }];

fn symplectic_all(fc: &FibrationCombinatorics) -> Result<bool> {
    let mut ok = fc.psi(Side::Plus)?.is_symplectic() && fc.psi(Side::Minus)?.is_symplectic();
    ok &= lift_monodromy(&fc.psi(Side::Plus)?, &fc.framing, fc.m)?.is_symplectic();
    ok &= consistency_check(fc)?.residual.is_symplectic();
    Ok(ok)
}

fn homology(_cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let mut rows = Vec::new();
    let mut sym = true;
    for (i, fc) in all_genus_zero_one().iter().enumerate() {
        let chi = fc.euler_characteristic()?;
        let cons = consistency_check(fc)?.pass;
        rep.push(&format!("example1_variant{i}_chi"), Some(8), chi as f64, 2.0, chi == 2 && cons);
        rep.constant(&format!("example1_variant{i}_chi"), chi as f64);
        sym &= symplectic_all(fc)?;
        rows.push(vec![i.into(), fc.gluing.plus.as_str().into(), fc.gluing.minus.as_str().into(), chi.into(), cons.into(), total_space_label(fc).unwrap_or("-").into()]);
    }
    rep.table("example1", &["variant", "gluing_plus", "gluing_minus", "chi", "consistent", "total_space"], rows);

    let base = FibrationCombinatorics::product(0, 1);
    let b = blowup_isotropic(&base, 0)?;
    let d = b.euler_characteristic()? - base.euler_characteristic()?;
    rep.push("blowup_delta_chi", Some(8), d as f64, 1.0, d == 1 && consistency_check(&b)?.pass);
    sym &= symplectic_all(&b)?;

    let g2 = blowup_isotropic(&FibrationCombinatorics::product(1, 1), 0)?;
    let c = insert_critical_circle(&g2, &g2.gamma(0))?;
    let d = c.euler_characteristic()? - g2.euler_characteristic()?;
    rep.push("critical_circle_delta_chi", Some(8), d as f64, 1.0, d == 1 && consistency_check(&c)?.pass);
    sym &= symplectic_all(&g2)? && symplectic_all(&c)?;

    let mut lift_ok = true;
    for k in -6..=6 {
        let l = lift_monodromy(&SymplecticMatrix::identity(0), &[k], 1)?;
        // k-th power of the transvection a -> a, b -> b + a, written out
        lift_ok &= l == SymplecticMatrix::new(1, vec![1, k, 0, 1])?;
        sym &= l.is_symplectic();
    }
    rep.flag("lift_equals_twist_power", Some(8), lift_ok);
    rep.flag("matrices_symplectic", Some(8), sym);
    Ok(())
}
