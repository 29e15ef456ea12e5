use anyhow::Result;
use nslab_core::estimates::*;
use nslab_core::sections::SectionContext;

use crate::{Part, RunConfig, SuiteReport};

pub(crate) static PARTS: &[Part] = &[Part { criteria: &[6], run: cover_and_sums }];

fn cover_and_sums(cfg: &RunConfig, rep: &mut SuiteReport) -> Result<()> {
    let n_samples = cfg.grid("cover_samples", 10_000);
    let n_sum = cfg.grid("sum_samples", 24);
    let mut reps = Vec::new();
    let mut rows = Vec::new();
    let mut cover_rows = Vec::new();
    for eps in cfg.eps_or(&[0.1, 0.05]) {
        let ctx = SectionContext::new(eps)?;
        let (cs, stats) = build_cover(&ctx.geom, CoverRegion::default(), n_samples, cfg.seed, 20)?;
        rep.push(&format!("cover_uncovered_eps{eps}"), Some(6), stats.uncovered as f64, 0.0, stats.uncovered == 0 && stats.samples == n_samples);
        rep.below(&format!("cover_worst_distance_eps{eps}"), Some(6), stats.worst_distance, 0.1);
        rep.constant(&format!("cover_multiplicity_eps{eps}"), stats.n_max as f64);
        rep.constant(&format!("cover_nodes_eps{eps}"), cs.node_count() as f64);
        cover_rows.push(vec![eps.into(), stats.samples.into(), stats.uncovered.into(), stats.worst_distance.into(), stats.n_max.into(), stats.psi_ratio_max.into()]);
        let samples = cs.samples(n_sum, 10.0, cfg.seed ^ 0x5eed);
        let r = sum_localized(&cs, &samples, 4.0, 1, ctx.params.b1, ctx.params.b2);
        rep.flag(&format!("sums_finite_positive_eps{eps}"), Some(6), r.entries.iter().all(|e| e.sum.is_finite() && e.sum > 0.0));
        rep.constant(&format!("sum_c_eps{eps}"), r.max_sum);
        rep.constant(&format!("delta_sum_over_eps_eps{eps}"), r.max_delta_sum_over_eps);
        for (x, e) in samples.iter().zip(&r.entries) {
            rows.push(vec![eps.into(), x.x0.into(), x.x1.into(), x.x2.into(), x.t.into(), e.sum.into(), e.delta_sum.into(), e.orbit_ratio.into()]);
        }
        reps.push(r);
    }
    if reps.len() >= 2 {
        let (a, b) = (&reps[0], &reps[reps.len() - 1]);
        let ratio = b.max_sum / a.max_sum;
        rep.below("sum_c_stable", Some(6), (ratio - 1.0).abs(), cfg.tol("sum_c_stable", 0.1));
        let dr = b.max_delta_sum_over_eps / a.max_delta_sum_over_eps;
        rep.below("delta_sum_over_eps_stable", Some(6), dr.max(1.0 / dr), cfg.tol("delta_sum_over_eps_stable", 2.0));
    }
    rep.table("cover", &["epsilon", "samples", "uncovered", "worst_distance", "multiplicity", "psi_ratio_max"], cover_rows);
    rep.table("sums", &["epsilon", "x0", "x1", "x2", "t", "sum", "delta_sum", "orbit_ratio"], rows);
    Ok(())
}
