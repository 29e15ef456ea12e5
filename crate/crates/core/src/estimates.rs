//! Covering of {|x| >= 4} x R by 1/10 g-balls with centres in |x'| >= 3, the
//! localized sums of E F Psi^p over such a cover, and a spatial-hash colouring.
//!
//! Centres form a lattice that is never stored in full: Q-levels spaced by
//! h psi_min, arc-length nodes on each level, rotation orbits of ceil(M p r)
//! points, and translation progressions nu / (M' psi).
//! Distances are bounded by the length of the path that first moves Q at fixed
//! (H, theta, t), then slides along the quadric, then rotates, then translates.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::local_model::{x0_from_qh, ModelError, ModelGeometry, ModelPoint, Sheet};
use crate::numerics::{integrate, GaussLegendre};


// ---------------------------------------------------------------------------
// arc length along the quadrics

const ARC_Y_MAX: f64 = 1e7;
const Q_ZERO: f64 = 1e-12;

/// (6^(3/4) / sqrt 2)(2/3): arc length on Q = 0 is this times |x0|^(3/2).
fn cone_coeff() -> f64 {
    6f64.powf(0.75) / 2f64.sqrt() * (2.0 / 3.0)
}

fn graded(max: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=20).map(|i| 0.05 * i as f64).collect();
    let mut x = 1.0;
    while x < max {
        x *= 1.05;
        v.push(x.min(max));
    }
    v
}

/// Integrand of S_- on Q = -1 in y = x0.
fn k_minus(y: f64) -> f64 {
    (6.0 * y * y + 2.0).powf(0.75) / (2.0 * (y * y + 1.0)).sqrt()
}

/// Integrand of S_+ on Q = 1 in w, x0 = 1 + w^2.
fn k_plus(w: f64) -> f64 {
    let y = 1.0 + w * w;
    2.0 * (6.0 * y * y - 2.0).powf(0.75) / (2.0 * (y + 1.0)).sqrt()
}

/// Universal arc-length tables: S_-(y) on Q = -1 from x0 = 0, and S_+ on Q = 1
/// from the axis point x0 = 1. Other quadrics follow by the scaling |Q|^(3/4).
#[derive(Clone, Debug)]
pub struct ArcTables {
    minus_nodes: Vec<f64>,
    minus_vals: Vec<f64>,
    plus_nodes: Vec<f64>,
    plus_vals: Vec<f64>,
    gl: GaussLegendre,
}

fn cumulate(nodes: &[f64], f: fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for w in nodes.windows(2) {
        acc += integrate(f, w[0], w[1], 1e-14);
        out.push(acc);
    }
    out
}

impl ArcTables {
    pub fn build() -> Self {
        let minus_nodes = graded(ARC_Y_MAX);
        let minus_vals = cumulate(&minus_nodes, k_minus);
        let plus_nodes = graded(ARC_Y_MAX.sqrt());
        let plus_vals = cumulate(&plus_nodes, k_plus);
        ArcTables {
            minus_nodes,
            minus_vals,
            plus_nodes,
            plus_vals,
            gl: GaussLegendre::new(10),
        }
    }

    pub fn shared() -> &'static ArcTables {
        static T: OnceLock<ArcTables> = OnceLock::new();
        T.get_or_init(ArcTables::build)
    }

    fn lookup(&self, nodes: &[f64], vals: &[f64], f: fn(f64) -> f64, x: f64) -> f64 {
        let k = nodes.partition_point(|&n| n <= x).saturating_sub(1);
        vals[k] + self.gl.integrate(f, nodes[k], x)
    }

    pub fn s_minus(&self, y: f64) -> f64 {
        y.signum() * self.lookup(&self.minus_nodes, &self.minus_vals, k_minus, y.abs())
    }

    /// S_+ at y >= 1.
    pub fn s_plus(&self, y: f64) -> f64 {
        let w = (y - 1.0).max(0.0).sqrt();
        self.lookup(&self.plus_nodes, &self.plus_vals, k_plus, w)
    }

    /// Signed arc coordinate on the quadric Q: from x0 = 0 when Q < 0, from the
    /// axis point of the sheet when Q > 0 (sign of x0 for the sheet).
    pub fn arc(&self, q: f64, x0: f64) -> f64 {
        if q.abs() < Q_ZERO {
            return x0.signum() * cone_coeff() * x0.abs().powf(1.5);
        }
        let a = q.abs().sqrt();
        let sc = q.abs().powf(0.75);
        if q < 0.0 {
            sc * self.s_minus(x0 / a)
        } else {
            x0.signum() * sc * self.s_plus(x0.abs() / a)
        }
    }

    /// Inverse of a cumulative table: x with table value s.
    fn invert(&self, nodes: &[f64], vals: &[f64], f: fn(f64) -> f64, s: f64) -> f64 {
        let k = vals.partition_point(|&v| v <= s).saturating_sub(1).min(nodes.len() - 2);
        let (mut lo, mut hi) = (nodes[k], nodes[k + 1]);
        if s > vals[k + 1] {
            // beyond the table: the integrand grows, so Newton from the last node
            // overshoots at most geometrically
            hi = f64::INFINITY;
        }
        let mut x = (nodes[k] + (s - vals[k]) / f(nodes[k])).clamp(lo, hi.min(nodes[k] + 1e9));
        for _ in 0..100 {
            let g = vals[k] + self.gl.integrate(f, nodes[k], x) - s;
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut nx = x - g / f(x);
            if !(nx > lo && nx < hi) {
                nx = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1.0) };
            }
            let done = (nx - x).abs() <= 1e-14 * x.abs().max(1.0);
            x = nx;
            if done {
                break;
            }
        }
        x
    }

    /// Inverse of arc on the quadric Q (sheet chosen by the sign of a when Q > 0).
    pub fn x0_at(&self, q: f64, a: f64) -> f64 {
        let sg = if a < 0.0 { -1.0 } else { 1.0 };
        if q.abs() < Q_ZERO {
            return sg * (a.abs() / cone_coeff()).powf(2.0 / 3.0);
        }
        let sc = q.abs().powf(0.75);
        let t = a.abs() / sc;
        if q < 0.0 {
            sg * q.abs().sqrt() * self.invert(&self.minus_nodes, &self.minus_vals, k_minus, t)
        } else {
            let w = self.invert(&self.plus_nodes, &self.plus_vals, k_plus, t);
            sg * q.sqrt() * (1.0 + w * w)
        }
    }
}

// ---------------------------------------------------------------------------
// cover

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoverRegion {
    /// Samples are taken in r_in <= |x| <= r_out.
    pub r_in: f64,
    pub r_out: f64,
    /// Centres are placed in 3 <= |x| <= r_out + margin.
    pub margin: f64,
}

impl Default for CoverRegion {
    fn default() -> Self {
        CoverRegion { r_in: 4.0, r_out: 5.0, margin: 2.0 }
    }
}

const R_CENTRE_MIN: f64 = 3.0;
/// Projections at fixed H stay in |x| >= this radius for samples in |x| >= 4.
const R_PATH_MIN: f64 = 3.5;
/// Largest dyadic thinning exponent.
const E_MAX: u32 = 14;

/// An arc of nodes on one level: arc coordinates a_lo + j * step, j < n.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Segment {
    pub a_lo: f64,
    pub step: f64,
    pub n: usize,
}

impl Segment {
    pub fn a(&self, j: usize) -> f64 {
        self.a_lo + j as f64 * self.step
    }

    pub fn a_hi(&self) -> f64 {
        self.a(self.n - 1)
    }

    /// Index range of nodes with arc coordinate in [lo, hi].
    fn range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        if hi < self.a_lo || lo > self.a_hi() || hi < lo {
            return None;
        }
        if self.n == 1 {
            return Some((0, 0));
        }
        let j0 = ((lo - self.a_lo) / self.step).ceil().max(0.0) as usize;
        let j1 = (((hi - self.a_lo) / self.step).floor().max(0.0) as usize).min(self.n - 1);
        (j0 <= j1).then_some((j0, j1))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Level {
    pub q: f64,
    /// psi at the smallest p reachable on the Q-interval up to the next level.
    pub psi_lo: f64,
    /// Nodes on this level have psi0 below this cap (dyadic thinning).
    pub psi_cap: f64,
    /// ... equivalently |arc| <= arc_cap.
    pub arc_cap: f64,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CentreId {
    pub k: usize,
    pub seg: usize,
    pub j: usize,
    pub m: usize,
    pub nu: i64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NodeInfo {
    pub x0: f64,
    pub h: f64,
    pub p: f64,
    pub r: f64,
    pub psi: f64,
    /// Number of rotation images, max(1, ceil(M p r)).
    pub orbit: usize,
}

impl NodeInfo {
    /// Orbit multiplicity in units of the rotation factor M.
    pub fn m_j(&self, m_rot: usize) -> f64 {
        self.orbit as f64 / m_rot as f64
    }
}

/// Lattice of centres; n_grid = N sets the steps h = 1/N in every direction.
///
/// A node whose psi0 lies in [2^e psi_lo, 2^(e+1) psi_lo) is kept only on
/// levels k with 2^e | k, so the level spacing seen by a node is about h psi0.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "CentreSetRepr", into = "CentreSetRepr")]
pub struct CentreSet {
    pub epsilon: f64,
    pub region: CoverRegion,
    pub n_grid: usize,
    pub h: f64,
    /// Rotation factor: orbit angles 2 pi m / (M m_j).
    pub m_rot: usize,
    /// Translation factor: t' = nu / (M' psi).
    pub m_trans: usize,
    pub levels: Vec<Level>,
    geom: ModelGeometry,
}

#[derive(Serialize, Deserialize)]
struct CentreSetRepr {
    epsilon: f64,
    region: CoverRegion,
    n_grid: usize,
    h: f64,
    m_rot: usize,
    m_trans: usize,
    levels: Vec<Level>,
}

impl From<CentreSet> for CentreSetRepr {
    fn from(c: CentreSet) -> Self {
        CentreSetRepr {
            epsilon: c.epsilon,
            region: c.region,
            n_grid: c.n_grid,
            h: c.h,
            m_rot: c.m_rot,
            m_trans: c.m_trans,
            levels: c.levels,
        }
    }
}

impl TryFrom<CentreSetRepr> for CentreSet {
    type Error = ModelError;

    fn try_from(r: CentreSetRepr) -> Result<Self, ModelError> {
        Ok(CentreSet {
            geom: ModelGeometry::new(r.epsilon)?,
            epsilon: r.epsilon,
            region: r.region,
            n_grid: r.n_grid,
            h: r.h,
            m_rot: r.m_rot,
            m_trans: r.m_trans,
            levels: r.levels,
        })
    }
}

/// min over the Q-interval [a, b] of p^4 for points with |x| >= rho.
fn p4_min(a: f64, b: f64, rho: f64) -> f64 {
    let f = |q: f64| (2.0 * rho * rho + 2.0 * q).max(-2.0 * q);
    let qc = -0.5 * rho * rho;
    if a <= qc && qc <= b {
        rho * rho
    } else {
        f(a).min(f(b))
    }
}

/// x0 range (>= 0 part) on the quadric Q where rho_lo <= |x| <= rho_hi.
fn x0_band(q: f64, rho_lo: f64, rho_hi: f64) -> Option<(f64, f64)> {
    // |x|^2 = 3 x0^2 - 2Q on the quadric, and x0^2 >= Q
    let lo2 = ((rho_lo * rho_lo + 2.0 * q) / 3.0).max(q).max(0.0);
    let hi2 = (rho_hi * rho_hi + 2.0 * q) / 3.0;
    if hi2 < lo2 || hi2 < 0.0 {
        None
    } else {
        Some((lo2.sqrt(), hi2.sqrt()))
    }
}

fn make_segment(a_lo: f64, a_hi: f64, h: f64) -> Segment {
    let len = a_hi - a_lo;
    let n = ((len / h).ceil() as usize).max(1);
    Segment { a_lo, step: len / n as f64, n: n + 1 }
}

fn p4_on(q: f64, x0: f64) -> f64 {
    6.0 * x0 * x0 - 2.0 * q
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoverStats {
    pub samples: usize,
    pub uncovered: usize,
    pub worst_distance: f64,
    pub n_max: usize,
    pub psi_ratio_max: f64,
}

impl CentreSet {
    pub fn build(geom: &ModelGeometry, region: CoverRegion, n_grid: usize) -> Result<Self, ModelError> {
        if region.r_in < 4.0 - 1e-12 || region.r_out <= region.r_in {
            return Err(ModelError::Region(format!("cover region {region:?} not inside |x| >= 4")));
        }
        let arcs = ArcTables::shared();
        let h = 1.0 / n_grid as f64;
        let rc = region.r_out + region.margin;
        let psi = |p: f64| geom.psi.psi(p);
        let mut levels = Vec::new();
        let (q_min, q_max) = (-0.5 * rc * rc, rc * rc);
        let mut q = q_min;
        while q <= q_max {
            let mut step = h * psi(p4_min(q, q, R_PATH_MIN).sqrt().sqrt());
            for _ in 0..3 {
                step = h * psi(p4_min(q, q + step, R_PATH_MIN).sqrt().sqrt());
            }
            let psi_lo = step / h;
            let v = (levels.len() as u64 + (1u64 << E_MAX)).trailing_zeros();
            let (psi_cap, arc_cap) = if v >= E_MAX {
                (f64::MAX, f64::MAX)
            } else {
                let cap = psi_lo * 2f64.powi(v as i32 + 1);
                let pc = psi_inverse(geom, cap);
                let x2 = (pc.powi(4) + 2.0 * q) / 6.0;
                let a = if x2 <= q.max(0.0) { -1.0 } else { arcs.arc(q, x2.sqrt()) };
                (cap, a)
            };
            let mut segments = Vec::new();
            if let Some((lo, hi)) = x0_band(q, R_CENTRE_MIN, rc) {
                let (alo, ahi) = (arcs.arc(q, lo), arcs.arc(q, hi));
                if q > 0.0 || lo > 0.0 {
                    segments.push(make_segment(-ahi, -alo, h));
                    segments.push(make_segment(alo, ahi, h));
                } else {
                    segments.push(make_segment(-ahi, ahi, h));
                }
            }
            levels.push(Level { q, psi_lo, psi_cap, arc_cap, segments });
            q += step;
        }
        Ok(CentreSet {
            epsilon: geom.epsilon(),
            region,
            n_grid,
            h,
            m_rot: (2.0 * PI / h).ceil() as usize,
            m_trans: n_grid,
            levels,
            geom: geom.clone(),
        })
    }

    pub fn psi(&self, p: f64) -> f64 {
        self.geom.psi.psi(p)
    }

    /// Dyadic band e of a node: psi0 in [2^e psi_lo, 2^(e+1) psi_lo), clamped to [0, E_MAX].
    pub fn band(&self, k: usize, psi0: f64) -> u32 {
        let r = psi0 / self.levels[k].psi_lo;
        if r < 2.0 {
            0
        } else {
            (r.log2().floor() as u32).min(E_MAX)
        }
    }

    fn has_node(&self, k: usize, a: f64) -> bool {
        a.abs() <= self.levels[k].arc_cap
    }

    /// Number of lattice nodes (before rotations and translations).
    pub fn node_count(&self) -> usize {
        let mut n = 0;
        for (k, lv) in self.levels.iter().enumerate() {
            for sg in &lv.segments {
                n += (0..sg.n).filter(|&j| self.has_node(k, sg.a(j))).count();
            }
        }
        n
    }

    pub fn node(&self, k: usize, seg: usize, j: usize) -> NodeInfo {
        let lv = &self.levels[k];
        let a = lv.segments[seg].a(j);
        let x0 = ArcTables::shared().x0_at(lv.q, a);
        let r2 = (2.0 * (x0 * x0 - lv.q)).max(0.0);
        let p = p4_on(lv.q, x0).max(0.0).sqrt().sqrt();
        let r = r2.sqrt();
        NodeInfo {
            x0,
            h: x0 * r2,
            p,
            r,
            psi: self.psi(p),
            orbit: ((self.m_rot as f64 * p * r).ceil() as usize).max(1),
        }
    }

    /// Rotation images: ceil(M p r), so m_j = orbit / M is within 1/M of p r.
    pub fn orbit_size(&self, node: &NodeInfo) -> usize {
        node.orbit
    }

    pub fn centre_point(&self, id: &CentreId) -> ModelPoint {
        let nd = self.node(id.k, id.seg, id.j);
        let th = 2.0 * PI * id.m as f64 / self.orbit_size(&nd) as f64;
        let t = id.nu as f64 / (self.m_trans as f64 * nd.psi);
        ModelPoint::new(nd.x0, nd.r * th.cos(), nd.r * th.sin(), t)
    }

    /// Index of the last level with Q_k <= q.
    fn level_below(&self, q: f64) -> Option<usize> {
        let k = self.levels.partition_point(|l| l.q <= q);
        (k > 0).then(|| k - 1)
    }

    /// Length bound for the path at fixed (H, theta, t) between Q-values a and b
    /// with p^4 = pa, pb at the ends. Along such a path |dp^4/dQ| <= 4.
    fn q_leg(&self, a: f64, pa: f64, b: f64, pb: f64) -> f64 {
        let dq = (b - a).abs();
        let lo = (0.5 * (pa + pb) - 2.0 * dq).max(p4_min(a.min(b), a.max(b), R_PATH_MIN));
        dq / self.psi(lo.max(0.0).sqrt().sqrt())
    }

    /// All centres whose path bound to (x, t) is below `radius`, with the bound.
    pub fn near_centres(&self, x: &ModelPoint, radius: f64) -> Vec<(CentreId, f64)> {
        let mut out = Vec::new();
        let q = x.q();
        let p4x = x.p4();
        let hx = x.h();
        let sheet = if x.x0 < 0.0 { Sheet::Minus } else { Sheet::Plus };
        let theta = x.theta();
        let Some(kb) = self.level_below(q) else { return out };
        let arcs = ArcTables::shared();
        let mut visit = |k: usize| -> bool {
            let qk = self.levels[k].q;
            let dq = (qk - q).abs();
            // every path to this level is longer than dq / psi_max
            if dq >= radius * self.psi((p4x + 4.0 * dq).sqrt().sqrt()) {
                return false;
            }
            let Ok(x0p) = x0_from_qh(qk, hx, sheet) else { return true };
            if qk > 0.0 && x0p * x.x0 < 0.0 {
                return true;
            }
            let lq = self.q_leg(q, p4x, qk, p4_on(qk, x0p));
            if lq >= radius {
                return true;
            }
            let a = arcs.arc(qk, x0p);
            let rem = radius - lq;
            for (si, sg) in self.levels[k].segments.iter().enumerate() {
                let Some((j0, j1)) = sg.range(a - rem, a + rem) else { continue };
                for j in j0..=j1 {
                    let aj = sg.a(j);
                    if !self.has_node(k, aj) {
                        continue;
                    }
                    let ls = (a - aj).abs();
                    let nd = self.node(k, si, j);
                    let n = self.orbit_size(&nd);
                    let dth = 2.0 * PI / n as f64;
                    let m0 = (theta.rem_euclid(2.0 * PI) / dth).round() as i64;
                    let l = nd.p * nd.r;
                    let span = if l > 0.0 { ((rem / l) / dth).ceil() as i64 + 1 } else { n as i64 };
                    let ms: Vec<usize> = if 2 * span + 1 >= n as i64 {
                        (0..n).collect()
                    } else {
                        (-span..=span).map(|d| (m0 + d).rem_euclid(n as i64) as usize).collect()
                    };
                    let tstep = 1.0 / (self.m_trans as f64 * nd.psi);
                    let nu0 = (x.t / tstep).round() as i64;
                    for m in ms {
                        let lt = l * crate::sections::wrap_angle(theta - m as f64 * dth).abs();
                        if lq + ls + lt >= radius {
                            continue;
                        }
                        for nu in nu0 - 2..=nu0 + 2 {
                            let tot = lq + ls + lt + nd.psi * (x.t - nu as f64 * tstep).abs();
                            if tot < radius {
                                out.push((CentreId { k, seg: si, j, m, nu }, tot));
                            }
                        }
                    }
                }
            }
            true
        };
        let mut k = kb as i64;
        while k >= 0 && visit(k as usize) {
            k -= 1;
        }
        let mut k = kb + 1;
        while k < self.levels.len() && visit(k) {
            k += 1;
        }
        out
    }

    /// Points uniform in the spatial shell with t in [0, t_span).
    pub fn samples(&self, n: usize, t_span: f64, seed: u64) -> Vec<ModelPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (self.region.r_in, self.region.r_out);
        (0..n)
            .map(|_| {
                let r = (a.powi(3) + rng.gen::<f64>() * (b.powi(3) - a.powi(3))).cbrt();
                let z: f64 = rng.gen_range(-1.0..1.0);
                let ph = rng.gen_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).sqrt();
                ModelPoint::new(r * z, r * s * ph.cos(), r * s * ph.sin(), rng.gen_range(0.0..t_span))
            })
            .collect()
    }

    pub fn validate(&self, samples: &[ModelPoint], radius: f64) -> CoverStats {
        let res: Vec<(f64, usize, f64)> = samples
            .par_iter()
            .map(|x| {
                let near = self.near_centres(x, radius);
                let best = near.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                // psi ratio between the sample and every centre whose ball holds it
                let px = self.psi(x.p());
                let mut ratio: f64 = 1.0;
                let mut last = None;
                for (id, _) in &near {
                    let key = (id.k, id.seg, id.j);
                    if last == Some(key) {
                        continue;
                    }
                    last = Some(key);
                    let p0 = self.node(id.k, id.seg, id.j).psi;
                    ratio = ratio.max(px / p0).max(p0 / px);
                }
                (best, near.len(), ratio)
            })
            .collect();
        let mut st = CoverStats {
            samples: samples.len(),
            uncovered: 0,
            worst_distance: 0.0,
            n_max: 0,
            psi_ratio_max: 1.0,
        };
        for (d, c, r) in res {
            if !(d < radius) {
                st.uncovered += 1;
            }
            st.worst_distance = st.worst_distance.max(d);
            st.n_max = st.n_max.max(c);
            st.psi_ratio_max = st.psi_ratio_max.max(r);
        }
        st
    }
}

/// p with psi(p) = v (psi is increasing; p = 0 when v <= epsilon).
pub fn psi_inverse(geom: &ModelGeometry, v: f64) -> f64 {
    if v <= geom.psi.psi(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while geom.psi.psi(hi) < v {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if geom.psi.psi(mid) < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smallest grid parameter N >= n_start (in steps of 2) whose cover leaves no
/// sample uncovered.
pub fn build_cover(geom: &ModelGeometry, region: CoverRegion, n_samples: usize, seed: u64, n_start: usize) -> Result<(CentreSet, CoverStats), ModelError> {
    let mut n = n_start;
    loop {
        let cs = CentreSet::build(geom, region, n)?;
        let s = cs.samples(n_samples, 10.0, seed);
        let st = cs.validate(&s, 0.1);
        if st.uncovered == 0 {
            if st.psi_ratio_max > 1.1 {
                return Err(ModelError::Region(format!(
                    "psi varies by {} > 11/10 over a ball; epsilon too large",
                    st.psi_ratio_max
                )));
            }
            return Ok((cs, st));
        }
        n += 2;
        if n > 4 * n_start + 40 {
            return Err(ModelError::Region("no grid parameter covers the region".into()));
        }
    }
}

// ---------------------------------------------------------------------------
// sums

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SumEntry {
    pub sum: f64,
    pub delta_sum: f64,
    /// max over contributing nodes of (rotation-orbit sum) / (1 + |Q - Q0| / psi0)
    pub orbit_ratio: f64,
}

/// Colour of a centre for a hash with period P (rotation classes use 2P to respect wrap-around).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Colour {
    /// dyadic band of the node; levels are counted in steps of 2^band
    pub band: u32,
    pub k: usize,
    pub seg: usize,
    pub j: usize,
    pub m: usize,
    pub nu: usize,
}

/// Restricts a sum to one colour class and drops the centre `exclude`.
#[derive(Clone, Copy, Debug)]
pub struct ColourFilter {
    pub colour: Colour,
    pub period: usize,
    pub exclude: CentreId,
}

fn rotation_class(m: usize, orbit: usize, p: usize) -> usize {
    let full = (orbit / p) * p;
    if m < full {
        m % p
    } else {
        p + m % p
    }
}

pub fn colour_of(id: &CentreId, band: u32, orbit: usize, p: usize) -> Colour {
    Colour {
        band,
        k: (id.k >> band) % p,
        seg: id.seg,
        j: id.j % p,
        m: rotation_class(id.m, orbit, p),
        nu: id.nu.rem_euclid(p as i64) as usize,
    }
}

/// Window half-width W with exp(-alpha W^2) below 1e-18.
fn window(alpha: f64) -> f64 {
    (41.5 / alpha).sqrt()
}

impl CentreSet {
    /// Sums over centres x' in N(x) of E F Psi^p and delta E F Psi^p, optionally
    /// restricted to one colour class with one centre left out.
    pub fn sum_at(&self, x: &ModelPoint, alpha: f64, p_pow: i32, b1: f64, b2: f64, colour: Option<&ColourFilter>) -> SumEntry {
        let arcs = ArcTables::shared();
        let eps = self.epsilon;
        let q = x.q();
        let psi_x = self.psi(x.p());
        let w = window(alpha);
        let theta = x.theta();
        let mut out = SumEntry::default();
        let a_x = arcs.arc(q, x.x0);
        // the E window on x's quadric, as a range of H
        let a_lo_x = if q > 0.0 && x.x0 > 0.0 { (a_x - w).max(0.0) } else { a_x - w };
        let a_hi_x = if q > 0.0 && x.x0 < 0.0 { (a_x + w).min(0.0) } else { a_x + w };
        let h_at = |a: f64| {
            let x0 = arcs.x0_at(q, a);
            x0 * 2.0 * (x0 * x0 - q)
        };
        let (h_lo, h_hi) = (h_at(a_lo_x), h_at(a_hi_x));
        // nodes need psi0 >= dq * need
        let need = (1.0 / w).max(eps / (2.0 * b1));
        for (k, lv) in self.levels.iter().enumerate() {
            let dq = (lv.q - q).abs();
            if dq >= need * lv.psi_cap {
                continue;
            }
            if let Some(f) = colour {
                if k % (1 << f.colour.band) != 0 || (k >> f.colour.band) % f.period != f.colour.k {
                    continue;
                }
            }
            let arc_min = {
                let pr = psi_inverse(&self.geom, dq * need);
                let x2 = (pr.powi(4) + 2.0 * lv.q) / 6.0;
                if x2 > 0.0 {
                    arcs.arc(lv.q, x2.sqrt())
                } else {
                    0.0
                }
            };
            if arc_min > lv.arc_cap {
                continue;
            }
            let to_level = |hh: f64| -> Option<f64> {
                let sheet = if hh < 0.0 { Sheet::Minus } else { Sheet::Plus };
                x0_from_qh(lv.q, hh, sheet).ok().map(|x0| arcs.arc(lv.q, x0))
            };
            // H -> arc on the level is increasing on each sheet; Q > 0 levels have
            // no points with H between the two axis values
            let al = to_level(h_lo).unwrap_or(f64::NEG_INFINITY);
            let ah = to_level(h_hi).unwrap_or(f64::INFINITY);
            let (al, ah) = (al.min(ah), al.max(ah));
            let cap = lv.arc_cap;
            for (si, sg) in lv.segments.iter().enumerate() {
                if let Some(f) = colour {
                    if si != f.colour.seg {
                        continue;
                    }
                }
                let Some((j0, j1)) = sg.range(al.max(-cap), ah.min(cap)) else { continue };
                for j in j0..=j1 {
                    if let Some(f) = colour {
                        if j % f.period != f.colour.j {
                            continue;
                        }
                    }
                    if sg.a(j).abs() < arc_min {
                        continue;
                    }
                    let nd = self.node(k, si, j);
                    let psi0 = nd.psi;
                    if let Some(f) = colour {
                        if self.band(k, psi0) != f.colour.band {
                            continue;
                        }
                    }
                    // support N(x)
                    if dq > 2.0 * b1 * psi0 / eps {
                        continue;
                    }
                    if nd.x0 * x.x0 < 0.0 && q > -b2 * psi_x / (2.0 * eps) {
                        continue;
                    }
                    let f_q = (-alpha * dq * dq / (psi0 * psi0)).exp();
                    if f_q < 1e-18 {
                        continue;
                    }
                    // E on x's quadric, centred where H = H0
                    let sheet = if nd.x0 < 0.0 { Sheet::Minus } else { Sheet::Plus };
                    let Ok(xb) = x0_from_qh(q, nd.h, sheet) else { continue };
                    if q > 0.0 && xb * x.x0 < 0.0 {
                        continue;
                    }
                    let s_arc = (arcs.arc(q, xb) - a_x).abs();
                    let e_s = (-alpha * s_arc * s_arc).exp();
                    if e_s < 1e-18 {
                        continue;
                    }
                    let l = p4_on(q, xb).max(0.0).sqrt().sqrt() * (2.0 * (xb * xb - q)).max(0.0).sqrt();
                    let n = self.orbit_size(&nd);
                    let sig_th = orbit_sum(theta, l, n, alpha, colour);
                    let tstep = 1.0 / (self.m_trans as f64 * psi0);
                    let sig_t = translation_sum(x.t, tstep, psi0, alpha, colour.map(|f| (f.colour.nu, f.period)));
                    let mut excl = 0.0;
                    if let Some(ColourFilter { exclude: id, .. }) = colour {
                        if id.k == k && id.seg == si && id.j == j {
                            let d = crate::sections::wrap_angle(theta - 2.0 * PI * id.m as f64 / n as f64);
                            let tt = x.t - id.nu as f64 * tstep;
                            excl = (-alpha * (l * l * d * d + psi0 * psi0 * tt * tt)).exp();
                        }
                    }
                    let big = psi_x / psi0 + psi0 / psi_x;
                    let delta = (psi_x / psi0 - psi0 / psi_x).abs();
                    let term = e_s * f_q * big.powi(p_pow) * (sig_th * sig_t - excl);
                    out.sum += term;
                    out.delta_sum += delta * term;
                    out.orbit_ratio = out.orbit_ratio.max(sig_th / (1.0 + dq / psi0));
                }
            }
        }
        out
    }
}

/// sum over the orbit of exp(-alpha L^2 dtheta_m^2), dtheta_m wrapped to (-pi, pi].
fn orbit_sum(theta: f64, l: f64, n: usize, alpha: f64, colour: Option<&ColourFilter>) -> f64 {
    let dth = 2.0 * PI / n as f64;
    let w = window(alpha);
    let span = if l > 0.0 { ((w / l) / dth).ceil() as i64 + 1 } else { n as i64 };
    let m0 = (theta.rem_euclid(2.0 * PI) / dth).round() as i64;
    let all = 2 * span + 1 >= n as i64;
    let count = if all { n as i64 } else { 2 * span + 1 };
    let mut s = 0.0;
    for i in 0..count {
        let m = if all { i } else { (m0 - span + i).rem_euclid(n as i64) } as usize;
        if let Some(f) = colour {
            if rotation_class(m, n, f.period) != f.colour.m {
                continue;
            }
        }
        let d = crate::sections::wrap_angle(theta - m as f64 * dth);
        s += (-alpha * l * l * d * d).exp();
    }
    s
}

/// sum over nu of exp(-alpha psi0^2 (t - nu tstep)^2), optionally over nu = c mod P.
fn translation_sum(t: f64, tstep: f64, psi0: f64, alpha: f64, class: Option<(usize, usize)>) -> f64 {
    let w = window(alpha) / psi0;
    let lo = ((t - w) / tstep).floor() as i64;
    let hi = ((t + w) / tstep).ceil() as i64;
    let mut s = 0.0;
    for nu in lo..=hi {
        if let Some((c, p)) = class {
            if nu.rem_euclid(p as i64) as usize != c {
                continue;
            }
        }
        let d = t - nu as f64 * tstep;
        s += (-alpha * psi0 * psi0 * d * d).exp();
    }
    s
}

/// sum_i exp(-((A i + C)/B)^2) over i in Z and the bound 1 + sqrt(pi) B / A.
pub fn arithmetic_sum(a: f64, b: f64, c: f64) -> (f64, f64) {
    let centre = (-c / a).round() as i64;
    let span = ((7.0 * b / a).ceil() as i64).max(1) + 1;
    let mut s = 0.0;
    for i in (centre - span)..=(centre + span) {
        let u = (a * i as f64 + c) / b;
        s += (-u * u).exp();
    }
    (s, 1.0 + PI.sqrt() * b / a)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SumReport {
    pub epsilon: f64,
    pub alpha: f64,
    pub p_pow: i32,
    pub samples: usize,
    pub max_sum: f64,
    pub max_delta_sum: f64,
    pub max_delta_sum_over_eps: f64,
    pub orbit_const: f64,
    pub entries: Vec<SumEntry>,
}

pub fn sum_localized(cs: &CentreSet, samples: &[ModelPoint], alpha: f64, p_pow: i32, b1: f64, b2: f64) -> SumReport {
    let entries: Vec<SumEntry> = samples.par_iter().map(|x| cs.sum_at(x, alpha, p_pow, b1, b2, None)).collect();
    let max_sum = entries.iter().map(|e| e.sum).fold(0.0, f64::max);
    let max_delta_sum = entries.iter().map(|e| e.delta_sum).fold(0.0, f64::max);
    SumReport {
        epsilon: cs.epsilon,
        alpha,
        p_pow,
        samples: samples.len(),
        max_sum,
        max_delta_sum,
        max_delta_sum_over_eps: max_delta_sum / cs.epsilon,
        orbit_const: entries.iter().map(|e| e.orbit_ratio).fold(0.0, f64::max),
        entries,
    }
}

// ---------------------------------------------------------------------------
// colouring

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ColouringReport {
    pub d: f64,
    pub period: usize,
    /// Upper bound on the number of colour classes.
    pub classes: usize,
    pub k_const: f64,
    /// max over samples of (same-colour leakage) e^D
    pub leakage_const: f64,
}

/// Hash period for separation D: same-colour centres differ by at least 2D/h steps
/// in one lattice direction.
pub fn colour_period(cs: &CentreSet, d: f64) -> usize {
    ((2.0 * d / cs.h).ceil() as usize).max(1)
}

pub fn partition_colouring(cs: &CentreSet, d: f64, samples: &[ModelPoint], alpha: f64, b1: f64, b2: f64) -> ColouringReport {
    let p = colour_period(cs, d);
    let segs = cs.levels.iter().map(|l| l.segments.len()).max().unwrap_or(1);
    // p^4 = 2|x|^2 + 2Q <= 4 |x|^2 on the centre region
    let rc = cs.region.r_out + cs.region.margin;
    let psi_max = cs.psi((4.0 * rc * rc).sqrt().sqrt());
    let psi_min = cs.levels.iter().map(|l| l.psi_lo).fold(f64::INFINITY, f64::min);
    let bands = ((psi_max / psi_min).log2().floor().max(0.0) as usize).min(E_MAX as usize) + 1;
    let classes = p * p * (2 * p) * p * segs * bands;
    let leak = samples
        .par_iter()
        .map(|x| {
            let near = cs.near_centres(x, 0.1);
            let Some((id, _)) = near.iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()) else { return 0.0 };
            let nd = cs.node(id.k, id.seg, id.j);
            let col = colour_of(id, cs.band(id.k, nd.psi), cs.orbit_size(&nd), p);
            let f = ColourFilter { colour: col, period: p, exclude: *id };
            let e = cs.sum_at(x, alpha, 1, b1, b2, Some(&f));
            e.sum.max(0.0) * d.exp()
        })
        .reduce(|| 0.0, f64::max);
    ColouringReport {
        d,
        period: p,
        classes,
        k_const: classes as f64 / d.powi(4),
        leakage_const: leak,
    }
}
