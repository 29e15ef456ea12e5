//! Pointwise exterior algebra on R^4 with coordinates (x0, x1, x2, t).
//!
//! Two-forms use the basis e01, e02, e03, e12, e13, e23 where index 3 is dt.

use nalgebra::{Matrix4, Matrix6, SymmetricEigen, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec4 = [f64; 4];

/// Index pairs (i<j) of the two-form basis, in storage order.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
/// Index triples of the three-form basis, in storage order.
pub const TRIPLES: [(usize, usize, usize); 4] = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("metric is not positive definite")]
    NotPositiveDefinite,
    #[error("metric is not symmetric")]
    NotSymmetric,
    #[error("two-form is degenerate (w^w = {0})")]
    Degenerate(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoForm(pub [f64; 6]);

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThreeForm(pub [f64; 4]);

impl TwoForm {
    pub fn zero() -> Self {
        TwoForm([0.0; 6])
    }

    /// Basis element dx_i ^ dx_j (i != j, any order).
    pub fn basis(i: usize, j: usize) -> Self {
        let mut w = TwoForm::zero();
        w.set(i, j, 1.0);
        w
    }

    /// Coefficient w_ij with antisymmetry.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b, s) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let k = PAIRS.iter().position(|&p| p == (a, b)).unwrap();
        s * self.0[k]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b, s) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let k = PAIRS.iter().position(|&p| p == (a, b)).unwrap();
        self.0[k] = s * v;
    }

    /// Skew matrix W with W[i][j] = w(e_i, e_j).
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            m[(i, j)] = self.0[k];
            m[(j, i)] = -self.0[k];
        }
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let mut w = TwoForm::zero();
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            w.0[k] = 0.5 * (m[(i, j)] - m[(j, i)]);
        }
        w
    }

    /// w(u, v).
    pub fn eval(&self, u: &Vec4, v: &Vec4) -> f64 {
        let mut s = 0.0;
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            s += self.0[k] * (u[i] * v[j] - u[j] * v[i]);
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        TwoForm(self.0.map(|c| c * s))
    }

    pub fn add(&self, o: &TwoForm) -> Self {
        let mut r = *self;
        for k in 0..6 {
            r.0[k] += o.0[k];
        }
        r
    }

    pub fn sub(&self, o: &TwoForm) -> Self {
        self.add(&o.scale(-1.0))
    }

    /// Wedge of two one-forms.
    pub fn wedge1(a: &Vec4, b: &Vec4) -> Self {
        let mut w = TwoForm::zero();
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            w.0[k] = a[i] * b[j] - a[j] * b[i];
        }
        w
    }
}

/// Coefficient of dx0^dx1^dx2^dt in a^b.
pub fn wedge_pair(a: &TwoForm, b: &TwoForm) -> f64 {
    let (a, b) = (&a.0, &b.0);
    a[0] * b[5] + a[5] * b[0] - a[1] * b[4] - a[4] * b[1] + a[2] * b[3] + a[3] * b[2]
}

/// Liouville density: w^w = 2 * liouville(w) * vol, i.e. the "w^2" of the
/// symplectic literature (w^2/2! convention folded in).
pub fn liouville(w: &TwoForm) -> f64 {
    0.5 * wedge_pair(w, w)
}

/// Gram matrix of the wedge pairing in the storage basis.
pub fn wedge_gram() -> Matrix6<f64> {
    let mut g = Matrix6::zeros();
    for i in 0..6 {
        for j in 0..6 {
            let mut a = TwoForm::zero();
            let mut b = TwoForm::zero();
            a.0[i] = 1.0;
            b.0[j] = 1.0;
            g[(i, j)] = wedge_pair(&a, &b);
        }
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTensor(pub Matrix4<f64>);

impl MetricTensor {
    pub fn euclidean() -> Self {
        MetricTensor(Matrix4::identity())
    }

    pub fn new(m: Matrix4<f64>) -> Result<Self, FormError> {
        let scale = m.abs().max().max(1e-300);
        if (m - m.transpose()).abs().max() > 1e-12 * scale {
            return Err(FormError::NotSymmetric);
        }
        let sym = 0.5 * (m + m.transpose());
        if sym.cholesky().is_none() {
            return Err(FormError::NotPositiveDefinite);
        }
        let ev = SymmetricEigen::new(sym).eigenvalues;
        if ev.min() <= 0.0 {
            return Err(FormError::NotPositiveDefinite);
        }
        Ok(MetricTensor(sym))
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let e = SymmetricEigen::new(self.0).eigenvalues;
        [e[0], e[1], e[2], e[3]]
    }
}

fn perm_sign(p: [usize; 4]) -> f64 {
    let mut s = 1.0;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] == p[j] {
                return 0.0;
            }
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

/// Hodge star on two-forms: (*w)_ij = sqrt(det g) sum_{a<b} eps_{abij} w^{ab}.
pub fn hodge_star(w: &TwoForm, g: &MetricTensor) -> TwoForm {
    let ginv = g.0.try_inverse().expect("positive definite metric is invertible");
    let up = ginv * w.to_matrix() * ginv;
    let vol = g.det().sqrt();
    let mut out = TwoForm::zero();
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        let mut s = 0.0;
        for &(a, b) in PAIRS.iter() {
            s += perm_sign([a, b, i, j]) * up[(a, b)];
        }
        out.0[k] = vol * s;
    }
    out
}

/// Matrix of the star operator in the storage basis (columns = images of basis forms).
pub fn star_matrix(g: &MetricTensor) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    for k in 0..6 {
        let mut e = TwoForm::zero();
        e.0[k] = 1.0;
        let s = hodge_star(&e, g);
        for r in 0..6 {
            m[(r, k)] = s.0[r];
        }
    }
    m
}

/// Central-difference exterior derivative of a two-form field.
pub fn exterior_derivative_fd<F: Fn(&Vec4) -> TwoForm>(field: F, x: &Vec4, h: f64) -> ThreeForm {
    let partials = partial_derivatives(&field, x, h);
    let mut d = ThreeForm::default();
    for (k, &(i, j, l)) in TRIPLES.iter().enumerate() {
        d.0[k] = partials[i].get(j, l) - partials[j].get(i, l) + partials[l].get(i, j);
    }
    d
}

fn partial_derivatives<F: Fn(&Vec4) -> TwoForm>(field: &F, x: &Vec4, h: f64) -> [TwoForm; 4] {
    let mut out = [TwoForm::zero(); 4];
    for (i, o) in out.iter_mut().enumerate() {
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        *o = field(&xp).sub(&field(&xm)).scale(0.5 / h);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    Symplectic,
    TransverseZero,
    Violation,
}

pub const RANK_THRESHOLD: f64 = 1e-6;

/// Pointwise near-symplectic classification of a two-form field at x.
pub fn near_symplectic_check<F: Fn(&Vec4) -> TwoForm>(field: F, x: &Vec4) -> Diagnosis {
    let w = field(x);
    let zero_tol = 1e-9;
    if w.norm() > zero_tol {
        return if wedge_pair(&w, &w) > 1e-12 * w.norm().powi(2) {
            Diagnosis::Symplectic
        } else {
            Diagnosis::Violation
        };
    }
    let partials = partial_derivatives(&field, x, 1e-4);
    let mut d = DMatrix::<f64>::zeros(6, 4);
    for (c, p) in partials.iter().enumerate() {
        for r in 0..6 {
            d[(r, c)] = p.0[r];
        }
    }
    let svd = d.svd(true, false);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return Diagnosis::Violation;
    }
    let u = svd.u.unwrap();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > RANK_THRESHOLD * smax)
        .collect();
    if keep.len() != 3 {
        return Diagnosis::Violation;
    }
    let basis: Vec<TwoForm> = keep
        .iter()
        .map(|&k| {
            let mut f = TwoForm::zero();
            for r in 0..6 {
                f.0[r] = u[(r, k)];
            }
            f
        })
        .collect();
    let mut gram = nalgebra::Matrix3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            gram[(a, b)] = wedge_pair(&basis[a], &basis[b]);
        }
    }
    if SymmetricEigen::new(gram).eigenvalues.min() > 1e-9 {
        Diagnosis::TransverseZero
    } else {
        Diagnosis::Violation
    }
}

/// Unit-determinant metric for which w is self-dual: g = sqrt(W^T W) / det^(1/4).
///
/// J = A (A^T A)^(-1/2) with A = -W, and g(u,v) = w(u, Jv) reduces to sqrt(W^T W).
pub fn metric_from_form(w: &TwoForm) -> Result<MetricTensor, FormError> {
    let q = wedge_pair(w, w);
    if !(q > 1e-14 * w.norm().powi(2)) || w.norm() == 0.0 {
        return Err(FormError::Degenerate(q));
    }
    let wm = w.to_matrix();
    let eig = SymmetricEigen::new(wm.transpose() * wm);
    let sq = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let p = eig.eigenvectors * Matrix4::from_diagonal(&sq) * eig.eigenvectors.transpose();
    let det = p.determinant();
    let g = p / det.powf(0.25);
    MetricTensor::new(0.5 * (g + g.transpose()))
}

/// Compatible complex structure J = A (A^T A)^(-1/2), A = -W.
pub fn complex_structure_from_form(w: &TwoForm) -> Result<Matrix4<f64>, FormError> {
    let q = wedge_pair(w, w);
    if !(q > 0.0) {
        return Err(FormError::Degenerate(q));
    }
    let a = -w.to_matrix();
    let eig = SymmetricEigen::new(a.transpose() * a);
    let isq = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let pinv = eig.eigenvectors * Matrix4::from_diagonal(&isq) * eig.eigenvectors.transpose();
    Ok(a * pinv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_wedges() {
        let e01 = TwoForm::basis(0, 1);
        let e23 = TwoForm::basis(2, 3);
        let e02 = TwoForm::basis(0, 2);
        assert_eq!(wedge_pair(&e01, &e23), 1.0);
        assert_eq!(wedge_pair(&e01, &e02), 0.0);
        // e02^e13 = -vol, e03^e12 = +vol
        assert_eq!(wedge_pair(&e02, &TwoForm::basis(1, 3)), -1.0);
        assert_eq!(wedge_pair(&TwoForm::basis(0, 3), &TwoForm::basis(1, 2)), 1.0);
    }

    #[test]
    fn gram_signature_is_three_three() {
        let ev = SymmetricEigen::new(wedge_gram()).eigenvalues;
        assert_eq!(ev.iter().filter(|&&l| l > 0.5).count(), 3);
        assert_eq!(ev.iter().filter(|&&l| l < -0.5).count(), 3);
    }

    #[test]
    fn euclidean_star_table() {
        let g = MetricTensor::euclidean();
        let s = hodge_star(&TwoForm::basis(0, 1), &g);
        assert_eq!(s, TwoForm::basis(2, 3));
        assert_eq!(hodge_star(&TwoForm::basis(0, 2), &g), TwoForm::basis(1, 3).scale(-1.0));
        assert_eq!(hodge_star(&TwoForm::basis(0, 3), &g), TwoForm::basis(1, 2));
    }

    #[test]
    fn d_of_polynomial_form() {
        let field = |x: &Vec4| TwoForm::basis(1, 2).scale(x[0]);
        let d = exterior_derivative_fd(field, &[0.3, -0.2, 1.0, 0.5], 1e-4);
        assert!((d.0[0] - 1.0).abs() < 1e-10);
        assert!(d.0[1..].iter().all(|c| c.abs() < 1e-10));
        let c = exterior_derivative_fd(|_| TwoForm([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), &[0.0; 4], 1e-4);
        assert_eq!(c.0, [0.0; 4]);
    }

    #[test]
    fn rank_two_is_violation() {
        let d = near_symplectic_check(|_| TwoForm::basis(0, 1), &[0.1, 0.2, 0.3, 0.0]);
        assert_eq!(d, Diagnosis::Violation);
        let z = near_symplectic_check(|_| TwoForm::zero(), &[0.0; 4]);
        assert_eq!(z, Diagnosis::Violation);
    }

    #[test]
    fn metric_from_standard_form() {
        let w = TwoForm::basis(0, 1).add(&TwoForm::basis(2, 3));
        let g = metric_from_form(&w).unwrap();
        assert!((g.0 - Matrix4::identity()).abs().max() < 1e-12);
        let g2 = metric_from_form(&w.scale(2.0)).unwrap();
        assert!((g2.0 - g.0).abs().max() < 1e-12);
        assert!(metric_from_form(&TwoForm::basis(0, 1)).is_err());
    }

    #[test]
    fn non_pd_metric_rejected() {
        let m = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
        assert_eq!(MetricTensor::new(m), Err(FormError::NotPositiveDefinite));
    }
}
