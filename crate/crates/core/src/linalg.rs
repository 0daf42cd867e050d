//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Singular value decomposition `M = U diag(s) V^H` with `s` descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

/// SVD of a square matrix with descending singular values.
///
/// Columns belonging to singular values that agree within `1e-12` are made
/// canonical: each left vector is rotated so its first non-negligible entry
/// is real positive (the right vector gets the same phase), then the tied
/// columns are sorted lexicographically by the `(re, im)` parts of the left
/// vectors.
pub fn svd(m: &CMatrix) -> Svd {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "svd expects a square matrix");
    if n == 0 {
        return Svd {
            u: CMatrix::zeros(0, 0),
            s: vec![],
            v: CMatrix::zeros(0, 0),
        };
    }
    let dec = to_faer(m).svd().expect("svd of a finite matrix");
    let (u, v, sv) = (from_faer(dec.U()), from_faer(dec.V()), dec.S());
    let mut cols: Vec<(f64, CVector, CVector)> = (0..n)
        .map(|j| {
            let mut uj = u.column(j).into_owned();
            let mut vj = v.column(j).into_owned();
            let phase = leading_phase(&uj);
            uj *= phase.conj();
            vj *= phase.conj();
            (sv[j].re, uj, vj)
        })
        .collect();
    cols.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= 1e-12 {
            lex_cmp(&a.1, &b.1)
        } else {
            b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let mut uo = CMatrix::zeros(n, n);
    let mut vo = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (j, (sj, uj, vj)) in cols.into_iter().enumerate() {
        s.push(sj);
        uo.set_column(j, &uj);
        vo.set_column(j, &vj);
    }
    Svd { u: uo, s, v: vo }
}

fn to_faer(m: &CMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, Complex64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues of a general square matrix.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return vec![];
    }
    to_faer(m).eigenvalues().expect("eigenvalues of a finite matrix")
}

fn leading_phase(v: &CVector) -> Complex64 {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for z in v.iter() {
        if z.norm() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return *z / z.norm();
        }
    }
    ONE
}

fn lex_cmp(a: &CVector, b: &CVector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x
            .re
            .partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], CMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = to_faer(&h)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("eigen-decomposition of a finite matrix");
    let (s, u) = (eig.S(), from_faer(eig.U()));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| s[b].re.partial_cmp(&s[a].re).unwrap_or(std::cmp::Ordering::Equal));
    let vals = idx.iter().map(|&i| s[i].re).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        vecs.set_column(j, &u.column(i));
    }
    (vals, vecs)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Negative rounding-level eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| Complex64::new(x.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Lower Cholesky factor of a Hermitian positive definite matrix. Fails with
/// `RankDeficiency` when the smallest pivot falls below `rel_tol` times the
/// largest diagonal entry.
pub fn cholesky(g: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    let n = g.nrows();
    let scale = (0..n).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d.is_nan() || d <= rel_tol * scale {
            return Err(Error::RankDeficiency(format!(
                "Gram pivot {j} is {d:.3e} (scale {scale:.3e})"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a lower triangular matrix.
pub fn lower_inverse(l: &CMatrix) -> CMatrix {
    let n = l.nrows();
    let mut inv = CMatrix::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { ONE } else { ZERO };
            for k in c..i {
                s -= l[(i, k)] * inv[(k, c)];
            }
            inv[(i, c)] = s / l[(i, i)];
        }
    }
    inv
}

/// Solve `a x = b` by LU with partial pivoting; `None` when `a` is singular.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    a.clone().lu().solve(b)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Number of eigenvalues of a Hermitian matrix above `abs_tol`.
pub fn rank_above(m: &CMatrix, abs_tol: f64) -> usize {
    hermitian_eigen(m).0.iter().filter(|&&x| x > abs_tol).count()
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CVector {
    CVector::from_iterator(m, (0..m).map(|_| complex_normal(rng)))
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CVector {
    loop {
        let v = random_vector(rng, m);
        let n = vec_norm(&v);
        if n > 1e-3 {
            return v / Complex64::new(n, 0.0);
        }
    }
}

/// Haar-distributed unitary via QR of a complex Gaussian matrix with the
/// diagonal phases of R removed.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CMatrix {
    let g = CMatrix::from_fn(m, m, |_, _| complex_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = q.column_mut(j);
        col *= ph;
    }
    q
}
