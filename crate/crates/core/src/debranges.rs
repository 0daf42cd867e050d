//! De Branges spaces `B(𝔈)` for rational pairs `𝔈 = [E_- E_+]`.
//!
//! The space is `E_+ H(Θ)` with `Θ = E_+^{-1} E_-`, normed by
//! `⟨f, g⟩ = ⟨E_+^{-1} f, E_+^{-1} g⟩` on the boundary. All the operator
//! machinery of [`crate::basicop`] runs unchanged on the weighted basis.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basicop::{self, assemble, assemble_adjoint, weighted_shift, NormReport, OperatorMatrix};
use crate::domains::{self, adjoint_coefficients, check_alpha, rho_diag, DomainKind};
use crate::error::{Error, Result};
use crate::inner::{check_inner, random_bp, InnerFunction};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::modelspace::{build_weighted_from_inner, build_weighted_generic, ModelSpaceBasis};
use crate::rational::{MatRational, Poly, VecRational};

/// Relative distance within which a zero of `det` of the numerator of `E_+`
/// is taken to cancel a root of its denominator.
const CANCEL_TOL: f64 = 1e-4;

/// A zero `z` of `det E_+` with `ρ_z(z) ≥ -CLOSURE_TOL (1 + |z|²)` counts as
/// lying in the closed domain.
const CLOSURE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DeBrangesMatrix {
    pub kind: DomainKind,
    pub m: usize,
    pub e_minus: MatRational,
    pub e_plus: MatRational,
    /// Zeros of `det E_+`, all outside the closed domain.
    pub zeros: Vec<Complex64>,
    /// `dim B(𝔈)`, the number of zeros of `det Θ` in the domain.
    pub dim: usize,
}

/// JSON form: `{"domain", "m", "e_minus", "e_plus"}` with rational matrices
/// in the format of [`crate::rational::MatRationalJson`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeBrangesJson {
    pub domain: DomainKind,
    pub m: usize,
    pub e_minus: MatRational,
    pub e_plus: MatRational,
}

impl DeBrangesJson {
    pub fn build(&self) -> Result<DeBrangesMatrix> {
        if self.e_plus.shape() != (self.m, self.m) {
            return Err(Error::Dimension(format!("e_plus is {:?}, expected {}x{}", self.e_plus.shape(), self.m, self.m)));
        }
        DeBrangesMatrix::new(self.domain, self.e_minus.clone(), self.e_plus.clone())
    }
}

impl From<&DeBrangesMatrix> for DeBrangesJson {
    fn from(d: &DeBrangesMatrix) -> Self {
        DeBrangesJson { domain: d.kind, m: d.m, e_minus: d.e_minus.clone(), e_plus: d.e_plus.clone() }
    }
}

/// Determinant of a square matrix of polynomials by cofactor expansion.
fn poly_det(entries: &[Poly], m: usize) -> Poly {
    match m {
        0 => Poly::constant(ONE),
        1 => entries[0].clone(),
        _ => {
            let mut acc = Poly::zero();
            for j in 0..m {
                let minor: Vec<Poly> = (1..m)
                    .flat_map(|i| (0..m).filter(move |&k| k != j).map(move |k| (i, k)))
                    .map(|(i, k)| entries[i * m + k].clone())
                    .collect();
                let term = entries[j].mul(&poly_det(&minor, m - 1));
                acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
            }
            acc
        }
    }
}

/// Drop leading coefficients that are cancellation noise relative to the
/// largest one.
fn trim_relative(mut p: Poly, tol: f64) -> Poly {
    let scale = p.0.iter().map(|c| c.norm()).fold(0.0, f64::max);
    while p.0.last().is_some_and(|c| c.norm() <= tol * scale) {
        p.0.pop();
    }
    p
}

impl DeBrangesMatrix {
    /// Validate a rational pair: `E_+` square with no zeros of its determinant
    /// in the closed domain, and `E_+^{-1} E_-` inner.
    pub fn new(kind: DomainKind, e_minus: MatRational, e_plus: MatRational) -> Result<Self> {
        let m = e_plus.rows();
        if m == 0 || e_plus.shape() != (m, m) || e_minus.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "E_+ is {:?} and E_- is {:?}; both must be square of the same size",
                e_plus.shape(),
                e_minus.shape()
            )));
        }
        let nums: Vec<Poly> = (0..m * m).map(|k| e_plus.entry(k / m, k % m).clone()).collect();
        let det = trim_relative(poly_det(&nums, m), 1e-12);
        if det.degree().is_none() {
            return Err(Error::SingularEPlus(ZERO, "det E_+ vanishes identically".into()));
        }
        let mut cancellable: Vec<Complex64> =
            e_plus.den_roots().iter().flat_map(|&p| std::iter::repeat_n(p, m)).collect();
        let mut zeros = Vec::new();
        for z in det.roots() {
            if let Some(pos) = cancellable.iter().position(|&p| (p - z).norm() <= CANCEL_TOL * (1.0 + p.norm())) {
                cancellable.swap_remove(pos);
                continue;
            }
            if rho_diag(kind, z) >= -CLOSURE_TOL * (1.0 + z.norm_sqr()) {
                return Err(Error::SingularEPlus(
                    z,
                    "det E_+ has a zero in the closed domain; E_+ must be invertible on its closure".into(),
                ));
            }
            zeros.push(z);
        }
        for z in domains::generic_points(kind, 20) {
            if e_plus.eval(z)?.determinant().norm() < 1e-12 {
                return Err(Error::SingularEPlus(z, "det E_+ vanishes at a sample point".into()));
            }
        }
        let theta_at = |z: Complex64| -> Result<CMatrix> {
            linalg::solve(&e_plus.eval(z)?, &e_minus.eval(z)?).ok_or_else(|| Error::SingularEPlus(z, "LU failed".into()))
        };
        check_inner(kind, theta_at)?;
        let w = domains::winding_number(kind, |z| {
            let t = theta_at(z)?;
            Ok(t.determinant())
        })?;
        let dim = usize::try_from(w).map_err(|_| Error::NotInner(format!("negative winding {w}")))?;
        Ok(DeBrangesMatrix { kind, m, e_minus, e_plus, zeros, dim })
    }

    /// `𝔈 = [Θ I]`, whose space is `H(Θ)`.
    pub fn from_inner(theta: &InnerFunction) -> Result<Self> {
        Self::new(theta.kind, theta.rational.clone(), MatRational::identity(theta.m))
    }
}

#[derive(Clone, Debug)]
pub struct DeBrangesSpace {
    pub matrix: DeBrangesMatrix,
    pub space: ModelSpaceBasis,
}

impl DeBrangesSpace {
    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn weighted_inner(&self, f: &VecRational, g: &VecRational) -> Result<Complex64> {
        self.space.inner(f, g)
    }
}

/// Orthonormal basis from weighted kernel sections at generic points.
pub fn build_space(matrix: &DeBrangesMatrix) -> Result<DeBrangesSpace> {
    let space = build_weighted_generic(
        matrix.kind,
        matrix.e_plus.clone(),
        matrix.e_minus.clone(),
        matrix.zeros.clone(),
        matrix.dim,
    )?;
    Ok(DeBrangesSpace { matrix: matrix.clone(), space })
}

/// Basis `E_+ e_k` from a model-space basis `e_k` of a known `Θ`, which must
/// agree with `E_+^{-1} E_-`.
pub fn build_space_from_inner(matrix: &DeBrangesMatrix, theta: &InnerFunction) -> Result<DeBrangesSpace> {
    if theta.degree != matrix.dim || theta.kind != matrix.kind {
        return Err(Error::Invalid(format!(
            "inner function of degree {} does not match dim B(E) = {}",
            theta.degree, matrix.dim
        )));
    }
    for z in domains::generic_points(matrix.kind, 8) {
        let lhs = matrix.e_plus.eval(z)? * theta.eval(z)?;
        let rhs = matrix.e_minus.eval(z)?;
        if linalg::max_abs(&(&lhs - &rhs)) > 1e-9 * (1.0 + linalg::max_abs(&rhs)) {
            return Err(Error::Invalid("E_- differs from E_+ Theta".into()));
        }
    }
    let space = build_weighted_from_inner(matrix.e_plus.clone(), matrix.zeros.clone(), theta)?;
    Ok(DeBrangesSpace { matrix: matrix.clone(), space })
}

/// Matrix of `B_α = Π_𝔈 b_α` in the weighted basis. Needs `E_+(α)` invertible.
pub fn basic_operator_b(space: &DeBrangesSpace, alpha: Complex64) -> Result<OperatorMatrix> {
    check_alpha(space.matrix.kind, alpha)?;
    space.space.theta_at(alpha)?;
    assemble(&space.space, alpha)
}

pub fn verify_norm_b(space: &DeBrangesSpace, alpha: Complex64, tol_sv: f64) -> Result<NormReport> {
    check_alpha(space.matrix.kind, alpha)?;
    basicop::verify_norm(&space.space, alpha, tol_sv)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeBrangesIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Pointwise gap in `(1/b_α) f = B_α* f + c₂ E_+ (E_+^{-1}f)(α)/(λ-α)`.
    pub pointwise_residual: f64,
    /// Size of the projection of the last term onto the space, which vanishes.
    pub complement_residual: f64,
}

/// `‖B_α* f‖² = ‖f‖² - ρ_α(α) |(E_+^{-1} f)(α)|²` for `f = Σ c_k e_k`, together
/// with the decomposition of `(1/b_α) f` behind it.
pub fn debranges_identity(
    space: &DeBrangesSpace,
    adj: &OperatorMatrix,
    c: &CVector,
) -> Result<DeBrangesIdentity> {
    let s = &space.space;
    let alpha = adj.alpha;
    let base = basicop::adjoint_norm_identity(s, adj, c)?;
    let f = s.combine(c)?;
    let (c1, c2) = adjoint_coefficients(s.kind, alpha);
    let adj_f = MatRational::linear_combination(&[f.clone(), weighted_shift(s, alpha, &f)?], &[c1, c2])?;
    let x = s.whitened_value(&f, alpha)?;
    let tail = s.e_plus_rational().apply_vector(&x)?.div_affine(ONE, -alpha)?.scale(c2);
    let mut pointwise_residual: f64 = 0.0;
    for z in domains::generic_points(s.kind, 6) {
        let b = domains::blaschke(s.kind, alpha, z)?;
        let lhs = f.eval_vec(z)? / b;
        let rhs = adj_f.eval_vec(z)? + tail.eval_vec(z)?;
        pointwise_residual = pointwise_residual.max((lhs - &rhs).norm() / (1.0 + rhs.norm()));
    }
    let complement_residual = s.project(&tail)?.norm();
    Ok(DeBrangesIdentity {
        lhs: base.lhs,
        rhs: base.rhs,
        residual: base.residual,
        pointwise_residual,
        complement_residual,
    })
}

/// Convenience wrapper assembling the adjoint first.
pub fn debranges_identity_at(space: &DeBrangesSpace, alpha: Complex64, c: &CVector) -> Result<DeBrangesIdentity> {
    debranges_identity(space, &assemble_adjoint(&space.space, alpha)?, c)
}

impl ModelSpaceBasis {
    /// `E_+` as a rational matrix (the identity for plain model spaces).
    pub fn e_plus_rational(&self) -> MatRational {
        match &self.weight {
            Some(w) => w.e_plus.clone(),
            None => MatRational::identity(self.m),
        }
    }
}

/// A point strictly outside the closed domain.
fn random_minus<R: Rng + ?Sized>(kind: DomainKind, rng: &mut R) -> Complex64 {
    match kind {
        DomainKind::Disc => Complex64::from_polar(rng.random_range(1.3..3.0), rng.random_range(0.0..std::f64::consts::TAU)),
        DomainKind::UpperHalfPlane => Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-3.0..-0.3)),
        DomainKind::RightHalfPlane => Complex64::new(rng.random_range(-3.0..-0.3), rng.random_range(-2.0..2.0)),
    }
}

/// Random polynomial `E_+ = P diag(q_1, …, q_m) Q` with unitary `P, Q` and
/// each `q_i` of degree at most two with zeros outside the closed domain.
/// At least one `q_i` is non-constant.
pub fn random_e_plus<R: Rng + ?Sized>(kind: DomainKind, m: usize, rng: &mut R) -> MatRational {
    let p = linalg::random_unitary(rng, m);
    let q = linalg::random_unitary(rng, m);
    let forced = rng.random_range(0..m);
    let diag: Vec<Poly> = (0..m)
        .map(|i| {
            let deg = if i == forced { rng.random_range(1..=2) } else { rng.random_range(0..=2) };
            (0..deg).fold(Poly::constant(ONE), |acc, _| {
                let r = random_minus(kind, rng);
                acc.mul(&Poly::affine(Complex64::new(1.0 / (1.0 + r.norm()), 0.0), -r / (1.0 + r.norm())))
            })
        })
        .collect();
    let num = (0..m * m)
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            (0..m).fold(Poly::zero(), |acc, k| acc.add(&diag[k].scale(p[(i, k)] * q[(k, j)])))
        })
        .collect();
    MatRational::new(m, m, num, vec![]).expect("square numerator")
}

/// Random de Branges matrix `[E_+ Θ, E_+]` with `Θ` a random Potapov
/// product of degree `n`; returns `Θ` as well.
pub fn random_de_branges<R: Rng + ?Sized>(
    kind: DomainKind,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<(DeBrangesMatrix, InnerFunction)> {
    let theta = InnerFunction::from_bp(&random_bp(kind, m, n, rng))?;
    let e_plus = random_e_plus(kind, m, rng);
    let e_minus = e_plus.mul(&theta.rational)?;
    Ok((DeBrangesMatrix::new(kind, e_minus, e_plus)?, theta))
}

/// Smallest eigenvalue of the block kernel Gram at the given points.
pub fn kernel_min_eigenvalue(space: &ModelSpaceBasis, points: &[Complex64]) -> Result<f64> {
    let g = space.kernel_gram(points)?;
    Ok(linalg::hermitian_eigen(&g).0.last().copied().unwrap_or(0.0))
}

/// Rank of `K^𝔈_α(α)` relative to its largest eigenvalue.
pub fn kernel_rank_at(space: &ModelSpaceBasis, alpha: Complex64, tol_sv: f64) -> Result<usize> {
    let k = space.kernel_value(alpha, alpha)?;
    let ep = space.e_plus_at(alpha)?;
    // K(α,α) = E_+(α) N E_+(α)* / ρ: undo the outer factors before thresholding
    let inv = linalg::solve(&ep, &CMatrix::identity(space.m, space.m))
        .ok_or_else(|| Error::SingularEPlus(alpha, "LU failed".into()))?;
    let n = &inv * k * inv.adjoint() * Complex64::new(rho_diag(space.kind, alpha), 0.0);
    Ok(linalg::rank_above(&n, crate::modelspace::rank_threshold(tol_sv)))
}
