//! Matrix inner functions: finite Blaschke-Potapov products, generic rational
//! inner functions, and the singular value picture of `Θ(α)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domains::{self, blaschke, blaschke_parts, check_alpha, DomainKind};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::rational::{c_from, c_to, MatRational, Poly};

/// Default threshold below `1` at which a singular value counts as `< 1`.
pub const TOL_SV: f64 = 1e-9;

/// Rank-one Potapov factor `I + (b_α - 1) v v*`.
#[derive(Clone, Debug, PartialEq)]
pub struct BPFactor {
    pub alpha: Complex64,
    pub v: CVector,
}

/// `Θ = constant · θ_1 ⋯ θ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlaschkePotapov {
    pub kind: DomainKind,
    pub m: usize,
    pub constant: CMatrix,
    pub factors: Vec<BPFactor>,
}

impl BlaschkePotapov {
    pub fn build(kind: DomainKind, m: usize, constant: CMatrix, factors: Vec<BPFactor>) -> Result<Self> {
        if m == 0 || constant.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "constant is {:?}, expected {m}x{m}",
                constant.shape()
            )));
        }
        let res = linalg::max_abs(&(constant.adjoint() * &constant - CMatrix::identity(m, m)));
        if res > 1e-13 {
            return Err(Error::NotUnitary(res));
        }
        let mut normalized = Vec::with_capacity(factors.len());
        for f in factors {
            check_alpha(kind, f.alpha)?;
            if f.v.len() != m {
                return Err(Error::Dimension(format!("direction of length {}, expected {m}", f.v.len())));
            }
            let nv = linalg::vec_norm(&f.v);
            if nv.is_nan() || nv <= 1e-14 {
                return Err(Error::ZeroVector);
            }
            normalized.push(BPFactor { alpha: f.alpha, v: f.v / Complex64::new(nv, 0.0) });
        }
        Ok(BlaschkePotapov { kind, m, constant, factors: normalized })
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    /// `θ_k` as a rational matrix: `(Q I + (P - Q) v v*) / Q` where `b = P/Q`.
    pub fn factor_rational(&self, k: usize) -> MatRational {
        let f = &self.factors[k];
        let (p, den) = blaschke_parts(self.kind, f.alpha).expect("validated factor");
        let q = Poly::from_roots(&den);
        let diff = p.sub(&q);
        let m = self.m;
        let num = (0..m * m)
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                let mut e = diff.scale(f.v[i] * f.v[j].conj());
                if i == j {
                    e = e.add(&q);
                }
                e
            })
            .collect();
        MatRational::new(m, m, num, den).expect("shape is consistent")
    }

    /// `θ_1 ⋯ θ_k` (no constant); `k = 0` is the identity.
    pub fn partial_rational(&self, k: usize) -> Result<MatRational> {
        let mut acc = MatRational::identity(self.m);
        for j in 0..k {
            acc = acc.mul(&self.factor_rational(j))?;
        }
        Ok(acc)
    }

    pub fn as_rational(&self) -> Result<MatRational> {
        self.partial_rational(self.degree())?.premul_const(&self.constant)
    }

    /// Factor-by-factor evaluation.
    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let mut acc = self.constant.clone();
        for f in &self.factors {
            let b = blaschke(self.kind, f.alpha, z)?;
            let vv = &f.v * f.v.adjoint();
            acc *= CMatrix::identity(self.m, self.m) + vv * (b - ONE);
        }
        Ok(acc)
    }
}

/// An inner function in the form the rest of the library consumes: its
/// rational representation, degree (dimension of the model space) and, when
/// available, the Potapov factorization it came from.
#[derive(Clone, Debug)]
pub struct InnerFunction {
    pub kind: DomainKind,
    pub m: usize,
    pub rational: MatRational,
    pub degree: usize,
    pub factors: Option<BlaschkePotapov>,
}

impl InnerFunction {
    pub fn from_bp(bp: &BlaschkePotapov) -> Result<Self> {
        Ok(InnerFunction {
            kind: bp.kind,
            m: bp.m,
            rational: bp.as_rational()?,
            degree: bp.degree(),
            factors: Some(bp.clone()),
        })
    }

    /// Wrap a rational inner function. The degree is the number of zeros of
    /// `det Θ` in the domain unless given.
    pub fn from_rational(kind: DomainKind, theta: MatRational, degree: Option<usize>) -> Result<Self> {
        let (m, cols) = theta.shape();
        if m != cols {
            return Err(Error::Dimension(format!("inner function must be square, got {m}x{cols}")));
        }
        check_inner(kind, |z| theta.eval(z))?;
        let degree = match degree {
            Some(d) => d,
            None => {
                let w = domains::winding_number(kind, |z| Ok(theta.eval(z)?.determinant()))?;
                usize::try_from(w).map_err(|_| Error::NotInner(format!("negative winding {w}")))?
            }
        };
        Ok(InnerFunction { kind, m, rational: theta, degree, factors: None })
    }

    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        match &self.factors {
            Some(bp) => bp.eval(z),
            None => self.rational.eval(z),
        }
    }
}

/// Check `Θ*Θ ⪯ I` at interior samples and `Θ*Θ = I` at boundary samples.
/// Returns the worst boundary residual.
pub fn check_inner<F>(kind: DomainKind, theta: F) -> Result<f64>
where
    F: Fn(Complex64) -> Result<CMatrix>,
{
    for z in domains::generic_points(kind, 50) {
        let t = theta(z)?;
        let top = linalg::hermitian_eigen(&(t.adjoint() * &t)).0.first().copied().unwrap_or(0.0);
        if top > 1.0 + 1e-10 {
            return Err(Error::NotInner(format!("|Theta({z})| = {:.6} > 1", top.sqrt())));
        }
    }
    let grid = domains::boundary_grid(kind, 64)?.rotated();
    let mut worst: f64 = 0.0;
    for &z in &grid.nodes {
        let t = theta(z)?;
        let r = linalg::max_abs(&(t.adjoint() * &t - CMatrix::identity(t.ncols(), t.ncols())));
        worst = worst.max(r);
    }
    if worst > 1e-10 {
        return Err(Error::NotInner(format!("boundary unitarity residual {worst:.3e}")));
    }
    Ok(worst)
}

/// SVD of `Θ(α) = V diag(s) U*`; `k` counts the singular values equal to one.
#[derive(Clone, Debug)]
pub struct PointSVD {
    pub s: Vec<f64>,
    pub u: CMatrix,
    pub v: CMatrix,
    pub k: usize,
}

pub fn svd_of(value: &CMatrix, tol_sv: f64) -> PointSVD {
    let d = linalg::svd(value);
    let k = d.s.iter().filter(|&&x| x >= 1.0 - tol_sv).count();
    PointSVD { s: d.s, u: d.v, v: d.u, k }
}

pub fn point_svd(theta: &InnerFunction, alpha: Complex64, tol_sv: f64) -> Result<PointSVD> {
    check_alpha(theta.kind, alpha)?;
    Ok(svd_of(&theta.eval(alpha)?, tol_sv))
}

/// `N_α(α) = I - Θ(α)Θ(α)*`.
pub fn n_alpha(theta: &InnerFunction, alpha: Complex64) -> Result<CMatrix> {
    check_alpha(theta.kind, alpha)?;
    let t = theta.eval(alpha)?;
    Ok(CMatrix::identity(theta.m, theta.m) - &t * t.adjoint())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorJson {
    pub alpha: [f64; 2],
    pub v: Vec<[f64; 2]>,
}

/// JSON form of a Blaschke-Potapov product.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InnerSpecJson {
    pub domain: DomainKind,
    pub m: usize,
    pub constant: Vec<Vec<[f64; 2]>>,
    pub factors: Vec<FactorJson>,
}

impl InnerSpecJson {
    pub fn build(&self) -> Result<BlaschkePotapov> {
        let m = self.m;
        if self.constant.len() != m || self.constant.iter().any(|r| r.len() != m) {
            return Err(Error::Invalid(format!("constant must be {m}x{m}")));
        }
        let constant = CMatrix::from_fn(m, m, |i, j| c_from(self.constant[i][j]));
        let factors = self
            .factors
            .iter()
            .map(|f| BPFactor {
                alpha: c_from(f.alpha),
                v: CVector::from_iterator(f.v.len(), f.v.iter().copied().map(c_from)),
            })
            .collect();
        BlaschkePotapov::build(self.domain, m, constant, factors)
    }
}

impl From<&BlaschkePotapov> for InnerSpecJson {
    fn from(bp: &BlaschkePotapov) -> Self {
        InnerSpecJson {
            domain: bp.kind,
            m: bp.m,
            constant: (0..bp.m)
                .map(|i| (0..bp.m).map(|j| c_to(bp.constant[(i, j)])).collect())
                .collect(),
            factors: bp
                .factors
                .iter()
                .map(|f| FactorJson { alpha: c_to(f.alpha), v: f.v.iter().copied().map(c_to).collect() })
                .collect(),
        }
    }
}

/// A point of the domain away from the boundary and from infinity.
pub fn random_alpha<R: Rng + ?Sized>(kind: DomainKind, rng: &mut R) -> Complex64 {
    match kind {
        DomainKind::Disc => Complex64::from_polar(
            rng.random_range(0.15..0.85),
            rng.random_range(0.0..std::f64::consts::TAU),
        ),
        DomainKind::UpperHalfPlane => Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(0.3..3.0)),
        DomainKind::RightHalfPlane => Complex64::new(rng.random_range(0.3..3.0), rng.random_range(-2.0..2.0)),
    }
}

pub fn random_bp<R: Rng + ?Sized>(kind: DomainKind, m: usize, n: usize, rng: &mut R) -> BlaschkePotapov {
    let constant = linalg::random_unitary(rng, m);
    let factors = (0..n)
        .map(|_| BPFactor { alpha: random_alpha(kind, rng), v: linalg::random_unit_vector(rng, m) })
        .collect();
    BlaschkePotapov::build(kind, m, constant, factors).expect("random data is valid")
}

/// Scalar `Θ(λ) = λ^n` on the disc.
pub fn disc_power(n: usize) -> BlaschkePotapov {
    let factors = (0..n).map(|_| BPFactor { alpha: ZERO, v: CVector::from_element(1, ONE) }).collect();
    BlaschkePotapov::build(DomainKind::Disc, 1, CMatrix::identity(1, 1), factors).expect("valid")
}
