//! The compressed Blaschke multiplier `A_α f = Π(b_α f)` on a model space (or
//! on a weighted space), its adjoint, the explicit formulas for both, and the
//! closed-form norm in terms of the singular values of `Θ(α)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::domains::{self, adjoint_coefficients, blaschke_rational, check_alpha, rho_affine, rho_diag, DomainKind};
use crate::error::{Error, Result};
use crate::inner::{svd_of, PointSVD};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::modelspace::{vanishing_coordinates, ModelSpaceBasis, SubspaceDims};
use crate::rational::{MatRational, VecRational};

/// Relative size of the divergent part allowed when taking the limit at
/// infinity in the `α = 0` disc formula.
const LIMIT_TOL: f64 = 1e-9;

/// Tolerance for cancelling removable singularities of `Θ^# f`.
const NORMALIZE_TOL: f64 = 1e-10;

/// Matrix of the operator in the orthonormal basis of the space.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub mat: CMatrix,
    pub alpha: Complex64,
    pub norm: f64,
    /// Right singular vector for the largest singular value.
    pub witness_coeffs: CVector,
    pub singular_values: Vec<f64>,
}

impl OperatorMatrix {
    pub fn from_matrix(mat: CMatrix, alpha: Complex64) -> Self {
        let n = mat.nrows();
        if n == 0 {
            return OperatorMatrix {
                mat,
                alpha,
                norm: 0.0,
                witness_coeffs: CVector::zeros(0),
                singular_values: vec![],
            };
        }
        let d = linalg::svd(&mat);
        OperatorMatrix {
            witness_coeffs: d.v.column(0).into_owned(),
            norm: d.s[0],
            singular_values: d.s,
            mat,
            alpha,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// `mat[j][k] = ⟨b_α e_k, e_j⟩`.
pub fn assemble(space: &ModelSpaceBasis, alpha: Complex64) -> Result<OperatorMatrix> {
    check_alpha(space.kind, alpha)?;
    let b = blaschke_rational(space.kind, alpha)?;
    let images = space.basis.iter().map(|e| e.scalar_mul(&b)).collect::<Result<Vec<_>>>()?;
    Ok(OperatorMatrix::from_matrix(space.project_many(&images)?, alpha))
}

/// `(f - E_+ (E_+^{-1} f)(α)) / (λ - α)`; the backward shift `R_α f` when
/// there is no weight.
pub fn weighted_shift(space: &ModelSpaceBasis, alpha: Complex64, f: &VecRational) -> Result<VecRational> {
    match &space.weight {
        None => f.backward_shift(alpha),
        Some(w) => {
            let x = space.whitened_value(f, alpha)?;
            let g = f.sub(&w.e_plus.apply_vector(&x)?)?;
            g.backward_shift(alpha)
        }
    }
}

/// Matrix of the adjoint built from `A_α* f = c1 f + c2 R_α f`.
pub fn assemble_adjoint(space: &ModelSpaceBasis, alpha: Complex64) -> Result<OperatorMatrix> {
    check_alpha(space.kind, alpha)?;
    let (c1, c2) = adjoint_coefficients(space.kind, alpha);
    let images = space
        .basis
        .iter()
        .map(|e| {
            let r = weighted_shift(space, alpha, e)?;
            MatRational::linear_combination(&[e.clone(), r], &[c1, c2])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorMatrix::from_matrix(space.project_many(&images)?, alpha))
}

/// `A_α f` from the explicit formula: `b_α f` corrected by a multiple of
/// `Θ (Θ^# f)(·)/ρ_α`, with the `α = 0` disc case taken as a limit at infinity.
pub fn apply_basic_explicit(space: &ModelSpaceBasis, alpha: Complex64, f: &VecRational) -> Result<VecRational> {
    let kind = space.kind;
    check_alpha(kind, alpha)?;
    let theta = space
        .theta_rational()
        .filter(|_| !space.is_weighted())
        .ok_or_else(|| Error::Invalid("explicit formula needs an unweighted model space".into()))?;
    let bf = f.scalar_mul(&blaschke_rational(kind, alpha)?)?;
    if kind == DomainKind::Disc && alpha == ZERO {
        let u = disc_limit_vector(theta, f)?;
        return bf.sub(&theta.apply_vector(&u)?);
    }
    let h = domains::sharp(kind, theta)?.mul(f)?.normalize(NORMALIZE_TOL);
    let (point, coeff) = match kind {
        DomainKind::Disc => (ONE / alpha.conj(), -rho_diag(kind, alpha) / alpha.conj()),
        DomainKind::UpperHalfPlane => (alpha.conj(), Complex64::new(rho_diag(kind, alpha), 0.0)),
        DomainKind::RightHalfPlane => (-alpha.conj(), Complex64::new(rho_diag(kind, alpha), 0.0)),
    };
    let hv = h.eval_vec(point)?;
    let (a, b) = rho_affine(kind, alpha);
    let correction = theta.apply_vector(&hv)?.div_affine(a, b)?.scale(coeff);
    bf.add(&correction)
}

/// `u = lim_{β→0} (Θ^# f)(1/β̄)/β̄` on the disc, read off as the value at
/// infinity of `λ (Θ^# f)(λ)`.
pub fn disc_limit_vector(theta: &MatRational, f: &VecRational) -> Result<CVector> {
    let h = domains::sharp(DomainKind::Disc, theta)?.mul(f)?.normalize(NORMALIZE_TOL);
    Ok(h.lambda_times_at_infinity(LIMIT_TOL)?.column(0).into_owned())
}

/// Matrix of `A_α` from the explicit formula applied to each basis element.
pub fn assemble_explicit(space: &ModelSpaceBasis, alpha: Complex64) -> Result<OperatorMatrix> {
    let images = space
        .basis
        .iter()
        .map(|e| apply_basic_explicit(space, alpha, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorMatrix::from_matrix(space.project_many(&images)?, alpha))
}

/// Frobenius distance between the projection and explicit assemblies.
pub fn dual_path_distance(space: &ModelSpaceBasis, alpha: Complex64) -> Result<f64> {
    let a = assemble(space, alpha)?;
    let b = assemble_explicit(space, alpha)?;
    Ok(linalg::frobenius(&(a.mat - b.mat)))
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `‖A_α* f‖² = ‖f‖² - ρ_α(α) |(E_+^{-1} f)(α)|²` for `f = Σ c_k e_k`, with the
/// left side taken from the adjoint matrix `adj`.
pub fn adjoint_norm_identity(
    space: &ModelSpaceBasis,
    adj: &OperatorMatrix,
    c: &CVector,
) -> Result<IdentityResidual> {
    let fa = space.eval_matrix(adj.alpha)? * c;
    let lhs = (&adj.mat * c).norm_squared();
    let rhs = c.norm_squared() - rho_diag(space.kind, adj.alpha) * fa.norm_squared();
    Ok(IdentityResidual { lhs, rhs, residual: (lhs - rhs).abs() / (1.0 + c.norm_squared()) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    UnitNorm,
    StrictContraction,
}

#[derive(Clone, Debug)]
pub struct ClosedFormNorm {
    pub value: f64,
    pub branch: Branch,
    pub svd: PointSVD,
    pub dims: SubspaceDims,
    pub tol_sv: f64,
    /// `|w*ΘΘ*w / w*w - value²|` with `w = N_α(α)^{1/2} v_{k+1}`; `None` in
    /// the unit-norm branch when no singular value is below one.
    pub ratio_residual: Option<f64>,
}

/// Norm predicted from `Θ(α)`: one when `H_α ≠ {0}`, otherwise the largest
/// singular value strictly below one.
pub fn closed_form_norm(space: &ModelSpaceBasis, alpha: Complex64, tol_sv: f64) -> Result<ClosedFormNorm> {
    let t = space.theta_at(alpha)?;
    let svd = svd_of(&t, tol_sv);
    let dims = space.subspace_dims(alpha, tol_sv)?;
    let ratio_residual = (svd.k < space.m).then(|| {
        let n = CMatrix::identity(space.m, space.m) - &t * t.adjoint();
        let w = linalg::psd_sqrt(&n) * svd.v.column(svd.k);
        let num = (w.adjoint() * &t * t.adjoint() * &w)[(0, 0)].re;
        (num / w.norm_squared() - svd.s[svd.k].powi(2)).abs()
    });
    if dims.dim_h_alpha > 0 {
        return Ok(ClosedFormNorm { value: 1.0, branch: Branch::UnitNorm, svd, dims, tol_sv, ratio_residual });
    }
    let value = svd
        .s
        .iter()
        .copied()
        .find(|&s| s < 1.0 - tol_sv)
        .ok_or(Error::AllUnitSingularValues)?;
    Ok(ClosedFormNorm { value, branch: Branch::StrictContraction, svd, dims, tol_sv, ratio_residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct UnitWitness {
    /// `‖f(α)‖ / ‖f‖` for the witness `f` with `f(α) = 0`.
    pub eval_residual: f64,
    /// `‖A_α* f‖ / ‖f‖`, which must equal one.
    pub adjoint_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub oracle_norm: f64,
    pub closed_norm: f64,
    pub abs_diff: f64,
    pub branch: Branch,
    pub singular_values: Vec<f64>,
    pub k: usize,
    pub dims: SubspaceDims,
    /// `‖A w‖ / ‖w‖` for the top right singular vector, in coordinates.
    pub witness_ratio: f64,
    /// Same ratio with `A w` taken from an independent function-level path.
    pub na_check: f64,
    /// Operator-side check of the kernel ratio identity for `K_α u`.
    pub kernel_ratio_residual: Option<f64>,
    pub unit_witness: Option<UnitWitness>,
}

/// Compare the assembled operator norm with the closed form.
pub fn verify_norm(space: &ModelSpaceBasis, alpha: Complex64, tol_sv: f64) -> Result<NormReport> {
    let op = assemble(space, alpha)?;
    let closed = closed_form_norm(space, alpha, tol_sv)?;
    verify_with(space, &op, &closed)
}

pub fn verify_with(space: &ModelSpaceBasis, op: &OperatorMatrix, closed: &ClosedFormNorm) -> Result<NormReport> {
    let alpha = op.alpha;
    let w = &op.witness_coeffs;
    let (witness_ratio, na_check) = if space.dim == 0 {
        (0.0, 0.0)
    } else {
        let ratio = (&op.mat * w).norm() / w.norm();
        let f = space.combine(w)?;
        let image = if space.is_weighted() || space.theta.is_none() {
            f.scalar_mul(&blaschke_rational(space.kind, alpha)?)
                .and_then(|bf| space.project(&bf))
                .and_then(|c| space.combine(&c))?
        } else {
            apply_basic_explicit(space, alpha, &f)?
        };
        let attained = space.norm(&image)? / space.norm(&f)?;
        (ratio, (attained - op.norm).abs())
    };
    let kernel_ratio_residual = kernel_ratio_check(space, op, closed)?;
    let unit_witness = if closed.dims.dim_h_alpha > 0 {
        let null = vanishing_coordinates(space, alpha, closed.tol_sv)?;
        if null.ncols() == 0 {
            None
        } else {
            let c = null.column(0).into_owned();
            let fa = space.eval_matrix(alpha)? * &c;
            Some(UnitWitness {
                eval_residual: fa.norm() / c.norm(),
                adjoint_ratio: (op.mat.adjoint() * &c).norm() / c.norm(),
            })
        }
    } else {
        None
    };
    Ok(NormReport {
        oracle_norm: op.norm,
        closed_norm: closed.value,
        abs_diff: (op.norm - closed.value).abs(),
        branch: closed.branch,
        singular_values: closed.svd.s.clone(),
        k: closed.svd.k,
        dims: closed.dims.clone(),
        witness_ratio,
        na_check,
        kernel_ratio_residual,
        unit_witness,
    })
}

/// For `f = K_α u` with `u` chosen so the prediction is `s_{k+1}²`, compare
/// `‖A_α* f‖² / ‖f‖²` from the assembled matrix with `s_{k+1}²`.
fn kernel_ratio_check(space: &ModelSpaceBasis, op: &OperatorMatrix, closed: &ClosedFormNorm) -> Result<Option<f64>> {
    let k = closed.svd.k;
    if k >= space.m || space.dim == 0 {
        return Ok(None);
    }
    let v = closed.svd.v.column(k).into_owned();
    // K^E_α u = E_+ K^Θ_α (E_+(α)* u): pick u = E_+(α)^{-*} v
    let u = match &space.weight {
        None => v,
        Some(w) => {
            let ep = w.e_plus.eval(op.alpha)?;
            let vm = CMatrix::from_column_slice(space.m, 1, v.as_slice());
            linalg::solve(&ep.adjoint(), &vm)
                .ok_or_else(|| Error::SingularEPlus(op.alpha, "LU failed".into()))?
                .column(0)
                .into_owned()
        }
    };
    let f = space.kernel_section(op.alpha)?.apply_vector(&u)?;
    let c = space.project(&f)?;
    let ratio = (op.mat.adjoint() * &c).norm_squared() / c.norm_squared();
    Ok(Some((ratio - closed.svd.s[k].powi(2)).abs()))
}
