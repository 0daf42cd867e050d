//! Unitary maps between model spaces: recentering `V_α` inside a domain and
//! the Cayley transfers from the disc to the two half-planes.
//!
//! Every map has the form `(V f)(λ) = w(λ) f(φ(λ))` with a scalar rational
//! weight `w` and a Moebius map `φ` from the target domain to the source.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::basicop::{assemble, disc_limit_vector};
use crate::domains::{self, check_alpha, phi_mobius, reference_point, BoundaryGrid, DomainKind};
use crate::error::{Error, Result};
use crate::inner::InnerFunction;
use crate::linalg::{self, CMatrix, I, ONE, ZERO};
use crate::modelspace::{build_basis, random_kernel_combination, ModelSpaceBasis};
use crate::rational::{sampled_inner, MatRational, Mobius, Poly, VecRational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferTarget {
    Recenter,
    Upper,
    Right,
}

impl FromStr for TransferTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recenter" => Ok(TransferTarget::Recenter),
            "upper" => Ok(TransferTarget::Upper),
            "right" => Ok(TransferTarget::Right),
            other => Err(Error::Invalid(format!("unknown transfer target '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransferMap {
    pub source_kind: DomainKind,
    pub target_kind: DomainKind,
    /// Point of the source domain that the map sends to `target_alpha`.
    pub source_alpha: Complex64,
    pub target_alpha: Complex64,
    pub weight: MatRational,
    pub map: Mobius,
}

impl TransferMap {
    pub fn forward(&self, f: &VecRational) -> Result<VecRational> {
        f.compose(&self.map)?.scalar_mul(&self.weight)
    }

    /// `Θ ∘ φ` as an inner function on the target domain. Innerness is
    /// checked through `Θ(φ(λ))` since the expanded composition loses digits
    /// near the boundary.
    pub fn theta_transform(&self, theta: &InnerFunction) -> Result<InnerFunction> {
        if theta.kind != self.source_kind {
            return Err(Error::Invalid(format!(
                "map expects a {} inner function, got {}",
                self.source_kind.name(),
                theta.kind.name()
            )));
        }
        self.composed_inner_residual(theta)?;
        Ok(InnerFunction {
            kind: self.target_kind,
            m: theta.m,
            rational: theta.rational.compose(&self.map)?,
            degree: theta.degree,
            factors: None,
        })
    }

    /// Samples of `V f` at the grid nodes, evaluated as `w(λ) f(φ(λ))`.
    pub fn sample_image(&self, f: &VecRational, grid: &BoundaryGrid) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(f.shape().0, grid.nodes.len());
        for (k, &z) in grid.nodes.iter().enumerate() {
            let w = self.weight.eval(z).map_err(|_| Error::PoleOnBoundary(z))?[(0, 0)];
            let v = f.eval_vec(self.map.apply(z)).map_err(|_| Error::PoleOnBoundary(z))?;
            out.set_column(k, &(v * w));
        }
        Ok(out)
    }

    fn composed_inner_residual(&self, theta: &InnerFunction) -> Result<f64> {
        crate::inner::check_inner(self.target_kind, |z| theta.eval(self.map.apply(z)))
    }
}

fn constant_weight(c: f64) -> MatRational {
    MatRational::scalar(Poly::constant(Complex64::new(c, 0.0)), vec![])
}

/// `V_α`, sending `H(Θ)` onto `H(Θ ∘ φ_α)` and `α` to the reference point.
pub fn recenter(kind: DomainKind, alpha: Complex64) -> Result<TransferMap> {
    check_alpha(kind, alpha)?;
    let weight = match kind {
        DomainKind::Disc => constant_weight((1.0 - alpha.norm_sqr()).sqrt()).div_affine(alpha.conj(), ONE)?,
        DomainKind::UpperHalfPlane => constant_weight(alpha.im.sqrt()),
        DomainKind::RightHalfPlane => constant_weight(alpha.re.sqrt()),
    };
    Ok(TransferMap {
        source_kind: kind,
        target_kind: kind,
        source_alpha: alpha,
        target_alpha: reference_point(kind),
        weight,
        map: phi_mobius(kind, alpha)?,
    })
}

/// Cayley transfer from the disc to a half-plane, sending `0` to the
/// half-plane's reference point.
pub fn cayley(target: DomainKind) -> Result<TransferMap> {
    let shift = match target {
        DomainKind::UpperHalfPlane => I,
        DomainKind::RightHalfPlane => ONE,
        DomainKind::Disc => return Err(Error::Invalid("Cayley target must be a half-plane".into())),
    };
    Ok(TransferMap {
        source_kind: DomainKind::Disc,
        target_kind: target,
        source_alpha: ZERO,
        target_alpha: shift,
        weight: constant_weight(1.0 / PI.sqrt()).div_affine(ONE, shift)?,
        map: Mobius::new(ONE, -shift, ONE, shift)?,
    })
}

pub fn build_map(kind: DomainKind, target: TransferTarget, alpha: Complex64) -> Result<TransferMap> {
    match (target, kind) {
        (TransferTarget::Recenter, _) => recenter(kind, alpha),
        (_, DomainKind::Disc) if alpha == ZERO => cayley(match target {
            TransferTarget::Upper => DomainKind::UpperHalfPlane,
            _ => DomainKind::RightHalfPlane,
        }),
        (_, DomainKind::Disc) => Err(Error::Invalid("Cayley transfers act at alpha = 0".into())),
        _ => Err(Error::Invalid("Cayley transfers start from the disc".into())),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferReport {
    pub source_domain: DomainKind,
    pub target_domain: DomainKind,
    pub source_alpha: [f64; 2],
    pub target_alpha: [f64; 2],
    pub source_norm: f64,
    pub target_norm: f64,
    pub norm_diff: f64,
    /// Worst `|⟨Vf, Vg⟩ - ⟨f, g⟩| / (‖f‖‖g‖)` over random pairs.
    pub unitarity_residual: f64,
    /// `‖P M_src - M_tgt P‖_F` with `P` the matrix of `V` between the bases.
    pub intertwining_residual: f64,
    /// Worst distance of a mapped basis element from the target space.
    pub membership_residual: f64,
    /// Boundary unitarity residual of the transformed inner function.
    pub inner_residual: f64,
}

impl TransferReport {
    pub fn max_residual(&self) -> f64 {
        [self.norm_diff, self.unitarity_residual, self.intertwining_residual, self.membership_residual]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Run the invariance checks for `map` on the model space `source`, using
/// `samples` random pairs for the unitarity check.
pub fn check_transfer<R: Rng + ?Sized>(
    source: &ModelSpaceBasis,
    map: &TransferMap,
    samples: usize,
    rng: &mut R,
) -> Result<TransferReport> {
    let theta = source
        .theta
        .as_ref()
        .filter(|_| !source.is_weighted())
        .ok_or_else(|| Error::Invalid("transfers act on unweighted model spaces".into()))?;
    let target_theta = map.theta_transform(theta)?;
    let inner_residual = map.composed_inner_residual(theta)?;
    let target = build_basis(&target_theta)?;

    let op_src = assemble(source, map.source_alpha)?;
    let op_tgt = assemble(&target, map.target_alpha)?;

    // images are sampled as w(λ) f(φ(λ)); the expanded composition is too
    // poorly conditioned near clustered poles for a 1e-12 quadrature
    let images = source.basis.iter().map(|e| map.forward(e)).collect::<Result<Vec<_>>>()?;
    let poles = pole_set(images.iter().chain(&target.basis));
    let p = image_quadrature(&target, &poles, |grid| {
        let si = source.basis.iter().map(|e| map.sample_image(e, grid)).collect::<Result<Vec<_>>>()?;
        let st = target.basis.iter().map(|e| target.sample(e, grid)).collect::<Result<Vec<_>>>()?;
        Ok(CMatrix::from_fn(st.len(), si.len(), |j, k| sampled_inner(&si[k], &st[j], &grid.weights)))
    })?;
    let residual_sq = image_quadrature(&target, &poles, |grid| {
        let st = target.basis.iter().map(|e| target.sample(e, grid)).collect::<Result<Vec<_>>>()?;
        let mut out = CMatrix::zeros(source.dim, 1);
        for (k, e) in source.basis.iter().enumerate() {
            let mut r = map.sample_image(e, grid)?;
            for (j, s) in st.iter().enumerate() {
                r -= s * p[(j, k)];
            }
            out[(k, 0)] = sampled_inner(&r, &r, &grid.weights);
        }
        Ok(out)
    })?;
    let membership_residual = residual_sq.iter().map(|v| v.re.max(0.0).sqrt()).fold(0.0, f64::max);
    let intertwining_residual = if source.dim == 0 {
        0.0
    } else {
        linalg::frobenius(&(&p * &op_src.mat - &op_tgt.mat * &p))
    };

    let mut unitarity_residual: f64 = 0.0;
    for _ in 0..samples {
        let f = random_kernel_combination(source, 3, rng)?;
        let g = random_kernel_combination(source, 3, rng)?;
        let before = source.inner(&f, &g)?;
        let poles = pole_set([&map.forward(&f)?, &map.forward(&g)?]);
        let after = image_quadrature(&target, &poles, |grid| {
            let (sf, sg) = (map.sample_image(&f, grid)?, map.sample_image(&g, grid)?);
            Ok(CMatrix::from_element(1, 1, sampled_inner(&sf, &sg, &grid.weights)))
        })?[(0, 0)];
        let scale = source.norm(&f)? * source.norm(&g)?;
        unitarity_residual = unitarity_residual.max((after - before).norm() / scale.max(f64::MIN_POSITIVE));
    }

    Ok(TransferReport {
        source_domain: map.source_kind,
        target_domain: map.target_kind,
        source_alpha: [map.source_alpha.re, map.source_alpha.im],
        target_alpha: [map.target_alpha.re, map.target_alpha.im],
        source_norm: op_src.norm,
        target_norm: op_tgt.norm,
        norm_diff: (op_src.norm - op_tgt.norm).abs(),
        unitarity_residual,
        intertwining_residual,
        membership_residual,
        inner_residual,
    })
}

fn pole_set<'a>(funcs: impl IntoIterator<Item = &'a VecRational>) -> Vec<Complex64> {
    funcs.into_iter().flat_map(|f| f.den_roots().iter().copied()).collect()
}

fn image_quadrature<F>(target: &ModelSpaceBasis, poles: &[Complex64], eval: F) -> Result<CMatrix>
where
    F: FnMut(&BoundaryGrid) -> Result<CMatrix>,
{
    let cap = domains::max_grid();
    let start = domains::suggest_grid_size(target.kind, poles, cap);
    Ok(domains::converge(target.kind, start, cap, eval)?.1)
}

/// Compare `2i (Θ₀^# V f)(-i)` with `-u/√π`, where `u` is the limit vector of
/// the `α = 0` disc formula and `V` the Cayley map to the upper half-plane.
pub fn limit_vector_check(source: &ModelSpaceBasis, f: &VecRational) -> Result<f64> {
    let theta = source
        .theta_rational()
        .filter(|_| source.kind == DomainKind::Disc && !source.is_weighted())
        .ok_or_else(|| Error::Invalid("limit vector check needs a disc model space".into()))?;
    let u = disc_limit_vector(theta, f)?;
    let v = cayley(DomainKind::UpperHalfPlane)?;
    let theta0 = theta.compose(&v.map)?;
    let h0 = domains::sharp(DomainKind::UpperHalfPlane, &theta0)?
        .mul(&v.forward(f)?)?
        .normalize(1e-10);
    let lhs = h0.eval_vec(-I)? * (2.0 * I);
    let rhs = u * Complex64::new(-1.0 / PI.sqrt(), 0.0);
    Ok((lhs - rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basicop::verify_norm;
    use crate::inner::{disc_power, random_alpha, random_bp, BPFactor, BlaschkePotapov, TOL_SV};
    use crate::linalg::{CMatrix, CVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn space_of(bp: &BlaschkePotapov) -> ModelSpaceBasis {
        build_basis(&InnerFunction::from_bp(bp).unwrap()).unwrap()
    }

    #[test]
    fn recenter_at_zero_is_identity() {
        let m = recenter(DomainKind::Disc, ZERO).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let s = space_of(&random_bp(DomainKind::Disc, 2, 2, &mut rng));
        let f = random_kernel_combination(&s, 2, &mut rng).unwrap();
        let g = m.forward(&f).unwrap();
        for z in domains::generic_points(DomainKind::Disc, 5) {
            assert!((g.eval_vec(z).unwrap() - f.eval_vec(z).unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn recenter_disc_lambda() {
        let s = space_of(&disc_power(1));
        let a = c(0.5, 0.0);
        let map = recenter(DomainKind::Disc, a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let r = check_transfer(&s, &map, 3, &mut rng).unwrap();
        assert!((r.source_norm - 0.5).abs() < 1e-12 && (r.target_norm - 0.5).abs() < 1e-12);
        let tt = map.theta_transform(s.theta.as_ref().unwrap()).unwrap();
        let target = build_basis(&tt).unwrap();
        assert!((verify_norm(&target, ZERO, TOL_SV).unwrap().closed_norm - 0.5).abs() < 1e-14);
    }

    #[test]
    fn recenter_upper_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = space_of(&random_bp(DomainKind::UpperHalfPlane, 2, 3, &mut rng));
        let map = recenter(DomainKind::UpperHalfPlane, c(2.0, 3.0)).unwrap();
        let r = check_transfer(&s, &map, 10, &mut rng).unwrap();
        assert!(r.unitarity_residual < 1e-10, "{r:?}");
        assert!(r.norm_diff < 1e-9 && r.intertwining_residual < 1e-9 && r.membership_residual < 1e-9);
    }

    #[test]
    fn recenter_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for kind in DomainKind::ALL {
            let s = space_of(&random_bp(kind, 2, 3, &mut rng));
            let a = random_alpha(kind, &mut rng);
            let r = check_transfer(&s, &recenter(kind, a).unwrap(), 4, &mut rng).unwrap();
            assert!(r.max_residual() < 1e-9, "{kind:?} {r:?}");
            assert!(r.unitarity_residual < 1e-10 && r.inner_residual < 1e-10);
        }
    }

    #[test]
    fn cayley_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for target in [DomainKind::UpperHalfPlane, DomainKind::RightHalfPlane] {
            let map = cayley(target).unwrap();
            let r = check_transfer(&space_of(&disc_power(1)), &map, 2, &mut rng).unwrap();
            assert!(r.source_norm < 1e-12 && r.target_norm < 1e-12);
            let r = check_transfer(&space_of(&disc_power(2)), &map, 2, &mut rng).unwrap();
            assert!((r.source_norm - 1.0).abs() < 1e-12 && (r.target_norm - 1.0).abs() < 1e-9);
            let s = space_of(&random_bp(DomainKind::Disc, 1, 3, &mut rng));
            let r = check_transfer(&s, &map, 5, &mut rng).unwrap();
            assert!(r.max_residual() < 1e-9 && r.unitarity_residual < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn cayley_of_lambda_is_elementary_factor() {
        let map = cayley(DomainKind::UpperHalfPlane).unwrap();
        let t = map.theta_transform(&InnerFunction::from_bp(&disc_power(1)).unwrap()).unwrap();
        let z = c(0.7, 1.3);
        assert!((t.rational.eval(z).unwrap()[(0, 0)] - (z - I) / (z + I)).norm() < 1e-14);
    }

    #[test]
    fn limit_vector_examples() {
        let s = space_of(&disc_power(1));
        let one = MatRational::scalar(Poly::constant(ONE), vec![]);
        assert!(limit_vector_check(&s, &one).unwrap() < 1e-12);
        let s = space_of(&disc_power(2));
        assert!(limit_vector_check(&s, &one).unwrap() < 1e-9);
        let d = BlaschkePotapov::build(
            DomainKind::Disc,
            2,
            CMatrix::identity(2, 2),
            vec![BPFactor { alpha: ZERO, v: CVector::from_vec(vec![ONE, ZERO]) }],
        )
        .unwrap();
        let s = space_of(&d);
        let e1 = MatRational::from_vector(&CVector::from_vec(vec![ONE, ZERO]));
        assert!(limit_vector_check(&s, &e1).unwrap() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let s = space_of(&random_bp(DomainKind::Disc, 2, 3, &mut rng));
        for e in &s.basis {
            assert!(limit_vector_check(&s, e).unwrap() < 1e-9);
        }
    }

    #[test]
    fn build_map_rejects_bad_requests() {
        assert!(build_map(DomainKind::UpperHalfPlane, TransferTarget::Upper, I).is_err());
        assert!(build_map(DomainKind::Disc, TransferTarget::Right, c(0.2, 0.0)).is_err());
        assert!(matches!(
            build_map(DomainKind::Disc, TransferTarget::Recenter, c(1.5, 0.0)),
            Err(Error::Domain(..))
        ));
        assert_eq!("upper".parse::<TransferTarget>().unwrap(), TransferTarget::Upper);
    }
}
