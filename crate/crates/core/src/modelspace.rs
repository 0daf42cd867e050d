//! Orthonormal bases of model spaces `H(Θ) = H² ⊖ ΘH²` and of the weighted
//! spaces `E_+ H(Θ)`, kernel sections, projection and the backward shift.
//!
//! A space is described by the pair `(E_+, E_-)` with `Θ = E_+^{-1} E_-`.
//! Plain model spaces have `E_+ = I` and `E_- = Θ`, in which case no weight
//! is applied and the inner product is the boundary one.

use num_complex::Complex64;

use crate::domains::{self, check_alpha, converge, rho_affine, BoundaryGrid, DomainKind};
use crate::error::{Error, Result};
use crate::inner::InnerFunction;
use crate::linalg::{self, CMatrix, CVector, ONE};
use crate::rational::{sampled_gram, sampled_inner, MatRational, VecRational};

/// Gram residual above which a second orthonormalization pass runs.
const REORTHO_THRESHOLD: f64 = 1e-12;

/// `|det E_+|` below this at a node makes the weight singular.
const SINGULAR_WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Weight {
    pub e_plus: MatRational,
    /// Zeros of `det E_+` (all outside the closed domain); used only to size
    /// quadrature grids.
    pub zeros: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct ModelSpaceBasis {
    pub kind: DomainKind,
    pub m: usize,
    /// `Θ` when the space is a plain model space or was transported from one.
    pub theta: Option<InnerFunction>,
    /// `E_-`; equal to `Θ` for plain model spaces.
    pub e_minus: MatRational,
    pub weight: Option<Weight>,
    pub dim: usize,
    pub basis: Vec<VecRational>,
    pub gram_residual: f64,
    pub grid: BoundaryGrid,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct SubspaceDims {
    pub dim_h: usize,
    pub dim_m: usize,
    pub dim_h_alpha: usize,
}

/// Threshold on eigenvalues `1 - s_j²` of `N_α(α)` matching `s_j < 1 - tol_sv`.
pub fn rank_threshold(tol_sv: f64) -> f64 {
    1.0 - (1.0 - tol_sv) * (1.0 - tol_sv)
}

impl ModelSpaceBasis {
    fn skeleton(
        kind: DomainKind,
        m: usize,
        theta: Option<InnerFunction>,
        e_minus: MatRational,
        weight: Option<Weight>,
        dim: usize,
    ) -> Self {
        ModelSpaceBasis {
            kind,
            m,
            theta,
            e_minus,
            weight,
            dim,
            basis: vec![],
            gram_residual: f64::INFINITY,
            grid: domains::boundary_grid(kind, 64).expect("64 is a valid size"),
        }
    }

    pub fn is_weighted(&self) -> bool {
        self.weight.is_some()
    }

    pub fn theta_rational(&self) -> Option<&MatRational> {
        self.theta.as_ref().map(|t| &t.rational)
    }

    pub fn e_plus_at(&self, z: Complex64) -> Result<CMatrix> {
        match &self.weight {
            Some(w) => w.e_plus.eval(z),
            None => Ok(CMatrix::identity(self.m, self.m)),
        }
    }

    pub fn e_minus_at(&self, z: Complex64) -> Result<CMatrix> {
        match (&self.weight, &self.theta) {
            (None, Some(t)) => t.eval(z),
            _ => self.e_minus.eval(z),
        }
    }

    /// `Θ(z) = E_+(z)^{-1} E_-(z)`.
    pub fn theta_at(&self, z: Complex64) -> Result<CMatrix> {
        if self.weight.is_none() {
            return self.e_minus_at(z);
        }
        let ep = self.e_plus_at(z)?;
        let det = ep.determinant();
        if det.norm() < SINGULAR_WEIGHT_TOL {
            return Err(Error::SingularEPlus(z, format!("|det E_+| = {:.3e}", det.norm())));
        }
        linalg::solve(&ep, &self.e_minus_at(z)?)
            .ok_or_else(|| Error::SingularEPlus(z, "LU failed".into()))
    }

    /// `E_+(z)^{-1} f(z)` for a column function.
    pub fn whitened_value(&self, f: &VecRational, z: Complex64) -> Result<CVector> {
        let v = f.eval_vec(z)?;
        match &self.weight {
            None => Ok(v),
            Some(w) => {
                let ep = w.e_plus.eval(z)?;
                if ep.determinant().norm() < SINGULAR_WEIGHT_TOL {
                    return Err(Error::SingularEPlus(z, "E_+ singular".into()));
                }
                let x = linalg::solve(&ep, &CMatrix::from_column_slice(self.m, 1, v.as_slice()))
                    .ok_or_else(|| Error::SingularEPlus(z, "LU failed".into()))?;
                Ok(x.column(0).into_owned())
            }
        }
    }

    /// Samples of `E_+^{-1} f` at the grid nodes (one column per node).
    pub fn sample(&self, f: &VecRational, grid: &BoundaryGrid) -> Result<CMatrix> {
        let raw = f.sample(grid)?;
        let Some(w) = &self.weight else {
            return Ok(raw);
        };
        let ep = w.e_plus.sample_matrix(grid)?;
        let mut out = CMatrix::zeros(self.m, grid.nodes.len());
        for (k, e) in ep.iter().enumerate() {
            if e.determinant().norm() < SINGULAR_WEIGHT_TOL {
                return Err(Error::SingularWeight(grid.nodes[k]));
            }
            let x = linalg::solve(e, &raw.columns(k, 1).into_owned())
                .ok_or(Error::SingularWeight(grid.nodes[k]))?;
            out.set_column(k, &x.column(0));
        }
        Ok(out)
    }

    fn poles_of<'a>(&self, funcs: impl IntoIterator<Item = &'a VecRational>) -> Vec<Complex64> {
        let mut poles: Vec<Complex64> = funcs.into_iter().flat_map(|f| f.den_roots().iter().copied()).collect();
        poles.extend(self.basis.iter().flat_map(|f| f.den_roots().iter().copied()));
        if let Some(w) = &self.weight {
            poles.extend(w.zeros.iter().copied());
            poles.extend(w.e_plus.den_roots().iter().copied());
        }
        poles
    }

    fn start_size<'a>(&self, funcs: impl IntoIterator<Item = &'a VecRational>) -> usize {
        domains::suggest_grid_size(self.kind, &self.poles_of(funcs), domains::max_grid())
    }

    /// Converged matrix `M[j][k] = ⟨fs[k], gs[j]⟩` in the space's inner product.
    pub fn cross_gram(&self, fs: &[VecRational], gs: &[VecRational]) -> Result<CMatrix> {
        let start = self.start_size(fs.iter().chain(gs));
        let (_, m) = converge(self.kind, start, domains::max_grid(), |grid| {
            let sf = fs.iter().map(|f| self.sample(f, grid)).collect::<Result<Vec<_>>>()?;
            let sg = gs.iter().map(|g| self.sample(g, grid)).collect::<Result<Vec<_>>>()?;
            Ok(CMatrix::from_fn(gs.len(), fs.len(), |j, k| sampled_inner(&sf[k], &sg[j], &grid.weights)))
        })?;
        Ok(m)
    }

    pub fn inner(&self, f: &VecRational, g: &VecRational) -> Result<Complex64> {
        Ok(self.cross_gram(std::slice::from_ref(f), std::slice::from_ref(g))?[(0, 0)])
    }

    pub fn norm(&self, f: &VecRational) -> Result<f64> {
        Ok(self.inner(f, f)?.re.max(0.0).sqrt())
    }

    /// Coefficients `c_k = ⟨f, e_k⟩`.
    pub fn project(&self, f: &VecRational) -> Result<CVector> {
        self.project_many(std::slice::from_ref(f)).map(|m| m.column(0).into_owned())
    }

    /// Coefficient vectors of several functions, one column each.
    pub fn project_many(&self, fs: &[VecRational]) -> Result<CMatrix> {
        self.cross_gram(fs, &self.basis)
    }

    /// `Σ c_k e_k`.
    pub fn combine(&self, c: &CVector) -> Result<VecRational> {
        MatRational::linear_combination(&self.basis, c.as_slice())
    }

    /// `‖f - Π f‖` computed from the residual function itself, so it does not
    /// lose accuracy to cancellation.
    pub fn residual(&self, f: &VecRational) -> Result<(CVector, f64)> {
        let c = self.project(f)?;
        let r = f.sub(&self.combine(&c)?)?;
        Ok((c, self.norm(&r)?))
    }

    /// Kernel section `K_ω` as an `m × m` rational function.
    pub fn kernel_section(&self, omega: Complex64) -> Result<MatRational> {
        check_alpha(self.kind, omega)?;
        let (a, b) = rho_affine(self.kind, omega);
        let em = self.e_minus.postmul_const(&(-self.e_minus_at(omega)?.adjoint()))?;
        let ep = match &self.weight {
            None => MatRational::identity(self.m),
            Some(w) => w.e_plus.postmul_const(&w.e_plus.eval(omega)?.adjoint())?,
        };
        ep.add(&em)?.div_affine(a, b)
    }

    /// `K_ω(λ)` evaluated pointwise.
    pub fn kernel_value(&self, omega: Complex64, lambda: Complex64) -> Result<CMatrix> {
        let r = domains::rho(self.kind, omega, lambda);
        if r.norm() < 1e-300 {
            return Err(Error::Pole(lambda));
        }
        let ep = self.e_plus_at(lambda)? * self.e_plus_at(omega)?.adjoint();
        let em = self.e_minus_at(lambda)? * self.e_minus_at(omega)?.adjoint();
        Ok((ep - em) / r)
    }

    /// Exact Gram matrix of `{K_{ω_i} e_a}`: entry `((j,b),(i,a))` is
    /// `⟨K_{ω_i} e_a, K_{ω_j} e_b⟩ = K_{ω_i}(ω_j)[b][a]`.
    pub fn kernel_gram(&self, points: &[Complex64]) -> Result<CMatrix> {
        let m = self.m;
        let p = points.len();
        let mut g = CMatrix::zeros(p * m, p * m);
        for (i, &wi) in points.iter().enumerate() {
            for (j, &wj) in points.iter().enumerate() {
                let k = self.kernel_value(wi, wj)?;
                for a in 0..m {
                    for b in 0..m {
                        g[(j * m + b, i * m + a)] = k[(b, a)];
                    }
                }
            }
        }
        Ok((&g + g.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Rank of the kernel Gram at `count` generic points, relative to its
    /// largest eigenvalue.
    pub fn kernel_span_rank(&self, count: usize) -> Result<usize> {
        let g = self.kernel_gram(&domains::generic_points(self.kind, count))?;
        let eig = linalg::hermitian_eigen(&g).0;
        let top = eig.first().copied().unwrap_or(0.0);
        Ok(eig.iter().filter(|&&x| x > 1e-10 * top).count())
    }

    /// `m × n` matrix whose column `k` is `(E_+^{-1} e_k)(α)`.
    pub fn eval_matrix(&self, alpha: Complex64) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.m, self.dim);
        for (k, e) in self.basis.iter().enumerate() {
            out.set_column(k, &self.whitened_value(e, alpha)?);
        }
        Ok(out)
    }

    /// Dimensions of the space, of the kernel span `M_α` and of `H_α`.
    pub fn subspace_dims(&self, alpha: Complex64, tol_sv: f64) -> Result<SubspaceDims> {
        check_alpha(self.kind, alpha)?;
        let t = self.theta_at(alpha)?;
        let n = CMatrix::identity(self.m, self.m) - &t * t.adjoint();
        let dim_m = linalg::rank_above(&n, rank_threshold(tol_sv));
        Ok(SubspaceDims { dim_h: self.dim, dim_m, dim_h_alpha: self.dim.saturating_sub(dim_m) })
    }

    /// `R_α f = (f - f(α)) / (λ - α)` for `f` in the space.
    pub fn backward_shift(&self, alpha: Complex64, f: &VecRational) -> Result<VecRational> {
        check_alpha(self.kind, alpha)?;
        let (_, res) = self.residual(f)?;
        let scale = self.norm(f)?.max(1.0);
        if res > 1e-9 * scale {
            return Err(Error::NotInSpace(res));
        }
        f.backward_shift(alpha)
    }

    /// Orthonormalize `funcs` (spanning a space of dimension `dim`) in the
    /// space's inner product.
    fn orthonormalize(&mut self, funcs: Vec<VecRational>) -> Result<()> {
        let start = self.start_size(&funcs);
        let (grid, g) = converge(self.kind, start, domains::max_grid(), |grid| {
            let s = funcs.iter().map(|f| self.sample(f, grid)).collect::<Result<Vec<_>>>()?;
            Ok(sampled_gram(&s, &grid.weights))
        })?;
        let t = if funcs.len() == self.dim {
            let l = linalg::cholesky(&g, 1e-12)?;
            linalg::lower_inverse(&l).adjoint()
        } else {
            eigen_transform(&g, self.dim)?
        };
        let mut basis = combine_columns(&funcs, &t)?;
        let mut residual = self.gram_residual_on(&basis, &grid)?;
        if residual > REORTHO_THRESHOLD {
            let g2 = self.gram_on(&basis, &grid)?;
            let l = linalg::cholesky(&g2, 1e-12)?;
            basis = combine_columns(&basis, &linalg::lower_inverse(&l).adjoint())?;
            residual = self.gram_residual_on(&basis, &grid)?;
        }
        self.basis = basis;
        self.gram_residual = residual;
        self.grid = grid;
        Ok(())
    }

    fn gram_on(&self, funcs: &[VecRational], grid: &BoundaryGrid) -> Result<CMatrix> {
        let s = funcs.iter().map(|f| self.sample(f, grid)).collect::<Result<Vec<_>>>()?;
        Ok(sampled_gram(&s, &grid.weights))
    }

    fn gram_residual_on(&self, funcs: &[VecRational], grid: &BoundaryGrid) -> Result<f64> {
        let g = self.gram_on(funcs, grid)?;
        Ok(linalg::max_abs(&(g - CMatrix::identity(funcs.len(), funcs.len()))))
    }

    /// Kernel sections at `dim + 2` generic points, every direction.
    fn kernel_prebasis(&self) -> Result<Vec<VecRational>> {
        let mut out = Vec::new();
        for w in domains::generic_points(self.kind, self.dim + 2) {
            let k = self.kernel_section(w)?;
            for a in 0..self.m {
                out.push(k.column(a));
            }
        }
        Ok(out)
    }

    /// Check that the kernel span at `dim + 2` points has rank `dim`.
    fn assert_dimension(&self) -> Result<()> {
        let r = self.kernel_span_rank(self.dim + 2)?;
        if r != self.dim {
            return Err(Error::RankDeficiency(format!(
                "kernel span has rank {r}, expected dimension {}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// `G = Q Λ Q*`; keep the top `dim` eigenpairs and return `Q_dim Λ_dim^{-1/2}`.
fn eigen_transform(g: &CMatrix, dim: usize) -> Result<CMatrix> {
    let (vals, vecs) = linalg::hermitian_eigen(g);
    let top = vals.first().copied().unwrap_or(0.0);
    if dim == 0 {
        return Ok(CMatrix::zeros(g.nrows(), 0));
    }
    if vals.len() < dim || vals[dim - 1] <= 1e-13 * top {
        return Err(Error::RankDeficiency(format!(
            "kernel Gram has fewer than {dim} significant eigenvalues"
        )));
    }
    if vals.len() > dim && vals[dim] > 1e-9 * top {
        return Err(Error::RankDeficiency(format!(
            "kernel Gram eigenvalue {} = {:.3e} exceeds the dimension {dim}",
            dim + 1,
            vals[dim] / top
        )));
    }
    Ok(CMatrix::from_fn(g.nrows(), dim, |i, j| vecs[(i, j)] / vals[j].sqrt()))
}

fn combine_columns(funcs: &[VecRational], t: &CMatrix) -> Result<Vec<VecRational>> {
    (0..t.ncols())
        .map(|j| {
            let c: Vec<Complex64> = t.column(j).iter().copied().collect();
            MatRational::linear_combination(funcs, &c)
        })
        .collect()
}

/// Orthonormal basis of `H(Θ)`. Potapov products use the partial-product
/// pre-basis `U Θ_{k-1} v_k / ρ_{α_k}`; other inner functions use kernel
/// sections at generic points.
pub fn build_basis(theta: &InnerFunction) -> Result<ModelSpaceBasis> {
    let mut space = ModelSpaceBasis::skeleton(
        theta.kind,
        theta.m,
        Some(theta.clone()),
        theta.rational.clone(),
        None,
        theta.degree,
    );
    if theta.degree == 0 {
        space.gram_residual = 0.0;
        return Ok(space);
    }
    let pre = match &theta.factors {
        Some(bp) => {
            let mut pre = Vec::with_capacity(bp.degree());
            for (k, f) in bp.factors.iter().enumerate() {
                let (a, b) = rho_affine(bp.kind, f.alpha);
                let partial = bp.partial_rational(k)?.premul_const(&bp.constant)?;
                pre.push(partial.apply_vector(&f.v)?.div_affine(a, b)?);
            }
            pre
        }
        None => space.kernel_prebasis()?,
    };
    space.orthonormalize(pre)?;
    space.assert_dimension()?;
    Ok(space)
}

/// Weighted space `E_+ H(Θ)` with `Θ = E_+^{-1}E_-` known as an inner function:
/// the basis is `E_+ e_k` for the model-space basis `e_k`.
pub fn build_weighted_from_inner(
    e_plus: MatRational,
    zeros: Vec<Complex64>,
    theta: &InnerFunction,
) -> Result<ModelSpaceBasis> {
    let model = build_basis(theta)?;
    let e_minus = e_plus.mul(&theta.rational)?;
    let mut space = ModelSpaceBasis::skeleton(
        theta.kind,
        theta.m,
        Some(theta.clone()),
        e_minus,
        Some(Weight { e_plus: e_plus.clone(), zeros }),
        theta.degree,
    );
    space.basis = model.basis.iter().map(|e| e_plus.mul(e)).collect::<Result<_>>()?;
    let start = space.start_size(&[]);
    let basis = space.basis.clone();
    let (grid, g) = converge(space.kind, start.max(model.grid.size / 2), domains::max_grid(), |grid| {
        space.gram_on(&basis, grid)
    })?;
    space.gram_residual = linalg::max_abs(&(g - CMatrix::identity(space.dim, space.dim)));
    space.grid = grid;
    if space.gram_residual > REORTHO_THRESHOLD {
        let b = std::mem::take(&mut space.basis);
        space.orthonormalize(b)?;
    }
    Ok(space)
}

/// Weighted space from a bare pair `(E_+, E_-)` of dimension `dim`, built
/// from weighted kernel sections.
pub fn build_weighted_generic(
    kind: DomainKind,
    e_plus: MatRational,
    e_minus: MatRational,
    zeros: Vec<Complex64>,
    dim: usize,
) -> Result<ModelSpaceBasis> {
    let m = e_plus.rows();
    let mut space = ModelSpaceBasis::skeleton(kind, m, None, e_minus, Some(Weight { e_plus, zeros }), dim);
    if dim == 0 {
        space.gram_residual = 0.0;
        return Ok(space);
    }
    let pre = space.kernel_prebasis()?;
    space.orthonormalize(pre)?;
    space.assert_dimension()?;
    Ok(space)
}

/// Coefficient-space projector onto `M_α = span{K_α u}`, from the quadrature
/// coordinates of the kernel functions `K_α e_j`.
pub fn kernel_projector(space: &ModelSpaceBasis, alpha: Complex64, tol_sv: f64) -> Result<CMatrix> {
    let rank = space.subspace_dims(alpha, tol_sv)?.dim_m;
    let k = space.kernel_section(alpha)?;
    let cols: Vec<VecRational> = (0..space.m).map(|j| k.column(j)).collect();
    let c = space.project_many(&cols)?;
    let (_, vecs) = linalg::hermitian_eigen(&(&c * c.adjoint()));
    let u = vecs.columns(0, rank.min(space.dim)).into_owned();
    Ok(&u * u.adjoint())
}

/// Orthonormal basis (columns) of `{c : Σ c_k e_k(α) = 0}`, the coordinates of
/// `H_α`, from the null space of the evaluation matrix.
pub fn vanishing_coordinates(space: &ModelSpaceBasis, alpha: Complex64, tol_sv: f64) -> Result<CMatrix> {
    let rank = space.subspace_dims(alpha, tol_sv)?.dim_m.min(space.dim);
    let e = space.eval_matrix(alpha)?;
    let (_, vecs) = linalg::hermitian_eigen(&(e.adjoint() * &e));
    Ok(vecs.columns(rank, space.dim - rank).into_owned())
}

/// Random element `Σ c_j K_{ω_j} u_j` of the space, unnormalized.
pub fn random_kernel_combination<R: rand::Rng + ?Sized>(
    space: &ModelSpaceBasis,
    terms: usize,
    rng: &mut R,
) -> Result<VecRational> {
    let mut funcs = Vec::with_capacity(terms);
    for _ in 0..terms {
        let w = crate::inner::random_alpha(space.kind, rng);
        let u = linalg::random_vector(rng, space.m);
        funcs.push(space.kernel_section(w)?.apply_vector(&u)?);
    }
    let coeffs = vec![ONE; terms];
    MatRational::linear_combination(&funcs, &coeffs)
}

/// Random element of the span of the basis.
pub fn random_element<R: rand::Rng + ?Sized>(space: &ModelSpaceBasis, rng: &mut R) -> Result<(CVector, VecRational)> {
    let c = linalg::random_vector(rng, space.dim);
    let f = space.combine(&c)?;
    Ok((c, f))
}

impl MatRational {
    /// Matrix value at every node of the grid.
    pub fn sample_matrix(&self, grid: &BoundaryGrid) -> Result<Vec<CMatrix>> {
        grid.nodes
            .iter()
            .map(|&z| self.eval(z).map_err(|_| Error::PoleOnBoundary(z)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::{disc_power, random_alpha, random_bp, BPFactor, BlaschkePotapov};
    use crate::linalg::ZERO;
    use crate::rational::Poly;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn space_of(bp: &BlaschkePotapov) -> ModelSpaceBasis {
        build_basis(&InnerFunction::from_bp(bp).unwrap()).unwrap()
    }

    fn diag_lambda_one() -> BlaschkePotapov {
        BlaschkePotapov::build(
            DomainKind::Disc,
            2,
            CMatrix::identity(2, 2),
            vec![BPFactor { alpha: ZERO, v: CVector::from_vec(vec![ONE, ZERO]) }],
        )
        .unwrap()
    }

    #[test]
    fn lambda_space_is_constants() {
        let s = space_of(&disc_power(1));
        assert_eq!(s.dim, 1);
        let v = s.basis[0].eval_vec(c(0.3, 0.4)).unwrap()[0];
        assert!((v.norm() - 1.0).abs() < 1e-14);
        assert!((s.basis[0].eval_vec(ZERO).unwrap()[0] - v).norm() < 1e-14);
    }

    #[test]
    fn lambda_squared_space_is_linear_polynomials() {
        let s = space_of(&disc_power(2));
        assert_eq!(s.dim, 2);
        let lam = MatRational::scalar(Poly(vec![ZERO, ONE]), vec![]);
        let one = MatRational::scalar(Poly::constant(ONE), vec![]);
        for f in [&lam, &one] {
            let (_, res) = s.residual(f).unwrap();
            assert!(res < 1e-12);
        }
        let sq = MatRational::scalar(Poly(vec![ZERO, ZERO, ONE]), vec![]);
        assert!(s.project(&sq).unwrap().norm() < 1e-14);
    }

    #[test]
    fn diag_space_spanned_by_first_axis() {
        let s = space_of(&diag_lambda_one());
        assert_eq!(s.dim, 1);
        let v = s.basis[0].eval_vec(c(0.2, -0.1)).unwrap();
        assert!((v[0].norm() - 1.0).abs() < 1e-14 && v[1].norm() < 1e-15);
        let k = s.kernel_section(ZERO).unwrap().column(0);
        assert!((s.residual(&k).unwrap().1) < 1e-12);
    }

    #[test]
    fn random_bases_are_orthonormal_and_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kind in DomainKind::ALL {
            for (m, n) in [(1, 3), (2, 4), (3, 6)] {
                let bp = random_bp(kind, m, n, &mut rng);
                let s = space_of(&bp);
                assert_eq!(s.dim, n);
                assert!(s.gram_residual < 1e-10, "{kind:?} {m} {n} {}", s.gram_residual);
                // orthogonal to Θ times polynomials (half-planes: Θ times kernels)
                let theta = bp.as_rational().unwrap();
                let mut tests = Vec::new();
                for j in 0..m {
                    let ej = CVector::from_fn(m, |i, _| if i == j { ONE } else { ZERO });
                    for k in 0..=n {
                        let g = match kind {
                            DomainKind::Disc => {
                                let mut p = vec![ZERO; k + 1];
                                p[k] = ONE;
                                MatRational::scalar(Poly(p), vec![])
                            }
                            _ => {
                                let w = domains::generic_points(kind, n + 1)[k];
                                let (a, b) = rho_affine(kind, w);
                                MatRational::scalar(Poly::constant(ONE), vec![]).div_affine(a, b).unwrap()
                            }
                        };
                        let col = theta.apply_vector(&ej).unwrap();
                        tests.push(col.mul(&g).unwrap_or_else(|_| col.clone()));
                    }
                }
                let proj = s.project_many(&tests).unwrap();
                assert!(linalg::max_abs(&proj) < 1e-10, "{kind:?} {}", linalg::max_abs(&proj));
                assert_eq!(s.kernel_span_rank(n + 2).unwrap(), n);
            }
        }
    }

    #[test]
    fn kernel_sections_reproduce() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for kind in DomainKind::ALL {
            let s = space_of(&random_bp(kind, 2, 3, &mut rng));
            for _ in 0..10 {
                let w = random_alpha(kind, &mut rng);
                let u = linalg::random_vector(&mut rng, 2);
                let k = s.kernel_section(w).unwrap().apply_vector(&u).unwrap();
                let (_, res) = s.residual(&k).unwrap();
                assert!(res < 1e-9, "{kind:?} {res}");
                for e in &s.basis {
                    let lhs = s.inner(e, &k).unwrap();
                    let rhs = (u.adjoint() * e.eval_vec(w).unwrap())[(0, 0)];
                    assert!((lhs - rhs).norm() < 1e-10);
                }
                let a = random_alpha(kind, &mut rng);
                let kab = s.kernel_value(a, w).unwrap();
                let kba = s.kernel_value(w, a).unwrap();
                assert!(linalg::max_abs(&(kab - kba.adjoint())) < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let s = space_of(&disc_power(1));
        assert!((s.kernel_section(ZERO).unwrap().eval(c(0.4, 0.1)).unwrap()[(0, 0)] - ONE).norm() < 1e-15);
        let s2 = space_of(&disc_power(2));
        let k0 = s2.kernel_section(ZERO).unwrap();
        let lam = MatRational::scalar(Poly(vec![ZERO, ONE]), vec![]);
        assert!(s2.inner(&lam, &k0).unwrap().norm() < 1e-14);
    }

    #[test]
    fn kernel_gram_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for kind in DomainKind::ALL {
            let s = space_of(&random_bp(kind, 3, 4, &mut rng));
            let pts: Vec<_> = (0..3).map(|_| random_alpha(kind, &mut rng)).collect();
            let e = linalg::hermitian_eigen(&s.kernel_gram(&pts).unwrap()).0;
            assert!(*e.last().unwrap() > -1e-10);
        }
    }

    #[test]
    fn projection_examples() {
        let s = space_of(&disc_power(1));
        let one = MatRational::scalar(Poly::constant(ONE), vec![]);
        assert!((s.project(&one).unwrap()[0].norm() - 1.0).abs() < 1e-14);
        // 1/λ lies in the orthogonal complement of H²
        let inv = MatRational::scalar(Poly::constant(ONE), vec![ZERO]);
        assert!(s.project(&inv).unwrap().norm() < 1e-14);
        let coeffs = s.project(&s.basis[0]).unwrap();
        assert!((coeffs[0] - ONE).norm() < 1e-13);
    }

    #[test]
    fn projection_matches_least_squares() {
        // Θ = λ Θ̃: project f = 1/λ + g and compare against the boundary
        // least-squares fit by the basis samples
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut bp = random_bp(DomainKind::Disc, 1, 3, &mut rng);
        bp.factors[0].alpha = ZERO;
        let s = space_of(&bp);
        let g = s.combine(&linalg::random_vector(&mut rng, 3)).unwrap();
        let f = g.add(&MatRational::scalar(Poly::constant(ONE), vec![ZERO])).unwrap();
        let c = s.project(&f).unwrap();
        let grid = domains::boundary_grid(DomainKind::Disc, 512).unwrap();
        let a = CMatrix::from_fn(512, 3, |k, j| s.basis[j].sample(&grid).unwrap()[(0, k)]);
        let b = CMatrix::from_fn(512, 1, |k, _| f.sample(&grid).unwrap()[(0, k)]);
        let ls = linalg::solve(&(a.adjoint() * &a), &(a.adjoint() * b)).unwrap();
        assert!((ls.column(0).into_owned() - c).norm() < 1e-10);
    }

    #[test]
    fn backward_shift_examples() {
        let s = space_of(&disc_power(2));
        let one = MatRational::scalar(Poly::constant(ONE), vec![]);
        let r = s.backward_shift(c(0.3, 0.1), &one).unwrap();
        assert!(r.eval_vec(c(0.2, 0.0)).unwrap()[0].norm() < 1e-15);
        let lam = MatRational::scalar(Poly(vec![ZERO, ONE]), vec![]);
        let r = s.backward_shift(ZERO, &lam).unwrap();
        assert!((r.eval_vec(c(0.7, 0.0)).unwrap()[0] - ONE).norm() < 1e-15);
        let sq = MatRational::scalar(Poly(vec![ZERO, ZERO, ONE]), vec![]);
        assert!(matches!(s.backward_shift(ZERO, &sq), Err(Error::NotInSpace(_))));
    }

    #[test]
    fn backward_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for kind in DomainKind::ALL {
            let s = space_of(&random_bp(kind, 2, 3, &mut rng));
            let (_, f) = random_element(&s, &mut rng).unwrap();
            let a = random_alpha(kind, &mut rng);
            let r = s.backward_shift(a, &f).unwrap();
            let (_, res) = s.residual(&r).unwrap();
            assert!(res < 1e-9, "{kind:?} {res}");
        }
    }

    #[test]
    fn subspace_dims_examples() {
        let d = |bp: &BlaschkePotapov, a| space_of(bp).subspace_dims(a, crate::inner::TOL_SV).unwrap();
        assert_eq!(d(&disc_power(2), ZERO), SubspaceDims { dim_h: 2, dim_m: 1, dim_h_alpha: 1 });
        assert_eq!(d(&disc_power(1), c(0.5, 0.0)), SubspaceDims { dim_h: 1, dim_m: 1, dim_h_alpha: 0 });
        assert_eq!(d(&diag_lambda_one(), c(0.5, 0.0)), SubspaceDims { dim_h: 1, dim_m: 1, dim_h_alpha: 0 });
    }

    #[test]
    fn decomposition_projectors_sum_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for kind in DomainKind::ALL {
            let s = space_of(&random_bp(kind, 2, 5, &mut rng));
            let a = random_alpha(kind, &mut rng);
            let pm = kernel_projector(&s, a, crate::inner::TOL_SV).unwrap();
            let h = vanishing_coordinates(&s, a, crate::inner::TOL_SV).unwrap();
            let ph = &h * h.adjoint();
            assert!(linalg::max_abs(&(pm + ph - CMatrix::identity(5, 5))) < 1e-10);
            let dims = s.subspace_dims(a, crate::inner::TOL_SV).unwrap();
            assert_eq!(h.ncols(), dims.dim_h_alpha);
        }
    }

    #[test]
    fn generic_path_matches_potapov_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for kind in DomainKind::ALL {
            let bp = random_bp(kind, 2, 3, &mut rng);
            let a = space_of(&bp);
            let g = InnerFunction::from_rational(kind, bp.as_rational().unwrap(), None).unwrap();
            let b = build_basis(&g).unwrap();
            assert_eq!(b.dim, 3);
            assert!(b.gram_residual < 1e-10);
            // same subspace: the cross Gram is unitary
            let cross = a.cross_gram(&b.basis, &a.basis).unwrap();
            assert!(linalg::max_abs(&(cross.adjoint() * &cross - CMatrix::identity(3, 3))) < 1e-9);
        }
    }
}
