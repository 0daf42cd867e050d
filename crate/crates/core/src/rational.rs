//! Matrix-valued rational functions with a shared scalar denominator kept in
//! factored form, and the boundary inner product.
//!
//! A [`MatRational`] is `N(λ) / ∏ (λ - p_j)` where `N` is a matrix of
//! polynomials in the monomial basis (ascending coefficients) and the `p_j`
//! are stored exactly as produced. Nothing cancels unless
//! [`MatRational::normalize`] is called.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domains::BoundaryGrid;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};

/// Largest polynomial degree any numerator may reach.
pub const DEGREE_CAP: usize = 64;

/// Points within this relative distance of a denominator root are poles.
pub const POLE_TOL: f64 = 1e-13;

/// Grid nodes this close (relative) to a denominator root force a rotation.
pub const BOUNDARY_POLE_TOL: f64 = 1e-10;

/// Denominator roots closer than this (relative) are the same root when
/// forming common denominators.
const ROOT_MATCH_TOL: f64 = 1e-14;

/// Polynomial with complex coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(vec![])
    }

    pub fn constant(c: Complex64) -> Self {
        Poly(vec![c])
    }

    /// `a λ + b`
    pub fn affine(a: Complex64, b: Complex64) -> Self {
        Poly(vec![b, a])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots
            .iter()
            .fold(Poly::constant(ONE), |acc, &r| acc.mul(&Poly(vec![-r, ONE])))
    }

    /// Degree ignoring exactly-zero leading coefficients; `None` for the zero
    /// polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.iter().rposition(|c| *c != ZERO)
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.0.get(k).copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Sum of coefficient moduli weighted by `|z|^k`; the natural scale for
    /// judging whether `eval(z)` is zero up to rounding.
    pub fn eval_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.0.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly(self.0.iter().map(|&x| x * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![ZERO; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn pow(&self, k: usize) -> Poly {
        (0..k).fold(Poly::constant(ONE), |acc, _| acc.mul(self))
    }

    pub fn conj(&self) -> Poly {
        Poly(self.0.iter().map(|c| c.conj()).collect())
    }

    pub fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Synthetic division by `(λ - r)`: returns quotient and remainder.
    pub fn deflate(&self, r: Complex64) -> (Poly, Complex64) {
        let n = self.0.len();
        if n == 0 {
            return (Poly::zero(), ZERO);
        }
        let mut q = vec![ZERO; n.saturating_sub(1)];
        let mut acc = ZERO;
        for k in (0..n).rev() {
            let next = acc * r + self.0[k];
            if k > 0 {
                q[k - 1] = next;
            }
            acc = next;
        }
        (Poly(q), acc)
    }

    /// Roots via eigenvalues of the companion matrix.
    pub fn roots(&self) -> Vec<Complex64> {
        let Some(d) = self.degree() else {
            return vec![];
        };
        if d == 0 {
            return vec![];
        }
        let lead = self.0[d];
        let mut c = CMatrix::zeros(d, d);
        for i in 1..d {
            c[(i, i - 1)] = ONE;
        }
        for i in 0..d {
            c[(i, d - 1)] = -self.0[i] / lead;
        }
        linalg::eigenvalues(&c)
    }

    fn trimmed_len(&self) -> usize {
        self.degree().map_or(0, |d| d + 1)
    }
}

/// Moebius map `z ↦ (a z + b) / (c z + d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        if (a * d - b * c).norm() == 0.0 {
            return Err(Error::SingularMobius);
        }
        Ok(Mobius { a, b, c, d })
    }

    pub fn identity() -> Self {
        Mobius { a: ONE, b: ZERO, c: ZERO, d: ONE }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }
}

/// Matrix of rational functions over a shared monic denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct MatRational {
    rows: usize,
    cols: usize,
    num: Vec<Poly>,
    den: Vec<Complex64>,
}

/// A column-vector-valued rational function.
pub type VecRational = MatRational;

impl MatRational {
    pub fn new(rows: usize, cols: usize, num: Vec<Poly>, den: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || num.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} numerator entries for a {rows}x{cols} matrix",
                num.len()
            )));
        }
        let f = MatRational { rows, cols, num, den };
        f.check_degree()?;
        Ok(f)
    }

    pub fn constant(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let num = (0..rows * cols)
            .map(|k| Poly::constant(m[(k / cols, k % cols)]))
            .collect();
        MatRational { rows, cols, num, den: vec![] }
    }

    pub fn identity(m: usize) -> Self {
        MatRational::constant(&CMatrix::identity(m, m))
    }

    pub fn scalar(num: Poly, den: Vec<Complex64>) -> Self {
        MatRational { rows: 1, cols: 1, num: vec![num], den }
    }

    pub fn from_vector(v: &CVector) -> Self {
        MatRational::constant(&CMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.num[i * self.cols + j]
    }

    pub fn den_roots(&self) -> &[Complex64] {
        &self.den
    }

    pub fn num_degree(&self) -> usize {
        self.num.iter().filter_map(Poly::degree).max().unwrap_or(0)
    }

    fn check_degree(&self) -> Result<()> {
        let d = self.num_degree().max(self.den.len());
        if d > DEGREE_CAP {
            Err(Error::DegreeCap(d, DEGREE_CAP))
        } else {
            Ok(())
        }
    }

    fn den_poly(&self) -> Poly {
        Poly::from_roots(&self.den)
    }

    /// Product of `(z - p_j)`; fails when `z` sits on a root.
    fn den_value(&self, z: Complex64) -> Result<Complex64> {
        let mut d = ONE;
        for &p in &self.den {
            let f = z - p;
            if f.norm() <= POLE_TOL * (1.0 + p.norm()) {
                return Err(Error::Pole(z));
            }
            d *= f;
        }
        Ok(d)
    }

    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let d = self.den_value(z)?;
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.num[i * self.cols + j].eval(z) / d
        }))
    }

    /// Evaluate a column-vector function.
    pub fn eval_vec(&self, z: Complex64) -> Result<CVector> {
        let d = self.den_value(z)?;
        Ok(CVector::from_iterator(
            self.rows * self.cols,
            self.num.iter().map(|p| p.eval(z) / d),
        ))
    }

    pub fn column(&self, j: usize) -> MatRational {
        let num = (0..self.rows).map(|i| self.entry(i, j).clone()).collect();
        MatRational { rows: self.rows, cols: 1, num, den: self.den.clone() }
    }

    pub fn transpose(&self) -> MatRational {
        let num = (0..self.rows * self.cols)
            .map(|k| {
                let (i, j) = (k / self.rows, k % self.rows);
                self.entry(j, i).clone()
            })
            .collect();
        MatRational { rows: self.cols, cols: self.rows, num, den: self.den.clone() }
    }

    /// Conjugate every coefficient and root: `λ ↦ conj(f(conj λ))`.
    pub fn conj_coeffs(&self) -> MatRational {
        MatRational {
            rows: self.rows,
            cols: self.cols,
            num: self.num.iter().map(Poly::conj).collect(),
            den: self.den.iter().map(|p| p.conj()).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> MatRational {
        MatRational {
            rows: self.rows,
            cols: self.cols,
            num: self.num.iter().map(|p| p.scale(c)).collect(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &MatRational) -> Result<MatRational> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut num = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Poly::zero();
                for k in 0..self.cols {
                    acc = acc.add(&self.entry(i, k).mul(other.entry(k, j)));
                }
                num.push(acc);
            }
        }
        let mut den = self.den.clone();
        den.extend_from_slice(&other.den);
        let out = MatRational { rows: self.rows, cols: other.cols, num, den };
        out.check_degree()?;
        Ok(out)
    }

    /// Entrywise product with a scalar (1x1) rational function.
    pub fn scalar_mul(&self, s: &MatRational) -> Result<MatRational> {
        if s.shape() != (1, 1) {
            return Err(Error::Dimension(format!("scalar factor has shape {:?}", s.shape())));
        }
        let mut out = self.mul_poly(&s.num[0])?;
        out.den.extend_from_slice(&s.den);
        out.check_degree()?;
        Ok(out)
    }

    /// Left multiplication by a constant matrix.
    pub fn premul_const(&self, m: &CMatrix) -> Result<MatRational> {
        if m.ncols() != self.rows {
            return Err(Error::Dimension("constant premultiplier".into()));
        }
        let mut num = Vec::with_capacity(m.nrows() * self.cols);
        for i in 0..m.nrows() {
            for j in 0..self.cols {
                let mut acc = Poly::zero();
                for k in 0..self.rows {
                    if m[(i, k)] != ZERO {
                        acc = acc.add(&self.entry(k, j).scale(m[(i, k)]));
                    }
                }
                num.push(acc);
            }
        }
        Ok(MatRational { rows: m.nrows(), cols: self.cols, num, den: self.den.clone() })
    }

    /// Right multiplication by a constant matrix.
    pub fn postmul_const(&self, m: &CMatrix) -> Result<MatRational> {
        if m.nrows() != self.cols {
            return Err(Error::Dimension("constant postmultiplier".into()));
        }
        let mut num = Vec::with_capacity(self.rows * m.ncols());
        for i in 0..self.rows {
            for j in 0..m.ncols() {
                let mut acc = Poly::zero();
                for k in 0..self.cols {
                    if m[(k, j)] != ZERO {
                        acc = acc.add(&self.entry(i, k).scale(m[(k, j)]));
                    }
                }
                num.push(acc);
            }
        }
        Ok(MatRational { rows: self.rows, cols: m.ncols(), num, den: self.den.clone() })
    }

    pub fn apply_vector(&self, v: &CVector) -> Result<VecRational> {
        self.postmul_const(&CMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    /// Multiply every entry by the polynomial `p`.
    pub fn mul_poly(&self, p: &Poly) -> Result<MatRational> {
        let out = MatRational {
            rows: self.rows,
            cols: self.cols,
            num: self.num.iter().map(|q| q.mul(p)).collect(),
            den: self.den.clone(),
        };
        out.check_degree()?;
        Ok(out)
    }

    /// Divide by `a λ + b`. A vanishing `a` makes this a scaling.
    pub fn div_affine(&self, a: Complex64, b: Complex64) -> Result<MatRational> {
        if a.norm() <= 1e-300 {
            if b == ZERO {
                return Err(Error::Invalid("division by the zero polynomial".into()));
            }
            return Ok(self.scale(ONE / b));
        }
        let mut out = self.scale(ONE / a);
        out.den.push(-b / a);
        out.check_degree()?;
        Ok(out)
    }

    /// Rewrite `self` over a denominator that contains all of `self.den`
    /// (as a multiset, matching roots within tolerance).
    fn lift_to(&self, den: &[Complex64]) -> MatRational {
        let mut remaining: Vec<Complex64> = self.den.clone();
        let mut extra = Vec::new();
        for &r in den {
            if let Some(pos) = remaining.iter().position(|&p| roots_match(p, r)) {
                remaining.swap_remove(pos);
            } else {
                extra.push(r);
            }
        }
        debug_assert!(remaining.is_empty());
        let factor = Poly::from_roots(&extra);
        MatRational {
            rows: self.rows,
            cols: self.cols,
            num: self.num.iter().map(|p| p.mul(&factor)).collect(),
            den: den.to_vec(),
        }
    }

    /// Sum over the least common denominator.
    pub fn add(&self, other: &MatRational) -> Result<MatRational> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let den = common_denominator(&self.den, &other.den);
        let a = self.lift_to(&den);
        let b = other.lift_to(&den);
        let out = MatRational {
            rows: self.rows,
            cols: self.cols,
            num: a.num.iter().zip(&b.num).map(|(x, y)| x.add(y)).collect(),
            den,
        };
        out.check_degree()?;
        Ok(out)
    }

    pub fn sub(&self, other: &MatRational) -> Result<MatRational> {
        self.add(&other.scale(-ONE))
    }

    /// Linear combination `Σ c_k f_k`.
    pub fn linear_combination(funcs: &[MatRational], coeffs: &[Complex64]) -> Result<MatRational> {
        let first = funcs
            .first()
            .ok_or_else(|| Error::Dimension("empty linear combination".into()))?;
        let mut den: Vec<Complex64> = vec![];
        for f in funcs {
            den = common_denominator(&den, &f.den);
        }
        let mut num = vec![Poly::zero(); first.rows * first.cols];
        for (f, &c) in funcs.iter().zip(coeffs) {
            if f.shape() != first.shape() {
                return Err(Error::Dimension("mixed shapes in combination".into()));
            }
            if c == ZERO {
                continue;
            }
            let lifted = f.lift_to(&den);
            for (acc, p) in num.iter_mut().zip(&lifted.num) {
                *acc = acc.add(&p.scale(c));
            }
        }
        let out = MatRational { rows: first.rows, cols: first.cols, num, den };
        out.check_degree()?;
        Ok(out)
    }

    /// Exact composition `λ ↦ f(m(λ))`.
    pub fn compose(&self, m: &Mobius) -> Result<MatRational> {
        if (m.a * m.d - m.b * m.c).norm() == 0.0 {
            return Err(Error::SingularMobius);
        }
        let k = self.num_degree().max(self.den.len());
        let top = Poly::affine(m.a, m.b);
        let bottom = Poly::affine(m.c, m.d);
        let top_pows: Vec<Poly> = (0..=k).map(|j| top.pow(j)).collect();
        let bottom_pows: Vec<Poly> = (0..=k).map(|j| bottom.pow(j)).collect();
        let num: Vec<Poly> = self
            .num
            .iter()
            .map(|p| {
                p.0.iter().enumerate().fold(Poly::zero(), |acc, (j, &c)| {
                    if c == ZERO {
                        acc
                    } else {
                        acc.add(&top_pows[j].mul(&bottom_pows[k - j]).scale(c))
                    }
                })
            })
            .collect();
        let mut den = Vec::new();
        let mut constant = ONE;
        let mut push_linear = |lead: Complex64, c0: Complex64| {
            if lead.norm() <= 1e-14 * (lead.norm() + c0.norm()) {
                constant *= c0;
            } else {
                constant *= lead;
                den.push(-c0 / lead);
            }
        };
        for &p in &self.den {
            push_linear(m.a - p * m.c, m.b - p * m.d);
        }
        for _ in self.den.len()..k {
            push_linear(m.c, m.d);
        }
        let inv = ONE / constant;
        let out = MatRational {
            rows: self.rows,
            cols: self.cols,
            num: num.iter().map(|p| p.scale(inv)).collect(),
            den,
        };
        out.check_degree()?;
        Ok(out)
    }

    /// Cancel denominator roots at which every numerator entry vanishes to
    /// relative tolerance `tol`.
    pub fn normalize(&self, tol: f64) -> MatRational {
        let mut out = self.clone();
        loop {
            let hit = out.den.iter().position(|&p| {
                out.num.iter().all(|q| {
                    let s = q.eval_scale(p);
                    s == 0.0 || q.eval(p).norm() <= tol * s
                })
            });
            let Some(pos) = hit else { break };
            let p = out.den.remove(pos);
            out.num = out.num.iter().map(|q| q.deflate(p).0).collect();
        }
        out
    }

    /// `(f(λ) - f(α)) / (λ - α)` in exact coefficient arithmetic.
    pub fn backward_shift(&self, alpha: Complex64) -> Result<MatRational> {
        let fa = self.eval(alpha)?;
        let dpoly = self.den_poly();
        let num = self
            .num
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let shifted = p.sub(&dpoly.scale(fa[(k / self.cols, k % self.cols)]));
                shifted.deflate(alpha).0
            })
            .collect();
        Ok(MatRational { rows: self.rows, cols: self.cols, num, den: self.den.clone() })
    }

    /// Value at infinity of `λ f(λ)`. Numerator coefficients of degree at
    /// least the denominator degree must be negligible (relative `tol`),
    /// otherwise the limit diverges.
    pub fn lambda_times_at_infinity(&self, tol: f64) -> Result<CMatrix> {
        let d = self.den.len();
        let scale = self
            .num
            .iter()
            .flat_map(|p| p.0.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        for p in &self.num {
            for c in p.0.iter().skip(d) {
                if c.norm() > tol * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::LimitDiverged(c.norm()));
                }
            }
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            if d == 0 {
                ZERO
            } else {
                self.entry(i, j).coeff(d - 1)
            }
        }))
    }

    /// Sample a column-vector function at every grid node: column `k` of the
    /// result is the value at node `k`.
    pub fn sample(&self, grid: &BoundaryGrid) -> Result<CMatrix> {
        let len = self.rows * self.cols;
        let mut out = CMatrix::zeros(len, grid.nodes.len());
        for (k, &z) in grid.nodes.iter().enumerate() {
            if self.den.iter().any(|&p| (z - p).norm() <= BOUNDARY_POLE_TOL * (1.0 + p.norm())) {
                return Err(Error::PoleOnBoundary(z));
            }
            let d = self.den_value(z)?;
            for (i, p) in self.num.iter().enumerate() {
                out[(i, k)] = p.eval(z) / d;
            }
        }
        Ok(out)
    }

    /// Trim exact zero high-order coefficients.
    pub fn trimmed(&self) -> MatRational {
        MatRational {
            rows: self.rows,
            cols: self.cols,
            num: self
                .num
                .iter()
                .map(|p| Poly(p.0[..p.trimmed_len()].to_vec()))
                .collect(),
            den: self.den.clone(),
        }
    }
}

fn roots_match(p: Complex64, q: Complex64) -> bool {
    (p - q).norm() <= ROOT_MATCH_TOL * (1.0 + p.norm())
}

/// Multiset union of two root lists.
fn common_denominator(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = a.to_vec();
    let mut avail: Vec<bool> = vec![true; a.len()];
    for &r in b {
        if let Some(pos) = (0..a.len()).find(|&i| avail[i] && roots_match(a[i], r)) {
            avail[pos] = false;
        } else {
            out.push(r);
        }
    }
    out
}

/// Weighted boundary sum `Σ w_k g_k^* f_k` of two sampled functions.
pub fn sampled_inner(f: &CMatrix, g: &CMatrix, weights: &[f64]) -> Complex64 {
    let mut acc = ZERO;
    for (k, &w) in weights.iter().enumerate() {
        let mut s = ZERO;
        for i in 0..f.nrows() {
            s += g[(i, k)].conj() * f[(i, k)];
        }
        acc += s * w;
    }
    acc
}

/// Gram matrix `G[i][j] = ⟨f_j, f_i⟩` of sampled functions.
pub fn sampled_gram(samples: &[CMatrix], weights: &[f64]) -> CMatrix {
    let n = samples.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = sampled_inner(&samples[j], &samples[i], weights);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// Boundary inner product `⟨f, g⟩` on the domain of `grid`. When a pole sits
/// next to a node the grid is rotated by half a step once before giving up.
pub fn inner_product(f: &VecRational, g: &VecRational, grid: &BoundaryGrid) -> Result<Complex64> {
    if f.shape() != g.shape() || f.cols != 1 {
        return Err(Error::Dimension(format!(
            "inner product of {:?} and {:?}",
            f.shape(),
            g.shape()
        )));
    }
    let attempt = |grid: &BoundaryGrid| -> Result<Complex64> {
        Ok(sampled_inner(&f.sample(grid)?, &g.sample(grid)?, &grid.weights))
    };
    match attempt(grid) {
        Err(Error::PoleOnBoundary(_)) => attempt(&grid.rotated()),
        other => other,
    }
}

/// JSON form: `{"rows", "cols", "num": [[[[re,im],...]]], "den_roots": [[re,im],...]}`
/// with coefficients in ascending degree order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatRationalJson {
    pub rows: usize,
    pub cols: usize,
    pub num: Vec<Vec<Vec<[f64; 2]>>>,
    pub den_roots: Vec<[f64; 2]>,
}

pub fn c_from(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub fn c_to(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

impl TryFrom<&MatRationalJson> for MatRational {
    type Error = Error;

    fn try_from(j: &MatRationalJson) -> Result<Self> {
        if j.num.len() != j.rows || j.num.iter().any(|r| r.len() != j.cols) {
            return Err(Error::Invalid(format!(
                "numerator array does not have shape {}x{}",
                j.rows, j.cols
            )));
        }
        let num = j
            .num
            .iter()
            .flat_map(|row| row.iter())
            .map(|coeffs| Poly(coeffs.iter().copied().map(c_from).collect()))
            .collect();
        MatRational::new(j.rows, j.cols, num, j.den_roots.iter().copied().map(c_from).collect())
    }
}

impl From<&MatRational> for MatRationalJson {
    fn from(f: &MatRational) -> Self {
        MatRationalJson {
            rows: f.rows,
            cols: f.cols,
            num: (0..f.rows)
                .map(|i| {
                    (0..f.cols)
                        .map(|j| f.entry(i, j).0.iter().copied().map(c_to).collect())
                        .collect()
                })
                .collect(),
            den_roots: f.den.iter().copied().map(c_to).collect(),
        }
    }
}

impl Serialize for MatRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatRationalJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatRational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatRationalJson::deserialize(d)?;
        MatRational::try_from(&j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{boundary_grid, DomainKind};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn disc_blaschke(a: Complex64) -> MatRational {
        // (λ - a) / (1 - conj(a) λ) = (λ - a)/(-conj(a)) / (λ - 1/conj(a))
        MatRational::scalar(Poly(vec![-a, ONE]).scale(-ONE / a.conj()), vec![ONE / a.conj()])
    }

    #[test]
    fn eval_identity_over_linear() {
        let f = MatRational::identity(2).div_affine(c(-0.5, 0.0), ONE).unwrap();
        let v = f.eval(ZERO).unwrap();
        assert!((v - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn eval_at_blaschke_zero() {
        let b = disc_blaschke(c(0.5, 0.0));
        assert!(b.eval(c(0.5, 0.0)).unwrap()[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn product_of_factors_matches_factorwise() {
        let (a1, a2) = (c(0.3, 0.0), c(0.0, -0.4));
        let theta = disc_blaschke(a1).mul(&disc_blaschke(a2)).unwrap();
        let got = theta.eval(ZERO).unwrap()[(0, 0)];
        // b_a(0) = -a, so the product is a1 * a2
        let expect = a1 * a2;
        assert!((got - expect).norm() < 1e-15);
        for &z in &[c(0.2, 0.7), c(-0.9, 0.1), c(2.0, -1.0)] {
            let fw = (z - a1) / (ONE - a1.conj() * z) * (z - a2) / (ONE - a2.conj() * z);
            assert!((theta.eval(z).unwrap()[(0, 0)] - fw).norm() < 1e-14);
        }
    }

    #[test]
    fn eval_rejects_poles() {
        let b = disc_blaschke(c(0.5, 0.0));
        assert!(matches!(b.eval(c(2.0, 0.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn compose_identity_and_cayley() {
        let f = MatRational::scalar(Poly(vec![ZERO, ONE]), vec![]);
        assert_eq!(f.compose(&Mobius::identity()).unwrap().trimmed(), f);
        let cay = Mobius::new(ONE, -crate::linalg::I, ONE, crate::linalg::I).unwrap();
        let g = f.compose(&cay).unwrap();
        for &mu in &[c(0.3, 1.0), c(-2.0, 0.5), c(1.0, 0.0)] {
            let expect = (mu - crate::linalg::I) / (mu + crate::linalg::I);
            assert!((g.eval(mu).unwrap()[(0, 0)] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn compose_kernel_with_right_cayley() {
        // f(λ) = 1/(1 - 0.5 λ) composed with (μ-1)/(μ+1); f(0) = 1 at μ = 1
        let f = MatRational::scalar(Poly::constant(ONE), vec![])
            .div_affine(c(-0.5, 0.0), ONE)
            .unwrap();
        let m = Mobius::new(ONE, -ONE, ONE, ONE).unwrap();
        let g = f.compose(&m).unwrap();
        assert!((g.eval(ONE).unwrap()[(0, 0)] - ONE).norm() < 1e-14);
        let mut rng_state = 1u64;
        for _ in 0..16 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x = (rng_state >> 11) as f64 / (1u64 << 53) as f64;
            let mu = c(0.1 + 3.0 * x, 2.0 * x - 1.0);
            let direct = f.eval(m.apply(mu)).unwrap()[(0, 0)];
            let composed = g.eval(mu).unwrap()[(0, 0)];
            assert!((direct - composed).norm() < 1e-13 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn compose_rejects_singular_map() {
        assert!(matches!(Mobius::new(ONE, ONE, ONE, ONE), Err(Error::SingularMobius)));
    }

    #[test]
    fn backward_shift_of_monomial() {
        let f = MatRational::scalar(Poly(vec![ZERO, ONE]), vec![]);
        let r = f.backward_shift(ZERO).unwrap();
        assert!((r.eval(c(0.3, 0.2)).unwrap()[(0, 0)] - ONE).norm() < 1e-15);
        let one = MatRational::scalar(Poly::constant(ONE), vec![]);
        assert!(one.backward_shift(c(0.4, 0.1)).unwrap().eval(ZERO).unwrap()[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn normalize_cancels_common_root() {
        let p = c(0.3, -0.2);
        let f = MatRational::scalar(Poly(vec![-p, ONE]).mul(&Poly(vec![ONE, ONE])), vec![p, c(2.0, 0.0)]);
        let g = f.normalize(1e-10);
        assert_eq!(g.den_roots().len(), 1);
        assert!((g.eval(p).unwrap()[(0, 0)] - (p + ONE) / (p - c(2.0, 0.0))).norm() < 1e-14);
    }

    #[test]
    fn roots_of_cubic() {
        let rs = [c(1.0, 0.0), c(-0.5, 2.0), c(0.0, -3.0)];
        let mut got = Poly::from_roots(&rs).roots();
        got.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        let mut want = rs.to_vec();
        want.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12);
        }
    }

    #[test]
    fn disc_inner_products() {
        let grid = boundary_grid(DomainKind::Disc, 256).unwrap();
        let e1 = MatRational::constant(&CMatrix::from_column_slice(2, 1, &[ONE, ZERO]));
        assert!((inner_product(&e1, &e1, &grid).unwrap() - ONE).norm() < 1e-15);
        let k = MatRational::scalar(Poly::constant(ONE), vec![]).div_affine(c(-0.5, 0.0), ONE).unwrap();
        assert!((inner_product(&k, &k, &grid).unwrap() - c(4.0 / 3.0, 0.0)).norm() < 1e-14);
        let one = MatRational::scalar(Poly::constant(ONE), vec![]);
        let lam = MatRational::scalar(Poly(vec![ZERO, ONE]), vec![]);
        assert!(inner_product(&one, &lam, &grid).unwrap().norm() < 1e-15);
    }

    #[test]
    fn hardy_and_conjugate_hardy_are_orthogonal() {
        let grid = boundary_grid(DomainKind::Disc, 64).unwrap();
        for k in 0..4 {
            let f = MatRational::scalar(Poly((0..=k).map(|j| if j == k { ONE } else { ZERO }).collect()), vec![]);
            for j in 1..4 {
                // λ^{-j} has a pole of order j at 0
                let g = MatRational::scalar(Poly::constant(ONE), vec![ZERO; j]);
                assert!(inner_product(&f, &g, &grid).unwrap().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let grid = boundary_grid(DomainKind::Disc, 16).unwrap();
        let a = MatRational::identity(2).column(0);
        let b = MatRational::identity(3).column(0);
        assert!(matches!(inner_product(&a, &b, &grid), Err(Error::Dimension(_))));
        assert!(matches!(a.add(&b), Err(Error::Dimension(_))));
    }

    #[test]
    fn boundary_pole_is_reported() {
        let grid = boundary_grid(DomainKind::Disc, 16).unwrap();
        // pole at 1, rotation cannot avoid a pole sitting on the circle at a node
        // after rotation either, unless it lies between nodes; use a node-aligned pole
        let f = MatRational::scalar(Poly::constant(ONE), vec![ONE]);
        let node = grid.nodes[1];
        let g = MatRational::scalar(Poly::constant(ONE), vec![node, grid.rotated().nodes[0]]);
        assert!(inner_product(&f, &f, &grid).is_ok()); // rotated once
        assert!(matches!(inner_product(&g, &g, &grid), Err(Error::PoleOnBoundary(_))));
    }

    #[test]
    fn json_round_trip() {
        let f = disc_blaschke(c(0.3, 0.1)).mul(&MatRational::identity(1)).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: MatRational = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }

    fn small_c() -> impl Strategy<Value = Complex64> {
        (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
    }

    fn rational_f() -> impl Strategy<Value = MatRational> {
        (
            proptest::collection::vec(small_c(), 1..4),
            proptest::collection::vec(small_c(), 0..3),
        )
            .prop_map(|(coeffs, roots)| {
                // poles pushed outside the closed unit disc
                let roots = roots.into_iter().map(|r| r * 0.5 + r / r.norm().max(1e-3) * 1.5).collect();
                MatRational::scalar(Poly(coeffs), roots)
            })
    }

    proptest! {
        #[test]
        fn inner_product_is_sesquilinear(f1 in rational_f(), f2 in rational_f(), g in rational_f(), a in small_c()) {
            let grid = boundary_grid(DomainKind::Disc, 512).unwrap();
            let lhs = inner_product(&f1.scale(a).add(&f2).unwrap(), &g, &grid).unwrap();
            let rhs = a * inner_product(&f1, &g, &grid).unwrap() + inner_product(&f2, &g, &grid).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-13 * (1.0 + lhs.norm()));
            let sym = inner_product(&g, &f1, &grid).unwrap().conj() - inner_product(&f1, &g, &grid).unwrap();
            prop_assert!(sym.norm() < 1e-14 * (1.0 + lhs.norm()));
        }

        #[test]
        fn compose_respects_evaluation(f in rational_f(), z in small_c()) {
            let m = Mobius::new(ONE, c(0.0, -1.0), ONE, c(0.0, 1.0)).unwrap();
            let g = f.compose(&m).unwrap();
            let mu = Complex64::new(z.re * 3.0, 0.2 + z.im.abs() * 3.0);
            let direct = f.eval(m.apply(mu)).unwrap()[(0, 0)];
            let composed = g.eval(mu).unwrap()[(0, 0)];
            prop_assert!((direct - composed).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }
}
