//! The three domains (unit disc, upper and right half-planes): kernels,
//! Blaschke factors, recentering maps, the `#` involution and boundary
//! quadrature grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, I, ONE, ZERO};
use crate::rational::{MatRational, Mobius, Poly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    #[serde(rename = "disc")]
    Disc,
    #[serde(rename = "upper")]
    UpperHalfPlane,
    #[serde(rename = "right")]
    RightHalfPlane,
}

impl DomainKind {
    pub const ALL: [DomainKind; 3] = [
        DomainKind::Disc,
        DomainKind::UpperHalfPlane,
        DomainKind::RightHalfPlane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Disc => "disc",
            DomainKind::UpperHalfPlane => "upper",
            DomainKind::RightHalfPlane => "right",
        }
    }

    /// Orientation-preserving map of the unit disc onto the domain, used for
    /// winding numbers and generic interior points.
    fn map_unit_disc(self, t: Complex64) -> Complex64 {
        match self {
            DomainKind::Disc => t,
            DomainKind::UpperHalfPlane => I * (ONE + t) / (ONE - t),
            DomainKind::RightHalfPlane => (ONE + t) / (ONE - t),
        }
    }
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disc" => Ok(DomainKind::Disc),
            "upper" => Ok(DomainKind::UpperHalfPlane),
            "right" => Ok(DomainKind::RightHalfPlane),
            other => Err(Error::Invalid(format!("unknown domain {other:?}"))),
        }
    }
}

/// `ρ_ω(λ)`: the scalar whose reciprocal is the Hardy-space kernel.
pub fn rho(kind: DomainKind, omega: Complex64, lambda: Complex64) -> Complex64 {
    let (a, b) = rho_affine(kind, omega);
    a * lambda + b
}

/// Coefficients `(a, b)` with `ρ_ω(λ) = a λ + b`.
pub fn rho_affine(kind: DomainKind, omega: Complex64) -> (Complex64, Complex64) {
    let w = omega.conj();
    match kind {
        DomainKind::Disc => (-w, ONE),
        DomainKind::UpperHalfPlane => (Complex64::new(0.0, -2.0 * PI), Complex64::new(0.0, 2.0 * PI) * w),
        DomainKind::RightHalfPlane => (Complex64::new(2.0 * PI, 0.0), 2.0 * PI * w),
    }
}

/// `ρ_ω(ω)`, real by construction.
pub fn rho_diag(kind: DomainKind, omega: Complex64) -> f64 {
    match kind {
        DomainKind::Disc => 1.0 - omega.norm_sqr(),
        DomainKind::UpperHalfPlane => 4.0 * PI * omega.im,
        DomainKind::RightHalfPlane => 4.0 * PI * omega.re,
    }
}

pub fn in_plus(kind: DomainKind, z: Complex64) -> bool {
    z.is_finite() && rho_diag(kind, z) > 0.0
}

pub fn check_alpha(kind: DomainKind, alpha: Complex64) -> Result<()> {
    if in_plus(kind, alpha) {
        Ok(())
    } else {
        Err(Error::Domain(alpha, kind.name()))
    }
}

/// Numerator polynomial and denominator roots of `b_α`, with the
/// denominator made monic.
pub fn blaschke_parts(kind: DomainKind, alpha: Complex64) -> Result<(Poly, Vec<Complex64>)> {
    check_alpha(kind, alpha)?;
    let zero_at_alpha = Poly(vec![-alpha, ONE]);
    Ok(match kind {
        DomainKind::Disc if alpha == ZERO => (zero_at_alpha, vec![]),
        // (λ-α)/(1-ᾱλ) = (λ-α)(-1/ᾱ) / (λ - 1/ᾱ)
        DomainKind::Disc => (zero_at_alpha.scale(-ONE / alpha.conj()), vec![ONE / alpha.conj()]),
        DomainKind::UpperHalfPlane => (zero_at_alpha, vec![alpha.conj()]),
        DomainKind::RightHalfPlane => (zero_at_alpha, vec![-alpha.conj()]),
    })
}

pub fn blaschke_rational(kind: DomainKind, alpha: Complex64) -> Result<MatRational> {
    let (num, den) = blaschke_parts(kind, alpha)?;
    Ok(MatRational::scalar(num, den))
}

/// `b_α(λ)`.
pub fn blaschke(kind: DomainKind, alpha: Complex64, lambda: Complex64) -> Result<Complex64> {
    check_alpha(kind, alpha)?;
    let den = match kind {
        DomainKind::Disc => ONE - alpha.conj() * lambda,
        DomainKind::UpperHalfPlane => lambda - alpha.conj(),
        DomainKind::RightHalfPlane => lambda + alpha.conj(),
    };
    if den.norm() <= 1e-13 * (1.0 + lambda.norm()) {
        return Err(Error::Pole(lambda));
    }
    Ok((lambda - alpha) / den)
}

/// Point sent to `α` by the recentering map: 0, i or 1.
pub fn reference_point(kind: DomainKind) -> Complex64 {
    match kind {
        DomainKind::Disc => ZERO,
        DomainKind::UpperHalfPlane => I,
        DomainKind::RightHalfPlane => ONE,
    }
}

/// Moebius form of `φ_α`, the automorphism of the domain sending the
/// reference point to `α`.
pub fn phi_mobius(kind: DomainKind, alpha: Complex64) -> Result<Mobius> {
    check_alpha(kind, alpha)?;
    let (c, d) = (alpha.re, alpha.im);
    Ok(match kind {
        DomainKind::Disc => Mobius { a: ONE, b: alpha, c: alpha.conj(), d: ONE },
        DomainKind::UpperHalfPlane => Mobius {
            a: Complex64::new(d, 0.0),
            b: Complex64::new(c, 0.0),
            c: ZERO,
            d: ONE,
        },
        DomainKind::RightHalfPlane => Mobius {
            a: Complex64::new(c, 0.0),
            b: Complex64::new(0.0, d),
            c: ZERO,
            d: ONE,
        },
    })
}

pub fn phi_alpha(kind: DomainKind, alpha: Complex64, lambda: Complex64) -> Result<Complex64> {
    let m = phi_mobius(kind, alpha)?;
    let den = m.c * lambda + m.d;
    if den.norm() <= 1e-13 {
        return Err(Error::Pole(lambda));
    }
    Ok((m.a * lambda + m.b) / den)
}

/// The reflection part of `f ↦ f^#`, as a Moebius map on the argument of the
/// coefficient-conjugated function.
fn sharp_mobius(kind: DomainKind) -> Mobius {
    match kind {
        DomainKind::Disc => Mobius { a: ZERO, b: ONE, c: ONE, d: ZERO },
        DomainKind::UpperHalfPlane => Mobius::identity(),
        DomainKind::RightHalfPlane => Mobius { a: -ONE, b: ZERO, c: ZERO, d: ONE },
    }
}

/// `f^#(λ) = f(σ(λ̄))*` with `σ` the reflection across the boundary. On the
/// disc the value at `λ = 0` is defined by continuation.
pub fn sharp(kind: DomainKind, f: &MatRational) -> Result<MatRational> {
    f.conj_coeffs().transpose().compose(&sharp_mobius(kind))
}

/// `(c1, c2)` with `A_α* f = c1 f + c2 R_α f` on the model space.
pub fn adjoint_coefficients(kind: DomainKind, alpha: Complex64) -> (Complex64, Complex64) {
    match kind {
        DomainKind::Disc => (-alpha.conj(), Complex64::new(1.0 - alpha.norm_sqr(), 0.0)),
        DomainKind::UpperHalfPlane => (ONE, alpha - alpha.conj()),
        DomainKind::RightHalfPlane => (ONE, alpha + alpha.conj()),
    }
}

/// Quadrature rule for the boundary inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGrid {
    pub kind: DomainKind,
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub size: usize,
    /// Node angles are `2π (k + offset) / N` on the parameter circle.
    pub offset: f64,
}

impl BoundaryGrid {
    /// Same rule shifted by half a node spacing.
    pub fn rotated(&self) -> BoundaryGrid {
        grid_with_offset(self.kind, self.size, self.offset + 0.5)
    }

    pub fn doubled(&self) -> BoundaryGrid {
        grid_with_offset(self.kind, self.size * 2, self.offset)
    }
}

fn grid_with_offset(kind: DomainKind, n: usize, offset: f64) -> BoundaryGrid {
    let step = 2.0 * PI / n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let theta = step * (k as f64 + offset);
        match kind {
            DomainKind::Disc => {
                nodes.push(Complex64::from_polar(1.0, theta));
                weights.push(1.0 / n as f64);
            }
            // x = i(1+t)/(1-t) = -cot(θ/2), dx = dθ / (2 sin²(θ/2))
            DomainKind::UpperHalfPlane | DomainKind::RightHalfPlane => {
                let half = 0.5 * theta;
                let x = -half.cos() / half.sin();
                nodes.push(if kind == DomainKind::UpperHalfPlane {
                    Complex64::new(x, 0.0)
                } else {
                    Complex64::new(0.0, x)
                });
                weights.push(PI / (n as f64 * half.sin().powi(2)));
            }
        }
    }
    BoundaryGrid { kind, nodes, weights, size: n, offset }
}

/// Trapezoid grid with `n` nodes. Half-plane grids are offset by a quarter
/// step so that no node sits at the point at infinity.
pub fn boundary_grid(kind: DomainKind, n: usize) -> Result<BoundaryGrid> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::Config(format!("grid size {n} must be a power of two >= 8")));
    }
    let offset = match kind {
        DomainKind::Disc => 0.0,
        _ => 0.25,
    };
    Ok(grid_with_offset(kind, n, offset))
}

/// Largest grid the convergence loop may use (`MODELSPACE_MAX_GRID`,
/// default 2^20).
pub fn max_grid() -> usize {
    std::env::var("MODELSPACE_MAX_GRID")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 8)
        .map(|n| if n.is_power_of_two() { n } else { n.next_power_of_two() / 2 })
        .unwrap_or(1 << 20)
}

/// Image of `z` on the parameter plane in which the grid is uniform on the
/// unit circle.
pub fn t_image(kind: DomainKind, z: Complex64) -> Complex64 {
    match kind {
        DomainKind::Disc => z,
        DomainKind::UpperHalfPlane => (z - I) / (z + I),
        DomainKind::RightHalfPlane => (z + ONE) / (z - ONE),
    }
}

/// Grid size at which the trapezoid error for integrands with the given
/// poles is expected to reach rounding level, as a power of two in
/// `[64, cap]`.
pub fn suggest_grid_size(kind: DomainKind, poles: &[Complex64], cap: usize) -> usize {
    let r = poles
        .iter()
        .filter(|p| p.is_finite())
        .map(|&p| {
            let t = t_image(kind, p).norm();
            if t.is_finite() { t.min(1.0 / t) } else { 0.0 }
        })
        .fold(0.0, f64::max);
    let raw = if r <= 0.0 {
        64.0
    } else if r >= 1.0 {
        cap as f64
    } else {
        1.2 * (1e-17f64).ln() / r.ln() + 8.0
    };
    let n = (raw.min(cap as f64).max(64.0) as usize).next_power_of_two();
    n.min(cap.max(8))
}

/// Evaluate `eval` on grids of size `N` and `2N`, doubling from `start` until
/// the two agree to `1e-12` relative. Returns the finer grid and its value.
pub fn converge<F>(kind: DomainKind, start: usize, cap: usize, mut eval: F) -> Result<(BoundaryGrid, CMatrix)>
where
    F: FnMut(&BoundaryGrid) -> Result<CMatrix>,
{
    let mut eval_rotating = |g: &BoundaryGrid| -> Result<(BoundaryGrid, CMatrix)> {
        match eval(g) {
            Ok(m) => Ok((g.clone(), m)),
            Err(Error::PoleOnBoundary(_)) => {
                let r = g.rotated();
                let m = eval(&r)?;
                Ok((r, m))
            }
            Err(e) => Err(e),
        }
    };
    let start = start.clamp(8, cap.max(8)).next_power_of_two();
    let (mut grid, mut coarse) = eval_rotating(&boundary_grid(kind, start)?)?;
    loop {
        if grid.size * 2 > cap {
            return Err(Error::NoConvergence(grid.size));
        }
        let (fine_grid, fine) = eval_rotating(&grid.doubled())?;
        let scale = crate::linalg::max_abs(&fine).max(1.0);
        if crate::linalg::max_abs(&(&fine - &coarse)) <= 1e-12 * scale {
            return Ok((fine_grid, fine));
        }
        grid = fine_grid;
        coarse = fine;
    }
}

/// Deterministic, well-spread points inside the domain (Halton sequence in
/// bases 2 and 3 mapped to a disc of radius 0.75 and transported).
pub fn generic_points(kind: DomainKind, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|k| {
            let idx = k as u64 + 7;
            let r = 0.15 + 0.6 * radical_inverse(idx, 2).sqrt();
            let t = Complex64::from_polar(r, 2.0 * PI * radical_inverse(idx, 3) + 0.3);
            kind.map_unit_disc(t)
        })
        .collect()
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Number of zeros minus poles of `f` inside the domain, from the change of
/// argument along the boundary. The sampling is refined until every step
/// turns by less than a quarter turn.
#[allow(clippy::mut_range_bound)] // the refine label restarts the scan with the new n
pub fn winding_number<F>(kind: DomainKind, mut f: F) -> Result<i64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let mut n = 1024usize;
    'refine: loop {
        let mut total = 0.0;
        let point = |k: usize| {
            let theta = 2.0 * PI * (k as f64 + 0.25) / n as f64;
            kind.map_unit_disc(Complex64::from_polar(1.0, theta))
        };
        let first = f(point(0))?;
        let mut prev = first;
        for k in 1..=n {
            let cur = if k == n { first } else { f(point(k))? };
            if cur.norm() == 0.0 {
                return Err(Error::Pole(point(k % n)));
            }
            let step = (cur / prev).arg();
            if step.abs() > 0.5 * PI {
                if n >= 1 << 18 {
                    return Err(Error::NoConvergence(n));
                }
                n *= 4;
                continue 'refine;
            }
            total += step;
            prev = cur;
        }
        return Ok((total / (2.0 * PI)).round() as i64);
    }
}
