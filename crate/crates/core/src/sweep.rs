//! Randomized verification sweep over the grid of configurations
//! `{domain} × {m ∈ 1..=3} × {n ∈ 1..=6}`.
//!
//! Every instance draws from its own ChaCha8 stream keyed by `(seed, cell,
//! index)`, so the results do not depend on evaluation order or on whether
//! the sweep runs in parallel.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basicop::{
    adjoint_norm_identity, assemble, assemble_adjoint, closed_form_norm, dual_path_distance, verify_with, Branch,
};
use crate::domains::DomainKind;
use crate::error::Result;
use crate::inner::{random_alpha, random_bp, InnerFunction, TOL_SV};
use crate::linalg::{self, ZERO};
use crate::modelspace::{build_basis, ModelSpaceBasis, SubspaceDims};
use crate::parallel::{map_ordered, Execution};

pub const M_RANGE: std::ops::RangeInclusive<usize> = 1..=3;
pub const N_RANGE: std::ops::RangeInclusive<usize> = 1..=6;
pub const ALPHAS_PER_INSTANCE: usize = 3;

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub seed: u64,
    /// Instances per cell.
    pub count: usize,
    /// Tolerance on `|oracle - closed form|`.
    pub tol: f64,
    pub tol_sv: f64,
    /// Random coefficient vectors per `α` for the adjoint identity.
    pub identity_trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { seed: 42, count: 1, tol: 1e-8, tol_sv: TOL_SV, identity_trials: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub domain: DomainKind,
    pub m: usize,
    pub n: usize,
}

pub fn cells() -> Vec<Cell> {
    let mut out = Vec::new();
    for domain in DomainKind::ALL {
        for m in M_RANGE {
            for n in N_RANGE {
                out.push(Cell { domain, m, n });
            }
        }
    }
    out
}

pub fn instance_rng(seed: u64, cell: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | index as u64);
    rng
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaResult {
    pub alpha: [f64; 2],
    pub oracle_norm: f64,
    pub closed_norm: f64,
    pub abs_diff: f64,
    pub branch: Branch,
    pub singular_values: Vec<f64>,
    pub dims: SubspaceDims,
    pub witness_ratio: f64,
    pub na_check: f64,
    pub kernel_ratio_residual: Option<f64>,
    /// `‖f(α)‖/‖f‖` for the vanishing witness (unit branch only).
    pub unit_eval_residual: Option<f64>,
    pub unit_adjoint_ratio: Option<f64>,
    pub dual_path: f64,
    /// `‖A* (adjoint path) - A^H‖_F`.
    pub adjoint_consistency: f64,
    pub identity_residual: f64,
    pub invariance_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceResult {
    pub cell: Cell,
    pub index: usize,
    pub gram_residual: f64,
    pub kernel_min_eigenvalue: f64,
    pub alphas: Vec<AlphaResult>,
    pub error: Option<String>,
}

/// The random inner function and evaluation points of one instance.
pub fn draw_instance(seed: u64, cell_index: usize, cell: Cell, index: usize) -> (InnerFunction, Vec<Complex64>) {
    let mut rng = instance_rng(seed, cell_index, index);
    let bp = random_bp(cell.domain, cell.m, cell.n, &mut rng);
    let mut alphas: Vec<Complex64> = (0..ALPHAS_PER_INSTANCE).map(|_| random_alpha(cell.domain, &mut rng)).collect();
    if cell.domain == DomainKind::Disc {
        // exercise the limit branch of the explicit formula
        alphas[0] = ZERO;
    }
    (InnerFunction::from_bp(&bp).expect("Potapov products convert"), alphas)
}

/// All checks at a single point `α`.
pub fn check_alpha_point<R: rand::Rng + ?Sized>(
    space: &ModelSpaceBasis,
    alpha: Complex64,
    cfg: &SweepConfig,
    rng: &mut R,
) -> Result<AlphaResult> {
    let op = assemble(space, alpha)?;
    let closed = closed_form_norm(space, alpha, cfg.tol_sv)?;
    let report = verify_with(space, &op, &closed)?;
    let adj = assemble_adjoint(space, alpha)?;
    let adjoint_consistency = linalg::frobenius(&(&adj.mat - op.mat.adjoint()));
    let mut identity_residual: f64 = 0.0;
    for _ in 0..cfg.identity_trials {
        let c = linalg::random_vector(rng, space.dim);
        identity_residual = identity_residual.max(adjoint_norm_identity(space, &adj, &c)?.residual);
    }
    let mut invariance_residual: f64 = 0.0;
    for e in &space.basis {
        let r = space.backward_shift(alpha, e)?;
        let (_, res) = space.residual(&r)?;
        invariance_residual = invariance_residual.max(res / space.norm(&r)?.max(1.0));
    }
    Ok(AlphaResult {
        alpha: [alpha.re, alpha.im],
        oracle_norm: report.oracle_norm,
        closed_norm: report.closed_norm,
        abs_diff: report.abs_diff,
        branch: report.branch,
        singular_values: report.singular_values,
        dims: report.dims,
        witness_ratio: report.witness_ratio,
        na_check: report.na_check,
        kernel_ratio_residual: report.kernel_ratio_residual,
        unit_eval_residual: report.unit_witness.as_ref().map(|w| w.eval_residual),
        unit_adjoint_ratio: report.unit_witness.as_ref().map(|w| w.adjoint_ratio),
        dual_path: dual_path_distance(space, alpha)?,
        adjoint_consistency,
        identity_residual,
        invariance_residual,
    })
}

fn run_instance(cfg: &SweepConfig, cell_index: usize, cell: Cell, index: usize) -> InstanceResult {
    let mut out = InstanceResult {
        cell,
        index,
        gram_residual: f64::NAN,
        kernel_min_eigenvalue: f64::NAN,
        alphas: vec![],
        error: None,
    };
    let body = |out: &mut InstanceResult| -> Result<()> {
        let (theta, alphas) = draw_instance(cfg.seed, cell_index, cell, index);
        // a separate stream for the test vectors keeps the instance data
        // independent of how many checks run
        let mut rng = instance_rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, cell_index, index);
        let space = build_basis(&theta)?;
        out.gram_residual = space.gram_residual;
        let pts: Vec<Complex64> = (0..3).map(|_| random_alpha(cell.domain, &mut rng)).collect();
        let g = space.kernel_gram(&pts)?;
        out.kernel_min_eigenvalue = linalg::hermitian_eigen(&g).0.last().copied().unwrap_or(0.0);
        for a in alphas {
            out.alphas.push(check_alpha_point(&space, a, cfg, &mut rng)?);
        }
        Ok(())
    };
    if let Err(e) = body(&mut out) {
        out.error = Some(e.to_string());
    }
    out
}

pub fn run_instances(cfg: &SweepConfig, exec: Execution) -> Vec<InstanceResult> {
    let jobs: Vec<(usize, Cell, usize)> = cells()
        .into_iter()
        .enumerate()
        .flat_map(|(ci, cell)| (0..cfg.count).map(move |i| (ci, cell, i)))
        .collect();
    map_ordered(exec, &jobs, |&(ci, cell, i)| run_instance(cfg, ci, cell, i))
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub domain: DomainKind,
    pub m: usize,
    pub n: usize,
    pub instances: usize,
    pub max_abs_diff: f64,
    pub max_identity_residual: f64,
    pub max_dual_path: f64,
    pub max_invariance_residual: f64,
    pub min_kernel_eigenvalue: f64,
    pub errors: Vec<String>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub seed: u64,
    pub count: usize,
    pub tol: f64,
    pub identity_tol: f64,
    pub instances: usize,
    pub max_abs_diff: f64,
    pub max_identity_residual: f64,
    pub cells: Vec<CellSummary>,
    pub pass: bool,
}

/// Identity residuals must stay below this for a cell to pass.
pub const IDENTITY_TOL: f64 = 1e-10;

pub fn summarize(cfg: &SweepConfig, results: &[InstanceResult]) -> SweepSummary {
    let mut cells_out = Vec::new();
    for cell in cells() {
        let rs: Vec<&InstanceResult> = results.iter().filter(|r| r.cell == cell).collect();
        if rs.is_empty() {
            continue;
        }
        let alphas = || rs.iter().flat_map(|r| r.alphas.iter());
        let max = |f: &dyn Fn(&AlphaResult) -> f64| alphas().map(f).fold(0.0, f64::max);
        let errors: Vec<String> = rs.iter().filter_map(|r| r.error.clone()).collect();
        let max_abs_diff = max(&|a| a.abs_diff);
        let max_identity_residual = max(&|a| a.identity_residual);
        cells_out.push(CellSummary {
            domain: cell.domain,
            m: cell.m,
            n: cell.n,
            instances: rs.len(),
            max_abs_diff,
            max_identity_residual,
            max_dual_path: max(&|a| a.dual_path),
            max_invariance_residual: max(&|a| a.invariance_residual),
            min_kernel_eigenvalue: rs.iter().map(|r| r.kernel_min_eigenvalue).fold(f64::INFINITY, f64::min),
            pass: errors.is_empty() && max_abs_diff < cfg.tol && max_identity_residual < IDENTITY_TOL,
            errors,
        });
    }
    SweepSummary {
        seed: cfg.seed,
        count: cfg.count,
        tol: cfg.tol,
        identity_tol: IDENTITY_TOL,
        instances: results.len(),
        max_abs_diff: cells_out.iter().map(|c| c.max_abs_diff).fold(0.0, f64::max),
        max_identity_residual: cells_out.iter().map(|c| c.max_identity_residual).fold(0.0, f64::max),
        pass: cells_out.iter().all(|c| c.pass),
        cells: cells_out,
    }
}

pub fn run_sweep(cfg: &SweepConfig, exec: Execution) -> SweepSummary {
    summarize(cfg, &run_instances(cfg, exec))
}
