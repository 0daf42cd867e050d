use modelspace_core::basicop::NormReport;
use modelspace_core::domains::DomainKind;
use modelspace_core::transfer::{TransferReport, TransferTarget};
use serde::Serialize;
use serde_json::Value;

/// Residuals of the adjoint norm identity over random coefficient vectors.
#[derive(Debug, Serialize)]
pub struct IdentitySummary {
    pub trials: usize,
    pub max_residual: f64,
    /// De Branges instances only.
    pub max_pointwise_residual: Option<f64>,
    pub max_complement_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct NormOutput {
    pub command: &'static str,
    pub instance_kind: &'static str,
    pub instance: Value,
    pub domain: DomainKind,
    pub alpha: [f64; 2],
    pub seed: u64,
    pub tol: f64,
    pub tol_sv: f64,
    pub grid_n: usize,
    pub dim: usize,
    #[serde(flatten)]
    pub norm: NormReport,
    pub identity: IdentitySummary,
    /// Distance between the projection and explicit assemblies (plain model
    /// spaces only).
    pub dual_path: Option<f64>,
    pub pass: bool,
    pub wall_time: f64,
}

#[derive(Debug, Serialize)]
pub struct TransferOutput {
    pub command: &'static str,
    pub instance: Value,
    pub target: TransferTarget,
    pub alpha: [f64; 2],
    pub seed: u64,
    pub tol: f64,
    pub grid_n: usize,
    pub samples: usize,
    #[serde(flatten)]
    pub transfer: TransferReport,
    pub max_residual: f64,
    pub pass: bool,
    pub wall_time: f64,
}
