//! The message a machine transmits to the center in one round.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::models::ParamVector;

/// Everything one machine sends per round. Round-1 (fit) reports carry the
/// local estimate and, under the Byzantine-center protocol, its variance
/// diagonal; round-2 (derivative) reports carry the gradient and Hessian
/// and, under the Byzantine-center protocol, their entry variances.
///
/// `corrupted` is ground-truth bookkeeping set by the harness; the
/// aggregators never read it.
#[derive(Debug, Clone)]
pub struct LocalReport {
    pub machine_id: usize,
    pub theta_hat: Option<ParamVector>,
    pub sigma_diag: Option<Array1<f64>>,
    pub gradient: Option<Array1<f64>>,
    pub hessian: Option<Array2<f64>>,
    pub grad_vars: Option<Array1<f64>>,
    pub hess_vars: Option<Array2<f64>>,
    pub corrupted: bool,
}

impl LocalReport {
    pub fn empty(machine_id: usize) -> Self {
        Self {
            machine_id,
            theta_hat: None,
            sigma_diag: None,
            gradient: None,
            hessian: None,
            grad_vars: None,
            hess_vars: None,
            corrupted: false,
        }
    }

    pub fn require_theta(&self) -> Result<&ParamVector> {
        self.theta_hat.as_ref().ok_or(Error::MissingReportField {
            machine_id: self.machine_id,
            field: "theta_hat",
        })
    }

    pub fn require_sigma_diag(&self) -> Result<&Array1<f64>> {
        self.sigma_diag.as_ref().ok_or(Error::MissingReportField {
            machine_id: self.machine_id,
            field: "sigma_diag",
        })
    }

    pub fn require_gradient(&self) -> Result<&Array1<f64>> {
        self.gradient.as_ref().ok_or(Error::MissingReportField {
            machine_id: self.machine_id,
            field: "gradient",
        })
    }

    pub fn require_hessian(&self) -> Result<&Array2<f64>> {
        self.hessian.as_ref().ok_or(Error::MissingReportField {
            machine_id: self.machine_id,
            field: "hessian",
        })
    }

    pub fn require_grad_vars(&self) -> Result<&Array1<f64>> {
        self.grad_vars.as_ref().ok_or(Error::MissingReportField {
            machine_id: self.machine_id,
            field: "grad_vars",
        })
    }

    pub fn require_hess_vars(&self) -> Result<&Array2<f64>> {
        self.hess_vars.as_ref().ok_or(Error::MissingReportField {
            machine_id: self.machine_id,
            field: "hess_vars",
        })
    }

    /// Number of scalars this report puts on the wire, with the Hessian-shaped
    /// fields counted as `wire_per_matrix` scalars each.
    pub fn scalar_count(&self, wire_per_matrix: u64) -> u64 {
        let vec_len = |v: &Option<Array1<f64>>| v.as_ref().map_or(0, |a| a.len() as u64);
        let mat_len = |v: &Option<Array2<f64>>| if v.is_some() { wire_per_matrix } else { 0 };
        vec_len(&self.theta_hat)
            + vec_len(&self.sigma_diag)
            + vec_len(&self.gradient)
            + mat_len(&self.hessian)
            + vec_len(&self.grad_vars)
            + mat_len(&self.hess_vars)
    }
}
