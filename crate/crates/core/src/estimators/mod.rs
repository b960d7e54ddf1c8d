//! Discrepancy objectives and the fitting routines built on them.

mod bdksd;
mod fit;
mod optim;
mod tksd;
mod truncsm;

pub use bdksd::{bdksd_vstat, BdKsdWorkspace};
pub use fit::{
    fit_bdksd, fit_tksd, fit_tksd_workspace, fit_truncsm, DistanceProvider, FitDiagnostics,
    FitResult,
};
pub use optim::{minimize, FitMethod, OptimConfig, OptimOutcome};
pub use tksd::{
    boundary_residual, ksd_vstat, reconstruct_g, tksd_grad, tksd_ustat, tksd_vstat, u_l_term, v_l,
    TksdWorkspace,
};
pub use truncsm::{truncsm_objective, truncsm_value_and_grad};
