//! Recursive recovery of the filter length from low-mode observations.

mod conditions;
mod driver;
mod schedule;
mod window;

pub use conditions::{
    check_conditions, cutoff_ladder, eta_ladder, select_parameters, CandidateWindow,
    ConditionInputs, ConditionOutcome, ConditionReport, Selection,
};
pub use driver::{
    recovery_loop, IterationRecord, NoMonitor, RecoveryOutcome, RecoveryProblem, WindowInfo,
    WindowMonitor,
};
pub use schedule::{RecoveryMode, RecoverySchedule, Status};
pub use window::{
    degeneracy_threshold, delta_n, h_grad_sq, update_beta, update_integrand, zeta_n, NodeData,
    Trapezoid, UpdateParams, UpdateTerms, WindowSample, DEGENERACY_RTOL,
};
