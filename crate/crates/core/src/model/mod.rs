pub mod envelope;
pub(crate) mod integrator;
pub mod params;
pub mod truth;

pub use envelope::{eval_m1, eval_m2, eval_m3, eval_m4_sq, BoundsEnvelope};
pub use params::{beltrami_field, Forcing, ForcingKind, ForcingSpec, PhysicalParams};
pub use truth::{
    read_index, rhs_truth, simulate_truth, step_count, step_truth, BardinaModel, IndexEntry,
    TrajectoryWriter, TruthStepper, TruthTrajectory,
};
