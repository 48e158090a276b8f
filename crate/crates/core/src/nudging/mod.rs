mod observer;
mod stream;

pub use observer::{
    rhs_nudged, step_nudged, sync_error, NudgedModel, NudgedState, NudgedStepper, NUDGING_GUARD,
};
pub use stream::{check_cutoff, DerivativeSource, ObservationStream};
