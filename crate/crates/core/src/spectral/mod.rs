pub mod bilinear;
pub mod fft;
pub mod field;
pub mod grid;
pub mod ops;
pub mod random;
pub mod snapshot;

pub use bilinear::{bilinear_b, to_physical};
pub use field::{Coeff, SpectralField, ZERO_COEFF};
pub use grid::{norm_sq, GridSpec, Wavevector, DEFAULT_DEALIAS_FRACTION};
pub use ops::{
    apply_a, field_norms, helmholtz_forward, helmholtz_inverse, inner_product, leray_project,
    low_mode_project, low_mode_project_with, sobolev_norm_sq, FieldNorms, ModeRule,
};
pub use random::{random_divfree_field, DecayProfile, RandomFieldSpec};
pub use snapshot::{read_snapshot, write_snapshot};
