//! Shared inputs for the kernel benchmarks.

use bardina_core::model::{BardinaModel, ForcingSpec, PhysicalParams};
use bardina_core::spectral::{random_divfree_field, DecayProfile, GridSpec, RandomFieldSpec};
use bardina_core::SpectralField;

pub struct Fixture {
    pub grid: GridSpec,
    pub params: PhysicalParams,
    pub model: BardinaModel,
    pub u: SpectralField,
    pub v: SpectralField,
}

/// Reference physics on an `n^3` box with two smooth unit-norm fields.
pub fn fixture(n: usize) -> Fixture {
    let grid = GridSpec::periodic_2pi(n).expect("valid grid");
    let params = PhysicalParams::new(0.1, 0.25, ForcingSpec::default()).expect("valid params");
    let model = BardinaModel::new(&grid, &params).expect("model");
    let spec = RandomFieldSpec::new(DecayProfile::Power(2.0)).normalized(1.0);
    Fixture {
        grid,
        params,
        model,
        u: random_divfree_field(&grid, &spec, 1),
        v: random_divfree_field(&grid, &spec, 2),
    }
}
