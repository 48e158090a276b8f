use crate::error::{Error, Result};
use crate::model::integrator::Etd2;
use crate::model::truth::{
    check_cfl, check_finite, check_invariants, viscous_plus, DEFAULT_CFL_SAFETY,
    INVARIANT_SAMPLE_EVERY,
};
use crate::spectral::bilinear::advect;
use crate::spectral::ops::helmholtz_inverse_unchecked;
use crate::spectral::{apply_a, leray_project, sobolev_norm_sq, GridSpec, ModeRule, SpectralField};

/// `eta * dt` above this makes the explicit feedback term unstable.
pub const NUDGING_GUARD: f64 = 0.5;

/// Observer dynamics for a fixed `beta^2`, `eta` and cutoff `N`:
/// `w_t = -nu A w + (I + beta^2 A)^{-1} (P f - B(w, w)) - eta P_N (w - u_obs)`.
#[derive(Debug, Clone)]
pub struct NudgedModel {
    grid: GridSpec,
    nu: f64,
    beta_sq: f64,
    eta: f64,
    cutoff: u32,
    rule: ModeRule,
    forcing: SpectralField,
    cfl_safety: f64,
}

impl NudgedModel {
    pub fn new(
        grid: &GridSpec,
        nu: f64,
        beta_sq: f64,
        eta: f64,
        cutoff: u32,
        forcing: &SpectralField,
    ) -> Result<Self> {
        grid.ensure_same(forcing.grid())?;
        super::stream::check_cutoff(grid, cutoff)?;
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::param("nu", format!("must be positive, got {nu}")));
        }
        if !(beta_sq.is_finite() && beta_sq > 0.0) {
            return Err(Error::param(
                "beta_sq",
                format!("must be positive, got {beta_sq}"),
            ));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::param(
                "eta",
                format!("must be non-negative, got {eta}"),
            ));
        }
        let forcing = if forcing.is_divergence_free() {
            forcing.clone()
        } else {
            leray_project(forcing)
        };
        Ok(Self {
            grid: *grid,
            nu,
            beta_sq,
            eta,
            cutoff,
            rule: ModeRule::Strict,
            forcing,
            cfl_safety: DEFAULT_CFL_SAFETY,
        })
    }

    pub fn with_rule(mut self, rule: ModeRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn beta_sq(&self) -> f64 {
        self.beta_sq
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn rule(&self) -> ModeRule {
        self.rule
    }

    pub fn forcing(&self) -> &SpectralField {
        &self.forcing
    }

    /// Non-viscous part of the right-hand side plus `B(w, w)` and `max|w|`.
    pub(crate) fn nonlinear(
        &self,
        w: &SpectralField,
        obs: &SpectralField,
    ) -> (SpectralField, SpectralField, f64) {
        let (b, wmax) = advect(w, w);
        let src = &self.forcing - &b;
        let mut n = helmholtz_inverse_unchecked(&src, self.beta_sq);
        self.add_feedback(&mut n, w, obs);
        (n, b, wmax)
    }

    /// `n -= eta P_N (w - obs)` on the observed modes.
    fn add_feedback(&self, n: &mut SpectralField, w: &SpectralField, obs: &SpectralField) {
        if self.eta == 0.0 {
            return;
        }
        let shells = self.grid.shell_table();
        let (ws, os) = (w.components(), obs.components());
        let dst = n.components_mut();
        for (idx, &k2) in shells.iter().enumerate() {
            if self.rule.contains(k2, self.cutoff) {
                for c in 0..3 {
                    dst[c][idx] -= (ws[c][idx] - os[c][idx]) * self.eta;
                }
            }
        }
    }

    pub fn rhs(&self, w: &SpectralField, obs: &SpectralField) -> Result<SpectralField> {
        self.grid.ensure_same(w.grid())?;
        self.grid.ensure_same(obs.grid())?;
        let (n, _, _) = self.nonlinear(w, obs);
        Ok(viscous_plus(&n, w, self.nu))
    }

    pub fn stepper(
        &self,
        w0: SpectralField,
        obs0: &SpectralField,
        dt: f64,
    ) -> Result<NudgedStepper> {
        NudgedStepper::new(self.clone(), w0, obs0, dt, 0)
    }
}

/// Observer state at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NudgedState {
    pub w: SpectralField,
    pub beta_sq: f64,
    pub eta: f64,
    pub n_obs: u32,
}

/// Streams the observer node by node. The caller supplies the observation at
/// each new node; node indices are global so they line up with the stream.
#[derive(Debug, Clone)]
pub struct NudgedStepper {
    model: NudgedModel,
    etd: Etd2,
    w: SpectralField,
    n_w: SpectralField,
    b_w: SpectralField,
    node: usize,
}

impl NudgedStepper {
    pub fn new(
        model: NudgedModel,
        w0: SpectralField,
        obs0: &SpectralField,
        dt: f64,
        node: usize,
    ) -> Result<Self> {
        model.grid.ensure_same(w0.grid())?;
        model.grid.ensure_same(obs0.grid())?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let product = model.eta * dt;
        if product > NUDGING_GUARD {
            return Err(Error::NudgingGuard { product });
        }
        let t0 = node as f64 * dt;
        check_finite(&w0, t0)?;
        let (n_w, b_w, wmax) = model.nonlinear(&w0, obs0);
        check_cfl(&model.grid, model.cfl_safety, dt, wmax)?;
        let etd = Etd2::new(&model.grid, model.nu, dt);
        Ok(Self {
            model,
            etd,
            w: w0,
            n_w,
            b_w,
            node,
        })
    }

    pub fn model(&self) -> &NudgedModel {
        &self.model
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn time(&self) -> f64 {
        self.node as f64 * self.etd.dt()
    }

    pub fn state(&self) -> &SpectralField {
        &self.w
    }

    pub fn into_state(self) -> SpectralField {
        self.w
    }

    /// `B(w, w)` at the current node.
    pub fn advection(&self) -> &SpectralField {
        &self.b_w
    }

    /// `w_t` at the current node.
    pub fn derivative(&self) -> SpectralField {
        viscous_plus(&self.n_w, &self.w, self.model.nu)
    }

    /// Observed modes of the truth's own predictor stage, built from the
    /// observed `u` and `u_t` at the current node. With this as the stage
    /// observation `w = u` is an exact fixed point of the discrete scheme.
    pub fn stage_observation(
        &self,
        obs_u: &SpectralField,
        obs_ut: &SpectralField,
    ) -> SpectralField {
        let n_obs = obs_ut.axpy(self.model.nu, &apply_a(obs_u));
        self.etd.predictor(obs_u, &n_obs)
    }

    /// One step with the observation at the next node also standing in for
    /// the predictor stage.
    pub fn advance(&mut self, obs_next: &SpectralField) -> Result<()> {
        self.advance_staged(obs_next, obs_next)
    }

    pub fn advance_staged(
        &mut self,
        obs_stage: &SpectralField,
        obs_next: &SpectralField,
    ) -> Result<()> {
        let dt = self.etd.dt();
        let t_next = (self.node + 1) as f64 * dt;
        let a = self.etd.predictor(&self.w, &self.n_w);
        check_finite(&a, t_next)?;
        let (n_a, _, amax) = self.model.nonlinear(&a, obs_stage);
        check_cfl(&self.model.grid, self.model.cfl_safety, dt, amax)?;
        let next = self.etd.corrector(&a, &n_a, &self.n_w);
        check_finite(&next, t_next)?;
        self.node += 1;
        if self.node.is_multiple_of(INVARIANT_SAMPLE_EVERY) {
            check_invariants(&next, t_next)?;
        }
        let (n_next, b_next, wmax) = self.model.nonlinear(&next, obs_next);
        check_cfl(&self.model.grid, self.model.cfl_safety, dt, wmax)?;
        self.w = next;
        self.n_w = n_next;
        self.b_w = b_next;
        Ok(())
    }
}

/// `w_t` for the observer at one instant.
pub fn rhs_nudged(
    state: &NudgedState,
    obs_now: &SpectralField,
    forcing: &SpectralField,
    nu: f64,
) -> Result<SpectralField> {
    ensure_observed_only(obs_now, state.n_obs)?;
    NudgedModel::new(
        state.w.grid(),
        nu,
        state.beta_sq,
        state.eta,
        state.n_obs,
        forcing,
    )?
    .rhs(&state.w, obs_now)
}

/// One ETD2RK step; `obs_now` and `obs_next` are `P_N u` at both ends.
pub fn step_nudged(
    state: &NudgedState,
    dt: f64,
    obs_now: &SpectralField,
    obs_next: &SpectralField,
    forcing: &SpectralField,
    nu: f64,
) -> Result<NudgedState> {
    ensure_observed_only(obs_now, state.n_obs)?;
    ensure_observed_only(obs_next, state.n_obs)?;
    let model = NudgedModel::new(
        state.w.grid(),
        nu,
        state.beta_sq,
        state.eta,
        state.n_obs,
        forcing,
    )?;
    let mut stepper = NudgedStepper::new(model, state.w.clone(), obs_now, dt, 0)?;
    stepper.advance(obs_next)?;
    Ok(NudgedState {
        w: stepper.into_state(),
        ..state.clone()
    })
}

fn ensure_observed_only(obs: &SpectralField, n_obs: u32) -> Result<()> {
    let shells = obs.grid().shell_table();
    for (idx, &k2) in shells.iter().enumerate() {
        if ModeRule::Strict.contains(k2, n_obs) {
            continue;
        }
        let c = obs.coeff_at(idx);
        if c.iter().any(|z| z.norm() != 0.0) {
            return Err(Error::param(
                "observation",
                format!("carries data outside the observed modes 0 < |K| < {n_obs}"),
            ));
        }
    }
    Ok(())
}

/// `(||w - u||^2, beta^2 ||grad (w - u)||^2)`.
pub fn sync_error(w: &SpectralField, u: &SpectralField, beta_sq: f64) -> Result<(f64, f64)> {
    w.grid().ensure_same(u.grid())?;
    let g = w - u;
    Ok((sobolev_norm_sq(&g, 0.0), beta_sq * sobolev_norm_sq(&g, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BardinaModel, ForcingSpec, PhysicalParams};
    use crate::spectral::{low_mode_project, random_divfree_field, DecayProfile, RandomFieldSpec};

    fn setup(n: usize) -> (GridSpec, SpectralField, SpectralField) {
        let g = GridSpec::periodic_2pi(n).unwrap();
        let spec = RandomFieldSpec::new(DecayProfile::Power(2.0)).normalized(1.0);
        (
            g,
            random_divfree_field(&g, &spec, 11),
            random_divfree_field(&g, &spec, 12),
        )
    }

    #[test]
    fn without_feedback_matches_the_truth_model() {
        let (g, u, _) = setup(8);
        let p = PhysicalParams::new(0.1, 0.3, ForcingSpec::none()).unwrap();
        let truth = BardinaModel::new(&g, &p).unwrap();
        let obs = SpectralField::zeros(g);
        let nudged = NudgedModel::new(&g, 0.1, 0.09, 0.0, 3, truth.forcing()).unwrap();
        let a = truth.rhs(&u).unwrap();
        let b = nudged.rhs(&u, &obs).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn feedback_touches_only_observed_modes() {
        let (g, w, u) = setup(8);
        let f = SpectralField::zeros(g);
        let obs = low_mode_project(&u, 3);
        let with = NudgedModel::new(&g, 0.1, 0.04, 5.0, 3, &f)
            .unwrap()
            .rhs(&w, &obs)
            .unwrap();
        let without = NudgedModel::new(&g, 0.1, 0.04, 0.0, 3, &f)
            .unwrap()
            .rhs(&w, &obs)
            .unwrap();
        let expect = low_mode_project(&(&w - &u), 3).scaled(-5.0);
        assert!((&with - &without).max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn guard_rejects_stiff_feedback() {
        let (g, w, u) = setup(8);
        let f = SpectralField::zeros(g);
        let model = NudgedModel::new(&g, 0.1, 0.04, 60.0, 3, &f).unwrap();
        let obs = low_mode_project(&u, 3);
        assert!(matches!(
            model.stepper(w.clone(), &obs, 0.01),
            Err(Error::NudgingGuard { .. })
        ));
        assert!(model.stepper(w, &obs, 0.008).is_ok());
    }

    #[test]
    fn observations_must_be_low_mode() {
        let (g, w, u) = setup(8);
        let state = NudgedState {
            w,
            beta_sq: 0.04,
            eta: 1.0,
            n_obs: 2,
        };
        let f = SpectralField::zeros(g);
        assert!(rhs_nudged(&state, &u, &f, 0.1).is_err());
        assert!(rhs_nudged(&state, &low_mode_project(&u, 2), &f, 0.1).is_ok());
        assert!(NudgedModel::new(&g, 0.1, 0.04, 1.0, 5, &f).is_err());
    }

    #[test]
    fn sync_error_of_identical_fields_is_zero() {
        let (_, w, u) = setup(8);
        assert_eq!(sync_error(&w, &w, 0.3).unwrap(), (0.0, 0.0));
        let (a, b) = sync_error(&w, &u, 0.5).unwrap();
        let (_, b1) = sync_error(&w, &u, 1.0).unwrap();
        assert!(a > 0.0 && (b - 0.5 * b1).abs() < 1e-14 * b1);
    }
}
