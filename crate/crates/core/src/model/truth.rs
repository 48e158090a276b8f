use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::integrator::Etd2;
use super::params::{Forcing, PhysicalParams};
use crate::error::{Error, Result};
use crate::spectral::bilinear::advect;
use crate::spectral::ops::helmholtz_inverse_unchecked;
use crate::spectral::{
    apply_a, field_norms, read_snapshot, sobolev_norm_sq, write_snapshot, GridSpec, SpectralField,
};

/// Coefficients beyond this magnitude are treated as a blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Default safety factor in `dt <= safety * L / (max|u| n_grid)`.
pub const DEFAULT_CFL_SAFETY: f64 = 0.5;

pub(crate) const INVARIANT_SAMPLE_EVERY: usize = 64;

/// Truth dynamics `u_t = -nu A u - (I + alpha^2 A)^{-1} B(u, u) + (I + alpha^2 A)^{-1} P f`.
#[derive(Debug, Clone)]
pub struct BardinaModel {
    grid: GridSpec,
    nu: f64,
    alpha_sq: f64,
    forcing: SpectralField,
    cfl_safety: f64,
}

impl BardinaModel {
    pub fn new(grid: &GridSpec, params: &PhysicalParams) -> Result<Self> {
        let forcing = Forcing::build(grid, params)?;
        Self::with_forcing(grid, params.nu, params.alpha_sq(), forcing.field)
    }

    /// Builds the model around an explicit forcing field, which is
    /// Leray-projected here.
    pub fn with_forcing(
        grid: &GridSpec,
        nu: f64,
        alpha_sq: f64,
        forcing: SpectralField,
    ) -> Result<Self> {
        grid.max_dealiased_wavenumber()?;
        grid.ensure_same(forcing.grid())?;
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::param("nu", format!("must be positive, got {nu}")));
        }
        if !(alpha_sq.is_finite() && alpha_sq >= 0.0) {
            return Err(Error::param(
                "alpha_sq",
                format!("must be finite and non-negative, got {alpha_sq}"),
            ));
        }
        Ok(Self {
            grid: *grid,
            nu,
            alpha_sq,
            forcing: crate::spectral::leray_project(&forcing),
            cfl_safety: DEFAULT_CFL_SAFETY,
        })
    }

    pub fn with_cfl_safety(mut self, safety: f64) -> Self {
        self.cfl_safety = safety;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha_sq
    }

    pub fn forcing(&self) -> &SpectralField {
        &self.forcing
    }

    /// Everything but the viscous term, plus `max|u|`.
    pub(crate) fn nonlinear(&self, u: &SpectralField) -> (SpectralField, f64) {
        let (b, umax) = advect(u, u);
        let src = &self.forcing - &b;
        (helmholtz_inverse_unchecked(&src, self.alpha_sq), umax)
    }

    /// `u_t` at the state `u`.
    pub fn rhs(&self, u: &SpectralField) -> Result<SpectralField> {
        self.grid.ensure_same(u.grid())?;
        let (n, _) = self.nonlinear(u);
        Ok(viscous_plus(&n, u, self.nu))
    }

    pub fn cfl_bound(&self, umax: f64) -> f64 {
        cfl_bound(&self.grid, self.cfl_safety, umax)
    }

    /// One ETD2RK step of size `dt`.
    pub fn step(&self, u: &SpectralField, dt: f64) -> Result<SpectralField> {
        let mut stepper = self.stepper(u.clone(), dt)?;
        stepper.advance()?;
        Ok(stepper.into_state())
    }

    pub fn stepper(&self, u0: SpectralField, dt: f64) -> Result<TruthStepper> {
        TruthStepper::new(self.clone(), u0, dt)
    }

    /// Uniform-step trajectory on `[0, horizon]` storing `u` and `u_t`.
    pub fn simulate(&self, u0: &SpectralField, horizon: f64, dt: f64) -> Result<TruthTrajectory> {
        let steps = step_count(horizon, dt)?;
        let mut stepper = self.stepper(u0.clone(), dt)?;
        let mut traj = TruthTrajectory::with_capacity(dt, steps + 1);
        traj.push(
            stepper.time(),
            stepper.state().clone(),
            stepper.derivative(),
        );
        for _ in 0..steps {
            stepper.advance()?;
            traj.push(
                stepper.time(),
                stepper.state().clone(),
                stepper.derivative(),
            );
        }
        Ok(traj)
    }
}

/// `-nu A u + n`.
pub(crate) fn viscous_plus(n: &SpectralField, u: &SpectralField, nu: f64) -> SpectralField {
    n.axpy(-nu, &apply_a(u))
}

pub(crate) fn cfl_bound(grid: &GridSpec, safety: f64, umax: f64) -> f64 {
    if umax > 0.0 {
        safety * grid.length() / (umax * grid.n_grid() as f64)
    } else {
        f64::INFINITY
    }
}

pub(crate) fn check_cfl(grid: &GridSpec, safety: f64, dt: f64, umax: f64) -> Result<()> {
    let bound = cfl_bound(grid, safety, umax);
    if dt > bound {
        return Err(Error::Cfl { dt, bound, umax });
    }
    Ok(())
}

pub(crate) fn check_finite(field: &SpectralField, time: f64) -> Result<()> {
    let m = field.max_abs_coeff();
    if !m.is_finite() || m > BLOWUP_THRESHOLD {
        return Err(Error::BlowUp {
            time,
            detail: format!("max coefficient magnitude {m:e}"),
        });
    }
    Ok(())
}

pub(crate) fn check_invariants(field: &SpectralField, time: f64) -> Result<()> {
    let scale = field.max_abs_coeff().max(f64::MIN_POSITIVE);
    let herm = field.hermitian_defect() / scale;
    let div = field.divergence_defect();
    if herm > 1e-12 || div > 1e-10 {
        return Err(Error::BlowUp {
            time,
            detail: format!("invariant drift: hermitian {herm:e}, divergence {div:e}"),
        });
    }
    Ok(())
}

/// Number of uniform steps covering `[0, horizon]`; `horizon` must be an
/// integer multiple of `dt`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::param(
            "horizon",
            format!("must be non-negative, got {horizon}"),
        ));
    }
    let ratio = horizon / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-8 * ratio.max(1.0) {
        return Err(Error::TimeGridMismatch(format!(
            "horizon {horizon} is not a multiple of dt = {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Streams the truth node by node, exposing `u` and the analytic `u_t`.
#[derive(Debug, Clone)]
pub struct TruthStepper {
    model: BardinaModel,
    etd: Etd2,
    u: SpectralField,
    n_u: SpectralField,
    step: usize,
}

impl TruthStepper {
    pub fn new(model: BardinaModel, u0: SpectralField, dt: f64) -> Result<Self> {
        model.grid.ensure_same(u0.grid())?;
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::param(
                "dt",
                format!("must be non-negative, got {dt}"),
            ));
        }
        check_finite(&u0, 0.0)?;
        let (n_u, umax) = model.nonlinear(&u0);
        check_cfl(&model.grid, model.cfl_safety, dt, umax)?;
        let etd = Etd2::new(&model.grid, model.nu, dt);
        Ok(Self {
            model,
            etd,
            u: u0,
            n_u,
            step: 0,
        })
    }

    pub fn model(&self) -> &BardinaModel {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.etd.dt()
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.etd.dt()
    }

    pub fn state(&self) -> &SpectralField {
        &self.u
    }

    pub fn into_state(self) -> SpectralField {
        self.u
    }

    /// `u_t` at the current node.
    pub fn derivative(&self) -> SpectralField {
        viscous_plus(&self.n_u, &self.u, self.model.nu)
    }

    pub fn advance(&mut self) -> Result<()> {
        let dt = self.etd.dt();
        let t_next = (self.step + 1) as f64 * dt;
        let a = self.etd.predictor(&self.u, &self.n_u);
        check_finite(&a, t_next)?;
        let (n_a, umax) = self.model.nonlinear(&a);
        check_cfl(&self.model.grid, self.model.cfl_safety, dt, umax)?;
        let next = self.etd.corrector(&a, &n_a, &self.n_u);
        check_finite(&next, t_next)?;
        self.step += 1;
        if self.step.is_multiple_of(INVARIANT_SAMPLE_EVERY) {
            check_invariants(&next, t_next)?;
        }
        let (n_next, umax) = self.model.nonlinear(&next);
        check_cfl(&self.model.grid, self.model.cfl_safety, dt, umax)?;
        self.u = next;
        self.n_u = n_next;
        Ok(())
    }
}

/// Stored truth: `u` and `u_t` on a uniform time grid.
#[derive(Debug, Clone, Default)]
pub struct TruthTrajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub derivatives: Vec<SpectralField>,
}

impl TruthTrajectory {
    pub fn with_capacity(dt: f64, n: usize) -> Self {
        Self {
            dt,
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            derivatives: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, u: SpectralField, ut: SpectralField) {
        self.times.push(t);
        self.states.push(u);
        self.derivatives.push(ut);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dump(&self, dir: &Path) -> Result<()> {
        let mut writer = TrajectoryWriter::create(dir)?;
        for k in 0..self.len() {
            writer.write(k, self.times[k], &self.states[k], &self.derivatives[k])?;
        }
        writer.finish()
    }

    /// Reads a dump written by [`TrajectoryWriter`].
    pub fn load(dir: &Path, dealias_fraction: f64) -> Result<Self> {
        let entries = read_index(dir)?;
        let dt = if entries.len() >= 2 {
            entries[1].time - entries[0].time
        } else {
            0.0
        };
        let mut traj = TruthTrajectory::with_capacity(dt, entries.len());
        for e in entries {
            let u = read_snapshot(&dir.join(&e.file), dealias_fraction)?;
            let ut = read_snapshot(&dir.join(derivative_name(&e.file)), dealias_fraction)?;
            traj.push(e.time, u, ut);
        }
        Ok(traj)
    }
}

pub const INDEX_FILE: &str = "index.txt";

fn derivative_name(state_file: &str) -> String {
    format!("ut_{}", state_file.trim_start_matches("u_"))
}

/// One line of a trajectory index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub time: f64,
    pub file: String,
    pub norm_u: f64,
    pub norm_grad_u: f64,
    pub norm_au: f64,
    pub norm_ut: f64,
}

pub fn read_index(dir: &Path) -> Result<Vec<IndexEntry>> {
    let path = dir.join(INDEX_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::Snapshot {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Snapshot {
            path: path.clone(),
            reason: format!("malformed index line {}", lineno + 1),
        };
        if parts.len() != 6 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(IndexEntry {
            time: num(parts[0])?,
            file: parts[1].to_string(),
            norm_u: num(parts[2])?,
            norm_grad_u: num(parts[3])?,
            norm_au: num(parts[4])?,
            norm_ut: num(parts[5])?,
        });
    }
    Ok(out)
}

/// Incremental trajectory dump: `u_XXXXXX.brdf`, `ut_XXXXXX.brdf` and an
/// index line per snapshot.
pub struct TrajectoryWriter {
    dir: PathBuf,
    index: BufWriter<fs::File>,
}

impl TrajectoryWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut index = BufWriter::new(fs::File::create(dir.join(INDEX_FILE))?);
        writeln!(index, "# time file norm_u norm_grad_u norm_au norm_ut")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            index,
        })
    }

    pub fn write(&mut self, k: usize, t: f64, u: &SpectralField, ut: &SpectralField) -> Result<()> {
        let name = format!("u_{k:06}.brdf");
        write_snapshot(u, &self.dir.join(&name))?;
        write_snapshot(ut, &self.dir.join(derivative_name(&name)))?;
        let n = field_norms(u);
        let nut = sobolev_norm_sq(ut, 0.0).sqrt();
        writeln!(
            self.index,
            "{t:.16e} {name} {:.16e} {:.16e} {:.16e} {nut:.16e}",
            n.l2, n.grad, n.stokes
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.index.flush()?;
        Ok(())
    }
}

/// `rhs_truth` for one-off evaluations.
pub fn rhs_truth(u: &SpectralField, params: &PhysicalParams) -> Result<SpectralField> {
    BardinaModel::new(u.grid(), params)?.rhs(u)
}

pub fn step_truth(u: &SpectralField, dt: f64, params: &PhysicalParams) -> Result<SpectralField> {
    BardinaModel::new(u.grid(), params)?.step(u, dt)
}

pub fn simulate_truth(
    u0: &SpectralField,
    horizon: f64,
    dt: f64,
    params: &PhysicalParams,
) -> Result<TruthTrajectory> {
    BardinaModel::new(u0.grid(), params)?.simulate(u0, horizon, dt)
}
