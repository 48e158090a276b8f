use serde::{Deserialize, Serialize};

use super::conditions::{select_parameters, ConditionReport, Selection};
use super::schedule::{RecoveryMode, RecoverySchedule, Status};
use super::window::{
    degeneracy_threshold, delta_n, update_integrand, zeta_n, NodeData, Trapezoid, UpdateParams,
};
use crate::error::{Error, Result};
use crate::model::envelope::BoundsEnvelope;
use crate::nudging::{NudgedModel, NudgedStepper, ObservationStream, NUDGING_GUARD};
use crate::spectral::{sobolev_norm_sq, SpectralField};

/// Audit trail of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub t_n: f64,
    pub t_hat_n: f64,
    pub t_np1: f64,
    pub eta_n: f64,
    pub n_cut: u32,
    pub n_tilde: u32,
    pub beta_n_sq: f64,
    /// Equal to `beta_n_sq` unless the status is `Updated`.
    pub beta_np1_sq: f64,
    /// Twin experiments only.
    pub abs_beta_sq_err: Option<f64>,
    pub delta_n: Option<f64>,
    pub zeta_n: Option<f64>,
    /// Twin experiments only: `||g(t_n)|| + beta_n ||grad g(t_n)||`.
    pub g_norm_combo: Option<f64>,
    pub conditions: Option<ConditionReport>,
    /// Window integrals of the seven update terms.
    pub update_terms: Option<[f64; 7]>,
    /// `||w(t_n)||^2`, `||grad w(t_n)||^2`.
    pub w_norm_sq: f64,
    pub w_grad_sq: f64,
    pub status: Status,
}

/// Timing and parameters of a window about to be integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowInfo {
    pub n: usize,
    pub t_n: f64,
    pub t_hat: f64,
    pub t_next: f64,
    pub k_n: usize,
    pub k_hat: usize,
    pub k_next: usize,
    pub eta: f64,
    pub n_cut: u32,
    pub beta_sq: f64,
}

/// Hook for diagnostics that run alongside the observer. Twin experiments
/// use it to compare against the truth without the loop ever seeing it.
pub trait WindowMonitor {
    fn on_window_start(&mut self, _info: &WindowInfo) -> Result<()> {
        Ok(())
    }

    fn on_node(&mut self, _info: &WindowInfo, _k: usize, _w: &SpectralField) -> Result<()> {
        Ok(())
    }

    fn on_window_end(&mut self, _record: &IterationRecord) -> Result<()> {
        Ok(())
    }
}

pub struct NoMonitor;

impl WindowMonitor for NoMonitor {}

/// What the recovery side is given.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryProblem<'a> {
    pub stream: &'a ObservationStream,
    pub forcing: &'a SpectralField,
    pub nu: f64,
    pub envelope: &'a BoundsEnvelope,
    pub w0: &'a SpectralField,
}

#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    pub records: Vec<IterationRecord>,
    pub final_state: SpectralField,
    pub final_beta_sq: f64,
}

impl RecoveryOutcome {
    pub fn final_status(&self) -> Option<Status> {
        self.records.last().map(|r| r.status)
    }

    pub fn updated(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.status == Status::Updated)
    }
}

fn steps(span: f64, dt: f64) -> usize {
    (span / dt).round().max(0.0) as usize
}

/// Runs the recursion until the data run out, the window degenerates, the
/// iteration budget is spent or (strict mode) no admissible parameters exist.
pub fn recovery_loop(
    problem: &RecoveryProblem<'_>,
    schedule: &RecoverySchedule,
    monitor: &mut dyn WindowMonitor,
) -> Result<RecoveryOutcome> {
    schedule.validate()?;
    problem.envelope.validate()?;
    let stream = problem.stream;
    if stream.len() < 2 {
        return Err(Error::param(
            "observation stream",
            "needs at least two nodes",
        ));
    }
    if schedule.n_obs > stream.n_obs() {
        return Err(Error::param(
            "recovery.N_obs",
            format!("exceeds the {} modes carried by the stream", stream.n_obs()),
        ));
    }
    let grid = *stream.grid();
    grid.ensure_same(problem.w0.grid())?;
    let dt = stream.dt();
    let last_node = stream.len() - 1;
    let final_node = last_node.min(steps(schedule.t_final, dt));
    let eta_max = NUDGING_GUARD / dt;

    let mut records = Vec::new();
    let mut w = problem.w0.clone();
    let mut beta_sq = schedule.beta1_sq;
    let mut k_n = 0usize;
    let mut n = 1usize;

    // (t_hat, t_next) for a given eta, snapped to stream nodes
    let window_nodes = |k_n: usize, eta: f64| {
        let k_hat = k_n + steps(schedule.settle_for(eta), dt);
        let k_next = k_hat + steps(schedule.window, dt).max(1);
        (k_hat, k_next)
    };

    loop {
        let t_n = stream.time(k_n);
        let w_norm_sq = sobolev_norm_sq(&w, 0.0);
        let w_grad_sq = sobolev_norm_sq(&w, 1.0);
        let base = |status: Status, k_hat: usize, k_next: usize| IterationRecord {
            n,
            t_n,
            t_hat_n: stream.time(k_hat),
            t_np1: stream.time(k_next),
            eta_n: schedule.eta,
            n_cut: schedule.n_obs,
            n_tilde: schedule.n_tilde,
            beta_n_sq: beta_sq,
            beta_np1_sq: beta_sq,
            abs_beta_sq_err: None,
            delta_n: None,
            zeta_n: None,
            g_norm_combo: None,
            conditions: None,
            update_terms: None,
            w_norm_sq,
            w_grad_sq,
            status,
        };
        let (k_hat0, k_next0) = window_nodes(k_n, schedule.eta);
        if n > schedule.max_iters {
            records.push(base(Status::HaltedMaxIters, k_hat0, k_next0));
            break;
        }
        if k_next0 > final_node {
            records.push(base(Status::HaltedFinalTime, k_hat0, k_next0));
            break;
        }

        // the configured window decides degeneracy
        let (t_hat0, t_next0) = (stream.time(k_hat0), stream.time(k_next0));
        let delta0 = delta_n(stream, schedule.n_obs, problem.nu, t_hat0, t_next0)?;
        let thr = degeneracy_threshold(stream, schedule.n_obs, problem.nu, t_hat0, t_next0)?;
        if delta0 <= thr {
            let mut rec = base(Status::HaltedDegenerate, k_hat0, k_next0);
            rec.delta_n = Some(delta0);
            rec.zeta_n = Some(zeta_n(
                stream,
                schedule.n_tilde,
                problem.nu,
                t_hat0,
                t_next0,
            )?);
            records.push(rec);
            break;
        }

        let candidate = |eta: f64, _n_cut: u32| {
            let (k_hat, k_next) = window_nodes(k_n, eta);
            if k_next > final_node {
                return None;
            }
            let (a, b) = (stream.time(k_hat), stream.time(k_next));
            let zeta = zeta_n(stream, schedule.n_tilde, problem.nu, a, b).ok()?;
            Some((a, b, zeta))
        };
        let selection = select_parameters(
            n,
            schedule,
            problem.envelope,
            beta_sq,
            t_n,
            (w_norm_sq, w_grad_sq),
            eta_max,
            &candidate,
        );
        let (eta, n_cut, zeta, report) = match selection {
            Selection::Chosen {
                eta,
                n_cut,
                zeta,
                report,
                ..
            } => (eta, n_cut, zeta, report),
            Selection::Infeasible => {
                let mut rec = base(Status::HaltedInfeasible, k_hat0, k_next0);
                rec.delta_n = Some(delta0);
                if schedule.mode == RecoveryMode::Strict {
                    rec.zeta_n = candidate(schedule.eta, schedule.n_obs).map(|c| c.2);
                }
                records.push(rec);
                break;
            }
        };
        let (k_hat, k_next) = window_nodes(k_n, eta);
        let (t_hat, t_next) = (stream.time(k_hat), stream.time(k_next));
        let delta = if n_cut == schedule.n_obs && k_hat == k_hat0 {
            delta0
        } else {
            delta_n(stream, n_cut, problem.nu, t_hat, t_next)?
        };
        if delta <= degeneracy_threshold(stream, n_cut, problem.nu, t_hat, t_next)? {
            let mut rec = base(Status::HaltedDegenerate, k_hat, k_next);
            rec.delta_n = Some(delta);
            rec.zeta_n = Some(zeta);
            records.push(rec);
            break;
        }

        let info = WindowInfo {
            n,
            t_n,
            t_hat,
            t_next,
            k_n,
            k_hat,
            k_next,
            eta,
            n_cut,
            beta_sq,
        };
        monitor.on_window_start(&info)?;
        let (terms, w_end) =
            run_window(problem, &info, w, schedule, monitor).map_err(|e| e.at_iteration(n))?;
        let integral: f64 = terms.iter().sum();
        let beta_next = beta_sq + integral / delta;
        if !(beta_next.is_finite() && beta_next > 0.0) {
            return Err(Error::NonPositiveBeta {
                n,
                value: beta_next,
            });
        }
        let record = IterationRecord {
            n,
            t_n,
            t_hat_n: t_hat,
            t_np1: t_next,
            eta_n: eta,
            n_cut,
            n_tilde: schedule.n_tilde,
            beta_n_sq: beta_sq,
            beta_np1_sq: beta_next,
            abs_beta_sq_err: None,
            delta_n: Some(delta),
            zeta_n: Some(zeta),
            g_norm_combo: None,
            conditions: Some(report),
            update_terms: Some(terms),
            w_norm_sq,
            w_grad_sq,
            status: Status::Updated,
        };
        monitor.on_window_end(&record)?;
        records.push(record);
        w = w_end;
        beta_sq = beta_next;
        k_n = k_next;
        n += 1;
    }
    Ok(RecoveryOutcome {
        records,
        final_state: w,
        final_beta_sq: beta_sq,
    })
}

/// Integrates the observer over `[t_n, t_{n+1}]` and accumulates the update
/// integral over `[t_hat, t_{n+1}]`, term by term.
fn run_window(
    problem: &RecoveryProblem<'_>,
    info: &WindowInfo,
    w: SpectralField,
    schedule: &RecoverySchedule,
    monitor: &mut dyn WindowMonitor,
) -> Result<([f64; 7], SpectralField)> {
    let stream = problem.stream;
    let grid = *stream.grid();
    let model = NudgedModel::new(
        &grid,
        problem.nu,
        info.beta_sq,
        info.eta,
        info.n_cut,
        problem.forcing,
    )?
    .with_rule(schedule.rule);
    let mut stepper = NudgedStepper::new(
        model,
        w,
        &stream.obs_u(info.k_n, info.n_cut),
        stream.dt(),
        info.k_n,
    )?;
    let prm = UpdateParams {
        beta_sq: info.beta_sq,
        eta: info.eta,
        cutoff: info.n_cut,
        rule: schedule.rule,
        nu: problem.nu,
    };
    let mut quads: [Trapezoid; 7] = Default::default();
    let mut prev: Option<(SpectralField, SpectralField)> = None;
    for k in info.k_n..=info.k_next {
        let obs_u = stream.obs_u(k, info.n_cut);
        let obs_ut = stream.obs_ut(k, info.n_cut);
        if let Some((pu, put)) = &prev {
            let stage = stepper.stage_observation(pu, put);
            stepper.advance_staged(&stage, &obs_u)?;
        }
        monitor.on_node(info, k, stepper.state())?;
        if k >= info.k_hat {
            let w_t = stepper.derivative();
            let node = NodeData {
                w: stepper.state(),
                w_t: &w_t,
                obs_u: &obs_u,
                obs_ut: &obs_ut,
            };
            let terms = update_integrand(&node, &prm)?.as_array();
            let t = stream.time(k);
            for (q, v) in quads.iter_mut().zip(terms) {
                q.push(t, v)?;
            }
        }
        prev = Some((obs_u, obs_ut));
    }
    Ok((quads.map(|q| q.value()), stepper.into_state()))
}
