use std::fs;

use bardina_core::harness::{
    parse_config_str, read_iterations_csv, read_sync_csv, run_recovery_from_dump,
    run_twin_experiment, truth_pass, truth_setup, write_run, ExperimentConfig,
};
use bardina_core::model::BoundsEnvelope;
use bardina_core::recovery::{
    check_conditions, select_parameters, ConditionInputs, RecoveryMode, RecoverySchedule,
    Selection, Status,
};

const SMALL: &str = "
grid.n_grid = 16
physics.nu = 0.1
physics.alpha_true = 0.25
forcing.kind = manufactured_steady
forcing.amplitude = 0.25
init.truth = steady_perturbed
init.perturbation = 0.1
recovery.alpha0 = 0.15
recovery.alpha1 = 0.5
recovery.beta1_sq = 0.04
recovery.eta = 20
recovery.N_obs = 4
recovery.N_tilde = 4
time.dt = 0.01
time.window = 0.5
time.T_final = 3
seed = 11
";

fn small(overrides: &[(&str, &str)]) -> ExperimentConfig {
    let ov: Vec<(String, String)> = overrides
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    parse_config_str(SMALL, &ov).unwrap()
}

#[test]
fn small_twin_recovers_alpha() {
    let cfg = small(&[]);
    let report = run_twin_experiment(&cfg).unwrap();
    let errs = report.beta_errors();
    assert!(errs.len() >= 4, "{errs:?}");
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(*errs.last().unwrap() < 1e-4 * errs[0], "{errs:?}");
    for r in report.updated() {
        assert!(r.t_n <= r.t_hat_n && r.t_hat_n < r.t_np1);
        assert!(r.delta_n.unwrap() >= 0.0);
        let delta_tilde = r.delta_n.unwrap() / (r.t_np1 - r.t_hat_n);
        assert!(r.zeta_n.unwrap() <= delta_tilde * (1.0 + 1e-12));
        assert!(r.beta_np1_sq > 0.0);
    }
    assert_eq!(report.final_status, Status::HaltedFinalTime);
}

#[test]
fn repeated_runs_write_identical_files() {
    let cfg = small(&[("time.T_final", "1.5")]);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_run(d.path(), &run_twin_experiment(&cfg).unwrap()).unwrap();
    }
    for name in ["iterations.csv", "sync.csv"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn written_csv_round_trips() {
    let cfg = small(&[("time.T_final", "1.5")]);
    let report = run_twin_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let art = write_run(dir.path(), &report).unwrap();
    let rows = read_iterations_csv(&dir.path().join("iterations.csv")).unwrap();
    assert_eq!(rows.len(), report.iterations.len());
    for (row, rec) in rows.iter().zip(&report.iterations) {
        assert_eq!(row.n, rec.n);
        assert_eq!(row.beta_n_sq.to_bits(), rec.beta_n_sq.to_bits());
        assert_eq!(row.beta_np1_sq.to_bits(), rec.beta_np1_sq.to_bits());
        assert_eq!(row.abs_beta_sq_err, rec.abs_beta_sq_err);
        assert_eq!(row.status, rec.status);
    }
    let sync = read_sync_csv(&dir.path().join("sync.csv")).unwrap();
    assert_eq!(sync.len(), report.sync.len());
    for ((t, v), p) in sync.iter().zip(&report.sync) {
        assert_eq!(
            (t.to_bits(), v.to_bits()),
            (p.t.to_bits(), p.lyapunov().to_bits())
        );
    }
    assert!(!art.plots.is_empty());
}

#[test]
fn unforced_shear_halts_as_degenerate() {
    let cfg = small(&[
        ("forcing.kind", "none"),
        ("init.truth", "shear"),
        ("init.amplitude", "0.5"),
    ]);
    let report = run_twin_experiment(&cfg).unwrap();
    assert_eq!(report.iterations.len(), 1);
    let r = &report.iterations[0];
    assert_eq!(r.status, Status::HaltedDegenerate);
    assert_eq!(r.beta_np1_sq, cfg.schedule.beta1_sq);
    assert_eq!(report.final_status, Status::HaltedDegenerate);
}

#[test]
fn strict_mode_refuses_an_unprovable_regime() {
    let cfg = small(&[("recovery.mode", "strict"), ("time.T_final", "1.5")]);
    let report = run_twin_experiment(&cfg).unwrap();
    assert_eq!(report.final_status, Status::HaltedInfeasible);
    let last = report.iterations.last().unwrap();
    assert_eq!(last.beta_np1_sq, cfg.schedule.beta1_sq);
}

#[test]
fn dumped_truth_gives_the_same_updates_as_the_twin() {
    let cfg = small(&[("time.T_final", "1.5")]);
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("truth");
    let setup = truth_setup(&cfg).unwrap();
    truth_pass(&cfg, &setup, Some(&dump), false).unwrap();

    let twin = run_twin_experiment(&cfg).unwrap();
    let replay = run_recovery_from_dump(&cfg, &dump).unwrap();
    let a: Vec<u64> = twin
        .iterations
        .iter()
        .map(|r| r.beta_np1_sq.to_bits())
        .collect();
    let b: Vec<u64> = replay
        .iterations
        .iter()
        .map(|r| r.beta_np1_sq.to_bits())
        .collect();
    assert_eq!(a, b);
    assert!(replay
        .iterations
        .iter()
        .all(|r| r.abs_beta_sq_err.is_none()));
}

#[test]
fn measured_derivatives_still_converge() {
    let cfg = small(&[("recovery.derivative", "measured")]);
    let errs = run_twin_experiment(&cfg).unwrap().beta_errors();
    assert!(*errs.last().unwrap() < 1e-2 * errs[0], "{errs:?}");
}

fn tiny_envelope(c_gn: Option<f64>) -> BoundsEnvelope {
    BoundsEnvelope {
        m_a: 1e-4,
        m_b: 1e-4,
        m_c: 1e-4,
        alpha0: 0.5,
        alpha1: 0.6,
        c_gn,
        nu: 1.0,
        lambda1: 1.0,
        f_sup: 0.0,
    }
}

fn strict_schedule() -> RecoverySchedule {
    let mut s = RecoverySchedule::new(0.5, 0.6, 0.3);
    s.mode = RecoveryMode::Strict;
    s.epsilon = 0.2;
    s.eta = 20.0;
    s.n_tilde = 2;
    s.n_obs = 16;
    s
}

// Settle 5/eta and a unit window, so t_{n+1} - t_n = 5/eta + 1.
fn windows(eta: f64, _n: u32) -> Option<(f64, f64, f64)> {
    Some((5.0 / eta, 5.0 / eta + 1.0, 1.0))
}

#[test]
fn strict_selection_picks_the_first_admissible_pair() {
    // With a vanishing envelope only eta/N^2 <= 1/2 and the contraction
    // kmax exp(-eta (t_{n+1} - t_n) / 4) <= 1/8 can bind. kmax = (sqrt(0.2) + 0.6) / sqrt(0.3),
    // so eta >= 4 (ln(8 kmax) - 5/4) = 5.91, the first ladder value being 10,
    // and then N^2 >= 20 forces N = 8 from the ladder 2, 4, 8, 16.
    let s = strict_schedule();
    let env = tiny_envelope(Some(1.0));
    let kmax = (0.2f64.sqrt() + 0.6) / 0.3f64.sqrt();
    assert!(4.0 * ((8.0 * kmax).ln() - 1.25) < 10.0);
    assert!(4.0 * ((8.0 * kmax).ln() - 1.25) > 5.0);
    match select_parameters(1, &s, &env, 0.3, 0.0, (0.0, 0.0), 1e6, &windows) {
        Selection::Chosen {
            eta, n_cut, report, ..
        } => {
            assert_eq!((eta, n_cut), (10.0, 8));
            assert!(report.all_satisfied());
        }
        Selection::Infeasible => panic!("expected a feasible pair"),
    }

    let inputs = |eta: f64, n_cut: u32| {
        let (t_hat, t_next, zeta) = windows(eta, n_cut).unwrap();
        ConditionInputs {
            n: 1,
            eta,
            n_cut,
            n_tilde: 2,
            zeta,
            beta_sq: 0.3,
            t_n: 0.0,
            t_hat,
            t_next,
            w_norm_sq: 0.0,
            w_grad_sq: 0.0,
        }
    };
    assert!(!check_conditions(&inputs(5.0, 16), &env, &s).c_4_8.satisfied);
    assert!(!check_conditions(&inputs(10.0, 4), &env, &s).c_4_4.satisfied);
}

#[test]
fn strict_selection_without_a_constant_is_infeasible() {
    let s = strict_schedule();
    let sel = select_parameters(
        1,
        &s,
        &tiny_envelope(None),
        0.3,
        0.0,
        (0.0, 0.0),
        1e6,
        &windows,
    );
    assert_eq!(sel, Selection::Infeasible);
}
