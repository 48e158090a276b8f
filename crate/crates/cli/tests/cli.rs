use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "
grid.n_grid = 16
physics.nu = 0.1
physics.alpha_true = 0.25
forcing.kind = manufactured_steady
forcing.amplitude = 0.25
init.truth = steady_perturbed
recovery.alpha0 = 0.15
recovery.alpha1 = 0.5
recovery.beta1_sq = 0.04
recovery.N_obs = 4
recovery.N_tilde = 4
time.dt = 0.01
time.T_final = 1.5
seed = 3
";

fn bardina(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bardina"))
        .args(args)
        .env("BARDINA_THREADS", "1")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_cfg(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

fn out_override(dir: &Path, name: &str) -> String {
    format!("output.dir={}", dir.join(name).display())
}

#[test]
fn bad_keys_exit_1_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path());
    let out = bardina(&["recover", &cfg, "physics.viscosity=1"]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("physics.viscosity"),
        "{}",
        stderr(&out)
    );

    let out = bardina(&["recover", &cfg, "time.dt=fast"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("time.dt"), "{}", stderr(&out));

    let out = bardina(&["recover", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn recover_writes_artifacts_and_resolved_config_reproduces_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path());
    let first = bardina(&["recover", &cfg, &out_override(tmp.path(), "a")]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let a = tmp.path().join("a");
    for f in [
        "iterations.csv",
        "sync.csv",
        "report.json",
        "resolved.cfg",
        "plots/beta_error.svg",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }

    let resolved = a.join("resolved.cfg");
    let second = bardina(&[
        "recover",
        resolved.to_str().unwrap(),
        &out_override(tmp.path(), "b"),
    ]);
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    let b = tmp.path().join("b");
    assert_eq!(
        fs::read(a.join("iterations.csv")).unwrap(),
        fs::read(b.join("iterations.csv")).unwrap()
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["final_status"], "HaltedFinalTime");
}

#[test]
fn report_redraws_deleted_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path());
    let out = bardina(&["recover", &cfg, &out_override(tmp.path(), "run")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = tmp.path().join("run");
    fs::remove_dir_all(run.join("plots")).unwrap();
    let out = bardina(&["report", run.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["beta_error.svg", "sync.svg"] {
        let svg = fs::read_to_string(run.join("plots").join(f)).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"), "{f}");
    }
}

#[test]
fn recovering_from_a_truth_dump_matches_the_twin() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path());
    let dump_dir = out_override(tmp.path(), "dump");
    let out = bardina(&["truth", &cfg, &dump_dir]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let truth = tmp.path().join("dump").join("truth");
    assert!(truth.join("index.txt").is_file());

    let out = bardina(&[
        "recover",
        &cfg,
        &out_override(tmp.path(), "replay"),
        "--truth-dir",
        truth.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = bardina(&["recover", &cfg, &out_override(tmp.path(), "twin")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let column = |name: &str| -> Vec<String> {
        let text = fs::read_to_string(tmp.path().join(name).join("iterations.csv")).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let col = header.iter().position(|h| *h == "beta_np1_sq").unwrap();
        lines
            .map(|l| l.split(',').nth(col).unwrap().to_string())
            .collect()
    };
    assert_eq!(column("replay"), column("twin"));
}

#[test]
fn dump_with_mismatched_step_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path());
    let out = bardina(&[
        "truth",
        &cfg,
        &out_override(tmp.path(), "dump"),
        "time.T_final=0.5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let truth = tmp.path().join("dump").join("truth");
    let out = bardina(&[
        "recover",
        &cfg,
        "time.dt=0.005",
        &out_override(tmp.path(), "r"),
        "--truth-dir",
        truth.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn strict_mode_and_condition_checks_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path());
    let out = bardina(&[
        "recover",
        &cfg,
        "recovery.mode=strict",
        &out_override(tmp.path(), "s"),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stdout(&out).contains("no admissible"));

    let out = bardina(&["check-conditions", &cfg, &out_override(tmp.path(), "c")]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let text = stdout(&out);
    for label in ["4.3", "4.4", "4.5", "4.6", "4.7", "4.8", "4.9", "4.10"] {
        assert!(
            text.contains(&format!("({label}")),
            "{label} missing:\n{text}"
        );
    }
}

#[test]
fn unforced_shear_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path());
    let out = bardina(&[
        "recover",
        &cfg,
        "forcing.kind=none",
        "init.truth=shear",
        "init.amplitude=0.5",
        &out_override(tmp.path(), "d"),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stdout(&out).contains("must be stopped"));
}

#[test]
fn assimilate_writes_a_decaying_sync_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path());
    let out = bardina(&[
        "assimilate",
        &cfg,
        "recovery.beta1_sq=0.0625",
        &out_override(tmp.path(), "as"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(tmp.path().join("as").join("sync.csv")).unwrap();
    let vals: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(vals.len() > 100);
    assert!(
        vals.last().unwrap() < &(1e-4 * vals[0]),
        "{} -> {}",
        vals[0],
        vals.last().unwrap()
    );
}
