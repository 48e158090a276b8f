use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bardina_core::harness::{
    self, first_window_conditions, fit_sync_decay, parse_config, read_iterations_csv, render_plots,
    run_assimilation, run_recovery_from_dump, run_twin_experiment, truth_pass, truth_setup,
    write_json, write_run, write_sync_csv, AssimilationSpec, ExperimentConfig, RunReport,
};
use bardina_core::recovery::{ConditionReport, Status};
use bardina_core::Result;

#[derive(Parser)]
#[command(
    name = "bardina",
    version,
    about = "Simplified Bardina model: truth runs, nudging and recovery of the filter length alpha"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the truth and dump snapshots to <output.dir>/truth.
    Truth(ConfigArgs),
    /// Fixed-beta nudged run (beta^2 = recovery.beta1_sq) against the truth.
    Assimilate(ConfigArgs),
    /// Run the recovery algorithm.
    Recover {
        #[command(flatten)]
        config: ConfigArgs,
        /// Recover against a dumped truth instead of a twin experiment.
        #[arg(long)]
        truth_dir: Option<PathBuf>,
    },
    /// Evaluate the eight first-iteration conditions for a config.
    CheckConditions(ConfigArgs),
    /// Redraw plots from the CSVs in a run directory.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    /// `key=value` pairs that override the file.
    #[arg(value_parser = parse_kv)]
    overrides: Vec<(String, String)>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        parse_config(&self.config, &self.overrides)
    }
}

fn parse_kv(s: &str) -> std::result::Result<(String, String), String> {
    harness::parse_override(s).map_err(|e| e.to_string())
}

fn exit_code_for(status: Status) -> u8 {
    match status {
        Status::Updated | Status::HaltedFinalTime | Status::HaltedMaxIters => 0,
        Status::HaltedDegenerate => 2,
        Status::HaltedInfeasible => 3,
    }
}

fn init_threads() {
    let Ok(v) = std::env::var("BARDINA_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                eprintln!("warning: BARDINA_THREADS ignored: {e}");
            }
        }
        _ => eprintln!("warning: BARDINA_THREADS={v:?} is not a positive integer; ignored"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Truth(args) => cmd_truth(&args.load()?),
        Command::Assimilate(args) => cmd_assimilate(&args.load()?),
        Command::Recover { config, truth_dir } => {
            cmd_recover(&config.load()?, truth_dir.as_deref())
        }
        Command::CheckConditions(args) => cmd_check_conditions(&args.load()?),
        Command::Report { dir } => cmd_report(&dir),
    }
}

fn cmd_truth(cfg: &ExperimentConfig) -> Result<u8> {
    let out = &cfg.output_dir;
    cfg.write_resolved(out)?;
    let dump = out.join("truth");
    let setup = truth_setup(cfg)?;
    let pass = truth_pass(cfg, &setup, Some(&dump), false)?;
    println!(
        "truth: {} steps of dt = {} written to {}",
        pass.steps,
        cfg.dt,
        dump.display()
    );
    print_audit(&pass.audit);
    Ok(0)
}

fn cmd_assimilate(cfg: &ExperimentConfig) -> Result<u8> {
    let out = &cfg.output_dir;
    cfg.write_resolved(out)?;
    let spec = AssimilationSpec {
        beta_sq: cfg.schedule.beta1_sq,
        eta: cfg.schedule.eta,
        n_obs: cfg.schedule.n_obs,
        horizon: cfg.schedule.t_final,
    };
    let report = run_assimilation(cfg, &spec)?;
    write_sync_csv(&out.join("sync.csv"), &report.sync)?;
    write_json(&out.join("report.json"), &report)?;
    render_plots(out)?;
    let ts: Vec<f64> = report.sync.iter().map(|p| p.t).collect();
    let ys: Vec<f64> = report.sync.iter().map(|p| p.lyapunov()).collect();
    if let (Some(first), Some(last)) = (ys.first(), ys.last()) {
        println!("||g||^2 + beta^2 ||grad g||^2: {first:.6e} -> {last:.6e}");
    }
    if let Ok(fit) = fit_sync_decay(&ts, &ys, 0.0, 1e-10) {
        println!(
            "decay rate {:.4} on [{}, {}], monotone: {}",
            fit.rate, fit.fit_start, fit.fit_end, fit.monotone
        );
    }
    print_audit(&report.envelope_violations);
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_recover(cfg: &ExperimentConfig, truth_dir: Option<&Path>) -> Result<u8> {
    let out = &cfg.output_dir;
    cfg.write_resolved(out)?;
    let report = match truth_dir {
        Some(dir) => run_recovery_from_dump(cfg, dir)?,
        None => run_twin_experiment(cfg)?,
    };
    write_run(out, &report)?;
    print_recovery(&report);
    Ok(exit_code_for(report.final_status))
}

fn print_recovery(report: &RunReport) {
    for r in &report.iterations {
        let err = r
            .abs_beta_sq_err
            .map(|e| format!(" |beta^2 - alpha^2| = {e:.3e}"))
            .unwrap_or_default();
        println!(
            "n = {:>3}  t_n = {:<8.4}  beta^2 = {:.10e} -> {:.10e}{err}  [{}]",
            r.n, r.t_n, r.beta_n_sq, r.beta_np1_sq, r.status
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    if let Some(ratio) = report.fitted_contraction_ratio {
        println!("fitted contraction ratio {ratio:.4}");
    }
    if report.envelope_violations != Default::default() {
        print_audit(&report.envelope_violations);
    }
    let Some(last) = report.iterations.last() else {
        return;
    };
    match last.status {
        Status::HaltedDegenerate => println!(
            "stopped: delta_{} = {:.3e} vanishes, so u_t - nu Laplacian u = 0 on the observed modes \
             over the window and the algorithm must be stopped; beta^2 stays {:.10e}",
            last.n,
            last.delta_n.unwrap_or(0.0),
            last.beta_n_sq
        ),
        Status::HaltedInfeasible => println!(
            "stopped: no admissible (eta, N) satisfies all conditions at iteration {}",
            last.n
        ),
        _ => {}
    }
}

fn print_audit(audit: &harness::EnvelopeAudit) {
    for (name, c) in audit.entries() {
        if c.checked + c.skipped > 0 {
            println!(
                "envelope {name:<16} checked {:>6}  violations {:>4}  skipped {:>6}  worst ratio {:.3e}",
                c.checked, c.violations, c.skipped, c.worst_ratio
            );
        }
    }
}

fn cmd_check_conditions(cfg: &ExperimentConfig) -> Result<u8> {
    let (inp, report) = first_window_conditions(cfg)?;
    println!(
        "n = 1, eta = {}, N = {}, N_tilde = {}, beta^2 = {}, window [{}, {}], zeta = {:.6e}",
        inp.eta, inp.n_cut, inp.n_tilde, inp.beta_sq, inp.t_hat, inp.t_next, inp.zeta
    );
    print_conditions(&report);
    Ok(if report.all_satisfied() { 0 } else { 3 })
}

fn print_conditions(report: &ConditionReport) {
    println!(
        "{:<6} {:>24} {:>24} {:>24}  ok",
        "cond", "lhs", "rhs", "margin"
    );
    for (label, o) in ConditionReport::LABELS.iter().zip(report.outcomes()) {
        println!(
            "({label:<4}) {:>24.16e} {:>24.16e} {:>24.16e}  {}",
            o.lhs,
            o.rhs,
            o.margin,
            if o.satisfied { "yes" } else { "no" }
        );
    }
}

fn cmd_report(dir: &Path) -> Result<u8> {
    for p in render_plots(dir)? {
        println!("wrote {}", p.display());
    }
    let it = dir.join("iterations.csv");
    if it.exists() {
        let rows = read_iterations_csv(&it)?;
        if let Some(last) = rows.last() {
            println!(
                "{} iterations, final beta^2 = {:.10e}, status {}",
                rows.len(),
                last.beta_np1_sq,
                last.status
            );
        }
    }
    Ok(0)
}
