//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{step_count, ForcingKind, ForcingSpec, PhysicalParams};
use crate::nudging::{check_cutoff, DerivativeSource, NUDGING_GUARD};
use crate::recovery::RecoverySchedule;
use crate::spectral::{GridSpec, ModeRule, Wavevector, DEFAULT_DEALIAS_FRACTION};

pub const RESOLVED_FILE: &str = "resolved.cfg";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthInit {
    /// Manufactured steady state plus a seeded broad-band perturbation.
    SteadyPerturbed,
    /// `amplitude * sin(2 pi x / L) e_y`, an exact decaying solution.
    Shear,
    /// Seeded random field with `||u|| = amplitude`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverInit {
    Zero,
    /// Start from the true initial state (twin consistency checks only).
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub truth: TruthInit,
    /// Perturbation norm relative to the steady state.
    pub perturbation: f64,
    pub amplitude: f64,
    pub observer: ObserverInit,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            truth: TruthInit::SteadyPerturbed,
            perturbation: 0.1,
            amplitude: 0.25,
            observer: ObserverInit::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub physics: PhysicalParams,
    pub init: InitSpec,
    pub schedule: RecoverySchedule,
    pub derivative: DerivativeSource,
    pub dt: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Every `output_stride`-th node goes into `sync.csv` and truth dumps.
    pub output_stride: usize,
}

impl ExperimentConfig {
    /// The reference experiment with the given hidden `alpha` and prior.
    pub fn reference(alpha_true: f64, alpha0: f64, alpha1: f64, beta1_sq: f64) -> Result<Self> {
        let cfg = Self {
            grid: GridSpec::periodic_2pi(32)?,
            physics: PhysicalParams::new(0.1, alpha_true, ForcingSpec::default())?,
            init: InitSpec::default(),
            schedule: RecoverySchedule::new(alpha0, alpha1, beta1_sq),
            derivative: DerivativeSource::Exact,
            dt: 0.01,
            seed: 0,
            output_dir: PathBuf::from("out"),
            output_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.schedule.validate()?;
        check_cutoff(&self.grid, self.schedule.n_obs)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "`time.dt` must be positive, got {}",
                self.dt
            )));
        }
        step_count(self.schedule.t_final, self.dt)
            .map_err(|_| cfg_err("time.T_final", "must be a positive multiple of time.dt"))?;
        let product = self.schedule.eta * self.dt;
        if product > NUDGING_GUARD {
            return Err(cfg_err(
                "recovery.eta",
                &format!(
                    "eta * dt = {product} exceeds the explicit-feedback limit {NUDGING_GUARD}"
                ),
            ));
        }
        if self.output_stride == 0 {
            return Err(cfg_err("output.stride", "must be at least 1"));
        }
        for (key, v) in [
            ("init.perturbation", self.init.perturbation),
            ("init.amplitude", self.init.amplitude),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(cfg_err(key, "must be finite and non-negative"));
            }
        }
        if self.init.truth == TruthInit::SteadyPerturbed
            && self.physics.forcing.kind != ForcingKind::ManufacturedSteady
        {
            return Err(cfg_err(
                "init.truth",
                "steady_perturbed needs forcing.kind = manufactured_steady",
            ));
        }
        Ok(())
    }

    /// Serializes every key, so the output parses back to an identical config.
    pub fn to_cfg_string(&self) -> String {
        let mut s = String::new();
        let f = |v: f64| format!("{v:.16e}");
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let sch = &self.schedule;
        line("domain.L", f(self.grid.length()));
        line("grid.n_grid", self.grid.n_grid().to_string());
        line("grid.dealias_fraction", f(self.grid.dealias_fraction()));
        line("grid.mode_rule", rule_name(sch.rule).into());
        line("physics.nu", f(self.physics.nu));
        line("physics.alpha_true", f(self.physics.alpha));
        line("forcing.kind", self.physics.forcing.kind.as_str().into());
        line("forcing.amplitude", f(self.physics.forcing.amplitude));
        line("forcing.modes", format_modes(&self.physics.forcing.modes));
        line("init.truth", truth_name(self.init.truth).into());
        line("init.perturbation", f(self.init.perturbation));
        line("init.amplitude", f(self.init.amplitude));
        line("init.observer", observer_name(self.init.observer).into());
        line("recovery.alpha0", f(sch.alpha0));
        line("recovery.alpha1", f(sch.alpha1));
        line("recovery.beta1_sq", f(sch.beta1_sq));
        line("recovery.epsilon", f(sch.epsilon));
        line("recovery.mode", sch.mode.as_str().into());
        line("recovery.eta", f(sch.eta));
        line("recovery.N_obs", sch.n_obs.to_string());
        line("recovery.N_tilde", sch.n_tilde.to_string());
        line("recovery.c_gn", sch.c_gn.map_or_else(|| "none".into(), f));
        line(
            "recovery.derivative",
            derivative_name(self.derivative).into(),
        );
        line("time.dt", f(self.dt));
        line("time.settle", sch.settle.map_or_else(|| "auto".into(), f));
        line("time.window", f(sch.window));
        line("time.T_final", f(sch.t_final));
        line("time.max_iters", sch.max_iters.to_string());
        line("seed", self.seed.to_string());
        line("output.dir", self.output_dir.display().to_string());
        line("output.stride", self.output_stride.to_string());
        s
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(RESOLVED_FILE);
        fs::write(&path, self.to_cfg_string())?;
        Ok(path)
    }
}

const REQUIRED: [&str; 4] = [
    "physics.alpha_true",
    "recovery.alpha0",
    "recovery.alpha1",
    "recovery.beta1_sq",
];

const KNOWN: [&str; 31] = [
    "domain.L",
    "grid.n_grid",
    "grid.dealias_fraction",
    "grid.mode_rule",
    "physics.nu",
    "physics.alpha_true",
    "forcing.kind",
    "forcing.amplitude",
    "forcing.modes",
    "init.truth",
    "init.perturbation",
    "init.amplitude",
    "init.observer",
    "recovery.alpha0",
    "recovery.alpha1",
    "recovery.beta1_sq",
    "recovery.epsilon",
    "recovery.mode",
    "recovery.eta",
    "recovery.N_obs",
    "recovery.N_tilde",
    "recovery.c_gn",
    "recovery.derivative",
    "time.dt",
    "time.settle",
    "time.window",
    "time.T_final",
    "time.max_iters",
    "seed",
    "output.dir",
    "output.stride",
];

fn cfg_err(key: &str, reason: &str) -> Error {
    Error::Config(format!("`{key}` {reason}"))
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                i + 1
            ))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(cfg_err(k, &format!("is set twice (line {})", i + 1)));
        }
    }
    Ok(map)
}

/// Parses one `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

struct Values {
    map: BTreeMap<String, String>,
}

impl Values {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| cfg_err(key, &format!("has invalid value `{v}`: {e}"))),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self
            .raw(key)
            .ok_or_else(|| cfg_err(key, "is required but missing"))?;
        v.parse()
            .map_err(|e| cfg_err(key, &format!("has invalid value `{v}`: {e}")))
    }

    fn optional_f64(
        &self,
        key: &str,
        unset_word: &str,
        default: Option<f64>,
    ) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) if v == unset_word => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| cfg_err(key, &format!("has invalid value `{v}`: {e}"))),
        }
    }

    fn parsed<T>(
        &self,
        key: &str,
        default: T,
        f: fn(&str) -> std::result::Result<T, String>,
    ) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => f(v).map_err(|e| cfg_err(key, &e)),
        }
    }
}

/// Builds a config from file text plus overrides, which win.
pub fn parse_config_str(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut map = parse_pairs(text)?;
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
    if let Some(bad) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(Error::Config(format!("unknown key `{bad}`")));
    }
    for key in REQUIRED {
        if !map.contains_key(key) {
            return Err(cfg_err(key, "is required but missing"));
        }
    }
    let v = Values { map };

    let grid = GridSpec::new(
        v.get("domain.L", 2.0 * PI)?,
        v.get("grid.n_grid", 32usize)?,
        v.get("grid.dealias_fraction", DEFAULT_DEALIAS_FRACTION)?,
    )
    .map_err(|e| Error::Config(format!("`domain.L` / `grid.*`: {e}")))?;
    let default_forcing = ForcingSpec::default();
    let forcing = ForcingSpec {
        kind: v.get("forcing.kind", default_forcing.kind)?,
        amplitude: v.get("forcing.amplitude", default_forcing.amplitude)?,
        modes: v.parsed("forcing.modes", default_forcing.modes, parse_modes)?,
    };
    let physics = PhysicalParams {
        nu: v.get("physics.nu", 0.1)?,
        alpha: v.required("physics.alpha_true")?,
        forcing,
    };
    let init_default = InitSpec::default();
    let init = InitSpec {
        truth: v.parsed("init.truth", init_default.truth, parse_truth)?,
        perturbation: v.get("init.perturbation", init_default.perturbation)?,
        amplitude: v.get("init.amplitude", init_default.amplitude)?,
        observer: v.parsed("init.observer", init_default.observer, parse_observer)?,
    };
    let alpha0: f64 = v.required("recovery.alpha0")?;
    let alpha1: f64 = v.required("recovery.alpha1")?;
    let beta1_sq: f64 = v.required("recovery.beta1_sq")?;
    let mut schedule = RecoverySchedule::new(alpha0, alpha1, beta1_sq);
    schedule.epsilon = v.get("recovery.epsilon", schedule.epsilon)?;
    schedule.mode = v.get("recovery.mode", schedule.mode)?;
    schedule.eta = v.get("recovery.eta", schedule.eta)?;
    schedule.n_obs = v.get("recovery.N_obs", schedule.n_obs)?;
    schedule.n_tilde = v.get("recovery.N_tilde", schedule.n_obs)?;
    schedule.c_gn = v.optional_f64("recovery.c_gn", "none", schedule.c_gn)?;
    schedule.settle = v.optional_f64("time.settle", "auto", None)?;
    schedule.window = v.get("time.window", schedule.window)?;
    schedule.t_final = v.get("time.T_final", schedule.t_final)?;
    schedule.max_iters = v.get("time.max_iters", schedule.max_iters)?;
    schedule.rule = v.parsed("grid.mode_rule", ModeRule::Strict, parse_rule)?;

    let cfg = ExperimentConfig {
        grid,
        physics,
        init,
        schedule,
        derivative: v.parsed(
            "recovery.derivative",
            DerivativeSource::Exact,
            parse_derivative,
        )?,
        dt: v.get("time.dt", 0.01)?,
        seed: v.get("seed", 0u64)?,
        output_dir: PathBuf::from(v.get("output.dir", "out".to_string())?),
        output_stride: v.get("output.stride", 1usize)?,
    };
    cfg.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => cfg_err(name, &reason),
        Error::ObservationCutoff { n_obs, nyquist } => cfg_err(
            "recovery.N_obs",
            &format!("= {n_obs} exceeds the grid Nyquist limit {nyquist}"),
        ),
        other => other,
    })?;
    Ok(cfg)
}

pub fn parse_config(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, overrides)
}

fn parse_modes(s: &str) -> std::result::Result<Vec<Wavevector>, String> {
    s.split(';')
        .map(|m| {
            let parts: Vec<&str> = m.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(format!("mode `{m}` needs three integer components"));
            }
            let mut k = [0i64; 3];
            for (slot, p) in k.iter_mut().zip(parts) {
                *slot = p.parse().map_err(|_| format!("`{p}` is not an integer"))?;
            }
            Ok(k)
        })
        .collect()
}

fn format_modes(modes: &[Wavevector]) -> String {
    modes
        .iter()
        .map(|k| format!("{},{},{}", k[0], k[1], k[2]))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_truth(s: &str) -> std::result::Result<TruthInit, String> {
    match s {
        "steady_perturbed" => Ok(TruthInit::SteadyPerturbed),
        "shear" => Ok(TruthInit::Shear),
        "random" => Ok(TruthInit::Random),
        _ => Err(format!(
            "has unknown value `{s}` (steady_perturbed, shear or random)"
        )),
    }
}

fn truth_name(t: TruthInit) -> &'static str {
    match t {
        TruthInit::SteadyPerturbed => "steady_perturbed",
        TruthInit::Shear => "shear",
        TruthInit::Random => "random",
    }
}

fn parse_observer(s: &str) -> std::result::Result<ObserverInit, String> {
    match s {
        "zero" => Ok(ObserverInit::Zero),
        "truth" => Ok(ObserverInit::Truth),
        _ => Err(format!("has unknown value `{s}` (zero or truth)")),
    }
}

fn observer_name(o: ObserverInit) -> &'static str {
    match o {
        ObserverInit::Zero => "zero",
        ObserverInit::Truth => "truth",
    }
}

fn parse_rule(s: &str) -> std::result::Result<ModeRule, String> {
    match s {
        "strict" => Ok(ModeRule::Strict),
        "inclusive" => Ok(ModeRule::Inclusive),
        _ => Err(format!("has unknown value `{s}` (strict or inclusive)")),
    }
}

fn rule_name(r: ModeRule) -> &'static str {
    match r {
        ModeRule::Strict => "strict",
        ModeRule::Inclusive => "inclusive",
    }
}

fn parse_derivative(s: &str) -> std::result::Result<DerivativeSource, String> {
    match s {
        "exact" => Ok(DerivativeSource::Exact),
        "measured" => Ok(DerivativeSource::Measured),
        _ => Err(format!("has unknown value `{s}` (exact or measured)")),
    }
}

fn derivative_name(d: DerivativeSource) -> &'static str {
    match d {
        DerivativeSource::Exact => "exact",
        DerivativeSource::Measured => "measured",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
physics.alpha_true = 0.25
recovery.alpha0 = 0.15   # prior lower bound
recovery.alpha1 = 0.5
recovery.beta1_sq = 0.04
";

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config_str(MINIMAL, &[]).unwrap();
        assert_eq!(c.grid.n_grid(), 32);
        assert_eq!(c.physics.nu, 0.1);
        assert_eq!(c.schedule.eta, 20.0);
        assert_eq!(c.schedule.n_obs, 8);
        assert_eq!(c.schedule.n_tilde, 8);
        assert_eq!(c.schedule.c_gn, Some(1.0));
        assert_eq!(c.schedule.settle, None);
        assert_eq!(c.dt, 0.01);
        assert_eq!(c.physics.forcing.kind, ForcingKind::ManufacturedSteady);
    }

    #[test]
    fn overrides_beat_the_file() {
        let o = vec![parse_override("recovery.eta=10").unwrap()];
        let c = parse_config_str(MINIMAL, &o).unwrap();
        assert_eq!(c.schedule.eta, 10.0);
    }

    #[test]
    fn epsilon_at_alpha0_sq_rejected() {
        let o = vec![parse_override("recovery.epsilon = 0.0225").unwrap()];
        let msg = parse_config_str(MINIMAL, &o).unwrap_err().to_string();
        assert!(msg.contains("recovery.epsilon"), "{msg}");
        assert!(msg.contains("0 < epsilon < alpha0^2"), "{msg}");
    }

    #[test]
    fn unknown_missing_and_malformed_keys_are_named() {
        let e = parse_config_str(&format!("{MINIMAL}physics.viscosity = 1\n"), &[]).unwrap_err();
        assert!(e.to_string().contains("physics.viscosity"));
        let e = parse_config_str("physics.alpha_true = 0.25\n", &[]).unwrap_err();
        assert!(e.to_string().contains("recovery.alpha0"));
        let e = parse_config_str(&format!("{MINIMAL}grid.n_grid = lots\n"), &[]).unwrap_err();
        assert!(e.to_string().contains("grid.n_grid"));
        let e = parse_config_str(&format!("{MINIMAL}recovery.N_obs = 17\n"), &[]).unwrap_err();
        assert!(e.to_string().contains("recovery.N_obs"));
        assert!(parse_config_str("just words\n", &[]).is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let o: Vec<_> = [
            "time.settle=0.3",
            "recovery.c_gn=none",
            "forcing.modes=1,1,0;0,1,1",
            "seed=7",
        ]
        .iter()
        .map(|s| parse_override(s).unwrap())
        .collect();
        let c = parse_config_str(MINIMAL, &o).unwrap();
        let back = parse_config_str(&c.to_cfg_string(), &[]).unwrap();
        assert_eq!(c, back);
        assert_eq!(back.physics.forcing.modes, vec![[1, 1, 0], [0, 1, 1]]);
    }
}
