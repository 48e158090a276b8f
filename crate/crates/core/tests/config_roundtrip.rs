use proptest::prelude::*;

use bardina_core::harness::{parse_config_str, ExperimentConfig};

const BASE: &str = "
physics.nu = 0.1
physics.alpha_true = 0.25
recovery.alpha0 = 0.15
recovery.alpha1 = 0.5
recovery.beta1_sq = 0.04
time.dt = 0.01
";

fn resolve(pairs: &[(String, String)]) -> Result<ExperimentConfig, String> {
    parse_config_str(BASE, pairs).map_err(|e| e.to_string())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolved_config_parses_back_identically(
        nu in 0.01f64..2.0,
        alpha in 0.15f64..0.5,
        beta in 0.15f64..0.5,
        eta_steps in 1u32..50,
        n_obs in 1u32..11,
        length in 0.5f64..10.0,
        settle in prop::option::of(0.0f64..2.0),
        c_gn in prop::option::of(0.1f64..5.0),
        strict in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut pairs = vec![
            ("physics.nu".to_string(), format!("{nu}")),
            ("physics.alpha_true".to_string(), format!("{alpha}")),
            ("recovery.beta1_sq".to_string(), format!("{}", beta * beta)),
            ("recovery.eta".to_string(), format!("{}", f64::from(eta_steps))),
            ("recovery.N_obs".to_string(), n_obs.to_string()),
            ("recovery.N_tilde".to_string(), n_obs.to_string()),
            ("domain.L".to_string(), format!("{length}")),
            ("recovery.mode".to_string(), if strict { "strict" } else { "practical" }.to_string()),
            ("recovery.c_gn".to_string(), c_gn.map_or("none".to_string(), |c| c.to_string())),
            ("seed".to_string(), seed.to_string()),
        ];
        if let Some(s) = settle {
            pairs.push(("time.settle".to_string(), format!("{s}")));
        }
        let cfg = resolve(&pairs).unwrap();
        let again = parse_config_str(&cfg.to_cfg_string(), &[]).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(cfg.to_cfg_string(), again.to_cfg_string());
    }

    #[test]
    fn unknown_keys_are_named(key in "[a-z]{3,8}\\.[a-z_]{3,10}") {
        prop_assume!(resolve(&[(key.clone(), "1".to_string())]).is_err());
        let msg = resolve(&[(key.clone(), "1".to_string())]).unwrap_err();
        prop_assert!(msg.contains(&key), "{}", msg);
    }
}

#[test]
fn cutoff_above_nyquist_is_rejected() {
    let err = resolve(&[("recovery.N_obs".into(), "40".into())]).unwrap_err();
    assert!(err.contains("N_obs"), "{err}");
}

#[test]
fn nudging_guard_is_enforced() {
    let err = resolve(&[("recovery.eta".into(), "60".into())]).unwrap_err();
    assert!(err.contains("recovery.eta"), "{err}");
}
