use cdfsched::rate::{closed_form_rate, rate_report, ClosedFormOptions, RateMethod};
use cdfsched::scaling::{log_spaced_grid, scaling_ratio_sweep};
use cdfsched::scheduler::simulate_with_workers;
use cdfsched::validation::{validate, ValidationOptions, MIN_TRIALS};
use cdfsched::{Error, Scenario, SinrDistribution};

const CONFIG: &str = r#"{
  "num_antennas": 2,
  "users": [
    { "rho_serving": 1.0, "rho_interferers": [0.5, 0.25] },
    { "raw": { "gain_serving_db": -3.0, "gains_interferers_db": [-10.0],
               "power_serving_db": 10.0, "powers_interferers_db": [10.0],
               "noise_power_db": 0.0 } },
    { "rho_serving": 4.0 }
  ]
}"#;

#[test]
fn config_to_report() {
    let s = Scenario::from_json_str(CONFIG).unwrap();
    assert_eq!(s.num_users(), 3);
    // 10^(-0.3) * 10 / 2
    assert!((s.users[1].rho_serving - 2.505_936_168_136_361).abs() < 1e-12);
    assert!((s.users[1].rho_interferers[0] - 0.5).abs() < 1e-15);

    let again = Scenario::from_json_str(&s.to_json_string()).unwrap();
    assert_eq!(again, s);

    for k in 0..3 {
        let r = rate_report(&s, k, RateMethod::Both, ClosedFormOptions::default()).unwrap();
        assert!(r.discrepancy.unwrap() < 1e-10);
    }

    let a = simulate_with_workers(&s, 5000, 1, 1).unwrap();
    let b = simulate_with_workers(&s, 5000, 1, 3).unwrap();
    assert_eq!(a, b);
    let total: u64 = a.selection_counts.iter().map(|c| c[1]).sum();
    assert_eq!(total, 5000);
}

#[test]
fn invalid_config_reports_everything() {
    let e = Scenario::from_json_str(r#"{"num_antennas": 0, "users": []}"#).unwrap_err();
    let fields: Vec<&str> = e.violations().iter().map(|v| v.field.as_str()).collect();
    assert_eq!(fields, ["num_antennas", "users"]);
    assert!(matches!(
        Scenario::from_json_str(r#"{"num_antennas": 1, "users": [], "extra": 1}"#),
        Err(Error::Config(_))
    ));
}

#[test]
fn closed_form_cap_is_explicit() {
    let d = SinrDistribution::new(1, 1.0, vec![]).unwrap();
    let e = closed_form_rate(&d, 65, ClosedFormOptions::default()).unwrap_err();
    assert!(matches!(e, Error::ClosedFormCap { k0: 65, cap: 64 }));
    assert!(e.to_string().contains("quadrature"));
    assert!(closed_form_rate(&d, 65, ClosedFormOptions { cap: 128 }).is_ok());
}

#[test]
fn sweep_rows_follow_the_grid() {
    let s = Scenario::from_json_str(CONFIG).unwrap();
    let grid = log_spaced_grid(100, 100_000, 4).unwrap();
    assert_eq!(grid, [100, 1000, 10_000, 100_000]);
    let sweep = scaling_ratio_sweep(&s, 0, &grid).unwrap();
    let k0s: Vec<u64> = sweep.rows.iter().map(|r| r.k0).collect();
    assert_eq!(k0s, grid);
    assert!(sweep.rows.iter().all(|r| r.lo < r.hi));
}

#[test]
fn validation_negative_control() {
    let s = Scenario::from_json_str(CONFIG).unwrap();
    let mut opts = ValidationOptions {
        trials: MIN_TRIALS,
        seed: 4,
        workers: 2,
        corrupt_rho: None,
    };
    assert!(validate(&s, &opts).unwrap().passes());
    opts.corrupt_rho = Some(0.7);
    let r = validate(&s, &opts).unwrap();
    assert!(r.failures() > 0);
}
