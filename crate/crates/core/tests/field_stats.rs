//! Statistical checks of the synthesized laser field against the analytic
//! Lorentzian first-order coherence it is supposed to realize.

mod common;

use common::{empirical_g1, fit_log_decay};
use pseudothermal::correlate::intensity_g2_oracle;
use pseudothermal::field::{generate_field, LaserParams};

#[test]
fn g1_decay_recovers_coherence_time_within_two_percent() {
    let tau_c = 135.0;
    let dt = 2.0;
    let params = LaserParams::new(1.0, tau_c, 20260808);
    // 1e7 ns -> 5e6 samples
    let trace = generate_field(&params, 1e7, dt).unwrap();
    let max_lag = (2.0 * tau_c / dt) as usize; // fit over [0, 2 tau_c]
    let g1 = empirical_g1(&trace, max_lag);
    let recovered = fit_log_decay(&g1) * dt;
    let rel = (recovered - tau_c).abs() / tau_c;
    assert!(
        rel < 0.02,
        "recovered tau_c {recovered:.2} ns vs {tau_c} ns ({:.2}%)",
        rel * 100.0
    );
}

#[test]
fn g1_slope_over_three_tau_c_within_three_percent() {
    let tau_c = 135.0;
    let dt = 2.0;
    let params = LaserParams::new(1.0, tau_c, 31415);
    let trace = generate_field(&params, 4e6, dt).unwrap(); // 2e6 samples
    let max_lag = (3.0 * tau_c / dt) as usize;
    let g1 = empirical_g1(&trace, max_lag);
    let recovered = fit_log_decay(&g1) * dt;
    let rel = (recovered - tau_c).abs() / tau_c;
    assert!(rel < 0.03, "recovered {recovered:.2} vs {tau_c} ns");
}

#[test]
fn g1_decays_monotonically_after_binning() {
    let tau_c = 135.0;
    let dt = 2.0;
    let params = LaserParams::new(1.0, tau_c, 777);
    let trace = generate_field(&params, 4e6, dt).unwrap();
    let g1 = empirical_g1(&trace, (2.0 * tau_c / dt) as usize);
    // bin in groups of 10 lags to suppress estimator noise
    let binned: Vec<f64> = g1
        .chunks(10)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    for w in binned.windows(2) {
        assert!(w[1] < w[0], "binned |g1| must decay: {w:?}");
    }
}

#[test]
fn raw_field_intensity_is_unbunched() {
    // pure phase noise leaves the intensity constant, so g2 is exactly 1
    let params = LaserParams::new(1.0, 135.0, 5150);
    let trace = generate_field(&params, 2e6, 2.0).unwrap();
    let hist = intensity_g2_oracle(&trace, 500.0).unwrap();
    for (m, &g) in hist.g2.iter().enumerate() {
        assert!((g - 1.0).abs() < 1e-9, "lag {m}: g2 = {g}");
    }
}
