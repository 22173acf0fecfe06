//! Shared helpers for the integration suites: independent statistical
//! oracles computed by direct brute-force estimates, kept apart from the
//! library code paths they check.
#![allow(dead_code)] // each suite uses its own subset

use pseudothermal::field::FieldTrace;

/// Empirical |g1(tau)| by direct lagged products, one value per lag step.
pub fn empirical_g1(trace: &FieldTrace, max_lag_samples: usize) -> Vec<f64> {
    let n = trace.len();
    assert!(max_lag_samples < n / 2);
    let samples = &trace.samples;
    let mut denom = 0.0;
    for s in samples {
        denom += s.intensity();
    }
    denom /= n as f64;
    let mut out = Vec::with_capacity(max_lag_samples + 1);
    for m in 0..=max_lag_samples {
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..n - m {
            let a = &samples[k];
            let b = &samples[k + m];
            let c = a.h.conj() * b.h + a.v.conj() * b.v;
            re += c.re;
            im += c.im;
        }
        let count = (n - m) as f64;
        let mag = (re * re + im * im).sqrt() / count / denom;
        out.push(mag);
    }
    out
}

/// Exact g2(tau) of a tap superposition under the Gaussian phase-diffusion
/// model, no independence approximation. For zero-sum coefficient vectors the
/// Wiener phase gives E[exp(i sum c_k phi(t_k))] =
/// exp(sum_{i<j} c_i c_j |t_i - t_j| / tau_c), which covers both the
/// second-order mean intensity and the fourth-order correlator. Taps are
/// (lag_ns, complex amplitude) of scalar (single-polarization) fields.
pub fn analytic_finite_delay_g2(
    taps: &[(f64, num_complex::Complex64)],
    tau_c_ns: f64,
    tau_ns: f64,
) -> f64 {
    let mean = |offset_a: f64, offset_b: f64| -> f64 {
        // <E*(t+oa) E(t+ob)> style pair sum at equal time
        let mut acc = 0.0;
        for &(d1, a1) in taps {
            for &(d2, a2) in taps {
                acc += (a1 * a2.conj()).re
                    * (-((d1 - offset_a) - (d2 - offset_b)).abs() / tau_c_ns).exp();
            }
        }
        acc
    };
    let intensity = mean(0.0, 0.0);
    let mut fourth = 0.0;
    for &(d1, a1) in taps {
        for &(d2, a2) in taps {
            for &(d3, a3) in taps {
                for &(d4, a4) in taps {
                    let amp = (a1 * a2.conj() * a3 * a4.conj()).re;
                    let t = [-d1, -d2, tau_ns - d3, tau_ns - d4];
                    let c = [1.0f64, -1.0, 1.0, -1.0];
                    let mut var = 0.0;
                    for i in 0..4 {
                        for j in 0..4 {
                            if i != j {
                                var -= c[i] * c[j] * (t[i] - t[j]).abs();
                            }
                        }
                    }
                    fourth += amp * (-(var / tau_c_ns) / 2.0).exp();
                }
            }
        }
    }
    fourth / (intensity * intensity)
}

/// Least-squares slope fit of ln|g1| over lags [1, n), returning the decay
/// time -1/slope in units of the lag step.
pub fn fit_log_decay(values: &[f64]) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (m, &v) in values.iter().enumerate().skip(1) {
        if v > 1e-6 {
            xs.push(m as f64);
            ys.push(v.ln());
        }
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    -1.0 / slope
}
