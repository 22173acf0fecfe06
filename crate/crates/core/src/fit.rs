//! Weighted least-squares fit of the bunching model g2(tau) = 1 + b *
//! exp(-2|tau|/tau_c) to a correlation histogram.
//!
//! Damped Gauss-Newton: the normal matrix diagonal is inflated by a factor
//! lambda that shrinks by 10 on residual decrease and grows by 10 on
//! increase, starting at 1e-3. Parameter uncertainties come from the inverse
//! curvature matrix at the optimum scaled by the reduced chi-square.

use std::fmt;
use std::path::Path;

use crate::correlate::CorrelationHistogram;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    /// Iteration cap hit; best iterate returned.
    MaxIterations,
    /// Peak excess indistinguishable from zero; b fixed at 0.
    NoBunching,
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FitStatus::Converged => "converged",
            FitStatus::MaxIterations => "max-iterations",
            FitStatus::NoBunching => "no bunching detected",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Drop the bin centered on tau = 0 (detector artifacts in real data).
    pub exclude_zero_bin: bool,
    /// Fit the baseline as a third parameter instead of pinning it at 1.
    pub free_baseline: bool,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            exclude_zero_bin: false,
            free_baseline: false,
            max_iterations: 200,
        }
    }
}

/// Recovered bunching amplitude and coherence time.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// Bunching amplitude; g2(0) = baseline + b.
    pub b: f64,
    pub tau_c_ns: f64,
    pub b_err: f64,
    pub tau_c_err: f64,
    /// Fixed at 1 unless the free-baseline flag is set.
    pub baseline: f64,
    pub baseline_err: f64,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub status: FitStatus,
    /// Histogram spans fewer than three decay times of the fitted tau_c.
    pub span_warning: bool,
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn g2_zero(&self) -> f64 {
        self.baseline + self.b
    }
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# bunching fit report")?;
        writeln!(f, "g2_zero = {:.6}", self.g2_zero())?;
        writeln!(f, "b = {:.6}", self.b)?;
        writeln!(f, "b_err = {:.6}", self.b_err)?;
        writeln!(f, "tau_c_ns = {:.4}", self.tau_c_ns)?;
        writeln!(f, "tau_c_err_ns = {:.4}", self.tau_c_err)?;
        writeln!(f, "baseline = {:.6}", self.baseline)?;
        writeln!(f, "baseline_err = {:.6}", self.baseline_err)?;
        writeln!(f, "reduced_chi2 = {:.6}", self.reduced_chi2)?;
        writeln!(f, "converged = {}", self.converged)?;
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "status = {}", self.status)?;
        writeln!(f, "span_warning = {}", self.span_warning)?;
        Ok(())
    }
}

pub fn write_fit_report(result: &FitResult, path: &Path) -> Result<()> {
    std::fs::write(path, result.to_string()).map_err(|e| Error::file(path, e))
}

struct Point {
    tau: f64,
    g2: f64,
    weight: f64, // 1 / stderr^2
    stderr: f64,
}

pub fn fit_bunching(hist: &CorrelationHistogram) -> Result<FitResult> {
    fit_bunching_with(hist, FitOptions::default())
}

pub fn fit_bunching_with(hist: &CorrelationHistogram, opts: FitOptions) -> Result<FitResult> {
    if hist.degenerate {
        return Err(Error::FitRejected(
            "histogram is degenerate (empty input stream)".to_string(),
        ));
    }
    let mut points = Vec::new();
    for i in 0..hist.n_bins() {
        if hist.counts[i] == 0 || hist.stderr[i] <= 0.0 {
            continue;
        }
        let tau = hist.tau_at(i);
        if opts.exclude_zero_bin && tau.abs() < hist.bin_width_ns / 2.0 {
            continue;
        }
        points.push(Point {
            tau,
            g2: hist.g2[i],
            weight: 1.0 / (hist.stderr[i] * hist.stderr[i]),
            stderr: hist.stderr[i],
        });
    }
    if points.len() < 20 {
        return Err(Error::FitRejected(format!(
            "only {} usable bins; need at least 20",
            points.len()
        )));
    }

    // initial guess: peak excess and the lag where it falls to b0 * e^-2
    let peak = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.g2.total_cmp(&b.1.g2))
        .unwrap();
    let b0 = peak.1.g2 - 1.0;
    if b0 <= 3.0 * peak.1.stderr {
        return Ok(no_bunching_result(&points, peak.1.stderr));
    }
    let threshold = 1.0 + b0 * (-2.0f64).exp();
    let mut by_abs_tau: Vec<&Point> = points.iter().collect();
    by_abs_tau.sort_by(|a, b| a.tau.abs().total_cmp(&b.tau.abs()));
    let mut tau_c0 = by_abs_tau.last().unwrap().tau.abs() / 2.0;
    for p in &by_abs_tau {
        if p.tau.abs() > 0.0 && p.g2 <= threshold {
            tau_c0 = p.tau.abs();
            break;
        }
    }
    tau_c0 = tau_c0.max(hist.bin_width_ns);

    let n_par = if opts.free_baseline { 3 } else { 2 };
    let mut params = [b0, tau_c0, 1.0];
    let mut lambda = 1e-3;
    let mut chi2 = chi_square(&points, &params, opts.free_baseline);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (mut normal, gradient) = normal_equations(&points, &params, opts.free_baseline);
        for i in 0..n_par {
            normal[i][i] *= 1.0 + lambda;
        }
        let Some(step) = solve(&normal, &gradient, n_par) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = params;
        for i in 0..n_par {
            trial[i] += step[i];
        }
        if trial[1] <= 0.0 {
            lambda *= 10.0;
            continue;
        }
        let trial_chi2 = chi_square(&points, &trial, opts.free_baseline);
        if trial_chi2 <= chi2 {
            let rel_change = (0..n_par)
                .map(|i| (step[i] / (params[i].abs().max(1e-30))).abs())
                .fold(0.0f64, f64::max);
            params = trial;
            chi2 = trial_chi2;
            lambda /= 10.0;
            if rel_change < 1e-9 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
        }
    }

    let (normal, gradient) = normal_equations(&points, &params, opts.free_baseline);
    let gradient_norm = gradient[..n_par].iter().map(|g| g * g).sum::<f64>().sqrt();
    // convergence claims a stationary point; keep the flag honest
    if converged && gradient_norm > 1e-3 * chi2.max(1.0) {
        converged = false;
    }
    let dof = (points.len().saturating_sub(n_par)).max(1);
    let reduced_chi2 = chi2 / dof as f64;
    let covariance_scale = reduced_chi2.max(0.0);
    let errors = invert_diag_errors(&normal, n_par).map(|d| {
        [
            (d[0] * covariance_scale).sqrt(),
            (d[1] * covariance_scale).sqrt(),
            if n_par > 2 {
                (d[2] * covariance_scale).sqrt()
            } else {
                0.0
            },
        ]
    });
    let errors = errors.unwrap_or([f64::NAN, f64::NAN, f64::NAN]);
    let max_abs_tau = points.iter().map(|p| p.tau.abs()).fold(0.0f64, f64::max);
    Ok(FitResult {
        b: params[0],
        tau_c_ns: params[1],
        b_err: errors[0],
        tau_c_err: errors[1],
        baseline: if opts.free_baseline { params[2] } else { 1.0 },
        baseline_err: errors[2],
        reduced_chi2,
        converged,
        iterations,
        status: if converged {
            FitStatus::Converged
        } else {
            FitStatus::MaxIterations
        },
        span_warning: max_abs_tau < 3.0 * params[1] / 2.0,
        gradient_norm,
    })
}

fn no_bunching_result(points: &[Point], peak_stderr: f64) -> FitResult {
    // chi-square against the flat baseline
    let chi2: f64 = points
        .iter()
        .map(|p| {
            let r = p.g2 - 1.0;
            r * r * p.weight
        })
        .sum();
    FitResult {
        b: 0.0,
        tau_c_ns: 0.0,
        b_err: peak_stderr,
        tau_c_err: 0.0,
        baseline: 1.0,
        baseline_err: 0.0,
        reduced_chi2: chi2 / points.len().max(1) as f64,
        converged: true,
        iterations: 0,
        status: FitStatus::NoBunching,
        span_warning: false,
        gradient_norm: 0.0,
    }
}

#[inline]
fn model(tau: f64, params: &[f64; 3], free_baseline: bool) -> f64 {
    let base = if free_baseline { params[2] } else { 1.0 };
    base + params[0] * (-2.0 * tau.abs() / params[1]).exp()
}

fn chi_square(points: &[Point], params: &[f64; 3], free_baseline: bool) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = p.g2 - model(p.tau, params, free_baseline);
            r * r * p.weight
        })
        .sum()
}

/// Build J^T W J and J^T W r for the current parameters.
fn normal_equations(
    points: &[Point],
    params: &[f64; 3],
    free_baseline: bool,
) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut a = [[0.0f64; 3]; 3];
    let mut g = [0.0f64; 3];
    let b = params[0];
    let tau_c = params[1];
    for p in points {
        let decay = (-2.0 * p.tau.abs() / tau_c).exp();
        let j = [decay, b * decay * 2.0 * p.tau.abs() / (tau_c * tau_c), 1.0];
        let r = p.g2 - model(p.tau, params, free_baseline);
        let n = if free_baseline { 3 } else { 2 };
        for i in 0..n {
            g[i] += j[i] * r * p.weight;
            for k in 0..n {
                a[i][k] += j[i] * j[k] * p.weight;
            }
        }
    }
    (a, g)
}

/// Solve the (n x n) normal system by Gaussian elimination with partial
/// pivoting; None when singular.
fn solve(a: &[[f64; 3]; 3], rhs: &[f64; 3], n: usize) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a[i][j];
        }
        m[i][n] = rhs[i];
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col] / m[col][col];
            for j in col..=n {
                m[row][j] -= f * m[col][j];
            }
        }
    }
    let mut out = [0.0f64; 3];
    for i in 0..n {
        out[i] = m[i][n] / m[i][i];
    }
    Some(out)
}

/// Diagonal of the inverse of the (undamped) curvature matrix.
fn invert_diag_errors(a: &[[f64; 3]; 3], n: usize) -> Option<[f64; 3]> {
    let mut diag = [0.0f64; 3];
    for i in 0..n {
        let mut e = [0.0f64; 3];
        e[i] = 1.0;
        let col = solve(a, &e, n)?;
        if col[i] < 0.0 {
            return None;
        }
        diag[i] = col[i];
    }
    Some(diag)
}
