//! Experiment orchestration: field -> cascade -> detect -> correlate -> fit,
//! executed in streaming chunks with bounded trace memory.
//!
//! The field stream carries absolute sample indices. The first
//! sum(delay_samples) output samples only fill delay lines and are skipped;
//! detection time 0 corresponds to the first fully valid cascade output, so
//! total field samples = warmup + duration/dt.

use std::path::PathBuf;

use crate::cascade::{CascadeReport, ForwardPort, StageRunner};
use crate::config::{ExperimentConfig, OutputPort};
use crate::correlate::{
    cross_correlate, write_histogram_csv, CorrelationHistogram, IntensityCorrelator,
};
use crate::detect::{write_timestamps, DetectorSim, TimestampStream};
use crate::error::{Error, Result};
use crate::field::FieldGenerator;
use crate::fit::{fit_bunching_with, write_fit_report, FitOptions, FitResult};
use crate::jones::Jones;
use crate::theory::{validate_delays, DelayValidation, TheoryParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// In-memory results of the simulation stage.
pub struct EngineResult {
    pub streams: Vec<TimestampStream>,
    pub cascade_report: CascadeReport,
    pub oracle: Option<CorrelationHistogram>,
    /// Largest number of trace samples resident at once; bounded by the
    /// chunk size and delay lines, not by the duration.
    pub peak_resident_samples: usize,
}

/// Streaming simulation engine (field through detectors).
pub struct StreamEngine {
    config: ExperimentConfig,
}

impl StreamEngine {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(StreamEngine {
            config: config.clone(),
        })
    }

    pub fn run(&self) -> Result<EngineResult> {
        let cfg = &self.config;
        let dt = cfg.run.dt_ns;
        let laser = cfg.laser_params()?;
        let cascade = cfg.cascade_spec()?;
        let n_out = (cfg.run.duration_ns / dt).round() as u64;
        if n_out < 100 {
            return Err(Error::TraceTooShort(format!(
                "duration {} ns yields {} output samples; need at least 100",
                cfg.run.duration_ns, n_out
            )));
        }
        let duration_ns = n_out as f64 * dt;

        let mut runners = Vec::new();
        let mut realized = Vec::new();
        let mut rounding = Vec::new();
        let mut warmup = 0u64;
        for stage in &cascade.stages {
            let runner = StageRunner::new(stage, dt)?;
            let (m, err) = stage.delay_samples(dt)?;
            realized.push(m as f64 * dt);
            rounding.push(err);
            warmup += m as u64;
            runners.push(runner);
        }
        let total_delay_ns: f64 = cascade.delays_ns().iter().sum();
        if total_delay_ns >= duration_ns / 2.0 {
            return Err(Error::TraceTooShort(format!(
                "total delay {total_delay_ns} ns must stay below half the duration {duration_ns} ns"
            )));
        }

        // Phase-independent mean intensity per port normalizes detector
        // rates; exact whenever the delay set passes the subset-sum check.
        let (trans_a, trans_b) = crate::cascade::phase_independent_transmission(&cascade, dt)?;
        let input_power = laser.mean_amplitude * laser.mean_amplitude;
        let ref_intensity = [input_power * trans_a, input_power * trans_b];

        let mut detectors = Vec::new();
        let mut det_ports = Vec::new();
        for i in 0..cfg.detectors.len() {
            let params = cfg.detector_params(i)?;
            let port = cfg.detector_port(i)?;
            let reference = match port {
                OutputPort::A => ref_intensity[0],
                OutputPort::B => ref_intensity[1],
            };
            detectors.push(DetectorSim::new(&params, dt, duration_ns, reference)?);
            det_ports.push(port);
        }

        let oracle_port = det_ports.first().copied().unwrap_or(OutputPort::A);
        let mut oracle = match cfg.run.intensity_oracle_max_lag_ns {
            Some(lag_ns) => {
                if !(lag_ns > 0.0) || lag_ns >= duration_ns / 10.0 {
                    return Err(Error::LagTooLarge {
                        lag_ns,
                        trace_ns: duration_ns,
                    });
                }
                let max_lag = (lag_ns / dt).round() as usize;
                Some(IntensityCorrelator::new(max_lag, dt, n_out))
            }
            None => None,
        };

        let chunk = cfg.run.chunk_samples;
        let mut generator = FieldGenerator::new(&laser, dt)?;
        let total_in = warmup + n_out;

        // swap-based buffering keeps stage inputs and outputs disjoint
        let mut buf_in: Vec<Jones> = Vec::new();
        let mut in_a: Vec<Jones> = Vec::new();
        let mut in_b: Vec<Jones> = Vec::new();
        let mut out_a: Vec<Jones> = Vec::new();
        let mut out_b: Vec<Jones> = Vec::new();
        let mut intensity_a: Vec<f64> = Vec::new();
        let mut intensity_b: Vec<f64> = Vec::new();

        let n_stages = runners.len();
        let mut input_power_sum = 0.0f64;
        let mut input_power_n = 0u64;
        // per stage, per port (a, b), over valid samples only
        let mut stage_power_sums = vec![(0.0f64, 0.0f64); n_stages];
        let mut stage_power_ns = vec![0u64; n_stages];
        // first valid absolute index for the output of stage k
        let stage_valid_from: Vec<u64> = {
            let mut acc = 0u64;
            let mut v = Vec::with_capacity(n_stages);
            for r in &runners {
                acc += r.delay_samples() as u64;
                v.push(acc);
            }
            v
        };

        let mut peak_resident = 0usize;
        let mut produced = 0u64; // absolute index of the next input sample
        while produced < total_in {
            let n = chunk.min((total_in - produced) as usize);
            let chunk_start = produced;
            buf_in.clear();
            generator.generate_into(n, &mut buf_in);
            produced += n as u64;

            let mut sum = input_power_sum;
            for s in &buf_in {
                sum += s.intensity();
            }
            input_power_sum = sum;
            input_power_n += n as u64;

            let mut feed_b = false;
            for (k, runner) in runners.iter_mut().enumerate() {
                let last = k + 1 == n_stages;
                if k == 0 {
                    runner.process(&buf_in, None, &mut out_a, &mut out_b);
                } else {
                    let b = if feed_b { Some(in_b.as_slice()) } else { None };
                    runner.process(&in_a, b, &mut out_a, &mut out_b);
                }
                // accumulate stage power over the valid region
                let first_valid = stage_valid_from[k].saturating_sub(chunk_start) as usize;
                if first_valid < n {
                    let mut pa = stage_power_sums[k].0;
                    let mut pb = stage_power_sums[k].1;
                    for i in first_valid..n {
                        pa += out_a[i].intensity();
                        pb += out_b[i].intensity();
                    }
                    stage_power_sums[k] = (pa, pb);
                    stage_power_ns[k] += (n - first_valid) as u64;
                }
                if !last {
                    match cascade.forward_port {
                        ForwardPort::A => {
                            std::mem::swap(&mut in_a, &mut out_a);
                            feed_b = false;
                        }
                        ForwardPort::B => {
                            std::mem::swap(&mut in_a, &mut out_b);
                            feed_b = false;
                        }
                        ForwardPort::Both => {
                            std::mem::swap(&mut in_a, &mut out_a);
                            std::mem::swap(&mut in_b, &mut out_b);
                            feed_b = true;
                        }
                    }
                }
            }
            let (final_a, final_b): (&[Jones], Option<&[Jones]>) = if n_stages == 0 {
                (&buf_in, None)
            } else {
                (&out_a, Some(&out_b))
            };

            // detection over the valid region
            let first_valid = warmup.saturating_sub(chunk_start) as usize;
            if first_valid < n {
                let out_start = chunk_start + first_valid as u64 - warmup;
                intensity_a.clear();
                intensity_a.extend(final_a[first_valid..n].iter().map(Jones::intensity));
                intensity_b.clear();
                match final_b {
                    Some(fb) => intensity_b.extend(fb[first_valid..n].iter().map(Jones::intensity)),
                    None => intensity_b.resize(n - first_valid, 0.0),
                }
                for (det, port) in detectors.iter_mut().zip(&det_ports) {
                    let intensities = match port {
                        OutputPort::A => &intensity_a,
                        OutputPort::B => &intensity_b,
                    };
                    det.process(out_start, intensities)?;
                }
                if let Some(acc) = oracle.as_mut() {
                    let intensities = match oracle_port {
                        OutputPort::A => &intensity_a,
                        OutputPort::B => &intensity_b,
                    };
                    acc.push(intensities);
                }
            }

            let resident = buf_in.len()
                + in_a.len()
                + in_b.len()
                + out_a.len()
                + out_b.len()
                + intensity_a.len() / 4
                + intensity_b.len() / 4
                + runners.iter().map(|r| r.delay_samples()).sum::<usize>();
            peak_resident = peak_resident.max(resident);
        }

        let streams: Vec<TimestampStream> = detectors
            .into_iter()
            .map(DetectorSim::finalize)
            .collect::<Result<_>>()?;
        let oracle = match oracle {
            Some(acc) => Some(acc.finalize()?),
            None => None,
        };
        let cascade_report = CascadeReport {
            realized_delays_ns: realized,
            rounding_errors_ns: rounding,
            stage_mean_power: stage_power_sums
                .iter()
                .zip(&stage_power_ns)
                .map(|(&(a, b), &n)| {
                    if n > 0 {
                        (a / n as f64, b / n as f64)
                    } else {
                        (0.0, 0.0)
                    }
                })
                .collect(),
            input_mean_power: if input_power_n > 0 {
                input_power_sum / input_power_n as f64
            } else {
                0.0
            },
            warmup_ns: warmup as f64 * dt,
        };
        Ok(EngineResult {
            streams,
            cascade_report,
            oracle,
            peak_resident_samples: peak_resident,
        })
    }
}

/// Everything a full run produces.
pub struct ExperimentOutputs {
    pub streams: Vec<TimestampStream>,
    pub histogram: CorrelationHistogram,
    pub fit: FitResult,
    pub cascade_report: CascadeReport,
    pub validation: DelayValidation,
    pub oracle: Option<CorrelationHistogram>,
    pub peak_resident_samples: usize,
    pub timestamp_paths: Vec<PathBuf>,
    pub histogram_path: PathBuf,
    pub fit_path: PathBuf,
    pub cascade_report_path: PathBuf,
    pub validation_path: PathBuf,
    pub manifest_path: PathBuf,
    pub oracle_path: Option<PathBuf>,
}

/// Simulate, correlate the first two detectors, fit, and persist everything
/// under the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutputs> {
    if config.detectors.len() < 2 {
        return Err(Error::Config(
            "full run needs two detectors for cross-correlation".into(),
        ));
    }
    let engine = StreamEngine::new(config)?;
    let result = engine.run()?;

    let histogram = cross_correlate(
        &result.streams[0],
        &result.streams[1],
        config.correlate.bin_width_ns,
        config.correlate.tau_window_ns,
    )?;
    let fit = fit_bunching_with(
        &histogram,
        FitOptions {
            exclude_zero_bin: config.fit.exclude_zero_bin,
            free_baseline: config.fit.free_baseline,
            ..Default::default()
        },
    )?;
    let cascade = config.cascade_spec()?;
    let validation = validate_delays(&TheoryParams::new(
        config.laser.coherence_time_ns,
        cascade.delays_ns(),
    ))?;

    let dir = config.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
    let mut timestamp_paths = Vec::new();
    for stream in &result.streams {
        let path = dir.join(format!("det{}.ts", stream.detector_id));
        write_timestamps(stream, &path)?;
        timestamp_paths.push(path);
    }
    let histogram_path = dir.join("histogram.csv");
    write_histogram_csv(&histogram, &histogram_path)?;
    let fit_path = dir.join("fit_report.txt");
    write_fit_report(&fit, &fit_path)?;
    let cascade_report_path = dir.join("cascade_report.txt");
    std::fs::write(&cascade_report_path, result.cascade_report.to_string())
        .map_err(|e| Error::file(&cascade_report_path, e))?;
    let validation_path = dir.join("validation.txt");
    std::fs::write(&validation_path, validation.to_string())
        .map_err(|e| Error::file(&validation_path, e))?;
    let oracle_path = match &result.oracle {
        Some(hist) => {
            let path = dir.join("oracle.csv");
            write_histogram_csv(hist, &path)?;
            Some(path)
        }
        None => None,
    };
    let manifest_path = dir.join("manifest.txt");
    let manifest = format!(
        "# pseudothermal run manifest\nversion = \"{}\"\n\n{}",
        VERSION,
        config.to_toml_string()
    );
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::file(&manifest_path, e))?;

    Ok(ExperimentOutputs {
        streams: result.streams,
        histogram,
        fit,
        cascade_report: result.cascade_report,
        validation,
        oracle: result.oracle,
        peak_resident_samples: result.peak_resident_samples,
        timestamp_paths,
        histogram_path,
        fit_path,
        cascade_report_path,
        validation_path,
        manifest_path,
        oracle_path,
    })
}
