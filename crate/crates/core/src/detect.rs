//! Semiclassical photodetection: intensity-driven Bernoulli thinning plus
//! dark counts, timestamp quantization and dead-time filtering.
//!
//! The model reproduces g2 statistics of thermal/coherent mixtures; it does
//! not describe antibunched sources. Detection probability per sample is
//! p = mean_rate * dt * I(t) / I_ref, so `mean_rate_hz` is the realized mean
//! rate when I_ref is the true mean intensity.

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::FieldTrace;
use crate::rng::{derive_seed, ExponentialGaps, UniformStream};

/// Typical actively quenched APD dead time, for configs that want one; the
/// default is 0 because cross-correlation between two detectors is immune to
/// it near tau = 0.
pub const TYPICAL_APD_DEAD_TIME_NS: f64 = 50.0;

/// Per-sample detection probability above which thinning is rejected.
pub const THINNING_LIMIT: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct DetectorParams {
    /// Target mean photoevent rate with efficiency folded in. Zero is allowed
    /// as a degenerate "detector off" case.
    pub mean_rate_hz: f64,
    pub dead_time_ns: f64,
    pub dark_rate_hz: f64,
    /// Timestamp quantum; must be a positive integer number of ns because the
    /// timestamp file format stores integer nanoseconds.
    pub timestamp_resolution_ns: f64,
    pub seed: u64,
    pub detector_id: u32,
}

impl DetectorParams {
    pub fn new(mean_rate_hz: f64, seed: u64, detector_id: u32) -> Self {
        DetectorParams {
            mean_rate_hz,
            dead_time_ns: 0.0,
            dark_rate_hz: 0.0,
            timestamp_resolution_ns: 2.0,
            seed,
            detector_id,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_rate_hz >= 0.0) {
            return Err(Error::InvalidDetector(format!(
                "mean_rate_hz must be >= 0, got {}",
                self.mean_rate_hz
            )));
        }
        if !(self.dead_time_ns >= 0.0) {
            return Err(Error::InvalidDetector(format!(
                "dead_time_ns must be >= 0, got {}",
                self.dead_time_ns
            )));
        }
        if !(self.dark_rate_hz >= 0.0) {
            return Err(Error::InvalidDetector(format!(
                "dark_rate_hz must be >= 0, got {}",
                self.dark_rate_hz
            )));
        }
        let res = self.timestamp_resolution_ns;
        if !(res > 0.0) || res.fract() != 0.0 {
            return Err(Error::InvalidDetector(format!(
                "timestamp_resolution_ns must be a positive integer number of ns \
                 (integer-ns timestamp files), got {res}"
            )));
        }
        Ok(())
    }
}

/// Sorted, quantized photodetection event times from one detector.
#[derive(Clone, Debug, PartialEq)]
pub struct TimestampStream {
    /// Event times in integer ns, strictly ascending, multiples of the
    /// resolution quantum.
    pub events_ns: Vec<u64>,
    pub duration_ns: f64,
    pub resolution_ns: f64,
    pub detector_id: u32,
    pub seed: u64,
}

impl TimestampStream {
    pub fn len(&self) -> usize {
        self.events_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events_ns.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        if self.duration_ns <= 0.0 {
            return 0.0;
        }
        self.events_ns.len() as f64 / (self.duration_ns * 1e-9)
    }

    pub fn validate(&self) -> Result<()> {
        let res = self.resolution_ns.round() as u64;
        let mut prev: Option<u64> = None;
        for (i, &t) in self.events_ns.iter().enumerate() {
            if let Some(p) = prev {
                if t <= p {
                    return Err(Error::UnsortedTimestamps(i));
                }
            }
            if res > 0 && t % res != 0 {
                return Err(Error::InvalidDetector(format!(
                    "event {t} ns is not a multiple of the {res} ns resolution"
                )));
            }
            if t as f64 > self.duration_ns {
                return Err(Error::InvalidDetector(format!(
                    "event {t} ns lies beyond the {} ns duration",
                    self.duration_ns
                )));
            }
            prev = Some(t);
        }
        Ok(())
    }
}

/// Round to the resolution grid, ties to even (bias-free).
#[inline]
fn quantize_ns(t_ns: f64, res_ns: u64) -> u64 {
    let q = (t_ns / res_ns as f64).round_ties_even();
    (q as u64) * res_ns
}

/// Streaming detector. Feed intensity chunks in order of absolute output
/// sample index; thinning draws are addressed by that index, so chunk size
/// does not change the result.
pub struct DetectorSim {
    params: DetectorParams,
    dt_ns: f64,
    duration_ns: f64,
    p_per_intensity: f64,
    res_ns: u64,
    thin: UniformStream,
    next_index: u64,
    signal_events: Vec<u64>,
}

impl DetectorSim {
    /// `reference_intensity` is the intensity that realizes `mean_rate_hz`;
    /// pass the trace (or ensemble) mean.
    pub fn new(
        params: &DetectorParams,
        dt_ns: f64,
        duration_ns: f64,
        reference_intensity: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(dt_ns > 0.0) {
            return Err(Error::InvalidDetector(format!(
                "dt_ns must be > 0, got {dt_ns}"
            )));
        }
        let p_mean = params.mean_rate_hz * 1e-9 * dt_ns;
        if p_mean >= THINNING_LIMIT {
            return Err(Error::ThinningViolation { p: p_mean });
        }
        let p_per_intensity = if reference_intensity > 0.0 {
            p_mean / reference_intensity
        } else {
            0.0
        };
        Ok(DetectorSim {
            params: params.clone(),
            dt_ns,
            duration_ns,
            p_per_intensity,
            res_ns: params.timestamp_resolution_ns.round() as u64,
            thin: UniformStream::new(derive_seed(params.seed, "detect.thin")),
            next_index: 0,
            signal_events: Vec::new(),
        })
    }

    /// Thin one chunk of intensities starting at absolute sample index
    /// `start_index` (time `start_index * dt`).
    pub fn process(&mut self, start_index: u64, intensities: &[f64]) -> Result<()> {
        if start_index != self.next_index {
            self.thin.seek(start_index);
        }
        self.next_index = start_index + intensities.len() as u64;
        for (k, &intensity) in intensities.iter().enumerate() {
            let p = self.p_per_intensity * intensity;
            let u = self.thin.next();
            if p >= THINNING_LIMIT {
                return Err(Error::ThinningViolation { p });
            }
            if u < p {
                let t = (start_index + k as u64) as f64 * self.dt_ns;
                self.signal_events.push(quantize_ns(t, self.res_ns));
            }
        }
        Ok(())
    }

    /// Add dark counts, enforce the dead time on the merged sequence, and
    /// build the stream.
    pub fn finalize(self) -> Result<TimestampStream> {
        let mut darks: Vec<u64> = Vec::new();
        if self.params.dark_rate_hz > 0.0 {
            let mut gaps = ExponentialGaps::new(
                derive_seed(self.params.seed, "detect.dark"),
                self.params.dark_rate_hz * 1e-9,
            );
            let mut t = 0.0f64;
            loop {
                t += gaps.next_gap_ns();
                if t >= self.duration_ns {
                    break;
                }
                darks.push(quantize_ns(t, self.res_ns));
            }
        }
        // merge two sorted sequences
        let mut merged = Vec::with_capacity(self.signal_events.len() + darks.len());
        let (mut i, mut j) = (0, 0);
        while i < self.signal_events.len() && j < darks.len() {
            if self.signal_events[i] <= darks[j] {
                merged.push(self.signal_events[i]);
                i += 1;
            } else {
                merged.push(darks[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&self.signal_events[i..]);
        merged.extend_from_slice(&darks[j..]);

        // dead time; equal quantized times always collapse to one event
        let dead = self.params.dead_time_ns;
        let mut events = Vec::with_capacity(merged.len());
        let mut last: Option<u64> = None;
        for t in merged {
            if let Some(prev) = last {
                if t <= prev || ((t - prev) as f64) < dead {
                    continue;
                }
            }
            events.push(t);
            last = Some(t);
        }
        let stream = TimestampStream {
            events_ns: events,
            duration_ns: self.duration_ns,
            resolution_ns: self.params.timestamp_resolution_ns,
            detector_id: self.params.detector_id,
            seed: self.params.seed,
        };
        stream.validate()?;
        Ok(stream)
    }
}

/// Detect over a complete trace; the reference intensity is the trace mean.
pub fn detect(trace: &FieldTrace, params: &DetectorParams) -> Result<TimestampStream> {
    let intensities = trace.intensities();
    let mean = trace.mean_intensity();
    let mut sim = DetectorSim::new(params, trace.dt_ns, trace.duration_ns(), mean)?;
    sim.process(0, &intensities)?;
    sim.finalize()
}

/// Write the bit-exact timestamp file: little-endian u64 event times in ns,
/// sorted ascending, no header.
pub fn write_timestamps(stream: &TimestampStream, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    for &t in &stream.events_ns {
        w.write_all(&t.to_le_bytes())
            .map_err(|e| Error::file(path, e))?;
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    write_sidecar(stream, &sidecar_path(path))
}

/// Sidecar metadata path for a timestamp file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta");
    PathBuf::from(os)
}

fn write_sidecar(stream: &TimestampStream, path: &Path) -> Result<()> {
    let body = format!(
        "duration_ns = {}\ntimestamp_resolution_ns = {}\ndetector_id = {}\nseed = {}\n",
        stream.duration_ns, stream.resolution_ns, stream.detector_id, stream.seed
    );
    std::fs::write(path, body).map_err(|e| Error::file(path, e))
}

/// Read a timestamp file plus its sidecar.
pub fn read_timestamps(path: &Path) -> Result<TimestampStream> {
    let meta = read_sidecar(&sidecar_path(path))?;
    let mut file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| Error::file(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidDetector(format!(
            "{}: timestamp file length {} is not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    let events_ns: Vec<u64> = bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    for (i, w) in events_ns.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::UnsortedTimestamps(i + 1));
        }
    }
    Ok(TimestampStream {
        events_ns,
        duration_ns: meta.0,
        resolution_ns: meta.1,
        detector_id: meta.2,
        seed: meta.3,
    })
}

fn read_sidecar(path: &Path) -> Result<(f64, f64, u32, u64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut duration = None;
    let mut resolution = None;
    let mut detector_id = None;
    let mut seed = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected 'key = value'",
                path.display(),
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        let bad = |e: std::num::ParseFloatError| {
            Error::Config(format!("{}: bad value for {key}: {e}", path.display()))
        };
        match key {
            "duration_ns" => duration = Some(value.parse::<f64>().map_err(bad)?),
            "timestamp_resolution_ns" => resolution = Some(value.parse::<f64>().map_err(bad)?),
            "detector_id" => {
                detector_id = Some(value.parse::<u32>().map_err(|e| {
                    Error::Config(format!("{}: bad value for {key}: {e}", path.display()))
                })?)
            }
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|e| {
                    Error::Config(format!("{}: bad value for {key}: {e}", path.display()))
                })?)
            }
            other => {
                return Err(Error::Config(format!(
                    "{}: unknown key '{other}'",
                    path.display()
                )))
            }
        }
    }
    match (duration, resolution, detector_id, seed) {
        (Some(d), Some(r), Some(i), Some(s)) => Ok((d, r, i, s)),
        _ => Err(Error::Config(format!(
            "{}: sidecar must define duration_ns, timestamp_resolution_ns, detector_id, seed",
            path.display()
        ))),
    }
}
