//! Phase-diffusion laser field synthesis.
//!
//! The baseband field is E0 * exp(i phi_k) * polarization, where phi_k is a
//! discrete Gaussian random walk with per-step variance 2*dt/tau_c. That
//! variance makes the ensemble first-order coherence decay as
//! exp(-|tau|/tau_c), i.e. a Lorentzian line. The optical carrier is dropped;
//! static recombination phases are handled per stage in the cascade.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jones::Jones;
use crate::rng::{derive_seed, GaussianStream, UniformStream};

/// Default ceiling on dt as a fraction of the coherence time. Keeps per-step
/// phase increments below ~0.32 rad so the walk approximates continuous
/// diffusion.
pub const DEFAULT_DT_CEILING_FRACTION: f64 = 1.0 / 20.0;

/// Strictest supported ceiling.
pub const MIN_DT_CEILING_FRACTION: f64 = 1.0 / 100.0;

/// Source laser description.
#[derive(Clone, Debug)]
pub struct LaserParams {
    /// Constant field amplitude E0.
    pub mean_amplitude: f64,
    /// Coherence time tau_c in ns (1/linewidth for a Lorentzian line).
    pub coherence_time_ns: f64,
    /// Center wavelength; only used for optional per-stage carrier-phase
    /// bookkeeping.
    pub center_wavelength_nm: f64,
    /// Zero-diffusion surrogate for infinite coherence time.
    pub coherent: bool,
    pub seed: u64,
    /// Unit Jones vector; defaults to horizontal.
    pub polarization: Jones,
}

impl LaserParams {
    pub fn new(mean_amplitude: f64, coherence_time_ns: f64, seed: u64) -> Self {
        LaserParams {
            mean_amplitude,
            coherence_time_ns,
            center_wavelength_nm: 780.0,
            coherent: false,
            seed,
            polarization: Jones::horizontal(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coherence_time_ns > 0.0) {
            return Err(Error::InvalidLaser(format!(
                "coherence_time_ns must be > 0, got {}",
                self.coherence_time_ns
            )));
        }
        if !(self.mean_amplitude >= 0.0) {
            return Err(Error::InvalidLaser(format!(
                "mean_amplitude must be >= 0, got {}",
                self.mean_amplitude
            )));
        }
        if !(self.center_wavelength_nm > 0.0) {
            return Err(Error::InvalidLaser(format!(
                "center_wavelength_nm must be > 0, got {}",
                self.center_wavelength_nm
            )));
        }
        if (self.polarization.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaser(format!(
                "polarization vector must have unit norm, got {}",
                self.polarization.norm()
            )));
        }
        Ok(())
    }
}

/// Uniformly sampled two-component complex baseband field.
#[derive(Clone, Debug)]
pub struct FieldTrace {
    /// Sample spacing in ns.
    pub dt_ns: f64,
    /// Start time of the first sample in ns.
    pub t0_ns: f64,
    pub samples: Vec<Jones>,
}

impl FieldTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ns(&self) -> f64 {
        self.samples.len() as f64 * self.dt_ns
    }

    pub fn mean_intensity(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(Jones::intensity).sum();
        sum / self.samples.len() as f64
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.samples.iter().map(Jones::intensity).collect()
    }

    /// All-zero trace aligned with `self`.
    pub fn vacuum_like(&self) -> FieldTrace {
        FieldTrace {
            dt_ns: self.dt_ns,
            t0_ns: self.t0_ns,
            samples: vec![Jones::ZERO; self.samples.len()],
        }
    }
}

/// Streaming generator of the phase-diffusion field.
///
/// Emits samples in index order while carrying the running phase; the
/// underlying Gaussian stream is addressed by absolute sample index, so
/// regenerating from a known (index, phase) cursor is exact.
pub struct FieldGenerator {
    amplitude: f64,
    polarization: Jones,
    sigma_step: f64,
    dt_ns: f64,
    phase: f64,
    index: u64,
    walk: GaussianStream,
}

impl FieldGenerator {
    pub fn new(params: &LaserParams, dt_ns: f64) -> Result<Self> {
        Self::with_dt_ceiling(params, dt_ns, DEFAULT_DT_CEILING_FRACTION)
    }

    /// `ceiling_fraction` tightens the dt precondition; it must lie in
    /// [1/100, 1/20].
    pub fn with_dt_ceiling(
        params: &LaserParams,
        dt_ns: f64,
        ceiling_fraction: f64,
    ) -> Result<Self> {
        params.validate()?;
        if params.mean_amplitude == 0.0 {
            return Err(Error::ZeroAmplitude);
        }
        if !(dt_ns > 0.0) {
            return Err(Error::InvalidLaser(format!(
                "dt_ns must be > 0, got {dt_ns}"
            )));
        }
        if !(MIN_DT_CEILING_FRACTION..=DEFAULT_DT_CEILING_FRACTION).contains(&ceiling_fraction) {
            return Err(Error::InvalidLaser(format!(
                "dt ceiling fraction must lie in [{MIN_DT_CEILING_FRACTION}, \
                 {DEFAULT_DT_CEILING_FRACTION}], got {ceiling_fraction}"
            )));
        }
        let max_dt_ns = params.coherence_time_ns * ceiling_fraction;
        if !params.coherent && dt_ns > max_dt_ns {
            return Err(Error::CoarseSampling {
                dt_ns,
                tau_c_ns: params.coherence_time_ns,
                max_dt_ns,
            });
        }
        let sigma_step = if params.coherent {
            0.0
        } else {
            (2.0 * dt_ns / params.coherence_time_ns).sqrt()
        };
        let mut init = UniformStream::new(derive_seed(params.seed, "field.init"));
        let phase = std::f64::consts::TAU * init.next();
        Ok(FieldGenerator {
            amplitude: params.mean_amplitude,
            polarization: params.polarization,
            sigma_step,
            dt_ns,
            phase,
            index: 0,
            walk: GaussianStream::new(derive_seed(params.seed, "field.walk")),
        })
    }

    pub fn dt_ns(&self) -> f64 {
        self.dt_ns
    }

    /// Index of the next sample to be emitted.
    pub fn sample_index(&self) -> u64 {
        self.index
    }

    /// Running phase of the next sample; together with `sample_index` this is
    /// the full resume cursor.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Jump the cursor to `(sample_index, phase)`.
    pub fn seek(&mut self, sample_index: u64, phase: f64) {
        self.index = sample_index;
        self.phase = phase;
        self.walk.seek(sample_index);
    }

    /// Append `n` samples to `out`.
    pub fn generate_into(&mut self, n: usize, out: &mut Vec<Jones>) {
        out.reserve(n);
        for _ in 0..n {
            let (sin_p, cos_p) = self.phase.sin_cos();
            let e = Complex64::new(self.amplitude * cos_p, self.amplitude * sin_p);
            out.push(self.polarization.scale_complex(e));
            self.phase += self.sigma_step * self.walk.next();
            self.index += 1;
        }
    }
}

/// Generate a complete trace of `round(duration_ns / dt_ns)` samples.
pub fn generate_field(params: &LaserParams, duration_ns: f64, dt_ns: f64) -> Result<FieldTrace> {
    if !(duration_ns > 0.0) {
        return Err(Error::NonPositiveDuration(duration_ns));
    }
    let mut gen = FieldGenerator::new(params, dt_ns)?;
    let n = (duration_ns / dt_ns).round() as usize;
    if n < 100 {
        return Err(Error::TraceTooShort(format!(
            "duration {duration_ns} ns yields {n} samples; need at least 100 (100 * dt)"
        )));
    }
    let mut samples = Vec::new();
    gen.generate_into(n, &mut samples);
    Ok(FieldTrace {
        dt_ns,
        t0_ns: 0.0,
        samples,
    })
}

const TRACE_DUMP_MAGIC: &[u8; 8] = b"PSTHTRC1";

/// Debug dump: header (magic, dt_ns as f64 LE, sample count as u64 LE) then
/// per sample four little-endian f32 values (h.re, h.im, v.re, v.im).
pub fn write_trace(trace: &FieldTrace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    let mut inner = || -> std::io::Result<()> {
        w.write_all(TRACE_DUMP_MAGIC)?;
        w.write_all(&trace.dt_ns.to_le_bytes())?;
        w.write_all(&(trace.samples.len() as u64).to_le_bytes())?;
        for s in &trace.samples {
            w.write_all(&(s.h.re as f32).to_le_bytes())?;
            w.write_all(&(s.h.im as f32).to_le_bytes())?;
            w.write_all(&(s.v.re as f32).to_le_bytes())?;
            w.write_all(&(s.v.im as f32).to_le_bytes())?;
        }
        w.flush()
    };
    inner().map_err(|e| Error::file(path, e))
}

/// Read a trace dump back (f32 precision, t0 = 0).
pub fn read_trace(path: &Path) -> Result<FieldTrace> {
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut r = BufReader::new(file);
    let mut inner = || -> std::io::Result<FieldTrace> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != TRACE_DUMP_MAGIC {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "not a trace dump (bad magic)",
            ));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let dt_ns = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut samples = Vec::with_capacity(n);
        let mut b4 = [0u8; 4];
        for _ in 0..n {
            let mut vals = [0.0f32; 4];
            for v in &mut vals {
                r.read_exact(&mut b4)?;
                *v = f32::from_le_bytes(b4);
            }
            samples.push(Jones::new(
                Complex64::new(vals[0] as f64, vals[1] as f64),
                Complex64::new(vals[2] as f64, vals[3] as f64),
            ));
        }
        Ok(FieldTrace {
            dt_ns,
            t0_ns: 0.0,
            samples,
        })
    };
    inner().map_err(|e| Error::file(path, e))
}
