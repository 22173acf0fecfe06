//! Experiment configuration: a strict TOML file with explicit units in key
//! names. Unknown keys are rejected. The single `[run] seed` derives all
//! per-module sub-seeds deterministically.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cascade::{delay_from_fiber, CascadeSpec, ForwardPort, StageSpec};
use crate::detect::DetectorParams;
use crate::error::{Error, Result};
use crate::field::LaserParams;
use crate::jones::{Jones, JonesMatrix};
use crate::rng::derive_seed;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub laser: LaserConfig,
    #[serde(default)]
    pub cascade: CascadeConfig,
    pub detectors: Vec<DetectorConfig>,
    #[serde(default)]
    pub correlate: CorrelateConfig,
    #[serde(default)]
    pub fit: FitConfig,
    pub run: RunConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LaserConfig {
    #[serde(default = "default_amplitude")]
    pub mean_amplitude: f64,
    pub coherence_time_ns: f64,
    #[serde(default = "default_wavelength")]
    pub center_wavelength_nm: f64,
    #[serde(default)]
    pub coherent: bool,
    /// (re_h, im_h, re_v, im_v); defaults to horizontal (1, 0).
    #[serde(default = "default_polarization")]
    pub polarization: [f64; 4],
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_wavelength() -> f64 {
    780.0
}

fn default_polarization() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    /// Which output of stage k feeds stage k+1: "a", "b" (default) or "both".
    #[serde(default = "default_forward_port")]
    pub forward_port: String,
    #[serde(default)]
    pub stages: Vec<StageConfig>,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            forward_port: default_forward_port(),
            stages: Vec::new(),
        }
    }
}

fn default_forward_port() -> String {
    "b".to_string()
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    /// Either give the delay directly...
    pub delay_ns: Option<f64>,
    /// ...or a fiber length and group index to convert.
    pub fiber_length_m: Option<f64>,
    pub group_index: Option<f64>,
    #[serde(default = "default_transmission")]
    pub short_arm_transmission: f64,
    #[serde(default = "default_transmission")]
    pub delayed_arm_transmission: f64,
    #[serde(default)]
    pub static_phase_rad: f64,
    /// Adds the carrier phase 2*pi*f*delay (mod 2*pi) for the configured
    /// wavelength on top of static_phase_rad.
    #[serde(default)]
    pub carrier_phase_from_wavelength: bool,
    /// Real rotation angle of the delayed-arm polarization.
    #[serde(default)]
    pub polarization_rotation_rad: f64,
}

fn default_transmission() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// "a" or "b": which cascade output this detector watches. Two detectors
    /// on the same port model the usual arrangement of one output split
    /// 50/50 onto a detector pair.
    #[serde(default = "default_port")]
    pub port: String,
    pub mean_rate_hz: f64,
    #[serde(default)]
    pub dead_time_ns: f64,
    #[serde(default)]
    pub dark_rate_hz: f64,
    #[serde(default = "default_resolution")]
    pub timestamp_resolution_ns: f64,
}

fn default_port() -> String {
    "a".to_string()
}

fn default_resolution() -> f64 {
    2.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateConfig {
    #[serde(default = "default_bin_width")]
    pub bin_width_ns: f64,
    #[serde(default = "default_window")]
    pub tau_window_ns: f64,
}

fn default_bin_width() -> f64 {
    2.0
}

fn default_window() -> f64 {
    1000.0
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        CorrelateConfig {
            bin_width_ns: default_bin_width(),
            tau_window_ns: default_window(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub exclude_zero_bin: bool,
    #[serde(default)]
    pub free_baseline: bool,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub duration_ns: f64,
    pub dt_ns: f64,
    #[serde(default = "default_chunk")]
    pub chunk_samples: usize,
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    /// Enables the streaming intensity-g2 oracle tap on the first detector's
    /// port, up to this lag.
    #[serde(default)]
    pub intensity_oracle_max_lag_ns: Option<f64>,
}

fn default_chunk() -> usize {
    1 << 20
}

fn default_out_dir() -> String {
    "out".to_string()
}

/// Which cascade output a detector watches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputPort {
    A,
    B,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.laser_params()?.validate()?;
        let cascade = self.cascade_spec()?;
        cascade.validate()?;
        if self.detectors.is_empty() {
            return Err(Error::Config("at least one detector is required".into()));
        }
        for (i, det) in self.detectors.iter().enumerate() {
            parse_port(&det.port)?;
            self.detector_params(i)?.validate()?;
        }
        if !(self.run.duration_ns > 0.0) {
            return Err(Error::NonPositiveDuration(self.run.duration_ns));
        }
        if !(self.run.dt_ns > 0.0) {
            return Err(Error::Config(format!(
                "run.dt_ns must be > 0, got {}",
                self.run.dt_ns
            )));
        }
        if self.run.chunk_samples == 0 {
            return Err(Error::Config("run.chunk_samples must be > 0".into()));
        }
        // dt must land every delay within half a sample (always true for the
        // nearest multiple; recorded per stage in the cascade report)
        for stage in &cascade.stages {
            let (_, err) = stage.delay_samples(self.run.dt_ns)?;
            debug_assert!(err.abs() <= self.run.dt_ns / 2.0 + 1e-12);
        }
        Ok(())
    }

    pub fn laser_params(&self) -> Result<LaserParams> {
        let p = &self.laser.polarization;
        Ok(LaserParams {
            mean_amplitude: self.laser.mean_amplitude,
            coherence_time_ns: self.laser.coherence_time_ns,
            center_wavelength_nm: self.laser.center_wavelength_nm,
            coherent: self.laser.coherent,
            seed: derive_seed(self.run.seed, "laser"),
            polarization: Jones::new(Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3])),
        })
    }

    pub fn cascade_spec(&self) -> Result<CascadeSpec> {
        let forward_port = match self.cascade.forward_port.to_ascii_lowercase().as_str() {
            "a" => ForwardPort::A,
            "b" => ForwardPort::B,
            "both" => ForwardPort::Both,
            other => {
                return Err(Error::Config(format!(
                    "cascade.forward_port must be 'a', 'b' or 'both', got '{other}'"
                )))
            }
        };
        let mut stages = Vec::with_capacity(self.cascade.stages.len());
        for (i, sc) in self.cascade.stages.iter().enumerate() {
            let delay_ns = match (sc.delay_ns, sc.fiber_length_m, sc.group_index) {
                (Some(d), None, None) => d,
                (None, Some(l), Some(n)) => delay_from_fiber(l, n)?,
                _ => {
                    return Err(Error::Config(format!(
                        "stage {i}: give either delay_ns or both fiber_length_m and group_index"
                    )))
                }
            };
            let mut static_phase = sc.static_phase_rad;
            if sc.carrier_phase_from_wavelength {
                // f = c / lambda; phase = 2 pi f delay mod 2 pi
                let f_per_ns = crate::cascade::SPEED_OF_LIGHT_M_PER_NS
                    / (self.laser.center_wavelength_nm * 1e-9);
                static_phase += ((f_per_ns * delay_ns) % 1.0) * std::f64::consts::TAU;
            }
            stages.push(StageSpec {
                delay_ns,
                short_arm_transmission: sc.short_arm_transmission,
                delayed_arm_transmission: sc.delayed_arm_transmission,
                static_phase_rad: static_phase,
                rotation: JonesMatrix::rotation(sc.polarization_rotation_rad),
            });
        }
        Ok(CascadeSpec {
            stages,
            forward_port,
        })
    }

    pub fn detector_port(&self, index: usize) -> Result<OutputPort> {
        parse_port(&self.detectors[index].port)
    }

    pub fn detector_params(&self, index: usize) -> Result<DetectorParams> {
        let dc = self
            .detectors
            .get(index)
            .ok_or_else(|| Error::Config(format!("no detector {index}")))?;
        Ok(DetectorParams {
            mean_rate_hz: dc.mean_rate_hz,
            dead_time_ns: dc.dead_time_ns,
            dark_rate_hz: dc.dark_rate_hz,
            timestamp_resolution_ns: dc.timestamp_resolution_ns,
            seed: derive_seed(self.run.seed, &format!("detector.{index}")),
            detector_id: index as u32,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.run.out_dir)
    }

    /// Resolved config as TOML, for the run manifest.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# serialization failed: {e}"))
    }
}

fn parse_port(s: &str) -> Result<OutputPort> {
    match s.to_ascii_lowercase().as_str() {
        "a" => Ok(OutputPort::A),
        "b" => Ok(OutputPort::B),
        other => Err(Error::Config(format!(
            "detector port must be 'a' or 'b', got '{other}'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[laser]
coherence_time_ns = 135.0

[[cascade.stages]]
delay_ns = 495.0

[[detectors]]
mean_rate_hz = 5e5

[[detectors]]
mean_rate_hz = 5e5

[run]
duration_ns = 1e6
dt_ns = 2.0
seed = 42
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.cascade.stages.len(), 1);
        assert_eq!(cfg.correlate.bin_width_ns, 2.0);
        assert_eq!(cfg.run.chunk_samples, 1 << 20);
        let spec = cfg.cascade_spec().unwrap();
        assert_eq!(spec.forward_port, ForwardPort::B);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("dt_ns = 2.0", "dt_ns = 2.0\nbogus_key = 1");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key"), "message: {msg}");
    }

    #[test]
    fn sub_seeds_are_derived_and_distinct() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let laser = cfg.laser_params().unwrap();
        let d0 = cfg.detector_params(0).unwrap();
        let d1 = cfg.detector_params(1).unwrap();
        assert_ne!(laser.seed, d0.seed);
        assert_ne!(d0.seed, d1.seed);
        let again = cfg.detector_params(0).unwrap();
        assert_eq!(d0.seed, again.seed);
    }

    #[test]
    fn fiber_length_stage_converted() {
        let text = MINIMAL.replace(
            "delay_ns = 495.0",
            "fiber_length_m = 100.0\ngroup_index = 1.4845",
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let spec = cfg.cascade_spec().unwrap();
        assert!((spec.stages[0].delay_ns - 495.2).abs() < 0.05);
    }

    #[test]
    fn stage_needs_exactly_one_delay_source() {
        let text = MINIMAL.replace(
            "delay_ns = 495.0",
            "delay_ns = 495.0\nfiber_length_m = 100.0\ngroup_index = 1.4845",
        );
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn bad_port_rejected() {
        let text = MINIMAL.replace(
            "mean_rate_hz = 5e5\n\n[run]",
            "mean_rate_hz = 5e5\nport = \"c\"\n\n[run]",
        );
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn manifest_roundtrip() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back.run.seed, cfg.run.seed);
        assert_eq!(back.detectors.len(), cfg.detectors.len());
    }
}
