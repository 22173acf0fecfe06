//! Closed-form predictions, delay-set validation and the power budget.

use std::fmt;

use crate::cascade::CascadeSpec;
use crate::error::{Error, Result};

/// Maximum stage count for subset-sum enumeration (2^n sums).
pub const MAX_VALIDATED_STAGES: usize = 24;

#[derive(Clone, Debug)]
pub struct TheoryParams {
    pub n_stages: usize,
    pub tau_c_ns: f64,
    /// May be empty when only predictions are needed; the delay validator
    /// requires one delay per stage.
    pub delays_ns: Vec<f64>,
}

impl TheoryParams {
    pub fn new(tau_c_ns: f64, delays_ns: Vec<f64>) -> Self {
        TheoryParams {
            n_stages: delays_ns.len(),
            tau_c_ns,
            delays_ns,
        }
    }

    pub fn ideal(n_stages: usize, tau_c_ns: f64) -> Self {
        TheoryParams {
            n_stages,
            tau_c_ns,
            delays_ns: Vec::new(),
        }
    }
}

/// Ideal bunching curve for n phase-independent loops:
/// g2(tau) = 1 + (1 - 2^-n) * exp(-2|tau|/tau_c).
pub fn predict_g2(params: &TheoryParams, tau_ns: f64) -> f64 {
    1.0 + bunching_excess(params.n_stages) * (-2.0 * tau_ns.abs() / params.tau_c_ns).exp()
}

/// Peak excess g2(0) - 1 = 1 - 2^-n.
pub fn bunching_excess(n_stages: usize) -> f64 {
    1.0 - 0.5f64.powi(n_stages.min(i32::MAX as usize) as i32)
}

/// A subset of the delay set, encoded as a bitmask over stage indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub fn describe(&self) -> String {
        if self.0 == 0 {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for i in 0..32 {
            if self.0 & (1 << i) != 0 {
                parts.push(format!("D{}", i + 1));
            }
        }
        parts.join("+")
    }
}

/// Outcome of the two delay-separation checks.
#[derive(Clone, Debug)]
pub struct DelayValidation {
    pub tau_c_ns: f64,
    pub delays_ns: Vec<f64>,
    /// Check (a): successive gaps, delta_n - delta_{n-1} >= tau_c with
    /// delta_0 = 0.
    pub successive_ok: bool,
    /// Smallest successive gap minus tau_c (negative when violated).
    pub successive_margin_ns: f64,
    pub successive_violations: Vec<(usize, f64)>,
    /// Check (b): all 2^n subset sums pairwise separated by >= tau_c; needed
    /// for full phase independence of every delayed copy.
    pub subset_ok: bool,
    pub min_subset_gap_ns: f64,
    pub closest_pair: (SubsetMask, SubsetMask),
    /// Violating pairs, capped at 32 entries.
    pub subset_violations: Vec<(SubsetMask, SubsetMask, f64)>,
}

impl DelayValidation {
    pub fn all_ok(&self) -> bool {
        self.successive_ok && self.subset_ok
    }
}

impl fmt::Display for DelayValidation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# delay validation")?;
        writeln!(f, "tau_c_ns = {}", self.tau_c_ns)?;
        writeln!(
            f,
            "delays_ns = {}",
            self.delays_ns
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )?;
        writeln!(f, "successive_ok = {}", self.successive_ok)?;
        writeln!(f, "successive_margin_ns = {:.6}", self.successive_margin_ns)?;
        for (i, margin) in &self.successive_violations {
            writeln!(f, "successive_violation = stage {i} margin {margin:.6} ns")?;
        }
        writeln!(f, "subset_ok = {}", self.subset_ok)?;
        writeln!(f, "min_subset_gap_ns = {:.6}", self.min_subset_gap_ns)?;
        writeln!(
            f,
            "closest_pair = {} vs {}",
            self.closest_pair.0.describe(),
            self.closest_pair.1.describe()
        )?;
        for (a, b, gap) in &self.subset_violations {
            writeln!(
                f,
                "subset_violation = {} vs {} gap {:.6} ns{}",
                a.describe(),
                b.describe(),
                gap,
                if *gap == 0.0 {
                    " (exactly degenerate)"
                } else {
                    ""
                }
            )?;
        }
        Ok(())
    }
}

/// Check the successive-gap condition and the stronger subset-sum separation.
pub fn validate_delays(params: &TheoryParams) -> Result<DelayValidation> {
    let n = params.n_stages;
    if params.delays_ns.len() != n {
        return Err(Error::Config(format!(
            "validator needs one delay per stage: n_stages = {n}, got {} delays",
            params.delays_ns.len()
        )));
    }
    if n > MAX_VALIDATED_STAGES {
        return Err(Error::TooManyStages(n));
    }
    for &d in &params.delays_ns {
        if !(d > 0.0) {
            return Err(Error::InvalidStage(format!(
                "delays must be positive, got {d}"
            )));
        }
    }
    let tau_c = params.tau_c_ns;

    // check (a)
    let mut successive_violations = Vec::new();
    let mut successive_margin = f64::INFINITY;
    let mut prev = 0.0;
    for (i, &d) in params.delays_ns.iter().enumerate() {
        let margin = d - prev - tau_c;
        if margin < successive_margin {
            successive_margin = margin;
        }
        if margin < 0.0 {
            successive_violations.push((i + 1, margin));
        }
        prev = d;
    }

    // check (b): enumerate and sort all subset sums
    let count = 1usize << n;
    let mut sums: Vec<(f64, u32)> = Vec::with_capacity(count);
    for mask in 0..count as u32 {
        let mut s = 0.0;
        for (i, &d) in params.delays_ns.iter().enumerate() {
            if mask & (1 << i) != 0 {
                s += d;
            }
        }
        sums.push((s, mask));
    }
    sums.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut min_gap = f64::INFINITY;
    let mut closest = (SubsetMask(0), SubsetMask(0));
    let mut subset_violations = Vec::new();
    for w in sums.windows(2) {
        let gap = w[1].0 - w[0].0;
        if gap < min_gap {
            min_gap = gap;
            closest = (SubsetMask(w[0].1), SubsetMask(w[1].1));
        }
        if gap < tau_c && subset_violations.len() < 32 {
            subset_violations.push((SubsetMask(w[0].1), SubsetMask(w[1].1), gap));
        }
    }
    if !min_gap.is_finite() {
        min_gap = 0.0;
    }
    Ok(DelayValidation {
        tau_c_ns: tau_c,
        delays_ns: params.delays_ns.clone(),
        successive_ok: successive_violations.is_empty(),
        successive_margin_ns: if successive_margin.is_finite() {
            successive_margin
        } else {
            0.0
        },
        successive_violations,
        subset_ok: subset_violations.is_empty(),
        min_subset_gap_ns: min_gap,
        closest_pair: closest,
        subset_violations,
    })
}

/// Per-stage entry of the conversion budget.
#[derive(Clone, Debug)]
pub struct StageBudget {
    pub short_transmission: f64,
    pub delayed_transmission: f64,
    /// Mean power transmission of the stage: (t_s^2 + t_d^2) / 2. With arms
    /// balanced to the lossier delayed arm this is t_d^2.
    pub power_transmission: f64,
    /// Interference visibility 2 t_s t_d / (t_s^2 + t_d^2); 1 when balanced.
    pub visibility: f64,
    pub balanced: bool,
}

/// Conversion efficiency from laser light to photon-bunched light, both
/// output ports together.
#[derive(Clone, Debug)]
pub struct ConversionReport {
    pub stages: Vec<StageBudget>,
    pub total_efficiency: f64,
    pub all_balanced: bool,
}

impl fmt::Display for ConversionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# power budget")?;
        writeln!(f, "total_efficiency = {:.6}", self.total_efficiency)?;
        writeln!(f, "all_balanced = {}", self.all_balanced)?;
        for (i, s) in self.stages.iter().enumerate() {
            writeln!(
                f,
                "stage.{i}.power_transmission = {:.6}",
                s.power_transmission
            )?;
            writeln!(f, "stage.{i}.visibility = {:.6}", s.visibility)?;
            writeln!(f, "stage.{i}.balanced = {}", s.balanced)?;
        }
        Ok(())
    }
}

pub fn power_budget(cascade: &CascadeSpec) -> ConversionReport {
    let mut stages = Vec::with_capacity(cascade.stages.len());
    let mut total = 1.0;
    let mut all_balanced = true;
    for stage in &cascade.stages {
        let ts = stage.short_arm_transmission;
        let td = stage.delayed_arm_transmission;
        let power = (ts * ts + td * td) / 2.0;
        let visibility = if ts * ts + td * td > 0.0 {
            2.0 * ts * td / (ts * ts + td * td)
        } else {
            0.0
        };
        let balanced = ts == td;
        all_balanced &= balanced;
        total *= power;
        stages.push(StageBudget {
            short_transmission: ts,
            delayed_transmission: td,
            power_transmission: power,
            visibility,
            balanced,
        });
    }
    ConversionReport {
        stages,
        total_efficiency: total,
        all_balanced,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::StageSpec;

    #[test]
    fn prediction_values() {
        assert_eq!(predict_g2(&TheoryParams::ideal(0, 135.0), 50.0), 1.0);
        assert_eq!(predict_g2(&TheoryParams::ideal(3, 135.0), 0.0), 1.875);
        let g = predict_g2(&TheoryParams::ideal(1, 135.0), 135.0);
        assert!((g - (1.0 + 0.5 * (-2.0f64).exp())).abs() < 1e-12);
        assert!((g - 1.0677).abs() < 1e-4);
    }

    #[test]
    fn prediction_monotonicity_and_limit() {
        for n in 0..12 {
            let low = predict_g2(&TheoryParams::ideal(n, 135.0), 30.0);
            let high = predict_g2(&TheoryParams::ideal(n + 1, 135.0), 30.0);
            assert!(high > low);
        }
        let p = TheoryParams::ideal(3, 135.0);
        let mut prev = predict_g2(&p, 0.0);
        for k in 1..50 {
            let g = predict_g2(&p, k as f64 * 10.0);
            assert!(g < prev);
            prev = g;
        }
        // 2^-n underflows: the limit is reached exactly
        assert_eq!(predict_g2(&TheoryParams::ideal(2000, 135.0), 0.0), 2.0);
    }

    #[test]
    fn lab_delays_pass_both_checks() {
        let params = TheoryParams::new(135.0, vec![495.0, 921.0, 2476.0]);
        let v = validate_delays(&params).unwrap();
        assert!(v.successive_ok);
        assert!(v.subset_ok);
        assert!(
            (v.min_subset_gap_ns - 426.0).abs() < 1e-9,
            "{}",
            v.min_subset_gap_ns
        );
    }

    #[test]
    fn arithmetic_delays_fail_subset_check() {
        // delays {tau_c, 2 tau_c, 3 tau_c}: successive gaps all equal tau_c,
        // but D3 coincides exactly with D1 + D2
        let tau_c = 135.0;
        let params = TheoryParams::new(tau_c, vec![tau_c, 2.0 * tau_c, 3.0 * tau_c]);
        let v = validate_delays(&params).unwrap();
        assert!(v.successive_ok);
        assert!(!v.subset_ok);
        assert_eq!(v.min_subset_gap_ns, 0.0);
        let degenerate = v.subset_violations.iter().find(|(_, _, g)| *g == 0.0);
        assert!(degenerate.is_some());
        let (a, b, _) = degenerate.unwrap();
        let pair = [a.describe(), b.describe()];
        assert!(pair.contains(&"D3".to_string()));
        assert!(pair.contains(&"D1+D2".to_string()));
    }

    #[test]
    fn short_single_delay_fails_successive_check() {
        let params = TheoryParams::new(135.0, vec![67.5]);
        let v = validate_delays(&params).unwrap();
        assert!(!v.successive_ok);
        assert!((v.successive_margin_ns + 67.5).abs() < 1e-9);
    }

    #[test]
    fn stage_cap_enforced() {
        let params = TheoryParams::new(1.0, (1..=25).map(|i| i as f64 * 10.0).collect());
        assert!(matches!(
            validate_delays(&params),
            Err(Error::TooManyStages(25))
        ));
    }

    #[test]
    fn budget_values() {
        let lossless = CascadeSpec::new(vec![StageSpec::new(495.0), StageSpec::new(921.0)]);
        let report = power_budget(&lossless);
        assert_eq!(report.total_efficiency, 1.0);
        assert!(report.all_balanced);
        assert_eq!(report.stages[0].visibility, 1.0);

        let mut stage = StageSpec::new(495.0);
        let t = 0.925f64.sqrt();
        stage.delayed_arm_transmission = t;
        stage.short_arm_transmission = t;
        let report = power_budget(&CascadeSpec::new(vec![stage]));
        assert!((report.total_efficiency - 0.925).abs() < 1e-12);
        assert_eq!(report.stages[0].visibility, 1.0);

        let mut stage = StageSpec::new(495.0);
        stage.delayed_arm_transmission = 0.4f64.sqrt();
        stage.short_arm_transmission = 0.4f64.sqrt();
        let report = power_budget(&CascadeSpec::new(vec![stage]));
        assert!((report.total_efficiency - 0.40).abs() < 1e-12);
    }

    #[test]
    fn imbalance_reduces_visibility() {
        let mut stage = StageSpec::new(495.0);
        stage.delayed_arm_transmission = 0.6;
        stage.short_arm_transmission = 1.0;
        let report = power_budget(&CascadeSpec::new(vec![stage]));
        assert!(!report.all_balanced);
        let expected = 2.0 * 0.6 / (1.0 + 0.36);
        assert!((report.stages[0].visibility - expected).abs() < 1e-12);
        assert!(report.stages[0].visibility < 1.0);
    }
}
