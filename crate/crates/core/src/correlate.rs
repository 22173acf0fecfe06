//! g2(tau) estimation.
//!
//! Two estimators: `cross_correlate` histograms timestamp differences between
//! two detectors with a two-pointer sliding window (the measurement path),
//! and `intensity_g2_oracle` computes lagged intensity products directly from
//! a field trace (the ground-truth path used to validate the detector chain).
//!
//! Cross-correlation bins are centered on integer multiples of the bin width;
//! the tau = 0 bin spans [-w/2, +w/2). Normalization uses the edge-corrected
//! duration (duration - tau_window); the residual bias is below w/duration.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::detect::TimestampStream;
use crate::error::{Error, Result};
use crate::field::FieldTrace;

/// Binned, normalized estimate of g2(tau) with per-bin statistical errors.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationHistogram {
    pub bin_width_ns: f64,
    /// Center of the first bin.
    pub tau_min_ns: f64,
    /// Center of the last bin.
    pub tau_max_ns: f64,
    pub counts: Vec<u64>,
    pub g2: Vec<f64>,
    pub stderr: Vec<f64>,
    pub total_pairs: u64,
    pub rates_hz: (f64, f64),
    pub duration_ns: f64,
    /// Set when an input stream was empty and the normalization is undefined.
    pub degenerate: bool,
}

impl CorrelationHistogram {
    pub fn n_bins(&self) -> usize {
        self.g2.len()
    }

    /// Center of bin `i`.
    pub fn tau_at(&self, i: usize) -> f64 {
        self.tau_min_ns + i as f64 * self.bin_width_ns
    }

    /// Index of the bin centered closest to tau = 0.
    pub fn zero_bin(&self) -> usize {
        ((-self.tau_min_ns) / self.bin_width_ns).round() as usize
    }

    /// Fold a two-sided histogram onto |tau|, combining counts of bins +-k.
    pub fn fold(&self) -> CorrelationHistogram {
        let z = self.zero_bin();
        let k_max = (self.n_bins() - 1 - z).min(z);
        let mut counts = Vec::with_capacity(k_max + 1);
        let mut g2 = Vec::with_capacity(k_max + 1);
        let mut stderr = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            if k == 0 {
                counts.push(self.counts[z]);
                g2.push(self.g2[z]);
                stderr.push(self.stderr[z]);
            } else {
                let c = self.counts[z + k] + self.counts[z - k];
                counts.push(c);
                let mean = (self.g2[z + k] + self.g2[z - k]) / 2.0;
                g2.push(mean);
                stderr.push(if c > 0 { mean / (c as f64).sqrt() } else { 0.0 });
            }
        }
        CorrelationHistogram {
            bin_width_ns: self.bin_width_ns,
            tau_min_ns: 0.0,
            tau_max_ns: k_max as f64 * self.bin_width_ns,
            counts,
            g2,
            stderr,
            total_pairs: self.total_pairs,
            rates_hz: self.rates_hz,
            duration_ns: self.duration_ns,
            degenerate: self.degenerate,
        }
    }
}

/// Histogram all pair differences t_b - t_a within +-tau_window.
pub fn cross_correlate(
    a: &TimestampStream,
    b: &TimestampStream,
    bin_width_ns: f64,
    tau_window_ns: f64,
) -> Result<CorrelationHistogram> {
    if bin_width_ns <= 0.0 || bin_width_ns.fract() != 0.0 {
        return Err(Error::InvalidBinning(format!(
            "bin width must be a positive integer number of ns, got {bin_width_ns}"
        )));
    }
    let res = a.resolution_ns.max(b.resolution_ns);
    if bin_width_ns < res {
        return Err(Error::InvalidBinning(format!(
            "bin width {bin_width_ns} ns is below the timestamp resolution {res} ns"
        )));
    }
    let k_max = (tau_window_ns / bin_width_ns).floor() as i64;
    if k_max < 10 {
        return Err(Error::InvalidBinning(format!(
            "window {tau_window_ns} ns spans only {k_max} bins of {bin_width_ns} ns; need >= 10"
        )));
    }
    if (a.duration_ns - b.duration_ns).abs() > 1e-9 {
        return Err(Error::InvalidBinning(format!(
            "streams cover different durations: {} vs {} ns",
            a.duration_ns, b.duration_ns
        )));
    }
    if tau_window_ns >= a.duration_ns / 2.0 {
        return Err(Error::InvalidBinning(format!(
            "window {tau_window_ns} ns must stay below half the duration {} ns",
            a.duration_ns
        )));
    }
    check_sorted(&a.events_ns)?;
    check_sorted(&b.events_ns)?;

    let w = bin_width_ns as i64;
    let n_bins = (2 * k_max + 1) as usize;
    let mut counts = vec![0u64; n_bins];
    let degenerate = a.events_ns.is_empty() || b.events_ns.is_empty();

    if !degenerate {
        // conservative tau bounds for the pointers; exact bin test below
        let upper = k_max * w + w; // exclusive
        let lower = -upper; // inclusive
        let bs = &b.events_ns;
        let mut lo = 0usize;
        let mut hi = 0usize;
        for &ta in &a.events_ns {
            let ta = ta as i64;
            while lo < bs.len() && (bs[lo] as i64) - ta < lower {
                lo += 1;
            }
            if hi < lo {
                hi = lo;
            }
            while hi < bs.len() && (bs[hi] as i64) - ta < upper {
                hi += 1;
            }
            for &tb in &bs[lo..hi] {
                let tau = tb as i64 - ta;
                // bins centered on k*w, half-open [k*w - w/2, k*w + w/2)
                let k = (2 * tau + w).div_euclid(2 * w);
                if k.abs() <= k_max {
                    counts[(k + k_max) as usize] += 1;
                }
            }
        }
    }

    let total_pairs: u64 = counts.iter().sum();
    let n_a = a.events_ns.len() as f64;
    let n_b = b.events_ns.len() as f64;
    let effective_ns = a.duration_ns - tau_window_ns;
    let norm = if degenerate {
        0.0
    } else {
        effective_ns / (n_a * n_b * bin_width_ns)
    };
    let g2: Vec<f64> = counts.iter().map(|&c| c as f64 * norm).collect();
    let stderr: Vec<f64> = counts
        .iter()
        .zip(&g2)
        .map(|(&c, &g)| if c > 0 { g / (c as f64).sqrt() } else { 0.0 })
        .collect();
    Ok(CorrelationHistogram {
        bin_width_ns,
        tau_min_ns: -(k_max as f64) * bin_width_ns,
        tau_max_ns: k_max as f64 * bin_width_ns,
        counts,
        g2,
        stderr,
        total_pairs,
        rates_hz: (rate_of(n_a, a.duration_ns), rate_of(n_b, b.duration_ns)),
        duration_ns: a.duration_ns,
        degenerate,
    })
}

fn rate_of(n: f64, duration_ns: f64) -> f64 {
    if duration_ns > 0.0 {
        n / (duration_ns * 1e-9)
    } else {
        0.0
    }
}

fn check_sorted(events: &[u64]) -> Result<()> {
    for (i, w) in events.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::UnsortedTimestamps(i + 1));
        }
    }
    Ok(())
}

/// Streaming accumulator of lagged intensity products, used both by the
/// monolithic oracle below and by the pipeline when an oracle tap is enabled.
///
/// Per-bin errors come from splitting the stream into blocks and taking the
/// scatter of per-block estimates; block boundaries are fixed by absolute
/// sample index so results do not depend on the chunking.
pub struct IntensityCorrelator {
    max_lag: usize,
    dt_ns: f64,
    block_len: u64,
    n_blocks: usize,
    tail: Vec<f64>,
    sums: Vec<f64>,
    pair_counts: Vec<u64>,
    block_sums: Vec<f64>,
    block_pairs: Vec<u64>,
    intensity_sum: f64,
    samples_seen: u64,
    next_index: u64,
}

impl IntensityCorrelator {
    /// `expected_samples` fixes the block layout for error estimation.
    pub fn new(max_lag: usize, dt_ns: f64, expected_samples: u64) -> Self {
        let n_blocks =
            32usize.min((expected_samples / (4 * max_lag.max(1) as u64 + 4)).max(1) as usize);
        let block_len = (expected_samples / n_blocks as u64).max(1);
        IntensityCorrelator {
            max_lag,
            dt_ns,
            block_len,
            n_blocks,
            tail: Vec::new(),
            sums: vec![0.0; max_lag + 1],
            pair_counts: vec![0u64; max_lag + 1],
            block_sums: vec![0.0; (max_lag + 1) * n_blocks],
            block_pairs: vec![0u64; (max_lag + 1) * n_blocks],
            intensity_sum: 0.0,
            samples_seen: 0,
            next_index: 0,
        }
    }

    /// Feed the next chunk of intensities (must be contiguous).
    pub fn push(&mut self, intensities: &[f64]) {
        // split so no sub-chunk straddles a block boundary; keeps per-block
        // accumulation identical for any chunking
        let mut offset = 0usize;
        while offset < intensities.len() {
            let pos_in_block = (self.next_index % self.block_len) as usize;
            let room = (self.block_len as usize) - pos_in_block;
            let take = room.min(intensities.len() - offset);
            self.push_within_block(&intensities[offset..offset + take]);
            offset += take;
        }
    }

    fn push_within_block(&mut self, chunk: &[f64]) {
        let block = ((self.next_index / self.block_len) as usize).min(self.n_blocks - 1);
        let m_max = self.max_lag;
        let tail_len = self.tail.len();
        let base = block * (m_max + 1);
        // Pairs (k, k+m) are credited when sample k+m arrives, in ascending
        // order of k+m. Each product is added to the accumulators one at a
        // time so the addition sequence (and hence the float result) is
        // independent of the chunking.
        for m in 0..=m_max {
            let mut total = self.sums[m];
            let mut blk = self.block_sums[base + m];
            let mut pairs = 0u64;
            // cross part: chunk[j] pairs with tail[tail_len + j - m]
            if m > 0 && tail_len > 0 {
                let j_start = m.saturating_sub(tail_len);
                let j_end = m.min(chunk.len());
                for j in j_start..j_end {
                    let p = self.tail[tail_len + j - m] * chunk[j];
                    total += p;
                    blk += p;
                }
                pairs += j_end.saturating_sub(j_start) as u64;
            }
            // intra part: both samples in this chunk
            if chunk.len() > m {
                for j in 0..chunk.len() - m {
                    let p = chunk[j] * chunk[j + m];
                    total += p;
                    blk += p;
                }
                pairs += (chunk.len() - m) as u64;
            }
            self.sums[m] = total;
            self.block_sums[base + m] = blk;
            self.pair_counts[m] += pairs;
            self.block_pairs[base + m] += pairs;
        }
        let mut intensity_sum = self.intensity_sum;
        for &x in chunk {
            intensity_sum += x;
        }
        self.intensity_sum = intensity_sum;
        self.samples_seen += chunk.len() as u64;
        self.next_index += chunk.len() as u64;
        // retain the last max_lag samples
        if m_max > 0 {
            if chunk.len() >= m_max {
                self.tail.clear();
                self.tail.extend_from_slice(&chunk[chunk.len() - m_max..]);
            } else {
                let keep_old = (m_max - chunk.len()).min(self.tail.len());
                let drop = self.tail.len() - keep_old;
                self.tail.drain(..drop);
                self.tail.extend_from_slice(chunk);
            }
        }
    }

    pub fn finalize(self) -> Result<CorrelationHistogram> {
        if self.samples_seen == 0 || self.intensity_sum <= 0.0 {
            return Err(Error::InvalidBinning(
                "intensity oracle saw no light".to_string(),
            ));
        }
        let mean = self.intensity_sum / self.samples_seen as f64;
        let denom = mean * mean;
        let m_max = self.max_lag;
        let mut g2 = Vec::with_capacity(m_max + 1);
        let mut stderr = Vec::with_capacity(m_max + 1);
        let mut counts = Vec::with_capacity(m_max + 1);
        for m in 0..=m_max {
            let pairs = self.pair_counts[m];
            counts.push(pairs);
            let value = if pairs > 0 {
                self.sums[m] / pairs as f64 / denom
            } else {
                0.0
            };
            g2.push(value);
            // scatter of per-block estimates
            let mut block_vals = Vec::new();
            for b in 0..self.n_blocks {
                let idx = b * (m_max + 1) + m;
                if self.block_pairs[idx] > 0 {
                    block_vals.push(self.block_sums[idx] / self.block_pairs[idx] as f64 / denom);
                }
            }
            let nb = block_vals.len();
            let err = if nb >= 2 {
                let bm = block_vals.iter().sum::<f64>() / nb as f64;
                let var =
                    block_vals.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (nb - 1) as f64;
                (var / nb as f64).sqrt()
            } else {
                0.0
            };
            stderr.push(err);
        }
        Ok(CorrelationHistogram {
            bin_width_ns: self.dt_ns,
            tau_min_ns: 0.0,
            tau_max_ns: m_max as f64 * self.dt_ns,
            counts,
            g2,
            stderr,
            total_pairs: self.pair_counts.iter().sum(),
            rates_hz: (0.0, 0.0),
            duration_ns: self.samples_seen as f64 * self.dt_ns,
            degenerate: false,
        })
    }
}

/// Ground-truth g2 from lagged intensity products at every multiple of dt up
/// to `max_lag_ns`.
pub fn intensity_g2_oracle(trace: &FieldTrace, max_lag_ns: f64) -> Result<CorrelationHistogram> {
    if !(max_lag_ns > 0.0) {
        return Err(Error::InvalidBinning(format!(
            "max lag must be > 0, got {max_lag_ns}"
        )));
    }
    if max_lag_ns >= trace.duration_ns() / 10.0 {
        return Err(Error::LagTooLarge {
            lag_ns: max_lag_ns,
            trace_ns: trace.duration_ns(),
        });
    }
    let max_lag = (max_lag_ns / trace.dt_ns).round() as usize;
    let intensities = trace.intensities();
    let mut acc = IntensityCorrelator::new(max_lag, trace.dt_ns, intensities.len() as u64);
    acc.push(&intensities);
    acc.finalize()
}

/// Write a histogram as CSV with normalization metadata in comment headers.
pub fn write_histogram_csv(hist: &CorrelationHistogram, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_histogram(hist, &mut w).map_err(|e| Error::file(path, e))
}

fn write_histogram(hist: &CorrelationHistogram, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "# correlation histogram")?;
    writeln!(
        w,
        "# normalization = counts * (duration_ns - tau_window_ns) / (n_a * n_b * bin_width_ns)"
    )?;
    writeln!(w, "# bin_width_ns = {}", hist.bin_width_ns)?;
    writeln!(w, "# tau_min_ns = {}", hist.tau_min_ns)?;
    writeln!(w, "# tau_max_ns = {}", hist.tau_max_ns)?;
    writeln!(w, "# duration_ns = {}", hist.duration_ns)?;
    writeln!(w, "# rate_a_hz = {:.6}", hist.rates_hz.0)?;
    writeln!(w, "# rate_b_hz = {:.6}", hist.rates_hz.1)?;
    writeln!(w, "# total_pairs = {}", hist.total_pairs)?;
    writeln!(w, "# degenerate = {}", hist.degenerate)?;
    writeln!(w, "tau_ns,counts,g2,stderr")?;
    for i in 0..hist.n_bins() {
        writeln!(
            w,
            "{:.3},{},{:.9},{:.9}",
            hist.tau_at(i),
            hist.counts[i],
            hist.g2[i],
            hist.stderr[i]
        )?;
    }
    w.flush()
}

/// Parse a histogram CSV produced by `write_histogram_csv`.
pub fn read_histogram_csv(path: &Path) -> Result<CorrelationHistogram> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut bin_width_ns = None;
    let mut tau_min_ns = None;
    let mut duration_ns = 0.0f64;
    let mut rate_a = 0.0f64;
    let mut rate_b = 0.0f64;
    let mut degenerate = false;
    let mut counts = Vec::new();
    let mut g2 = Vec::new();
    let mut stderr = Vec::new();
    let mut header_seen = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once('=') {
                let key = key.trim();
                let value = value.trim();
                match key {
                    "bin_width_ns" => bin_width_ns = value.parse().ok(),
                    "tau_min_ns" => tau_min_ns = value.parse().ok(),
                    "duration_ns" => duration_ns = value.parse().unwrap_or(0.0),
                    "rate_a_hz" => rate_a = value.parse().unwrap_or(0.0),
                    "rate_b_hz" => rate_b = value.parse().unwrap_or(0.0),
                    "degenerate" => degenerate = value == "true",
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen && line.starts_with("tau_ns") {
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Config(format!(
                "{}: expected 4 CSV fields, got {}",
                path.display(),
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Config(format!("{}: bad number '{s}': {e}", path.display())))
        };
        counts.push(parse(fields[1])? as u64);
        g2.push(parse(fields[2])?);
        stderr.push(parse(fields[3])?);
    }
    let bin_width_ns = bin_width_ns
        .ok_or_else(|| Error::Config(format!("{}: missing bin_width_ns header", path.display())))?;
    let tau_min_ns = tau_min_ns
        .ok_or_else(|| Error::Config(format!("{}: missing tau_min_ns header", path.display())))?;
    if g2.is_empty() {
        return Err(Error::Config(format!(
            "{}: histogram has no bins",
            path.display()
        )));
    }
    let n = g2.len();
    Ok(CorrelationHistogram {
        bin_width_ns,
        tau_min_ns,
        tau_max_ns: tau_min_ns + (n - 1) as f64 * bin_width_ns,
        total_pairs: counts.iter().sum(),
        counts,
        g2,
        stderr,
        rates_hz: (rate_a, rate_b),
        duration_ns,
        degenerate,
    })
}
