//! Command-line driver: simulation, correlation, fitting and the closed-form
//! tools, all reading the structured config file with flag overrides.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error, 3 delay
//! validator failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use pseudothermal::config::ExperimentConfig;
use pseudothermal::correlate::{cross_correlate, read_histogram_csv, write_histogram_csv};
use pseudothermal::detect::{read_timestamps, sidecar_path, write_timestamps, TimestampStream};
use pseudothermal::error::{Error, Result};
use pseudothermal::experiment::{run_experiment, StreamEngine, VERSION};
use pseudothermal::fit::{fit_bunching_with, write_fit_report, FitOptions};
use pseudothermal::theory::{power_budget, predict_g2, validate_delays, TheoryParams};

#[derive(Parser)]
#[command(
    name = "pseudothermal",
    version,
    about = "Simulate photon-bunched pseudothermal light from a laser and a Mach-Zehnder cascade"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the config's run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Timestamp file encoding for simulate output and correlate input.
    #[arg(long, global = true, value_enum, default_value_t = Format::Binary)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Little-endian u64 nanoseconds, no header.
    Binary,
    /// One integer nanosecond value per line.
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the field/cascade/detector simulation and write timestamp files.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Histogram coincidences between two timestamp files.
    Correlate {
        a: PathBuf,
        b: PathBuf,
        /// Bin width in ns.
        #[arg(long, default_value_t = 2.0)]
        bin: f64,
        /// Correlation window in ns (each side).
        #[arg(long, default_value_t = 1000.0)]
        window: f64,
        /// Output CSV path (default: <out-dir>/histogram.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the bunching model to a histogram CSV.
    Fit {
        histogram: PathBuf,
        #[arg(long)]
        exclude_zero_bin: bool,
        #[arg(long)]
        free_baseline: bool,
        /// Output report path (default: <out-dir>/fit_report.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the ideal g2 prediction table for n interferometer stages.
    Theory {
        #[arg(long)]
        n: usize,
        /// Coherence time in ns.
        #[arg(long = "tau-c")]
        tau_c: f64,
        /// Largest tabulated delay in ns (default 3 tau_c).
        #[arg(long = "tau-max")]
        tau_max: Option<f64>,
    },
    /// Check delay separation conditions against the coherence time.
    ValidateDelays {
        /// Coherence time in ns (falls back to the config laser).
        #[arg(long = "tau-c")]
        tau_c: Option<f64>,
        /// Comma-separated delays in ns (falls back to the config cascade).
        #[arg(long, value_delimiter = ',')]
        delays: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Conversion-efficiency budget of a cascade.
    PowerBudget {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated short-arm amplitude transmissions.
        #[arg(long = "short-t", value_delimiter = ',')]
        short_t: Vec<f64>,
        /// Comma-separated delayed-arm amplitude transmissions.
        #[arg(long = "delayed-t", value_delimiter = ',')]
        delayed_t: Vec<f64>,
    },
    /// Simulate, correlate, fit and persist everything.
    FullRun {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(if err.is_validation() { 1 } else { 2 });
        }
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.run.out_dir = dir.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = load_config(config, &cli)?;
            let engine = StreamEngine::new(&cfg)?;
            let result = engine.run()?;
            let dir = cfg.out_dir();
            std::fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
            for stream in &result.streams {
                let path = dir.join(format!("det{}.ts", stream.detector_id));
                match cli.format {
                    Format::Binary => write_timestamps(stream, &path)?,
                    Format::Csv => write_timestamps_csv(stream, &path)?,
                }
                println!("wrote {} ({} events)", path.display(), stream.len());
            }
            let report_path = dir.join("cascade_report.txt");
            std::fs::write(&report_path, result.cascade_report.to_string())
                .map_err(|e| Error::file(&report_path, e))?;
            let manifest_path = dir.join("manifest.txt");
            let manifest = format!(
                "# pseudothermal run manifest\nversion = \"{VERSION}\"\n\n{}",
                cfg.to_toml_string()
            );
            std::fs::write(&manifest_path, manifest).map_err(|e| Error::file(&manifest_path, e))?;
            if let Some(oracle) = &result.oracle {
                let path = dir.join("oracle.csv");
                write_histogram_csv(oracle, &path)?;
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
        Command::Correlate {
            a,
            b,
            bin,
            window,
            out,
        } => {
            let sa = read_stream(a, cli.format)?;
            let sb = read_stream(b, cli.format)?;
            let hist = cross_correlate(&sa, &sb, *bin, *window)?;
            let path = out
                .clone()
                .unwrap_or_else(|| out_dir(&cli).join("histogram.csv"));
            write_histogram_csv(&hist, &path)?;
            println!(
                "wrote {} ({} bins, {} pairs)",
                path.display(),
                hist.n_bins(),
                hist.total_pairs
            );
            Ok(0)
        }
        Command::Fit {
            histogram,
            exclude_zero_bin,
            free_baseline,
            out,
        } => {
            let hist = read_histogram_csv(histogram)?;
            let fit = fit_bunching_with(
                &hist,
                FitOptions {
                    exclude_zero_bin: *exclude_zero_bin,
                    free_baseline: *free_baseline,
                    ..Default::default()
                },
            )?;
            let path = out
                .clone()
                .unwrap_or_else(|| out_dir(&cli).join("fit_report.txt"));
            write_fit_report(&fit, &path)?;
            print!("{fit}");
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Theory { n, tau_c, tau_max } => {
            if !(*tau_c > 0.0) {
                return Err(Error::Config(format!("--tau-c must be > 0, got {tau_c}")));
            }
            let params = TheoryParams::ideal(*n, *tau_c);
            let tau_max = tau_max.unwrap_or(3.0 * tau_c);
            println!("# ideal bunching prediction, n = {n}, tau_c = {tau_c} ns");
            println!("tau_ns,g2");
            let steps = 12usize;
            for k in 0..=steps {
                let tau = tau_max * k as f64 / steps as f64;
                println!("{:.3},{:.6}", tau, predict_g2(&params, tau));
            }
            Ok(0)
        }
        Command::ValidateDelays {
            tau_c,
            delays,
            config,
        } => {
            let (tau_c, delays) = match (tau_c, delays.is_empty(), config) {
                (Some(t), false, _) => (*t, delays.clone()),
                (maybe_t, _, Some(path)) => {
                    let cfg = load_config(path, &cli)?;
                    let spec = cfg.cascade_spec()?;
                    (
                        maybe_t.unwrap_or(cfg.laser.coherence_time_ns),
                        spec.delays_ns(),
                    )
                }
                _ => {
                    return Err(Error::Config(
                        "give --tau-c and --delays, or --config".into(),
                    ))
                }
            };
            let report = validate_delays(&TheoryParams::new(tau_c, delays))?;
            print!("{report}");
            Ok(if report.all_ok() { 0 } else { 3 })
        }
        Command::PowerBudget {
            config,
            short_t,
            delayed_t,
        } => {
            let cascade = match config {
                Some(path) => load_config(path, &cli)?.cascade_spec()?,
                None => {
                    if delayed_t.is_empty() || short_t.len() != delayed_t.len() {
                        return Err(Error::Config(
                            "give --config, or matching --short-t and --delayed-t lists".into(),
                        ));
                    }
                    let stages = short_t
                        .iter()
                        .zip(delayed_t)
                        .map(|(&ts, &td)| {
                            let mut s = pseudothermal::cascade::StageSpec::new(1.0);
                            s.short_arm_transmission = ts;
                            s.delayed_arm_transmission = td;
                            s
                        })
                        .collect();
                    pseudothermal::cascade::CascadeSpec::new(stages)
                }
            };
            cascade.validate()?;
            print!("{}", power_budget(&cascade));
            Ok(0)
        }
        Command::FullRun { config } => {
            let cfg = load_config(config, &cli)?;
            let outputs = run_experiment(&cfg)?;
            for p in &outputs.timestamp_paths {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", outputs.histogram_path.display());
            println!("wrote {}", outputs.fit_path.display());
            println!("wrote {}", outputs.manifest_path.display());
            print!("{}", outputs.fit);
            if !outputs.validation.all_ok() {
                eprintln!("warning: delay validation failed; see validation.txt");
            }
            Ok(0)
        }
    }
}

fn read_stream(path: &Path, format: Format) -> Result<TimestampStream> {
    match format {
        Format::Binary => read_timestamps(path),
        Format::Csv => read_timestamps_csv(path),
    }
}

fn write_timestamps_csv(stream: &TimestampStream, path: &Path) -> Result<()> {
    let mut body = String::with_capacity(stream.len() * 12);
    for &t in &stream.events_ns {
        body.push_str(&t.to_string());
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| Error::file(path, e))?;
    // identical sidecar to the binary format
    let meta = format!(
        "duration_ns = {}\ntimestamp_resolution_ns = {}\ndetector_id = {}\nseed = {}\n",
        stream.duration_ns, stream.resolution_ns, stream.detector_id, stream.seed
    );
    std::fs::write(sidecar_path(path), meta).map_err(|e| Error::file(path, e))
}

fn read_timestamps_csv(path: &Path) -> Result<TimestampStream> {
    let binary = read_timestamps_meta_only(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let t: u64 = line.parse().map_err(|e| {
            Error::Config(format!("{}:{}: bad timestamp: {e}", path.display(), i + 1))
        })?;
        if let Some(&prev) = events.last() {
            if t <= prev {
                return Err(Error::UnsortedTimestamps(events.len()));
            }
        }
        events.push(t);
    }
    Ok(TimestampStream {
        events_ns: events,
        ..binary
    })
}

/// Sidecar fields with an empty event list, shared by both readers.
fn read_timestamps_meta_only(path: &Path) -> Result<TimestampStream> {
    // reuse the sidecar parser by reading a zero-length payload
    let meta_path = sidecar_path(path);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::file(&meta_path, e))?;
    let mut stream = TimestampStream {
        events_ns: Vec::new(),
        duration_ns: 0.0,
        resolution_ns: 1.0,
        detector_id: 0,
        seed: 0,
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}: expected 'key = value'",
                meta_path.display()
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "duration_ns" => stream.duration_ns = parse_num(&meta_path, key, value)?,
            "timestamp_resolution_ns" => stream.resolution_ns = parse_num(&meta_path, key, value)?,
            "detector_id" => stream.detector_id = parse_num(&meta_path, key, value)? as u32,
            "seed" => stream.seed = parse_num(&meta_path, key, value)? as u64,
            other => {
                return Err(Error::Config(format!(
                    "{}: unknown key '{other}'",
                    meta_path.display()
                )))
            }
        }
    }
    Ok(stream)
}

fn parse_num(path: &Path, key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|e| Error::Config(format!("{}: bad value for {key}: {e}", path.display())))
}
