use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rtcbf::sim::{fmt_sig, run_scenario, ScenarioConfig, SimError, SimLog, Summary};

#[derive(Parser, Debug)]
#[command(name = "rtcbf", version, about = "Rate-tunable control barrier function simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Adaptive,
    Fixed,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write log.csv and summary.json.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the adaptation switch of the config.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Run adaptive and fixed slopes over a range of one scalar.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// `start:stop:step`, inclusive of `stop` when it lies on the grid.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

enum CliError {
    Config(String),
    Io(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => CliError::Config(m),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

fn write_outputs(dir: &Path, log: &SimLog) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    log.write_csv(fs::File::create(dir.join("log.csv"))?)?;
    write_summary(&dir.join("summary.json"), &log.summary())
}

fn write_summary(path: &Path, s: &Summary) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(s).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Grid `a, a + step, …` up to `b`, with `floor((b − a)/step) + 1` points.
fn parse_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Config(format!("range must be start:stop:step, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (a, b, step) = (v[0], v[1], v[2]);
    if !a.is_finite() || !b.is_finite() || step.is_nan() || step <= 0.0 || b < a {
        return Err(CliError::Config(format!("range needs step > 0 and stop >= start, got '{spec}'")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| a + i as f64 * step).collect())
}

fn run(config: &Path, out: &Path, seed: Option<u64>, mode: Option<Mode>) -> Result<bool, CliError> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(m) = mode {
        cfg.adaptation.enabled = matches!(m, Mode::Adaptive);
    }
    let log = run_scenario(&cfg)?;
    write_outputs(out, &log)?;
    let s = log.summary();
    println!("{}: {}{}", cfg.name, s.status, s.t_fail.map(|t| format!(" at t = {}", fmt_sig(t))).unwrap_or_default());
    Ok(log.completed())
}

fn sweep(config: &Path, axis: &str, range: &str, jobs: Option<usize>, out: &Path) -> Result<(), CliError> {
    let base = load(config)?;
    let points = parse_range(range)?;
    let mut configs = Vec::with_capacity(points.len());
    for &p in &points {
        let mut c = base.clone();
        c.set_axis(axis, p)?;
        configs.push(c);
    }
    fs::create_dir_all(out.join("points"))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().map_err(|e| CliError::Io(e.to_string()))?;
    let results: Vec<Result<(Summary, Summary), CliError>> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut pair = Vec::with_capacity(2);
                for (enabled, tag) in [(true, "adaptive"), (false, "fixed")] {
                    let mut c = c.clone();
                    c.adaptation.enabled = enabled;
                    let s = run_scenario(&c)?.summary();
                    write_summary(&out.join("points").join(format!("{i:04}_{tag}.json")), &s)?;
                    pair.push(s);
                }
                let fixed = pair.pop().expect("two runs");
                Ok((pair.pop().expect("two runs"), fixed))
            })
            .collect()
    });
    let mut w = csv::Writer::from_path(out.join("sweep.csv")).map_err(|e| CliError::Io(e.to_string()))?;
    let header = [axis, "t_fail", "status", "t_fail_fixed", "status_fixed"];
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    let horizon = base.horizon;
    for (p, r) in points.iter().zip(results) {
        let (rt, fixed) = r?;
        let row = [fmt_sig(*p), fmt_sig(rt.t_fail.unwrap_or(horizon)), rt.status, fmt_sig(fixed.t_fail.unwrap_or(horizon)), fixed.status];
        w.write_record(&row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush()?;
    println!("{}: {} points written to {}", base.name, points.len(), out.join("sweep.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RTCBF_LOG_LEVEL", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { config, out, seed, mode } => run(&config, &out, seed, mode),
        Command::Sweep { config, axis, range, jobs, out } => sweep(&config, &axis, &range, jobs, &out).map(|_| true),
        Command::Validate { config } => load(&config).map(|c| {
            println!("{}: ok", c.name);
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_range;

    #[test]
    fn range_counts() {
        assert_eq!(parse_range("-1.95:3.0:0.05").ok().unwrap().len(), 100);
        assert_eq!(parse_range("0:1:0.5").ok().unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("0:0.9:0.5").ok().unwrap().len(), 2);
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("a:b").is_err());
    }
}
