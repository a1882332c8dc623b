//! Subcommands of the `expsplit` tool. Each returns the process exit status.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use expsplit::config::{Config, Overrides, ProblemConfig, SmoothingSection};
use expsplit::harness::{convergence_study, measure_smoothing, single_run};
use expsplit::propagators::{WaveDirichlet, WaveSpec};
use expsplit::registry::{self, Entry, EntryKind};
use expsplit::Error;

pub mod selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_STUDY_FAILED: i32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "expsplit", version, about = "Exponential Runge-Kutta integrators and convergence studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List shipped problems and studies.
    List {
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Integrate one trajectory.
    Run(Common),
    /// Run a convergence study.
    Convergence(Common),
    /// Measure the smoothing exponent of a propagator.
    Smoothing {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        r: Option<String>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 12)]
        count: usize,
    },
    /// Quick internal consistency checks.
    Selftest,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shipped problem or study id, used when no config file is given.
    #[arg(long = "id")]
    pub id: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            h: self.h,
            horizon: self.horizon,
            s: self.s,
            grid: self.grid,
            seed: self.seed,
        }
    }

    pub fn load(&self) -> Result<Config, Error> {
        let cfg = match (&self.config, &self.id) {
            (Some(path), None) => Config::load(path)?,
            (None, Some(id)) => registry::find(id)
                .ok_or_else(|| Error::Config(format!("unknown id {id:?}; see `expsplit list`")))?
                .config()?,
            (Some(_), Some(_)) => return Err(Error::Config("give --config or --id, not both".into())),
            (None, None) => return Err(Error::Config("one of --config or --id is required".into())),
        };
        cfg.with_overrides(&self.overrides())
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

pub fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::List { format } => {
            print!("{}", cmd_list(registry::REGISTRY, format));
            EXIT_OK
        }
        Command::Run(c) => cmd_run(&c),
        Command::Convergence(c) => cmd_convergence(&c),
        Command::Smoothing {
            common,
            p,
            r,
            t_min,
            t_max,
            count,
        } => cmd_smoothing(&common, p, r, t_min, t_max, count),
        Command::Selftest => selftest::run(),
    }
}

/// Alphabetised listing of `entries`.
pub fn cmd_list(entries: &[Entry], format: Format) -> String {
    let mut sorted: Vec<&Entry> = entries.iter().collect();
    sorted.sort_by_key(|e| e.id);
    match format {
        Format::Structured => to_json(&sorted),
        Format::Csv => {
            if sorted.is_empty() {
                return String::new();
            }
            let mut out = String::from("id,kind,example\n");
            for e in sorted {
                let kind = match e.kind {
                    EntryKind::Problem => "problem",
                    EntryKind::Study => "study",
                };
                let _ = writeln!(out, "{},{kind},\"{}\"", e.id, e.example);
            }
            out
        }
    }
}

pub fn cmd_run(c: &Common) -> i32 {
    let cfg = match c.load() {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    let outcome = (|| {
        let problem = cfg.build_problem()?;
        let scheme = cfg.build_scheme()?;
        let settings = cfg.run_settings()?;
        let (record, summary) = single_run(&problem, &scheme, &settings)?;
        let energy_drift = match cfg.problem {
            ProblemConfig::WaveDirichlet { n } => {
                let wave = WaveDirichlet::new(WaveSpec {
                    n,
                    horizon: cfg.run.horizon,
                })?;
                let e0 = wave.modal_energies(&problem.u0);
                let e1 = wave.modal_energies(&record.terminal);
                Some(e0.iter().zip(&e1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            }
            _ => None,
        };
        Ok::<_, Error>((record, summary, energy_drift))
    })();
    let (record, summary, energy_drift) = match outcome {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };

    let id = cfg.id();
    let mut doc = serde_json::to_value(&summary).expect("summary serialises");
    doc["modal_energy_drift"] = serde_json::json!(energy_drift);
    let written = (|| {
        write_file(&c.out, &format!("{id}-summary.json"), &to_json(&doc))?;
        match c.format {
            Format::Csv => {
                let mut csv = String::from("t");
                for i in 0..record.terminal.len() {
                    let _ = write!(csv, ",u{i}");
                }
                csv.push('\n');
                for (t, u) in record.series.times.iter().zip(&record.series.states) {
                    let _ = write!(csv, "{t:e}");
                    for x in u.iter() {
                        let _ = write!(csv, ",{x:e}");
                    }
                    csv.push('\n');
                }
                write_file(&c.out, &format!("{id}-trajectory.csv"), &csv)
            }
            Format::Structured => {
                let traj = serde_json::json!({
                    "times": record.series.times,
                    "states": record.series.states.iter().map(|s| s.to_vec()).collect::<Vec<_>>(),
                    "steps": record.steps,
                });
                write_file(&c.out, &format!("{id}-trajectory.json"), &to_json(&traj))
            }
        }
    })();
    if let Err(e) = written {
        return fail(&e);
    }

    println!("{id}: h = {:e}, N = {}, kappa = {:.4e}, L = {:.4e}", summary.h, summary.steps, summary.kappa, summary.lipschitz);
    if let Some(err) = summary.linear_error {
        println!("terminal error vs e^(TA) u0: {err:e}");
    }
    if let Some(d) = energy_drift {
        println!("modal energy drift: {d:e}");
    }
    match &summary.failure {
        None => {
            println!("status: ok ({} fixed-point iterations)", summary.iterations);
            EXIT_OK
        }
        Some(e) => fail(e),
    }
}

pub fn cmd_convergence(c: &Common) -> i32 {
    let cfg = match c.load() {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    let report = match cfg.build_plan(c.jobs).and_then(|plan| convergence_study(&plan)) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let id = &report.id;
    let csv = report.to_csv();
    let written = write_file(&c.out, &format!("{id}.json"), &to_json(&report)).and_then(|_| {
        match c.format {
            Format::Csv => write_file(&c.out, &format!("{id}.csv"), &csv),
            Format::Structured => Ok(()),
        }
    });
    if let Err(e) = written {
        return fail(&e);
    }
    print!("{csv}");
    println!(
        "predicted order {:.3}, median EOC {}, seed {}",
        report.predicted_order,
        report
            .median_eoc
            .map(|m| format!("{m:.4}"))
            .unwrap_or_else(|| "n/a".into()),
        cfg.run.seed
    );
    if report.exact_linear {
        println!("exact linear");
    }
    if report.passed {
        println!("{id}: PASS");
        EXIT_OK
    } else {
        for r in &report.reasons {
            eprintln!("  {r}");
        }
        println!("{id}: FAIL");
        EXIT_STUDY_FAILED
    }
}

fn parse_exponent(s: &str) -> Result<f64, Error> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => other
            .parse()
            .map_err(|_| Error::Config(format!("invalid exponent {s:?}"))),
    }
}

pub fn cmd_smoothing(
    c: &Common,
    p: Option<String>,
    r: Option<String>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    count: usize,
) -> i32 {
    let run = || -> Result<_, Error> {
        let cfg = c.load()?;
        let mut section = cfg.smoothing.clone().unwrap_or(SmoothingSection {
            p: 2.0,
            r: 2.0,
            times: None,
            t_min: Some(1e-4),
            t_max: Some(1e-2),
            count,
        });
        if let Some(p) = p {
            section.p = parse_exponent(&p)?;
        }
        if let Some(r) = r {
            section.r = parse_exponent(&r)?;
        }
        if t_min.is_some() || t_max.is_some() {
            section.times = None;
            section.t_min = t_min.or(section.t_min);
            section.t_max = t_max.or(section.t_max);
            section.count = count;
        }
        let times = section.times()?;
        let prop = cfg.build_propagator()?;
        let report = measure_smoothing(prop.as_ref(), section.p, section.r, &times, cfg.run.seed)?;
        Ok((cfg.id(), report))
    };
    let (id, report) = match run() {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    let csv = report.to_csv();
    let written = write_file(&c.out, &format!("{id}-smoothing.json"), &to_json(&report))
        .and_then(|_| match c.format {
            Format::Csv => write_file(&c.out, &format!("{id}-smoothing.csv"), &csv),
            Format::Structured => Ok(()),
        });
    if let Err(e) = written {
        return fail(&e);
    }
    print!("{csv}");
    if report.excluded > 0 {
        println!("{} under-resolved rows excluded from the fit", report.excluded);
    }
    match report.slope {
        Some(s) => {
            println!("fitted slope {s:.4}");
            EXIT_OK
        }
        None => {
            eprintln!("error: fewer than two resolved times, no slope fitted");
            EXIT_STUDY_FAILED
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_listing() {
        assert_eq!(cmd_list(&[], Format::Csv), "");
        assert_eq!(cmd_list(&[], Format::Structured).trim(), "[]");
    }

    #[test]
    fn listing_is_sorted() {
        let text = cmd_list(registry::REGISTRY, Format::Csv);
        let ids: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        for id in ["heat-torus-1d", "ou-1d", "wave-dirichlet-1d"] {
            assert!(ids.contains(&id));
        }
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!(parse_exponent("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_exponent("1.5").unwrap(), 1.5);
        assert!(parse_exponent("x").is_err());
    }
}
