use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use metric_gff::green::{cache, green_infinite, GreenMode, KilledSystem, LatticeConstants};
use metric_gff::harness::{self, ExperimentConfig, RunOptions};
use metric_gff::laws::{self, LevelSchedule};
use metric_gff::{BoxSpec, GffError, Result};

#[derive(Parser)]
#[command(name = "metric-gff", version, about = "Gaussian free field level sets on metric graphs of Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leave `wall_s` empty so reruns produce identical files.
    #[arg(long, global = true)]
    no_wall_time: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config and write CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a closed-form law and print JSON.
    Analytic {
        #[command(subcommand)]
        law: Law,
    },
    /// Green's function at the origin of a Dirichlet box.
    Green {
        #[arg(long)]
        d: usize,
        #[arg(long = "N")]
        n: usize,
        /// Cache directory for the full Green table.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
    },
    /// Run the martingale check and optionally export one replica's trace.
    Martingale {
        #[arg(long)]
        config: PathBuf,
        /// JSON-lines trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Replica whose trace is exported.
        #[arg(long, default_value_t = 0)]
        replica: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Dense,
    Banded,
}

#[derive(Subcommand)]
enum Law {
    /// P(τ <= T) for τ the hitting time of m t − b.
    DriftHit { m: f64, b: f64, t: f64 },
    /// 1 − e^{−2bh}.
    Survival { h: f64, b: f64 },
    /// f(x, y).
    F { x: f64, y: f64 },
    /// g(x, y).
    G { x: f64, y: f64 },
    /// ∂f/∂y (x, y).
    FDy { x: f64, y: f64 },
    /// Supercritical limit at level −h; σ² defaults to G(0,0) of Z^3.
    Supercritical {
        h: f64,
        #[arg(long)]
        sigma2: Option<f64>,
    },
    /// Level h_N = c · shape(N) and its ratio to every schedule.
    Window {
        #[arg(value_enum)]
        schedule: ScheduleArg,
        c: f64,
        n: f64,
    },
    /// σ_d² and c_d.
    Constants { d: usize },
    /// Bridge opening probability 1 − e^{−(a−h)(b−h)/d}.
    EdgeOpen { a: f64, b: f64, h: f64, d: usize },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    InvSqrt,
    SqrtLog,
    SqrtLogLogLog,
}

impl From<ScheduleArg> for LevelSchedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::InvSqrt => LevelSchedule::InvSqrt,
            ScheduleArg::SqrtLog => LevelSchedule::SqrtLog,
            ScheduleArg::SqrtLogLogLog => LevelSchedule::SqrtLogLogLog,
        }
    }
}

fn load_config(path: &PathBuf, cli: &Cli) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GffError::config("config", format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.workers = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json(v: serde_json::Value) -> Result<()> {
    let mut w = output(None)?;
    serde_json::to_writer_pretty(&mut w, &v)?;
    writeln!(w)?;
    Ok(())
}

fn analytic(law: &Law) -> Result<()> {
    let v = match *law {
        Law::DriftHit { m, b, t } => json!({"law": "drift_hit_cdf", "value": laws::drift_hit_cdf(m, b, t)?}),
        Law::Survival { h, b } => json!({"law": "survival", "value": laws::survival_prob_negative_drift(h, b)?}),
        Law::F { x, y } => {
            json!({"law": "f", "value": laws::f_bound(x, y)?, "complement": laws::f_bound_complement(x, y)?})
        }
        Law::G { x, y } => json!({"law": "g", "value": laws::g_bound(x, y)?}),
        Law::FDy { x, y } => json!({"law": "f_dy", "value": laws::f_bound_dy(x, y)?}),
        Law::Supercritical { h, sigma2 } => {
            let s2 = match sigma2 {
                Some(s) => s,
                None => LatticeConstants::new(3)?.sigma2,
            };
            json!({"law": "supercritical_limit", "h": h, "sigma2": s2, "value": laws::supercritical_limit(h, s2)?})
        }
        Law::Window { schedule, c, n } => {
            serde_json::to_value(laws::critical_window_envelopes(schedule.into(), c, n)?)?
        }
        Law::Constants { d } => serde_json::to_value(LatticeConstants::new(d)?)?,
        Law::EdgeOpen { a, b, h, d } => {
            if d == 0 {
                return Err(GffError::domain("d must be positive"));
            }
            json!({"law": "edge_open_prob", "value": metric_gff::sampler::edge_open_prob(a, b, h, d)})
        }
    };
    print_json(v)
}

fn green(d: usize, n: usize, table: Option<&PathBuf>, mode: ModeArg) -> Result<()> {
    let spec = BoxSpec::new(d, n)?;
    let mode = match mode {
        ModeArg::Auto => GreenMode::Auto,
        ModeArg::Dense => GreenMode::Dense,
        ModeArg::Banded => GreenMode::Banded,
    };
    let o = spec.origin();
    let g00 = match table {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            cache::load_or_build(dir, &spec, mode)?.get(o, o)
        }
        None if n == 0 => 0.0,
        None => KilledSystem::dirichlet(&spec, &[])?.column(o)[o.0],
    };
    let mut v = json!({"d": d, "N": n, "G_N(0,0)": g00});
    if d >= 3 {
        v["G(0,0)"] = json!(green_infinite(d, &vec![0; d])?);
    } else {
        v["log_law_leading_term"] = json!(2.0 / std::f64::consts::PI * (n as f64).ln());
    }
    print_json(v)
}

fn run(cli: &Cli) -> Result<()> {
    let opts = RunOptions { wall_time: !cli.no_wall_time };
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = load_config(config, cli)?;
            let records = harness::run_with(&cfg, opts)?;
            harness::write_csv(&records, output(cfg.output.as_ref())?)
        }
        Command::Analytic { law } => analytic(law),
        Command::Green { d, n, table, mode } => green(*d, *n, table.as_ref(), *mode),
        Command::Martingale { config, trace, replica } => {
            let mut cfg = load_config(config, cli)?;
            cfg.experiment = harness::Experiment::MartingaleCheck;
            let records = harness::run_with(&cfg, opts)?;
            harness::write_csv(&records, output(cfg.output.as_ref())?)?;
            if let Some(path) = trace {
                if *replica >= cfg.samples {
                    return Err(GffError::config("replica", format!("{replica} >= samples {}", cfg.samples)));
                }
                let mut one = cfg.clone();
                one.samples = replica + 1;
                let traces = harness::martingale_traces(&one)?;
                traces[*replica].write_jsonl(BufWriter::new(File::create(path)?))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
