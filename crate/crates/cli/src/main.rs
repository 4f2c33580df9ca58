#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sta_link::config::{render, KeyValues};
use sta_link::fmt::sig;
use sta_link::hamiltonian::{DissipationRates, LeakageMode};
use sta_link::protocol::{round_trip, run, Direction, EmissionDuration, ProtocolConfig, RunResult, SUMMARY_HEADER};
use sta_link::pulse::{DressingKind, DressingProfile, MixingAngleProfile};
use sta_link::sweep::{run_sweep, Execution, SweepGrid};
use sta_link::validate::{run_checks, Check};

#[derive(Parser)]
#[command(name = "sta-link", version, about = "Shortcut-to-adiabaticity state transfer between two optomechanical nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one transfer and write trajectory.csv, summary.csv and summary.json.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Map infidelity over a (v, g3) grid.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Dump sampled control waveforms as CSV.
    #[command(allow_negative_numbers = true)]
    Pulses(PulsesArgs),
    /// Run the built-in self-checks.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    DoubleSta,
    StaStirap,
    Reverse,
    RoundTrip,
}

#[derive(Args)]
#[group(multiple = false)]
struct Losses {
    /// No dissipation (default).
    #[arg(long)]
    lossless: bool,
    /// Reference dissipation γ1 = 1e-3, γ2 = 1e-4, γ3 = 1e-3.
    #[arg(long)]
    dissipative: bool,
}

#[derive(Args)]
struct Overrides {
    /// Protocol speed for both nodes, in units of g0.
    #[arg(long)]
    v: Option<f64>,
    /// Cavity–waveguide coupling |G3| for both nodes.
    #[arg(long)]
    g3: Option<f64>,
    /// Emission-stage length: `fixed` (30/v) or `leak-time` (15/v + 8π/G3²).
    #[arg(long)]
    tl_convention: Option<EmissionDuration>,
    /// Waveguide loss bookkeeping: `lumped` or `damped`.
    #[arg(long)]
    leakage_mode: Option<LeakageMode>,
    /// Flat `key = value` file applied before the flags above.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    losses: Losses,
}

impl Overrides {
    fn key_values(&self) -> Result<KeyValues> {
        let mut kv = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                KeyValues::parse(&text).map_err(|e| usage(e.into()))?
            }
            None => KeyValues::default(),
        };
        if let Some(v) = self.v {
            kv.insert("v", v.to_string());
        }
        if let Some(g) = self.g3 {
            kv.insert("g3", g.to_string());
        }
        if let Some(c) = self.tl_convention {
            kv.insert("tl_convention", c.to_string());
        }
        if let Some(m) = self.leakage_mode {
            kv.insert("leakage_mode", m.to_string());
        }
        let rates = if self.losses.dissipative {
            Some(DissipationRates::reference())
        } else if self.losses.lossless {
            Some(DissipationRates::lossless())
        } else {
            None
        };
        if let Some(r) = rates {
            kv.insert("gamma1", r.gamma1.to_string());
            kv.insert("gamma2", r.gamma2.to_string());
            kv.insert("gamma3", r.gamma3.to_string());
        }
        Ok(kv)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "double-sta")]
    mode: Mode,
    #[command(flatten)]
    overrides: Overrides,
    /// Trajectory sample spacing.
    #[arg(long)]
    sample_dt: Option<f64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    v_min: Option<f64>,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    v_steps: Option<usize>,
    #[arg(long)]
    g3_min: Option<f64>,
    #[arg(long)]
    g3_max: Option<f64>,
    #[arg(long)]
    g3_steps: Option<usize>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, env = "STA_LINK_JOBS", default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PulseKind {
    Bare,
    Satd,
    SatdKappa,
}

#[derive(Args)]
struct PulsesArgs {
    #[arg(long, value_enum, default_value = "satd-kappa")]
    kind: PulseKind,
    #[arg(long, default_value_t = 2.62)]
    v: f64,
    #[arg(long, default_value_t = 0.5)]
    g3: f64,
    #[arg(long, default_value_t = 1.0)]
    g0: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// oracle, decoupling, adiabatic-limit or all.
    #[arg(long, default_value = "all")]
    check: Check,
}

/// Marks an error as a usage problem (exit status 2).
#[derive(Debug)]
struct Usage(anyhow::Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    Usage(e).into()
}

fn core(e: sta_link::Error) -> anyhow::Error {
    match e {
        sta_link::Error::InvalidParameter { .. } | sta_link::Error::Config { .. } => usage(e.into()),
        other => other.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Pulses(a) => pulses(a),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let mut cfg = match args.mode {
        Mode::StaStirap => ProtocolConfig::sta_stirap(),
        Mode::Reverse => ProtocolConfig { direction: Direction::Reverse, ..ProtocolConfig::default() },
        Mode::DoubleSta | Mode::RoundTrip => ProtocolConfig::default(),
    };
    let mut kv = args.overrides.key_values()?;
    if let Some(dt) = args.sample_dt {
        kv.insert("sample_dt", dt.to_string());
    }
    cfg.apply(&mut kv).map_err(core)?;
    kv.finish().map_err(core)?;
    cfg.validate().map_err(core)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut summary_csv = format!("{SUMMARY_HEADER}\n");
    let summary_json;
    match args.mode {
        Mode::RoundTrip => {
            let rt = round_trip(&cfg).map_err(core)?;
            let mut trajectory = rt.forward.trajectory.clone();
            let offset = rt.forward.total_duration;
            let mut back = rt.reverse.trajectory.clone();
            for s in &mut back.samples {
                s.t += offset;
            }
            trajectory.extend_stitched(back);
            fs::write(args.out.join("trajectory.csv"), trajectory.to_csv_string())?;
            for r in [&rt.forward, &rt.reverse] {
                summary_csv.push_str(&r.summary_record());
                summary_csv.push('\n');
            }
            summary_json = json!({
                "forward": run_json(&rt.forward),
                "reverse": run_json(&rt.reverse),
                "composite": rt.composite,
            });
            print_run(&rt.forward);
            print_run(&rt.reverse);
            println!("round-trip fidelity {}", sig(rt.composite));
        }
        _ => {
            let r = run(&cfg).map_err(core)?;
            fs::write(args.out.join("trajectory.csv"), r.trajectory.to_csv_string())?;
            summary_csv.push_str(&r.summary_record());
            summary_csv.push('\n');
            summary_json = run_json(&r);
            print_run(&r);
        }
    }
    fs::write(args.out.join("summary.csv"), summary_csv)?;
    fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&summary_json)? + "\n")?;
    fs::write(args.out.join("config.txt"), render(&cfg.key_values()))?;
    Ok(ExitCode::SUCCESS)
}

fn run_json(r: &RunResult) -> serde_json::Value {
    json!({
        "mode": r.config.mode_label(),
        "config": r.config,
        "F_l": r.f_l,
        "conversion_survival": r.conversion_survival,
        "receive_fidelity": r.receive_fidelity,
        "F_e": r.f_e,
        "durations": r.durations,
        "t_total": r.total_duration,
    })
}

fn print_run(r: &RunResult) {
    println!(
        "{}: F_e = {:.6} (F_l = {:.6}), t_total = {:.4} [stages {}]",
        r.config.mode_label(),
        r.f_e,
        r.f_l,
        r.total_duration,
        r.durations.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(", ")
    );
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut grid = SweepGrid::default();
    let mut kv = args.overrides.key_values()?;
    for (key, value) in [("v_min", args.v_min), ("v_max", args.v_max), ("g3_min", args.g3_min), ("g3_max", args.g3_max)] {
        if let Some(x) = value {
            kv.insert(key, x.to_string());
        }
    }
    for (key, value) in [("v_steps", args.v_steps), ("g3_steps", args.g3_steps)] {
        if let Some(n) = value {
            kv.insert(key, n.to_string());
        }
    }
    grid.apply(&mut kv).map_err(core)?;
    kv.finish().map_err(core)?;
    grid.template.validate().map_err(core)?;

    let jobs = if args.jobs == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { args.jobs };
    let result = run_sweep(&grid, Execution::Parallel { jobs }).map_err(core)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("sweep.csv"), result.to_csv_string())?;
    fs::write(args.out.join("provenance.txt"), result.provenance())?;
    for row in result.failures() {
        eprintln!("warning: point v = {}, g3 = {} failed: {}", row.v, row.g3, row.error.as_deref().unwrap_or(""));
    }
    println!("{} points written to {}", result.rows.len(), args.out.join("sweep.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn pulses(args: PulsesArgs) -> Result<ExitCode> {
    if !(args.dt > 0.0) {
        return Err(usage(anyhow::anyhow!("--dt must be positive, got {}", args.dt)));
    }
    let kind = match args.kind {
        PulseKind::Bare => DressingKind::Bare,
        PulseKind::Satd => DressingKind::Satd,
        PulseKind::SatdKappa => DressingKind::SatdKappa,
    };
    let mixing = MixingAngleProfile::new(args.v).map_err(core)?;
    let profile = DressingProfile::new(kind, args.g0, args.g3, mixing).map_err(core)?;
    let mut text = String::from("t,G1c,G2c,mu,theta\n");
    let interior = (0..).map(|k| mixing.t_start + k as f64 * args.dt).take_while(|t| mixing.t_end - t > 1e-9 * args.dt);
    for t in interior.chain([mixing.t_end]) {
        let s = profile.sample(t);
        text.push_str(&format!("{},{},{},{},{}\n", sig(t), sig(s.g1), sig(s.g2), sig(s.mu), sig(s.theta)));
    }
    write_output(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn validate(args: ValidateArgs) -> Result<ExitCode> {
    let reports = run_checks(args.check).map_err(core)?;
    for r in &reports {
        println!("{r}");
    }
    Ok(if reports.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
