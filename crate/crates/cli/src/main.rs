use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoitail_core::evt::{fit_mle, fit_moments};
use aoitail_core::output::{read_excess, write_fit_header, write_fit_row, write_run, write_sweep, TraceWriter};
use aoitail_core::sim::{run_observed, Plan, Preset, Silent};
use aoitail_core::{sweep, Error, Policy, Result, RunSummary, SimParams, SweepAxis};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aoitail",
    version,
    about = "Slotted V2V simulator with tail-aware AoI power control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation, or every run of a preset.
    Run(RunArgs),
    /// Run independent simulations along one parameter axis.
    Sweep(SweepArgs),
    /// Fit a generalized Pareto distribution to an excess dump.
    Fit(FitArgs),
}

#[derive(Args)]
struct Common {
    /// TOML parameter file; unset keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    slots: Option<u64>,
    /// proposed, uniform or fixed:WATTS
    #[arg(long, default_value = "proposed")]
    policy: String,
    /// sizes, compare, gaps or rates
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Also write per-slot trace.csv, positions.csv and assignments.csv.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// arrival_rate, pair_gap or pairs
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV whose first column holds the excess samples.
    #[arg(long)]
    input: PathBuf,
    /// moments or mle
    #[arg(long, default_value = "moments")]
    method: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn params(c: &Common) -> Result<(SimParams, Option<Preset>)> {
    let preset = c.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    let mut p = match (&c.config, preset) {
        (Some(path), _) => SimParams::from_toml_file(path)?,
        (None, Some(pr)) => pr.params(),
        (None, None) => SimParams::default(),
    };
    if let Some(s) = c.seed {
        p.seed = s;
    }
    if let Some(n) = c.slots {
        p.slots = n;
    }
    p.validate()?;
    Ok((p, preset))
}

fn report(label: &str, s: &RunSummary) {
    let fit = match &s.fit {
        Some(f) => format!(
            "sigma={:.4} xi={:.4} n={} ks={:.4}",
            f.params.sigma, f.params.xi, f.n, f.ks
        ),
        None => format!("none ({})", s.fit_error.as_deref().unwrap_or("")),
    };
    let l = s.age_bound.check();
    println!(
        "{label}: mean_power={:.5} W mean_aoi={} worst_aoi={} P(aoi>d)={:.3e} P(event)={:.3e} age_bound={} gpd: {fit}",
        s.mean_power,
        s.mean_aoi.map_or("-".into(), |a| format!("{a:.5}")),
        s.worst_aoi.map_or("-".into(), |a| format!("{a:.5}")),
        s.violation_prob,
        s.event_prob,
        if l.holds { "holds" } else { "violated" },
    );
}

fn run_one(p: &SimParams, policy: Policy, dir: &Path, trace: bool) -> Result<()> {
    let s = if trace {
        let mut w = TraceWriter::create(dir)?;
        let s = run_observed(p, policy, &mut w);
        w.finish()?;
        s?
    } else {
        run_observed(p, policy, &mut Silent)?
    };
    write_run(dir, &s)?;
    report(&policy.label(), &s);
    Ok(())
}

fn run_sweep(p: &SimParams, policy: Policy, axis: SweepAxis, values: &[f64], out: &Path) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let points = sweep(p, policy, axis, values);
    std::fs::create_dir_all(out)?;
    for pt in &points {
        match &pt.outcome {
            Ok(s) => {
                write_run(&out.join(format!("{}_{}", axis.label(), pt.value)), s)?;
                report(&format!("{}={}", axis.label(), pt.value), s);
            }
            Err(e) => eprintln!("{}={}: {e}", axis.label(), pt.value),
        }
    }
    write_sweep(
        &mut csv::Writer::from_path(out.join("sweep.csv"))?,
        axis,
        &points,
        p.age_limit,
    )
}

fn run_preset(p: &SimParams, preset: Preset, out: &Path, trace: bool) -> Result<()> {
    match preset.plan() {
        Plan::Compare { policies } => {
            for policy in policies {
                run_one(p, policy, &out.join(policy.label()), trace)?;
            }
            Ok(())
        }
        Plan::Sweep { axis, values } => run_sweep(p, Policy::Proposed, axis, &values, out),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => {
            let (p, preset) = params(&a.common)?;
            match preset {
                Some(pr) => run_preset(&p, pr, &a.common.out, a.trace),
                None => run_one(&p, a.common.policy.parse()?, &a.common.out, a.trace),
            }
        }
        Command::Sweep(a) => {
            let (p, preset) = params(&a.common)?;
            match (a.axis.as_deref(), preset) {
                (Some(axis), _) => run_sweep(&p, a.common.policy.parse()?, axis.parse()?, &a.values, &a.common.out),
                (None, Some(pr)) => run_preset(&p, pr, &a.common.out, false),
                (None, None) => Err(Error::Config("sweep needs --axis and --values, or --preset".into())),
            }
        }
        Command::Fit(a) => {
            let samples = read_excess(&a.input)?;
            let f = match a.method.as_str() {
                "moments" => fit_moments(&samples)?,
                "mle" => fit_mle(&samples)?,
                m => {
                    return Err(Error::Config(format!(
                        "unknown fit method `{m}` (expected moments or mle)"
                    )))
                }
            };
            let mut w = csv::Writer::from_writer(std::io::stdout());
            write_fit_header(&mut w)?;
            write_fit_row(&mut w, &f)?;
            w.flush()?;
            if let Some(dir) = a.out {
                std::fs::create_dir_all(&dir)?;
                let mut w = csv::Writer::from_path(dir.join("gpd_fit.csv"))?;
                write_fit_header(&mut w)?;
                write_fit_row(&mut w, &f)?;
                w.flush()?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
