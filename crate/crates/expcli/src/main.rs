use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use uavec::agents::{self, AgentKind, Checkpoint};
use uavec::SimConfig;
use uavec_exp::{
    close_trace, export_plotdata, load_experiment, open_trace, resolve_out, run_experiment, write_plotdata,
    write_series, ExperimentSpec, Figure, SweepVar,
};

/// Experiment runner for the dual-layer UAV edge computing simulator.
///
/// Relative `--out` paths are placed under $UAVEC_OUT_ROOT when it is set.
#[derive(Parser)]
#[command(name = "uavec", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train agents and write per-episode metrics and checkpoints.
    Train(RunArgs),
    /// Roll out trained (or random) agents without exploration.
    Eval(EvalArgs),
    /// Full factorial sweep over agents, one variable, and seeds.
    Sweep(SweepArgs),
    /// Mean and std per agent and sweep value of a finished sweep.
    Export(ExportArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config path, or the built-in names `desk` and `default`.
    #[arg(long, default_value = "desk")]
    config: String,
    /// Comma-separated agents: sac, nopriority, fixeduav, dqn, random.
    #[arg(long, value_delimiter = ',', default_value = "sac")]
    agent: Vec<AgentKind>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 300)]
    episodes: usize,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Also write a per-slot JSONL trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint to evaluate; defaults to the one `train` wrote in `--out`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// luav_count, vehicle_count or huav_bandwidth (MHz).
    #[arg(long)]
    sweep: SweepVar,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Args)]
struct ExportArgs {
    /// Directory of a finished sweep.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// f3, f4 or f5; defaults to the figure matching the sweep.
    #[arg(long)]
    figure: Option<Figure>,
}

fn load_config(name: &str) -> Result<SimConfig> {
    Ok(match name {
        "desk" => SimConfig::desk(),
        "default" => SimConfig::paper_defaults(),
        path => SimConfig::load(path).with_context(|| format!("loading config {path}"))?,
    })
}

fn distinct_seeds(seeds: &[u64]) -> Result<()> {
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s.dedup();
    if seeds.is_empty() || s.len() != seeds.len() {
        bail!("--seeds must be a non-empty list of distinct integers");
    }
    Ok(())
}

fn ckpt_path(out: &Path, agent: AgentKind, seed: u64) -> PathBuf {
    out.join(format!("{agent}_seed{seed}.ckpt.json"))
}

fn train_cmd(a: RunArgs) -> Result<()> {
    let c = &a.common;
    distinct_seeds(&c.seeds)?;
    let out = resolve_out(&c.out);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for &agent in &c.agent {
        for &seed in &c.seeds {
            let mut cfg = load_config(&c.config)?;
            cfg.seed = seed;
            let scn = cfg.validate()?;
            let mut trace =
                if a.trace { Some(open_trace(&out.join(format!("trace_{agent}_seed{seed}.jsonl")))?) } else { None };
            let (trained, series) = agents::train(&scn, agent, c.episodes, seed, trace.as_mut())?;
            if let Some(t) = trace {
                close_trace(t)?;
            }
            write_series(&out.join(format!("train_{agent}_seed{seed}.csv")), &series)?;
            Checkpoint::from_agent(&trained).save(ckpt_path(&out, agent, seed))?;
            let last = series.last();
            println!(
                "{agent} seed {seed}: {} episodes, final completion {:.4}, utility {:.4}",
                series.len(),
                last.map_or(f64::NAN, |m| m.completion_rate),
                last.map_or(f64::NAN, |m| m.utility)
            );
        }
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let c = &a.common;
    distinct_seeds(&c.seeds)?;
    let out = resolve_out(&c.out);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for &agent in &c.agent {
        for &seed in &c.seeds {
            let mut cfg = load_config(&c.config)?;
            cfg.seed = seed;
            let scn = cfg.validate()?;
            let path = a.checkpoint.clone().unwrap_or_else(|| ckpt_path(&out, agent, seed));
            let mut policy = if path.exists() {
                let ck = Checkpoint::load(&path, &scn).with_context(|| format!("loading {}", path.display()))?;
                if ck.agent != agent {
                    bail!("{} holds a {} agent, not {agent}", path.display(), ck.agent);
                }
                ck.into_agent(&scn)?
            } else if agent == AgentKind::Random {
                agents::Agent::new(&scn, agent, seed)
            } else {
                bail!("no checkpoint at {}; run `train` first or pass --checkpoint", path.display());
            };
            let mut trace =
                if a.trace { Some(open_trace(&out.join(format!("evaltrace_{agent}_seed{seed}.jsonl")))?) } else { None };
            let series = agents::evaluate(&mut policy, c.episodes, seed, trace.as_mut())?;
            if let Some(t) = trace {
                close_trace(t)?;
            }
            write_series(&out.join(format!("eval_{agent}_seed{seed}.csv")), &series)?;
            let n = series.len().max(1) as f64;
            println!(
                "{agent} seed {seed}: mean completion {:.4}, utility {:.4}",
                series.iter().map(|m| m.completion_rate).sum::<f64>() / n,
                series.iter().map(|m| m.utility).sum::<f64>() / n
            );
        }
    }
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let c = &a.common;
    let spec = ExperimentSpec {
        base: load_config(&c.config)?,
        agents: c.agent.clone(),
        sweep: Some(a.sweep),
        values: a.values.clone(),
        seeds: c.seeds.clone(),
        episodes: c.episodes,
        out_dir: resolve_out(&c.out),
    };
    let rows = run_experiment(&spec, |r| {
        println!(
            "{} {}={} seed {}: completion {:.4}, utility {:.4}",
            r.agent, r.sweep, r.value, r.seed, r.completion_rate, r.utility
        )
    })?;
    println!("{} cells in {}", rows.len(), spec.results_path().display());
    Ok(())
}

fn export_cmd(a: ExportArgs) -> Result<()> {
    let dir = resolve_out(&a.out);
    let (spec, rows) = load_experiment(&dir)?;
    let figure = match (a.figure, spec.sweep) {
        (Some(f), _) => f,
        (None, Some(s)) => s.figure(),
        (None, None) => bail!("experiment has no sweep; pass --figure"),
    };
    let table = export_plotdata(&rows, figure, Some(&spec))?;
    let name = match figure {
        Figure::F3 => "plot_f3.csv",
        Figure::F4 => "plot_f4.csv",
        Figure::F5 => "plot_f5.csv",
    };
    write_plotdata(&dir.join(name), &table)?;
    println!("{} rows in {}", table.len(), dir.join(name).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Train(a) => train_cmd(a),
        Cmd::Eval(a) => eval_cmd(a),
        Cmd::Sweep(a) => sweep_cmd(a),
        Cmd::Export(a) => export_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

