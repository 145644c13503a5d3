use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sgf::config::{GridConfig, RunConfig, SolveConfig};
use sgf::estimate::{emax_with_count, sigma_g, smooth_field, SmoothingConfig, WindowShape, DEFAULT_FLOOR_FRACTION, DEFAULT_N_CAP};
use sgf::geometry::Domain;
use sgf::io::{read_field, sha256_hex, write_field, OutputEntry, RunManifest};
use sgf::params::{plan, recommended_dt};
use sgf::pipeline::{exact_field, run_estimate, run_solve};
use sgf::{Error, Result};

#[derive(Parser)]
#[command(name = "sgf", version, about = "Stochastic Green's function estimation with random-walker swarms")]
struct Cli {
    /// Run config (TOML), or a run manifest (JSON) to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Square,
    Circular,
}

impl From<ShapeArg> for WindowShape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Square => WindowShape::Square,
            ShapeArg::Circular => WindowShape::Circular,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a swarm and write one field per snapshot plus a manifest.
    Estimate,
    /// Write exact Green's functions on the configured grid.
    Reference,
    /// Area-average a field file.
    Smooth {
        #[arg(long)]
        input: PathBuf,
        /// Exact field used to choose the window.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Fixed half-width in cells.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, value_enum, default_value = "square")]
        shape: ShapeArg,
        #[arg(long, default_value_t = DEFAULT_N_CAP)]
        n_cap: usize,
    },
    /// Report e_max and mean absolute deviation between two field files.
    Compare {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        exact: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FLOOR_FRACTION)]
        floor: f64,
    },
    /// Evaluate the convolution solution from a solve config.
    Solve,
    /// Print a time-step and swarm-size plan.
    Params {
        #[arg(long)]
        dx: f64,
        #[arg(long)]
        dy: f64,
        #[arg(long)]
        d0: f64,
        /// Target early-time capture variation.
        #[arg(long)]
        target: Option<f64>,
    },
}

fn need_config(cli: &Cli) -> Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| Error::config("--config", "this command needs --config"))
}

fn load_run(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(need_config(cli)?)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn estimate(cli: &Cli) -> Result<()> {
    let cfg = load_run(cli)?;
    let run = run_estimate(&cfg)?;
    let dir = &cli.out_dir;
    let mut outputs = Vec::new();
    let mut report = Vec::new();
    for (i, s) in run.snapshots.iter().enumerate() {
        let extra = json!({
            "window": s.window,
            "emax": s.emax_raw,
            "sigma_g": s.sigma_raw,
            "masked_cells": s.masked_cells,
        });
        outputs.push(write_field(dir, &format!("field_{i:03}"), &s.raw, extra)?);
        if let Some(sm) = &s.smoothed {
            let extra = json!({ "emax": s.emax_smoothed, "sigma_g": s.sigma_smoothed });
            outputs.push(write_field(dir, &format!("field_{i:03}_smoothed"), sm, extra)?);
        }
        if let Some(r) = &s.reference {
            outputs.push(write_field(dir, &format!("reference_{i:03}"), r, json!({}))?);
        }
        report.push(json!({
            "time": s.label,
            "tau": s.tau,
            "window": s.window,
            "emax_raw": s.emax_raw,
            "emax_smoothed": s.emax_smoothed,
            "sigma_raw": s.sigma_raw,
            "sigma_smoothed": s.sigma_smoothed,
        }));
    }
    let audit_text = serde_json::to_string(&run.audit).map_err(|e| Error::Parse(e.to_string()))? + "\n";
    std::fs::write(dir.join("audit.json"), &audit_text)?;
    outputs.push(OutputEntry {
        file: "audit.json".into(),
        sha256: sha256_hex(audit_text.as_bytes()),
    });
    let mut snapshot = cfg.clone();
    snapshot.threads = None;
    let a = &run.audit;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config: serde_json::to_value(&snapshot).map_err(|e| Error::Parse(e.to_string()))?,
        parameters: json!({
            "n_walkers": cfg.swarm.n_walkers,
            "dt": cfg.time.dt,
            "shards": cfg.swarm.shards,
            "respawn": cfg.swarm.respawn,
            "ledger_scope": cfg.swarm.ledger_scope,
            "reorder_interval": cfg.swarm.reorder_interval,
            "bridge_correction": cfg.swarm.bridge_correction,
            "cell_area": run.snapshots.first().map(|s| s.raw.geometry.cell_area()),
            "final_alive": a.alive.last(),
            "final_weight": a.total_weight.last(),
            "absorbed": a.absorbed.iter().sum::<usize>(),
            "splits": a.splits.iter().sum::<usize>(),
            "bridge_absorptions": a.bridge_absorptions,
        }),
        outputs,
    };
    let path = manifest.write(dir)?;
    print_json(&json!({ "manifest": path, "snapshots": report }));
    Ok(())
}

fn reference(cli: &Cli) -> Result<()> {
    let cfg = load_run(cli)?;
    let GridConfig::Fixed { extents, nx, ny } = cfg.grid else {
        return Err(Error::config("grid.mode", "reference fields need a fixed grid"));
    };
    let g = sgf::estimate::GridGeometry::new(extents[0], extents[1], extents[2], extents[3], nx, ny)?;
    let domain = cfg.domain.to_domain()?;
    let sched = cfg.schedule()?;
    let mut files = Vec::new();
    for (i, (&label, &tau)) in sched.labels.iter().zip(&sched.elapsed).enumerate() {
        if tau <= 0.0 {
            return Err(Error::config("time.snapshots", "reference fields need elapsed time > 0"));
        }
        let f = exact_field(&cfg, &domain, g, tau, label)?;
        files.push(write_field(&cli.out_dir, &format!("reference_{i:03}"), &f, json!({}))?);
    }
    print_json(&json!({ "outputs": files }));
    Ok(())
}

fn smooth(cli: &Cli, input: &Path, reference: Option<&Path>, window: Option<usize>, shape: ShapeArg, n_cap: usize) -> Result<()> {
    let field = read_field(input)?;
    let domain = match &cli.config {
        Some(p) => RunConfig::load(p)?.domain.to_domain()?,
        None => Domain::unbounded(),
    };
    let exact = reference.map(read_field).transpose()?;
    let sc = SmoothingConfig {
        shape: shape.into(),
        n_cap,
        reference: exact.as_ref(),
        fixed: window,
    };
    let o = smooth_field(&field, &sc, &domain)?;
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field");
    let entry = write_field(&cli.out_dir, &format!("{stem}_smoothed"), &o.field, json!({ "scores": o.scores }))?;
    print_json(&json!({ "window": o.window, "output": entry }));
    Ok(())
}

fn compare(estimate: &Path, exact: &Path, floor: f64) -> Result<()> {
    let a = read_field(estimate)?;
    let b = read_field(exact)?;
    let (e, n) = emax_with_count(&a, &b, floor)?;
    let s = sigma_g(&a, &b)?;
    print_json(&json!({ "emax": e, "sigma_g": s, "masked_cells": n }));
    Ok(())
}

fn solve(cli: &Cli) -> Result<()> {
    let cfg = SolveConfig::load(need_config(cli)?)?;
    let (points, field) = run_solve(&cfg)?;
    let mut out = json!({
        "points": points.iter().map(|(x, v)| json!({ "x": x, "eta": v })).collect::<Vec<_>>(),
    });
    if let Some(f) = field {
        let e = write_field(&cli.out_dir, "solution", &f, json!({}))?;
        out["output"] = json!(e);
    }
    print_json(&out);
    Ok(())
}

fn params(dx: f64, dy: f64, d0: f64, target: Option<f64>) -> Result<()> {
    match target {
        Some(t) => print_json(&serde_json::to_value(plan(dx, dy, d0, t)?).expect("json")),
        None => {
            let dt = recommended_dt(dx * dy, d0)?;
            print_json(&json!({ "dx": dx, "dy": dy, "da": dx * dy, "dt": dt }));
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate => estimate(cli),
        Command::Reference => reference(cli),
        Command::Smooth {
            input,
            reference,
            window,
            shape,
            n_cap,
        } => smooth(cli, input, reference.as_deref(), *window, *shape, *n_cap),
        Command::Compare {
            estimate,
            exact,
            floor,
        } => compare(estimate, exact, *floor),
        Command::Solve => solve(cli),
        Command::Params { dx, dy, d0, target } => params(*dx, *dy, *d0, *target),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
