use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sphereflow::archive::{self, read_archive, write_archive, LoadedArchive};
use sphereflow::certify::{analyze_checkpoints, certify, hessian_decay_monitor};
use sphereflow::config::{preset, RunConfig};
use sphereflow::flow::{continuity_residual, fitted_decay_rate, track_min_r, RATE_FIT_WINDOW};
use sphereflow::harmonics::SpectralField;
use sphereflow::report::{atlas_csv, svg_heatmap, svg_time_series, table_csv, tensors_csv};
use sphereflow::sweep::{epsilon_sweep, DEFAULT_LADDER};
use sphereflow::transport::{
    build_atlas, default_sample_points, lipschitz_measured, transport_points, TransportAtlas, VelocityTable,
};
use sphereflow::verify::{lichnerowicz_check, pushforward_from_images};
use sphereflow::{Error, Result};

/// Ricci-flow transport maps on nearly round spheres.
#[derive(Parser)]
#[command(name = "sphereflow", version)]
struct Cli {
    /// Worker threads (defaults to SPHEREFLOW_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow, solve the potentials and write a trajectory archive.
    Flow(FlowArgs),
    /// Build the transport atlas for an archive.
    Transport(TransportArgs),
    /// Emit the contraction certificate for an archive.
    Certify(CertifyArgs),
    /// Pushforward, eigenvalue, continuity and decay checks for an archive.
    Verify(ArchiveArg),
    /// Aggregate CSV tables and optional SVG figures for an archive.
    Report(ReportArgs),
    /// Amplitude ladder over a preset family.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct FlowArgs {
    /// JSON run configuration; preset flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "y20")]
    preset: String,
    /// Volume of the initial metric.
    #[arg(long = "v", default_value_t = std::f64::consts::PI * 2.0)]
    volume: f64,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long = "L", default_value_t = 32)]
    l_max: usize,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tol_conv: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    svg: bool,
    /// Archive directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct ArchiveArg {
    /// Archive directory written by `flow`.
    #[arg(long)]
    archive: PathBuf,
}

#[derive(Args)]
struct TransportArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Quasi-uniform points added to the grid nodes (defaults to the run configuration).
    #[arg(long)]
    extra: Option<usize>,
    #[arg(long)]
    ode_tol: Option<f64>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Skip the transport measurement even if an atlas exists.
    #[arg(long)]
    no_measure: bool,
    /// Output path (defaults to certificate.json inside the archive).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "y20")]
    family: String,
    #[arg(long = "v", default_value_t = std::f64::consts::PI * 2.0)]
    volume: f64,
    #[arg(long = "L", default_value_t = 32)]
    l_max: usize,
    /// Comma-separated amplitudes.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn pretty(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load(dir: &Path) -> Result<LoadedArchive> {
    read_archive(dir)
}

fn cmd_flow(args: FlowArgs) -> Result<serde_json::Value> {
    let mut cfg: RunConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str(&text)?
        }
        None => preset(&args.preset, args.volume, args.eps, args.l_max)?,
    };
    if args.dt.is_some() {
        cfg.flow.dt_init = args.dt;
    }
    if args.tol_conv.is_some() {
        cfg.flow.tol_conv = args.tol_conv;
    }
    if let Some(t) = args.t_max {
        cfg.flow.t_max = t;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.emit_svg |= args.svg;
    cfg.output_dir = Some(args.out.clone());
    cfg.validate()?;
    let run = archive::run(&cfg)?;
    let manifest_hash = write_archive(&args.out, &run)?;
    let traj = &run.trajectory;
    Ok(json!({
        "archive": args.out,
        "config_hash": cfg.hash(),
        "manifest_hash": manifest_hash,
        "checkpoints": traj.len(),
        "t_final": traj.t_final(),
        "final_residual": traj.final_residual(),
        "steps": traj.steps_taken,
        "rejections": traj.rejections,
        "events": traj.events,
    }))
}

fn cmd_transport(args: TransportArgs) -> Result<serde_json::Value> {
    let arc = load(&args.archive)?;
    let mut opts = arc.config.transport;
    if let Some(tol) = args.ode_tol {
        opts.ode_tol = tol;
    }
    let extra = args.extra.unwrap_or(arc.config.extra_points);
    let points = default_sample_points(arc.trajectory.grid(), extra, arc.config.seed);
    let mut atlas = build_atlas(&arc.trajectory, &points, &opts)?;
    atlas.manifest_ref = Some(arc.manifest_hash.clone());
    let hash = arc.config.hash();
    write(&args.archive.join("atlas.csv"), &atlas_csv(&atlas, &hash))?;
    write(&args.archive.join("atlas.json"), &pretty(&atlas)?)?;
    let measured = lipschitz_measured(&atlas).ok();
    Ok(json!({
        "samples": atlas.samples.len(),
        "failures": atlas.failures(),
        "measured": measured,
        "velocity_degree": atlas.velocity_degree,
        "config_hash": hash,
    }))
}

fn cmd_certify(args: CertifyArgs) -> Result<serde_json::Value> {
    let arc = load(&args.archive)?;
    let atlas_path = args.archive.join("atlas.json");
    let atlas: Option<TransportAtlas> = if !args.no_measure && atlas_path.is_file() {
        let text = fs::read_to_string(&atlas_path).map_err(|e| io_err(&atlas_path, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    let cert = certify(
        &arc.trajectory,
        atlas.as_ref(),
        Some(arc.manifest_hash.clone()),
        Some(arc.config.hash()),
    )?;
    let out = args.out.unwrap_or_else(|| args.archive.join("certificate.json"));
    write(&out, &pretty(&cert)?)?;
    Ok(serde_json::to_value(&cert)?)
}

fn cmd_verify(args: ArchiveArg) -> Result<serde_json::Value> {
    let arc = load(&args.archive)?;
    let traj = &arc.trajectory;
    let hash = arc.config.hash();
    traj.ensure_converged()?;
    let table = VelocityTable::new(traj)?;
    let images = transport_points(&table, &traj.grid().nodes(), &arc.config.transport)?;
    let push = pushforward_from_images(traj, &images)?;
    let m0 = archive::initial_metric(&arc)?;
    let lich = lichnerowicz_check(&m0, None)?;
    let c = track_min_r(traj)?;
    let monitor = hessian_decay_monitor(traj, c)?;
    let l = traj.grid().l_max();
    let continuity_one = continuity_residual(traj, &SpectralField::constant(l, 1.0))?;
    let continuity_y20 = continuity_residual(traj, &SpectralField::mode(l, 2, 0, 1.0))?;
    let worst = |v: &[sphereflow::flow::ContinuityResidual]| {
        v.iter()
            .fold((0.0f64, 0.0f64), |(a, b), r| (a.max(r.source_form), b.max(r.flux_form)))
    };
    let (one_src, one_flux) = worst(&continuity_one);
    let (y20_src, y20_flux) = worst(&continuity_y20);
    let rate = fitted_decay_rate(traj, RATE_FIT_WINDOW.0, RATE_FIT_WINDOW.1);
    let report = json!({
        "config_hash": hash,
        "manifest_hash": arc.manifest_hash,
        "pushforward": push,
        "lichnerowicz": lich,
        "curvature_floor": c,
        "decay_monitor": { "verdict": monitor.verdict, "first_violation": monitor.first_violation, "slack": monitor.slack },
        "continuity": {
            "one": { "source_form": one_src, "flux_form": one_flux },
            "y20": { "source_form": y20_src, "flux_form": y20_flux },
        },
        "fitted_decay_rate": rate,
    });
    write(&args.archive.join("verify.json"), &pretty(&report)?)?;
    let rows: Vec<Vec<String>> = push
        .entries
        .iter()
        .map(|e| vec![e.function.clone(), e.transported.to_string(), e.direct.to_string(), e.error.to_string()])
        .collect();
    write(
        &args.archive.join("pushforward.csv"),
        &table_csv(&["function", "transported", "direct", "error"], &rows, &hash),
    )?;
    Ok(report)
}

fn cmd_report(args: ReportArgs) -> Result<serde_json::Value> {
    let arc = load(&args.archive)?;
    let traj = &arc.trajectory;
    let hash = arc.config.hash();
    let tensors = analyze_checkpoints(traj)?;
    write(&args.archive.join("tensors.csv"), &tensors_csv(&tensors, &hash))?;
    let mut written = vec!["tensors.csv".to_string()];
    if args.svg || arc.config.emit_svg {
        let grid = traj.grid();
        let m0 = traj.metric_at_checkpoint(0)?;
        let xi0 = &traj.checkpoints[0].xi;
        let xi_vals = grid.synthesize_values(xi0)?;
        let hess = m0.norm_rel(&m0.hessian_g(xi0)?);
        let figures = [
            ("curvature_R0.svg", m0.curvature_values().to_vec(), "scalar curvature R at t=0"),
            ("potential_xi0.svg", xi_vals, "curvature potential xi at t=0"),
            ("hessian_xi0.svg", hess, "|Hess xi|_g at t=0"),
        ];
        for (name, values, title) in figures {
            write(&args.archive.join(name), &svg_heatmap(grid, &values, title, &hash))?;
            written.push(name.to_string());
        }
        let t: Vec<f64> = tensors.iter().map(|p| p.t).collect();
        let series = [
            ("lambda_dot", tensors.iter().map(|p| p.lambda_dot.proposition).collect()),
            ("sup |R - r|", tensors.iter().map(|p| p.residual_inf).collect()),
        ];
        write(
            &args.archive.join("lambda_dot.svg"),
            &svg_time_series(&t, &series, "lambda_dot and sup|R-r| along the flow", &hash),
        )?;
        written.push("lambda_dot.svg".into());
    }
    Ok(json!({ "config_hash": hash, "written": written }))
}

fn cmd_sweep(args: SweepArgs) -> Result<serde_json::Value> {
    let ladder = args.eps.unwrap_or_else(|| DEFAULT_LADDER.to_vec());
    let flow = sphereflow::flow::FlowConfig::default();
    let table = epsilon_sweep(&args.family, args.volume, &ladder, args.l_max, &flow)?;
    let hash = archive::sha256_hex(serde_json::to_string(&json!({
        "family": args.family, "volume": args.volume, "L": args.l_max, "ladder": ladder, "flow": flow,
    }))?.as_bytes());
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.eps.to_string(),
                r.lambda.to_string(),
                r.c.to_string(),
                r.lambda_over_eps.to_string(),
                r.condition12.to_string(),
                r.bound_paper.to_string(),
            ]
        })
        .collect();
    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    write(
        &args.out.join("sweep.csv"),
        &table_csv(&["eps", "Lambda", "C", "Lambda_over_eps", "condition12", "bound_paper"], &rows, &hash),
    )?;
    let mut value = serde_json::to_value(&table)?;
    value["config_hash"] = json!(hash);
    write(&args.out.join("sweep.json"), &pretty(&value)?)?;
    Ok(value)
}

fn configure_threads(requested: Option<usize>) {
    let n = requested.or_else(|| {
        std::env::var("SPHEREFLOW_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure {n} threads: {e}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads(cli.threads);
    let result = match cli.command {
        Command::Flow(a) => cmd_flow(a),
        Command::Transport(a) => cmd_transport(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Report(a) => cmd_report(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{err}");
            ExitCode::from(2)
        }
    }
}
