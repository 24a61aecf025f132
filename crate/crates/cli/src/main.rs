use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use lrpde_cli::commands::{self, CliError, CliResult};
use lrpde_cli::config::{usage_keys, Geometry, RunConfig};

#[derive(Parser)]
#[command(name = "lrpde", version, about = "Low-rank Neumann iteration experiments", after_help = usage_keys())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter preset; config keys override it.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Low-rank iteration with ranks, singular values, coefficient norms and errors.
    Run(Common),
    /// Steklov-Poincaré identity checks and span growth on the 2x2 checkerboard.
    Lemmas(Common),
    /// Snapshot singular values of the piecewise-constant 1D problem.
    Oned(Common),
    /// Mesh generation and export.
    Mesh {
        #[command(flatten)]
        common: Common,
        /// checkerboard(m) or distorted.
        #[arg(long)]
        geometry: Option<String>,
        #[arg(long)]
        refine: Option<u32>,
        #[arg(long)]
        grading: Option<f64>,
    },
}

fn load_config(common: &Common, has_overrides: bool) -> CliResult<RunConfig> {
    let mut cfg = match &common.preset {
        Some(name) => RunConfig::preset(name).ok_or_else(|| CliError::Usage(format!("unknown preset `{name}`")))?,
        None => RunConfig::default(),
    };
    let mut set = 0;
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        set = cfg.apply_text(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    if common.preset.is_none() && set == 0 && !has_overrides {
        return Err(CliError::Usage("no configuration given: pass --preset or a non-empty --config".into()));
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn report(files: &[PathBuf], failures: &[String]) -> CliResult<bool> {
    for f in files {
        println!("wrote {}", f.display());
    }
    for f in failures {
        eprintln!("FAIL: {f}");
    }
    Ok(failures.is_empty())
}

fn dispatch(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load_config(&common, false)?;
            let data = commands::run_experiment(&cfg)?;
            let files = commands::write_run(&data, &out_dir(&cfg))?;
            println!(
                "run: {} DOFs, {} skeleton DOFs, numerical ranks {:?}, {:.1} s",
                data.dofs,
                data.skeleton_dofs,
                data.numerical_ranks(),
                data.seconds
            );
            report(&files, &data.failures())
        }
        Command::Lemmas(common) => {
            let cfg = load_config(&common, false)?;
            let data = commands::run_lemmas(&cfg)?;
            let files = commands::write_lemmas(&data, &cfg, &out_dir(&cfg))?;
            println!(
                "lemmas: max residual {:e}, span dims {:?}",
                data.report.max_residual(),
                data.growth.dims
            );
            report(&files, &data.failures())
        }
        Command::Oned(common) => {
            let cfg = load_config(&common, false)?;
            let data = commands::run_oned(&cfg)?;
            let files = commands::write_oned(&data, &cfg, &out_dir(&cfg))?;
            println!("oned: sigma_{}/sigma_1 = {:e}", 2 * data.d, data.ratio);
            report(&files, &data.failures())
        }
        Command::Mesh { common, geometry, refine, grading } => {
            let overrides = geometry.is_some() || refine.is_some() || grading.is_some();
            let mut cfg = load_config(&common, overrides)?;
            if let Some(g) = geometry {
                cfg.geometry = Geometry::parse(&g).map_err(CliError::Usage)?;
            }
            if let Some(r) = refine {
                cfg.refine = r;
            }
            if let Some(g) = grading {
                cfg.grading = g;
            }
            let data = commands::run_mesh(&cfg)?;
            let (files, failures) = commands::write_mesh(&data, &cfg, &out_dir(&cfg))?;
            println!(
                "mesh: {} vertices, {} triangles, reflection symmetric: {}",
                data.mesh.num_vertices(),
                data.mesh.num_triangles(),
                data.symmetry.symmetric
            );
            report(&files, &failures)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\n{}", Cli::command().render_long_help());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
