use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ibfd::cli;
use ibfd::geometry::{CartesianGrid, Side};

#[derive(Parser)]
#[command(name = "ibfd", version, about = "Acoustic finite differences with immersed topography")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Below,
    Above,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `outputs.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tilted-plane standing-wave convergence study.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Grid increments, coarsest first.
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025, 0.0125])]
        resolutions: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the stencils used at selected grid nodes.
    StencilDump {
        #[arg(long)]
        config: PathBuf,
        /// Grid indices, e.g. "10,4;11,4".
        #[arg(long)]
        points: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the signed distance to an ESRI ASCII DEM.
    Sdf {
        #[arg(long)]
        dem: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        spacing: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        origin: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "below")]
        side: SideArg,
        /// Northing of the 2D profile through a 2D DEM raster.
        #[arg(long)]
        transect_northing: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(args: Args) -> ibfd::Result<()> {
    match args.command {
        Command::Run { config, out } => {
            let cfg = cli::read_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let s = cli::cmd_run(&cfg, &out)?;
            println!(
                "{} steps of {:.6e} s, {} modified stencils, {} snapshots, {} traces in {}",
                s.steps,
                s.dt,
                s.modified_stencils,
                s.snapshots.len(),
                s.traces.len(),
                out.display()
            );
        }
        Command::Converge { config, resolutions, out } => {
            let cfg = cli::read_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let report = cli::cmd_converge(&cfg, &resolutions, &out)?;
            println!("{report}");
        }
        Command::StencilDump { config, points, out } => {
            let cfg = cli::read_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let pts = cli::parse_points(&points, cfg.grid.ndims())?;
            let records = cli::cmd_stencil_dump(&cfg, &pts, &out)?;
            println!("{} stencils written to {}", records.len(), out.join("stencils.json").display());
        }
        Command::Sdf {
            dem,
            shape,
            spacing,
            origin,
            side,
            transect_northing,
            out,
        } => {
            let origin = origin.unwrap_or_else(|| vec![0.0; shape.len()]);
            let grid = CartesianGrid::new(&shape, &spacing, &origin)?;
            let side = match side {
                SideArg::Below => Side::Below,
                SideArg::Above => Side::Above,
            };
            let path = cli::cmd_sdf(&dem, &grid, side, transect_northing, &out)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
