use clap::{Args, Parser, Subcommand};
use necklace_cli::config::{OutputFormat, RunConfig};
use necklace_cli::{cmd_bands, cmd_design, cmd_dispersion, cmd_reflect, Overrides};
use std::process::ExitCode;

/// Band structure, dispersion, reflection and parameter design for periodic
/// necklace waveguide graphs.
#[derive(Parser)]
#[command(name = "necklace", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: String,
    /// Override scan.sigma_min.
    #[arg(long)]
    sigma_min: Option<f64>,
    /// Override scan.sigma_max.
    #[arg(long)]
    sigma_max: Option<f64>,
    /// Override scan.grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Override truncation.n_cells.
    #[arg(long)]
    cells: Option<usize>,
    /// Override design.eps.
    #[arg(long)]
    eps: Option<f64>,
    /// Override design.sigma0.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Worker threads for sweeps (default: all cores). Output order is
    /// deterministic either way.
    #[arg(long)]
    jobs: Option<usize>,
    /// Write data here instead of standard output.
    #[arg(long)]
    output: Option<String>,
    /// Data format.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Hill discriminant over a sigma window with band/pole annotation.
    Bands(Common),
    /// Bloch phase and group velocity per band.
    Dispersion(Common),
    /// Closed-form and direct-solve reflection of the truncated chain.
    Reflect(Common),
    /// Edge-length design for slow, transparent propagation at sigma0.
    Design(Common),
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        sigma_min: c.sigma_min,
        sigma_max: c.sigma_max,
        grid: c.grid,
        cells: c.cells,
        eps: c.eps,
        sigma0: c.sigma0,
        jobs: c.jobs,
        output: c.output.clone(),
        format: c.format,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(RunConfig, &Overrides) -> Result<(), necklace_cli::CliError>) =
        match &cli.command {
            Command::Bands(c) => (c, cmd_bands),
            Command::Dispersion(c) => (c, cmd_dispersion),
            Command::Reflect(c) => (c, cmd_reflect),
            Command::Design(c) => (c, cmd_design),
        };
    let cfg = match RunConfig::load(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code);
        }
    };
    match run(cfg, &overrides(common)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code)
        }
    }
}
