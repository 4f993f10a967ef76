use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use disloc_cli::commands::{self, prepare_out, CmdError, Overrides};
use disloc_cli::manifest::write_manifest;
use disloc_cli::{RunConfig, EXIT_CONFIG, EXIT_NUMERIC};
use disloc_core::kmc::BarrierMode;
use disloc_core::LatticeKind;

#[derive(Parser)]
#[command(name = "disloc", version, about = "Screw dislocation barriers, kinetic Monte Carlo and DDD on lattice complexes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for ensembles and meshes (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Asymptotic,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run config, or a manifest from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's `output`, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    barrier_mode: Option<ModeArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Print lattice constants, direction stars and d^L as JSON.
    LatticeInfo {
        #[arg(long)]
        lattice: LatticeKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equilibrium strain and displacement of the configured state.
    Equilibrium(RunArgs),
    /// Exact and asymptotic barriers of every hop from the configured state.
    Barrier(RunArgs),
    /// Kinetic Monte Carlo ensemble with mean path and one sample trajectory.
    Kmc(RunArgs),
    /// Deterministic dynamics and the rate functional along its path.
    Ddd(RunArgs),
    /// Barrier asymptotics and generator gaps over `n_values`.
    Convergence(RunArgs),
}

fn run(cli: Cli) -> Result<(), CmdError> {
    let (name, args) = match cli.command {
        Command::LatticeInfo { lattice, out } => {
            let info = serde_json::to_string_pretty(&commands::lattice_info(lattice)).expect("serialisable");
            println!("{info}");
            if let Some(dir) = out {
                prepare_out(&dir)?;
                std::fs::write(dir.join("lattice_info.json"), info)?;
            }
            return Ok(());
        }
        Command::Equilibrium(a) => ("equilibrium", a),
        Command::Barrier(a) => ("barrier", a),
        Command::Kmc(a) => ("kmc", a),
        Command::Ddd(a) => ("ddd", a),
        Command::Convergence(a) => ("convergence", a),
    };
    let mut cfg = RunConfig::load(&args.config).map_err(|e| CmdError::Config(e.to_string()))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let mode = args.barrier_mode.map(|m| match m {
        ModeArg::Exact => BarrierMode::Exact,
        ModeArg::Asymptotic => BarrierMode::Asymptotic,
    });
    if let (Some(m), Some(k)) = (mode, cfg.kmc.as_mut()) {
        k.barrier_mode = m;
    }
    let out = args.out.or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    prepare_out(&out)?;
    let ov = Overrides { seed: args.seed, barrier_mode: mode };
    let files = disloc_core::par::with_workers(cli.workers, || match name {
        "equilibrium" => commands::equilibrium_cmd(&cfg, &out),
        "barrier" => commands::barrier_cmd(&cfg, &out),
        "kmc" => commands::kmc_cmd(&cfg, &ov, &out),
        "ddd" => commands::ddd_cmd(&cfg, &out),
        _ => commands::convergence_cmd(&cfg, &out),
    })?;
    let m = write_manifest(&out, name, &cfg, &files)?;
    eprintln!("wrote {} files and {}", files.len(), m.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("disloc: {e}");
            ExitCode::from(match e {
                CmdError::Config(_) => EXIT_CONFIG,
                CmdError::Numeric(_) => EXIT_NUMERIC,
            } as u8)
        }
    }
}
