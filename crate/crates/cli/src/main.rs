use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use turbo_ep::validation::ValidateOptions;
use turbo_ep_cli::{
    cmd_ber, cmd_exit, cmd_validate, output_dir, preset, CliError, CliResult, Overrides, RunConfig,
};

/// BER and EXIT simulations of turbo equalizers.
#[derive(Parser)]
#[command(name = "turbo-ep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep BER over Eb/N0, one CSV per scenario and equalizer.
    Ber(RunArgs),
    /// Measure EXIT curves of equalizers and the decoder into one CSV.
    Exit(RunArgs),
    /// Check the fast equalizer paths against reference computations.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (fig2, fig3a..fig3f, fig4, fig5, fig6).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Use 10^4 frames per point.
    #[arg(long)]
    full_scale: bool,
    /// Output directory; overrides $TURBO_EP_OUT and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single Eb/N0 point.
    #[arg(long = "eb-n0", allow_hyphen_values = true)]
    eb_n0: Option<f64>,
    /// Run a single equalizer.
    #[arg(long)]
    equalizer: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Run one suite: woodbury, window-cavity, bcjr or first-pass.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Negate the first channel tap on the fast path, to see the checks fail.
    #[arg(long)]
    corrupt_tap_sign: bool,
}

fn resolve(args: &RunArgs) -> CliResult<(RunConfig, PathBuf)> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(CliError::Usage("give --config or --preset".into())),
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        workers: args.workers,
        full_scale: args.full_scale,
        out: args.out.clone(),
        eb_n0: args.eb_n0,
        equalizer: args.equalizer.clone(),
    })?;
    let out = output_dir(&cfg, args.out.as_deref());
    Ok((cfg, out))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ber(args) => {
            let (cfg, out) = resolve(&args)?;
            for p in cmd_ber(&cfg, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Exit(args) => {
            let (cfg, out) = resolve(&args)?;
            println!("{}", cmd_exit(&cfg, &out)?.display());
        }
        Command::Validate(args) => {
            let opts = ValidateOptions {
                instances: args.instances,
                seed: args.seed,
                corrupt_tap_sign: args.corrupt_tap_sign,
            };
            cmd_validate(args.filter.as_deref(), &opts)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
