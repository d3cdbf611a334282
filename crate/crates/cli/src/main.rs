use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gfree::harness::{analytic_command, configure_workers, describe, run_command, HarnessError};
use gfree::scenario::load_config;

/// Grant-free IoT uplink simulator with per-device bandit learning.
///
/// Worker threads default to the number of cores; set GFREE_WORKERS to override.
#[derive(Parser)]
#[command(name = "gfree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write metrics.csv, occupancy.csv and summary.json.
    Run {
        /// Scenario JSON file or the name of a bundled preset.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's replication count.
        #[arg(long)]
        replications: Option<u32>,
    },
    /// Optimize the ring plan and write plan.csv, success.csv and analytic.json.
    Analytic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the bundled presets.
    Presets,
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    configure_workers()?;
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            replications,
        } => {
            let cfg = load_config(&config)?;
            let summary = run_command(&cfg, seed, replications, &out)?;
            for v in &summary.variants {
                println!(
                    "{}: steady-state success {:.4} ± {:.4}, energy/packet {:.4e} J, delivery {:.4}",
                    v.label,
                    v.steady_state_success.mean,
                    v.steady_state_success.std,
                    v.mean_energy_per_packet_j,
                    v.delivery_rate
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Analytic { config, out } => {
            let cfg = load_config(&config)?;
            let (best, summary) = analytic_command(&cfg, &out)?;
            for (j, ring) in best.plan.rings.iter().enumerate() {
                let shares: Vec<String> = best
                    .plan
                    .codes
                    .iter()
                    .zip(&best.plan.densities[j])
                    .map(|(c, d)| format!("c{c} {:.2}", d / best.plan.density.max(f64::MIN_POSITIVE)))
                    .collect();
                println!("ring {j} [{:.0}, {:.0}] m: {}", ring.r_inner, ring.r_outer, shares.join(", "));
            }
            println!(
                "objective {:.6}, cross-check gap {:.2e}; wrote {}",
                summary.objective,
                summary.cross_check_max_rel_gap,
                out.display()
            );
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("ok: {}", describe(&cfg));
        }
        Command::Presets => {
            for name in gfree::presets::names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
