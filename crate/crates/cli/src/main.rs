use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rrh_core::experiment::{
    run, sweep_n, sweep_omega, write_csv, AntennaRule, Config, SWEEP_N_CSV, SWEEP_OMEGA_CSV,
};
use rrh_core::model::BackhaulMode;
use rrh_core::optimizer::Mode;
use rrh_core::Error;

/// RRH placement under a wireless backhaul outage constraint.
#[derive(Parser)]
#[command(name = "rrhopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one network and write report.json plus CSV tables.
    Run(Common),
    /// Constrained vs unconstrained rate over access/backhaul RB splits.
    SweepOmega {
        #[command(flatten)]
        common: Common,
        /// Access RBs to evaluate; the backhaul gets the rest.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,8,10,12,15,20,24")]
        omegas: Vec<usize>,
        /// Seeds to average over (defaults to the config seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Rate over the number of RRHs per cell.
    SweepN {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,10")]
        ns: Vec<usize>,
        /// Keep M per RRH fixed at this value.
        #[arg(long)]
        fixed_m: Option<usize>,
        /// Keep N*M fixed at this value.
        #[arg(long)]
        fixed_nm: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "shared,divided-by-n")]
        backhaul_modes: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config; omitted fields take the reference defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// direct or distance
    #[arg(long)]
    mode: Option<Mode>,
    /// Freeze the multipliers at zero.
    #[arg(long)]
    no_constraint: bool,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    quadrature_order: Option<usize>,
    /// Monte-Carlo audit of the converged layout.
    #[arg(long)]
    mc_validate: bool,
}

impl Common {
    fn config(&self) -> Result<Config, Error> {
        let mut cfg = match &self.config {
            Some(p) => Config::from_path(p)?,
            None => Config::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.optimizer.mode = m;
        }
        if self.no_constraint {
            cfg.optimizer.no_constraint = true;
        }
        if let Some(r) = self.restarts {
            cfg.optimizer.restarts = r;
        }
        if let Some(o) = self.quadrature_order {
            cfg.optimizer.quadrature_order = o;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn setup_workers(workers: Option<usize>) -> Result<(), Error> {
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config {
                field: "--workers".into(),
                message: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config {
                field: "--workers".into(),
                message: e.to_string(),
            })?;
    }
    Ok(())
}

fn seeds_or(seeds: &[u64], cfg: &Config) -> Vec<u64> {
    if seeds.is_empty() {
        vec![cfg.seed]
    } else {
        seeds.to_vec()
    }
}

fn parse_mode(s: &str) -> Result<BackhaulMode, Error> {
    match s {
        "shared" => Ok(BackhaulMode::Shared),
        "divided-by-n" => Ok(BackhaulMode::DividedByN),
        other => Err(Error::Config {
            field: "--backhaul-modes".into(),
            message: format!("unknown mode `{other}` (expected shared or divided-by-n)"),
        }),
    }
}

fn write_table<T: serde::Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    write_csv(&path, rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.config()?;
            setup_workers(common.workers)?;
            let out = run(&cfg, common.mc_validate)?;
            out.write(&common.out_dir)?;
            let r = &out.report;
            println!(
                "status={:?} rate={:.4} bits/s/Hz iterations={} mean_cu_dist={:.1} m -> {}",
                r.status,
                r.network_rate_bits,
                r.iterations,
                r.mean_cu_distance_m,
                common.out_dir.display()
            );
            Ok(r.status.exit_code() as u8)
        }
        Command::SweepOmega {
            common,
            omegas,
            seeds,
        } => {
            let cfg = common.config()?;
            setup_workers(common.workers)?;
            let rows = sweep_omega(&cfg, &omegas, &seeds_or(&seeds, &cfg))?;
            write_table(&common.out_dir, SWEEP_OMEGA_CSV, &rows)?;
            Ok(0)
        }
        Command::SweepN {
            common,
            ns,
            fixed_m,
            fixed_nm,
            backhaul_modes,
            seeds,
        } => {
            let cfg = common.config()?;
            let mut rules = Vec::new();
            if let Some(m) = fixed_m {
                rules.push((AntennaRule::FixedM, m));
            }
            if let Some(nm) = fixed_nm {
                rules.push((AntennaRule::FixedNm, nm));
            }
            if rules.is_empty() {
                rules.push((AntennaRule::FixedM, cfg.network.antennas_per_rrh));
            }
            let modes = backhaul_modes
                .iter()
                .map(|s| parse_mode(s))
                .collect::<Result<Vec<_>, _>>()?;
            setup_workers(common.workers)?;
            let rows = sweep_n(&cfg, &ns, &rules, &modes, &seeds_or(&seeds, &cfg))?;
            write_table(&common.out_dir, SWEEP_N_CSV, &rows)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Infeasible { .. } => 2,
                Error::IterationCap { .. } => 3,
                _ => 1,
            })
        }
    }
}
