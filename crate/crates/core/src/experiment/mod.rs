//! Run orchestration: configuration, single placement runs with their
//! reports and output files, and the bandwidth / RRH-count sweeps.

mod output;
mod sweep;

pub use output::{
    read_csv, write_csv, RrhRow, TrafficGridRow, RRH_LOCATIONS_CSV, REPORT_JSON, TRAFFIC_GRID_CSV,
    TRAJECTORY_CSV,
};
pub use sweep::{
    sweep_n, sweep_omega, AntennaRule, SweepNRow, SweepOmegaRow, SWEEP_N_CSV, SWEEP_OMEGA_CSV,
};

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::access::{AccessModel, IciCache};
use crate::backhaul::{max_backhaul_distance, outage_prob, BackhaulLimit};
use crate::error::{Error, Result};
use crate::mc_oracle::{mc_access_rate, mc_backhaul_outage, McConfig, McEstimate};
use crate::model::{generate_traffic, Layout, NetworkParams, TrafficParams};
use crate::optimizer::{optimize, restart_layout, Mode, OptimizeOutcome, OptimizerParams, TrajectoryRow};

/// Everything a run depends on besides the command-line overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub network: NetworkParams,
    pub traffic: TrafficParams,
    pub optimizer: OptimizerParams,
    pub mc: McConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config {
            field: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            field: "config".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.traffic.validate()?;
        self.optimizer.validate()?;
        self.mc.validate()
    }

    /// Traffic model and access model for this configuration.
    pub fn build_model(&self) -> Result<AccessModel> {
        self.validate()?;
        let order = self.optimizer.quadrature_order;
        let traffic = generate_traffic(self.seed, &self.traffic, &self.network.grid(), order)?;
        Ok(AccessModel::new(self.network.clone(), traffic, order))
    }
}

/// How a run ended, mapped onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    Infeasible,
    NotConverged,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::Infeasible => 2,
            RunStatus::NotConverged => 3,
        }
    }
}

/// Conversion from nats to bits.
pub fn bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    /// Largest RRH move of each outer iteration, meters.
    pub d_max_m: Vec<f64>,
    /// Network mean rate after each outer iteration, bits/s/Hz.
    pub objective_bits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub fallback_count: usize,
    pub safeguard_count: usize,
    pub a4_printed_mismatch_count: usize,
    pub a4_printed_max_rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAudit {
    pub cell: usize,
    pub lower_bound_bits: f64,
    pub mc_bits: f64,
    pub mc_std_err_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkAudit {
    pub cell: usize,
    pub rrh: usize,
    pub outage: f64,
    pub mc_outage: f64,
    pub mc_std_err: f64,
}

/// Monte-Carlo cross-checks of the converged layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McAudit {
    pub cells: Vec<CellAudit>,
    pub links: Vec<LinkAudit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub converged: bool,
    /// False when some link cannot meet the outage budget even with its RRH
    /// on the CU.
    pub feasible: bool,
    pub iterations: usize,
    pub mode: Mode,
    pub constrained: bool,
    pub seed: u64,
    /// Restart whose result is reported (0-based).
    pub restart: usize,
    pub network_rate_bits: f64,
    pub cell_rate_bits: Vec<f64>,
    pub mean_cu_distance_m: f64,
    pub layout: Layout,
    pub rrhs: Vec<RrhRow>,
    pub d_out_m: Vec<Option<f64>>,
    pub lambdas: Vec<Vec<f64>>,
    pub traces: Traces,
    pub diagnostics: Diagnostics,
    pub mc_audit: Option<McAudit>,
    pub config: Config,
    pub wall_time_s: f64,
}

/// A finished run: the report plus the tables written next to it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trajectory: Vec<TrajectoryRow>,
    pub traffic_grid: Vec<TrafficGridRow>,
}

impl RunOutput {
    /// Writes `report.json`, `rrh_locations.csv`, `traffic_grid.csv` and,
    /// when recorded, `trajectory.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.report)?;
        std::fs::write(dir.join(REPORT_JSON), json + "\n")?;
        write_csv(&dir.join(RRH_LOCATIONS_CSV), &self.report.rrhs)?;
        write_csv(&dir.join(TRAFFIC_GRID_CSV), &self.traffic_grid)?;
        if !self.trajectory.is_empty() {
            write_csv(&dir.join(TRAJECTORY_CSV), &self.trajectory)?;
        }
        Ok(())
    }
}

/// Checks whether every cell could meet the outage budget with all of its
/// RRHs on the CU, the most favorable backhaul geometry.
pub fn colocated_feasible(model: &AccessModel) -> Result<bool> {
    let layout = Layout::colocated(&model.grid, model.params.rrhs_per_cell);
    let cache = IciCache::new(model, &layout);
    let limit = model.grid.diagonal();
    for rate in model.expected_rates(&layout, &cache) {
        if let BackhaulLimit::Infeasible { .. } = max_backhaul_distance(rate, &model.params, limit)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs the placement for `cfg` (best of `cfg.optimizer.restarts` random
/// starts) and assembles the report. `mc_audit` adds Monte-Carlo checks of
/// the final layout.
pub fn run(cfg: &Config, mc_audit: bool) -> Result<RunOutput> {
    let start = Instant::now();
    let model = cfg.build_model()?;
    let op = &cfg.optimizer;
    let constrained = !op.no_constraint;

    let traffic_grid = output::traffic_grid(&model);
    if constrained && !colocated_feasible(&model)? {
        log::warn!("outage budget cannot be met even with co-located RRHs");
        let layout = Layout::colocated(&model.grid, model.params.rrhs_per_cell);
        let report = assemble(cfg, &model, None, layout, 0, false, start)?;
        return Ok(RunOutput {
            report,
            trajectory: Vec::new(),
            traffic_grid,
        });
    }

    let mut best: Option<(usize, OptimizeOutcome)> = None;
    for r in 0..op.restarts {
        let init = restart_layout(&model, cfg.seed, r);
        let outcome = match optimize(&model, init, op) {
            Ok(o) => o,
            Err(Error::Infeasible { cell, outage, .. }) => {
                log::warn!("restart {r}: cell {cell} infeasible (outage {outage:.4} at the CU)");
                continue;
            }
            Err(e) => return Err(e),
        };
        log::info!(
            "restart {r}: converged={} iterations={} objective={:.4} bits/s/Hz",
            outcome.converged,
            outcome.iterations,
            bits(outcome.objective())
        );
        let better = match &best {
            None => true,
            Some((_, b)) => (outcome.converged, outcome.objective()) > (b.converged, b.objective()),
        };
        if better {
            best = Some((r, outcome));
        }
    }

    let Some((restart, outcome)) = best else {
        let layout = Layout::colocated(&model.grid, model.params.rrhs_per_cell);
        let report = assemble(cfg, &model, None, layout, 0, false, start)?;
        return Ok(RunOutput {
            report,
            trajectory: Vec::new(),
            traffic_grid,
        });
    };
    let layout = outcome.state.layout.clone();
    let mut report = assemble(cfg, &model, Some(&outcome), layout, restart, true, start)?;
    if mc_audit {
        report.mc_audit = Some(audit(cfg, &model, &report)?);
        report.wall_time_s = start.elapsed().as_secs_f64();
    }
    Ok(RunOutput {
        report,
        trajectory: outcome.trajectory,
        traffic_grid,
    })
}

fn assemble(
    cfg: &Config,
    model: &AccessModel,
    outcome: Option<&OptimizeOutcome>,
    layout: Layout,
    restart: usize,
    feasible: bool,
    start: Instant,
) -> Result<RunReport> {
    let p = &model.params;
    let cache = IciCache::new(model, &layout);
    let rates = model.expected_rates(&layout, &cache);
    let mut rrhs = Vec::new();
    for (q, cell) in layout.rrh.iter().enumerate() {
        for (n, pt) in cell.iter().enumerate() {
            let cu_dist = layout.cu_distance(q, n);
            rrhs.push(RrhRow {
                cell: q,
                rrh: n,
                x_m: pt.x,
                y_m: pt.y,
                cu_dist_m: cu_dist,
                outage: outage_prob(cu_dist, rates[q], p)?,
            });
        }
    }
    let mean_cu = rrhs.iter().map(|r| r.cu_dist_m).sum::<f64>() / rrhs.len().max(1) as f64;
    let cell_rate_bits: Vec<f64> = rates.iter().map(|&r| bits(r)).collect();
    let network_rate_bits = cell_rate_bits.iter().sum::<f64>() / cell_rate_bits.len() as f64;
    let converged = outcome.is_some_and(|o| o.converged);
    let status = if !feasible {
        RunStatus::Infeasible
    } else if converged {
        RunStatus::Converged
    } else {
        RunStatus::NotConverged
    };
    let q = model.num_cells();
    let (traces, diagnostics, lambdas, d_out) = match outcome {
        Some(o) => (
            Traces {
                d_max_m: o.state.d_max_trace.clone(),
                objective_bits: o.state.objective_trace.iter().map(|&v| bits(v)).collect(),
            },
            Diagnostics {
                fallback_count: o.fallback_count,
                safeguard_count: o.safeguard_count,
                a4_printed_mismatch_count: o.a4_printed_mismatch_count,
                a4_printed_max_rel_gap: o.a4_printed_max_rel_gap,
            },
            o.state.lambdas.clone(),
            o.state.d_out.clone(),
        ),
        None => (
            Traces {
                d_max_m: Vec::new(),
                objective_bits: Vec::new(),
            },
            Diagnostics {
                fallback_count: 0,
                safeguard_count: 0,
                a4_printed_mismatch_count: 0,
                a4_printed_max_rel_gap: 0.0,
            },
            vec![vec![0.0; p.rrhs_per_cell]; q],
            vec![None; q],
        ),
    };
    Ok(RunReport {
        status,
        converged,
        feasible,
        iterations: outcome.map_or(0, |o| o.iterations),
        mode: cfg.optimizer.mode,
        constrained: !cfg.optimizer.no_constraint,
        seed: cfg.seed,
        restart,
        network_rate_bits,
        cell_rate_bits,
        mean_cu_distance_m: mean_cu,
        layout,
        rrhs,
        d_out_m: d_out,
        lambdas,
        traces,
        diagnostics,
        mc_audit: None,
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn audit(cfg: &Config, model: &AccessModel, report: &RunReport) -> Result<McAudit> {
    let layout = &report.layout;
    let cache = IciCache::new(model, layout);
    let mut cells = Vec::new();
    for q in 0..model.num_cells() {
        let lb = model.expected_rate(q, layout, &cache);
        let McEstimate { mean, std_err, .. } = mc_access_rate(model, layout, q, &cfg.mc, cfg.seed)?;
        cells.push(CellAudit {
            cell: q,
            lower_bound_bits: bits(lb),
            mc_bits: bits(mean),
            mc_std_err_bits: bits(std_err),
        });
    }
    let mut links = Vec::new();
    for row in &report.rrhs {
        let rate = report.cell_rate_bits[row.cell] * std::f64::consts::LN_2;
        let est = mc_backhaul_outage(row.cu_dist_m, rate, &model.params, cfg.mc.backhaul_trials, cfg.seed)?;
        links.push(LinkAudit {
            cell: row.cell,
            rrh: row.rrh,
            outage: row.outage,
            mc_outage: est.mean,
            mc_std_err: est.std_err,
        });
    }
    Ok(McAudit { cells, links })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) fn desk_config() -> Config {
        Config {
            seed: 3,
            network: NetworkParams {
                num_cells: 4,
                rrhs_per_cell: 2,
                antennas_per_rrh: 2,
                users_per_cell: 3,
                ..NetworkParams::default()
            },
            optimizer: OptimizerParams {
                quadrature_order: 12,
                max_outer_iters: 40,
                d_cvg: 5.0,
                ..OptimizerParams::default()
            },
            ..Config::default()
        }
    }

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Config::from_json(r#"{"seed": 1, "colour": 3}"#).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err = Config::from_json(r#"{"network": {"rrh_per_cell": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("rrh_per_cell"), "{err}");
    }

    #[test]
    fn field_errors_name_the_field() {
        let err = Config::from_json(r#"{"network": {"rrhs_per_cell": 1, "antennas_per_rrh": 2, "users_per_cell": 2}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("network.rrhs_per_cell"), "{err}");
        let err = Config::from_json(r#"{"optimizer": {"d_cvg": -1}}"#).unwrap_err();
        assert!(err.to_string().contains("optimizer.d_cvg"), "{err}");
    }

    #[test]
    fn partial_config_keeps_table_defaults() {
        let cfg = Config::from_json(r#"{"seed": 9, "network": {"access_rbs": 6, "backhaul_rbs": 19}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.network.num_cells, 9);
        assert_eq!(cfg.network.rrhs_per_cell, 10);
        assert_eq!(cfg.network.access_rbs, 6);
        assert_eq!(cfg.traffic, TrafficParams::default());
    }

    #[test]
    fn report_round_trips_and_means_agree() {
        let out = run(&desk_config(), false).unwrap();
        let r = &out.report;
        let mean = r.cell_rate_bits.iter().sum::<f64>() / r.cell_rate_bits.len() as f64;
        assert!((r.network_rate_bits - mean).abs() < 1e-12);
        let text = serde_json::to_string_pretty(r).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, r);
        assert_eq!(r.rrhs.len(), 8);
        assert!(r.feasible);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunStatus::Converged.exit_code(), 0);
        assert_eq!(RunStatus::Infeasible.exit_code(), 2);
        assert_eq!(RunStatus::NotConverged.exit_code(), 3);
    }

    #[test]
    fn hopeless_backhaul_is_reported_infeasible() {
        let mut cfg = desk_config();
        cfg.network.backhaul_power_dbm = -150.0;
        let out = run(&cfg, false).unwrap();
        assert!(!out.report.feasible);
        assert_eq!(out.report.status.exit_code(), 2);
        // the unconstrained problem is unaffected
        cfg.optimizer.no_constraint = true;
        assert!(run(&cfg, false).unwrap().report.feasible);
    }
}
