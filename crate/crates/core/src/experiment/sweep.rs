use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, Config, RunStatus};
use crate::error::{Error, Result};
use crate::model::BackhaulMode;

pub const SWEEP_OMEGA_CSV: &str = "sweep_omega.csv";
pub const SWEEP_N_CSV: &str = "sweep_n.csv";

/// Summary of one optimize call inside a sweep.
#[derive(Debug, Clone, Copy)]
struct Point {
    feasible: bool,
    converged: bool,
    rate_bits: f64,
    cu_dist_m: f64,
}

fn solve(cfg: &Config) -> Result<Point> {
    let r = run(cfg, false)?.report;
    Ok(Point {
        feasible: r.feasible,
        converged: r.status == RunStatus::Converged,
        rate_bits: r.network_rate_bits,
        cu_dist_m: r.mean_cu_distance_m,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// One bandwidth split of `sweep_omega.csv`. Averages run over the feasible
/// seeds; empty fields mean no seed was feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOmegaRow {
    pub access_rbs: usize,
    pub backhaul_rbs: usize,
    /// K * omega / omega_c
    pub load_ratio: f64,
    pub seeds: usize,
    pub feasible_seeds: usize,
    pub converged_seeds: usize,
    pub constrained_bits: Option<f64>,
    pub unconstrained_bits: Option<f64>,
    pub constrained_cu_dist_m: Option<f64>,
    pub unconstrained_cu_dist_m: Option<f64>,
}

/// Constrained and unconstrained placements for every access bandwidth in
/// `omegas` (in RBs; the backhaul gets the rest of `total_rbs`), averaged
/// over `seeds`.
pub fn sweep_omega(base: &Config, omegas: &[usize], seeds: &[u64]) -> Result<Vec<SweepOmegaRow>> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    let total = base.network.total_rbs;
    let mut jobs = Vec::new();
    for &w in omegas {
        if w == 0 || w >= total {
            return Err(Error::config(
                "omega",
                format!("{w} RBs leaves no valid split of {total} RBs"),
            ));
        }
        for &seed in seeds {
            for constrained in [true, false] {
                let mut cfg = base.clone();
                cfg.seed = seed;
                cfg.network.access_rbs = w;
                cfg.network.backhaul_rbs = total - w;
                cfg.optimizer.no_constraint = !constrained;
                cfg.optimizer.record_trajectory = false;
                cfg.validate()?;
                jobs.push(cfg);
            }
        }
    }
    let points = jobs.par_iter().map(solve).collect::<Result<Vec<_>>>()?;

    let per = 2 * seeds.len();
    Ok(omegas
        .iter()
        .zip(points.chunks(per))
        .zip(jobs.chunks(per))
        .map(|((&w, pts), cfgs)| {
            let con: Vec<&Point> = pts.iter().step_by(2).filter(|p| p.feasible).collect();
            let unc: Vec<&Point> = pts.iter().skip(1).step_by(2).collect();
            SweepOmegaRow {
                access_rbs: w,
                backhaul_rbs: total - w,
                load_ratio: cfgs[0].network.backhaul_load_ratio(),
                seeds: seeds.len(),
                feasible_seeds: con.len(),
                converged_seeds: con.iter().filter(|p| p.converged).count(),
                constrained_bits: mean(con.iter().map(|p| p.rate_bits)),
                unconstrained_bits: mean(unc.iter().map(|p| p.rate_bits)),
                constrained_cu_dist_m: mean(con.iter().map(|p| p.cu_dist_m)),
                unconstrained_cu_dist_m: mean(unc.iter().map(|p| p.cu_dist_m)),
            }
        })
        .collect())
}

/// Which antenna quantity stays fixed while N varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AntennaRule {
    /// M per RRH is fixed.
    FixedM,
    /// The cell total N*M is fixed.
    FixedNm,
}

/// One (N, antenna rule, backhaul mode) point of `sweep_n.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepNRow {
    pub n: usize,
    pub m: usize,
    pub nm: usize,
    pub antenna_rule: AntennaRule,
    pub backhaul_mode: BackhaulMode,
    pub seeds: usize,
    pub feasible_seeds: usize,
    pub converged_seeds: usize,
    /// True when every seed is feasible.
    pub feasible: bool,
    /// Mean over feasible seeds, bits/s/Hz.
    pub rate_bits: Option<f64>,
}

/// Placements for every RRH count in `ns`, for each `(rule, value)` in
/// `rules` (value is M for [`AntennaRule::FixedM`], N*M for
/// [`AntennaRule::FixedNm`]) and each backhaul mode.
pub fn sweep_n(
    base: &Config,
    ns: &[usize],
    rules: &[(AntennaRule, usize)],
    modes: &[BackhaulMode],
    seeds: &[u64],
) -> Result<Vec<SweepNRow>> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    let mut points = Vec::new();
    let mut jobs = Vec::new();
    for &(rule, value) in rules {
        for &mode in modes {
            for &n in ns {
                let m = match rule {
                    AntennaRule::FixedM => value,
                    AntennaRule::FixedNm => {
                        if n == 0 || value % n != 0 {
                            return Err(Error::config(
                                "n",
                                format!("N = {n} does not divide N*M = {value}"),
                            ));
                        }
                        value / n
                    }
                };
                points.push((n, m, rule, mode));
                for &seed in seeds {
                    let mut cfg = base.clone();
                    cfg.seed = seed;
                    cfg.network.rrhs_per_cell = n;
                    cfg.network.antennas_per_rrh = m;
                    cfg.network.backhaul_mode = mode;
                    cfg.optimizer.record_trajectory = false;
                    cfg.validate()?;
                    jobs.push(cfg);
                }
            }
        }
    }
    let results = jobs.par_iter().map(solve).collect::<Result<Vec<_>>>()?;
    Ok(points
        .into_iter()
        .zip(results.chunks(seeds.len()))
        .map(|((n, m, rule, mode), pts)| {
            let ok: Vec<&Point> = pts.iter().filter(|p| p.feasible).collect();
            SweepNRow {
                n,
                m,
                nm: n * m,
                antenna_rule: rule,
                backhaul_mode: mode,
                seeds: seeds.len(),
                feasible_seeds: ok.len(),
                converged_seeds: ok.iter().filter(|p| p.converged).count(),
                feasible: ok.len() == seeds.len(),
                rate_bits: mean(ok.iter().map(|p| p.rate_bits)),
            }
        })
        .collect())
}
