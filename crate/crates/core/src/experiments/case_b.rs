//! Case B: energy of a distributed antenna network that splits each frame
//! between communication and sensing.

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::experiments::{check_grid, is_fatal, mean_halfwidth, setup_seeds};
use crate::metrics::QosTargets;
use crate::scene::{generate_channels, generate_scene, ChannelSet, ScenarioSpec, Scene};
use crate::techniques::{ts_design, TsDesign, TsOptions, TsScheme};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseB {
    /// `n_bs` is the number of RRHs; `antennas_per_bs` is replaced by an
    /// even split of each total antenna count.
    pub scenario: ScenarioSpec,
    pub qos: QosTargets,
    pub opts: TsOptions,
    /// RRHs sit evenly on a circle of this radius (a fraction of the service
    /// radius); `None` draws them uniformly like the users.
    pub rrh_ring: Option<f64>,
}

impl Default for CaseB {
    fn default() -> Self {
        Self {
            scenario: ScenarioSpec { n_bs: 4, antennas_per_bs: vec![2; 4], n_cu: 4, n_st: 2, n_clutter: 0, ..Default::default() },
            qos: QosTargets { sinr_min_db: None, rate_min: Some(2.0), ..Default::default() },
            opts: TsOptions::default(),
            rrh_ring: Some(0.5),
        }
    }
}

/// One setup at one antenna count: the distributed network and the
/// co-located reference sharing its users and targets.
pub struct CaseBSetup {
    pub scene: Scene,
    pub channels: ChannelSet<f64>,
    pub colocated: Scene,
    pub colocated_channels: ChannelSet<f64>,
}

impl CaseB {
    pub fn setup(&self, seed: u64, n_total: usize) -> Result<CaseBSetup> {
        let nb = self.scenario.n_bs;
        if nb == 0 || n_total == 0 || !n_total.is_multiple_of(nb) {
            return Err(IsacError::ConfigField {
                field: "antennas".into(),
                message: format!("{n_total} antennas cannot be split evenly over {nb} RRHs"),
            });
        }
        let spec = self.scenario.with_uniform_antennas(n_total / nb);
        let mut scene = generate_scene(&spec, seed)?;
        if let Some(f) = self.rrh_ring {
            if !(0.0..=1.0).contains(&f) {
                return Err(IsacError::ConfigField { field: "rrh_ring".into(), message: "must lie in [0, 1]".into() });
            }
            let rho = f * spec.service_radius;
            for (r, p) in scene.bs_positions.iter_mut().enumerate() {
                let phi = 2.0 * std::f64::consts::PI * r as f64 / nb as f64;
                *p = [rho * phi.cos(), rho * phi.sin()];
            }
        }
        let channels = generate_channels(&scene, &spec, seed)?;
        let colocated = scene.colocated(n_total);
        let colocated_channels = generate_channels(&colocated, &spec, seed)?;
        Ok(CaseBSetup { scene, channels, colocated, colocated_channels })
    }
}

fn design(cfg: &CaseB, set: &CaseBSetup, scheme: TsScheme, warm: Option<&TsDesign>) -> Result<TsDesign> {
    match scheme {
        TsScheme::Baseline1 => ts_design(&set.colocated, &set.colocated_channels, &cfg.qos, scheme, &cfg.opts, warm),
        _ => ts_design(&set.scene, &set.channels, &cfg.qos, scheme, &cfg.opts, warm),
    }
}

/// Designs `scheme` for the setup drawn from `seed` with `n_total`
/// transmit antennas in all. Energy is radiated energy per frame in joules.
pub fn run_case_b(cfg: &CaseB, seed: u64, scheme: TsScheme, n_total: usize) -> Result<TsDesign> {
    let set = cfg.setup(seed, n_total)?;
    design(cfg, &set, scheme, None)
}

/// Per-setup energies of a case-B sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySweep {
    pub antennas: Vec<usize>,
    pub schemes: Vec<TsScheme>,
    pub seeds: Vec<u64>,
    /// `energy[setup][scheme][n]`, `None` when no feasible design was found.
    pub energy: Vec<Vec<Vec<Option<f64>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub scheme: String,
    pub n_antennas: usize,
    pub mean_energy_j: f64,
    pub ci_halfwidth: f64,
    /// Setups in which every scheme was feasible; means are over these only.
    pub n_setups: usize,
}

impl EnergySweep {
    /// Setups feasible for every scheme at grid point `ni`.
    pub fn support(&self, ni: usize) -> Vec<usize> {
        (0..self.seeds.len()).filter(|&i| self.energy[i].iter().all(|e| e[ni].is_some())).collect()
    }

    pub fn rows(&self) -> Vec<EnergyRow> {
        let mut rows = Vec::new();
        for (si, s) in self.schemes.iter().enumerate() {
            for (ni, &n) in self.antennas.iter().enumerate() {
                let support = self.support(ni);
                let xs: Vec<f64> = support.iter().map(|&i| self.energy[i][si][ni].expect("in support")).collect();
                let (mean, hw) = mean_halfwidth(&xs);
                rows.push(EnergyRow { scheme: s.name().into(), n_antennas: n, mean_energy_j: mean, ci_halfwidth: hw, n_setups: xs.len() });
            }
        }
        rows
    }

    /// Mean energy of `scheme` over the common support, one value per grid point.
    pub fn curve(&self, scheme: TsScheme) -> Option<Vec<f64>> {
        let name = scheme.name();
        Some(self.rows().into_iter().filter(|r| r.scheme == name).map(|r| r.mean_energy_j).collect()).filter(|c: &Vec<f64>| !c.is_empty())
    }
}

/// Energies of one setup over the antenna grid, `[scheme][n]`.
fn sweep_setup(cfg: &CaseB, antenna_grid: &[usize], schemes: &[TsScheme], seed: u64) -> Result<Vec<Vec<Option<f64>>>> {
    let mut per = vec![vec![None; antenna_grid.len()]; schemes.len()];
    let mut prev: Vec<Option<TsDesign>> = vec![None; schemes.len()];
    for (ni, &n) in antenna_grid.iter().enumerate() {
        let set = cfg.setup(seed, n)?;
        for (si, &s) in schemes.iter().enumerate() {
            let warm = if s == TsScheme::Baseline2 { None } else { prev[si].as_ref() };
            let d = match design(cfg, &set, s, warm) {
                Ok(d) => d,
                Err(e) if is_fatal(&e) => return Err(e),
                Err(e) => {
                    debug!("{} failed at N = {n}: {e}", s.name());
                    continue;
                }
            };
            if !d.feasible {
                continue;
            }
            if s == TsScheme::Proposed {
                if let Some(p) = &prev[si] {
                    if d.energy > p.energy * (1.0 + 1e-9) + 1e-12 {
                        return Err(IsacError::ContractViolation(format!(
                            "proposed energy grew from {:e} to {:e} J at N = {n} (seed {seed})",
                            p.energy, d.energy
                        )));
                    }
                }
            }
            per[si][ni] = Some(d.energy);
            prev[si] = Some(d);
        }
    }
    Ok(per)
}

/// Runs `n_setups` random setups over the antenna grid. Within a setup the
/// grid is walked upwards and each design warm-starts the next one, so a
/// scheme's energy never grows with the array; a growth beyond round-off is
/// reported as a contract violation.
pub fn sweep_energy_vs_antennas(
    cfg: &CaseB,
    antenna_grid: &[usize],
    n_setups: usize,
    schemes: &[TsScheme],
    master_seed: u64,
) -> Result<EnergySweep> {
    let grid: Vec<f64> = antenna_grid.iter().map(|&n| n as f64).collect();
    check_grid("antennas", &grid)?;
    cfg.scenario.validate()?;
    cfg.qos.validate()?;
    let seeds = setup_seeds(master_seed, n_setups);
    // Setups are independent; results are collected in seed order.
    let energy = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| -> Result<Vec<Vec<Option<f64>>>> {
            let per = sweep_setup(cfg, antenna_grid, schemes, seed)?;
            info!("case B setup {} of {n_setups} done", i + 1);
            Ok(per)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergySweep { antennas: antenna_grid.to_vec(), schemes: schemes.to_vec(), seeds, energy })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proposed_is_monotone_and_below_even_split() {
        let cfg = CaseB::default();
        let sw = sweep_energy_vs_antennas(&cfg, &[4, 8], 2, &TsScheme::ALL, 3).unwrap();
        for per in &sw.energy {
            for ni in 0..2 {
                if let (Some(p), Some(b2)) = (per[0][ni], per[2][ni]) {
                    assert!(p <= b2 * (1.0 + 1e-9), "{p} vs {b2}");
                }
            }
        }
        assert_eq!(sw.rows().len(), 6);
    }

    #[test]
    fn no_demand_costs_nothing() {
        let mut cfg = CaseB::default();
        cfg.scenario.n_st = 0;
        cfg.qos.rate_min = Some(0.0);
        let d = run_case_b(&cfg, 1, TsScheme::Proposed, 8).unwrap();
        assert!(d.feasible);
        assert!(d.energy <= 1e-9, "{}", d.energy);
    }

    #[test]
    fn uneven_split_is_rejected() {
        assert!(CaseB::default().setup(1, 6).is_err());
    }
}
