//! Case A: receiver selection, user association and beamforming across
//! coordinated cellular BSs with one bistatic or monostatic sensing link.

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::{check_grid, is_fatal, proportion_halfwidth, setup_seeds};
use crate::metrics::QosTargets;
use crate::scene::{generate_channels, generate_scene, ChannelSet, ScenarioSpec, Scene};
use crate::solvers::SolveStatus;
use crate::techniques::{cmt_design_seeded, verify_cmt, CmtDesign, CmtOptions, CmtScheme};

/// Everything but the SINR target and the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct CaseA {
    pub scenario: ScenarioSpec,
    pub qos: QosTargets,
    pub opts: CmtOptions,
}


impl CaseA {
    pub fn setup(&self, seed: u64) -> Result<(Scene, ChannelSet<f64>)> {
        let scene = generate_scene(&self.scenario, seed)?;
        let channels = generate_channels(&scene, &self.scenario, seed)?;
        Ok((scene, channels))
    }

    fn qos_at(&self, gamma_db: f64) -> QosTargets {
        QosTargets { sinr_min_db: Some(gamma_db), rate_min: None, ..self.qos.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// No feasible design and the solver reported a numerical failure.
    Failure,
}

fn index(s: CmtScheme) -> usize {
    CmtScheme::ALL.iter().position(|&x| x == s).expect("scheme is listed")
}

const BASELINES: [CmtScheme; 3] = [CmtScheme::Baseline1, CmtScheme::Baseline2, CmtScheme::Baseline3];

/// Designs all four schemes at one target, reusing any design in `known`
/// that still passes verification. The joint design is seeded with the
/// three baselines, so it is feasible whenever one of them is.
fn all_schemes(
    scene: &Scene,
    ch: &ChannelSet<f64>,
    qos: &QosTargets,
    opts: &CmtOptions,
    known: &mut [Option<CmtDesign>; 4],
) -> Result<[Verdict; 4]> {
    let mut verdicts = [Verdict::Infeasible; 4];
    let attempt = |scheme: CmtScheme, known: &mut [Option<CmtDesign>; 4]| -> Result<Verdict> {
        let i = index(scheme);
        if let Some(d) = &known[i] {
            if verify_cmt(d, ch, qos, opts)? {
                return Ok(Verdict::Feasible);
            }
        }
        let seeds: Vec<&CmtDesign> = if scheme == CmtScheme::Proposed {
            BASELINES.iter().filter_map(|&b| known[index(b)].as_ref()).collect()
        } else {
            Vec::new()
        };
        match cmt_design_seeded(scene, ch, qos, scheme, opts, &seeds) {
            Ok(d) if d.feasible && verify_cmt(&d, ch, qos, opts)? => {
                known[i] = Some(d);
                Ok(Verdict::Feasible)
            }
            Ok(d) if d.report.status == SolveStatus::NumericalFailure => Ok(Verdict::Failure),
            Ok(_) => Ok(Verdict::Infeasible),
            Err(e) if is_fatal(&e) => Err(e),
            Err(e) => {
                debug!("{} failed: {e}", scheme.name());
                Ok(Verdict::Failure)
            }
        }
    };
    for b in BASELINES {
        verdicts[index(b)] = attempt(b, known)?;
        if verdicts[index(b)] != Verdict::Feasible {
            known[index(b)] = None;
        }
    }
    verdicts[index(CmtScheme::Proposed)] = attempt(CmtScheme::Proposed, known)?;
    Ok(verdicts)
}

/// Designs `scheme` for the setup drawn from `seed` at SINR target
/// `gamma_db`. The joint scheme is seeded with all three baselines.
pub fn run_case_a(cfg: &CaseA, seed: u64, scheme: CmtScheme, gamma_db: f64) -> Result<CmtDesign> {
    let (scene, ch) = cfg.setup(seed)?;
    let qos = cfg.qos_at(gamma_db);
    qos.validate()?;
    if scheme != CmtScheme::Proposed {
        return cmt_design_seeded(&scene, &ch, &qos, scheme, &cfg.opts, &[]);
    }
    let mut seeds = Vec::new();
    for b in BASELINES {
        seeds.push(cmt_design_seeded(&scene, &ch, &qos, b, &cfg.opts, &[])?);
    }
    let refs: Vec<&CmtDesign> = seeds.iter().collect();
    cmt_design_seeded(&scene, &ch, &qos, scheme, &cfg.opts, &refs)
}

/// Per-setup verdicts of a case-A sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilitySweep {
    pub gamma_db: Vec<f64>,
    pub schemes: Vec<CmtScheme>,
    pub seeds: Vec<u64>,
    /// `verdicts[setup][scheme][gamma]`, schemes in the order of `schemes`.
    pub verdicts: Vec<Vec<Vec<Verdict>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityRow {
    pub scheme: String,
    pub gamma_db: f64,
    /// Fraction of setups without a verified feasible design.
    pub infeasibility: f64,
    /// Setups among the infeasible ones where the solver failed numerically.
    pub failures: usize,
    pub ci_halfwidth: f64,
    pub n_setups: usize,
}

impl InfeasibilitySweep {
    pub fn rows(&self) -> Vec<InfeasibilityRow> {
        let n = self.seeds.len();
        let mut rows = Vec::new();
        for (si, s) in self.schemes.iter().enumerate() {
            for (gi, &g) in self.gamma_db.iter().enumerate() {
                let at = || self.verdicts.iter().map(|v| v[si][gi]);
                let bad = at().filter(|&v| v != Verdict::Feasible).count();
                let failures = at().filter(|&v| v == Verdict::Failure).count();
                let p = if n == 0 { f64::NAN } else { bad as f64 / n as f64 };
                rows.push(InfeasibilityRow {
                    scheme: s.name().into(),
                    gamma_db: g,
                    infeasibility: p,
                    failures,
                    ci_halfwidth: proportion_halfwidth(p, n),
                    n_setups: n,
                });
            }
        }
        rows
    }

    /// Infeasibility curve of `scheme`, one value per grid point.
    pub fn curve(&self, scheme: CmtScheme) -> Option<Vec<f64>> {
        let si = self.schemes.iter().position(|&s| s == scheme)?;
        let n = self.seeds.len() as f64;
        Some(
            (0..self.gamma_db.len())
                .map(|gi| self.verdicts.iter().filter(|v| v[si][gi] != Verdict::Feasible).count() as f64 / n)
                .collect(),
        )
    }
}

/// Runs `n_setups` random setups over the SINR grid. Within a setup the
/// grid is walked from the hardest target down and any verified design is
/// re-checked at easier targets before solving again, so every curve is
/// non-decreasing in the target.
pub fn sweep_infeasibility(
    cfg: &CaseA,
    gamma_grid_db: &[f64],
    n_setups: usize,
    schemes: &[CmtScheme],
    master_seed: u64,
) -> Result<InfeasibilitySweep> {
    check_grid("gamma_db", gamma_grid_db)?;
    cfg.scenario.validate()?;
    cfg.qos.validate()?;
    let opts = CmtOptions { stop_at_first_feasible: true, ..cfg.opts.clone() };
    let seeds = setup_seeds(master_seed, n_setups);
    // Setups are independent; results are collected in seed order.
    let verdicts = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| -> Result<Vec<Vec<Verdict>>> {
            let (scene, ch) = cfg.setup(seed)?;
            let mut known: [Option<CmtDesign>; 4] = Default::default();
            let mut per = vec![vec![Verdict::Infeasible; gamma_grid_db.len()]; schemes.len()];
            for (gi, &g) in gamma_grid_db.iter().enumerate().rev() {
                let v = all_schemes(&scene, &ch, &cfg.qos_at(g), &opts, &mut known)?;
                for (si, &s) in schemes.iter().enumerate() {
                    per[si][gi] = v[index(s)];
                }
            }
            info!("case A setup {} of {n_setups} done", i + 1);
            Ok(per)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InfeasibilitySweep { gamma_db: gamma_grid_db.to_vec(), schemes: schemes.to_vec(), seeds, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CaseA {
        CaseA {
            scenario: ScenarioSpec { antennas_per_bs: vec![4; 4], n_cu: 3, n_clutter: 1, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn loose_targets_are_always_met() {
        let cfg = CaseA { qos: QosTargets { crlb_max: 1e6, ..Default::default() }, ..small() };
        let sw = sweep_infeasibility(&cfg, &[-30.0], 3, &CmtScheme::ALL, 1).unwrap();
        for r in sw.rows() {
            assert_eq!(r.infeasibility, 0.0, "{r:?}");
        }
    }

    #[test]
    fn zero_budget_is_never_feasible() {
        let cfg = CaseA { qos: QosTargets { power_budget: 0.0, ..Default::default() }, ..small() };
        let sw = sweep_infeasibility(&cfg, &[0.0, 4.0], 2, &CmtScheme::ALL, 1).unwrap();
        assert!(sw.rows().iter().all(|r| r.infeasibility == 1.0));
    }

    #[test]
    fn curves_are_nested_and_dominated() {
        let sw = sweep_infeasibility(&small(), &[0.0, 6.0, 12.0], 3, &CmtScheme::ALL, 5).unwrap();
        for s in CmtScheme::ALL {
            let c = sw.curve(s).unwrap();
            assert!(c.windows(2).all(|w| w[0] <= w[1]), "{s:?} {c:?}");
        }
        for v in &sw.verdicts {
            for gi in 0..3 {
                if v[1][gi] == Verdict::Feasible || v[2][gi] == Verdict::Feasible {
                    assert_eq!(v[0][gi], Verdict::Feasible);
                }
            }
        }
    }
}
