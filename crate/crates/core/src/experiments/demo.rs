//! One technique on one random setup, for inspection.

use rand::Rng;

use crate::config::{RunConfig, Technique};
use crate::error::{invalid, Result};
use crate::experiments::{run_case_a, run_case_b, setup_seed};
use crate::metrics::beampattern;
use crate::scene::{stream, substream, Scene};
use crate::solvers::SolveReport;
use crate::techniques::hdbf::{hdbf_design, HdbfSpec};
use crate::techniques::ia::ia_plan;
use crate::techniques::sa::band_collisions;
use crate::techniques::{sa_design, Assignment, CmtScheme, SaMethod, TsScheme};

/// `(subject, metric, value)` rows plus optional artifacts.
#[derive(Clone, Debug, Default)]
pub struct DemoOutput {
    pub metrics: Vec<(String, String, f64)>,
    pub scene: Option<(Scene, Option<Assignment>)>,
    /// `(θ, gain, ideal)` samples.
    pub beampattern: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    pub traces: Vec<(String, SolveReport<f64>)>,
}

impl DemoOutput {
    fn push(&mut self, subject: &str, metric: &str, value: f64) {
        self.metrics.push((subject.into(), metric.into(), value));
    }
}

/// Runs `technique` on setup 0 of `cfg`.
pub fn run_demo(cfg: &RunConfig, technique: Technique) -> Result<DemoOutput> {
    let seed = setup_seed(cfg.seed, 0);
    let mut out = DemoOutput::default();
    match technique {
        Technique::Cmt => {
            let case = cfg.case_a();
            let gamma = cfg.qos.sinr_min_db.ok_or_else(|| invalid("the CMT demo needs qos.sinr_min_db"))?;
            let mut proposed = None;
            for s in CmtScheme::ALL {
                let d = run_case_a(&case, seed, s, gamma)?;
                out.push(s.name(), "feasible", f64::from(u8::from(d.feasible)));
                out.push(s.name(), "total_power_w", d.total_power);
                out.push(s.name(), "min_sinr_db", d.sinr.iter().copied().fold(f64::INFINITY, f64::min).log10() * 10.0);
                out.push(s.name(), "max_crlb", d.crlb.iter().copied().fold(0.0, f64::max));
                out.traces.push((s.name().into(), d.report.clone()));
                if s == CmtScheme::Proposed {
                    proposed = Some(d);
                }
            }
            let (scene, _) = case.setup(seed)?;
            out.scene = Some((scene, proposed.filter(|d| d.feasible).map(|d| d.assignment)));
        }
        Technique::Ia => {
            let (scene, ch) = cfg.case_a().setup(seed)?;
            let st = (ch.n_st() > 0).then_some(0);
            let (_, d) = ia_plan(&ch, 0, st, cfg.qos.power_budget)?;
            out.push("bs0", "exact", f64::from(u8::from(d.exact)));
            out.push("bs0", "nulling_residual", d.nulling_residual);
            out.push("bs0", "iterations", d.report.iterations as f64);
            out.traces.push(("ia".into(), d.report.clone()));
            out.scene = Some((scene, None));
        }
        Technique::Hdbf => {
            let (scene, ch) = cfg.case_a().setup(seed)?;
            let center = if ch.n_st() > 0 { ch.targets[0].angle[0] } else { 0.0 };
            let spec = HdbfSpec::centered(ch.bs_antennas[0], center, cfg.ts.beam_width_deg.to_radians(), cfg.qos.power_budget);
            let d = hdbf_design(&spec)?;
            out.push("bs0", "mse", d.mse);
            out.push("bs0", "isotropic_mse", d.isotropic_mse);
            out.push("bs0", "peak_gain", beampattern(&d.covariance, center)?);
            let gain = d.grid.iter().map(|&t| beampattern(&d.covariance, t)).collect::<Result<Vec<_>>>()?;
            out.beampattern = Some((d.grid.clone(), gain, d.ideal.clone()));
            out.traces.push(("hdbf".into(), d.report.clone()));
            out.scene = Some((scene, None));
        }
        Technique::Ts => {
            let case = cfg.case_b();
            let n = *cfg.sweep.antennas.first().ok_or_else(|| invalid("the TS demo needs sweep.antennas"))?;
            for s in TsScheme::ALL {
                let d = run_case_b(&case, seed, s, n)?;
                out.push(s.name(), "feasible", f64::from(u8::from(d.feasible)));
                out.push(s.name(), "energy_j", d.energy);
                out.push(s.name(), "tau_c", d.tau.0);
                out.push(s.name(), "tau_s", d.tau.1);
                out.traces.push((s.name().into(), d.report.clone()));
            }
            out.scene = Some((case.setup(seed, n)?.scene, None));
        }
        Technique::Sa => {
            // Communication tasks first, then sensing tasks; a sensing task
            // may not share a subcarrier with any communication task.
            let n_sub = 16;
            let (nc, ns) = (cfg.scenario.n_cu, cfg.scenario.n_st);
            let nt = nc + ns;
            let costs: Vec<Vec<f64>> = (0..nt)
                .map(|t| {
                    let mut rng = substream(seed, stream::SUBCARRIER, t as u64, 0);
                    (0..n_sub).map(|_| -(rng.gen::<f64>().max(1e-12)).ln()).collect()
                })
                .collect();
            let demands = vec![n_sub / nt.max(1); nt];
            let conflicts: Vec<(usize, usize)> = (0..nc).flat_map(|c| (nc..nt).map(move |s| (c, s))).collect();
            for (name, m) in [("exact", SaMethod::Exact), ("lpr", SaMethod::Lpr)] {
                let d = sa_design(&costs, &demands, &conflicts, m)?;
                out.push(name, "objective", d.report.objective);
                out.push(name, "feasible", f64::from(u8::from(d.assign.is_some())));
                if let Some(a) = &d.assign {
                    out.push(name, "collisions", band_collisions(a, &conflicts) as f64);
                }
            }
        }
    }
    Ok(out)
}
