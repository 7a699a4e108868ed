//! Time splitting between a communication phase and a sensing phase in a
//! distributed antenna network.
//!
//! During the communication phase (fraction `τ_c` of the frame) every RRH
//! jointly transmits to the CUs. During the sensing phase (`τ_s`) the RRH
//! nearest each ST transmits a flat-top sensing covariance and collects the
//! echo. Frame energy is minimized under per-CU rate, per-ST echo energy,
//! per-RRH power and fronthaul limits.
//!
//! Beams are parameterized by energy (`ŵ = √τ_c·w`, `ê_r = τ_s·P_r`), which
//! makes the objective linear. Two solvers are offered: alternating
//! optimization over beams and time fractions, and a joint convex
//! approximation using an exponential cone for `2^{R/τ}` and a DC
//! inner approximation of the SINR product.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, IsacError, Result};
use crate::interference::BeamPlan;
use crate::linalg::{dot, norm_sqr, scaled, CMat, CVec};
use crate::metrics::{achievable_rate, comm_sinr, echo_power, QosTargets};
use crate::scalar::cplx;
use crate::scene::{ChannelSet, Scene};
use crate::solvers::{
    ao_minimize, lower_cut, sca_minimize, solve_conic, AffineExpr, ConicProblem, IterOptions, SolveReport, SolveStatus,
    Surrogate,
};
use crate::techniques::hdbf::{hdbf_design, HdbfSpec};
use crate::techniques::{Assignment, BeamVar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsScheme {
    /// Distributed RRHs with optimized time split.
    Proposed,
    /// One co-located BS at the cell center with a multi-beam sensing pattern.
    Baseline1,
    /// Distributed RRHs with an even split `τ_c = τ_s = ½`.
    Baseline2,
}

impl TsScheme {
    pub const ALL: [TsScheme; 3] = [TsScheme::Proposed, TsScheme::Baseline1, TsScheme::Baseline2];

    pub fn name(self) -> &'static str {
        match self {
            TsScheme::Proposed => "proposed",
            TsScheme::Baseline1 => "baseline1",
            TsScheme::Baseline2 => "baseline2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsMode {
    /// Alternating optimization.
    Ao,
    /// Joint convex approximation of the bilinear problem, started from AO.
    Bt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsOptions {
    /// Frame duration in seconds.
    pub frame: f64,
    pub mode: TsMode,
    /// Mainlobe width of each sensing beam in degrees.
    pub beam_width_deg: f64,
    pub grid_points: usize,
    pub pattern_iters: usize,
    pub ao_tol: f64,
    pub ao_max_iter: usize,
    /// Candidate `τ_c` values scanned by the time block.
    pub tau_grid: usize,
    pub verify_tol: f64,
}

impl Default for TsOptions {
    fn default() -> Self {
        Self {
            frame: 0.01,
            mode: TsMode::Ao,
            beam_width_deg: 10.0,
            grid_points: 181,
            pattern_iters: 2000,
            ao_tol: 1e-6,
            ao_max_iter: 20,
            tau_grid: 400,
            verify_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TsDesign {
    pub scheme: TsScheme,
    pub feasible: bool,
    /// Frame energy in joules.
    pub energy: f64,
    /// `(τ_c, τ_s)`.
    pub tau: (f64, f64),
    /// Stacked (all RRHs) communication beam of each CU during the communication phase.
    pub beams: Vec<CVec<f64>>,
    /// Unit-power sensing covariance of each RRH that serves an ST.
    pub sense_cov: Vec<Option<CMat<f64>>>,
    /// Sensing-phase transmit power of each RRH.
    pub sense_power: Vec<f64>,
    /// Communication-phase plan (per-RRH beams).
    pub plan: BeamPlan<f64>,
    pub rates: Vec<f64>,
    /// Frame-averaged echo power of each ST.
    pub echoes: Vec<f64>,
    pub assignment: Assignment,
    pub report: SolveReport<f64>,
}

impl TsDesign {
    fn infeasible(scheme: TsScheme, ch: &ChannelSet<f64>, report: SolveReport<f64>) -> Self {
        Self {
            scheme,
            feasible: false,
            energy: f64::INFINITY,
            tau: (0.0, 0.0),
            beams: Vec::new(),
            sense_cov: vec![None; ch.n_bs()],
            sense_power: vec![0.0; ch.n_bs()],
            plan: BeamPlan::empty(&ch.bs_antennas, ch.n_cu()),
            rates: Vec::new(),
            echoes: Vec::new(),
            assignment: Assignment::default(),
            report,
        }
    }
}

const RATE_MARGIN: f64 = 1.0 + 1e-7;

/// Sensing side: per-RRH covariances and minimum sensing energies.
struct Sensing {
    /// RRH sensing each ST.
    node: Vec<usize>,
    cov: Vec<Option<CMat<f64>>>,
    /// Minimum `τ_s·P_r` of each RRH.
    energy: Vec<f64>,
}

fn echo_gain(ch: &ChannelSet<f64>, s: usize, r: usize, cov: &CMat<f64>) -> Result<f64> {
    let a = ch.target_steering(s, r);
    echo_power(cov, ch.targets[s].alpha(r, r), &a, &a, &a)
}

fn sensing(scene: &Scene, ch: &ChannelSet<f64>, qos: &QosTargets, opts: &TsOptions, warm: Option<&TsDesign>) -> Result<Sensing> {
    let nb = ch.n_bs();
    let node: Vec<usize> = (0..ch.n_st())
        .map(|s| scene.nearest_bs(scene.st_positions[s], 0..nb).ok_or_else(|| invalid("no RRH")))
        .collect::<Result<_>>()?;
    let echo_min = qos.echo_min_watts();
    let mut cov = vec![None; nb];
    let mut energy = vec![0.0; nb];
    let half = opts.beam_width_deg.to_radians() / 2.0;
    for r in 0..nb {
        let targets: Vec<usize> = (0..ch.n_st()).filter(|&s| node[s] == r).collect();
        if targets.is_empty() {
            continue;
        }
        let mut spec = HdbfSpec::centered(ch.bs_antennas[r], 0.0, 0.0, 1.0);
        spec.mainlobes = targets.iter().map(|&s| (ch.targets[s].angle[r] - half, ch.targets[s].angle[r] + half)).collect();
        spec.grid_points = opts.grid_points;
        spec.options.max_iter = opts.pattern_iters;
        let mut candidates = vec![hdbf_design(&spec)?.covariance];
        if let Some(Some(prev)) = warm.and_then(|w| w.sense_cov.get(r)) {
            if prev.rows() <= ch.bs_antennas[r] {
                candidates.push(prev.embed(ch.bs_antennas[r], ch.bs_antennas[r]));
            }
        }
        // Keep the covariance whose worst echo gain is largest.
        let mut best: Option<(f64, CMat<f64>, Vec<f64>)> = None;
        for c in candidates {
            let g: Vec<f64> = targets.iter().map(|&s| echo_gain(ch, s, r, &c)).collect::<Result<_>>()?;
            let worst = g.iter().copied().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|(w, _, _)| worst > *w) {
                best = Some((worst, c, g));
            }
        }
        let (worst, c, _) = best.expect("at least one candidate");
        if !(worst > 0.0) {
            return Err(IsacError::NonIdentifiable(worst));
        }
        energy[r] = echo_min / worst;
        cov[r] = Some(c);
    }
    Ok(Sensing { node, cov, energy })
}

/// Normalized communication data.
struct Comm {
    /// Stacked channel of each CU divided by `σ`.
    h: Vec<CVec<f64>>,
    /// Antenna ranges of the RRHs inside the stacked vector.
    blocks: Vec<(usize, usize)>,
    rate: f64,
    p_max: f64,
    tau_lo: f64,
    tau_hi: f64,
}

impl Comm {
    fn n(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.1)
    }

    fn gamma(&self, tau: f64) -> f64 {
        2f64.powf(self.rate / tau) - 1.0
    }

    fn var(&self, k: usize) -> BeamVar {
        BeamVar { offset: 1 + 2 * self.n() * k, n: self.n() }
    }

    fn read(&self, x: &[f64]) -> Vec<CVec<f64>> {
        (0..self.h.len()).map(|k| self.var(k).read(x)).collect()
    }

    fn block_power(&self, w: &[CVec<f64>], r: usize) -> f64 {
        let (a, b) = self.blocks[r];
        w.iter().map(|wk| norm_sqr(&wk[a..b])).sum()
    }

    /// Beam block: minimum-energy beams for a fixed `τ_c`. The result keeps
    /// the layout `[τ_c, ŵ_1, …, ŵ_K]`.
    fn beams_at(&self, tau: f64) -> Result<SolveReport<f64>> {
        let nk = self.h.len();
        let n = self.n();
        let mut p = ConicProblem::new();
        let t = p.add_var();
        p.add_eq(AffineExpr::var(t).plus_const(-tau));
        let vars: Vec<BeamVar> = (0..nk).map(|_| BeamVar { offset: p.add_vars(2 * n), n }).collect();
        for v in &vars {
            let e = p.add_var();
            p.add_objective(e, 1.0);
            p.add_rotated_soc(AffineExpr::var(e), AffineExpr::constant(1.0), v.coords(1.0));
        }
        for &(a, b) in &self.blocks {
            let mut entries = Vec::new();
            for v in &vars {
                for i in a..b {
                    entries.push(AffineExpr::var(v.re(i)));
                    entries.push(AffineExpr::var(v.im(i)));
                }
            }
            p.add_rotated_soc(AffineExpr::constant(tau * self.p_max), AffineExpr::constant(1.0), entries);
        }
        let sg = (self.gamma(tau) * RATE_MARGIN).sqrt();
        for k in 0..nk {
            let (re, im) = vars[k].inner(&self.h[k], 1.0);
            let mut entries = Vec::new();
            for (j, v) in vars.iter().enumerate().filter(|&(j, _)| j != k) {
                let _ = j;
                let (r, i) = v.inner(&self.h[k], sg);
                entries.push(r);
                entries.push(i);
            }
            entries.push(AffineExpr::constant(sg * tau.sqrt()));
            p.add_eq(im);
            p.add_soc(re, entries);
        }
        let r = solve_conic(&p)?;
        if !r.status.is_optimal() {
            return Ok(r);
        }
        let keep = 1 + 2 * n * nk;
        let mut sol = r.solution.clone();
        sol.truncate(keep);
        sol[0] = tau;
        Ok(SolveReport { solution: sol, ..r })
    }

    fn feasible_tau(&self, w: &[CVec<f64>], tau: f64) -> bool {
        if tau < self.tau_lo - 1e-12 || tau > self.tau_hi + 1e-12 || tau <= 0.0 {
            return false;
        }
        if (0..self.blocks.len()).any(|r| self.block_power(w, r) > tau * self.p_max * (1.0 + 1e-9)) {
            return false;
        }
        let g = self.gamma(tau);
        (0..self.h.len()).all(|k| {
            let d = dot(&self.h[k], &w[k]).norm_sqr();
            let i: f64 = (0..self.h.len()).filter(|&j| j != k).map(|j| dot(&self.h[k], &w[j]).norm_sqr()).sum();
            d >= g * (i + tau) * (1.0 + 1e-9)
        })
    }

    /// Time block: largest feasible `τ_c` for fixed beams (the energy does
    /// not depend on it; a longer communication phase relaxes the next beam block).
    fn tau_block(&self, x: &[f64], grid: usize) -> SolveReport<f64> {
        let w = self.read(x);
        let cur = x[0];
        let mut best = cur;
        if self.feasible_tau(&w, self.tau_hi) {
            best = self.tau_hi;
        } else {
            for i in 0..grid {
                let tau = self.tau_hi - (self.tau_hi - cur) * (i as f64 + 1.0) / (grid as f64 + 1.0);
                if tau > best && self.feasible_tau(&w, tau) {
                    best = tau;
                    break;
                }
            }
        }
        let mut sol = x.to_vec();
        sol[0] = best;
        SolveReport::with_status(SolveStatus::Optimal, sol)
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.read(x).iter().map(|w| norm_sqr(w)).sum()
    }
}

/// Joint convex approximation in `(τ_c, ŵ)` around a feasible point.
struct Joint<'a> {
    c: &'a Comm,
    n_base: usize,
}

impl Joint<'_> {
    /// Auxiliary layout after the AO variables: per CU `(t, z, u, s, e)`.
    fn aux(&self, k: usize) -> [usize; 5] {
        let b = self.n_base + 5 * k;
        [b, b + 1, b + 2, b + 3, b + 4]
    }

    fn extend(&self, x: &[f64]) -> Vec<f64> {
        let c = self.c;
        let tau = x[0];
        let w = c.read(x);
        let mut out = x[..self.n_base].to_vec();
        out.resize(self.n_base + 5 * c.h.len(), 0.0);
        for k in 0..c.h.len() {
            let i: f64 = (0..c.h.len()).filter(|&j| j != k).map(|j| dot(&c.h[k], &w[j]).norm_sqr()).sum();
            let [t, z, u, s, e] = self.aux(k);
            out[t] = c.gamma(tau);
            out[z] = i + tau;
            out[u] = out[t] * out[z];
            out[s] = c.rate * std::f64::consts::LN_2 / tau;
            out[e] = norm_sqr(&w[k]);
        }
        out
    }
}

impl Surrogate<f64> for Joint<'_> {
    fn objective(&mut self, x: &[f64]) -> Result<f64> {
        Ok(self.c.energy(x))
    }

    fn surrogate_value(&mut self, x: &[f64], _at: &[f64]) -> Result<f64> {
        Ok(self.c.energy(x))
    }

    fn minimize(&mut self, at: &[f64]) -> Result<SolveReport<f64>> {
        let c = self.c;
        let nk = c.h.len();
        let n = c.n();
        let mut p = ConicProblem::new();
        let tau = p.add_var();
        let vars: Vec<BeamVar> = (0..nk).map(|_| BeamVar { offset: p.add_vars(2 * n), n }).collect();
        debug_assert_eq!(p.n_vars, self.n_base);
        p.add_bounds(tau, c.tau_lo, c.tau_hi);
        let w0 = c.read(at);
        for k in 0..nk {
            let t = p.add_var();
            let z = p.add_var();
            let u = p.add_var();
            let s = p.add_var();
            let e = p.add_var();
            debug_assert_eq!([t, z, u, s, e], self.aux(k));
            p.add_objective(e, 1.0);
            p.add_rotated_soc(AffineExpr::var(e), AffineExpr::constant(1.0), vars[k].coords(1.0));
            // s·τ ≥ R ln 2  and  1 + t ≥ e^s  ⇒  t ≥ 2^{R/τ} − 1
            p.add_rotated_soc(AffineExpr::var(s), AffineExpr::var(tau), vec![AffineExpr::constant((c.rate * std::f64::consts::LN_2).sqrt())]);
            p.add_exp(AffineExpr::var(s), AffineExpr::constant(1.0), AffineExpr::var(t).plus_const(1.0));
            p.add_nonneg(AffineExpr::var(t));
            // z ≥ Σ_{j≠k} |h^H ŵ_j|² + τ
            let mut entries = Vec::new();
            for (j, v) in vars.iter().enumerate() {
                if j != k {
                    let (r, i) = v.inner(&c.h[k], 1.0);
                    entries.push(r);
                    entries.push(i);
                }
            }
            p.add_rotated_soc(AffineExpr::var(z).plus(tau, -1.0), AffineExpr::constant(1.0), entries);
            // u ≥ t·z, inner-approximated at the expansion point.
            lower_cut(&mut p, &AffineExpr::var(t), &AffineExpr::var(z), &AffineExpr::var(u), (at[t], at[z]));
            // |h^H ŵ_k|² ≥ u, linearized from below.
            let g0 = dot(&c.h[k], &w0[k]);
            let coef = scaled(&c.h[k], g0 * 2.0);
            let (re, _) = vars[k].inner(&coef, 1.0);
            p.add_le(AffineExpr::var(u).plus_const(g0.norm_sqr()), re);
        }
        for &(a, b) in &c.blocks {
            let mut entries = Vec::new();
            for v in &vars {
                for i in a..b {
                    entries.push(AffineExpr::var(v.re(i)));
                    entries.push(AffineExpr::var(v.im(i)));
                }
            }
            p.add_rotated_soc(AffineExpr::term(tau, c.p_max), AffineExpr::constant(1.0), entries);
        }
        solve_conic(&p)
    }
}

fn comm_data(ch: &ChannelSet<f64>, qos: &QosTargets, scheme: TsScheme, tau_s_min: f64) -> Result<Comm> {
    let rate = qos.rate_min.ok_or_else(|| invalid("time splitting needs a rate target"))?;
    let sigma = ch.noise_power.sqrt();
    let mut blocks = Vec::new();
    let mut at = 0;
    for &n in &ch.bs_antennas {
        blocks.push((at, at + n));
        at += n;
    }
    let h = (0..ch.n_cu())
        .map(|k| ch.comm.iter().flat_map(|row| row[k].iter().map(|x| x / sigma)).collect())
        .collect();
    // Every RRH carries every CU's data over the fronthaul; a co-located BS has none.
    let tau_lo = match scheme {
        TsScheme::Baseline1 => 0.0,
        _ => ch.n_cu() as f64 * rate / qos.fronthaul_cap,
    };
    Ok(Comm { h, blocks, rate, p_max: qos.power_budget, tau_lo, tau_hi: 1.0 - tau_s_min })
}

fn assemble(
    scheme: TsScheme,
    ch: &ChannelSet<f64>,
    qos: &QosTargets,
    opts: &TsOptions,
    comm: &Comm,
    sense: &Sensing,
    x: &[f64],
    tau_s: f64,
    report: SolveReport<f64>,
) -> Result<TsDesign> {
    let tau_c = x[0];
    let beams = comm.read(x);
    let mut plan = BeamPlan::empty(&ch.bs_antennas, ch.n_cu());
    let amp = cplx(1.0 / tau_c.sqrt(), 0.0);
    for (r, &(a, b)) in comm.blocks.iter().enumerate() {
        for k in 0..ch.n_cu() {
            plan.comm[r][k] = scaled(&beams[k][a..b], amp);
        }
    }
    let tol = opts.verify_tol;
    let rate = comm.rate;
    let mut ok = tau_c + tau_s <= 1.0 + tol && tau_c >= comm.tau_lo * (1.0 - tol);
    let mut rates = Vec::new();
    for k in 0..ch.n_cu() {
        let r = achievable_rate(comm_sinr(k, ch, &plan)?, tau_c)?;
        ok &= r >= rate * (1.0 - tol);
        rates.push(r);
    }
    for b in 0..ch.n_bs() {
        ok &= plan.tx_power(b) <= qos.power_budget * (1.0 + tol);
    }
    let sense_power: Vec<f64> = sense.energy.iter().map(|&e| if tau_s > 0.0 { e / tau_s } else { 0.0 }).collect();
    ok &= sense_power.iter().all(|&p| p <= qos.power_budget * (1.0 + tol));
    let mut echoes = Vec::new();
    for s in 0..ch.n_st() {
        let r = sense.node[s];
        let cov = sense.cov[r].as_ref().expect("sensing RRH has a covariance").scale(sense_power[r]);
        let e = tau_s * echo_gain(ch, s, r, &cov)?;
        ok &= e >= qos.echo_min_watts() * (1.0 - tol);
        echoes.push(e);
    }
    let energy = opts.frame * (comm.energy(x) + sense.energy.iter().sum::<f64>());
    Ok(TsDesign {
        scheme,
        feasible: ok,
        energy,
        tau: (tau_c, tau_s),
        beams,
        sense_cov: sense.cov.clone(),
        sense_power,
        plan,
        rates,
        echoes,
        assignment: Assignment { time_split: Some((tau_c, tau_s)), ..Default::default() },
        report,
    })
}

/// AO from `x0` (`[τ_c, ŵ…]`).
fn run_ao(comm: &Comm, opts: &TsOptions, x0: Vec<f64>) -> Result<SolveReport<f64>> {
    let mut objective = |x: &[f64]| -> Result<f64> { Ok(comm.energy(x)) };
    let grid = opts.tau_grid;
    let mut blocks: Vec<crate::solvers::sca::Block<'_, f64>> = vec![
        Box::new(|x: &[f64]| comm.beams_at(x[0])),
        Box::new(move |x: &[f64]| Ok(comm.tau_block(x, grid))),
    ];
    // The start need not be feasible: solve its beam block first.
    let first = comm.beams_at(x0[0])?;
    if !first.status.is_optimal() {
        return Ok(first);
    }
    ao_minimize(&mut objective, &mut blocks, first.solution, &IterOptions { tol: opts.ao_tol, max_iter: opts.ao_max_iter })
}

fn warm_start(comm: &Comm, warm: &TsDesign) -> Option<Vec<f64>> {
    if !warm.feasible || warm.beams.len() != comm.h.len() {
        return None;
    }
    let n = comm.n();
    let per_old = warm.plan.comm.iter().map(|row| row.first().map_or(0, |w| w.len())).collect::<Vec<_>>();
    if per_old.len() != comm.blocks.len() {
        return None;
    }
    let tau = warm.tau.0.clamp(comm.tau_lo, comm.tau_hi);
    let mut x = vec![0.0; 1 + 2 * n * comm.h.len()];
    x[0] = tau;
    for k in 0..comm.h.len() {
        let mut w = vec![cplx(0.0, 0.0); n];
        let mut old_at = 0;
        for (r, &(a, b)) in comm.blocks.iter().enumerate() {
            let m = per_old[r].min(b - a);
            w[a..a + m].copy_from_slice(&warm.beams[k][old_at..old_at + m]);
            old_at += per_old[r];
        }
        comm.var(k).write(&mut x, &w);
    }
    Some(x)
}

/// Designs `scheme` for one setup. For [`TsScheme::Baseline1`] the channels
/// must describe the co-located BS. `warm` is a design for the same setup
/// with fewer antennas; its zero-padded beams and covariances are used as an
/// extra start, so adding antennas never costs energy.
pub fn ts_design(
    scene: &Scene,
    channels: &ChannelSet<f64>,
    qos: &QosTargets,
    scheme: TsScheme,
    opts: &TsOptions,
    warm: Option<&TsDesign>,
) -> Result<TsDesign> {
    channels.validate()?;
    qos.validate()?;
    if scene.n_bs() != channels.n_bs() {
        return Err(invalid("scene and channels disagree"));
    }
    let sense = sensing(scene, channels, qos, opts, warm)?;
    let tau_s_min = sense.energy.iter().copied().fold(0.0, f64::max) / qos.power_budget;
    let comm = comm_data(channels, qos, scheme, tau_s_min)?;
    if comm.tau_hi < comm.tau_lo || comm.tau_hi <= 0.0 {
        let r = SolveReport::with_status(SolveStatus::Infeasible, Vec::new());
        return Ok(TsDesign::infeasible(scheme, channels, r));
    }
    let mut starts: Vec<Vec<f64>> = Vec::new();
    let zeros = |tau: f64| {
        let mut x = vec![0.0; 1 + 2 * comm.n() * comm.h.len()];
        x[0] = tau;
        x
    };
    match scheme {
        TsScheme::Baseline2 => {
            if comm.tau_hi < 0.5 || comm.tau_lo > 0.5 {
                let r = SolveReport::with_status(SolveStatus::Infeasible, Vec::new());
                return Ok(TsDesign::infeasible(scheme, channels, r));
            }
            let r = comm.beams_at(0.5)?;
            if !r.status.is_optimal() {
                return Ok(TsDesign::infeasible(scheme, channels, r));
            }
            let x = r.solution.clone();
            let tau_s = if channels.n_st() == 0 { 0.0 } else { 0.5 };
            return assemble(scheme, channels, qos, opts, &comm, &sense, &x, tau_s, r);
        }
        TsScheme::Proposed | TsScheme::Baseline1 => {
            starts.push(zeros(comm.tau_hi));
            if comm.tau_lo <= 0.5 && comm.tau_hi >= 0.5 {
                starts.push(zeros(0.5));
            }
            if let Some(x) = warm.and_then(|w| warm_start(&comm, w)) {
                starts.push(x);
            }
        }
    }
    let mut best: Option<SolveReport<f64>> = None;
    let mut last = SolveReport::with_status(SolveStatus::Infeasible, Vec::new());
    for x0 in starts {
        let r = run_ao(&comm, opts, x0)?;
        if r.status.is_optimal() {
            if best.as_ref().is_none_or(|b| r.objective < b.objective) {
                best = Some(r);
            }
        } else {
            last = r;
        }
    }
    let Some(mut report) = best else {
        return Ok(TsDesign::infeasible(scheme, channels, last));
    };
    if opts.mode == TsMode::Bt {
        let n_base = report.solution.len();
        let mut joint = Joint { c: &comm, n_base };
        let x0 = joint.extend(&report.solution);
        let r = sca_minimize(&mut joint, x0, &IterOptions { tol: opts.ao_tol, max_iter: opts.ao_max_iter })?;
        if r.status.is_optimal() && r.objective <= report.objective {
            let mut trace = report.trace.clone();
            trace.extend(r.trace.iter().skip(1));
            let mut sol = r.solution.clone();
            sol.truncate(n_base);
            report = SolveReport { solution: sol, trace, iterations: report.iterations + r.iterations, ..r };
        }
    }
    let x = report.solution.clone();
    assemble(scheme, channels, qos, opts, &comm, &sense, &x, tau_s_min, report)
}
