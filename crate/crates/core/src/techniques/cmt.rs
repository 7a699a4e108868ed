//! Coordinated multipoint transmission with joint echo-receiver selection,
//! CU association and beamforming.
//!
//! One BS is chosen to receive target echoes and stays silent; the others
//! serve the CUs (each CU by exactly one BS, at most `k_max` per BS) and may
//! add dedicated sensing beams. Total transmit power is minimized subject to
//! per-CU SINR, per-ST angle CRLB and per-BS power limits.
//!
//! Everything is solved in noise-normalized units (`ŵ = w/√P`, channels
//! scaled by `√P/σ`). SINR constraints use the usual phase-rotated
//! second-order cone; the CRLB constraint is a difference of convex
//! quadratics handled by SCA with an exact-penalty slack, and the binaries by
//! a concave penalty.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, IsacError, Result};
use crate::interference::BeamPlan;
use crate::linalg::{dot, norm_sqr, scaled, CMat, CVec};
use crate::metrics::{comm_sinr, network_crlb, QosTargets};
use crate::scalar::{cplx, Cplx};
use crate::scene::{stream, substream, ChannelSet, Scene};
use crate::solvers::penalty::{binary_gap, BINARY_TOL};
use crate::solvers::{
    penalize_binary, sca_minimize, solve_conic, AffineExpr, ConicProblem, IterOptions, PenalizedProblem, PenaltySchedule,
    SolveReport, SolveStatus, Surrogate,
};
use crate::techniques::{Assignment, BeamVar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmtScheme {
    /// Joint receiver selection, association and beamforming.
    Proposed,
    /// BS 1 receives, only BS 0 sends a sensing beam, nearest-BS association.
    Baseline1,
    /// Random receiver and random association.
    Baseline2,
    /// Monostatic sensing at the BS nearest the ST, which sends only a sensing beam.
    Baseline3,
}

impl CmtScheme {
    pub const ALL: [CmtScheme; 4] = [CmtScheme::Proposed, CmtScheme::Baseline1, CmtScheme::Baseline2, CmtScheme::Baseline3];

    pub fn name(self) -> &'static str {
        match self {
            CmtScheme::Proposed => "proposed",
            CmtScheme::Baseline1 => "baseline1",
            CmtScheme::Baseline2 => "baseline2",
            CmtScheme::Baseline3 => "baseline3",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmtOptions {
    /// Snapshots per CRLB estimate.
    pub snapshots: usize,
    /// Most CUs one BS may serve.
    pub k_max: usize,
    pub penalty_start: f64,
    pub penalty_factor: f64,
    pub penalty_cap: f64,
    /// Relative-decrease tolerance of the SCA loops.
    pub sca_tol: f64,
    pub sca_max_iter: usize,
    /// Weight of the CRLB slack in the exact penalty.
    pub slack_weight: f64,
    /// Relative tolerance of the final metric check.
    pub verify_tol: f64,
    /// Return as soon as any feasible design is known instead of refining it.
    pub stop_at_first_feasible: bool,
}

impl Default for CmtOptions {
    fn default() -> Self {
        Self {
            snapshots: 16,
            k_max: 3,
            penalty_start: 1.0,
            penalty_factor: 5.0,
            penalty_cap: 1e8,
            sca_tol: 1e-6,
            sca_max_iter: 30,
            slack_weight: 1e3,
            verify_tol: 1e-6,
            stop_at_first_feasible: false,
        }
    }
}

impl CmtOptions {
    fn schedule(&self) -> PenaltySchedule {
        PenaltySchedule { start: self.penalty_start, factor: self.penalty_factor, cap: self.penalty_cap }
    }

    fn iter(&self) -> IterOptions {
        IterOptions { tol: self.sca_tol, max_iter: self.sca_max_iter }
    }
}

#[derive(Clone, Debug)]
pub struct CmtDesign {
    pub scheme: CmtScheme,
    pub plan: BeamPlan<f64>,
    pub assignment: Assignment,
    /// Passed the metric-level check of every constraint.
    pub feasible: bool,
    pub total_power: f64,
    pub sinr: Vec<f64>,
    pub crlb: Vec<f64>,
    pub report: SolveReport<f64>,
}

impl CmtDesign {
    fn infeasible(scheme: CmtScheme, channels: &ChannelSet<f64>, report: SolveReport<f64>) -> Self {
        Self {
            scheme,
            plan: BeamPlan::empty(&channels.bs_antennas, channels.n_cu()),
            assignment: Assignment::default(),
            feasible: false,
            total_power: f64::INFINITY,
            sinr: Vec::new(),
            crlb: Vec::new(),
            report,
        }
    }
}

// Internal margins so that solver round-off stays inside the verify tolerance.
const SINR_MARGIN: f64 = 1.0 + 2e-7;
const CRLB_MARGIN: f64 = 1.0 - 2e-7;

/// Normalized problem data shared by every model.
struct Instance<'a> {
    ch: &'a ChannelSet<f64>,
    /// `√P/σ`.
    amp: f64,
    p_max: f64,
    gamma: f64,
    crlb_max: f64,
    snapshots: usize,
}

impl<'a> Instance<'a> {
    fn new(ch: &'a ChannelSet<f64>, qos: &QosTargets, opts: &CmtOptions) -> Result<Self> {
        qos.validate()?;
        let gamma = qos.sinr_min_linear().ok_or_else(|| invalid("CoMP design needs an SINR target"))?;
        Ok(Self {
            ch,
            amp: (qos.power_budget / ch.noise_power).sqrt(),
            p_max: qos.power_budget,
            gamma,
            crlb_max: qos.crlb_max,
            snapshots: opts.snapshots,
        })
    }

    fn n_bs(&self) -> usize {
        self.ch.n_bs()
    }

    fn n_cu(&self) -> usize {
        self.ch.n_cu()
    }

    fn h(&self, b: usize, k: usize) -> CVec<f64> {
        scaled(&self.ch.comm[b][k], cplx(self.amp, 0.0))
    }

    fn q(&self, b: usize, k: usize) -> CVec<f64> {
        scaled(&self.ch.leak[b][k], cplx(self.amp, 0.0))
    }

    /// Unit receive combiner of BS `b` (matched to the first ST).
    fn combiner(&self, b: usize) -> CVec<f64> {
        self.ch.matched_combiner(0, b)
    }

    /// `B` with `J·c / (2L|α|²) ∝ Σ‖B ŵ‖²`, scaled so `Σ‖B ŵ‖² ≥ 1 + Ĩ` is the CRLB constraint.
    fn gain_matrix(&self, s: usize, rx: usize, tx: usize) -> CMat<f64> {
        let ch = self.ch;
        let a_r = ch.target_steering(s, rx);
        let a_r_dot = ch.target_steering_derivative(s, rx);
        let a_t = ch.target_steering(s, tx);
        let alpha = ch.targets[s].alpha(tx, rx).norm_sqr();
        let coef = (self.crlb_max * CRLB_MARGIN * 2.0 * self.snapshots as f64 * alpha).sqrt() * self.amp;
        let mut b = CMat::outer(&a_r_dot, &a_t);
        if tx == rx {
            let a_t_dot = ch.target_steering_derivative(s, tx);
            b = b.add(&CMat::outer(&a_r, &a_t_dot));
        }
        b.scale(coef)
    }

    /// Rows `r` with normalized interference `Σ |r^H ŵ|²` at echo receiver `rx` from beams of `tx`.
    fn noise_rows(&self, rx: usize, tx: usize) -> Result<Vec<CVec<f64>>> {
        let ch = self.ch;
        let u = self.combiner(rx);
        if tx != rx {
            let h = ch.cross[tx][rx].as_ref().ok_or_else(|| invalid("missing crosstalk channel"))?;
            return Ok(vec![scaled(&h.adjoint_mul_vec(&u), cplx(self.amp, 0.0))]);
        }
        let n = ch.bs_antennas[rx];
        let mut rows = Vec::new();
        for c in &ch.clutter {
            let a = crate::scene::steering_vector(n, c.angle[rx])?;
            let g = c.gain[rx].norm() * dot(&u, &a).norm() * self.amp;
            rows.push(scaled(&a, cplx(g, 0.0)));
        }
        let si = (ch.si_loop[rx] * 10f64.powf(-ch.si_cancellation_db / 10.0)).sqrt() * self.amp;
        if si > 0.0 {
            for i in 0..n {
                let mut e = vec![cplx(0.0, 0.0); n];
                e[i] = cplx(si, 0.0);
                rows.push(e);
            }
        }
        Ok(rows)
    }
}

#[derive(Clone, Copy, Debug)]
enum Bin {
    Fixed(bool),
    Var(usize),
}

impl Bin {
    fn expr(self) -> AffineExpr<f64> {
        match self {
            Bin::Fixed(v) => AffineExpr::constant(if v { 1.0 } else { 0.0 }),
            Bin::Var(i) => AffineExpr::var(i),
        }
    }

    fn value(self, x: &[f64]) -> f64 {
        match self {
            Bin::Fixed(v) => f64::from(u8::from(v)),
            Bin::Var(i) => x[i],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Comm(usize),
    Sense,
}

#[derive(Clone, Debug)]
struct Beam {
    bs: usize,
    kind: Kind,
    var: BeamVar,
}

/// Sensing configuration of a model.
#[derive(Clone, Debug, PartialEq)]
enum RxMode {
    NoTarget,
    /// Receiver fixed; `monostatic` lets it transmit (sensing beams only).
    Fixed { b: usize, monostatic: bool },
    /// Receiver chosen by binaries; it never transmits.
    Free,
}

/// Discrete structure handed to the model builder.
#[derive(Clone, Debug)]
struct Structure {
    /// `None` = decided by a binary.
    assoc: Vec<Vec<Option<bool>>>,
    rx: RxMode,
    /// BSs allowed to add a dedicated sensing beam.
    sense: Vec<bool>,
}

/// CRLB row of one (ST, candidate receiver) pair.
#[derive(Clone, Debug)]
struct CrlbRow {
    rx: usize,
    /// `(beam index, B)` for every beam seen by this receiver.
    gains: Vec<(usize, CMat<f64>)>,
    /// `(beam index, rows)` of the interference at this receiver.
    noise: Vec<(usize, Vec<CVec<f64>>)>,
    t: usize,
    zeta: usize,
    big_m: f64,
}

struct Model {
    base: ConicProblem<f64>,
    beams: Vec<Beam>,
    assoc: Vec<Vec<Bin>>,
    rx: Vec<Bin>,
    binaries: Vec<usize>,
    crlb: Vec<CrlbRow>,
    slack_weight: f64,
    rho: f64,
}

fn quad(rows: &[CVec<f64>], w: &[Cplx<f64>]) -> f64 {
    rows.iter().map(|r| dot(r, w).norm_sqr()).sum()
}

impl Model {
    fn build(inst: &Instance<'_>, st: &Structure, opts: &CmtOptions) -> Result<Self> {
        let (nb, nk) = (inst.n_bs(), inst.n_cu());
        let mut p = ConicProblem::new();
        let mut binaries = Vec::new();
        let mut assoc = vec![vec![Bin::Fixed(false); nk]; nb];
        for b in 0..nb {
            for k in 0..nk {
                assoc[b][k] = match st.assoc[b][k] {
                    Some(v) => Bin::Fixed(v),
                    None => {
                        let i = p.add_var();
                        p.add_bounds(i, 0.0, 1.0);
                        binaries.push(i);
                        Bin::Var(i)
                    }
                };
            }
        }
        let rx: Vec<Bin> = match st.rx {
            RxMode::NoTarget => vec![Bin::Fixed(false); nb],
            RxMode::Fixed { b, .. } => (0..nb).map(|i| Bin::Fixed(i == b)).collect(),
            RxMode::Free => (0..nb)
                .map(|_| {
                    let i = p.add_var();
                    p.add_bounds(i, 0.0, 1.0);
                    binaries.push(i);
                    Bin::Var(i)
                })
                .collect(),
        };
        if st.rx == RxMode::Free {
            let mut sum = AffineExpr::constant(-1.0);
            for r in &rx {
                sum = sum.add(&r.expr());
            }
            p.add_eq(sum);
        }
        // Beams: a CU beam wherever association is possible, sensing beams where allowed.
        let mut beams = Vec::new();
        for b in 0..nb {
            let n = inst.ch.bs_antennas[b];
            let silent_rx = matches!(st.rx, RxMode::Fixed { b: r, monostatic: false } if r == b);
            let mono_rx = matches!(st.rx, RxMode::Fixed { b: r, monostatic: true } if r == b);
            let mut kinds: Vec<Kind> = Vec::new();
            if !silent_rx && !mono_rx {
                kinds.extend((0..nk).filter(|&k| st.assoc[b][k] != Some(false)).map(Kind::Comm));
            }
            if st.sense[b] && !silent_rx && st.rx != RxMode::NoTarget {
                kinds.push(Kind::Sense);
            }
            let mut sum = AffineExpr::constant(0.0);
            for kind in kinds {
                let var = BeamVar { offset: p.add_vars(2 * n), n };
                let pv = p.add_var();
                p.add_objective(pv, 1.0);
                p.add_rotated_soc(AffineExpr::var(pv), AffineExpr::constant(1.0), var.coords(1.0));
                if let Kind::Comm(k) = kind {
                    p.add_le(AffineExpr::var(pv), assoc[b][k].expr());
                }
                sum = sum.plus(pv, 1.0);
                beams.push(Beam { bs: b, kind, var });
            }
            // Per-BS budget; a selected echo receiver must stay silent.
            let budget = AffineExpr::constant(1.0).add(&rx[b].expr().scaled(if st.rx == RxMode::Free { -1.0 } else { 0.0 }));
            p.add_le(sum, budget);
        }
        // Association rules.
        for k in 0..nk {
            let mut sum = AffineExpr::constant(-1.0);
            for row in &assoc {
                sum = sum.add(&row[k].expr());
            }
            p.add_eq(sum);
        }
        for b in 0..nb {
            let mut load = AffineExpr::constant(0.0);
            for k in 0..nk {
                load = load.add(&assoc[b][k].expr());
                if st.rx == RxMode::Free {
                    p.add_le(assoc[b][k].expr().add(&rx[b].expr()), AffineExpr::constant(1.0));
                }
            }
            p.add_le(load, AffineExpr::constant(opts.k_max as f64));
        }
        // SINR: Re(desired) ≥ √Γ ‖[MUI; leakage; 1]‖, Im(desired) = 0.
        let sg = (inst.gamma * SINR_MARGIN).sqrt();
        for k in 0..nk {
            let mut des_re = AffineExpr::constant(0.0);
            let mut des_im = AffineExpr::constant(0.0);
            let mut entries = Vec::new();
            for j in 0..nk {
                let mut re = AffineExpr::constant(0.0);
                let mut im = AffineExpr::constant(0.0);
                for bm in beams.iter().filter(|bm| bm.kind == Kind::Comm(j)) {
                    let (r, i) = bm.var.inner(&inst.h(bm.bs, k), 1.0);
                    re = re.add(&r);
                    im = im.add(&i);
                }
                if j == k {
                    des_re = re;
                    des_im = im;
                } else if !re.terms.is_empty() {
                    entries.push(re.scaled(sg));
                    entries.push(im.scaled(sg));
                }
            }
            for bm in beams.iter().filter(|bm| bm.kind == Kind::Sense) {
                let (r, i) = bm.var.inner(&inst.q(bm.bs, k), sg);
                entries.push(r);
                entries.push(i);
            }
            entries.push(AffineExpr::constant(sg));
            p.add_eq(des_im);
            p.add_soc(des_re, entries);
        }
        // CRLB rows with interference epigraphs; the linearized part is added per SCA step.
        let mut crlb = Vec::new();
        let candidates: Vec<usize> = match st.rx {
            RxMode::NoTarget => Vec::new(),
            RxMode::Fixed { b, .. } => vec![b],
            RxMode::Free => (0..nb).collect(),
        };
        for &r in &candidates {
            let mut noise = Vec::new();
            let mut entries = Vec::new();
            let mut noise_bound = 0.0;
            for (i, bm) in beams.iter().enumerate() {
                if bm.bs == r && st.rx == RxMode::Free {
                    continue;
                }
                let rows = inst.noise_rows(r, bm.bs)?;
                for row in &rows {
                    let (re, im) = bm.var.inner(row, 1.0);
                    entries.push(re);
                    entries.push(im);
                    noise_bound += norm_sqr(row);
                }
                noise.push((i, rows));
            }
            let t = p.add_var();
            p.add_nonneg(AffineExpr::var(t));
            if !entries.is_empty() {
                p.add_rotated_soc(AffineExpr::var(t), AffineExpr::constant(1.0), entries);
            }
            for s in 0..inst.ch.n_st() {
                let gains: Vec<(usize, CMat<f64>)> = beams
                    .iter()
                    .enumerate()
                    .filter(|(_, bm)| !(bm.bs == r && st.rx == RxMode::Free))
                    .map(|(i, bm)| (i, inst.gain_matrix(s, r, bm.bs)))
                    .collect();
                // With unit per-BS power, Σ‖Bŵ‖² ≤ Σ_b ‖B_b‖₂² and the
                // linearization is bounded below by −3× that.
                let gain_bound: f64 = (0..nb)
                    .filter(|&b| b != r || st.rx != RxMode::Free)
                    .map(|b| inst.gain_matrix(s, r, b).fro_norm_sqr())
                    .sum();
                let zeta = p.add_var();
                p.add_nonneg(AffineExpr::var(zeta));
                p.add_objective(zeta, opts.slack_weight);
                crlb.push(CrlbRow { rx: r, gains, noise: noise.clone(), t, zeta, big_m: 1.0 + noise_bound + 3.0 * gain_bound });
            }
        }
        Ok(Self { base: p, beams, assoc, rx, binaries, crlb, slack_weight: opts.slack_weight, rho: 0.0 })
    }

    fn beam(&self, i: usize, x: &[f64]) -> CVec<f64> {
        self.beams[i].var.read(x)
    }

    fn gain(row: &CrlbRow, beams: &[CVec<f64>]) -> f64 {
        row.gains.iter().map(|(i, b)| norm_sqr(&b.mul_vec(&beams[*i]))).sum()
    }

    fn noise(row: &CrlbRow, beams: &[CVec<f64>]) -> f64 {
        row.noise.iter().map(|(i, rows)| quad(rows, &beams[*i])).sum()
    }

    /// `Σ (2 Re{(Bŵ₀)^H Bŵ} − ‖Bŵ₀‖²)` at `beams`, linearized at `at`.
    fn gain_lin(row: &CrlbRow, beams: &[CVec<f64>], at: &[CVec<f64>]) -> f64 {
        row.gains
            .iter()
            .map(|(i, b)| {
                let y0 = b.mul_vec(&at[*i]);
                2.0 * dot(&y0, &b.mul_vec(&beams[*i])).re - norm_sqr(&y0)
            })
            .sum()
    }

    fn relax_term(&self, row: &CrlbRow, x: &[f64]) -> f64 {
        row.big_m * (1.0 - self.rx[row.rx].value(x))
    }

    fn all_beams(&self, x: &[f64]) -> Vec<CVec<f64>> {
        (0..self.beams.len()).map(|i| self.beam(i, x)).collect()
    }

    fn power_of(&self, beams: &[CVec<f64>]) -> f64 {
        beams.iter().map(|w| norm_sqr(w)).sum()
    }

    fn penalty(&self, x: &[f64]) -> f64 {
        self.binaries.iter().map(|&i| x[i] - x[i] * x[i]).sum()
    }

    fn penalty_lin(&self, x: &[f64], at: &[f64]) -> f64 {
        self.binaries.iter().map(|&i| at[i] - at[i] * at[i] + (1.0 - 2.0 * at[i]) * (x[i] - at[i])).sum()
    }

    fn slack(&self, x: &[f64], at: Option<&[f64]>) -> f64 {
        let beams = self.all_beams(x);
        let lin_at = at.map(|a| self.all_beams(a));
        self.crlb
            .iter()
            .map(|row| {
                let g = match &lin_at {
                    Some(a) => Self::gain_lin(row, &beams, a),
                    None => Self::gain(row, &beams),
                };
                (1.0 + Self::noise(row, &beams) - g - self.relax_term(row, x)).max(0.0)
            })
            .sum()
    }

    /// Convex subproblem expanded at `at`.
    fn subproblem(&self, at: &[f64]) -> ConicProblem<f64> {
        let mut p = self.base.clone();
        for &i in &self.binaries {
            // ρ·[(x₀ − x₀²) + (1 − 2x₀)(x − x₀)]
            p.objective[i] += self.rho * (1.0 - 2.0 * at[i]);
            p.objective_constant += self.rho * (at[i] * at[i]);
        }
        let at_beams = self.all_beams(at);
        for row in &self.crlb {
            // 1 + t − lin(ŵ) − ζ ≤ M(1 − s)
            let mut lhs = AffineExpr::constant(1.0).plus(row.t, 1.0).plus(row.zeta, -1.0);
            for (i, b) in &row.gains {
                let y0 = b.mul_vec(&at_beams[*i]);
                let g0 = b.adjoint_mul_vec(&y0);
                let (re, _) = self.beams[*i].var.inner(&g0, -2.0);
                lhs = lhs.add(&re).plus_const(norm_sqr(&y0));
            }
            let rhs = AffineExpr::constant(row.big_m).add(&self.rx[row.rx].expr().scaled(-row.big_m));
            match self.rx[row.rx] {
                Bin::Fixed(true) => p.add_le(lhs, AffineExpr::constant(0.0)),
                _ => p.add_le(lhs, rhs),
            }
        }
        p
    }

    /// A starting point: matched beams at a small power and sensing beams
    /// towards the first ST.
    fn initial_point(&self, inst: &Instance<'_>) -> Vec<f64> {
        let mut x = vec![0.0; self.base.n_vars];
        let per_bs: Vec<usize> = (0..inst.n_bs()).map(|b| self.beams.iter().filter(|bm| bm.bs == b).count()).collect();
        for bm in &self.beams {
            let dir = match bm.kind {
                Kind::Comm(k) => inst.ch.comm[bm.bs][k].clone(),
                Kind::Sense if inst.ch.n_st() > 0 => inst.ch.target_steering(0, bm.bs),
                Kind::Sense => vec![cplx(1.0, 0.0); bm.var.n],
            };
            let nrm = norm_sqr(&dir).sqrt().max(1e-300);
            let amp = (0.5 / per_bs[bm.bs].max(1) as f64).sqrt() / nrm;
            bm.var.write(&mut x, &scaled(&dir, cplx(amp, 0.0)));
        }
        for (b, row) in self.assoc.iter().enumerate() {
            let _ = b;
            for a in row {
                if let Bin::Var(i) = a {
                    x[*i] = 1.0 / row.len().max(1) as f64;
                }
            }
        }
        for r in &self.rx {
            if let Bin::Var(i) = r {
                x[*i] = 1.0 / self.rx.len() as f64;
            }
        }
        x
    }

    fn to_plan(&self, inst: &Instance<'_>, x: &[f64]) -> BeamPlan<f64> {
        let ch = inst.ch;
        let mut plan = BeamPlan::empty(&ch.bs_antennas, ch.n_cu());
        let back = cplx(inst.p_max.sqrt(), 0.0);
        for (i, bm) in self.beams.iter().enumerate() {
            let w = scaled(&self.beam(i, x), back);
            match bm.kind {
                Kind::Comm(k) => plan.comm[bm.bs][k] = w,
                Kind::Sense => plan.sense[bm.bs].push(w),
            }
        }
        plan
    }
}

struct Step<'m> {
    model: &'m Model,
}

impl Surrogate<f64> for Step<'_> {
    fn objective(&mut self, x: &[f64]) -> Result<f64> {
        let m = self.model;
        let beams = m.all_beams(x);
        Ok(m.power_of(&beams) + m.rho * m.penalty(x) + m.slack_weight * m.slack(x, None))
    }

    fn surrogate_value(&mut self, x: &[f64], at: &[f64]) -> Result<f64> {
        let m = self.model;
        let beams = m.all_beams(x);
        Ok(m.power_of(&beams) + m.rho * m.penalty_lin(x, at) + m.slack_weight * m.slack(x, Some(at)))
    }

    fn minimize(&mut self, at: &[f64]) -> Result<SolveReport<f64>> {
        solve_conic(&self.model.subproblem(at))
    }
}

/// SCA from an arbitrary point: the first convex step is taken
/// unconditionally (it restores the hard constraints), then only improving steps.
fn sca_from(model: &Model, x0: &[f64], opts: &IterOptions) -> Result<SolveReport<f64>> {
    let mut step = Step { model };
    let first = step.minimize(x0)?;
    if !first.status.is_optimal() {
        return Ok(first);
    }
    sca_minimize(&mut step, first.solution, opts)
}

impl PenalizedProblem<f64> for Model {
    fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    fn objective(&mut self, x: &[f64]) -> Result<f64> {
        Ok(self.power_of(&self.all_beams(x)) + self.slack_weight * self.slack(x, None))
    }

    fn is_feasible(&mut self, x: &[f64]) -> Result<bool> {
        Ok(self.slack(x, None) <= 1e-9)
    }

    fn solve_penalized(&mut self, rho: f64, x: &[f64]) -> Result<SolveReport<f64>> {
        self.rho = rho;
        let opts = IterOptions { tol: 1e-5, max_iter: 15 };
        let r = sca_minimize(&mut Step { model: self }, x.to_vec(), &opts);
        self.rho = 0.0;
        r
    }
}

fn nearest_association(scene: &Scene, servers: &[usize], k_max: usize) -> Option<Vec<Vec<bool>>> {
    let nb = scene.n_bs();
    let nk = scene.n_cu();
    let mut assoc = vec![vec![false; nk]; nb];
    let mut load = vec![0usize; nb];
    // Users closest to their best BS pick first.
    let mut order: Vec<usize> = (0..nk).collect();
    let best = |k: usize| {
        servers
            .iter()
            .map(|&b| crate::scene::distance(scene.bs_positions[b], scene.cu_positions[k]))
            .fold(f64::INFINITY, f64::min)
    };
    order.sort_by(|&a, &b| best(a).total_cmp(&best(b)));
    for k in order {
        let b = scene.nearest_bs(scene.cu_positions[k], servers.iter().copied().filter(|&b| load[b] < k_max))?;
        assoc[b][k] = true;
        load[b] += 1;
    }
    Some(assoc)
}

fn random_association(rng: &mut impl rand::Rng, nb: usize, nk: usize, servers: &[usize], k_max: usize) -> Option<Vec<Vec<bool>>> {
    let mut assoc = vec![vec![false; nk]; nb];
    let mut load = vec![0usize; nb];
    for k in 0..nk {
        let open: Vec<usize> = servers.iter().copied().filter(|&b| load[b] < k_max).collect();
        if open.is_empty() {
            return None;
        }
        let b = open[rng.gen_range(0..open.len())];
        assoc[b][k] = true;
        load[b] += 1;
    }
    Some(assoc)
}

/// Discrete structure of a baseline; `None` when no structure respects `k_max`.
fn baseline_structure(scheme: CmtScheme, scene: &Scene, n_st: usize, k_max: usize) -> Result<Option<Structure>> {
    let nb = scene.n_bs();
    let fixed = |a: Vec<Vec<bool>>| a.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
    let all: Vec<usize> = (0..nb).collect();
    if n_st == 0 {
        let assoc = match scheme {
            CmtScheme::Baseline2 => {
                let mut rng = substream(scene.seed, stream::BASELINE, 0, 0);
                random_association(&mut rng, nb, scene.n_cu(), &all, k_max)
            }
            _ => nearest_association(scene, &all, k_max),
        };
        return Ok(assoc.map(|a| Structure { assoc: fixed(a), rx: RxMode::NoTarget, sense: vec![false; nb] }));
    }
    let st = match scheme {
        CmtScheme::Proposed => return Err(invalid("the joint design has no fixed structure")),
        CmtScheme::Baseline1 => {
            if nb < 2 {
                return Err(invalid("baseline 1 needs at least two BSs"));
            }
            let servers: Vec<usize> = (0..nb).filter(|&b| b != 1).collect();
            nearest_association(scene, &servers, k_max).map(|a| Structure {
                assoc: fixed(a),
                rx: RxMode::Fixed { b: 1, monostatic: false },
                sense: (0..nb).map(|b| b == 0).collect(),
            })
        }
        CmtScheme::Baseline2 => {
            let mut rng = substream(scene.seed, stream::BASELINE, 0, 0);
            let r = rand::Rng::gen_range(&mut rng, 0..nb);
            let servers: Vec<usize> = (0..nb).filter(|&b| b != r).collect();
            random_association(&mut rng, nb, scene.n_cu(), &servers, k_max).map(|a| Structure {
                assoc: fixed(a),
                rx: RxMode::Fixed { b: r, monostatic: false },
                sense: (0..nb).map(|b| b != r).collect(),
            })
        }
        CmtScheme::Baseline3 => {
            let m = scene.nearest_bs(scene.st_positions[0], 0..nb).ok_or_else(|| invalid("no BS"))?;
            let servers: Vec<usize> = (0..nb).filter(|&b| b != m).collect();
            nearest_association(scene, &servers, k_max).map(|a| Structure {
                assoc: fixed(a),
                rx: RxMode::Fixed { b: m, monostatic: true },
                sense: (0..nb).map(|b| b == m).collect(),
            })
        }
    };
    Ok(st)
}

fn assignment_of(model: &Model, x: &[f64]) -> Assignment {
    Assignment {
        rx_select: model.rx.iter().map(|r| r.value(x) > 0.5).collect(),
        user_assoc: model.assoc.iter().map(|row| row.iter().map(|a| a.value(x) > 0.5).collect()).collect(),
        ..Default::default()
    }
}

/// Metric-level check of a plan against every constraint.
fn verify(
    ch: &ChannelSet<f64>,
    qos: &QosTargets,
    opts: &CmtOptions,
    plan: &mut BeamPlan<f64>,
    assignment: &Assignment,
) -> Result<(bool, Vec<f64>, Vec<f64>)> {
    let tol = opts.verify_tol;
    let gamma = qos.sinr_min_linear().unwrap_or(0.0);
    let mut ok = assignment.validate_association(opts.k_max).is_ok();
    let mut sinr = Vec::new();
    for k in 0..ch.n_cu() {
        let s = match comm_sinr(k, ch, plan) {
            Ok(s) => s,
            Err(IsacError::NoServingBeam(_)) => 0.0,
            Err(e) => return Err(e),
        };
        ok &= s >= gamma * (1.0 - tol);
        sinr.push(s);
    }
    for b in 0..ch.n_bs() {
        ok &= plan.tx_power(b) <= qos.power_budget * (1.0 + tol);
    }
    let mut crlb = Vec::new();
    if ch.n_st() > 0 {
        match assignment.rx_bs() {
            Some(r) => {
                plan.combiners[r] = Some(ch.matched_combiner(0, r));
                for s in 0..ch.n_st() {
                    let c = match network_crlb(s, r, ch, plan, opts.snapshots) {
                        Ok(c) => c,
                        Err(IsacError::NonIdentifiable(_)) => f64::INFINITY,
                        Err(e) => return Err(e),
                    };
                    ok &= c <= qos.crlb_max * (1.0 + tol);
                    crlb.push(c);
                }
            }
            None => ok = false,
        }
    }
    Ok((ok, sinr, crlb))
}

/// Re-evaluates every constraint of `design` through the metrics module.
pub fn verify_cmt(design: &CmtDesign, channels: &ChannelSet<f64>, qos: &QosTargets, opts: &CmtOptions) -> Result<bool> {
    if design.assignment.user_assoc.is_empty() {
        return Ok(false);
    }
    let mut plan = design.plan.clone();
    Ok(verify(channels, qos, opts, &mut plan, &design.assignment)?.0)
}

fn finish(
    inst: &Instance<'_>,
    qos: &QosTargets,
    opts: &CmtOptions,
    scheme: CmtScheme,
    model: &Model,
    report: SolveReport<f64>,
) -> Result<CmtDesign> {
    if !report.status.is_optimal() {
        return Ok(CmtDesign::infeasible(scheme, inst.ch, report));
    }
    let x = &report.solution;
    let mut plan = model.to_plan(inst, x);
    let assignment = assignment_of(model, x);
    let (feasible, sinr, crlb) = verify(inst.ch, qos, opts, &mut plan, &assignment)?;
    let total_power = plan.total_power();
    Ok(CmtDesign { scheme, plan, assignment, feasible, total_power, sinr, crlb, report })
}

/// Minimum-power beams for a fixed discrete structure.
fn solve_fixed(inst: &Instance<'_>, qos: &QosTargets, opts: &CmtOptions, scheme: CmtScheme, st: &Structure) -> Result<CmtDesign> {
    let model = Model::build(inst, st, opts)?;
    let x0 = model.initial_point(inst);
    let report = sca_from(&model, &x0, &opts.iter())?;
    finish(inst, qos, opts, scheme, &model, report)
}

fn structure_of(a: &Assignment, n_st: usize, sense: bool) -> Structure {
    let nb = a.user_assoc.len();
    let rx = match (n_st, a.rx_bs()) {
        (0, _) | (_, None) => RxMode::NoTarget,
        (_, Some(b)) => RxMode::Fixed { b, monostatic: false },
    };
    let silent = a.rx_bs();
    Structure {
        assoc: a.user_assoc.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect(),
        rx,
        sense: (0..nb).map(|b| sense && Some(b) != silent).collect(),
    }
}

/// Joint design by penalty-driven binary relaxation. Returns `None` when
/// even the relaxation is infeasible.
fn joint(inst: &Instance<'_>, qos: &QosTargets, opts: &CmtOptions) -> Result<(CmtDesign, bool)> {
    let nb = inst.n_bs();
    let st = Structure {
        assoc: vec![vec![None; inst.n_cu()]; nb],
        rx: if inst.ch.n_st() > 0 { RxMode::Free } else { RxMode::NoTarget },
        sense: vec![true; nb],
    };
    let mut model = Model::build(inst, &st, opts)?;
    let x0 = model.initial_point(inst);
    let relaxed = sca_from(&model, &x0, &IterOptions { tol: 1e-4, max_iter: 10 })?;
    if relaxed.status == SolveStatus::Infeasible {
        return Ok((CmtDesign::infeasible(CmtScheme::Proposed, inst.ch, relaxed), true));
    }
    if !relaxed.status.is_optimal() {
        return Ok((CmtDesign::infeasible(CmtScheme::Proposed, inst.ch, relaxed), false));
    }
    let pen = penalize_binary(&mut model, &opts.schedule(), BINARY_TOL, relaxed.solution.clone())?;
    let mut x = pen.solution.clone();
    if binary_gap(&x, &model.binaries) > BINARY_TOL || x.is_empty() {
        x = relaxed.solution;
    }
    // Round: receiver by largest selection weight, then CUs greedily by
    // association weight subject to the load limit.
    let nk = inst.n_cu();
    let r = (inst.ch.n_st() > 0)
        .then(|| (0..nb).max_by(|&p, &q| model.rx[p].value(&x).total_cmp(&model.rx[q].value(&x))).unwrap_or(0));
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for b in (0..nb).filter(|&b| Some(b) != r) {
        for k in 0..nk {
            cand.push((model.assoc[b][k].value(&x), b, k));
        }
    }
    cand.sort_by(|p, q| q.0.total_cmp(&p.0));
    let mut a = Assignment {
        rx_select: (0..nb).map(|b| Some(b) == r).collect(),
        user_assoc: vec![vec![false; nk]; nb],
        ..Default::default()
    };
    let mut load = vec![0usize; nb];
    let mut served = vec![false; nk];
    for (_, b, k) in cand {
        if !served[k] && load[b] < opts.k_max {
            a.user_assoc[b][k] = true;
            served[k] = true;
            load[b] += 1;
        }
    }
    if a.validate_association(opts.k_max).is_err() {
        return Ok((CmtDesign::infeasible(CmtScheme::Proposed, inst.ch, pen), false));
    }
    let polished = solve_fixed(inst, qos, opts, CmtScheme::Proposed, &structure_of(&a, inst.ch.n_st(), true))?;
    Ok((polished, false))
}

fn better(a: CmtDesign, b: CmtDesign) -> CmtDesign {
    match (a.feasible, b.feasible) {
        (true, false) => a,
        (false, true) => b,
        (true, true) if b.total_power < a.total_power => b,
        _ => a,
    }
}

/// Designs `scheme` for one setup. `seeds` are designs of other schemes for
/// the same setup and targets; the joint design starts from their discrete
/// choices and keeps the best, so it is never worse than any of them.
pub fn cmt_design_seeded(
    scene: &Scene,
    channels: &ChannelSet<f64>,
    qos: &QosTargets,
    scheme: CmtScheme,
    opts: &CmtOptions,
    seeds: &[&CmtDesign],
) -> Result<CmtDesign> {
    channels.validate()?;
    if scene.n_bs() != channels.n_bs() || scene.n_cu() != channels.n_cu() {
        return Err(invalid("scene and channels disagree"));
    }
    let inst = Instance::new(channels, qos, opts)?;
    let n_st = channels.n_st();
    if scheme != CmtScheme::Proposed {
        return match baseline_structure(scheme, scene, n_st, opts.k_max)? {
            Some(st) => solve_fixed(&inst, qos, opts, scheme, &st),
            None => Ok(CmtDesign::infeasible(scheme, channels, SolveReport::with_status(SolveStatus::Infeasible, Vec::new()))),
        };
    }
    let mut best: Option<CmtDesign> = None;
    for s in seeds.iter().filter(|s| s.feasible) {
        let mut d = (*s).clone();
        // A monostatic seed is re-solved with its receiver silent.
        if s.scheme == CmtScheme::Baseline3 {
            d = solve_fixed(&inst, qos, opts, CmtScheme::Proposed, &structure_of(&s.assignment, n_st, true))?;
            if !d.feasible {
                continue;
            }
        }
        d.scheme = CmtScheme::Proposed;
        best = Some(match best {
            Some(b) => better(b, d),
            None => d,
        });
    }
    if opts.stop_at_first_feasible && best.is_some() {
        return Ok(best.expect("checked"));
    }
    let (joint, certified) = joint(&inst, qos, opts)?;
    if certified {
        return Ok(joint);
    }
    Ok(match best {
        Some(b) => better(b, joint),
        None => joint,
    })
}

/// Designs `scheme` for one setup; the joint design is seeded with the
/// first two baselines.
pub fn cmt_design(scene: &Scene, channels: &ChannelSet<f64>, qos: &QosTargets, scheme: CmtScheme, opts: &CmtOptions) -> Result<CmtDesign> {
    if scheme != CmtScheme::Proposed {
        return cmt_design_seeded(scene, channels, qos, scheme, opts, &[]);
    }
    let b1 = cmt_design_seeded(scene, channels, qos, CmtScheme::Baseline1, opts, &[]);
    let b2 = cmt_design_seeded(scene, channels, qos, CmtScheme::Baseline2, opts, &[])?;
    let seeds: Vec<&CmtDesign> = match &b1 {
        Ok(d) => vec![d, &b2],
        Err(_) => vec![&b2],
    };
    cmt_design_seeded(scene, channels, qos, scheme, opts, &seeds)
}
