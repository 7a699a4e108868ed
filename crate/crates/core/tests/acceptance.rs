//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p isac-core --test acceptance`. The two Monte Carlo
//! reproductions dominate the runtime (several minutes on one core).

use std::time::{Duration, Instant};

use isac_core::experiments::{sweep_energy_vs_antennas, sweep_infeasibility, CaseA, CaseB, EnergySweep, InfeasibilitySweep, Verdict};
use isac_core::linalg::{dot, hermitian_eig, CMat, CVec};
use isac_core::metrics::{beampattern_mse, crlb_angle, PathGeometry};
use isac_core::output::{case_a_csv, case_b_csv};
use isac_core::scene::{path_loss_db, round_trip_delay, steering_derivative, steering_vector, Trips};
use isac_core::solvers::{branch_and_bound, lpr_round, BipProblem, SolveStatus};
use isac_core::techniques::{hdbf_design, ia_design, CmtScheme, HdbfSpec, TsScheme};
use isac_core::{Cplx, IsacError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cgauss(rng: &mut ChaCha8Rng, n: usize) -> CVec<f64> {
    (0..n).map(|_| Cplx::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

fn path_loss_and_delay() -> Outcome {
    let start = Instant::now();
    let pl = path_loss_db(300.0, 2.4e9, Trips::RoundTrip).unwrap();
    let delay = round_trip_delay(300.0).unwrap();
    let took = start.elapsed();
    let pass = (pl - 179.2).abs() <= 0.8 && delay == 2.0e-6 && took < Duration::from_millis(1);
    outcome(pass, format!("round trip {pl:.3} dB, delay {delay:e} s, {took:?}"))
}

/// Fisher information of the angle from central differences of the mean
/// `μ_l(θ) = α a_r(θ) a_t(θ)^H x_l`; the transmit angle is frozen when
/// transmitter and receiver differ.
fn fd_fisher(x: &[CVec<f64>], alpha: Cplx<f64>, sigma2: f64, n_t: usize, n_r: usize, theta: f64, monostatic: bool) -> f64 {
    let h = 1e-5;
    let mean = |t: f64| -> Vec<CVec<f64>> {
        let a_r = steering_vector::<f64>(n_r, t).unwrap();
        let a_t = steering_vector::<f64>(n_t, if monostatic { t } else { 0.3 }).unwrap();
        x.iter()
            .map(|xl| {
                let s = dot(&a_t, xl) * alpha;
                a_r.iter().map(|a| a * s).collect()
            })
            .collect()
    };
    let (p, m) = (mean(theta + h), mean(theta - h));
    let mut acc = 0.0;
    for (pl, ml) in p.iter().zip(&m) {
        for (a, b) in pl.iter().zip(ml) {
            acc += ((a - b) / (2.0 * h)).norm_sqr();
        }
    }
    2.0 * acc / sigma2
}

fn crlb_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for case in 0..50 {
        let monostatic = case % 2 == 0;
        let n_r = rng.gen_range(2..7);
        let n_t = if monostatic { n_r } else { rng.gen_range(1..7) };
        let l = rng.gen_range(1..10);
        let theta = rng.gen_range(-1.3..1.3);
        let alpha = Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let sigma2 = rng.gen_range(0.1..3.0);
        let x: Vec<CVec<f64>> = (0..l).map(|_| cgauss(&mut rng, n_t)).collect();
        let mut r = CMat::zeros(n_t, n_t);
        for xl in &x {
            r.add_assign_scaled(&CMat::outer(xl, xl), 1.0 / l as f64);
        }
        let a_t = steering_vector::<f64>(n_t, if monostatic { theta } else { 0.3 }).unwrap();
        let a_t_dot = if monostatic { steering_derivative::<f64>(n_t, theta).unwrap() } else { vec![Cplx::new(0.0, 0.0); n_t] };
        let a_r = steering_vector::<f64>(n_r, theta).unwrap();
        let a_r_dot = steering_derivative::<f64>(n_r, theta).unwrap();
        let g = PathGeometry { a_t: &a_t, a_t_dot: &a_t_dot, a_r: &a_r, a_r_dot: &a_r_dot };
        let crlb = crlb_angle(&r, alpha, l, sigma2, &g).unwrap();
        let oracle = 1.0 / fd_fisher(&x, alpha, sigma2, n_t, n_r, theta, monostatic);
        worst = worst.max((crlb / oracle - 1.0).abs());
        let doubled = crlb_angle(&r.scale(2.0), alpha, l, sigma2, &g).unwrap();
        worst_scale = worst_scale.max((doubled * 2.0 / crlb - 1.0).abs());
    }
    let took = start.elapsed();
    let pass = worst <= 1e-5 && worst_scale <= 4.0 * f64::EPSILON && took < Duration::from_secs(10);
    outcome(pass, format!("50 instances, worst relative error {worst:.2e}, CRLB(2R) defect {worst_scale:.2e}, {took:?}"))
}

type Rows = Vec<(Vec<(usize, f64)>, f64)>;

/// Random costs, knapsack-style `≤` rows and an optional cardinality row.
fn random_rows(rng: &mut ChaCha8Rng) -> (Vec<f64>, Rows, Rows) {
    let n = rng.gen_range(3..=12);
    let cost = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut le = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let mut row = Vec::new();
        for i in 0..n {
            if rng.gen_bool(0.7) {
                row.push((i, rng.gen_range(0.1..1.0)));
            }
        }
        let total: f64 = row.iter().map(|e| e.1).sum();
        le.push((row, total * rng.gen_range(0.2..0.7)));
    }
    let mut eq = Vec::new();
    if rng.gen_bool(0.5) {
        let row: Vec<(usize, f64)> = (0..n).filter(|_| rng.gen_bool(0.6)).map(|i| (i, 1.0)).collect();
        let k = rng.gen_range(0..=row.len()) as f64;
        eq.push((row, k));
    }
    (cost, le, eq)
}

/// Exhaustive minimum over `{0,1}^n`.
fn enumerate(cost: &[f64], le: &Rows, eq: &Rows) -> Option<f64> {
    let n = cost.len();
    let mut best: Option<f64> = None;
    for code in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|i| f64::from((code >> i) & 1)).collect();
        let lhs = |row: &[(usize, f64)]| row.iter().map(|&(i, c)| c * x[i]).sum::<f64>();
        if le.iter().all(|(r, b)| lhs(r) <= b + 1e-9) && eq.iter().all(|(r, b)| (lhs(r) - b).abs() <= 1e-9) {
            let f: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
            if best.is_none_or(|b| f < b) {
                best = Some(f);
            }
        }
    }
    best
}

fn bnb_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut mismatches, mut lpr_below, mut feasible) = (0, 0, 0);
    for _ in 0..100 {
        let (cost, le, eq) = random_rows(&mut rng);
        let mut bip = BipProblem::new(cost.clone());
        for (r, b) in &le {
            bip.add_le(r.clone(), *b);
        }
        for (r, b) in &eq {
            bip.add_eq(r.clone(), *b);
        }
        let exact = branch_and_bound(&bip).unwrap();
        match enumerate(&cost, &le, &eq) {
            Some(f) => {
                feasible += 1;
                if exact.status != SolveStatus::Optimal || (exact.objective - f).abs() > 1e-6 {
                    mismatches += 1;
                }
                let lpr = lpr_round(&bip).unwrap();
                if lpr.status == SolveStatus::Optimal && lpr.objective < f - 1e-6 {
                    lpr_below += 1;
                }
            }
            None => {
                if exact.status != SolveStatus::Infeasible {
                    mismatches += 1;
                }
            }
        }
    }
    let took = start.elapsed();
    let pass = mismatches == 0 && lpr_below == 0 && took < Duration::from_secs(60);
    outcome(pass, format!("100 instances ({feasible} feasible), {mismatches} mismatches, {lpr_below} LPR below optimum, {took:?}"))
}

fn ia_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    let mut all_exact = true;
    for _ in 0..20 {
        let k = rng.gen_range(1..5);
        let n_t = k + rng.gen_range(1..4);
        let h: Vec<CVec<f64>> = (0..k).map(|_| cgauss(&mut rng, n_t)).collect();
        let a = steering_vector::<f64>(n_t, rng.gen_range(-1.2..1.2)).unwrap();
        let d = ia_design(&h, Some(&a), 1e-10, 2000).unwrap();
        all_exact &= d.exact;
        worst = worst.max(d.nulling_residual);
    }
    let mut alp_increases = 0;
    let mut alp_runs = 0;
    for _ in 0..20 {
        let k = rng.gen_range(2..5);
        let h: Vec<CVec<f64>> = (0..k).map(|_| cgauss(&mut rng, k)).collect();
        let a = steering_vector::<f64>(k, rng.gen_range(-1.2..1.2)).unwrap();
        let d = ia_design(&h, Some(&a), 1e-10, 500).unwrap();
        if d.residuals.is_empty() {
            continue;
        }
        alp_runs += 1;
        let scale = d.residuals[0].max(1.0);
        alp_increases += d.residuals.windows(2).filter(|w| w[1] > w[0] + 1e-12 * scale).count();
    }
    let pass = all_exact && worst <= 1e-8 && alp_increases == 0 && alp_runs > 0;
    outcome(
        pass,
        format!("n_t > K: worst nulling residual {worst:.2e} over 20; n_t = K: {alp_runs} ALP runs, {alp_increases} residual increases"),
    )
}

/// Accelerated projected gradient for the flat-top fit from random starts,
/// with its own projection onto `{R ⪰ 0, tr R = P}`.
fn hdbf_oracle(n: usize, grid: &[f64], ideal: &[f64], power: f64, rng: &mut ChaCha8Rng) -> f64 {
    let m = grid.len() as f64;
    let steer: Vec<CVec<f64>> = grid.iter().map(|&t| steering_vector::<f64>(n, t).unwrap()).collect();
    let value = |r: &CMat<f64>| -> f64 { steer.iter().zip(ideal).map(|(a, d)| (r.quad_form(a).re - d).powi(2)).sum::<f64>() / m };
    let grad = |r: &CMat<f64>| -> CMat<f64> {
        let mut g = CMat::zeros(n, n);
        for (a, d) in steer.iter().zip(ideal) {
            g.add_assign_scaled(&CMat::outer(a, a), 2.0 * (r.quad_form(a).re - d) / m);
        }
        g
    };
    let project = |h: &CMat<f64>| -> CMat<f64> {
        let e = hermitian_eig(&h.hermitian_part());
        let mut sorted = e.values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let (mut acc, mut shift) = (0.0, 0.0);
        for (i, &v) in sorted.iter().enumerate() {
            acc += v;
            let t = (acc - power) / (i + 1) as f64;
            if v - t > 0.0 {
                shift = t;
            }
        }
        e.reconstruct_with(|v| (v - shift).max(0.0))
    };
    let step = 1.0 / (2.0 * (n * n) as f64);
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let cols: Vec<CVec<f64>> = (0..n).map(|_| cgauss(rng, n)).collect();
        let b = CMat::from_columns(&cols);
        let mut x = project(&b.matmul(&b.adjoint()));
        let mut y = x.clone();
        let mut t: f64 = 1.0;
        for _ in 0..20_000 {
            let next = project(&y.sub(&grad(&y).scale(step)));
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = next.add(&next.sub(&x).scale((t - 1.0) / t_next));
            x = next;
            t = t_next;
        }
        best = best.min(value(&x));
    }
    best
}

fn hdbf_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut beaten = 0;
    for _ in 0..20 {
        let n = rng.gen_range(2..9);
        let width = rng.gen_range(5.0f64..40.0).to_radians();
        let center = rng.gen_range(-1.0..1.0);
        let d = hdbf_design(&HdbfSpec::centered(n, center, width, 1.0)).unwrap();
        let iso = CMat::identity(n).scale(1.0 / n as f64);
        let iso_mse = beampattern_mse(&iso, &d.grid, &d.ideal).unwrap();
        let mse = beampattern_mse(&d.covariance, &d.grid, &d.ideal).unwrap();
        if mse > iso_mse * (1.0 + 1e-12) {
            beaten += 1;
        }
    }
    let n = 4;
    let (center, width, power) = (0.3, 10f64.to_radians(), 1.0);
    let d = hdbf_design(&HdbfSpec::centered(n, center, width, power)).unwrap();
    let m = 181;
    let grid: Vec<f64> = (0..m).map(|i| (-1.0 + (2 * i + 1) as f64 / m as f64).asin()).collect();
    let ideal: Vec<f64> = grid.iter().map(|&t| if (t - center).abs() <= width / 2.0 { power * n as f64 } else { 0.0 }).collect();
    let oracle = hdbf_oracle(n, &grid, &ideal, power, &mut rng);
    let mse = beampattern_mse(&d.covariance, &grid, &ideal).unwrap();
    let rel = (mse - oracle) / oracle;
    let pass = beaten == 0 && rel.abs() <= 1e-3;
    outcome(pass, format!("{beaten}/20 worse than isotropic; n = 4: MSE {mse:.6e} vs oracle {oracle:.6e} (relative {rel:+.1e})"))
}

fn fmt_curve(c: &[f64]) -> String {
    c.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")
}

fn fig3(sweep: &Result<InfeasibilitySweep, IsacError>, took: Duration) -> Outcome {
    let sw = match sweep {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let curves: Vec<Vec<f64>> = CmtScheme::ALL.iter().map(|&s| sw.curve(s).unwrap()).collect();
    let monotone = curves.iter().all(|c| c.windows(2).all(|w| w[1] >= w[0]));
    let idx = |s: CmtScheme| sw.schemes.iter().position(|&x| x == s).unwrap();
    let (p, b1, b2) = (idx(CmtScheme::Proposed), idx(CmtScheme::Baseline1), idx(CmtScheme::Baseline2));
    let mut dominance_breaks = 0;
    for v in &sw.verdicts {
        for g in 0..sw.gamma_db.len() {
            for b in [b1, b2] {
                if v[b][g] == Verdict::Feasible && v[p][g] != Verdict::Feasible {
                    dominance_breaks += 1;
                }
            }
        }
    }
    let below_b3 = curves[0].iter().zip(&curves[3]).all(|(a, b)| a <= b);
    let failures: usize = sw.rows().iter().map(|r| r.failures).sum();
    let pass = monotone && dominance_breaks == 0 && below_b3 && sw.seeds.len() >= 100 && took < Duration::from_secs(1800);
    outcome(
        pass,
        format!(
            "{} setups in {took:.0?}; proposed [{}] b1 [{}] b2 [{}] b3 [{}]; {dominance_breaks} dominance breaks, {failures} solver failures counted as infeasible",
            sw.seeds.len(),
            fmt_curve(&curves[0]),
            fmt_curve(&curves[1]),
            fmt_curve(&curves[2]),
            fmt_curve(&curves[3])
        ),
    )
}

fn fig4(sweep: &Result<EnergySweep, IsacError>, took: Duration) -> Outcome {
    let sw = match sweep {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let idx = |s: TsScheme| sw.schemes.iter().position(|&x| x == s).unwrap();
    let (p, b1, b2) = (idx(TsScheme::Proposed), idx(TsScheme::Baseline1), idx(TsScheme::Baseline2));
    let nn = sw.antennas.len();
    // Per setup: once feasible the proposed energy never grows with N.
    let mut growth = 0;
    let mut b2_breaks = 0;
    for e in &sw.energy {
        for i in 0..nn {
            for j in i + 1..nn {
                if let Some(a) = e[p][i] {
                    match e[p][j] {
                        Some(b) if b <= a * (1.0 + 1e-9) => {}
                        _ => growth += 1,
                    }
                }
            }
            if let Some(b) = e[b2][i] {
                if e[p][i].is_none_or(|a| a > b * (1.0 + 1e-9)) {
                    b2_breaks += 1;
                }
            }
        }
    }
    // Proposed mean over the setups it solves at every N.
    let full: Vec<usize> = (0..sw.seeds.len()).filter(|&i| sw.energy[i][p].iter().all(|x| x.is_some())).collect();
    let fixed_curve: Vec<f64> = (0..nn).map(|ni| full.iter().map(|&i| sw.energy[i][p][ni].unwrap()).sum::<f64>() / full.len().max(1) as f64).collect();
    let fixed_monotone = !full.is_empty() && fixed_curve.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let cp = sw.curve(TsScheme::Proposed).unwrap();
    let c1 = sw.curve(TsScheme::Baseline1).unwrap();
    let c2 = sw.curve(TsScheme::Baseline2).unwrap();
    let support: Vec<usize> = (0..nn).map(|ni| sw.support(ni).len()).collect();
    let below_b1 = cp.iter().zip(&c1).zip(&support).all(|((a, b), &s)| s > 0 && a <= b);
    let _ = b1;
    let sci = |c: &[f64]| c.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" ");
    let pass = growth == 0 && fixed_monotone && b2_breaks == 0 && below_b1 && sw.seeds.len() >= 50 && took < Duration::from_secs(1800);
    outcome(
        pass,
        format!(
            "{} setups in {took:.0?}, N {:?}, common support {:?}; means J: proposed [{}] b1 [{}] b2 [{}]; proposed on its {} all-N setups [{}]; {growth} per-seed increases, {b2_breaks} baseline2 breaks",
            sw.seeds.len(),
            sw.antennas,
            support,
            sci(&cp),
            sci(&c1),
            sci(&c2),
            full.len(),
            sci(&fixed_curve)
        ),
    )
}

fn monotone_traces(a: &Result<InfeasibilitySweep, IsacError>, b: &Result<EnergySweep, IsacError>) -> Outcome {
    // Every SCA and AO loop asserts its own trace; a violation aborts the sweep
    // with a contract violation.
    let describe = |r: Result<(), &IsacError>| match r {
        Ok(()) => "completed".to_string(),
        Err(e) => format!("aborted: {e}"),
    };
    let violation = |r: Result<(), &IsacError>| matches!(r, Err(IsacError::ContractViolation(_)));
    let ra = a.as_ref().map(|_| ());
    let rb = b.as_ref().map(|_| ());
    let pass = ra.is_ok() && rb.is_ok() && !violation(ra) && !violation(rb);
    outcome(pass, format!("case A (100 seeds) {}, case B (50 seeds) {}; 0 violations tolerated", describe(ra), describe(rb)))
}

fn determinism() -> Outcome {
    let a = CaseA::default();
    let b = CaseB::default();
    let run_a = || {
        let sw = sweep_infeasibility(&a, &[0.0, 6.0, 12.0], 6, &CmtScheme::ALL, 99).unwrap();
        let mut buf = Vec::new();
        case_a_csv(&mut buf, &sw.rows()).unwrap();
        buf
    };
    let run_b = || {
        let sw = sweep_energy_vs_antennas(&b, &[8, 12], 3, &TsScheme::ALL, 99).unwrap();
        let mut buf = Vec::new();
        case_b_csv(&mut buf, &sw.rows()).unwrap();
        buf
    };
    let (a1, a2) = (run_a(), run_a());
    let (b1, b2) = (run_b(), run_b());
    let pass = a1 == a2 && b1 == b2;
    outcome(pass, format!("case A CSV {} bytes identical: {}; case B CSV {} bytes identical: {}", a1.len(), a1 == a2, b1.len(), b1 == b2))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    report("path loss and echo delay", path_loss_and_delay());
    report("CRLB against finite-difference Fisher oracle", crlb_oracle());
    report("branch and bound against enumeration", bnb_oracle());
    report("interference alignment nulling and ALP residuals", ia_checks());
    report("HD-BF against isotropic and multi-start oracle", hdbf_checks());

    let gamma: Vec<f64> = (0..8).map(|i| 2.0 * i as f64).collect();
    let start = Instant::now();
    let a = sweep_infeasibility(&CaseA::default(), &gamma, 100, &CmtScheme::ALL, 1);
    let took_a = start.elapsed();
    let start = Instant::now();
    let b = sweep_energy_vs_antennas(&CaseB::default(), &[8, 12, 16, 20], 50, &TsScheme::ALL, 1);
    let took_b = start.elapsed();
    report("monotone SCA/AO traces on every sweep solve", monotone_traces(&a, &b));
    report("case A infeasibility versus SINR target", fig3(&a, took_a));
    report("case B energy versus antenna count", fig4(&b, took_b));
    report("determinism of result CSVs", determinism());

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
