//! Projected gradient over Hermitian PSD matrices with a trace budget.

use crate::error::{invalid, Result};
use crate::linalg::{hermitian_eig, CMat};
use crate::scalar::{cst, from_usize, to_f64, Scalar};
use crate::solvers::conic::{SolveReport, SolveStatus};

fn check_hermitian<T: Scalar>(h: &CMat<T>) -> Result<()> {
    if !h.is_square() {
        return Err(invalid("matrix is not square"));
    }
    if h.hermitian_defect() > cst::<T>(1e-9) * h.max_abs().max(T::one()) {
        return Err(invalid("matrix is not Hermitian"));
    }
    Ok(())
}

/// Frobenius-nearest PSD matrix (negative eigenvalues clipped to zero).
pub fn project_psd<T: Scalar>(h: &CMat<T>) -> Result<CMat<T>> {
    check_hermitian(h)?;
    Ok(hermitian_eig(&h.hermitian_part()).reconstruct_with(|l| l.max(T::zero())))
}

/// Shift `μ ≥ 0` such that `Σ max(λ_i − μ, 0) ≤ cap`, with equality when `μ > 0`.
fn capped_shift<T: Scalar>(values: &[T], cap: T) -> T {
    let clipped: T = values.iter().map(|&l| l.max(T::zero())).sum();
    if clipped <= cap {
        return T::zero();
    }
    simplex_shift(values, cap).max(T::zero())
}

/// Shift `μ` (any sign) such that `Σ max(λ_i − μ, 0) = cap`.
fn simplex_shift<T: Scalar>(values: &[T], cap: T) -> T {
    let mut v: Vec<T> = values.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut acc = T::zero();
    let mut mu = T::zero();
    for (k, &l) in v.iter().enumerate() {
        acc += l;
        let cand = (acc - cap) / from_usize(k + 1);
        if l > cand {
            mu = cand;
        }
    }
    mu
}

/// Frobenius-nearest point of `{R ⪰ 0, tr R ≤ cap}`: eigenvalues are
/// projected onto the capped simplex.
pub fn project_psd_trace<T: Scalar>(h: &CMat<T>, cap: T) -> Result<CMat<T>> {
    check_hermitian(h)?;
    if cap < T::zero() {
        return Err(invalid("trace cap must be non-negative"));
    }
    let eig = hermitian_eig(&h.hermitian_part());
    let mu = capped_shift(&eig.values, cap);
    Ok(eig.reconstruct_with(|l| (l - mu).max(T::zero())))
}

/// Frobenius-nearest point of `{R ⪰ 0, tr R = total}`.
pub fn project_psd_trace_eq<T: Scalar>(h: &CMat<T>, total: T) -> Result<CMat<T>> {
    check_hermitian(h)?;
    if total < T::zero() {
        return Err(invalid("trace must be non-negative"));
    }
    let eig = hermitian_eig(&h.hermitian_part());
    let mu = simplex_shift(&eig.values, total);
    Ok(eig.reconstruct_with(|l| (l - mu).max(T::zero())))
}

/// Smooth real function of a Hermitian matrix.
pub trait MatrixObjective<T: Scalar> {
    fn value(&self, r: &CMat<T>) -> T;
    /// Hermitian gradient with respect to the real inner product `Re tr(A^H B)`.
    fn gradient(&self, r: &CMat<T>) -> CMat<T>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgOptions {
    pub max_iter: usize,
    /// Stop when `‖R_{t+1} − R_t‖_F ≤ step_tol · max(1, ‖R_t‖_F)`.
    pub step_tol: f64,
    /// Use `tr R = cap` instead of `tr R ≤ cap`.
    pub trace_equality: bool,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self { max_iter: 5000, step_tol: 1e-10, trace_equality: false }
    }
}

/// Minimizes `objective` over `{R ⪰ 0, tr R ≤ cap}` (or `= cap`) from `r0`.
///
/// Barzilai-Borwein trial steps with backtracking on the quadratic upper
/// model, so the objective decreases monotonically. The iterate trace is in
/// the report; the matrix is returned alongside.
pub fn projected_gradient_psd<T: Scalar, O: MatrixObjective<T> + ?Sized>(
    objective: &O,
    cap: T,
    r0: &CMat<T>,
    opts: &PgOptions,
) -> Result<(CMat<T>, SolveReport<T>)> {
    let project = |m: &CMat<T>| if opts.trace_equality { project_psd_trace_eq(m, cap) } else { project_psd_trace(m, cap) };
    let mut r = project(r0)?;
    let mut f = objective.value(&r);
    let mut g = objective.gradient(&r);
    let mut trace = vec![f];
    let gn = g.fro_norm();
    let mut alpha = if gn > T::zero() { r.fro_norm().max(cap).max(T::one()) / gn } else { T::one() };
    let half: T = cst(0.5);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut accepted = None;
        for _ in 0..80 {
            let mut trial = r.clone();
            trial.add_assign_scaled(&g, -alpha);
            let cand = project(&trial.hermitian_part())?;
            let s = cand.sub(&r);
            let model = f + g.inner_re(&s) + s.fro_norm_sqr() / (alpha + alpha);
            let fc = objective.value(&cand);
            if fc <= model + cst::<T>(1e-14) * f.abs().max(T::one()) {
                accepted = Some((cand, fc, s));
                break;
            }
            alpha *= half;
        }
        let Some((cand, fc, s)) = accepted else { break };
        let step = s.fro_norm();
        if fc < f {
            let g_new = objective.gradient(&cand);
            let y = g_new.sub(&g);
            let sy = s.inner_re(&y);
            alpha = if sy > T::zero() { s.fro_norm_sqr() / sy } else { alpha + alpha };
            r = cand;
            f = fc;
            g = g_new;
            trace.push(f);
        }
        if step <= cst::<T>(opts.step_tol) * r.fro_norm().max(T::one()) {
            converged = true;
            break;
        }
    }
    log::trace!("projected gradient: {} iterations, objective {:e}", iterations, to_f64(f));
    let status = if converged { SolveStatus::Optimal } else { SolveStatus::IterationLimit };
    let report = SolveReport {
        status,
        objective: f,
        solution: Vec::new(),
        iterations,
        max_violation: T::zero(),
        trace,
        certificate: None,
        lower_bound: None,
    };
    Ok((r, report))
}
