//! Interference alignment at one multi-antenna BS.
//!
//! Each CU beam is steered into the null space of the other CUs and the
//! sensing beam into the null space of every CU. When the array is too small
//! for exact nulling, alternating projection finds the closest realizable
//! effective channel instead.

use crate::error::{check_len, invalid, Result};
use crate::interference::BeamPlan;
use crate::linalg::{dot, lstsq, norm, norm_sqr, scaled, svd, CMat, CVec};
use crate::scalar::{cone, cplx, cst, czero, from_usize, Cplx, Scalar};
use crate::scene::ChannelSet;
use crate::solvers::{alternating_projection, AffineSet, SolveReport, SolveStatus};

#[derive(Clone, Debug)]
pub struct IaDesign<T: Scalar> {
    /// Unit-norm beam of each CU.
    pub comm: Vec<CVec<T>>,
    /// Unit-norm sensing beam, when a target direction was given.
    pub sense: Option<CVec<T>>,
    /// Unit-modulus scalar decoder of each single-antenna CU.
    pub decoders: Vec<Cplx<T>>,
    /// Largest normalized leakage `|h_k^H x| / (‖h_k‖‖x‖)` into a CU that the beam does not serve.
    pub nulling_residual: T,
    /// Alternating-projection residual trace (empty for the exact construction).
    pub residuals: Vec<T>,
    pub exact: bool,
    pub report: SolveReport<T>,
}

fn unit<T: Scalar>(v: CVec<T>) -> CVec<T> {
    let n = norm(&v);
    if n > T::zero() {
        scaled(&v, cplx(T::one() / n, T::zero()))
    } else {
        v
    }
}

/// Orthogonal projection of `v` onto the null space of the rows `rows[i]^H`.
fn project_null<T: Scalar>(rows: &[&CVec<T>], v: &[Cplx<T>], n: usize) -> CVec<T> {
    if rows.is_empty() {
        return v.to_vec();
    }
    let a = CMat::from_fn(rows.len(), n, |i, j| rows[i][j].conj());
    let basis = svd(&a).null_space(cst(1e-10));
    let mut out = vec![czero(); n];
    for b in &basis {
        let c = dot(b, v);
        for (o, bi) in out.iter_mut().zip(b) {
            *o += bi * c;
        }
    }
    out
}

fn nulling_residual<T: Scalar>(h: &[CVec<T>], comm: &[CVec<T>], sense: Option<&CVec<T>>) -> T {
    let mut worst = T::zero();
    for (k, hk) in h.iter().enumerate() {
        let hn = norm(hk);
        if hn == T::zero() {
            continue;
        }
        let others = comm.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, w)| w).chain(sense);
        for x in others {
            let xn = norm(x);
            if xn > T::zero() {
                worst = worst.max(dot(hk, x).norm() / (hn * xn));
            }
        }
    }
    worst
}

fn decoders<T: Scalar>(h: &[CVec<T>], comm: &[CVec<T>]) -> Vec<Cplx<T>> {
    h.iter()
        .zip(comm)
        .map(|(hk, w)| {
            let g = dot(hk, w);
            if g.norm() > T::zero() {
                g.conj() / g.norm()
            } else {
                cone()
            }
        })
        .collect()
}

/// Alignment beams for CUs with channels `h` (all of length `n_t`) and an
/// optional sensing direction `target`.
///
/// With `n_t` larger than the number of nulls each beam needs, beams come
/// from exact null-space projections. Otherwise the effective channel
/// `Z = G^H X` (`G = [h_1 … h_K, a_t]`) is driven towards the pattern
/// `Z_kk = 1`, `Z_kj = 0` by alternating projection with rank `≤ n_t`, and
/// `X` is recovered by least squares.
pub fn ia_design<T: Scalar>(h: &[CVec<T>], target: Option<&[Cplx<T>]>, tol: f64, max_iter: usize) -> Result<IaDesign<T>> {
    let k = h.len();
    if k == 0 {
        return Err(invalid("alignment needs at least one CU"));
    }
    let n = h[0].len();
    for hk in h {
        check_len("CU channel length", n, hk.len())?;
    }
    if let Some(a) = target {
        check_len("target steering length", n, a.len())?;
    }
    let needed = if target.is_some() { k + 1 } else { k };
    if n >= needed {
        let mut comm = Vec::with_capacity(k);
        for j in 0..k {
            let others: Vec<&CVec<T>> = h.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, v)| v).collect();
            let w = unit(project_null(&others, &h[j], n));
            if norm_sqr(&w) == T::zero() {
                return Err(invalid(format!("CU {j} channel lies in the span of the others")));
            }
            comm.push(w);
        }
        let sense = match target {
            Some(a) => {
                let all: Vec<&CVec<T>> = h.iter().collect();
                let v = unit(project_null(&all, a, n));
                if norm_sqr(&v) == T::zero() {
                    return Err(invalid("target direction lies in the CU channel span"));
                }
                Some(v)
            }
            None => None,
        };
        let residual = nulling_residual(h, &comm, sense.as_ref());
        return Ok(IaDesign {
            decoders: decoders(h, &comm),
            comm,
            sense,
            nulling_residual: residual,
            residuals: Vec::new(),
            exact: true,
            report: SolveReport { objective: residual, ..SolveReport::with_status(SolveStatus::Optimal, Vec::new()) },
        });
    }

    // Rank-deficient: alternating projection on the effective channel.
    let mut g: Vec<CVec<T>> = h.to_vec();
    if let Some(a) = target {
        g.push(a.to_vec());
    }
    let m = g.len();
    let gh = CMat::from_fn(m, n, |i, j| g[i][j].conj());
    let mut affine = AffineSet::new(m, m);
    for i in 0..k {
        for j in 0..m {
            affine.fix_entry(i, j, if i == j { cone() } else { czero() });
        }
    }
    if target.is_some() {
        affine.fix_entry(k, k, cone());
    }
    let scale = norm_sqr(&g[0]).sqrt().max(T::one());
    let x0 = CMat::identity(m).scale(scale);
    let alp = alternating_projection(&mut affine, n, &x0, tol, max_iter)?;
    let y = &alp.rank_point;
    let x: Vec<CVec<T>> = (0..m).map(|j| unit(lstsq(&gh, &y.column(j), cst(1e-12)))).collect();
    let comm: Vec<CVec<T>> = x[..k].to_vec();
    let sense = target.map(|_| x[k].clone());
    let residual = nulling_residual(h, &comm, sense.as_ref());
    let last = alp.residuals.last().copied().unwrap_or(T::zero());
    let status = if alp.converged { SolveStatus::Optimal } else { SolveStatus::IterationLimit };
    Ok(IaDesign {
        decoders: decoders(h, &comm),
        comm,
        sense,
        nulling_residual: residual,
        residuals: alp.residuals.clone(),
        exact: false,
        report: SolveReport {
            objective: last,
            iterations: alp.iterations,
            trace: alp.residuals,
            ..SolveReport::with_status(status, Vec::new())
        },
    })
}

/// Plan in which BS `b` serves every CU with alignment beams and points an
/// aligned sensing beam at target `s`, splitting `power` equally.
pub fn ia_plan<T: Scalar>(channels: &ChannelSet<T>, b: usize, s: Option<usize>, power: T) -> Result<(BeamPlan<T>, IaDesign<T>)> {
    if b >= channels.n_bs() {
        return Err(invalid(format!("BS index {b} out of range")));
    }
    let h: Vec<CVec<T>> = channels.comm[b].clone();
    let a = s.map(|s| channels.target_steering(s, b));
    let design = ia_design(&h, a.as_deref(), 1e-10, 2000)?;
    let beams = h.len() + usize::from(design.sense.is_some());
    let amp = cplx((power / from_usize(beams)).sqrt(), T::zero());
    let mut plan = BeamPlan::empty(&channels.bs_antennas, h.len());
    for (k, w) in design.comm.iter().enumerate() {
        plan.comm[b][k] = scaled(w, amp);
    }
    if let Some(v) = &design.sense {
        plan.sense[b].push(scaled(v, amp));
    }
    Ok((plan, design))
}
