//! Subcarrier assignment separating sensing and communication tasks in frequency.

use crate::error::{check_len, invalid, Result};
use crate::scalar::{cst, Scalar};
use crate::solvers::{branch_and_bound, lpr_round, BipProblem, SolveReport, SolveStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaMethod {
    /// Exact branch and bound.
    Exact,
    /// LP relaxation rounded and repaired by diving.
    Lpr,
}

#[derive(Clone, Debug)]
pub struct SaDesign<T: Scalar> {
    /// `assign[t][n]`, present when a feasible assignment was found.
    pub assign: Option<Vec<Vec<bool>>>,
    pub report: SolveReport<T>,
}

/// Variable index of `ρ_{t,n}`.
fn idx(t: usize, n: usize, n_sub: usize) -> usize {
    t * n_sub + n
}

/// Builds the assignment program: task `t` receives exactly `demands[t]`
/// subcarriers, each subcarrier carries at most one task, and conflicting
/// tasks never share a subcarrier. `costs[t][n]` is the price of giving
/// subcarrier `n` to task `t`.
pub fn sa_program<T: Scalar>(costs: &[Vec<T>], demands: &[usize], conflicts: &[(usize, usize)]) -> Result<BipProblem<T>> {
    let nt = demands.len();
    check_len("cost rows", nt, costs.len())?;
    let n_sub = costs.first().map_or(0, |r| r.len());
    for r in costs {
        check_len("cost columns", n_sub, r.len())?;
    }
    for &(a, b) in conflicts {
        if a >= nt || b >= nt || a == b {
            return Err(invalid(format!("bad conflict pair ({a}, {b})")));
        }
    }
    let cost = (0..nt).flat_map(|t| costs[t].iter().copied()).collect();
    let mut bip = BipProblem::new(cost);
    for (t, &d) in demands.iter().enumerate() {
        bip.add_eq((0..n_sub).map(|n| (idx(t, n, n_sub), T::one())).collect(), cst(d as f64));
    }
    for n in 0..n_sub {
        bip.add_le((0..nt).map(|t| (idx(t, n, n_sub), T::one())).collect(), T::one());
        for &(a, b) in conflicts {
            bip.add_le(vec![(idx(a, n, n_sub), T::one()), (idx(b, n, n_sub), T::one())], T::one());
        }
    }
    Ok(bip)
}

/// Solves the assignment program. Demand exceeding the number of
/// subcarriers is reported as infeasible without a solve.
pub fn sa_design<T: Scalar>(
    costs: &[Vec<T>],
    demands: &[usize],
    conflicts: &[(usize, usize)],
    method: SaMethod,
) -> Result<SaDesign<T>> {
    let bip = sa_program(costs, demands, conflicts)?;
    let n_sub = costs.first().map_or(0, |r| r.len());
    if demands.iter().sum::<usize>() > n_sub {
        return Ok(SaDesign { assign: None, report: SolveReport::with_status(SolveStatus::Infeasible, Vec::new()) });
    }
    let report = match method {
        SaMethod::Exact => branch_and_bound(&bip)?,
        SaMethod::Lpr => lpr_round(&bip)?,
    };
    let assign = (report.status == SolveStatus::Optimal).then(|| {
        (0..demands.len())
            .map(|t| (0..n_sub).map(|n| report.solution[idx(t, n, n_sub)] > cst(0.5)).collect())
            .collect()
    });
    Ok(SaDesign { assign, report })
}

/// Number of (subcarrier, conflicting pair) collisions in an assignment.
pub fn band_collisions(assign: &[Vec<bool>], conflicts: &[(usize, usize)]) -> usize {
    let n_sub = assign.first().map_or(0, |r| r.len());
    (0..n_sub)
        .map(|n| conflicts.iter().filter(|&&(a, b)| assign[a][n] && assign[b][n]).count())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_tasks_on_four_subcarriers() {
        let costs = vec![vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 3.0, 2.0, 1.0]];
        let d = sa_design(&costs, &[2, 2], &[(0, 1)], SaMethod::Exact).unwrap();
        let a = d.assign.unwrap();
        assert_eq!(a[0], vec![true, true, false, false]);
        assert_eq!(a[1], vec![false, false, true, true]);
        assert_eq!(band_collisions(&a, &[(0, 1)]), 0);
    }

    #[test]
    fn over_demand_is_infeasible() {
        let costs = vec![vec![0.0; 2]; 3];
        for m in [SaMethod::Exact, SaMethod::Lpr] {
            let d = sa_design(&costs, &[1, 1, 1], &[], m).unwrap();
            assert_eq!(d.report.status, SolveStatus::Infeasible);
            assert!(d.assign.is_none());
        }
    }
}
