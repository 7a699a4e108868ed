//! Optimization kernels shared by the mitigation designs.

pub mod alp;
pub mod bilinear;
pub mod bnb;
pub mod conic;
pub mod penalty;
pub mod psd;
pub mod sca;

pub use alp::{alternating_projection, project_rank, AffineSet, AlpResult};
pub use bilinear::{bilinear_reformulate, lower_cut, mccormick, upper_cut, BilinearAux};
pub use bnb::{branch_and_bound, enumerate_bip, lpr_round, BipProblem};
pub use conic::{solve_conic, AffineExpr, ConicProblem, SolveReport, SolveStatus};
pub use penalty::{big_m_product, penalize_binary, LinearBinaryPenalty, PenalizedProblem, PenaltySchedule};
pub use psd::{project_psd, project_psd_trace, project_psd_trace_eq, projected_gradient_psd, MatrixObjective, PgOptions};
pub use sca::{ao_minimize, assert_monotone, sca_minimize, IterOptions, Surrogate};
