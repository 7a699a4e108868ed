//! Interference mitigation designs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::solvers::AffineExpr;

pub mod cmt;
pub mod hdbf;
pub mod ia;
pub mod sa;
pub mod ts;

pub use cmt::{cmt_design, cmt_design_seeded, verify_cmt, CmtDesign, CmtOptions, CmtScheme};
pub use hdbf::{angle_grid, hdbf_design, HdbfDesign, HdbfSpec};
pub use ia::{ia_design, IaDesign};
pub use sa::{sa_design, SaMethod};
pub use ts::{ts_design, TsDesign, TsMode, TsOptions, TsScheme};

/// Discrete choices of a design.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `rx_select[b]`: BS `b` receives echoes.
    pub rx_select: Vec<bool>,
    /// `user_assoc[b][k]`: BS `b` serves CU `k`.
    pub user_assoc: Vec<Vec<bool>>,
    /// `subcarrier_assign[t][n]`: task `t` occupies subcarrier `n`.
    pub subcarrier_assign: Vec<Vec<bool>>,
    /// `(τ_c, τ_s)` frame fractions.
    pub time_split: Option<(f64, f64)>,
}

impl Assignment {
    /// Checks that every CU is served by exactly one BS, no BS serves more
    /// than `k_max` CUs and no echo-receiving BS serves anyone.
    pub fn validate_association(&self, k_max: usize) -> Result<()> {
        let nk = self.user_assoc.first().map_or(0, |r| r.len());
        for k in 0..nk {
            let n = self.user_assoc.iter().filter(|r| r[k]).count();
            if n != 1 {
                return Err(invalid(format!("CU {k} is served by {n} BSs")));
            }
        }
        for (b, row) in self.user_assoc.iter().enumerate() {
            let load = row.iter().filter(|&&x| x).count();
            if load > k_max {
                return Err(invalid(format!("BS {b} serves {load} CUs, more than {k_max}")));
            }
            if self.rx_select.get(b).copied().unwrap_or(false) && load > 0 {
                return Err(invalid(format!("receiving BS {b} also serves CUs")));
            }
        }
        Ok(())
    }

    pub fn rx_bs(&self) -> Option<usize> {
        self.rx_select.iter().position(|&s| s)
    }
}

/// Layout of a complex beam inside a real variable vector: `n` real parts
/// starting at `offset`, followed by `n` imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct BeamVar {
    pub offset: usize,
    pub n: usize,
}

impl BeamVar {
    pub fn re(&self, i: usize) -> usize {
        self.offset + i
    }

    pub fn im(&self, i: usize) -> usize {
        self.offset + self.n + i
    }

    /// Real and imaginary parts of `c^H w`, scaled by `s`.
    pub fn inner<T: Scalar>(&self, c: &[crate::scalar::Cplx<T>], s: T) -> (AffineExpr<T>, AffineExpr<T>) {
        let mut re = AffineExpr::constant(T::zero());
        let mut im = AffineExpr::constant(T::zero());
        for (i, ci) in c.iter().enumerate() {
            // conj(c)·w = (cr·wr + ci·wi) + j(cr·wi − ci·wr)
            re = re.plus(self.re(i), s * ci.re).plus(self.im(i), s * ci.im);
            im = im.plus(self.im(i), s * ci.re).plus(self.re(i), -s * ci.im);
        }
        (re, im)
    }

    /// All `2n` real coordinates as expressions, scaled by `s`.
    pub fn coords<T: Scalar>(&self, s: T) -> Vec<AffineExpr<T>> {
        (0..2 * self.n).map(|i| AffineExpr::term(self.offset + i, s)).collect()
    }

    pub fn read<T: Scalar>(&self, x: &[T]) -> crate::linalg::CVec<T> {
        (0..self.n).map(|i| crate::scalar::cplx(x[self.re(i)], x[self.im(i)])).collect()
    }

    pub fn write<T: Scalar>(&self, x: &mut [T], w: &[crate::scalar::Cplx<T>]) {
        for (i, v) in w.iter().enumerate().take(self.n) {
            x[self.re(i)] = v.re;
            x[self.im(i)] = v.im;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::scalar::cplx;

    #[test]
    fn beam_inner_product_matches_complex_dot() {
        let bv = BeamVar { offset: 1, n: 3 };
        let c: Vec<crate::scalar::Cplx<f64>> = vec![cplx(1.0, -2.0), cplx(0.5, 0.3), cplx(-1.0, 1.0)];
        let w = vec![cplx(0.2, 0.7), cplx(-1.5, 0.1), cplx(0.4, -0.9)];
        let mut x = vec![0.0; 8];
        bv.write(&mut x, &w);
        let (re, im) = bv.inner(&c, 2.0);
        let want = dot(&c, &w) * 2.0;
        assert!((re.eval(&x) - want.re).abs() < 1e-12);
        assert!((im.eval(&x) - want.im).abs() < 1e-12);
        assert_eq!(bv.read(&x), w);
    }

    #[test]
    fn association_rules() {
        let mut a = Assignment {
            rx_select: vec![false, true],
            user_assoc: vec![vec![true, true], vec![false, false]],
            ..Default::default()
        };
        assert!(a.validate_association(2).is_ok());
        assert!(a.validate_association(1).is_err());
        a.user_assoc[1][0] = true;
        assert!(a.validate_association(2).is_err());
    }
}
