//! Alternating projection between an affine matrix set and a rank-bounded set.

use crate::error::{check_len, invalid, Result};
use crate::linalg::{solve, svd, CMat};
use crate::scalar::{cst, Cplx, Scalar};

/// `{Z : ⟨C_i, Z⟩ = b_i}` with `⟨C, Z⟩ = tr(C^H Z)`.
#[derive(Clone, Debug)]
pub struct AffineSet<T: Scalar> {
    pub rows: usize,
    pub cols: usize,
    pub functionals: Vec<CMat<T>>,
    pub values: Vec<Cplx<T>>,
    gram_inv_cache: Option<CMat<T>>,
}

impl<T: Scalar> AffineSet<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, functionals: Vec::new(), values: Vec::new(), gram_inv_cache: None }
    }

    /// Requires entry `(i, j)` to equal `v`.
    pub fn fix_entry(&mut self, i: usize, j: usize, v: Cplx<T>) {
        let mut c = CMat::zeros(self.rows, self.cols);
        c[(i, j)] = Cplx::new(T::one(), T::zero());
        self.add(c, v);
    }

    pub fn add(&mut self, c: CMat<T>, v: Cplx<T>) {
        self.functionals.push(c);
        self.values.push(v);
        self.gram_inv_cache = None;
    }

    fn inner(a: &CMat<T>, z: &CMat<T>) -> Cplx<T> {
        a.as_slice().iter().zip(z.as_slice()).fold(Cplx::new(T::zero(), T::zero()), |s, (x, y)| s + x.conj() * y)
    }

    fn prepare(&mut self) -> Result<()> {
        if self.gram_inv_cache.is_some() {
            return Ok(());
        }
        let m = self.functionals.len();
        let g = CMat::from_fn(m, m, |i, j| Self::inner(&self.functionals[i], &self.functionals[j]));
        let mut inv = CMat::zeros(m, m);
        for j in 0..m {
            let mut e = vec![Cplx::new(T::zero(), T::zero()); m];
            e[j] = Cplx::new(T::one(), T::zero());
            let col = solve(&g, &e).ok_or_else(|| invalid("affine functionals are linearly dependent"))?;
            inv.set_column(j, &col);
        }
        self.gram_inv_cache = Some(inv);
        Ok(())
    }

    /// Frobenius-nearest point of the set.
    pub fn project(&mut self, z: &CMat<T>) -> Result<CMat<T>> {
        check_len("affine projection rows", self.rows, z.rows())?;
        check_len("affine projection cols", self.cols, z.cols())?;
        if self.functionals.is_empty() {
            return Ok(z.clone());
        }
        self.prepare()?;
        let r: Vec<Cplx<T>> = self.functionals.iter().zip(&self.values).map(|(c, &b)| Self::inner(c, z) - b).collect();
        let lambda = self.gram_inv_cache.as_ref().expect("prepared").mul_vec(&r);
        let mut out = z.clone();
        for (c, l) in self.functionals.iter().zip(&lambda) {
            for (o, x) in out.as_mut_slice().iter_mut().zip(c.as_slice()) {
                *o -= x * l;
            }
        }
        Ok(out)
    }

    pub fn residual(&self, z: &CMat<T>) -> T {
        self.functionals
            .iter()
            .zip(&self.values)
            .map(|(c, &b)| (Self::inner(c, z) - b).norm_sqr())
            .sum::<T>()
            .sqrt()
    }
}

/// Frobenius-nearest matrix of rank at most `r` (truncated SVD).
pub fn project_rank<T: Scalar>(z: &CMat<T>, r: usize) -> CMat<T> {
    svd(z).truncate(r)
}

#[derive(Clone, Debug)]
pub struct AlpResult<T: Scalar> {
    /// Final point of the affine set.
    pub affine_point: CMat<T>,
    /// Final point of the rank set.
    pub rank_point: CMat<T>,
    /// Distance between consecutive iterates, alternating rank and affine steps.
    pub residuals: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates `Y = P_rank(X)`, `X = P_affine(Y)` from `x0`. The distance
/// between successive iterates never increases; stops once it drops below
/// `tol` (relative to `‖x0‖` or 1).
pub fn alternating_projection<T: Scalar>(
    affine: &mut AffineSet<T>,
    rank: usize,
    x0: &CMat<T>,
    tol: f64,
    max_iter: usize,
) -> Result<AlpResult<T>> {
    let scale = x0.fro_norm().max(T::one());
    let tol = cst::<T>(tol) * scale;
    let mut x = affine.project(x0)?;
    let mut y = project_rank(&x, rank);
    let mut residuals = vec![x.sub(&y).fro_norm()];
    let mut iterations = 0;
    let mut converged = residuals[0] <= tol;
    while !converged && iterations < max_iter {
        iterations += 1;
        let x_new = affine.project(&y)?;
        residuals.push(x_new.sub(&y).fro_norm());
        let y_new = project_rank(&x_new, rank);
        residuals.push(x_new.sub(&y_new).fro_norm());
        x = x_new;
        y = y_new;
        converged = *residuals.last().expect("non-empty") <= tol;
    }
    Ok(AlpResult { affine_point: x, rank_point: y, residuals, iterations, converged })
}
