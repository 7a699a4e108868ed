//! Small dense complex linear algebra.
//!
//! Matrices here are at most a few dozen rows (antenna arrays, user sets), so
//! the decompositions are cyclic Jacobi methods: simple, accurate to working
//! precision, and generic over [`Scalar`].

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::{cis, cone, cst, czero, Cplx, Scalar};

/// Dense complex column vector.
pub type CVec<T> = Vec<Cplx<T>>;

/// `a^H b`.
pub fn dot<T: Scalar>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sqr<T: Scalar>(a: &[Cplx<T>]) -> T {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm<T: Scalar>(a: &[Cplx<T>]) -> T {
    norm_sqr(a).sqrt()
}

pub fn scaled<T: Scalar>(a: &[Cplx<T>], s: Cplx<T>) -> CVec<T> {
    a.iter().map(|x| x * s).collect()
}

pub fn zeros<T: Scalar>(n: usize) -> CVec<T> {
    vec![czero(); n]
}

/// Zero-pads (or truncates) a vector to length `n`.
pub fn pad<T: Scalar>(a: &[Cplx<T>], n: usize) -> CVec<T> {
    let mut out = zeros(n);
    for (o, x) in out.iter_mut().zip(a) {
        *o = *x;
    }
    out
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CMat<T: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Scalar> Index<(usize, usize)> for CMat<T> {
    type Output = Cplx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cplx<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cplx<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = cone();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cplx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[CVec<T>]) -> Self {
        let rows = cols.first().map_or(0, |c| c.len());
        Self::from_fn(rows, cols.len(), |i, j| cols[j][i])
    }

    /// Real diagonal matrix.
    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = Cplx::new(x, T::zero());
        }
        m
    }

    /// `a b^H`.
    pub fn outer(a: &[Cplx<T>], b: &[Cplx<T>]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Cplx<T>] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> CVec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> CVec<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn set_column(&mut self, j: usize, v: &[Cplx<T>]) {
        for (i, x) in v.iter().enumerate() {
            self[(i, j)] = *x;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Cplx<T>]) -> CVec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .fold(czero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `M^H v`.
    pub fn adjoint_mul_vec(&self, v: &[Cplx<T>]) -> CVec<T> {
        assert_eq!(self.rows, v.len(), "adjoint_mul_vec dimension mismatch");
        let mut out = zeros(self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self[(i, j)].conj() * v[i];
            }
        }
        out
    }

    /// `a^H M a` (real part only is meaningful for Hermitian `M`).
    pub fn quad_form(&self, a: &[Cplx<T>]) -> Cplx<T> {
        dot(a, &self.mul_vec(a))
    }

    /// `a^H M b`.
    pub fn bilinear(&self, a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
        dot(a, &self.mul_vec(b))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Self, s: T) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> Cplx<T> {
        (0..self.rows.min(self.cols)).fold(czero(), |acc, i| acc + self[(i, i)])
    }

    pub fn fro_norm_sqr(&self) -> T {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn fro_norm(&self) -> T {
        self.fro_norm_sqr().sqrt()
    }

    /// Real Frobenius inner product `Re tr(A^H B)`.
    pub fn inner_re(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Maximum entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = cst::<T>(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * half
        })
    }

    /// Embeds into the top-left corner of a larger zero matrix.
    pub fn embed(&self, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows.min(rows) {
            for j in 0..self.cols.min(cols) {
                out[(i, j)] = self[(i, j)];
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Scalar> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: CMat<T>,
}

impl<T: Scalar> HermitianEigen<T> {
    /// `V diag(f(λ)) V^H`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> CMat<T> {
        let n = self.values.len();
        let mut out = CMat::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let l = f(lam);
            if l == T::zero() {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[(i, k)] * l;
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Unitary 2x2 rotation `[[c, s], [-s e^{-jφ}, c e^{-jφ}]]` that diagonalizes
/// the Hermitian block `[[a, b], [b*, d]]` under `U^H · U`.
fn jacobi_rotation<T: Scalar>(a: T, d: T, b: Cplx<T>) -> [Cplx<T>; 4] {
    let r = b.norm();
    let phase = cis(-b.arg());
    let theta = (d - a) / (cst::<T>(2.0) * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let t = if theta == T::zero() { T::one() } else { t };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;
    let cc = Cplx::new(c, T::zero());
    let sc = Cplx::new(s, T::zero());
    [cc, sc, -sc * phase, cc * phase]
}

/// Hermitian eigen-decomposition by cyclic complex Jacobi rotations.
///
/// The input is symmetrized first; callers that care about non-Hermitian
/// input must check [`CMat::hermitian_defect`] themselves.
pub fn hermitian_eig<T: Scalar>(m: &CMat<T>) -> HermitianEigen<T> {
    assert!(m.is_square(), "eigen-decomposition needs a square matrix");
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut v = CMat::identity(n);
    let eps = T::epsilon();
    let scale = a.fro_norm().max(T::min_positive_value());

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= eps * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                if b.norm() <= eps * eps * scale {
                    continue;
                }
                let u = jacobi_rotation(a[(p, p)].re, a[(q, q)].re, b);
                // A <- A U on columns p, q
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u[0] + akq * u[2];
                    a[(k, q)] = akp * u[1] + akq * u[3];
                }
                // A <- U^H A on rows p, q
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u[0].conj() * apk + u[2].conj() * aqk;
                    a[(q, k)] = u[1].conj() * apk + u[3].conj() * aqk;
                }
                a[(p, q)] = czero();
                a[(q, p)] = czero();
                a[(p, p)] = Cplx::new(a[(p, p)].re, T::zero());
                a[(q, q)] = Cplx::new(a[(q, q)].re, T::zero());
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u[0] + vkq * u[2];
                    v[(k, q)] = vkp * u[1] + vkq * u[3];
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Thin singular value decomposition `A = U diag(s) V^H`.
#[derive(Clone, Debug)]
pub struct Svd<T: Scalar> {
    /// `m x n` matrix of left singular vectors (zero columns for zero singular values).
    pub u: CMat<T>,
    /// Singular values, descending, length `n`.
    pub s: Vec<T>,
    /// `n x n` unitary matrix of right singular vectors.
    pub v: CMat<T>,
}

impl<T: Scalar> Svd<T> {
    /// Best rank-`r` approximation in Frobenius norm.
    pub fn truncate(&self, r: usize) -> CMat<T> {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = CMat::zeros(m, n);
        for k in 0..r.min(self.s.len()) {
            let s = self.s[k];
            if s == T::zero() {
                continue;
            }
            for i in 0..m {
                let ui = self.u[(i, k)] * s;
                for j in 0..n {
                    out[(i, j)] += ui * self.v[(j, k)].conj();
                }
            }
        }
        out
    }

    /// Numerical rank at relative tolerance `tol`.
    pub fn rank(&self, tol: T) -> usize {
        let smax = self.s.first().copied().unwrap_or(T::zero());
        self.s.iter().filter(|&&s| s > tol * smax).count()
    }

    /// Orthonormal basis of the null space (columns of `V` past the numerical rank).
    pub fn null_space(&self, tol: T) -> Vec<CVec<T>> {
        let r = self.rank(tol);
        (r..self.v.cols()).map(|j| self.v.column(j)).collect()
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd<T: Scalar>(a: &CMat<T>) -> Svd<T> {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = CMat::identity(n);
    let eps = T::epsilon();

    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = czero::<T>();
                for i in 0..m {
                    alpha += w[(i, p)].norm_sqr();
                    beta += w[(i, q)].norm_sqr();
                    gamma += w[(i, p)].conj() * w[(i, q)];
                }
                if gamma.norm() <= eps * (alpha * beta).sqrt() || gamma.norm() == T::zero() {
                    continue;
                }
                rotated = true;
                let u = jacobi_rotation(alpha, beta, gamma);
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = wp * u[0] + wq * u[2];
                    w[(i, q)] = wp * u[1] + wq * u[3];
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = vp * u[0] + vq * u[2];
                    v[(i, q)] = vp * u[1] + vq * u[3];
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = (0..n).map(|j| norm(&w.column(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let s: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let smax = s.first().copied().unwrap_or(T::zero());
    let u = CMat::from_fn(m, n, |i, k| {
        let j = order[k];
        if norms[j] > eps * smax && norms[j] > T::zero() {
            w[(i, j)] / norms[j]
        } else {
            czero()
        }
    });
    let v = CMat::from_fn(n, n, |i, k| v[(i, order[k])]);
    Svd { u, s, v }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when `A` is numerically singular.
pub fn solve<T: Scalar>(a: &CMat<T>, b: &[Cplx<T>]) -> Option<CVec<T>> {
    assert!(a.is_square() && a.rows() == b.len(), "solve dimension mismatch");
    let n = a.rows();
    let mut m = a.clone();
    let mut x = b.to_vec();
    let tiny = T::epsilon() * a.max_abs().max(T::min_positive_value()) * from_len::<T>(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].norm().partial_cmp(&m[(j, col)].norm()).unwrap_or(std::cmp::Ordering::Equal))?;
        if m[(piv, col)].norm() <= tiny {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(col, piv);
        }
        let inv = cone::<T>() / m[(col, col)];
        for i in (col + 1)..n {
            let f = m[(i, col)] * inv;
            if f.norm() == T::zero() {
                continue;
            }
            for j in col..n {
                m[(i, j)] = m[(i, j)] - f * m[(col, j)];
            }
            x[i] = x[i] - f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= m[(i, j)] * x[j];
        }
        x[i] = acc / m[(i, i)];
    }
    Some(x)
}

/// Minimum-norm least-squares solution of `A x = b` via the SVD.
pub fn lstsq<T: Scalar>(a: &CMat<T>, b: &[Cplx<T>], rtol: T) -> CVec<T> {
    let d = svd(a);
    let r = d.rank(rtol);
    let mut x = zeros(a.cols());
    for k in 0..r {
        let coef = dot(&d.u.column(k), b) / d.s[k];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += d.v[(j, k)] * coef;
        }
    }
    x
}

fn from_len<T: Scalar>(n: usize) -> T {
    crate::scalar::from_usize(n.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMat<f64> {
        CMat::from_fn(m, n, |_, _| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..8 {
            let b = random_mat(&mut rng, n, n);
            let h = b.add(&b.adjoint());
            let e = hermitian_eig(&h);
            let back = e.reconstruct_with(|l| l);
            assert!(back.sub(&h).fro_norm() < 1e-12 * (1.0 + h.fro_norm()));
            let vhv = e.vectors.adjoint().matmul(&e.vectors);
            assert!(vhv.sub(&CMat::identity(n)).fro_norm() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_of_diagonal_is_sorted_diagonal() {
        let d = CMat::<f64>::from_diag(&[3.0, -1.0, 2.0]);
        let e = hermitian_eig(&d);
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (m, n) in [(3, 5), (5, 3), (4, 4), (1, 3)] {
            let a = random_mat(&mut rng, m, n);
            let d = svd(&a);
            let back = d.truncate(n);
            assert!(back.sub(&a).fro_norm() < 1e-12, "{m}x{n}");
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn null_space_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_mat(&mut rng, 2, 5);
        let ns = svd(&a).null_space(1e-12);
        assert_eq!(ns.len(), 3);
        for v in &ns {
            assert!(norm(&a.mul_vec(v)) < 1e-12);
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_and_lstsq_agree_on_square_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_mat(&mut rng, 4, 4);
        let b: CVec<f64> = (0..4).map(|_| Cplx::new(rng.gen(), rng.gen())).collect();
        let x1 = solve(&a, &b).unwrap();
        let x2 = lstsq(&a, &b, 1e-14);
        let r = a.mul_vec(&x1);
        for i in 0..4 {
            assert!((r[i] - b[i]).norm() < 1e-12);
            assert!((x1[i] - x2[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn singular_solve_is_none() {
        let a = CMat::<f64>::from_diag(&[1.0, 0.0]);
        assert!(solve(&a, &[cone(), cone()]).is_none());
    }

    #[test]
    fn f32_eigen_works() {
        let h = CMat::<f32>::from_fn(2, 2, |i, j| if i == j { Cplx::new(2.0, 0.0) } else if i < j { Cplx::new(0.0, 1.0) } else { Cplx::new(0.0, -1.0) });
        let e = hermitian_eig(&h);
        assert!((e.values[0] - 1.0).abs() < 1e-5 && (e.values[1] - 3.0).abs() < 1e-5);
    }
}
