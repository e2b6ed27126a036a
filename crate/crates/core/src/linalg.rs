//! Dense complex linear algebra used by the eigensolver, backed by faer.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::perm::PermRef;
use faer::prelude::*;
use faer::{Conj, Side};

use crate::error::{Error, Result};

pub use faer::c64;

pub type ComplexMatrix = Mat<c64>;

/// Largest entry magnitude.
pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Frobenius norm.
pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

/// LU factorization with partial pivoting, computed in place.
pub struct LuFactor {
    lu: Mat<c64>,
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
    min_pivot: f64,
}

impl std::fmt::Debug for LuFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactor")
            .field("n", &self.lu.nrows())
            .field("min_pivot", &self.min_pivot)
            .finish()
    }
}

impl LuFactor {
    /// Factors `a`, consuming it. Fails with [`Error::SingularMatrix`] when the
    /// smallest pivot falls below `n·ε·‖A‖_max`.
    pub fn new(mut a: Mat<c64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let scale = max_abs(a.as_ref());
        if !scale.is_finite() {
            return Err(Error::Numeric("matrix has non-finite entries".into()));
        }
        let par = faer::get_global_parallelism();
        let mut perm = vec![0usize; n];
        let mut perm_inv = vec![0usize; n];
        let mut mem = MemBuffer::new(factor::lu_in_place_scratch::<usize, c64>(
            n,
            n,
            par,
            Default::default(),
        ));
        factor::lu_in_place(
            a.as_mut(),
            &mut perm,
            &mut perm_inv,
            par,
            MemStack::new(&mut mem),
            Default::default(),
        );
        let min_pivot = (0..n).map(|i| a[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        let threshold = n as f64 * f64::EPSILON * scale;
        if n > 0 && !(min_pivot >= threshold && min_pivot > 0.0) {
            return Err(Error::SingularMatrix { pivot: min_pivot });
        }
        Ok(Self {
            lu: a,
            perm,
            perm_inv,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Smallest pivot magnitude `min |U_ii|`.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Overwrites `rhs` with `A⁻¹·rhs`.
    pub fn solve_in_place(&self, mut rhs: MatMut<'_, c64>) {
        let n = self.dim();
        assert_eq!(rhs.nrows(), n, "right-hand side has the wrong row count");
        let par = faer::get_global_parallelism();
        let mut mem = MemBuffer::new(solve::solve_in_place_scratch::<usize, c64>(n, rhs.ncols(), par));
        let perm = PermRef::new_checked(&self.perm, &self.perm_inv, n);
        solve::solve_in_place_with_conj(
            self.lu.as_ref(),
            self.lu.as_ref(),
            perm,
            Conj::No,
            rhs.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
    }

    pub fn solve(&self, b: MatRef<'_, c64>) -> Mat<c64> {
        let mut x = b.to_owned();
        self.solve_in_place(x.as_mut());
        x
    }
}

/// Solves `A·X = B` by LU with partial pivoting.
pub fn lu_solve(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<Mat<c64>> {
    if b.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, matrix has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    Ok(LuFactor::new(a.to_owned())?.solve(b))
}

/// Thin singular value decomposition `A = U·diag(s)·V*`, `s` descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Mat<c64>,
    pub s: Vec<f64>,
    pub v: Mat<c64>,
}

pub fn svd(a: MatRef<'_, c64>) -> Result<SvdResult> {
    let dec = a
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
    let s: Vec<f64> = dec.S().column_vector().iter().map(|x| x.re).collect();
    Ok(SvdResult {
        u: dec.U().to_owned(),
        s,
        v: dec.V().to_owned(),
    })
}

/// Eigenvalues and (column) eigenvectors of a general square matrix.
pub fn eig_dense(a: MatRef<'_, c64>) -> Result<(Vec<c64>, Mat<c64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("eigendecomposition needs a square matrix".into()));
    }
    let dec = a
        .eigen()
        .map_err(|e| Error::Numeric(format!("eigendecomposition did not converge: {e:?}")))?;
    let values = dec.S().column_vector().iter().copied().collect();
    Ok((values, dec.U().to_owned()))
}

/// True iff the Hermitian part `(A + A*)/2` admits a Cholesky factorization.
pub fn cholesky_check(a: MatRef<'_, c64>) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let n = a.nrows();
    let h = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    h.llt(Side::Lower).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn random(n: usize, m: usize, seed: u64) -> Mat<c64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, m, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn identity_solve() {
        let b = random(5, 2, 1);
        let x = lu_solve(Mat::<c64>::identity(5, 5).as_ref(), b.as_ref()).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn permutation_swaps_rows() {
        let a = Mat::from_fn(2, 2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let b = Mat::from_fn(2, 3, |i, j| c((i * 3 + j) as f64, 0.0));
        let x = lu_solve(a.as_ref(), b.as_ref()).unwrap();
        for j in 0..3 {
            assert_eq!(x[(0, j)], b[(1, j)]);
            assert_eq!(x[(1, j)], b[(0, j)]);
        }
    }

    #[test]
    fn random_residual() {
        let a = random(50, 50, 2);
        let b = random(50, 4, 3);
        let x = lu_solve(a.as_ref(), b.as_ref()).unwrap();
        let r = &a * &x - &b;
        let bound = max_abs(a.as_ref()) * max_abs(x.as_ref());
        assert!(max_abs(r.as_ref()) <= 1e-10 * bound);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = Mat::from_fn(3, 3, |i, j| c((i + j) as f64, 0.0));
        match lu_solve(a.as_ref(), Mat::<c64>::identity(3, 3).as_ref()) {
            Err(Error::SingularMatrix { pivot }) => assert!(pivot < 1e-14),
            other => panic!("expected singular matrix, got {other:?}"),
        }
        assert!(matches!(
            lu_solve(random(3, 2, 0).as_ref(), random(3, 1, 0).as_ref()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn svd_examples() {
        let d = Mat::from_fn(2, 2, |i, j| if i == j { c([3.0, 1.0][i], 0.0) } else { c(0.0, 0.0) });
        let s = svd(d.as_ref()).unwrap().s;
        assert!((s[0] - 3.0).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);
        let u = random(6, 1, 4);
        let v = random(1, 6, 5);
        let s = svd((&u * &v).as_ref()).unwrap().s;
        assert!(s[1] <= 1e-13 * s[0]);
        let a = random(7, 5, 6);
        let dec = svd(a.as_ref()).unwrap();
        assert!(dec.s.windows(2).all(|w| w[0] >= w[1]) && dec.s[4] >= 0.0);
        let sig = Mat::from_fn(5, 5, |i, j| if i == j { c(dec.s[i], 0.0) } else { c(0.0, 0.0) });
        let rec = &dec.u * &sig * dec.v.adjoint();
        assert!(frobenius((&rec - &a).as_ref()) <= 1e-12 * frobenius(a.as_ref()));
    }

    #[test]
    fn eig_examples() {
        let d = Mat::from_fn(2, 2, |i, j| if i == j { c([2.0, 5.0][i], 0.0) } else { c(0.0, 0.0) });
        let (mut vals, _) = eig_dense(d.as_ref()).unwrap();
        vals.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((vals[0] - c(2.0, 0.0)).norm() < 1e-14 && (vals[1] - c(5.0, 0.0)).norm() < 1e-14);
        // companion matrix of z² − 3z + 2
        let comp = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(1.0, 0.0),
            (1, 0) => c(-2.0, 0.0),
            (1, 1) => c(3.0, 0.0),
            _ => c(0.0, 0.0),
        });
        let (mut vals, vecs) = eig_dense(comp.as_ref()).unwrap();
        for k in 0..2 {
            let v = vecs.col(k);
            let r = &comp * v - v * faer::Scale(vals[k]);
            assert!(r.norm_l2() <= 1e-10 * comp.norm_l2() * v.norm_l2());
        }
        vals.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((vals[0] - c(1.0, 0.0)).norm() < 1e-12 && (vals[1] - c(2.0, 0.0)).norm() < 1e-12);
        // near-defective [[1, 1], [δ, 1]]: eigenvalues 1 ± √δ
        let delta = 1e-8;
        let jordan = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (1, 0) => c(delta, 0.0),
            _ => c(1.0, 0.0),
        });
        let (mut vals, _) = eig_dense(jordan.as_ref()).unwrap();
        vals.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((vals[0].re - (1.0 - delta.sqrt())).abs() <= 1e-6);
        assert!((vals[1].re - (1.0 + delta.sqrt())).abs() <= 1e-6);
    }

    #[test]
    fn cholesky_examples() {
        assert!(cholesky_check(Mat::<c64>::identity(4, 4).as_ref()));
        let neg = Mat::from_fn(4, 4, |i, j| if i == j { c(-1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(!cholesky_check(neg.as_ref()));
    }

    #[test]
    fn svd_transpose_invariance() {
        let a = random(6, 4, 9);
        let s1 = svd(a.as_ref()).unwrap().s;
        let s2 = svd(a.transpose()).unwrap().s;
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() <= 1e-12 * s1[0]);
        }
    }
}
