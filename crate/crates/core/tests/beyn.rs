//! Contour solver on problems with independently known spectra.

use faer::Mat;
use num_complex::Complex64;
use singular_bem::linalg::{eig_dense, lu_solve};
use singular_bem::nlevp::{beyn_solve, BeynOptions, Contour, FnMatrix};

type C = Complex64;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn from_rows(rows: [[f64; 3]; 3]) -> Mat<C> {
    Mat::from_fn(3, 3, |i, j| c(rows[i][j]))
}

/// Eigenvalues of `A₀ + zA₁ + z²A₂` from its companion linearisation.
fn companion_eigenvalues(a0: &Mat<C>, a1: &Mat<C>, a2: &Mat<C>) -> Vec<C> {
    let p = lu_solve(a2.as_ref(), a0.as_ref()).unwrap();
    let q = lu_solve(a2.as_ref(), a1.as_ref()).unwrap();
    let l = Mat::from_fn(6, 6, |i, j| match (i < 3, j < 3) {
        (true, true) => c(0.0),
        (true, false) => c(if j - 3 == i { 1.0 } else { 0.0 }),
        (false, true) => -p[(i - 3, j)],
        (false, false) => -q[(i - 3, j - 3)],
    });
    eig_dense(l.as_ref()).unwrap().0
}

#[test]
fn quadratic_polynomial_matches_companion_linearisation() {
    let a0 = from_rows([[4.0, 1.0, 0.0], [-2.0, 3.0, 1.0], [1.0, 0.0, -5.0]]);
    let a1 = from_rows([[1.0, -1.0, 2.0], [0.0, 2.0, -1.0], [3.0, 1.0, 1.0]]);
    let a2 = from_rows([[2.0, 0.0, 1.0], [1.0, 3.0, 0.0], [0.0, 1.0, 2.0]]);
    let mut exact = companion_eigenvalues(&a0, &a1, &a2);
    exact.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    // circle through the widest gap in modulus among the smallest three
    let (k, _) = (1..=3)
        .map(|k| (k, exact[k].norm() - exact[k - 1].norm()))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap();
    let radius = 0.5 * (exact[k - 1].norm() + exact[k].norm());
    assert!(exact[k].norm() - exact[k - 1].norm() > 0.1, "{exact:?}");
    let inside: Vec<C> = exact[..k].to_vec();

    let f = FnMatrix::new(3, |z: C| &a0 + &a1 * faer::Scale(z) + &a2 * faer::Scale(z * z));
    let contour = Contour::circle(c(0.0), radius, 128).unwrap();
    let res = beyn_solve(&f, &contour, &BeynOptions::default()).unwrap();
    assert_eq!(res.len(), inside.len(), "{:?} vs {inside:?}", res.eigenvalues);
    for z in &inside {
        let err = res.eigenvalues.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
        assert!(err <= 1e-8 * (1.0 + z.norm()), "{z}: error {err:.2e}");
    }
}

fn diagonal(values: Vec<f64>) -> FnMatrix<impl Fn(C) -> Mat<C> + Sync> {
    let n = values.len();
    FnMatrix::new(n, move |z: C| Mat::from_fn(n, n, |i, j| if i == j { z - values[i] } else { c(0.0) }))
        .conjugate_symmetric()
}

#[test]
fn doubling_nodes_changes_little() {
    let f = diagonal(vec![-7.3, -4.1, -2.2, 0.5, 3.0]);
    let coarse = beyn_solve(&f, &Contour::new(c(-4.0), 4.0, 1.0, 32).unwrap(), &BeynOptions::default()).unwrap();
    let fine = beyn_solve(&f, &Contour::new(c(-4.0), 4.0, 1.0, 64).unwrap(), &BeynOptions::default()).unwrap();
    assert_eq!(coarse.len(), 3);
    assert_eq!(fine.len(), 3);
    for (a, b) in coarse.eigenvalues.iter().zip(&fine.eigenvalues) {
        assert!((a - b).norm() <= 1e-8 * b.norm(), "{a} vs {b}");
    }
}

#[test]
fn result_is_independent_of_probe_seed() {
    // a non-normal linear problem: F(z) = A − zI with A upper triangular
    let n = 12;
    let a = Mat::from_fn(n, n, |i, j| {
        if i == j {
            c(-(i as f64) - 0.5)
        } else if j > i {
            c(((i * 7 + j * 3) % 5) as f64 * 0.3)
        } else {
            c(0.0)
        }
    });
    let f = FnMatrix::new(n, move |z: C| Mat::from_fn(n, n, |i, j| a[(i, j)] - if i == j { z } else { c(0.0) }))
        .conjugate_symmetric();
    let contour = Contour::new(c(-3.0), 2.2, 0.5, 64).unwrap();
    let runs: Vec<_> = [1u64, 2, 99]
        .iter()
        .map(|&seed| {
            let opts = BeynOptions {
                probes: 8,
                seed,
                ..BeynOptions::default()
            };
            beyn_solve(&f, &contour, &opts).unwrap()
        })
        .collect();
    for r in &runs {
        let expected = [-4.5, -3.5, -2.5, -1.5];
        assert_eq!(r.len(), expected.len(), "{:?}", r.eigenvalues);
        for (z, e) in r.eigenvalues.iter().zip(expected) {
            assert!((z - e).norm() <= 1e-8, "{z} vs {e}");
        }
        assert!(r.relative_residuals.iter().all(|&v| v <= 1e-6));
    }
}
