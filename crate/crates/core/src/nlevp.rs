//! Contour-integral (Beyn) solver for holomorphic eigenproblems `F(z)x = 0`
//! and experimental convergence orders.

use faer::{Mat, Scale};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_dense, frobenius, svd, LuFactor};
use crate::operators::MatrixFunction;

type C = Complex64;

pub const DEFAULT_NODES: usize = 32;
pub const DEFAULT_PROBES: usize = 16;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;
pub const DEFAULT_SEED: u64 = 0x5eed_beef;
/// Relative gap that separates two clusters.
pub const CLUSTER_GAP: f64 = 1e-3;

/// Ellipse `c + a·cos t + i·b·sin t` sampled at `nodes` equispaced `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub center: C,
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
}

impl Contour {
    pub fn new(center: C, a: f64, b: f64, nodes: usize) -> Result<Self> {
        let c = Self { center, a, b, nodes };
        c.validate()?;
        Ok(c)
    }

    pub fn circle(center: C, radius: f64, nodes: usize) -> Result<Self> {
        Self::new(center, radius, radius, nodes)
    }

    /// Real-centred ellipse, as in the presets.
    pub fn ellipse(c: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(C::new(c, 0.0), a, b, DEFAULT_NODES)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::Domain(format!(
                "contour semi-axes must be positive, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.center.re.is_finite() && self.center.im.is_finite()) {
            return Err(Error::Domain("contour centre is not finite".into()));
        }
        if self.nodes < 8 || self.nodes % 2 != 0 {
            return Err(Error::Domain(format!(
                "contour needs an even node count of at least 8, got {}",
                self.nodes
            )));
        }
        Ok(())
    }

    /// Strict interior test.
    pub fn contains(&self, z: C) -> bool {
        let d = z - self.center;
        (d.re / self.a).powi(2) + (d.im / self.b).powi(2) < 1.0
    }

    /// Whether the contour is symmetric under complex conjugation.
    pub fn is_conjugate_symmetric(&self) -> bool {
        self.center.im == 0.0 && self.nodes % 2 == 0
    }
}

/// Trapezoid nodes `(z_j, z'_j)`, `t_j = 2πj/N`.
pub fn contour_nodes(contour: &Contour) -> Vec<(C, C)> {
    let n = contour.nodes;
    (0..n)
        .map(|j| {
            let t = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let (s, c) = t.sin_cos();
            (
                contour.center + C::new(contour.a * c, contour.b * s),
                C::new(-contour.a * s, contour.b * c),
            )
        })
        .collect()
}

/// Solver knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeynOptions {
    pub probes: usize,
    pub rank_tol: f64,
    /// Bound on `‖F(λ)x‖ / (‖F(λ)‖_F·‖x‖)` for accepted eigenpairs.
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for BeynOptions {
    fn default() -> Self {
        Self {
            probes: DEFAULT_PROBES,
            rank_tol: DEFAULT_RANK_TOL,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            seed: DEFAULT_SEED,
        }
    }
}

impl BeynOptions {
    pub fn validate(&self) -> Result<()> {
        if self.probes == 0 {
            return Err(Error::Domain("need at least one probe vector".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::Domain(format!("rank tolerance {} is not in (0, 1)", self.rank_tol)));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::Domain(format!("residual tolerance {} is not positive", self.residual_tol)));
        }
        Ok(())
    }
}

/// Accepted eigenpairs, sorted by real part.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<C>,
    /// Unit-norm eigenvectors as columns.
    pub eigenvectors: Mat<C>,
    /// `‖F(λ)x‖₂` for unit `x`.
    pub residuals: Vec<f64>,
    /// Residual divided by `‖F(λ)‖_F`; the acceptance criterion.
    pub relative_residuals: Vec<f64>,
    /// True where `|Im λ| > 1e-6·(1 + |Re λ|)`, unexpected for self-adjoint problems.
    pub suspect: Vec<bool>,
    pub detected_rank: usize,
    /// Singular values of the zeroth moment.
    pub singular_values: Vec<f64>,
    /// `s_k / s_{k+1}` at the rank cut (infinite when nothing was cut).
    pub singular_value_gap: f64,
    /// Candidates of the reduced problem dropped by the containment or
    /// residual filter.
    pub rejected: Vec<C>,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Cluster index of each eigenvalue (see [`cluster`]).
    pub fn clusters(&self) -> Vec<usize> {
        cluster(&self.eigenvalues, CLUSTER_GAP)
    }
}

/// Imaginary part large enough to be suspicious for a self-adjoint problem.
pub fn is_suspect(z: C) -> bool {
    z.im.abs() > 1e-6 * (1.0 + z.re.abs())
}

/// Fixed-seed real Gaussian probe matrix. Real probes keep the conjugate
/// symmetry `F(z̄)⁻¹V̂ = conj(F(z)⁻¹V̂)` available.
pub fn probe_matrix(n: usize, l: usize, seed: u64) -> Mat<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Mat::<C>::zeros(n, l);
    for j in 0..l {
        for i in 0..n {
            let v: f64 = StandardNormal.sample(&mut rng);
            m[(i, j)] = C::new(v, 0.0);
        }
    }
    m
}

/// Moments `A₀ = (1/iN)Σ F(z_j)⁻¹V̂ z'_j` and `A₁ = (1/iN)Σ z_j F(z_j)⁻¹V̂ z'_j`.
pub fn moments<F: MatrixFunction + ?Sized>(f: &F, contour: &Contour, probes: &Mat<C>) -> Result<(Mat<C>, Mat<C>)> {
    let nodes = contour_nodes(contour);
    let n_q = nodes.len();
    let mirror = f.conjugate_symmetric() && contour.is_conjugate_symmetric();
    let solved = if mirror { n_q / 2 + 1 } else { n_q };
    let mut xs: Vec<Mat<C>> = Vec::with_capacity(solved);
    for (j, &(z, _)) in nodes.iter().enumerate().take(solved) {
        let fz = f.eval(z)?;
        let lu = LuFactor::new(fz).map_err(|e| match e {
            Error::SingularMatrix { pivot } => Error::ContourHitsEigenvalue { z, pivot },
            other => other,
        })?;
        log::debug!("contour node {j}/{n_q}: z = {z}, min pivot {:.3e}", lu.min_pivot());
        xs.push(lu.solve(probes.as_ref()));
    }
    let (rows, cols) = (probes.nrows(), probes.ncols());
    let mut a0 = Mat::<C>::zeros(rows, cols);
    let mut a1 = Mat::<C>::zeros(rows, cols);
    let scale = C::new(0.0, -1.0 / n_q as f64);
    for (j, &(z, dz)) in nodes.iter().enumerate() {
        let w0 = dz * scale;
        let w1 = z * w0;
        let x = if j < solved {
            xs[j].as_ref()
        } else {
            // F(z_{N-j})⁻¹V̂ = conj(F(z_j)⁻¹V̂) for real probes
            let k = n_q - j;
            let conj = xs[k].conjugate().to_owned();
            a0 += conj.as_ref() * Scale(w0);
            a1 += conj.as_ref() * Scale(w1);
            continue;
        };
        a0 += x * Scale(w0);
        a1 += x * Scale(w1);
    }
    Ok((a0, a1))
}

/// Computes all eigenvalues of `F` inside `contour`.
pub fn beyn_solve<F: MatrixFunction + ?Sized>(f: &F, contour: &Contour, options: &BeynOptions) -> Result<EigenResult> {
    contour.validate()?;
    options.validate()?;
    let n = f.dim();
    if n == 0 {
        return Err(Error::Dimension("matrix function has dimension 0".into()));
    }
    let l = options.probes.min(n);
    let probes = probe_matrix(n, l, options.seed);
    let (a0, a1) = moments(f, contour, &probes)?;

    let dec = svd(a0.as_ref())?;
    let s = dec.s.clone();
    let rank = if s[0] > 0.0 {
        s.iter().take_while(|&&v| v > options.rank_tol * s[0]).count()
    } else {
        0
    };
    log::info!("moment rank {rank} of {l}; leading singular values {:?}", &s[..s.len().min(rank + 2)]);
    if rank == l && l < n {
        return Err(Error::ProbeTooSmall { rank, probes: l });
    }
    let gap = if rank < s.len() && rank > 0 {
        s[rank - 1] / s[rank]
    } else {
        f64::INFINITY
    };
    let mut result = EigenResult {
        eigenvalues: Vec::new(),
        eigenvectors: Mat::zeros(n, 0),
        residuals: Vec::new(),
        relative_residuals: Vec::new(),
        suspect: Vec::new(),
        detected_rank: rank,
        singular_values: s.clone(),
        singular_value_gap: gap,
        rejected: Vec::new(),
    };
    if rank == 0 {
        return Ok(result);
    }

    let uk = dec.u.subcols(0, rank).to_owned();
    let wk = dec.v.subcols(0, rank).to_owned();
    let mut b = uk.adjoint() * &a1 * &wk;
    for j in 0..rank {
        let inv = 1.0 / s[j];
        for i in 0..rank {
            b[(i, j)] *= inv;
        }
    }
    let (mu, vecs) = eig_dense(b.as_ref())?;
    let lifted = &uk * &vecs;

    let mut accepted: Vec<(C, Mat<C>, f64, f64)> = Vec::new();
    for (k, &z) in mu.iter().enumerate() {
        if !contour.contains(z) {
            result.rejected.push(z);
            continue;
        }
        let mut x = lifted.col(k).to_owned().as_mat().to_owned();
        let norm = x.norm_l2();
        if norm == 0.0 {
            result.rejected.push(z);
            continue;
        }
        x = x * Scale(C::new(1.0 / norm, 0.0));
        let fz = f.eval(z)?;
        let residual = (&fz * &x).norm_l2();
        let relative = residual / frobenius(fz.as_ref()).max(f64::MIN_POSITIVE);
        if relative <= options.residual_tol {
            accepted.push((z, x, residual, relative));
        } else {
            log::debug!("rejected {z}: relative residual {relative:.3e}");
            result.rejected.push(z);
        }
    }
    accepted.sort_by(|p, q| p.0.re.total_cmp(&q.0.re).then(p.0.im.total_cmp(&q.0.im)));
    result.eigenvectors = Mat::from_fn(n, accepted.len(), |i, j| accepted[j].1[(i, 0)]);
    for (z, _, r, rel) in accepted {
        result.eigenvalues.push(z);
        result.residuals.push(r);
        result.relative_residuals.push(rel);
        result.suspect.push(is_suspect(z));
    }
    Ok(result)
}

/// Groups eigenvalues sorted by real part: a new cluster starts whenever
/// `|λ_{k+1} − λ_k| > gap·max(|λ_k|, |λ_{k+1}|)`. Returns a cluster index
/// per input entry.
pub fn cluster(values: &[C], gap: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].re.total_cmp(&values[j].re));
    let mut ids = vec![0; values.len()];
    let mut current = 0;
    for w in 0..order.len() {
        if w > 0 {
            let (p, q) = (values[order[w - 1]], values[order[w]]);
            if (q - p).norm() > gap * p.norm().max(q.norm()) {
                current += 1;
            }
        }
        ids[order[w]] = current;
    }
    ids
}

/// Summary of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub mean: f64,
    pub size: usize,
}

/// Real-part means and sizes of the clusters returned by [`cluster`].
pub fn cluster_summaries(values: &[C], gap: f64) -> Vec<ClusterSummary> {
    let ids = cluster(values, gap);
    let count = ids.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![(0.0, 0usize); count];
    for (v, &id) in values.iter().zip(&ids) {
        sums[id].0 += v.re;
        sums[id].1 += 1;
    }
    sums.into_iter()
        .map(|(s, n)| ClusterSummary {
            mean: s / n as f64,
            size: n,
        })
        .collect()
}

/// Experimental orders `log(e_{k−1}/e_k) / log(h_{k−1}/h_k)`.
pub fn eoc(errors: &[f64], mesh_sizes: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != mesh_sizes.len() {
        return Err(Error::Degenerate(format!(
            "{} errors for {} mesh sizes",
            errors.len(),
            mesh_sizes.len()
        )));
    }
    if errors.len() < 2 {
        return Err(Error::Degenerate("need at least 2 levels".into()));
    }
    if let Some(k) = errors.iter().position(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Degenerate(format!("error {k} is not positive: {}", errors[k])));
    }
    if let Some(k) = mesh_sizes.iter().position(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::Degenerate(format!("mesh size {k} is not positive: {}", mesh_sizes[k])));
    }
    Ok(errors
        .windows(2)
        .zip(mesh_sizes.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Adapts a closure to [`MatrixFunction`].
pub struct FnMatrix<G> {
    dim: usize,
    conjugate_symmetric: bool,
    eval: G,
}

impl<G> FnMatrix<G>
where
    G: Fn(C) -> Mat<C> + Sync,
{
    pub fn new(dim: usize, eval: G) -> Self {
        Self {
            dim,
            conjugate_symmetric: false,
            eval,
        }
    }

    /// Declares `F(z̄) = conj(F(z))`.
    pub fn conjugate_symmetric(mut self) -> Self {
        self.conjugate_symmetric = true;
        self
    }
}

impl<G> MatrixFunction for FnMatrix<G>
where
    G: Fn(C) -> Mat<C> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, z: C) -> Result<Mat<C>> {
        let m = (self.eval)(z);
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::Dimension(format!(
                "closure returned {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                self.dim,
                self.dim
            )));
        }
        Ok(m)
    }

    fn conjugate_symmetric(&self) -> bool {
        self.conjugate_symmetric
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn diagonal() -> FnMatrix<impl Fn(C) -> Mat<C> + Sync> {
        FnMatrix::new(3, |z| {
            let d = [z - 2.0, z - 3.0, z + 1.0];
            Mat::from_fn(3, 3, |i, j| if i == j { d[i] } else { c(0.0, 0.0) })
        })
        .conjugate_symmetric()
    }

    #[test]
    fn nodes_of_small_circle() {
        let ct = Contour {
            center: c(1.0, 0.0),
            a: 2.0,
            b: 2.0,
            nodes: 4,
        };
        let nodes = contour_nodes(&ct);
        let expected = [c(3.0, 0.0), c(1.0, 2.0), c(-1.0, 0.0), c(1.0, -2.0)];
        for ((z, _), e) in nodes.iter().zip(expected) {
            assert!((z - e).norm() < 1e-15);
        }
        let ellipse = Contour::ellipse(-15.0, 14.99, 0.01).unwrap();
        let nodes = contour_nodes(&ellipse);
        assert_eq!(nodes.len(), DEFAULT_NODES);
        let sum: C = nodes.iter().map(|n| n.1).sum();
        assert!(sum.norm() < 1e-14 * ellipse.a);
    }

    #[test]
    fn contour_validation() {
        assert!(Contour::new(c(0.0, 0.0), 1.0, 1.0, 6).is_err());
        assert!(Contour::new(c(0.0, 0.0), 1.0, 1.0, 9).is_err());
        assert!(Contour::new(c(0.0, 0.0), 0.0, 1.0, 16).is_err());
        let ct = Contour::ellipse(-4.0, 3.99, 0.01).unwrap();
        assert!(ct.contains(c(-2.94, 0.0)) && !ct.contains(c(-8.1, 0.0)) && !ct.contains(c(-2.0, 0.02)));
    }

    #[test]
    fn diagonal_problem() {
        let f = diagonal();
        let ct = Contour::circle(c(2.5, 0.0), 1.0, 32).unwrap();
        let r = beyn_solve(&f, &ct, &BeynOptions::default()).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r.eigenvalues[0] - 2.0).norm() < 1e-10);
        assert!((r.eigenvalues[1] - 3.0).norm() < 1e-10);
        assert!(r.residuals.iter().all(|&x| x <= 1e-10));
        assert_eq!(r.detected_rank, 2);
        assert!(r.suspect.iter().all(|s| !s));
    }

    #[test]
    fn mirrored_nodes_match_full_evaluation() {
        let sym = diagonal();
        let plain = FnMatrix::new(3, |z| (sym.eval)(z));
        let ct = Contour::circle(c(2.5, 0.0), 1.0, 16).unwrap();
        let v = probe_matrix(3, 3, 1);
        let (a, b) = moments(&sym, &ct, &v).unwrap();
        let (p, q) = moments(&plain, &ct, &v).unwrap();
        assert!((&a - &p).norm_l2() < 1e-13 && (&b - &q).norm_l2() < 1e-13);
    }

    #[test]
    fn moments_of_shifted_identity() {
        // trapezoid error is |λ₀|^N, negligible here
        let lambda0 = c(0.1, 0.05);
        let f = FnMatrix::new(4, move |z| Mat::<C>::identity(4, 4) * Scale(z - lambda0));
        let ct = Contour::circle(c(0.0, 0.0), 1.0, 16).unwrap();
        let v = probe_matrix(4, 2, 7);
        let (a0, a1) = moments(&f, &ct, &v).unwrap();
        assert!((&a0 - &v).norm_l2() <= 1e-12 * v.norm_l2());
        let target = &v * Scale(lambda0);
        assert!((&a1 - &target).norm_l2() <= 1e-12 * v.norm_l2());
    }

    #[test]
    fn node_on_eigenvalue_is_reported() {
        let f = diagonal();
        // node at t = 0 is 2.5 + 0.5 = 3
        let ct = Contour::circle(c(2.5, 0.0), 0.5, 8).unwrap();
        match beyn_solve(&f, &ct, &BeynOptions::default()) {
            Err(Error::ContourHitsEigenvalue { z, .. }) => assert!((z - 3.0).norm() < 1e-12),
            other => panic!("expected contour error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_probes() {
        let f = FnMatrix::new(6, |z| {
            Mat::from_fn(6, 6, |i, j| if i == j { z - (i as f64) * 0.1 } else { c(0.0, 0.0) })
        });
        let ct = Contour::circle(c(0.25, 0.0), 1.0, 32).unwrap();
        let opts = BeynOptions {
            probes: 2,
            ..Default::default()
        };
        assert!(matches!(beyn_solve(&f, &ct, &opts), Err(Error::ProbeTooSmall { rank: 2, probes: 2 })));
    }

    #[test]
    fn empty_interior() {
        let f = diagonal();
        let ct = Contour::circle(c(10.0, 0.0), 1.0, 16).unwrap();
        let r = beyn_solve(&f, &ct, &BeynOptions::default()).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn eoc_examples() {
        let e = eoc(&[1.203e-2, 2.473e-3], &[0.2, 0.1]).unwrap();
        assert!((e[0] - 2.28).abs() < 5e-3);
        let e = eoc(&[2.837e-2, 6.968e-3], &[0.2, 0.1]).unwrap();
        assert!((e[0] - 2.02).abs() < 1e-2);
        let e = eoc(&[4.0, 1.0], &[2.0, 1.0]).unwrap();
        assert!((e[0] - 2.0).abs() < 1e-15);
        assert!(matches!(eoc(&[1.0, 0.0], &[0.2, 0.1]), Err(Error::Degenerate(_))));
        assert!(matches!(eoc(&[1.0], &[0.2]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn clustering() {
        let v = [c(-23.93, 0.0), c(-5.59, 0.0), c(-23.88, 0.0), c(-8.9550, 0.0), c(-8.9551, 0.0)];
        let ids = cluster(&v, CLUSTER_GAP);
        assert_eq!(ids, vec![0, 3, 1, 2, 2]);
        let s = cluster_summaries(&v, CLUSTER_GAP);
        assert_eq!(s.iter().map(|c| c.size).collect::<Vec<_>>(), vec![1, 1, 2, 1]);
        assert!(is_suspect(c(-1.0, 1e-3)) && !is_suspect(c(-1.0, 1e-7)));
    }
}
