//! Galerkin matrices of the boundary operators at a spectral point:
//! single layer `V`, double layer `K`, adjoint double layer `K'`,
//! hypersingular `D` (Maue form), mass matrices and the Birman–Schwinger
//! and Calderón systems built from them.
//!
//! Conventions: `K` carries the kernel `ν(y)·∇_y G(x, y)` and `K'` the kernel
//! `ν(x)·∇_x G(x, y)`, so that `∫_Σ ν(y)·∇_y G dσ(y) = −1/2` on a smooth
//! closed surface. The hypersingular form is
//! `⟨Dψ, χ⟩ = ∫∫ G(x, y) [curl ψ(y)·curl χ(x) − λ ν(x)·ν(y) ψ(y) χ(x)]`,
//! which is positive for `λ < 0`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::geometry::{classify_pair, DofSpace, PairKind, Point3, SpaceKind, SurfaceMesh};
use crate::kernel::SpectralPoint;
use crate::quadrature::{for_each_pair_node, QuadratureSettings, RuleSet, TriangleRule};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Dense Galerkin matrix of one boundary operator.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: Mat<C>,
    pub test: SpaceKind,
    pub trial: SpaceKind,
    pub lambda: C,
}

impl OperatorMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Quadrature points of one triangle rule mapped onto every panel.
#[derive(Debug, Clone)]
struct PanelPoints {
    per_panel: usize,
    points: Vec<Point3>,
    /// Rule weight times the surface Jacobian `2·area`.
    weights: Vec<f64>,
    bary: Vec<[f64; 3]>,
}

impl PanelPoints {
    fn new(mesh: &SurfaceMesh, rule: &TriangleRule) -> Self {
        let per_panel = rule.len();
        let mut points = Vec::with_capacity(per_panel * mesh.panel_count());
        let mut weights = Vec::with_capacity(per_panel * mesh.panel_count());
        for p in 0..mesh.panel_count() {
            let [a, b, c] = mesh.corners(p);
            let jac = 2.0 * mesh.area(p);
            for (st, w) in rule.points.iter().zip(&rule.weights) {
                points.push(a + (b - a) * st[0] + (c - a) * st[1]);
                weights.push(w * jac);
            }
        }
        let bary = rule
            .points
            .iter()
            .map(|st| [1.0 - st[0] - st[1], st[0], st[1]])
            .collect();
        Self {
            per_panel,
            points,
            weights,
            bary,
        }
    }

    #[inline]
    fn panel(&self, p: usize) -> (&[Point3], &[f64]) {
        let r = p * self.per_panel..(p + 1) * self.per_panel;
        (&self.points[r.clone()], &self.weights[r])
    }
}

/// Maps each unordered panel pair to a congruence class (equal relative
/// geometry up to translation), so that each class is integrated once.
#[derive(Debug, Clone)]
struct PairClasses {
    n: usize,
    class_of: Vec<u32>,
    representatives: Vec<(u32, u32)>,
}

impl PairClasses {
    #[inline]
    fn index(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i <= j);
        // rows 0..i hold n, n-1, ..., n-i+1 entries
        i * n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    /// Returns `None` when fewer than half of the pairs would be shared.
    fn build(mesh: &SurfaceMesh) -> Option<Self> {
        let n = mesh.panel_count();
        let total = n * (n + 1) / 2;
        if total > u32::MAX as usize {
            return None;
        }
        // lattice round-off is ~1e-16·h; anything coarser would merge distinct pairs
        let quantum = mesh.mesh_size() * 2f64.powi(-40);
        let quantize = |v: f64| (v / quantum).round() as i64;
        let mut map: FxHashMap<([i64; 15], [u8; 7]), u32> = FxHashMap::default();
        let mut class_of = Vec::with_capacity(total);
        let mut representatives = Vec::new();
        for i in 0..n {
            let ci = mesh.corners(i);
            let origin = ci[0];
            let mut key = [0i64; 15];
            for (k, p) in [ci[1], ci[2]].iter().enumerate() {
                let d = p - origin;
                for c in 0..3 {
                    key[3 * k + c] = quantize(d[c]);
                }
            }
            for j in i..n {
                let cj = mesh.corners(j);
                for (k, p) in cj.iter().enumerate() {
                    let d = p - origin;
                    for c in 0..3 {
                        key[6 + 3 * k + c] = quantize(d[c]);
                    }
                }
                let pair = classify_pair(mesh, i, j);
                let tag = [
                    pair.kind as u8,
                    pair.test_order[0] as u8,
                    pair.test_order[1] as u8,
                    pair.test_order[2] as u8,
                    pair.trial_order[0] as u8,
                    pair.trial_order[1] as u8,
                    pair.trial_order[2] as u8,
                ];
                let next = representatives.len() as u32;
                let id = *map.entry((key, tag)).or_insert_with(|| {
                    representatives.push((i as u32, j as u32));
                    next
                });
                class_of.push(id);
            }
            // bail out early once sharing is clearly poor
            if i == n / 8 && representatives.len() * 2 > class_of.len() {
                return None;
            }
        }
        if representatives.len() * 2 > total {
            return None;
        }
        Some(Self {
            n,
            class_of,
            representatives,
        })
    }

    #[inline]
    fn class(&self, i: usize, j: usize) -> usize {
        self.class_of[Self::index(self.n, i, j)] as usize
    }
}

/// Values that can be checked for NaN / Inf.
trait Finite {
    fn finite(&self) -> bool;
}

impl Finite for C {
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Finite for [C; 3] {
    fn finite(&self) -> bool {
        self.iter().all(Finite::finite)
    }
}

impl Finite for [[C; 3]; 3] {
    fn finite(&self) -> bool {
        self.iter().all(Finite::finite)
    }
}

/// Whether [`Assembler`] shares integrals between congruent panel pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
pub enum CongruenceMode {
    /// Use the cache when at least half of the pairs are shared.
    #[default]
    Auto,
    Off,
}

/// Precomputed quadrature data for one mesh; assembles operators at any
/// spectral point. Evaluation is deterministic: pair contributions are
/// accumulated in a fixed order independent of the thread count.
#[derive(Debug, Clone)]
pub struct Assembler {
    mesh: SurfaceMesh,
    rules: RuleSet,
    far: PanelPoints,
    near: PanelPoints,
    /// Per panel: surface curls of the three hat functions.
    curls: Vec<[Point3; 3]>,
    classes: Option<PairClasses>,
}

impl Assembler {
    pub fn new(mesh: &SurfaceMesh, settings: QuadratureSettings) -> Result<Self> {
        Self::with_mode(mesh, settings, CongruenceMode::Auto)
    }

    pub fn with_mode(mesh: &SurfaceMesh, settings: QuadratureSettings, mode: CongruenceMode) -> Result<Self> {
        let rules = RuleSet::new(settings)?;
        let far = PanelPoints::new(mesh, &rules.far);
        let near = PanelPoints::new(mesh, &rules.near);
        let curls = (0..mesh.panel_count())
            .map(|p| {
                let c = mesh.corners(p);
                let s = 1.0 / (2.0 * mesh.area(p));
                [(c[1] - c[2]) * s, (c[2] - c[0]) * s, (c[0] - c[1]) * s]
            })
            .collect();
        let classes = match mode {
            CongruenceMode::Auto => PairClasses::build(mesh),
            CongruenceMode::Off => None,
        };
        if let Some(c) = &classes {
            log::debug!(
                "congruence cache: {} classes for {} pairs",
                c.representatives.len(),
                c.class_of.len()
            );
        }
        Ok(Self {
            mesh: mesh.clone(),
            rules,
            far,
            near,
            curls,
            classes,
        })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn settings(&self) -> QuadratureSettings {
        self.rules.settings
    }

    /// Number of distinct pair integrals per evaluation, if the congruence
    /// cache is active.
    pub fn congruence_classes(&self) -> Option<usize> {
        self.classes.as_ref().map(|c| c.representatives.len())
    }

    /// Visits the quadrature nodes of the pair (test `i`, trial `j`) as
    /// `(x, y, bary_x, bary_y, weight)`.
    #[inline]
    fn visit<F>(&self, i: usize, j: usize, mut f: F)
    where
        F: FnMut(&Point3, &Point3, &[f64; 3], &[f64; 3], f64),
    {
        let mesh = &self.mesh;
        let pair = classify_pair(mesh, i, j);
        if let Some(rule) = self.rules.singular(pair.kind) {
            for_each_pair_node(
                &mesh.corners(i),
                &mesh.corners(j),
                mesh.area(i),
                mesh.area(j),
                &pair,
                rule,
                f,
            );
            return;
        }
        let d = (mesh.centroid(i) - mesh.centroid(j)).norm();
        let far = d > self.rules.settings.far_ratio * mesh.diameter(i).max(mesh.diameter(j));
        let pts = if far { &self.far } else { &self.near };
        let (xs, wx) = pts.panel(i);
        let (ys, wy) = pts.panel(j);
        for (p, (x, w1)) in xs.iter().zip(wx).enumerate() {
            for (q, (y, w2)) in ys.iter().zip(wy).enumerate() {
                f(x, y, &pts.bary[p], &pts.bary[q], w1 * w2);
            }
        }
    }

    /// `∫∫ G`.
    fn pair_single(&self, sp: &SpectralPoint, i: usize, j: usize) -> C {
        let mut sum = ZERO;
        self.visit(i, j, |x, y, _, _, w| sum += sp.green_r((x - y).norm()) * w);
        sum
    }

    /// `I_ab = ∫∫ G λ_a(x) λ_b(y)` in the panels' own vertex order.
    fn pair_hat(&self, sp: &SpectralPoint, i: usize, j: usize) -> [[C; 3]; 3] {
        let mut m = [[ZERO; 3]; 3];
        self.visit(i, j, |x, y, bx, by, w| {
            let g = sp.green_r((x - y).norm()) * w;
            for a in 0..3 {
                let ga = g * bx[a];
                for b in 0..3 {
                    m[a][b] += ga * by[b];
                }
            }
        });
        m
    }

    /// `∫∫ ν(y)·∇_y G λ_b(y)`, `y` on trial panel `j`.
    fn pair_double(&self, sp: &SpectralPoint, i: usize, j: usize) -> [C; 3] {
        let mut v = [ZERO; 3];
        if i == j {
            return v;
        }
        let nu = self.mesh.normal(j);
        self.visit(i, j, |x, y, _, by, w| {
            let d = x - y;
            let g = sp.grad_factor_r(d.norm()) * (w * d.dot(&nu));
            for b in 0..3 {
                v[b] += g * by[b];
            }
        });
        v
    }

    /// `∫∫ ν(x)·∇_x G λ_a(x)`, `x` on test panel `i`.
    fn pair_adjoint_double(&self, sp: &SpectralPoint, i: usize, j: usize) -> [C; 3] {
        let mut v = [ZERO; 3];
        if i == j {
            return v;
        }
        let nu = self.mesh.normal(i);
        self.visit(i, j, |x, y, bx, _, w| {
            let d = y - x;
            let g = sp.grad_factor_r(d.norm()) * (w * d.dot(&nu));
            for a in 0..3 {
                v[a] += g * bx[a];
            }
        });
        v
    }

    /// Computes `pair_fn(i, j)` for all test panels `i` and trial panels
    /// `j ≥ i` (symmetric) or all `j` (otherwise), then hands them to
    /// `scatter` in row-major pair order.
    fn for_all_pairs<T, P, S>(&self, symmetric: bool, pair_fn: P, mut scatter: S) -> Result<()>
    where
        T: Finite + Send,
        P: Fn(usize, usize) -> T + Sync,
        S: FnMut(usize, usize, &T),
    {
        let n = self.mesh.panel_count();
        let block = (2_000_000 / n.max(1)).clamp(1, n.max(1));
        let mut start = 0;
        while start < n {
            let end = (start + block).min(n);
            let rows: Vec<Vec<T>> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let first = if symmetric { i } else { 0 };
                    (first..n).map(|j| pair_fn(i, j)).collect()
                })
                .collect();
            for (offset, row) in rows.iter().enumerate() {
                let i = start + offset;
                let first = if symmetric { i } else { 0 };
                for (k, value) in row.iter().enumerate() {
                    let j = first + k;
                    if !value.finite() {
                        return Err(Error::NonFinite { test: i, trial: j });
                    }
                    scatter(i, j, value);
                }
            }
            start = end;
        }
        Ok(())
    }

    /// Symmetric pair loop that integrates each congruence class once when
    /// the cache is active.
    fn for_symmetric_pairs<T, P, S>(&self, pair_fn: P, scatter: S) -> Result<()>
    where
        T: Finite + Send + Sync + Copy,
        P: Fn(usize, usize) -> T + Sync,
        S: FnMut(usize, usize, &T),
    {
        match &self.classes {
            Some(classes) => {
                let values: Vec<T> = classes
                    .representatives
                    .par_iter()
                    .map(|&(i, j)| pair_fn(i as usize, j as usize))
                    .collect();
                self.for_all_pairs(true, |i, j| values[classes.class(i, j)], scatter)
            }
            None => self.for_all_pairs(true, pair_fn, scatter),
        }
    }

    /// Single layer on S0 × S0.
    pub fn single_layer(&self, sp: &SpectralPoint) -> Result<OperatorMatrix> {
        let n = self.mesh.panel_count();
        let mut m = Mat::<C>::zeros(n, n);
        self.for_symmetric_pairs(
            |i, j| self.pair_single(sp, i, j),
            |i, j, v| {
                m[(i, j)] = *v;
                m[(j, i)] = *v;
            },
        )?;
        Ok(OperatorMatrix {
            matrix: m,
            test: SpaceKind::S0,
            trial: SpaceKind::S0,
            lambda: sp.lambda(),
        })
    }

    /// Hypersingular operator on S1 × S1 in the Maue-regularized form.
    pub fn hypersingular(&self, sp: &SpectralPoint, space: &DofSpace) -> Result<OperatorMatrix> {
        check_s1(space, &self.mesh)?;
        let n = space.dof_count();
        let lambda = sp.lambda();
        let mut m = Mat::<C>::zeros(n, n);
        let panels = self.mesh.panels();
        self.for_symmetric_pairs(
            |i, j| self.pair_hat(sp, i, j),
            |i, j, integrals| {
                let nn = self.mesh.normal(i).dot(&self.mesh.normal(j));
                let total: C = integrals.iter().flatten().sum();
                for a in 0..3 {
                    let Some(row) = space.vertex_dof(panels[i][a]) else {
                        continue;
                    };
                    for b in 0..3 {
                        let Some(col) = space.vertex_dof(panels[j][b]) else {
                            continue;
                        };
                        let cc = self.curls[i][a].dot(&self.curls[j][b]);
                        let v = total * cc - lambda * integrals[a][b] * nn;
                        m[(row, col)] += v;
                        if i != j {
                            m[(col, row)] += v;
                        }
                    }
                }
            },
        )?;
        Ok(OperatorMatrix {
            matrix: m,
            test: SpaceKind::S1,
            trial: SpaceKind::S1,
            lambda,
        })
    }

    /// Double layer with S0 test and S1 trial functions. Closed meshes only.
    pub fn double_layer(&self, sp: &SpectralPoint, space: &DofSpace) -> Result<OperatorMatrix> {
        self.require_closed("double layer")?;
        check_s1(space, &self.mesh)?;
        let mut m = Mat::<C>::zeros(self.mesh.panel_count(), space.dof_count());
        let panels = self.mesh.panels();
        self.for_all_pairs(
            false,
            |i, j| self.pair_double(sp, i, j),
            |i, j, v| {
                for b in 0..3 {
                    if let Some(col) = space.vertex_dof(panels[j][b]) {
                        m[(i, col)] += v[b];
                    }
                }
            },
        )?;
        Ok(OperatorMatrix {
            matrix: m,
            test: SpaceKind::S0,
            trial: SpaceKind::S1,
            lambda: sp.lambda(),
        })
    }

    /// Adjoint double layer with S1 test and S0 trial functions, assembled
    /// from its own kernel (not by transposition). Closed meshes only.
    pub fn adjoint_double_layer(&self, sp: &SpectralPoint, space: &DofSpace) -> Result<OperatorMatrix> {
        self.require_closed("adjoint double layer")?;
        check_s1(space, &self.mesh)?;
        let mut m = Mat::<C>::zeros(space.dof_count(), self.mesh.panel_count());
        let panels = self.mesh.panels();
        self.for_all_pairs(
            false,
            |i, j| self.pair_adjoint_double(sp, i, j),
            |i, j, v| {
                for a in 0..3 {
                    if let Some(row) = space.vertex_dof(panels[i][a]) {
                        m[(row, j)] += v[a];
                    }
                }
            },
        )?;
        Ok(OperatorMatrix {
            matrix: m,
            test: SpaceKind::S1,
            trial: SpaceKind::S0,
            lambda: sp.lambda(),
        })
    }

    fn require_closed(&self, what: &str) -> Result<()> {
        if self.mesh.is_closed() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{what} is only assembled on closed meshes")))
        }
    }
}

fn check_s1(space: &DofSpace, mesh: &SurfaceMesh) -> Result<()> {
    if space.kind() != SpaceKind::S1 {
        return Err(Error::Dimension("expected an S1 space".into()));
    }
    if (0..mesh.vertex_count()).any(|v| space.vertex_dof(v).is_some_and(|d| d >= space.dof_count())) {
        return Err(Error::Dimension("S1 space does not belong to this mesh".into()));
    }
    Ok(())
}

pub fn assemble_v(mesh: &SurfaceMesh, sp: &SpectralPoint, settings: QuadratureSettings) -> Result<OperatorMatrix> {
    Assembler::with_mode(mesh, settings, CongruenceMode::Off)?.single_layer(sp)
}

pub fn assemble_k(mesh: &SurfaceMesh, sp: &SpectralPoint, settings: QuadratureSettings) -> Result<OperatorMatrix> {
    Assembler::with_mode(mesh, settings, CongruenceMode::Off)?.double_layer(sp, &DofSpace::s1(mesh))
}

pub fn assemble_kp(mesh: &SurfaceMesh, sp: &SpectralPoint, settings: QuadratureSettings) -> Result<OperatorMatrix> {
    Assembler::with_mode(mesh, settings, CongruenceMode::Off)?.adjoint_double_layer(sp, &DofSpace::s1(mesh))
}

pub fn assemble_d(mesh: &SurfaceMesh, sp: &SpectralPoint, settings: QuadratureSettings) -> Result<OperatorMatrix> {
    Assembler::with_mode(mesh, settings, CongruenceMode::Off)?.hypersingular(sp, &DofSpace::s1(mesh))
}

/// Which mass matrix to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassKind {
    S0,
    S1,
    /// S0 test functions (rows) against S1 trial functions (columns).
    Mixed,
}

/// Mass matrix `(φ_j, ψ_i)` with an optional panel-constant weight.
pub fn assemble_mass_weighted(
    mesh: &SurfaceMesh,
    kind: MassKind,
    space: &DofSpace,
    weight: Option<&[f64]>,
) -> Result<Mat<C>> {
    if let Some(w) = weight {
        if w.len() != mesh.panel_count() {
            return Err(Error::Dimension(format!(
                "{} panel weights for {} panels",
                w.len(),
                mesh.panel_count()
            )));
        }
    }
    let weight_of = |p: usize| weight.map_or(1.0, |w| w[p]);
    let n0 = mesh.panel_count();
    match kind {
        MassKind::S0 => Ok(Mat::from_fn(n0, n0, |i, j| {
            if i == j {
                C::new(weight_of(i) * mesh.area(i), 0.0)
            } else {
                ZERO
            }
        })),
        MassKind::S1 => {
            check_s1(space, mesh)?;
            let n = space.dof_count();
            let mut m = Mat::<C>::zeros(n, n);
            for (p, tri) in mesh.panels().iter().enumerate() {
                let s = weight_of(p) * mesh.area(p) / 12.0;
                for a in 0..3 {
                    let Some(r) = space.vertex_dof(tri[a]) else { continue };
                    for b in 0..3 {
                        let Some(c) = space.vertex_dof(tri[b]) else { continue };
                        m[(r, c)] += C::new(if a == b { 2.0 * s } else { s }, 0.0);
                    }
                }
            }
            Ok(m)
        }
        MassKind::Mixed => {
            check_s1(space, mesh)?;
            let mut m = Mat::<C>::zeros(n0, space.dof_count());
            for (p, tri) in mesh.panels().iter().enumerate() {
                for &v in tri {
                    if let Some(c) = space.vertex_dof(v) {
                        m[(p, c)] += C::new(weight_of(p) * mesh.area(p) / 3.0, 0.0);
                    }
                }
            }
            Ok(m)
        }
    }
}

/// Unweighted mass matrix on the standard space of each kind.
pub fn assemble_mass(mesh: &SurfaceMesh, kind: MassKind) -> Result<Mat<C>> {
    let space = match kind {
        MassKind::S0 => DofSpace::s0(mesh),
        _ => DofSpace::s1(mesh),
    };
    assemble_mass_weighted(mesh, kind, &space, None)
}

/// `F(z) = M_S0 + diag(α)·V(z)`.
pub fn bs_delta(assembler: &Assembler, z: C, alpha: &[f64]) -> Result<Mat<C>> {
    let mesh = assembler.mesh();
    if alpha.len() != mesh.panel_count() {
        return Err(Error::Dimension(format!(
            "{} alpha values for {} panels",
            alpha.len(),
            mesh.panel_count()
        )));
    }
    let mut f = assembler.single_layer(&SpectralPoint::new(z))?.matrix;
    for i in 0..f.nrows() {
        let a = alpha[i];
        for j in 0..f.ncols() {
            f[(i, j)] *= a;
        }
        f[(i, i)] += mesh.area(i);
    }
    Ok(f)
}

/// `F(z) = M_{β⁻¹} + D(z)` on the given S1 space.
pub fn bs_deltaprime(assembler: &Assembler, z: C, beta_inv: &[f64], space: &DofSpace) -> Result<Mat<C>> {
    let mesh = assembler.mesh();
    let mass = assemble_mass_weighted(mesh, MassKind::S1, space, Some(beta_inv))?;
    let d = assembler.hypersingular(&SpectralPoint::new(z), space)?.matrix;
    Ok(mass + d)
}

/// Galerkin block `[[V, −½M + K], [½Mᵀ − K', D]]` on S0 × S1.
pub fn calderon_block(assembler: &Assembler, z: C) -> Result<Mat<C>> {
    let mesh = assembler.mesh();
    if !mesh.is_closed() {
        return Err(Error::Unsupported("Calderón block needs a closed mesh".into()));
    }
    let sp = SpectralPoint::new(z);
    let s1 = DofSpace::s1(mesh);
    let v = assembler.single_layer(&sp)?.matrix;
    let k = assembler.double_layer(&sp, &s1)?.matrix;
    let kp = assembler.adjoint_double_layer(&sp, &s1)?.matrix;
    let d = assembler.hypersingular(&sp, &s1)?.matrix;
    let mix = assemble_mass_weighted(mesh, MassKind::Mixed, &s1, None)?;
    let (n0, n1) = (v.nrows(), d.nrows());
    let half = C::new(0.5, 0.0);
    Ok(Mat::from_fn(n0 + n1, n0 + n1, |r, c| match (r < n0, c < n0) {
        (true, true) => v[(r, c)],
        (true, false) => k[(r, c - n0)] - half * mix[(r, c - n0)],
        (false, true) => half * mix[(c, r - n0)] - kp[(r - n0, c)],
        (false, false) => d[(r - n0, c - n0)],
    }))
}

/// Problem whose Birman–Schwinger matrix function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ProblemKind {
    /// `M + αV(z)` on S0.
    DeltaBs,
    /// `M_{β⁻¹} + D(z)` on S1.
    DeltaPrimeBs,
    /// The 2×2 block operator (identity checks only).
    CalderonBlock,
}

/// Holomorphic matrix-valued function `z ↦ F(z)`.
pub trait MatrixFunction: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, z: C) -> Result<Mat<C>>;

    /// True if `F(z̄) = conj(F(z))`, which lets the contour solver reuse
    /// conjugate nodes.
    fn conjugate_symmetric(&self) -> bool {
        false
    }
}

/// The boundary-integral matrix function of a problem on a mesh.
#[derive(Debug, Clone)]
pub struct NonlinearMatrixFunction {
    kind: ProblemKind,
    assembler: Assembler,
    /// α (δ) or β⁻¹ (δ') per panel; unused for the block operator.
    coefficients: Vec<f64>,
    space: DofSpace,
}

impl NonlinearMatrixFunction {
    pub fn delta(assembler: Assembler, alpha: Vec<f64>) -> Result<Self> {
        let mesh = assembler.mesh();
        check_coefficients(&alpha, mesh.panel_count(), "alpha")?;
        let space = DofSpace::s0(mesh);
        Ok(Self {
            kind: ProblemKind::DeltaBs,
            assembler,
            coefficients: alpha,
            space,
        })
    }

    pub fn delta_prime(assembler: Assembler, beta_inv: Vec<f64>) -> Result<Self> {
        let mesh = assembler.mesh();
        check_coefficients(&beta_inv, mesh.panel_count(), "beta_inv")?;
        if !mesh.is_closed() {
            return Err(Error::Unsupported("delta-prime problems need a closed mesh".into()));
        }
        let space = DofSpace::s1(mesh);
        Ok(Self {
            kind: ProblemKind::DeltaPrimeBs,
            assembler,
            coefficients: beta_inv,
            space,
        })
    }

    pub fn calderon(assembler: Assembler) -> Result<Self> {
        if !assembler.mesh().is_closed() {
            return Err(Error::Unsupported("Calderón block needs a closed mesh".into()));
        }
        let space = DofSpace::s1(assembler.mesh());
        Ok(Self {
            kind: ProblemKind::CalderonBlock,
            assembler,
            coefficients: Vec::new(),
            space,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        self.assembler.mesh()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn space(&self) -> &DofSpace {
        &self.space
    }
}

fn check_coefficients(values: &[f64], panels: usize, name: &str) -> Result<()> {
    if values.len() != panels {
        return Err(Error::Dimension(format!("{} {name} values for {panels} panels", values.len())));
    }
    if let Some(p) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{name} on panel {p} is not finite")));
    }
    Ok(())
}

impl MatrixFunction for NonlinearMatrixFunction {
    fn dim(&self) -> usize {
        match self.kind {
            ProblemKind::DeltaBs => self.mesh().panel_count(),
            ProblemKind::DeltaPrimeBs => self.space.dof_count(),
            ProblemKind::CalderonBlock => self.mesh().panel_count() + self.space.dof_count(),
        }
    }

    fn eval(&self, z: C) -> Result<Mat<C>> {
        match self.kind {
            ProblemKind::DeltaBs => bs_delta(&self.assembler, z, &self.coefficients),
            ProblemKind::DeltaPrimeBs => bs_deltaprime(&self.assembler, z, &self.coefficients, &self.space),
            ProblemKind::CalderonBlock => calderon_block(&self.assembler, z),
        }
    }

    fn conjugate_symmetric(&self) -> bool {
        true
    }
}

/// Writes a matrix as CSV, one row per line, each entry as `re,im`.
pub fn dump_matrix_csv(matrix: &Mat<C>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(matrix.nrows() * matrix.ncols() * 48);
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(',');
            }
            let v = matrix[(i, j)];
            let _ = write!(out, "{:.17e},{:.17e}", v.re, v.im);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Kinds of pairs in a mesh, for diagnostics.
pub fn pair_kind_counts(mesh: &SurfaceMesh) -> [(PairKind, usize); 4] {
    let mut counts = [0usize; 4];
    for i in 0..mesh.panel_count() {
        for j in 0..mesh.panel_count() {
            counts[classify_pair(mesh, i, j).kind as usize] += 1;
        }
    }
    [
        (PairKind::Disjoint, counts[0]),
        (PairKind::CommonVertex, counts[1]),
        (PairKind::CommonEdge, counts[2]),
        (PairKind::Identical, counts[3]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::geometry::{make_cube, make_screen, make_sphere};
    use crate::linalg::{cholesky_check, max_abs};

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    fn two_panels() -> SurfaceMesh {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.3),
        ];
        SurfaceMesh::new(v, vec![[0, 1, 2], [1, 3, 2]], false).unwrap()
    }

    #[test]
    fn pair_class_index_is_dense() {
        let n = 7;
        let mut expected = 0;
        for i in 0..n {
            for j in i..n {
                assert_eq!(PairClasses::index(n, i, j), expected);
                expected += 1;
            }
        }
    }

    #[test]
    fn laplace_single_layer_toy() {
        let mesh = two_panels();
        let v = assemble_v(&mesh, &SpectralPoint::real(0.0), QuadratureSettings::default()).unwrap();
        assert_eq!(v.matrix[(0, 1)], v.matrix[(1, 0)]);
        assert!(v.matrix[(0, 0)].re > 0.0 && v.matrix[(1, 1)].re > 0.0);
        assert!(v.matrix[(0, 0)].im.abs() < 1e-300);
    }

    #[test]
    fn single_layer_conjugation() {
        let mesh = make_sphere(1).unwrap();
        let s = QuadratureSettings::default();
        let z = C::new(-3.0, 0.4);
        let a = assemble_v(&mesh, &SpectralPoint::new(z), s).unwrap().matrix;
        let b = assemble_v(&mesh, &SpectralPoint::new(z.conj()), s).unwrap().matrix;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert!((a[(i, j)] - b[(i, j)].conj()).norm() <= 1e-15 * a[(i, j)].norm());
            }
        }
    }

    #[test]
    fn mass_matrices() {
        let screen = make_screen(8).unwrap();
        let m0 = assemble_mass(&screen, MassKind::S0).unwrap();
        let trace: f64 = (0..m0.nrows()).map(|i| m0[(i, i)].re).sum();
        assert!((trace - 1.0).abs() < 1e-13);
        let m1 = assemble_mass(&screen, MassKind::S1).unwrap();
        let total: f64 = (0..m1.nrows()).flat_map(|i| (0..m1.ncols()).map(move |j| (i, j))).map(|(i, j)| m1[(i, j)].re).sum();
        assert!((total - 1.0).abs() < 1e-13);
        let mix = assemble_mass(&screen, MassKind::Mixed).unwrap();
        for p in 0..mix.nrows() {
            let row: f64 = (0..mix.ncols()).map(|j| mix[(p, j)].re).sum();
            assert!((row - screen.area(p)).abs() < 1e-15);
        }
    }

    #[test]
    fn bs_delta_trivial_cases() {
        let mesh = make_sphere(0).unwrap();
        let asm = Assembler::new(&mesh, QuadratureSettings::default()).unwrap();
        let f = bs_delta(&asm, c(-2.0), &vec![0.0; mesh.panel_count()]).unwrap();
        let m = assemble_mass(&mesh, MassKind::S0).unwrap();
        assert_eq!(f, m);
        let one = SurfaceMesh::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
            false,
        )
        .unwrap();
        let asm = Assembler::new(&one, QuadratureSettings::default()).unwrap();
        let v = asm.single_layer(&SpectralPoint::real(-2.0)).unwrap().matrix[(0, 0)];
        let f = bs_delta(&asm, c(-2.0), &[-3.0]).unwrap();
        assert_eq!(f[(0, 0)], c(0.5) + v * -3.0);
        assert!(matches!(bs_delta(&asm, c(-2.0), &[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn double_layer_rejects_open_mesh() {
        let screen = make_screen(2).unwrap();
        let err = assemble_k(&screen, &SpectralPoint::real(-1.0), QuadratureSettings::default()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        let asm = Assembler::new(&screen, QuadratureSettings::default()).unwrap();
        assert!(calderon_block(&asm, c(-1.0)).is_err());
    }

    #[test]
    fn flat_identical_double_layer_vanishes() {
        let mesh = make_cube(1).unwrap();
        let asm = Assembler::with_mode(&mesh, QuadratureSettings::default(), CongruenceMode::Off).unwrap();
        let sp = SpectralPoint::real(-1.0);
        // computed through the generic visitor, not the i == j shortcut
        let nu = mesh.normal(0);
        let mut sum = ZERO;
        asm.visit(0, 0, |x, y, _, _, w| sum += sp.grad_factor_r((x - y).norm()) * (w * (x - y).dot(&nu)));
        assert!(sum.norm() < 1e-14);
        // coplanar neighbours on one cube face
        let mut sum = ZERO;
        asm.visit(0, 1, |x, y, _, _, w| sum += sp.grad_factor_r((x - y).norm()) * (w * (x - y).dot(&nu)));
        assert!(sum.norm() < 1e-14);
    }

    #[test]
    fn congruence_cache_matches_direct_assembly() {
        let mesh = make_screen(6).unwrap();
        let s = QuadratureSettings::default();
        let cached = Assembler::new(&mesh, s).unwrap();
        assert!(cached.congruence_classes().is_some());
        let direct = Assembler::with_mode(&mesh, s, CongruenceMode::Off).unwrap();
        let sp = SpectralPoint::new(C::new(-4.0, 0.2));
        let a = cached.single_layer(&sp).unwrap().matrix;
        let b = direct.single_layer(&sp).unwrap().matrix;
        assert!(max_abs((&a - &b).as_ref()) <= 1e-12 * max_abs(b.as_ref()));
        let s1 = DofSpace::s1_interior(&mesh);
        let a = cached.hypersingular(&sp, &s1).unwrap().matrix;
        let b = direct.hypersingular(&sp, &s1).unwrap().matrix;
        assert!(max_abs((&a - &b).as_ref()) <= 1e-12 * max_abs(b.as_ref()));
        // the icosphere has too little congruence to benefit
        assert!(Assembler::new(&make_sphere(2).unwrap(), s).unwrap().congruence_classes().is_none());
    }

    #[test]
    fn hypersingular_curl_term_vanishes_on_constants() {
        let mesh = make_sphere(1).unwrap();
        let d = assemble_d(&mesh, &SpectralPoint::real(0.0), QuadratureSettings::default()).unwrap().matrix;
        for i in 0..d.nrows() {
            let row: C = (0..d.ncols()).map(|j| d[(i, j)]).sum();
            assert!(row.norm() <= 1e-12 * max_abs(d.as_ref()));
        }
    }

    #[test]
    fn spd_at_negative_lambda() {
        let mesh = make_sphere(1).unwrap();
        let sp = SpectralPoint::real(-4.0);
        let v = assemble_v(&mesh, &sp, QuadratureSettings::default()).unwrap().matrix;
        let d = assemble_d(&mesh, &sp, QuadratureSettings::default()).unwrap().matrix;
        for m in [&v, &d] {
            assert!(cholesky_check(m.as_ref()));
            assert!(max_abs((m - m.transpose()).as_ref()) <= 1e-12 * max_abs(m.as_ref()));
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    assert_eq!(m[(i, j)].im, 0.0);
                }
            }
        }
    }

    #[test]
    fn single_layer_sphere_symbol_level_two() {
        let mesh = make_sphere(2).unwrap();
        let kappa = 2.0;
        let v = assemble_v(&mesh, &SpectralPoint::real(-kappa * kappa), QuadratureSettings::default())
            .unwrap()
            .matrix;
        let mut num = ZERO;
        let mut den = 0.0;
        for i in 0..mesh.panel_count() {
            den += mesh.area(i);
            for j in 0..mesh.panel_count() {
                num += v[(i, j)];
            }
        }
        let expected = analytic::single_layer_sphere_symbol(0, kappa).unwrap();
        assert!(((num.re / den) - expected).abs() <= 5e-2 * expected);
    }

    #[test]
    fn matrix_dump_writes_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = Mat::from_fn(2, 3, |i, j| C::new(i as f64, j as f64));
        dump_matrix_csv(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 6);
    }
}
