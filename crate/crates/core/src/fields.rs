//! Off-surface evaluation of the single and double layer potentials and
//! planar grid export.
//!
//! Points closer than `2·diam` to a panel's bounding sphere are "near".
//! Under [`NearFieldPolicy::Exclude`] they are reported and set to NaN; under
//! [`NearFieldPolicy::Adaptive`] the near panels are subdivided around the
//! point until every piece is well separated from it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceMesh};
use crate::kernel::SpectralPoint;
use crate::quadrature::{gauss_triangle, TriangleRule};

type C = Complex64;

/// Panel rule order away from the surface.
pub const FAR_ORDER: usize = 6;
/// Panel rule order within [`MID_RATIO`] panel diameters.
pub const MID_ORDER: usize = 10;
pub const MID_RATIO: f64 = 5.0;
/// Near zone: closer than this many panel diameters to the bounding sphere.
pub const NEAR_RATIO: f64 = 2.0;

/// Treatment of points in the near zone of some panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NearFieldPolicy {
    /// Report the point and return NaN.
    #[default]
    Exclude,
    /// Subdivide near panels, at most `max_depth` levels deep.
    Adaptive { max_depth: usize },
}

impl NearFieldPolicy {
    pub fn adaptive() -> Self {
        Self::Adaptive { max_depth: 16 }
    }
}

/// Field values at a list of points; excluded points hold NaN.
#[derive(Debug, Clone)]
pub struct FieldValues<T> {
    pub values: Vec<T>,
    /// Indices of points that were not evaluated.
    pub excluded: Vec<usize>,
}

/// Density on the mesh.
#[derive(Debug, Clone, Copy)]
enum Density<'a> {
    /// Panel-constant values.
    S0(&'a [C]),
    /// Vertex values interpolated linearly.
    S1(&'a [C]),
}

/// What is integrated against the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    /// `G(x, y)`.
    Single,
    /// `∇_x G(x, y)`.
    SingleGradient,
    /// `ν(y)·∇_y G(x, y)`.
    Double,
}

struct Evaluator<'a> {
    mesh: &'a SurfaceMesh,
    sp: SpectralPoint,
    far: TriangleRule,
    mid: TriangleRule,
    policy: NearFieldPolicy,
    /// Per panel: centroid and bounding-sphere radius.
    spheres: Vec<(Point3, f64)>,
}

const NAN: C = C::new(f64::NAN, f64::NAN);

impl<'a> Evaluator<'a> {
    fn new(mesh: &'a SurfaceMesh, sp: &SpectralPoint, policy: NearFieldPolicy) -> Result<Self> {
        let spheres = (0..mesh.panel_count())
            .map(|p| {
                let c = mesh.centroid(p);
                let r = mesh.corners(p).iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
                (c, r)
            })
            .collect();
        Ok(Self {
            mesh,
            sp: *sp,
            far: gauss_triangle(FAR_ORDER)?,
            mid: gauss_triangle(MID_ORDER)?,
            policy,
            spheres,
        })
    }

    fn is_near(&self, p: usize, x: &Point3) -> bool {
        let (c, r) = self.spheres[p];
        (x - c).norm() - r < NEAR_RATIO * self.mesh.diameter(p)
    }

    /// Integrates `kernel · density` over the whole mesh; `None` if the point
    /// is excluded.
    fn eval(&self, x: &Point3, kernel: Kernel, density: Density<'_>) -> Option<[C; 3]> {
        let mut acc = [C::new(0.0, 0.0); 3];
        for p in 0..self.mesh.panel_count() {
            let corners = self.mesh.corners(p);
            let values = match density {
                Density::S0(phi) => [phi[p]; 3],
                Density::S1(psi) => {
                    let t = self.mesh.panels()[p];
                    [psi[t[0]], psi[t[1]], psi[t[2]]]
                }
            };
            if values.iter().all(|v| *v == C::new(0.0, 0.0)) {
                continue;
            }
            let normal = self.mesh.normal(p);
            if self.is_near(p, x) {
                match self.policy {
                    NearFieldPolicy::Exclude => return None,
                    NearFieldPolicy::Adaptive { max_depth } => {
                        let bary = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
                        self.subdivide(x, &corners, &bary, &values, &normal, kernel, max_depth, &mut acc);
                    }
                }
            } else {
                let (c, _) = self.spheres[p];
                let rule = if (x - c).norm() < MID_RATIO * self.mesh.diameter(p) {
                    &self.mid
                } else {
                    &self.far
                };
                let bary = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
                self.apply_rule(x, rule, &corners, &bary, &values, &normal, kernel, &mut acc);
            }
        }
        if acc.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Some(acc)
        } else {
            None
        }
    }

    /// Rule on the sub-triangle `corners`, whose vertices have barycentric
    /// coordinates `bary` in the parent panel.
    #[allow(clippy::too_many_arguments)]
    fn apply_rule(
        &self,
        x: &Point3,
        rule: &TriangleRule,
        corners: &[Point3; 3],
        bary: &[[f64; 3]; 3],
        values: &[C; 3],
        normal: &Point3,
        kernel: Kernel,
        acc: &mut [C; 3],
    ) {
        let area = 0.5 * (corners[1] - corners[0]).cross(&(corners[2] - corners[0])).norm();
        let jac = 2.0 * area;
        for (st, w) in rule.points.iter().zip(&rule.weights) {
            let l = [1.0 - st[0] - st[1], st[0], st[1]];
            let y = corners[0] * l[0] + corners[1] * l[1] + corners[2] * l[2];
            let mut density = C::new(0.0, 0.0);
            for (k, lk) in l.iter().enumerate() {
                let b = bary[k];
                density += (values[0] * b[0] + values[1] * b[1] + values[2] * b[2]) * *lk;
            }
            let d = x - y;
            let r = d.norm();
            let wd = density * (w * jac);
            match kernel {
                Kernel::Single => acc[0] += self.sp.green_r(r) * wd,
                Kernel::SingleGradient => {
                    // ∇_x G = −g(r)(x − y)
                    let g = -self.sp.grad_factor_r(r) * wd;
                    for c in 0..3 {
                        acc[c] += g * d[c];
                    }
                }
                Kernel::Double => acc[0] += self.sp.grad_factor_r(r) * (d.dot(normal)) * wd,
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn subdivide(
        &self,
        x: &Point3,
        corners: &[Point3; 3],
        bary: &[[f64; 3]; 3],
        values: &[C; 3],
        normal: &Point3,
        kernel: Kernel,
        depth: usize,
        acc: &mut [C; 3],
    ) {
        let c = (corners[0] + corners[1] + corners[2]) / 3.0;
        let radius = corners.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
        let diam = (corners[0] - corners[1])
            .norm()
            .max((corners[1] - corners[2]).norm())
            .max((corners[2] - corners[0]).norm());
        if depth == 0 || (x - c).norm() - radius >= NEAR_RATIO * diam {
            self.apply_rule(x, &self.mid, corners, bary, values, normal, kernel, acc);
            return;
        }
        let m = [
            (corners[0] + corners[1]) * 0.5,
            (corners[1] + corners[2]) * 0.5,
            (corners[2] + corners[0]) * 0.5,
        ];
        let mid = |a: usize, b: usize| -> [f64; 3] {
            [
                0.5 * (bary[a][0] + bary[b][0]),
                0.5 * (bary[a][1] + bary[b][1]),
                0.5 * (bary[a][2] + bary[b][2]),
            ]
        };
        let mb = [mid(0, 1), mid(1, 2), mid(2, 0)];
        let children = [
            ([corners[0], m[0], m[2]], [bary[0], mb[0], mb[2]]),
            ([m[0], corners[1], m[1]], [mb[0], bary[1], mb[1]]),
            ([m[2], m[1], corners[2]], [mb[2], mb[1], bary[2]]),
            ([m[0], m[1], m[2]], [mb[0], mb[1], mb[2]]),
        ];
        for (cc, bb) in &children {
            self.subdivide(x, cc, bb, values, normal, kernel, depth - 1, acc);
        }
    }

    fn run<T, F>(&self, points: &[Point3], kernel: Kernel, density: Density<'_>, pick: F) -> FieldValues<T>
    where
        T: Send,
        F: Fn(Option<[C; 3]>) -> T + Sync,
    {
        let raw: Vec<Option<[C; 3]>> = points.par_iter().map(|x| self.eval(x, kernel, density)).collect();
        let excluded = raw
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i)
            .collect();
        FieldValues {
            values: raw.into_iter().map(pick).collect(),
            excluded,
        }
    }
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{what} has {got} entries, expected {want}")));
    }
    Ok(())
}

/// `SL(λ)φ(x) = ∫ G(λ; x, y) φ(y) dσ(y)` for a panel-constant `φ`.
pub fn eval_single_layer(
    mesh: &SurfaceMesh,
    sp: &SpectralPoint,
    phi: &[C],
    points: &[Point3],
    policy: NearFieldPolicy,
) -> Result<FieldValues<C>> {
    check_len(phi.len(), mesh.panel_count(), "S0 density")?;
    let ev = Evaluator::new(mesh, sp, policy)?;
    Ok(ev.run(points, Kernel::Single, Density::S0(phi), |v| v.map_or(NAN, |a| a[0])))
}

/// `∇_x SL(λ)φ(x)`.
pub fn eval_single_layer_gradient(
    mesh: &SurfaceMesh,
    sp: &SpectralPoint,
    phi: &[C],
    points: &[Point3],
    policy: NearFieldPolicy,
) -> Result<FieldValues<[C; 3]>> {
    check_len(phi.len(), mesh.panel_count(), "S0 density")?;
    let ev = Evaluator::new(mesh, sp, policy)?;
    Ok(ev.run(points, Kernel::SingleGradient, Density::S0(phi), |v| v.unwrap_or([NAN; 3])))
}

/// `DL(λ)ψ(x) = ∫ ν(y)·∇_y G(λ; x, y) ψ(y) dσ(y)` for a piecewise-linear
/// `ψ` given at the mesh vertices.
pub fn eval_double_layer(
    mesh: &SurfaceMesh,
    sp: &SpectralPoint,
    psi: &[C],
    points: &[Point3],
    policy: NearFieldPolicy,
) -> Result<FieldValues<C>> {
    check_len(psi.len(), mesh.vertex_count(), "S1 density")?;
    let ev = Evaluator::new(mesh, sp, policy)?;
    Ok(ev.run(points, Kernel::Double, Density::S1(psi), |v| v.map_or(NAN, |a| a[0])))
}

/// Coordinate axis normal to a grid plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            "z" => Ok(Self::Z),
            _ => Err(Error::Parse(format!("unknown axis {s:?}, expected x, y or z"))),
        }
    }
}

/// Axis-aligned rectangle `{axis = offset}` sampled on an `nu × nv` lattice
/// including the edges. In-plane coordinates are the remaining axes in
/// cyclic order (for `Z`: `u = x`, `v = y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarGrid {
    pub axis: Axis,
    pub offset: f64,
    pub u_range: [f64; 2],
    pub v_range: [f64; 2],
    pub nu: usize,
    pub nv: usize,
}

impl PlanarGrid {
    /// The `z = offset` plane over a square `[lo, hi]²`.
    pub fn xy(offset: f64, lo: f64, hi: f64, n: usize) -> Self {
        Self {
            axis: Axis::Z,
            offset,
            u_range: [lo, hi],
            v_range: [lo, hi],
            nu: n,
            nv: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 || self.nv == 0 {
            return Err(Error::Domain("grid resolution must be positive".into()));
        }
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ok(self.u_range) || !ok(self.v_range) || !self.offset.is_finite() {
            return Err(Error::Domain("grid bounds must be finite and ordered".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coordinate(range: [f64; 2], n: usize, i: usize) -> f64 {
        if n == 1 {
            0.5 * (range[0] + range[1])
        } else {
            range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
        }
    }

    /// Row-major points: `v` index outer, `u` index inner.
    pub fn points(&self) -> Vec<Point3> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.nv {
            let v = Self::coordinate(self.v_range, self.nv, j);
            for i in 0..self.nu {
                let u = Self::coordinate(self.u_range, self.nu, i);
                out.push(match self.axis {
                    Axis::X => Point3::new(self.offset, u, v),
                    Axis::Y => Point3::new(v, self.offset, u),
                    Axis::Z => Point3::new(u, v, self.offset),
                });
            }
        }
        out
    }

    /// Points at distance at least `2·diam` from every panel's bounding
    /// sphere, as a mask over [`PlanarGrid::points`].
    pub fn far_mask(&self, mesh: &SurfaceMesh) -> Vec<bool> {
        let spheres: Vec<(Point3, f64, f64)> = (0..mesh.panel_count())
            .map(|p| {
                let c = mesh.centroid(p);
                let r = mesh.corners(p).iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
                (c, r, mesh.diameter(p))
            })
            .collect();
        self.points()
            .par_iter()
            .map(|x| spheres.iter().all(|(c, r, d)| (x - c).norm() - r >= NEAR_RATIO * d))
            .collect()
    }
}

/// CSV text with header `x,y,z,re,im,abs`; NaN values become empty fields.
pub fn grid_csv(values: &[C], points: &[Point3]) -> Result<String> {
    check_len(values.len(), points.len(), "value list")?;
    let mut out = String::from("x,y,z,re,im,abs\n");
    for (v, p) in values.iter().zip(points) {
        let _ = write!(out, "{:.12e},{:.12e},{:.12e},", p.x, p.y, p.z);
        if v.re.is_finite() && v.im.is_finite() {
            let _ = writeln!(out, "{:.12e},{:.12e},{:.12e}", v.re, v.im, v.norm());
        } else {
            out.push_str(",,\n");
        }
    }
    Ok(out)
}

pub fn export_grid(values: &[C], grid: &PlanarGrid, path: impl AsRef<Path>) -> Result<()> {
    grid.validate()?;
    let text = grid_csv(values, &grid.points())?;
    fs::write(path, text)?;
    Ok(())
}
