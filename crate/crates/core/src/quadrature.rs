//! Gauss rules on the reference triangle and Sauter–Schwab rules for the
//! weakly singular four-dimensional panel-pair integrals.
//!
//! Reference triangle: `{(s, t) : s, t ≥ 0, s + t ≤ 1}` (area 1/2). A point
//! `(s, t)` on a panel with (locally ordered) corners `P0, P1, P2` is
//! `P0 + s(P1 − P0) + t(P2 − P0)`; the surface Jacobian is `2·area`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{classify_pair, PairKind, PanelPair, Point3, SurfaceMesh};

pub const MAX_TRIANGLE_ORDER: usize = 20;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration for the i-th root of P_n on [-1, 1]
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Quadrature rule on the reference triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub order: usize,
    /// `(s, t)` parameter pairs.
    pub points: Vec<[f64; 2]>,
    /// Positive weights summing to 1/2.
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn symmetric_orbits(orbits: &[(f64, f64)], centroid_weight: Option<f64>) -> (Vec<[f64; 2]>, Vec<f64>) {
    // each orbit (a, w): the three points with barycentrics (a, a, 1 − 2a);
    // weights given for a unit-area triangle
    let mut points = Vec::new();
    let mut weights = Vec::new();
    if let Some(w) = centroid_weight {
        points.push([1.0 / 3.0, 1.0 / 3.0]);
        weights.push(0.5 * w);
    }
    for &(a, w) in orbits {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a], [b, a], [a, b]] {
            points.push(p);
            weights.push(0.5 * w);
        }
    }
    (points, weights)
}

/// Gauss-type rule on the reference triangle, exact for polynomials of total
/// degree `order`. Orders up to 5 use symmetric rules; higher orders use the
/// collapsed (conical) product of Gauss–Legendre rules.
pub fn gauss_triangle(order: usize) -> Result<TriangleRule> {
    if order == 0 || order > MAX_TRIANGLE_ORDER {
        return Err(Error::UnsupportedOrder { order });
    }
    let (points, weights) = match order {
        1 => (vec![[1.0 / 3.0, 1.0 / 3.0]], vec![0.5]),
        2 => symmetric_orbits(&[(1.0 / 6.0, 1.0 / 3.0)], None),
        3 | 4 => symmetric_orbits(
            &[
                (0.445_948_490_915_964_9, 0.223_381_589_678_011_47),
                (0.091_576_213_509_770_74, 0.109_951_743_655_321_87),
            ],
            None,
        ),
        5 => {
            let r = 15f64.sqrt();
            symmetric_orbits(
                &[
                    ((6.0 - r) / 21.0, (155.0 - r) / 1200.0),
                    ((6.0 + r) / 21.0, (155.0 + r) / 1200.0),
                ],
                Some(9.0 / 40.0),
            )
        }
        _ => {
            let n = (order + 3) / 2;
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    points.push([*u, v * (1.0 - u)]);
                    weights.push(wu * wv * (1.0 - u));
                }
            }
            (points, weights)
        }
    };
    Ok(TriangleRule {
        order,
        points,
        weights,
    })
}

/// Four-dimensional rule for one panel-pair class. Points are
/// `(s_x, t_x, s_y, t_y)` on the reference triangle in the local vertex order
/// of [`PanelPair`]; weights carry the regularizing Jacobians and sum to 1/4.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRule {
    pub kind: PairKind,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl PairRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre points per dimension of the Sauter–Schwab cube for a
/// nominal order. Two points already integrate the cubic `ξ` Jacobians exactly.
pub fn sauter_schwab_points(order: usize) -> usize {
    (order / 2 + 1).max(2)
}

/// Composite rule for a panel-pair class. Singular classes use the
/// Sauter–Schwab decomposition of `[0,1]⁴` (6 / 5 / 2 subdomains for
/// identical / common edge / common vertex); disjoint pairs the tensor
/// product of two triangle rules.
pub fn sauter_schwab_rule(kind: PairKind, order: usize) -> Result<PairRule> {
    if order == 0 || order > MAX_TRIANGLE_ORDER {
        return Err(Error::UnsupportedOrder { order });
    }
    if kind == PairKind::Disjoint {
        let tri = gauss_triangle(order)?;
        let mut points = Vec::with_capacity(tri.len() * tri.len());
        let mut weights = Vec::with_capacity(tri.len() * tri.len());
        for (p, wp) in tri.points.iter().zip(&tri.weights) {
            for (q, wq) in tri.points.iter().zip(&tri.weights) {
                points.push([p[0], p[1], q[0], q[1]]);
                weights.push(wp * wq);
            }
        }
        return Ok(PairRule {
            kind,
            points,
            weights,
        });
    }

    let (g, gw) = gauss_legendre(sauter_schwab_points(order));
    let mut points = Vec::new();
    let mut weights = Vec::new();
    // Subdomain maps produce simplex coordinates (x1, x2), 0 ≤ x2 ≤ x1 ≤ 1;
    // the standard coordinates are (s, t) = (x1 − x2, x2).
    let mut push = |x: (f64, f64), y: (f64, f64), w: f64| {
        points.push([x.0 - x.1, x.1, y.0 - y.1, y.1]);
        weights.push(w);
    };
    for (&xi, &w0) in g.iter().zip(&gw) {
        for (&e1, &w1) in g.iter().zip(&gw) {
            for (&e2, &w2) in g.iter().zip(&gw) {
                for (&e3, &w3) in g.iter().zip(&gw) {
                    let w = w0 * w1 * w2 * w3;
                    match kind {
                        PairKind::Identical => {
                            let jac = w * xi.powi(3) * e1 * e1 * e2;
                            let a = (xi, xi * (1.0 - e1 + e1 * e2));
                            let b = (xi * (1.0 - e1 * e2 * e3), xi * (1.0 - e1));
                            push(a, b, jac);
                            push(b, a, jac);
                            let a = (xi, xi * e1 * (1.0 - e2 + e2 * e3));
                            let b = (xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2));
                            push(a, b, jac);
                            push(b, a, jac);
                            let a = (xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3));
                            let b = (xi, xi * e1 * (1.0 - e2));
                            push(a, b, jac);
                            push(b, a, jac);
                        }
                        PairKind::CommonEdge => {
                            let jac = w * xi.powi(3) * e1 * e1;
                            push(
                                (xi, xi * e1 * e3),
                                (xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)),
                                jac,
                            );
                            let jac = jac * e2;
                            push(
                                (xi, xi * e1),
                                (xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)),
                                jac,
                            );
                            push(
                                (xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)),
                                (xi, xi * e1 * e2 * e3),
                                jac,
                            );
                            push(
                                (xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)),
                                (xi, xi * e1),
                                jac,
                            );
                            push(
                                (xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)),
                                (xi, xi * e1 * e2),
                                jac,
                            );
                        }
                        PairKind::CommonVertex => {
                            let jac = w * xi.powi(3) * e2;
                            let a = (xi, xi * e1);
                            let b = (xi * e2, xi * e2 * e3);
                            push(a, b, jac);
                            push(b, a, jac);
                        }
                        PairKind::Disjoint => unreachable!(),
                    }
                }
            }
        }
    }
    Ok(PairRule {
        kind,
        points,
        weights,
    })
}

/// Quadrature orders used by assembly and their near/far switch.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSettings {
    /// Disjoint pairs whose centroid distance exceeds `far_ratio` times the
    /// larger panel diameter.
    pub far_order: usize,
    /// Remaining disjoint pairs.
    pub near_order: usize,
    /// Identical, common-edge and common-vertex pairs.
    pub singular_order: usize,
    pub far_ratio: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            far_order: 4,
            near_order: 6,
            singular_order: 8,
            far_ratio: 2.0,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        for order in [self.far_order, self.near_order, self.singular_order] {
            if order == 0 || order > MAX_TRIANGLE_ORDER {
                return Err(Error::UnsupportedOrder { order });
            }
        }
        if !(self.far_ratio >= 0.0) {
            return Err(Error::Domain("far_ratio must be non-negative".into()));
        }
        Ok(())
    }
}

/// All rules needed by assembly, built once per settings.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub settings: QuadratureSettings,
    pub far: TriangleRule,
    pub near: TriangleRule,
    pub identical: PairRule,
    pub edge: PairRule,
    pub vertex: PairRule,
}

impl RuleSet {
    pub fn new(settings: QuadratureSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            settings,
            far: gauss_triangle(settings.far_order)?,
            near: gauss_triangle(settings.near_order)?,
            identical: sauter_schwab_rule(PairKind::Identical, settings.singular_order)?,
            edge: sauter_schwab_rule(PairKind::CommonEdge, settings.singular_order)?,
            vertex: sauter_schwab_rule(PairKind::CommonVertex, settings.singular_order)?,
        })
    }

    pub fn singular(&self, kind: PairKind) -> Option<&PairRule> {
        match kind {
            PairKind::Identical => Some(&self.identical),
            PairKind::CommonEdge => Some(&self.edge),
            PairKind::CommonVertex => Some(&self.vertex),
            PairKind::Disjoint => None,
        }
    }

    /// Triangle rule for a disjoint pair at the given geometry.
    pub fn disjoint_rule(&self, centroid_distance: f64, max_diameter: f64) -> &TriangleRule {
        if centroid_distance > self.settings.far_ratio * max_diameter {
            &self.far
        } else {
            &self.near
        }
    }
}

/// Barycentric coordinates (original vertex order) of the local point
/// `(s, t)` under a local vertex order.
#[inline]
pub fn barycentric(order: &[usize; 3], s: f64, t: f64) -> [f64; 3] {
    let mut b = [0.0; 3];
    b[order[0]] = 1.0 - s - t;
    b[order[1]] = s;
    b[order[2]] = t;
    b
}

#[inline]
fn local_point(c: &[Point3; 3], order: &[usize; 3], s: f64, t: f64) -> Point3 {
    let p0 = c[order[0]];
    p0 + (c[order[1]] - p0) * s + (c[order[2]] - p0) * t
}

/// Visits every node of a pair rule as `(x, y, bary_x, bary_y, weight)`, with
/// the physical Jacobian `4·area_i·area_j` folded into the weight.
#[inline]
pub fn for_each_pair_node<F>(
    corners_i: &[Point3; 3],
    corners_j: &[Point3; 3],
    area_i: f64,
    area_j: f64,
    pair: &PanelPair,
    rule: &PairRule,
    mut f: F,
) where
    F: FnMut(&Point3, &Point3, &[f64; 3], &[f64; 3], f64),
{
    let jac = 4.0 * area_i * area_j;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let x = local_point(corners_i, &pair.test_order, p[0], p[1]);
        let y = local_point(corners_j, &pair.trial_order, p[2], p[3]);
        let bx = barycentric(&pair.test_order, p[0], p[1]);
        let by = barycentric(&pair.trial_order, p[2], p[3]);
        f(&x, &y, &bx, &by, w * jac);
    }
}

/// Rule used for a pair of panels of `mesh` under `rules`: the singular rule
/// of its class, or the near/far tensor rule.
pub fn pair_rule_for(mesh: &SurfaceMesh, i: usize, j: usize, rules: &RuleSet) -> (PanelPair, PairRule) {
    let pair = classify_pair(mesh, i, j);
    let rule = match rules.singular(pair.kind) {
        Some(rule) => rule.clone(),
        None => {
            let d = (mesh.centroid(i) - mesh.centroid(j)).norm();
            let tri = rules.disjoint_rule(d, mesh.diameter(i).max(mesh.diameter(j)));
            sauter_schwab_rule(PairKind::Disjoint, tri.order).expect("order validated")
        }
    };
    (pair, rule)
}

/// `∫_{τ_i}∫_{τ_j} k(x, y)·ρ_i(x)·ρ_j(y) dσ(y) dσ(x)`, where the densities are
/// functions of the barycentric coordinates of their panel.
#[allow(clippy::too_many_arguments)]
pub fn integrate_pair<K, Di, Dj>(
    mesh: &SurfaceMesh,
    i: usize,
    j: usize,
    kernel: K,
    density_i: Di,
    density_j: Dj,
    pair: &PanelPair,
    rule: &PairRule,
) -> Result<Complex64>
where
    K: Fn(&Point3, &Point3) -> Complex64,
    Di: Fn(&[f64; 3]) -> f64,
    Dj: Fn(&[f64; 3]) -> f64,
{
    let mut sum = Complex64::new(0.0, 0.0);
    let mut finite = true;
    for_each_pair_node(
        &mesh.corners(i),
        &mesh.corners(j),
        mesh.area(i),
        mesh.area(j),
        pair,
        rule,
        |x, y, bx, by, w| {
            let k = kernel(x, y);
            finite &= k.re.is_finite() && k.im.is_finite();
            sum += k * (w * density_i(bx) * density_j(by));
        },
    );
    if !finite {
        return Err(Error::NonFinite { test: i, trial: j });
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceMesh;
    use approx::assert_relative_eq;

    fn monomial(rule: &TriangleRule, a: i32, b: i32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[0].powi(a) * p[1].powi(b))
            .sum()
    }

    /// `∫_T s^a t^b = a! b! / (a + b + 2)!`.
    fn exact_monomial(a: i32, b: i32) -> f64 {
        let fact = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) as i32 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                assert_relative_eq!(q, 1.0 / (p + 1) as f64, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn triangle_rules_exact_to_order() {
        for order in 1..=MAX_TRIANGLE_ORDER {
            let rule = gauss_triangle(order).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for p in rule.points.iter() {
                assert!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0 + 1e-15);
            }
            for deg in 0..=order as i32 {
                for a in 0..=deg {
                    let b = deg - a;
                    let err = (monomial(&rule, a, b) - exact_monomial(a, b)).abs();
                    assert!(err <= 2e-15, "order {order}, s^{a} t^{b}: {err:e}");
                }
            }
        }
    }

    #[test]
    fn triangle_examples() {
        let r1 = gauss_triangle(1).unwrap();
        assert_eq!(r1.weights.iter().sum::<f64>(), 0.5);
        assert_relative_eq!(monomial(&r1, 1, 0), 1.0 / 6.0, epsilon = 1e-16);
        for order in 4..=MAX_TRIANGLE_ORDER {
            let r = gauss_triangle(order).unwrap();
            assert!((monomial(&r, 2, 2) - 1.0 / 180.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn unsupported_orders() {
        let err = gauss_triangle(0).unwrap_err();
        assert!(err.to_string().contains("1..=20"));
        assert!(matches!(gauss_triangle(21), Err(Error::UnsupportedOrder { order: 21 })));
    }

    #[test]
    fn pair_rule_weights_preserve_measure() {
        for kind in [
            PairKind::Disjoint,
            PairKind::CommonVertex,
            PairKind::CommonEdge,
            PairKind::Identical,
        ] {
            for order in [1, 4, 8] {
                let rule = sauter_schwab_rule(kind, order).unwrap();
                assert!(rule.weights.iter().all(|w| w.is_finite()));
                assert_relative_eq!(rule.weights.iter().sum::<f64>(), 0.25, epsilon = 1e-13);
            }
        }
        let tri = gauss_triangle(4).unwrap();
        let disjoint = sauter_schwab_rule(PairKind::Disjoint, 4).unwrap();
        assert_eq!(disjoint.len(), tri.len() * tri.len());
        let n = sauter_schwab_points(8);
        assert_eq!(sauter_schwab_rule(PairKind::Identical, 8).unwrap().len(), 6 * n.pow(4));
        assert_eq!(sauter_schwab_rule(PairKind::CommonEdge, 8).unwrap().len(), 5 * n.pow(4));
        assert_eq!(sauter_schwab_rule(PairKind::CommonVertex, 8).unwrap().len(), 2 * n.pow(4));
    }

    #[test]
    fn singular_rules_reproduce_smooth_integral() {
        // A smooth integrand over T × T is reproduced by every decomposition.
        let f = |p: &[f64; 4]| (p[0] + 2.0 * p[1] - p[2] + 0.5 * p[3]).exp() * (p[0] * p[3]).cos();
        let reference = {
            let r = sauter_schwab_rule(PairKind::Disjoint, 16).unwrap();
            r.points.iter().zip(&r.weights).map(|(p, w)| w * f(p)).sum::<f64>()
        };
        for kind in [PairKind::CommonVertex, PairKind::CommonEdge, PairKind::Identical] {
            let r = sauter_schwab_rule(kind, 18).unwrap();
            let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * f(p)).sum();
            assert_relative_eq!(q, reference, max_relative = 1e-12);
        }
    }

    fn unit_pair() -> SurfaceMesh {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        SurfaceMesh::new(v, vec![[0, 1, 2], [1, 3, 2]], false).unwrap()
    }

    #[test]
    fn constant_kernel_gives_area_product() {
        let mesh = unit_pair();
        let rules = RuleSet::new(QuadratureSettings::default()).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0)] {
            let (pair, rule) = pair_rule_for(&mesh, i, j, &rules);
            let v = integrate_pair(&mesh, i, j, |_, _| Complex64::new(1.0, 0.0), |_| 1.0, |_| 1.0, &pair, &rule)
                .unwrap();
            assert_relative_eq!(v.re, mesh.area(i) * mesh.area(j), epsilon = 1e-14);
        }
    }

    #[test]
    fn antisymmetric_kernel_vanishes_on_identical_pair() {
        let mesh = unit_pair();
        let rules = RuleSet::new(QuadratureSettings::default()).unwrap();
        let (pair, rule) = pair_rule_for(&mesh, 0, 0, &rules);
        let v = integrate_pair(
            &mesh,
            0,
            0,
            |x, y| Complex64::new((x - y).x * (1.0 + x.y * y.y), 0.0),
            |_| 1.0,
            |_| 1.0,
            &pair,
            &rule,
        )
        .unwrap();
        assert!(v.norm() <= 1e-12);
    }

    #[test]
    fn non_finite_kernel_reported_with_panels() {
        let mesh = unit_pair();
        let rules = RuleSet::new(QuadratureSettings::default()).unwrap();
        let (pair, rule) = pair_rule_for(&mesh, 0, 1, &rules);
        let err = integrate_pair(&mesh, 0, 1, |_, _| Complex64::new(f64::NAN, 0.0), |_| 1.0, |_| 1.0, &pair, &rule)
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { test: 0, trial: 1 }));
    }

    #[test]
    fn barycentric_densities_follow_permutation() {
        // ∫∫ λ_a(x) over an identical pair = area²/3 for every a
        let mesh = unit_pair();
        let rules = RuleSet::new(QuadratureSettings::default()).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0)] {
            let (pair, rule) = pair_rule_for(&mesh, i, j, &rules);
            for a in 0..3 {
                let v = integrate_pair(&mesh, i, j, |_, _| Complex64::new(1.0, 0.0), |b| b[a], |b| b[a] * b[a], &pair, &rule)
                    .unwrap();
                let expected = mesh.area(i) / 3.0 * mesh.area(j) / 6.0;
                assert_relative_eq!(v.re, expected, epsilon = 1e-14);
            }
        }
    }
}
