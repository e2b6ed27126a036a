//! Layer potentials evaluated off the surface against the classical jump
//! relations and the Gauss identity.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singular_bem::analytic::deltaprime_sphere_root;
use singular_bem::fields::{eval_double_layer, eval_single_layer_gradient, NearFieldPolicy};
use singular_bem::geometry::{make_sphere, Point3, SurfaceMesh};
use singular_bem::kernel::SpectralPoint;

type C = Complex64;

const EPS: f64 = 1e-3;

fn sample_panels(mesh: &SurfaceMesh) -> Vec<usize> {
    (0..mesh.panel_count()).step_by(53).collect()
}

#[test]
fn normal_derivative_of_single_layer_jumps_by_density() {
    let mesh = make_sphere(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phi: Vec<C> = (0..mesh.panel_count()).map(|_| C::new(rng.random_range(0.5..1.5), 0.0)).collect();
    let panels = sample_panels(&mesh);
    let mut points = Vec::new();
    for &p in &panels {
        let (c, n) = (mesh.centroid(p), mesh.normal(p));
        points.push(c - n * EPS);
        points.push(c + n * EPS);
    }
    let sp = SpectralPoint::real(-4.0);
    let grad = eval_single_layer_gradient(&mesh, &sp, &phi, &points, NearFieldPolicy::adaptive()).unwrap();
    assert!(grad.excluded.is_empty());
    let sup = phi.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (k, &p) in panels.iter().enumerate() {
        let n = mesh.normal(p);
        let dn = |g: &[C; 3]| g[0] * n[0] + g[1] * n[1] + g[2] * n[2];
        let jump = dn(&grad.values[2 * k]) - dn(&grad.values[2 * k + 1]);
        assert!((jump - phi[p]).norm() <= 0.1 * sup, "panel {p}: jump {jump} vs {}", phi[p]);
    }
}

#[test]
fn double_layer_of_constant_obeys_gauss_identity() {
    let mesh = make_sphere(3).unwrap();
    let psi = vec![C::new(1.0, 0.0); mesh.vertex_count()];
    let inside = [Point3::zeros(), Point3::new(0.3, -0.2, 0.4), Point3::new(0.0, 0.0, -0.45)];
    let outside = [Point3::new(1.5, 0.0, 0.0), Point3::new(-1.2, 1.1, 0.3), Point3::new(0.0, 0.0, 3.0)];
    let points: Vec<Point3> = inside.iter().chain(&outside).copied().collect();
    let out = eval_double_layer(&mesh, &SpectralPoint::real(0.0), &psi, &points, NearFieldPolicy::Exclude).unwrap();
    assert!(out.excluded.is_empty());
    for (k, v) in out.values.iter().enumerate() {
        let expected = if k < inside.len() { -1.0 } else { 0.0 };
        assert!((v - expected).norm() <= 5e-2, "at {:?}: {v}", points[k]);
    }
}

/// `f = DL(λ)1` at the l = 0 δ' root: the trace jump must equal `β·∂_ν f`.
#[test]
fn deltaprime_eigenfunction_jump_matches_conormal_derivative() {
    let beta_inv = -1.5;
    let root = deltaprime_sphere_root(beta_inv, 0).unwrap();
    let mesh = make_sphere(3).unwrap();
    let psi = vec![C::new(1.0, 0.0); mesh.vertex_count()];
    let sp = SpectralPoint::real(root.lambda);
    let delta = 1e-2;
    for p in [0, mesh.panel_count() / 3, 2 * mesh.panel_count() / 3] {
        let (c, n) = (mesh.centroid(p), mesh.normal(p));
        // offsets along the normal: −ε−2δ, −ε−δ, −ε, ε, ε+δ, ε+2δ
        let offsets = [-EPS - 2.0 * delta, -EPS - delta, -EPS, EPS, EPS + delta, EPS + 2.0 * delta];
        let points: Vec<Point3> = offsets.iter().map(|&t| c + n * t).collect();
        let f = eval_double_layer(&mesh, &sp, &psi, &points, NearFieldPolicy::adaptive()).unwrap().values;
        let jump = f[3] - f[2];
        // one-sided second-order differences, averaged
        let inner = (f[0] - f[1] * 4.0 + f[2] * 3.0) / (2.0 * delta);
        let outer = (f[4] * 4.0 - f[3] * 3.0 - f[5]) / (2.0 * delta);
        let conormal = (inner + outer) * 0.5;
        let predicted = conormal / beta_inv;
        assert!((jump - 1.0).norm() <= 0.1, "panel {p}: jump {jump}");
        assert!((jump - predicted).norm() <= 0.1 * jump.norm(), "panel {p}: jump {jump} vs β∂f {predicted}");
    }
}
