//! Flat-triangle surface meshes, the benchmark surfaces, uniform refinement,
//! panel-pair adjacency and the discrete spaces S0 / S1.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Largest icosphere subdivision level accepted by [`make_sphere`].
pub const MAX_SPHERE_LEVEL: usize = 7;

/// Largest geodesic frequency accepted by [`make_geodesic_sphere`].
pub const MAX_GEODESIC_FREQUENCY: usize = 128;

/// Grid cells per unit length of the structured base meshes.
pub const BASE_RESOLUTION: usize = 8;

/// Surface the mesh vertices live on; refinement re-projects onto it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Projection {
    #[default]
    None,
    UnitSphere,
}

/// Oriented flat-triangle surface mesh. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    vertices: Vec<Point3>,
    panels: Vec<[usize; 3]>,
    areas: Vec<f64>,
    normals: Vec<Point3>,
    centroids: Vec<Point3>,
    diameters: Vec<f64>,
    closed: bool,
    mesh_size: f64,
    projection: Projection,
}

impl SurfaceMesh {
    /// Builds and validates a mesh.
    pub fn new(vertices: Vec<Point3>, panels: Vec<[usize; 3]>, closed: bool) -> Result<Self> {
        Self::with_projection(vertices, panels, closed, Projection::None)
    }

    pub fn with_projection(
        vertices: Vec<Point3>,
        panels: Vec<[usize; 3]>,
        closed: bool,
        projection: Projection,
    ) -> Result<Self> {
        if panels.is_empty() {
            return Err(Error::InvalidMesh("mesh has no panels".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {i}: non-finite coordinate")));
            }
        }
        let n_vertices = vertices.len();
        let mut areas = Vec::with_capacity(panels.len());
        let mut normals = Vec::with_capacity(panels.len());
        let mut centroids = Vec::with_capacity(panels.len());
        let mut diameters = Vec::with_capacity(panels.len());
        for (p, tri) in panels.iter().enumerate() {
            if tri.iter().any(|&v| v >= n_vertices) {
                return Err(Error::InvalidMesh(format!("panel {p}: vertex index out of range")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("panel {p}: repeated vertex index")));
            }
            let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let cross = (b - a).cross(&(c - a));
            let twice_area = cross.norm();
            let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            if !(twice_area > 1e-14 * longest * longest) {
                return Err(Error::InvalidMesh(format!("panel {p}: zero area")));
            }
            areas.push(0.5 * twice_area);
            normals.push(cross / twice_area);
            centroids.push((a + b + c) / 3.0);
            diameters.push(longest);
        }
        let mesh_size = diameters.iter().cloned().fold(0.0, f64::max);
        let mesh = Self {
            vertices,
            panels,
            areas,
            normals,
            centroids,
            diameters,
            closed,
            mesh_size,
            projection,
        };
        mesh.check_topology()?;
        Ok(mesh)
    }

    fn check_topology(&self) -> Result<()> {
        // directed edge -> number of occurrences
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.panels {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count > 1 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) used twice with the same orientation"
                )));
            }
            let twin = directed.contains_key(&(b, a));
            if self.closed && !twin {
                return Err(Error::InvalidMesh(format!(
                    "closed mesh has boundary edge ({a}, {b})"
                )));
            }
        }
        if self.closed && self.signed_volume() <= 0.0 {
            return Err(Error::InvalidMesh(
                "closed mesh is not outward oriented (signed volume <= 0)".into(),
            ));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn panels(&self) -> &[[usize; 3]] {
        &self.panels
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn area(&self, panel: usize) -> f64 {
        self.areas[panel]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn normal(&self, panel: usize) -> Point3 {
        self.normals[panel]
    }

    pub fn centroid(&self, panel: usize) -> Point3 {
        self.centroids[panel]
    }

    /// Longest edge of a panel.
    pub fn diameter(&self, panel: usize) -> f64 {
        self.diameters[panel]
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// `h`: the longest edge over all panels.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn corners(&self, panel: usize) -> [Point3; 3] {
        let t = self.panels[panel];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Volume enclosed by the surface, from the cone decomposition about the origin.
    pub fn signed_volume(&self) -> f64 {
        self.panels
            .iter()
            .map(|t| {
                let [a, b, c] = [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]];
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Σ area·ν; vanishes for closed surfaces.
    pub fn normal_flux(&self) -> Point3 {
        self.normals
            .iter()
            .zip(&self.areas)
            .fold(Point3::zeros(), |acc, (n, a)| acc + n * *a)
    }

    /// Marks vertices on the boundary of an open surface.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.panels {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut on_boundary = vec![false; self.vertices.len()];
        for (&(a, b), &count) in &edges {
            if count == 1 {
                on_boundary[a] = true;
                on_boundary[b] = true;
            }
        }
        on_boundary
    }

    /// Number of panels that use each undirected edge.
    pub fn edge_multiplicities(&self) -> BTreeMap<(usize, usize), usize> {
        let mut edges = BTreeMap::new();
        for tri in &self.panels {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edges
    }
}

fn orient_outward(vertices: &[Point3], panels: &mut [[usize; 3]], center: Point3) {
    for tri in panels.iter_mut() {
        let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
        let n = (b - a).cross(&(c - a));
        if n.dot(&((a + b + c) / 3.0 - center)) < 0.0 {
            tri.swap(1, 2);
        }
    }
}

/// Regular icosahedron inscribed in the unit sphere.
pub fn icosahedron() -> SurfaceMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let vertices: Vec<Point3> = raw
        .iter()
        .map(|p| Point3::new(p[0], p[1], p[2]).normalize())
        .collect();
    let mut panels = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    orient_outward(&vertices, &mut panels, Point3::zeros());
    SurfaceMesh::with_projection(vertices, panels, true, Projection::UnitSphere)
        .expect("icosahedron is a valid closed mesh")
}

/// Icosahedron quadrisected `level` times, vertices projected onto the unit sphere.
pub fn make_sphere(level: usize) -> Result<SurfaceMesh> {
    if level > MAX_SPHERE_LEVEL {
        return Err(Error::Capacity(format!(
            "sphere level {level} exceeds the limit {MAX_SPHERE_LEVEL}"
        )));
    }
    let mut mesh = icosahedron();
    for _ in 0..level {
        mesh = refine(&mesh);
    }
    Ok(mesh)
}

/// Geodesic sphere: every icosahedron face split into `frequency²` triangles on
/// a barycentric lattice, then projected. Allows mesh sizes between the
/// power-of-two levels of [`make_sphere`].
pub fn make_geodesic_sphere(frequency: usize) -> Result<SurfaceMesh> {
    if frequency == 0 || frequency > MAX_GEODESIC_FREQUENCY {
        return Err(Error::Capacity(format!(
            "geodesic frequency {frequency} outside 1..={MAX_GEODESIC_FREQUENCY}"
        )));
    }
    let ico = icosahedron();
    let n = frequency;
    // Lattice points are keyed by their sorted (corner, weight) list, so points
    // on shared edges are generated once with identical arithmetic.
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut node = |weights: [(usize, usize); 3]| -> usize {
        let mut key: Vec<(usize, usize)> = weights.into_iter().filter(|w| w.1 > 0).collect();
        key.sort_unstable();
        if let Some(&v) = index.get(&key) {
            return v;
        }
        let p = key.iter().fold(Point3::zeros(), |acc, &(v, w)| {
            acc + ico.vertices()[v] * (w as f64 / n as f64)
        });
        vertices.push(p.normalize());
        index.insert(key, vertices.len() - 1);
        vertices.len() - 1
    };
    let mut panels = Vec::with_capacity(20 * n * n);
    for &[a, b, c] in ico.panels() {
        let mut at = |i: usize, j: usize| node([(a, n - i - j), (b, i), (c, j)]);
        for j in 0..n {
            for i in 0..(n - j) {
                let p00 = at(i, j);
                let p10 = at(i + 1, j);
                let p01 = at(i, j + 1);
                panels.push([p00, p10, p01]);
                if i + j + 1 < n {
                    let p11 = at(i + 1, j + 1);
                    panels.push([p10, p11, p01]);
                }
            }
        }
    }
    orient_outward(&vertices, &mut panels, Point3::zeros());
    SurfaceMesh::with_projection(vertices, panels, true, Projection::UnitSphere)
}

/// Lattice-aligned mesh builder for the polyhedral benchmark surfaces.
struct LatticeBuilder {
    spacing: f64,
    index: HashMap<[i64; 3], usize>,
    vertices: Vec<Point3>,
    panels: Vec<[usize; 3]>,
}

impl LatticeBuilder {
    fn new(cells_per_unit: usize) -> Self {
        Self {
            spacing: 1.0 / cells_per_unit as f64,
            index: HashMap::new(),
            vertices: Vec::new(),
            panels: Vec::new(),
        }
    }

    fn vertex(&mut self, lattice: [i64; 3]) -> usize {
        let spacing = self.spacing;
        let vertices = &mut self.vertices;
        *self.index.entry(lattice).or_insert_with(|| {
            vertices.push(Point3::new(
                lattice[0] as f64 * spacing,
                lattice[1] as f64 * spacing,
                lattice[2] as f64 * spacing,
            ));
            vertices.len() - 1
        })
    }

    /// Adds the rectangle `origin + s·u + t·v`, `s ∈ [0, nu]`, `t ∈ [0, nv]`
    /// (lattice units); panel normals follow `u × v`.
    fn rectangle(&mut self, origin: [i64; 3], u: [i64; 3], v: [i64; 3], nu: i64, nv: i64) {
        let at = |s: i64, t: i64| -> [i64; 3] {
            [
                origin[0] + s * u[0] + t * v[0],
                origin[1] + s * u[1] + t * v[1],
                origin[2] + s * u[2] + t * v[2],
            ]
        };
        for t in 0..nv {
            for s in 0..nu {
                let p00 = self.vertex(at(s, t));
                let p10 = self.vertex(at(s + 1, t));
                let p11 = self.vertex(at(s + 1, t + 1));
                let p01 = self.vertex(at(s, t + 1));
                self.panels.push([p00, p10, p11]);
                self.panels.push([p00, p11, p01]);
            }
        }
    }

    fn finish(self, closed: bool) -> Result<SurfaceMesh> {
        SurfaceMesh::new(self.vertices, self.panels, closed)
    }
}

/// Unit square `[0,1]² × {0}` as an open screen on an `m × m` grid, normals `+z`.
pub fn make_screen(m: usize) -> Result<SurfaceMesh> {
    if m == 0 {
        return Err(Error::InvalidMesh("screen resolution must be positive".into()));
    }
    let m = m as i64;
    let mut b = LatticeBuilder::new(m as usize);
    b.rectangle([0, 0, 0], [1, 0, 0], [0, 1, 0], m, m);
    b.finish(false)
}

/// Surface of the unit cube `[0,1]³`, `m` cells per edge on each face.
pub fn make_cube(m: usize) -> Result<SurfaceMesh> {
    if m == 0 {
        return Err(Error::InvalidMesh("cube resolution must be positive".into()));
    }
    let k = m as i64;
    let mut b = LatticeBuilder::new(m);
    // bottom (-z), top (+z)
    b.rectangle([0, 0, 0], [0, 1, 0], [1, 0, 0], k, k);
    b.rectangle([0, 0, k], [1, 0, 0], [0, 1, 0], k, k);
    // y = 0 (-y), y = 1 (+y)
    b.rectangle([0, 0, 0], [1, 0, 0], [0, 0, 1], k, k);
    b.rectangle([0, k, 0], [0, 0, 1], [1, 0, 0], k, k);
    // x = 0 (-x), x = 1 (+x)
    b.rectangle([0, 0, 0], [0, 0, 1], [0, 1, 0], k, k);
    b.rectangle([k, 0, 0], [0, 1, 0], [0, 0, 1], k, k);
    b.finish(true)
}

/// Boundary of the L-shaped domain `(-1,1)³ \ ([0,1]² × [-1,1])`, `m` cells
/// per unit length. Total area 22.
pub fn make_lshape(m: usize) -> Result<SurfaceMesh> {
    if m == 0 {
        return Err(Error::InvalidMesh("L-shape resolution must be positive".into()));
    }
    let k = m as i64;
    let mut b = LatticeBuilder::new(m);
    let (x, y, z) = ([1, 0, 0], [0, 1, 0], [0, 0, 1]);
    // top z = 1 (+z): [-1,0]×[-1,1] and [0,1]×[-1,0]
    b.rectangle([-k, -k, k], x, y, k, 2 * k);
    b.rectangle([0, -k, k], x, y, k, k);
    // bottom z = -1 (-z)
    b.rectangle([-k, -k, -k], y, x, 2 * k, k);
    b.rectangle([0, -k, -k], y, x, k, k);
    // x = -1 (-x): y ∈ [-1,1]
    b.rectangle([-k, -k, -k], z, y, 2 * k, 2 * k);
    // y = -1 (-y): x ∈ [-1,1]
    b.rectangle([-k, -k, -k], x, z, 2 * k, 2 * k);
    // x = 1 (+x): y ∈ [-1,0]
    b.rectangle([k, -k, -k], y, z, k, 2 * k);
    // y = 1 (+y): x ∈ [-1,0]
    b.rectangle([-k, k, -k], z, x, 2 * k, k);
    // re-entrant faces: x = 0, y ∈ [0,1] (+x) and y = 0, x ∈ [0,1] (+y)
    b.rectangle([0, 0, -k], y, z, k, 2 * k);
    b.rectangle([0, 0, -k], z, x, 2 * k, k);
    b.finish(true)
}

/// Splits every panel into four through the edge midpoints. Meshes on the
/// unit sphere have the new vertices projected back onto it.
pub fn refine(mesh: &SurfaceMesh) -> SurfaceMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let mut p = (vertices[key.0] + vertices[key.1]) * 0.5;
            if mesh.projection == Projection::UnitSphere {
                p = p.normalize();
            }
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut panels = Vec::with_capacity(4 * mesh.panels.len());
    for &[a, b, c] in &mesh.panels {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        panels.push([a, ab, ca]);
        panels.push([ab, b, bc]);
        panels.push([ca, bc, c]);
        panels.push([ab, bc, ca]);
    }
    SurfaceMesh::with_projection(vertices, panels, mesh.closed, mesh.projection)
        .expect("refinement of a valid mesh is valid")
}

/// Adjacency class of two panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    Disjoint,
    CommonVertex,
    CommonEdge,
    Identical,
}

/// Adjacency of a panel pair with the local vertex orders used by the
/// singular quadrature: shared vertices first, a shared edge traversed in the
/// same direction on both panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PanelPair {
    pub kind: PairKind,
    pub test_order: [usize; 3],
    pub trial_order: [usize; 3],
}

const IDENTITY_ORDER: [usize; 3] = [0, 1, 2];

/// Classifies the pair (test panel `i`, trial panel `j`).
pub fn classify_pair(mesh: &SurfaceMesh, i: usize, j: usize) -> PanelPair {
    classify_triangles(&mesh.panels[i], &mesh.panels[j], i == j)
}

pub(crate) fn classify_triangles(ti: &[usize; 3], tj: &[usize; 3], same: bool) -> PanelPair {
    if same {
        return PanelPair {
            kind: PairKind::Identical,
            test_order: IDENTITY_ORDER,
            trial_order: IDENTITY_ORDER,
        };
    }
    let pos_j = |v: usize| tj.iter().position(|&w| w == v);
    let shared: Vec<(usize, usize)> = (0..3)
        .filter_map(|a| pos_j(ti[a]).map(|b| (a, b)))
        .collect();
    match shared.len() {
        0 => PanelPair {
            kind: PairKind::Disjoint,
            test_order: IDENTITY_ORDER,
            trial_order: IDENTITY_ORDER,
        },
        1 => {
            let (a, b) = shared[0];
            PanelPair {
                kind: PairKind::CommonVertex,
                test_order: [a, (a + 1) % 3, (a + 2) % 3],
                trial_order: [b, (b + 1) % 3, (b + 2) % 3],
            }
        }
        2 => {
            let (a0, b0) = shared[0];
            let (a1, b1) = shared[1];
            let a2 = 3 - a0 - a1;
            let b2 = 3 - b0 - b1;
            PanelPair {
                kind: PairKind::CommonEdge,
                test_order: [a0, a1, a2],
                trial_order: [b0, b1, b2],
            }
        }
        _ => PanelPair {
            // distinct panels over the same three vertices
            kind: PairKind::Identical,
            test_order: IDENTITY_ORDER,
            trial_order: [
                pos_j(ti[0]).unwrap(),
                pos_j(ti[1]).unwrap(),
                pos_j(ti[2]).unwrap(),
            ],
        },
    }
}

/// Kind of discrete space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    /// Piecewise constants, one dof per panel.
    S0,
    /// Continuous piecewise linears, one dof per (retained) vertex.
    S1,
}

/// Degrees of freedom of S0 or S1 on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DofSpace {
    kind: SpaceKind,
    dof_count: usize,
    vertex_dofs: Vec<Option<usize>>,
}

impl DofSpace {
    pub fn s0(mesh: &SurfaceMesh) -> Self {
        Self {
            kind: SpaceKind::S0,
            dof_count: mesh.panel_count(),
            vertex_dofs: Vec::new(),
        }
    }

    pub fn s1(mesh: &SurfaceMesh) -> Self {
        Self {
            kind: SpaceKind::S1,
            dof_count: mesh.vertex_count(),
            vertex_dofs: (0..mesh.vertex_count()).map(Some).collect(),
        }
    }

    /// S1 without the boundary vertices of an open surface (zero trace on the
    /// screen boundary). Identical to [`DofSpace::s1`] on closed meshes.
    pub fn s1_interior(mesh: &SurfaceMesh) -> Self {
        if mesh.is_closed() {
            return Self::s1(mesh);
        }
        let boundary = mesh.boundary_vertices();
        let mut next = 0;
        let vertex_dofs = boundary
            .iter()
            .map(|&on_boundary| {
                if on_boundary {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        Self {
            kind: SpaceKind::S1,
            dof_count: next,
            vertex_dofs,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    /// S1 dof of a vertex, `None` if excluded.
    pub fn vertex_dof(&self, vertex: usize) -> Option<usize> {
        self.vertex_dofs.get(vertex).copied().flatten()
    }
}
