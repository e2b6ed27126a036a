use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use singular_bem::geometry::SurfaceMesh;
use singular_bem::nlevp::{beyn_solve, cluster_summaries, EigenResult, CLUSTER_GAP};
use singular_bem::operators::{dump_matrix_csv, Assembler, MatrixFunction, NonlinearMatrixFunction};

use crate::config::{Problem, SolveConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueRecord {
    pub re: f64,
    pub im: f64,
    /// `‖F(λ)x‖₂` for the unit eigenvector.
    pub residual: f64,
    /// `residual / ‖F(λ)‖_F`, the acceptance criterion.
    pub relative_residual: f64,
    pub cluster: usize,
    pub suspect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    /// Mean of the real parts.
    pub mean: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub panels: usize,
    pub vertices: usize,
    pub dofs: usize,
    pub h: f64,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub detected_rank: usize,
    /// `s_k / s_{k+1}` at the rank cut; null when nothing was cut.
    pub singular_value_gap: Option<f64>,
    pub leading_singular_values: Vec<f64>,
    /// Candidates dropped by the containment or residual filter, as `[re, im]`.
    pub rejected: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mesh: u128,
    pub solve: u128,
    pub total: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub version: String,
    pub config: SolveConfig,
    pub eigenvalues: Vec<EigenvalueRecord>,
    pub clusters: Vec<ClusterRecord>,
    pub mesh: MeshRecord,
    pub solver: SolverRecord,
    pub timing_ms: Timing,
}

/// A finished solve with the data needed for eigenfunction export.
pub struct Solution {
    pub record: ResultRecord,
    pub function: NonlinearMatrixFunction,
    pub result: EigenResult,
}

impl Solution {
    pub fn mesh(&self) -> &SurfaceMesh {
        self.function.mesh()
    }
}

pub fn build_function(config: &SolveConfig, mesh: &SurfaceMesh) -> Result<NonlinearMatrixFunction> {
    let coefficients = config.coefficient.per_panel(mesh.panel_count())?;
    let assembler = Assembler::new(mesh, config.quadrature)?;
    Ok(match config.problem {
        Problem::Delta => NonlinearMatrixFunction::delta(assembler, coefficients)?,
        Problem::DeltaPrime => NonlinearMatrixFunction::delta_prime(assembler, coefficients)?,
    })
}

pub fn solve(config: &SolveConfig, dump_matrix: Option<&Path>) -> Result<Solution> {
    config.validate()?;
    let start = Instant::now();
    let mesh = config.mesh.build()?;
    let mesh_ms = start.elapsed().as_millis();
    log::info!("mesh: {} panels, h = {:.4}", mesh.panel_count(), mesh.mesh_size());

    let function = build_function(config, &mesh)?;
    let contour = config.contour.contour()?;
    if let Some(path) = dump_matrix {
        let f = function.eval(contour.center)?;
        dump_matrix_csv(&f, path).with_context(|| format!("writing {}", path.display()))?;
    }
    let solve_start = Instant::now();
    let result = beyn_solve(&function, &contour, &config.solver)?;
    let solve_ms = solve_start.elapsed().as_millis();

    let clusters = result.clusters();
    let eigenvalues = (0..result.len())
        .map(|k| EigenvalueRecord {
            re: result.eigenvalues[k].re,
            im: result.eigenvalues[k].im,
            residual: result.residuals[k],
            relative_residual: result.relative_residuals[k],
            cluster: clusters[k],
            suspect: result.suspect[k],
        })
        .collect();
    let summaries = cluster_summaries(&result.eigenvalues, CLUSTER_GAP)
        .into_iter()
        .map(|s| ClusterRecord {
            mean: s.mean,
            size: s.size,
        })
        .collect();
    let shown = (result.detected_rank + 2).min(result.singular_values.len());
    let record = ResultRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        eigenvalues,
        clusters: summaries,
        mesh: MeshRecord {
            panels: mesh.panel_count(),
            vertices: mesh.vertex_count(),
            dofs: function.dim(),
            h: mesh.mesh_size(),
            closed: mesh.is_closed(),
        },
        solver: SolverRecord {
            detected_rank: result.detected_rank,
            singular_value_gap: result.singular_value_gap.is_finite().then_some(result.singular_value_gap),
            leading_singular_values: result.singular_values[..shown].to_vec(),
            rejected: result.rejected.iter().map(|z| [z.re, z.im]).collect(),
        },
        timing_ms: Timing {
            mesh: mesh_ms,
            solve: solve_ms,
            total: start.elapsed().as_millis(),
        },
    };
    Ok(Solution {
        record,
        function,
        result,
    })
}

/// Eigenvector `index` as a density on the mesh: panel values for δ,
/// vertex values for δ'.
pub fn density(solution: &Solution, index: usize) -> Vec<Complex64> {
    let mesh = solution.mesh();
    let x: &Mat<Complex64> = &solution.result.eigenvectors;
    match solution.record.config.problem {
        Problem::Delta => (0..mesh.panel_count()).map(|i| x[(i, index)]).collect(),
        Problem::DeltaPrime => {
            let space = solution.function.space();
            (0..mesh.vertex_count())
                .map(|v| space.vertex_dof(v).map_or(Complex64::new(0.0, 0.0), |d| x[(d, index)]))
                .collect()
        }
    }
}

pub fn print_summary(record: &ResultRecord) {
    println!(
        "{} panels, h = {:.4}, {} dofs; {} eigenvalue(s) in {} cluster(s), {} ms",
        record.mesh.panels,
        record.mesh.h,
        record.mesh.dofs,
        record.eigenvalues.len(),
        record.clusters.len(),
        record.timing_ms.total
    );
    for c in &record.clusters {
        println!("  {:>+.8e}  x{}", c.mean, c.size);
    }
    for e in record.eigenvalues.iter().filter(|e| e.suspect) {
        println!("  suspect: {:+.6e} {:+.3e}i", e.re, e.im);
    }
}
