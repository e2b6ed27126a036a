//! `sbem`: boundary element eigenvalue solver for δ and δ' surface
//! interactions.

mod config;
mod selftest;
mod solve;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use singular_bem::analytic::{delta_sphere_eigs, deltaprime_sphere_eigs, SphereCondition, SphereEigenvalue};
use singular_bem::fields::{eval_double_layer, eval_single_layer, export_grid, Axis, NearFieldPolicy, PlanarGrid};
use singular_bem::kernel::SpectralPoint;
use singular_bem::mesh_io::write_mesh;
use singular_bem::nlevp::eoc;

use config::{parse_contour, preset, preset_levels, Coefficient, ContourSpec, MeshSpec, Problem, Shape, SolveConfig};

/// Invalid arguments or configuration; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "sbem", version, about = "BEM eigensolver for δ and δ' interactions on surfaces")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh and write it as JSON.
    Mesh {
        #[arg(long)]
        shape: Shape,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve for the eigenvalues inside a contour.
    Solve {
        #[command(flatten)]
        setup: SetupArgs,
        /// Results JSON (printed to stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write F(c) at the contour centre as CSV.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Errors and convergence orders against the analytic sphere eigenvalues.
    Convergence {
        #[command(flatten)]
        setup: SetupArgs,
        /// Mesh levels, comma separated (sphere level or geodesic frequency).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// CSV table (printed to stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic eigenvalues on the unit sphere.
    Analytic {
        #[arg(long)]
        problem: Problem,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta_inv: Option<f64>,
        #[arg(long, default_value_t = 10)]
        l_max: usize,
    },
    /// Solve, then evaluate one eigenfunction on a planar grid.
    Eigenfunction {
        #[command(flatten)]
        setup: SetupArgs,
        /// Eigenvalue index in ascending order of real part.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Grid plane, e.g. `z=0`.
        #[arg(long, default_value = "z=0")]
        plane: String,
        /// In-plane square `lo,hi`.
        #[arg(long, default_value = "-2,2", allow_hyphen_values = true)]
        range: String,
        /// Points per side.
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        /// Treat points near the surface by subdivision instead of excluding them.
        #[arg(long)]
        adaptive: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the fast invariant checks.
    Selftest {
        /// Test hook: perturb the triangle-rule weights.
        #[arg(long, hide = true)]
        corrupt_quadrature: bool,
    },
}

#[derive(Args, Clone, Default)]
struct SetupArgs {
    /// One of sphere-delta, screen-delta, sphere-deltaprime, lshape-deltaprime.
    #[arg(long)]
    preset: Option<String>,
    /// Config JSON, or a results JSON whose config is reused.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<Problem>,
    #[arg(long)]
    shape: Option<Shape>,
    #[arg(long)]
    level: Option<usize>,
    /// Mesh JSON file instead of a generated shape.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta_inv: Option<f64>,
    /// Per-panel coefficient values (α or β⁻¹), whitespace or comma separated.
    #[arg(long)]
    coefficient_file: Option<PathBuf>,
    /// Ellipse `c,a,b`.
    #[arg(long, allow_hyphen_values = true)]
    contour: Option<String>,
    /// Quadrature nodes on the contour.
    #[arg(long)]
    nq: Option<usize>,
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl SetupArgs {
    /// Preset or file first, then flags on top.
    fn resolve(&self) -> Result<SolveConfig> {
        let base = match (&self.preset, &self.config) {
            (Some(_), Some(_)) => bail!(usage("--preset and --config are mutually exclusive")),
            (Some(name), None) => Some(preset(name)?),
            (None, Some(path)) => Some(SolveConfig::load(path)?),
            (None, None) => None,
        };

        let problem = match (self.problem, &base) {
            (Some(p), _) => p,
            (None, Some(b)) => b.problem,
            (None, None) => match (self.alpha, self.beta_inv) {
                (Some(_), None) => Problem::Delta,
                (None, Some(_)) => Problem::DeltaPrime,
                _ => bail!(usage("--problem is required without --preset or --config")),
            },
        };

        let mesh = if let Some(path) = &self.mesh {
            if self.shape.is_some() {
                bail!(usage("--mesh and --shape are mutually exclusive"));
            }
            MeshSpec::File { path: path.clone() }
        } else {
            match (&base, self.shape, self.level) {
                (_, Some(shape), Some(level)) => MeshSpec::Generated { shape, level },
                (Some(b), shape, level) => match (&b.mesh, shape, level) {
                    (MeshSpec::Generated { shape, level }, s, l) => MeshSpec::Generated {
                        shape: s.unwrap_or(*shape),
                        level: l.unwrap_or(*level),
                    },
                    (file, None, None) => file.clone(),
                    _ => bail!(usage("--shape and --level must both be given to replace a mesh file")),
                },
                (None, _, _) => bail!(usage("a mesh needs --shape and --level, or --mesh")),
            }
        };

        let (flag, name, other) = match problem {
            Problem::Delta => (self.alpha, "--alpha", self.beta_inv.map(|_| "--beta-inv")),
            Problem::DeltaPrime => (self.beta_inv, "--beta-inv", self.alpha.map(|_| "--alpha")),
        };
        if let Some(other) = other {
            bail!(usage(format!("{other} does not apply to this problem; use {name}")));
        }
        let coefficient = match (flag, &self.coefficient_file, &base) {
            (Some(_), Some(_), _) => bail!(usage(format!("{name} and --coefficient-file are mutually exclusive"))),
            (Some(v), None, _) => Coefficient::Uniform(v),
            (None, Some(path), _) => Coefficient::File(path.clone()),
            (None, None, Some(b)) if b.problem == problem => b.coefficient.clone(),
            _ => bail!(usage(format!("{name} is required"))),
        };

        let mut contour = match (&self.contour, &base) {
            (Some(s), _) => {
                let (c, a, b) = parse_contour(s)?;
                let nodes = base.as_ref().map_or(singular_bem::nlevp::DEFAULT_NODES, |b| b.contour.nodes);
                ContourSpec { c, a, b, nodes }
            }
            (None, Some(b)) => b.contour,
            (None, None) => bail!(usage("--contour c,a,b is required")),
        };
        if let Some(nq) = self.nq {
            contour.nodes = nq;
        }

        let mut solver = base.as_ref().map(|b| b.solver).unwrap_or_default();
        if let Some(v) = self.probes {
            solver.probes = v;
        }
        if let Some(v) = self.rank_tol {
            solver.rank_tol = v;
        }
        if let Some(v) = self.residual_tol {
            solver.residual_tol = v;
        }
        if let Some(v) = self.seed {
            solver.seed = v;
        }
        let quadrature = base.as_ref().map(|b| b.quadrature).unwrap_or_default();
        let config = SolveConfig {
            problem,
            mesh,
            coefficient,
            contour,
            solver,
            quadrature,
        };
        config.validate()?;
        Ok(config)
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_mesh(shape: Shape, level: usize, out: &Path) -> Result<()> {
    let mesh = config::generate(shape, level)?;
    write_mesh(&mesh, out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{shape} level {level}: {} panels, {} vertices, h = {:.6}",
        mesh.panel_count(),
        mesh.vertex_count(),
        mesh.mesh_size()
    );
    Ok(())
}

fn cmd_solve(setup: &SetupArgs, out: Option<&Path>, dump: Option<&Path>) -> Result<()> {
    let config = setup.resolve()?;
    let solution = solve::solve(&config, dump)?;
    let json = serde_json::to_string_pretty(&solution.record)? + "\n";
    match out {
        Some(path) => {
            fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
            solve::print_summary(&solution.record);
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn analytic_eigenvalues(
    problem: Problem,
    coefficient: f64,
    l_max: usize,
) -> singular_bem::Result<Vec<SphereEigenvalue>> {
    match problem {
        Problem::Delta => delta_sphere_eigs(coefficient, l_max),
        Problem::DeltaPrime => deltaprime_sphere_eigs(coefficient, l_max),
    }
}

fn cmd_convergence(setup: &SetupArgs, levels: Option<&[usize]>, out: Option<&Path>) -> Result<()> {
    let base = setup.resolve()?;
    let levels: Vec<usize> = match (levels, &setup.preset) {
        (Some(l), _) => l.to_vec(),
        (None, Some(name)) => preset_levels(name).ok_or_else(|| usage(format!("preset {name} has no levels")))?,
        (None, None) => bail!(usage("--levels is required")),
    };
    if levels.len() < 2 {
        bail!(usage("need ≥ 2 levels for a convergence study"));
    }
    let shape = match base.mesh.shape() {
        Some(s) if s.is_sphere() => s,
        _ => bail!(usage("analytic references exist only for sphere and geodesic meshes")),
    };
    let Coefficient::Uniform(coefficient) = base.coefficient else {
        bail!(usage("analytic references need a uniform coefficient"));
    };
    let contour = base.contour.contour()?;
    let references: Vec<SphereEigenvalue> = analytic_eigenvalues(base.problem, coefficient, 10)?
        .into_iter()
        .filter(|r| contour.contains(Complex64::new(r.lambda, 0.0)))
        .collect();
    if references.is_empty() {
        bail!(usage("no analytic eigenvalue lies inside the contour"));
    }

    let mut hs = Vec::new();
    let mut rows = Vec::new();
    for &level in &levels {
        let config = SolveConfig {
            mesh: MeshSpec::Generated { shape, level },
            ..base.clone()
        };
        let solution = solve::solve(&config, None)?;
        let record = &solution.record;
        log::info!("level {level}: {} eigenvalues", record.eigenvalues.len());
        let mut row = Vec::new();
        for r in &references {
            let nearest = record
                .clusters
                .iter()
                .min_by(|a, b| (a.mean - r.lambda).abs().total_cmp(&(b.mean - r.lambda).abs()));
            let Some(c) = nearest else {
                bail!(singular_bem::Error::Numeric(format!("no eigenvalues found at level {level}")));
            };
            row.push((c.mean, c.size, (c.mean - r.lambda).abs() / r.lambda.abs()));
        }
        hs.push(record.mesh.h);
        rows.push((level, record.mesh.panels, record.mesh.h, row));
    }

    let mut orders = Vec::new();
    for k in 0..references.len() {
        let errors: Vec<f64> = rows.iter().map(|r| r.3[k].2).collect();
        orders.push(eoc(&errors, &hs)?);
    }
    let mut csv = String::from("level,panels,h");
    for r in &references {
        let _ = write!(csv, ",lambda{l},size{l},rel_err{l},eoc{l}", l = r.l);
    }
    csv.push('\n');
    for (i, (level, panels, h, row)) in rows.iter().enumerate() {
        let _ = write!(csv, "{level},{panels},{h:.6}");
        for (k, (mean, size, err)) in row.iter().enumerate() {
            let order = if i == 0 { String::new() } else { format!("{:.4}", orders[k][i - 1]) };
            let _ = write!(csv, ",{mean:.10e},{size},{err:.6e},{order}");
        }
        csv.push('\n');
    }
    write_or_print(out, &csv)
}

fn cmd_analytic(problem: Problem, alpha: Option<f64>, beta_inv: Option<f64>, l_max: usize) -> Result<()> {
    let coefficient = match (problem, alpha, beta_inv) {
        (Problem::Delta, Some(a), None) => a,
        (Problem::DeltaPrime, None, Some(b)) => b,
        (Problem::Delta, _, _) => bail!(usage("delta needs --alpha only")),
        (Problem::DeltaPrime, _, _) => bail!(usage("delta_prime needs --beta-inv only")),
    };
    let rows = match analytic_eigenvalues(problem, coefficient, l_max) {
        Ok(rows) => rows,
        // a non-negative coupling has no bound states
        Err(singular_bem::Error::Domain(_)) if coefficient >= 0.0 => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    println!("l,lambda,kappa,multiplicity,residual,condition");
    for r in rows {
        let condition = match r.condition {
            SphereCondition::Delta => "delta",
            SphereCondition::DeltaPrimeDerived => "derived condition",
        };
        println!(
            "{},{:.15e},{:.15e},{},{:.3e},{condition}",
            r.l, r.lambda, r.kappa, r.multiplicity, r.residual
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eigenfunction(
    setup: &SetupArgs,
    index: usize,
    plane: &str,
    range: &str,
    resolution: usize,
    adaptive: bool,
    out: &Path,
) -> Result<()> {
    let (axis, offset) = plane
        .split_once('=')
        .ok_or_else(|| usage(format!("plane must look like 'z=0', got '{plane}'")))?;
    let axis: Axis = axis.trim().parse().map_err(|e: singular_bem::Error| usage(e.to_string()))?;
    let offset: f64 = offset.trim().parse().map_err(|_| usage(format!("bad plane offset in '{plane}'")))?;
    let (lo, hi) = range
        .split_once(',')
        .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| usage(format!("range must be 'lo,hi', got '{range}'")))?;
    let grid = PlanarGrid {
        axis,
        offset,
        u_range: [lo, hi],
        v_range: [lo, hi],
        nu: resolution,
        nv: resolution,
    };
    grid.validate().map_err(|e| usage(e.to_string()))?;

    let config = setup.resolve()?;
    let solution = solve::solve(&config, None)?;
    let count = solution.record.eigenvalues.len();
    if index >= count {
        bail!(usage(format!("eigenvalue index {index} out of range: {count} eigenvalue(s) found")));
    }
    let lambda = solution.result.eigenvalues[index];
    let density = solve::density(&solution, index);
    let policy = if adaptive {
        NearFieldPolicy::adaptive()
    } else {
        NearFieldPolicy::Exclude
    };
    let sp = SpectralPoint::new(lambda);
    let points = grid.points();
    let field = match config.problem {
        Problem::Delta => eval_single_layer(solution.mesh(), &sp, &density, &points, policy)?,
        Problem::DeltaPrime => eval_double_layer(solution.mesh(), &sp, &density, &points, policy)?,
    };
    export_grid(&field.values, &grid, out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "λ = {:+.8e}: {} points written, {} excluded near the surface",
        lambda.re,
        points.len(),
        field.excluded.len()
    );
    Ok(())
}

fn cmd_selftest(corrupt_quadrature: bool) -> Result<bool> {
    let faults = selftest::Faults { corrupt_quadrature };
    let outcomes = selftest::run(&faults);
    let mut all = true;
    for o in &outcomes {
        all &= o.passed;
        let mark = if o.passed { "PASS" } else { "FAIL" };
        println!("{mark} {:<28} {:>6} ms  {}", o.name, o.millis, o.detail);
    }
    println!("{} of {} checks passed", outcomes.iter().filter(|o| o.passed).count(), outcomes.len());
    Ok(all)
}

/// 2 usage, 3 numeric failure, 4 I/O.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<singular_bem::Error>() {
            use singular_bem::Error as E;
            return match e {
                E::Io(_) | E::Parse(_) => 4,
                E::Capacity(_) | E::InvalidMesh(_) | E::UnsupportedOrder { .. } | E::Unsupported(_) | E::Domain(_) => 2,
                _ => 3,
            };
        }
    }
    3
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Mesh { shape, level, out } => cmd_mesh(shape, level, &out)?,
        Command::Solve { setup, out, dump_matrix } => cmd_solve(&setup, out.as_deref(), dump_matrix.as_deref())?,
        Command::Convergence { setup, levels, out } => cmd_convergence(&setup, levels.as_deref(), out.as_deref())?,
        Command::Analytic {
            problem,
            alpha,
            beta_inv,
            l_max,
        } => cmd_analytic(problem, alpha, beta_inv, l_max)?,
        Command::Eigenfunction {
            setup,
            index,
            plane,
            range,
            resolution,
            adaptive,
            out,
        } => cmd_eigenfunction(&setup, index, &plane, &range, resolution, adaptive, &out)?,
        Command::Selftest { corrupt_quadrature } => return cmd_selftest(corrupt_quadrature),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(singular_bem::Error::ProbeTooSmall { .. }) = err.downcast_ref::<singular_bem::Error>() {
                eprintln!("hint: rerun with a larger --probes value");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
