use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use singular_bem::geometry::{make_cube, make_geodesic_sphere, make_lshape, make_screen, make_sphere, SurfaceMesh};
use singular_bem::mesh_io::read_mesh;
use singular_bem::nlevp::{BeynOptions, Contour, DEFAULT_NODES};
use singular_bem::quadrature::QuadratureSettings;

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Delta,
    DeltaPrime,
}

impl FromStr for Problem {
    type Err = UsageError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "delta" => Ok(Self::Delta),
            "delta_prime" | "delta-prime" | "deltaprime" => Ok(Self::DeltaPrime),
            _ => Err(UsageError(format!("unknown problem '{s}' (expected delta or delta_prime)"))),
        }
    }
}

/// Generated mesh families. `level` is the icosphere level for `sphere`, the
/// edge frequency for `geodesic` and the cells per unit length otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Sphere,
    Geodesic,
    Screen,
    Cube,
    Lshape,
}

impl Shape {
    pub fn is_sphere(self) -> bool {
        matches!(self, Self::Sphere | Self::Geodesic)
    }
}

impl FromStr for Shape {
    type Err = UsageError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "geodesic" => Ok(Self::Geodesic),
            "screen" => Ok(Self::Screen),
            "cube" => Ok(Self::Cube),
            "lshape" | "l-shape" => Ok(Self::Lshape),
            _ => Err(UsageError(format!(
                "unknown shape '{s}' (expected sphere, geodesic, screen, cube or lshape)"
            ))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Sphere => "sphere",
            Self::Geodesic => "geodesic",
            Self::Screen => "screen",
            Self::Cube => "cube",
            Self::Lshape => "lshape",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MeshSpec {
    Generated { shape: Shape, level: usize },
    File { path: PathBuf },
}

impl MeshSpec {
    pub fn build(&self) -> Result<SurfaceMesh> {
        Ok(match self {
            Self::Generated { shape, level } => generate(*shape, *level)?,
            Self::File { path } => read_mesh(path).with_context(|| format!("reading mesh {}", path.display()))?,
        })
    }

    pub fn shape(&self) -> Option<Shape> {
        match self {
            Self::Generated { shape, .. } => Some(*shape),
            Self::File { .. } => None,
        }
    }
}

pub fn generate(shape: Shape, level: usize) -> Result<SurfaceMesh> {
    Ok(match shape {
        Shape::Sphere => make_sphere(level)?,
        Shape::Geodesic => make_geodesic_sphere(level)?,
        Shape::Screen => make_screen(level)?,
        Shape::Cube => make_cube(level)?,
        Shape::Lshape => make_lshape(level)?,
    })
}

/// α (δ) or β⁻¹ (δ'): one value for every panel, an explicit list, or a
/// file with one value per panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Uniform(f64),
    PerPanel(Vec<f64>),
    File(PathBuf),
}

impl Coefficient {
    pub fn per_panel(&self, panels: usize) -> Result<Vec<f64>> {
        let values = match self {
            Self::Uniform(v) => vec![*v; panels],
            Self::PerPanel(v) => v.clone(),
            Self::File(path) => read_values(path)?,
        };
        if values.len() != panels {
            bail!(UsageError(format!(
                "coefficient has {} values but the mesh has {panels} panels",
                values.len()
            )));
        }
        Ok(values)
    }
}

/// Whitespace- or comma-separated numbers.
fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("bad coefficient '{t}' in {}", path.display()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

impl ContourSpec {
    pub fn contour(&self) -> Result<Contour> {
        Contour::new(num_complex::Complex64::new(self.c, 0.0), self.a, self.b, self.nodes)
            .map_err(|e| UsageError(e.to_string()).into())
    }
}

/// Everything a solve needs; echoed verbatim into the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub problem: Problem,
    pub mesh: MeshSpec,
    pub coefficient: Coefficient,
    pub contour: ContourSpec,
    #[serde(default)]
    pub solver: BeynOptions,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.contour.contour()?;
        self.solver.validate().map_err(|e| UsageError(e.to_string()))?;
        self.quadrature.validate().map_err(|e| UsageError(e.to_string()))?;
        if let Coefficient::Uniform(v) = self.coefficient {
            if !v.is_finite() {
                bail!(UsageError(format!("coefficient {v} is not finite")));
            }
            if v > 0.0 {
                let name = match self.problem {
                    Problem::Delta => "alpha",
                    Problem::DeltaPrime => "beta_inv",
                };
                log::warn!("{name} = {v} is positive; attractive interactions need a negative value");
            }
        }
        Ok(())
    }

    /// Reads a config file, or the config echoed inside a results file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let value = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(value).with_context(|| format!("{} is not a solve config", path.display()))
    }
}

pub const PRESETS: [&str; 4] = ["sphere-delta", "screen-delta", "sphere-deltaprime", "lshape-deltaprime"];

/// Reference experiments. Spheres use geodesic frequency 6 (h ≈ 0.22); the
/// convergence presets add frequency 12 (h ≈ 0.11). The screen uses 57 cells
/// per edge (h ≈ 0.025) and the L-shape 15 per unit length (h ≈ 0.094).
pub fn preset(name: &str) -> Result<SolveConfig> {
    let (problem, shape, level, coefficient, (c, a, b)) = match name {
        "sphere-delta" => (Problem::Delta, Shape::Geodesic, 6, -6.0, (-5.0, 4.5, 0.01)),
        "screen-delta" => (Problem::Delta, Shape::Screen, 57, -15.0, (-15.0, 14.99, 0.01)),
        "sphere-deltaprime" => (Problem::DeltaPrime, Shape::Geodesic, 6, -1.5, (-6.0, 5.99, 0.01)),
        "lshape-deltaprime" => (Problem::DeltaPrime, Shape::Lshape, 15, -0.75, (-4.0, 3.99, 0.01)),
        _ => bail!(UsageError(format!("unknown preset '{name}' (expected one of {})", PRESETS.join(", ")))),
    };
    Ok(SolveConfig {
        problem,
        mesh: MeshSpec::Generated { shape, level },
        coefficient: Coefficient::Uniform(coefficient),
        contour: ContourSpec {
            c,
            a,
            b,
            nodes: DEFAULT_NODES,
        },
        solver: BeynOptions::default(),
        quadrature: QuadratureSettings::default(),
    })
}

/// Levels of the convergence study belonging to a preset.
pub fn preset_levels(name: &str) -> Option<Vec<usize>> {
    match name {
        "sphere-delta" | "sphere-deltaprime" => Some(vec![6, 12]),
        _ => None,
    }
}

/// Parses `c,a,b`.
pub fn parse_contour(s: &str) -> std::result::Result<(f64, f64, f64), UsageError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || UsageError(format!("contour must be 'c,a,b', got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    Ok((v[0], v[1], v[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            let back: SolveConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
        assert!(preset("torus").is_err());
    }

    #[test]
    fn contour_parsing() {
        assert_eq!(parse_contour("-15.0, 14.99,0.01").unwrap(), (-15.0, 14.99, 0.01));
        assert!(parse_contour("1,2").is_err());
        assert!(parse_contour("a,b,c").is_err());
    }

    #[test]
    fn coefficient_forms() {
        let parse = |s: &str| serde_json::from_str::<Coefficient>(s).unwrap();
        assert_eq!(parse("-6.0"), Coefficient::Uniform(-6.0));
        assert_eq!(parse("[1.0, 2.0]"), Coefficient::PerPanel(vec![1.0, 2.0]));
        assert_eq!(parse("\"alpha.txt\""), Coefficient::File("alpha.txt".into()));
        assert!(Coefficient::Uniform(1.0).per_panel(3).unwrap().iter().all(|&v| v == 1.0));
        assert!(Coefficient::PerPanel(vec![1.0]).per_panel(3).is_err());
    }

    #[test]
    fn shapes_and_problems_parse() {
        assert_eq!("lshape".parse::<Shape>().unwrap(), Shape::Lshape);
        assert!("torus".parse::<Shape>().is_err());
        assert_eq!("delta-prime".parse::<Problem>().unwrap(), Problem::DeltaPrime);
    }

    #[test]
    fn non_positive_semi_axis_is_usage_error() {
        let mut cfg = preset("sphere-delta").unwrap();
        cfg.contour.a = 0.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
