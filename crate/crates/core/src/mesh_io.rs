//! JSON mesh files: `{"vertices": [[x,y,z],...], "panels": [[i,j,k],...], "closed": bool}`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceMesh};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<[f64; 3]>,
    panels: Vec<[usize; 3]>,
    closed: bool,
}

/// Parses and validates a mesh from JSON text.
pub fn mesh_from_json(text: &str) -> Result<SurfaceMesh> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let vertices = file
        .vertices
        .iter()
        .map(|v| Point3::new(v[0], v[1], v[2]))
        .collect();
    SurfaceMesh::new(vertices, file.panels, file.closed)
}

/// Serializes a mesh; coordinates carry 17 significant digits so that a
/// read-back reproduces them bitwise.
pub fn mesh_to_json(mesh: &SurfaceMesh) -> String {
    let mut out = String::with_capacity(64 * mesh.vertex_count() + 32 * mesh.panel_count());
    out.push_str("{\n  \"closed\": ");
    out.push_str(if mesh.is_closed() { "true" } else { "false" });
    out.push_str(",\n  \"vertices\": [");
    for (i, v) in mesh.vertices().iter().enumerate() {
        let sep = if i == 0 { "\n    " } else { ",\n    " };
        let _ = write!(out, "{sep}[{:.16e}, {:.16e}, {:.16e}]", v.x, v.y, v.z);
    }
    out.push_str("\n  ],\n  \"panels\": [");
    for (i, p) in mesh.panels().iter().enumerate() {
        let sep = if i == 0 { "\n    " } else { ",\n    " };
        let _ = write!(out, "{sep}[{}, {}, {}]", p[0], p[1], p[2]);
    }
    out.push_str("\n  ]\n}\n");
    out
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let text = fs::read_to_string(path)?;
    mesh_from_json(&text)
}

pub fn write_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mesh_to_json(mesh))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_screen, make_sphere};

    #[test]
    fn round_trip_is_bitwise() {
        let mesh = make_sphere(2).unwrap();
        let back = mesh_from_json(&mesh_to_json(&mesh)).unwrap();
        assert_eq!(back.panels(), mesh.panels());
        assert_eq!(back.is_closed(), mesh.is_closed());
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
        let screen = make_screen(3).unwrap();
        assert!(!mesh_from_json(&mesh_to_json(&screen)).unwrap().is_closed());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mesh = make_sphere(1).unwrap();
        write_mesh(&mesh, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.panels(), mesh.panels());
    }

    #[test]
    fn out_of_range_index_named() {
        let mesh = make_sphere(0).unwrap();
        let mut text = String::from("{\"closed\": false, \"vertices\": [");
        for (i, v) in mesh.vertices().iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            text.push_str(&format!("[{},{},{}]", v.x, v.y, v.z));
        }
        text.push_str("], \"panels\": [[0, 1, 999]]}");
        let err = mesh_from_json(&text).unwrap_err();
        assert!(err.to_string().contains("panel 0: vertex index out of range"), "{err}");
    }

    #[test]
    fn duplicated_index_rejected() {
        let text = r#"{"closed": false, "vertices": [[0,0,0],[1,0,0],[0,1,0]], "panels": [[0, 0, 2]]}"#;
        let err = mesh_from_json(text).unwrap_err();
        assert!(err.to_string().contains("panel 0"), "{err}");
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(mesh_from_json("{\"vertices\": ["), Err(Error::Parse(_))));
        assert!(matches!(
            mesh_from_json(r#"{"vertices": [], "panels": []}"#),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_mesh("/nonexistent/mesh.json"), Err(Error::Io(_))));
    }
}
