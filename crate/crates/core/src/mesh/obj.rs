//! ASCII Wavefront OBJ reading and writing (triangles only, positions only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};

/// Parses OBJ text. Polygons are fan-triangulated from their first vertex;
/// texture and normal references are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices: Vec<Point3> = Vec::new();
    // (line number, 0-based indices) so range errors can point at the source line.
    let mut faces: Vec<(usize, [usize; 3])> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(Error::parse(
                        lineno,
                        format!("vertex needs 3 coordinates, found {}", coords.len()),
                    ));
                }
                let mut p = [0.0; 3];
                for (slot, tok) in p.iter_mut().zip(&coords) {
                    *slot = tok.parse::<f64>().map_err(|_| {
                        Error::parse(lineno, format!("invalid coordinate `{tok}`"))
                    })?;
                    if !slot.is_finite() {
                        return Err(Error::parse(lineno, format!("non-finite coordinate `{tok}`")));
                    }
                }
                vertices.push(p);
            }
            "f" => {
                let mut poly = Vec::new();
                for tok in tokens {
                    poly.push(resolve_index(tok, vertices.len(), lineno)?);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(
                        lineno,
                        format!("face needs at least 3 vertices, found {}", poly.len()),
                    ));
                }
                for k in 1..poly.len() - 1 {
                    let tri = [poly[0], poly[k], poly[k + 1]];
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        return Err(Error::parse(
                            lineno,
                            format!("degenerate face with repeated vertex index {:?}", tri.map(|i| i + 1)),
                        ));
                    }
                    faces.push((lineno, tri));
                }
            }
            // vt, vn, o, g, s, usemtl, mtllib, l, ... carry nothing we keep.
            _ => {}
        }
    }

    let n = vertices.len();
    for (lineno, tri) in &faces {
        if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
            return Err(Error::structural(format!(
                "line {lineno}: vertex index {} out of range (file has {n} vertices)",
                bad + 1
            )));
        }
    }
    TriangleMesh::new(vertices, faces.into_iter().map(|(_, t)| t).collect())
}

fn resolve_index(token: &str, current: usize, lineno: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let idx: i64 = head
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid face index `{token}`")))?;
    if idx > 0 {
        Ok((idx - 1) as usize)
    } else if idx < 0 {
        let resolved = current as i64 + idx;
        if resolved < 0 {
            return Err(Error::structural(format!(
                "line {lineno}: relative index {idx} reaches before the first vertex"
            )));
        }
        Ok(resolved as usize)
    } else {
        Err(Error::parse(lineno, "face index 0 is not valid in OBJ"))
    }
}

/// Serializes to OBJ with 1-based indices. Coordinates use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(32 * (mesh.vertex_count() + mesh.face_count()) + 64);
    let _ = writeln!(
        out,
        "# meshspectra OBJ: {} vertices, {} faces",
        mesh.vertex_count(),
        mesh.face_count()
    );
    for p in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| with_path(path, e))?;
    parse_obj(&text)
}

pub fn write_obj_file(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_obj(mesh)).map_err(|e| with_path(path, e))
}
