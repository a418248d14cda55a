//! Triangle mesh data model, OBJ I/O, topology checks and fixture generators.

mod fixtures;
mod graph;
mod obj;
mod validate;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use fixtures::{make_disc_fixture, make_icosphere, MAX_ICOSPHERE_LEVEL};
pub use graph::{build_graph, EdgeKey, MeshGraph};
pub use obj::{parse_obj, read_obj, write_obj, write_obj_file};
pub use validate::{validate, ValidationReport};

/// A point in 3D, millimetres.
pub type Point3 = [f64; 3];

/// Indexed triangle mesh. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, checking index ranges and rejecting degenerate index triples.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if !faces.is_empty() && n < 3 {
            return Err(Error::structural(format!(
                "mesh with faces needs at least 3 vertices, got {n}"
            )));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(Error::structural(format!(
                    "face {fi} references vertex {bad} but mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::structural(format!(
                    "face {fi} is degenerate: {:?}",
                    f
                )));
            }
        }
        Ok(Self { vertices, faces })
    }

    /// Vertex-only point set (no faces). Used for point-cloud style metrics.
    pub fn from_points(vertices: Vec<Point3>) -> Self {
        Self {
            vertices,
            faces: Vec::new(),
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Vertex positions as an `N×3` matrix.
    pub fn vertex_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.vertices.len(), 3, |r, c| self.vertices[r][c])
    }

    /// Same connectivity, new positions taken from an `N×3` matrix.
    pub fn with_vertex_matrix(&self, positions: &DMatrix<f64>) -> Result<Self> {
        if positions.nrows() != self.vertices.len() || positions.ncols() != 3 {
            return Err(Error::argument(format!(
                "position matrix is {}x{}, mesh needs {}x3",
                positions.nrows(),
                positions.ncols(),
                self.vertices.len()
            )));
        }
        let vertices = (0..positions.nrows())
            .map(|r| [positions[(r, 0)], positions[(r, 1)], positions[(r, 2)]])
            .collect();
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::argument(format!(
                "got {} positions for a mesh with {} vertices",
                vertices.len(),
                self.vertices.len()
            )));
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    /// Applies `p -> rotation * p + translation` to every vertex.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: Point3) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| {
                let mut q = [0.0; 3];
                for (r, q_r) in q.iter_mut().enumerate() {
                    *q_r = rotation[r][0] * p[0]
                        + rotation[r][1] * p[1]
                        + rotation[r][2] * p[2]
                        + translation[r];
                }
                q
            })
            .collect();
        Self {
            vertices,
            faces: self.faces.clone(),
        }
    }

    /// SHA-256 over the canonical OBJ serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        let text = write_obj(self);
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
