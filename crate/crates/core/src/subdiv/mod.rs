//! Loop subdivision as an explicit sparse linear operator.
//!
//! The operator maps the `n` coarse vertices to `n + m` refined vertices,
//! where `m` is the number of coarse edges: rows `0..n` are the repositioned
//! original ("even") vertices, row `n + e` is the vertex inserted on edge `e`
//! (edges in sorted `(min, max)` order). Boundary edges and vertices use the
//! standard crease rules, so disc-topology meshes refine cleanly.

mod model;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{EdgeKey, TriangleMesh};
use crate::sparse::CsrMatrix;

pub use model::{
    load_model_json, model_to_json, pose_model, subdivide_model, HandModel, Joint, Pose,
};

#[derive(Debug, Clone)]
pub struct SubdivisionOperator {
    matrix: CsrMatrix,
    coarse_vertex_count: usize,
    coarse_face_count: usize,
    refined_faces: Vec<[usize; 3]>,
}

impl SubdivisionOperator {
    /// `(n + m) × n` weight matrix.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn input_size(&self) -> usize {
        self.coarse_vertex_count
    }

    pub fn output_size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn coarse_face_count(&self) -> usize {
        self.coarse_face_count
    }

    pub fn refined_faces(&self) -> &[[usize; 3]] {
        &self.refined_faces
    }
}

/// Weight on each neighbour of an interior even vertex of valence `k`.
pub fn loop_beta(k: usize) -> f64 {
    let k = k as f64;
    let c = 3.0 / 8.0 + 0.25 * (2.0 * PI / k).cos();
    (5.0 / 8.0 - c * c) / k
}

pub fn build_subdivision_operator(mesh: &TriangleMesh) -> Result<SubdivisionOperator> {
    let n = mesh.vertex_count();
    let mut edge_faces: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
    }
    if let Some((e, faces)) = edge_faces.iter().find(|(_, fs)| fs.len() > 2) {
        return Err(Error::structural(format!(
            "edge {e:?} is shared by {} faces; Loop subdivision needs a manifold mesh",
            faces.len()
        )));
    }

    let edge_index: BTreeMap<EdgeKey, usize> = edge_faces
        .keys()
        .enumerate()
        .map(|(i, &e)| (e, n + i))
        .collect();

    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut boundary_neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (&(a, b), faces) in &edge_faces {
        neighbours[a].push(b);
        neighbours[b].push(a);
        if faces.len() == 1 {
            boundary_neighbours[a].push(b);
            boundary_neighbours[b].push(a);
        }
    }

    let mut triplets = Vec::new();
    for v in 0..n {
        let ring = &neighbours[v];
        let crease = &boundary_neighbours[v];
        if ring.is_empty() {
            triplets.push((v, v, 1.0));
        } else if crease.is_empty() {
            let k = ring.len();
            let beta = loop_beta(k);
            triplets.push((v, v, 1.0 - k as f64 * beta));
            triplets.extend(ring.iter().map(|&u| (v, u, beta)));
        } else if crease.len() == 2 {
            triplets.push((v, v, 0.75));
            triplets.push((v, crease[0], 0.125));
            triplets.push((v, crease[1], 0.125));
        } else {
            // Boundary vertex touching more than two boundary edges: keep it fixed.
            triplets.push((v, v, 1.0));
        }
    }

    let faces = mesh.faces();
    for (&(a, b), incident) in &edge_faces {
        let row = edge_index[&(a, b)];
        if incident.len() == 2 {
            let opposite = |fi: usize| {
                let f = faces[fi];
                *f.iter().find(|&&x| x != a && x != b).expect("triangle has a third vertex")
            };
            triplets.push((row, a, 0.375));
            triplets.push((row, b, 0.375));
            triplets.push((row, opposite(incident[0]), 0.125));
            triplets.push((row, opposite(incident[1]), 0.125));
        } else {
            triplets.push((row, a, 0.5));
            triplets.push((row, b, 0.5));
        }
    }

    let mut refined_faces = Vec::with_capacity(4 * faces.len());
    let mid = |x: usize, y: usize| edge_index[&(x.min(y), x.max(y))];
    for f in faces {
        let (a, b, c) = (f[0], f[1], f[2]);
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        refined_faces.push([a, ab, ca]);
        refined_faces.push([b, bc, ab]);
        refined_faces.push([c, ca, bc]);
        refined_faces.push([ab, bc, ca]);
    }

    let matrix = CsrMatrix::from_triplets(n + edge_index.len(), n, triplets)?;
    Ok(SubdivisionOperator {
        matrix,
        coarse_vertex_count: n,
        coarse_face_count: faces.len(),
        refined_faces,
    })
}

pub fn apply_subdivision(op: &SubdivisionOperator, mesh: &TriangleMesh) -> Result<TriangleMesh> {
    if mesh.vertex_count() != op.input_size() {
        return Err(Error::argument(format!(
            "operator expects {} vertices, mesh has {}",
            op.input_size(),
            mesh.vertex_count()
        )));
    }
    let refined = op.matrix.mul_dense(&mesh.vertex_matrix())?;
    let vertices = (0..refined.nrows())
        .map(|r| [refined[(r, 0)], refined[(r, 1)], refined[(r, 2)]])
        .collect();
    TriangleMesh::new(vertices, op.refined_faces.clone())
}

/// `(L_s · paramsᵀ)ᵀ` for an `x × n` parameter matrix.
pub fn transfer_parameters(op: &SubdivisionOperator, params: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if params.ncols() != op.input_size() {
        return Err(Error::argument(format!(
            "parameter matrix has {} columns, operator expects {}",
            params.ncols(),
            op.input_size()
        )));
    }
    let out_n = op.output_size();
    let mut out = DMatrix::zeros(params.nrows(), out_n);
    for i in 0..out_n {
        for (j, w) in op.matrix.row(i) {
            for r in 0..params.nrows() {
                out[(r, i)] += w * params[(r, j)];
            }
        }
    }
    Ok(out)
}

/// Subdivides a mesh `levels` times.
pub fn subdivide_mesh(mesh: &TriangleMesh, levels: usize) -> Result<TriangleMesh> {
    let mut current = mesh.clone();
    for _ in 0..levels {
        let op = build_subdivision_operator(&current)?;
        current = apply_subdivision(&op, &current)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_graph, make_disc_fixture, make_icosphere, validate};

    fn triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_operator() {
        let op = build_subdivision_operator(&triangle()).unwrap();
        assert_eq!((op.output_size(), op.input_size()), (6, 3));
        for r in 3..6 {
            let row: Vec<_> = op.matrix().row(r).collect();
            assert_eq!(row.len(), 2);
            assert!(row.iter().all(|&(_, w)| w == 0.5));
        }
        let refined = apply_subdivision(&op, &triangle()).unwrap();
        assert_eq!(refined.vertices()[0], [0.125, 0.125, 0.0]);
        assert_eq!(refined.face_count(), 4);
    }

    #[test]
    fn interior_weights_follow_loop_rules() {
        let m = make_icosphere(0, 1.0).unwrap();
        let op = build_subdivision_operator(&m).unwrap();
        let beta = loop_beta(5);
        assert!((op.matrix().get(0, 0) - (1.0 - 5.0 * beta)).abs() < 1e-15);
        let row_edge: Vec<f64> = op.matrix().row(12).map(|(_, w)| w).collect();
        let mut sorted = row_edge.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![0.125, 0.125, 0.375, 0.375]);
        // Valence 6 gives the regular weight 1/16.
        assert!((loop_beta(6) - 1.0 / 16.0).abs() < 1e-15);
        assert!((loop_beta(3) - 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one_and_touch_one_ring() {
        let m = make_disc_fixture(120, 220, 18).unwrap();
        let op = build_subdivision_operator(&m).unwrap();
        let adj = build_graph(&m).adjacency();
        for r in 0..op.output_size() {
            assert!((op.matrix().row_sum(r) - 1.0).abs() < 1e-12);
            assert!(op.matrix().row(r).all(|(_, w)| w >= 0.0));
            if r < m.vertex_count() {
                assert!(op.matrix().row(r).all(|(c, _)| c == r || adj[r].contains(&c)));
            } else {
                assert!(op.matrix().row(r).count() <= 4);
            }
        }
    }

    #[test]
    fn counts_and_boundary_doubling() {
        let m = make_disc_fixture(40, 68, 10).unwrap();
        let e = build_graph(&m).edge_count();
        let s = subdivide_mesh(&m, 1).unwrap();
        assert_eq!(s.vertex_count(), m.vertex_count() + e);
        assert_eq!(s.face_count(), 4 * m.face_count());
        let rep = validate(&s);
        assert_eq!(rep.boundary_edge_count, 20);
        assert_eq!(rep.euler_characteristic, 1);
    }

    #[test]
    fn boundary_vertices_stay_on_boundary() {
        let m = make_disc_fixture(40, 68, 10).unwrap();
        let op = build_subdivision_operator(&m).unwrap();
        let s = apply_subdivision(&op, &m).unwrap();
        let boundary = |mesh: &TriangleMesh| {
            let mut count = std::collections::BTreeMap::new();
            for f in mesh.faces() {
                for k in 0..3 {
                    let (a, b) = (f[k], f[(k + 1) % 3]);
                    *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                }
            }
            let mut verts = std::collections::BTreeSet::new();
            for ((a, b), c) in count {
                if c == 1 {
                    verts.insert(a);
                    verts.insert(b);
                }
            }
            verts
        };
        let coarse = boundary(&m);
        let fine = boundary(&s);
        assert!(coarse.iter().all(|v| fine.contains(v)));
    }

    #[test]
    fn planar_and_affine_invariance() {
        let m = make_disc_fixture(6, 4, 6).unwrap();
        let op = build_subdivision_operator(&m).unwrap();
        let s = apply_subdivision(&op, &m).unwrap();
        assert!(s.vertices().iter().all(|p| p[2] == 0.0));

        let bag = make_disc_fixture(50, 86, 12).unwrap();
        let op = build_subdivision_operator(&bag).unwrap();
        let t = [3.0, -7.5, 0.25];
        let ident = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let a = apply_subdivision(&op, &bag.transformed(&ident, t)).unwrap();
        let b = apply_subdivision(&op, &bag).unwrap().transformed(&ident, t);
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transfer_keeps_column_sums_and_constants() {
        let m = make_disc_fixture(30, 50, 8).unwrap();
        let op = build_subdivision_operator(&m).unwrap();
        let n = m.vertex_count();
        let mut w = DMatrix::zeros(3, n);
        for v in 0..n {
            let j = v % 3;
            w[(j, v)] = 0.7;
            w[((j + 1) % 3, v)] = 0.3;
        }
        let t = transfer_parameters(&op, &w).unwrap();
        assert_eq!(t.ncols(), op.output_size());
        for c in 0..t.ncols() {
            assert!((t.column(c).sum() - 1.0).abs() < 1e-9);
        }
        let constant = DMatrix::from_element(1, n, 2.5);
        let tc = transfer_parameters(&op, &constant).unwrap();
        assert!(tc.iter().all(|&x| (x - 2.5).abs() < 1e-12));

        let mut one_hot = DMatrix::zeros(1, n);
        one_hot[(0, 4)] = 1.0;
        let th = transfer_parameters(&op, &one_hot).unwrap();
        assert!(th.iter().all(|&x| (0.0..=1.0).contains(&x)));

        assert!(transfer_parameters(&op, &DMatrix::zeros(1, n + 1)).is_err());
    }

    #[test]
    fn non_manifold_rejected() {
        let m = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap();
        assert!(matches!(build_subdivision_operator(&m), Err(Error::Structural(_))));
    }

    #[test]
    fn size_mismatch() {
        let op = build_subdivision_operator(&triangle()).unwrap();
        let other = make_disc_fixture(6, 4, 6).unwrap();
        assert!(apply_subdivision(&op, &other).is_err());
    }
}
