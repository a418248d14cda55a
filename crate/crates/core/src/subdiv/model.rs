//! Parametric skinned model: template, blend shapes, per-vertex residual and
//! a joint hierarchy posed by linear blend skinning.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{apply_subdivision, build_subdivision_operator, transfer_parameters};
use crate::error::{Error, Result};
use crate::mesh::{parse_obj, write_obj, Point3, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub position: Point3,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    template: TriangleMesh,
    /// `J × N`, column `v` holds the joint weights of vertex `v`.
    skinning_weights: DMatrix<f64>,
    shape_basis: Vec<DMatrix<f64>>,
    pose_basis: Vec<DMatrix<f64>>,
    residual: DMatrix<f64>,
    joints: Vec<Joint>,
}

const WEIGHT_SUM_TOL: f64 = 1e-9;

impl HandModel {
    pub fn new(
        template: TriangleMesh,
        skinning_weights: DMatrix<f64>,
        shape_basis: Vec<DMatrix<f64>>,
        pose_basis: Vec<DMatrix<f64>>,
        residual: DMatrix<f64>,
        joints: Vec<Joint>,
    ) -> Result<Self> {
        let n = template.vertex_count();
        if joints.is_empty() {
            return Err(Error::argument("model needs at least one joint"));
        }
        for (j, joint) in joints.iter().enumerate() {
            match joint.parent {
                None if j != 0 => {
                    return Err(Error::argument(format!("joint {j} has no parent; only joint 0 may be the root")))
                }
                Some(_) if j == 0 => return Err(Error::argument("joint 0 must be the root")),
                Some(p) if p >= j => {
                    return Err(Error::argument(format!(
                        "joint {j} has parent {p}; parents must precede children"
                    )))
                }
                _ => {}
            }
        }
        if skinning_weights.shape() != (joints.len(), n) {
            return Err(Error::argument(format!(
                "skinning weights are {:?}, expected {}x{n}",
                skinning_weights.shape(),
                joints.len()
            )));
        }
        for v in 0..n {
            let col = skinning_weights.column(v);
            if col.iter().any(|&w| w < 0.0 || !w.is_finite()) {
                return Err(Error::argument(format!("vertex {v} has a negative or non-finite weight")));
            }
            let sum = col.sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::argument(format!("weights of vertex {v} sum to {sum}")));
            }
        }
        for (name, fields) in [("shape", &shape_basis), ("pose", &pose_basis)] {
            if let Some(i) = fields.iter().position(|f| f.shape() != (n, 3)) {
                return Err(Error::argument(format!(
                    "{name} basis field {i} is {:?}, expected {n}x3",
                    fields[i].shape()
                )));
            }
        }
        if residual.shape() != (n, 3) {
            return Err(Error::argument(format!(
                "residual is {:?}, expected {n}x3",
                residual.shape()
            )));
        }
        Ok(Self {
            template,
            skinning_weights,
            shape_basis,
            pose_basis,
            residual,
            joints,
        })
    }

    /// Rigid single-joint model with no blend shapes and a zero residual.
    pub fn rigid(template: TriangleMesh) -> Self {
        let n = template.vertex_count();
        Self {
            template,
            skinning_weights: DMatrix::from_element(1, n, 1.0),
            shape_basis: Vec::new(),
            pose_basis: Vec::new(),
            residual: DMatrix::zeros(n, 3),
            joints: vec![Joint {
                position: [0.0; 3],
                parent: None,
            }],
        }
    }

    pub fn template(&self) -> &TriangleMesh {
        &self.template
    }

    pub fn skinning_weights(&self) -> &DMatrix<f64> {
        &self.skinning_weights
    }

    pub fn shape_basis(&self) -> &[DMatrix<f64>] {
        &self.shape_basis
    }

    pub fn pose_basis(&self) -> &[DMatrix<f64>] {
        &self.pose_basis
    }

    pub fn residual(&self) -> &DMatrix<f64> {
        &self.residual
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn with_residual(mut self, residual: DMatrix<f64>) -> Result<Self> {
        if residual.shape() != self.residual.shape() {
            return Err(Error::argument("residual shape does not match the template"));
        }
        self.residual = residual;
        Ok(self)
    }
}

/// Per-joint local rotations (about the joint's rest position), root
/// translation and linear blend-shape coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotations: Vec<Matrix3<f64>>,
    pub translation: Vector3<f64>,
    pub shape_coeffs: Vec<f64>,
    pub pose_coeffs: Vec<f64>,
}

impl Pose {
    pub fn identity(model: &HandModel) -> Self {
        Self {
            rotations: vec![Matrix3::identity(); model.joints.len()],
            translation: Vector3::zeros(),
            shape_coeffs: vec![0.0; model.shape_basis.len()],
            pose_coeffs: vec![0.0; model.pose_basis.len()],
        }
    }

    fn check(&self, model: &HandModel) -> Result<()> {
        if self.rotations.len() != model.joints.len() {
            return Err(Error::argument(format!(
                "{} rotations for {} joints",
                self.rotations.len(),
                model.joints.len()
            )));
        }
        if self.shape_coeffs.len() != model.shape_basis.len()
            || self.pose_coeffs.len() != model.pose_basis.len()
        {
            return Err(Error::argument(format!(
                "coefficient counts ({}, {}) do not match basis sizes ({}, {})",
                self.shape_coeffs.len(),
                self.pose_coeffs.len(),
                model.shape_basis.len(),
                model.pose_basis.len()
            )));
        }
        for (j, r) in self.rotations.iter().enumerate() {
            let ortho = (r.transpose() * r - Matrix3::identity()).amax();
            if ortho > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
                return Err(Error::argument(format!("rotation of joint {j} is not a proper rotation")));
            }
        }
        Ok(())
    }
}

/// Rest shape with blend shapes and residual applied, then skinned.
pub fn pose_model(model: &HandModel, pose: &Pose) -> Result<TriangleMesh> {
    pose.check(model)?;
    let mut rest = model.template.vertex_matrix();
    for (coeff, field) in pose.shape_coeffs.iter().zip(&model.shape_basis) {
        rest += field * *coeff;
    }
    for (coeff, field) in pose.pose_coeffs.iter().zip(&model.pose_basis) {
        rest += field * *coeff;
    }
    rest += &model.residual;

    // World transform of each joint as (R, t): x -> R x + t.
    let mut world: Vec<(Matrix3<f64>, Vector3<f64>)> = Vec::with_capacity(model.joints.len());
    for (j, joint) in model.joints.iter().enumerate() {
        let r = pose.rotations[j];
        let c = Vector3::from(joint.position);
        let local_t = c - r * c;
        let (pr, pt) = match joint.parent {
            Some(p) => world[p],
            None => (Matrix3::identity(), pose.translation),
        };
        world.push((pr * r, pr * local_t + pt));
    }

    let n = rest.nrows();
    let mut posed = DMatrix::zeros(n, 3);
    for v in 0..n {
        let mut m = Matrix3::zeros();
        let mut t = Vector3::zeros();
        for (j, (r, tj)) in world.iter().enumerate() {
            let w = model.skinning_weights[(j, v)];
            if w != 0.0 {
                m += r * w;
                t += tj * w;
            }
        }
        let p = Vector3::new(rest[(v, 0)], rest[(v, 1)], rest[(v, 2)]);
        let q = m * p + t;
        for k in 0..3 {
            posed[(v, k)] = q[k];
        }
    }
    model.template.with_vertex_matrix(&posed)
}

/// Refines the template `levels` times, carrying every per-vertex parameter
/// through the same subdivision operator. The residual restarts at zero.
pub fn subdivide_model(model: &HandModel, levels: usize) -> Result<HandModel> {
    if levels == 0 {
        return Err(Error::argument("subdivision levels must be at least 1"));
    }
    let mut current = model.clone();
    for _ in 0..levels {
        let op = build_subdivision_operator(&current.template)?;
        let template = apply_subdivision(&op, &current.template)?;
        let weights = transfer_parameters(&op, &current.skinning_weights)?;
        let carry = |fields: &[DMatrix<f64>]| -> Result<Vec<DMatrix<f64>>> {
            fields
                .iter()
                .map(|f| Ok(transfer_parameters(&op, &f.transpose())?.transpose()))
                .collect()
        };
        let shape_basis = carry(&current.shape_basis)?;
        let pose_basis = carry(&current.pose_basis)?;
        let n = template.vertex_count();
        current = HandModel {
            template,
            skinning_weights: weights,
            shape_basis,
            pose_basis,
            residual: DMatrix::zeros(n, 3),
            joints: current.joints.clone(),
        };
    }
    Ok(current)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    template_obj: String,
    skinning_weights: Vec<Vec<f64>>,
    #[serde(default)]
    shape_basis: Vec<Vec<[f64; 3]>>,
    #[serde(default)]
    pose_basis: Vec<Vec<[f64; 3]>>,
    #[serde(default)]
    residual: Option<Vec<[f64; 3]>>,
    joints: JointsFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct JointsFile {
    positions: Vec<[f64; 3]>,
    parents: Vec<Option<usize>>,
}

fn field_from_rows(rows: &[[f64; 3]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), 3, |r, c| rows[r][c])
}

fn field_to_rows(m: &DMatrix<f64>) -> Vec<[f64; 3]> {
    (0..m.nrows()).map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]]).collect()
}

/// Loads the JSON container. `template_obj` is either OBJ text (anything
/// containing a newline) or a path relative to `base_dir`.
pub fn load_model_json(text: &str, base_dir: Option<&Path>) -> Result<HandModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("model JSON: {e}")))?;
    let template = if file.template_obj.contains('\n') {
        parse_obj(&file.template_obj)?
    } else {
        let path = match base_dir {
            Some(dir) => dir.join(&file.template_obj),
            None => Path::new(&file.template_obj).to_path_buf(),
        };
        parse_obj(&std::fs::read_to_string(path)?)?
    };
    let n = template.vertex_count();
    let j = file.skinning_weights.len();
    if let Some(bad) = file.skinning_weights.iter().position(|row| row.len() != n) {
        return Err(Error::Format(format!(
            "skinning weight row {bad} has {} entries, template has {n} vertices",
            file.skinning_weights[bad].len()
        )));
    }
    let weights = DMatrix::from_fn(j, n, |r, c| file.skinning_weights[r][c]);
    if file.joints.positions.len() != file.joints.parents.len() {
        return Err(Error::Format("joint positions and parents differ in length".into()));
    }
    let joints = file
        .joints
        .positions
        .iter()
        .zip(&file.joints.parents)
        .map(|(&position, &parent)| Joint { position, parent })
        .collect();
    let residual = match &file.residual {
        Some(rows) => field_from_rows(rows),
        None => DMatrix::zeros(n, 3),
    };
    HandModel::new(
        template,
        weights,
        file.shape_basis.iter().map(|f| field_from_rows(f)).collect(),
        file.pose_basis.iter().map(|f| field_from_rows(f)).collect(),
        residual,
        joints,
    )
}

/// Serializes with the template embedded as OBJ text.
pub fn model_to_json(model: &HandModel) -> String {
    let w = &model.skinning_weights;
    let file = ModelFile {
        template_obj: write_obj(&model.template),
        skinning_weights: (0..w.nrows()).map(|r| w.row(r).iter().copied().collect()).collect(),
        shape_basis: model.shape_basis.iter().map(field_to_rows).collect(),
        pose_basis: model.pose_basis.iter().map(field_to_rows).collect(),
        residual: Some(field_to_rows(&model.residual)),
        joints: JointsFile {
            positions: model.joints.iter().map(|j| j.position).collect(),
            parents: model.joints.iter().map(|j| j.parent).collect(),
        },
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_disc_fixture;

    fn rot_z(angle: f64) -> Matrix3<f64> {
        let (s, c) = angle.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    /// Two-bone cylinder along +x, elbow at x = 10. Vertices left of the
    /// elbow follow joint 0, right of it joint 1, the elbow ring is split.
    fn cylinder_rig() -> HandModel {
        let (rings, seg) = (9usize, 8usize);
        let mut verts = Vec::new();
        for i in 0..rings {
            let x = 2.5 * i as f64;
            for j in 0..seg {
                let a = 2.0 * std::f64::consts::PI * j as f64 / seg as f64;
                verts.push([x, a.cos(), a.sin()]);
            }
        }
        let mut faces = Vec::new();
        for i in 0..rings - 1 {
            for j in 0..seg {
                let (a, b) = (i * seg + j, i * seg + (j + 1) % seg);
                let (c, d) = (a + seg, b + seg);
                faces.push([a, b, d]);
                faces.push([a, d, c]);
            }
        }
        let template = TriangleMesh::new(verts.clone(), faces).unwrap();
        let n = verts.len();
        let mut w = DMatrix::zeros(2, n);
        for (v, p) in verts.iter().enumerate() {
            if p[0] < 10.0 {
                w[(0, v)] = 1.0;
            } else if p[0] > 10.0 {
                w[(1, v)] = 1.0;
            } else {
                w[(0, v)] = 0.25;
                w[(1, v)] = 0.75;
            }
        }
        let joints = vec![
            Joint { position: [0.0; 3], parent: None },
            Joint { position: [10.0, 0.0, 0.0], parent: Some(0) },
        ];
        HandModel::new(template, w, vec![], vec![], DMatrix::zeros(n, 3), joints).unwrap()
    }

    #[test]
    fn identity_pose_returns_template() {
        let model = cylinder_rig();
        let out = pose_model(&model, &Pose::identity(&model)).unwrap();
        assert_eq!(out.vertices(), model.template().vertices());
    }

    #[test]
    fn identity_pose_adds_residual_exactly() {
        let model = cylinder_rig();
        let n = model.template().vertex_count();
        let d = DMatrix::from_fn(n, 3, |r, c| 0.01 * (r as f64) - 0.3 * c as f64);
        let model = model.with_residual(d.clone()).unwrap();
        let out = pose_model(&model, &Pose::identity(&model)).unwrap();
        let expected = model.template().vertex_matrix() + d;
        assert_eq!(out.vertex_matrix(), expected);
    }

    #[test]
    fn elbow_rotation_is_rigid_for_distal_vertices() {
        let model = cylinder_rig();
        let mut pose = Pose::identity(&model);
        pose.rotations[1] = rot_z(std::f64::consts::FRAC_PI_2);
        let out = pose_model(&model, &pose).unwrap();
        for (v, p) in model.template().vertices().iter().enumerate() {
            let q = out.vertices()[v];
            if p[0] > 10.0 {
                // (x, y, z) -> (10 - y, x - 10, z)
                let expect = [10.0 - p[1], p[0] - 10.0, p[2]];
                for k in 0..3 {
                    assert!((q[k] - expect[k]).abs() < 1e-12, "vertex {v}");
                }
            } else if p[0] < 10.0 {
                assert_eq!(q, *p);
            }
        }
    }

    #[test]
    fn global_rigid_motion_commutes() {
        let model = cylinder_rig();
        let mut pose = Pose::identity(&model);
        pose.rotations[1] = rot_z(0.4);
        let base = pose_model(&model, &pose).unwrap();
        let g = rot_z(1.2) * Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.6, -0.8, 0.0, 0.8, 0.6);
        pose.rotations[0] = g;
        pose.translation = Vector3::new(4.0, -2.0, 9.0);
        let moved = pose_model(&model, &pose).unwrap();
        for (p, q) in base.vertices().iter().zip(moved.vertices()) {
            let e = g * Vector3::from(*p) + pose.translation;
            for k in 0..3 {
                assert!((q[k] - e[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn blend_shapes_are_linear() {
        let model = cylinder_rig();
        let n = model.template().vertex_count();
        let field = DMatrix::from_fn(n, 3, |r, _| r as f64 * 0.001);
        let model = HandModel::new(
            model.template().clone(),
            model.skinning_weights().clone(),
            vec![field.clone()],
            vec![field.clone() * 2.0],
            DMatrix::zeros(n, 3),
            model.joints().to_vec(),
        )
        .unwrap();
        let mut pose = Pose::identity(&model);
        pose.shape_coeffs = vec![1.5];
        pose.pose_coeffs = vec![-0.25];
        let out = pose_model(&model, &pose).unwrap();
        let expected = model.template().vertex_matrix() + &field * 1.0;
        assert!((out.vertex_matrix() - expected).amax() < 1e-12);
        pose.shape_coeffs.clear();
        assert!(pose_model(&model, &pose).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        let t = make_disc_fixture(6, 4, 6).unwrap();
        let root = vec![Joint { position: [0.0; 3], parent: None }];
        let bad_w = DMatrix::from_element(1, 6, 0.9);
        assert!(HandModel::new(t.clone(), bad_w, vec![], vec![], DMatrix::zeros(6, 3), root.clone()).is_err());
        let w = DMatrix::from_element(1, 6, 1.0);
        assert!(HandModel::new(t.clone(), w.clone(), vec![], vec![], DMatrix::zeros(5, 3), root.clone()).is_err());
        assert!(HandModel::new(t.clone(), w.clone(), vec![DMatrix::zeros(6, 2)], vec![], DMatrix::zeros(6, 3), root).is_err());
        let cyclic = vec![Joint { position: [0.0; 3], parent: Some(0) }];
        assert!(HandModel::new(t, w, vec![], vec![], DMatrix::zeros(6, 3), cyclic).is_err());
    }

    #[test]
    fn bad_rotation_rejected() {
        let model = cylinder_rig();
        let mut pose = Pose::identity(&model);
        pose.rotations[0] = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(pose_model(&model, &pose).is_err());
    }

    #[test]
    fn subdivided_model_keeps_invariants() {
        let tri = TriangleMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let w = DMatrix::from_row_slice(2, 3, &[0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let joints = vec![
            Joint { position: [0.0; 3], parent: None },
            Joint { position: [1.0, 2.0, 3.0], parent: Some(0) },
        ];
        let model = HandModel::new(tri, w, vec![DMatrix::zeros(3, 3)], vec![], DMatrix::from_element(3, 3, 0.1), joints).unwrap();
        let fine = subdivide_model(&model, 1).unwrap();
        assert_eq!(fine.template().vertex_count(), 6);
        assert!(fine.skinning_weights().iter().all(|&x| (x - 0.5).abs() < 1e-12));
        assert_eq!(fine.joints(), model.joints());
        assert_eq!(fine.residual(), &DMatrix::zeros(6, 3));
        assert_eq!(fine.shape_basis()[0], DMatrix::zeros(6, 3));
        assert!(subdivide_model(&model, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let model = cylinder_rig();
        let text = model_to_json(&model);
        let back = load_model_json(&text, None).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn json_with_relative_template_path() {
        let dir = tempfile::tempdir().unwrap();
        let model = HandModel::rigid(make_disc_fixture(6, 4, 6).unwrap());
        std::fs::write(dir.path().join("t.obj"), write_obj(model.template())).unwrap();
        let json = r#"{"template_obj":"t.obj","skinning_weights":[[1,1,1,1,1,1]],
            "joints":{"positions":[[0,0,0]],"parents":[null]}}"#;
        let back = load_model_json(json, Some(dir.path())).unwrap();
        assert_eq!(back, model);
        let bad = json.replace("[[1,1,1,1,1,1]]", "[[1,1,1]]");
        assert!(matches!(load_model_json(&bad, Some(dir.path())), Err(Error::Format(_))));
    }
}
