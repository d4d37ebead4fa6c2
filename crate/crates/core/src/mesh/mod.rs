//! Triangle meshes and the ray-cast map to spherical signals.

mod bvh;
mod io;
mod raycast;
pub mod synth;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{invalid_arg, invalid_input, Result};
use crate::rotations::Rotation;

pub use io::{load_mesh, parse_obj, parse_off, write_off, MeshFormat};
pub use raycast::{
    ray_cast, ray_cast_brute_force, ray_cast_directions, ray_cast_with, RayCastOptions, BACKGROUND,
};

/// Triangles below this doubled area are dropped at construction.
const MIN_DOUBLE_AREA: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Validates indices and coordinates and drops zero-area faces.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(invalid_input(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(faces.len());
        for f in faces {
            if let Some(&bad) = f.iter().find(|&&i| i as usize >= n) {
                return Err(invalid_input(format!(
                    "face index {bad} out of range for {n} vertices"
                )));
            }
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            if (b - a).cross(&(c - a)).norm() > MIN_DOUBLE_AREA {
                kept.push(f);
            }
        }
        if kept.is_empty() {
            return Err(invalid_input("mesh has no non-degenerate faces"));
        }
        Ok(Self {
            vertices,
            faces: kept,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn triangle(&self, f: usize) -> [Point3<f64>; 3] {
        self.faces[f].map(|i| self.vertices[i as usize])
    }

    /// Largest vertex distance from the origin.
    pub fn max_radius(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.coords.norm())
            .fold(0.0, f64::max)
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::from(Vector3::repeat(f64::INFINITY));
        let mut hi = Point3::from(Vector3::repeat(f64::NEG_INFINITY));
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Centers the bounding box at the origin and scales the farthest vertex to
/// radius 1.
pub fn normalize_mesh(mesh: &TriMesh) -> TriMesh {
    let (lo, hi) = mesh.bounds();
    let center = nalgebra::center(&lo, &hi).coords;
    let radius = mesh
        .vertices
        .iter()
        .map(|v| (v.coords - center).norm())
        .fold(0.0, f64::max);
    let scale = if radius > 0.0 { 1.0 / radius } else { 1.0 };
    mesh.map_vertices(|v| Point3::from((v.coords - center) * scale))
}

pub fn anisotropic_scale(mesh: &TriMesh, sx: f64, sy: f64, sz: f64) -> Result<TriMesh> {
    for s in [sx, sy, sz] {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid_arg(format!(
                "scale factors must be positive, got {s}"
            )));
        }
    }
    let s = Vector3::new(sx, sy, sz);
    Ok(mesh.map_vertices(|v| Point3::from(v.coords.component_mul(&s))))
}

/// Applies `R` to every vertex about the origin.
pub fn rotate_mesh(mesh: &TriMesh, rotation: &Rotation) -> TriMesh {
    let m: Matrix3<f64> = *rotation.matrix();
    mesh.map_vertices(|v| Point3::from(m * v.coords))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> TriMesh {
        TriMesh::new(
            vec![
                Point3::new(1.0, 2.0, 3.0),
                Point3::new(3.0, 2.0, 3.0),
                Point3::new(1.0, 5.0, 3.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_faces_are_dropped() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let m = TriMesh::new(v.clone(), vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.faces().len(), 1);
        assert!(matches!(
            TriMesh::new(v.clone(), vec![[0, 1, 2]]),
            Err(crate::Error::InvalidInput(_))
        ));
        assert!(TriMesh::new(v, vec![[0, 1, 9]]).is_err());
    }

    #[test]
    fn normalize_is_translation_invariant_and_idempotent() {
        let m = tri();
        let shifted = m.map_vertices(|v| v + Vector3::new(-4.0, 7.0, 0.5));
        let a = normalize_mesh(&m);
        let b = normalize_mesh(&shifted);
        let c = normalize_mesh(&a);
        assert!((a.max_radius() - 1.0).abs() < 1e-12);
        for ((p, q), r) in a.vertices().iter().zip(b.vertices()).zip(c.vertices()) {
            assert!((p - q).norm() < 1e-12);
            assert!((p - r).norm() < 1e-12);
        }
    }

    #[test]
    fn scaling_rules() {
        let m = tri();
        assert_eq!(anisotropic_scale(&m, 1.0, 1.0, 1.0).unwrap(), m);
        let (lo, hi) = anisotropic_scale(&m, 2.0, 1.0, 1.0).unwrap().bounds();
        assert!((hi.x - lo.x - 4.0).abs() < 1e-12);
        let ab = anisotropic_scale(
            &anisotropic_scale(&m, 2.0, 0.5, 3.0).unwrap(),
            0.25,
            4.0,
            1.5,
        )
        .unwrap();
        let direct = anisotropic_scale(&m, 0.5, 2.0, 4.5).unwrap();
        for (p, q) in ab.vertices().iter().zip(direct.vertices()) {
            assert!((p - q).norm() < 1e-12);
        }
        assert!(anisotropic_scale(&m, 0.0, 1.0, 1.0).is_err());
        assert!(anisotropic_scale(&m, 1.0, -2.0, 1.0).is_err());
    }
}
