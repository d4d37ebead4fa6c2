//! Procedural watertight meshes for tests and evaluation.
//!
//! Every generator starts from a subdivided icosahedron and moves vertices
//! along rays from the origin, so outputs stay star-shaped and closed.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{normalize_mesh, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    BumpySphere,
    Box,
    Ellipsoid,
    Cylinder,
}

impl Shape {
    pub const ALL: [Shape; 4] = [
        Shape::BumpySphere,
        Shape::Box,
        Shape::Ellipsoid,
        Shape::Cylinder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::BumpySphere => "sphere",
            Shape::Box => "box",
            Shape::Ellipsoid => "ellipsoid",
            Shape::Cylinder => "cylinder",
        }
    }
}

/// Unit-radius geodesic sphere; `subdivisions = 0` is the icosahedron.
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
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
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push((verts[a as usize] + verts[b as usize]).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.into_iter().map(Point3::from).collect();
    TriMesh::new(vertices, faces).expect("icosphere is well formed")
}

fn with_radial(mesh: &TriMesh, radius: impl Fn(&Vector3<f64>) -> f64) -> TriMesh {
    mesh.map_vertices(|v| {
        let u = v.coords.normalize();
        Point3::from(u * radius(&u))
    })
}

/// Projects a unit sphere mesh onto an axis-aligned box surface.
pub fn to_box(sphere: &TriMesh, half_extents: Vector3<f64>) -> TriMesh {
    with_radial(sphere, |u| 1.0 / u.abs().component_div(&half_extents).max())
}

/// Projects a unit sphere mesh onto a capped z-axis cylinder.
pub fn to_cylinder(sphere: &TriMesh, radius: f64, half_height: f64) -> TriMesh {
    with_radial(sphere, |u| {
        1.0 / (u.xy().norm() / radius).max(u.z.abs() / half_height)
    })
}

/// Capped z-axis cylinder normalized to unit radius, symmetric about its
/// axis.
pub fn cylinder(subdivisions: u32, radius: f64, half_height: f64) -> TriMesh {
    normalize_mesh(&to_cylinder(&icosphere(subdivisions), radius, half_height))
}

/// Radial Gaussian bumps centered on random directions. Negative amplitudes
/// make dents.
pub fn add_bumps<R: Rng + ?Sized>(
    mesh: &TriMesh,
    rng: &mut R,
    count: usize,
    amplitude: f64,
) -> TriMesh {
    let bumps: Vec<(Vector3<f64>, f64, f64)> = (0..count)
        .map(|_| {
            let c = Vector3::from_fn(|_, _| StandardNormal.sample(rng)).normalize();
            let a = amplitude * rng.random_range(-0.5..1.0);
            let w = rng.random_range(0.15..0.45f64);
            (c, a, w)
        })
        .collect();
    mesh.map_vertices(|v| {
        let u = v.coords.normalize();
        let s: f64 = bumps
            .iter()
            .map(|(c, a, w)| a * (-(1.0 - u.dot(c)) / (w * w)).exp())
            .sum();
        Point3::from(v.coords * (1.0 + s).max(0.2))
    })
}

/// Random normalized instance of `shape`, bumped so it has no rotational
/// symmetry.
pub fn random_shape<R: Rng + ?Sized>(shape: Shape, rng: &mut R, subdivisions: u32) -> TriMesh {
    let sphere = icosphere(subdivisions);
    let mut extents = || Vector3::from_fn(|_, _| rng.random_range(0.4..1.0f64));
    let base = match shape {
        Shape::BumpySphere => sphere,
        Shape::Box => to_box(&sphere, extents()),
        Shape::Ellipsoid => {
            let e = extents();
            sphere.map_vertices(|v| Point3::from(v.coords.component_mul(&e)))
        }
        Shape::Cylinder => {
            let r = rng.random_range(0.4..0.9);
            let h = rng.random_range(0.5..1.0);
            to_cylinder(&sphere, r, h)
        }
    };
    let count = rng.random_range(3..7);
    normalize_mesh(&add_bumps(&base, rng, count, 0.25))
}
