use nalgebra::Point3;
use rayon::prelude::*;

use super::bvh::{intersect, Bvh, Ray};
use super::TriMesh;
use crate::error::{invalid_arg, invalid_input, Result};
use crate::grid::{Direction, SphericalGrid};
use crate::sht::SphericalSignal;
use std::sync::Arc;

/// Value recorded for rays that miss the mesh.
pub const BACKGROUND: f64 = 0.0;
const MAX_RADIUS: f64 = 1.0 + 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RayCastOptions {
    /// Rays per cell along each axis; the cell value is their mean.
    pub supersample: usize,
}

impl Default for RayCastOptions {
    fn default() -> Self {
        Self { supersample: 1 }
    }
}

/// Ray-casts with one ray per cell center.
pub fn ray_cast(mesh: &TriMesh, grid: &Arc<SphericalGrid>) -> Result<SphericalSignal> {
    ray_cast_with(mesh, grid, &RayCastOptions::default())
}

/// For each grid direction `p`, casts from `p` on the unit sphere toward the
/// origin and records the distance to the first surface hit, or
/// [`BACKGROUND`] on a miss.
pub fn ray_cast_with(
    mesh: &TriMesh,
    grid: &Arc<SphericalGrid>,
    options: &RayCastOptions,
) -> Result<SphericalSignal> {
    let bvh = prepare(mesh, options)?;
    cast(grid, options.supersample, |ray| bvh.nearest(ray))
}

/// Ray lengths for arbitrary directions, with the same conventions as
/// [`ray_cast`].
pub fn ray_cast_directions(mesh: &TriMesh, directions: &[Direction]) -> Result<Vec<f64>> {
    let bvh = prepare(mesh, &RayCastOptions::default())?;
    Ok(directions
        .par_iter()
        .map(|d| trace(*d, &|ray: &Ray| bvh.nearest(ray)))
        .collect())
}

/// Same map as [`ray_cast_with`] testing every triangle for every ray.
pub fn ray_cast_brute_force(
    mesh: &TriMesh,
    grid: &Arc<SphericalGrid>,
    options: &RayCastOptions,
) -> Result<SphericalSignal> {
    prepare(mesh, options)?;
    let tris: Vec<[Point3<f64>; 3]> = (0..mesh.faces().len()).map(|f| mesh.triangle(f)).collect();
    cast(grid, options.supersample, |ray| {
        tris.iter()
            .filter_map(|t| intersect(ray, t))
            .reduce(f64::min)
    })
}

fn prepare(mesh: &TriMesh, options: &RayCastOptions) -> Result<Bvh> {
    if options.supersample == 0 {
        return Err(invalid_arg("supersample must be at least 1"));
    }
    let r = mesh.max_radius();
    if r > MAX_RADIUS {
        return Err(invalid_input(format!(
            "mesh radius {r} exceeds the unit casting sphere; normalize it first"
        )));
    }
    Ok(Bvh::build(mesh))
}

fn cast(
    grid: &Arc<SphericalGrid>,
    supersample: usize,
    hit: impl Fn(&Ray) -> Option<f64> + Sync,
) -> Result<SphericalSignal> {
    let n = grid.resolution();
    let dtheta = std::f64::consts::PI / n as f64;
    let dphi = std::f64::consts::TAU / n as f64;
    let s = supersample;
    let mut values = vec![BACKGROUND; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            let sum: f64 = if s == 1 {
                let d = grid.direction_of(i, j).expect("in-range cell");
                trace(d, &hit)
            } else {
                let mut acc = 0.0;
                for a in 0..s {
                    for b in 0..s {
                        let th =
                            grid.colatitudes()[i] + ((a as f64 + 0.5) / s as f64 - 0.5) * dtheta;
                        let ph = grid.azimuths()[j] + ((b as f64 + 0.5) / s as f64 - 0.5) * dphi;
                        acc += trace(Direction::from_spherical(th, ph), &hit);
                    }
                }
                acc / (s * s) as f64
            };
            *out = sum;
        }
    });
    SphericalSignal::new(grid.clone(), 1, values)
}

fn trace(d: Direction, hit: &impl Fn(&Ray) -> Option<f64>) -> f64 {
    let p = *d.vector();
    let ray = Ray {
        origin: Point3::from(p),
        dir: -p,
    };
    hit(&ray).unwrap_or(BACKGROUND)
}
