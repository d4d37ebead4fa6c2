//! Independent oracles shared by the integration tests.
//!
//! Test signals are random polynomials in `(x, y, z)` restricted to the
//! sphere. A polynomial of degree `d` is bandlimited to degrees `≤ d`, so it can
//! be sampled exactly and evaluated anywhere without touching the harmonic
//! transform code.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphalign_core::{SphericalGrid, SphericalSignal};

#[derive(Debug, Clone)]
pub struct Poly {
    terms: Vec<([i32; 3], f64)>,
}

impl Poly {
    pub fn random(seed: u64, degree: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for a in 0..=degree as i32 {
            for b in 0..=(degree as i32 - a) {
                for c in 0..=(degree as i32 - a - b) {
                    terms.push(([a, b, c], rng.random::<f64>() * 2.0 - 1.0));
                }
            }
        }
        Self { terms }
    }

    pub fn eval(&self, v: &Vector3<f64>) -> f64 {
        self.terms
            .iter()
            .map(|([a, b, c], w)| w * v.x.powi(*a) * v.y.powi(*b) * v.z.powi(*c))
            .sum()
    }

    pub fn sample(&self, grid: &std::sync::Arc<SphericalGrid>) -> SphericalSignal {
        SphericalSignal::from_fn(grid.clone(), 1, |_, t, p| self.eval(&unit(t, p)))
    }
}

pub fn sample_many(polys: &[Poly], grid: &std::sync::Arc<SphericalGrid>) -> SphericalSignal {
    SphericalSignal::from_fn(grid.clone(), polys.len(), |k, t, p| {
        polys[k].eval(&unit(t, p))
    })
}

pub fn unit(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    )
}

pub fn zyz(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    let rz = |a: f64| Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0);
    let (sb, cb) = beta.sin_cos();
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    rz(alpha) * ry * rz(gamma)
}

/// Quadrature nodes on SO(3): `L` uniform α and γ, `L` half-offset β with
/// the sphere grid's row weights. Weights include `dα dγ`.
pub fn so3_quadrature(bandwidth: usize) -> Vec<(Matrix3<f64>, f64)> {
    let g = SphericalGrid::new(bandwidth).unwrap();
    let l = g.resolution();
    let step = 2.0 * PI / l as f64;
    let mut out = Vec::with_capacity(l * l * l);
    for a in 0..l {
        for (b, &beta) in g.colatitudes().iter().enumerate() {
            for c in 0..l {
                let w = g.quad_weights()[b] * step * step;
                out.push((zyz(a as f64 * step, beta, c as f64 * step), w));
            }
        }
    }
    out
}

/// Plain Riemann-free sphere quadrature using the grid's exact weights; the
/// integrand is supplied per sample point.
pub fn sphere_integral(grid: &SphericalGrid, mut f: impl FnMut(&Vector3<f64>) -> f64) -> f64 {
    let n = grid.resolution();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += f(&unit(grid.colatitudes()[i], grid.azimuths()[j]));
        }
        acc += grid.cell_weight(i) * row;
    }
    acc
}
