//! Equiangular sampling of the sphere.
//!
//! A grid of bandwidth `B` has `N = 2B` rows and columns. Row `i` sits at
//! colatitude `π(2i+1)/(2N)`, so no sample lands on a pole, and column `j`
//! at azimuth `2πj/N`. The per-row quadrature weights integrate every
//! polynomial in `cos θ` of degree below `2B` exactly, which makes the forward
//! harmonic transform exact for signals bandlimited to `B`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Vector3;

use crate::error::{invalid_arg, Result};

/// Unit vector on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(Vector3<f64>);

impl Direction {
    /// The north pole `(0, 0, 1)`, fixed by rotations about the z axis.
    pub const NORTH_POLE: Direction = Direction(Vector3::new(0.0, 0.0, 1.0));

    /// Normalizes `v`; returns `None` for the zero vector or non-finite input.
    pub fn new(v: Vector3<f64>) -> Option<Self> {
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            Some(Self(v / n))
        } else {
            None
        }
    }

    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self(Vector3::new(st * cp, st * sp, ct))
    }

    /// Colatitude in `[0, π]` and azimuth in `[0, 2π)`.
    pub fn to_spherical(&self) -> (f64, f64) {
        let v = self.0;
        let theta = v.z.clamp(-1.0, 1.0).acos();
        let mut phi = v.y.atan2(v.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi -= 2.0 * PI;
        }
        (theta, phi)
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Sampling geometry of an `N × N` equiangular grid with `N = 2B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGrid {
    bandwidth: usize,
    colatitudes: Vec<f64>,
    azimuths: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl SphericalGrid {
    pub fn new(bandwidth: usize) -> Result<Self> {
        if bandwidth == 0 {
            return Err(invalid_arg("bandwidth must be at least 1"));
        }
        let n = 2 * bandwidth;
        let colatitudes = (0..n).map(|i| colatitude(i, n)).collect();
        let azimuths = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let quad_weights = driscoll_healy_weights(bandwidth);
        Ok(Self {
            bandwidth,
            colatitudes,
            azimuths,
            quad_weights,
        })
    }

    /// Process-wide cached grid for `bandwidth`.
    pub fn shared(bandwidth: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SphericalGrid>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(g) = guard.get(&bandwidth) {
            return Ok(g.clone());
        }
        let g = Arc::new(Self::new(bandwidth)?);
        guard.insert(bandwidth, g.clone());
        Ok(g)
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Samples per axis, `2B`.
    pub fn resolution(&self) -> usize {
        2 * self.bandwidth
    }

    pub fn colatitudes(&self) -> &[f64] {
        &self.colatitudes
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    /// Quadrature weight of each row; they sum to 2 (`∫₀^π sin θ dθ`).
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Area element of sample `(i, ·)`: `w_i · 2π/N`.
    pub fn cell_weight(&self, i: usize) -> f64 {
        self.quad_weights[i] * 2.0 * PI / self.resolution() as f64
    }

    pub fn direction_of(&self, i: usize, j: usize) -> Result<Direction> {
        let n = self.resolution();
        if i >= n || j >= n {
            return Err(invalid_arg(format!(
                "grid index ({i}, {j}) out of range for resolution {n}"
            )));
        }
        Ok(Direction::from_spherical(
            self.colatitudes[i],
            self.azimuths[j],
        ))
    }

    /// Integrates a row-major `N × N` sample array over the sphere.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        let n = self.resolution();
        debug_assert_eq!(samples.len(), n * n);
        samples
            .chunks_exact(n)
            .enumerate()
            .map(|(i, row)| self.cell_weight(i) * row.iter().sum::<f64>())
            .sum()
    }
}

pub(crate) fn colatitude(i: usize, n: usize) -> f64 {
    PI * (2 * i + 1) as f64 / (2 * n) as f64
}

/// Driscoll–Healy weights for the half-offset colatitude sampling.
fn driscoll_healy_weights(bandwidth: usize) -> Vec<f64> {
    let b = bandwidth as f64;
    (0..2 * bandwidth)
        .map(|j| {
            let t = PI * (2 * j + 1) as f64 / (4.0 * b);
            let s: f64 = (0..bandwidth)
                .map(|k| {
                    let odd = (2 * k + 1) as f64;
                    (odd * t).sin() / odd
                })
                .sum();
            2.0 / b * t.sin() * s
        })
        .collect()
}
