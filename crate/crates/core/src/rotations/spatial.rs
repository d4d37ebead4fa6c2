use rayon::prelude::*;

use super::Rotation;
use crate::grid::Direction;
use crate::interp::sample_bicubic;
use crate::sht::SphericalSignal;

/// Interpolating rotation `out(p) = in(Rᵀ p)`.
///
/// Each output sample pulls the bicubic interpolant of the input at the
/// back-rotated direction. The identity returns the input unchanged.
pub fn rotate_spatial(signal: &SphericalSignal, rotation: &Rotation) -> SphericalSignal {
    if rotation.is_identity() {
        return signal.clone();
    }
    let grid = signal.grid();
    let n = grid.resolution();
    let inv = rotation.matrix().transpose();
    // Source coordinates are shared by every channel.
    let sources: Vec<(f64, f64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let p = Direction::from_spherical(grid.colatitudes()[i], grid.azimuths()[j]);
            Direction::new(inv * p.vector())
                .expect("rotated unit vector")
                .to_spherical()
        })
        .collect();
    let mut out = SphericalSignal::zeros(grid.clone(), signal.channels());
    out.values_mut()
        .par_chunks_exact_mut(n * n)
        .enumerate()
        .for_each(|(k, dst)| {
            let src = signal.channel(k);
            for (o, &(t, p)) in dst.iter_mut().zip(&sources) {
                *o = sample_bicubic(src, n, t, p);
            }
        });
    out
}
