//! Bicubic (Catmull–Rom) sampling on the equiangular grid.
//!
//! Columns wrap around in azimuth. Rows past a pole reflect back onto the
//! sphere with the azimuth shifted by half a turn.

use std::f64::consts::PI;

#[inline]
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Samples one `n × n` channel at `(θ, φ)`.
pub(crate) fn sample_bicubic(channel: &[f64], n: usize, theta: f64, phi: f64) -> f64 {
    let u = theta * n as f64 / PI - 0.5;
    let v = phi * n as f64 / (2.0 * PI);
    let i0 = u.floor();
    let j0 = v.floor();
    let wu = catmull_rom(u - i0);
    let wv = catmull_rom(v - j0);
    let (i0, j0) = (i0 as i64, j0 as i64);
    let ni = n as i64;
    let mut acc = 0.0;
    for (di, wi) in wu.iter().enumerate() {
        let mut r = i0 - 1 + di as i64;
        let mut shift = 0;
        if r < 0 {
            r = -1 - r;
            shift = ni / 2;
        } else if r >= ni {
            r = 2 * ni - 1 - r;
            shift = ni / 2;
        }
        let row = &channel[r as usize * n..(r as usize + 1) * n];
        let mut line = 0.0;
        for (dj, wj) in wv.iter().enumerate() {
            let c = (j0 - 1 + dj as i64 + shift).rem_euclid(ni);
            line += wj * row[c as usize];
        }
        acc += wi * line;
    }
    acc
}
