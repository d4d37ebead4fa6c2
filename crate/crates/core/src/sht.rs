//! Forward and inverse spherical harmonic transforms.
//!
//! Harmonics are orthonormal with the Condon–Shortley phase:
//! `Y_l^m(θ, φ) = P̄_l^m(cos θ) e^{imφ}` and `Y_l^{-m} = (-1)^m conj(Y_l^m)`.
//! The azimuthal stage is one FFT per grid row; the Legendre stage is a dense
//! sum per order, `O(B³)` per channel.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid_arg, Result};
use crate::grid::SphericalGrid;

/// Index of `(l, m)` in the dense layout `l² + l + m`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Index of `(l, m ≥ 0)` in a triangular table of Legendre values.
#[inline]
fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

#[inline]
fn sign(m: i64) -> f64 {
    if m.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Orthonormalized associated Legendre values `P̄_l^m(cos θ)` for
/// `0 ≤ m ≤ l < bandwidth`, in triangular layout `l(l+1)/2 + m`.
///
/// The recursion runs upward in `l` at fixed `m`. The sectoral seed
/// `P̄_m^m ∝ sin^m θ` is carried in log form and the running values are
/// rescaled whenever they grow large, so very high degrees near the poles
/// underflow to zero instead of overflowing.
pub fn normalized_legendre(bandwidth: usize, theta: f64) -> Vec<f64> {
    let (s, x) = theta.sin_cos();
    let mut out = vec![0.0; bandwidth * (bandwidth + 1) / 2];
    let ln_s = s.abs().ln();
    // ln of sqrt(Π_{k≤m} (2k-1)/(2k)), accumulated across m.
    let mut ln_prod = 0.0;
    for m in 0..bandwidth {
        if m > 0 {
            ln_prod += 0.5 * ((2 * m - 1) as f64 / (2 * m) as f64).ln();
        }
        let mf = m as f64;
        let mut ln_scale = 0.5 * ((2.0 * mf + 1.0) / (4.0 * PI)).ln() + ln_prod;
        if m > 0 {
            if s == 0.0 {
                continue;
            }
            ln_scale += mf * ln_s;
        }
        let seed_sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        // Values are `p * exp(ln_scale)`.
        let mut p_prev = 0.0;
        let mut p = seed_sign;
        out[tri_index(m, m)] = emit(p, ln_scale);
        for l in (m + 1)..bandwidth {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = if l == m + 1 {
                0.0
            } else {
                let l1 = lf - 1.0;
                ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt()
            };
            let next = a * (x * p - b * p_prev);
            p_prev = p;
            p = next;
            if p.abs() > 1e150 {
                p *= 1e-150;
                p_prev *= 1e-150;
                ln_scale += 150.0 * std::f64::consts::LN_10;
            }
            out[tri_index(l, m)] = emit(p, ln_scale);
        }
    }
    out
}

#[inline]
fn emit(p: f64, ln_scale: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * ln_scale.exp()
    }
}

/// Evaluates one orthonormal harmonic at an arbitrary point.
pub fn spherical_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Complex64 {
    let ma = m.unsigned_abs() as usize;
    assert!(ma <= l, "|m| must not exceed l");
    let p = normalized_legendre(l + 1, theta)[tri_index(l, ma)];
    let y = Complex64::from_polar(p, ma as f64 * phi);
    if m < 0 {
        y.conj() * sign(m)
    } else {
        y
    }
}

/// `K` real channels sampled on a [`SphericalGrid`], channel-major then
/// row-major (`values[(k·N + i)·N + j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalSignal {
    grid: Arc<SphericalGrid>,
    channels: usize,
    values: Vec<f64>,
}

impl SphericalSignal {
    pub fn new(grid: Arc<SphericalGrid>, channels: usize, values: Vec<f64>) -> Result<Self> {
        let n = grid.resolution();
        if channels == 0 {
            return Err(invalid_arg("signal needs at least one channel"));
        }
        if values.len() != channels * n * n {
            return Err(invalid_arg(format!(
                "expected {} values for {channels}×{n}×{n}, got {}",
                channels * n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid_arg("signal contains non-finite values"));
        }
        Ok(Self {
            grid,
            channels,
            values,
        })
    }

    pub fn zeros(grid: Arc<SphericalGrid>, channels: usize) -> Self {
        let n = grid.resolution();
        Self {
            grid,
            channels,
            values: vec![0.0; channels * n * n],
        }
    }

    /// Samples `f(channel, θ, φ)` at every grid point.
    pub fn from_fn(
        grid: Arc<SphericalGrid>,
        channels: usize,
        mut f: impl FnMut(usize, f64, f64) -> f64,
    ) -> Self {
        let n = grid.resolution();
        let mut values = Vec::with_capacity(channels * n * n);
        for k in 0..channels {
            for &t in grid.colatitudes() {
                for &p in grid.azimuths() {
                    values.push(f(k, t, p));
                }
            }
        }
        Self {
            grid,
            channels,
            values,
        }
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn bandwidth(&self) -> usize {
        self.grid.bandwidth()
    }

    pub fn resolution(&self) -> usize {
        self.grid.resolution()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let nn = self.resolution() * self.resolution();
        &self.values[k * nn..(k + 1) * nn]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut [f64] {
        let nn = self.resolution() * self.resolution();
        &mut self.values[k * nn..(k + 1) * nn]
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.resolution();
        self.values[(k * n + i) * n + j]
    }

    /// Stacks the channels of several signals on the same grid.
    pub fn concat(parts: &[&SphericalSignal]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| invalid_arg("nothing to concatenate"))?;
        let mut values = Vec::new();
        let mut channels = 0;
        for p in parts {
            if p.bandwidth() != first.bandwidth() {
                return Err(invalid_arg("cannot concatenate signals on different grids"));
            }
            values.extend_from_slice(&p.values);
            channels += p.channels;
        }
        Ok(Self {
            grid: first.grid.clone(),
            channels,
            values,
        })
    }

    /// Area-weighted `L²` norm over all channels.
    pub fn l2_norm(&self) -> f64 {
        let n = self.resolution();
        let mut acc = 0.0;
        for k in 0..self.channels {
            for i in 0..n {
                let w = self.grid.cell_weight(i);
                let row = &self.channel(k)[i * n..(i + 1) * n];
                acc += w * row.iter().map(|v| v * v).sum::<f64>();
            }
        }
        acc.sqrt()
    }

    pub fn max_abs_diff(&self, other: &SphericalSignal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Complex harmonic coefficients for `0 ≤ l < B`, `|m| ≤ l`, per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    bandwidth: usize,
    channels: usize,
    data: Vec<Complex64>,
}

impl HarmonicCoeffs {
    pub fn zeros(bandwidth: usize, channels: usize) -> Self {
        Self {
            bandwidth,
            channels,
            data: vec![Complex64::new(0.0, 0.0); bandwidth * bandwidth * channels],
        }
    }

    pub fn from_vec(bandwidth: usize, channels: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != bandwidth * bandwidth * channels {
            return Err(invalid_arg(format!(
                "expected {} coefficients, got {}",
                bandwidth * bandwidth * channels,
                data.len()
            )));
        }
        Ok(Self {
            bandwidth,
            channels,
            data,
        })
    }

    /// Random coefficients of a real signal with degrees below `max_degree`,
    /// conjugate-symmetric by construction. Degree-`l` entries are scaled by
    /// `decay^l`.
    pub fn random_real<R: Rng + ?Sized>(
        rng: &mut R,
        bandwidth: usize,
        channels: usize,
        max_degree: usize,
        decay: f64,
    ) -> Self {
        let mut c = Self::zeros(bandwidth, channels);
        for k in 0..channels {
            for l in 0..max_degree.min(bandwidth) {
                let amp = decay.powi(l as i32);
                let re: f64 = rng.sample(StandardNormal);
                c.set(k, l, 0, Complex64::new(amp * re, 0.0));
                for m in 1..=l as i64 {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let v = Complex64::new(re, im) * (amp / 2f64.sqrt());
                    c.set(k, l, m, v);
                    c.set(k, l, -m, v.conj() * sign(m));
                }
            }
        }
        c
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn channel(&self, k: usize) -> &[Complex64] {
        let bb = self.bandwidth * self.bandwidth;
        &self.data[k * bb..(k + 1) * bb]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut [Complex64] {
        let bb = self.bandwidth * self.bandwidth;
        &mut self.data[k * bb..(k + 1) * bb]
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize, m: i64) -> Complex64 {
        self.data[k * self.bandwidth * self.bandwidth + lm_index(l, m)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, m: i64, v: Complex64) {
        let bb = self.bandwidth * self.bandwidth;
        self.data[k * bb + lm_index(l, m)] = v;
    }

    /// Truncates or zero-pads to a new bandwidth.
    pub fn with_bandwidth(&self, bandwidth: usize) -> Self {
        let mut out = Self::zeros(bandwidth, self.channels);
        let keep = bandwidth.min(self.bandwidth);
        for k in 0..self.channels {
            let src = self.channel(k);
            out.channel_mut(k)[..keep * keep].copy_from_slice(&src[..keep * keep]);
        }
        out
    }

    /// Largest violation of `c(l,-m) = (-1)^m conj(c(l,m))`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.channels {
            for l in 0..self.bandwidth {
                for m in 0..=l as i64 {
                    let d = self.get(k, l, -m) - self.get(k, l, m).conj() * sign(m);
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    /// `Σ |c|²` over everything.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Relative `ℓ²` distance `‖self − other‖ / ‖other‖`.
    pub fn relative_error(&self, other: &HarmonicCoeffs) -> f64 {
        let num: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (num / other.energy()).sqrt()
    }
}

/// Precomputed Legendre tables and FFT plans for one bandwidth.
pub struct ShtPlan {
    grid: Arc<SphericalGrid>,
    /// `legendre[i * tri + tri_index(l, m)]` for row `i`.
    legendre: Vec<f64>,
    tri: usize,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ShtPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShtPlan")
            .field("bandwidth", &self.grid.bandwidth())
            .finish_non_exhaustive()
    }
}

impl ShtPlan {
    pub fn new(bandwidth: usize) -> Result<Self> {
        let grid = SphericalGrid::shared(bandwidth)?;
        let n = grid.resolution();
        let tri = bandwidth * (bandwidth + 1) / 2;
        let mut legendre = Vec::with_capacity(n * tri);
        for &t in grid.colatitudes() {
            legendre.extend(normalized_legendre(bandwidth, t));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft_fwd: planner.plan_fft_forward(n),
            fft_inv: planner.plan_fft_inverse(n),
            grid,
            legendre,
            tri,
        })
    }

    /// Process-wide cached plan.
    pub fn shared(bandwidth: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ShtPlan>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(p) = cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&bandwidth)
        {
            return Ok(p.clone());
        }
        // Build outside the lock; a racing duplicate is harmless.
        let plan = Arc::new(Self::new(bandwidth)?);
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(guard.entry(bandwidth).or_insert(plan).clone())
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    #[inline]
    fn plm(&self, i: usize, l: usize, m: usize) -> f64 {
        self.legendre[i * self.tri + tri_index(l, m)]
    }

    fn forward_channel(&self, samples: &[f64], out: &mut [Complex64]) {
        let n = self.grid.resolution();
        let b = self.grid.bandwidth();
        let mut rows: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in rows.chunks_exact_mut(n) {
            self.fft_fwd.process(row);
        }
        out.fill(Complex64::new(0.0, 0.0));
        for i in 0..n {
            let w = self.grid.cell_weight(i);
            let row = &rows[i * n..(i + 1) * n];
            for m in 0..b {
                let pos = row[m] * w;
                let neg = row[(n - m) % n] * (w * sign(m as i64));
                for l in m..b {
                    let p = self.plm(i, l, m);
                    out[lm_index(l, m as i64)] += pos * p;
                    if m > 0 {
                        out[lm_index(l, -(m as i64))] += neg * p;
                    }
                }
            }
        }
    }

    fn inverse_channel(&self, coeffs: &[Complex64], out: &mut [f64]) {
        let n = self.grid.resolution();
        let b = self.grid.bandwidth();
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            row.fill(Complex64::new(0.0, 0.0));
            for m in 0..b {
                let mut pos = Complex64::new(0.0, 0.0);
                let mut neg = Complex64::new(0.0, 0.0);
                for l in m..b {
                    let p = self.plm(i, l, m);
                    pos += coeffs[lm_index(l, m as i64)] * p;
                    if m > 0 {
                        neg += coeffs[lm_index(l, -(m as i64))] * p;
                    }
                }
                row[m] += pos;
                if m > 0 {
                    row[n - m] += neg * sign(m as i64);
                }
            }
            self.fft_inv.process(&mut row);
            for (o, v) in out[i * n..(i + 1) * n].iter_mut().zip(&row) {
                *o = v.re;
            }
        }
    }

    pub fn forward(&self, signal: &SphericalSignal) -> Result<HarmonicCoeffs> {
        let b = self.grid.bandwidth();
        if signal.bandwidth() != b {
            return Err(invalid_arg(format!(
                "signal bandwidth {} does not match plan bandwidth {b}",
                signal.bandwidth()
            )));
        }
        if signal.values().iter().any(|v| !v.is_finite()) {
            return Err(invalid_arg("signal contains non-finite values"));
        }
        let mut out = HarmonicCoeffs::zeros(b, signal.channels());
        out.data
            .par_chunks_exact_mut(b * b)
            .enumerate()
            .for_each(|(k, dst)| self.forward_channel(signal.channel(k), dst));
        Ok(out)
    }

    pub fn inverse(&self, coeffs: &HarmonicCoeffs) -> Result<SphericalSignal> {
        let b = self.grid.bandwidth();
        if coeffs.bandwidth() != b {
            return Err(invalid_arg(format!(
                "coefficient bandwidth {} does not match grid bandwidth {b}",
                coeffs.bandwidth()
            )));
        }
        let mut out = SphericalSignal::zeros(self.grid.clone(), coeffs.channels());
        let nn = self.grid.resolution() * self.grid.resolution();
        out.values
            .par_chunks_exact_mut(nn)
            .enumerate()
            .for_each(|(k, dst)| self.inverse_channel(coeffs.channel(k), dst));
        Ok(out)
    }
}

/// Forward transform with orthonormal harmonics, exact below the grid
/// bandwidth.
pub fn forward_sht(signal: &SphericalSignal) -> Result<HarmonicCoeffs> {
    ShtPlan::shared(signal.bandwidth())?.forward(signal)
}

/// Synthesizes the real part of `Σ c(l,m) Y_l^m` on `grid`.
pub fn inverse_sht(coeffs: &HarmonicCoeffs, grid: &SphericalGrid) -> Result<SphericalSignal> {
    if coeffs.bandwidth() != grid.bandwidth() {
        return Err(invalid_arg(format!(
            "coefficient bandwidth {} does not match grid bandwidth {}",
            coeffs.bandwidth(),
            grid.bandwidth()
        )));
    }
    ShtPlan::shared(grid.bandwidth())?.inverse(coeffs)
}

/// Inverse transform onto the cached grid of matching bandwidth.
pub fn synthesize(coeffs: &HarmonicCoeffs) -> Result<SphericalSignal> {
    ShtPlan::shared(coeffs.bandwidth())?.inverse(coeffs)
}

/// `S(k, l) = Σ_m |c(k,l,m)|²`, laid out `[k·B + l]`.
pub fn power_spectrum(coeffs: &HarmonicCoeffs) -> Vec<f64> {
    let b = coeffs.bandwidth();
    let mut out = vec![0.0; coeffs.channels() * b];
    for k in 0..coeffs.channels() {
        let ch = coeffs.channel(k);
        for l in 0..b {
            out[k * b + l] = ch[l * l..(l + 1) * (l + 1)]
                .iter()
                .map(|c| c.norm_sqr())
                .sum();
        }
    }
    out
}
