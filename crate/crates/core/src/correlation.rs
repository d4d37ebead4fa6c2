//! SO(3) cross-correlation of spherical signals and rotation search.
//!
//! `G(R) = Σ_k ∫ f1_k(p) f2_k(Rᵀp) dp` is evaluated on a `(2B)³` ZYZ Euler
//! grid. In the harmonic basis it reads
//! `G(α, β, γ) = Σ_{l,m,n} Ĝ^l_{mn} d^l_{mn}(β) e^{imα} e^{inγ}` with
//! `Ĝ^l_{mn} = Σ_k f1_k(l,m) conj(f2_k(l,n))`, so each β row is one set of
//! small-d contractions followed by a 2D inverse FFT over `(α, γ)`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{invalid_arg, Result};
use crate::grid::{colatitude, SphericalGrid};
use crate::interp::sample_bicubic;
use crate::rotations::wigner::{block_offset, wigner_blocks};
use crate::rotations::{geodesic_distance, EulerZyz, Rotation, WignerTables};
use crate::sht::{forward_sht, synthesize, HarmonicCoeffs, SphericalSignal};

/// `G` sampled at `α_a = 2πa/n`, `β_b = π(2b+1)/(2n)`, `γ_c = 2πc/n` with
/// `n = 2B`, stored `[(a·n + b)·n + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVolume {
    bandwidth: usize,
    values: Vec<f64>,
}

impl CorrelationVolume {
    pub fn new(bandwidth: usize, values: Vec<f64>) -> Result<Self> {
        let n = 2 * bandwidth;
        if bandwidth == 0 || values.len() != n * n * n {
            return Err(invalid_arg(format!(
                "correlation volume at bandwidth {bandwidth} needs {} values, got {}",
                n * n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid_arg("correlation volume has non-finite values"));
        }
        Ok(Self { bandwidth, values })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Samples per Euler axis.
    pub fn resolution(&self) -> usize {
        2 * self.bandwidth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        let n = self.resolution();
        (a * n + b) * n + c
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[self.index(a, b, c)]
    }

    pub fn cell_of(&self, index: usize) -> (usize, usize, usize) {
        let n = self.resolution();
        (index / (n * n), (index / n) % n, index % n)
    }

    /// Euler angles of fractional grid coordinates.
    pub fn euler_at(&self, a: f64, b: f64, c: f64) -> EulerZyz {
        let n = self.resolution() as f64;
        EulerZyz {
            alpha: (TAU * a / n).rem_euclid(TAU),
            beta: (PI * (2.0 * b + 1.0) / (2.0 * n)).clamp(0.0, PI),
            gamma: (TAU * c / n).rem_euclid(TAU),
        }
    }

    pub fn rotation_at(&self, a: usize, b: usize, c: usize) -> Rotation {
        let e = self.euler_at(a as f64, b as f64, c as f64);
        Rotation::from_euler(e.alpha, e.beta, e.gamma)
    }

    /// Angular spacing of the α and γ axes.
    pub fn cell_width(&self) -> f64 {
        TAU / self.resolution() as f64
    }
}

/// Bicubic resampling onto a grid `factor` times finer.
pub fn upsample_bicubic(signal: &SphericalSignal, factor: usize) -> Result<SphericalSignal> {
    if factor == 0 {
        return Err(invalid_arg("upsampling factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(signal.clone());
    }
    let grid = SphericalGrid::shared(signal.bandwidth() * factor)?;
    let n_in = signal.resolution();
    let n_out = grid.resolution();
    let mut out = SphericalSignal::zeros(grid.clone(), signal.channels());
    out.values_mut()
        .par_chunks_exact_mut(n_out * n_out)
        .enumerate()
        .for_each(|(k, dst)| {
            let src = signal.channel(k);
            for i in 0..n_out {
                let t = grid.colatitudes()[i];
                for j in 0..n_out {
                    dst[i * n_out + j] = sample_bicubic(src, n_in, t, grid.azimuths()[j]);
                }
            }
        });
    Ok(out)
}

/// Exact resampling of the bandlimited part: zero-pad the harmonic
/// coefficients and synthesize on the finer grid.
pub fn upsample_spectral(signal: &SphericalSignal, factor: usize) -> Result<SphericalSignal> {
    if factor == 0 {
        return Err(invalid_arg("upsampling factor must be at least 1"));
    }
    let c = forward_sht(signal)?;
    synthesize(&c.with_bandwidth(signal.bandwidth() * factor))
}

/// Resampling method applied before correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Upsampler {
    #[default]
    Bicubic,
    Spectral,
}

impl Upsampler {
    pub fn apply(self, signal: &SphericalSignal, factor: usize) -> Result<SphericalSignal> {
        match self {
            Upsampler::Bicubic => upsample_bicubic(signal, factor),
            Upsampler::Spectral => upsample_spectral(signal, factor),
        }
    }
}

/// Largest bandwidth whose small-d tables are cached between calls
/// (about 22 MB at 32).
const MAX_CACHED_TABLE_BANDWIDTH: usize = 32;

fn shared_tables(bandwidth: usize) -> Option<Arc<WignerTables>> {
    if bandwidth > MAX_CACHED_TABLE_BANDWIDTH {
        return None;
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<WignerTables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .get(&bandwidth)
    {
        return Some(t.clone());
    }
    let n = 2 * bandwidth;
    let betas: Vec<f64> = (0..n).map(|b| colatitude(b, n)).collect();
    let t = Arc::new(WignerTables::new(bandwidth, &betas));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    Some(guard.entry(bandwidth).or_insert(t).clone())
}

/// Correlation of two coefficient sets of equal shape.
pub fn correlate_coeffs(a: &HarmonicCoeffs, b: &HarmonicCoeffs) -> Result<CorrelationVolume> {
    if a.bandwidth() != b.bandwidth() || a.channels() != b.channels() {
        return Err(invalid_arg(format!(
            "cannot correlate {}×B{} with {}×B{}",
            a.channels(),
            a.bandwidth(),
            b.channels(),
            b.bandwidth()
        )));
    }
    let bw = a.bandwidth();
    let n = 2 * bw;

    let mut ghat = vec![Complex64::new(0.0, 0.0); block_offset(bw)];
    for k in 0..a.channels() {
        let ca = a.channel(k);
        let cb = b.channel(k);
        for l in 0..bw {
            let w = 2 * l + 1;
            let off = block_offset(l);
            let row_a = &ca[l * l..(l + 1) * (l + 1)];
            let row_b = &cb[l * l..(l + 1) * (l + 1)];
            for (mi, am) in row_a.iter().enumerate() {
                for (ni, bn) in row_b.iter().enumerate() {
                    ghat[off + mi * w + ni] += am * bn.conj();
                }
            }
        }
    }

    let tables = shared_tables(bw);
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let slot = |k: i64| k.rem_euclid(n as i64) as usize;

    let planes: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|bi| {
            let owned;
            let d: &[f64] = match &tables {
                Some(t) => t.blocks(bi),
                None => {
                    owned = wigner_blocks(bw, colatitude(bi, n));
                    &owned
                }
            };
            let mut plane = vec![Complex64::new(0.0, 0.0); n * n];
            for l in 0..bw {
                let li = l as i64;
                let w = 2 * l + 1;
                let off = block_offset(l);
                for m in -li..=li {
                    let base = off + ((m + li) as usize) * w;
                    let g = &ghat[base..base + w];
                    let dv = &d[base..base + w];
                    let row = &mut plane[slot(m) * n..(slot(m) + 1) * n];
                    // Negative orders wrap to the tail of the row.
                    let (head, tail) = row.split_at_mut(n - l);
                    for ((o, gv), dd) in tail.iter_mut().zip(&g[..l]).zip(&dv[..l]) {
                        *o += gv * dd;
                    }
                    for ((o, gv), dd) in head[..=l].iter_mut().zip(&g[l..]).zip(&dv[l..]) {
                        *o += gv * dd;
                    }
                }
            }
            // Inverse DFT over γ (rows), then over α (columns).
            for row in plane.chunks_exact_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for a in 0..n {
                    col[a] = plane[a * n + c];
                }
                fft.process(&mut col);
                for a in 0..n {
                    plane[a * n + c] = col[a];
                }
            }
            plane.into_iter().map(|z| z.re).collect()
        })
        .collect();

    let mut values = vec![0.0; n * n * n];
    for (bi, plane) in planes.iter().enumerate() {
        for a in 0..n {
            for c in 0..n {
                values[(a * n + bi) * n + c] = plane[a * n + c];
            }
        }
    }
    CorrelationVolume::new(bw, values)
}

/// `G(R) = Σ_k ∫ f1_k(p) f2_k(Rᵀp) dp` on the Euler grid of the signals'
/// bandwidth. `G` peaks where `Λ_R f2` best matches `f1`.
pub fn correlate(f1: &SphericalSignal, f2: &SphericalSignal) -> Result<CorrelationVolume> {
    if f1.bandwidth() != f2.bandwidth() {
        return Err(invalid_arg(format!(
            "grid mismatch: bandwidth {} vs {}",
            f1.bandwidth(),
            f2.bandwidth()
        )));
    }
    if f1.channels() != f2.channels() {
        return Err(invalid_arg(format!(
            "channel mismatch: {} vs {}",
            f1.channels(),
            f2.channels()
        )));
    }
    correlate_coeffs(&forward_sht(f1)?, &forward_sht(f2)?)
}

/// The maximal cell of a correlation volume.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPeak {
    /// Grid cell `(a, b, c)`.
    pub cell: (usize, usize, usize),
    pub euler: EulerZyz,
    pub rotation: Rotation,
    pub value: f64,
    /// Gap between the peak and the strongest local maximum far from it, as
    /// a fraction of the value range; 1 when there is none.
    pub margin: f64,
    /// The volume is flat, or a distant rival is within tolerance of the
    /// peak (typical for symmetric shapes).
    pub degenerate: bool,
}

/// Relative height (fraction of the value range) within which a distant
/// local maximum counts as a rival peak.
const RIVAL_TOLERANCE: f64 = 1e-3;
/// Rivals closer than this many α-cells to the peak are the same peak.
const RIVAL_MIN_CELLS: f64 = 2.5;

/// Maximal cell; ties go to the smallest linear index.
pub fn argmax_rotation(volume: &CorrelationVolume) -> CorrelationPeak {
    let values = volume.values();
    let mut best = 0;
    let mut lo = values[0];
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
        lo = lo.min(v);
    }
    let hi = values[best];
    let cell = volume.cell_of(best);
    let rotation = volume.rotation_at(cell.0, cell.1, cell.2);
    let flat = hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
    let margin = if flat {
        0.0
    } else {
        (hi - strongest_rival(volume, best, &rotation).unwrap_or(lo)) / (hi - lo)
    };
    CorrelationPeak {
        cell,
        euler: rotation.euler(),
        rotation,
        value: hi,
        margin,
        degenerate: margin < RIVAL_TOLERANCE,
    }
}

fn is_local_max(volume: &CorrelationVolume, a: usize, b: usize, c: usize) -> bool {
    let n = volume.resolution() as i64;
    let v = volume.get(a, b, c);
    for da in -1..=1i64 {
        for db in -1..=1i64 {
            let bb = b as i64 + db;
            if !(0..n).contains(&bb) {
                continue;
            }
            for dc in -1..=1i64 {
                if da == 0 && db == 0 && dc == 0 {
                    continue;
                }
                let aa = (a as i64 + da).rem_euclid(n) as usize;
                let cc = (c as i64 + dc).rem_euclid(n) as usize;
                if volume.get(aa, bb as usize, cc) > v {
                    return false;
                }
            }
        }
    }
    true
}

fn strongest_rival(volume: &CorrelationVolume, best: usize, peak: &Rotation) -> Option<f64> {
    let min_dist = RIVAL_MIN_CELLS * volume.cell_width();
    let mut rival: Option<f64> = None;
    for (i, &v) in volume.values().iter().enumerate() {
        if i == best || rival.is_some_and(|r| v <= r) {
            continue;
        }
        let (a, b, c) = volume.cell_of(i);
        if is_local_max(volume, a, b, c)
            && geodesic_distance(&volume.rotation_at(a, b, c), peak).unwrap_or(PI) > min_dist
        {
            rival = Some(v);
        }
    }
    rival
}

/// Separable three-point parabola fit around the peak; each axis moves by
/// at most half a cell. Returns refined Euler angles.
pub fn refine_peak(volume: &CorrelationVolume, peak: &CorrelationPeak) -> EulerZyz {
    let n = volume.resolution();
    let (a, b, c) = peak.cell;
    let g0 = volume.get(a, b, c);
    let offset = |gm: f64, gp: f64| {
        let denom = gm - 2.0 * g0 + gp;
        if denom >= 0.0 {
            0.0
        } else {
            (0.5 * (gm - gp) / denom).clamp(-0.5, 0.5)
        }
    };
    let wrap = |i: usize, d: i64| (i as i64 + d).rem_euclid(n as i64) as usize;
    let da = offset(volume.get(wrap(a, -1), b, c), volume.get(wrap(a, 1), b, c));
    let dc = offset(volume.get(a, b, wrap(c, -1)), volume.get(a, b, wrap(c, 1)));
    // Past either pole of β the neighbour is the cell (α+π, β, γ+π).
    let mirror = || volume.get(wrap(a, n as i64 / 2), b, wrap(c, n as i64 / 2));
    let gm = if b > 0 {
        volume.get(a, b - 1, c)
    } else {
        mirror()
    };
    let gp = if b + 1 < n {
        volume.get(a, b + 1, c)
    } else {
        mirror()
    };
    let db = offset(gm, gp);
    volume.euler_at(a as f64 + da, b as f64 + db, c as f64 + dc)
}

/// Options for [`estimate_relative_pose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    pub upsample_factor: usize,
    pub upsampler: Upsampler,
    pub refine: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            upsample_factor: 4,
            upsampler: Upsampler::Bicubic,
            refine: true,
        }
    }
}

/// Result of an alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    /// Rotation `R` with `f2 ≈ Λ_R f1`.
    pub rotation: Rotation,
    /// Peak of `G`, which sits at `Rᵀ` before refinement.
    pub peak: CorrelationPeak,
    pub degenerate: bool,
}

/// Estimates `R` such that `f2 ≈ Λ_R f1`: upsample, correlate, take the
/// argmax and optionally refine it.
pub fn estimate_relative_pose(
    f1: &SphericalSignal,
    f2: &SphericalSignal,
    options: &AlignOptions,
) -> Result<PoseEstimate> {
    if f1.bandwidth() != f2.bandwidth() || f1.channels() != f2.channels() {
        return Err(invalid_arg(format!(
            "incompatible signals: {}×{} vs {}×{}",
            f1.channels(),
            f1.resolution(),
            f2.channels(),
            f2.resolution()
        )));
    }
    let up1 = options.upsampler.apply(f1, options.upsample_factor)?;
    let up2 = options.upsampler.apply(f2, options.upsample_factor)?;
    let volume = correlate(&up1, &up2)?;
    let peak = argmax_rotation(&volume);
    let g_peak = if options.refine && !peak.degenerate {
        let e = refine_peak(&volume, &peak);
        Rotation::from_euler(e.alpha, e.beta, e.gamma)
    } else {
        peak.rotation
    };
    Ok(PoseEstimate {
        rotation: g_peak.transpose(),
        degenerate: peak.degenerate,
        peak,
    })
}

/// Aligns a spherical map (e.g. a learned embedding) to a mesh's ray-cast
/// signal or features of it. Returns `R` with `mesh_map ≈ Λ_R map`.
pub fn align_map_to_mesh(
    map: &SphericalSignal,
    mesh_map: &SphericalSignal,
    options: &AlignOptions,
) -> Result<PoseEstimate> {
    estimate_relative_pose(map, mesh_map, options)
}

/// Aligns the ray-cast signals of two meshes.
pub fn align_mesh_pair(
    first: &SphericalSignal,
    second: &SphericalSignal,
    options: &AlignOptions,
) -> Result<PoseEstimate> {
    estimate_relative_pose(first, second, options)
}
