//! Spherical convolution `(x ⋆ h)(p) = ∫_{SO(3)} x(Rη) h(R⁻¹p) dR`.
//!
//! Integrating over the final z-rotation keeps only the filter's zonal
//! (`m = 0`) part, and the result is diagonal in the harmonic basis:
//! `(x ⋆ h)^l_m = c_l · x^l_m · h_l` with `c_l = 2π √(4π / (2l+1))` for the
//! Haar measure `dR = dα sin β dβ dγ` (total mass `8π²`).

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid_arg, Result};
use crate::sht::{forward_sht, HarmonicCoeffs, SphericalSignal};

/// Per-degree gain `c_l` of the spectral convolution.
#[inline]
pub fn degree_gain(l: usize) -> f64 {
    2.0 * PI * (4.0 * PI / (2 * l + 1) as f64).sqrt()
}

/// Zonal coefficients `h_l`, one row of `B` values per input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalFilter {
    bandwidth: usize,
    channels: usize,
    coeffs: Vec<f64>,
}

impl ZonalFilter {
    pub fn new(bandwidth: usize, channels: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != bandwidth * channels {
            return Err(invalid_arg(format!(
                "zonal filter needs {} values, got {}",
                bandwidth * channels,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(invalid_arg("zonal filter has non-finite values"));
        }
        Ok(Self {
            bandwidth,
            channels,
            coeffs,
        })
    }

    /// The filter for which convolution is the identity on bandlimited input.
    pub fn identity(bandwidth: usize, channels: usize) -> Self {
        let row: Vec<f64> = (0..bandwidth).map(|l| 1.0 / degree_gain(l)).collect();
        Self {
            bandwidth,
            channels,
            coeffs: row.repeat(channels),
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.bandwidth..(k + 1) * self.bandwidth]
    }
}

/// Keeps the `m = 0` harmonic content of a filter signal.
pub fn project_to_zonal(filter: &SphericalSignal) -> Result<ZonalFilter> {
    let c = forward_sht(filter)?;
    let b = c.bandwidth();
    let coeffs = (0..c.channels())
        .flat_map(|k| (0..b).map(move |l| (k, l)))
        .map(|(k, l)| c.get(k, l, 0).re)
        .collect();
    ZonalFilter::new(b, c.channels(), coeffs)
}

/// Channel-wise convolution: channel `k` of `x` with channel `k` of `h`.
pub fn s2_convolve(x: &HarmonicCoeffs, h: &ZonalFilter) -> Result<HarmonicCoeffs> {
    check(x, h)?;
    let b = x.bandwidth();
    let mut out = x.clone();
    for k in 0..x.channels() {
        let hk = h.channel(k);
        let dst = out.channel_mut(k);
        for l in 0..b {
            let g = degree_gain(l) * hk[l];
            for v in &mut dst[l * l..(l + 1) * (l + 1)] {
                *v *= g;
            }
        }
    }
    Ok(out)
}

/// Sums the channel-wise convolutions into a single output channel.
pub fn s2_convolve_multichannel(x: &HarmonicCoeffs, h: &ZonalFilter) -> Result<HarmonicCoeffs> {
    check(x, h)?;
    let b = x.bandwidth();
    let mut out = HarmonicCoeffs::zeros(b, 1);
    let dst = out.channel_mut(0);
    for k in 0..x.channels() {
        let src = x.channel(k);
        for (l, &w) in h.channel(k).iter().enumerate() {
            let g = degree_gain(l) * w;
            for idx in l * l..(l + 1) * (l + 1) {
                dst[idx] += src[idx] * g;
            }
        }
    }
    Ok(out)
}

fn check(x: &HarmonicCoeffs, h: &ZonalFilter) -> Result<()> {
    if x.bandwidth() != h.bandwidth() {
        return Err(invalid_arg(format!(
            "bandwidth mismatch: input {} vs filter {}",
            x.bandwidth(),
            h.bandwidth()
        )));
    }
    if x.channels() != h.channels() {
        return Err(invalid_arg(format!(
            "channel mismatch: input {} vs filter {}",
            x.channels(),
            h.channels()
        )));
    }
    Ok(())
}

/// `F` multichannel filters mapping `K_in` channels to `F` channels.
///
/// Weights are stored `[f][k][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    bandwidth: usize,
    in_channels: usize,
    out_channels: usize,
    weights: Vec<f64>,
}

impl FilterBank {
    pub fn new(
        bandwidth: usize,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != bandwidth * in_channels * out_channels {
            return Err(invalid_arg(format!(
                "filter bank {out_channels}×{in_channels}×{bandwidth} needs {} weights, got {}",
                bandwidth * in_channels * out_channels,
                weights.len()
            )));
        }
        Ok(Self {
            bandwidth,
            in_channels,
            out_channels,
            weights,
        })
    }

    /// Channel `k` maps to channel `k` unchanged.
    pub fn identity(bandwidth: usize, channels: usize) -> Self {
        let mut weights = vec![0.0; bandwidth * channels * channels];
        for k in 0..channels {
            for l in 0..bandwidth {
                weights[(k * channels + k) * bandwidth + l] = 1.0 / degree_gain(l);
            }
        }
        Self {
            bandwidth,
            in_channels: channels,
            out_channels: channels,
            weights,
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The multichannel filter producing output channel `f`.
    pub fn filter(&self, f: usize) -> ZonalFilter {
        let len = self.in_channels * self.bandwidth;
        ZonalFilter {
            bandwidth: self.bandwidth,
            channels: self.in_channels,
            coeffs: self.weights[f * len..(f + 1) * len].to_vec(),
        }
    }

    pub fn apply(&self, x: &HarmonicCoeffs) -> Result<HarmonicCoeffs> {
        if x.bandwidth() != self.bandwidth || x.channels() != self.in_channels {
            return Err(invalid_arg(format!(
                "filter bank expects {} channels at bandwidth {}, got {} at {}",
                self.in_channels,
                self.bandwidth,
                x.channels(),
                x.bandwidth()
            )));
        }
        let b = self.bandwidth;
        let gains: Vec<f64> = (0..b).map(degree_gain).collect();
        let mut out = HarmonicCoeffs::zeros(b, self.out_channels);
        out.data_mut()
            .par_chunks_exact_mut(b * b)
            .enumerate()
            .for_each(|(f, dst)| {
                for k in 0..self.in_channels {
                    let src = x.channel(k);
                    let w = &self.weights[(f * self.in_channels + k) * b..][..b];
                    for l in 0..b {
                        let g = gains[l] * w[l];
                        if g == 0.0 {
                            continue;
                        }
                        for idx in l * l..(l + 1) * (l + 1) {
                            dst[idx] += src[idx] * g;
                        }
                    }
                }
            });
        Ok(out)
    }
}
