//! Wigner small-d matrices and the spectral rotation operator.
//!
//! `d^l_{mn}(β) = ⟨l m| e^{-iβ J_y} |l n⟩`, consistent with Condon–Shortley
//! harmonics, so that `D^l_{mn}(α, β, γ) = e^{-imα} d^l_{mn}(β) e^{-inγ}`
//! and `(Λ_R f)^l_m = Σ_n D^l_{mn}(R) f^l_n`.

use num_complex::Complex64;

use super::Rotation;
use crate::sht::{lm_index, HarmonicCoeffs};

/// Offset of the degree-`l` block when all blocks `(2l'+1)²` for `l' < l`
/// are stored back to back.
#[inline]
pub(crate) fn block_offset(l: usize) -> usize {
    (4 * l * l * l).saturating_sub(l) / 3
}

/// Total entries for all degrees below `bandwidth`.
#[inline]
pub(crate) fn block_len(bandwidth: usize) -> usize {
    block_offset(bandwidth)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `d^j_{mn}` at `j = max(|m|, |n|)`, where Wigner's sum has one term.
fn seed(j: i64, m: i64, n: i64, half_cos: f64, half_sin: f64, lnf: &[f64]) -> f64 {
    let lo = 0.max(n - m);
    let hi = (j + n).min(j - m);
    let mut acc = 0.0;
    for s in lo..=hi {
        let pc = 2 * j + n - m - 2 * s;
        let ps = m - n + 2 * s;
        let ln_coef = 0.5
            * (lnf[(j + m) as usize]
                + lnf[(j - m) as usize]
                + lnf[(j + n) as usize]
                + lnf[(j - n) as usize])
            - lnf[(j + n - s) as usize]
            - lnf[s as usize]
            - lnf[(m - n + s) as usize]
            - lnf[(j - m - s) as usize];
        let (Some(lc), Some(ls)) = (ln_pow(half_cos, pc), ln_pow(half_sin, ps)) else {
            continue;
        };
        let sgn = if (m - n + s).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        acc += sgn * (ln_coef + lc + ls).exp();
    }
    acc
}

/// `ln(x^p)`, or `None` when `x^p` is exactly zero.
#[inline]
fn ln_pow(x: f64, p: i64) -> Option<f64> {
    if p == 0 {
        Some(0.0)
    } else if x <= 0.0 {
        None
    } else {
        Some(p as f64 * x.ln())
    }
}

/// All `d^l_{mn}(β)` for `l < bandwidth`, block `l` at
/// `block_offset(l) + (m+l)(2l+1) + (n+l)`.
///
/// For each `(m, n)` the values come from the three-term recursion in `l`
/// starting at `l = max(|m|, |n|)`. Degrees are produced in order so each
/// block is written contiguously.
pub(crate) fn wigner_blocks(bandwidth: usize, beta: f64) -> Vec<f64> {
    let mut out = vec![0.0; block_len(bandwidth)];
    if bandwidth == 0 {
        return out;
    }
    let lnf = ln_factorials(2 * bandwidth + 2);
    let (hs, hc) = (0.5 * beta).sin_cos();
    let cb = beta.cos();
    let lmax = bandwidth - 1;
    let nb = bandwidth + 1;
    // root[l·nb + |m|] = sqrt(l² − m²) and its reciprocal.
    let mut root = vec![0.0; nb * nb];
    let mut inv_root = vec![0.0; nb * nb];
    for l in 0..nb {
        for m in 0..=l {
            let r = ((l * l - m * m) as f64).sqrt();
            root[l * nb + m] = r;
            inv_root[l * nb + m] = if r > 0.0 { 1.0 / r } else { 0.0 };
        }
    }

    // cur holds degree l − 1 and prev degree l − 2, indexed like a full
    // (2·lmax+1)² block. Entries not yet seeded stay zero.
    let w_all = 2 * lmax + 1;
    let mut cur = vec![0.0; w_all * w_all];
    let mut prev = vec![0.0; w_all * w_all];
    for l in 0..=lmax {
        let li = l as i64;
        let w = 2 * l + 1;
        let block = &mut out[block_offset(l)..block_offset(l) + w * w];
        // Recursion from degree L = l − 1.
        let lf = l as f64;
        let big = lf - 1.0;
        let pre0 = lf * (2.0 * lf - 1.0);
        let inv_a = if l >= 2 { 1.0 / (big * lf) } else { 0.0 };
        let inv_b = if l >= 2 {
            1.0 / (big * (2.0 * big + 1.0))
        } else {
            0.0
        };
        for m in -li..=li {
            let ma = m.unsigned_abs() as usize;
            let srow = (m + lmax as i64) as usize * w_all + lmax - l;
            let brow = (m + li) as usize * w;
            for n in -li..=li {
                let na = n.unsigned_abs() as usize;
                let si = srow + (n + li) as usize;
                let v = if ma.max(na) == l {
                    seed(li, m, n, hc, hs, &lnf)
                } else {
                    let pre = pre0 * inv_root[l * nb + ma] * inv_root[l * nb + na];
                    if l == 1 {
                        pre * cb * cur[si]
                    } else {
                        let a = cb - (m * n) as f64 * inv_a;
                        let b = root[(l - 1) * nb + ma] * root[(l - 1) * nb + na] * inv_b;
                        pre * (a * cur[si] - b * prev[si])
                    }
                };
                block[brow + (n + li) as usize] = v;
                prev[si] = v;
            }
        }
        std::mem::swap(&mut cur, &mut prev);
    }
    out
}

/// Wigner small-d matrix `(2l+1) × (2l+1)`, row-major with row `m + l` and
/// column `n + l`.
pub fn wigner_d(l: usize, beta: f64) -> Vec<f64> {
    let all = wigner_blocks(l + 1, beta);
    all[block_offset(l)..].to_vec()
}

/// Small-d values for a fixed set of colatitudes, shared read-only by the
/// correlation.
#[derive(Debug, Clone)]
pub struct WignerTables {
    bandwidth: usize,
    betas: Vec<f64>,
    data: Vec<f64>,
}

impl WignerTables {
    pub fn new(bandwidth: usize, betas: &[f64]) -> Self {
        let mut data = Vec::with_capacity(block_len(bandwidth) * betas.len());
        for &b in betas {
            data.extend(wigner_blocks(bandwidth, b));
        }
        Self {
            bandwidth,
            betas: betas.to_vec(),
            data,
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// All blocks for colatitude index `k`.
    pub fn blocks(&self, k: usize) -> &[f64] {
        let len = block_len(self.bandwidth);
        &self.data[k * len..(k + 1) * len]
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize, m: i64, n: i64) -> f64 {
        let li = l as i64;
        let w = 2 * li + 1;
        self.blocks(k)[block_offset(l) + ((m + li) * w + (n + li)) as usize]
    }
}

/// Applies `Λ_R` exactly in the spectral domain.
pub fn rotate_coeffs(coeffs: &HarmonicCoeffs, rotation: &Rotation) -> HarmonicCoeffs {
    if rotation.is_identity() {
        return coeffs.clone();
    }
    let b = coeffs.bandwidth();
    let e = rotation.euler();
    let d = wigner_blocks(b, e.beta);
    let lmax = b as i64 - 1;
    let phase = |k: i64, angle: f64| Complex64::from_polar(1.0, -(k as f64) * angle);
    let pa: Vec<Complex64> = (-lmax..=lmax).map(|m| phase(m, e.alpha)).collect();
    let pg: Vec<Complex64> = (-lmax..=lmax).map(|n| phase(n, e.gamma)).collect();
    let mut out = HarmonicCoeffs::zeros(b, coeffs.channels());
    let mut scratch = Vec::new();
    for k in 0..coeffs.channels() {
        let src = coeffs.channel(k);
        let dst = out.channel_mut(k);
        for l in 0..b {
            let li = l as i64;
            let w = 2 * l + 1;
            let block = &d[block_offset(l)..block_offset(l) + w * w];
            scratch.clear();
            scratch.extend((-li..=li).map(|n| src[lm_index(l, n)] * pg[(n + lmax) as usize]));
            for m in -li..=li {
                let row = &block[(m + li) as usize * w..(m + li + 1) as usize * w];
                let acc: Complex64 = row.iter().zip(&scratch).map(|(dv, s)| s * *dv).sum();
                dst[lm_index(l, m)] = acc * pa[(m + lmax) as usize];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_closed_forms() {
        assert_eq!(wigner_d(0, 0.8), vec![1.0]);
        let d1 = wigner_d(1, 0.0);
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((d1[r * 3 + c] - e).abs() < 1e-15);
            }
        }
        for beta in [0.1, 0.9, 2.0, 3.1] {
            let d = wigner_d(1, beta);
            assert!((d[4] - beta.cos()).abs() < 1e-14);
            // d^1_{1,0} = -sin β / √2
            assert!((d[2 * 3 + 1] + beta.sin() / 2f64.sqrt()).abs() < 1e-14);
            // d^1_{1,1} = (1 + cos β) / 2
            assert!((d[8] - 0.5 * (1.0 + beta.cos())).abs() < 1e-14);
        }
    }

    #[test]
    fn orthogonality_and_identity_at_zero() {
        let b = 24;
        for beta in [0.0, 0.05, 1.3, 3.0] {
            let t = WignerTables::new(b, &[beta]);
            let mut worst: f64 = 0.0;
            for l in 0..b {
                let li = l as i64;
                for m in -li..=li {
                    for mp in -li..=li {
                        let s: f64 = (-li..=li)
                            .map(|n| t.get(0, l, m, n) * t.get(0, l, mp, n))
                            .sum();
                        let e = if m == mp { 1.0 } else { 0.0 };
                        worst = worst.max((s - e).abs());
                    }
                }
            }
            assert!(worst < 1e-9, "beta {beta}: {worst}");
        }
        let t = WignerTables::new(10, &[0.0]);
        for l in 0..10 {
            let li = l as i64;
            for m in -li..=li {
                for n in -li..=li {
                    let e = if m == n { 1.0 } else { 0.0 };
                    assert!((t.get(0, l, m, n) - e).abs() < 1e-13);
                }
            }
        }
    }
}
