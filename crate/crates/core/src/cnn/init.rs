//! Reference topologies with deterministic random parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Layer, LayerKind, LayerSpec, NetworkWeights, Tap, Tensor};
use crate::error::Result;
use crate::s2conv::degree_gain;

pub const POSE_TAP: &str = "pose";
pub const SYNTHESIS_TAP: &str = "synthesis";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Ten weight layers on 64×64 inputs: an input convolution, eight
    /// residual bottlenecks over four resolutions and a 40-way dense readout.
    /// The synthesis tap (32×32×16) and pose tap (16×16×32) sit inside the
    /// second bottleneck at 32 and 16.
    Full,
    /// Convolutions and spectral pooling only, with the same tap shapes.
    /// Exactly equivariant up to rounding.
    Linear,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Full => "full",
            Architecture::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Architecture::Full),
            "linear" => Some(Architecture::Linear),
            _ => None,
        }
    }

    pub fn specs(self) -> (Vec<LayerSpec>, Vec<Tap>) {
        let mut b = Builder {
            res: 64,
            ch: 1,
            specs: Vec::new(),
            taps: Vec::new(),
        };
        match self {
            Architecture::Full => {
                b.conv(16);
                for (out, pool_after, tap) in [
                    (32, true, None),
                    (64, true, Some(SYNTHESIS_TAP)),
                    (128, true, Some(POSE_TAP)),
                    (256, false, None),
                ] {
                    b.bottleneck(out);
                    b.bottleneck(out);
                    if let Some(name) = tap {
                        b.tap(name);
                    }
                    if pool_after {
                        b.simple(LayerKind::SpectralPool);
                    }
                }
                b.simple(LayerKind::AffineNorm);
                b.simple(LayerKind::PointwiseRelu);
            }
            Architecture::Linear => {
                b.conv(8);
                b.simple(LayerKind::SpectralPool);
                b.conv(16);
                b.tap(SYNTHESIS_TAP);
                b.simple(LayerKind::SpectralPool);
                b.conv(32);
                b.tap(POSE_TAP);
            }
        }
        b.simple(LayerKind::GlobalAvgPool);
        b.dense(40);
        (b.specs, b.taps)
    }

    /// Random parameters from `seed`, rounded to `f32` so that they survive
    /// serialization exactly.
    pub fn random(self, seed: u64) -> Result<NetworkWeights> {
        let (specs, taps) = self.specs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .into_iter()
            .map(|spec| {
                let tensors = spec
                    .tensor_shapes()
                    .into_iter()
                    .enumerate()
                    .map(|(i, dims)| random_tensor(&mut rng, &spec, i, dims))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Layer { spec, tensors })
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkWeights::new(64, 1, layers, taps)
    }
}

struct Builder {
    res: usize,
    ch: usize,
    specs: Vec<LayerSpec>,
    taps: Vec<Tap>,
}

impl Builder {
    fn push(&mut self, kind: LayerKind, out_ch: usize, out_res: usize, mid: usize) {
        self.specs.push(LayerSpec {
            kind,
            in_channels: self.ch,
            out_channels: out_ch,
            in_resolution: self.res,
            out_resolution: out_res,
            mid_channels: mid,
        });
        self.ch = out_ch;
        self.res = out_res;
    }

    fn conv(&mut self, out: usize) {
        self.push(LayerKind::SpectralConv, out, self.res, 0);
    }

    fn bottleneck(&mut self, out: usize) {
        self.push(LayerKind::ResidualBottleneck, out, self.res, out / 4);
    }

    fn simple(&mut self, kind: LayerKind) {
        let res = match kind {
            LayerKind::SpectralPool => self.res / 2,
            LayerKind::GlobalAvgPool => 0,
            _ => self.res,
        };
        self.push(kind, self.ch, res, 0);
    }

    fn dense(&mut self, out: usize) {
        self.push(LayerKind::Dense, out, 0, 0);
    }

    fn tap(&mut self, name: &str) {
        self.taps.push(Tap {
            name: name.to_string(),
            layer: self.specs.len() - 1,
        });
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn random_tensor(
    rng: &mut ChaCha8Rng,
    spec: &LayerSpec,
    index: usize,
    dims: Vec<usize>,
) -> Result<Tensor> {
    let len: usize = dims.iter().product();
    let data: Vec<f64> = match (spec.kind, dims.len()) {
        // Zonal filter banks [out][in][l]: unit gain per degree on average,
        // with a He-style factor for the following ReLU.
        (_, 3) => {
            let (k_in, b) = (dims[1], dims[2]);
            let std = (2.0 / k_in as f64).sqrt();
            let mut out = Vec::with_capacity(len);
            for _ in 0..dims[0] * k_in {
                let h = smooth_spectrum(rng, b);
                out.extend(h.iter().enumerate().map(|(l, v)| std * v / degree_gain(l)));
            }
            out
        }
        (LayerKind::Dense, 2) => {
            let std = 1.0 / (dims[1] as f64).sqrt();
            (0..len).map(|_| std * normal(rng)).collect()
        }
        (LayerKind::Dense, _) => vec![0.0; len],
        // Norm scales; the tensor after each is its offset.
        _ if matches!(index, 0 | 3 | 6) => (0..len).map(|_| 1.0 + 0.1 * normal(rng)).collect(),
        _ => (0..len).map(|_| 0.1 * normal(rng)).collect(),
    };
    Tensor::new(dims, data.into_iter().map(|v| v as f32 as f64).collect())
}

/// Filter spectrum drawn at a few anchor degrees and linearly interpolated,
/// which keeps the filter spatially localized.
fn smooth_spectrum(rng: &mut ChaCha8Rng, bandwidth: usize) -> Vec<f64> {
    let anchors = ANCHORS.min(bandwidth);
    let values: Vec<f64> = (0..anchors).map(|_| normal(rng)).collect();
    if anchors == 1 {
        return vec![values[0]; bandwidth];
    }
    let step = (bandwidth - 1) as f64 / (anchors - 1) as f64;
    (0..bandwidth)
        .map(|l| {
            let x = l as f64 / step;
            let i = (x.floor() as usize).min(anchors - 2);
            let f = x - i as f64;
            values[i] * (1.0 - f) + values[i + 1] * f
        })
        .collect()
}

const ANCHORS: usize = 8;
