//! Forward-only residual spherical CNN with named embedding taps.
//!
//! Feature maps live in the spatial domain. Convolutions go through the
//! harmonic basis with zonal filter banks; ReLU and affine normalization act
//! pointwise; pooling truncates the bandlimit and resamples at half
//! resolution.

mod format;
mod init;

use rayon::prelude::*;

use crate::error::{invalid_input, Error, Result};
use crate::rotations::{rotate_coeffs, Rotation};
use crate::s2conv::FilterBank;
use crate::sht::{HarmonicCoeffs, ShtPlan, SphericalSignal};

pub use format::{load_weights, read_weights, save_weights, write_weights, MAGIC, VERSION};
pub use init::{Architecture, POSE_TAP, SYNTHESIS_TAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    SpectralConv,
    PointwiseRelu,
    AffineNorm,
    SpectralPool,
    ResidualBottleneck,
    GlobalAvgPool,
    Dense,
}

impl LayerKind {
    pub fn code(self) -> u32 {
        match self {
            LayerKind::SpectralConv => 0,
            LayerKind::PointwiseRelu => 1,
            LayerKind::AffineNorm => 2,
            LayerKind::SpectralPool => 3,
            LayerKind::ResidualBottleneck => 4,
            LayerKind::GlobalAvgPool => 5,
            LayerKind::Dense => 6,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => LayerKind::SpectralConv,
            1 => LayerKind::PointwiseRelu,
            2 => LayerKind::AffineNorm,
            3 => LayerKind::SpectralPool,
            4 => LayerKind::ResidualBottleneck,
            5 => LayerKind::GlobalAvgPool,
            6 => LayerKind::Dense,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::SpectralConv => "spectral-conv",
            LayerKind::PointwiseRelu => "pointwise-relu",
            LayerKind::AffineNorm => "affine-norm",
            LayerKind::SpectralPool => "spectral-pool",
            LayerKind::ResidualBottleneck => "residual-bottleneck",
            LayerKind::GlobalAvgPool => "global-avg-pool",
            LayerKind::Dense => "dense",
        }
    }
}

/// Shape of one layer. Vector-valued layers (after global pooling) use
/// resolution 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_resolution: usize,
    pub out_resolution: usize,
    /// Bottleneck width; zero for other kinds.
    pub mid_channels: usize,
}

impl LayerSpec {
    fn shape_err(&self, msg: impl std::fmt::Display) -> Error {
        Error::ShapeMismatch(format!("{} layer: {msg}", self.kind.name()))
    }

    fn check(&self) -> Result<()> {
        use LayerKind::*;
        let spherical = !matches!(self.kind, Dense);
        if spherical && !(self.in_resolution >= 2 && self.in_resolution.is_power_of_two()) {
            return Err(self.shape_err(format!(
                "input resolution {} is not a power of two",
                self.in_resolution
            )));
        }
        let expected_res = match self.kind {
            SpectralPool => self.in_resolution / 2,
            GlobalAvgPool | Dense => 0,
            _ => self.in_resolution,
        };
        if self.out_resolution != expected_res {
            return Err(self.shape_err(format!(
                "output resolution {} should be {expected_res}",
                self.out_resolution
            )));
        }
        if self.kind == Dense && self.in_resolution != 0 {
            return Err(self.shape_err("dense layers take pooled vectors"));
        }
        let keeps_channels = matches!(
            self.kind,
            PointwiseRelu | AffineNorm | SpectralPool | GlobalAvgPool
        );
        if keeps_channels && self.in_channels != self.out_channels {
            return Err(self.shape_err("channel count must be preserved"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(self.shape_err("zero channels"));
        }
        if (self.kind == ResidualBottleneck) != (self.mid_channels > 0) {
            return Err(self.shape_err("mid channels are set exactly for bottlenecks"));
        }
        Ok(())
    }

    /// Parameter tensor shapes in storage order.
    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let b = self.in_resolution / 2;
        let (i, o, m) = (self.in_channels, self.out_channels, self.mid_channels);
        match self.kind {
            LayerKind::SpectralConv => vec![vec![o, i, b]],
            LayerKind::AffineNorm => vec![vec![i], vec![i]],
            LayerKind::ResidualBottleneck => {
                let mut s = vec![
                    vec![i],
                    vec![i],
                    vec![m, i, b],
                    vec![m],
                    vec![m],
                    vec![m, m, b],
                    vec![m],
                    vec![m],
                    vec![o, m, b],
                ];
                if i != o {
                    s.push(vec![o, i, b]);
                }
                s
            }
            LayerKind::Dense => vec![vec![o, i], vec![o]],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "tensor {dims:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub tensors: Vec<Tensor>,
}

/// A named intermediate feature map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tap {
    pub name: String,
    /// For bottlenecks the tap is the activated mid feature, otherwise the
    /// layer output.
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    input_resolution: usize,
    input_channels: usize,
    layers: Vec<Layer>,
    taps: Vec<Tap>,
}

/// Result of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Features(SphericalSignal),
    Scores(Vec<f64>),
}

impl Output {
    pub fn features(self) -> Option<SphericalSignal> {
        match self {
            Output::Features(s) => Some(s),
            Output::Scores(_) => None,
        }
    }

    pub fn scores(self) -> Option<Vec<f64>> {
        match self {
            Output::Scores(s) => Some(s),
            Output::Features(_) => None,
        }
    }
}

impl NetworkWeights {
    /// Validates the layer chain, tensor shapes and taps.
    pub fn new(
        input_resolution: usize,
        input_channels: usize,
        layers: Vec<Layer>,
        taps: Vec<Tap>,
    ) -> Result<Self> {
        let (mut res, mut ch) = (input_resolution, input_channels);
        for (idx, layer) in layers.iter().enumerate() {
            let s = &layer.spec;
            s.check()?;
            if s.in_resolution != res || s.in_channels != ch {
                return Err(Error::ShapeMismatch(format!(
                    "layer {idx} expects {}×{}×{}, previous output is {res}×{res}×{ch}",
                    s.in_resolution, s.in_resolution, s.in_channels
                )));
            }
            let want = s.tensor_shapes();
            let got: Vec<&Vec<usize>> = layer.tensors.iter().map(|t| &t.dims).collect();
            if want.len() != got.len() || want.iter().zip(&got).any(|(a, b)| a != *b) {
                return Err(Error::ShapeMismatch(format!(
                    "layer {idx} ({}) needs tensors {want:?}, got {got:?}",
                    s.kind.name()
                )));
            }
            res = s.out_resolution;
            ch = s.out_channels;
        }
        for tap in &taps {
            let Some(layer) = layers.get(tap.layer) else {
                return Err(invalid_input(format!(
                    "tap {:?} references missing layer {}",
                    tap.name, tap.layer
                )));
            };
            if layer.spec.out_resolution == 0 {
                return Err(invalid_input(format!(
                    "tap {:?} references a non-spherical layer",
                    tap.name
                )));
            }
        }
        Ok(Self {
            input_resolution,
            input_channels,
            layers,
            taps,
        })
    }

    pub fn input_resolution(&self) -> usize {
        self.input_resolution
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    fn tap(&self, name: &str) -> Result<&Tap> {
        self.taps
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| invalid_input(format!("unknown tap {name:?}")))
    }

    /// `(resolution, channels)` of a tap's feature map.
    pub fn tap_shape(&self, name: &str) -> Result<(usize, usize)> {
        let s = &self.layers[self.tap(name)?.layer].spec;
        Ok(match s.kind {
            LayerKind::ResidualBottleneck => (s.in_resolution, s.mid_channels),
            _ => (s.out_resolution, s.out_channels),
        })
    }

    /// Runs the network, stopping at `tap` if given.
    pub fn forward(&self, x: &SphericalSignal, tap: Option<&str>) -> Result<Output> {
        if x.resolution() != self.input_resolution || x.channels() != self.input_channels {
            return Err(invalid_input(format!(
                "network expects {r}×{r}×{c} input, got {n}×{n}×{k}",
                r = self.input_resolution,
                c = self.input_channels,
                n = x.resolution(),
                k = x.channels()
            )));
        }
        let stop = tap.map(|t| self.tap(t)).transpose()?.map(|t| t.layer);
        let mut value = Value::Map(x.clone());
        for (idx, layer) in self.layers.iter().enumerate() {
            let at_tap = stop == Some(idx);
            value = layer.apply(value, at_tap)?;
            if at_tap {
                break;
            }
        }
        Ok(match value {
            Value::Map(s) => Output::Features(s),
            Value::Vector(v) => Output::Scores(v),
        })
    }

    /// Independent forward passes in parallel.
    pub fn forward_batch(&self, xs: &[SphericalSignal], tap: Option<&str>) -> Vec<Result<Output>> {
        xs.par_iter().map(|x| self.forward(x, tap)).collect()
    }
}

/// Runs the network, stopping at `tap` if given.
pub fn forward(net: &NetworkWeights, x: &SphericalSignal, tap: Option<&str>) -> Result<Output> {
    net.forward(x, tap)
}

enum Value {
    Map(SphericalSignal),
    Vector(Vec<f64>),
}

impl Value {
    fn map(self) -> SphericalSignal {
        match self {
            Value::Map(s) => s,
            Value::Vector(_) => unreachable!("layer chain validated at construction"),
        }
    }
}

impl Layer {
    fn apply(&self, x: Value, want_tap: bool) -> Result<Value> {
        let t = &self.tensors;
        Ok(match self.spec.kind {
            LayerKind::SpectralConv => Value::Map(conv(&x.map(), &t[0])?),
            LayerKind::PointwiseRelu => {
                let mut s = x.map();
                relu(&mut s);
                Value::Map(s)
            }
            LayerKind::AffineNorm => {
                let mut s = x.map();
                affine(&mut s, &t[0], &t[1]);
                Value::Map(s)
            }
            LayerKind::SpectralPool => Value::Map(pool(&x.map())?),
            LayerKind::ResidualBottleneck => Value::Map(bottleneck(&x.map(), t, want_tap)?),
            LayerKind::GlobalAvgPool => {
                let s = x.map();
                let grid = s.grid().clone();
                let area = 4.0 * std::f64::consts::PI;
                Value::Vector(
                    (0..s.channels())
                        .map(|k| grid.integrate(s.channel(k)) / area)
                        .collect(),
                )
            }
            LayerKind::Dense => {
                let Value::Vector(v) = x else {
                    unreachable!("layer chain validated at construction")
                };
                let (w, b) = (&t[0], &t[1]);
                let n_in = w.dims[1];
                Value::Vector(
                    (0..w.dims[0])
                        .map(|o| {
                            let row = &w.data[o * n_in..(o + 1) * n_in];
                            b.data[o] + row.iter().zip(&v).map(|(a, c)| a * c).sum::<f64>()
                        })
                        .collect(),
                )
            }
        })
    }
}

fn conv(x: &SphericalSignal, w: &Tensor) -> Result<SphericalSignal> {
    let plan = ShtPlan::shared(x.bandwidth())?;
    let bank = FilterBank::new(w.dims[2], w.dims[1], w.dims[0], w.data.clone())?;
    plan.inverse(&bank.apply(&plan.forward(x)?)?)
}

fn relu(s: &mut SphericalSignal) {
    for v in s.values_mut() {
        *v = v.max(0.0);
    }
}

fn affine(s: &mut SphericalSignal, scale: &Tensor, offset: &Tensor) {
    for k in 0..s.channels() {
        let (a, b) = (scale.data[k], offset.data[k]);
        for v in s.channel_mut(k) {
            *v = a * *v + b;
        }
    }
}

fn pool(x: &SphericalSignal) -> Result<SphericalSignal> {
    let b = x.bandwidth();
    let c = ShtPlan::shared(b)?.forward(x)?;
    ShtPlan::shared(b / 2)?.inverse(&c.with_bandwidth(b / 2))
}

/// Pre-activation bottleneck. Returns the activated mid feature when
/// `want_tap` is set, otherwise the block output.
fn bottleneck(x: &SphericalSignal, t: &[Tensor], want_tap: bool) -> Result<SphericalSignal> {
    let mut a = x.clone();
    affine(&mut a, &t[0], &t[1]);
    relu(&mut a);
    let mut h = conv(&a, &t[2])?;
    affine(&mut h, &t[3], &t[4]);
    relu(&mut h);
    let mut m = conv(&h, &t[5])?;
    affine(&mut m, &t[6], &t[7]);
    relu(&mut m);
    if want_tap {
        return Ok(m);
    }
    let mut y = conv(&m, &t[8])?;
    let shortcut = match t.get(9) {
        Some(w) => conv(&a, w)?,
        None => x.clone(),
    };
    for (v, s) in y.values_mut().iter_mut().zip(shortcut.values()) {
        *v += s;
    }
    Ok(y)
}

/// How the input rotation is applied when measuring equivariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputRotation {
    /// Exact rotation of the input's bandlimited part; both passes see the
    /// projected input.
    #[default]
    Spectral,
    /// Bicubic resampling of the raw input.
    Spatial,
}

/// `‖s(Λ_R x) − Λ_R s(x)‖ / ‖Λ_R s(x)‖` at `tap`, with `Λ_R` applied
/// exactly to the tap's harmonic coefficients.
pub fn equivariance_error(
    net: &NetworkWeights,
    x: &SphericalSignal,
    rotation: &Rotation,
    tap: &str,
) -> Result<f64> {
    equivariance_error_with(net, x, rotation, tap, InputRotation::Spectral)
}

pub fn equivariance_error_with(
    net: &NetworkWeights,
    x: &SphericalSignal,
    rotation: &Rotation,
    tap: &str,
    input: InputRotation,
) -> Result<f64> {
    let (base, rotated) = match input {
        InputRotation::Spectral => {
            let plan = ShtPlan::shared(x.bandwidth())?;
            let c = plan.forward(x)?;
            (
                plan.inverse(&c)?,
                plan.inverse(&rotate_coeffs(&c, rotation))?,
            )
        }
        InputRotation::Spatial => (x.clone(), crate::rotations::rotate_spatial(x, rotation)),
    };
    let expected = rotate_coeffs(&tap_coeffs(net, &base, tap)?, rotation);
    let got = tap_coeffs(net, &rotated, tap)?;
    let norm = expected.energy().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "tap {tap:?} output is zero"
        )));
    }
    let diff: f64 = got
        .data()
        .iter()
        .zip(expected.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(diff.sqrt() / norm)
}

fn tap_coeffs(net: &NetworkWeights, x: &SphericalSignal, tap: &str) -> Result<HarmonicCoeffs> {
    let f = net
        .forward(x, Some(tap))?
        .features()
        .expect("taps are spherical");
    ShtPlan::shared(f.bandwidth())?.forward(&f)
}
