//! Spherical signal processing and SO(3) alignment.
//!
//! The building blocks are an equiangular [`SphericalGrid`], exact harmonic
//! transforms ([`sht`]), Wigner-D rotations ([`rotations`]), zonal spherical
//! convolution ([`s2conv`]) and FFT-based SO(3) cross-correlation
//! ([`correlation`]). On top of those sit mesh ray-casting ([`mesh`]), a
//! forward-only spherical CNN ([`cnn`]) and pose metrics ([`metrics`]).

pub mod cnn;
pub mod correlation;
pub mod error;
pub mod grid;
mod interp;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod rotations;
pub mod s2conv;
pub mod sht;

pub use cnn::{
    equivariance_error, forward, load_weights, save_weights, Architecture, NetworkWeights,
};
pub use correlation::{
    align_map_to_mesh, align_mesh_pair, argmax_rotation, correlate, estimate_relative_pose,
    upsample_bicubic, upsample_spectral, AlignOptions, CorrelationPeak, CorrelationVolume,
    PoseEstimate, Upsampler,
};
pub use error::{Error, Result};
pub use grid::{Direction, SphericalGrid};
pub use io::{load_signal, save_signal};
pub use mesh::{
    anisotropic_scale, load_mesh, normalize_mesh, ray_cast, rotate_mesh, MeshFormat, TriMesh,
};
pub use metrics::{
    embedding_loss, huber, pose_stats, symmetry_error, ChannelReduction, PoseErrorStats,
};
pub use rotations::{
    geodesic_distance, random_rotation, relative_pose_error, rotate_coeffs, rotate_spatial,
    EulerZyz, Rotation, WignerTables,
};
pub use s2conv::{
    project_to_zonal, s2_convolve, s2_convolve_multichannel, FilterBank, ZonalFilter,
};
pub use sht::{forward_sht, inverse_sht, power_spectrum, HarmonicCoeffs, ShtPlan, SphericalSignal};
