//! Mesh denoising with guided normal filtering and a volumetric CNN.

pub mod error;
pub mod gnf;
pub mod mesh;
pub mod metrics;
pub mod noise;
pub mod par;
pub mod pipeline;
pub mod voxel;

pub use error::{Error, Result};
pub use gnf::{gnf_denoise, GnfOutcome, GnfParams, NormalField};
pub use mesh::{
    build_ring_patch, compute_scales, load_mesh, save_mesh, MeshFormat, MeshScales, Patch,
    Precision, TriangleMesh, Vec3,
};
pub use metrics::{evaluate, mean_angular_error, vertex_l2_error, AngleStat, MetricReport};
pub use noise::{add_noise, NoiseDirection, NoiseKind, NoiseSpec};
pub use pipeline::{
    denoise_learned, train_stages, LearnedParams, ModelSet, PipelineConfig, PresetTable,
};
pub use voxel::{
    compute_normalization, triangle_box_overlap, voxelize_face, voxelize_mesh,
    NormalizationTransform, VolumetricGrid, VoxelParams, Voxelizer,
};
