//! Learned normal filtering: face categories, training data, staged
//! training and the iterative denoising loop.

pub mod category;
pub mod config;
pub mod dataset;
pub mod learned;
pub mod stage;
pub mod train;

pub use category::{categorize_face, max_patch_angle, FaceCategory};
pub use config::{head_index, ModelPreset, PipelineConfig, PresetTable, DEFAULT_MU_G_LIST};
pub use dataset::{
    build_training_set, for_each_training_chunk, make_targets, sample_faces, write_dataset,
    DataOptions, Dataset, DatasetWriter, Provenance, SamplePlan, TargetFilter, TrainingSet,
    TrainingTuple, TupleMaker, TupleSource,
};
pub use learned::{
    advance_training_meshes, denoise_learned, network_filter_normals, train_stages, LearnedParams,
    ModelSet, StageOptions, StageReport,
};
pub use stage::{select_cnn, StagePlan, CNN_COUNT, STAGE_MU_G, STAGE_NV};
pub use train::{init_weights, network_spec, train_network, TrainOptions, TrainReport};
