//! The learned denoising loop and the staged training driver.

use std::fs;
use std::path::{Path, PathBuf};

use normalnet_nn::{load_weights, save_weights, Network, NetworkSpec, NetworkWeights, Tensor};

use super::config::head_index;
use super::dataset::{for_each_training_chunk, DataOptions, Dataset, DatasetWriter, Shortfall};
use super::stage::{StagePlan, CNN_COUNT, STAGE_MU_G, STAGE_NV};
use super::train::{init_weights, network_spec, train_network, TrainOptions, TrainReport};
use crate::error::{Error, Result};
use crate::gnf::{update_vertices, Filtered, GnfOutcome, NormalField};
use crate::mesh::{TriangleMesh, Vec3};
use crate::metrics;
use crate::par;
use crate::voxel::{rasterize, VoxelParams, Voxelizer};

/// Faces voxelized and evaluated per network batch.
const CHUNK: usize = 32;

/// Trained weights for networks 1..=6, or one network used for every
/// iteration.
#[derive(Debug, Clone)]
pub struct ModelSet {
    spec: NetworkSpec,
    networks: ModelNetworks,
}

#[derive(Debug, Clone)]
enum ModelNetworks {
    Staged(Vec<Option<NetworkWeights>>),
    Shared(NetworkWeights),
}

pub fn weights_file_name(cnn: usize) -> String {
    format!("cnn_{cnn}.nnwt")
}

impl ModelSet {
    pub fn staged(spec: NetworkSpec) -> Self {
        ModelSet {
            spec,
            networks: ModelNetworks::Staged(vec![None; CNN_COUNT]),
        }
    }

    pub fn shared(spec: NetworkSpec, weights: NetworkWeights) -> Result<Self> {
        weights.check(&spec)?;
        Ok(ModelSet {
            spec,
            networks: ModelNetworks::Shared(weights),
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn is_shared(&self) -> bool {
        matches!(self.networks, ModelNetworks::Shared(_))
    }

    /// Installs weights for network `cnn` (1-based).
    pub fn insert(&mut self, cnn: usize, weights: NetworkWeights) -> Result<()> {
        check_cnn(cnn)?;
        weights.check(&self.spec)?;
        match &mut self.networks {
            ModelNetworks::Staged(v) => v[cnn - 1] = Some(weights),
            ModelNetworks::Shared(_) => {
                return Err(Error::InvalidParams(
                    "cannot add a staged network to a shared model".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn get(&self, cnn: usize) -> Option<&NetworkWeights> {
        match &self.networks {
            ModelNetworks::Staged(v) => v.get(cnn.checked_sub(1)?)?.as_ref(),
            ModelNetworks::Shared(w) => Some(w),
        }
    }

    /// Fails with the first network a run of `nf` iterations needs but lacks.
    pub fn check_complete(&self, nf: usize) -> Result<()> {
        match StagePlan::new(nf)
            .required()
            .into_iter()
            .find(|&c| self.get(c).is_none())
        {
            Some(c) => Err(Error::MissingWeights(c)),
            None => Ok(()),
        }
    }

    /// Loads every `cnn_K.nnwt` present in `dir`.
    pub fn load_dir(spec: NetworkSpec, dir: &Path) -> Result<Self> {
        let mut set = Self::staged(spec);
        for cnn in 1..=CNN_COUNT {
            let path = dir.join(weights_file_name(cnn));
            if path.exists() {
                set.insert(cnn, load_weights(&path)?)?;
            }
        }
        Ok(set)
    }

    /// A staged set from a directory, or a shared set from a single file.
    pub fn load(spec: NetworkSpec, path: &Path) -> Result<Self> {
        if path.is_dir() {
            Self::load_dir(spec, path)
        } else {
            let w = load_weights(path)?;
            Self::shared(spec, w)
        }
    }

    pub fn save_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for cnn in 1..=CNN_COUNT {
            if let (ModelNetworks::Staged(_), Some(w)) = (&self.networks, self.get(cnn)) {
                let path = dir.join(weights_file_name(cnn));
                save_weights(w, &path)?;
                written.push(path);
            }
        }
        if let ModelNetworks::Shared(w) = &self.networks {
            let path = dir.join("shared.nnwt");
            save_weights(w, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn check_cnn(cnn: usize) -> Result<()> {
    if !(1..=CNN_COUNT).contains(&cnn) {
        return Err(Error::InvalidParams(format!(
            "network index {cnn} outside 1..={CNN_COUNT}"
        )));
    }
    Ok(())
}

/// One network pass over every face: voxelize, regress, keep `head`, rotate
/// back to model space and normalize. Degenerate faces and zero outputs keep
/// the current normal; the latter are counted as warnings.
pub fn network_filter_normals(
    mesh: &TriangleMesh,
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    voxel: &VoxelParams,
    head: usize,
) -> Result<Filtered> {
    if head >= spec.heads() {
        return Err(Error::InvalidParams(format!(
            "head {head} outside a {}-head network",
            spec.heads()
        )));
    }
    if spec.input[..3] != [voxel.side(); 3] {
        return Err(Error::InvalidParams(format!(
            "network expects {:?} grids but voxel parameters give side {}",
            &spec.input[..3],
            voxel.side()
        )));
    }
    let net = Network::new(spec)?;
    let voxelizer = Voxelizer::new(mesh, voxel)?;
    let faces: Vec<usize> = (0..mesh.num_faces())
        .filter(|&f| !mesh.is_degenerate(f))
        .collect();
    let mut normals = mesh.normals().to_vec();
    let mut warnings = 0;
    let sample_shape = spec.input.to_vec();
    let width = 3 * spec.heads();
    for chunk in faces.chunks(CHUNK) {
        let frames = par::map_slice(chunk, |&f| voxelizer.frame(f))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let grids = par::map_slice(&frames, |fr| rasterize(fr, voxel.half_extent));
        let views: Vec<&[f32]> = grids.iter().map(|g| g.labels()).collect();
        let out = net.forward(weights, &Tensor::stack(&sample_shape, &views)?)?;
        for (k, (&f, frame)) in chunk.iter().zip(&frames).enumerate() {
            let o = &out.data()[k * width + 3 * head..k * width + 3 * head + 3];
            let local = Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64);
            let n = frame.transform.unrotate(&local);
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                normals[f] = n / len;
            } else {
                warnings += 1;
            }
        }
    }
    if warnings > 0 {
        log::warn!("{warnings} faces got a zero network output and kept their normal");
    }
    Ok(Filtered {
        normals: NormalField(normals),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedParams {
    pub nf: usize,
    pub nv: usize,
    pub mu_g: f64,
    pub voxel: VoxelParams,
}

impl Default for LearnedParams {
    fn default() -> Self {
        LearnedParams {
            nf: 10,
            nv: 20,
            mu_g: 0.3,
            voxel: VoxelParams::default(),
        }
    }
}

/// Iterative denoising with the trained networks. With a truth mesh the
/// mean angular error after every iteration is recorded.
pub fn denoise_learned(
    mesh: &TriangleMesh,
    models: &ModelSet,
    params: &LearnedParams,
    truth: Option<&TriangleMesh>,
) -> Result<GnfOutcome> {
    params.voxel.validate()?;
    let head = head_index(&models.spec().mu_g_list, params.mu_g)?;
    models.check_complete(params.nf)?;
    if let Some(t) = truth {
        if !t.same_topology(mesh) {
            return Err(Error::TopologyMismatch("truth mesh differs".into()));
        }
    }
    let mut current = mesh.clone();
    let mut trace = Vec::new();
    let mut warnings = 0;
    for (it, cnn) in StagePlan::new(params.nf).schedule().into_iter().enumerate() {
        let weights = models.get(cnn).ok_or(Error::MissingWeights(cnn))?;
        let filtered =
            network_filter_normals(&current, models.spec(), weights, &params.voxel, head)?;
        warnings += filtered.warnings;
        current = update_vertices(&current, &filtered.normals, params.nv)?;
        if let Some(t) = truth {
            let e_a = metrics::mean_angular_error(&current, t)?;
            log::info!("iteration {} (network {cnn}): E_a = {e_a:.4}", it + 1);
            trace.push(e_a);
        }
    }
    Ok(GnfOutcome {
        mesh: current,
        trace,
        warnings,
    })
}

/// Filters each noisy training mesh once with a trained network, using the
/// between-stage head and vertex update count.
pub fn advance_training_meshes(
    pairs: &[(TriangleMesh, TriangleMesh)],
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    voxel: &VoxelParams,
) -> Result<Vec<(TriangleMesh, TriangleMesh)>> {
    let head = head_index(&spec.mu_g_list, STAGE_MU_G)?;
    pairs
        .iter()
        .map(|(noisy, truth)| {
            let f = network_filter_normals(noisy, spec, weights, voxel, head)?;
            Ok((update_vertices(noisy, &f.normals, STAGE_NV)?, truth.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOptions {
    /// Networks to train, starting from the first.
    pub stages: usize,
    pub quota: usize,
    pub seed: u64,
    pub data: DataOptions,
    pub train: TrainOptions,
    /// Where each stage's training directory is written. Without it tuples
    /// stay in memory.
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: usize,
    pub tuples: usize,
    pub shortfalls: Vec<Shortfall>,
    pub train: TrainReport,
    /// Mean angular error of the stage's input meshes against the truth.
    pub input_e_a: f64,
}

/// Alternates data generation and training: stage `i` samples tuples from
/// the current meshes, trains network `i` from fresh weights, then filters
/// the meshes with it to form the next stage's inputs.
pub fn train_stages(
    pairs: &[(TriangleMesh, TriangleMesh)],
    opts: &StageOptions,
    mut on_stage: impl FnMut(&StageReport),
) -> Result<(ModelSet, Vec<StageReport>)> {
    if opts.stages == 0 || opts.stages > CNN_COUNT {
        return Err(Error::InvalidParams(format!(
            "stage count {} outside 1..={CNN_COUNT}",
            opts.stages
        )));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidParams("empty training corpus".into()));
    }
    let spec = network_spec(opts.data.voxel.half_extent, &opts.data.mu_g_list);
    spec.validate()?;
    let mut models = ModelSet::staged(spec.clone());
    let mut reports = Vec::new();
    let mut current = pairs.to_vec();
    for stage in 1..=opts.stages {
        let input_e_a = current
            .iter()
            .map(|(n, t)| metrics::mean_angular_error(n, t))
            .sum::<Result<f64>>()?
            / current.len() as f64;
        let stage_seed = opts.seed.wrapping_add(stage as u64);
        let mut weights = init_weights(&spec, stage_seed)?;
        let train_opts = TrainOptions {
            seed: stage_seed,
            ..opts.train.clone()
        };
        let (tuples, shortfalls, train) = match &opts.data_dir {
            Some(root) => {
                let dir = root.join(format!("stage_{stage}"));
                let mut writer = DatasetWriter::create(&dir)?;
                let shortfalls = for_each_training_chunk(
                    &current,
                    opts.quota,
                    stage_seed,
                    &opts.data,
                    stage,
                    256,
                    |chunk| chunk.iter().try_for_each(|t| writer.push(t).map(drop)),
                )?;
                writer.finish()?;
                let ds = Dataset::open(&dir)?;
                let report = train_network(&spec, &mut weights, &ds, &train_opts, |_, _| {})?;
                (ds.ids().len(), shortfalls, report)
            }
            None => {
                let mut tuples = Vec::new();
                let shortfalls = for_each_training_chunk(
                    &current,
                    opts.quota,
                    stage_seed,
                    &opts.data,
                    stage,
                    256,
                    |chunk| {
                        tuples.extend(chunk);
                        Ok(())
                    },
                )?;
                let report = train_network(
                    &spec,
                    &mut weights,
                    tuples.as_slice(),
                    &train_opts,
                    |_, _| {},
                )?;
                (tuples.len(), shortfalls, report)
            }
        };
        let report = StageReport {
            stage,
            tuples,
            shortfalls,
            train,
            input_e_a,
        };
        log::info!(
            "stage {stage}: {} tuples, {} steps, last loss {:?}",
            report.tuples,
            report.train.steps,
            report.train.last_loss()
        );
        on_stage(&report);
        reports.push(report);
        if stage < opts.stages {
            current = advance_training_meshes(&current, &spec, &weights, &opts.data.voxel)?;
        }
        models.insert(stage, weights)?;
    }
    Ok((models, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn tiny() -> (NetworkSpec, VoxelParams) {
        let voxel = VoxelParams {
            half_extent: 2,
            ..Default::default()
        };
        (network_spec(2, &super::super::DEFAULT_MU_G_LIST), voxel)
    }

    #[test]
    fn zero_iterations_is_identity() {
        let (spec, voxel) = tiny();
        let m = shapes::icosphere(1);
        let models = ModelSet::staged(spec);
        let params = LearnedParams {
            nf: 0,
            voxel,
            ..Default::default()
        };
        let out = denoise_learned(&m, &models, &params, Some(&m)).unwrap();
        assert_eq!(out.mesh, m);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn missing_network_fails_up_front() {
        let (spec, voxel) = tiny();
        let mut models = ModelSet::staged(spec.clone());
        models.insert(1, init_weights(&spec, 0).unwrap()).unwrap();
        let params = LearnedParams {
            nf: 3,
            voxel,
            ..Default::default()
        };
        let err = denoise_learned(&shapes::icosphere(1), &models, &params, None).unwrap_err();
        assert!(matches!(err, Error::MissingWeights(2)));
        assert!(models.insert(7, init_weights(&spec, 0).unwrap()).is_err());
    }

    #[test]
    fn shared_model_preserves_topology_and_is_deterministic() {
        let (spec, voxel) = tiny();
        let models = ModelSet::shared(spec.clone(), init_weights(&spec, 5).unwrap()).unwrap();
        let m = shapes::icosphere(1);
        let params = LearnedParams {
            nf: 2,
            nv: 3,
            mu_g: 0.4,
            voxel,
        };
        let a = denoise_learned(&m, &models, &params, Some(&m)).unwrap();
        let b = denoise_learned(&m, &models, &params, Some(&m)).unwrap();
        assert!(a.mesh.same_topology(&m));
        assert_eq!(a.mesh.vertices(), b.mesh.vertices());
        assert_eq!(a.trace.len(), 2);
    }

    #[test]
    fn off_list_mu_g_is_rejected() {
        let (spec, voxel) = tiny();
        let models = ModelSet::shared(spec.clone(), init_weights(&spec, 5).unwrap()).unwrap();
        let params = LearnedParams {
            nf: 1,
            mu_g: 0.31,
            voxel,
            ..Default::default()
        };
        assert!(denoise_learned(&shapes::icosphere(1), &models, &params, None).is_err());
    }

    #[test]
    fn weights_directory_round_trip() {
        let (spec, _) = tiny();
        let mut models = ModelSet::staged(spec.clone());
        models.insert(2, init_weights(&spec, 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = models.save_dir(dir.path()).unwrap();
        assert_eq!(written.len(), 1);
        assert!(written[0].ends_with("cnn_2.nnwt"));
        let back = ModelSet::load(spec, dir.path()).unwrap();
        assert_eq!(back.get(2), models.get(2));
        assert!(back.get(1).is_none());
    }
}
