//! Training tuples: sampled faces, their grids and filtered target normals,
//! and the on-disk training directory.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::category::{categorize_face, FaceCategory};
use crate::error::{Error, Result};
use crate::gnf::filter_sum;
use crate::mesh::{TriangleMesh, Vec3};
use crate::par;
use crate::voxel::{self, VolumetricGrid, VoxelParams, Voxelizer};

/// Where a tuple came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub mesh: usize,
    pub face: usize,
    pub stage: usize,
}

/// A grid and one target normal per network head, both in the grid's
/// normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTuple {
    pub grid: VolumetricGrid,
    pub targets: Vec<[f32; 3]>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataOptions {
    pub voxel: VoxelParams,
    pub mu_g_list: Vec<f64>,
    pub mu_d_factor: f64,
    pub neighborhood_ring: usize,
}

impl Default for DataOptions {
    fn default() -> Self {
        DataOptions {
            voxel: VoxelParams::default(),
            mu_g_list: super::DEFAULT_MU_G_LIST.to_vec(),
            mu_d_factor: 2.0,
            neighborhood_ring: 2,
        }
    }
}

/// Filters single faces of `mesh` with ground-truth normals as guidance.
pub struct TargetFilter<'a> {
    mesh: &'a TriangleMesh,
    truth: &'a [Vec3],
    mu_d: f64,
    ring: usize,
}

impl<'a> TargetFilter<'a> {
    pub fn new(
        mesh: &'a TriangleMesh,
        truth: &'a [Vec3],
        mu_d_factor: f64,
        ring: usize,
    ) -> Result<Self> {
        if truth.len() != mesh.num_faces() {
            return Err(Error::TopologyMismatch(format!(
                "{} truth normals for {} faces",
                truth.len(),
                mesh.num_faces()
            )));
        }
        Ok(TargetFilter {
            mesh,
            truth,
            mu_d: mu_d_factor * mesh.scales()?.d_c,
            ring,
        })
    }

    /// One unit normal per entry of `mu_g_list`, in model space.
    pub fn targets(&self, face: usize, mu_g_list: &[f64]) -> Result<Vec<Vec3>> {
        self.mesh.check_face(face)?;
        if self.mesh.is_degenerate(face) {
            return Err(Error::DegenerateFace(face));
        }
        let members = self.mesh.ring_members(face, self.ring);
        Ok(mu_g_list
            .iter()
            .map(|&mu_g| {
                let s = filter_sum(self.mesh, face, &members, self.truth, mu_g, self.mu_d);
                let len = s.norm();
                if len > 0.0 {
                    s / len
                } else {
                    self.mesh.normals()[face]
                }
            })
            .collect())
    }
}

/// Target normals of one face for each head, in model space.
pub fn make_targets(
    mesh: &TriangleMesh,
    truth_normals: &[Vec3],
    face: usize,
    mu_g_list: &[f64],
) -> Result<Vec<Vec3>> {
    TargetFilter::new(mesh, truth_normals, 2.0, 2)?.targets(face, mu_g_list)
}

/// One sampled face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pick {
    pub mesh: usize,
    pub face: usize,
    pub category: FaceCategory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub category: FaceCategory,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePlan {
    pub picks: Vec<Pick>,
    pub shortfalls: Vec<Shortfall>,
}

impl SamplePlan {
    pub fn count(&self, category: FaceCategory) -> usize {
        self.picks.iter().filter(|p| p.category == category).count()
    }
}

/// Draws up to `quota` faces per category, uniformly without replacement
/// from all meshes pooled, with ChaCha8 seeded by `seed`. Categories with
/// fewer faces contribute all of them and are reported as shortfalls.
pub fn sample_faces(meshes: &[&TriangleMesh], quota: usize, seed: u64) -> Result<SamplePlan> {
    if quota == 0 {
        return Err(Error::InvalidParams("quota must be at least 1".into()));
    }
    let mut pools: [Vec<(usize, usize)>; 4] = Default::default();
    for (mi, mesh) in meshes.iter().enumerate() {
        let cats = par::map_range(0..mesh.num_faces(), |f| {
            (!mesh.is_degenerate(f)).then(|| categorize_face(mesh, f).map(|c| c.0))
        });
        for (f, c) in cats.into_iter().enumerate() {
            if let Some(c) = c {
                pools[c? as usize].push((mi, f));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = SamplePlan {
        picks: Vec::new(),
        shortfalls: Vec::new(),
    };
    for (category, pool) in FaceCategory::ALL.into_iter().zip(pools) {
        let chosen: Vec<(usize, usize)> = if pool.len() > quota {
            let mut idx = index::sample(&mut rng, pool.len(), quota).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| pool[i]).collect()
        } else {
            if pool.len() < quota {
                log::warn!(
                    "category {} has {} faces, fewer than the quota {quota}",
                    category.label(),
                    pool.len()
                );
                plan.shortfalls.push(Shortfall {
                    category,
                    available: pool.len(),
                });
            }
            pool
        };
        plan.picks
            .extend(chosen.into_iter().map(|(mesh, face)| Pick {
                mesh,
                face,
                category,
            }));
    }
    Ok(plan)
}

/// Builds tuples for faces of one noisy mesh paired with its ground truth.
pub struct TupleMaker<'a> {
    voxelizer: Voxelizer<'a>,
    targets: TargetFilter<'a>,
    mu_g_list: Vec<f64>,
    mesh_id: usize,
    stage: usize,
}

impl<'a> TupleMaker<'a> {
    pub fn new(
        noisy: &'a TriangleMesh,
        truth: &'a TriangleMesh,
        opts: &DataOptions,
        mesh_id: usize,
        stage: usize,
    ) -> Result<Self> {
        if !noisy.same_topology(truth) {
            return Err(Error::TopologyMismatch(format!(
                "training mesh {mesh_id} and its ground truth differ"
            )));
        }
        Ok(TupleMaker {
            voxelizer: Voxelizer::new(noisy, &opts.voxel)?,
            targets: TargetFilter::new(
                noisy,
                truth.normals(),
                opts.mu_d_factor,
                opts.neighborhood_ring,
            )?,
            mu_g_list: opts.mu_g_list.clone(),
            mesh_id,
            stage,
        })
    }

    pub fn tuple(&self, face: usize) -> Result<TrainingTuple> {
        let (grid, frame) = self.voxelizer.face_with_frame(face)?;
        let targets = self
            .targets
            .targets(face, &self.mu_g_list)?
            .iter()
            .map(|t| {
                let r = frame.transform.rotate(t).normalize();
                [r.x as f32, r.y as f32, r.z as f32]
            })
            .collect();
        Ok(TrainingTuple {
            grid,
            targets,
            provenance: Provenance {
                mesh: self.mesh_id,
                face,
                stage: self.stage,
            },
        })
    }
}

pub struct TrainingSet {
    pub tuples: Vec<TrainingTuple>,
    pub shortfalls: Vec<Shortfall>,
}

/// Samples faces per category and builds every tuple in memory.
pub fn build_training_set(
    pairs: &[(TriangleMesh, TriangleMesh)],
    quota: usize,
    seed: u64,
    opts: &DataOptions,
    stage: usize,
) -> Result<TrainingSet> {
    let mut tuples = Vec::new();
    let shortfalls = for_each_training_chunk(pairs, quota, seed, opts, stage, 256, |chunk| {
        tuples.extend(chunk);
        Ok(())
    })?;
    Ok(TrainingSet { tuples, shortfalls })
}

/// Same sampling as [`build_training_set`], handing tuples over in chunks of
/// at most `chunk` so large sets can go straight to disk.
pub fn for_each_training_chunk(
    pairs: &[(TriangleMesh, TriangleMesh)],
    quota: usize,
    seed: u64,
    opts: &DataOptions,
    stage: usize,
    chunk: usize,
    mut sink: impl FnMut(Vec<TrainingTuple>) -> Result<()>,
) -> Result<Vec<Shortfall>> {
    let noisy: Vec<&TriangleMesh> = pairs.iter().map(|p| &p.0).collect();
    let plan = sample_faces(&noisy, quota, seed)?;
    let makers = pairs
        .iter()
        .enumerate()
        .map(|(i, (n, t))| TupleMaker::new(n, t, opts, i, stage))
        .collect::<Result<Vec<_>>>()?;
    for picks in plan.picks.chunks(chunk.max(1)) {
        let tuples = par::map_slice(picks, |p| makers[p.mesh].tuple(p.face))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        sink(tuples)?;
    }
    Ok(plan.shortfalls)
}

const TARGETS_MAGIC: &[u8; 4] = b"NNTG";
pub const TUPLE_DIR: &str = "tuples";
pub const TARGETS_FILE: &str = "targets.bin";

fn bad(message: impl Into<String>) -> Error {
    Error::Format {
        kind: "training data",
        message: message.into(),
    }
}

pub fn tuple_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(TUPLE_DIR).join(format!("{id:08}.nnvx"))
}

/// Writes `tuples/NNNNNNNN.nnvx` grids and the `targets.bin` index. The
/// tuple count in the index header is filled in by [`DatasetWriter::finish`].
pub struct DatasetWriter {
    dir: PathBuf,
    targets: BufWriter<File>,
    count: u32,
    heads: Option<usize>,
}

impl DatasetWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join(TUPLE_DIR))?;
        let mut targets = BufWriter::new(File::create(dir.join(TARGETS_FILE))?);
        targets.write_all(TARGETS_MAGIC)?;
        targets.write_all(&0u32.to_le_bytes())?;
        Ok(DatasetWriter {
            dir: dir.to_path_buf(),
            targets,
            count: 0,
            heads: None,
        })
    }

    pub fn push(&mut self, tuple: &TrainingTuple) -> Result<u32> {
        match self.heads {
            Some(h) if h != tuple.targets.len() => {
                return Err(bad(format!(
                    "tuple with {} targets in a set of {h}",
                    tuple.targets.len()
                )))
            }
            _ => self.heads = Some(tuple.targets.len()),
        }
        let id = self.count;
        voxel::save_grid(&tuple.grid, &tuple_path(&self.dir, id))?;
        self.targets.write_all(&id.to_le_bytes())?;
        for t in &tuple.targets {
            for c in t {
                self.targets.write_all(&c.to_le_bytes())?;
            }
        }
        self.count += 1;
        Ok(id)
    }

    pub fn finish(self) -> Result<u32> {
        let mut file = self.targets.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(4))?;
        file.write_all(&self.count.to_le_bytes())?;
        file.sync_all()?;
        Ok(self.count)
    }
}

pub fn write_dataset(dir: &Path, tuples: &[TrainingTuple]) -> Result<u32> {
    let mut w = DatasetWriter::create(dir)?;
    for t in tuples {
        w.push(t)?;
    }
    w.finish()
}

/// Source of training samples, addressed by position.
pub trait TupleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn heads(&self) -> usize;

    /// Grid labels and flattened targets of sample `i`.
    fn sample(&self, i: usize) -> Result<(Vec<f32>, Vec<f32>)>;
}

impl TupleSource for [TrainingTuple] {
    fn len(&self) -> usize {
        <[TrainingTuple]>::len(self)
    }

    fn heads(&self) -> usize {
        self.first().map_or(0, |t| t.targets.len())
    }

    fn sample(&self, i: usize) -> Result<(Vec<f32>, Vec<f32>)> {
        let t = &self[i];
        Ok((
            t.grid.labels().to_vec(),
            t.targets.iter().flatten().copied().collect(),
        ))
    }
}

/// A training directory. Targets are held in memory and grids are read on
/// demand.
#[derive(Debug)]
pub struct Dataset {
    dir: PathBuf,
    ids: Vec<u32>,
    targets: Vec<f32>,
    heads: usize,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(dir.join(TARGETS_FILE))?.read_to_end(&mut bytes)?;
        if bytes.len() < 8 || &bytes[..4] != TARGETS_MAGIC {
            return Err(bad("bad targets header"));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = &bytes[8..];
        if count == 0 {
            if !body.is_empty() {
                return Err(bad("records present but count is zero"));
            }
            return Ok(Dataset {
                dir: dir.to_path_buf(),
                ids: Vec::new(),
                targets: Vec::new(),
                heads: 0,
            });
        }
        // Each record is a u32 id and 3·heads f32 values; heads is implied
        // by the file size.
        let record = body.len() / count;
        if body.len() % count != 0 || record < 16 || !(record - 4).is_multiple_of(12) {
            return Err(bad(format!(
                "{} record bytes do not split into {count} records",
                body.len()
            )));
        }
        let heads = (record - 4) / 12;
        let mut ids = Vec::with_capacity(count);
        let mut targets = Vec::with_capacity(count * heads * 3);
        for rec in body.chunks_exact(record) {
            ids.push(u32::from_le_bytes(rec[..4].try_into().unwrap()));
            targets.extend(
                rec[4..]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap())),
            );
        }
        Ok(Dataset {
            dir: dir.to_path_buf(),
            ids,
            targets,
            heads,
        })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn targets(&self, i: usize) -> &[f32] {
        let w = self.heads * 3;
        &self.targets[i * w..(i + 1) * w]
    }

    pub fn grid(&self, i: usize) -> Result<VolumetricGrid> {
        voxel::load_grid(&tuple_path(&self.dir, self.ids[i]))
    }
}

impl TupleSource for Dataset {
    fn len(&self) -> usize {
        self.ids.len()
    }

    fn heads(&self) -> usize {
        self.heads
    }

    fn sample(&self, i: usize) -> Result<(Vec<f32>, Vec<f32>)> {
        Ok((self.grid(i)?.into_labels(), self.targets(i).to_vec()))
    }
}
