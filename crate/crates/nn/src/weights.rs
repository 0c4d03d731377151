use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::network::compile;
use crate::scalar::Scalar;
use crate::spec::NetworkSpec;

const MAGIC: &[u8; 4] = b"NNWT";
const VERSION: u32 = 1;
const STEP_BLOB: &str = "train.step";
const INIT_STDDEV: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlobKind {
    Trainable,
    RunningStat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    TruncatedNormal,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blob<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: BlobKind,
    pub data: Vec<T>,
}

/// Ordered parameter blobs of a network plus the optimizer step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub blobs: Vec<Blob<T>>,
    pub step: u64,
}

pub type NetworkWeights = Weights<f32>;

fn kind_from_name(name: &str) -> BlobKind {
    if name.ends_with(".running_mean") || name.ends_with(".running_var") {
        BlobKind::RunningStat
    } else {
        BlobKind::Trainable
    }
}

impl<T: Scalar> Weights<T> {
    /// Fresh parameters: truncated normal (σ = 0.01, cut at ±2σ) for kernels and
    /// matrices, zero biases and shifts, unit scales and running variances.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let (_, descs) = compile(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STDDEV).expect("valid stddev");
        let blobs = descs
            .into_iter()
            .map(|d| {
                let len: usize = d.shape.iter().product();
                let data = match d.init {
                    Init::Zeros => vec![T::zero(); len],
                    Init::Ones => vec![T::one(); len],
                    Init::TruncatedNormal => (0..len)
                        .map(|_| loop {
                            let v: f64 = normal.sample(&mut rng);
                            if v.abs() <= 2.0 * INIT_STDDEV {
                                break T::from_f64_lossy(v);
                            }
                        })
                        .collect(),
                };
                Blob {
                    kind: kind_from_name(&d.name),
                    name: d.name,
                    shape: d.shape,
                    data,
                }
            })
            .collect();
        Ok(Weights { blobs, step: 0 })
    }

    /// Same layout, every value zero.
    pub fn zeros_like(&self) -> Self {
        Weights {
            blobs: self
                .blobs
                .iter()
                .map(|b| Blob {
                    name: b.name.clone(),
                    shape: b.shape.clone(),
                    kind: b.kind,
                    data: vec![T::zero(); b.data.len()],
                })
                .collect(),
            step: self.step,
        }
    }

    pub fn blob(&self, name: &str) -> Option<&Blob<T>> {
        self.blobs.iter().find(|b| b.name == name)
    }

    pub fn blob_mut(&mut self, name: &str) -> Option<&mut Blob<T>> {
        self.blobs.iter_mut().find(|b| b.name == name)
    }

    pub fn parameter_count(&self) -> usize {
        self.blobs
            .iter()
            .filter(|b| b.kind == BlobKind::Trainable)
            .map(|b| b.data.len())
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        Weights {
            blobs: self
                .blobs
                .iter()
                .map(|b| Blob {
                    name: b.name.clone(),
                    shape: b.shape.clone(),
                    kind: b.kind,
                    data: b
                        .data
                        .iter()
                        .map(|&v| U::from_f64_lossy(v.to_f64_lossy()))
                        .collect(),
                })
                .collect(),
            step: self.step,
        }
    }

    /// Checks blob names, order and shapes against the layout `spec` expects.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        let (_, descs) = compile(spec)?;
        if descs.len() != self.blobs.len() {
            let first_missing = descs
                .iter()
                .find(|d| self.blob(&d.name).is_none())
                .map(|d| d.name.clone())
                .unwrap_or_else(|| "network".into());
            return Err(Error::WeightsMismatch {
                layer: first_missing,
                message: format!(
                    "expected {} parameter blobs, found {}",
                    descs.len(),
                    self.blobs.len()
                ),
            });
        }
        for (d, b) in descs.iter().zip(&self.blobs) {
            if d.name != b.name {
                return Err(Error::WeightsMismatch {
                    layer: d.name.clone(),
                    message: format!("found blob named {:?}", b.name),
                });
            }
            if d.shape != b.shape || b.data.len() != d.shape.iter().product::<usize>() {
                return Err(Error::WeightsMismatch {
                    layer: d.name.clone(),
                    message: format!("expected shape {:?}, found {:?}", d.shape, b.shape),
                });
            }
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serializes weights to the little-endian `NNWT` format.
pub fn encode_weights(weights: &NetworkWeights) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, weights.blobs.len() as u32 + 1);
    let write_blob =
        |out: &mut Vec<u8>, name: &str, shape: &[usize], data: &mut dyn Iterator<Item = u32>| {
            put_u32(out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put_u32(out, shape.len() as u32);
            for &d in shape {
                put_u32(out, d as u32);
            }
            for bits in data {
                put_u32(out, bits);
            }
        };
    for b in &weights.blobs {
        write_blob(
            &mut out,
            &b.name,
            &b.shape,
            &mut b.data.iter().map(|v| v.to_bits()),
        );
    }
    // The step counter rides along as two f32 slots holding the raw u64 halves.
    let step = [weights.step as u32, (weights.step >> 32) as u32];
    write_blob(&mut out, STEP_BLOB, &[2], &mut step.into_iter());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<NetworkWeights> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)
        .map_err(|_| Error::Format("missing magic".into()))?
        != MAGIC
    {
        return Err(Error::Format("magic mismatch, expected NNWT".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut blobs = Vec::with_capacity(count);
    let mut step = 0u64;
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("blob name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("{name}: shape overflows")))?;
        if len.checked_mul(4).is_none_or(|b| b > bytes.len() - r.pos) {
            return Err(Error::Truncated);
        }
        let raw = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if name == STEP_BLOB {
            if raw.len() != 2 {
                return Err(Error::Format("step blob must hold two slots".into()));
            }
            step = raw[0] as u64 | ((raw[1] as u64) << 32);
            continue;
        }
        blobs.push(Blob {
            kind: kind_from_name(&name),
            name,
            shape,
            data: raw.into_iter().map(f32::from_bits).collect(),
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last blob".into()));
    }
    Ok(Weights { blobs, step })
}

pub fn save_weights(weights: &NetworkWeights, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_weights(weights))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<NetworkWeights> {
    decode_weights(&fs::read(path)?)
}
