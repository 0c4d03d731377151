use normalnet_nn::{
    adam_step, build_normalnet_spec_for, lr_schedule, AdamHyper, AdamState, Mode, Network,
    NetworkSpec, NetworkWeights, Tensor, Weights,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::TupleSource;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Hard cap on optimizer steps across all epochs.
    pub max_steps: Option<u64>,
    /// Stop once a batch loss falls below this value.
    pub stop_below: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            batch: 8,
            seed: 0,
            max_steps: None,
            stop_below: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub steps: u64,
    /// Loss of every step, in order.
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn last_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// The regressor for grids of half extent `half_extent`.
pub fn network_spec(half_extent: usize, mu_g_list: &[f64]) -> NetworkSpec {
    build_normalnet_spec_for(2 * half_extent + 1, mu_g_list)
}

/// Trains `weights` in place with Adam on the decaying step schedule. Each
/// epoch visits the samples in a fresh seeded order; a trailing batch of one
/// sample is skipped because batch statistics need two.
pub fn train_network(
    spec: &NetworkSpec,
    weights: &mut NetworkWeights,
    data: &(impl TupleSource + ?Sized),
    opts: &TrainOptions,
    mut on_step: impl FnMut(u64, f64),
) -> Result<TrainReport> {
    if opts.batch < 2 {
        return Err(Error::InvalidParams("batch size must be at least 2".into()));
    }
    if data.len() < 2 {
        return Err(Error::InvalidParams(format!(
            "need at least two training samples, got {}",
            data.len()
        )));
    }
    if data.heads() != spec.heads() {
        return Err(Error::InvalidParams(format!(
            "data has {} heads but the network has {}",
            data.heads(),
            spec.heads()
        )));
    }
    let net = Network::new(spec)?;
    let sample_shape = spec.input.to_vec();
    let mut adam = AdamState::new(weights);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport {
        steps: 0,
        losses: Vec::new(),
    };
    'epochs: for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(opts.batch) {
            if idx.len() < 2 {
                continue;
            }
            if opts.max_steps.is_some_and(|m| report.steps >= m) {
                break 'epochs;
            }
            let samples = par::map_slice(idx, |&i| data.sample(i))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let grids: Vec<&[f32]> = samples.iter().map(|s| s.0.as_slice()).collect();
            let targets: Vec<f32> = samples.iter().flat_map(|s| s.1.iter().copied()).collect();
            let batch = Tensor::stack(&sample_shape, &grids)?;
            let targets = Tensor::from_vec(&[idx.len(), 3 * spec.heads()], targets)?;
            let (loss, grads) = net.backward(weights, &batch, &targets, Mode::TRAINING)?;
            adam_step(
                weights,
                &grads,
                &mut adam,
                AdamHyper::with_lr(lr_schedule(weights.step)),
            )?;
            report.steps += 1;
            report.losses.push(loss);
            on_step(weights.step, loss);
            if opts.stop_below.is_some_and(|s| loss < s) {
                break 'epochs;
            }
        }
    }
    Ok(report)
}

/// Fresh weights for `spec`, seeded.
pub fn init_weights(spec: &NetworkSpec, seed: u64) -> Result<NetworkWeights> {
    Ok(Weights::init(spec, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::dataset::{Provenance, TrainingTuple};
    use crate::voxel::VolumetricGrid;

    fn tuple(half: usize, fill: f32, target: [f32; 3]) -> TrainingTuple {
        let side = 2 * half + 1;
        let mut labels = vec![0.0; side * side * side * 3];
        labels[1] = fill;
        TrainingTuple {
            grid: VolumetricGrid::new(half, 1.0, labels).unwrap(),
            targets: vec![target],
            provenance: Provenance {
                mesh: 0,
                face: 0,
                stage: 1,
            },
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = network_spec(1, &[0.3]);
        let mut w = init_weights(&spec, 0).unwrap();
        let one = vec![tuple(1, 1.0, [0.0, 1.0, 0.0])];
        let opts = TrainOptions::default();
        assert!(train_network(&spec, &mut w, one.as_slice(), &opts, |_, _| {}).is_err());
        let two = vec![tuple(1, 1.0, [0.0, 1.0, 0.0]); 2];
        let bad = TrainOptions {
            batch: 1,
            ..Default::default()
        };
        assert!(train_network(&spec, &mut w, two.as_slice(), &bad, |_, _| {}).is_err());
    }

    #[test]
    fn skips_single_sample_tail_and_counts_steps() {
        let spec = network_spec(1, &[0.3]);
        let mut w = init_weights(&spec, 0).unwrap();
        let data: Vec<_> = (0..5)
            .map(|i| tuple(1, i as f32 * 0.2, [0.0, 1.0, 0.0]))
            .collect();
        let opts = TrainOptions {
            epochs: 3,
            batch: 2,
            ..Default::default()
        };
        let r = train_network(&spec, &mut w, data.as_slice(), &opts, |_, _| {}).unwrap();
        assert_eq!(r.steps, 6);
        assert_eq!(w.step, 6);
        assert!(r.losses.iter().all(|l| l.is_finite()));
    }
}
