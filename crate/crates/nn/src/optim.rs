use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::weights::{BlobKind, Weights};

/// Exponential staircase decay: `1e-4 · 0.96^⌊step / 5000⌋`.
pub fn lr_schedule(step: u64) -> f64 {
    1e-4 * 0.96f64.powi((step / 5000) as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        AdamHyper {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per trainable blob.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<T: Scalar>(weights: &Weights<T>) -> Self {
        let zeros = |b: &crate::weights::Blob<T>| match b.kind {
            BlobKind::Trainable => vec![0.0; b.data.len()],
            BlobKind::RunningStat => Vec::new(),
        };
        AdamState {
            m: weights.blobs.iter().map(zeros).collect(),
            v: weights.blobs.iter().map(zeros).collect(),
        }
    }
}

/// One bias-corrected Adam update; increments `weights.step`.
pub fn adam_step<T: Scalar>(
    weights: &mut Weights<T>,
    grads: &Weights<T>,
    state: &mut AdamState,
    hyper: AdamHyper,
) -> Result<()> {
    if grads.blobs.len() != weights.blobs.len() || state.m.len() != weights.blobs.len() {
        return Err(Error::Invalid(
            "gradient layout does not match weights".into(),
        ));
    }
    let t = weights.step + 1;
    let c1 = 1.0 - hyper.beta1.powf(t as f64);
    let c2 = 1.0 - hyper.beta2.powf(t as f64);
    for (i, (w, g)) in weights.blobs.iter_mut().zip(&grads.blobs).enumerate() {
        if w.kind != BlobKind::Trainable {
            continue;
        }
        if g.data.len() != w.data.len() {
            return Err(Error::Invalid(format!(
                "gradient size mismatch for {}",
                w.name
            )));
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..w.data.len() {
            let gj = g.data[j].to_f64_lossy();
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            let upd = hyper.lr * mhat / (vhat.sqrt() + hyper.eps);
            w.data[j] = T::from_f64_lossy(w.data[j].to_f64_lossy() - upd);
        }
    }
    weights.step = t;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Blob;

    fn one_param(v: f64) -> Weights<f64> {
        Weights {
            blobs: vec![Blob {
                name: "p".into(),
                shape: vec![1],
                kind: BlobKind::Trainable,
                data: vec![v],
            }],
            step: 0,
        }
    }

    #[test]
    fn schedule_staircase() {
        assert_eq!(lr_schedule(0), 1e-4);
        assert_eq!(lr_schedule(4999), 1e-4);
        assert!((lr_schedule(10000) - 9.216e-5).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut w = one_param(0.7);
        let g = one_param(0.0);
        let mut st = AdamState::new(&w);
        for _ in 0..3 {
            adam_step(&mut w, &g, &mut st, AdamHyper::default()).unwrap();
        }
        assert_eq!(w.blobs[0].data[0], 0.7);
        assert_eq!(w.step, 3);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // t=1: m̂ = g, v̂ = g², update = lr·g/(|g|+ε)
        for g in [0.5, -3.0, 1e-3] {
            let mut w = one_param(1.0);
            let mut st = AdamState::new(&w);
            adam_step(&mut w, &one_param(g), &mut st, AdamHyper::with_lr(1e-3)).unwrap();
            let moved = 1.0 - w.blobs[0].data[0];
            let expect = 1e-3 * g / (g.abs() + 1e-8);
            assert!((moved - expect).abs() < 1e-15, "{moved} vs {expect}");
        }
    }

    #[test]
    fn running_stats_are_not_optimized() {
        let mut w = one_param(1.0);
        w.blobs[0].kind = BlobKind::RunningStat;
        let mut st = AdamState::new(&w);
        adam_step(&mut w, &one_param(5.0), &mut st, AdamHyper::default()).unwrap();
        assert_eq!(w.blobs[0].data[0], 1.0);
    }
}
