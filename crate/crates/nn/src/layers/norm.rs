use super::Act;
use crate::scalar::Scalar;

pub(crate) struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub batch_stats: bool,
}

/// Per-channel batch mean and biased variance, accumulated in f64 row order.
pub(crate) fn moments<T: Scalar>(x: &Act<T>) -> (Vec<f64>, Vec<f64>) {
    let c = x.c;
    let m = x.rows() as f64;
    let mut mean = vec![0.0f64; c];
    for row in x.data.chunks_exact(c) {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v.to_f64_lossy();
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![0.0f64; c];
    for row in x.data.chunks_exact(c) {
        for ((a, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            let d = v.to_f64_lossy() - mu;
            *a += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= m);
    (mean, var)
}

/// Normalizes with the given per-channel statistics, then scales and shifts.
pub(crate) fn forward<T: Scalar>(
    x: &Act<T>,
    mean: &[f64],
    var: &[f64],
    eps: f64,
    gamma: &[T],
    beta: &[T],
    batch_stats: bool,
    record: bool,
) -> (Act<T>, Option<BnCache<T>>) {
    let c = x.c;
    let mean_t: Vec<T> = mean.iter().map(|&v| T::from_f64_lossy(v)).collect();
    let inv_std: Vec<T> = var
        .iter()
        .map(|&v| T::from_f64_lossy(1.0 / (v + eps).sqrt()))
        .collect();
    let mut y = vec![T::zero(); x.data.len()];
    let mut xhat = if record {
        vec![T::zero(); x.data.len()]
    } else {
        Vec::new()
    };
    for (r, (xr, yr)) in x
        .data
        .chunks_exact(c)
        .zip(y.chunks_exact_mut(c))
        .enumerate()
    {
        for j in 0..c {
            let h = (xr[j] - mean_t[j]) * inv_std[j];
            yr[j] = gamma[j] * h + beta[j];
            if record {
                xhat[r * c + j] = h;
            }
        }
    }
    let cache = record.then_some(BnCache {
        xhat,
        inv_std,
        batch_stats,
    });
    (x.with_data(y), cache)
}

pub(crate) struct BnGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dgamma: Vec<T>,
    pub dbeta: Vec<T>,
}

pub(crate) fn backward<T: Scalar>(
    cache: &BnCache<T>,
    gamma: &[T],
    dy: &Act<T>,
    need_dx: bool,
) -> BnGrads<T> {
    let c = dy.c;
    let m = dy.rows() as f64;
    let mut sum_dy = vec![0.0f64; c];
    let mut sum_dy_xhat = vec![0.0f64; c];
    for (d, h) in dy.data.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
        for j in 0..c {
            let dv = d[j].to_f64_lossy();
            sum_dy[j] += dv;
            sum_dy_xhat[j] += dv * h[j].to_f64_lossy();
        }
    }
    let dx = need_dx.then(|| {
        let mut dx = vec![T::zero(); dy.data.len()];
        if cache.batch_stats {
            // dx = γ·σ⁻¹/m · (m·dy − Σdy − x̂·Σ(dy·x̂))
            let scale: Vec<T> = (0..c)
                .map(|j| {
                    T::from_f64_lossy(gamma[j].to_f64_lossy() * cache.inv_std[j].to_f64_lossy() / m)
                })
                .collect();
            let mt = T::from_f64_lossy(m);
            let sd: Vec<T> = sum_dy.iter().map(|&v| T::from_f64_lossy(v)).collect();
            let sdh: Vec<T> = sum_dy_xhat.iter().map(|&v| T::from_f64_lossy(v)).collect();
            for ((o, d), h) in dx
                .chunks_exact_mut(c)
                .zip(dy.data.chunks_exact(c))
                .zip(cache.xhat.chunks_exact(c))
            {
                for j in 0..c {
                    o[j] = scale[j] * (mt * d[j] - sd[j] - h[j] * sdh[j]);
                }
            }
        } else {
            let scale: Vec<T> = (0..c).map(|j| gamma[j] * cache.inv_std[j]).collect();
            for (o, d) in dx.chunks_exact_mut(c).zip(dy.data.chunks_exact(c)) {
                for j in 0..c {
                    o[j] = scale[j] * d[j];
                }
            }
        }
        dx
    });
    BnGrads {
        dx,
        dgamma: sum_dy_xhat.into_iter().map(T::from_f64_lossy).collect(),
        dbeta: sum_dy.into_iter().map(T::from_f64_lossy).collect(),
    }
}
