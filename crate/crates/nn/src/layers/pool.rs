use super::Act;
use crate::scalar::Scalar;

/// Global max over spatial positions. Returns the pooled activations and,
/// per `(sample, channel)`, the voxel holding the first maximum.
pub(crate) fn forward<T: Scalar>(x: &Act<T>) -> (Act<T>, Vec<usize>) {
    let (n, c, vox) = (x.n, x.c, x.voxels());
    let mut out = vec![T::neg_infinity(); n * c];
    let mut arg = vec![0usize; n * c];
    for s in 0..n {
        let xs = x.sample(s);
        let o = &mut out[s * c..(s + 1) * c];
        let a = &mut arg[s * c..(s + 1) * c];
        for v in 0..vox {
            let row = &xs[v * c..(v + 1) * c];
            for j in 0..c {
                if row[j] > o[j] {
                    o[j] = row[j];
                    a[j] = v;
                }
            }
        }
    }
    (
        Act {
            n,
            dims: [1, 1, 1],
            c,
            data: out,
        },
        arg,
    )
}

pub(crate) fn backward<T: Scalar>(in_dims: [usize; 3], arg: &[usize], dy: &Act<T>) -> Act<T> {
    let (n, c) = (dy.n, dy.c);
    let vox: usize = in_dims.iter().product();
    let mut dx = vec![T::zero(); n * vox * c];
    for s in 0..n {
        for j in 0..c {
            let v = arg[s * c + j];
            dx[(s * vox + v) * c + j] = dy.data[s * c + j];
        }
    }
    Act {
        n,
        dims: in_dims,
        c,
        data: dx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_permutation_leaves_pool_unchanged() {
        let (vox, c) = (27, 4);
        let data: Vec<f64> = (0..vox * c)
            .map(|i| ((i * 7919) % 101) as f64 * 0.01 - 0.5)
            .collect();
        let x = Act {
            n: 1,
            dims: [3, 3, 3],
            c,
            data: data.clone(),
        };
        let mut perm: Vec<usize> = (0..vox).collect();
        perm.reverse();
        perm.swap(3, 17);
        let mut shuffled = vec![0.0; data.len()];
        for (dst, &src) in perm.iter().enumerate() {
            shuffled[dst * c..(dst + 1) * c].copy_from_slice(&data[src * c..(src + 1) * c]);
        }
        let y = Act {
            data: shuffled,
            ..x.clone()
        };
        assert_eq!(forward(&x).0.data, forward(&y).0.data);
    }

    #[test]
    fn gradient_goes_to_the_maximum() {
        let x = Act {
            n: 1,
            dims: [2, 1, 1],
            c: 1,
            data: vec![0.2f64, 0.9],
        };
        let (_, arg) = forward(&x);
        let dy = Act {
            n: 1,
            dims: [1, 1, 1],
            c: 1,
            data: vec![3.0],
        };
        assert_eq!(backward([2, 1, 1], &arg, &dy).data, vec![0.0, 3.0]);
    }
}
