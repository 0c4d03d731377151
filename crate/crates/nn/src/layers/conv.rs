use super::{sample_group, Act};
use crate::par;
use crate::scalar::Scalar;
use crate::spec::same_padding;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub k: usize,
    pub stride: usize,
    pub cin: usize,
    pub cout: usize,
    pub in_dims: [usize; 3],
    pub out_dims: [usize; 3],
    pub pad: [usize; 3],
}

impl ConvGeom {
    pub fn new(k: usize, stride: usize, cin: usize, cout: usize, in_dims: [usize; 3]) -> Self {
        let sp = in_dims.map(|d| same_padding(d, k, stride));
        ConvGeom {
            k,
            stride,
            cin,
            cout,
            in_dims,
            out_dims: sp.map(|p| p.0),
            pad: sp.map(|p| p.1),
        }
    }

    /// Columns of the im2col matrix: `k³·cin`, ordered `(kd, kh, kw, cin)`.
    pub fn patch(&self) -> usize {
        self.k * self.k * self.k * self.cin
    }

    pub fn out_voxels(&self) -> usize {
        self.out_dims.iter().product()
    }

    /// Input coordinate for output coordinate `o` and kernel tap `t` on axis `a`.
    #[inline]
    fn source(&self, a: usize, o: usize, t: usize) -> Option<usize> {
        let i = (o * self.stride + t) as isize - self.pad[a] as isize;
        (i >= 0 && (i as usize) < self.in_dims[a]).then_some(i as usize)
    }

    /// Visits every (column-block offset, input offset) pair of the im2col
    /// matrix; `None` marks a zero-padded tap.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, Option<usize>)) {
        let [od, oh, ow] = self.out_dims;
        let [_, ih_n, iw_n] = self.in_dims;
        let k = self.k;
        let patch = self.patch();
        for z in 0..od {
            for y in 0..oh {
                for x in 0..ow {
                    let row = ((z * oh + y) * ow + x) * patch;
                    for kd in 0..k {
                        let sz = self.source(0, z, kd);
                        for kh in 0..k {
                            let sy = self.source(1, y, kh);
                            for kw in 0..k {
                                let sx = self.source(2, x, kw);
                                let col = row + ((kd * k + kh) * k + kw) * self.cin;
                                let src = match (sz, sy, sx) {
                                    (Some(a), Some(b), Some(c)) => {
                                        Some(((a * ih_n + b) * iw_n + c) * self.cin)
                                    }
                                    _ => None,
                                };
                                f(col, src);
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn im2col<T: Scalar>(&self, x: &[T], col: &mut [T]) {
        let cin = self.cin;
        self.for_each_tap(|c, src| match src {
            Some(s) => col[c..c + cin].copy_from_slice(&x[s..s + cin]),
            None => col[c..c + cin].fill(T::zero()),
        });
    }

    pub fn col2im<T: Scalar>(&self, col: &[T], dx: &mut [T]) {
        let cin = self.cin;
        dx.fill(T::zero());
        self.for_each_tap(|c, src| {
            if let Some(s) = src {
                for (d, &v) in dx[s..s + cin].iter_mut().zip(&col[c..c + cin]) {
                    *d = *d + v;
                }
            }
        });
    }
}

/// `y = conv(x, w) + b`, weights laid out `[k, k, k, cin, cout]`.
pub(crate) fn forward<T: Scalar>(g: &ConvGeom, x: &Act<T>, w: &[T], b: &[T]) -> Act<T> {
    let out_vox = g.out_voxels();
    let patch = g.patch();
    let per_out = out_vox * g.cout;
    let mut out = vec![T::zero(); x.n * per_out];
    par::for_each_chunk_mut(&mut out, per_out, |s, y| {
        let mut col = vec![T::zero(); out_vox * patch];
        g.im2col(x.sample(s), &mut col);
        T::gemm(
            out_vox,
            patch,
            g.cout,
            T::one(),
            &col,
            patch as isize,
            1,
            w,
            g.cout as isize,
            1,
            T::zero(),
            y,
            g.cout as isize,
            1,
        );
        for row in y.chunks_exact_mut(g.cout) {
            for (v, &bias) in row.iter_mut().zip(b) {
                *v = *v + bias;
            }
        }
    });
    Act {
        n: x.n,
        dims: g.out_dims,
        c: g.cout,
        data: out,
    }
}

pub(crate) struct ConvGrads<T> {
    pub dx: Option<Act<T>>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

pub(crate) fn backward<T: Scalar>(
    g: &ConvGeom,
    x: &Act<T>,
    w: &[T],
    dy: &Act<T>,
    need_dx: bool,
) -> ConvGrads<T> {
    let out_vox = g.out_voxels();
    let patch = g.patch();
    let mut dw = vec![T::zero(); patch * g.cout];
    let mut dx = need_dx.then(|| vec![T::zero(); x.data.len()]);
    let per_in = x.per_sample();

    let group = sample_group();
    let mut start = 0;
    while start < x.n {
        let end = (start + group).min(x.n);
        let parts = par::map_range(end - start, |i| {
            let s = start + i;
            let dys = dy.sample(s);
            let mut col = vec![T::zero(); out_vox * patch];
            g.im2col(x.sample(s), &mut col);
            let mut dws = vec![T::zero(); patch * g.cout];
            // dW_s = colᵀ · dy_s
            T::gemm(
                patch,
                out_vox,
                g.cout,
                T::one(),
                &col,
                1,
                patch as isize,
                dys,
                g.cout as isize,
                1,
                T::zero(),
                &mut dws,
                g.cout as isize,
                1,
            );
            let dxs = need_dx.then(|| {
                // dcol = dy_s · Wᵀ, reusing the column buffer
                T::gemm(
                    out_vox,
                    g.cout,
                    patch,
                    T::one(),
                    dys,
                    g.cout as isize,
                    1,
                    w,
                    1,
                    g.cout as isize,
                    T::zero(),
                    &mut col,
                    patch as isize,
                    1,
                );
                let mut d = vec![T::zero(); per_in];
                g.col2im(&col, &mut d);
                d
            });
            (dws, dxs)
        });
        for (i, (dws, dxs)) in parts.into_iter().enumerate() {
            for (a, b) in dw.iter_mut().zip(&dws) {
                *a = *a + *b;
            }
            if let (Some(dx), Some(dxs)) = (dx.as_mut(), dxs) {
                let s = start + i;
                dx[s * per_in..(s + 1) * per_in].copy_from_slice(&dxs);
            }
        }
        start = end;
    }

    let mut db = vec![T::zero(); g.cout];
    for row in dy.data.chunks_exact(g.cout) {
        for (a, &v) in db.iter_mut().zip(row) {
            *a = *a + v;
        }
    }
    ConvGrads {
        dx: dx.map(|d| x.with_data(d)),
        dw,
        db,
    }
}
