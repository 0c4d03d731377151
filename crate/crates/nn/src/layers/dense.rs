use super::Act;
use crate::scalar::Scalar;

/// `y = x·W + b` with `W` stored `[input, output]`.
pub(crate) fn forward<T: Scalar>(x: &Act<T>, w: &[T], b: &[T], output: usize) -> Act<T> {
    let input = x.c;
    let n = x.n;
    let mut y = vec![T::zero(); n * output];
    for row in y.chunks_exact_mut(output) {
        row.copy_from_slice(b);
    }
    T::gemm(
        n,
        input,
        output,
        T::one(),
        &x.data,
        input as isize,
        1,
        w,
        output as isize,
        1,
        T::one(),
        &mut y,
        output as isize,
        1,
    );
    Act {
        n,
        dims: [1, 1, 1],
        c: output,
        data: y,
    }
}

pub(crate) fn backward<T: Scalar>(
    x: &Act<T>,
    w: &[T],
    dy: &Act<T>,
    need_dx: bool,
) -> (Option<Act<T>>, Vec<T>, Vec<T>) {
    let (n, input, output) = (x.n, x.c, dy.c);
    let mut dw = vec![T::zero(); input * output];
    T::gemm(
        input,
        n,
        output,
        T::one(),
        &x.data,
        1,
        input as isize,
        &dy.data,
        output as isize,
        1,
        T::zero(),
        &mut dw,
        output as isize,
        1,
    );
    let mut db = vec![T::zero(); output];
    for row in dy.data.chunks_exact(output) {
        for (a, &v) in db.iter_mut().zip(row) {
            *a = *a + v;
        }
    }
    let dx = need_dx.then(|| {
        let mut dx = vec![T::zero(); n * input];
        T::gemm(
            n,
            output,
            input,
            T::one(),
            &dy.data,
            output as isize,
            1,
            w,
            1,
            output as isize,
            T::zero(),
            &mut dx,
            input as isize,
            1,
        );
        x.with_data(dx)
    });
    (dx, dw, db)
}
