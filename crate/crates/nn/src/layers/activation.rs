use super::Act;
use crate::scalar::Scalar;

pub(crate) fn relu<T: Scalar>(mut x: Act<T>, record: bool) -> (Act<T>, Vec<bool>) {
    let mut mask = Vec::new();
    if record {
        mask.reserve(x.data.len());
    }
    for v in x.data.iter_mut() {
        let on = *v > T::zero();
        if !on {
            *v = T::zero();
        }
        if record {
            mask.push(on);
        }
    }
    (x, mask)
}

pub(crate) fn relu_backward<T: Scalar>(mask: &[bool], mut dy: Act<T>) -> Act<T> {
    for (d, &on) in dy.data.iter_mut().zip(mask) {
        if !on {
            *d = T::zero();
        }
    }
    dy
}

pub(crate) fn tanh<T: Scalar>(mut x: Act<T>) -> Act<T> {
    x.data.iter_mut().for_each(|v| *v = v.tanh());
    x
}

pub(crate) fn tanh_backward<T: Scalar>(out: &[T], mut dy: Act<T>) -> Act<T> {
    for (d, &y) in dy.data.iter_mut().zip(out) {
        *d = *d * (T::one() - y * y);
    }
    dy
}
