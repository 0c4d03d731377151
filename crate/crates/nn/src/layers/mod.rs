//! Layer kernels operating on channel-last activations.

pub(crate) mod activation;
pub(crate) mod conv;
pub(crate) mod dense;
pub(crate) mod norm;
pub(crate) mod pool;

/// A batch of activations, `n × d × h × w × c` (flat layers use `[1, 1, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Act<T> {
    pub n: usize,
    pub dims: [usize; 3],
    pub c: usize,
    pub data: Vec<T>,
}

impl<T> Act<T> {
    pub fn voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn per_sample(&self) -> usize {
        self.voxels() * self.c
    }

    pub fn rows(&self) -> usize {
        self.n * self.voxels()
    }

    pub fn sample(&self, s: usize) -> &[T] {
        let per = self.per_sample();
        &self.data[s * per..(s + 1) * per]
    }

    pub fn with_data<U>(&self, data: Vec<U>) -> Act<U> {
        Act {
            n: self.n,
            dims: self.dims,
            c: self.c,
            data,
        }
    }
}

/// Samples processed together when per-sample scratch buffers are large.
#[cfg(feature = "parallel")]
pub(crate) fn sample_group() -> usize {
    rayon::current_num_threads().max(1)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn sample_group() -> usize {
    1
}
