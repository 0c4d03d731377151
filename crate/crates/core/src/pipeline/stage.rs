use crate::error::{Error, Result};

/// Number of separately trained networks.
pub const CNN_COUNT: usize = 6;

/// Head and vertex-update count used to filter training meshes between
/// stages.
pub const STAGE_MU_G: f64 = 0.4;
pub const STAGE_NV: usize = 20;

/// First iteration handled by each network; the last one covers every
/// later iteration.
const FIRST_ITERATION: [usize; CNN_COUNT] = [1, 2, 3, 4, 6, 11];

/// Which network (1-based) filters `iteration` (1-based) of an `nf`-iteration
/// run.
pub fn select_cnn(iteration: usize, nf: usize) -> Result<usize> {
    if iteration == 0 || iteration > nf {
        return Err(Error::InvalidParams(format!(
            "iteration {iteration} outside 1..={nf}"
        )));
    }
    Ok(FIRST_ITERATION
        .iter()
        .rposition(|&first| iteration >= first)
        .map(|i| i + 1)
        .expect("iteration >= 1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StagePlan {
    pub nf: usize,
}

impl StagePlan {
    pub fn new(nf: usize) -> Self {
        StagePlan { nf }
    }

    /// Network index for every iteration, in order.
    pub fn schedule(&self) -> Vec<usize> {
        (1..=self.nf)
            .map(|it| select_cnn(it, self.nf).expect("in range"))
            .collect()
    }

    /// Distinct networks the run needs, ascending.
    pub fn required(&self) -> Vec<usize> {
        let mut s = self.schedule();
        s.dedup();
        s
    }

    /// Iteration interval `(first, last)` served by network `cnn`, if used.
    pub fn interval(&self, cnn: usize) -> Option<(usize, usize)> {
        let its: Vec<usize> = (1..=self.nf)
            .filter(|&it| select_cnn(it, self.nf).ok() == Some(cnn))
            .collect();
        Some((*its.first()?, *its.last()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range() {
        assert!(select_cnn(0, 5).is_err());
        assert!(select_cnn(6, 5).is_err());
    }

    #[test]
    fn plan_intervals() {
        let p = StagePlan::new(12);
        assert_eq!(p.required(), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(p.interval(4), Some((4, 5)));
        assert_eq!(p.interval(6), Some((11, 12)));
        assert_eq!(StagePlan::new(3).required(), vec![1, 2, 3]);
        assert_eq!(StagePlan::new(3).interval(4), None);
        assert!(StagePlan::new(0).schedule().is_empty());
    }
}
