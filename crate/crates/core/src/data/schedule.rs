use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Without-replacement large-batch sampler.
///
/// Each epoch is a fresh permutation of the training ids cut into chunks of
/// `large_batch_size`. A trailing chunk shorter than `batch_size` cannot fill
/// a selection, so it is merged into the chunk before it; every id is still
/// offered exactly once per epoch.
#[derive(Clone, Debug)]
pub struct EpochSchedule {
    base: Vec<u32>,
    perm: Vec<u32>,
    bounds: Vec<(usize, usize)>,
    cursor: usize,
    large_batch_size: usize,
    batch_size: usize,
    epoch: u64,
    rng: Rng,
}

impl EpochSchedule {
    pub fn new(
        mut ids: Vec<u32>,
        large_batch_size: usize,
        batch_size: usize,
        rng: Rng,
    ) -> Result<Self> {
        if batch_size == 0 || large_batch_size < batch_size {
            return Err(Error::Input(format!(
                "large batch size {large_batch_size} must be at least the batch size {batch_size} (>= 1)"
            )));
        }
        if ids.len() < batch_size {
            return Err(Error::Input(format!(
                "{} training ids cannot fill a batch of {batch_size}",
                ids.len()
            )));
        }
        ids.sort_unstable();
        let n = ids.len();
        let mut bounds = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + large_batch_size).min(n);
            bounds.push((start, end));
            start = end;
        }
        if let [.., prev, last] = bounds.as_mut_slice() {
            if last.1 - last.0 < batch_size {
                prev.1 = last.1;
                bounds.pop();
            }
        }
        Ok(EpochSchedule {
            base: ids,
            perm: Vec::new(),
            bounds,
            cursor: 0,
            large_batch_size,
            batch_size,
            epoch: 0,
            rng,
        })
    }

    /// Ids of the next large batch, re-permuting at epoch boundaries.
    pub fn next_large_batch(&mut self) -> Vec<u32> {
        if self.perm.is_empty() || self.cursor == self.bounds.len() {
            if !self.perm.is_empty() {
                self.epoch += 1;
            }
            self.perm = self.base.clone();
            self.perm.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let (s, e) = self.bounds[self.cursor];
        self.cursor += 1;
        self.perm[s..e].to_vec()
    }

    /// Zero-based index of the epoch the last returned chunk belongs to.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn chunks_per_epoch(&self) -> usize {
        self.bounds.len()
    }

    pub fn large_batch_size(&self) -> usize {
        self.large_batch_size
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }
}
