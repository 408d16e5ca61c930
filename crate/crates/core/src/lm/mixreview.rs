//! Mix-review: each fine-tuning epoch also replays a decaying random share of
//! the pretraining data.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{LmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixReviewSchedule {
    pub decay: f64,
    pub pretrain_size: usize,
    pub finetune_size: usize,
}

/// Relative slack under which `x` counts as the integer next to it.
const INTEGER_SLACK: f64 = 1e-9;

/// Ceiling that ignores rounding noise: `729.0000000000001` rounds to 729.
fn ceil_tolerant(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= INTEGER_SLACK * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

impl MixReviewSchedule {
    pub fn new(decay: f64, pretrain_size: usize, finetune_size: usize) -> Result<MixReviewSchedule> {
        let s = MixReviewSchedule {
            decay,
            pretrain_size,
            finetune_size,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(LmError::Config(format!("mix-review decay {} outside (0, 1]", self.decay)));
        }
        Ok(())
    }

    /// Share of pretraining data replayed at `epoch` (0-based): `decay^epoch`.
    pub fn fraction(&self, epoch: u32) -> f64 {
        self.decay.powf(epoch as f64)
    }

    /// Number of pretraining examples replayed at `epoch`.
    pub fn pretrain_count(&self, epoch: u32) -> usize {
        ceil_tolerant(self.fraction(epoch) * self.pretrain_size as f64).min(self.pretrain_size)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixReviewBatches {
    pub epoch: u32,
    /// Sorted indices into the pretraining set, sampled without replacement.
    pub pretrain: Vec<usize>,
    /// Every fine-tuning index, in order.
    pub finetune: Vec<usize>,
}

impl MixReviewBatches {
    pub fn len(&self) -> usize {
        self.pretrain.len() + self.finetune.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `decay^epoch`.
pub fn mix_review_fraction(s: &MixReviewSchedule, epoch: u32) -> f64 {
    s.fraction(epoch)
}

/// The examples seen at `epoch`; the pretraining sample is a pure function of `(seed, epoch)`.
pub fn mix_review_batches(s: &MixReviewSchedule, epoch: u32, seed: u64) -> Result<MixReviewBatches> {
    s.validate()?;
    let k = s.pretrain_count(epoch);
    let mut rng = crate::rng::stream_rng(seed, "mix-review", epoch as u64);
    let mut pretrain = index::sample(&mut rng, s.pretrain_size, k).into_vec();
    pretrain.sort_unstable();
    Ok(MixReviewBatches {
        epoch,
        pretrain,
        finetune: (0..s.finetune_size).collect(),
    })
}
