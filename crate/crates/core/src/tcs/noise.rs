//! Word dropout plus bounded local shuffling for denoising autoencoding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, TcsError};
use crate::corpus::TaggedSentence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p_drop: f64,
    pub shuffle_window: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_drop: 0.1,
            shuffle_window: 3,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(TcsError::Config(format!("p_drop {} outside [0, 1)", self.p_drop)));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> NoiseConfig {
        NoiseConfig { seed, ..self }
    }
}

/// Indices of the tokens kept from a length-`n` sequence, in their noised order.
///
/// Dropout is applied first; the survivors are then sorted by `i + u_i` with
/// `u_i ~ U[0, k + 1)`, which moves no survivor more than `k` places.
pub fn noise_permutation(n: usize, cfg: &NoiseConfig, rng: &mut impl Rng) -> Vec<usize> {
    let mut kept: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() >= cfg.p_drop).collect();
    if kept.is_empty() && n > 0 {
        kept.push(rng.random_range(0..n));
    }
    if cfg.shuffle_window > 0 {
        let span = (cfg.shuffle_window + 1) as f64;
        let mut keyed: Vec<(f64, usize)> = kept
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos as f64 + rng.random_range(0.0..span), i))
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        kept = keyed.into_iter().map(|(_, i)| i).collect();
    }
    kept
}

/// Noised copy of `s`; the randomness is a function of `cfg.seed` and the sentence id.
pub fn noise(s: &TaggedSentence, cfg: &NoiseConfig) -> TaggedSentence {
    let mut rng = crate::rng::stream_rng(cfg.seed, s.id(), 0);
    let order = noise_permutation(s.len(), cfg, &mut rng);
    let tokens = order.iter().map(|&i| s.tokens()[i].clone()).collect();
    TaggedSentence::new(s.id(), tokens, s.source()).expect("at least one token survives")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use proptest::prelude::*;

    fn sentence(n: usize) -> TaggedSentence {
        let text: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        TaggedSentence::from_text("s", &text.join(" "), Source::Real).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let s = sentence(9);
        let cfg = NoiseConfig {
            p_drop: 0.0,
            shuffle_window: 0,
            seed: 5,
        };
        assert_eq!(noise(&s, &cfg), s);
    }

    #[test]
    fn never_empty() {
        let s = sentence(3);
        for seed in 0..200 {
            let cfg = NoiseConfig {
                p_drop: 0.99,
                shuffle_window: 2,
                seed,
            };
            assert!(!noise(&s, &cfg).is_empty());
        }
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(NoiseConfig { p_drop: 1.0, ..NoiseConfig::default() }.validate().is_err());
        assert!(NoiseConfig { p_drop: -0.1, ..NoiseConfig::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn survivors_keep_relative_bounds(n in 1usize..40, k in 0usize..6, p in 0.0f64..0.9, seed in any::<u64>()) {
            let cfg = NoiseConfig { p_drop: p, shuffle_window: k, seed };
            let mut rng = crate::rng::seeded(seed);
            let order = noise_permutation(n, &cfg, &mut rng);
            let mut sorted = order.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), order.len());
            for (new_pos, i) in order.iter().enumerate() {
                let old_pos = sorted.binary_search(i).unwrap();
                prop_assert!(new_pos.abs_diff(old_pos) <= k);
            }
        }
    }
}
