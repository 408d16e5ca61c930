//! Losses, gradients and optimizer steps.
//!
//! Every loss is a weighted sum of per-path token means. A path's mean is the
//! summed NLL of its sentences divided by the number of predicted tokens
//! (end markers included).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::{Graph, Mat};
use super::model::{Direction, Path, Side, TcsModel};
use super::noise::{noise, NoiseConfig};
use crate::corpus::TaggedSentence;

/// Gradients keyed by parameter index; parameters off the computed paths are absent.
pub type Grads = BTreeMap<usize, Mat>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub dae: f64,
    pub bt: f64,
    pub ce: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            dae: 1.0,
            bt: 1.0,
            ce: 1.0,
        }
    }
}

/// Input/output id sequences that all run through one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub path: Path,
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub weight: f64,
}

impl PathBatch {
    pub fn new(path: Path, pairs: Vec<(Vec<usize>, Vec<usize>)>) -> PathBatch {
        PathBatch { path, pairs, weight: 1.0 }
    }

    pub fn weighted(mut self, w: f64) -> PathBatch {
        self.weight = w;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    /// Unweighted token mean of each batch, in input order.
    pub terms: Vec<f64>,
    pub grads: Grads,
}

/// Loss and gradients of `Σ weight · token-mean NLL` over `batches`. Empty batches contribute nothing.
pub fn objective(model: &TcsModel, batches: &[PathBatch]) -> Objective {
    let mut g = Graph::new();
    let mut weighted = Vec::new();
    let mut terms = Vec::new();
    for b in batches {
        if b.pairs.is_empty() {
            terms.push(0.0);
            continue;
        }
        let mut sums = Vec::with_capacity(b.pairs.len());
        let mut n_tok = 0;
        for (src, tgt) in &b.pairs {
            let (nll, n) = model.sequence_nll(&mut g, src, tgt, b.path);
            sums.push(nll);
            n_tok += n;
        }
        let inv = 1.0 / n_tok as f64;
        let parts: Vec<_> = sums.into_iter().map(|v| (v, inv)).collect();
        let mean = g.weighted_sum(&parts);
        terms.push(g.scalar(mean));
        weighted.push((mean, b.weight));
    }
    if weighted.is_empty() {
        return Objective {
            loss: 0.0,
            terms,
            grads: Grads::new(),
        };
    }
    let total = g.weighted_sum(&weighted);
    Objective {
        loss: g.scalar(total),
        terms,
        grads: g.backward(total).into_iter().collect(),
    }
}

/// Noised-to-clean pairs through `side`'s own encoder and decoder.
pub fn dae_batch(model: &TcsModel, batch: &[TaggedSentence], side: Side, cfg: &NoiseConfig) -> PathBatch {
    let v = model.vocab();
    let pairs = batch.iter().map(|s| (v.encode(&noise(s, cfg)), v.encode(s))).collect();
    PathBatch::new(Path::autoencode(side), pairs)
}

/// True pairs in both directions.
pub fn ce_batches(model: &TcsModel, pairs: &[(TaggedSentence, TaggedSentence)]) -> [PathBatch; 2] {
    let v = model.vocab();
    let enc: Vec<(Vec<usize>, Vec<usize>)> = pairs.iter().map(|(s, t)| (v.encode(s), v.encode(t))).collect();
    let rev = enc.iter().map(|(s, t)| (t.clone(), s.clone())).collect();
    [
        PathBatch::new(Direction::Src2Tgt.path(), enc),
        PathBatch::new(Direction::Tgt2Src.path(), rev),
    ]
}

/// Back-translated pairs: the target batch is translated into pseudo-sources and the source
/// batch into pseudo-targets with the current model. Always recomputed.
pub fn bt_batches(model: &mut TcsModel, src: &[TaggedSentence], tgt: &[TaggedSentence]) -> [PathBatch; 2] {
    let max_len = model.config().max_len;
    let v = model.vocab();
    let to_src: Vec<(Vec<usize>, Vec<usize>)> = tgt
        .iter()
        .map(|t| {
            let ids = v.encode(t);
            (model.greedy_ids(&ids, Direction::Tgt2Src.path(), max_len), ids)
        })
        .collect();
    let to_tgt: Vec<(Vec<usize>, Vec<usize>)> = src
        .iter()
        .map(|s| {
            let ids = v.encode(s);
            (model.greedy_ids(&ids, Direction::Src2Tgt.path(), max_len), ids)
        })
        .collect();
    model.pseudo_pairs_generated += (to_src.len() + to_tgt.len()) as u64;
    [
        PathBatch::new(Direction::Src2Tgt.path(), to_src),
        PathBatch::new(Direction::Tgt2Src.path(), to_tgt),
    ]
}

/// Token-averaged reconstruction loss; only `side`'s private layers and the shared ones get gradients.
pub fn dae_loss(model: &TcsModel, batch: &[TaggedSentence], side: Side, cfg: &NoiseConfig) -> (f64, Grads) {
    let o = objective(model, &[dae_batch(model, batch, side, cfg)]);
    (o.loss, o.grads)
}

/// Sum of the two directions' token-averaged NLL on true pairs.
pub fn ce_loss(model: &TcsModel, pairs: &[(TaggedSentence, TaggedSentence)]) -> (f64, Grads) {
    let o = objective(model, &ce_batches(model, pairs));
    (o.loss, o.grads)
}

/// Sum of the two directions' token-averaged NLL on freshly back-translated pairs.
pub fn bt_loss(model: &mut TcsModel, src: &[TaggedSentence], tgt: &[TaggedSentence]) -> (f64, Grads) {
    let batches = bt_batches(model, src, tgt);
    let o = objective(model, &batches);
    (o.loss, o.grads)
}

/// Bias-corrected Adam. A parameter without a gradient in a step is left untouched,
/// moments included, so paths that were not computed stay bitwise fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    state: BTreeMap<usize, (Mat, Mat, i32)>,
}

impl Adam {
    pub fn new(lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            state: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, model: &mut TcsModel, grads: &Grads) {
        let params = model.params_mut();
        for (&i, g) in grads {
            let (m, v, t) = self
                .state
                .entry(i)
                .or_insert_with(|| (Mat::zeros(g.raw_dim()), Mat::zeros(g.raw_dim()), 0));
            *t += 1;
            let (b1, b2) = (self.beta1, self.beta2);
            m.zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            v.zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            let c1 = 1.0 - b1.powi(*t);
            let c2 = 1.0 - b2.powi(*t);
            let (lr, eps) = (self.lr, self.eps);
            let w = &mut params[i].value;
            ndarray::Zip::from(w).and(&*m).and(&*v).for_each(|w, &m, &v| {
                *w -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        }
    }
}

pub fn dae_step(model: &mut TcsModel, opt: &mut Adam, batch: &[TaggedSentence], side: Side, cfg: &NoiseConfig) -> f64 {
    let (loss, grads) = dae_loss(model, batch, side, cfg);
    opt.step(model, &grads);
    loss
}

pub fn ce_step(model: &mut TcsModel, opt: &mut Adam, pairs: &[(TaggedSentence, TaggedSentence)]) -> f64 {
    let (loss, grads) = ce_loss(model, pairs);
    opt.step(model, &grads);
    loss
}

/// Regenerates pseudo-pairs with the current model, then takes one supervised step on them.
pub fn bt_step(model: &mut TcsModel, opt: &mut Adam, src: &[TaggedSentence], tgt: &[TaggedSentence]) -> f64 {
    let (loss, grads) = bt_loss(model, src, tgt);
    opt.step(model, &grads);
    loss
}

/// Per-tensor gradient check: `max ‖a − n‖ / (‖a‖ + ‖n‖)` over all parameters, with central
/// differences of step `h`. Tensors whose analytic and numeric gradients are both zero count as 0.
pub fn gradient_check(model: &TcsModel, batches: &[PathBatch], h: f64) -> Vec<(String, f64)> {
    let analytic = objective(model, batches).grads;
    let mut probe = model.clone();
    let mut out = Vec::new();
    for i in 0..model.params().len() {
        let shape = model.params()[i].value.raw_dim();
        let mut numeric = Mat::zeros(shape.clone());
        for k in 0..numeric.len() {
            let orig = probe.params()[i].value.as_slice().expect("standard layout")[k];
            probe.params_mut()[i].value.as_slice_mut().expect("standard layout")[k] = orig + h;
            let plus = objective(&probe, batches).loss;
            probe.params_mut()[i].value.as_slice_mut().expect("standard layout")[k] = orig - h;
            let minus = objective(&probe, batches).loss;
            probe.params_mut()[i].value.as_slice_mut().expect("standard layout")[k] = orig;
            numeric.as_slice_mut().expect("standard layout")[k] = (plus - minus) / (2.0 * h);
        }
        let a = analytic.get(&i).cloned().unwrap_or_else(|| Mat::zeros(shape));
        let norm = |m: &Mat| m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let denom = norm(&a) + norm(&numeric);
        let rel = if denom == 0.0 { 0.0 } else { norm(&(&a - &numeric)) / denom };
        out.push((model.params()[i].name.clone(), rel));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use crate::tcs::model::{ModelConfig, Partition, Vocab};

    fn sent(id: &str, text: &str) -> TaggedSentence {
        TaggedSentence::from_text(id, text, Source::Real).unwrap()
    }

    fn tiny() -> TcsModel {
        let cfg = ModelConfig {
            d_model: 8,
            n_heads: 2,
            d_ff: 16,
            max_len: 5,
        };
        TcsModel::new(Vocab::new(["a", "b", "c", "घर", "पानी"]), cfg, 11).unwrap()
    }

    #[test]
    fn losses_are_finite_and_positive_at_init() {
        let mut m = tiny();
        let hi = [sent("1", "घर पानी"), sent("2", "पानी")];
        let en = [sent("1", "a b c"), sent("2", "c a")];
        let (dae, _) = dae_loss(&m, &hi, Side::Src, &NoiseConfig::default());
        let pairs: Vec<_> = hi.iter().cloned().zip(en.iter().cloned()).collect();
        let (ce, _) = ce_loss(&m, &pairs);
        let (bt, _) = bt_loss(&mut m, &hi, &en);
        for l in [dae, ce, bt] {
            assert!(l.is_finite() && l > 0.0);
        }
        assert_eq!(m.pseudo_pairs_generated, 4);
    }

    #[test]
    fn src_dae_touches_only_its_path() {
        let m = tiny();
        let (_, grads) = dae_loss(&m, &[sent("1", "घर पानी a")], Side::Src, &NoiseConfig::default());
        for (&i, _) in &grads {
            let part = m.params()[i].partition;
            assert!(!matches!(part, Partition::EncP1 | Partition::DecP1), "{}", m.params()[i].name);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = tiny();
        let pairs = vec![(sent("1", "घर पानी"), sent("1", "a b"))];
        let batches = ce_batches(&m, &pairs);
        for (name, rel) in gradient_check(&m, &batches, 1e-5) {
            assert!(rel < 1e-4, "{name}: {rel}");
        }
    }

    #[test]
    fn adam_skips_parameters_without_gradients() {
        let mut m = tiny();
        let before = m.clone();
        let mut opt = Adam::new(1e-2);
        ce_step(&mut m, &mut opt, &[(sent("1", "a"), sent("1", "b"))]);
        dae_step(&mut m, &mut opt, &[sent("1", "घर")], Side::Src, &NoiseConfig::default());
        let mid = m.clone();
        dae_step(&mut m, &mut opt, &[sent("1", "घर")], Side::Src, &NoiseConfig::default());
        assert!(!m.partition_bits_equal(&before, Partition::EncP1));
        assert!(m.partition_bits_equal(&mid, Partition::EncP1));
        assert!(m.partition_bits_equal(&mid, Partition::DecP1));
        assert!(!m.partition_bits_equal(&mid, Partition::EncP0));
    }
}
