//! Training-loop behaviour of the translation model on tiny tasks.

use csforge::corpus::{Source, TaggedSentence};
use csforge::eval::corpus_bleu_tokens;
use csforge::tcs::checkpoint::{decode_model, encode_model};
use csforge::tcs::curriculum::round_trip_bleu;
use csforge::tcs::train::{bt_loss, ce_loss};
use csforge::tcs::{bt_step, ce_step, dae_loss, dae_step, Adam, Direction, ModelConfig, NoiseConfig, Partition, Side, TcsModel, Vocab};

const PARTITIONS: [Partition; 7] = [
    Partition::Embed,
    Partition::EncP0,
    Partition::EncP1,
    Partition::EncSh,
    Partition::DecSh,
    Partition::DecP0,
    Partition::DecP1,
];

fn sent(id: &str, text: &str) -> TaggedSentence {
    TaggedSentence::from_text(id, text, Source::Real).unwrap()
}

fn small() -> ModelConfig {
    ModelConfig { d_model: 16, n_heads: 2, d_ff: 32, max_len: 8 }
}

fn hindi() -> Vec<TaggedSentence> {
    ["राम घर को गया", "सीता ठंडा पानी पीती है", "लड़का किताब पढ़ता है", "घर बहुत बड़ा है"]
        .iter()
        .enumerate()
        .map(|(i, t)| sent(&format!("h{i}"), t))
        .collect()
}

fn copy_pairs() -> Vec<(TaggedSentence, TaggedSentence)> {
    hindi().into_iter().map(|s| (s.clone(), s)).collect()
}

fn model(seed: u64) -> TcsModel {
    let words: Vec<String> = hindi().iter().flat_map(|s| s.surfaces().map(String::from).collect::<Vec<_>>()).collect();
    TcsModel::new(Vocab::new(words), small(), seed).unwrap()
}

fn clean() -> NoiseConfig {
    NoiseConfig { p_drop: 0.0, shuffle_window: 0, seed: 0 }
}

fn train_copy(m: &mut TcsModel, max_steps: usize) -> f64 {
    let mut opt = Adam::new(1e-2);
    let pairs = copy_pairs();
    let mut loss = f64::INFINITY;
    for _ in 0..max_steps {
        loss = ce_step(m, &mut opt, &pairs);
        if loss < 1e-3 {
            break;
        }
    }
    loss
}

#[test]
fn dae_overfits_one_sentence() {
    let mut m = model(1);
    let mut opt = Adam::new(1e-2);
    let s = [sent("one", "राम घर गया")];
    let initial = dae_loss(&m, &s, Side::Src, &clean()).0;
    assert!(initial.is_finite() && initial > 0.0);
    for _ in 0..400 {
        if dae_step(&mut m, &mut opt, &s, Side::Src, &clean()) < 0.005 {
            break;
        }
    }
    let last = dae_loss(&m, &s, Side::Src, &clean()).0;
    assert!(last < 0.01, "final DAE loss {last}");
}

#[test]
fn ce_overfits_copy_corpus_and_round_trips() {
    let mut m = model(2);
    train_copy(&mut m, 600);
    let (loss, _) = ce_loss(&m, &copy_pairs());
    assert!(loss < 0.01, "final CE loss {loss}");
    for s in hindi() {
        let there = m.translate(&s, Direction::Src2Tgt, 8).unwrap();
        let back = m.translate(&there, Direction::Tgt2Src, 8).unwrap();
        assert_eq!(back.text(), s.text());
    }
    assert_eq!(round_trip_bleu(&m, &hindi()), 100.0);
}

#[test]
fn ce_decreases_under_smoothing() {
    let mut m = model(3);
    let mut opt = Adam::new(1e-3);
    let pairs = copy_pairs();
    let losses: Vec<f64> = (0..100).map(|_| ce_step(&mut m, &mut opt, &pairs)).collect();
    let smooth: Vec<f64> = losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    for (i, w) in smooth.windows(2).enumerate() {
        assert!(w[1] <= w[0], "smoothed loss rose at step {}: {} -> {}", i + 5, w[0], w[1]);
    }
    assert!(losses[99] < losses[0]);
}

#[test]
fn bt_equals_ce_on_an_overfit_copy_task() {
    let mut m = model(4);
    train_copy(&mut m, 600);
    let pairs = copy_pairs();
    let (ce, _) = ce_loss(&m, &pairs);
    let src: Vec<_> = pairs.iter().map(|p| p.0.clone()).collect();
    let tgt: Vec<_> = pairs.iter().map(|p| p.1.clone()).collect();
    let (bt, _) = bt_loss(&mut m, &src, &tgt);
    assert!((bt - ce).abs() <= 1e-9 * ce.max(1e-12) + 1e-12, "bt {bt} ce {ce}");
}

#[test]
fn pseudo_pairs_are_regenerated_every_step() {
    let mut m = model(5);
    let mut opt = Adam::new(1e-3);
    let src = hindi();
    let tgt = vec![sent("e0", "ram went home"), sent("e1", "sita drinks")];
    for step in 1..=4u64 {
        bt_step(&mut m, &mut opt, &src, &tgt);
        assert_eq!(m.pseudo_pairs_generated, step * (src.len() + tgt.len()) as u64);
    }
}

#[test]
fn output_distributions_normalize() {
    for seed in 0..5 {
        let m = model(seed);
        let v = m.vocab();
        for (s, t) in copy_pairs() {
            for d in [Direction::Src2Tgt, Direction::Tgt2Src] {
                let probs = m.output_distributions(&v.encode(&s), &v.encode(&t), d.path());
                assert_eq!(probs.nrows(), t.len() + 1);
                for row in probs.rows() {
                    assert!((row.sum() - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}

fn mixed_run(seed: u64) -> Vec<f64> {
    let mut m = model(seed);
    let mut opt = Adam::new(1e-3);
    let hi = hindi();
    let pairs = copy_pairs();
    let noisy = NoiseConfig::default().with_seed(seed);
    let mut out = Vec::new();
    for _ in 0..6 {
        out.push(dae_step(&mut m, &mut opt, &hi, Side::Src, &noisy));
        out.push(ce_step(&mut m, &mut opt, &pairs));
        out.push(bt_step(&mut m, &mut opt, &hi, &hi));
    }
    out
}

#[test]
fn single_thread_runs_are_bitwise_deterministic() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (a, b) = pool.install(|| (mixed_run(6), mixed_run(6)));
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&pool.install(|| mixed_run(7))));
}

#[test]
fn checkpoint_roundtrip_is_identity() {
    let mut m = model(8);
    train_copy(&mut m, 20);
    let bytes = encode_model(&m);
    let back = decode_model(&bytes).unwrap();
    for p in PARTITIONS {
        assert!(back.partition_bits_equal(&m, p), "{p:?}");
    }
    assert_eq!(back.config(), m.config());
    assert_eq!(back.vocab().tokens(), m.vocab().tokens());
    assert_eq!(encode_model(&back), bytes);
    let s = &hindi()[0];
    assert_eq!(
        back.translate(s, Direction::Src2Tgt, 8).unwrap().text(),
        m.translate(s, Direction::Src2Tgt, 8).unwrap().text()
    );
}

#[test]
fn memorized_pairs_score_full_bleu() {
    let mut m = model(9);
    train_copy(&mut m, 600);
    let (hyps, refs): (Vec<Vec<String>>, Vec<Vec<String>>) = hindi()
        .iter()
        .map(|s| {
            let out = m.translate(s, Direction::Src2Tgt, 8).unwrap();
            (out.surfaces().map(String::from).collect(), s.surfaces().map(String::from).collect())
        })
        .unzip();
    assert_eq!(corpus_bleu_tokens(&hyps, &refs).unwrap().score, 100.0);
}
