//! Transformer encoder-decoder with one private and two shared layers per stack.
//!
//! Hindi (source side, index 0) runs through `enc_p0` and `dec_p0`; English or
//! code-switched text (target side, index 1) runs through `enc_p1` and `dec_p1`.
//! Every layer is pre-norm; the embedding table is shared by all paths.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{softmax_rows, Graph, Mat, ParamSource, Var};
use super::{Result, TcsError};
use crate::corpus::{Corpus, Source, Token, TaggedSentence};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Embed,
    EncP0,
    EncP1,
    EncSh,
    DecSh,
    DecP0,
    DecP1,
}

impl Partition {
    pub const ALL: [Partition; 7] = [
        Partition::Embed,
        Partition::EncP0,
        Partition::EncP1,
        Partition::EncSh,
        Partition::DecSh,
        Partition::DecP0,
        Partition::DecP1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Embed => "embed",
            Partition::EncP0 => "enc_p0",
            Partition::EncP1 => "enc_p1",
            Partition::EncSh => "enc_sh",
            Partition::DecSh => "dec_sh",
            Partition::DecP0 => "dec_p0",
            Partition::DecP1 => "dec_p1",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Partition> {
        Partition::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Language side of a path: `Src` is Hindi, `Tgt` is English or code-switched text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Src,
    Tgt,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Src => Side::Tgt,
            Side::Tgt => Side::Src,
        }
    }

    fn index(self) -> usize {
        match self {
            Side::Src => 0,
            Side::Tgt => 1,
        }
    }

    pub fn encoder_partition(self) -> Partition {
        [Partition::EncP0, Partition::EncP1][self.index()]
    }

    pub fn decoder_partition(self) -> Partition {
        [Partition::DecP0, Partition::DecP1][self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Src2Tgt,
    Tgt2Src,
}

impl Direction {
    pub fn path(self) -> Path {
        match self {
            Direction::Src2Tgt => Path::new(Side::Src, Side::Tgt),
            Direction::Tgt2Src => Path::new(Side::Tgt, Side::Src),
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::Src2Tgt => Direction::Tgt2Src,
            Direction::Tgt2Src => Direction::Src2Tgt,
        }
    }
}

/// Encoder side and decoder side; equal sides give an autoencoding path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Path {
    pub enc: Side,
    pub dec: Side,
}

impl Path {
    pub fn new(enc: Side, dec: Side) -> Path {
        Path { enc, dec }
    }

    pub fn autoencode(side: Side) -> Path {
        Path::new(side, side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    /// Decoding length limit.
    pub max_len: usize,
}

const MAX_DIM: usize = 4096;

impl ModelConfig {
    pub fn desk() -> ModelConfig {
        ModelConfig {
            d_model: 64,
            n_heads: 2,
            d_ff: 128,
            max_len: 32,
        }
    }

    pub fn paper() -> ModelConfig {
        ModelConfig {
            d_model: 256,
            n_heads: 4,
            d_ff: 1024,
            max_len: 64,
        }
    }

    pub fn preset(name: &str) -> Option<ModelConfig> {
        match name {
            "desk" => Some(ModelConfig::desk()),
            "paper" => Some(ModelConfig::paper()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.d_model > 0
            && self.n_heads > 0
            && self.d_model % self.n_heads == 0
            && self.d_ff > 0
            && self.max_len > 0
            && self.d_model <= MAX_DIM
            && self.d_ff <= 4 * MAX_DIM
            && self.max_len <= 1 << 16;
        if ok {
            Ok(())
        } else {
            Err(TcsError::Config(format!("invalid model shape {self:?}")))
        }
    }
}

/// Token inventory shared by both sides. Ids 0, 1, 2 are `<unk>`, `<s>`, `</s>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Sorted, deduplicated `words` after the three markers; markers in `words` are ignored.
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Vocab {
        let mut rest: Vec<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| w != UNK && w != BOS && w != EOS)
            .collect();
        rest.sort();
        rest.dedup();
        let mut tokens = vec![UNK.to_string(), BOS.to_string(), EOS.to_string()];
        tokens.extend(rest);
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    pub fn from_corpora<'c>(corpora: impl IntoIterator<Item = &'c Corpus>) -> Vocab {
        let mut words = Vec::new();
        for c in corpora {
            for s in c {
                words.extend(s.surfaces().map(str::to_string));
            }
        }
        Vocab::new(words)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, w: &str) -> usize {
        match self.index.get(w) {
            Some(&i) if i != BOS_ID && i != EOS_ID => i,
            _ => UNK_ID,
        }
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode(&self, s: &TaggedSentence) -> Vec<usize> {
        s.surfaces().map(|w| self.id(w)).collect()
    }

    /// Rebuilds a sentence from ids, retagging each token by script.
    pub fn decode(&self, id: impl Into<String>, ids: &[usize], source: Source) -> Result<TaggedSentence> {
        let tokens = ids
            .iter()
            .map(|&i| Token::tagged(self.token(i)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TaggedSentence::new(id, tokens, source)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub partition: Partition,
    pub value: Mat,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    /// Glorot uniform.
    Glorot,
    /// Uniform with variance `1 / d`.
    Embedding,
}

#[derive(Debug, Clone, PartialEq)]
struct Attn {
    wq: usize,
    bq: usize,
    /// Keys carry no bias: it would shift every score in a row equally.
    wk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Ffn {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct EncLayer {
    ln1: Norm,
    attn: Attn,
    ln2: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone, PartialEq)]
struct DecLayer {
    ln1: Norm,
    self_attn: Attn,
    ln2: Norm,
    cross: Attn,
    ln3: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    embed: usize,
    enc_private: [EncLayer; 2],
    enc_shared: [EncLayer; 2],
    enc_norm: Norm,
    dec_shared: [DecLayer; 2],
    dec_private: [DecLayer; 2],
    dec_norm: [Norm; 2],
    out_w: [usize; 2],
    out_b: [usize; 2],
}

struct Builder {
    d: usize,
    d_ff: usize,
    specs: Vec<(String, Partition, (usize, usize), Init)>,
}

impl Builder {
    fn add(&mut self, name: String, part: Partition, shape: (usize, usize), init: Init) -> usize {
        self.specs.push((name, part, shape, init));
        self.specs.len() - 1
    }

    fn norm(&mut self, prefix: &str, part: Partition) -> Norm {
        let d = self.d;
        Norm {
            g: self.add(format!("{prefix}.g"), part, (1, d), Init::Ones),
            b: self.add(format!("{prefix}.b"), part, (1, d), Init::Zeros),
        }
    }

    fn attn(&mut self, prefix: &str, part: Partition) -> Attn {
        let d = self.d;
        let w = |b: &mut Builder, n: &str| b.add(format!("{prefix}.{n}"), part, (d, d), Init::Glorot);
        let wq = w(self, "wq");
        let wk = w(self, "wk");
        let wv = w(self, "wv");
        let wo = w(self, "wo");
        let b = |b: &mut Builder, n: &str| b.add(format!("{prefix}.{n}"), part, (1, d), Init::Zeros);
        Attn {
            wq,
            bq: b(self, "bq"),
            wk,
            wv,
            bv: b(self, "bv"),
            wo,
            bo: b(self, "bo"),
        }
    }

    fn ffn(&mut self, prefix: &str, part: Partition) -> Ffn {
        let (d, f) = (self.d, self.d_ff);
        Ffn {
            w1: self.add(format!("{prefix}.w1"), part, (d, f), Init::Glorot),
            b1: self.add(format!("{prefix}.b1"), part, (1, f), Init::Zeros),
            w2: self.add(format!("{prefix}.w2"), part, (f, d), Init::Glorot),
            b2: self.add(format!("{prefix}.b2"), part, (1, d), Init::Zeros),
        }
    }

    fn enc_layer(&mut self, prefix: &str, part: Partition) -> EncLayer {
        EncLayer {
            ln1: self.norm(&format!("{prefix}.ln1"), part),
            attn: self.attn(&format!("{prefix}.attn"), part),
            ln2: self.norm(&format!("{prefix}.ln2"), part),
            ffn: self.ffn(&format!("{prefix}.ffn"), part),
        }
    }

    fn dec_layer(&mut self, prefix: &str, part: Partition) -> DecLayer {
        DecLayer {
            ln1: self.norm(&format!("{prefix}.ln1"), part),
            self_attn: self.attn(&format!("{prefix}.self_attn"), part),
            ln2: self.norm(&format!("{prefix}.ln2"), part),
            cross: self.attn(&format!("{prefix}.cross"), part),
            ln3: self.norm(&format!("{prefix}.ln3"), part),
            ffn: self.ffn(&format!("{prefix}.ffn"), part),
        }
    }
}

/// Parameter specs (name, partition, shape, init) and the index layout, in checkpoint order.
fn build_layout(cfg: &ModelConfig, vocab_len: usize) -> (Layout, Vec<(String, Partition, (usize, usize), Init)>) {
    use Partition::*;
    let mut b = Builder {
        d: cfg.d_model,
        d_ff: cfg.d_ff,
        specs: Vec::new(),
    };
    let d = cfg.d_model;
    let embed = b.add("embed".into(), Embed, (vocab_len, d), Init::Embedding);
    let enc_private = [b.enc_layer("enc_p0.0", EncP0), b.enc_layer("enc_p1.0", EncP1)];
    let enc_shared = [b.enc_layer("enc_sh.0", EncSh), b.enc_layer("enc_sh.1", EncSh)];
    let enc_norm = b.norm("enc_sh.ln", EncSh);
    let dec_shared = [b.dec_layer("dec_sh.0", DecSh), b.dec_layer("dec_sh.1", DecSh)];
    let dec_private = [b.dec_layer("dec_p0.0", DecP0), b.dec_layer("dec_p1.0", DecP1)];
    let dec_norm = [b.norm("dec_p0.ln", DecP0), b.norm("dec_p1.ln", DecP1)];
    let out_w = [
        b.add("dec_p0.out.w".into(), DecP0, (d, vocab_len), Init::Glorot),
        b.add("dec_p1.out.w".into(), DecP1, (d, vocab_len), Init::Glorot),
    ];
    let out_b = [
        b.add("dec_p0.out.b".into(), DecP0, (1, vocab_len), Init::Zeros),
        b.add("dec_p1.out.b".into(), DecP1, (1, vocab_len), Init::Zeros),
    ];
    let layout = Layout {
        embed,
        enc_private,
        enc_shared,
        enc_norm,
        dec_shared,
        dec_private,
        dec_norm,
        out_w,
        out_b,
    };
    (layout, b.specs)
}

/// Names, partitions and shapes of every parameter, in checkpoint order.
pub fn parameter_shapes(cfg: &ModelConfig, vocab_len: usize) -> Vec<(String, Partition, (usize, usize))> {
    build_layout(cfg, vocab_len).1.into_iter().map(|(n, p, s, _)| (n, p, s)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcsModel {
    cfg: ModelConfig,
    vocab: Vocab,
    params: Vec<Param>,
    layout: Layout,
    /// Pseudo-parallel pairs produced by back-translation so far; not persisted.
    pub pseudo_pairs_generated: u64,
}

impl ParamSource for TcsModel {
    fn param_value(&self, index: usize) -> &Mat {
        &self.params[index].value
    }
}

/// Sinusoidal position table, `len × d`.
pub fn positional_encoding(len: usize, d: usize) -> Mat {
    Mat::from_shape_fn((len, d), |(pos, i)| {
        let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
        let angle = pos as f64 * rate;
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

impl TcsModel {
    /// Freshly initialized model; every tensor draws from its own seeded stream.
    pub fn new(vocab: Vocab, cfg: ModelConfig, seed: u64) -> Result<TcsModel> {
        cfg.validate()?;
        let (layout, specs) = build_layout(&cfg, vocab.len());
        let params = specs
            .into_iter()
            .map(|(name, partition, (r, c), init)| {
                let mut rng = crate::rng::stream_rng(seed, &name, 0);
                let value = match init {
                    Init::Zeros => Mat::zeros((r, c)),
                    Init::Ones => Mat::ones((r, c)),
                    Init::Glorot => {
                        let a = (6.0 / (r + c) as f64).sqrt();
                        Mat::from_shape_simple_fn((r, c), || rng.random_range(-a..a))
                    }
                    Init::Embedding => {
                        let a = (3.0 / c as f64).sqrt();
                        Mat::from_shape_simple_fn((r, c), || rng.random_range(-a..a))
                    }
                };
                Param { name, partition, value }
            })
            .collect();
        Ok(TcsModel {
            cfg,
            vocab,
            params,
            layout,
            pseudo_pairs_generated: 0,
        })
    }

    /// Assembles a model from decoded tensors; names, partitions and shapes must match the layout.
    pub fn from_params(vocab: Vocab, cfg: ModelConfig, params: Vec<Param>) -> Result<TcsModel> {
        cfg.validate()?;
        let (layout, specs) = build_layout(&cfg, vocab.len());
        if specs.len() != params.len() {
            return Err(TcsError::Config(format!(
                "expected {} tensors, found {}",
                specs.len(),
                params.len()
            )));
        }
        for ((name, part, shape, _), p) in specs.iter().zip(&params) {
            if *name != p.name || *part != p.partition || *shape != p.value.dim() {
                return Err(TcsError::Config(format!("tensor {} does not match the layout", p.name)));
            }
        }
        Ok(TcsModel {
            cfg,
            vocab,
            params,
            layout,
            pseudo_pairs_generated: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn n_parameters(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Whether two models hold bitwise-identical values in `part`.
    pub fn partition_bits_equal(&self, other: &TcsModel, part: Partition) -> bool {
        self.params
            .iter()
            .zip(&other.params)
            .filter(|(a, _)| a.partition == part)
            .all(|(a, b)| a.value.iter().zip(b.value.iter()).all(|(x, y)| x.to_bits() == y.to_bits()))
    }

    fn norm<'a>(&'a self, g: &mut Graph<'a>, n: Norm, x: Var) -> Var {
        let gain = g.param(self, n.g);
        let bias = g.param(self, n.b);
        g.layer_norm(x, gain, bias)
    }

    fn linear<'a>(&'a self, g: &mut Graph<'a>, x: Var, w: usize, b: usize) -> Var {
        let w = g.param(self, w);
        let b = g.param(self, b);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }

    fn attention<'a>(&'a self, g: &mut Graph<'a>, a: &Attn, x: Var, mem: Var, causal: bool) -> Var {
        let q = self.linear(g, x, a.wq, a.bq);
        let wk = g.param(self, a.wk);
        let k = g.matmul(mem, wk);
        let v = self.linear(g, mem, a.wv, a.bv);
        let dh = self.cfg.d_model / self.cfg.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let heads: Vec<Var> = (0..self.cfg.n_heads)
            .map(|h| {
                let (lo, hi) = (h * dh, (h + 1) * dh);
                let (qh, kh, vh) = if self.cfg.n_heads == 1 {
                    (q, k, v)
                } else {
                    (g.slice_cols(q, lo, hi), g.slice_cols(k, lo, hi), g.slice_cols(v, lo, hi))
                };
                let scores = g.matmul_t(qh, kh);
                let scores = g.scale(scores, scale);
                let weights = g.softmax(scores, causal);
                g.matmul(weights, vh)
            })
            .collect();
        let joined = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads) };
        self.linear(g, joined, a.wo, a.bo)
    }

    fn ffn<'a>(&'a self, g: &mut Graph<'a>, f: &Ffn, x: Var) -> Var {
        let h = self.linear(g, x, f.w1, f.b1);
        let h = g.relu(h);
        self.linear(g, h, f.w2, f.b2)
    }

    fn enc_layer<'a>(&'a self, g: &mut Graph<'a>, l: &EncLayer, x: Var) -> Var {
        let h = self.norm(g, l.ln1, x);
        let a = self.attention(g, &l.attn, h, h, false);
        let x = g.add(x, a);
        let h = self.norm(g, l.ln2, x);
        let f = self.ffn(g, &l.ffn, h);
        g.add(x, f)
    }

    fn dec_layer<'a>(&'a self, g: &mut Graph<'a>, l: &DecLayer, x: Var, mem: Var) -> Var {
        let h = self.norm(g, l.ln1, x);
        let a = self.attention(g, &l.self_attn, h, h, true);
        let x = g.add(x, a);
        let h = self.norm(g, l.ln2, x);
        let c = self.attention(g, &l.cross, h, mem, false);
        let x = g.add(x, c);
        let h = self.norm(g, l.ln3, x);
        let f = self.ffn(g, &l.ffn, h);
        g.add(x, f)
    }

    fn embed<'a>(&'a self, g: &mut Graph<'a>, ids: &[usize]) -> Var {
        let table = g.param(self, self.layout.embed);
        let e = g.gather(table, ids);
        let e = g.scale(e, (self.cfg.d_model as f64).sqrt());
        let pe = g.input(positional_encoding(ids.len(), self.cfg.d_model));
        g.add(e, pe)
    }

    /// Encoder states for `ids` (an end marker is appended) through `side`'s private layer.
    pub fn encode<'a>(&'a self, g: &mut Graph<'a>, ids: &[usize], side: Side) -> Var {
        let mut input = ids.to_vec();
        input.push(EOS_ID);
        let mut x = self.embed(g, &input);
        x = self.enc_layer(g, &self.layout.enc_private[side.index()], x);
        for l in &self.layout.enc_shared {
            x = self.enc_layer(g, l, x);
        }
        self.norm(g, self.layout.enc_norm, x)
    }

    /// Next-token logits (`len(prefix) × |V|`) for a decoder prefix that starts with `<s>`.
    pub fn decode_logits<'a>(&'a self, g: &mut Graph<'a>, mem: Var, prefix: &[usize], side: Side) -> Var {
        let mut x = self.embed(g, prefix);
        for l in &self.layout.dec_shared {
            x = self.dec_layer(g, l, x, mem);
        }
        x = self.dec_layer(g, &self.layout.dec_private[side.index()], x, mem);
        let x = self.norm(g, self.layout.dec_norm[side.index()], x);
        self.linear(g, x, self.layout.out_w[side.index()], self.layout.out_b[side.index()])
    }

    /// Summed teacher-forced NLL of `tgt` (plus end marker) given `src`, and the number of predictions.
    pub fn sequence_nll<'a>(&'a self, g: &mut Graph<'a>, src: &[usize], tgt: &[usize], path: Path) -> (Var, usize) {
        let mem = self.encode(g, src, path.enc);
        let mut prefix = Vec::with_capacity(tgt.len() + 1);
        prefix.push(BOS_ID);
        prefix.extend_from_slice(tgt);
        let logits = self.decode_logits(g, mem, &prefix, path.dec);
        let mut targets = tgt.to_vec();
        targets.push(EOS_ID);
        (g.cross_entropy(logits, &targets), targets.len())
    }

    /// Per-position output distributions under teacher forcing (`len(tgt) + 1` rows).
    pub fn output_distributions(&self, src: &[usize], tgt: &[usize], path: Path) -> Mat {
        let mut g = Graph::new();
        let mem = self.encode(&mut g, src, path.enc);
        let mut prefix = vec![BOS_ID];
        prefix.extend_from_slice(tgt);
        let logits = self.decode_logits(&mut g, mem, &prefix, path.dec);
        softmax_rows(g.value(logits), false)
    }

    /// Greedy decoding. `<s>` is never emitted and `</s>` is blocked at the first step,
    /// so the output has between 1 and `max_len` tokens.
    pub fn greedy_ids(&self, src: &[usize], path: Path, max_len: usize) -> Vec<usize> {
        let mut enc = Graph::new();
        let mem = self.encode(&mut enc, src, path.enc);
        let mem = enc.value(mem).clone();
        let mut prefix = vec![BOS_ID];
        while prefix.len() <= max_len.max(1) {
            let mut g = Graph::new();
            let m = g.input(mem.clone());
            let logits = self.decode_logits(&mut g, m, &prefix, path.dec);
            let last = g.value(logits).row(prefix.len() - 1).to_owned();
            let mut best = (f64::NEG_INFINITY, UNK_ID);
            for (id, &v) in last.iter().enumerate() {
                if id == BOS_ID || (id == EOS_ID && prefix.len() == 1) {
                    continue;
                }
                if v > best.0 {
                    best = (v, id);
                }
            }
            if best.1 == EOS_ID {
                break;
            }
            prefix.push(best.1);
        }
        prefix.remove(0);
        prefix
    }

    pub fn translate(&self, s: &TaggedSentence, direction: Direction, max_len: usize) -> Result<TaggedSentence> {
        let ids = self.greedy_ids(&self.vocab.encode(s), direction.path(), max_len);
        self.vocab.decode(s.id(), &ids, Source::Tcs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TcsModel {
        let cfg = ModelConfig {
            d_model: 8,
            n_heads: 2,
            d_ff: 16,
            max_len: 6,
        };
        TcsModel::new(Vocab::new(["a", "b", "c", "घर"]), cfg, 3).unwrap()
    }

    #[test]
    fn every_parameter_has_one_partition_and_each_partition_is_used() {
        let m = tiny();
        for part in Partition::ALL {
            assert!(m.params().iter().any(|p| p.partition == part), "{part} is empty");
        }
        for p in m.params() {
            assert!(p.name.starts_with(p.partition.as_str()), "{} in {}", p.name, p.partition);
        }
        let mut names: Vec<&str> = m.params().iter().map(|p| p.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), m.params().len());
    }

    #[test]
    fn distributions_normalize() {
        let m = tiny();
        for dir in [Direction::Src2Tgt, Direction::Tgt2Src] {
            let p = m.output_distributions(&[3, 4, 5], &[6, 3], dir.path());
            assert_eq!(p.nrows(), 3);
            for row in p.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn untrained_translation_shape() {
        let m = tiny();
        let s = TaggedSentence::from_text("x", "a घर zzz", Source::Real).unwrap();
        for dir in [Direction::Src2Tgt, Direction::Tgt2Src] {
            let out = m.translate(&s, dir, 5).unwrap();
            assert!(!out.is_empty() && out.len() <= 5);
            assert!(out.surfaces().all(|w| w != BOS && w != EOS));
        }
    }

    #[test]
    fn init_is_seeded() {
        let a = tiny();
        let b = tiny();
        assert_eq!(a, b);
        let c = TcsModel::new(a.vocab().clone(), *a.config(), 4).unwrap();
        assert_ne!(a.params()[0].value, c.params()[0].value);
    }

    #[test]
    fn vocab_markers() {
        let v = Vocab::new(["b", "a", "a", "<s>"]);
        assert_eq!(v.tokens(), &["<unk>", "<s>", "</s>", "a", "b"]);
        assert_eq!(v.id("a"), 3);
        assert_eq!(v.id("zzz"), UNK_ID);
        assert_eq!(v.id("</s>"), UNK_ID);
    }
}
