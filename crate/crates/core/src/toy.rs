//! A tiny synthetic Hindi / code-switched language pair.
//!
//! Hindi sentences follow `[ADJ] N [ADJ] N को V AUX`. The "real" code-switched
//! rendering switches every noun and adjective to English and keeps the verb,
//! case marker and auxiliary in Hindi. Synthetic code-switched text comes from
//! LEX substitution over a lexicon that also covers verbs, so it is a noisy
//! approximation of the real rule.

use std::collections::HashSet;
use std::io;
use std::path::Path;

use rand::Rng;

use crate::corpus::{Corpus, ParallelCorpus, Source, TaggedSentence};
use crate::emtgen::Alignment;
use crate::ops::write_atomic;
use crate::lexgen::{generate_lex_corpus, LexConfig, Lexicon};
use crate::rng::stream_rng;
use crate::tcs::curriculum::{CorpusRegistry, CurriculumConfig, CurriculumStage, Mode, StageData};
use crate::tcs::{LossWeights, ModelConfig, NoiseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pos {
    Noun,
    Adj,
    Verb,
}

const NOUNS: &[(&str, &str)] = &[
    ("लड़का", "boy"),
    ("लड़की", "girl"),
    ("किताब", "book"),
    ("घर", "house"),
    ("पानी", "water"),
    ("खाना", "food"),
    ("दोस्त", "friend"),
    ("शिक्षक", "teacher"),
    ("बच्चा", "child"),
    ("कुत्ता", "dog"),
    ("बिल्ली", "cat"),
    ("गाड़ी", "car"),
    ("पेड़", "tree"),
    ("फल", "fruit"),
    ("दूध", "milk"),
    ("कमरा", "room"),
    ("शहर", "city"),
    ("दरवाज़ा", "door"),
    ("खिड़की", "window"),
    ("कलम", "pen"),
    ("मेज़", "table"),
    ("कुर्सी", "chair"),
    ("बाज़ार", "market"),
    ("नदी", "river"),
];

const ADJS: &[(&str, &str)] = &[
    ("बड़ा", "big"),
    ("छोटा", "small"),
    ("अच्छा", "good"),
    ("नया", "new"),
    ("पुराना", "old"),
    ("लाल", "red"),
    ("सुंदर", "beautiful"),
    ("गरम", "hot"),
];

const VERBS: &[(&str, &str)] = &[
    ("देखता", "sees"),
    ("पढ़ता", "reads"),
    ("लाता", "brings"),
    ("खाता", "eats"),
    ("पीता", "drinks"),
    ("बनाता", "makes"),
    ("खोलता", "opens"),
    ("चाहता", "wants"),
];

const AUX: &[&str] = &["है", "था"];
const OBJ_MARKER: &str = "को";

#[derive(Debug, Clone, PartialEq)]
pub struct ToyLanguage {
    words: Vec<(&'static str, &'static str, Pos)>,
}

impl Default for ToyLanguage {
    fn default() -> Self {
        ToyLanguage::new()
    }
}

impl ToyLanguage {
    pub fn new() -> ToyLanguage {
        let mut words = Vec::new();
        words.extend(NOUNS.iter().map(|&(h, e)| (h, e, Pos::Noun)));
        words.extend(ADJS.iter().map(|&(h, e)| (h, e, Pos::Adj)));
        words.extend(VERBS.iter().map(|&(h, e)| (h, e, Pos::Verb)));
        ToyLanguage { words }
    }

    /// One Hindi sentence as words.
    pub fn sample_words(&self, rng: &mut impl Rng) -> Vec<&'static str> {
        let mut w: Vec<&'static str> = Vec::with_capacity(7);
        for _ in 0..2 {
            if rng.random_bool(0.5) {
                w.push(ADJS[rng.random_range(0..ADJS.len())].0);
            }
            w.push(NOUNS[rng.random_range(0..NOUNS.len())].0);
        }
        w.push(OBJ_MARKER);
        w.push(VERBS[rng.random_range(0..VERBS.len())].0);
        w.push(AUX[rng.random_range(0..AUX.len())]);
        w
    }

    /// `n` distinct Hindi sentences with ids `{prefix}{i}`.
    pub fn hindi_corpus(&self, n: usize, prefix: &str, seed: u64) -> Corpus {
        let mut rng = stream_rng(seed, "toy-hindi", 0);
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let text = self.sample_words(&mut rng).join(" ");
            if seen.insert(text.clone()) {
                let id = format!("{prefix}{}", out.len());
                out.push(TaggedSentence::from_text(id, &text, Source::Mono).expect("toy words are valid tokens"));
            }
        }
        Corpus::new(prefix, out).expect("ids are unique")
    }

    /// The rule-based code-switched rendering of a Hindi sentence.
    pub fn real_cs(&self, s: &TaggedSentence) -> TaggedSentence {
        let text: Vec<&str> = s
            .surfaces()
            .map(|w| match self.words.iter().find(|(h, _, _)| *h == w) {
                Some((_, e, Pos::Noun | Pos::Adj)) => *e,
                _ => w,
            })
            .collect();
        TaggedSentence::from_text(s.id(), &text.join(" "), Source::Real).expect("toy words are valid tokens")
    }

    pub fn real_pairs(&self, hindi: &Corpus) -> ParallelCorpus {
        ParallelCorpus::new(hindi.iter().map(|s| (s.clone(), self.real_cs(s))).collect())
    }

    /// Hindi-to-English lexicon over nouns, adjectives and verbs.
    pub fn lexicon(&self) -> Lexicon {
        let mut lex = Lexicon::new();
        for (h, e, _) in &self.words {
            lex.insert(h, &[e]).expect("toy entries are valid");
        }
        lex
    }

    /// Pairs of each Hindi sentence with one LEX rendering at switch probability `p`.
    pub fn synthetic_pairs(&self, hindi: &Corpus, p: f64, seed: u64) -> ParallelCorpus {
        let cfg = LexConfig {
            p_switch: p,
            seed,
            variants_per_sentence: 1,
        };
        let lex = generate_lex_corpus(hindi, &self.lexicon(), &cfg).expect("valid LEX config");
        ParallelCorpus::new(
            hindi
                .iter()
                .zip(lex.iter())
                .map(|(h, c)| (h.clone(), c.clone().with_id(h.id())))
                .collect(),
        )
    }
    /// English rendering of a Hindi template sentence, its bracketed parse and
    /// the English-to-Hindi word alignment.
    ///
    /// `[A1] N1 [A2] N2 को V AUX` becomes `the [a1] n1 v the [a2] n2`; the verb
    /// aligns to both V and AUX, and the determiners stay unaligned.
    pub fn english_view(&self, s: &TaggedSentence) -> (TaggedSentence, String, Alignment) {
        let hi: Vec<&str> = s.surfaces().collect();
        let english = |w: &str| self.words.iter().find(|(h, _, _)| *h == w).map(|(_, e, p)| (*e, *p));
        let marker = hi.iter().position(|w| *w == OBJ_MARKER).expect("template sentence");
        let mut en: Vec<&str> = Vec::new();
        let mut links = Vec::new();
        let np = |range: std::ops::Range<usize>, en: &mut Vec<&'static str>, links: &mut Vec<(usize, usize)>| {
            let mut tree = String::from("(NP (DT the)");
            en.push("the");
            for j in range {
                let (e, pos) = english(hi[j]).expect("template word");
                tree.push_str(&format!(" ({} {e})", if pos == Pos::Adj { "JJ" } else { "NN" }));
                links.push((en.len(), j));
                en.push(e);
            }
            tree + ")"
        };
        let split = if english(hi[0]).map(|(_, p)| p) == Some(Pos::Adj) { 2 } else { 1 };
        let subj = np(0..split, &mut en, &mut links);
        let (verb, _) = english(hi[marker + 1]).expect("template verb");
        links.push((en.len(), marker + 1));
        links.push((en.len(), marker + 2));
        en.push(verb);
        let obj = np(split..marker, &mut en, &mut links);
        let tree = format!("(ROOT (S {subj} (VP (VBZ {verb}) {obj})))");
        let sentence = TaggedSentence::from_text(s.id(), &en.join(" "), Source::Mono).expect("toy words are valid tokens");
        (sentence, tree, Alignment::new(links))
    }
}

/// Corpus sizes for the toy curriculum experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySizes {
    pub synthetic: usize,
    pub mono: usize,
    pub real_train: usize,
    pub real_valid: usize,
    pub real_test: usize,
    pub lex_p: f64,
}

impl Default for ToySizes {
    fn default() -> Self {
        ToySizes {
            synthetic: 300,
            mono: 48,
            real_train: 24,
            real_valid: 24,
            real_test: 60,
            lex_p: 0.7,
        }
    }
}

/// Registry with `syn_pairs` (Hindi to LEX), `hi_mono`, `cs_mono` (LEX text), and the
/// real code-switched splits `real_train`, `real_valid`, `real_test`. All Hindi sentences
/// are distinct across every split.
pub fn toy_registry(sizes: &ToySizes, seed: u64) -> CorpusRegistry {
    let lang = ToyLanguage::new();
    let total = sizes.synthetic + 2 * sizes.mono + sizes.real_train + sizes.real_valid + sizes.real_test;
    let pool = lang.hindi_corpus(total, "t", seed).into_sentences();
    let mut at = 0;
    let mut take = |n: usize, name: &str| {
        let part: Vec<TaggedSentence> = pool[at..at + n].to_vec();
        at += n;
        Corpus::new(name, part).expect("ids are unique")
    };
    let syn = take(sizes.synthetic, "syn");
    let hi_mono = take(sizes.mono, "hi_mono");
    let cs_src = take(sizes.mono, "cs_src");
    let train = take(sizes.real_train, "real_train");
    let valid = take(sizes.real_valid, "real_valid");
    let test = take(sizes.real_test, "real_test");
    let mut reg = CorpusRegistry::new();
    reg.insert_parallel("syn_pairs", lang.synthetic_pairs(&syn, sizes.lex_p, seed));
    reg.insert_mono("hi_mono", hi_mono);
    reg.insert_mono("cs_mono", lang.synthetic_pairs(&cs_src, sizes.lex_p, seed ^ 1).targets());
    reg.insert_parallel("real_train", lang.real_pairs(&train));
    reg.insert_parallel("real_valid", lang.real_pairs(&valid));
    reg.insert_parallel("real_test", lang.real_pairs(&test));
    reg
}

/// Small model used by the toy experiments.
pub fn toy_model() -> ModelConfig {
    ModelConfig {
        d_model: 32,
        n_heads: 2,
        d_ff: 64,
        max_len: 12,
    }
}

fn stage(name: &str, mode: Mode, datasets: StageData, epochs: usize, init_from: Option<&str>) -> CurriculumStage {
    CurriculumStage {
        name: name.into(),
        mode,
        datasets,
        epochs,
        batch_size: 8,
        lr: Some(2e-3),
        init_from: init_from.map(str::to_string),
        valid: None,
        weights: LossWeights::default(),
    }
}

fn parallel(names: &[&str]) -> StageData {
    StageData {
        parallel: names.iter().map(|s| s.to_string()).collect(),
        ..StageData::default()
    }
}

/// Synthetic-CS pretraining (A), a short unsupervised stage (D), then supervised
/// finetuning on the small real set (D2).
pub fn toy_pretrain_finetune(model: ModelConfig, pretrain_epochs: usize, finetune_epochs: usize) -> CurriculumConfig {
    let unsup = StageData {
        src: vec!["hi_mono".into()],
        tgt: vec!["cs_mono".into()],
        ..StageData::default()
    };
    CurriculumConfig {
        corpora: Default::default(),
        preset: None,
        model: Some(model),
        noise: NoiseConfig::default(),
        valid: Some("real_valid".into()),
        test: Some("real_test".into()),
        stages: vec![
            stage("A", Mode::Supervised, parallel(&["syn_pairs"]), pretrain_epochs, None),
            stage("D", Mode::Unsupervised, unsup, 1, Some("A")),
            stage("D2", Mode::Supervised, parallel(&["real_train"]), finetune_epochs, Some("D")),
        ],
    }
}

/// Training from scratch on the small real set only (O).
pub fn toy_from_scratch(model: ModelConfig, epochs: usize) -> CurriculumConfig {
    CurriculumConfig {
        corpora: Default::default(),
        preset: None,
        model: Some(model),
        noise: NoiseConfig::default(),
        valid: Some("real_valid".into()),
        test: Some("real_test".into()),
        stages: vec![stage("O", Mode::Supervised, parallel(&["real_train"]), epochs, None)],
    }
}

/// Sizes of the bundled demo data.
pub const DEMO_SIZES: ToySizes = ToySizes {
    synthetic: 300,
    mono: 48,
    real_train: 24,
    real_valid: 24,
    real_test: 60,
    lex_p: 0.7,
};

/// Seed the bundled demo data was generated with.
pub const DEMO_SEED: u64 = 2020;

/// Sentences in the demo EMT input.
pub const DEMO_EMT: usize = 40;

/// Writes the data files of the demo pipeline into `dir`: raw Hindi text for
/// ingestion, the lexicon, EMT inputs (English JSONL, treebank, parallel Hindi,
/// alignments) and the real code-switched splits.
pub fn write_demo_fixtures(dir: &Path, seed: u64) -> io::Result<()> {
    let lang = ToyLanguage::new();
    let z = DEMO_SIZES;
    let total = z.synthetic + 2 * z.mono + z.real_train + z.real_valid + z.real_test + DEMO_EMT;
    let pool = lang.hindi_corpus(total, "t", seed).into_sentences();
    let mut at = 0;
    let mut take = |n: usize, name: &str| {
        let part = pool[at..at + n].to_vec();
        at += n;
        Corpus::new(name, part).expect("ids are unique")
    };
    let raw = |c: &Corpus| c.iter().map(|s| s.text() + "\n").collect::<String>();
    let put = |name: &str, text: &str| write_atomic(dir.join(name), text.as_bytes());

    put("hi_syn.txt", &raw(&take(z.synthetic, "hi_syn")))?;
    put("hi_mono.txt", &raw(&take(z.mono, "hi_mono")))?;
    put("cs_src.txt", &raw(&take(z.mono, "cs_src")))?;
    put("lexicon.tsv", &lang.lexicon().to_tsv())?;
    for (name, n) in [("real_train", z.real_train), ("real_valid", z.real_valid)] {
        put(&format!("{name}.jsonl"), &lang.real_pairs(&take(n, name)).to_jsonl())?;
    }
    let test = lang.real_pairs(&take(z.real_test, "real_test"));
    put("real_test.jsonl", &test.to_jsonl())?;
    put("real_test_hi.jsonl", &test.sources().to_jsonl())?;
    put("real_test_cs.jsonl", &test.targets().to_jsonl())?;

    let hi = take(DEMO_EMT, "hi_par");
    let (mut en, mut trees, mut aligns) = (Vec::new(), String::new(), String::new());
    for s in hi.iter() {
        let (e, tree, align) = lang.english_view(s);
        en.push(e);
        trees.push_str(&tree);
        trees.push('\n');
        aligns.push_str(&align.to_pharaoh());
        aligns.push('\n');
    }
    put("en.jsonl", &Corpus::new("en", en).expect("ids are unique").to_jsonl())?;
    put("en.ptb", &trees)?;
    put("align.pharaoh", &aligns)?;
    put("hi_par.jsonl", &hi.to_jsonl())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Lang;

    #[test]
    fn real_rule_switches_nouns_and_adjectives_only() {
        let lang = ToyLanguage::new();
        let s = TaggedSentence::from_text("x", "बड़ा लड़का किताब को पढ़ता है", Source::Mono).unwrap();
        assert_eq!(lang.real_cs(&s).text(), "big boy book को पढ़ता है");
    }

    #[test]
    fn sentences_follow_the_template() {
        let lang = ToyLanguage::new();
        let c = lang.hindi_corpus(50, "s", 3);
        assert_eq!(c.len(), 50);
        for s in &c {
            let w: Vec<&str> = s.surfaces().collect();
            assert!((5..=7).contains(&w.len()));
            assert!(w.contains(&OBJ_MARKER));
            assert!(AUX.contains(w.last().unwrap()));
            assert!(s.langs().all(|l| l == Lang::Hi));
        }
    }

    #[test]
    fn registry_splits_are_disjoint() {
        let reg = toy_registry(&ToySizes::default(), 4);
        let mut seen = HashSet::new();
        for name in ["syn_pairs", "real_train", "real_valid", "real_test"] {
            for (s, _) in reg.parallel(name).unwrap().pairs() {
                assert!(seen.insert(s.text()), "{name} repeats {}", s.text());
            }
        }
        let syn = reg.parallel("syn_pairs").unwrap();
        assert!(syn.pairs().iter().any(|(_, t)| t.langs().any(|l| l == Lang::En)));
    }

    #[test]
    fn english_view_aligns_content_words() {
        let lang = ToyLanguage::new();
        let s = TaggedSentence::from_text("x", "बड़ा लड़का किताब को पढ़ता है", Source::Mono).unwrap();
        let (en, tree, align) = lang.english_view(&s);
        assert_eq!(en.text(), "the big boy reads the book");
        assert_eq!(tree, "(ROOT (S (NP (DT the) (JJ big) (NN boy)) (VP (VBZ reads) (NP (DT the) (NN book)))))");
        assert_eq!(align.to_pharaoh(), "1-0 2-1 3-4 3-5 5-2");
        let parsed = crate::emtgen::parse_bracketed(&tree).unwrap();
        assert_eq!(parsed.n_leaves(), en.len());
    }

    #[test]
    fn curricula_validate() {
        let reg = toy_registry(&ToySizes::default(), 4);
        toy_pretrain_finetune(toy_model(), 2, 2).validate(&reg).unwrap();
        toy_from_scratch(toy_model(), 2).validate(&reg).unwrap();
    }
}
