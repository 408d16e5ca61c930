//! Clause-substitution synthetic code-switching.
//!
//! An English sentence with a constituency parse has one or more of its
//! embedded or subordinate clauses replaced by Hindi. The Hindi comes either
//! from given clause translations or from the aligned span of a parallel
//! Hindi sentence.

pub mod align;
pub mod io;
pub mod parse;

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{tokenize, Corpus, CorpusError, Lang, Source, TaggedSentence, Token, NE_MASK};
use crate::rng::stream_rng;

pub use align::{project_span, AlignError, Alignment};
pub use io::{assemble_bundles, parse_alignments, parse_translations, parse_treebank, split_trees};
pub use parse::{parse_bracketed, ParseError, ParseNode, Span};

#[derive(Debug, Error)]
pub enum EmtError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("sentence {0:?} has no clause or phrase to switch")]
    NoSwitchPoint(String),
    #[error("sentence {id:?}: parse has {leaves} leaves but the sentence has {tokens} tokens")]
    LengthMismatch { id: String, leaves: usize, tokens: usize },
    #[error("strategy {strategy:?} needs {field}")]
    MissingField { strategy: Strategy, field: &'static str },
    #[error("invalid EMT config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, EmtError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Splice provided clause translations.
    Translation,
    /// Splice the aligned span of a parallel Hindi sentence.
    Alignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmtConfig {
    pub clause_tags: Vec<String>,
    pub phrase_fallback: Vec<String>,
    pub max_switches: usize,
    pub variants: usize,
    pub seed: u64,
}

impl Default for EmtConfig {
    fn default() -> EmtConfig {
        EmtConfig {
            clause_tags: ["S", "SBAR", "SINV", "SQ", "SBARQ"].map(String::from).to_vec(),
            phrase_fallback: ["NP", "VP", "ADJP", "ADVP"].map(String::from).to_vec(),
            max_switches: 1,
            variants: 1,
            seed: 0,
        }
    }
}

impl EmtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clause_tags.is_empty() || self.phrase_fallback.is_empty() {
            return Err(EmtError::Config("tag lists must be non-empty".into()));
        }
        if let Some(t) = self.clause_tags.iter().find(|t| self.phrase_fallback.contains(t)) {
            return Err(EmtError::Config(format!("tag {t} is both a clause and a fallback tag")));
        }
        if self.max_switches == 0 || self.variants == 0 {
            return Err(EmtError::Config("max_switches and variants must be positive".into()));
        }
        Ok(())
    }
}

/// Everything EMT needs for one sentence.
#[derive(Debug, Clone)]
pub struct ParseBundle {
    pub en: TaggedSentence,
    pub tree: ParseNode,
    pub hi: Option<TaggedSentence>,
    pub align: Option<Alignment>,
    /// English span to Hindi text.
    pub clause_translations: Option<BTreeMap<Span, String>>,
}

impl ParseBundle {
    pub fn new(en: TaggedSentence, tree: ParseNode) -> Result<ParseBundle> {
        if tree.span != Span::new(0, en.len()) || tree.n_leaves() != en.len() {
            return Err(EmtError::LengthMismatch {
                id: en.id().to_string(),
                leaves: tree.n_leaves(),
                tokens: en.len(),
            });
        }
        Ok(ParseBundle {
            en,
            tree,
            hi: None,
            align: None,
            clause_translations: None,
        })
    }

    pub fn with_parallel(mut self, hi: TaggedSentence, align: Alignment) -> Result<ParseBundle> {
        align.check_bounds(self.en.len(), hi.len())?;
        self.hi = Some(hi);
        self.align = Some(align);
        Ok(self)
    }

    pub fn with_translations(mut self, translations: BTreeMap<Span, String>) -> ParseBundle {
        self.clause_translations = Some(translations);
        self
    }
}

/// Non-root clause nodes in document order, or the phrase-level nodes when no clause exists.
/// Nodes covering the whole sentence are never candidates.
pub fn select_switch_candidates<'t>(tree: &'t ParseNode, cfg: &EmtConfig) -> Vec<&'t ParseNode> {
    let pick = |tags: &[String]| -> Vec<&'t ParseNode> {
        tree.preorder()
            .skip(1)
            .filter(|n| n.span != tree.span && tags.iter().any(|t| *t == n.label))
            .collect()
    };
    let clauses = pick(&cfg.clause_tags);
    if clauses.is_empty() {
        pick(&cfg.phrase_fallback)
    } else {
        clauses
    }
}

struct Replacement {
    en: Span,
    hi: Option<Span>,
    tokens: Vec<Token>,
}

fn as_hindi(surface: &str) -> std::result::Result<Token, CorpusError> {
    if surface == NE_MASK {
        Ok(Token::ne_mask())
    } else {
        Token::new(surface, Lang::Hi)
    }
}

fn usable_replacements(bundle: &ParseBundle, candidates: &[&ParseNode], strategy: Strategy) -> Result<Vec<Replacement>> {
    let mut out = Vec::new();
    match strategy {
        Strategy::Translation => {
            let table = bundle.clause_translations.as_ref().ok_or(EmtError::MissingField {
                strategy,
                field: "clause translations",
            })?;
            for node in candidates {
                let Some(text) = table.get(&node.span) else { continue };
                let Ok(words) = tokenize(text) else { continue };
                let tokens = words.into_iter().map(as_hindi).collect::<std::result::Result<_, _>>()?;
                out.push(Replacement { en: node.span, hi: None, tokens });
            }
        }
        Strategy::Alignment => {
            let (Some(hi), Some(align)) = (&bundle.hi, &bundle.align) else {
                return Err(EmtError::MissingField {
                    strategy,
                    field: "a parallel Hindi sentence and an alignment",
                });
            };
            for node in candidates {
                let Some(proj) = project_span(node.span, align, hi.len()) else { continue };
                let tokens = hi.tokens()[proj.lo..proj.hi]
                    .iter()
                    .map(|t| as_hindi(t.surface()))
                    .collect::<std::result::Result<_, _>>()?;
                out.push(Replacement { en: node.span, hi: Some(proj), tokens });
            }
        }
    }
    Ok(out)
}

fn splice(en: &TaggedSentence, chosen: &mut [&Replacement]) -> Vec<Token> {
    chosen.sort_by_key(|r| r.en.lo);
    let mut tokens = Vec::with_capacity(en.len());
    let mut pos = 0;
    for r in chosen.iter() {
        tokens.extend_from_slice(&en.tokens()[pos..r.en.lo]);
        tokens.extend(r.tokens.iter().cloned());
        pos = r.en.hi;
    }
    tokens.extend_from_slice(&en.tokens()[pos..]);
    tokens
}

/// Generates up to `cfg.variants` EMT sentences from one bundle.
///
/// Each variant samples up to `max_switches` mutually non-overlapping
/// candidates. Variants without both a HI and an EN token, and exact
/// duplicates of an earlier variant, are dropped.
pub fn generate_emt(bundle: &ParseBundle, cfg: &EmtConfig, strategy: Strategy) -> Result<Vec<TaggedSentence>> {
    cfg.validate()?;
    let candidates = select_switch_candidates(&bundle.tree, cfg);
    if candidates.is_empty() {
        return Err(EmtError::NoSwitchPoint(bundle.en.id().to_string()));
    }
    let usable = usable_replacements(bundle, &candidates, strategy)?;
    let mut seen: HashSet<Vec<Token>> = HashSet::new();
    let mut out = Vec::new();
    for v in 0..cfg.variants {
        let mut rng = stream_rng(cfg.seed, bundle.en.id(), v as u64);
        let mut order: Vec<&Replacement> = usable.iter().collect();
        order.shuffle(&mut rng);
        let mut chosen: Vec<&Replacement> = Vec::new();
        for r in order {
            if chosen.len() == cfg.max_switches {
                break;
            }
            let clash = chosen.iter().any(|c| {
                c.en.overlaps(&r.en) || matches!((c.hi, r.hi), (Some(a), Some(b)) if a.overlaps(&b))
            });
            if !clash {
                chosen.push(r);
            }
        }
        if chosen.is_empty() {
            continue;
        }
        let tokens = splice(&bundle.en, &mut chosen);
        let has = |l: Lang| tokens.iter().any(|t| t.lang() == l);
        if !has(Lang::Hi) || !has(Lang::En) || !seen.insert(tokens.clone()) {
            continue;
        }
        out.push(TaggedSentence::new(format!("{}.emt{v}", bundle.en.id()), tokens, Source::Emt)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmtStats {
    pub sentences: usize,
    pub no_switch_point: usize,
    pub no_usable_variant: usize,
    pub generated: usize,
}

/// Runs [`generate_emt`] over many bundles; sentences without a switch point are dropped and counted.
pub fn generate_emt_corpus(bundles: &[ParseBundle], cfg: &EmtConfig, strategy: Strategy) -> Result<(Corpus, EmtStats)> {
    cfg.validate()?;
    let results: Vec<Result<Vec<TaggedSentence>>> =
        bundles.par_iter().map(|b| generate_emt(b, cfg, strategy)).collect();
    let mut stats = EmtStats {
        sentences: bundles.len(),
        ..EmtStats::default()
    };
    let mut sentences = Vec::new();
    for r in results {
        match r {
            Ok(v) if v.is_empty() => stats.no_usable_variant += 1,
            Ok(v) => {
                stats.generated += v.len();
                sentences.extend(v);
            }
            Err(EmtError::NoSwitchPoint(_)) => stats.no_switch_point += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((Corpus::new("emt", sentences)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en(text: &str) -> TaggedSentence {
        TaggedSentence::from_text("e1", text, Source::Mono).unwrap()
    }

    const SAID: &str = "(ROOT (S (NP (PRP he)) (VP (VBD said) (SBAR (IN that) (S (NP (PRP she)) (VP (VBD left)))))))";

    #[test]
    fn clause_candidates_outer_first() {
        let tree = parse_bracketed(SAID).unwrap();
        let cands = select_switch_candidates(&tree, &EmtConfig::default());
        let got: Vec<(&str, Span)> = cands.iter().map(|n| (n.label.as_str(), n.span)).collect();
        // The top S spans the whole sentence, so it is excluded.
        assert_eq!(got, vec![("SBAR", Span::new(2, 5)), ("S", Span::new(3, 5))]);
    }

    #[test]
    fn phrase_fallback_only_without_clauses() {
        let tree = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))").unwrap();
        let got: Vec<&str> = select_switch_candidates(&tree, &EmtConfig::default())
            .iter()
            .map(|n| n.label.as_str())
            .collect();
        assert_eq!(got, vec!["NP", "VP"]);
        let bare = parse_bracketed("(S (DT the) (NN dog))").unwrap();
        assert!(select_switch_candidates(&bare, &EmtConfig::default()).is_empty());
    }

    #[test]
    fn translation_strategy_replaces_clause() {
        let tree = parse_bracketed(SAID).unwrap();
        let bundle = ParseBundle::new(en("he said that she left"), tree)
            .unwrap()
            .with_translations(BTreeMap::from([(Span::new(2, 5), "कि वह चली गई".to_string())]));
        let out = generate_emt(&bundle, &EmtConfig::default(), Strategy::Translation).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text(), "he said कि वह चली गई");
        assert_eq!(
            out[0].langs().collect::<Vec<_>>(),
            [Lang::En, Lang::En, Lang::Hi, Lang::Hi, Lang::Hi, Lang::Hi]
        );
        assert_eq!(out[0].source(), Source::Emt);
    }

    #[test]
    fn identity_alignment_keeps_length() {
        let tree = parse_bracketed("(S (NP (PRP I)) (VP (VBD knew) (SBAR (IN that) (S (NP (PRP he)) (VP (VBD won))))))")
            .unwrap();
        let hi = TaggedSentence::from_text("h1", "मैं जानता था वह जीता", Source::Mono).unwrap();
        let bundle = ParseBundle::new(en("I knew that he won"), tree)
            .unwrap()
            .with_parallel(hi.clone(), Alignment::identity(5))
            .unwrap();
        let cfg = EmtConfig { variants: 4, ..EmtConfig::default() };
        let out = generate_emt(&bundle, &cfg, Strategy::Alignment).unwrap();
        assert!(!out.is_empty());
        for s in &out {
            assert_eq!(s.len(), 5);
        }
        let texts: HashSet<String> = out.iter().map(TaggedSentence::text).collect();
        assert!(texts.is_subset(&HashSet::from([
            "I knew था वह जीता".to_string(),
            "I knew that वह जीता".to_string(),
        ])));
    }

    #[test]
    fn no_switch_point() {
        let tree = parse_bracketed("(S (DT the) (NN dog))").unwrap();
        let bundle = ParseBundle::new(en("the dog"), tree)
            .unwrap()
            .with_translations(BTreeMap::new());
        assert!(matches!(
            generate_emt(&bundle, &EmtConfig::default(), Strategy::Translation),
            Err(EmtError::NoSwitchPoint(_))
        ));
    }

    #[test]
    fn missing_fields_and_length_mismatch() {
        let tree = parse_bracketed(SAID).unwrap();
        assert!(matches!(
            ParseBundle::new(en("he said"), tree.clone()),
            Err(EmtError::LengthMismatch { .. })
        ));
        let bundle = ParseBundle::new(en("he said that she left"), tree).unwrap();
        assert!(matches!(
            generate_emt(&bundle, &EmtConfig::default(), Strategy::Alignment),
            Err(EmtError::MissingField { .. })
        ));
    }

    #[test]
    fn multiple_switches_never_overlap() {
        let tree = parse_bracketed(
            "(S (SBAR (IN if) (S (NP (PRP it)) (VP (VBZ rains)))) (NP (PRP we)) (VP (VBP stay) (SBAR (IN because) (S (NP (PRP it)) (VP (VBZ is) (ADJP (JJ wet)))))))",
        )
        .unwrap();
        let sentence = en("if it rains we stay because it is wet");
        let n = sentence.len();
        let hi = TaggedSentence::from_text("h", "अगर यह बरसे हम रुकें क्योंकि यह है गीला", Source::Mono).unwrap();
        let bundle = ParseBundle::new(sentence, tree)
            .unwrap()
            .with_parallel(hi, Alignment::identity(n))
            .unwrap();
        let cfg = EmtConfig { max_switches: 3, variants: 20, seed: 11, ..EmtConfig::default() };
        let out = generate_emt(&bundle, &cfg, Strategy::Alignment).unwrap();
        assert!(!out.is_empty());
        for s in &out {
            // Identity alignment: every position is either the English or the Hindi token at that index.
            assert_eq!(s.len(), n);
            assert!(s.langs().any(|l| l == Lang::En) && s.langs().any(|l| l == Lang::Hi));
        }
    }

    #[test]
    fn bad_config() {
        let cfg = EmtConfig { phrase_fallback: vec!["S".into()], ..EmtConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = EmtConfig { max_switches: 0, ..EmtConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
