//! Clause substitution checked against hand-built fixtures and an independent
//! enumeration of every parse node.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::check_random_trees;
use csforge::corpus::{Lang, Source, TaggedSentence};
use csforge::emtgen::{
    generate_emt, parse_bracketed, parse_translations, project_span, select_switch_candidates, Alignment, EmtConfig,
    ParseBundle, Span, Strategy,
};

fn sent(id: &str, text: &str) -> TaggedSentence {
    TaggedSentence::from_text(id, text, Source::Real).unwrap()
}

fn cfg(variants: usize) -> EmtConfig {
    EmtConfig {
        variants,
        ..EmtConfig::default()
    }
}

fn texts(out: &[TaggedSentence]) -> BTreeSet<String> {
    out.iter().map(TaggedSentence::text).collect()
}

#[test]
fn clause_spans_are_replaced_by_their_projection() {
    let tree = parse_bracketed(
        "(ROOT (S (NP (PRP I)) (VP (VBD said) (SBAR (IN that) (S (NP (PRP he)) (VP (VBD left)))))))",
    )
    .unwrap();
    let en = sent("f1", "I said that he left");
    let hi = sent("f1", "मैंने कहा कि वह चला गया");
    let align = Alignment::from_pharaoh("0-0 1-1 2-2 3-3 4-4 4-5").unwrap();
    let bundle = ParseBundle::new(en, tree).unwrap().with_parallel(hi, align).unwrap();
    let out = generate_emt(&bundle, &cfg(32), Strategy::Alignment).unwrap();
    let want: BTreeSet<String> = ["I said कि वह चला गया", "I said that वह चला गया"].map(String::from).into();
    assert_eq!(texts(&out), want);
    for s in &out {
        assert_eq!(s.source(), Source::Emt);
        let langs: Vec<Lang> = s.langs().collect();
        assert!(langs.contains(&Lang::Hi) && langs.contains(&Lang::En));
    }
}

#[test]
fn phrases_are_used_only_when_no_clause_exists() {
    let tree = parse_bracketed("(ROOT (S (NP (DT the) (NN dog)) (VP (VBD ran) (ADVP (RB fast)))))").unwrap();
    let c = cfg(32);
    let spans: Vec<Span> = select_switch_candidates(&tree, &c).iter().map(|n| n.span).collect();
    assert_eq!(spans, vec![Span::new(0, 2), Span::new(2, 4), Span::new(3, 4)]);
    let bundle = ParseBundle::new(sent("f2", "the dog ran fast"), tree)
        .unwrap()
        .with_parallel(sent("f2", "कुत्ता तेज़ भागा"), Alignment::from_pharaoh("1-0 2-2 3-1").unwrap())
        .unwrap();
    let out = generate_emt(&bundle, &c, Strategy::Alignment).unwrap();
    let want: BTreeSet<String> =
        ["कुत्ता ran fast", "the dog तेज़ भागा", "the dog ran तेज़"].map(String::from).into();
    assert_eq!(texts(&out), want);
}

#[test]
fn identity_alignment_splices_the_same_positions() {
    let tree = parse_bracketed("(ROOT (S (NP (PRP we)) (VP (VBP know) (SBAR (IN that) (S (NP (PRP it)) (VP (VBZ works)))))))")
        .unwrap();
    let hi = sent("f3", "हम जानते कि यह चलता");
    let id = Alignment::identity(5);
    for lo in 0..5 {
        for h in lo + 1..=5 {
            assert_eq!(project_span(Span::new(lo, h), &id, 5), Some(Span::new(lo, h)));
        }
    }
    let bundle = ParseBundle::new(sent("f3", "we know that it works"), tree).unwrap().with_parallel(hi, id).unwrap();
    let out = generate_emt(&bundle, &cfg(32), Strategy::Alignment).unwrap();
    let want: BTreeSet<String> = ["we know कि यह चलता", "we know that यह चलता"].map(String::from).into();
    assert_eq!(texts(&out), want);
    assert!(out.iter().all(|s| s.len() == 5));
}

#[test]
fn translation_strategy_uses_span_table() {
    let tree = parse_bracketed(
        "(ROOT (S (NP (PRP she)) (VP (VBD thought) (SBAR (IN that) (S (NP (PRP it)) (VP (VBD rained)))))))",
    )
    .unwrap();
    let table = parse_translations(r#"{"id": "f4", "spans": [{"lo": 2, "hi": 5, "text": "कि बारिश हुई थी"}]}"#).unwrap();
    let bundle = ParseBundle::new(sent("f4", "she thought that it rained"), tree)
        .unwrap()
        .with_translations(table["f4"].clone());
    let out = generate_emt(&bundle, &cfg(8), Strategy::Translation).unwrap();
    assert_eq!(texts(&out), BTreeSet::from(["she thought कि बारिश हुई थी".to_string()]));
}

#[test]
fn random_trees_match_exhaustive_enumeration() {
    let checked = check_random_trees(300);
    assert!(checked > 100, "only {checked} outputs checked");
}

#[test]
fn translation_table_misses_are_skipped() {
    let tree = parse_bracketed("(ROOT (S (NP (PRP I)) (VP (VBD said) (SBAR (IN that) (S (NP (PRP he)) (VP (VBD left)))))))")
        .unwrap();
    let mut table = BTreeMap::new();
    table.insert(Span::new(0, 1), "मैं".to_string());
    let bundle = ParseBundle::new(sent("f5", "I said that he left"), tree).unwrap().with_translations(table);
    assert!(generate_emt(&bundle, &cfg(4), Strategy::Translation).unwrap().is_empty());
}
