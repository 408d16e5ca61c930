//! File formats for EMT inputs: treebanks, alignment files and span translations.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::align::Alignment;
use super::parse::{parse_bracketed, ParseError, ParseNode, Span};
use super::{EmtError, ParseBundle, Result};
use crate::corpus::Corpus;

/// Splits text holding several bracketed trees (one per line or spread over
/// lines) into one slice per top-level tree.
pub fn split_trees(text: &str) -> std::result::Result<Vec<&str>, ParseError> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = None;
    for (i, c) in text.char_indices() {
        match c {
            '(' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            ')' => {
                if depth == 0 {
                    return Err(ParseError {
                        offset: i,
                        message: "unbalanced ')'".into(),
                    });
                }
                depth -= 1;
                if depth == 0 {
                    let s = start.take().expect("open bracket recorded");
                    out.push(&text[s..=i]);
                }
            }
            c if depth == 0 && !c.is_whitespace() => {
                return Err(ParseError {
                    offset: i,
                    message: format!("text {c:?} outside any tree"),
                });
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        return Err(ParseError {
            offset: s,
            message: "unterminated tree".into(),
        });
    }
    Ok(out)
}

/// Parses every tree in a treebank file. Error offsets are relative to the whole text.
pub fn parse_treebank(text: &str) -> std::result::Result<Vec<ParseNode>, ParseError> {
    let base = text.as_ptr() as usize;
    split_trees(text)?
        .into_iter()
        .map(|t| {
            parse_bracketed(t).map_err(|e| ParseError {
                offset: e.offset + (t.as_ptr() as usize - base),
                message: e.message,
            })
        })
        .collect()
}

/// One alignment per line; an empty line is an empty alignment.
pub fn parse_alignments(text: &str) -> Result<Vec<Alignment>> {
    text.lines()
        .map(|l| Alignment::from_pharaoh(l).map_err(EmtError::from))
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpanText {
    lo: usize,
    hi: usize,
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TranslationLine {
    id: String,
    spans: Vec<SpanText>,
}

/// Span translations keyed by English sentence id, from JSONL
/// `{"id": .., "spans": [{"lo": .., "hi": .., "text": ..}]}`.
pub fn parse_translations(text: &str) -> Result<BTreeMap<String, BTreeMap<Span, String>>> {
    let mut out: BTreeMap<String, BTreeMap<Span, String>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TranslationLine = serde_json::from_str(line)
            .map_err(|e| EmtError::Config(format!("translations line {}: {e}", n + 1)))?;
        let table = out.entry(parsed.id).or_default();
        for s in parsed.spans {
            if s.lo >= s.hi {
                return Err(EmtError::Config(format!("translations line {}: empty span", n + 1)));
            }
            table.insert(Span::new(s.lo, s.hi), s.text);
        }
    }
    Ok(out)
}

fn same_count(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(EmtError::Config(format!("{got} {what} for {expected} sentences")))
    }
}

/// Joins English sentences with their trees and, optionally, the parallel
/// Hindi side and alignments (by position) and span translations (by id).
pub fn assemble_bundles(
    en: &Corpus,
    trees: Vec<ParseNode>,
    parallel: Option<(&Corpus, Vec<Alignment>)>,
    translations: Option<&BTreeMap<String, BTreeMap<Span, String>>>,
) -> Result<Vec<ParseBundle>> {
    same_count("parse trees", en.len(), trees.len())?;
    if let Some((hi, aligns)) = &parallel {
        same_count("Hindi sentences", en.len(), hi.len())?;
        same_count("alignments", en.len(), aligns.len())?;
    }
    let mut out = Vec::with_capacity(en.len());
    for (i, (s, tree)) in en.iter().zip(trees).enumerate() {
        let mut b = ParseBundle::new(s.clone(), tree)?;
        if let Some((hi, aligns)) = &parallel {
            b = b.with_parallel(hi.sentences()[i].clone(), aligns[i].clone())?;
        }
        if let Some(t) = translations {
            b = b.with_translations(t.get(s.id()).cloned().unwrap_or_default());
        }
        out.push(b);
    }
    Ok(out)
}
