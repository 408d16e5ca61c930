//! Pharaoh-format word alignments and span projection.

use std::collections::BTreeSet;

use thiserror::Error;

use super::parse::Span;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("alignment offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("link {en}-{hi} outside sentence lengths ({en_len}, {hi_len})")]
    OutOfRange {
        en: usize,
        hi: usize,
        en_len: usize,
        hi_len: usize,
    },
}

/// Links between English token `i` and Hindi token `j`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    links: BTreeSet<(usize, usize)>,
}

impl Alignment {
    pub fn new(links: impl IntoIterator<Item = (usize, usize)>) -> Alignment {
        Alignment {
            links: links.into_iter().collect(),
        }
    }

    /// `i -> i` for `0..n`.
    pub fn identity(n: usize) -> Alignment {
        Alignment::new((0..n).map(|i| (i, i)))
    }

    pub fn links(&self) -> &BTreeSet<(usize, usize)> {
        &self.links
    }

    pub fn check_bounds(&self, en_len: usize, hi_len: usize) -> Result<(), AlignError> {
        match self.links.iter().find(|(i, j)| *i >= en_len || *j >= hi_len) {
            Some(&(en, hi)) => Err(AlignError::OutOfRange { en, hi, en_len, hi_len }),
            None => Ok(()),
        }
    }

    /// Parses space-separated `i-j` pairs. An empty line is an empty alignment.
    pub fn from_pharaoh(line: &str) -> Result<Alignment, AlignError> {
        let mut links = BTreeSet::new();
        let mut offset = 0;
        for piece in line.split(' ') {
            let at = offset;
            offset += piece.len() + 1;
            let piece = piece.trim_matches(|c: char| c == '\t' || c == '\r' || c == '\n');
            if piece.is_empty() {
                continue;
            }
            let syntax = |message: &str| AlignError::Syntax {
                offset: at,
                message: format!("{message}: {piece:?}"),
            };
            let (a, b) = piece.split_once('-').ok_or_else(|| syntax("expected i-j"))?;
            let en: usize = a.parse().map_err(|_| syntax("bad English index"))?;
            let hi: usize = b.parse().map_err(|_| syntax("bad Hindi index"))?;
            links.insert((en, hi));
        }
        Ok(Alignment { links })
    }

    pub fn to_pharaoh(&self) -> String {
        self.links
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Minimal contiguous Hindi span covering every token aligned into `span`.
/// Links pointing at or past `hi_len` are ignored.
pub fn project_span(span: Span, align: &Alignment, hi_len: usize) -> Option<Span> {
    let targets = align
        .links
        .range((span.lo, 0)..(span.hi, 0))
        .map(|&(_, j)| j)
        .filter(|&j| j < hi_len);
    let (lo, hi) = targets.fold(None, |acc: Option<(usize, usize)>, j| match acc {
        None => Some((j, j)),
        Some((lo, hi)) => Some((lo.min(j), hi.max(j))),
    })?;
    Some(Span::new(lo, hi + 1))
}
