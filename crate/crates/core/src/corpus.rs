//! Sentences with per-token language tags, and the JSON-lines corpus formats.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Surface form that replaces a masked named entity.
pub const NE_MASK: &str = "<NE>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("invalid token {0:?}: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),
    #[error("token {surface:?} cannot carry tag {lang}: the NE tag is reserved for {NE_MASK}")]
    InvalidTag { surface: String, lang: Lang },
    #[error("line {line}: {tags} tags for {tokens} tokens")]
    TagCountMismatch { line: usize, tokens: usize, tags: usize },
    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),
    #[error("corpus has {0} sentences, at least 3 are needed for a train/valid/test split")]
    TooSmall(usize),
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    BadFractions((f64, f64, f64)),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn at_line(line: usize, err: CorpusError) -> CorpusError {
        match err {
            CorpusError::Line { .. } | CorpusError::TagCountMismatch { .. } => err,
            other => CorpusError::Line {
                line,
                message: other.to_string(),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Lang {
    Hi,
    En,
    Ne,
    Other,
}

impl Lang {
    pub fn as_str(self) -> &'static str {
        match self {
            Lang::Hi => "HI",
            Lang::En => "EN",
            Lang::Ne => "NE",
            Lang::Other => "OTHER",
        }
    }

    /// True for the two languages being mixed.
    pub fn is_lexical(self) -> bool {
        matches!(self, Lang::Hi | Lang::En)
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a sentence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    #[default]
    Real,
    Lex,
    Emt,
    Tcs,
    Mono,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Real => "REAL",
            Source::Lex => "LEX",
            Source::Emt => "EMT",
            Source::Tcs => "TCS",
            Source::Mono => "MONO",
        }
    }
}

/// Splits a line on Unicode whitespace. Punctuation stays attached.
pub fn tokenize(line: &str) -> Result<Vec<&str>> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(CorpusError::EmptySentence);
    }
    Ok(tokens)
}

fn is_devanagari(c: char) -> bool {
    ('\u{0900}'..='\u{097F}').contains(&c)
}

/// Script-based language tag. Devanagari wins over Latin for mixed tokens.
pub fn tag_language(surface: &str) -> Lang {
    if surface == NE_MASK {
        Lang::Ne
    } else if surface.chars().any(is_devanagari) {
        Lang::Hi
    } else if surface.chars().any(|c| c.is_ascii_alphabetic()) {
        Lang::En
    } else {
        Lang::Other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    surface: String,
    lang: Lang,
}

impl Token {
    /// Builds a token with an explicit tag, checking the surface and NE invariants.
    pub fn new(surface: impl Into<String>, lang: Lang) -> Result<Token> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidToken(surface));
        }
        if (lang == Lang::Ne) != (surface == NE_MASK) {
            return Err(CorpusError::InvalidTag { surface, lang });
        }
        Ok(Token { surface, lang })
    }

    /// Builds a token tagged by [`tag_language`].
    pub fn tagged(surface: impl Into<String>) -> Result<Token> {
        let surface = surface.into();
        let lang = tag_language(&surface);
        Token::new(surface, lang)
    }

    pub fn ne_mask() -> Token {
        Token {
            surface: NE_MASK.to_string(),
            lang: Lang::Ne,
        }
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn lang(&self) -> Lang {
        self.lang
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    id: String,
    tokens: Vec<Token>,
    source: Source,
}

impl TaggedSentence {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>, source: Source) -> Result<TaggedSentence> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        Ok(TaggedSentence {
            id: id.into(),
            tokens,
            source,
        })
    }

    /// Tokenizes and tags a line of text.
    pub fn from_text(id: impl Into<String>, text: &str, source: Source) -> Result<TaggedSentence> {
        let tokens = tokenize(text)?
            .into_iter()
            .map(Token::tagged)
            .collect::<Result<Vec<_>>>()?;
        TaggedSentence::new(id, tokens, source)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn langs(&self) -> impl Iterator<Item = Lang> + '_ {
        self.tokens.iter().map(|t| t.lang)
    }

    /// Space-joined surfaces.
    pub fn text(&self) -> String {
        self.surfaces().collect::<Vec<_>>().join(" ")
    }

    pub fn with_id(mut self, id: impl Into<String>) -> TaggedSentence {
        self.id = id.into();
        self
    }

    pub fn with_source(mut self, source: Source) -> TaggedSentence {
        self.source = source;
        self
    }
}

/// Replaces every token whose surface is listed with the NE mask.
pub fn mask_named_entities(s: &TaggedSentence, ne_list: &HashSet<String>) -> TaggedSentence {
    if ne_list.is_empty() {
        return s.clone();
    }
    let tokens = s
        .tokens
        .iter()
        .map(|t| {
            if ne_list.contains(&t.surface) {
                Token::ne_mask()
            } else {
                t.clone()
            }
        })
        .collect();
    TaggedSentence {
        id: s.id.clone(),
        tokens,
        source: s.source,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    name: String,
    sentences: Vec<TaggedSentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<TaggedSentence>) -> Result<Corpus> {
        let mut seen = HashSet::with_capacity(sentences.len());
        for s in &sentences {
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Corpus {
            name: name.into(),
            sentences,
        })
    }

    /// Builds a corpus from raw lines, using the line index as id.
    pub fn from_lines<'a>(
        name: impl Into<String>,
        lines: impl IntoIterator<Item = &'a str>,
        source: Source,
    ) -> Result<Corpus> {
        let sentences = lines
            .into_iter()
            .enumerate()
            .map(|(i, l)| TaggedSentence::from_text(i.to_string(), l, source))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(name, sentences)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sentences(&self) -> &[TaggedSentence] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<TaggedSentence> {
        self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(TaggedSentence::len).sum()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TaggedSentence> {
        self.sentences.iter()
    }

    pub fn mask_named_entities(&self, ne_list: &HashSet<String>) -> Corpus {
        Corpus {
            name: self.name.clone(),
            sentences: self
                .sentences
                .iter()
                .map(|s| mask_named_entities(s, ne_list))
                .collect(),
        }
    }

    /// Appends `other`, failing on id collisions.
    pub fn concat(&self, other: &Corpus) -> Result<Corpus> {
        let mut sentences = self.sentences.clone();
        sentences.extend(other.sentences.iter().cloned());
        Corpus::new(self.name.clone(), sentences)
    }

    pub fn from_jsonl_str(name: impl Into<String>, text: &str) -> Result<Corpus> {
        let mut sentences = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let s = parse_corpus_line(line, i + 1)?;
            sentences.push(s);
        }
        Corpus::new(name, sentences)
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let text = read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Corpus::from_jsonl_str(name, &text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&sentence_to_json(s));
            out.push('\n');
        }
        out
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a TaggedSentence;
    type IntoIter = std::slice::Iter<'a, TaggedSentence>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SentenceRecord {
    #[serde(default)]
    id: Option<String>,
    text: String,
    #[serde(default)]
    tags: Option<Vec<Lang>>,
    #[serde(default)]
    source: Option<Source>,
}

/// Parses one corpus JSON line. `line_no` is 1-based and also the fallback id.
pub fn parse_corpus_line(line: &str, line_no: usize) -> Result<TaggedSentence> {
    let rec: SentenceRecord = serde_json::from_str(line).map_err(|e| CorpusError::Line {
        line: line_no,
        message: e.to_string(),
    })?;
    let surfaces = tokenize(&rec.text).map_err(|e| CorpusError::at_line(line_no, e))?;
    let tokens = match rec.tags {
        Some(tags) => {
            if tags.len() != surfaces.len() {
                return Err(CorpusError::TagCountMismatch {
                    line: line_no,
                    tokens: surfaces.len(),
                    tags: tags.len(),
                });
            }
            surfaces
                .iter()
                .zip(tags)
                .map(|(s, l)| Token::new(*s, l))
                .collect::<Result<Vec<_>>>()
        }
        None => surfaces.iter().map(|s| Token::tagged(*s)).collect(),
    }
    .map_err(|e| CorpusError::at_line(line_no, e))?;
    let id = rec.id.unwrap_or_else(|| line_no.to_string());
    TaggedSentence::new(id, tokens, rec.source.unwrap_or_default())
}

pub fn sentence_to_json(s: &TaggedSentence) -> String {
    let rec = SentenceRecord {
        id: Some(s.id.clone()),
        text: s.text(),
        tags: Some(s.langs().collect()),
        source: Some(s.source),
    };
    serde_json::to_string(&rec).expect("sentence record serializes")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParallelCorpus {
    pairs: Vec<(TaggedSentence, TaggedSentence)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRecord {
    #[serde(default)]
    id: Option<String>,
    src_text: String,
    tgt_text: String,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(TaggedSentence, TaggedSentence)>) -> ParallelCorpus {
        ParallelCorpus { pairs }
    }

    pub fn pairs(&self) -> &[(TaggedSentence, TaggedSentence)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Corpus {
        Corpus {
            name: "src".into(),
            sentences: self.pairs.iter().map(|p| p.0.clone()).collect(),
        }
    }

    pub fn targets(&self) -> Corpus {
        Corpus {
            name: "tgt".into(),
            sentences: self.pairs.iter().map(|p| p.1.clone()).collect(),
        }
    }

    pub fn take(&self, n: usize) -> ParallelCorpus {
        ParallelCorpus {
            pairs: self.pairs.iter().take(n).cloned().collect(),
        }
    }

    pub fn from_jsonl_str(text: &str) -> Result<ParallelCorpus> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let pair = parse_parallel_line(line, i + 1)?;
            if !seen.insert(pair.0.id.clone()) {
                return Err(CorpusError::DuplicateId(pair.0.id.clone()));
            }
            pairs.push(pair);
        }
        Ok(ParallelCorpus { pairs })
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<ParallelCorpus> {
        ParallelCorpus::from_jsonl_str(&read_to_string(path.as_ref())?)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (src, tgt) in &self.pairs {
            let rec = PairRecord {
                id: Some(src.id.clone()),
                src_text: src.text(),
                tgt_text: tgt.text(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("pair record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Parses one parallel-corpus JSON line.
pub fn parse_parallel_line(line: &str, line_no: usize) -> Result<(TaggedSentence, TaggedSentence)> {
    let rec: PairRecord = serde_json::from_str(line).map_err(|e| CorpusError::Line {
        line: line_no,
        message: e.to_string(),
    })?;
    let id = rec.id.unwrap_or_else(|| line_no.to_string());
    let src = TaggedSentence::from_text(id.clone(), &rec.src_text, Source::Mono)
        .map_err(|e| CorpusError::at_line(line_no, e))?;
    let tgt = TaggedSentence::from_text(id, &rec.tgt_text, Source::Real)
        .map_err(|e| CorpusError::at_line(line_no, e))?;
    Ok((src, tgt))
}

/// Reads a named-entity list: one surface per line, blank lines ignored.
pub fn read_ne_list(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    Ok(parse_ne_list(&read_to_string(path.as_ref())?))
}

pub fn parse_ne_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Largest-remainder allocation of `n` items to the given fractions.
fn allocate(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (size, e) in sizes.iter_mut().zip(&exact) {
        *size = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    // Stable on ties so the earlier split wins.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// Seeded train/valid/test partition. Sentences keep corpus order within each part.
pub fn split_corpus(c: &Corpus, fractions: (f64, f64, f64), seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|x| !(x.is_finite() && *x > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadFractions(fractions));
    }
    if c.len() < 3 {
        return Err(CorpusError::TooSmall(c.len()));
    }
    let sizes = allocate(c.len(), f);
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.shuffle(&mut crate::rng::seeded(seed));
    let mut parts = Vec::with_capacity(3);
    let mut start = 0;
    for (k, size) in sizes.iter().enumerate() {
        let chosen: BTreeSet<usize> = idx[start..start + size].iter().copied().collect();
        start += size;
        let suffix = ["train", "valid", "test"][k];
        parts.push(Corpus {
            name: format!("{}.{}", c.name, suffix),
            sentences: chosen.into_iter().map(|i| c.sentences[i].clone()).collect(),
        });
    }
    let test = parts.pop().unwrap();
    let valid = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok((train, valid, test))
}
