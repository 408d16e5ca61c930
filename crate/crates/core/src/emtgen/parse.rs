//! Reader for Penn-style bracketed constituency parses.

use std::fmt;

use thiserror::Error;

/// Nesting limit. Deeper input is rejected rather than risking the stack.
pub const MAX_DEPTH: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub message: String,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        offset,
        message: message.into(),
    })
}

/// Half-open token interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn new(lo: usize, hi: usize) -> Span {
        debug_assert!(lo <= hi);
        Span { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseNode {
    pub label: String,
    pub span: Span,
    pub children: Vec<ParseNode>,
    /// Terminal word, present on leaves only.
    pub word: Option<String>,
}

impl ParseNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Nodes in document (pre-)order, including `self`.
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: vec![self] }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ParseNode> {
        self.preorder().filter(|n| n.is_leaf())
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Bracketed rendering using the stored labels and words.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        render(self, &mut out);
        out
    }
}

fn render(node: &ParseNode, out: &mut String) {
    if node.label.is_empty() && node.is_leaf() {
        out.push_str(node.word.as_deref().unwrap_or(""));
        return;
    }
    out.push('(');
    out.push_str(&node.label);
    if let Some(w) = &node.word {
        out.push(' ');
        out.push_str(w);
    }
    for c in &node.children {
        out.push(' ');
        render(c, out);
    }
    out.push(')');
}

pub struct Preorder<'a> {
    stack: Vec<&'a ParseNode>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a ParseNode;

    fn next(&mut self) -> Option<&'a ParseNode> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

/// `NP-SBJ-1` → `NP`, `NP=2` → `NP`. Labels starting with `-` (`-NONE-`, `-LRB-`) are kept.
pub fn strip_function_tags(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(i) => &label[..i],
        None => label,
    }
}

enum Item {
    Node(ParseNode),
    Word(String, usize),
}

struct Frame {
    label: Option<String>,
    open: usize,
    items: Vec<Item>,
}

#[derive(Debug, PartialEq)]
enum Lexeme<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> impl Iterator<Item = (usize, Lexeme<'_>)> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        let rest = &text[pos..];
        let skip = rest.len() - rest.trim_start().len();
        pos += skip;
        let rest = &text[pos..];
        let c = rest.chars().next()?;
        let start = pos;
        match c {
            '(' => {
                pos += 1;
                Some((start, Lexeme::Open))
            }
            ')' => {
                pos += 1;
                Some((start, Lexeme::Close))
            }
            _ => {
                let end = rest
                    .find(|ch: char| ch == '(' || ch == ')' || ch.is_whitespace())
                    .unwrap_or(rest.len());
                pos += end;
                Some((start, Lexeme::Atom(&rest[..end])))
            }
        }
    })
}

fn close(frame: Frame) -> Result<ParseNode, ParseError> {
    let Frame { label, open, mut items } = frame;
    let Some(label) = label else {
        // Unlabeled wrapper, e.g. "( (S ...) )".
        return match (items.pop(), items.is_empty()) {
            (Some(Item::Node(node)), true) => Ok(node),
            (None, _) => err(open, "empty constituent"),
            _ => err(open, "unlabeled bracket must wrap exactly one constituent"),
        };
    };
    let label = strip_function_tags(&label).to_string();
    match items.len() {
        0 => err(open, format!("constituent ({label}) has no leaves")),
        1 if matches!(items[0], Item::Word(..)) => {
            let Some(Item::Word(word, idx)) = items.pop() else { unreachable!() };
            Ok(ParseNode {
                label,
                span: Span::new(idx, idx + 1),
                children: Vec::new(),
                word: Some(word),
            })
        }
        _ => {
            let children: Vec<ParseNode> = items
                .into_iter()
                .map(|item| match item {
                    Item::Node(n) => n,
                    Item::Word(word, idx) => ParseNode {
                        label: String::new(),
                        span: Span::new(idx, idx + 1),
                        children: Vec::new(),
                        word: Some(word),
                    },
                })
                .collect();
            let span = Span::new(children[0].span.lo, children[children.len() - 1].span.hi);
            Ok(ParseNode {
                label,
                span,
                children,
                word: None,
            })
        }
    }
}

/// Parses one bracketed tree. Leaves are numbered left to right from 0.
pub fn parse_bracketed(text: &str) -> Result<ParseNode, ParseError> {
    let mut stack: Vec<Frame> = Vec::new();
    let mut root: Option<ParseNode> = None;
    let mut next_leaf = 0usize;
    let mut expecting_label = false;

    for (offset, lexeme) in lex(text) {
        if root.is_some() {
            return err(offset, "trailing input after the complete tree");
        }
        if expecting_label {
            expecting_label = false;
            if let Lexeme::Atom(a) = lexeme {
                stack.last_mut().expect("open frame").label = Some(a.to_string());
                continue;
            }
            // "((" or "()": leave the frame unlabeled.
        }
        match lexeme {
            Lexeme::Open => {
                if stack.len() >= MAX_DEPTH {
                    return err(offset, format!("nesting deeper than {MAX_DEPTH}"));
                }
                stack.push(Frame {
                    label: None,
                    open: offset,
                    items: Vec::new(),
                });
                expecting_label = true;
            }
            Lexeme::Close => {
                let frame = match stack.pop() {
                    Some(f) => f,
                    None => return err(offset, "unbalanced ')'"),
                };
                let node = close(frame)?;
                match stack.last_mut() {
                    Some(parent) => parent.items.push(Item::Node(node)),
                    None => root = Some(node),
                }
            }
            Lexeme::Atom(a) => match stack.last_mut() {
                Some(frame) => {
                    frame.items.push(Item::Word(a.to_string(), next_leaf));
                    next_leaf += 1;
                }
                None => return err(offset, "token outside brackets"),
            },
        }
    }
    if let Some(open) = stack.last() {
        return err(open.open, "unbalanced '(': missing ')'");
    }
    match root {
        Some(node) => Ok(node),
        None => err(0, "empty input"),
    }
}
