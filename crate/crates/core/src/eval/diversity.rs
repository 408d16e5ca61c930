//! Compression-based diversity: `D = S1 - S2`.
//!
//! `S1` sums the gzip sizes of every sentence compressed on its own, `S2` is
//! the gzip size of all sentences together. Repetition makes `S2` small
//! relative to `S1`, so a smaller `D` means a more diverse corpus.

use std::io::Write;

use flate2::{Compression, GzBuilder};
use serde::Serialize;

use crate::corpus::Corpus;

/// DEFLATE level used for every measurement.
pub const GZIP_LEVEL: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiversityReport {
    pub s1: u64,
    pub s2: u64,
    pub d: i64,
}

/// Size of `bytes` gzipped at [`GZIP_LEVEL`], with no file name and a zero timestamp in the header.
pub fn gzip_len(bytes: &[u8]) -> u64 {
    let mut enc = GzBuilder::new().mtime(0).write(Vec::new(), Compression::new(GZIP_LEVEL));
    enc.write_all(bytes).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail").len() as u64
}

/// Each sentence is measured as its text plus a newline; `S2` compresses those lines
/// concatenated in corpus order.
pub fn gzip_diversity(variants: &Corpus) -> DiversityReport {
    let lines: Vec<String> = variants.iter().map(|s| s.text() + "\n").collect();
    let s1: u64 = lines.iter().map(|l| gzip_len(l.as_bytes())).sum();
    let s2 = gzip_len(lines.concat().as_bytes());
    DiversityReport {
        s1,
        s2,
        d: s1 as i64 - s2 as i64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    #[test]
    fn header_is_reproducible() {
        let a = gzip_len(b"hello world\n");
        let b = gzip_len(b"hello world\n");
        assert_eq!(a, b);
        // 10-byte header + 8-byte trailer around the deflate stream.
        assert!(a > 18);
    }

    #[test]
    fn single_sentence_is_zero() {
        let c = Corpus::from_lines("c", ["यह एक test है"], Source::Real).unwrap();
        let r = gzip_diversity(&c);
        assert_eq!(r.s1, r.s2);
        assert_eq!(r.d, 0);
    }

    #[test]
    fn duplication_increases_d() {
        let lines = ["मैं घर जा रहा हूँ", "वह school गया", "we are going home now"];
        let c = Corpus::from_lines("c", lines, Source::Real).unwrap();
        let doubled = Corpus::from_lines("c", lines.iter().chain(lines.iter()).copied(), Source::Real).unwrap();
        assert!(gzip_diversity(&doubled).d > gzip_diversity(&c).d);
    }
}
