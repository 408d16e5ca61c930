//! Versioned binary checkpoints: header, model shape, vocabulary, then every
//! tensor with its name and partition label.

use std::path::Path;

use super::graph::Mat;
use super::model::{parameter_shapes, ModelConfig, Param, Partition, TcsModel, Vocab, BOS, EOS, UNK};
use super::{Result, TcsError};
use crate::codec::{DecodeError, Reader, Writer};

pub const MAGIC: &str = "CSTM1";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_model(m: &TcsModel) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MAGIC.as_bytes());
    w.u32(FORMAT_VERSION);
    let cfg = m.config();
    for v in [cfg.d_model, cfg.n_heads, cfg.d_ff, cfg.max_len] {
        w.u32(v as u32);
    }
    let tokens = &m.vocab().tokens()[3..];
    w.len_prefix(tokens.len());
    for t in tokens {
        w.str(t);
    }
    w.len_prefix(m.params().len());
    for p in m.params() {
        w.str(&p.name);
        w.u8(p.partition.code());
        let (r, c) = p.value.dim();
        w.u32(r as u32);
        w.u32(c as u32);
        for v in p.value.iter() {
            w.f64(*v);
        }
    }
    w.finish()
}

pub fn decode_model(bytes: &[u8]) -> std::result::Result<TcsModel, DecodeError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(DecodeError::Version(version));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let cfg = ModelConfig {
        d_model: dims[0],
        n_heads: dims[1],
        d_ff: dims[2],
        max_len: dims[3],
    };
    cfg.validate().map_err(|e| r.invalid(e.to_string()))?;
    let n_tokens = r.count(5)?;
    let mut words = Vec::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        let t = r.str()?;
        if t.is_empty() || t.chars().any(char::is_whitespace) || [UNK, BOS, EOS].contains(&t.as_str()) {
            return Err(r.invalid(format!("bad vocabulary entry {t:?}")));
        }
        words.push(t);
    }
    let vocab = Vocab::new(&words);
    if vocab.len() != n_tokens + 3 || vocab.tokens()[3..] != words[..] {
        return Err(r.invalid("vocabulary must be sorted and unique"));
    }
    let shapes = parameter_shapes(&cfg, vocab.len());
    let needed: usize = shapes.iter().map(|(_, _, (a, b))| a * b * 8).sum();
    if needed > r.remaining() {
        return Err(DecodeError::Truncated(r.position()));
    }
    let n = r.count(13)?;
    if n != shapes.len() {
        return Err(r.invalid(format!("expected {} tensors, found {n}", shapes.len())));
    }
    let mut params = Vec::with_capacity(n);
    for (name, part, (rows, cols)) in shapes {
        let got = r.str()?;
        let code = r.u8()?;
        let shape = (r.u32()? as usize, r.u32()? as usize);
        if got != name || Partition::from_code(code) != Some(part) || shape != (rows, cols) {
            return Err(r.invalid(format!("tensor {got:?} does not match the expected {name}")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let v = r.f64()?;
            if !v.is_finite() {
                return Err(r.invalid(format!("non-finite value in {name}")));
            }
            data.push(v);
        }
        let value = Mat::from_shape_vec((rows, cols), data).expect("length matches shape");
        params.push(Param {
            name,
            partition: part,
            value,
        });
    }
    r.finish()?;
    TcsModel::from_params(vocab, cfg, params).map_err(|e| r.invalid(e.to_string()))
}

/// Writes atomically: a temporary sibling file is renamed over `path`.
pub fn write_checkpoint(m: &TcsModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    crate::ops::write_atomic(path, &encode_model(m)).map_err(|source| TcsError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<TcsModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| TcsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(decode_model(&bytes)?)
}
