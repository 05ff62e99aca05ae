//! Binary index file.
//!
//! All integers little-endian:
//!
//! ```text
//! magic       8 bytes   "RKQAIDX1"
//! version     u8        FORMAT_VERSION
//! k1, b       f64, f64
//! flags       u8        bit 0 stopwords, bit 1 stemming
//! n_docs      u32
//! n_docs ×    id_len u32, id (UTF-8), doc_len u32
//! n_terms     u32
//! n_terms ×   term_len u32, term (UTF-8), n_postings u32,
//!             n_postings × (ordinal u32, tf u32)
//! ```
//!
//! Terms are written in byte order and postings in ordinal order, so the
//! same index always produces the same file.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::analysis::Analyzer;
use super::index::{Bm25Params, IndexOptions, InvertedIndex, Posting};
use super::IndexError;

pub const MAGIC: &[u8; 8] = b"RKQAIDX1";
pub const FORMAT_VERSION: u8 = 1;

fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub fn write_index(index: &InvertedIndex, w: &mut impl Write) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u8(FORMAT_VERSION)?;
    let opts = index.options();
    w.write_f64::<LE>(opts.params.k1)?;
    w.write_f64::<LE>(opts.params.b)?;
    w.write_u8(opts.analyzer.stopwords as u8 | (opts.analyzer.stemming as u8) << 1)?;

    w.write_u32::<LE>(index.doc_count() as u32)?;
    for (id, len) in index.ids.iter().zip(&index.doc_lengths) {
        write_str(w, id)?;
        w.write_u32::<LE>(*len)?;
    }

    let mut terms: Vec<&String> = index.postings.keys().collect();
    terms.sort_unstable();
    w.write_u32::<LE>(terms.len() as u32)?;
    for term in terms {
        write_str(w, term)?;
        let list = &index.postings[term];
        w.write_u32::<LE>(list.len() as u32)?;
        for p in list {
            w.write_u32::<LE>(p.ordinal)?;
            w.write_u32::<LE>(p.tf)?;
        }
    }
    Ok(())
}

pub fn save_index(index: &InvertedIndex, path: &Path) -> Result<(), IndexError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_index(index, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<InvertedIndex, IndexError> {
    let bytes = std::fs::read(path)?;
    read_index(&bytes)
}

fn corrupt(msg: impl Into<String>) -> IndexError {
    IndexError::CorruptIndex(msg.into())
}

fn read_str(r: &mut Cursor<&[u8]>) -> Result<String, IndexError> {
    let len = r.read_u32::<LE>()? as usize;
    let remaining = r.get_ref().len() - r.position() as usize;
    if len > remaining {
        return Err(corrupt("string runs past end of file"));
    }
    let mut buf = vec![0; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| corrupt("invalid UTF-8"))
}

pub fn read_index(bytes: &[u8]) -> Result<InvertedIndex, IndexError> {
    if bytes.len() < MAGIC.len() + 1 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let version = bytes[MAGIC.len()];
    if version != FORMAT_VERSION {
        return Err(IndexError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let mut r = Cursor::new(bytes);
    r.set_position(MAGIC.len() as u64 + 1);
    parse_body(&mut r).map_err(|e| match e {
        IndexError::Io(e) if e.kind() == io::ErrorKind::UnexpectedEof => corrupt("truncated file"),
        other => other,
    })
}

fn parse_body(r: &mut Cursor<&[u8]>) -> Result<InvertedIndex, IndexError> {
    let k1 = r.read_f64::<LE>()?;
    let b = r.read_f64::<LE>()?;
    let flags = r.read_u8()?;
    if flags > 3 {
        return Err(corrupt("unknown flags"));
    }
    let options = IndexOptions {
        params: Bm25Params { k1, b },
        analyzer: Analyzer { stopwords: flags & 1 != 0, stemming: flags & 2 != 0 },
    };

    let n_docs = r.read_u32::<LE>()? as usize;
    let mut ids = Vec::new();
    let mut lengths = Vec::new();
    for _ in 0..n_docs {
        ids.push(read_str(r)?);
        lengths.push(r.read_u32::<LE>()?);
    }

    let n_terms = r.read_u32::<LE>()? as usize;
    let mut postings = HashMap::with_capacity(n_terms.min(1 << 20));
    let mut tf_totals = vec![0u64; n_docs];
    for _ in 0..n_terms {
        let term = read_str(r)?;
        let n = r.read_u32::<LE>()? as usize;
        let mut list = Vec::with_capacity(n.min(n_docs));
        for _ in 0..n {
            let ordinal = r.read_u32::<LE>()?;
            let tf = r.read_u32::<LE>()?;
            if ordinal as usize >= n_docs || tf == 0 {
                return Err(corrupt(format!("bad posting for {term:?}")));
            }
            if list.last().is_some_and(|p: &Posting| p.ordinal >= ordinal) {
                return Err(corrupt(format!("postings for {term:?} not sorted")));
            }
            tf_totals[ordinal as usize] += tf as u64;
            list.push(Posting { ordinal, tf });
        }
        if postings.insert(term, list).is_some() {
            return Err(corrupt("duplicate term"));
        }
    }
    if (r.position() as usize) != r.get_ref().len() {
        return Err(corrupt("trailing bytes"));
    }
    if tf_totals.iter().zip(&lengths).any(|(t, l)| *t != *l as u64) {
        return Err(corrupt("document lengths disagree with postings"));
    }
    let index = InvertedIndex::from_parts(options, postings, lengths, ids);
    if index.id_lookup.len() != index.doc_count() {
        return Err(corrupt("duplicate passage id"));
    }
    Ok(index)
}
