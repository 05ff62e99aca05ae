//! Readers for MS MARCO style TSV files and CORD-19 style corpora, plus the
//! overlapping sliding-window chunker used for long documents.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::exec::Execution;

/// Separator between a document id and a chunk index in chunk passage ids.
pub const CHUNK_SEPARATOR: char = '#';

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: malformed line {line_no}: {reason}")]
    MalformedLine { path: String, line_no: usize, reason: String },
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("invalid chunk parameters: window {window} must exceed overlap {overlap}")]
    InvalidChunkParams { window: usize, overlap: usize },
    #[error("{path}: duplicate id {id:?}")]
    DuplicateId { path: String, id: String },
    #[error("{path}: id {id:?} is empty or contains '#'")]
    InvalidId { path: String, id: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub title: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    pub token_begin: usize,
    pub token_end: usize,
}

impl Passage {
    /// A passage that is its own document (one MS MARCO collection line).
    pub fn native(id: impl Into<String>, text: impl Into<String>) -> Self {
        let id = id.into();
        let text = text.into();
        let n = text.split_whitespace().count();
        Self {
            passage_id: id.clone(),
            doc_id: id,
            chunk_index: 0,
            text,
            token_begin: 0,
            token_end: n,
        }
    }
}

/// Splits a passage id into `(doc_id, chunk_index)`. Ids without the chunk
/// separator are native passages with chunk index 0.
pub fn parse_passage_id(passage_id: &str) -> (&str, usize) {
    if let Some((doc, idx)) = passage_id.rsplit_once(CHUNK_SEPARATOR) {
        if let Ok(i) = idx.parse() {
            return (doc, i);
        }
    }
    (passage_id, 0)
}

pub fn chunk_passage_id(doc_id: &str, chunk_index: usize) -> String {
    format!("{doc_id}{CHUNK_SEPARATOR}{chunk_index}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub text: String,
}

/// Query id to the set of relevant passage ids. Every stored set is non-empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevanceJudgments(BTreeMap<String, BTreeSet<String>>);

impl RelevanceJudgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, passage_id: impl Into<String>) {
        self.0.entry(query_id.into()).or_default().insert(passage_id.into());
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.0.get(query_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<Q: Into<String>, P: Into<String>> FromIterator<(Q, P)> for RelevanceJudgments {
    fn from_iter<T: IntoIterator<Item = (Q, P)>>(iter: T) -> Self {
        let mut out = Self::new();
        for (q, p) in iter {
            out.insert(q, p);
        }
        out
    }
}

/// Query id to its reference answers. Every stored list is non-empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReferenceAnswers(BTreeMap<String, Vec<String>>);

impl ReferenceAnswers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, query_id: impl Into<String>, answer: impl Into<String>) {
        self.0.entry(query_id.into()).or_default().push(answer.into());
    }

    pub fn get(&self, query_id: &str) -> Option<&[String]> {
        self.0.get(query_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Passage texts by id, used by the stages that need more than the index.
#[derive(Debug, Clone, Default)]
pub struct PassageStore {
    passages: HashMap<String, Passage>,
}

impl PassageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, passage: Passage) {
        self.passages.insert(passage.passage_id.clone(), passage);
    }

    pub fn get(&self, passage_id: &str) -> Option<&Passage> {
        self.passages.get(passage_id)
    }

    pub fn text(&self, passage_id: &str) -> Option<&str> {
        self.passages.get(passage_id).map(|p| p.text.as_str())
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }
}

impl FromIterator<Passage> for PassageStore {
    fn from_iter<T: IntoIterator<Item = Passage>>(iter: T) -> Self {
        let mut s = Self::new();
        for p in iter {
            s.insert(p);
        }
        s
    }
}

/// What a line reader does when it meets a malformed line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnMalformed {
    #[default]
    Fail,
    Skip,
}

/// Opens a UTF-8 text file, transparently decompressing `.gz` files.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead + Send>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn io_err(path: &Path, source: io::Error) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), source }
}

fn malformed(path: &str, line_no: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedLine { path: path.to_string(), line_no, reason: reason.into() }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.contains(CHUNK_SEPARATOR)
}

/// Streaming reader over a `pid<TAB>text` passage collection.
pub struct PassageReader {
    path: String,
    lines: io::Lines<Box<dyn BufRead + Send>>,
    line_no: usize,
    mode: OnMalformed,
    skipped: usize,
    done: bool,
}

impl PassageReader {
    /// Number of malformed lines skipped so far (always 0 in fail-fast mode).
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    fn parse(&self, line: &str) -> Result<Passage, CorpusError> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(malformed(
                &self.path,
                self.line_no,
                format!("expected 2 tab-separated fields, found {}", fields.len()),
            ));
        }
        if !valid_id(fields[0]) {
            return Err(CorpusError::InvalidId { path: self.path.clone(), id: fields[0].into() });
        }
        Ok(Passage::native(fields[0], fields[1]))
    }
}

impl Iterator for PassageReader {
    type Item = Result<Passage, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.done = true;
                    return Some(Err(CorpusError::Io { path: self.path.clone(), source: e }));
                }
            };
            self.line_no += 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            match self.parse(line) {
                Ok(p) => return Some(Ok(p)),
                Err(e) if self.mode == OnMalformed::Skip => {
                    log::warn!("skipping: {e}");
                    self.skipped += 1;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        None
    }
}

pub fn read_passage_collection(path: &Path, mode: OnMalformed) -> Result<PassageReader, CorpusError> {
    Ok(PassageReader {
        path: path.display().to_string(),
        lines: open_text(path)?.lines(),
        line_no: 0,
        mode,
        skipped: 0,
        done: false,
    })
}

/// Calls `f(line_no, line)` for each non-blank line.
fn for_each_line(
    path: &Path,
    mut f: impl FnMut(usize, &str) -> Result<(), CorpusError>,
) -> Result<(), CorpusError> {
    for (i, line) in open_text(path)?.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        if !line.is_empty() {
            f(i + 1, line)?;
        }
    }
    Ok(())
}

/// Reads `qid<TAB>text` lines.
pub fn read_queries(path: &Path) -> Result<Vec<Query>, CorpusError> {
    let name = path.display().to_string();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for_each_line(path, |n, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0].is_empty() {
            return Err(malformed(&name, n, "expected `qid<TAB>text`"));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(CorpusError::DuplicateId { path: name.clone(), id: fields[0].into() });
        }
        out.push(Query { query_id: fields[0].into(), text: fields[1].into() });
        Ok(())
    })?;
    Ok(out)
}

/// Reads `qid 0 pid rel` lines (any whitespace), keeping judgments with
/// `rel > 0`.
pub fn read_qrels(path: &Path) -> Result<RelevanceJudgments, CorpusError> {
    let name = path.display().to_string();
    let mut out = RelevanceJudgments::new();
    for_each_line(path, |n, line| {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(malformed(&name, n, format!("expected 4 fields, found {}", fields.len())));
        }
        let rel: i64 = fields[3]
            .parse()
            .map_err(|_| malformed(&name, n, format!("bad relevance {:?}", fields[3])))?;
        if rel > 0 {
            out.insert(fields[0], fields[2]);
        }
        Ok(())
    })?;
    Ok(out)
}

/// Reads `qid<TAB>answer` lines; repeated qids accumulate references.
pub fn read_answers(path: &Path) -> Result<ReferenceAnswers, CorpusError> {
    let name = path.display().to_string();
    let mut out = ReferenceAnswers::new();
    for_each_line(path, |n, line| {
        match line.split_once('\t') {
            Some((qid, answer)) if !qid.is_empty() => out.push(qid, answer),
            _ => return Err(malformed(&name, n, "expected `qid<TAB>answer`")),
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn write_queries(w: &mut impl Write, queries: &[Query]) -> io::Result<()> {
    for q in queries {
        writeln!(w, "{}\t{}", q.query_id, q.text)?;
    }
    Ok(())
}

pub fn write_qrels(w: &mut impl Write, qrels: &RelevanceJudgments) -> io::Result<()> {
    for (qid, pids) in qrels.iter() {
        for pid in pids {
            writeln!(w, "{qid} 0 {pid} 1")?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct ManifestRow {
    cord_uid: String,
    #[serde(default)]
    title: String,
}

#[derive(Deserialize)]
struct FullText {
    #[serde(default)]
    body_text: Vec<Paragraph>,
}

#[derive(Deserialize)]
struct Paragraph {
    text: String,
}

/// Streaming reader over a CORD-19 style corpus: a CSV manifest with at least
/// `cord_uid` and `title` columns, and a directory holding `<cord_uid>.json`
/// full-text files with a `body_text` list of `{"text": ...}` paragraphs.
pub struct CordReader {
    rows: csv::DeserializeRecordsIntoIter<Box<dyn BufRead + Send>, ManifestRow>,
    fulltext_dir: PathBuf,
    seen: HashSet<String>,
    manifest: String,
    title_only: usize,
}

impl CordReader {
    /// Documents that fell back to their title because no usable full text
    /// was found.
    pub fn title_only(&self) -> usize {
        self.title_only
    }

    fn load_paragraphs(&self, uid: &str) -> Option<Vec<String>> {
        let path = self.fulltext_dir.join(format!("{uid}.json"));
        let raw = std::fs::read(&path).ok()?;
        let parsed: FullText = serde_json::from_slice(&raw).ok()?;
        Some(parsed.body_text.into_iter().map(|p| p.text).collect())
    }
}

impl Iterator for CordReader {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = match self.rows.next()? {
            Ok(r) => r,
            Err(e) => return Some(Err(CorpusError::MalformedManifest(e.to_string()))),
        };
        if !valid_id(&row.cord_uid) {
            return Some(Err(CorpusError::InvalidId {
                path: self.manifest.clone(),
                id: row.cord_uid,
            }));
        }
        if !self.seen.insert(row.cord_uid.clone()) {
            return Some(Err(CorpusError::DuplicateId {
                path: self.manifest.clone(),
                id: row.cord_uid,
            }));
        }
        let paragraphs = self.load_paragraphs(&row.cord_uid);
        if paragraphs.is_none() {
            self.title_only += 1;
        }
        let parts: Vec<&str> = std::iter::once(row.title.as_str())
            .chain(paragraphs.iter().flatten().map(String::as_str))
            .filter(|s| !s.is_empty())
            .collect();
        let title = (!row.title.is_empty()).then(|| row.title.clone());
        Some(Ok(Document { doc_id: row.cord_uid, title, body: parts.join("\n") }))
    }
}

pub fn read_cord_corpus(metadata_path: &Path, fulltext_dir: &Path) -> Result<CordReader, CorpusError> {
    std::fs::read_dir(fulltext_dir).map_err(|e| {
        CorpusError::MalformedManifest(format!(
            "full-text directory {} unreadable: {e}",
            fulltext_dir.display()
        ))
    })?;
    let input = open_text(metadata_path)
        .map_err(|e| CorpusError::MalformedManifest(e.to_string()))?;
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::MalformedManifest(e.to_string()))?;
    if !headers.iter().any(|h| h == "cord_uid") {
        return Err(CorpusError::MalformedManifest("missing `cord_uid` column".into()));
    }
    Ok(CordReader {
        rows: reader.into_deserialize(),
        fulltext_dir: fulltext_dir.to_path_buf(),
        seen: HashSet::new(),
        manifest: metadata_path.display().to_string(),
        title_only: 0,
    })
}

/// Window and overlap, in whitespace tokens, for [`chunk_document`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkParams {
    pub window: usize,
    pub overlap: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        Self { window: 60, overlap: 15 }
    }
}

impl ChunkParams {
    pub fn new(window: usize, overlap: usize) -> Result<Self, CorpusError> {
        let p = Self { window, overlap };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.window <= self.overlap {
            return Err(CorpusError::InvalidChunkParams {
                window: self.window,
                overlap: self.overlap,
            });
        }
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.window - self.overlap
    }
}

/// Splits a document into overlapping whitespace-token windows. Chunk `k`
/// covers tokens `[k * step, k * step + window)` clipped to the document,
/// with `step = window - overlap`. The chunk that reaches the end of the
/// document is the last one, so a document of at most `window` tokens
/// yields exactly one chunk and an empty document yields none.
pub fn chunk_document(doc: &Document, params: ChunkParams) -> Result<Vec<Passage>, CorpusError> {
    params.validate()?;
    let tokens: Vec<&str> = doc.body.split_whitespace().collect();
    let step = params.step();
    let n = tokens.len();
    let count = if n == 0 { 0 } else { 1 + n.saturating_sub(params.window).div_ceil(step) };
    let out = (0..count)
        .map(|k| {
            let start = k * step;
            let end = (start + params.window).min(n);
            Passage {
                passage_id: chunk_passage_id(&doc.doc_id, k),
                doc_id: doc.doc_id.clone(),
                chunk_index: k,
                text: tokens[start..end].join(" "),
                token_begin: start,
                token_end: end,
            }
        })
        .collect();
    Ok(out)
}

/// Chunks many documents, preserving document order in the output.
pub fn chunk_documents(
    docs: &[Document],
    params: ChunkParams,
    exec: Execution,
) -> Result<Vec<Passage>, CorpusError> {
    params.validate()?;
    let chunked = exec.map(docs, |d| chunk_document(d, params));
    let mut out = Vec::new();
    for c in chunked {
        out.extend(c?);
    }
    Ok(out)
}
