//! Typed annotation data model.
//!
//! A [`DataPack`] owns an immutable text and accumulates span, link and group
//! annotations as it moves through the pipeline. A [`MultiPack`] bundles
//! named packs (a query pack plus one pack per retrieved passage) and holds
//! the links that cross pack boundaries.
//!
//! All offsets are Unicode scalar value offsets into the text, never bytes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::Range;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataPackError {
    #[error("span [{begin}, {end}) out of bounds for text of length {len}")]
    OutOfBounds { begin: usize, end: usize, len: usize },
    #[error("annotation kind must be non-empty")]
    EmptyKind,
    #[error("annotation reference {0} does not resolve")]
    UnresolvedRef(AnnotationRef),
    #[error("group must have at least one member")]
    EmptyGroup,
    #[error("pack name {0:?} already used in this multipack")]
    DuplicatePackName(String),
    #[error("malformed pack: {0}")]
    MalformedPack(String),
}

/// Per-pack annotation id. Ids are handed out in increasing order and are
/// shared across spans, links and groups of the same pack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotationId(pub u64);

impl fmt::Display for AnnotationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Attribute value attached to a span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Num(f64),
    Str(String),
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Num(v)
    }
}

impl From<&str> for AttrValue {
    fn from(v: &str) -> Self {
        AttrValue::Str(v.to_string())
    }
}

impl From<String> for AttrValue {
    fn from(v: String) -> Self {
        AttrValue::Str(v)
    }
}

impl AttrValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Num(v) => Some(*v),
            AttrValue::Str(_) => None,
        }
    }
}

pub type Attributes = BTreeMap<String, AttrValue>;

/// Reference to an annotation. `pack` is `None` for references local to the
/// pack holding the link or group, and names a pack for multipack links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotationRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack: Option<String>,
    pub id: AnnotationId,
}

impl AnnotationRef {
    pub fn local(id: AnnotationId) -> Self {
        Self { pack: None, id }
    }

    pub fn in_pack(pack: impl Into<String>, id: AnnotationId) -> Self {
        Self { pack: Some(pack.into()), id }
    }
}

impl fmt::Display for AnnotationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.pack {
            Some(p) => write!(f, "{p}:{}", self.id),
            None => write!(f, "{}", self.id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub id: AnnotationId,
    pub kind: String,
    pub begin: usize,
    pub end: usize,
    #[serde(default)]
    pub attributes: Attributes,
}

impl SpanAnnotation {
    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    fn intersects(&self, range: &Range<usize>) -> bool {
        if self.is_empty() {
            range.start <= self.begin && self.begin < range.end
        } else {
            self.begin < range.end && self.end > range.start
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkAnnotation {
    pub id: AnnotationId,
    pub kind: String,
    pub parent: AnnotationRef,
    pub child: AnnotationRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAnnotation {
    pub id: AnnotationId,
    pub kind: String,
    pub members: Vec<AnnotationRef>,
}

/// Wire form of a pack; field names are part of the file format.
#[derive(Serialize, Deserialize)]
struct PackRecord {
    pack_id: String,
    text: String,
    annotations: Vec<SpanAnnotation>,
    links: Vec<LinkAnnotation>,
    groups: Vec<GroupAnnotation>,
    metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPack {
    pack_id: String,
    text: String,
    char_len: usize,
    annotations: Vec<SpanAnnotation>,
    links: Vec<LinkAnnotation>,
    groups: Vec<GroupAnnotation>,
    metadata: BTreeMap<String, String>,
    next_id: u64,
}

impl DataPack {
    /// Creates a pack with a fresh random id and no annotations.
    pub fn new(text: impl Into<String>) -> Self {
        Self::with_id(uuid::Uuid::new_v4().to_string(), text)
    }

    pub fn with_id(pack_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            pack_id: pack_id.into(),
            char_len: text.chars().count(),
            text,
            annotations: Vec::new(),
            links: Vec::new(),
            groups: Vec::new(),
            metadata: BTreeMap::new(),
            next_id: 0,
        }
    }

    pub fn pack_id(&self) -> &str {
        &self.pack_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Length of the text in characters.
    pub fn len(&self) -> usize {
        self.char_len
    }

    pub fn is_empty(&self) -> bool {
        self.char_len == 0
    }

    pub fn annotations(&self) -> &[SpanAnnotation] {
        &self.annotations
    }

    pub fn links(&self) -> &[LinkAnnotation] {
        &self.links
    }

    pub fn groups(&self) -> &[GroupAnnotation] {
        &self.groups
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    fn fresh_id(&mut self) -> AnnotationId {
        let id = AnnotationId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn add_span(
        &mut self,
        kind: &str,
        begin: usize,
        end: usize,
        attributes: Attributes,
    ) -> Result<AnnotationId, DataPackError> {
        if kind.is_empty() {
            return Err(DataPackError::EmptyKind);
        }
        if begin > end || end > self.char_len {
            return Err(DataPackError::OutOfBounds { begin, end, len: self.char_len });
        }
        let id = self.fresh_id();
        self.annotations.push(SpanAnnotation {
            id,
            kind: kind.to_string(),
            begin,
            end,
            attributes,
        });
        Ok(id)
    }

    pub fn add_link(
        &mut self,
        kind: &str,
        parent: AnnotationId,
        child: AnnotationId,
    ) -> Result<AnnotationId, DataPackError> {
        if kind.is_empty() {
            return Err(DataPackError::EmptyKind);
        }
        for r in [parent, child] {
            if !self.contains(r) {
                return Err(DataPackError::UnresolvedRef(AnnotationRef::local(r)));
            }
        }
        let id = self.fresh_id();
        self.links.push(LinkAnnotation {
            id,
            kind: kind.to_string(),
            parent: AnnotationRef::local(parent),
            child: AnnotationRef::local(child),
        });
        Ok(id)
    }

    pub fn add_group(
        &mut self,
        kind: &str,
        members: &[AnnotationId],
    ) -> Result<AnnotationId, DataPackError> {
        if kind.is_empty() {
            return Err(DataPackError::EmptyKind);
        }
        if members.is_empty() {
            return Err(DataPackError::EmptyGroup);
        }
        if let Some(m) = members.iter().find(|m| !self.contains(**m)) {
            return Err(DataPackError::UnresolvedRef(AnnotationRef::local(*m)));
        }
        let mut members: Vec<AnnotationRef> =
            members.iter().copied().map(AnnotationRef::local).collect();
        members.sort();
        members.dedup();
        let id = self.fresh_id();
        self.groups.push(GroupAnnotation { id, kind: kind.to_string(), members });
        Ok(id)
    }

    /// Whether any span, link or group in this pack carries `id`.
    pub fn contains(&self, id: AnnotationId) -> bool {
        self.span(id).is_some()
            || self.links.iter().any(|l| l.id == id)
            || self.groups.iter().any(|g| g.id == id)
    }

    pub fn span(&self, id: AnnotationId) -> Option<&SpanAnnotation> {
        // spans are appended in id order
        self.annotations
            .binary_search_by_key(&id, |s| s.id)
            .ok()
            .map(|i| &self.annotations[i])
    }

    /// Text under the span `id`.
    pub fn covered_text(&self, id: AnnotationId) -> Option<&str> {
        self.span(id).map(|s| self.slice(s.begin, s.end))
    }

    /// Substring by character offsets. Offsets past the end are clamped.
    pub fn slice(&self, begin: usize, end: usize) -> &str {
        char_slice(&self.text, begin, end)
    }

    /// Spans of `kind` intersecting `range` (all of them when `range` is
    /// `None`), ordered by `(begin, end, id)`.
    pub fn get_spans(&self, kind: &str, range: Option<Range<usize>>) -> Vec<&SpanAnnotation> {
        let mut out: Vec<&SpanAnnotation> = self
            .annotations
            .iter()
            .filter(|s| s.kind == kind)
            .filter(|s| range.as_ref().is_none_or(|r| s.intersects(r)))
            .collect();
        out.sort_by_key(|s| (s.begin, s.end, s.id));
        out
    }

    pub fn serialize(&self) -> Vec<u8> {
        let record = PackRecord {
            pack_id: self.pack_id.clone(),
            text: self.text.clone(),
            annotations: self.annotations.clone(),
            links: self.links.clone(),
            groups: self.groups.clone(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_vec_pretty(&record).expect("pack records always serialize")
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, DataPackError> {
        let malformed = |m: String| DataPackError::MalformedPack(m);
        let record: PackRecord =
            serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
        let mut pack = DataPack::with_id(record.pack_id, record.text);

        let mut seen = HashSet::new();
        let all_ids = record
            .annotations
            .iter()
            .map(|s| s.id)
            .chain(record.links.iter().map(|l| l.id))
            .chain(record.groups.iter().map(|g| g.id));
        for id in all_ids {
            if !seen.insert(id) {
                return Err(malformed(format!("duplicate annotation id {id}")));
            }
        }
        if record.annotations.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(malformed("span ids not increasing".into()));
        }
        for s in &record.annotations {
            if s.kind.is_empty() || s.begin > s.end || s.end > pack.char_len {
                return Err(malformed(format!("invalid span {}", s.id)));
            }
        }
        let resolves = |r: &AnnotationRef| r.pack.is_some() || seen.contains(&r.id);
        for l in &record.links {
            if l.kind.is_empty() || !resolves(&l.parent) || !resolves(&l.child) {
                return Err(malformed(format!("invalid link {}", l.id)));
            }
        }
        for g in &record.groups {
            if g.kind.is_empty() || g.members.is_empty() || !g.members.iter().all(resolves) {
                return Err(malformed(format!("invalid group {}", g.id)));
            }
        }

        pack.next_id = seen.iter().map(|id| id.0 + 1).max().unwrap_or(0);
        pack.annotations = record.annotations;
        pack.links = record.links;
        pack.groups = record.groups;
        pack.metadata = record.metadata;
        Ok(pack)
    }
}

/// Substring of `text` between character offsets `begin..end`.
pub fn char_slice(text: &str, begin: usize, end: usize) -> &str {
    let byte_at = |c: usize| text.char_indices().nth(c).map_or(text.len(), |(b, _)| b);
    let b = byte_at(begin);
    let e = if end <= begin { b } else { b + byte_at_from(&text[b..], end - begin) };
    &text[b..e]
}

fn byte_at_from(text: &str, chars: usize) -> usize {
    text.char_indices().nth(chars).map_or(text.len(), |(b, _)| b)
}

/// Named collection of packs plus links whose endpoints live in different
/// packs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultiPack {
    packs: IndexMap<String, DataPack>,
    cross_links: Vec<LinkAnnotation>,
    next_link_id: u64,
}

impl MultiPack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_pack(&mut self, name: impl Into<String>, pack: DataPack) -> Result<(), DataPackError> {
        let name = name.into();
        if self.packs.contains_key(&name) {
            return Err(DataPackError::DuplicatePackName(name));
        }
        self.packs.insert(name, pack);
        Ok(())
    }

    pub fn pack(&self, name: &str) -> Option<&DataPack> {
        self.packs.get(name)
    }

    pub fn pack_mut(&mut self, name: &str) -> Option<&mut DataPack> {
        self.packs.get_mut(name)
    }

    /// Pack names in insertion order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.packs.keys().map(String::as_str)
    }

    pub fn packs(&self) -> impl Iterator<Item = (&str, &DataPack)> {
        self.packs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.packs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packs.is_empty()
    }

    pub fn cross_links(&self) -> &[LinkAnnotation] {
        &self.cross_links
    }

    fn resolve(&self, r: &AnnotationRef) -> bool {
        r.pack
            .as_deref()
            .and_then(|p| self.packs.get(p))
            .is_some_and(|p| p.contains(r.id))
    }

    pub fn add_cross_link(
        &mut self,
        kind: &str,
        parent: AnnotationRef,
        child: AnnotationRef,
    ) -> Result<AnnotationId, DataPackError> {
        if kind.is_empty() {
            return Err(DataPackError::EmptyKind);
        }
        for r in [&parent, &child] {
            if !self.resolve(r) {
                return Err(DataPackError::UnresolvedRef(r.clone()));
            }
        }
        let id = AnnotationId(self.next_link_id);
        self.next_link_id += 1;
        self.cross_links.push(LinkAnnotation { id, kind: kind.to_string(), parent, child });
        Ok(id)
    }
}
