//! On-disk corpus container.
//!
//! A corpus directory holds a JSON manifest plus up to three headerless,
//! little-endian binary files addressed by byte offsets from the manifest:
//!
//! ```text
//! manifest.json    format_version, dim, doc_count, flags, per-doc offsets
//! embeddings.bin   f32, L_i × dim per document
//! tokens.bin       u32, L_i per document        (optional)
//! attention.bin    f32, L_i per document        (optional)
//! ```
//!
//! Directories are written once; compression always produces a new one.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TokenMatrix;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const TOKENS_FILE: &str = "tokens.bin";
pub const ATTENTION_FILE: &str = "attention.bin";

/// One document (or query) with its token embeddings and optional per-token data.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub embeddings: TokenMatrix,
    pub token_ids: Option<Vec<u32>>,
    pub attention: Option<Vec<f32>>,
}

impl DocumentRecord {
    pub fn new(doc_id: impl Into<String>, embeddings: TokenMatrix) -> Self {
        Self {
            doc_id: doc_id.into(),
            embeddings,
            token_ids: None,
            attention: None,
        }
    }

    pub fn with_token_ids(mut self, ids: Vec<u32>) -> Self {
        self.token_ids = Some(ids);
        self
    }

    pub fn with_attention(mut self, attention: Vec<f32>) -> Self {
        self.attention = Some(attention);
        self
    }

    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.rows() == 0
    }

    fn check(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidRecord {
            doc_id: self.doc_id.clone(),
            message,
        };
        if self.doc_id.is_empty() {
            return Err(invalid("empty doc_id".into()));
        }
        let rows = self.embeddings.rows();
        if let Some((r, c)) = self.embeddings.first_non_finite() {
            return Err(invalid(format!("non-finite embedding at row {r}, column {c}")));
        }
        if let Some(ids) = &self.token_ids {
            if ids.len() != rows {
                return Err(invalid(format!("{} token ids for {rows} rows", ids.len())));
            }
        }
        if let Some(att) = &self.attention {
            if att.len() != rows {
                return Err(invalid(format!("{} attention values for {rows} rows", att.len())));
            }
            if let Some(i) = att.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(invalid(format!("negative attention at row {i}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocEntry {
    pub id: String,
    pub length: u64,
    pub emb_offset: u64,
    #[serde(default)]
    pub tok_offset: Option<u64>,
    #[serde(default)]
    pub att_offset: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub dim: u64,
    pub doc_count: u64,
    pub has_attention: bool,
    pub has_token_ids: bool,
    pub docs: Vec<DocEntry>,
}

impl CorpusManifest {
    fn expected_sizes(&self) -> (u64, u64) {
        let tokens: u64 = self.docs.iter().map(|d| d.length).sum();
        (tokens * self.dim * 4, tokens * 4)
    }

    /// Checks every manifest invariant, returning human-readable violations.
    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.format_version != FORMAT_VERSION {
            out.push(format!("unsupported format_version {}", self.format_version));
        }
        if self.dim == 0 {
            out.push("dim must be >= 1".into());
        }
        if self.doc_count != self.docs.len() as u64 {
            out.push(format!(
                "doc_count {} does not match {} doc entries",
                self.doc_count,
                self.docs.len()
            ));
        }
        let mut seen = HashSet::new();
        let (mut emb, mut tok) = (0u64, 0u64);
        for d in &self.docs {
            if d.id.is_empty() {
                out.push("empty doc id".into());
            }
            if !seen.insert(d.id.as_str()) {
                out.push(format!("duplicate doc_id {:?}", d.id));
            }
            if d.length == 0 {
                out.push(format!("doc {:?} has length 0", d.id));
            }
            if d.emb_offset != emb {
                out.push(format!(
                    "doc {:?}: emb_offset {} expected {emb}",
                    d.id, d.emb_offset
                ));
            }
            for (name, flag, off) in [
                ("tok_offset", self.has_token_ids, d.tok_offset),
                ("att_offset", self.has_attention, d.att_offset),
            ] {
                match (flag, off) {
                    (true, Some(o)) if o != tok => {
                        out.push(format!("doc {:?}: {name} {o} expected {tok}", d.id))
                    }
                    (true, None) => out.push(format!("doc {:?}: missing {name}", d.id)),
                    (false, Some(_)) => {
                        out.push(format!("doc {:?}: {name} present but flag is false", d.id))
                    }
                    _ => {}
                }
            }
            emb += d.length * self.dim * 4;
            tok += d.length * 4;
        }
        out
    }
}

/// Writes `records` as a new corpus directory at `path`.
pub fn write_corpus(records: &[DocumentRecord], path: &Path) -> Result<CorpusManifest> {
    let first = records.first().ok_or(Error::EmptyCorpus)?;
    let dim = first.embeddings.dim();
    let has_token_ids = first.token_ids.is_some();
    let has_attention = first.attention.is_some();

    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        r.check()?;
        if r.embeddings.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: r.embeddings.dim(),
            });
        }
        if r.token_ids.is_some() != has_token_ids || r.attention.is_some() != has_attention {
            return Err(Error::InvalidRecord {
                doc_id: r.doc_id.clone(),
                message: "token_ids/attention must be present for all records or none".into(),
            });
        }
        if !seen.insert(r.doc_id.as_str()) {
            return Err(Error::DuplicateId(r.doc_id.clone()));
        }
    }

    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    let manifest_path = path.join(MANIFEST_FILE);
    if manifest_path.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} already contains a corpus",
            path.display()
        )));
    }

    let mut emb = Sink::create(path.join(EMBEDDINGS_FILE))?;
    let mut tok = has_token_ids
        .then(|| Sink::create(path.join(TOKENS_FILE)))
        .transpose()?;
    let mut att = has_attention
        .then(|| Sink::create(path.join(ATTENTION_FILE)))
        .transpose()?;

    let mut docs = Vec::with_capacity(records.len());
    for r in records {
        let entry = DocEntry {
            id: r.doc_id.clone(),
            length: r.len() as u64,
            emb_offset: emb.offset,
            tok_offset: tok.as_ref().map(|s| s.offset),
            att_offset: att.as_ref().map(|s| s.offset),
        };
        emb.put(r.embeddings.values().iter().map(|v| v.to_le_bytes()))?;
        if let (Some(s), Some(ids)) = (tok.as_mut(), &r.token_ids) {
            s.put(ids.iter().map(|v| v.to_le_bytes()))?;
        }
        if let (Some(s), Some(a)) = (att.as_mut(), &r.attention) {
            s.put(a.iter().map(|v| v.to_le_bytes()))?;
        }
        docs.push(entry);
    }
    emb.finish()?;
    tok.map(Sink::finish).transpose()?;
    att.map(Sink::finish).transpose()?;

    let manifest = CorpusManifest {
        format_version: FORMAT_VERSION,
        dim: dim as u64,
        doc_count: docs.len() as u64,
        has_attention,
        has_token_ids,
        docs,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|source| Error::Json {
        path: manifest_path.clone(),
        source,
    })?;
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

struct Sink {
    path: PathBuf,
    out: BufWriter<File>,
    offset: u64,
}

impl Sink {
    fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
            offset: 0,
        })
    }

    fn put(&mut self, words: impl Iterator<Item = [u8; 4]>) -> Result<()> {
        for w in words {
            self.out.write_all(&w).map_err(|e| Error::io(&self.path, e))?;
            self.offset += 4;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn read_manifest(dir: &Path) -> Result<CorpusManifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json { path, source })
}

/// Read handle over a corpus directory. Records are fetched lazily with
/// positional reads, so a handle can be shared across threads.
#[derive(Debug)]
pub struct Corpus {
    dir: PathBuf,
    manifest: CorpusManifest,
    index: HashMap<String, usize>,
    embeddings: File,
    tokens: Option<File>,
    attention: Option<File>,
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    Corpus::open(path)
}

impl Corpus {
    pub fn open(path: &Path) -> Result<Self> {
        let manifest = read_manifest(path)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(manifest.format_version));
        }
        if let Some(v) = manifest.violations().into_iter().next() {
            return Err(Error::Manifest {
                path: path.join(MANIFEST_FILE),
                message: v,
            });
        }
        let (emb_bytes, word_bytes) = manifest.expected_sizes();
        let open = |name: &str, expected: u64| -> Result<File> {
            let p = path.join(name);
            let f = File::open(&p).map_err(|e| Error::io(&p, e))?;
            let actual = f.metadata().map_err(|e| Error::io(&p, e))?.len();
            if actual != expected {
                return Err(Error::SizeMismatch {
                    file: p,
                    expected,
                    actual,
                });
            }
            Ok(f)
        };
        let embeddings = open(EMBEDDINGS_FILE, emb_bytes)?;
        let tokens = manifest
            .has_token_ids
            .then(|| open(TOKENS_FILE, word_bytes))
            .transpose()?;
        let attention = manifest
            .has_attention
            .then(|| open(ATTENTION_FILE, word_bytes))
            .transpose()?;
        let index = manifest
            .docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        Ok(Self {
            dir: path.to_path_buf(),
            manifest,
            index,
            embeddings,
            tokens,
            attention,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &CorpusManifest {
        &self.manifest
    }

    pub fn dim(&self) -> usize {
        self.manifest.dim as usize
    }

    pub fn len(&self) -> usize {
        self.manifest.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.docs.is_empty()
    }

    pub fn has_token_ids(&self) -> bool {
        self.manifest.has_token_ids
    }

    pub fn has_attention(&self) -> bool {
        self.manifest.has_attention
    }

    pub fn doc_ids(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.manifest.docs.iter().map(|d| d.id.as_str())
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.index.get(doc_id).copied()
    }

    pub fn get(&self, doc_id: &str) -> Result<DocumentRecord> {
        let i = self
            .position(doc_id)
            .ok_or_else(|| Error::UnknownId(doc_id.to_string()))?;
        self.get_at(i)
    }

    /// The `i`-th record in manifest order.
    pub fn get_at(&self, i: usize) -> Result<DocumentRecord> {
        let entry = self.manifest.docs.get(i).ok_or_else(|| {
            Error::InvalidArgument(format!("document index {i} out of range ({})", self.len()))
        })?;
        let rows = entry.length as usize;
        let dim = self.dim();
        let values = self.read_words(&self.embeddings, EMBEDDINGS_FILE, entry.emb_offset, rows * dim)?;
        let embeddings = TokenMatrix::new(rows, dim, values.into_iter().map(f32::from_le_bytes).collect())?;
        let token_ids = match (&self.tokens, entry.tok_offset) {
            (Some(f), Some(off)) => Some(
                self.read_words(f, TOKENS_FILE, off, rows)?
                    .into_iter()
                    .map(u32::from_le_bytes)
                    .collect(),
            ),
            _ => None,
        };
        let attention = match (&self.attention, entry.att_offset) {
            (Some(f), Some(off)) => Some(
                self.read_words(f, ATTENTION_FILE, off, rows)?
                    .into_iter()
                    .map(f32::from_le_bytes)
                    .collect(),
            ),
            _ => None,
        };
        Ok(DocumentRecord {
            doc_id: entry.id.clone(),
            embeddings,
            token_ids,
            attention,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<DocumentRecord>> + '_ {
        (0..self.len()).map(move |i| self.get_at(i))
    }

    /// Reads every record into memory, in manifest order.
    pub fn load_all(&self) -> Result<Vec<DocumentRecord>> {
        self.iter().collect()
    }

    fn read_words(&self, file: &File, name: &str, offset: u64, count: usize) -> Result<Vec<[u8; 4]>> {
        let mut buf = vec![0u8; count * 4];
        read_exact_at(file, &mut buf, offset).map_err(|e| Error::io(self.dir.join(name), e))?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect())
    }
}

#[cfg(unix)]
fn read_exact_at(file: &File, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
    std::os::unix::fs::FileExt::read_exact_at(file, buf, offset)
}

#[cfg(windows)]
fn read_exact_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> std::io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        match file.seek_read(buf, offset)? {
            0 => return Err(std::io::ErrorKind::UnexpectedEof.into()),
            n => {
                buf = &mut buf[n..];
                offset += n as u64;
            }
        }
    }
    Ok(())
}

/// A single invariant violation found by [`validate_corpus`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    pub message: String,
}

impl Violation {
    fn global(message: impl Into<String>) -> Self {
        Self {
            doc_id: None,
            row: None,
            column: None,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(id) = &self.doc_id {
            write!(f, "doc {id:?}")?;
            if let Some(r) = self.row {
                write!(f, " row {r}")?;
            }
            if let Some(c) = self.column {
                write!(f, " column {c}")?;
            }
            write!(f, ": ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks all manifest and record invariants. Problems are collected into
/// the report rather than returned as errors.
pub fn validate_corpus(path: &Path) -> ValidationReport {
    let mut report = ValidationReport::default();
    let manifest = match read_manifest(path) {
        Ok(m) => m,
        Err(e) => {
            report.violations.push(Violation::global(e.to_string()));
            return report;
        }
    };
    let structural = manifest.violations();
    let ok = structural.is_empty();
    report
        .violations
        .extend(structural.into_iter().map(Violation::global));

    let (emb_bytes, word_bytes) = manifest.expected_sizes();
    let mut sizes_ok = true;
    let files = [
        (EMBEDDINGS_FILE, true, emb_bytes),
        (TOKENS_FILE, manifest.has_token_ids, word_bytes),
        (ATTENTION_FILE, manifest.has_attention, word_bytes),
    ];
    for (name, required, expected) in files {
        if !required {
            continue;
        }
        match fs::metadata(path.join(name)) {
            Ok(m) if m.len() != expected => {
                sizes_ok = false;
                report.violations.push(Violation::global(format!(
                    "{name}: size {} does not match manifest ({expected} bytes)",
                    m.len()
                )));
            }
            Ok(_) => {}
            Err(e) => {
                sizes_ok = false;
                report
                    .violations
                    .push(Violation::global(format!("{name}: {e}")));
            }
        }
    }
    if !(ok && sizes_ok) {
        return report;
    }

    let corpus = match Corpus::open(path) {
        Ok(c) => c,
        Err(e) => {
            report.violations.push(Violation::global(e.to_string()));
            return report;
        }
    };
    for rec in corpus.iter() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.violations.push(Violation::global(e.to_string()));
                continue;
            }
        };
        let dim = rec.embeddings.dim();
        for (i, v) in rec.embeddings.values().iter().enumerate() {
            if !v.is_finite() {
                report.violations.push(Violation {
                    doc_id: Some(rec.doc_id.clone()),
                    row: Some(i / dim),
                    column: Some(i % dim),
                    message: format!("non-finite embedding value {v}"),
                });
            }
        }
        for (row, a) in rec.attention.iter().flatten().enumerate() {
            let message = if a.is_nan() || a.is_infinite() {
                format!("non-finite attention {a}")
            } else if *a < 0.0 {
                "negative attention".to_string()
            } else {
                continue;
            };
            report.violations.push(Violation {
                doc_id: Some(rec.doc_id.clone()),
                row: Some(row),
                column: None,
                message,
            });
        }
    }
    report
}
