//! Immutable inverted indexes over a single field view, with a versioned
//! single-file binary format for persistence.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::corpus::{self, FieldView};
use crate::textproc::TextPipeline;

const MAGIC: &[u8; 4] = b"TRIX";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("corpus unreadable: {0}")]
    CorpusUnreadable(String),
    #[error("unknown view: {0}")]
    UnknownView(String),
    #[error("io failure: {0}")]
    IoFailure(#[from] io::Error),
    #[error("format version mismatch or corrupt index file: {0}")]
    FormatVersionMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocEntry {
    pub doc_id: String,
    /// Token length of this document's view after the text pipeline.
    pub len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index over one field view. Immutable after build; safe to share
/// across threads for concurrent scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PostingsIndex {
    field_name: String,
    doc_table: Vec<DocEntry>,
    terms: BTreeMap<String, Vec<Posting>>,
    total_tokens: u64,
}

/// JSON stats preamble embedded in the index file header.
#[derive(Serialize, Deserialize)]
struct IndexStats {
    field_name: String,
    num_docs: u64,
    num_terms: u64,
    total_tokens: u64,
    avg_doc_len: f64,
}

impl PostingsIndex {
    pub fn field_name(&self) -> &str {
        &self.field_name
    }

    pub fn num_docs(&self) -> usize {
        self.doc_table.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.doc_table.is_empty() {
            0.0
        } else {
            self.total_tokens as f64 / self.doc_table.len() as f64
        }
    }

    pub fn doc(&self, ordinal: u32) -> Option<&DocEntry> {
        self.doc_table.get(ordinal as usize)
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.doc_table
    }

    /// Document frequency: the number of postings for the term.
    pub fn df(&self, term: &str) -> usize {
        self.terms.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.terms.get(term).map(Vec::as_slice)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.terms.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }
}

/// Incremental index construction. Documents receive ordinals in the
/// order they are added; a document with an empty view still occupies a
/// doc_table slot with length 0.
pub struct IndexBuilder<'a> {
    field_name: String,
    pipeline: &'a TextPipeline,
    doc_table: Vec<DocEntry>,
    terms: BTreeMap<String, Vec<Posting>>,
    total_tokens: u64,
}

impl<'a> IndexBuilder<'a> {
    pub fn new(field_name: &str, pipeline: &'a TextPipeline) -> Self {
        Self {
            field_name: field_name.to_string(),
            pipeline,
            doc_table: Vec::new(),
            terms: BTreeMap::new(),
            total_tokens: 0,
        }
    }

    pub fn add(&mut self, doc_id: &str, view_text: &str) {
        let ordinal = self.doc_table.len() as u32;
        let tokens = self.pipeline.process(view_text);
        let len = tokens.len() as u32;
        self.total_tokens += u64::from(len);

        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokens {
            *tf.entry(token).or_insert(0) += 1;
        }
        for (term, count) in tf {
            self.terms.entry(term).or_default().push(Posting {
                doc: ordinal,
                tf: count,
            });
        }
        self.doc_table.push(DocEntry {
            doc_id: doc_id.to_string(),
            len,
        });
    }

    pub fn finish(self) -> PostingsIndex {
        PostingsIndex {
            field_name: self.field_name,
            doc_table: self.doc_table,
            terms: self.terms,
            total_tokens: self.total_tokens,
        }
    }
}

/// Builds an index over pipeline-processed tokens of (doc_id, view text)
/// pairs.
pub fn build_index_from_texts<I, S>(
    field_name: &str,
    texts: I,
    pipeline: &TextPipeline,
) -> PostingsIndex
where
    I: IntoIterator<Item = (S, S)>,
    S: AsRef<str>,
{
    let mut builder = IndexBuilder::new(field_name, pipeline);
    for (doc_id, text) in texts {
        builder.add(doc_id.as_ref(), text.as_ref());
    }
    builder.finish()
}

/// Builds an index for one view by streaming a corpus file produced by
/// [`corpus::ingest_corpus`].
pub fn build_index(
    corpus_path: &Path,
    view: FieldView,
    pipeline: &TextPipeline,
) -> Result<PostingsIndex, IndexError> {
    let records = corpus::read_corpus(corpus_path)
        .map_err(|e| IndexError::CorpusUnreadable(e.to_string()))?;
    let mut builder = IndexBuilder::new(view.as_str(), pipeline);
    for record in records {
        let record = record.map_err(|e| IndexError::CorpusUnreadable(e.to_string()))?;
        builder.add(&record.doc_id, record.views.view(view));
    }
    Ok(builder.finish())
}

/// String-driven variant of [`build_index`] for callers resolving the view
/// at runtime.
pub fn build_index_by_name(
    corpus_path: &Path,
    view_name: &str,
    pipeline: &TextPipeline,
) -> Result<PostingsIndex, IndexError> {
    let view = view_name
        .parse::<FieldView>()
        .map_err(IndexError::UnknownView)?;
    build_index(corpus_path, view, pipeline)
}

/// Conventional on-disk location for one view of a collection:
/// `<prefix>.<view>.idx`.
pub fn index_path(prefix: &Path, view: FieldView) -> std::path::PathBuf {
    let mut name = prefix.file_name().map_or_else(String::new, |n| {
        n.to_string_lossy().into_owned()
    });
    name.push('.');
    name.push_str(view.as_str());
    name.push_str(".idx");
    prefix.with_file_name(name)
}

/// Writes the index: magic, format version, JSON stats preamble, then
/// little-endian binary doc table and postings (terms in sorted order).
pub fn save_index(index: &PostingsIndex, path: &Path) -> Result<(), IndexError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;

    let stats = IndexStats {
        field_name: index.field_name.clone(),
        num_docs: index.doc_table.len() as u64,
        num_terms: index.terms.len() as u64,
        total_tokens: index.total_tokens,
        avg_doc_len: index.avg_doc_len(),
    };
    let preamble = serde_json::to_vec(&stats)
        .map_err(|e| IndexError::FormatVersionMismatch(e.to_string()))?;
    w.write_u32::<LittleEndian>(preamble.len() as u32)?;
    w.write_all(&preamble)?;

    for entry in &index.doc_table {
        write_str(&mut w, &entry.doc_id)?;
        w.write_u32::<LittleEndian>(entry.len)?;
    }
    for (term, postings) in &index.terms {
        write_str(&mut w, term)?;
        w.write_u32::<LittleEndian>(postings.len() as u32)?;
        for p in postings {
            w.write_u32::<LittleEndian>(p.doc)?;
            w.write_u32::<LittleEndian>(p.tf)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads an index written by [`save_index`] of the same format version.
pub fn load_index(path: &Path) -> Result<PostingsIndex, IndexError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(IndexError::FormatVersionMismatch(format!(
            "bad magic {magic:?}"
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::FormatVersionMismatch(format!(
            "file version {version}, supported {FORMAT_VERSION}"
        )));
    }
    let preamble_len = r.read_u32::<LittleEndian>()? as usize;
    let mut preamble = vec![0u8; preamble_len];
    r.read_exact(&mut preamble)?;
    let stats: IndexStats = serde_json::from_slice(&preamble)
        .map_err(|e| IndexError::FormatVersionMismatch(format!("bad stats preamble: {e}")))?;

    let num_docs = stats.num_docs as usize;
    let mut doc_table = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        let doc_id = read_str(&mut r)?;
        let len = r.read_u32::<LittleEndian>()?;
        doc_table.push(DocEntry { doc_id, len });
    }

    let mut terms = BTreeMap::new();
    for _ in 0..stats.num_terms {
        let term = read_str(&mut r)?;
        let df = r.read_u32::<LittleEndian>()? as usize;
        let mut postings = Vec::with_capacity(df);
        let mut prev: Option<u32> = None;
        for _ in 0..df {
            let doc = r.read_u32::<LittleEndian>()?;
            let tf = r.read_u32::<LittleEndian>()?;
            if doc as usize >= num_docs || prev.is_some_and(|p| p >= doc) {
                return Err(IndexError::FormatVersionMismatch(format!(
                    "corrupt postings for term {term:?}"
                )));
            }
            prev = Some(doc);
            postings.push(Posting { doc, tf });
        }
        terms.insert(term, postings);
    }

    Ok(PostingsIndex {
        field_name: stats.field_name,
        doc_table,
        terms,
        total_tokens: stats.total_tokens,
    })
}

fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str(r: &mut impl Read) -> Result<String, IndexError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|e| IndexError::FormatVersionMismatch(format!("non-utf8 string: {e}")))
}
