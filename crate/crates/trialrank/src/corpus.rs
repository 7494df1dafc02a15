//! Parsing of clinical-trial registry records and derivation of the five
//! indexable field views.
//!
//! Input is either a directory tree of registry XML exports (one record per
//! file) or a line-delimited JSON archive (one record per line). Output is
//! an intermediate corpus file, one JSON record per line, holding `doc_id`
//! plus the five views `i_comb`, `i_comb_star`, `i_in`, `i_ex`, `i_main`.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use log::warn;
use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("record has no registry identifier")]
    MissingId,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// One parsed clinical-trial record. Any section may be empty; all text is
/// markup-stripped with whitespace collapsed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrialDoc {
    pub doc_id: String,
    pub title: String,
    pub summary: String,
    pub description: String,
    pub condition: String,
    pub eligibility: String,
}

/// Result of partitioning an eligibility section at its inclusion and
/// exclusion markers. When a marker is missing, that side falls back to the
/// full eligibility text and its flag stays false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EligibilitySplit {
    pub inclusion: String,
    pub exclusion: String,
    pub inclusion_found: bool,
    pub exclusion_found: bool,
}

/// The five derived text views of a trial.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldViews {
    pub i_comb: String,
    pub i_comb_star: String,
    pub i_in: String,
    pub i_ex: String,
    pub i_main: String,
}

/// Selector for one of the five views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldView {
    IComb,
    ICombStar,
    IIn,
    IEx,
    IMain,
}

impl FieldView {
    pub const ALL: [FieldView; 5] = [
        FieldView::IComb,
        FieldView::ICombStar,
        FieldView::IIn,
        FieldView::IEx,
        FieldView::IMain,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FieldView::IComb => "i_comb",
            FieldView::ICombStar => "i_comb_star",
            FieldView::IIn => "i_in",
            FieldView::IEx => "i_ex",
            FieldView::IMain => "i_main",
        }
    }
}

impl fmt::Display for FieldView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldView {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "i_comb" => Ok(FieldView::IComb),
            "i_comb_star" => Ok(FieldView::ICombStar),
            "i_in" => Ok(FieldView::IIn),
            "i_ex" => Ok(FieldView::IEx),
            "i_main" => Ok(FieldView::IMain),
            other => Err(format!("unknown view {other:?}")),
        }
    }
}

impl FieldViews {
    pub fn view(&self, view: FieldView) -> &str {
        match view {
            FieldView::IComb => &self.i_comb,
            FieldView::ICombStar => &self.i_comb_star,
            FieldView::IIn => &self.i_in,
            FieldView::IEx => &self.i_ex,
            FieldView::IMain => &self.i_main,
        }
    }
}

/// Marker patterns delimiting the inclusion and exclusion criteria inside an
/// eligibility section. The defaults cover the dominant registry formatting
/// (optional leading bullets/numbers, optional trailing colon or dash, and
/// the "key inclusion criteria" variant); both sides are extensible.
#[derive(Debug, Clone)]
pub struct EligibilityMarkers {
    pub inclusion: Regex,
    pub exclusion: Regex,
}

impl EligibilityMarkers {
    pub fn from_patterns(inclusion: &str, exclusion: &str) -> Result<Self, regex::Error> {
        Ok(Self {
            inclusion: Regex::new(inclusion)?,
            exclusion: Regex::new(exclusion)?,
        })
    }
}

impl Default for EligibilityMarkers {
    fn default() -> Self {
        // Leading decoration is limited to a bullet run or a short list
        // number ("2." / "3)"), so content digits before a marker are not
        // swallowed into it.
        Self::from_patterns(
            r"(?i)(?:[-*•#]+\s*|\b\d{1,2}\s*[.)]\s*)?(?:key\s+)?\binclusion\s+criteria\s*[:\-–—]?",
            r"(?i)(?:[-*•#]+\s*|\b\d{1,2}\s*[.)]\s*)?(?:key\s+)?\bexclusion\s+criteria\s*[:\-–—]?",
        )
        .expect("default marker patterns compile")
    }
}

fn default_markers() -> &'static EligibilityMarkers {
    static MARKERS: OnceLock<EligibilityMarkers> = OnceLock::new();
    MARKERS.get_or_init(EligibilityMarkers::default)
}

/// Partitions an eligibility section using the default marker set.
pub fn split_eligibility(eligibility: &str) -> EligibilitySplit {
    split_eligibility_with(default_markers(), eligibility)
}

/// Partitions an eligibility section. Each side's segment runs from its
/// marker to the other marker (when that one occurs later) or to the end of
/// the text. A side whose marker is absent receives the full eligibility
/// text with its flag false.
pub fn split_eligibility_with(markers: &EligibilityMarkers, text: &str) -> EligibilitySplit {
    let incl = markers.inclusion.find(text);
    let excl = markers.exclusion.find(text);
    let full = || text.trim().to_string();
    let segment = |from: usize, until: Option<usize>| {
        let end = until.unwrap_or(text.len());
        text[from..end].trim().to_string()
    };
    match (incl, excl) {
        (None, None) => EligibilitySplit {
            inclusion: full(),
            exclusion: full(),
            inclusion_found: false,
            exclusion_found: false,
        },
        (Some(i), None) => EligibilitySplit {
            inclusion: segment(i.end(), None),
            exclusion: full(),
            inclusion_found: true,
            exclusion_found: false,
        },
        (None, Some(e)) => EligibilitySplit {
            inclusion: full(),
            exclusion: segment(e.end(), None),
            inclusion_found: false,
            exclusion_found: true,
        },
        (Some(i), Some(e)) => {
            let (inclusion, exclusion) = if i.start() <= e.start() {
                (segment(i.end(), Some(e.start())), segment(e.end(), None))
            } else {
                (segment(i.end(), None), segment(e.end(), Some(i.start())))
            };
            EligibilitySplit {
                inclusion,
                exclusion,
                inclusion_found: true,
                exclusion_found: true,
            }
        }
    }
}

fn join_nonempty(parts: &[&str]) -> String {
    parts
        .iter()
        .copied()
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Derives the five views from a parsed trial using the default markers.
pub fn build_field_views(doc: &TrialDoc) -> FieldViews {
    build_field_views_with(default_markers(), doc)
}

/// i_main is title + description + condition + summary in that fixed order;
/// i_comb appends the eligibility section; i_comb_star is title + summary
/// plus the inclusion criteria only when their marker was actually found.
pub fn build_field_views_with(markers: &EligibilityMarkers, doc: &TrialDoc) -> FieldViews {
    let split = split_eligibility_with(markers, &doc.eligibility);
    let i_main = join_nonempty(&[&doc.title, &doc.description, &doc.condition, &doc.summary]);
    let i_comb = join_nonempty(&[&i_main, &doc.eligibility]);
    let star_inclusion = if split.inclusion_found {
        split.inclusion.as_str()
    } else {
        ""
    };
    let i_comb_star = join_nonempty(&[&doc.title, &doc.summary, star_inclusion]);
    FieldViews {
        i_comb,
        i_comb_star,
        i_in: split.inclusion,
        i_ex: split.exclusion,
        i_main,
    }
}

fn tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"</?[A-Za-z][^>]*>").expect("tag pattern compiles"))
}

/// Strips residual markup tags and collapses whitespace runs.
fn clean_text(raw: &str) -> String {
    let without_tags = tag_re().replace_all(raw, " ");
    without_tags.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Recognized sections, addressed by their path below the record root.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    DocId,
    Title,
    OfficialTitle,
    Summary,
    Description,
    Condition,
    Eligibility,
}

fn section_for(path: &[String]) -> Option<Section> {
    // path[0] is the record root element; match on the relative path.
    if path.len() < 2 {
        return None;
    }
    let rel: Vec<&str> = path[1..].iter().map(String::as_str).collect();
    match rel.as_slice() {
        ["id_info", "nct_id"] => Some(Section::DocId),
        ["brief_title"] => Some(Section::Title),
        ["official_title"] => Some(Section::OfficialTitle),
        ["brief_summary", "textblock"] => Some(Section::Summary),
        ["detailed_description", "textblock"] => Some(Section::Description),
        ["condition"] => Some(Section::Condition),
        ["eligibility", "criteria", "textblock"] => Some(Section::Eligibility),
        _ => None,
    }
}

/// Parses one registry XML export record.
///
/// Recognized sections: id_info/nct_id, brief_title (official_title as
/// fallback), brief_summary, detailed_description, condition (repeated
/// elements are concatenated), eligibility/criteria. Everything else is
/// ignored. Entity and character references are resolved; residual markup
/// inside text blocks is stripped.
pub fn parse_trial_xml(raw: &str) -> Result<TrialDoc, CorpusError> {
    let mut reader = Reader::from_str(raw);
    let mut path: Vec<String> = Vec::new();
    let mut buffers = [
        String::new(), // DocId
        String::new(), // Title
        String::new(), // OfficialTitle
        String::new(), // Summary
        String::new(), // Description
        String::new(), // Condition
        String::new(), // Eligibility
    ];
    let malformed = |e: &dyn std::fmt::Display| CorpusError::MalformedRecord(e.to_string());

    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => {
                path.push(String::from_utf8_lossy(e.name().as_ref()).to_string());
                if let Some(section) = section_for(&path) {
                    // separate repeated elements (e.g. two <condition>s)
                    let buf = &mut buffers[section as usize];
                    if !buf.is_empty() {
                        buf.push(' ');
                    }
                }
            }
            Ok(Event::End(_)) => {
                path.pop();
            }
            Ok(Event::Text(t)) => {
                if let Some(section) = section_for(&path) {
                    let text = t.decode().map_err(|e| malformed(&e))?;
                    buffers[section as usize].push_str(&text);
                }
            }
            Ok(Event::CData(t)) => {
                if let Some(section) = section_for(&path) {
                    let text = t.decode().map_err(|e| malformed(&e))?;
                    buffers[section as usize].push_str(&text);
                }
            }
            Ok(Event::GeneralRef(r)) => {
                if let Some(section) = section_for(&path) {
                    let buf = &mut buffers[section as usize];
                    if let Some(ch) = r.resolve_char_ref().map_err(|e| malformed(&e))? {
                        buf.push(ch);
                    } else {
                        let name = r.decode().map_err(|e| malformed(&e))?;
                        match name.as_ref() {
                            "lt" => buf.push('<'),
                            "gt" => buf.push('>'),
                            "amp" => buf.push('&'),
                            "apos" => buf.push('\''),
                            "quot" => buf.push('"'),
                            other => {
                                buf.push('&');
                                buf.push_str(other);
                                buf.push(';');
                            }
                        }
                    }
                }
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => return Err(malformed(&e)),
        }
    }

    let doc_id = clean_text(&buffers[Section::DocId as usize]);
    if doc_id.is_empty() {
        return Err(CorpusError::MissingId);
    }
    let title = if buffers[Section::Title as usize].trim().is_empty() {
        &buffers[Section::OfficialTitle as usize]
    } else {
        &buffers[Section::Title as usize]
    };
    Ok(TrialDoc {
        doc_id,
        title: clean_text(title),
        summary: clean_text(&buffers[Section::Summary as usize]),
        description: clean_text(&buffers[Section::Description as usize]),
        condition: clean_text(&buffers[Section::Condition as usize]),
        eligibility: clean_text(&buffers[Section::Eligibility as usize]),
    })
}

#[derive(Deserialize)]
struct RawJsonRecord {
    #[serde(default, alias = "nct_id")]
    doc_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    summary: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    condition: String,
    #[serde(default)]
    eligibility: String,
}

/// Parses one line of a line-delimited JSON archive.
pub fn parse_trial_json(line: &str) -> Result<TrialDoc, CorpusError> {
    let raw: RawJsonRecord =
        serde_json::from_str(line).map_err(|e| CorpusError::MalformedRecord(e.to_string()))?;
    let doc_id = clean_text(&raw.doc_id);
    if doc_id.is_empty() {
        return Err(CorpusError::MissingId);
    }
    Ok(TrialDoc {
        doc_id,
        title: clean_text(&raw.title),
        summary: clean_text(&raw.summary),
        description: clean_text(&raw.description),
        condition: clean_text(&raw.condition),
        eligibility: clean_text(&raw.eligibility),
    })
}

/// One line of the intermediate corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    #[serde(flatten)]
    pub views: FieldViews,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct IngestStats {
    pub written: usize,
    pub skipped: usize,
    pub replaced_duplicates: usize,
}

/// Parses every record under `input` (a directory of XML files or a `.jsonl`
/// archive), derives views, and writes the corpus file. Unparseable records
/// are skipped and logged; duplicate doc_ids keep the last occurrence.
pub fn ingest_corpus(
    input: &Path,
    markers: &EligibilityMarkers,
    output: &Path,
) -> Result<IngestStats, CorpusError> {
    let mut stats = IngestStats::default();
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, CorpusRecord> = HashMap::new();

    let mut take = |doc: Result<TrialDoc, CorpusError>, source: &str| match doc {
        Ok(doc) => {
            let record = CorpusRecord {
                doc_id: doc.doc_id.clone(),
                views: build_field_views_with(markers, &doc),
            };
            if by_id.insert(doc.doc_id.clone(), record).is_some() {
                warn!("duplicate doc_id {} in {source}; keeping the later record", doc.doc_id);
                stats.replaced_duplicates += 1;
            } else {
                order.push(doc.doc_id);
            }
        }
        Err(e) => {
            warn!("skipping record in {source}: {e}");
            stats.skipped += 1;
        }
    };

    if input.is_dir() {
        let walker = walkdir::WalkDir::new(input)
            .sort_by_file_name()
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file())
            .filter(|e| {
                e.path()
                    .extension()
                    .is_some_and(|ext| ext.eq_ignore_ascii_case("xml"))
            });
        for entry in walker {
            let raw = std::fs::read_to_string(entry.path())?;
            take(parse_trial_xml(&raw), &entry.path().display().to_string());
        }
    } else {
        let reader = BufReader::new(File::open(input)?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            take(parse_trial_json(&line), &format!("{}:{}", input.display(), lineno + 1));
        }
    }

    let mut writer = BufWriter::new(File::create(output)?);
    for doc_id in &order {
        let record = &by_id[doc_id];
        serde_json::to_writer(&mut writer, record)
            .map_err(|e| CorpusError::MalformedRecord(e.to_string()))?;
        writer.write_all(b"\n")?;
        stats.written += 1;
    }
    writer.flush()?;
    Ok(stats)
}

/// Streams records back out of a corpus file.
pub fn read_corpus(
    path: &Path,
) -> Result<impl Iterator<Item = Result<CorpusRecord, CorpusError>>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    Ok(reader.lines().enumerate().filter_map(|(lineno, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(CorpusError::Io(e))),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(serde_json::from_str(&line).map_err(|e| {
            CorpusError::MalformedRecord(format!("line {}: {e}", lineno + 1))
        }))
    }))
}
