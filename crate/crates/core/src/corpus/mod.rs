//! Bibliographic ingestion: RIS and CSV parsing, historical label detection,
//! dataset fingerprinting and keyword search for prior selection.

mod csv;
mod labels;
mod ris;
mod search;
mod write;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

pub use self::csv::parse_csv;
pub use self::labels::{detect_labels, LABEL_COLUMN_ALIASES};
pub use self::ris::{parse_ris, parse_ris_with, RisOptions, RIS_IRRELEVANT, RIS_RELEVANT};
pub use self::search::search_records;
pub use self::write::{write_csv, write_ris};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    NotUtf8 { offset: usize },
    #[error("malformed RIS at line {line}: {reason}")]
    MalformedRis { line: usize, reason: String },
    #[error("CSV syntax error at line {line}: {reason}")]
    CsvSyntax { line: usize, reason: String },
    #[error("CSV header has neither a title nor an abstract column")]
    BadHeader,
    #[error("more than one label column candidate: {0:?}")]
    AmbiguousLabels(Vec<String>),
    #[error("unrecognised label value {value:?} in row {row}")]
    BadLabelValue { row: usize, value: String },
    #[error("no records found")]
    EmptyDataset,
    #[error("{0} files are not supported; export the sheet to CSV (UTF-8, comma separated) first")]
    UnsupportedSpreadsheet(String),
    #[error("search query is empty")]
    EmptyQuery,
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Binary screening decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Irrelevant,
    Relevant,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Irrelevant => 0,
            Label::Relevant => 1,
        }
    }

    pub fn is_relevant(self) -> bool {
        self == Label::Relevant
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        label.as_u8()
    }
}

impl From<bool> for Label {
    fn from(relevant: bool) -> Self {
        if relevant {
            Label::Relevant
        } else {
            Label::Irrelevant
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Label::Irrelevant),
            1 => Ok(Label::Relevant),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub row_id: usize,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub authors: Option<String>,
    pub keywords: Option<String>,
    pub doi: Option<String>,
    pub url: Option<String>,
    pub label: Option<Label>,
}

impl Record {
    /// Title and abstract joined by a single space.
    pub fn text(&self) -> String {
        format!("{} {}", self.title, self.abstract_text)
    }

    fn has_text(&self) -> bool {
        !self.title.trim().is_empty() || !self.abstract_text.trim().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Ris,
    Csv,
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFormat::Ris => "ris",
            SourceFormat::Csv => "csv",
        })
    }
}

/// An input row that was dropped during ingest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// Zero-based position of the entry in the input (RIS entry or CSV data row).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub rejected: Vec<Rejection>,
    /// RIS tags that were seen but not mapped, with occurrence counts.
    pub unknown_tags: BTreeMap<String, usize>,
}

/// An immutable, fingerprinted set of records with dense row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    source_format: SourceFormat,
    fingerprint: String,
    report: IngestReport,
}

impl Dataset {
    /// Builds a dataset, dropping records with neither title nor abstract and
    /// renumbering the rest densely. The position of each input record is used
    /// as its row in rejection diagnostics.
    pub fn from_records(
        records: Vec<Record>,
        source_format: SourceFormat,
        mut report: IngestReport,
    ) -> Result<Self, CorpusError> {
        let mut kept = Vec::with_capacity(records.len());
        for (input_row, mut record) in records.into_iter().enumerate() {
            if !record.has_text() {
                report.rejected.push(Rejection {
                    row: input_row,
                    reason: "record has neither title nor abstract".into(),
                });
                continue;
            }
            record.row_id = kept.len();
            kept.push(record);
        }
        if kept.is_empty() {
            return Err(CorpusError::EmptyDataset);
        }
        report.rejected.sort_by_key(|r| r.row);
        let fingerprint = fingerprint(&kept);
        Ok(Dataset {
            records: kept,
            source_format,
            fingerprint,
            report,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, row_id: usize) -> Option<&Record> {
        self.records.get(row_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn source_format(&self) -> SourceFormat {
        self.source_format
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn labels(&self) -> Vec<Option<Label>> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.records.iter().all(|r| r.label.is_some())
    }

    pub fn n_relevant(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.label == Some(Label::Relevant))
            .count()
    }
}

/// SHA-256 (lowercase hex) over the canonical serialization
/// `title US abstract US authors US keywords US doi LF` per record, NFC-normalized.
pub fn fingerprint(records: &[Record]) -> String {
    let mut hasher = Sha256::new();
    for record in records {
        let fields = [
            record.title.as_str(),
            record.abstract_text.as_str(),
            record.authors.as_deref().unwrap_or(""),
            record.keywords.as_deref().unwrap_or(""),
            record.doi.as_deref().unwrap_or(""),
        ];
        for (i, field) in fields.iter().enumerate() {
            if i > 0 {
                hasher.update([0x1f]);
            }
            let normalized: String = field.nfc().collect();
            hasher.update(normalized.as_bytes());
        }
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Decodes UTF-8, stripping a leading byte-order mark.
pub(crate) fn decode_utf8(bytes: &[u8]) -> Result<&str, CorpusError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    std::str::from_utf8(bytes).map_err(|e| CorpusError::NotUtf8 {
        offset: e.valid_up_to(),
    })
}

/// Guesses the format of an uploaded payload. Spreadsheet containers are rejected.
pub fn sniff_format(bytes: &[u8]) -> Result<SourceFormat, CorpusError> {
    if bytes.starts_with(b"PK\x03\x04") {
        return Err(CorpusError::UnsupportedSpreadsheet("xlsx".into()));
    }
    if bytes.starts_with(&[0xD0, 0xCF, 0x11, 0xE0]) {
        return Err(CorpusError::UnsupportedSpreadsheet("xls".into()));
    }
    let text = decode_utf8(bytes)?;
    let first = text.lines().map(str::trim).find(|l| !l.is_empty());
    Ok(match first {
        Some(line) if line.starts_with("TY  -") => SourceFormat::Ris,
        _ => SourceFormat::Csv,
    })
}

pub fn parse_bytes(bytes: &[u8], format: Option<SourceFormat>) -> Result<Dataset, CorpusError> {
    let format = match format {
        Some(f) => f,
        None => sniff_format(bytes)?,
    };
    match format {
        SourceFormat::Ris => parse_ris(bytes),
        SourceFormat::Csv => parse_csv(bytes),
    }
}

/// Format implied by a file extension, if any.
pub fn format_for_path(path: &Path) -> Result<Option<SourceFormat>, CorpusError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("ris") | Some("txt") => Ok(Some(SourceFormat::Ris)),
        Some("csv") => Ok(Some(SourceFormat::Csv)),
        Some(sheet @ ("xlsx" | "xls")) => Err(CorpusError::UnsupportedSpreadsheet(sheet.into())),
        _ => Ok(None),
    }
}

pub fn load_path(path: &Path) -> Result<Dataset, CorpusError> {
    let format = format_for_path(path)?;
    let bytes = std::fs::read(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_bytes(&bytes, format)
}
