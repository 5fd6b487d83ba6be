use super::{decode_utf8, CorpusError, Dataset, IngestReport, Label, Record, SourceFormat};

/// `N1` value marking a relevant record.
pub const RIS_RELEVANT: &str = "ASReview_relevant";
/// `N1` value marking an irrelevant record.
pub const RIS_IRRELEVANT: &str = "ASReview_irrelevant";

#[derive(Debug, Clone)]
pub struct RisOptions {
    /// Tag that carries the label values.
    pub label_tag: String,
}

impl Default for RisOptions {
    fn default() -> Self {
        RisOptions {
            label_tag: "N1".into(),
        }
    }
}

pub fn parse_ris(bytes: &[u8]) -> Result<Dataset, CorpusError> {
    parse_ris_with(bytes, &RisOptions::default())
}

enum Line<'a> {
    Blank,
    Tag(&'a str, &'a str),
    Text(&'a str),
}

fn classify_line(line: &str, line_no: usize) -> Result<Line<'_>, CorpusError> {
    let line = line.trim_end();
    if line.trim().is_empty() {
        return Ok(Line::Blank);
    }
    let b = line.as_bytes();
    let looks_like_tag = b.len() >= 3
        && b[0].is_ascii_uppercase()
        && (b[1].is_ascii_uppercase() || b[1].is_ascii_digit())
        && b[2] == b' ';
    if !looks_like_tag {
        return Ok(Line::Text(line));
    }
    let rest = &line[2..];
    if let Some(value) = rest.strip_prefix("  -") {
        if value.is_empty() {
            return Ok(Line::Tag(&line[..2], ""));
        }
        if let Some(value) = value.strip_prefix(' ') {
            return Ok(Line::Tag(&line[..2], value.trim()));
        }
    }
    // Two-letter tag followed by spaces and a hyphen, but not `XX  - `.
    if rest.trim_start_matches(' ').starts_with('-') {
        return Err(CorpusError::MalformedRis {
            line: line_no,
            reason: format!("tag line {line:?} must have the form `XX  - value`"),
        });
    }
    Ok(Line::Text(line))
}

struct Entry {
    start_line: usize,
    fields: Vec<(String, String)>,
}

pub fn parse_ris_with(bytes: &[u8], options: &RisOptions) -> Result<Dataset, CorpusError> {
    let text = decode_utf8(bytes)?;
    let mut report = IngestReport::default();
    let mut entries: Vec<Entry> = Vec::new();
    let mut current: Option<Entry> = None;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        match classify_line(raw.trim_end_matches('\r'), line_no)? {
            Line::Blank => {}
            Line::Tag("TY", _) => {
                if let Some(open) = &current {
                    return Err(CorpusError::MalformedRis {
                        line: line_no,
                        reason: format!("entry opened at line {} has no ER terminator", open.start_line),
                    });
                }
                current = Some(Entry {
                    start_line: line_no,
                    fields: Vec::new(),
                });
            }
            Line::Tag("ER", _) => match current.take() {
                Some(entry) => entries.push(entry),
                None => {
                    return Err(CorpusError::MalformedRis {
                        line: line_no,
                        reason: "ER without a preceding TY".into(),
                    })
                }
            },
            Line::Tag(tag, value) => match current.as_mut() {
                Some(entry) => entry.fields.push((tag.to_string(), value.to_string())),
                None => {
                    return Err(CorpusError::MalformedRis {
                        line: line_no,
                        reason: format!("tag {tag} outside of an entry"),
                    })
                }
            },
            Line::Text(text) => match current.as_mut().and_then(|e| e.fields.last_mut()) {
                Some((_, value)) => {
                    if !value.is_empty() {
                        value.push(' ');
                    }
                    value.push_str(text.trim());
                }
                None => {
                    return Err(CorpusError::MalformedRis {
                        line: line_no,
                        reason: "text outside of a tagged field".into(),
                    })
                }
            },
        }
    }
    if let Some(open) = current {
        return Err(CorpusError::MalformedRis {
            line: open.start_line,
            reason: "entry has no ER terminator".into(),
        });
    }
    if entries.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }

    let records = entries
        .into_iter()
        .map(|entry| entry_to_record(entry, options, &mut report))
        .collect();
    Dataset::from_records(records, SourceFormat::Ris, report)
}

fn entry_to_record(entry: Entry, options: &RisOptions, report: &mut IngestReport) -> Record {
    let mut record = Record::default();
    let mut authors = Vec::new();
    let mut keywords = Vec::new();
    for (tag, value) in entry.fields {
        match tag.as_str() {
            "TI" | "T1" => set_once(&mut record.title, value),
            "AB" | "N2" => set_once(&mut record.abstract_text, value),
            "AU" => authors.push(value),
            "KW" => keywords.push(value),
            "DO" => record.doi = Some(value),
            "UR" => record.url = Some(value),
            t if t == options.label_tag => match value.as_str() {
                RIS_RELEVANT => record.label = Some(Label::Relevant),
                RIS_IRRELEVANT => record.label = Some(Label::Irrelevant),
                _ => {}
            },
            _ => *report.unknown_tags.entry(tag).or_default() += 1,
        }
    }
    authors.retain(|a| !a.is_empty());
    keywords.retain(|k| !k.is_empty());
    if !authors.is_empty() {
        record.authors = Some(authors.join("; "));
    }
    if !keywords.is_empty() {
        record.keywords = Some(keywords.join("; "));
    }
    record
}

fn set_once(slot: &mut String, value: String) {
    if slot.is_empty() {
        *slot = value;
    }
}
