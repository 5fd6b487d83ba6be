use super::{CorpusError, Label};

/// Header names recognised as the historical label column, in priority order.
pub const LABEL_COLUMN_ALIASES: &[&str] = &["label_included", "included", "label", "labels", "included_final"];

const RELEVANT_VALUES: &[&str] = &["1", "yes", "true", "relevant", "included"];
const IRRELEVANT_VALUES: &[&str] = &["0", "no", "false", "irrelevant", "excluded"];

fn parse_label(cell: &str) -> Option<Option<Label>> {
    let value = cell.trim();
    if value.is_empty() {
        return Some(None);
    }
    let lower = value.to_lowercase();
    if RELEVANT_VALUES.contains(&lower.as_str()) {
        Some(Some(Label::Relevant))
    } else if IRRELEVANT_VALUES.contains(&lower.as_str()) {
        Some(Some(Label::Irrelevant))
    } else {
        None
    }
}

/// Finds the label column and maps its cells. Returns `None` when the header
/// has no label column; empty cells map to unlabeled.
pub fn detect_labels(header: &[String], rows: &[Vec<String>]) -> Result<Option<Vec<Option<Label>>>, CorpusError> {
    let candidates: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| LABEL_COLUMN_ALIASES.iter().any(|a| h.trim().eq_ignore_ascii_case(a)))
        .map(|(i, _)| i)
        .collect();
    let column = match candidates.as_slice() {
        [] => return Ok(None),
        [only] => *only,
        _ => {
            return Err(CorpusError::AmbiguousLabels(
                candidates.iter().map(|&i| header[i].clone()).collect(),
            ))
        }
    };
    rows.iter()
        .enumerate()
        .map(|(row, fields)| {
            let cell = fields.get(column).map(String::as_str).unwrap_or("");
            parse_label(cell).ok_or_else(|| CorpusError::BadLabelValue {
                row,
                value: cell.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}
