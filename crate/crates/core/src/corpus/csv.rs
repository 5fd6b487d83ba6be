use super::{decode_utf8, detect_labels, CorpusError, Dataset, IngestReport, Record, SourceFormat};

const TITLE_ALIASES: &[&str] = &["title", "primary_title"];
const ABSTRACT_ALIASES: &[&str] = &["abstract", "notes_abstract", "abstract_note"];

/// One parsed CSV row and the line it started on.
pub(crate) struct CsvRow {
    pub line: usize,
    pub fields: Vec<String>,
}

/// RFC 4180 tokenizer: comma separated, `"` quoting with doubled quotes,
/// quoted fields may span lines. Rows consisting of a single empty field
/// (blank lines) are skipped.
pub(crate) fn read_rows(text: &str) -> Result<Vec<CsvRow>, CorpusError> {
    let mut rows = Vec::new();
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut line = 1;
    let mut row_start = 1;
    let mut chars = text.chars().peekable();

    fn finish_row(rows: &mut Vec<CsvRow>, fields: &mut Vec<String>, field: &mut String, start: usize) {
        fields.push(std::mem::take(field));
        let fields = std::mem::take(fields);
        if !(fields.len() == 1 && fields[0].is_empty()) {
            rows.push(CsvRow { line: start, fields });
        }
    }

    while let Some(c) = chars.next() {
        match c {
            '"' if field.is_empty() => {
                let quote_line = line;
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            field.push('"');
                        }
                        Some('"') => break,
                        Some(ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            field.push(ch);
                        }
                        None => {
                            return Err(CorpusError::CsvSyntax {
                                line: quote_line,
                                reason: "unbalanced quote".into(),
                            })
                        }
                    }
                }
                match chars.peek() {
                    None | Some(',') | Some('\n') | Some('\r') => {}
                    Some(other) => {
                        return Err(CorpusError::CsvSyntax {
                            line,
                            reason: format!("unexpected {other:?} after closing quote"),
                        })
                    }
                }
            }
            ',' => fields.push(std::mem::take(&mut field)),
            '\r' if chars.peek() == Some(&'\n') => {}
            '\n' => {
                finish_row(&mut rows, &mut fields, &mut field, row_start);
                line += 1;
                row_start = line;
            }
            other => field.push(other),
        }
    }
    if !field.is_empty() || !fields.is_empty() {
        finish_row(&mut rows, &mut fields, &mut field, row_start);
    }
    Ok(rows)
}

fn find_column(header: &[String], aliases: &[&str]) -> Option<usize> {
    header
        .iter()
        .position(|h| aliases.iter().any(|a| h.trim().eq_ignore_ascii_case(a)))
}

pub fn parse_csv(bytes: &[u8]) -> Result<Dataset, CorpusError> {
    let text = decode_utf8(bytes)?;
    let mut rows = read_rows(text)?.into_iter();
    let header = match rows.next() {
        Some(h) => h.fields,
        None => return Err(CorpusError::EmptyDataset),
    };
    let title = find_column(&header, TITLE_ALIASES);
    let abstract_col = find_column(&header, ABSTRACT_ALIASES);
    if title.is_none() && abstract_col.is_none() {
        return Err(CorpusError::BadHeader);
    }
    let authors = find_column(&header, &["authors"]);
    let keywords = find_column(&header, &["keywords"]);
    let doi = find_column(&header, &["doi"]);
    let url = find_column(&header, &["url"]);

    let mut data: Vec<Vec<String>> = Vec::new();
    for row in rows {
        // Short rows are padded with empty cells; extra cells mean a broken row.
        if row.fields.len() > header.len() {
            return Err(CorpusError::CsvSyntax {
                line: row.line,
                reason: format!("row has {} fields, the header has {}", row.fields.len(), header.len()),
            });
        }
        data.push(row.fields);
    }
    if data.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let labels = detect_labels(&header, &data)?;

    let cell = |row: &[String], col: Option<usize>| -> Option<String> {
        col.and_then(|c| row.get(c)).cloned()
    };
    let optional = |row: &[String], col: Option<usize>| cell(row, col).filter(|v| !v.is_empty());

    let records = data
        .iter()
        .enumerate()
        .map(|(i, row)| Record {
            row_id: i,
            title: cell(row, title).unwrap_or_default(),
            abstract_text: cell(row, abstract_col).unwrap_or_default(),
            authors: optional(row, authors),
            keywords: optional(row, keywords),
            doi: optional(row, doi),
            url: optional(row, url),
            label: labels.as_ref().and_then(|l| l[i]),
        })
        .collect();
    Dataset::from_records(records, SourceFormat::Csv, IngestReport::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    #[test]
    fn simple_row() {
        let ds = parse_csv(b"title,abstract\nt1,a1\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records()[0].title, "t1");
        assert_eq!(ds.records()[0].abstract_text, "a1");
    }

    #[test]
    fn quoted_comma_quote_and_newline() {
        let ds = parse_csv(b"title,abstract\nt,\"a, b\"\nu,\"say \"\"hi\"\"\nthere\"\n").unwrap();
        assert_eq!(ds.records()[0].abstract_text, "a, b");
        assert_eq!(ds.records()[1].abstract_text, "say \"hi\"\nthere");
    }

    #[test]
    fn labels_and_aliases() {
        let ds = parse_csv(b"Primary_Title,Notes_Abstract,label_included\nt1,a1,1\nt2,a2,0\n").unwrap();
        assert_eq!(ds.records()[0].label, Some(Label::Relevant));
        assert_eq!(ds.records()[1].label, Some(Label::Irrelevant));
        assert_eq!(ds.records()[1].title, "t2");
    }

    #[test]
    fn unbalanced_quote_reports_line() {
        let err = parse_csv(b"title,abstract\nt,a\nu,\"open\nmore\n").unwrap_err();
        assert_eq!(
            err,
            CorpusError::CsvSyntax {
                line: 3,
                reason: "unbalanced quote".into()
            }
        );
    }

    #[test]
    fn header_without_text_columns() {
        assert_eq!(parse_csv(b"doi,url\nx,y\n").unwrap_err(), CorpusError::BadHeader);
    }

    #[test]
    fn not_utf8() {
        assert!(matches!(parse_csv(b"title\n\xc3\x28\n"), Err(CorpusError::NotUtf8 { .. })));
    }

    #[test]
    fn crlf_blank_lines_and_short_rows() {
        let ds = parse_csv(b"title,abstract,doi\r\nt1\r\n\r\nt2,a2,10.1/x\r\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records()[0].abstract_text, "");
        assert_eq!(ds.records()[1].doi.as_deref(), Some("10.1/x"));
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(parse_csv(b"title,abstract\n").unwrap_err(), CorpusError::EmptyDataset);
        assert_eq!(parse_csv(b"").unwrap_err(), CorpusError::EmptyDataset);
    }

    #[test]
    fn garbage_after_closing_quote() {
        assert!(matches!(
            parse_csv(b"title\n\"a\"b\n"),
            Err(CorpusError::CsvSyntax { line: 2, .. })
        ));
    }
}
