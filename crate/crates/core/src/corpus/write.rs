use super::{Label, Record, RIS_IRRELEVANT, RIS_RELEVANT};

const CSV_HEADER: &str = "record_id,title,abstract,authors,keywords,doi,url,included";

fn csv_field(out: &mut String, value: &str) {
    if value.contains([',', '"', '\n', '\r']) {
        out.push('"');
        out.push_str(&value.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(value);
    }
}

/// Writes records as UTF-8 CSV with an `included` label column (empty when unlabeled).
/// `record_id` carries the original row id and is ignored when the file is parsed back.
pub fn write_csv<'a>(rows: impl IntoIterator<Item = (&'a Record, Option<Label>)>) -> Vec<u8> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (record, label) in rows {
        let label = label.map(|l| l.as_u8().to_string()).unwrap_or_default();
        let cells = [
            record.row_id.to_string(),
            record.title.clone(),
            record.abstract_text.clone(),
            record.authors.clone().unwrap_or_default(),
            record.keywords.clone().unwrap_or_default(),
            record.doi.clone().unwrap_or_default(),
            record.url.clone().unwrap_or_default(),
            label,
        ];
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            csv_field(&mut out, cell);
        }
        out.push('\n');
    }
    out.into_bytes()
}

fn ris_line(out: &mut String, tag: &str, value: &str) {
    let flat = value.split(['\n', '\r']).map(str::trim).filter(|s| !s.is_empty());
    let flat: Vec<&str> = flat.collect();
    if flat.is_empty() {
        return;
    }
    out.push_str(tag);
    out.push_str("  - ");
    out.push_str(&flat.join(" "));
    out.push('\n');
}

/// Writes records as RIS. Authors and keywords are split back into repeated
/// tags on `"; "`; labels go into `N1`.
pub fn write_ris<'a>(rows: impl IntoIterator<Item = (&'a Record, Option<Label>)>) -> Vec<u8> {
    let mut out = String::new();
    for (record, label) in rows {
        out.push_str("TY  - JOUR\n");
        ris_line(&mut out, "TI", &record.title);
        ris_line(&mut out, "AB", &record.abstract_text);
        for author in record.authors.iter().flat_map(|a| a.split("; ")) {
            ris_line(&mut out, "AU", author);
        }
        for keyword in record.keywords.iter().flat_map(|k| k.split("; ")) {
            ris_line(&mut out, "KW", keyword);
        }
        ris_line(&mut out, "DO", record.doi.as_deref().unwrap_or(""));
        ris_line(&mut out, "UR", record.url.as_deref().unwrap_or(""));
        match label {
            Some(Label::Relevant) => ris_line(&mut out, "N1", RIS_RELEVANT),
            Some(Label::Irrelevant) => ris_line(&mut out, "N1", RIS_IRRELEVANT),
            None => {}
        }
        out.push_str("ER  - \n\n");
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_csv, parse_ris};

    fn sample() -> Vec<Record> {
        vec![
            Record {
                row_id: 0,
                title: "A \"quoted\", title".into(),
                abstract_text: "line one\nline two".into(),
                authors: Some("Smith, J.; Lee, K.".into()),
                keywords: Some("ml; screening".into()),
                doi: Some("10.1/abc".into()),
                url: None,
                label: Some(Label::Relevant),
            },
            Record {
                row_id: 1,
                title: "".into(),
                abstract_text: "only abstract".into(),
                label: None,
                ..Default::default()
            },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let records = sample();
        let bytes = write_csv(records.iter().map(|r| (r, r.label)));
        let back = parse_csv(&bytes).unwrap();
        assert_eq!(back.records(), records.as_slice());
    }

    #[test]
    fn ris_round_trip_flattens_newlines() {
        let records = sample();
        let bytes = write_ris(records.iter().map(|r| (r, r.label)));
        let back = parse_ris(&bytes).unwrap();
        assert_eq!(back.records()[0].abstract_text, "line one line two");
        assert_eq!(back.records()[0].authors, records[0].authors);
        assert_eq!(back.records()[0].keywords, records[0].keywords);
        assert_eq!(back.records()[0].label, Some(Label::Relevant));
        assert_eq!(back.records()[1], records[1]);
        assert!(String::from_utf8(bytes).unwrap().contains("N1  - ASReview_relevant\n"));
    }
}
