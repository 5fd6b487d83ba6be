//! State file: an uncompressed tar archive with fixed entry order and zeroed
//! metadata, so equal states serialize to equal bytes.
//!
//! | entry            | content                                              |
//! |------------------|------------------------------------------------------|
//! | `manifest.json`  | format version, settings, fingerprint, cursor, model |
//! | `events.csv`     | `order,row_id,label,source,model_version`            |
//! | `vocabulary.json`| one vocabulary per column block                      |
//! | `matrix.csv`     | `row,col,value` triplets in row-major order          |
//! | `model.json`     | latest model parameters                              |
//! | `scores.csv`     | `row_id,score`                                       |
//! | `ranking.csv`    | `rank,row_id`                                        |

use std::collections::BTreeMap;
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EngineError, LabelEvent, LabelSource, Presented, ProjectState, Settings};
use crate::classify::Model;
use crate::corpus::{Dataset, Label};
use crate::rng::RngCursor;
use crate::textfeat::{FeatureMatrix, Features, SparseRow, Vocabulary};

pub const STATE_FORMAT_VERSION: u32 = 1;

const ENTRIES: [&str; 7] = [
    "manifest.json",
    "events.csv",
    "vocabulary.json",
    "matrix.csv",
    "model.json",
    "scores.csv",
    "ranking.csv",
];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    dataset_fingerprint: String,
    n_records: usize,
    settings: Settings,
    rng_cursor: RngCursor,
    model_version: u64,
    trained_on: usize,
    n_priors: usize,
    n_features: usize,
    presented: Option<Presented>,
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("state values serialize");
    out.push(b'\n');
    out
}

fn append(builder: &mut tar::Builder<Vec<u8>>, name: &str, data: &[u8]) {
    let mut header = tar::Header::new_ustar();
    header.set_size(data.len() as u64);
    header.set_mode(0o644);
    header.set_mtime(0);
    header.set_uid(0);
    header.set_gid(0);
    header.set_entry_type(tar::EntryType::Regular);
    builder
        .append_data(&mut header, name, data)
        .expect("writing to memory cannot fail");
}

/// Serializes a project state. Byte-identical for equal states.
pub fn save_state(state: &ProjectState) -> Vec<u8> {
    use std::fmt::Write;

    let manifest = Manifest {
        format_version: STATE_FORMAT_VERSION,
        dataset_fingerprint: state.dataset.fingerprint().to_owned(),
        n_records: state.dataset.len(),
        settings: state.settings.clone(),
        rng_cursor: state.rng_cursor,
        model_version: state.model_version(),
        trained_on: state.trained_on,
        n_priors: state.n_priors,
        n_features: state.features.matrix.n_cols(),
        presented: state.presented,
    };

    let mut events = String::from("order,row_id,label,source,model_version\n");
    for e in &state.events {
        writeln!(events, "{},{},{},{},{}", e.order, e.row_id, e.label.as_u8(), e.source, e.model_version).unwrap();
    }
    let mut matrix = String::from("row,col,value\n");
    for (r, c, v) in state.features.matrix.triplets() {
        writeln!(matrix, "{r},{c},{v:?}").unwrap();
    }
    let mut scores = String::from("row_id,score\n");
    for (id, s) in state.scores.iter().enumerate() {
        writeln!(scores, "{id},{s:?}").unwrap();
    }
    let mut ranking = String::from("rank,row_id\n");
    for (rank, id) in state.ranking.iter().enumerate() {
        writeln!(ranking, "{rank},{id}").unwrap();
    }

    let mut builder = tar::Builder::new(Vec::new());
    builder.mode(tar::HeaderMode::Deterministic);
    append(&mut builder, ENTRIES[0], &to_json(&manifest));
    append(&mut builder, ENTRIES[1], events.as_bytes());
    append(&mut builder, ENTRIES[2], &to_json(&state.features.vocabularies));
    append(&mut builder, ENTRIES[3], matrix.as_bytes());
    append(&mut builder, ENTRIES[4], &to_json(&state.model.as_deref()));
    append(&mut builder, ENTRIES[5], scores.as_bytes());
    append(&mut builder, ENTRIES[6], ranking.as_bytes());
    builder.into_inner().expect("writing to memory cannot fail")
}

fn read_entries(bytes: &[u8]) -> Result<BTreeMap<String, String>, EngineError> {
    let mut archive = tar::Archive::new(bytes);
    let mut out = BTreeMap::new();
    let entries = archive.entries().map_err(|e| EngineError::corrupt("archive", e))?;
    for entry in entries {
        let mut entry = entry.map_err(|e| EngineError::corrupt("archive", e))?;
        let name = entry
            .path()
            .map_err(|e| EngineError::corrupt("archive", e))?
            .to_string_lossy()
            .into_owned();
        let mut text = String::new();
        entry
            .read_to_string(&mut text)
            .map_err(|e| EngineError::corrupt(name.clone(), e))?;
        out.insert(name, text);
    }
    for name in ENTRIES {
        if !out.contains_key(name) {
            return Err(EngineError::corrupt(name, "entry missing"));
        }
    }
    Ok(out)
}

/// Data lines of a CSV entry after checking its header.
fn csv_lines<'a>(entries: &'a BTreeMap<String, String>, name: &str, header: &str) -> Result<Vec<Vec<&'a str>>, EngineError> {
    let text = &entries[name];
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(EngineError::corrupt(name, "truncated"));
    }
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(EngineError::corrupt(format!("{name}:1"), format!("expected header {header:?}")));
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() == width {
                Ok(fields)
            } else {
                Err(EngineError::corrupt(format!("{name}:{}", i + 2), format!("expected {width} fields")))
            }
        })
        .collect()
}

fn field<T: std::str::FromStr>(name: &str, line: usize, column: &str, raw: &str) -> Result<T, EngineError>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e: T::Err| EngineError::corrupt(format!("{name}:{line}:{column}"), e))
}

fn json<T: for<'de> Deserialize<'de>>(entries: &BTreeMap<String, String>, name: &str) -> Result<T, EngineError> {
    serde_json::from_str(&entries[name]).map_err(|e| EngineError::corrupt(name, e))
}

/// Restores a state saved by [`save_state`] against the dataset it was built on.
pub fn load_state(bytes: &[u8], dataset: Arc<Dataset>) -> Result<ProjectState, EngineError> {
    let entries = read_entries(bytes)?;
    let version: serde_json::Value = json(&entries, "manifest.json")?;
    match version.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(STATE_FORMAT_VERSION) => {}
        Some(v) => return Err(EngineError::VersionUnsupported(v.try_into().unwrap_or(u32::MAX))),
        None => return Err(EngineError::corrupt("manifest.json/format_version", "missing")),
    }
    let manifest: Manifest = json(&entries, "manifest.json")?;
    if manifest.dataset_fingerprint != dataset.fingerprint() {
        return Err(EngineError::FingerprintMismatch {
            expected: manifest.dataset_fingerprint,
            found: dataset.fingerprint().to_owned(),
        });
    }
    let n = dataset.len();
    if manifest.n_records != n {
        return Err(EngineError::corrupt("manifest.json/n_records", "does not match the dataset"));
    }
    manifest
        .settings
        .validate()
        .map_err(|e| EngineError::corrupt("manifest.json/settings", e))?;

    let mut events = Vec::new();
    for (i, f) in csv_lines(&entries, "events.csv", "order,row_id,label,source,model_version")?
        .into_iter()
        .enumerate()
    {
        let line = i + 2;
        let name = "events.csv";
        let label: u8 = field(name, line, "label", f[2])?;
        events.push(LabelEvent {
            order: field(name, line, "order", f[0])?,
            row_id: field(name, line, "row_id", f[1])?,
            label: Label::try_from(label).map_err(|e| EngineError::corrupt(format!("{name}:{line}:label"), e))?,
            source: f[3]
                .parse::<LabelSource>()
                .map_err(|e| EngineError::corrupt(format!("{name}:{line}:source"), e))?,
            model_version: field(name, line, "model_version", f[4])?,
        });
    }

    let vocabularies: Vec<Vocabulary> = json(&entries, "vocabulary.json")?;
    for (i, v) in vocabularies.iter().enumerate() {
        v.check().map_err(|e| EngineError::corrupt(format!("vocabulary.json[{i}]"), e))?;
    }
    let n_cols: usize = vocabularies.iter().map(Vocabulary::len).sum();
    if n_cols != manifest.n_features || vocabularies.iter().any(|v| v.n_documents() != n) {
        return Err(EngineError::corrupt("vocabulary.json", "does not match the manifest"));
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, f) in csv_lines(&entries, "matrix.csv", "row,col,value")?.into_iter().enumerate() {
        let line = i + 2;
        let r: usize = field("matrix.csv", line, "row", f[0])?;
        let c: usize = field("matrix.csv", line, "col", f[1])?;
        let v: f64 = field("matrix.csv", line, "value", f[2])?;
        let in_order = rows.get(r).is_some_and(|row| row.last().is_none_or(|&(prev, _)| prev < c));
        if !in_order || c >= n_cols || !(v.is_finite() && v > 0.0) {
            return Err(EngineError::corrupt(format!("matrix.csv:{line}"), "entry out of range or order"));
        }
        rows[r].push((c, v));
    }
    let matrix = FeatureMatrix::new(n_cols, rows.into_iter().map(SparseRow::new).collect());
    let features = Arc::new(Features { vocabularies, matrix });

    let model: Option<Model> = json(&entries, "model.json")?;
    if let Some(m) = &model {
        m.check().map_err(|e| EngineError::corrupt("model.json", e))?;
        if m.n_features != n_cols || m.model_version != manifest.model_version {
            return Err(EngineError::corrupt("model.json", "does not match the manifest"));
        }
    }

    let mut scores = Vec::with_capacity(n);
    for (i, f) in csv_lines(&entries, "scores.csv", "row_id,score")?.into_iter().enumerate() {
        let line = i + 2;
        let id: usize = field("scores.csv", line, "row_id", f[0])?;
        let s: f64 = field("scores.csv", line, "score", f[1])?;
        if id != i || !(0.0..=1.0).contains(&s) {
            return Err(EngineError::corrupt(format!("scores.csv:{line}"), "row id or score out of range"));
        }
        scores.push(s);
    }
    if scores.len() != if model.is_some() { n } else { 0 } {
        return Err(EngineError::corrupt("scores.csv", "wrong number of rows"));
    }

    let mut seen = vec![false; n];
    let mut ranking = Vec::new();
    for (i, f) in csv_lines(&entries, "ranking.csv", "rank,row_id")?.into_iter().enumerate() {
        let line = i + 2;
        let rank: usize = field("ranking.csv", line, "rank", f[0])?;
        let id: usize = field("ranking.csv", line, "row_id", f[1])?;
        if rank != i || id >= n || std::mem::replace(&mut seen[id], true) {
            return Err(EngineError::corrupt(format!("ranking.csv:{line}"), "rank or row id out of range"));
        }
        ranking.push(id);
    }

    let mut state = ProjectState::empty(dataset, manifest.settings, features);
    state.restore_events(&events)?;
    if state.n_priors != manifest.n_priors || manifest.trained_on > state.events.len() {
        return Err(EngineError::corrupt("manifest.json", "does not match the event log"));
    }
    if let Some(p) = manifest.presented {
        if p.row_id >= n || state.labels[p.row_id].is_some() {
            return Err(EngineError::corrupt("manifest.json/presented", "not an unlabeled record"));
        }
    }
    state.model = model.map(Arc::new);
    state.trained_on = manifest.trained_on;
    state.scores = scores;
    state.ranking = ranking;
    state.presented = manifest.presented;
    state.rng_cursor = manifest.rng_cursor;
    Ok(state)
}
