use serde::{Deserialize, Serialize};

use super::ProjectState;
use crate::corpus::{write_csv, write_ris};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Ris,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "ris" => Ok(ExportFormat::Ris),
            other => Err(format!("unknown export format {other:?}, expected csv or ris")),
        }
    }
}

/// Labeled records in screening order, then unlabeled records from most to
/// least likely relevant, with an empty label.
pub fn export_results(state: &ProjectState, format: ExportFormat) -> Vec<u8> {
    let dataset = state.dataset();
    let labeled = state.events().iter().map(|e| (&dataset.records()[e.row_id], Some(e.label)));
    let ranked = state.ranking();
    // Rows labeled after the ranking was computed are already in section 1;
    // rows never ranked (no model yet) follow in id order.
    let mut unlabeled = ranked;
    if state.model().is_none() {
        unlabeled = (0..dataset.len()).filter(|&id| state.label_of(id).is_none()).collect();
    }
    let rows = labeled.chain(unlabeled.into_iter().map(|id| (&dataset.records()[id], None)));
    match format {
        ExportFormat::Csv => write_csv(rows),
        ExportFormat::Ris => write_ris(rows),
    }
}
