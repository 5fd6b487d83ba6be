use std::collections::BTreeSet;

use super::{CorpusError, Dataset};

fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Token-overlap search used to find prior-knowledge records.
///
/// Each distinct query token scores 2 when present in the title and 1 when
/// present in the abstract. Results are ordered by score (descending) then
/// row id, zero scores are dropped and at most `k` ids are returned.
pub fn search_records(dataset: &Dataset, query: &str, k: usize) -> Result<Vec<usize>, CorpusError> {
    if query.trim().is_empty() {
        return Err(CorpusError::EmptyQuery);
    }
    let terms = words(query);
    let mut scored: Vec<(usize, usize)> = dataset
        .records()
        .iter()
        .filter_map(|record| {
            let title = words(&record.title);
            let abstract_words = words(&record.abstract_text);
            let score: usize = terms
                .iter()
                .map(|t| 2 * usize::from(title.contains(t)) + usize::from(abstract_words.contains(t)))
                .sum();
            (score > 0).then_some((score, record.row_id))
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, id)| id).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_csv;

    fn dataset() -> Dataset {
        parse_csv(
            b"title,abstract\n\
              Deep learning for screening,neural nets\n\
              Bayesian methods,a deep dive\n\
              Unrelated,nothing here\n\
              Deep learning again,more deep learning\n",
        )
        .unwrap()
    }

    #[test]
    fn unique_title_token_first() {
        assert_eq!(search_records(&dataset(), "BAYESIAN", 5).unwrap(), vec![1]);
    }

    #[test]
    fn scoring_and_ties() {
        // "deep learning": rows 0 and 3 score 2+2 (+1+1 for row 3), row 1 scores 1.
        assert_eq!(search_records(&dataset(), "deep learning", 10).unwrap(), vec![3, 0, 1]);
        assert_eq!(search_records(&dataset(), "deep", 10).unwrap(), vec![3, 0, 1]);
        assert_eq!(search_records(&dataset(), "learning", 10).unwrap(), vec![3, 0]);
        assert_eq!(search_records(&dataset(), "deep learning", 1).unwrap(), vec![3]);
    }

    #[test]
    fn equal_scores_keep_row_order() {
        assert_eq!(search_records(&dataset(), "screening again", 10).unwrap(), vec![0, 3]);
    }

    #[test]
    fn no_hits_and_empty_query() {
        assert!(search_records(&dataset(), "quantum", 5).unwrap().is_empty());
        assert_eq!(search_records(&dataset(), "  ", 5).unwrap_err(), CorpusError::EmptyQuery);
    }
}
