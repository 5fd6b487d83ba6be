//! Labeled corpora with a known answer, for benchmarking and tests.

use rand::seq::SliceRandom;

use crate::corpus::{Dataset, IngestReport, Label, Record, SourceFormat};
use crate::rng::ProjectRng;

/// Token shared by every relevant record of [`planted_corpus`].
pub const PLANTED_TOKEN: &str = "plantedsignal";

const BACKGROUND_WORDS: usize = 400;
const TITLE_WORDS: usize = 8;
const ABSTRACT_WORDS: usize = 40;

fn noise(rng: &mut ProjectRng, n: usize) -> Vec<String> {
    (0..n).map(|_| format!("w{}", rng.below(BACKGROUND_WORDS))).collect()
}

/// `n` records of uniform background noise; `n_relevant` of them, at random
/// positions, also carry [`PLANTED_TOKEN`] once in the title and once in the
/// abstract.
pub fn planted_corpus(n: usize, n_relevant: usize, seed: u64) -> Dataset {
    assert!(n_relevant <= n, "more relevant records than records");
    let mut rng = ProjectRng::new(seed, 0);
    let mut relevant: Vec<bool> = (0..n).map(|i| i < n_relevant).collect();
    relevant.shuffle(&mut rng);
    let records = relevant
        .into_iter()
        .enumerate()
        .map(|(i, is_relevant)| {
            let mut title = noise(&mut rng, TITLE_WORDS);
            let mut abstract_words = noise(&mut rng, ABSTRACT_WORDS);
            if is_relevant {
                let t = rng.below(title.len() + 1);
                title.insert(t, PLANTED_TOKEN.to_owned());
                let a = rng.below(abstract_words.len() + 1);
                abstract_words.insert(a, PLANTED_TOKEN.to_owned());
            }
            Record {
                row_id: i,
                title: title.join(" "),
                abstract_text: abstract_words.join(" "),
                label: Some(Label::from(is_relevant)),
                ..Default::default()
            }
        })
        .collect();
    Dataset::from_records(records, SourceFormat::Csv, IngestReport::default()).expect("synthetic records have text")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let d = planted_corpus(200, 10, 3);
        assert_eq!(d.len(), 200);
        assert_eq!(d.n_relevant(), 10);
        assert!(d.is_fully_labeled());
        for r in d.records() {
            assert_eq!(r.text().contains(PLANTED_TOKEN), r.label == Some(Label::Relevant));
        }
        assert_eq!(d.fingerprint(), planted_corpus(200, 10, 3).fingerprint());
        assert_ne!(d.fingerprint(), planted_corpus(200, 10, 4).fingerprint());
    }
}
