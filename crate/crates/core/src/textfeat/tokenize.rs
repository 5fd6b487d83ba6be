use std::collections::HashSet;
use std::sync::OnceLock;

use super::FeatureSpec;

static STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

/// The built-in English stopword list (179 words).
pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_EN.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

/// Splits text into maximal alphanumeric runs of at least two characters,
/// then appends contiguous n-grams up to `spec.ngram_max`.
pub fn tokenize(text: &str, spec: &FeatureSpec) -> Vec<String> {
    let mut unigrams: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 2)
        .map(|w| if spec.lowercase { w.to_lowercase() } else { w.to_string() })
        .collect();
    if spec.stopword_removal {
        let stop = stopwords();
        unigrams.retain(|w| !stop.contains(w.to_lowercase().as_str()));
    }
    let mut tokens = unigrams.clone();
    for n in 2..=spec.ngram_max {
        tokens.extend(unigrams.windows(n).map(|w| w.join(" ")));
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_unigrams() {
        assert_eq!(tokenize("Active Learning", &FeatureSpec::default()), ["active", "learning"]);
    }

    #[test]
    fn bigrams_follow_unigrams() {
        let spec = FeatureSpec {
            ngram_max: 2,
            ..Default::default()
        };
        assert_eq!(
            tokenize("COVID-19 review", &spec),
            ["covid", "19", "review", "covid 19", "19 review"]
        );
    }

    #[test]
    fn trigrams() {
        let spec = FeatureSpec {
            ngram_max: 3,
            ..Default::default()
        };
        assert_eq!(
            tokenize("aa bb cc", &spec),
            ["aa", "bb", "cc", "aa bb", "bb cc", "aa bb cc"]
        );
    }

    #[test]
    fn single_characters_are_dropped() {
        assert!(tokenize("a b", &FeatureSpec::default()).is_empty());
        assert!(tokenize("", &FeatureSpec::default()).is_empty());
    }

    #[test]
    fn case_is_kept_when_requested() {
        let spec = FeatureSpec {
            lowercase: false,
            ..Default::default()
        };
        assert_eq!(tokenize("Naïve Bayes", &spec), ["Naïve", "Bayes"]);
    }

    #[test]
    fn stopword_list() {
        assert_eq!(stopwords().len(), 179);
        let spec = FeatureSpec {
            stopword_removal: true,
            ..Default::default()
        };
        assert_eq!(tokenize("The effect of the drug", &spec), ["effect", "drug"]);
        assert_eq!(
            tokenize("The effect of the drug", &FeatureSpec::default()),
            ["the", "effect", "of", "the", "drug"]
        );
    }
}
