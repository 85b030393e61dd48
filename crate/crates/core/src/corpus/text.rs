use std::collections::BTreeSet;
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use super::Speech;
use crate::error::{Error, Result};

/// Generic English function words plus a handful of parliamentary procedure
/// terms. Real runs should supply a curated list.
const DEFAULT_STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "all", "also", "although", "among", "and",
    "another", "any", "are", "because", "been", "before", "being", "below", "between", "both",
    "but", "can", "cannot", "could", "did", "does", "doing", "down", "during", "each", "either",
    "even", "ever", "every", "few", "for", "from", "further", "had", "has", "have", "having",
    "her", "here", "hers", "herself", "him", "himself", "his", "how", "however", "into", "its",
    "itself", "just", "last", "less", "let", "like", "made", "make", "many", "may", "more",
    "most", "much", "must", "myself", "neither", "nor", "not", "now", "off", "once", "one",
    "only", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should",
    "since", "some", "still", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "therefore", "these", "they", "this", "those", "though",
    "through", "thus", "too", "under", "until", "upon", "very", "was", "way", "well", "were",
    "what", "when", "where", "whether", "which", "while", "who", "whom", "whose", "why", "will",
    "with", "within", "without", "would", "yes", "yet", "you", "your", "yours", "yourself",
    // parliamentary procedure
    "adjourn", "adjourned", "amendment", "amendments", "colleague", "colleagues", "comment",
    "comments", "debate", "gentlemen", "ladies", "madam", "minute", "minutes", "mr", "mrs",
    "president", "rapporteur", "report", "sitting", "speaker", "thank", "vote",
];

pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Reads a UTF-8 word list with one term per line. Blank lines are ignored and
/// terms are lowercased.
pub fn load_term_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalizer {
    #[default]
    Identity,
    /// English Snowball stemmer.
    SuffixStemmer,
    /// Surface form → lemma table; unknown forms pass through unchanged.
    LemmaDictionary(std::collections::BTreeMap<String, String>),
}

impl Normalizer {
    /// Loads a lemma table: each non-blank line holds `form lemma`, separated
    /// by whitespace.
    pub fn lemma_dictionary(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = std::collections::BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (None, _, _) => continue,
                (Some(form), Some(lemma), None) => {
                    table.insert(form.to_lowercase(), lemma.to_lowercase());
                }
                _ => {
                    return Err(Error::parse(
                        path.display(),
                        i + 1,
                        "expected `form lemma`",
                    ))
                }
            }
        }
        Ok(Normalizer::LemmaDictionary(table))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub min_token_len: usize,
    pub min_doc_freq: usize,
    pub stopwords: BTreeSet<String>,
    pub extra_stopwords: BTreeSet<String>,
    pub blocked_names: BTreeSet<String>,
    pub normalizer: Normalizer,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_token_len: 3,
            min_doc_freq: 5,
            stopwords: default_stopwords(),
            extra_stopwords: BTreeSet::new(),
            blocked_names: BTreeSet::new(),
            normalizer: Normalizer::Identity,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_token_len == 0 {
            return Err(Error::InvalidConfig("min_token_len must be at least 1".into()));
        }
        if self.min_doc_freq == 0 {
            return Err(Error::InvalidConfig("min_doc_freq must be at least 1".into()));
        }
        Ok(())
    }

    fn is_blocked(&self, term: &str) -> bool {
        self.stopwords.contains(term)
            || self.extra_stopwords.contains(term)
            || self.blocked_names.contains(term)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub id: String,
    pub tokens: Vec<String>,
}

impl TokenizedDocument {
    /// Nothing survived filtering; the speech cannot contribute a matrix row.
    pub fn is_droppable(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercased runs of alphabetic characters. Everything else separates tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

struct TokenFilter<'a> {
    config: &'a PreprocessConfig,
    stemmer: Option<Stemmer>,
}

impl<'a> TokenFilter<'a> {
    fn new(config: &'a PreprocessConfig) -> Self {
        let stemmer = matches!(config.normalizer, Normalizer::SuffixStemmer)
            .then(|| Stemmer::create(Algorithm::English));
        TokenFilter { config, stemmer }
    }

    fn apply(&self, token: String) -> Option<String> {
        if self.config.is_blocked(&token) {
            return None;
        }
        let normalized = match (&self.config.normalizer, &self.stemmer) {
            (Normalizer::SuffixStemmer, Some(stemmer)) => stemmer.stem(&token).into_owned(),
            (Normalizer::LemmaDictionary(table), _) => {
                table.get(&token).cloned().unwrap_or(token)
            }
            _ => token,
        };
        (normalized.chars().count() >= self.config.min_token_len
            && !self.config.is_blocked(&normalized))
        .then_some(normalized)
    }
}

pub fn preprocess(speeches: &[Speech], config: &PreprocessConfig) -> Vec<TokenizedDocument> {
    let filter = TokenFilter::new(config);
    speeches
        .iter()
        .map(|s| TokenizedDocument {
            id: s.id.clone(),
            tokens: tokenize(&s.text).filter_map(|t| filter.apply(t)).collect(),
        })
        .collect()
}

/// Tokenizes free text with the same filters used for speeches.
pub(crate) fn preprocess_text(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let filter = TokenFilter::new(config);
    tokenize(text).filter_map(|t| filter.apply(t)).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn speech(text: &str) -> Speech {
        Speech {
            id: "s".into(),
            date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            speaker_id: None,
            text: text.into(),
        }
    }

    fn run(text: &str, config: &PreprocessConfig) -> Vec<String> {
        preprocess(&[speech(text)], config).remove(0).tokens
    }

    #[test]
    fn case_stopwords_and_punctuation() {
        let tokens = run("The Commission ARE meeting.", &PreprocessConfig::default());
        assert_eq!(tokens, vec!["commission", "meeting"]);
    }

    #[test]
    fn only_stopwords_is_droppable() {
        let docs = preprocess(&[speech("the are and THE")], &PreprocessConfig::default());
        assert!(docs[0].tokens.is_empty());
        assert!(docs[0].is_droppable());
    }

    #[test]
    fn short_tokens_and_digits() {
        assert!(run("eu", &PreprocessConfig::default()).is_empty());
        assert_eq!(run("co2emissions 2014budget", &PreprocessConfig::default()), vec!["emissions", "budget"]);
    }

    #[test]
    fn unicode_alphabetic_runs() {
        let tokens: Vec<String> = tokenize("Société—générale, naïve").collect();
        assert_eq!(tokens, vec!["société", "générale", "naïve"]);
    }

    #[test]
    fn names_and_extra_stopwords() {
        let mut config = PreprocessConfig::default();
        config.blocked_names.insert("barroso".into());
        config.extra_stopwords.insert("plenary".into());
        assert_eq!(run("Barroso opened the plenary budget", &config), vec!["opened", "budget"]);
    }

    #[test]
    fn normalizers() {
        let mut config = PreprocessConfig {
            normalizer: Normalizer::SuffixStemmer,
            ..Default::default()
        };
        assert_eq!(run("farmers farming", &config), vec!["farmer", "farm"]);
        let table = [("fisheries", "fishery"), ("was", "be")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        config.normalizer = Normalizer::LemmaDictionary(table);
        assert_eq!(run("Fisheries policies", &config), vec!["fishery", "policies"]);
    }

    #[test]
    fn lemma_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lemmas.txt");
        std::fs::write(&path, "Mice mouse\n\nran run\n").unwrap();
        let Normalizer::LemmaDictionary(table) = Normalizer::lemma_dictionary(&path).unwrap() else {
            panic!("wrong variant");
        };
        assert_eq!(table["mice"], "mouse");
        std::fs::write(&path, "only-one-column\n").unwrap();
        assert!(Normalizer::lemma_dictionary(&path).is_err());
    }

    #[test]
    fn config_validation() {
        let config = PreprocessConfig {
            min_token_len: 0,
            ..Default::default()
        };
        assert!(config.validate().is_err());
        assert!(PreprocessConfig::default().validate().is_ok());
    }
}
