use std::collections::HashSet;
use std::sync::OnceLock;

/// Words dropped by the default tokenizer.
pub const DEFAULT_STOPWORDS: [&str; 30] = [
    "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have", "if", "in",
    "into", "is", "it", "its", "of", "on", "or", "that", "the", "their", "this", "to", "was",
    "were", "will", "with",
];

/// Splits on non-alphanumeric characters, lowercases, drops tokens shorter
/// than two characters and stopwords. No stemming.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::with_stopwords(DEFAULT_STOPWORDS)
    }
}

impl Tokenizer {
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Tokenizer {
            stopwords: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// One stopword per line; blank lines and `#` comments ignored.
    pub fn from_stopword_file(text: &str) -> Self {
        Tokenizer::with_stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|piece| !piece.is_empty())
            .map(str::to_lowercase)
            .filter(|token| token.chars().count() >= 2 && !self.stopwords.contains(token))
            .collect()
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    static DEFAULT: OnceLock<Tokenizer> = OnceLock::new();
    DEFAULT.get_or_init(Tokenizer::default).tokenize(text)
}
