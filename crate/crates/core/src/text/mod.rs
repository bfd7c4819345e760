//! Query and document normalization.
//!
//! The pipeline order is fixed: junk stripping, word breaking, lowercasing,
//! spelling correction, lemmatization (plus KB synonym canonicalization) and
//! stop-word removal. Documents go through the same pipeline without the
//! spelling stage.

mod lemma;
mod spell;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundled;
use crate::hash::provenance_hash;

pub use lemma::Lemmatizer;
pub use spell::{damerau_levenshtein, distance_bound, spell_correct, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("malformed {file} at line {line}: {content:?}")]
    Malformed {
        file: &'static str,
        line: usize,
        content: String,
    },
    #[error("unsupported language: only English text is accepted ({ascii_pct}% ASCII letters)")]
    UnsupportedLanguage { ascii_pct: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub position: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub original: String,
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.lemma.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Lemmas joined by single spaces.
    pub fn lemma_text(&self) -> String {
        let mut s = String::new();
        for (i, l) in self.lemmas().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(l);
        }
        s
    }
}

/// Lemma -> canonical lemma for one KB's word-equivalence sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymMap {
    canonical: BTreeMap<String, String>,
}

impl SynonymMap {
    pub fn canonical<'a>(&'a self, lemma: &'a str) -> &'a str {
        self.canonical.get(lemma).map_or(lemma, String::as_str)
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.canonical.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }
}

/// Everything query normalization needs to know about one KB: the spelling
/// dictionary and its synonym sets.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    spelling: Vocabulary,
    synonyms: SynonymMap,
}

impl Lexicon {
    pub fn spelling(&self) -> &Vocabulary {
        &self.spelling
    }

    pub fn synonyms(&self) -> &SynonymMap {
        &self.synonyms
    }

    /// Adds known words that must never be corrected away.
    pub fn extend_spelling(&mut self, words: &Vocabulary) {
        for w in words.words() {
            self.spelling.insert(w, 0);
        }
    }
}

/// Stop-words plus lemmatizer; shared by every KB.
#[derive(Debug, Clone)]
pub struct Analyzer {
    stopwords: BTreeSet<String>,
    lemmatizer: Lemmatizer,
    stopwords_hash: String,
}

impl Analyzer {
    pub fn new(stopwords_src: &str, exceptions_src: &str) -> Result<Self, TextError> {
        let stopwords = parse_stopwords(stopwords_src);
        let exceptions =
            Lemmatizer::parse_exceptions(exceptions_src).map_err(|(line, content)| {
                TextError::Malformed {
                    file: "lemma-exceptions.tsv",
                    line,
                    content,
                }
            })?;
        Ok(Self {
            stopwords,
            lemmatizer: Lemmatizer::new(exceptions),
            stopwords_hash: provenance_hash(stopwords_src),
        })
    }

    /// Analyzer over the bundled stop-word list and lemma exceptions.
    pub fn bundled() -> Self {
        Self::new(bundled::STOPWORDS, bundled::LEMMA_EXCEPTIONS)
            .expect("bundled lemma exceptions parse")
    }

    pub fn stopwords_hash(&self) -> &str {
        &self.stopwords_hash
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn lemma(&self, word: &str) -> String {
        self.lemmatizer.lemma(word)
    }

    /// Builds the synonym map; each set's first word (lemmatized) is canonical.
    pub fn synonym_map(&self, sets: &[Vec<String>]) -> SynonymMap {
        let mut canonical = BTreeMap::new();
        for set in sets {
            let lemmas: Vec<String> = set
                .iter()
                .map(|w| self.lemma(w.trim()))
                .filter(|l| !l.is_empty())
                .collect();
            if let Some(first) = lemmas.first() {
                for l in &lemmas {
                    canonical.entry(l.clone()).or_insert_with(|| first.clone());
                }
            }
        }
        SynonymMap { canonical }
    }

    /// Spelling dictionary = KB lemmas ∪ stop-words ∪ synonym lemmas.
    pub fn lexicon(&self, kb_terms: &Vocabulary, synonyms: SynonymMap) -> Lexicon {
        let mut spelling = kb_terms.clone();
        for s in &self.stopwords {
            spelling.insert(s, 0);
        }
        for l in synonyms.lemmas() {
            spelling.insert(l, 0);
        }
        Lexicon { spelling, synonyms }
    }

    /// Full query pipeline, with spelling correction against `lexicon`.
    pub fn normalize(&self, text: &str, lexicon: &Lexicon) -> TokenStream {
        self.run(text, Some(lexicon.spelling()), lexicon.synonyms())
    }

    /// Normalizes against a bare vocabulary (no synonyms).
    pub fn normalize_with_vocab(&self, text: &str, vocab: &Vocabulary) -> TokenStream {
        let lexicon = self.lexicon(vocab, SynonymMap::default());
        self.normalize(text, &lexicon)
    }

    /// Document-side analysis: same pipeline, no spelling stage.
    pub fn analyze(&self, text: &str, synonyms: &SynonymMap) -> TokenStream {
        self.run(text, None, synonyms)
    }

    fn run(&self, text: &str, spelling: Option<&Vocabulary>, synonyms: &SynonymMap) -> TokenStream {
        let cleaned = strip_junk(text);
        let mut tokens = Vec::new();
        for (position, word) in word_break(&cleaned).into_iter().enumerate() {
            let lower = word.to_lowercase();
            let corrected = match spelling {
                Some(dict) => self.correct(&lower, dict),
                None => lower.clone(),
            };
            if self.is_stopword(&corrected) {
                continue;
            }
            let lemma = self.lemma(&corrected);
            let lemma = synonyms.canonical(&lemma).to_string();
            if lemma.is_empty() || self.is_stopword(&lemma) {
                continue;
            }
            tokens.push(Token {
                surface: word.to_string(),
                lemma,
                position,
            });
        }
        TokenStream {
            original: text.to_string(),
            tokens,
        }
    }

    fn correct(&self, token: &str, dict: &Vocabulary) -> String {
        if token.chars().any(|c| c.is_numeric()) || dict.contains(token) {
            return token.to_string();
        }
        let lemma = self.lemma(token);
        if dict.contains(&lemma) {
            return token.to_string();
        }
        let fixed = spell_correct(token, dict);
        if fixed != token {
            return fixed;
        }
        let fixed = spell_correct(&lemma, dict);
        if fixed != lemma {
            return fixed;
        }
        token.to_string()
    }
}

pub fn parse_stopwords(src: &str) -> BTreeSet<String> {
    src.lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

fn is_kept(c: char) -> bool {
    c.is_alphanumeric() || c.is_whitespace() || c == '\'' || c == '-'
}

/// Replaces junk characters with spaces; typographic apostrophes become `'`.
pub fn strip_junk(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' => '\'',
            c if is_kept(c) => c,
            _ => ' ',
        })
        .collect()
}

/// Splits on whitespace and hyphens; trims surrounding apostrophes.
pub fn word_break(text: &str) -> Vec<&str> {
    text.split(|c: char| c.is_whitespace() || c == '-')
        .map(|w| w.trim_matches('\''))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Rejects text that is mostly non-ASCII letters.
pub fn detect_language(text: &str) -> Result<(), TextError> {
    let (mut letters, mut ascii) = (0u32, 0u32);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if c.is_ascii_alphabetic() {
            ascii += 1;
        }
    }
    if letters >= 3 && ascii * 5 < letters * 4 {
        return Err(TextError::UnsupportedLanguage {
            ascii_pct: ascii * 100 / letters,
        });
    }
    Ok(())
}
