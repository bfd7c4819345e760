//! Resources shipped with the engine, embedded at compile time.

/// One stop-word per line.
pub const STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// `surface TAB lemma` overrides for the suffix rules.
pub const LEMMA_EXCEPTIONS: &str = include_str!("../data/lemma-exceptions.tsv");

/// `word TAB hypernym`, one edge per line.
pub const TAXONOMY: &str = include_str!("../data/taxonomy.tsv");

/// `word TAB idf` from general English word frequencies.
pub const GLOBAL_IDF: &str = include_str!("../data/global-idf.tsv");

/// Persona chit-chat intents (JSON; parsed by the `kbqa` crate).
pub const CHITCHAT_CORPUS: &str = include_str!("../data/chitchat-corpus.json");
