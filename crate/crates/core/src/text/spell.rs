use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Term dictionary with KB term frequencies, used for spelling and fuzzy expansion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    counts: BTreeMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: BTreeMap<String, u32>) -> Self {
        Self { counts }
    }

    pub fn insert(&mut self, word: &str, count: u32) {
        *self.counts.entry(word.into()).or_insert(0) += count;
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts.contains_key(word)
    }

    pub fn frequency(&self, word: &str) -> u32 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Words in lexicographic order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }
}

/// Maximum edit distance accepted for a correction of `token`.
pub fn distance_bound(token: &str) -> usize {
    if token.chars().count() <= 4 {
        1
    } else {
        2
    }
}

/// Unrestricted Damerau-Levenshtein distance (adjacent transpositions count
/// as one edit, and substrings may be edited more than once).
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    let max = n + m;
    // (n + 2) x (m + 2) table with a sentinel row/column at index 0.
    let w = m + 2;
    let mut d = vec![0usize; (n + 2) * w];
    d[0] = max;
    for i in 0..=n {
        d[(i + 1) * w] = max;
        d[(i + 1) * w + 1] = i;
    }
    for j in 0..=m {
        d[j + 1] = max;
        d[w + j + 1] = j;
    }
    let mut last_row: BTreeMap<char, usize> = BTreeMap::new();
    for i in 1..=n {
        let mut last_match_col = 0;
        for j in 1..=m {
            let i1 = last_row.get(&b[j - 1]).copied().unwrap_or(0);
            let j1 = last_match_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_match_col = j;
                0
            } else {
                1
            };
            let sub = d[i * w + j] + cost;
            let ins = d[(i + 1) * w + j] + 1;
            let del = d[i * w + j + 1] + 1;
            let trans = d[i1 * w + j1] + (i - i1 - 1) + 1 + (j - j1 - 1);
            d[(i + 1) * w + j + 1] = sub.min(ins).min(del).min(trans);
        }
        last_row.insert(a[i - 1], i);
    }
    d[(n + 1) * w + m + 1]
}

/// Closest dictionary word within the length-dependent bound; the token itself
/// when it is already known or nothing is close enough.
///
/// Ties prefer the more frequent KB term, then the lexicographically smaller.
pub fn spell_correct(token: &str, vocab: &Vocabulary) -> String {
    if vocab.contains(token) {
        return token.into();
    }
    let bound = distance_bound(token);
    let len = token.chars().count();
    let mut best: Option<(usize, u32, &str)> = None;
    for (word, &freq) in vocab.counts() {
        if word.chars().count().abs_diff(len) > bound {
            continue;
        }
        let d = damerau_levenshtein(token, word);
        if d > bound {
            continue;
        }
        let better = match best {
            None => true,
            Some((bd, bf, _)) => d < bd || (d == bd && freq > bf),
        };
        if better {
            best = Some((d, freq, word));
        }
    }
    best.map_or_else(|| token.into(), |(_, _, w)| w.into())
}
