use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

/// Rule-based English lemmatizer with an exceptions table.
///
/// Rules are applied to a fixpoint so `lemma(lemma(w)) == lemma(w)` holds for
/// every input; exception targets must themselves be fixpoints.
#[derive(Debug, Clone, Default)]
pub struct Lemmatizer {
    exceptions: BTreeMap<String, String>,
}

impl Lemmatizer {
    pub fn new(exceptions: BTreeMap<String, String>) -> Self {
        Self { exceptions }
    }

    /// Parses `surface TAB lemma` lines. Blank lines and `#` comments are skipped.
    pub fn parse_exceptions(src: &str) -> Result<BTreeMap<String, String>, (usize, String)> {
        let mut map = BTreeMap::new();
        for (no, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(l), None) if !s.is_empty() && !l.is_empty() => {
                    map.insert(s.to_lowercase(), l.to_lowercase());
                }
                _ => return Err((no + 1, line.to_string())),
            }
        }
        Ok(map)
    }

    pub fn exceptions(&self) -> &BTreeMap<String, String> {
        &self.exceptions
    }

    pub fn lemma(&self, word: &str) -> String {
        let mut current = word.to_lowercase();
        // Every rule shortens the word, so this terminates well before the cap.
        for _ in 0..8 {
            let next = self.step(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    fn step(&self, w: &str) -> String {
        if let Some(l) = self.exceptions.get(w) {
            return l.clone();
        }
        if let Some(stem) = w.strip_suffix("'s") {
            return stem.to_string();
        }
        if let Some(stem) = w.strip_suffix('\'') {
            return stem.to_string();
        }
        let len = w.chars().count();
        if len > 4 {
            if let Some(stem) = w.strip_suffix("ies") {
                let mut s = stem.to_string();
                s.push('y');
                return s;
            }
        }
        if let Some(stem) = w.strip_suffix("sses") {
            let mut s = stem.to_string();
            s.push_str("ss");
            return s;
        }
        if len > 3
            && w.ends_with('s')
            && !w.ends_with("ss")
            && !w.ends_with("us")
            && !w.ends_with("is")
        {
            return w[..w.len() - 1].to_string();
        }
        if let Some(stem) = w.strip_suffix("ing") {
            if stem.chars().count() >= 3 && has_vowel(stem) {
                return undouble(stem);
            }
        }
        if len > 4 {
            if let Some(stem) = w.strip_suffix("ed") {
                if has_vowel(stem) && !stem.ends_with('e') {
                    return undouble(stem);
                }
            }
        }
        w.to_string()
    }
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// "runn" -> "run", "stopp" -> "stop"; l/s/z doubles are kept ("bill", "dress").
fn undouble(stem: &str) -> String {
    let mut chars = stem.chars().rev();
    if let (Some(a), Some(b)) = (chars.next(), chars.next()) {
        if a == b && a.is_ascii_alphabetic() && !is_vowel(a) && !matches!(a, 'l' | 's' | 'z') {
            return stem[..stem.len() - a.len_utf8()].to_string();
        }
    }
    stem.to_string()
}
