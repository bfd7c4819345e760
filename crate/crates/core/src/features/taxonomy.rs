use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::hash::provenance_hash;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("malformed taxonomy line {line}: {content:?}")]
    Malformed { line: usize, content: String },
    #[error("taxonomy cycle through {0:?}")]
    Cycle(String),
}

/// Hypernym DAG with precomputed ancestor distances and root depths.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    ids: BTreeMap<String, usize>,
    words: Vec<String>,
    hypernyms: Vec<Vec<usize>>,
    /// Per word: (ancestor id, shortest upward distance), sorted by id; includes self at 0.
    ancestors: Vec<Vec<(usize, u32)>>,
    /// Shortest distance from any root, roots at 1.
    depth: Vec<u32>,
    hash: String,
}

impl Taxonomy {
    /// Parses `word TAB hypernym` lines; `#` comments and blank lines are ignored.
    pub fn parse(src: &str) -> Result<Self, TaxonomyError> {
        let mut edges = Vec::new();
        for (no, raw) in src.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(w), Some(h), None) if !w.trim().is_empty() && !h.trim().is_empty() => {
                    edges.push((w.trim().to_lowercase(), h.trim().to_lowercase()));
                }
                _ => {
                    return Err(TaxonomyError::Malformed {
                        line: no + 1,
                        content: line.to_string(),
                    })
                }
            }
        }
        let mut t = Self::from_edges(edges)?;
        t.hash = provenance_hash(src);
        Ok(t)
    }

    pub fn from_edges<I, S>(edges: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut ids: BTreeMap<String, usize> = BTreeMap::new();
        let mut words = Vec::new();
        let mut intern = |w: String, words: &mut Vec<String>| -> usize {
            *ids.entry(w.clone()).or_insert_with(|| {
                words.push(w);
                words.len() - 1
            })
        };
        let mut pairs = Vec::new();
        for (w, h) in edges {
            let w = intern(w.into(), &mut words);
            let h = intern(h.into(), &mut words);
            pairs.push((w, h));
        }
        let mut hypernyms = vec![Vec::new(); words.len()];
        for (w, h) in pairs {
            if !hypernyms[w].contains(&h) {
                hypernyms[w].push(h);
            }
        }
        for hs in &mut hypernyms {
            hs.sort_unstable();
        }
        check_acyclic(&hypernyms, &words)?;

        let ancestors: Vec<Vec<(usize, u32)>> =
            (0..words.len()).map(|w| upward_bfs(&hypernyms, w)).collect();
        let depth = ancestors
            .iter()
            .map(|anc| {
                anc.iter()
                    .filter(|(a, _)| hypernyms[*a].is_empty())
                    .map(|(_, d)| d + 1)
                    .min()
                    .unwrap_or(1)
            })
            .collect();
        let ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self {
            ids,
            words,
            hypernyms,
            ancestors,
            depth,
            hash: String::new(),
        })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn hypernyms(&self, word: &str) -> Vec<&str> {
        self.ids.get(word).map_or_else(Vec::new, |&i| {
            self.hypernyms[i].iter().map(|&h| self.words[h].as_str()).collect()
        })
    }

    pub fn roots(&self) -> BTreeSet<&str> {
        (0..self.words.len())
            .filter(|&i| self.hypernyms[i].is_empty())
            .map(|i| self.words[i].as_str())
            .collect()
    }

    /// Root depth is 1.
    pub fn depth(&self, word: &str) -> Option<u32> {
        self.ids.get(word).map(|&i| self.depth[i])
    }

    /// Provenance pin of the source text (empty when built from edges).
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// `depth(LCH) / (depth(LCH) + d(w1, LCH) + d(w2, LCH))`, maximized over
    /// common hypernyms; 1 for identical words, 0 when unrelated or unknown.
    pub fn word_sim(&self, w1: &str, w2: &str) -> f64 {
        if w1 == w2 {
            return 1.0;
        }
        let (Some(&a), Some(&b)) = (self.ids.get(w1), self.ids.get(w2)) else {
            return 0.0;
        };
        let (xs, ys) = (&self.ancestors[a], &self.ancestors[b]);
        let (mut i, mut j) = (0, 0);
        let mut best = 0.0f64;
        while i < xs.len() && j < ys.len() {
            match xs[i].0.cmp(&ys[j].0) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    let depth = self.depth[xs[i].0] as f64;
                    let sim = depth / (depth + xs[i].1 as f64 + ys[j].1 as f64);
                    best = best.max(sim);
                    i += 1;
                    j += 1;
                }
            }
        }
        best
    }
}

fn upward_bfs(hypernyms: &[Vec<usize>], start: usize) -> Vec<(usize, u32)> {
    let mut dist: BTreeMap<usize, u32> = BTreeMap::new();
    let mut queue = VecDeque::new();
    dist.insert(start, 0);
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for &h in &hypernyms[u] {
            if !dist.contains_key(&h) {
                dist.insert(h, d + 1);
                queue.push_back(h);
            }
        }
    }
    dist.into_iter().collect()
}

fn check_acyclic(hypernyms: &[Vec<usize>], words: &[String]) -> Result<(), TaxonomyError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; hypernyms.len()];
    for start in 0..hypernyms.len() {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if let Some(&h) = hypernyms[u].get(*next) {
                *next += 1;
                match state[h] {
                    0 => {
                        state[h] = 1;
                        stack.push((h, 0));
                    }
                    1 => return Err(TaxonomyError::Cycle(words[h].clone())),
                    _ => {}
                }
            } else {
                state[u] = 2;
                stack.pop();
            }
        }
    }
    Ok(())
}
