//! Document extraction: layout blocks, intent trees and QA pairs.

mod html;
mod markdown;
mod xycut;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{QaId, QaPair, MAX_TURN_DEPTH};

pub use html::{decode_entities, segment_html};
pub use markdown::segment_markdown;
pub use xycut::{segment_positioned, xy_regions, PositionedLine, DEFAULT_MIN_GAP};

/// Heading sizes closer than this are one style.
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.75;
const TOC_MIN_LINES: usize = 3;
const TOC_MAX_LINE_CHARS: usize = 80;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("unbalanced HTML at byte {offset}: {message}")]
    Html { offset: usize, message: String },
    #[error("positioned text line {line}: {message}")]
    Positioned { line: usize, message: String },
    #[error("cannot infer the format of {0:?}")]
    UnknownFormat(String),
    #[error("{name}: {inner}")]
    InSource { name: String, inner: Box<ExtractError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BlockKind {
    Heading,
    Paragraph,
    ListItem,
    TableCell,
    Header,
    Footer,
    TocEntry,
    Caption,
    Other,
}

impl BlockKind {
    /// Page furniture that never reaches a QA answer.
    pub fn is_excluded(self) -> bool {
        matches!(self, BlockKind::Header | BlockKind::Footer | BlockKind::TocEntry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn union(&self, o: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(o.x0),
            y0: self.y0.min(o.y0),
            x1: self.x1.max(o.x1),
            y1: self.y1.max(o.y1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRef {
    pub table: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutBlock {
    pub text: String,
    pub kind: BlockKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    pub order: usize,
    /// Rounded line height, positioned input only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableRef>,
}

impl LayoutBlock {
    pub fn new(kind: BlockKind, text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            kind,
            level: None,
            bbox: None,
            order: 0,
            size: None,
            table: None,
        }
    }

    pub fn heading(text: impl Into<String>, level: u32) -> Self {
        let mut b = Self::new(BlockKind::Heading, text);
        b.level = Some(level.max(1));
        b
    }

    /// Style size used for heading clustering. Markup levels map onto a
    /// descending scale so h1 is the largest.
    fn style_size(&self) -> f64 {
        self.size
            .unwrap_or_else(|| 7.0 - f64::from(self.level.unwrap_or(6)))
    }
}

pub(crate) fn renumber(blocks: &mut [LayoutBlock]) {
    for (i, b) in blocks.iter_mut().enumerate() {
        b.order = i;
    }
}

fn ends_in_page_number(line: &str) -> bool {
    let t = line.trim().trim_end_matches('.');
    let Some((head, last)) = t.rsplit_once(|c: char| c.is_whitespace() || c == '.') else {
        return false;
    };
    !head.trim_matches(|c: char| c == '.' || c.is_whitespace()).is_empty()
        && (1..=4).contains(&last.len())
        && last.bytes().all(|b| b.is_ascii_digit())
}

/// Table-of-contents heuristic: at least three short lines that all end in
/// a page number, or that are all internal links.
pub fn is_toc_run(run: &[&str], internal_link: fn(&str) -> bool) -> bool {
    run.len() >= TOC_MIN_LINES
        && (run.iter().all(|l| l.chars().count() <= TOC_MAX_LINE_CHARS && ends_in_page_number(l))
            || run.iter().all(|l| internal_link(l)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentNode {
    pub title: String,
    pub level: u32,
    pub blocks: Vec<LayoutBlock>,
    pub children: Vec<IntentNode>,
}

impl IntentNode {
    fn new(title: impl Into<String>, level: u32) -> Self {
        Self {
            title: title.into(),
            level,
            blocks: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(IntentNode::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentTree {
    pub root: IntentNode,
}

fn kind_name(k: BlockKind) -> &'static str {
    match k {
        BlockKind::Heading => "heading",
        BlockKind::Paragraph => "paragraph",
        BlockKind::ListItem => "listItem",
        BlockKind::TableCell => "tableCell",
        BlockKind::Header => "header",
        BlockKind::Footer => "footer",
        BlockKind::TocEntry => "tocEntry",
        BlockKind::Caption => "caption",
        BlockKind::Other => "other",
    }
}

impl IntentTree {
    /// Indented text rendering: `title [level]` per node, then its
    /// non-heading blocks as `kind: text`, then its children.
    pub fn outline(&self) -> String {
        fn walk(n: &IntentNode, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            out.push_str(&format!("{pad}{} [{}]\n", n.title, n.level));
            for b in n.blocks.iter().filter(|b| b.kind != BlockKind::Heading) {
                let cell = b.table.map(|t| format!(" {},{}", t.row, t.col)).unwrap_or_default();
                let text = b.text.replace('\n', " / ");
                out.push_str(&format!("{pad}  {}{cell}: {text}\n", kind_name(b.kind)));
            }
            for c in &n.children {
                walk(c, depth + 1, out);
            }
        }
        let mut out = String::new();
        walk(&self.root, 0, &mut out);
        out
    }
}

/// Single-linkage clusters of 1-D sizes, as sorted size groups from the
/// largest down. Consecutive sorted values closer than `threshold` merge.
pub fn cluster_sizes(sizes: &[f64], threshold: f64) -> Vec<Vec<f64>> {
    let mut s: Vec<f64> = sizes.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in s {
        match out.last_mut() {
            Some(c) if c.last().is_some_and(|&p| p - v < threshold) => c.push(v),
            _ => out.push(alloc::vec![v]),
        }
    }
    // In one dimension the chained groups are already ordered by mean.
    out
}

/// Builds the heading hierarchy. Heading levels come from clustering their
/// style sizes; everything else attaches to the nearest preceding heading,
/// or to the root titled `title` when none precedes it.
pub fn build_intent_tree(blocks: &[LayoutBlock], title: &str, threshold: f64) -> IntentTree {
    let sizes: Vec<f64> = blocks
        .iter()
        .filter(|b| b.kind == BlockKind::Heading)
        .map(LayoutBlock::style_size)
        .collect();
    let clusters = cluster_sizes(&sizes, threshold);
    let level_of = |s: f64| {
        clusters
            .iter()
            .position(|c| c.contains(&s))
            .map_or(1, |i| i as u32 + 1)
    };

    // Open path from the root; closed nodes are folded into their parent.
    let mut stack: Vec<IntentNode> = alloc::vec![IntentNode::new(title, 0)];
    let close_top = |stack: &mut Vec<IntentNode>| {
        let done = stack.pop().expect("non-root node");
        stack.last_mut().expect("root stays open").children.push(done);
    };
    for b in blocks {
        if b.kind == BlockKind::Heading {
            let level = level_of(b.style_size());
            while stack.len() > 1 && stack.last().is_some_and(|n| n.level >= level) {
                close_top(&mut stack);
            }
            let mut node = IntentNode::new(b.text.trim(), level);
            node.blocks.push(b.clone());
            stack.push(node);
        } else {
            stack.last_mut().expect("root").blocks.push(b.clone());
        }
    }
    while stack.len() > 1 {
        close_top(&mut stack);
    }
    IntentTree {
        root: stack.pop().expect("root"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractWarning {
    pub source: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Extraction {
    pub trees: Vec<IntentTree>,
    pub qa_pairs: Vec<QaPair>,
    pub warnings: Vec<ExtractWarning>,
}

/// A QA before ids and repeated-title rewriting are settled.
struct Draft {
    doc: usize,
    question: String,
    parent_title: String,
    answer: String,
    parent: Option<usize>,
    qa_depth: usize,
    is_leaf: bool,
}

fn table_rows(cells: &[&LayoutBlock]) -> Vec<Vec<String>> {
    let mut rows: BTreeMap<usize, BTreeMap<usize, String>> = BTreeMap::new();
    for c in cells {
        if let Some(t) = c.table {
            rows.entry(t.row).or_default().insert(t.col, c.text.trim().to_string());
        }
    }
    rows.into_values()
        .map(|r| {
            let width = r.keys().next_back().map_or(0, |m| m + 1);
            (0..width).map(|i| r.get(&i).cloned().unwrap_or_default()).collect()
        })
        .collect()
}

fn render_table(rows: &[Vec<String>]) -> String {
    rows.iter()
        .map(|r| r.iter().filter(|c| !c.is_empty()).cloned().collect::<Vec<_>>().join(" | "))
        .filter(|r| !r.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn question_like(rows: &[Vec<String>]) -> bool {
    let q = rows.iter().filter(|r| r.first().is_some_and(|c| c.ends_with('?'))).count();
    !rows.is_empty() && 2 * q >= rows.len()
}

/// Splits a node's blocks into its own answer text and question-like table
/// rows that become separate QAs.
fn node_answer(node: &IntentNode) -> (String, Vec<(String, String)>) {
    let mut parts: Vec<String> = Vec::new();
    let mut row_qas = Vec::new();
    let mut i = 0;
    let blocks: Vec<&LayoutBlock> = node
        .blocks
        .iter()
        .filter(|b| b.kind != BlockKind::Heading && !b.kind.is_excluded() && !b.text.trim().is_empty())
        .collect();
    while i < blocks.len() {
        let b = blocks[i];
        match b.table {
            Some(t) if b.kind == BlockKind::TableCell => {
                let mut j = i;
                while j < blocks.len() && blocks[j].table.is_some_and(|u| u.table == t.table) {
                    j += 1;
                }
                let rows = table_rows(&blocks[i..j]);
                if question_like(&rows) {
                    for (n, r) in rows.iter().enumerate() {
                        let q = r.first().cloned().unwrap_or_default();
                        // A leading header row is not a question.
                        if n == 0 && !q.ends_with('?') || q.is_empty() {
                            continue;
                        }
                        let a = r[1..].iter().filter(|c| !c.is_empty()).cloned().collect::<Vec<_>>().join(" | ");
                        row_qas.push((q, a));
                    }
                } else {
                    parts.push(render_table(&rows));
                }
                i = j;
            }
            _ => {
                parts.push(b.text.trim().to_string());
                i += 1;
            }
        }
    }
    (parts.join("\n"), row_qas)
}

fn collect_drafts(
    doc: usize,
    node: &IntentNode,
    parent_title: &str,
    parent: Option<usize>,
    parent_depth: usize,
    drafts: &mut Vec<Draft>,
    warnings: &mut Vec<String>,
) {
    let (answer, rows) = node_answer(node);
    let mut me = None;
    let mut depth = parent_depth;
    if !answer.is_empty() {
        let mut p = parent;
        let mut d = parent_depth + 1;
        if d > MAX_TURN_DEPTH {
            // Hang it off the deepest allowed ancestor instead.
            let mut a = parent;
            while let Some(ai) = a {
                if drafts[ai].qa_depth < MAX_TURN_DEPTH {
                    break;
                }
                a = drafts[ai].parent;
            }
            p = a;
            d = a.map_or(1, |ai| drafts[ai].qa_depth + 1);
            warnings.push(format!("{:?} nested deeper than {MAX_TURN_DEPTH} turns; flattened", node.title));
        }
        drafts.push(Draft {
            doc,
            question: node.title.clone(),
            parent_title: parent_title.to_string(),
            answer,
            parent: p,
            qa_depth: d,
            is_leaf: node.children.is_empty(),
        });
        me = Some(drafts.len() - 1);
        depth = d;
    } else if node.children.is_empty() && rows.is_empty() {
        warnings.push(format!("{:?} has no answer content; skipped", node.title));
    }
    for (q, a) in rows {
        let (p, d) = match me {
            Some(m) if depth < MAX_TURN_DEPTH => (Some(m), depth + 1),
            _ => (None, 1),
        };
        drafts.push(Draft {
            doc,
            question: q,
            parent_title: node.title.clone(),
            answer: a,
            parent: p,
            qa_depth: d,
            is_leaf: false,
        });
    }
    for c in &node.children {
        collect_drafts(doc, c, &node.title, me, depth, drafts, warnings);
    }
}

/// QA pairs for a batch of trees, numbered from `first_id` in document
/// order. A node answers with its own non-heading blocks; its parentId is
/// the nearest enclosing node that also answers. Leaf titles seen more than
/// once in the batch get their parent title prefixed.
pub fn tree_to_qa_pairs(batch: &[(&str, &IntentTree)], first_id: QaId) -> (Vec<QaPair>, Vec<ExtractWarning>) {
    let mut drafts = Vec::new();
    let mut warnings = Vec::new();
    for (doc, (name, tree)) in batch.iter().enumerate() {
        let mut msgs = Vec::new();
        collect_drafts(doc, &tree.root, "", None, 0, &mut drafts, &mut msgs);
        warnings.extend(msgs.into_iter().map(|message| ExtractWarning {
            source: name.to_string(),
            message,
        }));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for d in drafts.iter().filter(|d| d.is_leaf) {
        *counts.entry(d.question.trim().to_lowercase()).or_default() += 1;
    }
    let qa_pairs = drafts
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let repeated = d.is_leaf && counts.get(&d.question.trim().to_lowercase()).is_some_and(|&n| n > 1);
            let question = if repeated && !d.parent_title.is_empty() {
                format!("{} {}", d.parent_title, d.question)
            } else {
                d.question.clone()
            };
            let mut qa = QaPair::new(first_id + i as QaId, question, d.answer.clone());
            qa.parent_id = d.parent.map(|p| first_id + p as QaId);
            qa.source = batch[d.doc].0.to_string();
            qa
        })
        .collect();
    (qa_pairs, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Markdown,
    Html,
    /// Tab-separated `x0 y0 x1 y1 text` lines.
    Positioned,
}

impl SourceFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        let ext = name.rsplit_once('.')?.1.to_ascii_lowercase();
        match ext.as_str() {
            "md" | "markdown" => Some(Self::Markdown),
            "html" | "htm" => Some(Self::Html),
            "txt" | "tsv" | "pos" => Some(Self::Positioned),
            _ => None,
        }
    }
}

/// Reads positioned lines; blank lines and `#` comments are skipped.
pub fn parse_positioned_tsv(src: &str) -> Result<Vec<PositionedLine>, ExtractError> {
    let mut out = Vec::new();
    for (n, raw) in src.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ExtractError::Positioned { line: n + 1, message };
        let f: Vec<&str> = line.splitn(5, '\t').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 tab-separated fields, got {}", f.len())));
        }
        let mut c = [0.0; 4];
        for (k, v) in f[..4].iter().enumerate() {
            c[k] = v
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("bad coordinate {v:?}")))?;
        }
        if c[2] < c[0] || c[3] < c[1] {
            return Err(err("inverted bounding box".into()));
        }
        out.push(PositionedLine {
            bbox: BBox { x0: c[0], y0: c[1], x1: c[2], y1: c[3] },
            text: f[4].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub name: String,
    pub format: SourceFormat,
    pub content: String,
}

impl SourceDocument {
    pub fn new(name: impl Into<String>, content: impl Into<String>) -> Result<Self, ExtractError> {
        let name = name.into();
        let format = SourceFormat::from_name(&name).ok_or_else(|| ExtractError::UnknownFormat(name.clone()))?;
        Ok(Self {
            name,
            format,
            content: content.into(),
        })
    }
}

/// Blocks and document title of one source.
pub fn segment(doc: &SourceDocument) -> Result<(Vec<LayoutBlock>, Option<String>), ExtractError> {
    match doc.format {
        SourceFormat::Markdown => Ok((segment_markdown(&doc.content), None)),
        SourceFormat::Html => segment_html(&doc.content),
        SourceFormat::Positioned => Ok((segment_positioned(&parse_positioned_tsv(&doc.content)?, DEFAULT_MIN_GAP), None)),
    }
}

/// Extracts every document of one batch. Any failing source fails the
/// batch, tagged with its name.
pub fn extract_batch(docs: &[SourceDocument], first_id: QaId) -> Result<Extraction, ExtractError> {
    let mut trees = Vec::with_capacity(docs.len());
    for d in docs {
        let (blocks, title) = segment(d).map_err(|e| ExtractError::InSource {
            name: d.name.clone(),
            inner: Box::new(e),
        })?;
        let title = title.filter(|t| !t.trim().is_empty()).unwrap_or_else(|| d.name.clone());
        trees.push(build_intent_tree(&blocks, &title, DEFAULT_CLUSTER_THRESHOLD));
    }
    let named: Vec<(&str, &IntentTree)> = docs.iter().map(|d| d.name.as_str()).zip(trees.iter()).collect();
    let (qa_pairs, warnings) = tree_to_qa_pairs(&named, first_id);
    Ok(Extraction {
        trees,
        qa_pairs,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn sized(text: &str, size: f64) -> LayoutBlock {
        let mut b = LayoutBlock::heading(text, 1);
        b.size = Some(size);
        b
    }

    fn para(text: &str) -> LayoutBlock {
        LayoutBlock::new(BlockKind::Paragraph, text)
    }

    /// Brute force: two points share a cluster iff a chain of steps each
    /// below the threshold connects them.
    fn brute_clusters(sizes: &[f64], t: f64) -> Vec<usize> {
        let n = sizes.len();
        let mut label: Vec<usize> = (0..n).collect();
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if (sizes[i] - sizes[j]).abs() < t && label[j] < label[i] {
                        label[i] = label[j];
                        changed = true;
                    }
                }
            }
            if !changed {
                return label;
            }
        }
    }

    #[test]
    fn five_headings_two_levels() {
        let sizes = [18.0, 18.0, 14.0, 14.0, 14.0];
        let c = cluster_sizes(&sizes, DEFAULT_CLUSTER_THRESHOLD);
        assert_eq!(c, vec![vec![18.0, 18.0], vec![14.0, 14.0, 14.0]]);
        let brute = brute_clusters(&sizes, DEFAULT_CLUSTER_THRESHOLD);
        assert_eq!(brute, [0, 0, 2, 2, 2]);

        let blocks = vec![sized("A", 18.0), sized("a1", 14.0), sized("a2", 14.0), sized("B", 18.0), sized("b1", 14.0)];
        let t = build_intent_tree(&blocks, "doc", DEFAULT_CLUSTER_THRESHOLD);
        assert_eq!(t.root.children.len(), 2);
        assert_eq!(t.root.children[0].level, 1);
        assert_eq!(t.root.children[0].children.len(), 2);
    }

    proptest! {
        #[test]
        fn clustering_matches_brute_force(sizes in proptest::collection::vec((16u32..60).prop_map(|h| f64::from(h) / 2.0), 1..12)) {
            let c = cluster_sizes(&sizes, DEFAULT_CLUSTER_THRESHOLD);
            let brute = brute_clusters(&sizes, DEFAULT_CLUSTER_THRESHOLD);
            let cluster_of = |s: f64| c.iter().position(|g| g.contains(&s)).unwrap();
            for i in 0..sizes.len() {
                for j in 0..sizes.len() {
                    prop_assert_eq!(brute[i] == brute[j], cluster_of(sizes[i]) == cluster_of(sizes[j]));
                }
            }
        }
    }

    #[test]
    fn markup_levels_and_single_heading() {
        let b = segment_markdown("# Top\nintro\n## One\nx\n## Two\ny\n");
        let t = build_intent_tree(&b, "doc", DEFAULT_CLUSTER_THRESHOLD);
        assert_eq!(t.root.children.len(), 1);
        let top = &t.root.children[0];
        assert_eq!((top.level, top.children.len()), (1, 2));
        assert!(top.children.iter().all(|c| c.level == 2));

        let b = segment_markdown("# Only\np1\n\np2\n");
        let t = build_intent_tree(&b, "doc", DEFAULT_CLUSTER_THRESHOLD);
        assert_eq!(t.root.depth(), 2);
        assert_eq!(t.root.children[0].blocks.len(), 3);
    }

    #[test]
    fn no_headings_roots_at_title() {
        let t = build_intent_tree(&[para("hello")], "faq.md", DEFAULT_CLUSTER_THRESHOLD);
        assert_eq!(t.root.title, "faq.md");
        assert!(t.root.children.is_empty());
        let (qas, _) = tree_to_qa_pairs(&[("faq.md", &t)], 1);
        assert_eq!(qas[0].question, "faq.md");
    }

    #[test]
    fn repeated_leaves_get_parent_prefix() {
        let b = segment_markdown("# Know about XYZ\nXYZ is a plan.\n## Benefits\nCheap.\n# Know about ABC\nABC is a plan.\n## Benefits\nFast.\n");
        let t = build_intent_tree(&b, "d", DEFAULT_CLUSTER_THRESHOLD);
        let (qas, w) = tree_to_qa_pairs(&[("d.md", &t)], 10);
        assert!(w.is_empty());
        let qs: Vec<&str> = qas.iter().map(|q| q.question.as_str()).collect();
        assert_eq!(qs, ["Know about XYZ", "Know about XYZ Benefits", "Know about ABC", "Know about ABC Benefits"]);
        assert_eq!(qas[1].parent_id, Some(10));
        assert_eq!(qas[3].parent_id, Some(12));
    }

    #[test]
    fn refunds_leaf_and_empty_leaf() {
        let t = build_intent_tree(&segment_markdown("# Refunds\nWithin 30 days.\n# Empty\n"), "d", DEFAULT_CLUSTER_THRESHOLD);
        let (qas, w) = tree_to_qa_pairs(&[("d.md", &t)], 1);
        assert_eq!(qas.len(), 1);
        assert_eq!((qas[0].question.as_str(), qas[0].answer.as_str()), ("Refunds", "Within 30 days."));
        assert_eq!(w.len(), 1);
        assert!(w[0].message.contains("Empty"));
    }

    #[test]
    fn question_table_becomes_rows() {
        let src = "# Payments\n| Question | Answer |\n|---|---|\n| Can I pay by card? | Yes |\n| Do you take cash? | No |\n\n# Sizes\n| Item | Width |\n|---|---|\n| Sofa | 200 |\n";
        let t = build_intent_tree(&segment_markdown(src), "d", DEFAULT_CLUSTER_THRESHOLD);
        let (qas, _) = tree_to_qa_pairs(&[("d.md", &t)], 1);
        let pairs: Vec<(&str, &str)> = qas.iter().map(|q| (q.question.as_str(), q.answer.as_str())).collect();
        assert_eq!(
            pairs,
            [("Can I pay by card?", "Yes"), ("Do you take cash?", "No"), ("Sizes", "Item | Width\nSofa | 200")]
        );
    }

    #[test]
    fn deep_chains_are_flattened() {
        let t = build_intent_tree(&segment_markdown("# A\na\n## B\nb\n### C\nc\n#### D\nd\n"), "d", DEFAULT_CLUSTER_THRESHOLD);
        let (qas, w) = tree_to_qa_pairs(&[("d.md", &t)], 1);
        assert_eq!(qas.iter().map(|q| q.parent_id).collect::<Vec<_>>(), [None, Some(1), Some(2), Some(2)]);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn toc_heuristic() {
        assert!(is_toc_run(&["Intro 1", "Pricing .... 3", "Returns 12"], |_| false));
        assert!(!is_toc_run(&["Intro 1", "Pricing 3"], |_| false));
        assert!(!is_toc_run(&["We have 3", "stores in 5", "cities"], |_| false));
    }

    #[test]
    fn nav_excluded_and_lossless() {
        let src = "<html><body><nav><a href=\"/\">Home</a> <a href=\"/a\">A</a> <a href=\"/b\">B</a> <a href=\"/c\">C</a> <a href=\"/d\">D</a></nav>\
                   <h1>Delivery</h1><p>Two weeks.</p><h1>Returns</h1><p>30 days.</p><p>Keep the receipt.</p><footer>Copyright</footer></body></html>";
        let doc = SourceDocument::new("faq.html", src).unwrap();
        let ex = extract_batch(&[doc.clone()], 1).unwrap();
        assert_eq!(ex.qa_pairs.len(), 2);
        assert!(ex.qa_pairs.iter().all(|q| !q.answer.contains("Home") && !q.answer.contains("Copyright")));
        let (blocks, _) = segment(&doc).unwrap();
        for p in blocks.iter().filter(|b| b.kind == BlockKind::Paragraph) {
            assert_eq!(ex.qa_pairs.iter().filter(|q| q.answer.contains(&p.text)).count(), 1);
        }
        assert_eq!(extract_batch(&[doc], 1).unwrap(), ex);
    }

    #[test]
    fn batch_errors_name_the_source() {
        let bad = SourceDocument::new("x.html", "<div>").unwrap();
        let e = extract_batch(&[bad], 1).unwrap_err();
        assert!(matches!(e, ExtractError::InSource { ref name, .. } if name == "x.html"));
        assert!(SourceDocument::new("x.pdf", "").is_err());
        assert!(parse_positioned_tsv("1\t2\t3\n").is_err());
        assert_eq!(parse_positioned_tsv("# c\n0\t0\t10\t10\thi\n").unwrap().len(), 1);
    }
}
