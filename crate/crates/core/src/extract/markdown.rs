//! Line-oriented Markdown block reader: ATX headings, lists, pipe tables,
//! fenced code and paragraphs.

use alloc::string::String;
use alloc::vec::Vec;

use super::{is_toc_run, BlockKind, LayoutBlock, TableRef};

fn atx_heading(line: &str) -> Option<(u32, String)> {
    let t = line.trim_start();
    let hashes = t.bytes().take_while(|&b| b == b'#').count();
    if !(1..=6).contains(&hashes) {
        return None;
    }
    let rest = &t[hashes..];
    if !rest.is_empty() && !rest.starts_with(' ') && !rest.starts_with('\t') {
        return None;
    }
    let text = rest.trim().trim_end_matches('#').trim_end();
    Some((hashes as u32, inline_text(text)))
}

fn list_item(line: &str) -> Option<&str> {
    let t = line.trim_start();
    for m in ["- ", "* ", "+ "] {
        if let Some(rest) = t.strip_prefix(m) {
            return Some(rest);
        }
    }
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return Some(r);
        }
    }
    None
}

fn table_cells(line: &str) -> Option<Vec<String>> {
    let t = line.trim();
    if t.len() < 2 || !t.starts_with('|') || !t.ends_with('|') {
        return None;
    }
    Some(t[1..t.len() - 1].split('|').map(|c| inline_text(c.trim())).collect())
}

fn is_separator_row(cells: &[String]) -> bool {
    cells
        .iter()
        .all(|c| !c.is_empty() && c.chars().all(|ch| matches!(ch, '-' | ':' | ' ')))
}

/// Whether the whole line is one `[text](#anchor)` link.
pub(super) fn internal_link(line: &str) -> bool {
    let t = line.trim();
    let Some(rest) = t.strip_prefix('[') else {
        return false;
    };
    let Some(close) = rest.find("](") else {
        return false;
    };
    let target = &rest[close + 2..];
    target.starts_with('#') && target.ends_with(')') && !target[..target.len() - 1].contains(')')
}

/// Strips emphasis markers, code ticks and link targets.
pub(super) fn inline_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '*' | '`' => {}
            '_' if i == 0
                || i + 1 == chars.len()
                || !chars[i - 1].is_alphanumeric()
                || !chars[i + 1].is_alphanumeric() => {}
            '!' if chars.get(i + 1) == Some(&'[') => {}
            ']' if chars.get(i + 1) == Some(&'(') => {
                // Skip "(target)".
                let mut depth = 0;
                let mut j = i + 1;
                while j < chars.len() {
                    match chars[j] {
                        '(' => depth += 1,
                        ')' => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    j += 1;
                }
                i = j;
            }
            '[' => {}
            _ => out.push(c),
        }
        i += 1;
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Line {
    Blank,
    Heading,
    Item,
    Table,
    Fence,
    Text,
}

fn classify(line: &str) -> Line {
    let t = line.trim();
    if t.is_empty() {
        Line::Blank
    } else if t.starts_with("```") || t.starts_with("~~~") {
        Line::Fence
    } else if atx_heading(line).is_some() {
        Line::Heading
    } else if table_cells(line).is_some() {
        Line::Table
    } else if list_item(line).is_some() {
        Line::Item
    } else {
        Line::Text
    }
}

/// Parses Markdown into layout blocks in document order.
pub fn segment_markdown(src: &str) -> Vec<LayoutBlock> {
    let lines: Vec<&str> = src.lines().map(|l| l.trim_end_matches('\r')).collect();
    let kinds: Vec<Line> = lines.iter().map(|l| classify(l)).collect();
    let toc = toc_lines(&lines, &kinds);
    let mut blocks = Vec::new();
    let mut tables = 0;
    let mut i = 0;
    while i < lines.len() {
        if toc[i] {
            let text = match list_item(lines[i]) {
                Some(rest) => inline_text(rest),
                None => inline_text(lines[i].trim()),
            };
            blocks.push(LayoutBlock::new(BlockKind::TocEntry, text));
            i += 1;
            continue;
        }
        match kinds[i] {
            Line::Blank => i += 1,
            Line::Heading => {
                let (level, text) = atx_heading(lines[i]).expect("classified as heading");
                blocks.push(LayoutBlock::heading(text, level));
                i += 1;
            }
            Line::Item => {
                let mut text = String::from(list_item(lines[i]).expect("classified as item"));
                i += 1;
                // Lazy continuation lines belong to the item.
                while i < lines.len() && kinds[i] == Line::Text && !toc[i] && lines[i].starts_with(char::is_whitespace) {
                    text.push(' ');
                    text.push_str(lines[i].trim());
                    i += 1;
                }
                blocks.push(LayoutBlock::new(BlockKind::ListItem, inline_text(&text)));
            }
            Line::Table => {
                let mut row = 0;
                while i < lines.len() && kinds[i] == Line::Table && !toc[i] {
                    let cells = table_cells(lines[i]).expect("classified as table");
                    i += 1;
                    if is_separator_row(&cells) {
                        continue;
                    }
                    for (col, c) in cells.into_iter().enumerate() {
                        let mut b = LayoutBlock::new(BlockKind::TableCell, c);
                        b.table = Some(TableRef { table: tables, row, col });
                        blocks.push(b);
                    }
                    row += 1;
                }
                tables += 1;
            }
            Line::Fence => {
                let fence = &lines[i].trim()[..3];
                let mut body = Vec::new();
                i += 1;
                while i < lines.len() && !lines[i].trim().starts_with(fence) {
                    body.push(lines[i]);
                    i += 1;
                }
                i += 1;
                let text = body.join("\n");
                if !text.trim().is_empty() {
                    blocks.push(LayoutBlock::new(BlockKind::Paragraph, text));
                }
            }
            Line::Text => {
                let mut parts = Vec::new();
                while i < lines.len() && kinds[i] == Line::Text && !toc[i] {
                    parts.push(lines[i].trim());
                    i += 1;
                }
                blocks.push(LayoutBlock::new(BlockKind::Paragraph, inline_text(&parts.join(" "))));
            }
        }
    }
    blocks.retain(|b| !b.text.is_empty());
    super::renumber(&mut blocks);
    blocks
}

/// Marks runs of table-of-contents lines.
fn toc_lines(lines: &[&str], kinds: &[Line]) -> Vec<bool> {
    let mut toc = alloc::vec![false; lines.len()];
    let mut i = 0;
    while i < lines.len() {
        if !matches!(kinds[i], Line::Text | Line::Item) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < lines.len() && matches!(kinds[j], Line::Text | Line::Item) {
            j += 1;
        }
        let run: Vec<&str> = lines[i..j]
            .iter()
            .map(|l| list_item(l).unwrap_or(l.trim()))
            .collect();
        if is_toc_run(&run, internal_link) {
            toc[i..j].iter_mut().for_each(|t| *t = true);
        }
        i = j;
    }
    toc
}
