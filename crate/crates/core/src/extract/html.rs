//! Minimal tag-balanced HTML reader producing layout blocks.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{is_toc_run, BlockKind, ExtractError, LayoutBlock, TableRef};

const VOID: [&str; 14] = [
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track", "wbr",
];
const RAW_TEXT: [&str; 2] = ["script", "style"];

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Element {
        name: String,
        attrs: Vec<(String, String)>,
        children: Vec<Node>,
    },
    Text(String),
}

impl Node {
    fn attr(&self, key: &str) -> Option<&str> {
        match self {
            Node::Element { attrs, .. } => attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()),
            Node::Text(_) => None,
        }
    }

    fn text(&self, out: &mut String) {
        match self {
            Node::Text(t) => out.push_str(t),
            Node::Element { name, children, .. } => {
                if name == "br" {
                    out.push(' ');
                }
                for c in children {
                    c.text(out);
                }
            }
        }
    }

    fn collapsed_text(&self) -> String {
        let mut s = String::new();
        self.text(&mut s);
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Decodes the common named entities and numeric references.
pub fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let end = tail[..tail.len().min(12)].find(';');
        let decoded = end.and_then(|e| {
            let name = &tail[1..e];
            let ch = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                "mdash" => Some('\u{2014}'),
                "ndash" => Some('\u{2013}'),
                "rsquo" => Some('\u{2019}'),
                "lsquo" => Some('\u{2018}'),
                "hellip" => Some('\u{2026}'),
                _ => name
                    .strip_prefix("#x")
                    .or_else(|| name.strip_prefix("#X"))
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .or_else(|| name.strip_prefix('#').and_then(|d| d.parse().ok()))
                    .and_then(char::from_u32),
            };
            ch.map(|c| (c, e))
        });
        match decoded {
            Some((c, e)) => {
                out.push(c);
                rest = &tail[e + 1..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn parse_attrs(src: &str) -> Vec<(String, String)> {
    let mut attrs = Vec::new();
    let b = src.as_bytes();
    let mut i = 0;
    while i < b.len() {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b'/') {
            i += 1;
        }
        let start = i;
        while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'=' && b[i] != b'/' {
            i += 1;
        }
        if start == i {
            break;
        }
        let key = src[start..i].to_ascii_lowercase();
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < b.len() && b[i] == b'=' {
            i += 1;
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < b.len() && (b[i] == b'"' || b[i] == b'\'') {
                let q = b[i];
                let vs = i + 1;
                i = vs;
                while i < b.len() && b[i] != q {
                    i += 1;
                }
                value = decode_entities(&src[vs..i]);
                i += 1;
            } else {
                let vs = i;
                while i < b.len() && !b[i].is_ascii_whitespace() {
                    i += 1;
                }
                value = decode_entities(&src[vs..i]);
            }
        }
        attrs.push((key, value));
    }
    attrs
}

struct Open {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    offset: usize,
}

/// Parses into a forest, requiring every non-void element to be closed.
fn parse(src: &str) -> Result<(Vec<Node>, Option<String>), ExtractError> {
    let mut stack: Vec<Open> = Vec::new();
    let mut roots: Vec<Node> = Vec::new();
    let mut title: Option<String> = None;
    let push = |stack: &mut Vec<Open>, roots: &mut Vec<Node>, n: Node| match stack.last_mut() {
        Some(top) => top.children.push(n),
        None => roots.push(n),
    };
    let mut i = 0;
    while i < src.len() {
        let rest = &src[i..];
        if !rest.starts_with('<') {
            let end = rest.find('<').unwrap_or(rest.len());
            let text = decode_entities(&rest[..end]);
            if !text.is_empty() {
                push(&mut stack, &mut roots, Node::Text(text));
            }
            i += end;
            continue;
        }
        if rest.starts_with("<!--") {
            i += rest.find("-->").map_or(rest.len(), |e| e + 3);
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            i += rest.find('>').map_or(rest.len(), |e| e + 1);
            continue;
        }
        let Some(close) = rest.find('>') else {
            return Err(ExtractError::Html {
                offset: i,
                message: "unterminated tag".into(),
            });
        };
        let inner = &rest[1..close];
        let tag_end = i + close + 1;
        if let Some(name) = inner.strip_prefix('/') {
            let name = name.trim().to_ascii_lowercase();
            if VOID.contains(&name.as_str()) {
                i = tag_end;
                continue;
            }
            match stack.iter().rposition(|o| o.name == name) {
                Some(pos) if pos + 1 == stack.len() => {
                    let o = stack.pop().expect("non-empty");
                    if o.name == "title" {
                        let n = Node::Element { name: o.name.clone(), attrs: Vec::new(), children: o.children.clone() };
                        title = Some(n.collapsed_text());
                    }
                    let node = Node::Element {
                        name: o.name,
                        attrs: o.attrs,
                        children: o.children,
                    };
                    push(&mut stack, &mut roots, node);
                }
                Some(pos) => {
                    let o = &stack[pos + 1];
                    return Err(ExtractError::Html {
                        offset: o.offset,
                        message: alloc::format!("<{}> is never closed", o.name),
                    });
                }
                None => {
                    return Err(ExtractError::Html {
                        offset: i,
                        message: alloc::format!("</{name}> has no matching open tag"),
                    })
                }
            }
            i = tag_end;
            continue;
        }
        let self_closing = inner.ends_with('/');
        let body = inner.trim_end_matches('/');
        let name_end = body.find(|c: char| c.is_ascii_whitespace()).unwrap_or(body.len());
        let name = body[..name_end].to_ascii_lowercase();
        let attrs = parse_attrs(&body[name_end..]);
        if self_closing || VOID.contains(&name.as_str()) {
            push(&mut stack, &mut roots, Node::Element { name, attrs, children: Vec::new() });
            i = tag_end;
            continue;
        }
        if RAW_TEXT.contains(&name.as_str()) {
            let closing = alloc::format!("</{name}");
            let lower = src[tag_end..].to_ascii_lowercase();
            let Some(end) = lower.find(&closing) else {
                return Err(ExtractError::Html {
                    offset: i,
                    message: alloc::format!("<{name}> is never closed"),
                });
            };
            let after = tag_end + end;
            i = after + src[after..].find('>').map_or(src.len() - after, |e| e + 1);
            continue;
        }
        stack.push(Open {
            name,
            attrs,
            children: Vec::new(),
            offset: i,
        });
        i = tag_end;
    }
    if let Some(o) = stack.first() {
        return Err(ExtractError::Html {
            offset: o.offset,
            message: alloc::format!("<{}> is never closed", o.name),
        });
    }
    Ok((roots, title))
}

struct Walker {
    blocks: Vec<LayoutBlock>,
    tables: usize,
    table: Option<(usize, usize, usize)>,
}

impl Walker {
    fn emit(&mut self, kind: BlockKind, text: String, level: Option<u32>) {
        if text.is_empty() {
            return;
        }
        let mut b = match level {
            Some(l) => LayoutBlock::heading(text, l),
            None => LayoutBlock::new(kind, text),
        };
        if kind != BlockKind::Heading {
            b.kind = kind;
        }
        self.blocks.push(b);
    }

    fn walk(&mut self, nodes: &[Node], zone: Option<BlockKind>) {
        let mut loose = String::new();
        for n in nodes {
            match n {
                Node::Text(t) => loose.push_str(t),
                Node::Element { name, children, .. } => {
                    let inline = matches!(
                        name.as_str(),
                        "a" | "b" | "strong" | "em" | "i" | "span" | "code" | "small" | "sup" | "sub" | "br" | "u" | "abbr" | "mark"
                    );
                    if inline {
                        n.text(&mut loose);
                        continue;
                    }
                    self.flush(&mut loose, zone);
                    self.element(n, name, children, zone);
                }
            }
        }
        self.flush(&mut loose, zone);
    }

    fn flush(&mut self, loose: &mut String, zone: Option<BlockKind>) {
        let text = loose.split_whitespace().collect::<Vec<_>>().join(" ");
        loose.clear();
        self.emit(zone.unwrap_or(BlockKind::Paragraph), text, None);
    }

    fn element(&mut self, n: &Node, name: &str, children: &[Node], zone: Option<BlockKind>) {
        let text = || n.collapsed_text();
        match name {
            "head" | "title" | "template" | "noscript" => {}
            "nav" | "header" => self.walk(children, Some(zone.unwrap_or(BlockKind::Header))),
            "footer" => self.walk(children, Some(zone.unwrap_or(BlockKind::Footer))),
            "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
                let level = (name.as_bytes()[1] - b'0') as u32;
                match zone {
                    Some(z) => self.emit(z, text(), None),
                    None => self.emit(BlockKind::Heading, text(), Some(level)),
                }
            }
            "p" | "pre" | "blockquote" | "dt" | "dd" => self.emit(zone.unwrap_or(BlockKind::Paragraph), text(), None),
            "caption" | "figcaption" => self.emit(zone.unwrap_or(BlockKind::Caption), text(), None),
            "ul" | "ol" => {
                let items: Vec<&Node> = children
                    .iter()
                    .filter(|c| matches!(c, Node::Element { name, .. } if name == "li"))
                    .collect();
                let texts: Vec<String> = items.iter().map(|c| c.collapsed_text()).collect();
                let lines: Vec<&str> = texts.iter().map(String::as_str).collect();
                let toc = is_toc_run(&lines, |_| false) || (items.len() >= 3 && items.iter().all(|c| is_internal_link_item(c)));
                let zone = zone.or(toc.then_some(BlockKind::TocEntry));
                self.walk(children, zone);
            }
            "li" => {
                // Nested lists become their own items.
                let (own, nested): (Vec<&Node>, Vec<&Node>) = children
                    .iter()
                    .partition(|c| !matches!(c, Node::Element { name, .. } if name == "ul" || name == "ol"));
                let mut s = String::new();
                for c in own {
                    c.text(&mut s);
                }
                let t = s.split_whitespace().collect::<Vec<_>>().join(" ");
                self.emit(zone.unwrap_or(BlockKind::ListItem), t, None);
                for c in nested {
                    if let Node::Element { name, children, .. } = c {
                        self.element(c, name, children, zone);
                    }
                }
            }
            "table" => {
                let id = self.tables;
                self.tables += 1;
                let saved = self.table.replace((id, 0, 0));
                self.walk(children, zone);
                self.table = saved;
            }
            "tr" => {
                let (id, row, _) = self.table.unwrap_or((self.tables, 0, 0));
                self.table = Some((id, row, 0));
                self.walk(children, zone);
                self.table = Some((id, row + 1, 0));
            }
            "td" | "th" => {
                let t = text();
                match (self.table, zone) {
                    (Some((id, row, col)), None) => {
                        // Empty cells still advance the column.
                        let mut b = LayoutBlock::new(BlockKind::TableCell, t);
                        b.table = Some(TableRef { table: id, row, col });
                        if !b.text.is_empty() {
                            self.blocks.push(b);
                        }
                        self.table = Some((id, row, col + 1));
                    }
                    (_, z) => self.emit(z.unwrap_or(BlockKind::Paragraph), t, None),
                }
            }
            _ => self.walk(children, zone),
        }
    }
}

fn is_internal_link_item(li: &Node) -> bool {
    let Node::Element { children, .. } = li else {
        return false;
    };
    let meaningful: Vec<&Node> = children
        .iter()
        .filter(|c| !matches!(c, Node::Text(t) if t.trim().is_empty()))
        .collect();
    matches!(meaningful.as_slice(), [a @ Node::Element { name, .. }] if name == "a" && a.attr("href").is_some_and(|h| h.starts_with('#')))
}

/// Blocks of an HTML document and its `<title>`, if any. Unbalanced markup
/// fails with the byte offset of the first unmatched tag.
pub fn segment_html(src: &str) -> Result<(Vec<LayoutBlock>, Option<String>), ExtractError> {
    let (nodes, title) = parse(src)?;
    let mut w = Walker {
        blocks: Vec::new(),
        tables: 0,
        table: None,
    };
    w.walk(&nodes, None);
    super::renumber(&mut w.blocks);
    Ok((w.blocks, title.map(|t| t.to_string())))
}
