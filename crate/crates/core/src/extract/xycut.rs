//! Recursive X-Y cut over positioned text lines.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{BBox, BlockKind, LayoutBlock};

pub const DEFAULT_MIN_GAP: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionedLine {
    pub bbox: BBox,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    /// Cut across y: top part first.
    Horizontal,
    /// Cut across x: left part first.
    Vertical,
}

/// Widest empty band in the projection of `spans`, as (width, cut position).
fn widest_gap(mut spans: Vec<(f64, f64)>) -> Option<(f64, f64)> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut best: Option<(f64, f64)> = None;
    let mut reach = spans.first()?.1;
    for &(lo, hi) in &spans[1..] {
        if lo > reach {
            let width = lo - reach;
            if best.map_or(true, |b| width > b.0) {
                best = Some((width, reach + width / 2.0));
            }
        }
        reach = reach.max(hi);
    }
    best
}

fn cut(lines: &[PositionedLine], region: Vec<usize>, min_gap: f64, out: &mut Vec<Vec<usize>>) {
    let ys = region.iter().map(|&i| (lines[i].bbox.y0, lines[i].bbox.y1)).collect();
    let xs = region.iter().map(|&i| (lines[i].bbox.x0, lines[i].bbox.x1)).collect();
    let h = widest_gap(ys).filter(|g| g.0 >= min_gap);
    let v = widest_gap(xs).filter(|g| g.0 >= min_gap);
    let choice = match (h, v) {
        (Some(h), Some(v)) if v.0 > h.0 => Some((Axis::Vertical, v.1)),
        (Some(h), _) => Some((Axis::Horizontal, h.1)),
        (None, Some(v)) => Some((Axis::Vertical, v.1)),
        (None, None) => None,
    };
    let Some((axis, at)) = choice else {
        out.push(region);
        return;
    };
    let (first, second): (Vec<usize>, Vec<usize>) = region.into_iter().partition(|&i| match axis {
        Axis::Horizontal => lines[i].bbox.y1 <= at,
        Axis::Vertical => lines[i].bbox.x1 <= at,
    });
    cut(lines, first, min_gap, out);
    cut(lines, second, min_gap, out);
}

/// Leaf regions of the X-Y cut in reading order, each a list of line
/// indices sorted top-to-bottom.
pub fn xy_regions(lines: &[PositionedLine], min_gap: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&lines[a], &lines[b]);
        p.bbox
            .y0
            .total_cmp(&q.bbox.y0)
            .then(p.bbox.x0.total_cmp(&q.bbox.x0))
            .then(p.bbox.y1.total_cmp(&q.bbox.y1))
            .then(p.bbox.x1.total_cmp(&q.bbox.x1))
            .then(p.text.cmp(&q.text))
    });
    let mut out = Vec::new();
    if !order.is_empty() {
        cut(lines, order, min_gap, &mut out);
    }
    out
}

fn font_size(b: &BBox) -> f64 {
    libm::round((b.y1 - b.y0) * 2.0) / 2.0
}

/// Most frequent line height; ties go to the smaller height.
fn body_size(lines: &[PositionedLine]) -> f64 {
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for l in lines {
        let s = font_size(&l.bbox);
        match counts.iter_mut().find(|c| c.0 == s) {
            Some(c) => c.1 += 1,
            None => counts.push((s, 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .map_or(0.0, |c| c.0)
}

/// Segments positioned lines into blocks. Within a region, consecutive
/// lines taller than the body text form a heading; the rest form
/// paragraphs.
pub fn segment_positioned(lines: &[PositionedLine], min_gap: f64) -> Vec<LayoutBlock> {
    let body = body_size(lines);
    let mut heading_sizes: Vec<f64> = lines
        .iter()
        .map(|l| font_size(&l.bbox))
        .filter(|&s| s > body)
        .collect();
    heading_sizes.sort_by(|a, b| b.total_cmp(a));
    heading_sizes.dedup();

    let mut blocks: Vec<LayoutBlock> = Vec::new();
    for region in xy_regions(lines, min_gap) {
        let mut run: Vec<usize> = Vec::new();
        let flush = |run: &mut Vec<usize>, blocks: &mut Vec<LayoutBlock>| {
            if run.is_empty() {
                return;
            }
            let size = font_size(&lines[run[0]].bbox);
            let text = run
                .iter()
                .map(|&i| lines[i].text.trim())
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            let bbox = run.iter().skip(1).fold(lines[run[0]].bbox, |b, &i| b.union(&lines[i].bbox));
            let mut block = if size > body {
                let level = heading_sizes.iter().position(|&s| s == size).unwrap_or(0) as u32 + 1;
                LayoutBlock::heading(text, level)
            } else {
                LayoutBlock::new(BlockKind::Paragraph, text)
            };
            block.size = Some(size);
            block.bbox = Some(bbox);
            if !block.text.is_empty() {
                blocks.push(block);
            }
            run.clear();
        };
        for i in region {
            let same = run.last().map_or(true, |&p| {
                let (a, b) = (font_size(&lines[p].bbox), font_size(&lines[i].bbox));
                a == b || (a <= body && b <= body)
            });
            if !same {
                flush(&mut run, &mut blocks);
            }
            run.push(i);
        }
        flush(&mut run, &mut blocks);
    }
    super::renumber(&mut blocks);
    blocks
}
