use std::fs;
use std::path::PathBuf;

use kbqa_core::active::dbscan;
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Fixture {
    eps: f64,
    min_pts: usize,
    points: Vec<[f64; 2]>,
    labels: Vec<i64>,
}

fn fixtures() -> Vec<(String, Fixture)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dbscan");
    let mut out: Vec<(String, Fixture)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| {
            let f = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
            (p.file_stem().unwrap().to_string_lossy().into_owned(), f)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Relabels clusters by first appearance, noise as -1.
fn canonical(labels: &[Option<usize>]) -> Vec<i64> {
    let mut names: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|l| match l {
            None => -1,
            Some(c) => match names.iter().position(|n| n == c) {
                Some(i) => i as i64,
                None => {
                    names.push(*c);
                    names.len() as i64 - 1
                }
            },
        })
        .collect()
}

#[test]
fn committed_fixtures_match_the_oracle_labels() {
    let all = fixtures();
    assert!(all.len() >= 8, "fixtures missing");
    for (name, f) in &all {
        assert!(f.points.len() <= 20, "{name}");
        let d = |i: usize, j: usize| {
            let (a, b) = (f.points[i], f.points[j]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        };
        let got = canonical(&dbscan(f.points.len(), f.eps, f.min_pts, d));
        assert_eq!(got, f.labels, "{name}");
    }
}

#[test]
fn point_order_does_not_change_the_partition() {
    for (name, f) in fixtures() {
        let n = f.points.len();
        let rev: Vec<[f64; 2]> = f.points.iter().rev().copied().collect();
        let d = |i: usize, j: usize| {
            let (a, b) = (rev[i], rev[j]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        };
        let mut got = dbscan(n, f.eps, f.min_pts, d);
        got.reverse();
        assert_eq!(canonical(&got), f.labels, "{name}");
    }
}
