#!/usr/bin/env python3
"""Recomputes evaluation metrics from the per-row scores that
`kbqa eval --json` dumps, without sharing any code with the Rust side.

AUC is the brute-force pairwise definition: over every (positive, negative)
row pair, count 1 when the positive scores higher and 1/2 on a tie.
Top-answer F1 uses each query's top-ranked answer: answered means
score >= threshold; answered and relevant is a true positive, answered and
irrelevant a false positive, and a query with a relevant QA but no true
positive a false negative.

usage: metric_oracle.py eval.json > golden.json
"""
import json
import sys


def pairwise_auc(rows):
    pos = [r["score"] for r in rows if r["label"]]
    neg = [r["score"] for r in rows if not r["label"]]
    if not pos or not neg:
        return None
    twice = 0
    for p in pos:
        for n in neg:
            if p > n:
                twice += 2
            elif p == n:
                twice += 1
    return twice / (2.0 * len(pos) * len(neg))


def f1_report(diags, threshold):
    tp = fp = fn = 0
    for d in diags:
        score = d["topScore"]
        answered = score is not None and score >= threshold
        relevant = d["topQaId"] is not None and d["topQaId"] in d["relevantQaIds"]
        has_relevant = bool(d["relevantQaIds"])
        if answered and relevant:
            tp += 1
        elif answered:
            fp += 1
            if has_relevant:
                fn += 1
        elif has_relevant:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "truePositives": tp,
        "falsePositives": fp,
        "falseNegatives": fn,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def main():
    report = json.load(open(sys.argv[1]))
    rows = report["scores"]
    golden = {
        "queries": len(report["diagnostics"]),
        "rows": len(rows),
        "positives": sum(1 for r in rows if r["label"]),
        "threshold": report["threshold"],
        "auc": pairwise_auc(rows),
        "f1": f1_report(report["diagnostics"], report["threshold"]),
    }
    json.dump(golden, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
