//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use common::{call_json, data, fixture, kb_file, lines, read, temp_store};
use kbqa::eval::evaluate;
use kbqa::io;
use kbqa::service::router;
use kbqa::store::{AnswerRequest, CreateKb, KbPatch, NewQa, QaEdit, Store};
use kbqa_core::active::{dbscan, Decision, Status};
use kbqa_core::engine::{AnswerOptions, KbSnapshot};
use kbqa_core::extract::{extract_batch, SourceDocument};
use kbqa_core::features::{expand_candidate, expand_query, FEATURE_COUNT};
use kbqa_core::ranker::{rank_candidates, train_with_report, TrainParams, TrainingRow, TrainingSet};
use kbqa_core::text::{damerau_levenshtein, distance_bound};
use kbqa_core::{Analyzer, AnswerKind, Engine, FeatureVector, KnowledgeBase, Persona, QaId, QaPair, QueryContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("{what} took {t:.2?}, limit {limit:?}"))?;
    Ok(t)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// Retrieval oracle

const POOL: &[&str] = &[
    "table", "chair", "sofa", "couch", "delivery", "price", "cost", "return", "refund", "order", "track", "wood",
    "leather", "fabric", "clean", "stain", "warranty", "frame", "cushion", "mattress", "bed", "lamp", "shelf",
    "drawer", "assemble", "assembly", "screw", "leg", "store", "open", "hour", "weekend", "pay", "card", "gift",
    "cancel", "change", "address", "plan", "care", "color", "size", "small", "large", "outdoor", "garden",
    "kitchen", "office", "desk", "rug", "tables", "chairs", "delivering", "cleaning",
];
const GLUE: &[&str] = &["the", "a", "is", "how", "do", "i", "what", "my", "can", "of", "for"];

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.gen_range(lo..=hi);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.3) {
                GLUE[rng.gen_range(0..GLUE.len())]
            } else {
                POOL[rng.gen_range(0..POOL.len())]
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_kb(rng: &mut ChaCha8Rng, k: usize, analyzer: &Analyzer) -> KnowledgeBase {
    let n = rng.gen_range(1..=50);
    let qas = (1..=n as QaId)
        .map(|id| {
            let mut qa = QaPair::new(id, words(rng, 2, 6), words(rng, 3, 12));
            for _ in 0..rng.gen_range(0..=2) {
                qa.alternate_questions.push(words(rng, 2, 5));
            }
            qa
        })
        .collect();
    let synonyms = if rng.gen_bool(0.5) {
        vec![vec!["sofa".to_string(), "couch".to_string()]]
    } else {
        Vec::new()
    };
    KnowledgeBase::new(format!("kb{k}"), "random", Persona::None, synonyms, qas, analyzer)
}

fn mutate(rng: &mut ChaCha8Rng, w: &str) -> String {
    let mut c: Vec<char> = w.chars().collect();
    if c.len() < 3 {
        return w.to_string();
    }
    let i = rng.gen_range(0..c.len() - 1);
    match rng.gen_range(0..3) {
        0 => c.swap(i, i + 1),
        1 => {
            c.remove(i);
        }
        _ => c[i] = 'x',
    }
    c.into_iter().collect()
}

fn random_query(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| {
            let w = POOL[rng.gen_range(0..POOL.len())];
            match rng.gen_range(0..10) {
                0..=2 => mutate(rng, w),
                3 => "zzqv".to_string(),
                _ => w.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Linear scan over every QA, re-analyzing its fields from scratch.
fn brute_force(kb: &KnowledgeBase, analyzer: &Analyzer, query: &[String], k: usize) -> Vec<(QaId, f64)> {
    let syn = kb.synonym_map(analyzer);
    let weights = [2.0, 2.0, 1.0];
    let docs: Vec<(QaId, [BTreeMap<String, u32>; 3])> = kb
        .qa_pairs()
        .iter()
        .map(|qa| {
            let mut f: [BTreeMap<String, u32>; 3] = Default::default();
            let texts = std::iter::once((0, &qa.question))
                .chain(qa.alternate_questions.iter().map(|a| (1, a)))
                .chain(std::iter::once((2, &qa.answer)));
            for (i, t) in texts {
                for l in analyzer.analyze(t, &syn).lemmas() {
                    *f[i].entry(l.to_string()).or_insert(0) += 1;
                }
            }
            (qa.id, f)
        })
        .collect();
    let vocab: BTreeSet<&str> = docs.iter().flat_map(|(_, f)| f.iter().flat_map(|m| m.keys().map(String::as_str))).collect();
    let idf = kb.local_idf();
    let mut out = Vec::new();
    for (id, fields) in &docs {
        let mut s = 0.0;
        for q in query {
            let terms: Vec<(&str, f64)> = if vocab.contains(q.as_str()) {
                vec![(q.as_str(), 1.0)]
            } else {
                vocab
                    .iter()
                    .filter(|w| damerau_levenshtein(q, w) <= distance_bound(q))
                    .map(|w| (*w, 0.5))
                    .collect()
            };
            for (t, scale) in terms {
                let idf = idf.get(t).copied().unwrap_or(0.0);
                for (f, w) in fields.iter().zip(weights) {
                    if let Some(&tf) = f.get(t) {
                        s += w * tf as f64 * idf * scale;
                    }
                }
            }
        }
        if s > 0.0 {
            out.push((*id, s));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

fn retrieval_oracle() -> Outcome {
    let start = Instant::now();
    let analyzer = Analyzer::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let (mut mismatches, mut queries, mut hits) = (0, 0, 0);
    let mut first = None;
    for k in 0..50 {
        let kb = random_kb(&mut rng, k, &analyzer);
        let snap = KbSnapshot::build(kb.clone(), &analyzer).map_err(err)?;
        for _ in 0..20 {
            let q = random_query(&mut rng);
            let ts = analyzer.normalize(&q, snap.lexicon());
            let lemmas: Vec<String> = ts.lemmas().map(str::to_string).collect();
            let got: Vec<(QaId, f64)> = snap.index().retrieve(&ts, 50).map_err(err)?.iter().map(|h| (h.qa_id, h.score)).collect();
            let want = brute_force(&kb, &analyzer, &lemmas, 50);
            queries += 1;
            hits += usize::from(!want.is_empty());
            if got != want {
                mismatches += 1;
                first.get_or_insert_with(|| format!("kb {k} query {q:?}: {got:?} vs {want:?}"));
            }
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} mismatches; first: {}", first.unwrap_or_default()))?;
    let t = within(start, Duration::from_secs(5), "retrieval oracle")?;
    Ok(format!("50 KBs x 20 queries, {queries} compared ({hits} non-empty), 0 mismatches, {t:.2?}"))
}

// Contextual expansion

fn contextual_expansion() -> Outcome {
    let analyzer = Analyzer::bundled();
    let kb = KnowledgeBase::new(
        "xyz",
        "xyz",
        Persona::None,
        vec![],
        vec![
            QaPair::new(1, "know about XYZ", "do you want to know about XYZ"),
            QaPair::new(2, "benefits", "XYZ members get free delivery").with_parent(1),
        ],
        &analyzer,
    );
    let ctx = QueryContext::after(kb.get(1).unwrap());
    let q = expand_query("yes", &ctx);
    ensure(q == "do you want to know about XYZ yes", || format!("query expansion gave {q:?}"))?;
    let c = expand_candidate(kb.get(2).unwrap(), &kb).map_err(err)?;
    ensure(c.question == "know about XYZ benefits", || format!("candidate expansion gave {:?}", c.question))?;
    Ok(format!("{q:?} and {:?}", c.question))
}

// GBDT sanity

fn row(features: [f64; FEATURE_COUNT], label: bool, query_id: u64) -> TrainingRow {
    TrainingRow {
        features: FeatureVector::from_array(features),
        label: u8::from(label),
        query_id,
    }
}

fn separable(seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TrainingSet::new(
        (0..300)
            .map(|i| {
                let mut f = [0.0; FEATURE_COUNT];
                f.iter_mut().for_each(|x| *x = rng.gen());
                row(f, f[0] > 0.5, i)
            })
            .collect(),
    )
}

/// A weak signal on two features with a quarter of the labels flipped.
fn noisy(seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TrainingSet::new(
        (0..400)
            .map(|i| {
                let mut f = [0.0; FEATURE_COUNT];
                f.iter_mut().for_each(|x| *x = rng.gen());
                let clean = f[0] + 0.5 * f[1] > 0.75;
                row(f, clean ^ rng.gen_bool(0.25), i / 4)
            })
            .collect(),
    )
}

fn gbdt_sanity() -> Outcome {
    let start = Instant::now();
    let mut worst_prune = f64::NEG_INFINITY;
    let mut prune_check = |r: &kbqa_core::ranker::TrainReport| worst_prune = worst_prune.max(r.validation_loss - r.validation_loss_at_stop);

    let (_, sep) = train_with_report(&separable(1), &TrainParams::default()).map_err(err)?;
    prune_check(&sep);
    ensure(sep.validation_auc == Some(1.0), || format!("separable validation AUC {:?}", sep.validation_auc))?;

    let mut early = 0;
    for seed in 0..20u64 {
        let p = TrainParams {
            seed,
            ..TrainParams::default()
        };
        let (_, r) = train_with_report(&noisy(100 + seed), &p).map_err(err)?;
        prune_check(&r);
        if r.stopped_early && r.trees_built < p.max_trees {
            early += 1;
        }
        let aggressive = TrainParams {
            prune_pct: 0.5,
            ..p
        };
        let (_, r) = train_with_report(&noisy(100 + seed), &aggressive).map_err(err)?;
        prune_check(&r);
    }
    ensure(early >= 19, || format!("early stopping in {early}/20 noisy seeds"))?;
    ensure(worst_prune <= 1e-6, || format!("pruning worsened validation loss by {worst_prune:e}"))?;
    let t = within(start, Duration::from_secs(30), "GBDT checks")?;
    Ok(format!(
        "separable AUC 1.0; early stop {early}/20 noisy seeds; worst pruning change {worst_prune:+.2e}; {t:.2?}"
    ))
}

// DBSCAN

fn dbscan_fixtures() -> Outcome {
    let dir = common::manifest().join("../core/tests/fixtures/dbscan");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(err)?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    ensure(!paths.is_empty(), || "no fixtures".into())?;
    let mut points = 0;
    for p in &paths {
        let f: Value = serde_json::from_str(&read(p)).map_err(err)?;
        let pts: Vec<[f64; 2]> = serde_json::from_value(f["points"].clone()).map_err(err)?;
        let want: Vec<i64> = serde_json::from_value(f["labels"].clone()).map_err(err)?;
        ensure(pts.len() <= 20, || format!("{} has {} points", p.display(), pts.len()))?;
        let d = |i: usize, j: usize| ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
        let got = dbscan(pts.len(), f["eps"].as_f64().unwrap(), f["minPts"].as_u64().unwrap() as usize, d);
        // Same partition up to renaming: map each found cluster to one expected label.
        let mut names: BTreeMap<usize, i64> = BTreeMap::new();
        let mut used: BTreeSet<i64> = BTreeSet::new();
        for (g, w) in got.iter().zip(&want) {
            let ok = match g {
                None => *w == -1,
                Some(c) => match names.get(c) {
                    Some(n) => n == w,
                    None => *w != -1 && used.insert(*w) && names.insert(*c, *w).is_none(),
                },
            };
            ensure(ok, || format!("{}: got {got:?}, want {want:?}", p.display()))?;
        }
        points += pts.len();
    }
    Ok(format!("{} fixtures, {points} points, all partitions equal", paths.len()))
}

// End to end

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let engine = io::default_engine();
    let kb = io::load_kb(&data("sample-kb.json"), &engine.analyzer).map_err(err)?;
    let qa_count = kb.qa_pairs().len();
    let snap = engine.snapshot(kb).map_err(err)?;
    let labels = io::parse_labels(&read(&data("labels.tsv"))).map_err(err)?;
    let r = evaluate(&engine, &snap, &labels, engine.config.no_answer_threshold).map_err(err)?;
    let t = within(start, Duration::from_secs(10), "evaluation")?;
    let auc = r.auc.unwrap_or(0.0);
    let msg = format!(
        "{qa_count} QAs, {} queries: AUC {:.2}, top-answer F1 {:.2}, {t:.2?}",
        r.queries,
        100.0 * auc,
        100.0 * r.f1.f1
    );
    ensure(auc >= 0.85 && r.f1.f1 >= 0.70, || msg.clone())?;
    Ok(msg)
}

// Multi-turn

fn argmax(engine: &Engine, snap: &KbSnapshot, q: &str, ctx: &QueryContext) -> Result<(Option<QaId>, f64), String> {
    let ranked = rank_candidates(&engine.model, engine.candidates(snap, q, ctx).map_err(err)?).map_err(err)?;
    Ok(ranked.first().map_or((None, 0.0), |r| (r.qa_id, r.score)))
}

fn multi_turn() -> Outcome {
    let engine = io::default_engine();
    let kb = kb_file(&fixture("multi-turn-kb.json")).into_kb(&engine.analyzer).map_err(err)?;
    let snap = engine.snapshot(kb).map_err(err)?;
    let opening = engine
        .answer(&snap, "know about XYZ", &QueryContext::default(), &AnswerOptions::default())
        .map_err(err)?;
    ensure(opening.top().qa_id == Some(1), || format!("opening turn answered {:?}", opening.top().qa_id))?;
    let parent = snap.kb().get(1).unwrap();
    let (top, score) = argmax(&engine, &snap, "yes", &QueryContext::after(parent))?;
    ensure(top == Some(2), || format!("\"yes\" after QA 1 ranked {top:?} first"))?;
    let full = engine
        .answer(&snap, "yes", &QueryContext::after(parent), &AnswerOptions { top: Some(1), score_threshold: Some(0.0) })
        .map_err(err)?;
    ensure(full.kind == AnswerKind::Kb && full.top().qa_id == Some(2), || format!("full pipeline gave {:?}", full.kind))?;
    let (gift, _) = argmax(&engine, &snap, "yes", &QueryContext::after(snap.kb().get(7).unwrap()))?;
    ensure(gift == Some(8), || format!("\"yes\" after QA 7 ranked {gift:?} first"))?;
    Ok(format!("\"yes\" after \"Know about XYZ\" -> QA 2 \"Benefits\" (score {score:.3}); second flow -> QA 8"))
}

// Chit-chat

fn chitchat_arbitration() -> Outcome {
    let engine = io::default_engine();
    let kb = io::load_kb(&data("sample-kb.json"), &engine.analyzer).map_err(err)?;
    let snap = engine.snapshot(kb).map_err(err)?;
    let ask = |q: &str| engine.answer(&snap, q, &QueryContext::default(), &AnswerOptions::default());
    let (chit, domain) = (lines(&fixture("chitchat-probes.txt")), lines(&fixture("domain-probes.txt")));
    let mut misses = Vec::new();
    for q in &chit {
        let a = ask(q).map_err(err)?;
        if a.kind != AnswerKind::Chitchat {
            misses.push(format!("{q:?} -> {:?}", a.kind));
        }
    }
    let mut fell_through = 0;
    for q in &domain {
        let a = ask(q).map_err(err)?;
        if a.kind == AnswerKind::Chitchat {
            misses.push(format!("{q:?} -> chitchat"));
        } else if a.domain.as_ref().is_some_and(|d| d.label == kbqa_core::chitchat::Domain::Chitchat) {
            fell_through += 1;
        }
    }
    ensure(chit.len() == 20 && domain.len() == 20, || "expected 20 + 20 probes".into())?;
    ensure(misses.is_empty(), || format!("misrouted: {}", misses.join("; ")))?;
    Ok(format!(
        "20/20 small-talk probes answered by chit-chat, 20/20 domain probes by the KB path ({fell_through} fell through the chit-chat floor)"
    ))
}

// Active learning

fn raw_retrieval(store: &Store, id: &str, q: &str, target: QaId) -> Result<f64, String> {
    let st = store.state(id).map_err(err)?;
    let ts = st.engine.analyzer.normalize(q, st.snapshot.lexicon());
    let hits = st.snapshot.index().retrieve(&ts, 100).map_err(err)?;
    Ok(hits.iter().find(|h| h.qa_id == target).map_or(0.0, |h| h.score))
}

const AL_QUERY: &str = "furniture assembly cost";

fn ask(store: &Store, id: &str, q: &str) -> Result<kbqa::store::AnswerResponse, String> {
    let req = AnswerRequest {
        question: q.into(),
        top: Some(3),
        ..Default::default()
    };
    store.answer(id, &req).map_err(err)
}

fn active_learning() -> Outcome {
    let (_dir, store) = temp_store();
    let id = store.import(kb_file(&fixture("active-kb.json"))).map_err(err)?.kb_id;
    let first = ask(&store, &id, AL_QUERY)?;
    ensure(first.active_learning_enabled, || "no suggestion recorded".into())?;
    ask(&store, &id, AL_QUERY)?;
    let list = store.suggestions(&id).map_err(err)?;
    ensure(list.len() == 1, || format!("{} suggestions after two identical queries", list.len()))?;
    let s = &list[0];
    let target = s.target_qa_id;
    ensure(first.answers[0].qa_id == Some(target), || "suggestion does not target the final winner".into())?;

    let before = raw_retrieval(&store, &id, AL_QUERY, target)?;
    let r = store.resolve(&id, &s.suggestion_id, Decision::Accept).map_err(err)?;
    let after = raw_retrieval(&store, &id, AL_QUERY, target)?;
    ensure(r.added == [AL_QUERY], || format!("accept added {:?}", r.added))?;
    ensure(after > before, || format!("retrieval score {before} -> {after}"))?;
    ensure(store.suggestions(&id).map_err(err)?[0].status == Status::Accepted, || "status not accepted".into())?;

    let (_dir2, other) = temp_store();
    let id2 = other.import(kb_file(&fixture("active-kb.json"))).map_err(err)?.kb_id;
    let (bytes, kb, rev) = {
        let st = other.state(&id2).map_err(err)?;
        (st.kb_json.clone(), st.kb().clone(), st.revision)
    };
    ask(&other, &id2, AL_QUERY)?;
    let sid = other.suggestions(&id2).map_err(err)?[0].suggestion_id.clone();
    let r = other.resolve(&id2, &sid, Decision::Reject).map_err(err)?;
    let st = other.state(&id2).map_err(err)?;
    ensure(r.added.is_empty() && st.revision == rev, || "reject changed the revision".into())?;
    ensure(*st.kb() == kb && st.kb_json == bytes, || "reject changed the KB".into())?;
    Ok(format!(
        "one suggestion (QA {target}); accept raised retrieval {before:.3} -> {after:.3}; reject left revision {rev} unchanged"
    ))
}

// Service

fn qa(question: &str, answer: &str) -> NewQa {
    NewQa {
        question: question.into(),
        answer: answer.into(),
        ..Default::default()
    }
}

const TOPICS: &[(&str, &str)] = &[
    ("How long does delivery take?", "Delivery takes five days"),
    ("What is the return policy?", "Returns are accepted for thirty days"),
    ("Do you offer assembly?", "Assembly costs seventy dollars"),
    ("How do I clean leather?", "Wipe leather with a damp cloth"),
    ("Where is the store?", "The store is on Main Street"),
];

fn marked(rev: u64) -> Vec<String> {
    TOPICS.iter().map(|(_, a)| format!("{a} [rev {rev}]")).collect()
}

fn read_your_writes() -> Result<usize, String> {
    let rt = tokio::runtime::Runtime::new().map_err(err)?;
    rt.block_on(async {
        let (_dir, store) = temp_store();
        let app = router(store);
        let body = json!({"name": "ryw", "qaPairs": [{"question": "What is the price of a table?", "answer": "Tables cost 100 dollars."}]});
        let (s, created) = call_json(&app, Method::POST, "/kbs", &[], Some(&body.to_string())).await;
        ensure(s == StatusCode::CREATED, || format!("create: {s} {created}"))?;
        let id = created["kbId"].as_str().unwrap().to_string();
        let items = ["lamp", "rug", "mirror", "clock", "bench", "stool", "vase", "curtain", "pillow", "blanket"];
        for (n, item) in items.iter().enumerate() {
            let patch = json!({"add": [{"question": format!("Do you sell a {item}?"), "answer": format!("Yes, every {item} is in stock.")}]});
            let (s, p) = call_json(&app, Method::PATCH, &format!("/kbs/{id}"), &[], Some(&patch.to_string())).await;
            ensure(s == StatusCode::OK, || format!("patch: {s} {p}"))?;
            let rev = p["revision"].as_u64().unwrap();
            let q = json!({"question": format!("do you sell a {item}"), "scoreThreshold": 0.0});
            let (s, a) = call_json(&app, Method::POST, &format!("/kbs/{id}/generateAnswer"), &[], Some(&q.to_string())).await;
            ensure(s == StatusCode::OK, || format!("answer: {s} {a}"))?;
            ensure(a["revision"].as_u64() == Some(rev), || format!("answer saw revision {} after write {rev}", a["revision"]))?;
            ensure(a["answers"][0]["qaId"].as_u64() == Some(n as u64 + 2), || format!("{item}: {a}"))?;
        }
        Ok(items.len())
    })
}

/// Readers check that every answer carries the marker of the revision the
/// response reports, while a writer rewrites all answers 50 times.
fn hammer() -> Result<(usize, usize), String> {
    let (_dir, store) = temp_store();
    let created = store
        .create(CreateKb {
            name: "hammer".into(),
            qa_pairs: TOPICS.iter().zip(marked(1)).map(|((q, _), a)| qa(q, &a)).collect(),
            ..Default::default()
        })
        .map_err(err)?;
    ensure(created.revision == 1, || format!("initial revision {}", created.revision))?;
    let id = created.kb_id;
    let done = Arc::new(AtomicBool::new(false));
    let during = Arc::new(AtomicUsize::new(0));
    let invalid = Arc::new(AtomicUsize::new(0));
    let readers: Vec<_> = (0..4)
        .map(|r| {
            let (store, id, done, during, invalid) = (store.clone(), id.clone(), done.clone(), during.clone(), invalid.clone());
            thread::spawn(move || {
                let mut last = 0;
                let mut i = r;
                while !done.load(Ordering::SeqCst) {
                    let q = TOPICS[i % TOPICS.len()].0;
                    i += 1;
                    let req = AnswerRequest {
                        question: q.into(),
                        top: Some(5),
                        score_threshold: Some(0.0),
                        ..Default::default()
                    };
                    let a = store.answer(&id, &req).unwrap();
                    let tag = format!("[rev {}]", a.revision);
                    let ok = a.revision >= last
                        && a.answers.iter().all(|x| x.is_no_answer() || x.answer_text.ends_with(&tag));
                    if !ok {
                        invalid.fetch_add(1, Ordering::SeqCst);
                    }
                    last = a.revision;
                    during.fetch_add(1, Ordering::SeqCst);
                }
            })
        })
        .collect();
    for n in 0..50u64 {
        // Pace the writer so that queries interleave with every update.
        while during.load(Ordering::SeqCst) < 21 * (n as usize + 1) {
            thread::yield_now();
        }
        let rev = n + 1;
        let patch = KbPatch {
            edit: marked(rev + 1)
                .into_iter()
                .enumerate()
                .map(|(i, a)| QaEdit {
                    id: i as QaId + 1,
                    answer: Some(a),
                    ..Default::default()
                })
                .collect(),
            ..Default::default()
        };
        let st = store.update(&id, Some(rev), patch).map_err(err)?;
        ensure(st.revision == rev + 1, || format!("update gave revision {}", st.revision))?;
    }
    done.store(true, Ordering::SeqCst);
    for r in readers {
        r.join().map_err(|_| "reader panicked".to_string())?;
    }
    let (n, bad) = (during.load(Ordering::SeqCst), invalid.load(Ordering::SeqCst));
    ensure(n >= 1000, || format!("only {n} queries ran during the updates"))?;
    ensure(bad == 0, || format!("{bad} of {n} responses mixed revisions"))?;
    Ok((n, bad))
}

fn restart() -> Result<u64, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let root = dir.path().join("data");
    let (id, bytes, rev, sugg, answer) = {
        let store = Store::open(&root, io::default_engine()).map_err(err)?;
        let id = store.import(kb_file(&fixture("active-kb.json"))).map_err(err)?.kb_id;
        store
            .update(&id, None, KbPatch { add: vec![qa("Do you sell rugs?", "Rugs come in three sizes.")], ..Default::default() })
            .map_err(err)?;
        store
            .update(&id, None, KbPatch { persona: Some(Persona::Witty), ..Default::default() })
            .map_err(err)?;
        ask(&store, &id, AL_QUERY)?;
        let st = store.state(&id).map_err(err)?;
        let answer = serde_json::to_string(&ask(&store, &id, "do you sell rugs")?).map_err(err)?;
        (id.clone(), st.kb_json.clone(), st.revision, store.suggestions(&id).map_err(err)?, answer)
    };
    let store = Store::open(&root, io::default_engine()).map_err(err)?;
    let st = store.state(&id).map_err(err)?;
    ensure(st.kb_json == bytes, || "kb.json changed across restart".into())?;
    ensure(st.revision == rev, || format!("revision {rev} -> {}", st.revision))?;
    ensure(store.suggestions(&id).map_err(err)? == sugg, || "suggestions changed across restart".into())?;
    let again = serde_json::to_string(&ask(&store, &id, "do you sell rugs")?).map_err(err)?;
    ensure(again == answer, || "answers differ after restart".into())?;
    Ok(rev)
}

fn service_properties() -> Outcome {
    let writes = read_your_writes()?;
    let (queries, _) = hammer()?;
    let rev = restart()?;
    Ok(format!(
        "read-your-writes on {writes} writes; {queries} queries during 50 updates, 0 invalid snapshots; restart kept revision {rev} byte-exact"
    ))
}

// Extraction

fn extraction_goldens() -> Outcome {
    let dir = common::manifest().join("../core/tests/fixtures/extraction");
    let mut qas = 0;
    for (source, stem) in [("store-faq.md", "store-faq"), ("care-guide.html", "care-guide"), ("warranty.txt", "warranty")] {
        let doc = SourceDocument::new(source, read(&dir.join(source))).map_err(err)?;
        let x = extract_batch(&[doc], 1).map_err(err)?;
        let tree = read(&dir.join(format!("{stem}.tree.txt")));
        ensure(x.trees[0].outline() == tree, || format!("{source}: intent tree differs"))?;
        let got = json!({
            "qaPairs": x.qa_pairs.iter().map(|q| json!({
                "id": q.id, "question": q.question, "answer": q.answer, "parentId": q.parent_id,
            })).collect::<Vec<_>>(),
            "warnings": x.warnings.iter().map(|w| w.message.clone()).collect::<Vec<_>>(),
        });
        let want: Value = serde_json::from_str(&read(&dir.join(format!("{stem}.qa.json")))).map_err(err)?;
        ensure(got == want, || format!("{source}: QA pairs differ"))?;
        qas += x.qa_pairs.len();
    }
    Ok(format!("markdown, HTML and positioned text: 3 trees and {qas} QA pairs match, repeated leaves prefixed"))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("retrieval oracle equivalence", retrieval_oracle),
        ("contextual expansion examples", contextual_expansion),
        ("gbdt sanity", gbdt_sanity),
        ("dbscan oracle fixtures", dbscan_fixtures),
        ("end-to-end bundled corpus", end_to_end),
        ("multi-turn fixture", multi_turn),
        ("chit-chat arbitration", chitchat_arbitration),
        ("active-learning loop", active_learning),
        ("service properties", service_properties),
        ("extraction goldens", extraction_goldens),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let r = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| Err(panic_message(p)));
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
