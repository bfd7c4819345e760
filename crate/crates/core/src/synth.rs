//! Synthetic FAQ corpora with known relevance, used to train the shipped
//! ranker so a new KB answers without any labeling.
//!
//! Each synthetic KB pairs service verbs with product nouns. Queries are
//! paraphrased by swapping verbs within a synonym group, replacing nouns
//! with their taxonomy hypernym, changing the sentence frame and adding
//! typos. Multi-turn parents get follow-up queries such as "yes" that only
//! the conversation context can resolve.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Engine, EngineError};
use crate::features::Taxonomy;
use crate::kb::{KnowledgeBase, Persona, QaId, QaPair, QueryContext};
use crate::ranker::{train_with_report, GbdtModel, RankerError, TrainParams, TrainReport, TrainingRow, TrainingSet};

/// Verb groups; members of a group are interchangeable in queries.
const VERBS: &[&[&str]] = &[
    &["return", "send back"],
    &["buy", "purchase", "order"],
    &["repair", "fix"],
    &["clean", "wash"],
    &["cancel", "stop"],
    &["deliver", "ship"],
    &["install", "set up"],
    &["exchange", "swap"],
    &["track", "follow"],
    &["rent", "hire"],
    &["replace", "change"],
    &["recycle", "dispose of"],
    &["insure", "protect"],
    &["register", "sign up"],
];

/// Attribute groups for "what is the X of" questions.
const ATTRIBUTES: &[&[&str]] = &[
    &["price", "cost"],
    &["warranty", "guarantee"],
    &["size", "dimension"],
    &["weight", "heaviness"],
    &["delivery time", "shipping time"],
    &["color", "colour"],
];

/// Product nouns, grouped by domain. The furniture subtree is left out on
/// purpose so the bundled furniture sample stays unseen.
const DOMAINS: &[&[&str]] = &[
    &["blender", "dishwasher", "dryer", "fan", "freezer", "fridge", "heater", "kettle", "microwave", "oven", "toaster", "vacuum", "washer"],
    &["battery", "camera", "charger", "headphone", "keyboard", "monitor", "phone", "printer", "router", "speaker", "television", "laptop", "tablet"],
    &["bicycle", "car", "motorcycle", "scooter", "trailer", "truck", "van"],
    &["coat", "dress", "glove", "hat", "jacket", "scarf", "shirt", "skirt", "sweater", "boot", "sandal", "shoe", "sneaker"],
    &["bread", "cake", "cheese", "cookie", "pizza", "coffee", "juice", "tea", "wine"],
    &["ticket", "voucher", "coupon", "invoice", "contract", "certificate", "manual"],
];

const QUESTION_FRAMES: &[&str] = &[
    "How do I {v} my {n}?",
    "Can I {v} a {n}?",
    "Is it possible to {v} the {n}?",
    "How can I {v} {n}s?",
    "Do you {v} {n}s?",
    "What is needed to {v} a {n}?",
];

const QUERY_FRAMES: &[&str] = &[
    "{v} {n}",
    "how to {v} {n}",
    "can i {v} my {n}",
    "i want to {v} a {n}",
    "is there a way to {v} the {n}",
    "{n} {v}",
    "help me {v} {n}s",
    "where do i {v} my {n}",
];

const ANSWER_FRAMES: &[&str] = &[
    "You can {v} any {n} within {k} days from our website or at the counter.",
    "To {v} a {n}, open your account, pick the order and follow the steps. It takes about {k} minutes.",
    "We {v} {n}s every weekday. Staff will confirm by email within {k} hours.",
    "Bring the {n} and your receipt; we {v} it free of charge for {k} days.",
];

const ATTRIBUTE_QUESTIONS: &[&str] = &["What is the {a} of the {n}?", "{n} {a}", "Tell me the {a} of a {n}"];
const ATTRIBUTE_QUERIES: &[&str] = &["{a} of {n}", "what {a} is the {n}", "{n} {a}?", "how about the {a} for a {n}"];
const ATTRIBUTE_ANSWERS: &[&str] = &[
    "The {a} of each {n} is listed on its product page; most models are around {k}.",
    "Every {n} comes with its {a} printed on the box label ({k} on average).",
];

const PLANS: &[&str] = &["XYZ", "Plus", "Gold", "Care", "Prime", "Family", "Student", "Basic"];
const CHILD_TOPICS: &[(&str, &str)] = &[
    ("Benefits", "members get free delivery and early access to sales"),
    ("Pricing", "the plan costs a small monthly fee that can be cancelled anytime"),
    ("Eligibility", "anyone over eighteen with a valid address can join"),
    ("How to join", "sign up in the app under the account section"),
];
const FOLLOW_UPS: &[&str] = &["yes", "yes please", "sure", "ok", "tell me more", "yeah"];

/// Words that make one answer distinctive, as in real FAQs where a query
/// often hits a single term of the answer ("paypal", "postcode").
const DETAILS: &[&str] = &[
    "paypal", "warehouse", "courier", "weekend", "installment", "membership", "helpline", "showroom",
    "postcode", "deposit", "appointment", "technician", "packaging", "barcode", "loyalty", "checkout",
    "catalogue", "holiday", "pickup", "locker", "accessory", "spare", "timeslot", "signature",
    "password", "newsletter", "outlet", "bundle", "engraving", "wrapping", "sticker", "coupon code",
];
const DETAIL_SENTENCES: &[&str] = &[" Ask our team about {d}.", " Details on {d} are in your account.", " This also covers {d}."];
const DETAIL_QUERIES: &[&str] = &["{d}", "{d} for {n}", "do you offer {d}", "{n} {d}", "question about {d}"];

const NONSENSE: &[&str] = &["qwerty zxcv", "blorf snark", "lorem ipsum dolor", "fjord wizzle", "grommet plinth quasar"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub kbs: usize,
    pub qas_per_kb: usize,
    pub queries_per_qa: usize,
    pub unanswerable_per_kb: usize,
    pub plans_per_kb: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            kbs: 24,
            qas_per_kb: 14,
            queries_per_qa: 2,
            unanswerable_per_kb: 4,
            plans_per_kb: 2,
            seed: 20,
        }
    }
}

/// One query with its known answer (`None` when the KB cannot answer).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthQuery {
    pub text: String,
    pub context: QueryContext,
    pub relevant: Option<QaId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthKb {
    pub kb: KnowledgeBase,
    pub queries: Vec<SynthQuery>,
}

fn fill(frame: &str, v: &str, n: &str, a: &str, k: u32) -> String {
    let s = frame
        .replace("{v}", v)
        .replace("{n}", n)
        .replace("{a}", a)
        .replace("{k}", &k.to_string());
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => s,
    }
}

fn typo(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.len() < 5 || !chars.iter().all(|c| c.is_ascii_alphabetic()) {
        return word.to_string();
    }
    let i = rng.gen_range(1..chars.len() - 1);
    if rng.gen_bool(0.5) {
        chars.swap(i, i + 1);
    } else {
        chars.remove(i);
    }
    chars.into_iter().collect()
}

/// Query-side noun: sometimes generalized to a taxonomy hypernym.
fn query_noun(noun: &str, taxonomy: &Taxonomy, rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.3) {
        if let Some(h) = taxonomy.hypernyms(noun).choose(rng) {
            return h.to_string();
        }
    }
    noun.to_string()
}

fn noisy(text: String, rng: &mut ChaCha8Rng) -> String {
    if !rng.gen_bool(0.25) {
        return text;
    }
    let words: Vec<&str> = text.split(' ').collect();
    let pick = rng.gen_range(0..words.len());
    words
        .iter()
        .enumerate()
        .map(|(i, w)| if i == pick { typo(w, rng) } else { w.to_string() })
        .collect::<Vec<_>>()
        .join(" ")
}

enum Topic {
    Action { verbs: usize, noun: &'static str },
    Attribute { attr: usize, noun: &'static str },
}

/// Generates one synthetic KB and its labeled queries.
pub fn generate_kb(index: usize, params: &SynthParams, taxonomy: &Taxonomy, rng: &mut ChaCha8Rng) -> SynthKb {
    let domain = DOMAINS[index % DOMAINS.len()];
    let mut nouns: Vec<&'static str> = domain.to_vec();
    nouns.shuffle(rng);
    nouns.truncate(10.min(nouns.len()));
    let mut details: Vec<&'static str> = DETAILS.to_vec();
    details.shuffle(rng);

    // Distinct (verb, noun) and (attribute, noun) topics; sharing nouns and
    // verbs across QAs gives hard negatives.
    let mut topics = Vec::new();
    let mut seen = alloc::collections::BTreeSet::new();
    let mut guard = 0;
    while topics.len() < params.qas_per_kb && guard < 1000 {
        guard += 1;
        let noun = *nouns.choose(rng).expect("non-empty domain");
        if rng.gen_bool(0.7) {
            let verbs = rng.gen_range(0..VERBS.len());
            if seen.insert((0, verbs, noun)) {
                topics.push(Topic::Action { verbs, noun });
            }
        } else {
            let attr = rng.gen_range(0..ATTRIBUTES.len());
            if seen.insert((1, attr, noun)) {
                topics.push(Topic::Attribute { attr, noun });
            }
        }
    }

    let mut qas = Vec::new();
    let mut queries = Vec::new();
    let mut next_id: QaId = 1;
    for (ti, t) in topics.iter().enumerate() {
        let id = next_id;
        next_id += 1;
        let k = rng.gen_range(2..60);
        let detail = details[ti % details.len()];
        let (question, mut answer) = match *t {
            Topic::Action { verbs, noun } => (
                fill(QUESTION_FRAMES.choose(rng).unwrap(), VERBS[verbs][0], noun, "", k),
                fill(ANSWER_FRAMES.choose(rng).unwrap(), VERBS[verbs][0], noun, "", k),
            ),
            Topic::Attribute { attr, noun } => (
                fill(ATTRIBUTE_QUESTIONS.choose(rng).unwrap(), "", noun, ATTRIBUTES[attr][0], k),
                fill(ATTRIBUTE_ANSWERS.choose(rng).unwrap(), "", noun, ATTRIBUTES[attr][0], k),
            ),
        };
        answer.push_str(&fill(DETAIL_SENTENCES.choose(rng).unwrap(), "", "", "", 0).replace("{d}", detail));
        let mut qa = QaPair::new(id, question, answer);
        qa.source = "synthetic".into();
        qas.push(qa);
        for _ in 0..params.queries_per_qa {
            let n = query_noun(match t {
                Topic::Action { noun, .. } | Topic::Attribute { noun, .. } => noun,
            }, taxonomy, rng);
            let text = match *t {
                _ if rng.gen_bool(0.25) => DETAIL_QUERIES.choose(rng).unwrap().replace("{d}", detail).replace("{n}", &n),
                Topic::Action { verbs, .. } => {
                    let v = VERBS[verbs].choose(rng).unwrap();
                    fill(QUERY_FRAMES.choose(rng).unwrap(), v, &n, "", 0)
                }
                Topic::Attribute { attr, .. } => {
                    let a = ATTRIBUTES[attr].choose(rng).unwrap();
                    fill(ATTRIBUTE_QUERIES.choose(rng).unwrap(), "", &n, a, 0)
                }
            };
            queries.push(SynthQuery {
                text: noisy(text.to_lowercase(), rng),
                context: QueryContext::default(),
                relevant: Some(id),
            });
        }
    }

    // Multi-turn plans: the parent asks whether to go on, children carry
    // the details. Child titles repeat across plans.
    let mut plans: Vec<&str> = PLANS.to_vec();
    plans.shuffle(rng);
    let product = *nouns.first().expect("non-empty domain");
    for plan in plans.into_iter().take(params.plans_per_kb) {
        let parent = next_id;
        next_id += 1;
        let mut p = QaPair::new(
            parent,
            format!("Know about {plan}"),
            format!("{plan} is our {product} membership. Do you want to know about {plan}?"),
        );
        p.source = "synthetic".into();
        qas.push(p);
        let mut children: Vec<&(&str, &str)> = CHILD_TOPICS.iter().collect();
        children.shuffle(rng);
        let n_children = rng.gen_range(1..=3);
        for (ci, (title, body)) in children.into_iter().take(n_children).enumerate() {
            let id = next_id;
            next_id += 1;
            let mut c = QaPair::new(id, *title, format!("With {plan}, {body}.")).with_parent(parent);
            c.source = "synthetic".into();
            qas.push(c);
            let ctx = QueryContext {
                previous_qa_id: Some(parent),
                ..Default::default()
            };
            // A bare "yes" only points at the first child.
            if ci == 0 {
                queries.push(SynthQuery {
                    text: FOLLOW_UPS.choose(rng).unwrap().to_string(),
                    context: ctx.clone(),
                    relevant: Some(id),
                });
            }
            queries.push(SynthQuery {
                text: format!("what about {}", title.to_lowercase()),
                context: ctx,
                relevant: Some(id),
            });
        }
        queries.push(SynthQuery {
            text: format!("tell me about {}", plan.to_lowercase()),
            context: QueryContext::default(),
            relevant: Some(parent),
        });
    }

    // Questions the KB cannot answer: unseen nouns or nonsense.
    for _ in 0..params.unanswerable_per_kb {
        let text = if rng.gen_bool(0.5) {
            NONSENSE.choose(rng).unwrap().to_string()
        } else {
            let other = DOMAINS[(index + 1 + rng.gen_range(0..DOMAINS.len() - 1)) % DOMAINS.len()];
            let n = other.choose(rng).unwrap();
            let v = VERBS.choose(rng).unwrap()[0];
            fill(QUERY_FRAMES.choose(rng).unwrap(), v, n, "", 0).to_lowercase()
        };
        queries.push(SynthQuery {
            text,
            context: QueryContext::default(),
            relevant: None,
        });
    }

    let kb = KnowledgeBase::new(
        format!("synth-{index}"),
        format!("Synthetic {index}"),
        Persona::None,
        Vec::new(),
        qas,
        &crate::text::Analyzer::bundled(),
    );
    SynthKb { kb, queries }
}

/// All synthetic KBs for `params`, reproducible from the seed.
pub fn generate(params: &SynthParams, taxonomy: &Taxonomy) -> Vec<SynthKb> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    (0..params.kbs).map(|i| generate_kb(i, params, taxonomy, &mut rng)).collect()
}

/// Training rows: every retrieved candidate of every synthetic query,
/// labeled 1 iff it is the query's known answer.
pub fn training_set(engine: &Engine, corpora: &[SynthKb]) -> Result<TrainingSet, EngineError> {
    let mut rows = Vec::new();
    let mut query_id = 0u64;
    for c in corpora {
        let snap = engine.snapshot(c.kb.clone())?;
        for q in &c.queries {
            for cand in engine.candidates(&snap, &q.text, &q.context)? {
                rows.push(TrainingRow {
                    features: cand.features,
                    label: u8::from(Some(cand.qa_id) == q.relevant),
                    query_id,
                });
            }
            query_id += 1;
        }
    }
    Ok(TrainingSet::new(rows).with_provenance(engine.analyzer.stopwords_hash(), engine.taxonomy.hash()))
}

/// Trains the default ranker on synthetic data. The engine's own model is
/// ignored; only its language resources are used.
pub fn train_default(engine: &Engine, synth: &SynthParams, params: &TrainParams) -> Result<(GbdtModel, TrainReport), SynthError> {
    let corpora = generate(synth, &engine.taxonomy);
    let data = training_set(engine, &corpora)?;
    let (mut model, report) = train_with_report(&data, params)?;
    let meta: BTreeMap<String, String> = [
        ("trainedOn", "synthetic".to_string()),
        ("synthSeed", synth.seed.to_string()),
        ("synthKbs", synth.kbs.to_string()),
        ("trainSeed", params.seed.to_string()),
        ("rows", data.rows.len().to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    model.metadata = meta;
    Ok((model, report))
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Ranker(#[from] RankerError),
}
