#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::sync::Arc;

use paco_core::attributes::{measure_all, AttributeKind, AttributeTarget, Document, Providers, Targets, Utterance};
use paco_core::policy::{path_key, HistoryEntry, ScriptedPolicy};
use paco_core::reward::{self, RewardConfig, Tolerances};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DOC_WORDS: [&str; 16] = [
    "the", "council", "approved", "Budget", "for", "Cardiff", "schools", "in", "2024", "after", "debate", "with",
    "Mayor", "Jones", "on", "spending",
];
pub const NOVEL_WORDS: [&str; 8] = [
    "overall",
    "reportedly",
    "broadly",
    "notably",
    "plans",
    "funds",
    "talks",
    "vote",
];

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn mix(seed: u64, key: &str) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    key.hash(&mut h);
    h.finish()
}

/// Deterministic pseudo-random summary for a path.
pub fn random_summary(seed: u64, key: &str) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, key));
    let n = rng.random_range(3..=16);
    let novel_share: f64 = rng.random_range(0.0..1.0);
    (0..n)
        .map(|_| {
            if rng.random_bool(novel_share) {
                *NOVEL_WORDS.choose(&mut rng).unwrap()
            } else {
                *DOC_WORDS.choose(&mut rng).unwrap()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A randomized search problem with deterministic transitions.
#[derive(Clone)]
pub struct Instance {
    pub seed: u64,
    pub doc: Document,
    pub max_depth: usize,
    pub reward: RewardConfig,
    /// Paths (short-name keys) whose generation fails.
    pub failing: Vec<String>,
}

impl Instance {
    pub fn random(seed: u64, max_legal: usize, max_depth: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kinds = [
            AttributeKind::Extractiveness,
            AttributeKind::Length,
            AttributeKind::Specificity,
            AttributeKind::Topic,
        ];
        kinds.shuffle(&mut rng);
        let k = rng.random_range(1..=max_legal.min(kinds.len()));
        let targets: Vec<AttributeTarget> = kinds[..k]
            .iter()
            .map(|kind| match kind {
                AttributeKind::Extractiveness => AttributeTarget::Extractiveness(rng.random_range(0..=100) as f64),
                AttributeKind::Length => AttributeTarget::Length(rng.random_range(3..=16)),
                AttributeKind::Specificity => AttributeTarget::Specificity(rng.random_range(0..=60) as f64),
                _ => AttributeTarget::Topic(vec![DOC_WORDS.choose(&mut rng).unwrap().to_lowercase()]),
            })
            .collect();
        let doc = Document::new(
            format!("inst-{seed}"),
            DOC_WORDS.join(" "),
            None,
            None,
            Targets::new(targets).unwrap(),
        )
        .unwrap();
        // generous tolerances in some instances so satisfied nodes occur
        let loose = rng.random_bool(0.4);
        let tol = if loose { rng.random_range(5.0..40.0) } else { 2.0 };
        let reward = RewardConfig {
            tolerances: Tolerances {
                extractiveness: tol,
                length: tol,
                specificity: tol,
            },
            nondet_floor: if loose { 0.3 } else { 0.75 },
            ..RewardConfig::default()
        };
        Self {
            seed,
            doc,
            max_depth: rng.random_range(1..=max_depth),
            reward,
            failing: Vec::new(),
        }
    }

    pub fn summary(&self, path: &[AttributeKind]) -> Option<String> {
        let key = path_key(path);
        (!self.failing.contains(&key)).then(|| random_summary(self.seed, &key))
    }

    pub fn policy(&self) -> ScriptedPolicy {
        let me = self.clone();
        ScriptedPolicy::from_generator(Arc::new(
            move |_doc: &Document, history: &[HistoryEntry], action: Option<AttributeKind>| {
                let mut path: Vec<AttributeKind> = history.iter().filter_map(|e| e.action).collect();
                path.extend(action);
                me.summary(&path)
            },
        ))
    }
}

/// Result of enumerating every reachable node.
pub struct Enumeration {
    pub best_degree: f64,
    /// Nodes below the root.
    pub node_count: usize,
}

/// Exhaustive expansion obeying the terminal rule: satisfied nodes and nodes
/// at the depth limit have no children.
pub fn enumerate(inst: &Instance, providers: &Providers) -> Enumeration {
    fn walk(inst: &Instance, providers: &Providers, path: &mut Vec<AttributeKind>, out: &mut Enumeration) {
        let Some(summary) = inst.summary(path) else { return };
        let measured = measure_all(&summary, &inst.doc, providers).unwrap();
        let deg = reward::degree(&measured, &inst.doc.targets, &inst.reward)
            .unwrap()
            .degree;
        let sat = reward::satisfied(&measured, &inst.doc.targets, &inst.reward).unwrap();
        if !path.is_empty() {
            out.node_count += 1;
        }
        if deg > out.best_degree {
            out.best_degree = deg;
        }
        if sat || path.len() >= inst.max_depth {
            return;
        }
        for a in inst.doc.legal_actions() {
            path.push(a);
            walk(inst, providers, path, out);
            path.pop();
        }
    }
    let mut out = Enumeration {
        best_degree: f64::NEG_INFINITY,
        node_count: 0,
    };
    walk(inst, providers, &mut Vec::new(), &mut out);
    out
}

/// A document requesting all five attributes.
pub fn five_attribute_doc() -> Document {
    let text = "The council approved the Cardiff school budget after a long debate on Tuesday. \
                Mayor Jones said the plan protects 12 schools. Councillor Patel warned that \
                spending must be reviewed in March.";
    Document::new(
        "five",
        text,
        Some(vec![
            Utterance {
                speaker: "Jones".into(),
                text: "This plan protects twelve schools and their staff.".into(),
            },
            Utterance {
                speaker: "Patel".into(),
                text: "We must review spending again in March.".into(),
            },
        ]),
        Some("The council approved the school budget; Patel urged a March review.".into()),
        Targets::new(vec![
            AttributeTarget::Extractiveness(60.0),
            AttributeTarget::Length(12),
            AttributeTarget::Specificity(20.0),
            AttributeTarget::Topic(vec!["budget".into()]),
            AttributeTarget::Speaker("Patel".into()),
        ])
        .unwrap(),
    )
    .unwrap()
}

/// A captured HTTP request.
#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Reply {
    pub fn json(body: serde_json::Value) -> Self {
        Self {
            status: 200,
            headers: Vec::new(),
            body: body.to_string(),
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            headers: Vec::new(),
            body: String::new(),
        }
    }
}

type Handler = dyn Fn(&Request) -> Reply + Send + Sync;

/// One-request-per-connection HTTP/1.1 server on a random local port.
pub struct FakeServer {
    pub url: String,
    pub requests: Arc<std::sync::Mutex<Vec<Request>>>,
}

impl FakeServer {
    pub fn start(handler: impl Fn(&Request) -> Reply + Send + Sync + 'static) -> Self {
        use std::io::{BufRead, BufReader, Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(std::sync::Mutex::new(Vec::new()));
        let log = requests.clone();
        let handler: Arc<Handler> = Arc::new(handler);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    continue;
                }
                let mut parts = line.split_whitespace();
                let method = parts.next().unwrap_or_default().to_string();
                let path = parts.next().unwrap_or_default().to_string();
                let mut headers = Vec::new();
                let mut len = 0usize;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                        headers.push((k.trim().to_string(), v.trim().to_string()));
                    }
                }
                let mut body = vec![0u8; len];
                reader.read_exact(&mut body).unwrap();
                let req = Request {
                    method,
                    path,
                    headers,
                    body: String::from_utf8(body).unwrap(),
                };
                let reply = handler(&req);
                log.lock().unwrap().push(req);
                let mut out = format!(
                    "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
                    reply.status,
                    reply.body.len()
                );
                for (k, v) in &reply.headers {
                    out.push_str(&format!("{k}: {v}\r\n"));
                }
                out.push_str("\r\n");
                out.push_str(&reply.body);
                let _ = stream.write_all(out.as_bytes());
            }
        });
        Self { url, requests }
    }

    pub fn requests(&self) -> Vec<Request> {
        self.requests.lock().unwrap().clone()
    }
}
