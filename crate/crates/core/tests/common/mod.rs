//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use cxd::backends::{
    answer, DenoiserBackend, LatentPayload, MockDenoiser, PlannerBackend, PlannerRequest, TemplatePlanner,
};
use cxd::planner::{relation_holds, PlannerConfig};
use cxd::{build_plan, CompositionPlan, Lexicon};
use serde_json::{json, Value};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn scripted_dir() -> PathBuf {
    fixtures().join("scripted")
}

/// Golden checksum of the greenhouse plan painted with the mock denoiser,
/// 8 steps, seed 7, default 64x64x4 latent.
pub const GOLDEN_CHECKSUM: &str = "de8b56478656455f31dbff38c3b0ca205db811a325538061c03f25f7100e8625";

#[derive(Debug, Clone)]
pub struct CorpusRow {
    pub prompt: String,
    pub entities: usize,
    pub concepts: usize,
    pub spatial: usize,
    pub conflicts: usize,
}

impl CorpusRow {
    /// Complex when there are more than four concepts, any spatial relation
    /// or any conflicting pair.
    pub fn expected_complex(&self) -> bool {
        self.concepts > 4 || self.spatial > 0 || self.conflicts > 0
    }
}

pub fn corpus() -> Vec<CorpusRow> {
    let text = std::fs::read_to_string(fixtures().join("corpus.tsv")).expect("corpus fixture");
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            assert_eq!(cols.len(), 5, "corpus line {line:?}");
            let n = |i: usize| cols[i].trim().parse::<usize>().expect("count column");
            CorpusRow {
                prompt: cols[0].to_string(),
                entities: n(1),
                concepts: n(2),
                spatial: n(3),
                conflicts: n(4),
            }
        })
        .collect()
}

/// `(name, prompt)` pairs of the scenes with recorded planner replies.
pub fn scenes() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(fixtures().join("scenes.tsv")).expect("scenes fixture");
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (name, prompt) = l.split_once('\t').expect("name<TAB>prompt");
            (name.to_string(), prompt.to_string())
        })
        .collect()
}

pub fn scene(name: &str) -> String {
    scenes().into_iter().find(|(n, _)| n == name).map(|(_, p)| p).unwrap_or_else(|| panic!("no scene {name}"))
}

/// Checks a finished plan against the decomposition criteria; returns the
/// first violation.
pub fn check_plan(plan: &CompositionPlan, lexicon: &Lexicon, config: &PlannerConfig) -> Result<(), String> {
    plan.validate().map_err(|e| e.to_string())?;
    let analysis =
        cxd::analyze(plan.complex_prompt.as_str(), lexicon, &config.thresholds).map_err(|e| e.to_string())?;
    let limit = config.thresholds.max_simple_concepts;
    let prompts = plan.foreground.iter().map(|p| &p.prompt).chain(std::iter::once(&plan.background));
    for p in prompts.clone() {
        if p.concept_count > limit {
            return Err(format!("'{}' has {} concepts", p.text, p.concept_count));
        }
        for c in &analysis.conflicts {
            if p.entity_ids.contains(&c.a) && p.entity_ids.contains(&c.b) {
                return Err(format!("'{}' holds conflicting entities {} and {}", p.text, c.a, c.b));
            }
        }
    }
    let region_of = |id: usize| plan.foreground.iter().find(|p| p.prompt.entity_ids.contains(&id));
    for r in &analysis.spatial {
        let (Some(s), Some(o)) = (region_of(r.subject), region_of(r.object)) else {
            return Err(format!("related entities {} and {} are not both placed", r.subject, r.object));
        };
        if std::ptr::eq(s, o) {
            return Err(format!("related entities share '{}'", s.prompt.text));
        }
        if !relation_holds(r.kind, &s.bbox, &o.bbox) {
            return Err(format!(
                "'{}' is not {} '{}': {:?} vs {:?}",
                s.prompt.text,
                r.kind.as_str(),
                o.prompt.text,
                s.bbox,
                o.bbox
            ));
        }
    }
    let mut placed: Vec<usize> = prompts.flat_map(|p| p.entity_ids.iter().copied()).collect();
    placed.sort_unstable();
    let ids: Vec<usize> = analysis.entities.iter().map(|e| e.id).collect();
    if placed != ids {
        return Err(format!("entities {placed:?} placed, {ids:?} extracted"));
    }
    Ok(())
}

/// The conformance suite every planner backend must pass: planning each
/// prompt succeeds (every reply is validated by the planner), replies
/// survive a trip through their wire form, and the plan meets the
/// decomposition criteria.
pub fn conformance(backend: &dyn PlannerBackend, prompts: &[String]) -> Result<usize, String> {
    let lexicon = Lexicon::builtin();
    let config = PlannerConfig::default();
    for prompt in prompts {
        let plan = build_plan(prompt, backend, &lexicon, &config)
            .map_err(|e| format!("{} planning '{prompt}': {e}", backend.name()))?;
        check_plan(&plan, &lexicon, &config).map_err(|e| format!("{} on '{prompt}': {e}", backend.name()))?;
        let back = CompositionPlan::from_json(&plan.to_json()).map_err(|e| e.to_string())?;
        if back != plan {
            return Err(format!("plan for '{prompt}' does not round-trip"));
        }
    }
    Ok(prompts.len())
}

/// What a fake endpoint does with one request.
#[derive(Debug, Clone)]
pub enum Reply {
    Json(u16, String),
    /// Sleeps before answering 200 with the body.
    Slow(Duration, String),
}

#[derive(Debug, Clone)]
pub struct Hit {
    pub path: String,
    pub body: String,
    pub authorization: Option<String>,
}

type Handler = dyn Fn(&Hit, usize) -> Reply + Send + Sync;

/// Minimal HTTP/1.1 server on a loopback port. Each connection carries one
/// request and is closed after the reply.
pub struct FakeServer {
    pub url: String,
    hits: Arc<Mutex<Vec<Hit>>>,
}

impl FakeServer {
    /// `handler` gets the request and its zero-based index among all hits.
    pub fn start(handler: impl Fn(&Hit, usize) -> Reply + Send + Sync + 'static) -> FakeServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let shared = Arc::clone(&hits);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let hits = Arc::clone(&shared);
                let handler = Arc::clone(&handler);
                thread::spawn(move || serve(stream, &hits, handler.as_ref()));
            }
        });
        FakeServer { url, hits }
    }

    pub fn hits(&self) -> Vec<Hit> {
        self.hits.lock().unwrap().clone()
    }

    pub fn count(&self) -> usize {
        self.hits.lock().unwrap().len()
    }
}

fn serve(stream: TcpStream, hits: &Mutex<Vec<Hit>>, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut length = 0;
    let mut authorization = None;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header).unwrap_or(0) == 0 || header.trim().is_empty() {
            break;
        }
        let (name, value) = header.split_once(':').unwrap_or((&header, ""));
        match name.trim().to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().unwrap_or(0),
            "authorization" => authorization = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let hit = Hit { path, body: String::from_utf8_lossy(&body).into_owned(), authorization };
    let index = {
        let mut hits = hits.lock().unwrap();
        hits.push(hit.clone());
        hits.len() - 1
    };
    let (status, body) = match handler(&hit, index) {
        Reply::Json(status, body) => (status, body),
        Reply::Slow(delay, body) => {
            thread::sleep(delay);
            (200, body)
        }
    };
    let mut stream = stream;
    let head = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(body.as_bytes());
    let _ = stream.flush();
}

pub fn ok(value: Value) -> Reply {
    Reply::Json(200, value.to_string())
}

/// A planner service fronting `backend`.
pub fn planner_server(backend: impl PlannerBackend + 'static) -> FakeServer {
    FakeServer::start(move |hit, _| {
        let req: PlannerRequest = match serde_json::from_str(&hit.body) {
            Ok(r) => r,
            Err(e) => return Reply::Json(400, json!({ "error": e.to_string() }).to_string()),
        };
        match answer(&backend, &req) {
            Ok(v) => ok(v),
            Err(e) => Reply::Json(422, json!({ "error": e.to_string() }).to_string()),
        }
    })
}

pub fn template_planner_server() -> FakeServer {
    planner_server(TemplatePlanner)
}

/// A diffusion service built on the mock denoiser: `/denoise` steps the
/// latent, `/decode` names the latent by its checksum, `/retouch` tags the
/// image it was given.
pub fn diffusion_server() -> FakeServer {
    FakeServer::start(|hit, _| {
        let body: Value = serde_json::from_str(&hit.body).unwrap_or(Value::Null);
        let latent = || -> Option<cxd::LatentGrid> {
            let payload: LatentPayload = serde_json::from_value(body["latent"].clone()).ok()?;
            payload.into_grid().ok()
        };
        match hit.path.as_str() {
            "/denoise" => {
                let (Some(z), Some(prompt)) = (latent(), body["prompt"].as_str()) else {
                    return Reply::Json(400, "{}".into());
                };
                let step = body["step"].as_u64().unwrap_or(0) as usize;
                let total = body["total_steps"].as_u64().unwrap_or(0) as usize;
                let out = MockDenoiser.denoise(&z, prompt, step, total).expect("mock denoise");
                ok(serde_json::to_value(LatentPayload::from(&out)).unwrap())
            }
            "/decode" => match latent() {
                Some(z) => ok(json!({ "image_ref": format!("mem://decoded/{}", &z.checksum()[..16]) })),
                None => Reply::Json(400, "{}".into()),
            },
            "/retouch" => {
                let image = body["image_ref"].as_str().unwrap_or("");
                ok(json!({ "image_ref": format!("{image}+retouched") }))
            }
            _ => Reply::Json(404, "{}".into()),
        }
    })
}
