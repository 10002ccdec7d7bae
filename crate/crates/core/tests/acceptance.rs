//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{
    check_plan, conformance, corpus, diffusion_server, fixtures, ok, scenes, scripted_dir, FakeServer, Reply,
    GOLDEN_CHECKSUM,
};
use cxd::backends::{DenoiserBackend, ScriptedPlanner, TemplatePlanner};
use cxd::backends::{HttpClient, LayoutItem, LayoutRequest, MockDenoiser, PlannerBackend, RemotePlanner};
use cxd::composer::{
    blend, composite_regions, cross_attention, enhance, initial_noise, resize_box, softmax_rows, suppress,
    AttentionWeights, Matrix, PromptEmbedding, DEFAULT_SHAPE,
};
use cxd::planner::PlannerConfig;
use cxd::{
    build_plan, run_sampling, BackendError, BoundingBox, CompositionPlan, LatentGrid, LatentShape, Lexicon,
    ModulationParams, PlanError, RegionMask,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn random_shape(rng: &mut ChaCha8Rng, max: usize) -> LatentShape {
    LatentShape::new(rng.gen_range(1..=max), rng.gen_range(1..=max), rng.gen_range(1..=4))
}

fn random_grid(rng: &mut ChaCha8Rng, shape: LatentShape) -> LatentGrid {
    let values = (0..shape.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
    LatentGrid::new(shape, values).unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, shape: LatentShape) -> RegionMask {
    let density: f64 = rng.gen();
    let bits = (0..shape.cells()).map(|_| rng.gen_bool(density)).collect();
    RegionMask::new(shape.height, shape.width, bits).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let mut span = || {
        let (a, b): (f64, f64) = (rng.gen_range(0.0..0.9), rng.gen_range(0.0..1.0));
        let lo = a.min(b);
        (lo, a.max(b).max(lo + 0.01).min(1.0))
    };
    let ((x0, x1), (y0, y1)) = (span(), span());
    BoundingBox::from_edges(x0, y0, x1, y1).unwrap()
}

/// Brute-force modulation: per-channel extreme over all cells, then the
/// affine pull `(1 - λ)·z + λ·target` on the selected cells.
fn oracle_modulate(z: &LatentGrid, mask: &RegionMask, lambda: f64, inside: bool, use_max: bool) -> Vec<f64> {
    let s = z.shape();
    let mut target = vec![if use_max { f64::NEG_INFINITY } else { f64::INFINITY }; s.channels];
    for r in 0..s.height {
        for c in 0..s.width {
            for ch in 0..s.channels {
                let v = z.get(r, c, ch);
                target[ch] = if use_max { target[ch].max(v) } else { target[ch].min(v) };
            }
        }
    }
    let mut out = Vec::with_capacity(s.len());
    for r in 0..s.height {
        for c in 0..s.width {
            for ch in 0..s.channels {
                let v = z.get(r, c, ch);
                out.push(if mask.get(r, c) == inside { (1.0 - lambda) * v + lambda * target[ch] } else { v });
            }
        }
    }
    out
}

const LAMBDAS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

fn modulation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11ce);
    let samples = 1200;
    let mut checked = 0usize;
    for _ in 0..samples {
        let shape = random_shape(&mut rng, 16);
        let z = random_grid(&mut rng, shape);
        let mask = random_mask(&mut rng, shape);
        let (max, min) = (z.channel_max(), z.channel_min());
        let mut prev_enh: Option<LatentGrid> = None;
        let mut prev_sup: Option<LatentGrid> = None;
        for lambda in LAMBDAS {
            let enh = enhance(&z, &mask, lambda).map_err(|e| e.to_string())?;
            let sup = suppress(&z, &mask, lambda).map_err(|e| e.to_string())?;
            let want_enh = oracle_modulate(&z, &mask, lambda, true, true);
            let want_sup = oracle_modulate(&z, &mask, lambda, false, false);
            for (i, ((&e, &s), (&we, &ws))) in
                enh.values().iter().zip(sup.values()).zip(want_enh.iter().zip(&want_sup)).enumerate()
            {
                ensure!((e - we).abs() <= 1e-12, "enhance λ={lambda} value {i}: {e} vs {we}");
                ensure!((s - ws).abs() <= 1e-12, "suppress λ={lambda} value {i}: {s} vs {ws}");
                let (cell, ch) = (i / shape.channels, i % shape.channels);
                let input = z.values()[i];
                if mask.bits()[cell] {
                    ensure!(input <= e && e <= max[ch], "enhance bounds at {i}");
                    ensure!(s == input, "suppress touched masked value {i}");
                } else {
                    ensure!(min[ch] <= s && s <= input, "suppress bounds at {i}");
                    ensure!(e == input, "enhance touched unmasked value {i}");
                }
                checked += 2;
            }
            if let (Some(pe), Some(ps)) = (&prev_enh, &prev_sup) {
                for i in 0..shape.len() {
                    ensure!(enh.values()[i] >= pe.values()[i], "enhance not monotone in λ at {i}");
                    ensure!(sup.values()[i] <= ps.values()[i], "suppress not monotone in λ at {i}");
                }
            }
            prev_enh = Some(enh);
            prev_sup = Some(sup);
        }
    }
    Ok(format!("{samples} grids x {} λ values, {checked} values checked", LAMBDAS.len()))
}

fn composite_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0_3b05);
    let plans = 600;
    let (mut full_cover, mut no_cover) = (0, 0);
    for n in 0..plans {
        let shape = random_shape(&mut rng, 16);
        let count = rng.gen_range(1..=5);
        let mut boxes: Vec<BoundingBox> = (0..count).map(|_| random_box(&mut rng)).collect();
        match n % 10 {
            0 => boxes[0] = BoundingBox::full(),
            1 => boxes.clear(),
            _ => {}
        }
        // plans list regions largest first
        boxes.sort_by(|a, b| b.area().total_cmp(&a.area()));
        // every source has values no other source has: integer part tags the source
        let tagged = |tag: usize, rng: &mut ChaCha8Rng| {
            let values = (0..shape.len()).map(|_| tag as f64 * 10.0 + rng.gen_range(0.0..1.0)).collect();
            LatentGrid::new(shape, values).unwrap()
        };
        let background = tagged(0, &mut rng);
        let regions: Vec<(LatentGrid, RegionMask)> = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| (tagged(i + 1, &mut rng), resize_box(b, shape.height, shape.width)))
            .collect();
        let out = composite_regions(&regions, Some(&background)).map_err(|e| e.to_string())?;
        let mut covered = 0;
        for cell in 0..shape.cells() {
            let writer = regions.iter().rposition(|(_, m)| m.bits()[cell]);
            covered += usize::from(writer.is_some());
            let sources: Vec<&LatentGrid> =
                std::iter::once(&background).chain(regions.iter().map(|(g, _)| g)).collect();
            let cell_values =
                |g: &LatentGrid| g.values()[cell * shape.channels..(cell + 1) * shape.channels].to_vec();
            let got = cell_values(&out);
            let matches: Vec<usize> =
                (0..sources.len()).filter(|&i| cell_values(sources[i]) == got).collect();
            let expected = writer.map_or(0, |w| w + 1);
            ensure!(
                matches == [expected],
                "plan {n} cell {cell}: from {matches:?}, expected source {expected}"
            );
        }
        if covered == shape.cells() {
            full_cover += 1;
        }
        if covered == 0 {
            no_cover += 1;
        }
    }
    // with no regions and no background there is nothing to composite
    ensure!(composite_regions(&[], None).is_err(), "empty composite accepted");
    ensure!(full_cover > 0 && no_cover > 0, "degenerate cases missing: {full_cover} full, {no_cover} empty");
    Ok(format!("{plans} plans, {full_cover} fully covered, {no_cover} uncovered"))
}

fn blend_and_attention() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb1e4d);
    for _ in 0..300 {
        let shape = random_shape(&mut rng, 8);
        let (a, b) = (random_grid(&mut rng, shape), random_grid(&mut rng, shape));
        let one = blend(&a, &b, 1.0).map_err(|e| e.to_string())?;
        let zero = blend(&a, &b, 0.0).map_err(|e| e.to_string())?;
        ensure!(one == a && zero == b, "blend endpoints are not exact");
        let omega = rng.gen_range(0.0..=1.0);
        let mixed = blend(&a, &b, omega).map_err(|e| e.to_string())?;
        for ((&m, &x), &y) in mixed.values().iter().zip(a.values()).zip(b.values()) {
            ensure!(x.min(y) <= m && m <= x.max(y), "blend ω={omega} leaves [{x}, {y}] with {m}");
        }
    }

    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let (rows, cols) = (rng.gen_range(1..=12), rng.gen_range(1..=12));
        let scale = [1.0, 50.0, 1000.0][rng.gen_range(0..3)];
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        let mut m = Matrix::new(rows, cols, data).unwrap();
        softmax_rows(&mut m);
        for r in 0..rows {
            worst = worst.max((m.row(r).iter().sum::<f64>() - 1.0).abs());
        }
    }
    // attention rows through the full kernel: with every value row equal to
    // ones, each output entry is the row sum of the attention weights
    for _ in 0..200 {
        let (cells, tokens, embed, dim) =
            (rng.gen_range(1..=16), rng.gen_range(1..=8), rng.gen_range(1..=6), rng.gen_range(1..=4));
        let mut fill = |r: usize, c: usize| {
            Matrix::new(r, c, (0..r * c).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
        };
        let queries = fill(cells, 3);
        let wq = fill(3, dim);
        let wk = fill(embed + 1, dim);
        let mut prompt = fill(tokens, embed + 1).data().to_vec();
        for t in 0..tokens {
            prompt[t * (embed + 1) + embed] = 1.0;
        }
        let prompt = PromptEmbedding::new(Matrix::new(tokens, embed + 1, prompt).unwrap()).unwrap();
        let mut wv = vec![0.0; (embed + 1) * dim];
        for d in 0..dim {
            wv[embed * dim + d] = 1.0;
        }
        let weights = AttentionWeights::new(wq, wk, Matrix::new(embed + 1, dim, wv).unwrap()).unwrap();
        let out = cross_attention(&queries, &prompt, &weights).map_err(|e| e.to_string())?;
        for &v in out.data() {
            worst = worst.max((v - 1.0).abs());
        }
    }
    ensure!(worst <= 1e-6, "softmax row sum off by {worst}");
    Ok(format!("blend identities and convexity on 300 pairs, worst row-sum error {worst:.1e}"))
}

fn corpus_compliance() -> Outcome {
    let rows = corpus();
    ensure!(rows.len() >= 50, "corpus has only {} prompts", rows.len());
    let lexicon = Lexicon::builtin();
    let config = PlannerConfig::default();
    let mut prompts = 0;
    for row in &rows {
        let plan = build_plan(&row.prompt, &TemplatePlanner, &lexicon, &config)
            .map_err(|e| format!("'{}': {e}", row.prompt))?;
        check_plan(&plan, &lexicon, &config).map_err(|e| format!("'{}': {e}", row.prompt))?;
        prompts += plan.foreground.len() + 1;
    }
    let has = |f: &dyn Fn(&common::CorpusRow) -> bool| rows.iter().any(f);
    ensure!(has(&|r| (3..=6).contains(&r.entities)), "no prompt with 3-6 entities");
    ensure!(has(&|r| (4..=5).contains(&r.concepts)), "no prompt with 4-5 concepts");
    ensure!(has(&|r| r.spatial > 0), "no spatial prompt");
    ensure!(has(&|r| r.conflicts > 0), "no conflicting prompt");
    Ok(format!("{} prompts, {prompts} simple prompts compliant", rows.len()))
}

fn classifier_agreement() -> Outcome {
    let rows = corpus();
    let lexicon = Lexicon::builtin();
    let config = PlannerConfig::default();
    for row in &rows {
        let a = cxd::analyze(&row.prompt, &lexicon, &config.thresholds).map_err(|e| e.to_string())?;
        let counts = (a.entities.len(), a.report.concept_count, a.spatial.len(), a.conflicts.len());
        ensure!(
            counts == (row.entities, row.concepts, row.spatial, row.conflicts),
            "'{}': analyzer counts {counts:?} differ from the annotation",
            row.prompt
        );
        let complex = a.report.verdict == cxd::Verdict::Complex;
        ensure!(complex == row.expected_complex(), "'{}': verdict {:?}", row.prompt, a.report.verdict);
    }
    let complex = rows.iter().filter(|r| r.expected_complex()).count();
    Ok(format!("{} prompts agree ({complex} complex, {} simple)", rows.len(), rows.len() - complex))
}

fn end_to_end_determinism() -> Outcome {
    let plan_path = fixtures().join("greenhouse.plan.json");
    let plan = CompositionPlan::from_json(&std::fs::read_to_string(&plan_path).unwrap())
        .map_err(|e| e.to_string())?;
    let params = ModulationParams { steps: 8, seed: 7, ..ModulationParams::default() };
    let z = run_sampling(&plan, &params, DEFAULT_SHAPE, &MockDenoiser).map_err(|e| e.to_string())?;
    ensure!(z.checksum() == GOLDEN_CHECKSUM, "library checksum {}", z.checksum());

    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cxd"))
        .current_dir(dir.path())
        .args(["paint", &plan_path.display().to_string(), "--steps", "8", "--seed", "7"])
        .output()
        .map_err(|e| e.to_string())?;
    let reply: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    ensure!(reply["checksum"] == GOLDEN_CHECKSUM, "paint command checksum {}", reply["checksum"]);

    // modulation off: one full-grid region, λ = 0, ω = 1
    let mut single = build_plan("a cat", &TemplatePlanner, &Lexicon::builtin(), &PlannerConfig::default())
        .map_err(|e| e.to_string())?;
    single.foreground[0].bbox = BoundingBox::full();
    let off = ModulationParams { lambda_pos: 0.0, lambda_neg: 0.0, omega: 1.0, steps: 6, seed: 3 };
    let shape = LatentShape::new(16, 16, 4);
    let sampled = run_sampling(&single, &off, shape, &MockDenoiser).map_err(|e| e.to_string())?;
    let mut raw = initial_noise(shape, off.seed).map_err(|e| e.to_string())?;
    for t in (1..=off.steps).rev() {
        raw = MockDenoiser
            .denoise(&raw, &single.foreground[0].prompt.text, t, off.steps)
            .map_err(|e| e.to_string())?;
    }
    ensure!(sampled == raw, "disabled modulation diverges from the raw trajectory");
    Ok(format!("golden {}… reproduced; raw trajectory matched bit for bit", &GOLDEN_CHECKSUM[..12]))
}

fn layout_request() -> LayoutRequest {
    LayoutRequest { prompts: vec![LayoutItem { text: "a cat".into(), concept_count: 1 }], relations: vec![] }
}

fn failure(server: &FakeServer, timeout: Duration) -> BackendError {
    let client = HttpClient::new(timeout).unwrap();
    match RemotePlanner::new(client, &server.url).layout(&layout_request()) {
        Err(PlanError::BackendFailure(e)) => e,
        other => panic!("expected a backend failure, got {other:?}"),
    }
}

fn backend_conformance() -> Outcome {
    let corpus_prompts: Vec<String> = corpus().into_iter().map(|r| r.prompt).collect();
    let scene_prompts: Vec<String> = scenes().into_iter().map(|(_, p)| p).collect();
    let template = conformance(&TemplatePlanner, &corpus_prompts)?;
    let scripted = conformance(&ScriptedPlanner::new(scripted_dir()), &scene_prompts)?;

    let slow = FakeServer::start(|_, _| Reply::Slow(Duration::from_millis(800), "{\"boxes\": []}".into()));
    let e = failure(&slow, Duration::from_millis(150));
    ensure!(matches!(e, BackendError::Timeout { .. }), "timeout mapped to {e:?}");

    let broken = FakeServer::start(|_, _| Reply::Json(500, "down".into()));
    let e = failure(&broken, Duration::from_secs(5));
    ensure!(matches!(e, BackendError::BadStatus { status: 500, .. }), "500 mapped to {e:?}");
    ensure!(broken.count() == 2, "500 was tried {} times", broken.count());

    let truncated = FakeServer::start(|_, _| Reply::Json(200, "{\"boxes\": [[0.1".into()));
    let e = failure(&truncated, Duration::from_secs(5));
    ensure!(matches!(e, BackendError::MalformedReply { .. }), "truncated JSON mapped to {e:?}");

    let wrong = FakeServer::start(|_, _| {
        ok(serde_json::json!({ "boxes": [[0.1, 0.1, 0.2, 0.2], [0.5, 0.5, 0.2, 0.2]] }))
    });
    let client = HttpClient::new(Duration::from_secs(5)).unwrap();
    let err = build_plan(
        "a cat on a table",
        &RemotePlanner::new(client, &wrong.url),
        &Lexicon::builtin(),
        &PlannerConfig::default(),
    );
    ensure!(matches!(err, Err(PlanError::BackendFailure(_))), "schema-violating reply accepted: {err:?}");

    // the remote denoiser returns what the local mock computes
    let diffusion = diffusion_server();
    let remote =
        cxd::backends::RemoteDenoiser::new(HttpClient::new(Duration::from_secs(5)).unwrap(), &diffusion.url);
    let z = initial_noise(LatentShape::new(4, 4, 2), 1).unwrap();
    let (a, b) = (remote.denoise(&z, "a cat", 1, 1), MockDenoiser.denoise(&z, "a cat", 1, 1));
    ensure!(a.as_ref().ok() == b.as_ref().ok(), "remote denoise differs from the mock");

    Ok(format!("template on {template} prompts, scripted on {scripted} scenes; timeout, status and parse failures mapped"))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "modulation oracle",
            budget: Some(Duration::from_secs(10)),
            run: modulation_oracle,
        },
        Criterion {
            name: "composite partition",
            budget: Some(Duration::from_secs(5)),
            run: composite_partition,
        },
        Criterion { name: "blend and attention algebra", budget: None, run: blend_and_attention },
        Criterion { name: "corpus compliance", budget: Some(Duration::from_secs(5)), run: corpus_compliance },
        Criterion { name: "complexity classifier", budget: None, run: classifier_agreement },
        Criterion { name: "end-to-end determinism", budget: None, run: end_to_end_determinism },
        Criterion { name: "backend conformance", budget: None, run: backend_conformance },
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = t.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(budget)) if elapsed > budget => {
                Err(format!("took {elapsed:.2?}, budget {budget:?}"))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {} {}: {detail} ({elapsed:.2?})", i + 1, c.name),
            Err(reason) => {
                failed += 1;
                println!("FAIL {} {}: {reason} ({elapsed:.2?})", i + 1, c.name);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.2?}",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
