//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use netlingua_core::agent::{
    drive, read_transcript, replay_session, start_session, AgentConfig, ChatCompletionsBackend, LlmBackend, MockBackend,
    MockScript, Phase, TurnAction, TurnRecord,
};
use netlingua_core::eval::{self, Aggregates, BackendSpec, RunReport, RunSpec, TrialKey, Variant};
use netlingua_core::fixtures;
use netlingua_core::memory::{EmbeddingBackend, HashingEmbedder, HttpEmbedder, MemoryStore, Mode, StoreKind};
use netlingua_core::nile::{self, NileFailure, NileIntent, NileRecord, NileRepairOutcome};
use netlingua_core::state::{
    apply_change_set, diff_states, tree_get, Action, ChangeOp, ChangeSet, InstanceNode, NetworkState,
};
use netlingua_core::validator::{validate_after_apply, Rule, Status, VerificationReport};
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::Value;

const MUST_MESSAGE: &str = "Must condition (current() = ../../INTERFACE_LIST[name=current()]/name) not satisfied";
const GOLDEN_LIMIT: Duration = Duration::from_secs(5);
const ENGINE_LIMIT: Duration = Duration::from_secs(30);
const ENGINE_CASES: u32 = 1000;
const RETRIEVAL_K: usize = 8;
/// Lowest oracle cosine between the query and a PORT document, frozen from
/// the exhaustive search over the Clos fixture.
const PORT_FLOOR_NL: f64 = 0.382_999_128_237_757_6;
const PORT_FLOOR_RAW: f64 = 0.254_271_057_595_807;
const SCORE_TOL: f64 = 1e-12;
const AGGREGATE_TOL: f64 = 1e-9;
const YANG_CAP: u32 = 5;
const NILE_CAP: u32 = 8;
const DELETION_FLOOR: f64 = 0.95;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn report_of(t: &TurnRecord) -> VerificationReport {
    serde_json::from_value(t.payload.clone()).expect("verify payload is a report")
}

fn prefixes(state: &NetworkState, device: &str) -> Vec<(String, String)> {
    let list = ["sonic-interface", "INTERFACE", "INTERFACE_IPPREFIX_LIST"];
    match tree_get(&state.devices[device].tree, &list) {
        Some(InstanceNode::List(entries)) => entries.keys().map(|k| (k[0].clone(), k[1].clone())).collect(),
        _ => Vec::new(),
    }
}

/// Host address and mask of a 10.1.1.0/30-family prefix.
fn slash30(prefix: &str) -> Option<(u32, u32)> {
    let (addr, len) = prefix.split_once('/')?;
    let ip: Ipv4Addr = addr.parse().ok()?;
    let [a, b, c, host] = ip.octets();
    let usable = matches!(host % 4, 1 | 2);
    ((a, b, c) == (10, 1, 1) && len == "30" && usable).then_some((u32::from(ip), u32::from(ip) & !3))
}

fn golden_checks(turns: &[TurnRecord], deployed: Option<&NetworkState>) -> Result<(), String> {
    let verifies: Vec<(usize, VerificationReport)> = turns
        .iter()
        .enumerate()
        .filter(|(_, t)| t.action == TurnAction::Verify)
        .map(|(i, t)| (i, report_of(t)))
        .collect();
    let (fail_at, failing) = verifies
        .iter()
        .find(|(_, r)| r.status == Status::Fail)
        .ok_or("no failing verification")?;
    let must: Vec<_> = failing.errors().filter(|f| f.rule == Rule::MustViolation).collect();
    ensure(!must.is_empty(), || "no must-violation finding".into())?;
    for f in &must {
        ensure(squash(&f.message) == squash(MUST_MESSAGE), || format!("message was {:?}", f.message))?;
    }
    let repair = turns[*fail_at..]
        .iter()
        .position(|t| t.action == TurnAction::RepairGenerate)
        .map(|p| p + fail_at)
        .ok_or("no repair turn after the failure")?;
    let (_, after) = verifies.iter().find(|(i, _)| *i > repair).ok_or("no verification after the repair")?;
    ensure(after.passed(), || format!("report after repair: {}", after.error_log()))?;

    let state = deployed.ok_or("nothing deployed")?;
    let mut subnets: Vec<(u32, &str)> = Vec::new();
    for d in fixtures::CLOS_DEVICES {
        let on_e4: Vec<String> = prefixes(state, d).into_iter().filter(|(p, _)| p == "Ethernet4").map(|(_, a)| a).collect();
        ensure(on_e4.len() == 1, || format!("{d} Ethernet4 carries {on_e4:?}"))?;
        let (_, net) = slash30(&on_e4[0]).ok_or_else(|| format!("{d} Ethernet4 has {}", on_e4[0]))?;
        subnets.push((net, d));
    }
    // each /30 joins exactly one leaf to one spine
    subnets.sort();
    for pair in subnets.chunks(2) {
        let ok = pair.len() == 2 && pair[0].0 == pair[1].0 && pair[0].1.as_bytes()[0] != pair[1].1.as_bytes()[0];
        ensure(ok, || format!("subnets do not pair a leaf with a spine: {subnets:?}"))?;
    }
    Ok(())
}

fn golden_transcript() -> Outcome {
    let start = Instant::now();
    let w = fixtures::walkthrough();
    let ctx = fixtures::agent_context(Arc::new(MockBackend::new(w.script).map_err(|e| e.to_string())?));
    let mut s = start_session(&w.query, fixtures::clos_state(), AgentConfig::default()).map_err(|e| e.to_string())?;
    drive(&mut s, &ctx, w.replies).map_err(|e| e.to_string())?;
    ensure(s.phase == Phase::Done, || format!("scripted run ended in {:?}", s.phase))?;
    golden_checks(&s.turns, s.deployed_state.as_ref())?;

    let recorded = read_transcript(fixtures::WALKTHROUGH_TRANSCRIPT).map_err(|e| e.to_string())?;
    let empty = fixtures::agent_context(Arc::new(MockBackend::new(MockScript::default()).map_err(|e| e.to_string())?));
    let r = replay_session(&recorded, fixtures::clos_state(), AgentConfig::default(), &empty).map_err(|e| e.to_string())?;
    ensure(r.phase == Phase::Done, || format!("replay ended in {:?}", r.phase))?;
    golden_checks(&r.turns, r.deployed_state.as_ref())?;
    let actions = |ts: &[TurnRecord]| ts.iter().map(|t| t.action).collect::<Vec<_>>();
    ensure(actions(&recorded) == actions(&r.turns), || "replayed actions differ from the recording".into())?;

    let took = start.elapsed();
    ensure(took < GOLDEN_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{} turns, replay matches, {:.2} s", r.turns.len(), took.as_secs_f64()))
}

fn change_set_engine() -> Outcome {
    let start = Instant::now();
    let schema = common::schema();
    let text = include_str!("../fixtures/changesets/exemplar-s0.py");
    let cs = netlingua_core::agent::parse_python_literal(text)
        .map_err(|e| e.to_string())
        .and_then(|v| ChangeSet::from_value(v).map_err(|e| e.to_string()))?;
    let next = apply_change_set(&fixtures::clos_state(), &cs, schema).map_err(|e| e.to_string())?;
    let on_e8: Vec<String> = prefixes(&next, "S0").into_iter().filter(|(p, _)| p == "Ethernet8").map(|(_, a)| a).collect();
    ensure(on_e8 == ["10.0.5.1/24"], || format!("S0 Ethernet8 carries {on_e8:?}"))?;

    let mut runner = TestRunner::new(Config {
        cases: ENGINE_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let pairs = (common::states(), common::states(), 0usize..4, 0usize..4);
    let identity_checked = std::cell::Cell::new(0u32);
    runner
        .run(&pairs, |(a, b, p, ip)| {
            // append then remove restores the state
            let op = ChangeOp::new(Action::Append, common::ipprefix_path())
                .with("name", common::PORTS[p])
                .with("ip-prefix", common::PREFIXES[ip]);
            let mut add = ChangeSet::new();
            add.push("L0", op.clone());
            if let Ok(mid) = apply_change_set(&a, &add, schema) {
                let mut del = ChangeSet::new();
                del.push("L0", ChangeOp { action: Action::Remove, ..op });
                let back = apply_change_set(&mid, &del, schema).map_err(|e| TestCaseError::fail(e.to_string()))?;
                if back.devices != a.devices {
                    return Err(TestCaseError::fail("append then remove changed the state"));
                }
                identity_checked.set(identity_checked.get() + 1);
            }
            // the diff of two states takes one to the other
            let d = diff_states(&a, &b, schema).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let got = apply_change_set(&a, &d, schema).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if got.devices != b.devices {
                return Err(TestCaseError::fail("diff did not reproduce the target"));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let identity_checked = identity_checked.get();
    ensure(identity_checked > ENGINE_CASES / 2, || format!("only {identity_checked} identity cases applied"))?;
    let took = start.elapsed();
    ensure(took < ENGINE_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{ENGINE_CASES} random state pairs, {:.2} s", took.as_secs_f64()))
}

fn mutation_kit() -> Outcome {
    use netlingua_core::validator::kit::{clean_cases, mutation_kit as kit};
    let schema = fixtures::schema();
    let state = fixtures::clos_state();
    let clean = clean_cases();
    let mutations = kit(&schema);
    ensure(clean.len() == 20, || format!("{} clean cases", clean.len()))?;
    ensure((35..=45).contains(&mutations.len()), || format!("{} mutations", mutations.len()))?;
    let kinds: BTreeSet<String> = mutations.iter().map(|m| format!("{:?}", m.kind)).collect();
    ensure(kinds.len() == 5, || format!("mutation kinds {kinds:?}"))?;
    let false_pos: Vec<&str> = clean
        .iter()
        .filter(|c| !validate_after_apply(&state, &c.change_set, &schema).passed())
        .map(|c| c.name.as_str())
        .collect();
    ensure(false_pos.is_empty(), || format!("false positives: {false_pos:?}"))?;
    let missed: Vec<&str> = mutations
        .iter()
        .filter(|m| {
            let r = validate_after_apply(&state, &m.change_set, &schema);
            r.passed() || !m.kind.expected_rules().iter().any(|rule| r.has_rule(*rule))
        })
        .map(|m| m.name.as_str())
        .collect();
    ensure(missed.is_empty(), || format!("undetected: {missed:?}"))?;
    Ok(format!("{}/{} mutations detected, 0/{} false positives", mutations.len(), mutations.len(), clean.len()))
}

/// Plain cosine, recomputed from the raw vectors.
fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn retrieval() -> Outcome {
    let schema = fixtures::schema();
    let modules = fixtures::schema_modules().map_err(|e| e.to_string())?;
    let state = fixtures::clos_state();
    let store = MemoryStore::offline();
    store.chunk_and_ingest(&state, &schema, &modules).map_err(|e| e.to_string())?;
    let docs = store.documents();

    for d in &docs {
        let mode = d.mode.unwrap_or_default();
        let hits = store.query_top_k(&d.text, d.store, 1, mode).map_err(|e| e.to_string())?;
        ensure(hits[0].document.doc_id == d.doc_id, || format!("{} retrieved {}", d.doc_id, hits[0].document.doc_id))?;
    }

    let embedder = HashingEmbedder::default();
    let query = embedder.embed(fixtures::CONNECT_ETHERNET4_QUERY).map_err(|e| e.to_string())?;
    let mut floors = Vec::new();
    for (mode, frozen) in [(Mode::Nl, PORT_FLOOR_NL), (Mode::Raw, PORT_FLOOR_RAW)] {
        let mut oracle: Vec<(f64, String)> = docs
            .iter()
            .filter(|d| d.store == StoreKind::State && d.mode == Some(mode))
            .map(|d| {
                let v = embedder.embed(&d.text).expect("offline embedding");
                (oracle_cosine(&query.values, &v.values), d.doc_id.clone())
            })
            .collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let hits = store
            .query_top_k(fixtures::CONNECT_ETHERNET4_QUERY, StoreKind::State, RETRIEVAL_K, mode)
            .map_err(|e| e.to_string())?;
        for (h, (score, id)) in hits.iter().zip(&oracle) {
            ensure((h.score - score).abs() < SCORE_TOL, || format!("{}: store {} oracle {score}", h.document.doc_id, h.score))?;
            ensure(h.document.doc_id == *id, || format!("rank {}: store {} oracle {id}", h.rank, h.document.doc_id))?;
        }
        let port: Vec<&(f64, String)> = oracle.iter().filter(|(_, id)| id.ends_with("/PORT")).collect();
        ensure(port.len() == 4, || format!("{} PORT documents", port.len()))?;
        let floor = port.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
        ensure((floor - frozen).abs() < SCORE_TOL, || format!("{mode:?} PORT floor {floor:.17} vs frozen {frozen}"))?;
        let threshold = oracle.get(RETRIEVAL_K - 1).map_or(f64::NEG_INFINITY, |(s, _)| *s);
        ensure(floor >= threshold, || format!("{mode:?}: PORT floor {floor} below rank-{RETRIEVAL_K} score {threshold}"))?;
        let ids: BTreeSet<&str> = hits.iter().map(|h| h.document.doc_id.as_str()).collect();
        for d in fixtures::CLOS_DEVICES {
            let id = format!("state/{}/{d}/PORT", if mode == Mode::Nl { "nl" } else { "raw" });
            ensure(ids.contains(id.as_str()), || format!("{id} not in top {RETRIEVAL_K}"))?;
        }
        floors.push(floor);
    }
    Ok(format!("{} documents self-retrieve, PORT floors {:.4}/{:.4}", docs.len(), floors[0], floors[1]))
}

fn faulty_and_valid() -> (String, String) {
    let w = fixtures::walkthrough();
    (w.script.calls[2].output.clone(), w.script.calls[3].output.clone())
}

fn loop_bounds() -> Outcome {
    let (faulty, _) = faulty_and_valid();
    // one session against an always-failing model
    let backend = Arc::new(MockBackend::new(MockScript::repeating(faulty.clone())).map_err(|e| e.to_string())?);
    let ctx = fixtures::agent_context(backend);
    let config = Variant::RetrievalNlVerifier.agent_config(YANG_CAP);
    let mut s = start_session(fixtures::CONNECT_ETHERNET4_QUERY, fixtures::clos_state(), config).map_err(|e| e.to_string())?;
    s.run_until_blocked(&ctx).map_err(|e| e.to_string())?;
    let repairs = s.turns.iter().filter(|t| t.action == TurnAction::RepairGenerate).count();
    ensure(s.phase == Phase::Failed, || format!("session ended in {:?}", s.phase))?;
    ensure(repairs == YANG_CAP as usize, || format!("{repairs} YANG repairs"))?;

    // the harness histogram over every trial
    let spec = RunSpec::new(BackendSpec::Mock { script: "unused.json".into() });
    let requests = eval::clos_requests();
    let failing = move |_: &TrialKey| -> Arc<dyn LlmBackend> { Arc::new(MockBackend::new(MockScript::repeating(faulty.clone())).unwrap()) };
    let report = eval::run(&spec, &requests, &fixtures::clos_state(), &fixtures::agent_context(null_backend()), &failing);
    for v in &report.variants {
        let a = &v.aggregates;
        ensure(a.histogram_total() == requests.len() * spec.trials as usize, || format!("{} histogram sums to {}", v.label, a.histogram_total()))?;
        let expect_iters = if v.variant == Variant::RetrievalNlOnly { 0 } else { YANG_CAP };
        ensure(v.rows.iter().all(|r| r.iterations == expect_iters && !r.deployable), || format!("{} rows exceed the cap", v.label))?;
    }

    // the Nile loop
    let bad = "```nile\ndefine intent x for endpoint('a') add middlebox('b')\n```".to_string();
    let nb = MockBackend::new(MockScript::repeating(bad.clone())).map_err(|e| e.to_string())?;
    let out = nile::iterative_repair_nile("block traffic", &nb, NILE_CAP);
    ensure(matches!(out.result, Err(NileFailure::BudgetExhausted(_))), || format!("{:?}", out.result))?;
    ensure(out.iterations_used == NILE_CAP && out.backend_calls == NILE_CAP + 1, || {
        format!("{} repairs, {} calls", out.iterations_used, out.backend_calls)
    })?;
    let records = nile::synthetic_dataset(24, 11);
    let backend_for = |_: &NileRecord| -> Arc<dyn LlmBackend> { Arc::new(MockBackend::new(MockScript::repeating(bad.clone())).unwrap()) };
    let nr = nile::evaluate_nile(&records, &backend_for, NILE_CAP, &nile::default_synonyms());
    ensure(nr.histogram_total() == records.len(), || format!("Nile histogram sums to {}", nr.histogram_total()))?;
    Ok(format!("YANG {YANG_CAP} repairs, Nile {NILE_CAP} repairs, histograms sum to 39 and {}", records.len()))
}

fn null_backend() -> Arc<dyn LlmBackend> {
    Arc::new(MockBackend::new(MockScript::default()).expect("empty script"))
}

#[derive(serde::Deserialize)]
struct Pair {
    name: String,
    gold_nile: String,
    predicted_nile: String,
    expected: Expected,
}

#[derive(serde::Deserialize)]
struct Expected {
    precision: f64,
    recall: f64,
    f1: f64,
    exact: bool,
    fuzzy: f64,
}

fn nile_metrics() -> Outcome {
    let syn = nile::default_synonyms();
    let pairs: Vec<Pair> = include_str!("../fixtures/nile/pairs.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    for p in &pairs {
        let gold: NileIntent = nile::parse_nile(&p.gold_nile).map_err(|e| format!("{}: {e}", p.name))?;
        let record = NileRecord {
            id: Some(p.name.clone()),
            split: None,
            utterance: String::new(),
            gold_entities: nile::intent_entities(&gold).into_iter().collect(),
            gold_nile: p.gold_nile.clone(),
        };
        let outcome = NileRepairOutcome {
            result: nile::parse_nile(&p.predicted_nile).map_err(NileFailure::BudgetExhausted),
            text: p.predicted_nile.clone(),
            iterations_used: 0,
            backend_calls: 1,
        };
        let row = nile::score_prediction(&record, &outcome, &syn);
        let e = &p.expected;
        // hand-computed fractions are stored as decimals; equality is to float round-off
        let same = (row.precision - e.precision).abs() < 1e-12
            && (row.recall - e.recall).abs() < 1e-12
            && (row.f1 - e.f1).abs() < 1e-12
            && row.exact == e.exact
            && (row.fuzzy - e.fuzzy).abs() < 1e-12;
        ensure(same, || format!("{}: got P {} R {} F1 {} exact {} fuzzy {}", p.name, row.precision, row.recall, row.f1, row.exact, row.fuzzy))?;
        ensure(row.fuzzy >= if row.exact { 1.0 } else { 0.0 }, || format!("{}: fuzzy below exact", p.name))?;
    }

    let (mut detected, mut total) = (0usize, 0usize);
    for text in nile::exemplars() {
        let tokens = nile::tokenize(text).map_err(|e| e.to_string())?;
        for skip in 0..tokens.len() {
            let mutated: Vec<&str> = tokens.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, t)| t.raw.as_str()).collect();
            total += 1;
            detected += nile::parse_nile(&mutated.join(" ")).is_err() as usize;
        }
    }
    let rate = detected as f64 / total as f64;
    ensure(rate >= DELETION_FLOOR, || format!("deletion detection {detected}/{total}"))?;
    Ok(format!("{} frozen pairs exact, deletions caught {detected}/{total} ({:.1}%)", pairs.len(), 100.0 * rate))
}

/// Per-trial scripts cycling through clean, malformed, violating and
/// never-fixed outputs.
fn cycling(k: &TrialKey) -> Arc<dyn LlmBackend> {
    let (faulty, valid) = faulty_and_valid();
    let v = Variant::ALL.iter().position(|x| *x == k.variant).unwrap_or(0);
    let script = match (k.input + k.trial as usize + v) % 4 {
        0 => MockScript::sequence([valid]),
        1 => MockScript::sequence(["No code block here.".to_string(), valid]),
        2 => MockScript::sequence([faulty, valid]),
        _ => MockScript::repeating(faulty),
    };
    Arc::new(MockBackend::new(script).expect("script"))
}

fn recompute_matches(rows: &[eval::TrialRow], a: &Aggregates, max: u32) -> Result<(), String> {
    let n = rows.len() as f64;
    let share = |f: &dyn Fn(&eval::TrialRow) -> bool| 100.0 * rows.iter().filter(|r| f(r)).count() as f64 / n;
    let checks = [
        ("syntax first", a.syntax_pass_initial, share(&|r| r.syntax_pass_initial)),
        ("syntax final", a.syntax_pass, share(&|r| r.syntax_pass)),
        ("deployable", a.deployable, share(&|r| r.deployable)),
        ("needs repair", a.needs_repair, share(&|r| r.iterations > 0)),
        (
            "mean latency",
            a.mean_latency.total_ms,
            rows.iter().map(|r| r.latency.total_ms).sum::<f64>() / n,
        ),
    ];
    for (name, got, want) in checks {
        ensure((got - want).abs() <= AGGREGATE_TOL, || format!("{name}: {got} vs {want}"))?;
    }
    let mut hist = vec![0usize; max as usize + 1];
    for r in rows.iter().filter(|r| r.deployable) {
        hist[r.iterations as usize] += 1;
    }
    ensure(hist == a.iteration_histogram, || format!("histogram {:?} vs {hist:?}", a.iteration_histogram))
}

fn harness_shape() -> Outcome {
    let spec = RunSpec::new(BackendSpec::Mock { script: "unused.json".into() });
    let requests = eval::clos_requests();
    ensure(requests.len() == 13, || format!("{} requests", requests.len()))?;
    let report: RunReport = eval::run(&spec, &requests, &fixtures::clos_state(), &fixtures::agent_context(null_backend()), &cycling);
    ensure(report.variants.len() == 4, || format!("{} variants", report.variants.len()))?;
    for v in &report.variants {
        ensure(v.rows.len() == 39, || format!("{}: {} rows", v.label, v.rows.len()))?;
        recompute_matches(&v.rows, &v.aggregates, spec.max_repair_iterations).map_err(|e| format!("{}: {e}", v.label))?;
    }
    let table = eval::markdown_table(&report);
    let body: Vec<&str> = table.lines().take_while(|l| l.starts_with('|')).skip(2).collect();
    ensure(body.len() == 4, || format!("table has {} rows", body.len()))?;
    for (line, v) in body.iter().zip(Variant::ALL) {
        ensure(line.starts_with(&format!("| {} |", v.label())), || format!("row {line}"))?;
    }
    let dir = std::env::temp_dir().join(format!("netlingua-acceptance-{}", std::process::id()));
    let written = eval::emit_report(&report, &dir, &[eval::Format::Json, eval::Format::Csv]).map_err(|e| e.to_string())?;
    let csv = std::fs::read_to_string(dir.join("trials.csv")).map_err(|e| e.to_string())?;
    let rows = csv.lines().count() - 1;
    let back: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    ensure(rows == 4 * 39, || format!("trials.csv has {rows} rows"))?;
    ensure(back["variants"].as_array().map_or(0, Vec::len) == 4, || "report.json variants".into())?;
    Ok(format!("4 x 39 rows, 4-row table, {} files, aggregates within {AGGREGATE_TOL:e}", written.len()))
}

/// None when the live backends are not configured.
fn live_mode() -> Option<Outcome> {
    let llm = std::env::var("LLM_ENDPOINT").ok()?;
    let model = std::env::var("LLM_MODEL").ok()?;
    let embed = std::env::var("EMBED_ENDPOINT").ok()?;
    let embed_model = std::env::var("EMBED_MODEL").ok()?;
    std::env::var("LLM_API_KEY").ok()?;
    std::env::var("EMBED_API_KEY").ok()?;
    Some((|| {
        let backend: Arc<dyn LlmBackend> = Arc::new(ChatCompletionsBackend::from_env(llm, model).map_err(|e| e.to_string())?);
        let embedder: Arc<dyn EmbeddingBackend> = Arc::new(HttpEmbedder::from_env(embed, embed_model).map_err(|e| e.to_string())?);
        let ctx = netlingua_core::agent::AgentContext {
            backend: backend.clone(),
            memory: Arc::new(MemoryStore::new(embedder)),
            schema: Arc::new(fixtures::schema()),
            schema_modules: Arc::new(fixtures::schema_modules().map_err(|e| e.to_string())?),
        };
        let mut spec = RunSpec::new(BackendSpec::Mock { script: "unused.json".into() });
        spec.variants = vec![Variant::RetrievalNlVerifier];
        let report = eval::run(&spec, &eval::clos_requests(), &fixtures::clos_state(), &ctx, &|_| backend.clone());
        let a = &report.variants[0].aggregates;
        ensure(a.syntax_pass > a.syntax_pass_initial, || {
            format!("syntax pass {:.1}% after repair vs {:.1}% before", a.syntax_pass, a.syntax_pass_initial)
        })?;
        Ok(format!("syntax pass {:.1}% -> {:.1}%", a.syntax_pass_initial, a.syntax_pass))
    })())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("golden transcript", golden_transcript),
        ("change-set engine", change_set_engine),
        ("validator mutation kit", mutation_kit),
        ("retrieval", retrieval),
        ("loop bounds", loop_bounds),
        ("nile metrics", nile_metrics),
        ("harness shape", harness_shape),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    match live_mode() {
        Some(Ok(detail)) => println!("PASS live mode: {detail}"),
        Some(Err(why)) => {
            failed += 1;
            println!("FAIL live mode: {why}");
        }
        None => println!("SKIP live mode: set LLM_ENDPOINT, LLM_MODEL, LLM_API_KEY, EMBED_ENDPOINT, EMBED_MODEL and EMBED_API_KEY"),
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
