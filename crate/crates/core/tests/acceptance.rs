//! Acceptance checks for the station engine. Each check prints one
//! `PASS` or `FAIL` line; the test fails if any check fails.
//!
//! Run with `cargo test -p station-core --test acceptance -- --nocapture`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use station::action::{parse_response, ActionInvocation, Payload, PayloadValue};
use station::agent::prompt::{split_sections, SECTION_TITLES};
use station::agent::{AgentId, LineageId};
use station::capsules::{
    check_access, CapsuleOp, CapsuleRoom, CapsuleStore, IdItem, NewCapsule, Participant, ReadEntry, Viewer,
};
use station::evaluation::{verify_artifact, verify_packing, PackingVerdict};
use station::kernel::world::board_viewer_of;
use station::kernel::LifecycleKind;
use station::persistence::{read_snapshot, snapshot_name, write_snapshot};
use station::research::{rows, LeaderboardPrefs};

use common::{config, plain, records, station, Recorder, Seen, SCRIPTED};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

#[test]
fn acceptance() {
    let checks: [(&str, Check); 9] = [
        ("action parser", parser),
        ("capsule visibility matrix", visibility),
        ("maturity gate", maturity),
        ("evaluation gate", eval_gate),
        ("stagnation protocol", stagnation),
        ("token budget termination", tokens),
        ("circle packing verifier", packing),
        ("deterministic replay", replay),
        ("five-part prompt", prompt_order),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(why) => {
                println!("FAIL {name}: {why} [{secs:.2}s]");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}

// ---------------------------------------------------------------------------
// Action parser

const MAIL_EXAMPLE: &str = "I am Ananke I, currently in the Reflection Chamber.
I should go to the Mail Room to send a mail to Spiro I.

/execute_action{goto mail}

/execute_action{create}

```yaml
recipients: Spiro I
title: Reproducing Your Results
content: I am unable to reproduce your results.
         Could you please help me check my submission?
```
";

const VERBS: [&str; 10] = [
    "goto", "read", "create", "reply", "submit", "answer", "rank", "storage", "confirm", "preview",
];
const WORDS: [&str; 12] = [
    "alpha", "beta", "gamma", "circles", "notes", "archive", "lineage", "packing", "result", "review", "tick", "square",
];

fn words(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

fn prose(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    for _ in 0..rng.gen_range(1..4) {
        let n = rng.gen_range(1..6);
        s.push_str(&format!("I think about the {}.\n", words(rng, n)));
    }
    s
}

/// A response with known commands, and the verb/argument/payload triples it encodes.
/// Verb, argument, and payload of one expected invocation.
type Expected = (String, Option<String>, Option<Payload>);

fn valid_case(rng: &mut ChaCha8Rng) -> (String, Vec<Expected>) {
    let mut text = prose(rng);
    let mut expected = Vec::new();
    for _ in 0..rng.gen_range(1..6) {
        let verb = VERBS.choose(rng).unwrap().to_string();
        let arg = match rng.gen_range(0..3) {
            0 => None,
            1 => Some(rng.gen_range(1..500).to_string()),
            _ => Some(words(rng, 1)),
        };
        text.push_str(&format!(
            "/execute_action{{{verb}{}}}\n",
            arg.as_ref().map(|a| format!(" {a}")).unwrap_or_default()
        ));
        let payload = rng.gen_bool(0.5).then(|| {
            let mut p = Payload::new();
            for i in 0..rng.gen_range(1..4) {
                let n = rng.gen_range(1..5);
                p.insert(format!("key{i}"), PayloadValue::Text(words(rng, n)));
            }
            p
        });
        if let Some(p) = &payload {
            text.push_str("```yaml\n");
            for (k, v) in p {
                let PayloadValue::Text(v) = v else { unreachable!() };
                text.push_str(&format!("{k}: {v}\n"));
            }
            text.push_str("```\n");
        }
        text.push('\n');
        if rng.gen_bool(0.3) {
            text.push_str(&prose(rng));
        }
        expected.push((verb, arg, payload));
    }
    (text, expected)
}

fn malformed_case(rng: &mut ChaCha8Rng) -> String {
    let body = match rng.gen_range(0..8) {
        0 => "/execute_action{goto mail".to_string(),
        1 => "/execute_action{}".to_string(),
        2 => "/execute_action{create}\n```yaml\ntitle: never closed\ncontent: [1, 2\n".to_string(),
        3 => "/execute_action{create}\n```yaml\ntitle: [unbalanced\n```\n".to_string(),
        4 => "/execute_action{create}\n```yaml\nouter:\n  inner: nested\n```\n".to_string(),
        5 => "/execute_action{{goto}}\n/execute_action{ goto  }x".to_string(),
        6 => format!("/execute_action{{{}\n", "x".repeat(rng.gen_range(1..2000))),
        _ => "/execute_action{create}\n```yaml\n- a list\n- not a mapping\n```\n".to_string(),
    };
    format!("{}{body}\n{}", prose(rng), prose(rng))
}

fn mutate(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let alphabet = [
        '{', '}', '`', '\n', ' ', ':', '-', '/', 'é', '\u{0}', 'a', '#', '[', '"',
    ];
    for _ in 0..rng.gen_range(1..12) {
        if chars.is_empty() {
            break;
        }
        let i = rng.gen_range(0..chars.len());
        match rng.gen_range(0..3) {
            0 => chars[i] = *alphabet.choose(rng).unwrap(),
            1 => chars.insert(i, *alphabet.choose(rng).unwrap()),
            _ => {
                chars.remove(i);
            }
        }
    }
    chars.into_iter().collect()
}

fn well_formed(text: &str, invocations: &[ActionInvocation]) -> bool {
    invocations.len() <= 32
        && invocations.iter().all(|i| {
            i.source_span.start <= i.source_span.end
                && i.source_span.end <= text.len()
                && text.is_char_boundary(i.source_span.start)
                && text.is_char_boundary(i.source_span.end)
                && !i.verb.is_empty()
        })
}

fn parser() -> Result<String, String> {
    let mail = parse_response(MAIL_EXAMPLE);
    ensure!(
        mail.invocations.len() == 2,
        "mail example gave {} invocations",
        mail.invocations.len()
    );
    ensure!(
        mail.invocations[0].verb == "goto" && mail.invocations[0].argument.as_deref() == Some("mail"),
        "first mail invocation is {:?}",
        mail.invocations[0]
    );
    let p = mail.invocations[1].payload.as_ref().ok_or("create has no payload")?;
    ensure!(
        p.get("content").and_then(PayloadValue::scalar_text).as_deref()
            == Some("I am unable to reproduce your results. Could you please help me check my submission?"),
        "folded mail content is {:?}",
        p.get("content")
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut corpus: Vec<(&str, String)> = Vec::new();
    let mut valid = Vec::new();
    for _ in 0..50 {
        valid.push(valid_case(&mut rng));
    }
    for (text, _) in &valid {
        corpus.push(("valid", text.clone()));
    }
    for _ in 0..50 {
        corpus.push(("malformed", malformed_case(&mut rng)));
    }
    for _ in 0..50 {
        corpus.push(("prose", prose(&mut rng) + &prose(&mut rng)));
    }
    for (text, _) in &valid {
        let m = mutate(&mut rng, text);
        corpus.push(("mutated", m));
    }

    let started = Instant::now();
    let mut outcomes = Vec::new();
    for (kind, text) in &corpus {
        let text = text.clone();
        let out =
            catch_unwind(move || parse_response(&text)).map_err(|_| format!("parser panicked on a {kind} case"))?;
        outcomes.push(out);
    }
    let elapsed = started.elapsed();

    for (i, ((kind, text), out)) in corpus.iter().zip(&outcomes).enumerate() {
        ensure!(
            well_formed(text, &out.invocations),
            "case {i} ({kind}) has out-of-range spans"
        );
        match *kind {
            "valid" => {
                let expected = &valid[i].1;
                let got: Vec<Expected> = out
                    .invocations
                    .iter()
                    .map(|inv| (inv.verb.clone(), inv.argument.clone(), inv.payload.clone()))
                    .collect();
                ensure!(
                    &got == expected,
                    "valid case {i} parsed as {got:?}, expected {expected:?}"
                );
                ensure!(
                    out.diagnostics.is_empty(),
                    "valid case {i} has diagnostics {:?}",
                    out.diagnostics
                );
            }
            "prose" => ensure!(
                out.invocations.is_empty() && out.diagnostics.is_empty(),
                "prose case {i} produced output"
            ),
            "malformed" => ensure!(
                !out.diagnostics.is_empty() || out.invocations.is_empty(),
                "malformed case {i} parsed silently: {text:?}"
            ),
            _ => {}
        }
    }
    ensure!(elapsed < Duration::from_secs(1), "corpus took {elapsed:?}");
    Ok(format!(
        "mail example gives 2 invocations; 200 cases (50 valid, 50 malformed, 50 prose, 50 mutated) parsed without a panic in {:.1} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

// ---------------------------------------------------------------------------
// Capsule visibility

struct Model {
    room: CapsuleRoom,
    author: usize,
    recipients: BTreeSet<usize>,
    accepted: bool,
    deleted: bool,
}

fn viewers() -> Vec<Viewer> {
    let mut v: Vec<Viewer> = (0..10)
        .map(|i| {
            let lineage = format!("Line{}", i / 2);
            Viewer {
                agent: AgentId(i as u64 + 1),
                name: format!("{lineage} {}", if i % 2 == 0 { "I" } else { "II" }),
                lineage: Some(LineageId::from_name(&lineage)),
                guest: false,
                // one agent per lineage pair of the last two is still immature
                mature: i < 8,
            }
        })
        .collect();
    v.push(Viewer {
        agent: AgentId(99),
        name: "Guest 99".into(),
        lineage: None,
        guest: true,
        mature: false,
    });
    v
}

/// The visibility table, written out independently of the store.
fn expected_visible(m: &Model, v: usize, all: &[Viewer]) -> bool {
    let viewer = &all[v];
    let room_open = match m.room {
        CapsuleRoom::PrivateMemory => !viewer.guest,
        CapsuleRoom::Archive => !viewer.guest && viewer.mature,
        CapsuleRoom::PublicMemory => viewer.mature,
        CapsuleRoom::Mail => true,
    };
    if !room_open || m.deleted {
        return false;
    }
    match m.room {
        CapsuleRoom::PrivateMemory => v < 10 && v / 2 == m.author / 2,
        CapsuleRoom::PublicMemory => true,
        CapsuleRoom::Archive => m.accepted || v == m.author,
        CapsuleRoom::Mail => v == m.author || m.recipients.contains(&v),
    }
}

fn visibility() -> Result<String, String> {
    let started = Instant::now();
    let all = viewers();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut store = CapsuleStore::default();
    let mut models: Vec<(u32, Model)> = Vec::new();
    let mut tick = 0;
    while models.len() < 500 {
        tick += 1;
        let author = rng.gen_range(0..10);
        let room = *CapsuleRoom::ALL.choose(&mut rng).unwrap();
        let recipients: BTreeSet<usize> = if room == CapsuleRoom::Mail {
            (0..rng.gen_range(1..4))
                .map(|_| rng.gen_range(0..all.len()))
                .filter(|&r| r != author)
                .collect()
        } else {
            BTreeSet::new()
        };
        let new = NewCapsule {
            title: format!("capsule {tick}"),
            content: words(&mut rng, 4),
            tags: vec![],
            abstract_text: Some("abstract".into()),
            recipients: recipients
                .iter()
                .map(|&r| Participant {
                    agent: all[r].agent,
                    name: all[r].name.clone(),
                })
                .collect(),
        };
        let Ok(id) = store.create(&all[author], room, new, tick) else {
            let barred = (room == CapsuleRoom::Archive || room == CapsuleRoom::PublicMemory) && !all[author].mature;
            ensure!(
                barred || (room == CapsuleRoom::Mail && recipients.is_empty()),
                "create refused in {room:?}"
            );
            continue;
        };
        let mut m = Model {
            room,
            author,
            recipients,
            accepted: false,
            deleted: false,
        };
        if room == CapsuleRoom::Archive && rng.gen_bool(0.7) {
            let accept = rng.gen_bool(0.5);
            ensure!(
                store.apply_verdict(id, accept, "ok".into(), tick),
                "verdict not applied"
            );
            m.accepted = accept;
        }
        if rng.gen_bool(0.1) && store.delete(&all[author], room, IdItem::Capsule(id), tick).is_ok() {
            m.deleted = true;
        }
        models.push((id, m));
    }

    let mut decisions = 0;
    let mut visible = 0;
    for v in 0..all.len() {
        for room in CapsuleRoom::ALL {
            let listed: BTreeSet<u32> = if check_access(room, &all[v], CapsuleOp::Read).is_ok() {
                store.visible(room, &all[v]).map(|c| c.id).collect()
            } else {
                BTreeSet::new()
            };
            let oracle: BTreeSet<u32> = models
                .iter()
                .filter(|(_, m)| m.room == room && expected_visible(m, v, &all))
                .map(|(id, _)| *id)
                .collect();
            ensure!(
                listed == oracle,
                "viewer {v} in {room:?}: listing differs from the table"
            );
        }
        for (id, m) in &models {
            let got = match store.read(&all[v], m.room, &id.to_string()) {
                Ok(entries) => matches!(entries.as_slice(), [ReadEntry::Capsule(_)]),
                Err(_) => false,
            };
            let want = expected_visible(m, v, &all);
            ensure!(
                got == want,
                "viewer {v} reading {:?} #{id}: store says {got}, table says {want}",
                m.room
            );
            decisions += 1;
            visible += usize::from(got);
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "matrix took {elapsed:?}");
    Ok(format!(
        "5 lineages x 10 agents (+1 guest), 500 random capsules: {decisions} read decisions and {} listings match the table ({visible} visible)",
        all.len() * 4
    ))
}

// ---------------------------------------------------------------------------
// Maturity

const MATURITY: &str = r#"
agent_count = 2
rng_seed = 5
slots = ["observer", "rival"]

[backends.observer]
kind = "scripted"
behavior = "score_script"
params = { name = "Observer", task = 1 }

[backends.rival]
kind = "scripted"
behavior = "score_script"
params = { name = "Rival", task = 1, schedule = [[5, 1.0], [20, 2.0], [40, 3.0]] }

[[task_specs]]
id = 1
title = "Echo"
description = "Submit a number."
evaluator = { kind = "echo" }
"#;

fn maturity() -> Result<String, String> {
    let cfg = config(MATURITY);
    ensure!(cfg.maturity_age_ticks == 50, "maturity is {}", cfg.maturity_age_ticks);
    let log: common::Log = Arc::default();
    let probe = "Trying the shared rooms.\n/execute_action{goto archive}\n/execute_action{goto public_memory}\n\
                 /execute_action{goto common}\n/execute_action{goto research}\n";
    let mut st = station(&cfg, None, |id, inner| {
        if id == "observer" {
            Arc::new(Recorder::new(inner, log.clone()).on_tick(50, probe).on_tick(51, probe))
        } else {
            inner
        }
    });
    let observer = st.world().slots[0];
    for _ in 0..49 {
        st.advance_tick().map_err(|e| e.to_string())?;
    }
    let rival_rows = st.world().board.submissions().filter(|s| s.author != observer).count();
    ensure!(rival_rows == 3, "rival has {rival_rows} submissions");

    st.advance_tick().map_err(|e| e.to_string())?;
    let a = &st.world().agents[&observer];
    ensure!(a.age_ticks == 49, "observer age {} at tick 50", a.age_ticks);
    let prefs = LeaderboardPrefs::default();
    let foreign = |st: &station::kernel::Station| {
        let a = &st.world().agents[&observer];
        rows(&st.world().board, &board_viewer_of(a, 50), &prefs)
            .iter()
            .filter(|s| s.author != observer)
            .count()
    };
    ensure!(
        foreign(&st) == 0,
        "immature observer sees {} foreign rows",
        foreign(&st)
    );
    let results: Vec<bool> = a.last_actions.iter().map(|r| r.ok).collect();
    ensure!(
        results == [false, false, false, true],
        "age-49 room attempts: {:?}",
        a.last_actions
    );
    let seen = log.lock().unwrap().clone();
    let p50 = seen
        .iter()
        .find(|s| s.tick == 50 && !s.reflection)
        .ok_or("no tick-50 prompt")?;
    ensure!(!p50.prompt.contains("Rival"), "tick-50 prompt mentions the rival");
    ensure!(!p50.prompt.contains("Congratulations"), "congratulated early");

    st.advance_tick().map_err(|e| e.to_string())?;
    let a = &st.world().agents[&observer];
    ensure!(a.age_ticks == 50, "observer age {} at tick 51", a.age_ticks);
    let results: Vec<bool> = a.last_actions.iter().map(|r| r.ok).collect();
    ensure!(
        results == [true, true, true, true],
        "age-50 room attempts: {:?}",
        a.last_actions
    );
    ensure!(foreign(&st) == 3, "mature observer sees {} foreign rows", foreign(&st));
    let seen = log.lock().unwrap().clone();
    let p51 = seen
        .iter()
        .find(|s| s.tick == 51 && !s.reflection)
        .ok_or("no tick-51 prompt")?;
    let sections = split_sections(&p51.prompt);
    ensure!(
        sections[1].1.contains("Congratulations") && sections[1].1.contains("maturity"),
        "no congratulation in the tick-51 system messages"
    );
    st.advance_tick().map_err(|e| e.to_string())?;
    let seen = log.lock().unwrap().clone();
    let p52 = seen
        .iter()
        .find(|s| s.tick == 52 && !s.reflection)
        .ok_or("no tick-52 prompt")?;
    ensure!(
        p52.prompt.contains("Rival"),
        "the mature leaderboard does not list the rival"
    );
    Ok(
        "age 49: 0 foreign rows, archive/public/common refused; age 50: congratulated, all 3 foreign rows listed"
            .into(),
    )
}

// ---------------------------------------------------------------------------
// Evaluation gate

const GATE: &str = r#"
agent_count = 2
rng_seed = 9
eval_gate_ticks = 2
slots = ["scorer", "idle"]

[backends.scorer]
kind = "scripted"
behavior = "score_script"
params = { task = 1, schedule = [[3, 1.5]] }

[backends.idle]
kind = "scripted"
behavior = "idle"

[[task_specs]]
id = 1
title = "Slow echo"
description = "Submit a number; it takes four ticks to check."
evaluator = { kind = "echo" }
logical_duration_ticks = 4
"#;

fn eval_gate() -> Result<String, String> {
    let cfg = config(GATE);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut st = plain(&cfg, Some(dir.path()));
    let mut paused = Vec::new();
    let mut delivered = None;
    for _ in 0..10 {
        let r = st.advance_tick().map_err(|e| e.to_string())?;
        if r.pause_steps > 0 {
            paused.push((r.tick, r.pause_steps));
        }
        if !r.deliveries.is_empty() {
            delivered = Some(r.tick);
        }
    }
    // Submitted during tick 3: age 3 (> gate 2) at the boundary before tick 6,
    // while the four-tick job still needs one more step.
    ensure!(paused == [(6, 1)], "paused at {paused:?}");
    ensure!(delivered == Some(6), "delivered at {delivered:?}");

    let recs = records(&dir.path().join("ticks.jsonl"));
    let pos = |pred: &dyn Fn(&serde_json::Value) -> bool| recs.iter().position(pred);
    let pause = pos(&|r| r["type"] == "pause").ok_or("no pause record")?;
    let end5 = pos(&|r| r["type"] == "tick_end" && r["tick"] == 5).ok_or("no end of tick 5")?;
    let delivery = pos(&|r| r["type"] == "delivery").ok_or("no delivery record")?;
    let turn6 = pos(&|r| r["type"] == "turn" && r["tick"] == 6).ok_or("no turn in tick 6")?;
    ensure!(
        end5 < pause && pause < delivery && delivery < turn6,
        "order end5={end5} pause={pause} delivery={delivery} turn6={turn6}"
    );
    let mut last_wall = 0;
    for r in &recs {
        if let Some(w) = r["wall"].as_u64() {
            ensure!(w >= last_wall, "wall stamps go backwards at {r}");
            last_wall = w;
        }
    }
    ensure!(
        recs.iter().filter(|r| r["type"] == "pause").count() == 1,
        "more than one pause step"
    );
    Ok(
        "gate 2, four-tick job submitted in tick 3: one pause step before tick 6 only; pause, delivery, then turns"
            .into(),
    )
}

// ---------------------------------------------------------------------------
// Stagnation

const STAGNATION: &str = r#"
agent_count = 3
rng_seed = 3
stagnation_threshold_ticks = 100
slots = ["scorer", "idle", "idle"]

[backends.scorer]
kind = "scripted"
behavior = "score_script"
params = { task = 1, schedule = [[9, 4.0]] }

[backends.idle]
kind = "scripted"
behavior = "idle"

[[task_specs]]
id = 1
title = "Echo"
description = "Submit a number."
evaluator = { kind = "echo" }
"#;

fn stagnation() -> Result<String, String> {
    let cfg = config(STAGNATION);
    let log: common::Log = Arc::default();
    let mut st = station(&cfg, None, |_, inner| Arc::new(Recorder::new(inner, log.clone())));
    let mut improved = None;
    let mut fired = Vec::new();
    for _ in 0..209 {
        let r = st.advance_tick().map_err(|e| e.to_string())?;
        if r.deliveries.iter().any(|d| d.score.is_some()) {
            improved = Some(r.tick);
        }
        if !r.stagnation.is_empty() {
            fired.push(r.tick);
        }
    }
    ensure!(improved == Some(10), "improvement recorded at {improved:?}");
    ensure!(fired == [110], "announcements at {fired:?}");
    let seen = log.lock().unwrap();
    let at110: Vec<&Seen> = seen.iter().filter(|s| s.tick == 110 && !s.reflection).collect();
    ensure!(at110.len() == 3, "{} prompts at tick 110", at110.len());
    for s in &at110 {
        let sections = split_sections(&s.prompt);
        ensure!(
            sections[1].1.contains("Stagnation Protocol I"),
            "agent {} missed the announcement",
            s.agent.0
        );
    }
    let with_notice = seen
        .iter()
        .filter(|s| !s.reflection && s.prompt.contains("Stagnation Protocol"))
        .count();
    ensure!(with_notice == 3, "{with_notice} prompts carry an announcement");
    let g = &st.world().governance;
    ensure!(
        g.announcements.len() == 1,
        "{} announcements logged",
        g.announcements.len()
    );
    Ok("improvement at tick 10, threshold 100: one announcement, in every agent's tick-110 system messages".into())
}

// ---------------------------------------------------------------------------
// Token budget

const TOKENS: &str = r#"
agent_count = 3
rng_seed = 17
slots = ["verbose", "idle", "idle"]
token_budgets = { verbose = 10000 }

[backends.verbose]
kind = "scripted"
behavior = "verbose"
params = { bytes = 6000 }

[backends.idle]
kind = "scripted"
behavior = "idle"
"#;

fn tokens() -> Result<String, String> {
    let cfg = config(TOKENS);
    let mut st = plain(&cfg, None);
    let mut used: BTreeMap<AgentId, u64> = BTreeMap::new();
    let mut crossed: BTreeMap<AgentId, u64> = BTreeMap::new();
    let mut terminated: BTreeMap<AgentId, u64> = BTreeMap::new();
    let mut spawned_in_slot0: Vec<u64> = Vec::new();
    for _ in 0..40 {
        let r = st.advance_tick().map_err(|e| e.to_string())?;
        ensure!(
            st.world().agents.len() == 3,
            "{} live agents after tick {}",
            st.world().agents.len(),
            r.tick
        );
        for t in r.turns.iter().filter(|t| t.slot == 0) {
            let total = used.entry(t.agent).or_default();
            *total += t.tokens_in + t.tokens_out;
            if *total > 10_000 {
                crossed.entry(t.agent).or_insert(r.tick);
            }
        }
        for e in &r.lifecycle {
            match e.kind {
                LifecycleKind::TokenBudgetExceeded => {
                    terminated.insert(e.agent, e.tick);
                }
                LifecycleKind::Spawned if e.slot == 0 => spawned_in_slot0.push(e.tick),
                _ => {}
            }
        }
    }
    ensure!(!crossed.is_empty(), "budget never exceeded");
    ensure!(
        terminated == crossed,
        "terminated {terminated:?}, budget crossed {crossed:?}"
    );
    let ticks: Vec<u64> = terminated.values().copied().collect();
    ensure!(
        spawned_in_slot0 == ticks,
        "replacements at {spawned_in_slot0:?}, terminations at {ticks:?}"
    );
    for id in terminated.keys() {
        ensure!(
            st.world().departed.iter().any(|d| d.record.id == *id),
            "departed list lacks agent {}",
            id.0
        );
    }
    Ok(format!(
        "budget 10000: {} successive verbose agents each terminated on the turn that crossed it (ticks {ticks:?}), each replaced at the same boundary; population 3 for 40 ticks",
        ticks.len()
    ))
}

// ---------------------------------------------------------------------------
// Circle packing

/// Independent integer check for circles given in thousandths.
fn oracle(circles: &[(i64, i64, i64)]) -> Option<i64> {
    for &(x, y, r) in circles {
        if r < 0 || x - r < 0 || y - r < 0 || x + r > 1000 || y + r > 1000 {
            return None;
        }
    }
    for (i, a) in circles.iter().enumerate() {
        for b in &circles[i + 1..] {
            let (dx, dy, s) = (a.0 - b.0, a.1 - b.1, a.2 + b.2);
            if dx * dx + dy * dy < s * s {
                return None;
            }
        }
    }
    Some(circles.iter().map(|c| c.2).sum())
}

fn packing() -> Result<String, String> {
    let started = Instant::now();
    ensure!(
        verify_packing(&[0.5, 0.5, 0.5], 1).ok().and_then(|v| v.score()) == Some(0.5),
        "inscribed circle"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut valid, mut invalid) = (0, 0);
    for case in 0..1000 {
        let n = rng.gen_range(1..=8);
        let mut circles: Vec<(i64, i64, i64)> = Vec::new();
        for _ in 0..n {
            let r = rng.gen_range(0..=if case % 2 == 0 { 120 } else { 400 });
            circles.push((rng.gen_range(0..=1000), rng.gen_range(0..=1000), r));
        }
        // Some pairs touch exactly (3-4-5 triangles scaled).
        if n >= 2 && case % 5 == 0 {
            let (x, y) = (300, 300);
            circles[0] = (x, y, 100);
            circles[1] = (x + 120, y + 160, 100);
        }
        let text: String = circles
            .iter()
            .map(|(x, y, r)| {
                format!(
                    "{}.{:03} {}.{:03} {}.{:03}\n",
                    x / 1000,
                    x % 1000,
                    y / 1000,
                    y % 1000,
                    r / 1000,
                    r % 1000
                )
            })
            .collect();
        let got = verify_artifact(&text, n).map_err(|e| format!("case {case}: {e}"))?;
        match (oracle(&circles), got) {
            (Some(sum), PackingVerdict::Valid { exact, .. }) => {
                ensure!(
                    exact == BigRational::new(BigInt::from(sum), BigInt::from(1000)),
                    "case {case}: score {exact} vs {sum}/1000"
                );
                valid += 1;
            }
            (None, PackingVerdict::Invalid(_)) => invalid += 1,
            (want, got) => return Err(format!("case {case}: oracle {want:?}, verifier {got:?}\n{text}")),
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    ensure!(
        valid > 50 && invalid > 50,
        "unbalanced corpus: {valid} valid, {invalid} invalid"
    );
    Ok(format!(
        "inscribed circle scores 0.5; 1000 random configurations agree with an integer oracle ({valid} valid, {invalid} invalid); published best-known 26/32-circle packings were not regenerated"
    ))
}

// ---------------------------------------------------------------------------
// Replay

fn replay() -> Result<String, String> {
    let started = Instant::now();
    let cfg = config(SCRIPTED);
    let mut a = plain(&cfg, None);
    let mut best: BTreeMap<u32, f64> = BTreeMap::new();
    let mut improvements = 0;
    for _ in 0..200 {
        a.advance_tick().map_err(|e| e.to_string())?;
        for (task, p) in &a.world().governance.progress {
            if let Some(b) = p.best {
                let prev = best.insert(*task, b);
                ensure!(prev.is_none_or(|p| b >= p), "best score fell from {prev:?} to {b}");
                improvements += usize::from(prev.is_none_or(|p| b > p));
            }
        }
    }
    ensure!(a.is_halted(), "run did not stop at max_ticks");

    let tdir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut b = plain(&cfg, Some(tdir.path()));
    for _ in 0..100 {
        b.advance_tick().map_err(|e| e.to_string())?;
    }
    let snaps = tempfile::tempdir().map_err(|e| e.to_string())?;
    let snap = snaps.path().join(snapshot_name(100));
    write_snapshot(&snap, b.config(), b.world()).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        b.advance_tick().map_err(|e| e.to_string())?;
    }
    ensure!(a.digest() == b.digest(), "two full runs differ");
    ensure!(a.transcript_head() == b.transcript_head(), "transcript heads differ");
    drop(b);

    let restored = read_snapshot(&snap).map_err(|e| e.to_string())?;
    let mut c = station::kernel::Station::from_world(
        restored.config,
        restored.world,
        station::kernel::StationOptions {
            transcript_dir: Some(tdir.path().into()),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    while !c.is_halted() {
        c.advance_tick().map_err(|e| e.to_string())?;
    }
    ensure!(a.digest() == c.digest(), "resumed run differs");
    ensure!(a.transcript_head() == c.transcript_head(), "resumed transcript differs");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    ensure!(improvements > 0, "no task ever scored");
    Ok(format!(
        "200 ticks x 2 runs and a resume from tick 100 agree on digest {}; best score nondecreasing ({improvements} improvements)",
        &a.digest()[..16]
    ))
}

// ---------------------------------------------------------------------------
// Prompt structure

/// Checks the prompts as written to the agents' transcript streams.
fn prompt_order() -> Result<String, String> {
    let cfg = config(SCRIPTED);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut st = plain(&cfg, Some(dir.path()));
    for _ in 0..120 {
        st.advance_tick().map_err(|e| e.to_string())?;
    }
    drop(st);
    let mut prompts = 0;
    let mut with_results = 0;
    let streams = std::fs::read_dir(dir.path().join("agents")).map_err(|e| e.to_string())?;
    for entry in streams {
        let path = entry.map_err(|e| e.to_string())?.path();
        for r in records(&path).iter().filter(|r| r["type"] == "turn") {
            let prompt = r["prompt"].as_str().ok_or("turn record without a prompt")?;
            let sections = split_sections(prompt);
            let titles: Vec<&str> = sections.iter().map(|(t, _)| t.as_str()).collect();
            ensure!(
                titles == SECTION_TITLES,
                "{} tick {}: sections {titles:?}",
                path.display(),
                r["tick"]
            );
            let result = |body: &str| body.contains("Evaluation #") && body.contains(") finished: ");
            ensure!(
                !result(&sections[3].1),
                "evaluation result among room observations at tick {}",
                r["tick"]
            );
            with_results += usize::from(result(&sections[1].1));
            prompts += 1;
        }
    }
    ensure!(with_results > 0, "no evaluation result reached a prompt");
    Ok(format!(
        "{prompts} transcript prompts over 120 ticks have the five sections in order; {with_results} carry evaluation results, all in System Messages"
    ))
}
