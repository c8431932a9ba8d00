//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Everything runs in-process against the mock provider; no network.

mod common;

use std::future::Future;
use std::path::PathBuf;
use std::pin::Pin;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use chatisa_core::config::ServiceConfig;
use chatisa_core::conversation::UsageLedger;
use chatisa_core::conversation::{EngineError, NewSession, EXAM_STYLES};
use chatisa_core::export::{compute_cost, SECTIONS};
use chatisa_core::gateway::{
    AdapterError, Message, MockReply, MockScript, ModelSpec, Provider, Registry, Role, Tier,
};
use chatisa_core::ingest::extract_markdown;
use chatisa_core::ingest::fixtures::{
    image_only_pdf, render, FixtureLine, FixtureSpec, FixtureStyle,
};
use chatisa_core::money::Money;
use chatisa_core::prompts::{Bindings, ModuleKind, PromptLibrary, TemplateId};
use chatisa_server::cli::{run_command, Command};
use chatisa_server::error::ErrorCode;
use common::{get, harness, harness_with, post_bytes, post_json, Harness};
use num_bigint::BigInt;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;
use tokio::sync::Semaphore;

type Outcome = Result<String, String>;
type Check = fn() -> Pin<Box<dyn Future<Output = Outcome>>>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const FRONTIER: [&str; 4] = [
    "gpt-4o",
    "claude-3-7-sonnet-20250219",
    "command-r-plus",
    "llama3.3-70b-versatile",
];

fn core_tests_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests")
}

fn read_fixture(name: &str) -> String {
    let text = std::fs::read_to_string(core_tests_dir().join("fixtures").join(name)).unwrap();
    text.strip_suffix('\n').unwrap_or(&text).to_string()
}

fn read_golden(name: &str) -> String {
    std::fs::read_to_string(core_tests_dir().join("golden").join(name)).unwrap()
}

async fn prompt_fidelity() -> Outcome {
    let start = Instant::now();
    let lib = PromptLibrary::builtin();
    let mut compared = 0;
    let out = lib
        .render(TemplateId::CodingCompanion, &Bindings::new())
        .map_err(|e| e.to_string())?;
    ensure!(
        out == read_golden("coding_companion.txt"),
        "coding_companion differs"
    );
    compared += 1;
    for style in EXAM_STYLES {
        let mut b = Bindings::new();
        b.insert("course_text".into(), read_fixture("course_text.md"));
        b.insert("exam_type".into(), style.into());
        let out = lib
            .render(TemplateId::ExamAlly, &b)
            .map_err(|e| e.to_string())?;
        let file = format!("exam_ally__{}.txt", style.to_lowercase().replace(' ', "_"));
        ensure!(out == read_golden(&file), "exam_ally ({style}) differs");
        compared += 1;
    }
    let mut b = Bindings::new();
    b.insert("grade".into(), "senior".into());
    b.insert("major".into(), "Business Analytics".into());
    b.insert("job_title".into(), "Data Analyst".into());
    b.insert("resume_text".into(), read_fixture("resume.md"));
    b.insert(
        "job_description".into(),
        read_fixture("job_description.txt"),
    );
    let out = lib
        .render(TemplateId::InterviewMentor, &b)
        .map_err(|e| e.to_string())?;
    ensure!(
        out == read_golden("interview_mentor.txt"),
        "interview_mentor differs"
    );
    compared += 1;
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("{compared} prompts byte-exact"))
}

fn session_request(module: ModuleKind, model: &str) -> NewSession {
    match module {
        ModuleKind::Exam => NewSession::new(module, model)
            .bind("course_text", "Notes.")
            .bind("exam_type", "Data Analysis"),
        ModuleKind::Interview => NewSession::new(module, model)
            .bind("grade", "senior")
            .bind("major", "Business Analytics")
            .bind("job_title", "Data Analyst")
            .bind("resume_text", "SQL")
            .bind("job_description", "Analyze data."),
        m => NewSession::new(m, model),
    }
}

async fn policy_table() -> Outcome {
    let start = Instant::now();
    let h = harness();
    let m = h.app.manager();
    let all: Vec<String> = m
        .engine()
        .gateway()
        .registry()
        .models()
        .iter()
        .map(|s| s.model_id.clone())
        .collect();
    ensure!(all.len() == 7, "registry has {} models", all.len());
    let mut rejected = 0;
    for (module, temp) in [
        (ModuleKind::Coding, 0.0),
        (ModuleKind::Project, 0.0),
        (ModuleKind::Exam, 0.25),
        (ModuleKind::Interview, 0.25),
    ] {
        let allowed: Vec<String> = m
            .engine()
            .allowed_models(module)
            .iter()
            .map(|s| s.model_id.clone())
            .collect();
        let frontier_only = matches!(module, ModuleKind::Exam | ModuleKind::Interview);
        if frontier_only {
            ensure!(allowed == FRONTIER, "{module} allows {allowed:?}");
        } else {
            ensure!(allowed == all, "{module} allows {allowed:?}");
        }
        for model in &all {
            match m.create(session_request(module, model)) {
                Ok(s) => {
                    ensure!(allowed.contains(model), "{module} accepted {model}");
                    ensure!(
                        s.temperature == temp,
                        "{module} temperature {}",
                        s.temperature
                    );
                    h.mock.push_reply(MockReply::text("ok"));
                    m.post(&s.session_id, "hi", None)
                        .await
                        .map_err(|e| e.to_string())?;
                    let sent = h.mock.captured().pop().unwrap();
                    ensure!(
                        sent.temperature == temp,
                        "{module} sent temperature {}",
                        sent.temperature
                    );
                }
                Err(EngineError::Policy { .. }) => {
                    ensure!(
                        !allowed.contains(model),
                        "{module} rejected allowed {model}"
                    );
                    rejected += 1;
                }
                Err(e) => return Err(format!("{module}/{model}: {e}")),
            }
        }
        if frontier_only {
            let s = m
                .create(session_request(module, "gpt-4o"))
                .map_err(|e| e.to_string())?;
            let r = m.switch_model(&s.session_id, "gpt-4o-mini").await;
            ensure!(
                matches!(r, Err(EngineError::Policy { .. })),
                "{module} switch to light allowed"
            );
            rejected += 1;
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("4 modules, {rejected} tier violations rejected"))
}

fn tokens(s: &str) -> u64 {
    (s.chars().count() as u64).div_ceil(4)
}

/// Drops whole leading pairs until the payload fits.
fn oracle_payload(system: &str, history: &[Message], user: &str, budget: u64) -> Vec<Message> {
    for skip in (0..=history.len()).step_by(2) {
        let kept = &history[skip..];
        let size =
            tokens(system) + tokens(user) + kept.iter().map(|m| tokens(&m.content)).sum::<u64>();
        if size <= budget {
            let mut out = vec![Message::system(system)];
            out.extend_from_slice(kept);
            out.push(Message::user(user));
            return out;
        }
    }
    panic!("payload cannot fit");
}

async fn append_protocol() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1000);
    let h = harness();
    let m = h.app.manager();
    let models: Vec<ModelSpec> = m.engine().gateway().registry().models().to_vec();
    let reserved = h.app.config().gateway.reserved_output_tokens;
    let (mut violations, mut truncated, mut turns) = (0, 0, 0);
    for _ in 0..1000 {
        let spec = models.choose(&mut rng).unwrap();
        let budget = (spec.context_window - reserved) as u64;
        let s = m
            .create(NewSession::new(ModuleKind::Coding, &spec.model_id))
            .map_err(|e| e.to_string())?;
        let mut history: Vec<Message> = Vec::new();
        // long replies only against small windows, so truncation is exercised
        let max_reply = if spec.context_window <= 8192 {
            4000
        } else {
            400
        };
        for turn in 0..rng.gen_range(1..=20) {
            let user = format!("q{turn} {}", "u".repeat(rng.gen_range(1..400)));
            let reply = "r".repeat(rng.gen_range(1..max_reply));
            h.mock.clear_captured();
            h.mock.push_reply(MockReply::text(reply.clone()));
            m.post(&s.session_id, &user, None)
                .await
                .map_err(|e| e.to_string())?;
            let sent = h.mock.captured().pop().unwrap();
            let expected = oracle_payload(&s.rendered_system_prompt, &history, &user, budget);
            if expected.len() < history.len() + 2 {
                truncated += 1;
            }
            if sent.messages != expected {
                violations += 1;
            }
            history.push(Message::user(user));
            history.push(Message::assistant(reply));
            turns += 1;
        }
        if m.snapshot(&s.session_id)
            .await
            .map_err(|e| e.to_string())?
            .history
            != history
        {
            violations += 1;
        }
    }
    let took = start.elapsed();
    ensure!(violations == 0, "{violations} violations");
    ensure!(truncated > 0, "truncation never exercised");
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    Ok(format!(
        "1000 conversations, {turns} turns, {truncated} truncated, 0 violations"
    ))
}

async fn turn_atomicity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(101);
    let h = harness();
    let m = h.app.manager();
    let mut held = 0;
    for trial in 0..100 {
        let s = m
            .create(NewSession::new(ModuleKind::Coding, "gpt-4o"))
            .map_err(|e| e.to_string())?;
        let fail_at = rng.gen_range(0..6);
        for _ in 0..fail_at {
            h.mock.push_reply(MockReply::text("fine"));
            m.post(&s.session_id, "ask", None)
                .await
                .map_err(|e| e.to_string())?;
        }
        let before = m.raw_records(&s.session_id).map_err(|e| e.to_string())?;
        let state = m.snapshot(&s.session_id).await.map_err(|e| e.to_string())?;
        let error = match rng.gen_range(0..3) {
            0 => AdapterError::Transport("connection reset".into()),
            1 => AdapterError::Rejected {
                status: 429,
                message: "rate limited".into(),
            },
            _ => AdapterError::Transport("timeout".into()),
        };
        h.mock.fail_next(3, error);
        let r = m.post(&s.session_id, "this turn fails", None).await;
        h.mock.clear_failures();
        ensure!(r.is_err(), "trial {trial}: failure not surfaced");
        let after = m.raw_records(&s.session_id).map_err(|e| e.to_string())?;
        let state_after = m.snapshot(&s.session_id).await.map_err(|e| e.to_string())?;
        if after == before && state_after == state {
            held += 1;
        }
    }
    ensure!(held == 100, "{held}/100 trials left records intact");
    Ok("100/100 trials byte-identical".into())
}

fn round_half_even_micros(pico: &BigInt) -> BigInt {
    let unit = BigInt::from(1_000_000);
    let q = pico / &unit;
    let r = pico - &q * &unit;
    let twice = &r * 2;
    if twice > unit || (twice == unit && &q % 2 != BigInt::from(0)) {
        q + 1
    } else {
        q
    }
}

fn mock_spec(id: &str, input_micros: i64, output_micros: i64) -> ModelSpec {
    ModelSpec {
        model_id: id.into(),
        provider: Provider::Mock,
        tier: Tier::Frontier,
        context_window: 8192,
        input_price: Money::from_micros(input_micros),
        output_price: Money::from_micros(output_micros),
        display_name: id.into(),
    }
}

async fn cost_exactness() -> Outcome {
    let reg =
        Registry::new(vec![mock_spec("mock", 1_000_000, 2_000_000)]).map_err(|e| e.to_string())?;
    let mut l = UsageLedger::new();
    l.record("mock", 1000, 500, false);
    let r = compute_cost(&l, &reg).map_err(|e| e.to_string())?;
    ensure!(
        r.total_cost.to_string() == "0.002000",
        "worked example gave {}",
        r.total_cost
    );
    ensure!(
        r.total_cost == Money::from_micros(2000),
        "worked example not exact"
    );

    let mut rng = StdRng::seed_from_u64(10_000);
    let mut drift = 0;
    for _ in 0..10_000 {
        let in_price = rng.gen_range(0..=100_000_000i64);
        let out_price = rng.gen_range(0..=100_000_000i64);
        let tin = rng.gen_range(0..=2_000_000_000u64);
        let tout = rng.gen_range(0..=200_000_000u64);
        let reg =
            Registry::new(vec![mock_spec("m", in_price, out_price)]).map_err(|e| e.to_string())?;
        let mut l = UsageLedger::new();
        l.record("m", tin, tout, false);
        let r = compute_cost(&l, &reg).map_err(|e| e.to_string())?;
        let in_pico = BigInt::from(tin) * BigInt::from(in_price);
        let out_pico = BigInt::from(tout) * BigInt::from(out_price);
        let total = &in_pico + &out_pico;
        if BigInt::from(r.total_cost.raw()) != total
            || BigInt::from(r.rows[0].input_cost.raw()) != in_pico
            || BigInt::from(r.total_cost.to_micros_rounded()) != round_half_even_micros(&total)
        {
            drift += 1;
        }
    }
    ensure!(drift == 0, "{drift} draws drifted");
    Ok("worked example $0.002000, 10000 draws with zero drift".into())
}

fn printable(c: char) -> char {
    const EXTRA: &str = "€‚ƒ„…†‡ˆ‰Š‹ŒŽ‘’“”•–—˜™š›œžŸ";
    match c {
        '\t' => ' ',
        ' '..='~' | '\u{A0}'..='\u{FF}' => c,
        _ if EXTRA.contains(c) => c,
        _ => '?',
    }
}

fn squash(text: &str) -> String {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(printable)
        .collect()
}

fn squash_extracted(md: &str) -> String {
    let body: Vec<&str> = md
        .lines()
        .filter(|l| l.trim() != "---")
        .map(|l| {
            l.strip_prefix("## ")
                .or_else(|| l.strip_prefix("# "))
                .unwrap_or(l)
        })
        .collect();
    squash(&body.join("\n"))
}

fn random_text(rng: &mut StdRng) -> String {
    const POOL: &[&str] = &[
        "tidyverse",
        "ggplot(df,",
        "aes(x,",
        "y))",
        "import",
        "pandas",
        "as",
        "pd",
        "é",
        "ü",
        "50%",
        "$3.20",
        "(a+b)*c",
        "print(\"hi\")",
        "SELECT",
        "*",
        "FROM",
        "t;",
        "中文",
        "well-known",
        "x_1",
        "[1]",
        "{k: v}",
    ];
    let mut out = String::new();
    for line in 0..rng.gen_range(1..6) {
        if line > 0 {
            out.push('\n');
        }
        if rng.gen_bool(0.15) {
            out.push_str("```r\nlibrary(dplyr)\n  df |> filter(x > 1)\n```");
            continue;
        }
        let n = rng.gen_range(1..40);
        let words: Vec<&str> = (0..n).map(|_| POOL[rng.gen_range(0..POOL.len())]).collect();
        out.push_str(&words.join(" "));
    }
    out
}

async fn transcript_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(50);
    let h = harness();
    let m = h.app.manager();
    let reg = m.engine().gateway().registry().clone();
    let modules = [
        ModuleKind::Coding,
        ModuleKind::Project,
        ModuleKind::Exam,
        ModuleKind::Interview,
    ];
    for case in 0..50 {
        let module = modules[case % modules.len()];
        let s = m
            .create(session_request(module, "gpt-4o"))
            .map_err(|e| e.to_string())?;
        for t in 0..rng.gen_range(1..6) {
            if t == 2 {
                m.switch_model(&s.session_id, "claude-3-7-sonnet-20250219")
                    .await
                    .map_err(|e| e.to_string())?;
            }
            let reply = MockReply::text(random_text(&mut rng));
            let reply = if rng.gen_bool(0.5) {
                reply.with_usage(rng.gen_range(1..9000), rng.gen_range(1..900))
            } else {
                reply
            };
            h.mock.push_reply(reply);
            m.post(&s.session_id, &random_text(&mut rng), None)
                .await
                .map_err(|e| e.to_string())?;
        }
        let (title, pdf) = h
            .app
            .export_pdf(&s.session_id, "Jane Doe", "ISA 444")
            .await
            .map_err(|e| e.to_string())?;
        ensure!(
            title == "Jane Doe's Interaction with ChatISA on 2025-05-01",
            "case {case}: title {title:?}"
        );
        let session = m.snapshot(&s.session_id).await.map_err(|e| e.to_string())?;
        let md = extract_markdown(&pdf, "t.pdf")
            .map_err(|e| e.to_string())?
            .markdown;
        let text = squash_extracted(&md);

        let mut needles = vec![squash(&title), squash(SECTIONS[0])];
        needles.extend(
            session
                .models_used()
                .iter()
                .map(|id| squash(&format!("- {id}"))),
        );
        needles.push(squash(SECTIONS[1]));
        needles.push(squash(SECTIONS[2]));
        let report = compute_cost(&session.usage, &reg).map_err(|e| e.to_string())?;
        for row in &report.rows {
            needles.push(squash(&row.model_id));
            needles.push(squash(&format!("${}", row.input_cost)));
            needles.push(squash(&format!("${}", row.output_cost)));
        }
        needles.push(squash(&format!("Total cost: ${}", report.total_cost)));
        needles.push(squash(SECTIONS[3]));
        for msg in &session.history {
            let label = if msg.role == Role::User {
                "User:"
            } else {
                "Assistant:"
            };
            needles.push(squash(&format!("{label}\n{}", msg.content)));
        }
        needles.push(squash(SECTIONS[4]));
        needles.push(squash(&session.rendered_system_prompt));

        let mut pos = 0;
        for needle in &needles {
            match text[pos..].find(needle.as_str()) {
                Some(i) => pos += i + needle.len(),
                None => {
                    return Err(format!(
                        "case {case}: {needle:.60?} missing or out of order"
                    ))
                }
            }
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(format!("50 sessions in {:.1}s", took.as_secs_f64()))
}

const WORDS: &[&str] = &[
    "regression",
    "Python",
    "dplyr",
    "ggplot2",
    "SQL",
    "join",
    "matrix",
    "p-value",
    "ANOVA",
    "variance",
    "R2",
    "forecast",
    "pandas",
    "cluster",
    "k-means",
    "ROC",
    "AUC",
    "logit",
    "tibble",
    "2024",
    "Q3",
    "revenue",
    "model",
    "lecture",
    "chapter",
    "week",
    "exam",
    "(mean)",
    "x=42",
    "data.frame",
    "café",
    "naïve",
];

fn random_spec(rng: &mut StdRng, style: FixtureStyle) -> FixtureSpec {
    let pages = (0..rng.gen_range(1..=4))
        .map(|_| {
            (0..rng.gen_range(3..=18))
                .map(|i| {
                    let n = rng.gen_range(2..=9);
                    let text = (0..n)
                        .map(|_| *WORDS.choose(rng).unwrap())
                        .collect::<Vec<_>>()
                        .join(" ");
                    let size = if i == 0 && rng.gen_bool(0.5) {
                        24.0
                    } else {
                        11.0
                    };
                    FixtureLine::new(text, size)
                })
                .collect()
        })
        .collect();
    FixtureSpec { pages, style }
}

fn mutate(rng: &mut StdRng, seed: &[u8]) -> Vec<u8> {
    let mut b = seed.to_vec();
    match rng.gen_range(0..6) {
        0 => {
            for _ in 0..rng.gen_range(1..20) {
                let i = rng.gen_range(0..b.len());
                b[i] = rng.gen();
            }
        }
        1 => b.truncate(rng.gen_range(0..b.len())),
        2 => {
            let at = rng.gen_range(0..b.len());
            let junk: Vec<u8> = (0..rng.gen_range(1..200)).map(|_| rng.gen()).collect();
            b.splice(at..at, junk);
        }
        3 => {
            let a = rng.gen_range(0..b.len());
            let c = rng.gen_range(a..b.len());
            b.drain(a..c);
        }
        4 => {
            for _ in 0..rng.gen_range(1..10) {
                let i = rng.gen_range(0..b.len());
                if b[i].is_ascii_digit() {
                    b[i] = b"0123456789"[rng.gen_range(0..10)];
                }
            }
        }
        _ => {
            b = b"%PDF-1.7\n".to_vec();
            b.extend((0..rng.gen_range(0..2000)).map(|_| rng.gen::<u8>()));
        }
    }
    b
}

async fn ingestion() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20);
    let mut corpus = 0;
    for i in 0..24 {
        let style = FixtureStyle::ALL[i % FixtureStyle::ALL.len()];
        let spec = random_spec(&mut rng, style);
        let doc = extract_markdown(&render(&spec), "corpus.pdf")
            .map_err(|e| format!("{style:?}: {e}"))?;
        ensure!(doc.page_count == spec.pages.len(), "{style:?}: page count");
        ensure!(
            doc.char_count == doc.markdown.chars().count(),
            "{style:?}: char count"
        );
        let runs = spec.all_text();
        for run in runs
            .split(|c: char| !c.is_alphanumeric())
            .filter(|r| r.chars().count() >= 3)
        {
            ensure!(
                doc.markdown.contains(run),
                "{style:?}: {run:?} not conserved"
            );
        }
        corpus += 1;
    }

    let h = harness();
    let r = post_bytes(&h.router, "/api/documents", image_only_pdf()).await;
    ensure!(
        r.error_code().as_deref() == Some("unreadable_document"),
        "image-only upload gave {} {}",
        r.status,
        r.text()
    );

    let seeds: Vec<Vec<u8>> = FixtureStyle::ALL
        .iter()
        .map(|s| render(&random_spec(&mut rng, *s)))
        .chain([image_only_pdf()])
        .collect();
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    for i in 0..10_000 {
        let buf = mutate(&mut rng, &seeds[i % seeds.len()]);
        if std::panic::catch_unwind(|| extract_markdown(&buf, "fuzz.pdf")).is_err() {
            crashes += 1;
        }
    }
    std::panic::set_hook(hook);
    ensure!(crashes == 0, "{crashes} of 10000 fuzz buffers crashed");
    Ok(format!(
        "{corpus} fixtures conserved, image-only unreadable, 10000 fuzz buffers 0 crashes"
    ))
}

/// Drives the same conversation through the CLI entry point.
async fn cli_records(h: &Harness) -> Result<String, String> {
    let run = |cmd| {
        let app = h.app.clone();
        async move {
            let mut buf = Vec::new();
            run_command(&app, cmd, &mut buf)
                .await
                .map_err(|e| e.to_string())?;
            Ok::<_, String>(buf)
        }
    };
    let created = run(Command::NewSession {
        module: "coding".into(),
        model: "gpt-4o".into(),
        template: None,
        bindings: vec![],
        documents: vec![],
    })
    .await?;
    let v: serde_json::Value = serde_json::from_slice(&created).map_err(|e| e.to_string())?;
    let id = v["session_id"].as_str().unwrap().to_string();
    for (i, text) in ["first", "second", "third"].iter().enumerate() {
        if i == 2 {
            run(Command::SwitchModel {
                session: id.clone(),
                model: "command-r-plus".into(),
            })
            .await?;
        }
        run(Command::Say {
            session: id.clone(),
            text: text.to_string(),
            stream: i == 1,
        })
        .await?;
    }
    let raw = run(Command::Records { session: id }).await?;
    String::from_utf8(raw).map_err(|e| e.to_string())
}

async fn http_records(h: &Harness) -> Result<String, String> {
    let r = post_json(
        &h.router,
        "/api/sessions",
        json!({ "module": "coding", "model_id": "gpt-4o" }),
    )
    .await;
    let id = r.json()["session_id"].as_str().unwrap().to_string();
    for (i, text) in ["first", "second", "third"].iter().enumerate() {
        if i == 2 {
            post_json(
                &h.router,
                &format!("/api/sessions/{id}/model"),
                json!({ "model_id": "command-r-plus" }),
            )
            .await;
        }
        let stream = if i == 1 { "true" } else { "false" };
        let uri = format!("/api/sessions/{id}/messages?stream={stream}");
        let r = post_json(&h.router, &uri, json!({ "text": text })).await;
        ensure!(r.status == StatusCode::OK, "post failed: {}", r.text());
    }
    Ok(get(&h.router, &format!("/api/sessions/{id}/records"))
        .await
        .text())
}

async fn api_conformance() -> Outcome {
    let mut cfg = ServiceConfig::seed();
    cfg.monthly_budget = None;
    let h = harness_with(cfg, MockScript::default());
    let r = &h.router;
    let mut seen = Vec::new();
    let mut expect = |resp: common::Reply, code: ErrorCode| -> Result<(), String> {
        let got = resp.error_code();
        let want = serde_json::to_value(code).unwrap();
        ensure!(
            resp.status == code.status() && got.as_deref() == want.as_str(),
            "expected {want} got {} {}",
            resp.status,
            resp.text()
        );
        seen.push(code);
        Ok(())
    };
    expect(
        post_json(r, "/api/sessions", json!({ "module": "coding" })).await,
        ErrorCode::Validation,
    )?;
    let exam = json!({
        "module": "exam", "model_id": "gpt-4o-mini",
        "bindings": { "exam_type": "Data Analysis", "course_text": "x" }
    });
    expect(post_json(r, "/api/sessions", exam).await, ErrorCode::Policy)?;
    expect(get(r, "/api/sessions/none").await, ErrorCode::NotFound)?;
    let created = post_json(
        r,
        "/api/sessions",
        json!({ "module": "coding", "model_id": "gpt-4o" }),
    )
    .await;
    let id = created.json()["session_id"].as_str().unwrap().to_string();
    let uri = format!("/api/sessions/{id}/messages?stream=false");
    h.mock.fail_next(3, AdapterError::Transport("down".into()));
    expect(
        post_json(r, &uri, json!({ "text": "hi" })).await,
        ErrorCode::Upstream,
    )?;
    expect(
        post_bytes(r, "/api/documents", image_only_pdf()).await,
        ErrorCode::UnreadableDocument,
    )?;
    let huge = "word ".repeat(120_000);
    expect(
        post_json(r, &uri, json!({ "text": huge })).await,
        ErrorCode::ContextOverflow,
    )?;
    expect(get(r, "/api/budget").await, ErrorCode::Config)?;
    let gate = Arc::new(Semaphore::new(0));
    h.mock.set_gate(Some(gate.clone()));
    h.mock.push_reply(MockReply::text("slow"));
    let before = h.mock.attempts();
    let first = tokio::spawn({
        let r = r.clone();
        let uri = uri.clone();
        async move { post_json(&r, &uri, json!({ "text": "first" })).await }
    });
    while h.mock.attempts() == before {
        tokio::task::yield_now().await;
    }
    expect(
        post_json(r, &uri, json!({ "text": "second" })).await,
        ErrorCode::Busy,
    )?;
    gate.add_permits(1);
    ensure!(
        first.await.unwrap().status == StatusCode::OK,
        "gated post failed"
    );
    for code in ErrorCode::ALL {
        ensure!(seen.contains(&code), "{code:?} unreachable");
    }

    let script = MockScript {
        sequence: (0..3)
            .map(|i| MockReply::text(format!("answer number {i}")).with_chunk_chars(5))
            .collect(),
        ..Default::default()
    };
    let mut by_stream = Vec::new();
    for stream in ["true", "false"] {
        let h = harness_with(ServiceConfig::seed(), script.clone());
        let id = post_json(
            &h.router,
            "/api/sessions",
            json!({ "module": "coding", "model_id": "gpt-4o" }),
        )
        .await
        .json()["session_id"]
            .as_str()
            .unwrap()
            .to_string();
        for text in ["a", "b", "c"] {
            let uri = format!("/api/sessions/{id}/messages?stream={stream}");
            let r = post_json(&h.router, &uri, json!({ "text": text })).await;
            ensure!(r.status == StatusCode::OK, "post failed: {}", r.text());
        }
        by_stream.push(
            get(&h.router, &format!("/api/sessions/{id}/records"))
                .await
                .text(),
        );
    }
    ensure!(
        by_stream[0] == by_stream[1],
        "streamed and plain records differ"
    );

    let cli = cli_records(&harness_with(ServiceConfig::seed(), script.clone())).await?;
    let http = http_records(&harness_with(ServiceConfig::seed(), script)).await?;
    ensure!(
        !cli.is_empty() && cli == http,
        "CLI and HTTP records differ"
    );
    Ok("8/8 codes reachable, streamed == plain, CLI == HTTP".into())
}

fn main() -> ExitCode {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    let checks: [(&str, Check); 8] = [
        ("prompt fidelity", || Box::pin(prompt_fidelity())),
        ("policy table", || Box::pin(policy_table())),
        ("append protocol", || Box::pin(append_protocol())),
        ("turn atomicity", || Box::pin(turn_atomicity())),
        ("cost exactness", || Box::pin(cost_exactness())),
        (
            "transcript round-trip",
            || Box::pin(transcript_round_trip()),
        ),
        ("ingestion", || Box::pin(ingestion())),
        ("api conformance", || Box::pin(api_conformance())),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = rt.block_on(check());
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<22} {detail} [{secs:.2}s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name:<22} {reason} [{secs:.2}s]");
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
