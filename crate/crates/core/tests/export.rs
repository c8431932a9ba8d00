mod common;

use chatisa_core::clock::SteppingClock;
use chatisa_core::conversation::{NewSession, UsageLedger};
use chatisa_core::export::{
    build_title, check_budget, compute_cost, render_transcript_pdf, BudgetStatus, ExportError,
    SECTIONS,
};
use chatisa_core::gateway::{MockReply, ModelSpec, Provider, Registry, Tier};
use chatisa_core::ingest::extract_markdown;
use chatisa_core::money::Money;
use chatisa_core::prompts::ModuleKind;
use chrono::DateTime;
use lopdf::content::Content;
use lopdf::{Document, Object};
use num_bigint::BigInt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn spec(id: &str, input_micros: i64, output_micros: i64) -> ModelSpec {
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

#[test]
fn worked_example() {
    let reg = Registry::new(vec![spec("mock", 1_000_000, 2_000_000)]).unwrap();
    let mut ledger = UsageLedger::new();
    ledger.record("mock", 1000, 500, false);
    let r = compute_cost(&ledger, &reg).unwrap();
    assert_eq!(r.rows[0].input_cost.to_string(), "0.001000");
    assert_eq!(r.rows[0].output_cost.to_string(), "0.001000");
    assert_eq!(r.total_cost.to_string(), "0.002000");
    assert_eq!(r.total_cost, Money::from_micros(2000));
}

#[test]
fn empty_and_unknown_ledgers() {
    let reg = common::seed_registry();
    let r = compute_cost(&UsageLedger::new(), &reg).unwrap();
    assert!(r.rows.is_empty());
    assert_eq!(r.total_cost, Money::ZERO);
    let mut l = UsageLedger::new();
    l.record("retired-model", 1, 1, false);
    assert_eq!(
        compute_cost(&l, &reg),
        Err(ExportError::UnknownModel("retired-model".into()))
    );
}

/// Half-even rounding of `pico / 10^6` in big integers.
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

#[test]
fn cost_matches_big_integer_oracle() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..2000 {
        let price = rng.gen_range(0..=100_000_000i64);
        let tokens = rng.gen_range(0..=2_000_000_000u64);
        let reg = Registry::new(vec![spec("m", price, price / 3)]).unwrap();
        let mut l = UsageLedger::new();
        l.record("m", tokens, tokens / 7, false);
        let r = compute_cost(&l, &reg).unwrap();
        let in_pico = BigInt::from(tokens) * BigInt::from(price);
        let out_pico = BigInt::from(tokens / 7) * BigInt::from(price / 3);
        assert_eq!(BigInt::from(r.rows[0].input_cost.raw()), in_pico);
        assert_eq!(BigInt::from(r.total_cost.raw()), &in_pico + &out_pico);
        assert_eq!(
            BigInt::from(r.rows[0].input_cost.to_micros_rounded()),
            round_half_even_micros(&in_pico)
        );
    }
}

#[test]
fn two_model_total_is_sum_of_singles() {
    let reg = common::seed_registry();
    let mut both = UsageLedger::new();
    both.record("gpt-4o", 12_345, 678, false);
    both.record("gemma2-9b-it", 9_999, 1_001, true);
    let mut a = UsageLedger::new();
    a.record("gpt-4o", 12_345, 678, false);
    let mut b = UsageLedger::new();
    b.record("gemma2-9b-it", 9_999, 1_001, true);
    let total = compute_cost(&both, &reg).unwrap();
    assert_eq!(
        total.total_cost,
        compute_cost(&a, &reg).unwrap().total_cost + compute_cost(&b, &reg).unwrap().total_cost
    );
    assert!(total.any_estimated);
}

#[test]
fn budget_examples() {
    let reg = Registry::new(vec![spec("m", 1_000_000, 0)]).unwrap();
    let limit: Money = "250".parse().unwrap();
    let ledger_for = |millions: u64| {
        let mut l = UsageLedger::new();
        l.record("m", millions, 0, false);
        l
    };
    let status = |ledgers: &[UsageLedger]| check_budget(ledgers, &reg, limit, 0.8).unwrap().status;
    assert_eq!(status(&[]), BudgetStatus::Ok);
    assert_eq!(
        status(&[ledger_for(150_000_000), ledger_for(50_000_000)]),
        BudgetStatus::Warn
    );
    assert_eq!(status(&[ledger_for(250_010_000)]), BudgetStatus::Exceeded);
    assert!(check_budget(&[], &reg, Money::ZERO, 0.8).is_err());
}

#[test]
fn title_examples() {
    let d = chrono::NaiveDate::from_ymd_opt(2025, 5, 1).unwrap();
    assert_eq!(
        build_title("Jane Doe", d).unwrap(),
        "Jane Doe's Interaction with ChatISA on 2025-05-01"
    );
}

/// Text a standard-font WinAnsi PDF can carry for `c`.
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

fn pdf_text_by_font(pdf: &[u8]) -> Vec<(String, String)> {
    let doc = Document::load_mem(pdf).unwrap();
    let mut out = Vec::new();
    for (_, id) in doc.get_pages() {
        let content = Content::decode(&doc.get_page_content(id)).unwrap();
        let mut font = String::new();
        for op in content.operations {
            match (op.operator.as_str(), op.operands.first()) {
                ("Tf", Some(Object::Name(n))) => font = String::from_utf8_lossy(n).into(),
                ("Tj", Some(Object::String(s, _))) => {
                    out.push((font.clone(), String::from_utf8_lossy(s).into()))
                }
                _ => {}
            }
        }
    }
    out
}

#[tokio::test]
async fn transcript_round_trip() {
    let mut rng = StdRng::seed_from_u64(3);
    let clock = SteppingClock::fixed(DateTime::from_timestamp(1_746_057_600, 0).unwrap());
    for case in 0..12 {
        let (m, mock) = common::manager();
        let s = m
            .create(NewSession::new(ModuleKind::Coding, "gpt-4o"))
            .unwrap();
        for t in 0..rng.gen_range(1..6) {
            if t == 2 {
                m.switch_model(&s.session_id, "gemma2-9b-it").await.unwrap();
            }
            let reply = MockReply::text(random_text(&mut rng));
            let reply = if rng.gen_bool(0.5) {
                reply.with_usage(rng.gen_range(1..9000), rng.gen_range(1..900))
            } else {
                reply
            };
            mock.push_reply(reply);
            m.post(&s.session_id, &random_text(&mut rng), None)
                .await
                .unwrap();
        }
        let session = m.snapshot(&s.session_id).await.unwrap();
        let reg = common::seed_registry();
        let pdf = render_transcript_pdf(&session, "Jane Doe", "ISA 444", &reg, &clock).unwrap();
        let md = extract_markdown(&pdf, "t.pdf").unwrap().markdown;
        let text = squash_extracted(&md);

        let mut needles = vec![squash("Jane Doe's Interaction with ChatISA on 2025-05-01")];
        needles.push(squash(SECTIONS[0]));
        needles.extend(
            session
                .models_used()
                .iter()
                .map(|id| squash(&format!("- {id}"))),
        );
        needles.push(squash(SECTIONS[1]));
        needles.push(squash(SECTIONS[2]));
        let report = compute_cost(&session.usage, &reg).unwrap();
        for row in &report.rows {
            needles.push(squash(&row.model_id));
            needles.push(squash(&format!("${}", row.input_cost)));
            needles.push(squash(&format!("${}", row.output_cost)));
        }
        needles.push(squash(&format!("Total cost: ${}", report.total_cost)));
        needles.push(squash(SECTIONS[3]));
        for msg in &session.history {
            let label = if msg.role == chatisa_core::gateway::Role::User {
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
                None => panic!("case {case}: {needle:?} not found in order"),
            }
        }
    }
}

#[tokio::test]
async fn code_is_monospaced_and_zero_turns_rejected() {
    let (m, mock) = common::manager();
    let s = m
        .create(NewSession::new(ModuleKind::Coding, "gpt-4o"))
        .unwrap();
    let reg = common::seed_registry();
    let clock = SteppingClock::fixed(DateTime::from_timestamp(0, 0).unwrap());
    let empty = m.snapshot(&s.session_id).await.unwrap();
    assert_eq!(
        render_transcript_pdf(&empty, "A", "ISA 444", &reg, &clock),
        Err(ExportError::NothingToExport)
    );
    mock.push_reply(MockReply::text(
        "Try this:\n```python\nprint(df.head())\n```\nDone.",
    ));
    m.post(&s.session_id, "show code", None).await.unwrap();
    let session = m.snapshot(&s.session_id).await.unwrap();
    assert!(matches!(
        render_transcript_pdf(&session, " ", "ISA 444", &reg, &clock),
        Err(ExportError::Validation(_))
    ));
    let pdf = render_transcript_pdf(&session, "A", "ISA 444", &reg, &clock).unwrap();
    let drawn = pdf_text_by_font(&pdf);
    let font_of = |t: &str| drawn.iter().find(|(_, s)| s == t).map(|(f, _)| f.clone());
    assert_eq!(font_of("print(df.head())").as_deref(), Some("F3"));
    assert_eq!(font_of("Try this:").as_deref(), Some("F1"));
    assert!(pdf.starts_with(b"%PDF-1.7"));
}
