//! Cost accounting and the PDF transcript of a session.

mod cost;
pub mod layout;

use chrono::NaiveDate;

use crate::clock::Clock;
use crate::conversation::Session;
use crate::fonts::StdFont;
use crate::gateway::{Registry, Role};

pub use cost::{
    budget_status, check_budget, compute_cost, BudgetReport, BudgetStatus, CostReport, CostRow,
};
use layout::Typesetter;

pub const PURPOSE_TEXT: &str = include_str!("../../assets/export/purpose.md");
pub const STYLE_TEXT: &str = include_str!("../../assets/export/style.md");

/// Section headings in the order they appear after the title page.
pub const SECTIONS: [&str; 5] = [
    "ChatISA's Purpose",
    "ChatISA's PDF Output Style and Layout",
    "Token Counts and Cost Breakdown",
    "Full Chat Transcript",
    "Custom Instructions",
];

pub const USER_LABEL: &str = "User:";
pub const ASSISTANT_LABEL: &str = "Assistant:";

const TITLE_SIZE: f64 = 20.0;
const SUBTITLE_SIZE: f64 = 11.0;
const HEADING_SIZE: f64 = 14.0;
const BODY_SIZE: f64 = 10.0;
const CODE_SIZE: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExportError {
    #[error("{0}")]
    Validation(String),
    #[error("session has no completed turns to export")]
    NothingToExport,
    #[error("model {0:?} in usage ledger is not in the registry")]
    UnknownModel(String),
}

pub fn build_title(student_name: &str, date: NaiveDate) -> Result<String, ExportError> {
    let name = student_name.trim();
    if name.is_empty() {
        return Err(ExportError::Validation(
            "student_name must not be empty".into(),
        ));
    }
    Ok(format!(
        "{name}'s Interaction with ChatISA on {}",
        date.format("%Y-%m-%d")
    ))
}

/// Cost table lines, monospaced.
pub fn cost_table(report: &CostReport) -> Vec<String> {
    let mut lines = vec![format!(
        "{:<28}{:>10}{:>10}{:>14}{:>14}",
        "Model", "In tok", "Out tok", "In cost", "Out cost"
    )];
    for row in &report.rows {
        lines.push(format!(
            "{:<28}{:>10}{:>10}{:>14}{:>14}",
            format!("{}{}", row.model_id, if row.estimated { "*" } else { "" }),
            row.input_tokens,
            row.output_tokens,
            format!("${}", row.input_cost),
            format!("${}", row.output_cost),
        ));
    }
    lines.push(format!("Total cost: ${}", report.total_cost));
    if report.any_estimated {
        lines.push("* token counts estimated locally".into());
    }
    lines
}

/// Renders text that may contain fenced code blocks.
fn rich_text(t: &mut Typesetter, text: &str) {
    let mut in_fence = false;
    for line in text.lines() {
        let fence = line.trim_start().starts_with("```");
        if fence || in_fence {
            t.code(CODE_SIZE, line);
            if fence {
                in_fence = !in_fence;
            }
        } else if line.trim().is_empty() {
            t.gap(BODY_SIZE * 0.6);
        } else {
            t.paragraph(StdFont::Helvetica, BODY_SIZE, line);
        }
    }
}

fn heading(t: &mut Typesetter, text: &str) {
    t.gap(HEADING_SIZE * 0.6);
    t.paragraph(StdFont::HelveticaBold, HEADING_SIZE, text);
    t.gap(BODY_SIZE * 0.4);
}

pub fn render_transcript_pdf(
    session: &Session,
    student_name: &str,
    course_number: &str,
    registry: &Registry,
    clock: &dyn Clock,
) -> Result<Vec<u8>, ExportError> {
    let title = build_title(student_name, clock.now().date_naive())?;
    if course_number.trim().is_empty() {
        return Err(ExportError::Validation(
            "course_number must not be empty".into(),
        ));
    }
    if session.turns() == 0 {
        return Err(ExportError::NothingToExport);
    }
    let report = compute_cost(&session.usage, registry)?;

    let mut t = Typesetter::new();
    t.gap(120.0);
    t.paragraph(StdFont::HelveticaBold, TITLE_SIZE, &title);
    t.gap(SUBTITLE_SIZE);
    t.paragraph(
        StdFont::Helvetica,
        SUBTITLE_SIZE,
        &format!("Course: {}", course_number.trim()),
    );
    t.paragraph(
        StdFont::Helvetica,
        SUBTITLE_SIZE,
        &format!("Module: {}", session.module.title()),
    );
    t.paragraph(
        StdFont::Helvetica,
        SUBTITLE_SIZE,
        &format!("Session: {}", session.session_id),
    );
    t.new_page();

    heading(&mut t, SECTIONS[0]);
    t.paragraph(StdFont::Helvetica, BODY_SIZE, PURPOSE_TEXT);
    t.gap(BODY_SIZE * 0.6);
    t.paragraph(
        StdFont::Helvetica,
        BODY_SIZE,
        "Models used in this session:",
    );
    for model_id in session.models_used() {
        let name = registry
            .get(&model_id)
            .map_or(String::new(), |m| format!(" ({})", m.display_name));
        t.paragraph(
            StdFont::Helvetica,
            BODY_SIZE,
            &format!("- {model_id}{name}"),
        );
    }

    heading(&mut t, SECTIONS[1]);
    t.paragraph(StdFont::Helvetica, BODY_SIZE, STYLE_TEXT);

    heading(&mut t, SECTIONS[2]);
    for line in cost_table(&report) {
        t.code(CODE_SIZE, &line);
    }

    heading(&mut t, SECTIONS[3]);
    for msg in &session.history {
        let label = match msg.role {
            Role::User => USER_LABEL,
            _ => ASSISTANT_LABEL,
        };
        t.gap(BODY_SIZE * 0.5);
        t.line(StdFont::HelveticaBold, BODY_SIZE, label);
        rich_text(&mut t, &msg.content);
    }

    heading(&mut t, SECTIONS[4]);
    rich_text(&mut t, &session.rendered_system_prompt);

    Ok(t.finish(&title))
}
