//! PDF to markdown for template bindings such as `course_text` and `resume_text`.

pub mod encoding;
mod extract;
pub mod fixtures;

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Serialize;

pub use extract::TextRun;

pub const DEFAULT_MAX_UPLOAD_BYTES: u64 = 20 * 1024 * 1024;
pub const HEADING_RATIO: f64 = 1.3;
pub const TITLE_RATIO: f64 = 1.8;
pub const PAGE_RULE: &str = "---";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarkdownDocument {
    pub markdown: String,
    pub page_count: usize,
    pub char_count: usize,
    pub source_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UploadRejection {
    #[error("upload is not a PDF")]
    NotPdf,
    #[error("upload of {size} bytes exceeds the {limit}-byte limit")]
    TooLarge { size: u64, limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("could not parse PDF: {0}")]
    Parse(String),
    #[error("no extractable text found; please upload a readable PDF")]
    Unreadable,
}

pub fn validate_upload(bytes: &[u8], max_bytes: u64) -> Result<(), UploadRejection> {
    let size = bytes.len() as u64;
    if size > max_bytes {
        return Err(UploadRejection::TooLarge {
            size,
            limit: max_bytes,
        });
    }
    if !bytes.starts_with(b"%PDF-") {
        return Err(UploadRejection::NotPdf);
    }
    Ok(())
}

pub fn extract_markdown(bytes: &[u8], source_name: &str) -> Result<MarkdownDocument, IngestError> {
    let extracted = catch_unwind(AssertUnwindSafe(|| {
        let doc = lopdf::Document::load_mem(bytes).map_err(|e| e.to_string())?;
        extract::extract_runs(&doc)
    }));
    let (page_count, runs) = match extracted {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => return Err(IngestError::Parse(e)),
        Err(_) => return Err(IngestError::Parse("malformed document structure".into())),
    };
    if page_count == 0 {
        return Err(IngestError::Parse("document has no pages".into()));
    }
    let markdown = runs_to_markdown(&runs, page_count);
    if !markdown.chars().any(char::is_alphanumeric) {
        return Err(IngestError::Unreadable);
    }
    Ok(MarkdownDocument {
        char_count: markdown.chars().count(),
        markdown,
        page_count,
        source_name: source_name.to_string(),
    })
}

#[derive(Debug)]
struct Line {
    y: f64,
    size: f64,
    text: String,
}

/// Character-weighted median of run font sizes.
fn median_size(runs: &[TextRun]) -> f64 {
    let mut weighted: Vec<(f64, usize)> = runs
        .iter()
        .map(|r| (r.size, r.text.chars().count()))
        .filter(|(s, n)| *n > 0 && *s > 0.0)
        .collect();
    weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: usize = weighted.iter().map(|w| w.1).sum();
    let mut seen = 0;
    for (size, n) in &weighted {
        seen += n;
        if seen * 2 >= total {
            return *size;
        }
    }
    0.0
}

fn group_lines(mut runs: Vec<&TextRun>) -> Vec<Line> {
    runs.sort_by(|a, b| b.y.total_cmp(&a.y).then(a.x.total_cmp(&b.x)));
    let mut rows: Vec<Vec<&TextRun>> = Vec::new();
    for run in runs {
        let tolerance = (run.size * 0.5).max(1.0);
        match rows.last_mut() {
            Some(row) if (row[0].y - run.y).abs() <= tolerance => row.push(run),
            _ => rows.push(vec![run]),
        }
    }
    rows.into_iter()
        .map(|mut row| {
            row.sort_by(|a, b| a.x.total_cmp(&b.x));
            let mut text = String::new();
            let mut prev_end: Option<f64> = None;
            let mut weight: Vec<(f64, usize)> = Vec::new();
            for run in &row {
                if let Some(end) = prev_end {
                    let gap = run.x - end;
                    if gap > run.size * 0.15 && !text.ends_with(' ') && !run.text.starts_with(' ') {
                        text.push(' ');
                    }
                }
                text.push_str(&run.text);
                prev_end = Some(run.x_end.max(run.x));
                let n = run.text.chars().filter(|c| !c.is_whitespace()).count();
                match weight
                    .iter_mut()
                    .find(|(s, _)| (*s - run.size).abs() < 0.01)
                {
                    Some(w) => w.1 += n,
                    None => weight.push((run.size, n)),
                }
            }
            let size = weight
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.total_cmp(&a.0)))
                .map_or(0.0, |w| w.0);
            Line {
                y: row[0].y,
                size,
                text: text.split_whitespace().collect::<Vec<_>>().join(" "),
            }
        })
        .filter(|l| !l.text.is_empty())
        .collect()
}

fn runs_to_markdown(runs: &[TextRun], page_count: usize) -> String {
    let median = median_size(runs);
    let mut pages: Vec<String> = Vec::with_capacity(page_count);
    for page in 0..page_count {
        let lines = group_lines(runs.iter().filter(|r| r.page == page).collect());
        let mut out = String::new();
        let mut prev: Option<&Line> = None;
        for line in &lines {
            let heading = if median > 0.0 && line.size >= median * TITLE_RATIO {
                Some("# ")
            } else if median > 0.0 && line.size > median * HEADING_RATIO {
                Some("## ")
            } else {
                None
            };
            if let Some(p) = prev {
                let paragraph_gap = (p.y - line.y) > p.size.max(line.size) * 1.9;
                let prev_heading = median > 0.0 && p.size > median * HEADING_RATIO;
                if heading.is_some() || prev_heading || paragraph_gap {
                    out.push_str("\n\n");
                } else {
                    out.push('\n');
                }
            }
            if let Some(h) = heading {
                out.push_str(h);
            }
            out.push_str(&line.text);
            prev = Some(line);
        }
        if !out.is_empty() {
            pages.push(out);
        }
    }
    pages.join(&format!("\n\n{PAGE_RULE}\n\n"))
}
