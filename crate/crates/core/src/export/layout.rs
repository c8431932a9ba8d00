//! Top-to-bottom text flow onto Letter pages.

use lopdf::content::Operation;
use lopdf::dictionary;

use crate::fonts::{encode, StdFont};
use crate::pdfgen::{show_text, std_font_dict, PdfWriter, LETTER};

pub const MARGIN: f64 = 72.0;
pub const TEXT_WIDTH: f64 = LETTER.0 - 2.0 * MARGIN;
const LINE_FACTOR: f64 = 1.35;

fn resource_name(font: StdFont) -> &'static str {
    match font {
        StdFont::Helvetica => "F1",
        StdFont::HelveticaBold => "F2",
        StdFont::Courier => "F3",
    }
}

pub struct Typesetter {
    pages: Vec<Vec<Operation>>,
    current: Vec<Operation>,
    y: f64,
}

impl Default for Typesetter {
    fn default() -> Self {
        Self::new()
    }
}

impl Typesetter {
    pub fn new() -> Self {
        Typesetter {
            pages: Vec::new(),
            current: Vec::new(),
            y: LETTER.1 - MARGIN,
        }
    }

    pub fn new_page(&mut self) {
        self.pages.push(std::mem::take(&mut self.current));
        self.y = LETTER.1 - MARGIN;
    }

    pub fn gap(&mut self, points: f64) {
        self.y -= points;
    }

    /// Draws one pre-wrapped line, breaking the page first if it would not fit.
    pub fn line(&mut self, font: StdFont, size: f64, text: &str) {
        let advance = size * LINE_FACTOR;
        if self.y - advance < MARGIN {
            self.new_page();
        }
        self.y -= advance;
        if !text.trim().is_empty() {
            self.current.extend(show_text(
                resource_name(font),
                size,
                MARGIN,
                self.y,
                encode(text),
            ));
        }
    }

    /// Word-wrapped proportional text.
    pub fn paragraph(&mut self, font: StdFont, size: f64, text: &str) {
        for l in wrap_words(text, font, size, TEXT_WIDTH) {
            self.line(font, size, &l);
        }
    }

    /// Monospaced text with its leading whitespace kept; long lines are split.
    pub fn code(&mut self, size: f64, text: &str) {
        let per_line = ((TEXT_WIDTH * 1000.0) / (600.0 * size)).floor().max(1.0) as usize;
        let chars: Vec<char> = text.replace('\t', "    ").chars().collect();
        if chars.is_empty() {
            self.line(StdFont::Courier, size, "");
        }
        for chunk in chars.chunks(per_line) {
            self.line(StdFont::Courier, size, &chunk.iter().collect::<String>());
        }
    }

    pub fn finish(mut self, title: &str) -> Vec<u8> {
        if !self.current.is_empty() || self.pages.is_empty() {
            self.pages.push(std::mem::take(&mut self.current));
        }
        let mut w = PdfWriter::new().compress(true);
        let fonts = dictionary! {
            "F1" => w.add_object(std_font_dict(StdFont::Helvetica)),
            "F2" => w.add_object(std_font_dict(StdFont::HelveticaBold)),
            "F3" => w.add_object(std_font_dict(StdFont::Courier)),
        };
        let fonts_id = w.add_object(fonts);
        for ops in self.pages {
            w.add_page(ops, dictionary! { "Font" => fonts_id });
        }
        w.finish(Some(title))
    }
}

/// Greedy word wrap; words wider than the line are broken between characters.
pub fn wrap_words(text: &str, font: StdFont, size: f64, width: f64) -> Vec<String> {
    let mut lines = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        let candidate = if current.is_empty() {
            word.to_string()
        } else {
            format!("{current} {word}")
        };
        if font.text_width(&candidate, size) <= width {
            current = candidate;
            continue;
        }
        if !current.is_empty() {
            lines.push(std::mem::take(&mut current));
        }
        for c in word.chars() {
            current.push(c);
            if font.text_width(&current, size) > width && current.chars().count() > 1 {
                current.pop();
                lines.push(std::mem::replace(&mut current, c.to_string()));
            }
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}
