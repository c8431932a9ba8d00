//! Metrics for the PDF standard fonts the crate writes with.

use crate::ingest::encoding::{win_ansi_byte, win_ansi_char};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StdFont {
    Helvetica,
    HelveticaBold,
    Courier,
}

// Widths for codes 32..=126, in 1/1000 em.
#[rustfmt::skip]
const HELVETICA: [u16; 95] = [
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278,
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 278, 278, 584, 584, 584, 556,
    1015, 667, 667, 722, 722, 667, 611, 778, 722, 278, 500, 667, 556, 833, 722, 778,
    667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 278, 278, 278, 469, 556,
    333, 556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, 556, 556,
    556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584,
];

#[rustfmt::skip]
const HELVETICA_BOLD: [u16; 95] = [
    278, 333, 474, 556, 556, 889, 722, 238, 333, 333, 389, 584, 278, 333, 278, 278,
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 333, 333, 584, 584, 584, 611,
    975, 722, 722, 722, 722, 667, 611, 778, 722, 278, 556, 722, 611, 833, 722, 778,
    667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 333, 278, 333, 584, 556,
    333, 556, 611, 556, 611, 556, 333, 611, 611, 278, 278, 556, 278, 889, 611, 611,
    611, 611, 389, 556, 333, 611, 556, 778, 556, 556, 500, 389, 280, 389, 584,
];

pub const FIRST_CODE: u8 = 32;
pub const LAST_CODE: u8 = 255;

impl StdFont {
    pub fn base_name(self) -> &'static str {
        match self {
            StdFont::Helvetica => "Helvetica",
            StdFont::HelveticaBold => "Helvetica-Bold",
            StdFont::Courier => "Courier",
        }
    }

    /// Advance of a WinAnsi code in 1/1000 em.
    pub fn code_width(self, code: u8) -> u16 {
        let table = match self {
            StdFont::Courier => return 600,
            StdFont::Helvetica => &HELVETICA,
            StdFont::HelveticaBold => &HELVETICA_BOLD,
        };
        match code {
            32..=126 => table[(code - 32) as usize],
            _ if win_ansi_char(code).is_some() => 556,
            _ => 0,
        }
    }

    /// `/Widths` array entries for `FIRST_CODE..=LAST_CODE`.
    pub fn widths(self) -> Vec<i64> {
        (FIRST_CODE..=LAST_CODE)
            .map(|c| self.code_width(c) as i64)
            .collect()
    }

    /// Width of `text` in points once encoded with [`encode`].
    pub fn text_width(self, text: &str, size: f64) -> f64 {
        encode(text)
            .iter()
            .map(|&b| self.code_width(b) as f64)
            .sum::<f64>()
            * size
            / 1000.0
    }
}

/// WinAnsi bytes for `text`; characters outside the encoding become `?`.
pub fn encode(text: &str) -> Vec<u8> {
    text.chars()
        .map(|c| match c {
            '\t' => b' ',
            _ => win_ansi_byte(c).unwrap_or(b'?'),
        })
        .collect()
}
