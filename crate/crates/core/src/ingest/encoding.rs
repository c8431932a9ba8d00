//! Character code to text mapping for PDF fonts.

use std::collections::HashMap;

/// WinAnsiEncoding for 0x80..=0x9F; everything else matches Latin-1.
const WIN_ANSI_HIGH: [Option<char>; 32] = [
    Some('\u{20AC}'),
    None,
    Some('\u{201A}'),
    Some('\u{0192}'),
    Some('\u{201E}'),
    Some('\u{2026}'),
    Some('\u{2020}'),
    Some('\u{2021}'),
    Some('\u{02C6}'),
    Some('\u{2030}'),
    Some('\u{0160}'),
    Some('\u{2039}'),
    Some('\u{0152}'),
    None,
    Some('\u{017D}'),
    None,
    None,
    Some('\u{2018}'),
    Some('\u{2019}'),
    Some('\u{201C}'),
    Some('\u{201D}'),
    Some('\u{2022}'),
    Some('\u{2013}'),
    Some('\u{2014}'),
    Some('\u{02DC}'),
    Some('\u{2122}'),
    Some('\u{0161}'),
    Some('\u{203A}'),
    Some('\u{0153}'),
    None,
    Some('\u{017E}'),
    Some('\u{0178}'),
];

pub fn win_ansi_char(code: u8) -> Option<char> {
    match code {
        0x80..=0x9F => WIN_ANSI_HIGH[(code - 0x80) as usize],
        0x20..=0x7E | 0xA0..=0xFF => Some(code as char),
        b'\t' | b'\n' | b'\r' => Some(' '),
        _ => None,
    }
}

/// Inverse of [`win_ansi_char`]; `None` for characters the encoding lacks.
pub fn win_ansi_byte(c: char) -> Option<u8> {
    let cp = c as u32;
    if (0x20..=0x7E).contains(&cp) || (0xA0..=0xFF).contains(&cp) {
        return Some(cp as u8);
    }
    WIN_ANSI_HIGH
        .iter()
        .position(|&h| h == Some(c))
        .map(|i| 0x80 + i as u8)
}

/// Glyph names commonly used in `/Differences` arrays.
pub fn glyph_name_char(name: &str) -> Option<char> {
    let mut chars = name.chars();
    if let (Some(c), None) = (chars.next(), chars.clone().next()) {
        if c.is_ascii_alphabetic() {
            return Some(c);
        }
    }
    if let Some(hex) = name.strip_prefix("uni") {
        if hex.len() == 4 {
            return u32::from_str_radix(hex, 16).ok().and_then(char::from_u32);
        }
    }
    let c = match name {
        "space" => ' ',
        "exclam" => '!',
        "quotedbl" => '"',
        "numbersign" => '#',
        "dollar" => '$',
        "percent" => '%',
        "ampersand" => '&',
        "quotesingle" => '\'',
        "parenleft" => '(',
        "parenright" => ')',
        "asterisk" => '*',
        "plus" => '+',
        "comma" => ',',
        "hyphen" | "minus" => '-',
        "period" => '.',
        "slash" => '/',
        "zero" => '0',
        "one" => '1',
        "two" => '2',
        "three" => '3',
        "four" => '4',
        "five" => '5',
        "six" => '6',
        "seven" => '7',
        "eight" => '8',
        "nine" => '9',
        "colon" => ':',
        "semicolon" => ';',
        "less" => '<',
        "equal" => '=',
        "greater" => '>',
        "question" => '?',
        "at" => '@',
        "bracketleft" => '[',
        "backslash" => '\\',
        "bracketright" => ']',
        "underscore" => '_',
        "braceleft" => '{',
        "bar" => '|',
        "braceright" => '}',
        "quoteleft" => '\u{2018}',
        "quoteright" => '\u{2019}',
        "quotedblleft" => '\u{201C}',
        "quotedblright" => '\u{201D}',
        "endash" => '\u{2013}',
        "emdash" => '\u{2014}',
        "bullet" => '\u{2022}',
        "fi" => '\u{FB01}',
        "fl" => '\u{FB02}',
        _ => return None,
    };
    Some(c)
}

/// Parsed `/ToUnicode` CMap: code bytes to text.
#[derive(Debug, Default, Clone)]
pub struct ToUnicode {
    map: HashMap<Vec<u8>, String>,
    code_lengths: Vec<usize>,
}

#[derive(Debug, PartialEq)]
enum Tok {
    Hex(Vec<u8>),
    Open,
    Close,
    Word(String),
}

fn tokenize(data: &[u8]) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < data.len() {
        let b = data[i];
        match b {
            b'%' => {
                while i < data.len() && data[i] != b'\n' && data[i] != b'\r' {
                    i += 1;
                }
            }
            b'<' if data.get(i + 1) == Some(&b'<') => {
                out.push(Tok::Word("<<".into()));
                i += 2;
            }
            b'<' => {
                let start = i + 1;
                let end = data[start..]
                    .iter()
                    .position(|&c| c == b'>')
                    .map_or(data.len(), |p| start + p);
                let digits: Vec<u8> = data[start..end]
                    .iter()
                    .copied()
                    .filter(u8::is_ascii_hexdigit)
                    .collect();
                let mut bytes = Vec::with_capacity(digits.len().div_ceil(2));
                for pair in digits.chunks(2) {
                    let hi = (pair[0] as char).to_digit(16).unwrap_or(0);
                    let lo = pair
                        .get(1)
                        .map_or(0, |&c| (c as char).to_digit(16).unwrap_or(0));
                    bytes.push((hi * 16 + lo) as u8);
                }
                out.push(Tok::Hex(bytes));
                i = end + 1;
            }
            b'[' => {
                out.push(Tok::Open);
                i += 1;
            }
            b']' => {
                out.push(Tok::Close);
                i += 1;
            }
            _ if b.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < data.len()
                    && !data[i].is_ascii_whitespace()
                    && !matches!(data[i], b'<' | b'[' | b']' | b'%')
                {
                    i += 1;
                }
                out.push(Tok::Word(
                    String::from_utf8_lossy(&data[start..i]).into_owned(),
                ));
            }
        }
    }
    out
}

fn utf16be(bytes: &[u8]) -> String {
    let units: Vec<u16> = bytes
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]))
        .collect();
    String::from_utf16_lossy(&units)
}

fn bytes_to_u32(b: &[u8]) -> u32 {
    b.iter().take(4).fold(0u32, |acc, &x| (acc << 8) | x as u32)
}

fn u32_to_bytes(v: u32, len: usize) -> Vec<u8> {
    (0..len).rev().map(|i| (v >> (8 * i)) as u8).collect()
}

/// Ranges wider than this are truncated; real CMaps never come close.
const MAX_RANGE: u32 = 65_536;

impl ToUnicode {
    pub fn parse(data: &[u8]) -> ToUnicode {
        let toks = tokenize(data);
        let mut cmap = ToUnicode::default();
        let mut i = 0;
        while i < toks.len() {
            match &toks[i] {
                Tok::Word(w) if w == "beginbfchar" => {
                    i += 1;
                    while i + 1 < toks.len() {
                        match (&toks[i], &toks[i + 1]) {
                            (Tok::Hex(src), Tok::Hex(dst)) => {
                                cmap.insert(src.clone(), utf16be(dst));
                                i += 2;
                            }
                            _ => break,
                        }
                    }
                }
                Tok::Word(w) if w == "beginbfrange" => {
                    i += 1;
                    while i + 2 < toks.len() {
                        let (Tok::Hex(lo), Tok::Hex(hi)) = (&toks[i], &toks[i + 1]) else {
                            break;
                        };
                        let len = lo.len().max(1);
                        let (lo_v, hi_v) = (bytes_to_u32(lo), bytes_to_u32(hi));
                        let span = hi_v.saturating_sub(lo_v).min(MAX_RANGE);
                        match &toks[i + 2] {
                            Tok::Hex(dst) => {
                                let base: Vec<u16> = dst
                                    .chunks(2)
                                    .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]))
                                    .collect();
                                for off in 0..=span {
                                    let mut units = base.clone();
                                    if let Some(last) = units.last_mut() {
                                        *last = last.wrapping_add(off as u16);
                                    }
                                    cmap.insert(
                                        u32_to_bytes(lo_v + off, len),
                                        String::from_utf16_lossy(&units),
                                    );
                                }
                                i += 3;
                            }
                            Tok::Open => {
                                let mut j = i + 3;
                                let mut off = 0;
                                while j < toks.len() {
                                    match &toks[j] {
                                        Tok::Hex(dst) => {
                                            if off <= span {
                                                cmap.insert(
                                                    u32_to_bytes(lo_v + off, len),
                                                    utf16be(dst),
                                                );
                                            }
                                            off += 1;
                                            j += 1;
                                        }
                                        Tok::Close => {
                                            j += 1;
                                            break;
                                        }
                                        _ => break,
                                    }
                                }
                                i = j;
                            }
                            _ => break,
                        }
                    }
                }
                _ => i += 1,
            }
        }
        cmap.code_lengths.sort_unstable();
        cmap.code_lengths.dedup();
        cmap
    }

    fn insert(&mut self, code: Vec<u8>, text: String) {
        self.code_lengths.push(code.len());
        self.map.insert(code, text);
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Decodes `bytes`, trying the longest known code length first at each
    /// position. Codes with no mapping are skipped.
    pub fn decode(&self, bytes: &[u8], fallback_width: usize) -> String {
        let mut out = String::new();
        let mut i = 0;
        'outer: while i < bytes.len() {
            for &len in self.code_lengths.iter().rev() {
                if i + len <= bytes.len() {
                    if let Some(s) = self.map.get(&bytes[i..i + len]) {
                        out.push_str(s);
                        i += len;
                        continue 'outer;
                    }
                }
            }
            i += fallback_width.max(1);
        }
        out
    }
}
