//! Programmatic PDF fixtures with known text, fonts and sizes.

use std::collections::BTreeMap;

use lopdf::content::Operation;
use lopdf::{dictionary, Dictionary, Object, StringFormat};

use crate::fonts::{encode, StdFont};
use crate::pdfgen::{real, show_text, std_font_dict, PdfWriter, LETTER};

/// How text is encoded into the content stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureStyle {
    /// One `Tj` per line, standard font, WinAnsi.
    Plain,
    /// Flate-compressed content streams.
    Compressed,
    /// Words split into kerned `TJ` arrays, spaces expressed as gaps.
    Kerned,
    /// Two-byte CIDs mapped back through a `/ToUnicode` CMap.
    ToUnicode,
    /// Letters and digits re-coded via an `/Encoding /Differences` array.
    Differences,
    /// Text drawn from inside a Form XObject.
    Form,
}

impl FixtureStyle {
    pub const ALL: [FixtureStyle; 6] = [
        FixtureStyle::Plain,
        FixtureStyle::Compressed,
        FixtureStyle::Kerned,
        FixtureStyle::ToUnicode,
        FixtureStyle::Differences,
        FixtureStyle::Form,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureLine {
    pub text: String,
    pub size: f64,
}

impl FixtureLine {
    pub fn new(text: impl Into<String>, size: f64) -> Self {
        FixtureLine {
            text: text.into(),
            size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub pages: Vec<Vec<FixtureLine>>,
    pub style: FixtureStyle,
}

impl FixtureSpec {
    pub fn single(text: &str) -> Self {
        FixtureSpec {
            pages: vec![vec![FixtureLine::new(text, 12.0)]],
            style: FixtureStyle::Plain,
        }
    }

    pub fn all_text(&self) -> String {
        self.pages
            .iter()
            .flatten()
            .map(|l| l.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

const TOP: f64 = 720.0;
const LEFT: f64 = 72.0;

fn layout(lines: &[FixtureLine]) -> Vec<(f64, &FixtureLine)> {
    let mut y = TOP;
    lines
        .iter()
        .map(|l| {
            let at = y;
            y -= l.size * 1.4;
            (at, l)
        })
        .collect()
}

fn tj(font: &str, size: f64, y: f64, body: Vec<Operation>) -> Vec<Operation> {
    let mut ops = vec![
        Operation::new("BT", vec![]),
        Operation::new(
            "Tf",
            vec![Object::Name(font.as_bytes().to_vec()), real(size)],
        ),
        Operation::new("Td", vec![real(LEFT), real(y)]),
    ];
    ops.extend(body);
    ops.push(Operation::new("ET", vec![]));
    ops
}

fn string(bytes: Vec<u8>) -> Object {
    Object::String(bytes, StringFormat::Literal)
}

fn kerned_array(text: &str) -> Vec<Object> {
    let mut items = Vec::new();
    for (i, word) in text.split(' ').enumerate() {
        if i > 0 {
            items.push(Object::Integer(-350));
        }
        let chars: Vec<char> = word.chars().collect();
        for (j, piece) in chars.chunks(3).enumerate() {
            if j > 0 {
                items.push(Object::Integer(-12));
            }
            items.push(string(encode(&piece.iter().collect::<String>())));
        }
    }
    items
}

struct CidMap {
    codes: BTreeMap<char, u16>,
}

impl CidMap {
    fn build(spec: &FixtureSpec) -> Self {
        let mut codes = BTreeMap::new();
        for c in spec.all_text().chars() {
            let next = codes.len() as u16 + 1;
            codes.entry(c).or_insert(next);
        }
        CidMap { codes }
    }

    fn encode(&self, text: &str) -> Vec<u8> {
        text.chars()
            .flat_map(|c| self.codes[&c].to_be_bytes())
            .collect()
    }

    fn cmap(&self) -> Vec<u8> {
        let mut s = String::from(
            "/CIDInit /ProcSet findresource begin\n12 dict begin\nbegincmap\n\
             /CMapName /Fixture def\n1 begincodespacerange\n<0000> <FFFF>\nendcodespacerange\n",
        );
        let entries: Vec<_> = self.codes.iter().collect();
        for chunk in entries.chunks(100) {
            s.push_str(&format!("{} beginbfchar\n", chunk.len()));
            for (c, code) in chunk {
                let mut units = [0u16; 2];
                let hex: String = c
                    .encode_utf16(&mut units)
                    .iter()
                    .map(|u| format!("{u:04X}"))
                    .collect();
                s.push_str(&format!("<{code:04X}> <{hex}>\n"));
            }
            s.push_str("endbfchar\n");
        }
        s.push_str("endcmap\nCMapName currentdict /CMap defineresource pop\nend\nend\n");
        s.into_bytes()
    }
}

const DIFF_GLYPHS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

/// Letters and digits occupy codes 128.. in this order.
fn differences_alphabet() -> Vec<(char, String)> {
    ('a'..='z')
        .chain('A'..='Z')
        .map(|c| (c, c.to_string()))
        .chain(('0'..='9').zip(DIFF_GLYPHS.iter().map(|s| s.to_string())))
        .collect()
}

fn differences_encode(text: &str) -> Vec<u8> {
    let alphabet = differences_alphabet();
    text.chars()
        .flat_map(|c| match alphabet.iter().position(|(a, _)| *a == c) {
            Some(i) => vec![128 + i as u8],
            None => encode(&c.to_string()),
        })
        .collect()
}

/// Renders a fixture; extraction of the result should recover every line.
pub fn render(spec: &FixtureSpec) -> Vec<u8> {
    let mut w = PdfWriter::new().compress(spec.style == FixtureStyle::Compressed);
    let font_dict = match spec.style {
        FixtureStyle::ToUnicode => {
            let cids = CidMap::build(spec);
            let cmap = w.add_object(lopdf::Stream::new(Dictionary::new(), cids.cmap()));
            dictionary! {
                "Type" => "Font",
                "Subtype" => "Type0",
                "BaseFont" => "Helvetica",
                "Encoding" => "Identity-H",
                "ToUnicode" => cmap,
            }
        }
        FixtureStyle::Differences => {
            let mut diffs = vec![Object::Integer(128)];
            diffs.extend(
                differences_alphabet()
                    .into_iter()
                    .map(|(_, name)| Object::Name(name.into_bytes())),
            );
            dictionary! {
                "Type" => "Font",
                "Subtype" => "Type1",
                "BaseFont" => "Helvetica",
                "Encoding" => dictionary! {
                    "Type" => "Encoding",
                    "BaseEncoding" => "WinAnsiEncoding",
                    "Differences" => diffs,
                },
            }
        }
        _ => std_font_dict(StdFont::Helvetica),
    };
    let font_id = w.add_object(font_dict);
    let cids = CidMap::build(spec);
    for page in &spec.pages {
        let mut ops = Vec::new();
        for (y, line) in layout(page) {
            match spec.style {
                FixtureStyle::Plain | FixtureStyle::Compressed | FixtureStyle::Form => {
                    ops.extend(show_text("F1", line.size, LEFT, y, encode(&line.text)))
                }
                FixtureStyle::Kerned => ops.extend(tj(
                    "F1",
                    line.size,
                    y,
                    vec![Operation::new(
                        "TJ",
                        vec![Object::Array(kerned_array(&line.text))],
                    )],
                )),
                FixtureStyle::ToUnicode => ops.extend(tj(
                    "F1",
                    line.size,
                    y,
                    vec![Operation::new("Tj", vec![string(cids.encode(&line.text))])],
                )),
                FixtureStyle::Differences => ops.extend(tj(
                    "F1",
                    line.size,
                    y,
                    vec![Operation::new(
                        "Tj",
                        vec![string(differences_encode(&line.text))],
                    )],
                )),
            }
        }
        let fonts = dictionary! { "F1" => font_id };
        if spec.style == FixtureStyle::Form {
            let form = w.stream(
                dictionary! {
                    "Type" => "XObject",
                    "Subtype" => "Form",
                    "BBox" => vec![0.into(), 0.into(), real(LETTER.0), real(LETTER.1)],
                    "Resources" => dictionary! { "Font" => fonts },
                },
                ops,
            );
            let page_ops = vec![
                Operation::new("q", vec![]),
                Operation::new("cm", [1, 0, 0, 1, 0, 0].map(Object::Integer).to_vec()),
                Operation::new("Do", vec![Object::Name(b"Fm1".to_vec())]),
                Operation::new("Q", vec![]),
            ];
            w.add_page(
                page_ops,
                dictionary! { "XObject" => dictionary! { "Fm1" => form } },
            );
        } else {
            w.add_page(ops, dictionary! { "Font" => fonts });
        }
    }
    w.finish(None)
}

/// A page that only paints an image: no text layer at all.
pub fn image_only_pdf() -> Vec<u8> {
    let mut w = PdfWriter::new();
    let pixels: Vec<u8> = (0..64u32 * 64).map(|i| (i % 251) as u8).collect();
    let image = w.add_object(lopdf::Stream::new(
        dictionary! {
            "Type" => "XObject",
            "Subtype" => "Image",
            "Width" => 64,
            "Height" => 64,
            "ColorSpace" => "DeviceGray",
            "BitsPerComponent" => 8,
        },
        pixels,
    ));
    let ops = vec![
        Operation::new("q", vec![]),
        Operation::new("cm", [468, 0, 0, 648, 72, 72].map(Object::Integer).to_vec()),
        Operation::new("Do", vec![Object::Name(b"Im1".to_vec())]),
        Operation::new("Q", vec![]),
    ];
    w.add_page(
        ops,
        dictionary! { "XObject" => dictionary! { "Im1" => image } },
    );
    w.finish(None)
}
