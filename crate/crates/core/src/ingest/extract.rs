//! Content-stream interpretation: positioned text runs per page.

use std::collections::BTreeMap;

use lopdf::content::Content;
use lopdf::{Dictionary, Document, Object, ObjectId};

use super::encoding::{glyph_name_char, win_ansi_char, ToUnicode};

/// A string drawn in one text-showing operation.
#[derive(Debug, Clone, PartialEq)]
pub struct TextRun {
    pub page: usize,
    pub x: f64,
    pub x_end: f64,
    pub y: f64,
    /// Rendered font size in user-space units.
    pub size: f64,
    pub text: String,
}

type Matrix = [f64; 6];

const IDENTITY: Matrix = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
const MAX_FORM_DEPTH: usize = 4;
const MAX_OPS_PER_PAGE: usize = 2_000_000;
const MAX_STREAM_BYTES: usize = 64 << 20;

fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
        a[4] * b[0] + a[5] * b[2] + b[4],
        a[4] * b[1] + a[5] * b[3] + b[5],
    ]
}

fn translate(tx: f64, ty: f64) -> Matrix {
    [1.0, 0.0, 0.0, 1.0, tx, ty]
}

fn num(o: &Object) -> Option<f64> {
    match o {
        Object::Integer(i) => Some(*i as f64),
        Object::Real(r) => Some(*r as f64),
        _ => None,
    }
    .filter(|v| v.is_finite())
}

fn nums<const N: usize>(ops: &[Object]) -> Option<[f64; N]> {
    if ops.len() < N {
        return None;
    }
    let mut out = [0.0; N];
    for (i, o) in ops[ops.len() - N..].iter().enumerate() {
        out[i] = num(o)?;
    }
    Some(out)
}

fn resolve<'a>(doc: &'a Document, obj: &'a Object) -> Option<&'a Object> {
    let mut cur = obj;
    for _ in 0..8 {
        match cur {
            Object::Reference(id) => cur = doc.get_object(*id).ok()?,
            _ => return Some(cur),
        }
    }
    None
}

fn dict_get<'a>(doc: &'a Document, d: &'a Dictionary, key: &[u8]) -> Option<&'a Object> {
    resolve(doc, d.get(key).ok()?)
}

fn dict_at<'a>(doc: &'a Document, d: &'a Dictionary, key: &[u8]) -> Option<&'a Dictionary> {
    match dict_get(doc, d, key)? {
        Object::Dictionary(d) => Some(d),
        Object::Stream(s) => Some(&s.dict),
        _ => None,
    }
}

fn name_at<'a>(doc: &'a Document, d: &'a Dictionary, key: &[u8]) -> Option<&'a [u8]> {
    match dict_get(doc, d, key)? {
        Object::Name(n) => Some(n),
        _ => None,
    }
}

/// How a font's string bytes become text and advance the pen.
#[derive(Debug, Clone)]
struct FontDecoder {
    two_byte: bool,
    to_unicode: Option<ToUnicode>,
    differences: BTreeMap<u8, char>,
    first_char: i64,
    widths: Vec<f64>,
}

impl FontDecoder {
    fn load(doc: &Document, font: &Dictionary) -> FontDecoder {
        let two_byte = name_at(doc, font, b"Subtype") == Some(b"Type0");
        let to_unicode = match dict_get(doc, font, b"ToUnicode") {
            Some(Object::Stream(s)) => s
                .decompressed_content_with_limit(MAX_STREAM_BYTES)
                .ok()
                .or_else(|| Some(s.content.clone()))
                .map(|data| ToUnicode::parse(&data))
                .filter(|t| !t.is_empty()),
            _ => None,
        };
        let mut differences = BTreeMap::new();
        if let Some(enc) = dict_at(doc, font, b"Encoding") {
            if let Some(Object::Array(diffs)) = dict_get(doc, enc, b"Differences") {
                let mut code: i64 = 0;
                for item in diffs {
                    match item {
                        Object::Integer(i) => code = *i,
                        Object::Name(n) => {
                            if let (Ok(c), Some(ch)) = (
                                u8::try_from(code),
                                glyph_name_char(&String::from_utf8_lossy(n)),
                            ) {
                                differences.insert(c, ch);
                            }
                            code += 1;
                        }
                        _ => {}
                    }
                }
            }
        }
        let first_char = match dict_get(doc, font, b"FirstChar") {
            Some(Object::Integer(i)) => *i,
            _ => 0,
        };
        let widths = match dict_get(doc, font, b"Widths") {
            Some(Object::Array(a)) => a
                .iter()
                .map(|o| resolve(doc, o).and_then(num).unwrap_or(0.0))
                .collect(),
            _ => Vec::new(),
        };
        FontDecoder {
            two_byte,
            to_unicode,
            differences,
            first_char,
            widths,
        }
    }

    fn fallback() -> FontDecoder {
        FontDecoder {
            two_byte: false,
            to_unicode: None,
            differences: BTreeMap::new(),
            first_char: 0,
            widths: Vec::new(),
        }
    }

    fn decode(&self, bytes: &[u8]) -> String {
        let width = if self.two_byte { 2 } else { 1 };
        if let Some(t) = &self.to_unicode {
            return t.decode(bytes, width);
        }
        if self.two_byte {
            // Identity encoding without a ToUnicode map: best effort as UCS-2.
            return bytes
                .chunks(2)
                .filter_map(|c| {
                    char::from_u32(u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]) as u32)
                })
                .filter(|c| !c.is_control())
                .collect();
        }
        bytes
            .iter()
            .filter_map(|b| {
                self.differences
                    .get(b)
                    .copied()
                    .or_else(|| win_ansi_char(*b))
            })
            .collect()
    }

    /// Glyph advances in text-space units (before font size scaling), plus
    /// whether each code is a single-byte space for word spacing.
    fn advances(&self, bytes: &[u8]) -> Vec<(f64, bool)> {
        let step = if self.two_byte { 2 } else { 1 };
        bytes
            .chunks(step)
            .map(|code| {
                let c = if step == 2 {
                    u16::from_be_bytes([code[0], *code.get(1).unwrap_or(&0)]) as i64
                } else {
                    code[0] as i64
                };
                let w = usize::try_from(c - self.first_char)
                    .ok()
                    .and_then(|i| self.widths.get(i).copied())
                    .filter(|w| *w > 0.0)
                    .unwrap_or(500.0);
                (w / 1000.0, step == 1 && code[0] == b' ')
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct GraphicsState {
    ctm: Matrix,
    font: Option<Vec<u8>>,
    font_size: f64,
    char_spacing: f64,
    word_spacing: f64,
    h_scale: f64,
    leading: f64,
    rise: f64,
}

impl Default for GraphicsState {
    fn default() -> Self {
        GraphicsState {
            ctm: IDENTITY,
            font: None,
            font_size: 0.0,
            char_spacing: 0.0,
            word_spacing: 0.0,
            h_scale: 1.0,
            leading: 0.0,
            rise: 0.0,
        }
    }
}

struct Interpreter<'a> {
    doc: &'a Document,
    page: usize,
    runs: Vec<TextRun>,
    fonts: BTreeMap<Vec<u8>, FontDecoder>,
    ops_seen: usize,
}

impl<'a> Interpreter<'a> {
    fn load_fonts(&self, resources: Option<&Dictionary>) -> BTreeMap<Vec<u8>, FontDecoder> {
        let mut fonts = BTreeMap::new();
        if let Some(font_dict) = resources.and_then(|r| dict_at(self.doc, r, b"Font")) {
            for (name, obj) in font_dict.iter() {
                if let Some(Object::Dictionary(f)) = resolve(self.doc, obj) {
                    fonts.insert(name.clone(), FontDecoder::load(self.doc, f));
                }
            }
        }
        fonts
    }

    fn run_stream(
        &mut self,
        data: &[u8],
        resources: Option<&Dictionary>,
        base: GraphicsState,
        depth: usize,
    ) -> Result<(), String> {
        let content = Content::decode(data).map_err(|e| format!("content stream: {e}"))?;
        let fonts = self.load_fonts(resources);
        let saved_fonts = std::mem::replace(&mut self.fonts, fonts);
        let mut gs = base;
        let mut stack: Vec<GraphicsState> = Vec::new();
        let mut tm = IDENTITY;
        let mut tlm = IDENTITY;

        for op in &content.operations {
            self.ops_seen += 1;
            if self.ops_seen > MAX_OPS_PER_PAGE {
                return Err("content stream too large".into());
            }
            let args = &op.operands;
            match op.operator.as_str() {
                "q" => stack.push(gs.clone()),
                "Q" => {
                    if let Some(s) = stack.pop() {
                        gs = s;
                    }
                }
                "cm" => {
                    if let Some(m) = nums::<6>(args) {
                        gs.ctm = mul(&m, &gs.ctm);
                    }
                }
                "BT" => {
                    tm = IDENTITY;
                    tlm = IDENTITY;
                }
                "Tf" => {
                    if let (Some(Object::Name(n)), Some(size)) =
                        (args.first(), args.get(1).and_then(num))
                    {
                        gs.font = Some(n.clone());
                        gs.font_size = size;
                    }
                }
                "Tc" => gs.char_spacing = nums::<1>(args).map_or(gs.char_spacing, |v| v[0]),
                "Tw" => gs.word_spacing = nums::<1>(args).map_or(gs.word_spacing, |v| v[0]),
                "Tz" => gs.h_scale = nums::<1>(args).map_or(gs.h_scale, |v| v[0] / 100.0),
                "TL" => gs.leading = nums::<1>(args).map_or(gs.leading, |v| v[0]),
                "Ts" => gs.rise = nums::<1>(args).map_or(gs.rise, |v| v[0]),
                "Td" => {
                    if let Some([tx, ty]) = nums::<2>(args) {
                        tlm = mul(&translate(tx, ty), &tlm);
                        tm = tlm;
                    }
                }
                "TD" => {
                    if let Some([tx, ty]) = nums::<2>(args) {
                        gs.leading = -ty;
                        tlm = mul(&translate(tx, ty), &tlm);
                        tm = tlm;
                    }
                }
                "Tm" => {
                    if let Some(m) = nums::<6>(args) {
                        tlm = m;
                        tm = m;
                    }
                }
                "T*" => {
                    tlm = mul(&translate(0.0, -gs.leading), &tlm);
                    tm = tlm;
                }
                "Tj" => {
                    if let Some(s @ Object::String(..)) = args.first() {
                        self.show(&gs, &mut tm, std::slice::from_ref(s));
                    }
                }
                "'" | "\"" => {
                    if op.operator == "\"" {
                        if let Some([aw, ac]) = args.get(..2).and_then(nums::<2>) {
                            gs.word_spacing = aw;
                            gs.char_spacing = ac;
                        }
                    }
                    tlm = mul(&translate(0.0, -gs.leading), &tlm);
                    tm = tlm;
                    if let Some(s @ Object::String(..)) = args.last() {
                        self.show(&gs, &mut tm, std::slice::from_ref(s));
                    }
                }
                "TJ" => {
                    if let Some(Object::Array(items)) = args.first() {
                        self.show(&gs, &mut tm, items);
                    }
                }
                "Do" if depth < MAX_FORM_DEPTH => {
                    if let Some(Object::Name(name)) = args.first() {
                        self.run_form(name, resources, &gs, depth)?;
                    }
                }
                _ => {}
            }
        }
        self.fonts = saved_fonts;
        Ok(())
    }

    fn run_form(
        &mut self,
        name: &[u8],
        resources: Option<&Dictionary>,
        gs: &GraphicsState,
        depth: usize,
    ) -> Result<(), String> {
        let doc = self.doc;
        let Some(xobjects) = resources.and_then(|r| dict_at(doc, r, b"XObject")) else {
            return Ok(());
        };
        let Some(Object::Stream(form)) = dict_get(doc, xobjects, name) else {
            return Ok(());
        };
        if name_at(doc, &form.dict, b"Subtype") != Some(b"Form") {
            return Ok(());
        }
        let data = match form.decompressed_content_with_limit(MAX_STREAM_BYTES) {
            Ok(d) => d,
            Err(lopdf::Error::Decompress(e)) => return Err(format!("form stream: {e}")),
            Err(_) => form.content.clone(),
        };
        let matrix = match dict_get(doc, &form.dict, b"Matrix") {
            Some(Object::Array(a)) => nums::<6>(a).unwrap_or(IDENTITY),
            _ => IDENTITY,
        };
        let mut inner = gs.clone();
        inner.ctm = mul(&matrix, &gs.ctm);
        let form_resources = dict_at(doc, &form.dict, b"Resources").or(resources);
        self.run_stream(&data, form_resources, inner, depth + 1)
    }

    fn show(&mut self, gs: &GraphicsState, tm: &mut Matrix, items: &[Object]) {
        let fallback = FontDecoder::fallback();
        let font = gs
            .font
            .as_ref()
            .and_then(|f| self.fonts.get(f))
            .unwrap_or(&fallback);
        let start = mul(&mul(&[1.0, 0.0, 0.0, 1.0, 0.0, gs.rise], tm), &gs.ctm);
        let scale_y = (start[2] * start[2] + start[3] * start[3]).sqrt();
        let size = (gs.font_size * scale_y).abs();
        let mut text = String::new();
        for item in items {
            match item {
                Object::String(bytes, _) => {
                    text.push_str(&font.decode(bytes));
                    for (w, is_space) in font.advances(bytes) {
                        let mut tx = w * gs.font_size + gs.char_spacing;
                        if is_space {
                            tx += gs.word_spacing;
                        }
                        *tm = mul(&translate(tx * gs.h_scale, 0.0), tm);
                    }
                }
                other => {
                    if let Some(adj) = num(other) {
                        // a large negative adjustment is a visual word gap
                        if adj < -200.0 && !text.ends_with(' ') && !text.is_empty() {
                            text.push(' ');
                        }
                        let tx = -adj / 1000.0 * gs.font_size * gs.h_scale;
                        *tm = mul(&translate(tx, 0.0), tm);
                    }
                }
            }
        }
        let end = mul(tm, &gs.ctm);
        if text.chars().all(char::is_whitespace) || !size.is_finite() {
            return;
        }
        self.runs.push(TextRun {
            page: self.page,
            x: start[4],
            x_end: end[4],
            y: start[5],
            size,
            text,
        });
    }
}

/// Page count and text runs of every page, in page order.
pub fn extract_runs(doc: &Document) -> Result<(usize, Vec<TextRun>), String> {
    let pages: BTreeMap<u32, ObjectId> = doc.get_pages();
    let mut interp = Interpreter {
        doc,
        page: 0,
        runs: Vec::new(),
        fonts: BTreeMap::new(),
        ops_seen: 0,
    };
    for (index, (_, page_id)) in pages.iter().enumerate() {
        interp.page = index;
        interp.ops_seen = 0;
        let data = doc
            .get_page_content_with_limit(*page_id, MAX_STREAM_BYTES)
            .map_err(|e| format!("page {}: {e}", index + 1))?;
        let page_dict = doc
            .get_dictionary(*page_id)
            .map_err(|e| format!("page {}: {e}", index + 1))?;
        let resources = page_resources(doc, page_dict);
        interp.run_stream(&data, resources, GraphicsState::default(), 0)?;
    }
    Ok((pages.len(), interp.runs))
}

/// `/Resources` of a page, following `/Parent` inheritance.
fn page_resources<'a>(doc: &'a Document, page: &'a Dictionary) -> Option<&'a Dictionary> {
    let mut cur = page;
    for _ in 0..32 {
        if let Some(r) = dict_at(doc, cur, b"Resources") {
            return Some(r);
        }
        cur = dict_at(doc, cur, b"Parent")?;
    }
    None
}
