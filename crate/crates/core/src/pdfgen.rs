//! Minimal PDF assembly over lopdf: pages, standard fonts, content streams.

use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Dictionary, Document, Object, ObjectId, Stream, StringFormat};

use crate::fonts::{StdFont, FIRST_CODE, LAST_CODE};

pub const LETTER: (f64, f64) = (612.0, 792.0);

pub fn real(v: f64) -> Object {
    Object::Real(v as f32)
}

/// Font dictionary for a standard font with WinAnsi encoding and explicit widths.
pub fn std_font_dict(font: StdFont) -> Dictionary {
    dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => font.base_name(),
        "Encoding" => "WinAnsiEncoding",
        "FirstChar" => FIRST_CODE as i64,
        "LastChar" => LAST_CODE as i64,
        "Widths" => font.widths().into_iter().map(Object::Integer).collect::<Vec<_>>(),
    }
}

/// `BT /font size Tf x y Td (bytes) Tj ET`
pub fn show_text(font: &str, size: f64, x: f64, y: f64, bytes: Vec<u8>) -> Vec<Operation> {
    vec![
        Operation::new("BT", vec![]),
        Operation::new(
            "Tf",
            vec![Object::Name(font.as_bytes().to_vec()), real(size)],
        ),
        Operation::new("Td", vec![real(x), real(y)]),
        Operation::new("Tj", vec![Object::String(bytes, StringFormat::Literal)]),
        Operation::new("ET", vec![]),
    ]
}

pub struct PdfWriter {
    doc: Document,
    pages_id: ObjectId,
    page_ids: Vec<ObjectId>,
    media_box: (f64, f64),
    compress: bool,
}

impl Default for PdfWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl PdfWriter {
    pub fn new() -> Self {
        let mut doc = Document::with_version("1.7");
        let pages_id = doc.new_object_id();
        PdfWriter {
            doc,
            pages_id,
            page_ids: Vec::new(),
            media_box: LETTER,
            compress: false,
        }
    }

    pub fn compress(mut self, on: bool) -> Self {
        self.compress = on;
        self
    }

    pub fn add_object(&mut self, obj: impl Into<Object>) -> ObjectId {
        self.doc.add_object(obj)
    }

    pub fn stream(&mut self, dict: Dictionary, ops: Vec<Operation>) -> ObjectId {
        let data = Content { operations: ops }
            .encode()
            .expect("content encodes");
        let mut stream = Stream::new(dict, data);
        if self.compress {
            let _ = stream.compress();
        }
        self.doc.add_object(stream)
    }

    pub fn add_page(&mut self, ops: Vec<Operation>, resources: Dictionary) -> ObjectId {
        let contents = self.stream(Dictionary::new(), ops);
        let resources = self.doc.add_object(resources);
        let page = self.doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => self.pages_id,
            "Contents" => contents,
            "Resources" => resources,
        });
        self.page_ids.push(page);
        page
    }

    pub fn page_count(&self) -> usize {
        self.page_ids.len()
    }

    pub fn finish(mut self, title: Option<&str>) -> Vec<u8> {
        let (w, h) = self.media_box;
        let kids: Vec<Object> = self
            .page_ids
            .iter()
            .map(|id| Object::Reference(*id))
            .collect();
        self.doc.objects.insert(
            self.pages_id,
            Object::Dictionary(dictionary! {
                "Type" => "Pages",
                "Kids" => kids,
                "Count" => self.page_ids.len() as i64,
                "MediaBox" => vec![0.into(), 0.into(), real(w), real(h)],
            }),
        );
        let catalog = self.doc.add_object(dictionary! {
            "Type" => "Catalog",
            "Pages" => self.pages_id,
        });
        self.doc.trailer.set("Root", catalog);
        if let Some(t) = title {
            let info = self.doc.add_object(dictionary! {
                "Title" => Object::string_literal(crate::fonts::encode(t)),
                "Producer" => Object::string_literal("chatisa"),
            });
            self.doc.trailer.set("Info", info);
        }
        let mut out = Vec::new();
        self.doc.save_to(&mut out).expect("in-memory write");
        out
    }
}
