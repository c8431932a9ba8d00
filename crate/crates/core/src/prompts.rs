//! System-prompt templates for the four tutoring modules.
//!
//! Template texts live in asset files next to an `index.toml` that maps each
//! template id to its file, module and placeholder list. Placeholders have the
//! form `{name}`; rendering is a single pass, so binding values are inserted
//! literally even when they contain braces themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleKind {
    Coding,
    Project,
    Exam,
    Interview,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 4] = [
        ModuleKind::Coding,
        ModuleKind::Project,
        ModuleKind::Exam,
        ModuleKind::Interview,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleKind::Coding => "coding",
            ModuleKind::Project => "project",
            ModuleKind::Exam => "exam",
            ModuleKind::Interview => "interview",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ModuleKind::Coding => "Coding Companion",
            ModuleKind::Project => "Project Coach",
            ModuleKind::Exam => "Exam Ally",
            ModuleKind::Interview => "Interview Mentor",
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModuleKind {
    type Err = PromptError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModuleKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| PromptError::UnknownModule(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    CodingCompanion,
    ProjectScopingCoach,
    PremortemCoach,
    TeamStructuringCoach,
    DevilsAdvocate,
    ReflectionCoach,
    ExamAlly,
    InterviewMentor,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::CodingCompanion,
        TemplateId::ProjectScopingCoach,
        TemplateId::PremortemCoach,
        TemplateId::TeamStructuringCoach,
        TemplateId::DevilsAdvocate,
        TemplateId::ReflectionCoach,
        TemplateId::ExamAlly,
        TemplateId::InterviewMentor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::CodingCompanion => "coding_companion",
            TemplateId::ProjectScopingCoach => "project_scoping_coach",
            TemplateId::PremortemCoach => "premortem_coach",
            TemplateId::TeamStructuringCoach => "team_structuring_coach",
            TemplateId::DevilsAdvocate => "devils_advocate",
            TemplateId::ReflectionCoach => "reflection_coach",
            TemplateId::ExamAlly => "exam_ally",
            TemplateId::InterviewMentor => "interview_mentor",
        }
    }

    /// Template used when a session names only its module.
    pub fn default_for(module: ModuleKind) -> TemplateId {
        match module {
            ModuleKind::Coding => TemplateId::CodingCompanion,
            ModuleKind::Project => TemplateId::ProjectScopingCoach,
            ModuleKind::Exam => TemplateId::ExamAlly,
            ModuleKind::Interview => TemplateId::InterviewMentor,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

/// Missing and extra binding names for one template.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BindingReport {
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

impl BindingReport {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

impl fmt::Display for BindingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing bindings: {}", self.missing.join(", ")));
        }
        if !self.extra.is_empty() {
            parts.push(format!("unexpected bindings: {}", self.extra.join(", ")));
        }
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("unknown module {0:?}")]
    UnknownModule(String),
    #[error("{0}")]
    Bindings(BindingReport),
    #[error("binding {0:?} has an empty value")]
    EmptyValue(String),
    #[error("prompt index: {0}")]
    Index(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub module: ModuleKind,
    pub body: String,
    pub placeholders: BTreeSet<String>,
    /// Stand-in text pending the original role prompt.
    pub reconstructed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemplateInfo {
    pub template_id: TemplateId,
    pub module_kind: ModuleKind,
    pub placeholders: BTreeSet<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexFile {
    templates: Vec<IndexEntry>,
    #[serde(default)]
    defaults: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexEntry {
    id: TemplateId,
    module: ModuleKind,
    path: String,
    placeholders: Vec<String>,
    #[serde(default)]
    reconstructed: bool,
}

const BUILTIN_INDEX: &str = include_str!("../assets/prompts/index.toml");
const BUILTIN_ASSETS: &[(&str, &str)] = &[
    (
        "coding_companion.md",
        include_str!("../assets/prompts/coding_companion.md"),
    ),
    (
        "project_scoping_coach.md",
        include_str!("../assets/prompts/project_scoping_coach.md"),
    ),
    (
        "premortem_coach.md",
        include_str!("../assets/prompts/premortem_coach.md"),
    ),
    (
        "team_structuring_coach.md",
        include_str!("../assets/prompts/team_structuring_coach.md"),
    ),
    (
        "devils_advocate.md",
        include_str!("../assets/prompts/devils_advocate.md"),
    ),
    (
        "reflection_coach.md",
        include_str!("../assets/prompts/reflection_coach.md"),
    ),
    (
        "exam_ally.md",
        include_str!("../assets/prompts/exam_ally.md"),
    ),
    (
        "interview_mentor.md",
        include_str!("../assets/prompts/interview_mentor.md"),
    ),
    (
        "project_scoping_document.md",
        include_str!("../assets/prompts/project_scoping_document.md"),
    ),
];

#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: Vec<PromptTemplate>,
    defaults: Bindings,
}

/// Body of an asset file: the file minus one trailing newline.
fn asset_body(text: &str) -> String {
    let t = text.strip_suffix('\n').unwrap_or(text);
    t.strip_suffix('\r').unwrap_or(t).to_string()
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits `body` into literal text and `{name}` tokens.
fn tokenize(body: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    let bytes = body.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let rest = &body[i + 1..];
            let name_len = rest
                .char_indices()
                .take_while(|&(j, c)| {
                    if j == 0 {
                        is_ident_start(c)
                    } else {
                        is_ident_char(c)
                    }
                })
                .count();
            if name_len > 0 && rest[name_len..].starts_with('}') {
                if literal_start < i {
                    out.push(Segment::Literal(&body[literal_start..i]));
                }
                out.push(Segment::Placeholder(&rest[..name_len]));
                i += name_len + 2;
                literal_start = i;
                continue;
            }
        }
        i += 1;
    }
    if literal_start < body.len() {
        out.push(Segment::Literal(&body[literal_start..]));
    }
    out
}

#[derive(Debug, PartialEq)]
enum Segment<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

/// Names of every `{name}` token in `body`.
pub fn scan_placeholders(body: &str) -> BTreeSet<String> {
    tokenize(body)
        .into_iter()
        .filter_map(|s| match s {
            Segment::Placeholder(n) => Some(n.to_string()),
            Segment::Literal(_) => None,
        })
        .collect()
}

impl PromptLibrary {
    /// Templates compiled into the binary from `assets/prompts`.
    pub fn builtin() -> Self {
        Self::from_index(BUILTIN_INDEX, |path| {
            BUILTIN_ASSETS
                .iter()
                .find(|(p, _)| *p == path)
                .map(|(_, text)| text.to_string())
                .ok_or_else(|| PromptError::Index(format!("missing asset {path}")))
        })
        .expect("builtin prompt assets are consistent")
    }

    /// Loads `index.toml` and the asset files it names from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let index = std::fs::read_to_string(dir.join("index.toml")).map_err(|e| {
            PromptError::Index(format!("{}: {e}", dir.join("index.toml").display()))
        })?;
        Self::from_index(&index, |path| {
            std::fs::read_to_string(dir.join(path))
                .map_err(|e| PromptError::Index(format!("{path}: {e}")))
        })
    }

    fn from_index(
        index: &str,
        read: impl Fn(&str) -> Result<String, PromptError>,
    ) -> Result<Self, PromptError> {
        let index: IndexFile =
            toml::from_str(index).map_err(|e| PromptError::Index(e.to_string()))?;
        let mut templates = Vec::new();
        for entry in index.templates {
            if templates.iter().any(|t: &PromptTemplate| t.id == entry.id) {
                return Err(PromptError::Index(format!(
                    "duplicate template {}",
                    entry.id
                )));
            }
            let body = asset_body(&read(&entry.path)?);
            let placeholders = scan_placeholders(&body);
            let declared: BTreeSet<String> = entry.placeholders.into_iter().collect();
            if declared != placeholders {
                return Err(PromptError::Index(format!(
                    "{}: declared placeholders {:?} but body has {:?}",
                    entry.id, declared, placeholders
                )));
            }
            templates.push(PromptTemplate {
                id: entry.id,
                module: entry.module,
                body,
                placeholders,
                reconstructed: entry.reconstructed,
            });
        }
        for id in TemplateId::ALL {
            if !templates.iter().any(|t| t.id == id) {
                return Err(PromptError::Index(format!(
                    "template {id} missing from index"
                )));
            }
        }
        let mut defaults = Bindings::new();
        for (name, path) in index.defaults {
            defaults.insert(name, asset_body(&read(&path)?));
        }
        Ok(PromptLibrary {
            templates,
            defaults,
        })
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .expect("library holds every template id")
    }

    /// Looks up a template by its string id.
    pub fn get_by_name(&self, name: &str) -> Result<&PromptTemplate, PromptError> {
        Ok(self.get(name.parse()?))
    }

    pub fn list(&self, module: Option<ModuleKind>) -> Vec<TemplateInfo> {
        self.templates
            .iter()
            .filter(|t| module.is_none_or(|m| t.module == m))
            .map(|t| TemplateInfo {
                template_id: t.id,
                module_kind: t.module,
                placeholders: t.placeholders.clone(),
            })
            .collect()
    }

    /// Value shipped for a placeholder when the caller gives none.
    pub fn default_binding(&self, name: &str) -> Option<&str> {
        self.defaults.get(name).map(String::as_str)
    }

    pub fn validate_bindings(&self, id: TemplateId, bindings: &Bindings) -> BindingReport {
        let template = self.get(id);
        BindingReport {
            missing: template
                .placeholders
                .iter()
                .filter(|p| !bindings.contains_key(*p))
                .cloned()
                .collect(),
            extra: bindings
                .keys()
                .filter(|k| !template.placeholders.contains(*k))
                .cloned()
                .collect(),
        }
    }

    pub fn render(&self, id: TemplateId, bindings: &Bindings) -> Result<String, PromptError> {
        let report = self.validate_bindings(id, bindings);
        if !report.is_ok() {
            return Err(PromptError::Bindings(report));
        }
        if let Some((name, _)) = bindings.iter().find(|(_, v)| v.trim().is_empty()) {
            return Err(PromptError::EmptyValue(name.clone()));
        }
        let template = self.get(id);
        let mut out = String::with_capacity(
            template.body.len() + bindings.values().map(String::len).sum::<usize>(),
        );
        for seg in tokenize(&template.body) {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Placeholder(name) => out.push_str(&bindings[name]),
            }
        }
        Ok(out)
    }
}
