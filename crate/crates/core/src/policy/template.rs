//! Placeholder substitution for prompt templates.
//!
//! Syntax:
//! - `{{name}}` is replaced by the binding `name`; a missing binding is an
//!   error. Names may contain spaces (`{{Previous summary}}`).
//! - `{{#name}} ... {{/name}}` keeps its body only when `name` is bound.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("missing binding for placeholder `{0}`")]
    MissingBinding(String),
    #[error("template `{id}`: {message}")]
    Syntax { id: String, message: String },
    #[error("reading template `{path}`: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Text(String),
    Var(String),
    Section(String, Vec<Segment>),
}

/// A parsed template.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    id: String,
    source: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn parse(id: impl Into<String>, source: impl Into<String>) -> Result<Self, TemplateError> {
        let id = id.into();
        let source = source.into();
        let mut rest = source.as_str();
        // stack of (section name, segments collected so far)
        let mut stack: Vec<(Option<String>, Vec<Segment>)> = vec![(None, Vec::new())];
        let syntax = |m: String| TemplateError::Syntax {
            id: id.clone(),
            message: m,
        };
        while let Some(open) = rest.find("{{") {
            if open > 0 {
                stack
                    .last_mut()
                    .unwrap()
                    .1
                    .push(Segment::Text(rest[..open].to_string()));
            }
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .ok_or_else(|| syntax("unterminated `{{`".to_string()))?;
            let tag = after[..close].trim();
            rest = &after[close + 2..];
            if let Some(name) = tag.strip_prefix('#') {
                stack.push((Some(name.trim().to_string()), Vec::new()));
            } else if let Some(name) = tag.strip_prefix('/') {
                let name = name.trim();
                let (open_name, body) = stack.pop().unwrap();
                match open_name {
                    Some(n) if n == name => stack
                        .last_mut()
                        .ok_or_else(|| syntax(format!("stray `{{{{/{name}}}}}`")))?
                        .1
                        .push(Segment::Section(n, body)),
                    _ => return Err(syntax(format!("unexpected `{{{{/{name}}}}}`"))),
                }
            } else if tag.is_empty() {
                return Err(syntax("empty placeholder".to_string()));
            } else {
                stack.last_mut().unwrap().1.push(Segment::Var(tag.to_string()));
            }
        }
        if !rest.is_empty() {
            stack.last_mut().unwrap().1.push(Segment::Text(rest.to_string()));
        }
        if stack.len() != 1 {
            let open = stack.last().and_then(|s| s.0.clone()).unwrap_or_default();
            return Err(syntax(format!("section `{open}` is never closed")));
        }
        let segments = stack.pop().unwrap().1;
        Ok(Self { id, source, segments })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Every placeholder name referenced, including those inside sections.
    pub fn placeholders(&self) -> BTreeSet<String> {
        fn walk(segs: &[Segment], out: &mut BTreeSet<String>) {
            for s in segs {
                match s {
                    Segment::Text(_) => {}
                    Segment::Var(n) => {
                        out.insert(n.clone());
                    }
                    Segment::Section(n, body) => {
                        out.insert(n.clone());
                        walk(body, out);
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.segments, &mut out);
        out
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String, TemplateError> {
        fn walk(segs: &[Segment], b: &Bindings, out: &mut String) -> Result<(), TemplateError> {
            for s in segs {
                match s {
                    Segment::Text(t) => out.push_str(t),
                    Segment::Var(n) => out.push_str(b.get(n).ok_or_else(|| TemplateError::MissingBinding(n.clone()))?),
                    Segment::Section(n, body) => {
                        if b.get(n).is_some() {
                            walk(body, b, out)?;
                        }
                    }
                }
            }
            Ok(())
        }
        let mut out = String::with_capacity(self.source.len());
        walk(&self.segments, bindings, &mut out)?;
        Ok(out)
    }
}

/// Placeholder values, keyed by placeholder name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, String>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.0.insert(name.into(), value.into());
        self
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.set(name, value);
        self
    }

    pub fn remove(&mut self, name: &str) {
        self.0.remove(name);
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }
}

pub fn render_prompt(template: &PromptTemplate, bindings: &Bindings) -> Result<String, TemplateError> {
    template.render(bindings)
}

/// Identifiers of the packaged templates; each maps to `<id>.txt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateId {
    Initial,
    Instruction,
    Extractiveness,
    Length,
    Specificity,
    Topic,
    Speaker,
    Implicit,
    Explicit,
    ExplicitAdaptive,
    Heuristic,
}

impl TemplateId {
    pub const ALL: [TemplateId; 11] = [
        TemplateId::Initial,
        TemplateId::Instruction,
        TemplateId::Extractiveness,
        TemplateId::Length,
        TemplateId::Specificity,
        TemplateId::Topic,
        TemplateId::Speaker,
        TemplateId::Implicit,
        TemplateId::Explicit,
        TemplateId::ExplicitAdaptive,
        TemplateId::Heuristic,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            Self::Initial => "initial",
            Self::Instruction => "instruction",
            Self::Extractiveness => "extractiveness",
            Self::Length => "length",
            Self::Specificity => "specificity",
            Self::Topic => "topic",
            Self::Speaker => "speaker",
            Self::Implicit => "implicit",
            Self::Explicit => "explicit",
            Self::ExplicitAdaptive => "explicit_adaptive",
            Self::Heuristic => "heuristic",
        }
    }

    fn builtin_source(self) -> &'static str {
        match self {
            Self::Initial => include_str!("../../prompts/initial.txt"),
            Self::Instruction => include_str!("../../prompts/instruction.txt"),
            Self::Extractiveness => include_str!("../../prompts/extractiveness.txt"),
            Self::Length => include_str!("../../prompts/length.txt"),
            Self::Specificity => include_str!("../../prompts/specificity.txt"),
            Self::Topic => include_str!("../../prompts/topic.txt"),
            Self::Speaker => include_str!("../../prompts/speaker.txt"),
            Self::Implicit => include_str!("../../prompts/implicit.txt"),
            Self::Explicit => include_str!("../../prompts/explicit.txt"),
            Self::ExplicitAdaptive => include_str!("../../prompts/explicit_adaptive.txt"),
            Self::Heuristic => include_str!("../../prompts/heuristic.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

/// The full set of templates, packaged defaults unless overridden from disk.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t = PromptTemplate::parse(id.file_stem(), id.builtin_source()).expect("packaged templates parse");
                (id, t)
            })
            .collect();
        Self { templates }
    }

    /// Packaged templates with any `<id>.txt` found in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut lib = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.file_stem()));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            lib.templates.insert(id, PromptTemplate::parse(id.file_stem(), text)?);
        }
        Ok(lib)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, bindings: &Bindings) -> Result<String, TemplateError> {
        self.get(id).render(bindings)
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}
