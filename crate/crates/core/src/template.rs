//! Prompt templates with `{name}` placeholders.
//!
//! A placeholder is `{` + identifier + `}`; any other brace is literal text.
//! Rendering substitutes placeholders and leaves every other byte alone.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("unbound placeholder(s): {}", .0.join(", "))]
    MissingPlaceholders(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    DefinitionCuration,
    SampleCuration,
    DefinitionExpansion,
}

impl TemplateId {
    pub const ALL: [TemplateId; 3] = [
        TemplateId::DefinitionCuration,
        TemplateId::SampleCuration,
        TemplateId::DefinitionExpansion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::DefinitionCuration => "definition_curation",
            TemplateId::SampleCuration => "sample_curation",
            TemplateId::DefinitionExpansion => "definition_expansion",
        }
    }

    fn default_text(self) -> &'static str {
        match self {
            TemplateId::DefinitionCuration => include_str!("../templates/definition_curation.txt"),
            TemplateId::SampleCuration => include_str!("../templates/sample_curation.txt"),
            TemplateId::DefinitionExpansion => {
                include_str!("../templates/definition_expansion.txt")
            }
        }
    }

    /// The bundled in-context example bound to `{example}` by default.
    pub fn default_example(self) -> &'static str {
        match self {
            TemplateId::DefinitionCuration => {
                include_str!("../templates/definition_curation.example.txt")
            }
            TemplateId::SampleCuration => include_str!("../templates/sample_curation.example.txt"),
            TemplateId::DefinitionExpansion => {
                include_str!("../templates/definition_expansion.example.txt")
            }
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(Range),
    Slot(Range),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Range {
    start: usize,
    end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    text: String,
    pieces: Vec<Piece>,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

impl Template {
    pub fn parse(text: impl Into<String>) -> Self {
        let text = text.into();
        let bytes = text.as_bytes();
        let mut pieces = Vec::new();
        let mut literal_start = 0;
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'{' && i + 1 < bytes.len() && is_ident_start(bytes[i + 1]) {
                let mut j = i + 1;
                while j < bytes.len() && is_ident(bytes[j]) {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'}' {
                    if literal_start < i {
                        pieces.push(Piece::Literal(Range {
                            start: literal_start,
                            end: i,
                        }));
                    }
                    pieces.push(Piece::Slot(Range { start: i + 1, end: j }));
                    i = j + 1;
                    literal_start = i;
                    continue;
                }
            }
            i += 1;
        }
        if literal_start < bytes.len() {
            pieces.push(Piece::Literal(Range {
                start: literal_start,
                end: bytes.len(),
            }));
        }
        Template { text, pieces }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Distinct placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for p in &self.pieces {
            if let Piece::Slot(r) = p {
                let name = &self.text[r.start..r.end];
                if !seen.contains(&name) {
                    seen.push(name);
                }
            }
        }
        seen
    }

    pub fn references(&self, name: &str) -> bool {
        self.placeholders().contains(&name)
    }

    pub fn render(&self, variables: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        let missing: Vec<String> = self
            .placeholders()
            .into_iter()
            .filter(|n| !variables.contains_key(*n))
            .map(str::to_string)
            .collect();
        if !missing.is_empty() {
            return Err(TemplateError::MissingPlaceholders(missing));
        }
        let mut out = String::with_capacity(self.text.len());
        for p in &self.pieces {
            match p {
                Piece::Literal(r) => out.push_str(&self.text[r.start..r.end]),
                Piece::Slot(r) => out.push_str(&variables[&self.text[r.start..r.end]]),
            }
        }
        Ok(out)
    }
}

/// The three generation templates, defaulting to the bundled assets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, Template>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            templates: TemplateId::ALL
                .iter()
                .map(|&id| (id, Template::parse(id.default_text())))
                .collect(),
        }
    }
}

impl TemplateSet {
    pub fn get(&self, id: TemplateId) -> &Template {
        &self.templates[&id]
    }

    pub fn set(&mut self, id: TemplateId, text: impl Into<String>) {
        self.templates.insert(id, Template::parse(text));
    }

    pub fn render(
        &self,
        id: TemplateId,
        variables: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        self.get(id).render(variables)
    }
}

pub fn vars<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn literal_bytes_survive_rendering(
            prefix in "[^{}]{0,20}", suffix in "[^{}]{0,20}", value in ".{0,20}"
        ) {
            let t = Template::parse(alloc::format!("{prefix}{{slot}}{suffix}"));
            let out = t.render(&vars([("slot", value.as_str())])).unwrap();
            prop_assert_eq!(out, alloc::format!("{prefix}{value}{suffix}"));
        }

        #[test]
        fn brace_free_text_is_untouched(text in "[^{}]{0,64}") {
            let t = Template::parse(text.clone());
            prop_assert_eq!(t.render(&BTreeMap::new()).unwrap(), text);
        }
    }
}
