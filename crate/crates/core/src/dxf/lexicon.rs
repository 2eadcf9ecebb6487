use std::path::Path;

use crate::error::{Error, Result};

/// Ordered list of material tokens searched for in drawing texts.
///
/// File format: one material per line; blank lines and lines starting with
/// `#` are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MaterialLexicon {
    entries: Vec<String>,
}

impl MaterialLexicon {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for e in entries {
            let e = e.into().trim().to_string();
            if !e.is_empty() && !out.iter().any(|o| o.eq_ignore_ascii_case(&e)) {
                out.push(e);
            }
        }
        Self { entries: out }
    }

    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lexicon entries occurring in any of `texts`, in lexicon order.
    ///
    /// Matching is case-insensitive and only at token boundaries: the
    /// characters around an occurrence must not be alphanumeric.
    pub fn find_in<S: AsRef<str>>(&self, texts: &[S]) -> Vec<String> {
        let lowered: Vec<String> = texts.iter().map(|t| t.as_ref().to_lowercase()).collect();
        self.entries
            .iter()
            .filter(|entry| {
                let needle = entry.to_lowercase();
                lowered.iter().any(|t| contains_token(t, &needle))
            })
            .cloned()
            .collect()
    }
}

fn contains_token(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    haystack.match_indices(needle).any(|(start, m)| {
        let before = haystack[..start].chars().next_back();
        let after = haystack[start + m.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}
