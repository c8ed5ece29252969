//! Modality names and the subsets of modalities that get permuted together.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Short name of one input modality, e.g. `image` or `question`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModalityId(String);

impl ModalityId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(Error::Invalid("modality name is empty".into()));
        }
        if trimmed.contains(['+', ',', ';']) || trimmed.chars().any(char::is_whitespace) {
            return Err(Error::Invalid(format!(
                "modality name `{trimmed}` contains a reserved character"
            )));
        }
        Ok(Self(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ModalityId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ModalityId> for String {
    fn from(value: ModalityId) -> Self {
        value.0
    }
}

impl fmt::Display for ModalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Nonempty, sorted, duplicate-free set of modalities replaced jointly from a
/// single donor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModalityId>", into = "Vec<ModalityId>")]
pub struct ModalitySet(Vec<ModalityId>);

impl ModalitySet {
    pub fn new(mut members: Vec<ModalityId>) -> Result<Self> {
        members.sort();
        members.dedup();
        if members.is_empty() {
            return Err(Error::Invalid("modality subset is empty".into()));
        }
        Ok(Self(members))
    }

    pub fn single(id: ModalityId) -> Self {
        Self(vec![id])
    }

    /// Parses `image+question`.
    pub fn parse(s: &str) -> Result<Self> {
        let members = s.split('+').map(ModalityId::new).collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn members(&self) -> &[ModalityId] {
        &self.0
    }

    pub fn contains(&self, id: &ModalityId) -> bool {
        self.0.binary_search(id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Joint removal of several modalities is an extension of the
    /// single-modality operator and is flagged in reports.
    pub fn is_joint(&self) -> bool {
        self.0.len() > 1
    }
}

impl TryFrom<Vec<ModalityId>> for ModalitySet {
    type Error = Error;

    fn try_from(value: Vec<ModalityId>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ModalitySet> for Vec<ModalityId> {
    fn from(value: ModalitySet) -> Self {
        value.0
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            f.write_str(m.as_str())?;
        }
        Ok(())
    }
}

/// Parses a comma-separated modality list such as `image,question`.
pub fn parse_modalities(s: &str) -> Result<Vec<ModalityId>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let id = ModalityId::new(part)?;
        if out.contains(&id) {
            return Err(Error::Invalid(format!("modality `{id}` listed twice")));
        }
        out.push(id);
    }
    if out.is_empty() {
        return Err(Error::Invalid("no modalities given".into()));
    }
    Ok(out)
}

/// Parses `a;b;a+b` against a known modality list. `None` yields one
/// singleton subset per modality, in the given order.
pub fn parse_subsets(spec: Option<&str>, modalities: &[ModalityId]) -> Result<Vec<ModalitySet>> {
    let subsets = match spec {
        None => modalities.iter().cloned().map(ModalitySet::single).collect(),
        Some(spec) => spec
            .split(';')
            .filter(|p| !p.trim().is_empty())
            .map(ModalitySet::parse)
            .collect::<Result<Vec<_>>>()?,
    };
    validate_subsets(&subsets, modalities)?;
    Ok(subsets)
}

pub(crate) fn validate_subsets(subsets: &[ModalitySet], modalities: &[ModalityId]) -> Result<()> {
    if subsets.is_empty() {
        return Err(Error::Invalid("no modality subsets given".into()));
    }
    for (i, s) in subsets.iter().enumerate() {
        if let Some(unknown) = s.members().iter().find(|m| !modalities.contains(m)) {
            return Err(Error::UnknownModality(unknown.to_string()));
        }
        if subsets[..i].contains(s) {
            return Err(Error::Invalid(format!("subset {s} listed twice")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_is_sorted_and_deduplicated() {
        let s = ModalitySet::parse("q+image+q").unwrap();
        assert_eq!(s.to_string(), "image+q");
        assert!(s.is_joint());
    }

    #[test]
    fn rejects_bad_names() {
        assert!(ModalityId::new("").is_err());
        assert!(ModalityId::new("a b").is_err());
        assert!(ModalitySet::parse("a+").is_err());
    }

    #[test]
    fn default_subsets_are_singletons() {
        let mods = parse_modalities("image,question").unwrap();
        let subsets = parse_subsets(None, &mods).unwrap();
        assert_eq!(subsets.len(), 2);
        assert_eq!(subsets[1].to_string(), "question");
    }

    #[test]
    fn unknown_modality_in_subset() {
        let mods = parse_modalities("a,b").unwrap();
        let err = parse_subsets(Some("a;c"), &mods).unwrap_err();
        assert!(matches!(err, Error::UnknownModality(m) if m == "c"));
    }
}
