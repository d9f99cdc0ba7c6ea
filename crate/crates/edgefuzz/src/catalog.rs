//! Target-API catalog: typed signatures loaded from a JSON artifact, and the
//! etype pattern each signature induces.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BaseType, EtypePattern, TypeVocabulary};

/// One parameter of a target API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiParam {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: BaseType,
    /// 1-based declaration position.
    pub position: usize,
    pub optional: bool,
}

/// A target API's name and ordered, typed parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSignature {
    pub name: String,
    pub parameters: Vec<ApiParam>,
    pub doc_hint: Option<String>,
}

impl ApiSignature {
    /// `name(p1: T1, p2: T2)`, the definition line used in prompts.
    pub fn definition(&self) -> String {
        let params = self
            .parameters
            .iter()
            .map(|p| format!("{}: {}", p.name, p.ty))
            .collect::<Vec<_>>()
            .join(", ");
        format!("{}({params})", self.name)
    }

    pub fn param_by_position(&self, position: usize) -> Option<&ApiParam> {
        self.parameters.iter().find(|p| p.position == position)
    }
}

/// Multiset of the API's parameter types, optional parameters included.
pub fn etype_of(api: &ApiSignature) -> EtypePattern {
    EtypePattern::from_types(api.parameters.iter().map(|p| p.ty.clone()))
}

#[derive(Debug, Deserialize)]
struct RawCatalogEntry {
    name: String,
    #[serde(default)]
    params: Vec<RawParam>,
    #[serde(default)]
    doc_hint: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawParam {
    name: String,
    #[serde(rename = "type")]
    ty: String,
    #[serde(default)]
    optional: bool,
}

/// Loads and validates a catalog file. Duplicate API names, unknown types,
/// and duplicate parameter names are rejected with the offending record
/// named.
pub fn load_catalog(path: &Path, vocab: &TypeVocabulary) -> Result<Vec<ApiSignature>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<RawCatalogEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::Catalog(format!("{}: {e}", path.display())))?;

    let mut catalog = Vec::with_capacity(raw.len());
    let mut seen = std::collections::BTreeSet::new();
    for entry in raw {
        if !seen.insert(entry.name.clone()) {
            return Err(Error::Catalog(format!("duplicate API name `{}`", entry.name)));
        }
        let mut parameters = Vec::with_capacity(entry.params.len());
        let mut names = std::collections::BTreeSet::new();
        for (idx, p) in entry.params.into_iter().enumerate() {
            if !names.insert(p.name.clone()) {
                return Err(Error::Catalog(format!(
                    "duplicate parameter `{}` in `{}`",
                    p.name, entry.name
                )));
            }
            let ty = vocab.resolve(&p.ty).map_err(|_| {
                Error::Catalog(format!(
                    "unknown type `{}` for parameter `{}` of `{}`",
                    p.ty, p.name, entry.name
                ))
            })?;
            parameters.push(ApiParam {
                name: p.name,
                ty,
                position: idx + 1,
                optional: p.optional,
            });
        }
        catalog.push(ApiSignature {
            name: entry.name,
            parameters,
            doc_hint: entry.doc_hint,
        });
    }
    Ok(catalog)
}

/// Parameters of the given type, earliest declaration first.
pub fn params_of_type<'a>(api: &'a ApiSignature, ty: &BaseType) -> Vec<&'a ApiParam> {
    api.parameters.iter().filter(|p| &p.ty == ty).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_catalog(json: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        fs::write(&path, json).unwrap();
        (dir, path)
    }

    #[test]
    fn torch_add_style_signature_has_two_tensor_pattern() {
        let (_dir, path) = write_catalog(
            r#"[{"name": "torch.add", "params": [
                {"name": "input", "type": "Tensor"},
                {"name": "other", "type": "Tensor"}
            ]}]"#,
        );
        let catalog = load_catalog(&path, &TypeVocabulary::default()).unwrap();
        assert_eq!(catalog.len(), 1);
        let api = &catalog[0];
        assert_eq!(api.parameters[0].position, 1);
        assert_eq!(api.parameters[1].position, 2);
        assert_eq!(etype_of(api).canonical_key(), "Tensor:2");
        assert_eq!(api.definition(), "torch.add(input: Tensor, other: Tensor)");
    }

    #[test]
    fn zero_parameter_api_has_empty_pattern() {
        let (_dir, path) = write_catalog(r#"[{"name": "torch.seed"}]"#);
        let catalog = load_catalog(&path, &TypeVocabulary::default()).unwrap();
        assert!(etype_of(&catalog[0]).is_empty());
        assert_eq!(etype_of(&catalog[0]).total(), 0);
    }

    #[test]
    fn duplicate_api_name_rejected() {
        let (_dir, path) =
            write_catalog(r#"[{"name": "torch.abs"}, {"name": "torch.abs"}]"#);
        let err = load_catalog(&path, &TypeVocabulary::default()).unwrap_err();
        assert!(err.to_string().contains("torch.abs"));
    }

    #[test]
    fn unknown_type_names_offending_record() {
        let (_dir, path) = write_catalog(
            r#"[{"name": "torch.foo", "params": [{"name": "x", "type": "Quaternion"}]}]"#,
        );
        let err = load_catalog(&path, &TypeVocabulary::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Quaternion") && msg.contains("torch.foo"));
    }

    #[test]
    fn pattern_counts_optional_parameters_too() {
        let (_dir, path) = write_catalog(
            r#"[{"name": "torch.sum", "params": [
                {"name": "input", "type": "Tensor"},
                {"name": "dim", "type": "Int", "optional": true}
            ]}]"#,
        );
        let catalog = load_catalog(&path, &TypeVocabulary::default()).unwrap();
        let pattern = etype_of(&catalog[0]);
        assert_eq!(pattern.total(), 2);
        assert_eq!(pattern.canonical_key(), "Int:1|Tensor:1");
    }
}
