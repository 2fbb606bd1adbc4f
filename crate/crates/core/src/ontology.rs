//! User-defined schema of entity types and allowed directed relation triples.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Label the relation classifier uses for "no relation".
pub const NO_RELATION: &str = "NONE";

/// Edge kinds the property graph reserves for containment.
pub const RESERVED_NAMES: &[&str] = &[NO_RELATION, "HAS_PARAGRAPH", "HAS_SENTENCE", "HAS_ENTITY"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationRule {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl RelationRule {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        Self {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "SchemaConfig", try_from = "SchemaConfig")]
pub struct OntologySchema {
    entity_types: BTreeSet<String>,
    relation_rules: BTreeSet<RelationRule>,
}

/// On-disk shape of a schema: `{"entities": [...], "rules": [[head, rel, tail], ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub entities: Vec<String>,
    #[serde(default)]
    pub rules: Vec<(String, String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("{0} undeclared")]
    UndeclaredType(String),
    #[error("invalid name {0:?}: names must be non-empty and contain no whitespace")]
    InvalidName(String),
    #[error("name {0:?} is reserved")]
    ReservedName(String),
    #[error("unknown entity {0:?} in selection")]
    UnknownSelection(String),
}

fn check_name(name: &str) -> Result<(), SchemaError> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(SchemaError::InvalidName(name.to_string()));
    }
    if RESERVED_NAMES.contains(&name) {
        return Err(SchemaError::ReservedName(name.to_string()));
    }
    Ok(())
}

impl OntologySchema {
    pub fn new<E, R>(entities: E, rules: R) -> Result<Self, SchemaError>
    where
        E: IntoIterator,
        E::Item: Into<String>,
        R: IntoIterator<Item = RelationRule>,
    {
        let mut entity_types = BTreeSet::new();
        for e in entities {
            let e = e.into();
            check_name(&e)?;
            entity_types.insert(e);
        }
        let mut relation_rules = BTreeSet::new();
        for rule in rules {
            check_name(&rule.relation)?;
            for t in [&rule.head, &rule.tail] {
                if !entity_types.contains(t) {
                    return Err(SchemaError::UndeclaredType(t.clone()));
                }
            }
            relation_rules.insert(rule);
        }
        Ok(Self {
            entity_types,
            relation_rules,
        })
    }

    pub fn load(config: SchemaConfig) -> Result<Self, SchemaError> {
        Self::new(
            config.entities,
            config
                .rules
                .into_iter()
                .map(|(h, r, t)| RelationRule::new(h, r, t)),
        )
    }

    pub fn to_config(&self) -> SchemaConfig {
        SchemaConfig {
            entities: self.entity_types.iter().cloned().collect(),
            rules: self
                .relation_rules
                .iter()
                .map(|r| (r.head.clone(), r.relation.clone(), r.tail.clone()))
                .collect(),
        }
    }

    pub fn entity_types(&self) -> &BTreeSet<String> {
        &self.entity_types
    }

    pub fn relation_rules(&self) -> &BTreeSet<RelationRule> {
        &self.relation_rules
    }

    pub fn has_entity_type(&self, name: &str) -> bool {
        self.entity_types.contains(name)
    }

    /// Distinct relation names, sorted.
    pub fn relation_names(&self) -> BTreeSet<String> {
        self.relation_rules.iter().map(|r| r.relation.clone()).collect()
    }

    /// True iff the exact directed triple is declared.
    pub fn allowed(&self, head_type: &str, relation: &str, tail_type: &str) -> bool {
        self.relation_rules
            .iter()
            .any(|r| r.head == head_type && r.relation == relation && r.tail == tail_type)
    }

    /// Relations permitted from `head_type` to `tail_type`.
    pub fn relations_between(&self, head_type: &str, tail_type: &str) -> Vec<&str> {
        self.relation_rules
            .iter()
            .filter(|r| r.head == head_type && r.tail == tail_type)
            .map(|r| r.relation.as_str())
            .collect()
    }
}

impl From<OntologySchema> for SchemaConfig {
    fn from(schema: OntologySchema) -> Self {
        schema.to_config()
    }
}

impl TryFrom<SchemaConfig> for OntologySchema {
    type Error = SchemaError;

    fn try_from(config: SchemaConfig) -> Result<Self, Self::Error> {
        Self::load(config)
    }
}

/// Pre-flattened external ontology: each entry names an entity, an optional
/// parent, and its outgoing relations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalListing {
    pub entities: Vec<ExternalEntity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalEntity {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub relations: Vec<ExternalRelation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalRelation {
    pub relation: String,
    pub target: String,
}

/// Restricts an external listing to `selection`. Rules survive only when
/// both endpoints are selected. Parents are not consulted: types are flat.
pub fn import_listing(listing: &ExternalListing, selection: &[String]) -> Result<OntologySchema, SchemaError> {
    let known: BTreeSet<&str> = listing.entities.iter().map(|e| e.name.as_str()).collect();
    for name in selection {
        if !known.contains(name.as_str()) {
            return Err(SchemaError::UnknownSelection(name.clone()));
        }
    }
    let selected: BTreeSet<&str> = selection.iter().map(String::as_str).collect();
    let rules = listing
        .entities
        .iter()
        .filter(|e| selected.contains(e.name.as_str()))
        .flat_map(|e| {
            e.relations
                .iter()
                .filter(|r| selected.contains(r.target.as_str()))
                .map(move |r| RelationRule::new(e.name.clone(), r.relation.clone(), r.target.clone()))
        });
    OntologySchema::new(selected.iter().copied(), rules)
}
