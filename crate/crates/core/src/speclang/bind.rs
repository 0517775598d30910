use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::{ArchSpec, Comparator, PropertyConstraint, QualityRequirement, Statement};
use crate::kb::{AttributeId, KindId, KnowledgeBase};
use crate::names::normalize;

/// A statement after name resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundStatement {
    Use { kind: KindId },
    Property { constraint: PropertyConstraint, key: String },
    Quality { attribute: AttributeId, requirement: QualityRequirement },
}

/// A specification whose names all resolve against one knowledge base.
/// `statements[i]` is the binding of `spec.statements[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundSpec {
    pub spec: ArchSpec,
    pub statements: Vec<BoundStatement>,
    pub warnings: Vec<BindWarning>,
}

impl BoundSpec {
    pub fn empty() -> Self {
        BoundSpec { spec: ArchSpec::default(), statements: Vec::new(), warnings: Vec::new() }
    }

    pub fn kinds_used(&self) -> impl Iterator<Item = (usize, &KindId)> {
        self.statements.iter().enumerate().filter_map(|(i, s)| match s {
            BoundStatement::Use { kind } => Some((i, kind)),
            _ => None,
        })
    }

    pub fn constraints(&self) -> impl Iterator<Item = (usize, &PropertyConstraint, &str)> {
        self.statements.iter().enumerate().filter_map(|(i, s)| match s {
            BoundStatement::Property { constraint, key } => Some((i, constraint, key.as_str())),
            _ => None,
        })
    }

    pub fn requirements(&self) -> impl Iterator<Item = (usize, &AttributeId, &QualityRequirement)> {
        self.statements.iter().enumerate().filter_map(|(i, s)| match s {
            BoundStatement::Quality { attribute, requirement } => Some((i, attribute, requirement)),
            _ => None,
        })
    }

    pub fn constrains_attribute(&self, attribute: &AttributeId) -> bool {
        self.requirements().any(|(_, a, _)| a == attribute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BindWarning {
    pub statement: usize,
    pub property: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnresolvedName {
    pub statement: usize,
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contradiction {
    pub attribute: AttributeId,
    pub statements: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindError {
    #[error("unresolved names: {}", .0.iter().map(|u| format!("{:?} (statement {})", u.name, u.statement + 1)).collect::<Vec<_>>().join(", "))]
    Unresolved(Vec<UnresolvedName>),
    #[error("contradictory quality requirements on {}", .0.iter().map(|c| c.attribute.to_string()).collect::<Vec<_>>().join(", "))]
    Contradiction(Vec<Contradiction>),
}

/// Resolves every name in `spec` against `kb`.
///
/// `use` statements must name an element kind. A statement shaped like a
/// quality requirement whose name is not a quality attribute is read as a
/// property constraint instead. Property names never seen in the knowledge
/// base produce warnings, not errors.
pub fn bind_spec(spec: &ArchSpec, kb: &KnowledgeBase) -> Result<BoundSpec, BindError> {
    let mut statements = Vec::with_capacity(spec.len());
    let mut warnings = Vec::new();
    let mut unresolved = Vec::new();

    for (i, stmt) in spec.statements.iter().enumerate() {
        match &stmt.body {
            Statement::Use { kind } => match kb.find_kind(kind) {
                Ok(Some(k)) => statements.push(BoundStatement::Use { kind: k.id.clone() }),
                Ok(None) => unresolved.push(UnresolvedName {
                    statement: i,
                    name: kind.clone(),
                    message: format!("{kind:?} is not an element kind of the knowledge base"),
                }),
                Err(amb) => unresolved.push(UnresolvedName { statement: i, name: kind.clone(), message: amb.to_string() }),
            },
            Statement::Quality(q) => match kb.find_attribute(&q.attribute) {
                Ok(Some(a)) => {
                    statements.push(BoundStatement::Quality { attribute: a.id.clone(), requirement: q.clone() })
                }
                Ok(None) => {
                    let constraint = q.as_property_constraint();
                    let key = property_key(kb, &constraint.property);
                    warn_unknown(kb, i, &constraint.property, &key, &mut warnings);
                    statements.push(BoundStatement::Property { constraint, key });
                }
                Err(amb) => {
                    unresolved.push(UnresolvedName { statement: i, name: q.attribute.clone(), message: amb.to_string() })
                }
            },
            Statement::Property(p) => {
                let key = property_key(kb, &p.property);
                warn_unknown(kb, i, &p.property, &key, &mut warnings);
                statements.push(BoundStatement::Property { constraint: p.clone(), key });
            }
        }
    }
    if !unresolved.is_empty() {
        return Err(BindError::Unresolved(unresolved));
    }

    let contradictions = find_contradictions(&statements);
    if !contradictions.is_empty() {
        return Err(BindError::Contradiction(contradictions));
    }
    Ok(BoundSpec { spec: spec.clone(), statements, warnings })
}

/// A property named like a kind addresses the kind pseudo-property, keyed by
/// the kind id.
fn property_key(kb: &KnowledgeBase, property: &str) -> String {
    match kb.find_kind(property) {
        Ok(Some(kind)) => normalize(kind.id.as_str()),
        _ => normalize(property),
    }
}

fn warn_unknown(kb: &KnowledgeBase, statement: usize, property: &str, key: &str, out: &mut Vec<BindWarning>) {
    if !kb.knows_property(key) {
        out.push(BindWarning {
            statement,
            property: property.to_string(),
            message: format!("property {property:?} does not appear in the knowledge base"),
        });
    }
}

/// Attributes whose requirements admit no level at all.
fn find_contradictions(statements: &[BoundStatement]) -> Vec<Contradiction> {
    let mut ranges: BTreeMap<&AttributeId, (i8, i8, Vec<usize>)> = BTreeMap::new();
    for (i, s) in statements.iter().enumerate() {
        if let BoundStatement::Quality { attribute, requirement } = s {
            let entry = ranges.entry(attribute).or_insert((0, 4, Vec::new()));
            let level = requirement.level.index();
            match requirement.comparator {
                Comparator::GreaterThan => entry.0 = entry.0.max(level + 1),
                Comparator::AtLeast => entry.0 = entry.0.max(level),
                Comparator::LessThan => entry.1 = entry.1.min(level - 1),
                Comparator::AtMost => entry.1 = entry.1.min(level),
                _ => {}
            }
            entry.2.push(i);
        }
    }
    ranges
        .into_iter()
        .filter(|(_, (lo, hi, _))| lo > hi)
        .map(|(attribute, (_, _, statements))| Contradiction { attribute: attribute.clone(), statements })
        .collect()
}
