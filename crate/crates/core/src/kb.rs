//! Architectural knowledge: quality attributes, element kinds, concrete
//! elements and the decisions that select or apply them.
//!
//! A [`KnowledgeBase`] is loaded from a JSON document, validated for
//! referential integrity and closed symmetrically over compatibility and
//! incompatibility. It is immutable afterwards and can be shared freely.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::names::normalize;
use crate::speclang::{self, PropertyConstraint, Statement};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(id: &str) -> Self {
                Self(id.to_string())
            }
        }
    };
}

id_type!(
    /// Identifier of a [`QualityAttribute`].
    AttributeId
);
id_type!(
    /// Identifier of an [`ElementKind`].
    KindId
);
id_type!(
    /// Identifier of an [`Element`].
    ElementId
);
id_type!(
    /// Identifier of a [`Decision`].
    DecisionId
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityAttribute {
    pub id: AttributeId,
    pub display_name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Technology,
    Pattern,
    Style,
    Component,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementKind {
    pub id: KindId,
    pub display_name: String,
    pub category: Category,
}

/// A property value recorded for an element. `Unknown` is written `"?"` in
/// documents and means the knowledge base has no information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyValue {
    Known(String),
    Unknown,
}

impl PropertyValue {
    pub const UNKNOWN_MARKER: &'static str = "?";

    pub fn as_known(&self) -> Option<&str> {
        match self {
            PropertyValue::Known(v) => Some(v),
            PropertyValue::Unknown => None,
        }
    }
}

impl Serialize for PropertyValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PropertyValue::Known(v) => s.serialize_str(v),
            PropertyValue::Unknown => s.serialize_str(Self::UNKNOWN_MARKER),
        }
    }
}

impl<'de> Deserialize<'de> for PropertyValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(if raw == Self::UNKNOWN_MARKER {
            PropertyValue::Unknown
        } else {
            PropertyValue::Known(raw)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub id: ElementId,
    pub kind: KindId,
    pub display_name: String,
    pub properties: BTreeMap<String, PropertyValue>,
    pub compatible_with: BTreeSet<ElementId>,
}

impl Element {
    /// Looks a property up by its normalized key.
    pub fn property(&self, key: &str) -> Option<(&str, &PropertyValue)> {
        self.properties
            .iter()
            .find(|(name, _)| normalize(name) == key)
            .map(|(name, value)| (name.as_str(), value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certainty {
    Certain,
    Possible,
    Conditional,
}

impl Certainty {
    pub fn as_str(self) -> &'static str {
        match self {
            Certainty::Certain => "certain",
            Certainty::Possible => "possible",
            Certainty::Conditional => "conditional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impact {
    pub attribute: AttributeId,
    pub valence: i8,
    pub certainty: Certainty,
    #[serde(default)]
    pub note: String,
}

/// An obligation a decision imposes: some element of `kind` must be selected,
/// and if `predicate` is present it must hold on that element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dependency {
    pub kind: KindId,
    pub predicate: Option<PropertyConstraint>,
    pub label: String,
}

/// Why a decision is offered to the architect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    /// The specification carries a quality requirement on this attribute.
    Attribute(AttributeId),
    /// The specification constrains this property.
    Property(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub id: DecisionId,
    pub display_name: String,
    pub offered_when: Option<Trigger>,
    pub selects: Option<ElementId>,
    pub impacts: Vec<Impact>,
    pub dependencies: Vec<Dependency>,
    pub incompatible_with: BTreeSet<DecisionId>,
}

/// A named entity resolved by [`KnowledgeBase::lookup_concept`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concept<'a> {
    Attribute(&'a QualityAttribute),
    Kind(&'a ElementKind),
    Element(&'a Element),
    Decision(&'a Decision),
}

impl Concept<'_> {
    pub fn describe(&self) -> String {
        match self {
            Concept::Attribute(a) => format!("attribute {}", a.id),
            Concept::Kind(k) => format!("kind {}", k.id),
            Concept::Element(e) => format!("element {}", e.id),
            Concept::Decision(d) => format!("decision {}", d.id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("name {name:?} is ambiguous: matches {}", matches.join(", "))]
pub struct AmbiguousName {
    pub name: String,
    pub matches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unresolved reference {id:?} at {path}")]
    Reference { id: String, path: String },
    #[error("duplicate {namespace} id {id:?}")]
    DuplicateId { namespace: &'static str, id: String },
}

impl KbError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        KbError::Schema { path: path.into(), message: message.into() }
    }

    fn reference(id: impl fmt::Display, path: impl Into<String>) -> Self {
        KbError::Reference { id: id.to_string(), path: path.into() }
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub version: String,
    pub attributes: BTreeMap<AttributeId, QualityAttribute>,
    pub kinds: BTreeMap<KindId, ElementKind>,
    pub elements: BTreeMap<ElementId, Element>,
    pub decisions: BTreeMap<DecisionId, Decision>,
    /// normalized property key -> kinds whose elements carry it
    carriers: BTreeMap<String, BTreeSet<KindId>>,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.attributes == other.attributes
            && self.kinds == other.kinds
            && self.elements == other.elements
            && self.decisions == other.decisions
    }
}

/// Parses and validates a KB document.
pub fn load_kb(json: &str) -> Result<KnowledgeBase, KbError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let doc: KbDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        KbError::schema(if path.is_empty() { "$".to_string() } else { path }, e.into_inner().to_string())
    })?;
    KnowledgeBase::from_document(doc)
}

impl KnowledgeBase {
    pub fn from_document(doc: KbDocument) -> Result<Self, KbError> {
        build(doc)
    }

    pub fn to_document(&self) -> KbDocument {
        KbDocument {
            version: self.version.clone(),
            attributes: self.attributes.values().cloned().collect(),
            kinds: self.kinds.values().cloned().collect(),
            elements: self
                .elements
                .values()
                .map(|e| ElementDoc {
                    id: e.id.clone(),
                    kind: e.kind.clone(),
                    display_name: e.display_name.clone(),
                    properties: e.properties.clone(),
                    compatible_with: e.compatible_with.iter().cloned().collect(),
                })
                .collect(),
            decisions: self
                .decisions
                .values()
                .map(|d| DecisionDoc {
                    id: d.id.clone(),
                    display_name: d.display_name.clone(),
                    offered_when: d.offered_when.clone(),
                    selects: d.selects.clone(),
                    impacts: d.impacts.clone(),
                    dependencies: d
                        .dependencies
                        .iter()
                        .map(|dep| DependencyDoc {
                            kind: dep.kind.clone(),
                            predicate: dep
                                .predicate
                                .as_ref()
                                .map(|p| speclang::render_statement(&Statement::Property(p.clone()))),
                            label: dep.label.clone(),
                        })
                        .collect(),
                    incompatible_with: d.incompatible_with.iter().cloned().collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("KB documents always serialize")
    }

    pub fn attribute(&self, id: &AttributeId) -> Option<&QualityAttribute> {
        self.attributes.get(id)
    }

    pub fn kind(&self, id: &KindId) -> Option<&ElementKind> {
        self.kinds.get(id)
    }

    pub fn element(&self, id: &ElementId) -> Option<&Element> {
        self.elements.get(id)
    }

    pub fn decision(&self, id: &DecisionId) -> Option<&Decision> {
        self.decisions.get(id)
    }

    /// The element a decision selects, if any.
    pub fn selected_element(&self, decision: &DecisionId) -> Option<&Element> {
        self.decisions.get(decision)?.selects.as_ref().and_then(|e| self.elements.get(e))
    }

    /// All elements of `kind`, in id order.
    pub fn elements_of_kind(&self, kind: &KindId) -> Vec<&Element> {
        self.elements.values().filter(|e| &e.kind == kind).collect()
    }

    /// Kinds whose elements carry the property with normalized `key`. A kind
    /// always carries the pseudo-property named after itself, whose value is
    /// the element's id.
    pub fn carriers(&self, key: &str) -> Option<&BTreeSet<KindId>> {
        self.carriers.get(key)
    }

    pub fn carries(&self, key: &str, kind: &KindId) -> bool {
        self.carriers.get(key).is_some_and(|kinds| kinds.contains(kind))
    }

    pub fn knows_property(&self, key: &str) -> bool {
        self.carriers.contains_key(key)
    }

    /// Case- and separator-insensitive match on id or display name across
    /// every namespace.
    pub fn lookup_concept(&self, name: &str) -> Result<Option<Concept<'_>>, AmbiguousName> {
        let key = normalize(name);
        let hit = |id: &str, display: &str| normalize(id) == key || normalize(display) == key;
        let mut found = Vec::new();
        found.extend(self.attributes.values().filter(|a| hit(a.id.as_str(), &a.display_name)).map(Concept::Attribute));
        found.extend(self.kinds.values().filter(|k| hit(k.id.as_str(), &k.display_name)).map(Concept::Kind));
        found.extend(self.elements.values().filter(|e| hit(e.id.as_str(), &e.display_name)).map(Concept::Element));
        found.extend(self.decisions.values().filter(|d| hit(d.id.as_str(), &d.display_name)).map(Concept::Decision));
        unique(name, found, |c| c.describe())
    }

    pub fn find_kind(&self, name: &str) -> Result<Option<&ElementKind>, AmbiguousName> {
        let key = normalize(name);
        let found = self
            .kinds
            .values()
            .filter(|k| normalize(k.id.as_str()) == key || normalize(&k.display_name) == key)
            .collect();
        unique(name, found, |k| format!("kind {}", k.id))
    }

    pub fn find_attribute(&self, name: &str) -> Result<Option<&QualityAttribute>, AmbiguousName> {
        let key = normalize(name);
        let found = self
            .attributes
            .values()
            .filter(|a| normalize(a.id.as_str()) == key || normalize(&a.display_name) == key)
            .collect();
        unique(name, found, |a| format!("attribute {}", a.id))
    }

    /// Display name of a kind, falling back to its id.
    pub fn kind_name(&self, id: &KindId) -> String {
        self.kinds.get(id).map_or_else(|| id.to_string(), |k| k.display_name.clone())
    }

    pub fn attribute_name(&self, id: &AttributeId) -> String {
        self.attributes.get(id).map_or_else(|| id.to_string(), |a| a.display_name.clone())
    }

    pub fn decision_name(&self, id: &DecisionId) -> String {
        self.decisions.get(id).map_or_else(|| id.to_string(), |d| d.display_name.clone())
    }

    pub fn element_name(&self, id: &ElementId) -> String {
        self.elements.get(id).map_or_else(|| id.to_string(), |e| e.display_name.clone())
    }
}

fn unique<T>(name: &str, mut found: Vec<T>, describe: impl Fn(&T) -> String) -> Result<Option<T>, AmbiguousName> {
    match found.len() {
        0 => Ok(None),
        1 => Ok(found.pop()),
        _ => Err(AmbiguousName { name: name.to_string(), matches: found.iter().map(describe).collect() }),
    }
}

// ---------------------------------------------------------------------------
// Document schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KbDocument {
    pub version: String,
    #[serde(default)]
    pub attributes: Vec<QualityAttribute>,
    #[serde(default)]
    pub kinds: Vec<ElementKind>,
    #[serde(default)]
    pub elements: Vec<ElementDoc>,
    #[serde(default)]
    pub decisions: Vec<DecisionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementDoc {
    pub id: ElementId,
    pub kind: KindId,
    pub display_name: String,
    #[serde(default)]
    pub properties: BTreeMap<String, PropertyValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compatible_with: Vec<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyDoc {
    pub kind: KindId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionDoc {
    pub id: DecisionId,
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offered_when: Option<Trigger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selects: Option<ElementId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub impacts: Vec<Impact>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependencies: Vec<DependencyDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub incompatible_with: Vec<DecisionId>,
}

fn build(doc: KbDocument) -> Result<KnowledgeBase, KbError> {
    check_unique("attribute", &doc.attributes, |a| a.id.clone())?;
    check_unique("kind", &doc.kinds, |k| k.id.clone())?;
    check_unique("element", &doc.elements, |e| e.id.clone())?;
    check_unique("decision", &doc.decisions, |d| d.id.clone())?;
    let element_ids: BTreeSet<&ElementId> = doc.elements.iter().map(|e| &e.id).collect();
    let decision_ids: BTreeSet<&DecisionId> = doc.decisions.iter().map(|d| &d.id).collect();

    for (i, a) in doc.attributes.iter().enumerate() {
        if a.id.as_str().is_empty() {
            return Err(KbError::schema(format!("attributes[{i}].id"), "id must be non-empty"));
        }
    }
    for (i, k) in doc.kinds.iter().enumerate() {
        if k.id.as_str().is_empty() {
            return Err(KbError::schema(format!("kinds[{i}].id"), "id must be non-empty"));
        }
    }
    let attributes: BTreeMap<AttributeId, QualityAttribute> =
        doc.attributes.into_iter().map(|a| (a.id.clone(), a)).collect();
    let kinds: BTreeMap<KindId, ElementKind> = doc.kinds.into_iter().map(|k| (k.id.clone(), k)).collect();

    let mut elements = BTreeMap::new();
    for (i, e) in doc.elements.iter().enumerate() {
        let path = format!("elements[{i}]");
        if !kinds.contains_key(&e.kind) {
            return Err(KbError::reference(&e.kind, format!("{path}.kind")));
        }
        let mut seen = BTreeSet::new();
        for name in e.properties.keys() {
            let key = normalize(name);
            if key.is_empty() {
                return Err(KbError::schema(format!("{path}.properties"), "property names must be non-empty"));
            }
            if !seen.insert(key) {
                return Err(KbError::schema(
                    format!("{path}.properties.{name}"),
                    format!("property {name:?} collides with another property of {}", e.id),
                ));
            }
        }
        for (j, other) in e.compatible_with.iter().enumerate() {
            if !element_ids.contains(other) {
                return Err(KbError::reference(other, format!("{path}.compatible_with[{j}]")));
            }
            if other == &e.id {
                return Err(KbError::schema(
                    format!("{path}.compatible_with[{j}]"),
                    "an element cannot be compatible with itself",
                ));
            }
        }
        elements.insert(
            e.id.clone(),
            Element {
                id: e.id.clone(),
                kind: e.kind.clone(),
                display_name: e.display_name.clone(),
                properties: e.properties.clone(),
                compatible_with: e.compatible_with.iter().cloned().collect(),
            },
        );
    }
    let pairs: Vec<(ElementId, ElementId)> = elements
        .values()
        .flat_map(|e| e.compatible_with.iter().map(move |o| (e.id.clone(), o.clone())))
        .collect();
    for (a, b) in pairs {
        elements.get_mut(&b).expect("checked above").compatible_with.insert(a);
    }

    let mut decisions = BTreeMap::new();
    for (i, d) in doc.decisions.iter().enumerate() {
        let path = format!("decisions[{i}]");
        match &d.offered_when {
            Some(Trigger::Attribute(a)) if !attributes.contains_key(a) => {
                return Err(KbError::reference(a, format!("{path}.offered_when.attribute")));
            }
            Some(Trigger::Property(p)) if normalize(p).is_empty() => {
                return Err(KbError::schema(format!("{path}.offered_when.property"), "property name must be non-empty"));
            }
            _ => {}
        }
        if let Some(sel) = &d.selects {
            if !elements.contains_key(sel) {
                return Err(KbError::reference(sel, format!("{path}.selects")));
            }
        }
        for (j, imp) in d.impacts.iter().enumerate() {
            let ipath = format!("{path}.impacts[{j}]");
            if !attributes.contains_key(&imp.attribute) {
                return Err(KbError::reference(&imp.attribute, format!("{ipath}.attribute")));
            }
            if !(-2..=2).contains(&imp.valence) {
                return Err(KbError::schema(format!("{ipath}.valence"), "valence must lie in [-2, 2]"));
            }
            if imp.valence == 0 && imp.certainty != Certainty::Conditional && imp.note.trim().is_empty() {
                return Err(KbError::schema(
                    ipath,
                    "a neutral impact needs conditional certainty or an explanatory note",
                ));
            }
        }
        let mut dependencies = Vec::with_capacity(d.dependencies.len());
        for (j, dep) in d.dependencies.iter().enumerate() {
            let dpath = format!("{path}.dependencies[{j}]");
            if !kinds.contains_key(&dep.kind) {
                return Err(KbError::reference(&dep.kind, format!("{dpath}.kind")));
            }
            let predicate = match &dep.predicate {
                None => None,
                Some(text) => Some(parse_predicate(text).map_err(|m| KbError::schema(format!("{dpath}.predicate"), m))?),
            };
            dependencies.push(Dependency { kind: dep.kind.clone(), predicate, label: dep.label.clone() });
        }
        for (j, other) in d.incompatible_with.iter().enumerate() {
            if !decision_ids.contains(other) {
                return Err(KbError::reference(other, format!("{path}.incompatible_with[{j}]")));
            }
            if other == &d.id {
                return Err(KbError::schema(
                    format!("{path}.incompatible_with[{j}]"),
                    "a decision cannot be incompatible with itself",
                ));
            }
        }
        decisions.insert(
            d.id.clone(),
            Decision {
                id: d.id.clone(),
                display_name: d.display_name.clone(),
                offered_when: d.offered_when.clone(),
                selects: d.selects.clone(),
                impacts: d.impacts.clone(),
                dependencies,
                incompatible_with: d.incompatible_with.iter().cloned().collect(),
            },
        );
    }
    let pairs: Vec<(DecisionId, DecisionId)> = decisions
        .values()
        .flat_map(|d| d.incompatible_with.iter().map(move |o| (d.id.clone(), o.clone())))
        .collect();
    for (a, b) in pairs {
        decisions.get_mut(&b).expect("checked above").incompatible_with.insert(a);
    }

    let mut carriers: BTreeMap<String, BTreeSet<KindId>> = BTreeMap::new();
    for kind in kinds.values() {
        carriers.entry(normalize(kind.id.as_str())).or_default().insert(kind.id.clone());
        carriers.entry(normalize(&kind.display_name)).or_default().insert(kind.id.clone());
    }
    for e in elements.values() {
        for name in e.properties.keys() {
            carriers.entry(normalize(name)).or_default().insert(e.kind.clone());
        }
    }

    Ok(KnowledgeBase { version: doc.version, attributes, kinds, elements, decisions, carriers })
}

fn check_unique<K: Ord + fmt::Display, T>(
    namespace: &'static str,
    items: &[T],
    key: impl Fn(&T) -> K,
) -> Result<(), KbError> {
    let mut seen = BTreeSet::new();
    for item in items {
        let k = key(item);
        if seen.contains(&k) {
            return Err(KbError::DuplicateId { namespace, id: k.to_string() });
        }
        seen.insert(k);
    }
    Ok(())
}

fn parse_predicate(text: &str) -> Result<PropertyConstraint, String> {
    let stmt = speclang::parse_statement(text).map_err(|e| e.to_string())?;
    match stmt.body {
        Statement::Property(p) => Ok(p),
        Statement::Quality(q) => Ok(q.as_property_constraint()),
        Statement::Use { .. } => Err("a dependency predicate must be a property constraint".to_string()),
    }
}
