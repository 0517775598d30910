//! Issue detection and quality evaluation for a configuration.
//!
//! Everything here is a pure function of `(configuration, bound spec, kb)`.
//! Issues are reported, never enforced: the architect decides what to do
//! with them.

use std::collections::BTreeSet;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::inference::Configuration;
use crate::kb::{AttributeId, Certainty, DecisionId, Dependency, ElementId, Impact, KindId, KnowledgeBase};
use crate::speclang::{
    describe_statement, evaluate_constraint, BoundSpec, Comparator, ConstraintVerdict, OrdinalLevel, Origin,
    QualityRequirement, SpecStatement, Statement,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contribution {
    pub decision: DecisionId,
    pub impact: Impact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QaEvaluation {
    pub attribute: AttributeId,
    pub predicted: OrdinalLevel,
    pub aggregate_valence: i8,
    pub contributing: Vec<Contribution>,
}

/// The second party of an incompatibility.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum Party {
    Decision(DecisionId),
    Element(ElementId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IncompatibilityCause {
    /// The knowledge base declares the two decisions incompatible.
    DecisionRule,
    /// A committed element of the dependency's kind violates its predicate.
    DependencyViolated { dependency: usize },
    /// Two decisions select distinct elements for the same kind.
    SlotConflict { kind: KindId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum DependencyOwner {
    Decision(DecisionId),
    /// A `use` statement of the specification.
    Specification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IssueDetail {
    Incompatibility { a: DecisionId, b: Party, cause: IncompatibilityCause },
    UnresolvedDependency { owner: DependencyOwner, kind: KindId, predicate: Option<String>, label: String },
    QrViolation { attribute: AttributeId, requirement: QualityRequirement, evaluation: QaEvaluation },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub detail: IssueDetail,
    pub message: String,
}

impl Issue {
    pub fn severity(&self) -> Severity {
        match self.detail {
            IssueDetail::UnresolvedDependency { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }

    pub fn kind_token(&self) -> &'static str {
        match self.detail {
            IssueDetail::Incompatibility { .. } => "incompatibility",
            IssueDetail::UnresolvedDependency { .. } => "dependency",
            IssueDetail::QrViolation { .. } => "qr_violation",
        }
    }

    /// Typed references, rendered `decision:<id>`, `element:<id>`, ...
    pub fn refs(&self) -> Vec<String> {
        match &self.detail {
            IssueDetail::Incompatibility { a, b, cause } => {
                let mut refs = vec![format!("decision:{a}")];
                refs.push(match b {
                    Party::Decision(d) => format!("decision:{d}"),
                    Party::Element(e) => format!("element:{e}"),
                });
                if let IncompatibilityCause::SlotConflict { kind } = cause {
                    refs.push(format!("kind:{kind}"));
                }
                refs
            }
            IssueDetail::UnresolvedDependency { owner, kind, .. } => {
                let owner = match owner {
                    DependencyOwner::Decision(d) => format!("decision:{d}"),
                    DependencyOwner::Specification => "specification".to_string(),
                };
                vec![owner, format!("kind:{kind}")]
            }
            IssueDetail::QrViolation { attribute, requirement, .. } => {
                vec![
                    format!("attribute:{attribute}"),
                    format!("statement:{}", crate::speclang::render_statement(&Statement::Quality(requirement.clone()))),
                ]
            }
        }
    }
}

impl Serialize for Issue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Issue", 5)?;
        st.serialize_field("kind", self.kind_token())?;
        st.serialize_field("severity", &self.severity())?;
        st.serialize_field("refs", &self.refs())?;
        st.serialize_field("message", &self.message)?;
        st.serialize_field("detail", &self.detail)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Suggestion {
    pub attribute: AttributeId,
    pub supporting_decisions: Vec<DecisionId>,
    pub proposed_statement: SpecStatement,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnalysisReport {
    pub issues: Vec<Issue>,
    pub suggestions: Vec<Suggestion>,
    pub evaluations: Vec<QaEvaluation>,
}

impl AnalysisReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty() && self.suggestions.is_empty() && self.evaluations.is_empty()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.issues.iter().filter(|i| i.kind_token() == kind).count()
    }
}

/// Fraction of committed decisions that must favour an attribute before a
/// requirement on it is suggested. Lies in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self, String> {
        if value > 0.0 && value <= 1.0 {
            Ok(Threshold(value))
        } else {
            Err(format!("suggestion threshold must lie in (0, 1], got {value}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold(0.5)
    }
}

impl TryFrom<f64> for Threshold {
    type Error = String;
    fn try_from(v: f64) -> Result<Self, String> {
        Threshold::new(v)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

/// Minimum number of supporting decisions for a suggestion.
const SUGGESTION_FLOOR: usize = 2;

pub fn detect_incompatibilities(config: &Configuration, kb: &KnowledgeBase) -> Vec<Issue> {
    let committed: Vec<_> = config.iter().filter_map(|id| kb.decision(id)).collect();
    let mut issues = Vec::new();

    for d in &committed {
        for other in d.incompatible_with.iter().filter(|o| config.contains(o) && *o > &d.id) {
            issues.push(Issue {
                message: format!(
                    "{} is incompatible with {}",
                    d.display_name,
                    kb.decision_name(other)
                ),
                detail: IssueDetail::Incompatibility {
                    a: d.id.clone(),
                    b: Party::Decision(other.clone()),
                    cause: IncompatibilityCause::DecisionRule,
                },
            });
        }
    }

    for d in &committed {
        for (index, dep) in d.dependencies.iter().enumerate() {
            let Some(predicate) = &dep.predicate else { continue };
            let key = crate::names::normalize(&predicate.property);
            for element in selected_elements(config, kb).into_iter().filter(|e| e.kind == dep.kind) {
                if evaluate_constraint(predicate, &key, element).verdict == ConstraintVerdict::Violated {
                    issues.push(Issue {
                        message: format!(
                            "{} requires {} with {}, but {} does not satisfy it",
                            d.display_name,
                            kb.kind_name(&dep.kind),
                            describe_statement(&Statement::Property(predicate.clone())),
                            element.display_name
                        ),
                        detail: IssueDetail::Incompatibility {
                            a: d.id.clone(),
                            b: Party::Element(element.id.clone()),
                            cause: IncompatibilityCause::DependencyViolated { dependency: index },
                        },
                    });
                }
            }
        }
    }

    for (i, a) in committed.iter().enumerate() {
        let Some(ea) = a.selects.as_ref().and_then(|e| kb.element(e)) else { continue };
        for b in &committed[i + 1..] {
            let Some(eb) = b.selects.as_ref().and_then(|e| kb.element(e)) else { continue };
            if ea.kind == eb.kind && ea.id != eb.id {
                issues.push(Issue {
                    message: format!(
                        "{} and {} both fill the {} slot",
                        a.display_name,
                        b.display_name,
                        kb.kind_name(&ea.kind)
                    ),
                    detail: IssueDetail::Incompatibility {
                        a: a.id.clone(),
                        b: Party::Decision(b.id.clone()),
                        cause: IncompatibilityCause::SlotConflict { kind: ea.kind.clone() },
                    },
                });
            }
        }
    }
    issues
}

/// Distinct elements selected by committed decisions, in id order.
pub(crate) fn selected_elements<'k>(config: &Configuration, kb: &'k KnowledgeBase) -> Vec<&'k crate::kb::Element> {
    let ids: BTreeSet<&ElementId> = config.iter().filter_map(|d| kb.decision(d)?.selects.as_ref()).collect();
    ids.into_iter().filter_map(|e| kb.element(e)).collect()
}

/// Whether some committed element of the dependency's kind does not violate
/// its predicate.
pub(crate) fn dependency_filled(dep: &Dependency, config: &Configuration, kb: &KnowledgeBase) -> bool {
    selected_elements(config, kb).into_iter().filter(|e| e.kind == dep.kind).any(|e| match &dep.predicate {
        None => true,
        Some(p) => {
            evaluate_constraint(p, &crate::names::normalize(&p.property), e).verdict != ConstraintVerdict::Violated
        }
    })
}

pub fn detect_dependencies(config: &Configuration, spec: &BoundSpec, kb: &KnowledgeBase) -> Vec<Issue> {
    let mut issues = Vec::new();
    for d in config.iter().filter_map(|id| kb.decision(id)) {
        for dep in &d.dependencies {
            if dependency_filled(dep, config, kb) {
                continue;
            }
            let predicate = dep.predicate.as_ref().map(|p| describe_statement(&Statement::Property(p.clone())));
            let what = match &predicate {
                Some(p) => format!("{} with {}", kb.kind_name(&dep.kind), p),
                None => kb.kind_name(&dep.kind),
            };
            issues.push(Issue {
                message: format!("{} requires {}: {}", d.display_name, what, dep.label),
                detail: IssueDetail::UnresolvedDependency {
                    owner: DependencyOwner::Decision(d.id.clone()),
                    kind: dep.kind.clone(),
                    predicate,
                    label: dep.label.clone(),
                },
            });
        }
    }

    let used: BTreeSet<&KindId> = spec.kinds_used().map(|(_, k)| k).collect();
    let filled: BTreeSet<&KindId> = selected_elements(config, kb).into_iter().map(|e| &e.kind).collect();
    for kind in used.into_iter().filter(|k| !filled.contains(k)) {
        issues.push(Issue {
            message: format!("the specification asks to use a {} but none is selected", kb.kind_name(kind)),
            detail: IssueDetail::UnresolvedDependency {
                owner: DependencyOwner::Specification,
                kind: kind.clone(),
                predicate: None,
                label: format!("use {}", kb.kind_name(kind)),
            },
        });
    }
    issues
}

/// Predicted level of one attribute under `config`. Only certain impacts move
/// the prediction; possible and conditional ones are listed as contributing.
pub fn predict(attribute: &AttributeId, config: &Configuration, kb: &KnowledgeBase) -> QaEvaluation {
    let contributing: Vec<Contribution> = config
        .iter()
        .filter_map(|id| kb.decision(id))
        .flat_map(|d| {
            d.impacts
                .iter()
                .filter(|i| &i.attribute == attribute)
                .map(|i| Contribution { decision: d.id.clone(), impact: i.clone() })
        })
        .collect();
    let sum: i32 = contributing
        .iter()
        .filter(|c| c.impact.certainty == Certainty::Certain)
        .map(|c| i32::from(c.impact.valence))
        .sum();
    let aggregate_valence = sum.clamp(-2, 2) as i8;
    QaEvaluation {
        attribute: attribute.clone(),
        predicted: OrdinalLevel::clamped(OrdinalLevel::Average.index() + aggregate_valence),
        aggregate_valence,
        contributing,
    }
}

pub fn evaluate_quality(config: &Configuration, spec: &BoundSpec, kb: &KnowledgeBase) -> (Vec<QaEvaluation>, Vec<Issue>) {
    let mut relevant: BTreeSet<&AttributeId> = spec.requirements().map(|(_, a, _)| a).collect();
    for d in config.iter().filter_map(|id| kb.decision(id)) {
        relevant.extend(d.impacts.iter().map(|i| &i.attribute));
    }
    let evaluations: Vec<QaEvaluation> = relevant.into_iter().map(|a| predict(a, config, kb)).collect();

    let mut violated: Vec<(&AttributeId, &QualityRequirement)> = spec
        .requirements()
        .filter(|(_, attr, req)| {
            let eval = evaluations.iter().find(|e| &e.attribute == *attr).expect("every required attribute is evaluated");
            !req.is_met_by(eval.predicted)
        })
        .map(|(_, a, r)| (a, r))
        .collect();
    violated.sort_by(|x, y| (x.0, x.1.comparator, x.1.level).cmp(&(y.0, y.1.comparator, y.1.level)));

    let issues = violated
        .into_iter()
        .map(|(attr, req)| {
            let evaluation = evaluations.iter().find(|e| &e.attribute == attr).cloned().expect("evaluated above");
            Issue {
                message: format!(
                    "{} is predicted {} but the requirement is {} {}",
                    kb.attribute_name(attr),
                    evaluation.predicted,
                    req.comparator.keyword(),
                    req.level
                ),
                detail: IssueDetail::QrViolation { attribute: attr.clone(), requirement: req.clone(), evaluation },
            }
        })
        .collect();
    (evaluations, issues)
}

/// Number of quality requirements met under `config`.
pub(crate) fn requirements_met(config: &Configuration, spec: &BoundSpec, kb: &KnowledgeBase) -> usize {
    spec.requirements().filter(|(_, attr, req)| req.is_met_by(predict(attr, config, kb).predicted)).count()
}

pub fn suggest_qrs(config: &Configuration, spec: &BoundSpec, kb: &KnowledgeBase, threshold: Threshold) -> Vec<Suggestion> {
    let mut out = Vec::new();
    for attr in kb.attributes.values() {
        if spec.constrains_attribute(&attr.id) {
            continue;
        }
        let supporting: Vec<DecisionId> = config
            .iter()
            .filter(|id| {
                kb.decision(id).is_some_and(|d| d.impacts.iter().any(|i| i.attribute == attr.id && i.valence > 0))
            })
            .cloned()
            .collect();
        let enough = supporting.len() as f64 >= threshold.value() * config.len() as f64;
        if supporting.len() >= SUGGESTION_FLOOR && enough {
            let body = Statement::Quality(QualityRequirement {
                attribute: attr.display_name.clone(),
                comparator: Comparator::AtLeast,
                level: OrdinalLevel::High,
            });
            out.push(Suggestion {
                attribute: attr.id.clone(),
                supporting_decisions: supporting,
                proposed_statement: SpecStatement::canonical(body, Origin::Refinement),
            });
        }
    }
    out
}

/// Every detector in one report: incompatibilities, requirement violations
/// and dependencies as issues, then suggestions and evaluations.
pub fn analyze(config: &Configuration, spec: &BoundSpec, kb: &KnowledgeBase, threshold: Threshold) -> AnalysisReport {
    let mut issues = detect_incompatibilities(config, kb);
    let (evaluations, violations) = evaluate_quality(config, spec, kb);
    issues.extend(violations);
    issues.extend(detect_dependencies(config, spec, kb));
    AnalysisReport { issues, suggestions: suggest_qrs(config, spec, kb, threshold), evaluations }
}
