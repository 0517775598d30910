use serde::Serialize;

use super::candidates::{offers, Offer};
use super::{compatible_conforming, constraint_verdicts, Configuration};
use crate::kb::{AttributeId, Certainty, Decision, ElementId, Impact, KnowledgeBase};
use crate::speclang::{describe_statement, BoundSpec, BoundStatement, ConstraintVerdict, Statement};

/// A rendered sentence and the typed ids it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Clause {
    pub text: String,
    pub refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImpactClause {
    pub attribute: AttributeId,
    pub valence: i8,
    pub certainty: Certainty,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub statement: usize,
    pub element: ElementId,
    pub property: String,
    pub verdict: ConstraintVerdict,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Rationale {
    pub offered_because: Vec<Clause>,
    pub impact_summary: Vec<ImpactClause>,
    pub obligations: Vec<Clause>,
    pub constraint_findings: Vec<Finding>,
}

impl Rationale {
    /// Every clause text, in field order.
    pub fn clauses(&self) -> impl Iterator<Item = &str> {
        self.offered_because
            .iter()
            .map(|c| c.text.as_str())
            .chain(self.impact_summary.iter().map(|c| c.text.as_str()))
            .chain(self.obligations.iter().map(|c| c.text.as_str()))
            .chain(self.constraint_findings.iter().map(|c| c.text.as_str()))
    }
}

fn statement_text(spec: &BoundSpec, index: usize) -> String {
    describe_statement(&spec.spec.statements[index].body)
}

fn impact_text(impact: &Impact, kb: &KnowledgeBase) -> String {
    let attr = kb.attribute_name(&impact.attribute);
    let verb = match (impact.valence.signum(), impact.certainty) {
        (0, _) => "has neutral impact on",
        (1, Certainty::Certain) => "increases",
        (1, _) => "can increase",
        (_, Certainty::Certain) => "damages",
        _ => "can damage",
    };
    let strength = if impact.valence.abs() == 2 { " strongly" } else { "" };
    let mut text = format!("{verb}{strength} {attr}");
    if impact.certainty == Certainty::Conditional {
        text.push_str(" (conditional)");
    }
    if !impact.note.is_empty() {
        text.push_str(" because ");
        text.push_str(&impact.note);
    }
    text
}

/// Explains `decision` against the current configuration and specification.
/// Every clause carries the ids of the facts it was built from.
pub fn build_rationale(decision: &Decision, config: &Configuration, spec: &BoundSpec, kb: &KnowledgeBase) -> Rationale {
    let mut r = Rationale::default();
    let element = decision.selects.as_ref().and_then(|e| kb.element(e));

    for offer in offers(decision, config, spec, kb) {
        r.offered_because.push(match offer {
            Offer::Trigger { statement } => {
                let what = match &spec.statements[statement] {
                    BoundStatement::Quality { attribute, .. } => format!("about {}", kb.attribute_name(attribute)),
                    _ => "on a constrained property".to_string(),
                };
                Clause {
                    text: format!("there is a requirement {what} ({})", statement_text(spec, statement)),
                    refs: vec![format!("decision:{}", decision.id), format!("statement:{statement}")],
                }
            }
            Offer::Use { statement, kind } => Clause {
                text: format!("the specification asks to use a {}", kb.kind_name(&kind)),
                refs: vec![format!("statement:{statement}"), format!("kind:{kind}")],
            },
            Offer::Fills { owner, dependency } => {
                let dep = &kb.decision(&owner).expect("committed decisions exist").dependencies[dependency];
                Clause {
                    text: format!("{} requires a {}", kb.decision_name(&owner), kb.kind_name(&dep.kind)),
                    refs: vec![format!("decision:{owner}"), format!("kind:{}", dep.kind)],
                }
            }
        });
    }

    if let Some(element) = element {
        for (statement, eval) in constraint_verdicts(element, spec, kb) {
            let BoundStatement::Property { constraint, .. } = &spec.statements[statement] else { continue };
            let described = describe_statement(&Statement::Property(constraint.clone()));
            let refs = vec![format!("element:{}", element.id), format!("statement:{statement}")];
            let text = match eval.verdict {
                ConstraintVerdict::Satisfied => {
                    r.offered_because.push(Clause {
                        text: format!("{} satisfies {described}", element.display_name),
                        refs: refs.clone(),
                    });
                    format!("satisfies {described}")
                }
                ConstraintVerdict::Violated => match &eval.observed {
                    Some(v) => format!("violates {described} ({} is {v})", constraint.property),
                    None => format!("violates {described}"),
                },
                ConstraintVerdict::Unknown => {
                    format!("no information available about {} in {}", constraint.property, element.display_name)
                }
            };
            r.constraint_findings.push(Finding {
                statement,
                element: element.id.clone(),
                property: constraint.property.clone(),
                verdict: eval.verdict,
                text,
            });
        }

        let compatible = compatible_conforming(element, spec, kb);
        if !compatible.is_empty() {
            let names: Vec<&str> = compatible.iter().map(|e| e.display_name.as_str()).collect();
            r.offered_because.push(Clause {
                text: format!("{} works with {} elements that meet the constraints ({})", element.display_name, names.len(), names.join(", ")),
                refs: compatible.iter().map(|e| format!("element:{}", e.id)).collect(),
            });
        }
    }

    for impact in &decision.impacts {
        r.impact_summary.push(ImpactClause {
            attribute: impact.attribute.clone(),
            valence: impact.valence,
            certainty: impact.certainty,
            text: impact_text(impact, kb),
        });
    }

    for dep in &decision.dependencies {
        let mut text = format!("requires a {}", kb.kind_name(&dep.kind));
        if let Some(p) = &dep.predicate {
            text.push_str(" with ");
            text.push_str(&describe_statement(&Statement::Property(p.clone())));
        }
        if !dep.label.is_empty() {
            text.push_str(": ");
            text.push_str(&dep.label);
        }
        r.obligations.push(Clause { text, refs: vec![format!("decision:{}", decision.id), format!("kind:{}", dep.kind)] });
    }

    if r.offered_because.is_empty() {
        r.offered_because.push(match element {
            Some(e) => Clause {
                text: format!("selects {} for the {} slot", e.display_name, kb.kind_name(&e.kind)),
                refs: vec![format!("element:{}", e.id), format!("kind:{}", e.kind)],
            },
            None => Clause {
                text: "available in the knowledge base".to_string(),
                refs: vec![format!("decision:{}", decision.id)],
            },
        });
    }
    r
}
