use std::collections::BTreeSet;

use serde::Serialize;

use super::{build_rationale, score_configuration, Configuration, Rationale, ScoreBreakdown, ScoreWeights};
use crate::analysis::{dependency_filled, selected_elements};
use crate::kb::{Decision, DecisionId, KindId, KnowledgeBase, Trigger};
use crate::names::normalize;
use crate::speclang::{evaluate_constraint, BoundSpec, ConstraintVerdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateDecision {
    pub decision: DecisionId,
    pub display_name: String,
    pub rationale: Rationale,
    pub score: ScoreBreakdown,
    pub rank: usize,
}

/// Why a decision is on the table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Offer {
    /// The decision's trigger matches statement `statement`.
    Trigger { statement: usize },
    /// It fills the kind of an open `use` statement.
    Use { statement: usize, kind: KindId },
    /// It fills an open dependency of a committed decision.
    Fills { owner: DecisionId, dependency: usize },
}

fn trigger_matches(decision: &Decision, spec: &BoundSpec) -> Vec<usize> {
    match &decision.offered_when {
        None => Vec::new(),
        Some(Trigger::Attribute(a)) => spec.requirements().filter(|(_, attr, _)| *attr == a).map(|(i, _, _)| i).collect(),
        Some(Trigger::Property(p)) => {
            let want = normalize(p);
            spec.constraints()
                .filter(|(_, c, key)| *key == want || normalize(&c.property) == want)
                .map(|(i, _, _)| i)
                .collect()
        }
    }
}

pub(crate) fn offers(decision: &Decision, config: &Configuration, spec: &BoundSpec, kb: &KnowledgeBase) -> Vec<Offer> {
    let mut out: Vec<Offer> = trigger_matches(decision, spec).into_iter().map(|statement| Offer::Trigger { statement }).collect();
    let Some(element) = decision.selects.as_ref().and_then(|e| kb.element(e)) else { return out };

    let filled: BTreeSet<&KindId> = selected_elements(config, kb).into_iter().map(|e| &e.kind).collect();
    for (statement, kind) in spec.kinds_used() {
        if *kind == element.kind && !filled.contains(kind) {
            out.push(Offer::Use { statement, kind: kind.clone() });
        }
    }
    for owner in config.iter().filter_map(|id| kb.decision(id)) {
        for (index, dep) in owner.dependencies.iter().enumerate() {
            if dep.kind != element.kind || dependency_filled(dep, config, kb) {
                continue;
            }
            let conforms = dep.predicate.as_ref().is_none_or(|p| {
                evaluate_constraint(p, &normalize(&p.property), element).verdict != ConstraintVerdict::Violated
            });
            if conforms {
                out.push(Offer::Fills { owner: owner.id.clone(), dependency: index });
            }
        }
    }
    out
}

/// Decisions the specification puts in play: those whose trigger matches or
/// whose element fills a `use`d kind, closed over the kinds their
/// dependencies require.
pub fn applicable_decisions(spec: &BoundSpec, kb: &KnowledgeBase) -> Vec<DecisionId> {
    let used: BTreeSet<&KindId> = spec.kinds_used().map(|(_, k)| k).collect();
    let kind_of = |d: &Decision| d.selects.as_ref().and_then(|e| kb.element(e)).map(|e| e.kind.clone());

    let mut chosen: BTreeSet<DecisionId> = kb
        .decisions
        .values()
        .filter(|d| !trigger_matches(d, spec).is_empty() || kind_of(d).is_some_and(|k| used.contains(&k)))
        .map(|d| d.id.clone())
        .collect();
    loop {
        let needed: BTreeSet<KindId> = chosen
            .iter()
            .filter_map(|id| kb.decision(id))
            .flat_map(|d| d.dependencies.iter().map(|dep| dep.kind.clone()))
            .collect();
        let before = chosen.len();
        chosen.extend(
            kb.decisions.values().filter(|d| kind_of(d).is_some_and(|k| needed.contains(&k))).map(|d| d.id.clone()),
        );
        if chosen.len() == before {
            return chosen.into_iter().collect();
        }
    }
}

/// Ranks every uncommitted decision that is on offer by the score change its
/// commitment would make.
pub fn generate_candidates(
    config: &Configuration,
    spec: &BoundSpec,
    kb: &KnowledgeBase,
    weights: &ScoreWeights,
) -> Vec<CandidateDecision> {
    let base = score_configuration(config, spec, kb, weights);
    let mut out: Vec<CandidateDecision> = kb
        .decisions
        .values()
        .filter(|d| !config.contains(&d.id) && !offers(d, config, spec, kb).is_empty())
        .map(|d| {
            let score = score_configuration(&config.with(&d.id), spec, kb, weights).minus(&base);
            CandidateDecision {
                decision: d.id.clone(),
                display_name: d.display_name.clone(),
                rationale: build_rationale(d, config, spec, kb),
                score,
                rank: 0,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total
            .cmp(&a.score.total)
            .then(b.score.satisfied_count.cmp(&a.score.satisfied_count))
            .then(a.score.introduced_issues.cmp(&b.score.introduced_issues))
            .then(a.decision.cmp(&b.decision))
    });
    for (i, c) in out.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    out
}
