//! Candidate generation, scoring and configuration search.

mod anneal;
mod candidates;
mod rationale;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{detect_incompatibilities, requirements_met, selected_elements};
use crate::kb::{DecisionId, Element, KnowledgeBase};
use crate::speclang::{evaluate_constraint, BoundSpec, ConstraintVerdict};

pub use anneal::{anneal, exhaustive_optimum, AnnealOutcome, AnnealParams, ParamError, DEFAULT_SEED};
pub use candidates::{applicable_decisions, generate_candidates, CandidateDecision};
pub use rationale::{build_rationale, Clause, Finding, ImpactClause, Rationale};

/// A set of committed decisions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(BTreeSet<DecisionId>);

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DecisionId> {
        self.0.iter()
    }

    pub fn contains(&self, id: &DecisionId) -> bool {
        self.0.contains(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn insert(&mut self, id: DecisionId) -> bool {
        self.0.insert(id)
    }

    pub fn remove(&mut self, id: &DecisionId) -> bool {
        self.0.remove(id)
    }

    /// A copy with `id` added.
    pub fn with(&self, id: &DecisionId) -> Configuration {
        let mut next = self.clone();
        next.insert(id.clone());
        next
    }
}

impl FromIterator<DecisionId> for Configuration {
    fn from_iter<I: IntoIterator<Item = DecisionId>>(iter: I) -> Self {
        Configuration(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Configuration {
    type Item = &'a DecisionId;
    type IntoIter = std::collections::btree_set::Iter<'a, DecisionId>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.0.iter().map(DecisionId::as_str).collect();
        write!(f, "{{{}}}", ids.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub w_satisfied: i64,
    pub w_violated: i64,
    pub w_qr: i64,
    pub w_compat: i64,
    pub w_issue: i64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { w_satisfied: 10, w_violated: -20, w_qr: 4, w_compat: 2, w_issue: -15 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid weights: {0}")]
pub struct WeightsError(pub String);

impl ScoreWeights {
    pub fn validate(&self) -> Result<(), WeightsError> {
        let checks = [
            (self.w_satisfied > 0, "w_satisfied must be positive"),
            (self.w_violated < 0, "w_violated must be negative"),
            (self.w_qr >= 0, "w_qr must not be negative"),
            (self.w_compat >= 0, "w_compat must not be negative"),
            (self.w_issue <= 0, "w_issue must not be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(WeightsError((*msg).to_string())),
            None => Ok(()),
        }
    }

    /// Parses and validates a JSON weights document. Missing fields keep
    /// their defaults.
    pub fn from_json(text: &str) -> Result<Self, WeightsError> {
        let w: ScoreWeights = serde_json::from_str(text).map_err(|e| WeightsError(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }
}

/// Verdict and bonus counts behind a score. For a candidate these are the
/// differences its addition makes, so they may be negative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub satisfied_count: i64,
    pub violated_count: i64,
    pub unknown_count: i64,
    pub qr_met_count: i64,
    pub compat_count: i64,
    pub introduced_issues: i64,
    pub total: i64,
}

impl ScoreBreakdown {
    fn weigh(mut self, w: &ScoreWeights) -> Self {
        self.total = w.w_satisfied * self.satisfied_count
            + w.w_violated * self.violated_count
            + w.w_qr * self.qr_met_count
            + w.w_compat * self.compat_count
            + w.w_issue * self.introduced_issues;
        self
    }

    /// Field-wise `self - base`.
    pub fn minus(&self, base: &ScoreBreakdown) -> ScoreBreakdown {
        ScoreBreakdown {
            satisfied_count: self.satisfied_count - base.satisfied_count,
            violated_count: self.violated_count - base.violated_count,
            unknown_count: self.unknown_count - base.unknown_count,
            qr_met_count: self.qr_met_count - base.qr_met_count,
            compat_count: self.compat_count - base.compat_count,
            introduced_issues: self.introduced_issues - base.introduced_issues,
            total: self.total - base.total,
        }
    }
}

/// Constraint verdicts of the active property constraints on `element`,
/// restricted to constraints whose property its kind carries. Yields the
/// statement index with each evaluation.
pub(crate) fn constraint_verdicts<'s>(
    element: &'s Element,
    spec: &'s BoundSpec,
    kb: &'s KnowledgeBase,
) -> impl Iterator<Item = (usize, crate::speclang::Evaluation)> + 's {
    spec.constraints()
        .filter(|(_, _, key)| kb.carries(key, &element.kind))
        .map(|(i, c, key)| (i, evaluate_constraint(c, key, element)))
}

/// Elements compatible with `element` that violate no active constraint.
pub(crate) fn compatible_conforming<'k>(element: &Element, spec: &BoundSpec, kb: &'k KnowledgeBase) -> Vec<&'k Element> {
    element
        .compatible_with
        .iter()
        .filter_map(|id| kb.element(id))
        .filter(|other| {
            spec.constraints().all(|(_, c, key)| evaluate_constraint(c, key, other).verdict != ConstraintVerdict::Violated)
        })
        .collect()
}

pub fn score_configuration(
    config: &Configuration,
    spec: &BoundSpec,
    kb: &KnowledgeBase,
    weights: &ScoreWeights,
) -> ScoreBreakdown {
    let mut b = ScoreBreakdown::default();
    for element in selected_elements(config, kb) {
        for (_, eval) in constraint_verdicts(element, spec, kb) {
            match eval.verdict {
                ConstraintVerdict::Satisfied => b.satisfied_count += 1,
                ConstraintVerdict::Violated => b.violated_count += 1,
                ConstraintVerdict::Unknown => b.unknown_count += 1,
            }
        }
        b.compat_count += compatible_conforming(element, spec, kb).len() as i64;
    }
    b.qr_met_count = requirements_met(config, spec, kb) as i64;
    b.introduced_issues = detect_incompatibilities(config, kb).len() as i64;
    b.weigh(weights)
}
