//! The iterative decision loop as an event-sourced state machine.
//!
//! A [`Session`] is fully determined by its knowledge base, initial
//! specification text, weights, threshold and the list of [`Event`]s applied
//! to it. Every mutating method validates, applies and then records its event,
//! and [`Session::replay`] rebuilds the state by applying the same events
//! through the same code path.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze, detect_incompatibilities, AnalysisReport, IncompatibilityCause, Issue, IssueDetail, Party, Suggestion, Threshold};
use crate::inference::{
    build_rationale, generate_candidates, score_configuration, CandidateDecision, Configuration, Rationale,
    ScoreBreakdown, ScoreWeights,
};
use crate::kb::{DecisionId, ElementId, KnowledgeBase};
use crate::speclang::{
    bind_spec, parse_spec, parse_statement, render_statement, serialize_spec, ArchSpec, BindError, BoundSpec,
    BoundStatement, Origin, ParseErrors, PropertyConstraint, SpecStatement, Statement,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Specification,
    Inference,
    DecisionMaking,
    Refinement,
}

impl Phase {
    pub fn next(self) -> Phase {
        match self {
            Phase::Specification => Phase::Inference,
            Phase::Inference => Phase::DecisionMaking,
            Phase::DecisionMaking => Phase::Refinement,
            Phase::Refinement => Phase::Specification,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Specification => "specification",
            Phase::Inference => "inference",
            Phase::DecisionMaking => "decision_making",
            Phase::Refinement => "refinement",
        }
    }

    pub fn parse(text: &str) -> Option<Phase> {
        [Phase::Specification, Phase::Inference, Phase::DecisionMaking, Phase::Refinement]
            .into_iter()
            .find(|p| p.as_str() == text.replace('-', "_"))
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogAction {
    Committed,
    Retracted,
    Overridden,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionLogEntry {
    pub decision: DecisionId,
    pub action: LogAction,
    pub iteration: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Incompatibility,
    Dependency,
    QrViolation,
    Suggestion,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Incompatibility => "incompatibility",
            OutcomeKind::Dependency => "dependency",
            OutcomeKind::QrViolation => "qr_violation",
            OutcomeKind::Suggestion => "suggestion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutcomePayload {
    Issue(Issue),
    Suggestion(Suggestion),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[serde(alias = "accepted")]
    Accept,
    #[serde(alias = "rejected")]
    Reject,
}

/// A refinement product awaiting the architect's verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutcomeItem {
    pub id: String,
    pub kind: OutcomeKind,
    pub iteration: u32,
    pub message: String,
    pub payload: OutcomePayload,
    /// Statements folded into the next specification if accepted. Empty when
    /// no translation exists.
    pub proposed_statements: Vec<SpecStatement>,
    /// The architect's replacement for the proposal, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edited_statement: Option<SpecStatement>,
    pub status: OutcomeStatus,
    pub folded: bool,
}

impl OutcomeItem {
    /// What an acceptance folds into the specification.
    pub fn effective_statements(&self) -> Vec<SpecStatement> {
        match &self.edited_statement {
            Some(s) => vec![s.clone()],
            None => self.proposed_statements.clone(),
        }
    }

    fn same_proposal(&self, kind: OutcomeKind, message: &str, statements: &[SpecStatement]) -> bool {
        self.kind == kind
            && self.message == message
            && self.proposed_statements.iter().map(|s| &s.body).eq(statements.iter().map(|s| &s.body))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Advance,
    Commit {
        decision: DecisionId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        override_note: Option<String>,
    },
    Retract {
        decision: DecisionId,
    },
    ResolveOutcome {
        outcome: String,
        verdict: Verdict,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edited_statement: Option<String>,
    },
    UpdateSpec {
        spec_text: String,
    },
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub spec_text: String,
    pub committed: Vec<DecisionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommitReceipt {
    pub entry: DecisionLogEntry,
    /// Incompatibilities present after the commit that were not present before.
    pub introduced_issues: Vec<Issue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WhatIf {
    pub decision: DecisionId,
    pub score: ScoreBreakdown,
    pub introduced_issues: Vec<Issue>,
    pub rationale: Rationale,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("specification does not parse:\n{0}")]
    Parse(ParseErrors),
    #[error("specification does not bind: {0}")]
    Bind(BindError),
    #[error("{operation} is not allowed in the {phase} phase")]
    Phase { operation: &'static str, phase: Phase },
    #[error("the session has ended")]
    Ended,
    #[error("unknown decision {0:?}")]
    UnknownDecision(String),
    #[error("decision {0} is already committed")]
    AlreadyCommitted(DecisionId),
    #[error("decision {0} is not committed")]
    NotCommitted(DecisionId),
    #[error("{decision} is not the top-ranked candidate ({top}); an override note is required")]
    OverrideNoteRequired { decision: DecisionId, top: DecisionId },
    #[error("unknown outcome {0:?}")]
    UnknownOutcome(String),
    #[error("outcome {0} is already resolved")]
    AlreadyResolved(String),
    #[error("outcome statement is invalid: {0}")]
    InvalidStatement(String),
    #[error("session was saved against knowledge base {found}, but {expected} is loaded")]
    VersionMismatch { expected: String, found: String },
    #[error("invalid session document: {0}")]
    Schema(String),
}

impl From<ParseErrors> for SessionError {
    fn from(e: ParseErrors) -> Self {
        SessionError::Parse(e)
    }
}

impl From<BindError> for SessionError {
    fn from(e: BindError) -> Self {
        SessionError::Bind(e)
    }
}

fn bind_text(text: &str, kb: &KnowledgeBase) -> Result<BoundSpec, SessionError> {
    Ok(bind_spec(&parse_spec(text)?, kb)?)
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    kb: Arc<KnowledgeBase>,
    weights: ScoreWeights,
    threshold: Threshold,
    initial_spec_text: String,
    spec_text: String,
    spec: BoundSpec,
    commit_order: Vec<DecisionId>,
    config: Configuration,
    commit_rationale: BTreeMap<DecisionId, Rationale>,
    iteration: u32,
    phase: Phase,
    ended: bool,
    outcomes: Vec<OutcomeItem>,
    log: Vec<DecisionLogEntry>,
    candidates: Vec<CandidateDecision>,
    history: Vec<IterationRecord>,
    events: Vec<Event>,
}

impl Session {
    /// A session at iteration 1 in the specification phase.
    pub fn new(
        id: impl Into<String>,
        kb: Arc<KnowledgeBase>,
        spec_text: &str,
        weights: ScoreWeights,
        threshold: Threshold,
    ) -> Result<Self, SessionError> {
        let spec = bind_text(spec_text, &kb)?;
        Ok(Session {
            id: id.into(),
            kb,
            weights,
            threshold,
            initial_spec_text: spec_text.to_string(),
            spec_text: spec_text.to_string(),
            spec,
            commit_order: Vec::new(),
            config: Configuration::new(),
            commit_rationale: BTreeMap::new(),
            iteration: 1,
            phase: Phase::Specification,
            ended: false,
            outcomes: Vec::new(),
            log: Vec::new(),
            candidates: Vec::new(),
            history: Vec::new(),
            events: Vec::new(),
        })
    }

    /// Rebuilds a session by applying `events` in order.
    pub fn replay(
        id: impl Into<String>,
        kb: Arc<KnowledgeBase>,
        initial_spec_text: &str,
        weights: ScoreWeights,
        threshold: Threshold,
        events: &[Event],
    ) -> Result<Self, SessionError> {
        let mut s = Session::new(id, kb, initial_spec_text, weights, threshold)?;
        for e in events {
            s.apply(e.clone())?;
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn weights(&self) -> &ScoreWeights {
        &self.weights
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn spec(&self) -> &BoundSpec {
        &self.spec
    }

    pub fn spec_text(&self) -> &str {
        &self.spec_text
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    /// Committed decisions in commit order.
    pub fn committed(&self) -> &[DecisionId] {
        &self.commit_order
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_ended(&self) -> bool {
        self.ended
    }

    pub fn outcomes(&self) -> &[OutcomeItem] {
        &self.outcomes
    }

    pub fn log(&self) -> &[DecisionLogEntry] {
        &self.log
    }

    /// Ranked candidates as of the last inference, commit or retraction.
    pub fn candidates(&self) -> &[CandidateDecision] {
        &self.candidates
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Number of applied events; changes with every successful mutation.
    pub fn version(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn analysis(&self) -> AnalysisReport {
        analyze(&self.config, &self.spec, &self.kb, self.threshold)
    }

    pub fn advance(&mut self) -> Result<Phase, SessionError> {
        self.apply(Event::Advance)?;
        Ok(self.phase)
    }

    pub fn commit(&mut self, decision: &str, override_note: Option<&str>) -> Result<CommitReceipt, SessionError> {
        let event = Event::Commit { decision: decision.into(), override_note: override_note.map(str::to_string) };
        self.check_mutable()?;
        let receipt = self.do_commit(&decision.into(), override_note)?;
        self.events.push(event);
        Ok(receipt)
    }

    pub fn retract(&mut self, decision: &str) -> Result<DecisionLogEntry, SessionError> {
        self.apply(Event::Retract { decision: decision.into() })?;
        Ok(self.log.last().cloned().expect("retraction logs an entry"))
    }

    pub fn resolve_outcome(
        &mut self,
        outcome: &str,
        verdict: Verdict,
        edited_statement: Option<&str>,
    ) -> Result<&OutcomeItem, SessionError> {
        self.apply(Event::ResolveOutcome {
            outcome: outcome.to_string(),
            verdict,
            edited_statement: edited_statement.map(str::to_string),
        })?;
        Ok(self.outcomes.iter().find(|o| o.id == outcome).expect("resolved outcome exists"))
    }

    pub fn update_spec(&mut self, spec_text: &str) -> Result<(), SessionError> {
        self.apply(Event::UpdateSpec { spec_text: spec_text.to_string() })
    }

    pub fn end(&mut self) -> Result<(), SessionError> {
        self.apply(Event::End)
    }

    /// Scores `decision` against the current configuration without
    /// committing it.
    pub fn what_if(&self, decision: &str) -> Result<WhatIf, SessionError> {
        let id = DecisionId::from(decision);
        let d = self.kb.decision(&id).ok_or_else(|| SessionError::UnknownDecision(decision.to_string()))?;
        let next = self.config.with(&id);
        let base = score_configuration(&self.config, &self.spec, &self.kb, &self.weights);
        let score = score_configuration(&next, &self.spec, &self.kb, &self.weights).minus(&base);
        Ok(WhatIf {
            decision: id,
            score,
            introduced_issues: self.introduced(&next),
            rationale: build_rationale(d, &self.config, &self.spec, &self.kb),
        })
    }

    fn check_mutable(&self) -> Result<(), SessionError> {
        if self.ended {
            Err(SessionError::Ended)
        } else {
            Ok(())
        }
    }

    /// Applies one event and appends it to the log.
    fn apply(&mut self, event: Event) -> Result<(), SessionError> {
        self.check_mutable()?;
        match &event {
            Event::Advance => self.do_advance(),
            Event::Commit { decision, override_note } => {
                self.do_commit(decision, override_note.as_deref()).map(|_| ())
            }
            Event::Retract { decision } => self.do_retract(decision),
            Event::ResolveOutcome { outcome, verdict, edited_statement } => {
                self.do_resolve(outcome, *verdict, edited_statement.as_deref())
            }
            Event::UpdateSpec { spec_text } => self.do_update_spec(spec_text),
            Event::End => self.do_end(),
        }?;
        self.events.push(event);
        Ok(())
    }

    fn phase_error(&self, operation: &'static str) -> SessionError {
        SessionError::Phase { operation, phase: self.phase }
    }

    fn refresh_candidates(&mut self) {
        self.candidates = generate_candidates(&self.config, &self.spec, &self.kb, &self.weights);
    }

    fn do_advance(&mut self) -> Result<(), SessionError> {
        match self.phase {
            Phase::Specification => self.refresh_candidates(),
            Phase::Inference => {}
            Phase::DecisionMaking => self.materialize_outcomes(),
            Phase::Refinement => {
                self.history.push(IterationRecord {
                    iteration: self.iteration,
                    spec_text: self.spec_text.clone(),
                    committed: self.commit_order.clone(),
                });
                let pending: Vec<usize> = (0..self.outcomes.len())
                    .filter(|&i| self.outcomes[i].status == OutcomeStatus::Accepted && !self.outcomes[i].folded)
                    .collect();
                self.fold(&pending)?;
                self.iteration += 1;
            }
        }
        self.phase = self.phase.next();
        Ok(())
    }

    fn do_commit(&mut self, id: &DecisionId, override_note: Option<&str>) -> Result<CommitReceipt, SessionError> {
        if self.phase != Phase::DecisionMaking {
            return Err(self.phase_error("commit"));
        }
        let decision = self.kb.decision(id).ok_or_else(|| SessionError::UnknownDecision(id.to_string()))?;
        if self.config.contains(id) {
            return Err(SessionError::AlreadyCommitted(id.clone()));
        }
        let note = override_note.map(str::trim).filter(|n| !n.is_empty()).map(str::to_string);
        let action = match self.candidates.first() {
            Some(top) if &top.decision != id => {
                if note.is_none() {
                    return Err(SessionError::OverrideNoteRequired { decision: id.clone(), top: top.decision.clone() });
                }
                LogAction::Overridden
            }
            _ => LogAction::Committed,
        };
        let rationale = build_rationale(decision, &self.config, &self.spec, &self.kb);
        let next = self.config.with(id);
        let introduced_issues = self.introduced(&next);

        self.config = next;
        self.commit_order.push(id.clone());
        self.commit_rationale.insert(id.clone(), rationale);
        let entry = DecisionLogEntry { decision: id.clone(), action, iteration: self.iteration, override_note: note };
        self.log.push(entry.clone());
        self.refresh_candidates();
        Ok(CommitReceipt { entry, introduced_issues })
    }

    fn introduced(&self, next: &Configuration) -> Vec<Issue> {
        let before = detect_incompatibilities(&self.config, &self.kb);
        detect_incompatibilities(next, &self.kb).into_iter().filter(|i| !before.contains(i)).collect()
    }

    fn do_retract(&mut self, id: &DecisionId) -> Result<(), SessionError> {
        if !self.config.remove(id) {
            return Err(SessionError::NotCommitted(id.clone()));
        }
        self.commit_order.retain(|d| d != id);
        self.commit_rationale.remove(id);
        self.log.push(DecisionLogEntry {
            decision: id.clone(),
            action: LogAction::Retracted,
            iteration: self.iteration,
            override_note: None,
        });
        self.refresh_candidates();
        Ok(())
    }

    fn do_update_spec(&mut self, text: &str) -> Result<(), SessionError> {
        if self.phase != Phase::Specification {
            return Err(self.phase_error("updating the specification"));
        }
        self.spec = bind_text(text, &self.kb)?;
        self.spec_text = text.to_string();
        Ok(())
    }

    fn do_end(&mut self) -> Result<(), SessionError> {
        if !matches!(self.phase, Phase::DecisionMaking | Phase::Refinement) {
            return Err(self.phase_error("ending the session"));
        }
        self.ended = true;
        Ok(())
    }

    fn do_resolve(&mut self, id: &str, verdict: Verdict, edited: Option<&str>) -> Result<(), SessionError> {
        if !matches!(self.phase, Phase::Refinement | Phase::Specification) {
            return Err(self.phase_error("resolving an outcome"));
        }
        let index =
            self.outcomes.iter().position(|o| o.id == id).ok_or_else(|| SessionError::UnknownOutcome(id.to_string()))?;
        if self.outcomes[index].status != OutcomeStatus::Pending {
            return Err(SessionError::AlreadyResolved(id.to_string()));
        }
        match verdict {
            Verdict::Reject => {
                self.outcomes[index].status = OutcomeStatus::Rejected;
                Ok(())
            }
            Verdict::Accept => {
                let edited = match edited {
                    Some(text) => {
                        let mut stmt =
                            parse_statement(text).map_err(|e| SessionError::InvalidStatement(e.to_string()))?;
                        stmt.origin = Origin::Refinement;
                        Some(stmt)
                    }
                    None => None,
                };
                let mut trial = self.outcomes[index].clone();
                trial.edited_statement = edited.clone();
                let mut queued: Vec<OutcomeItem> = self
                    .outcomes
                    .iter()
                    .filter(|o| o.status == OutcomeStatus::Accepted && !o.folded)
                    .cloned()
                    .collect();
                queued.push(trial);
                let (spec, _) = self.folded_spec(&queued);
                bind_spec(&spec, &self.kb).map_err(|e| SessionError::InvalidStatement(e.to_string()))?;

                let item = &mut self.outcomes[index];
                item.status = OutcomeStatus::Accepted;
                item.edited_statement = edited;
                if self.phase == Phase::Specification {
                    self.fold(&[index])?;
                }
                Ok(())
            }
        }
    }

    /// The specification after folding `items` in order: requirement
    /// re-proposals replace the original statement, everything else is
    /// appended unless an identical statement is already present.
    fn folded_spec(&self, items: &[OutcomeItem]) -> (ArchSpec, bool) {
        let mut spec = self.spec.spec.clone();
        let mut changed = false;
        for item in items {
            let replaces = match &item.payload {
                OutcomePayload::Issue(Issue { detail: IssueDetail::QrViolation { requirement, .. }, .. }) => {
                    Some(requirement.clone())
                }
                _ => None,
            };
            for stmt in item.effective_statements() {
                let stmt = SpecStatement { origin: Origin::Refinement, ..stmt };
                let original =
                    replaces.as_ref().and_then(|r| spec.statements.iter().position(|s| s.body == Statement::Quality(r.clone())));
                match original {
                    Some(pos) => {
                        if spec.statements[pos].body != stmt.body {
                            spec.statements[pos] = stmt;
                            changed = true;
                        }
                    }
                    None if !spec.statements.iter().any(|s| s.body == stmt.body) => {
                        spec.statements.push(stmt);
                        changed = true;
                    }
                    None => {}
                }
            }
        }
        (spec, changed)
    }

    fn fold(&mut self, indices: &[usize]) -> Result<(), SessionError> {
        let items: Vec<OutcomeItem> = indices.iter().map(|&i| self.outcomes[i].clone()).collect();
        let (spec, changed) = self.folded_spec(&items);
        if changed {
            self.spec = bind_spec(&spec, &self.kb).map_err(|e| SessionError::InvalidStatement(e.to_string()))?;
            self.spec_text = serialize_spec(&spec);
        }
        for &i in indices {
            self.outcomes[i].folded = true;
        }
        Ok(())
    }

    fn materialize_outcomes(&mut self) {
        let report = self.analysis();
        let mut fresh: Vec<(OutcomeKind, String, OutcomePayload, Vec<SpecStatement>)> = Vec::new();
        for issue in report.issues {
            let kind = match issue.detail {
                IssueDetail::Incompatibility { .. } => OutcomeKind::Incompatibility,
                IssueDetail::UnresolvedDependency { .. } => OutcomeKind::Dependency,
                IssueDetail::QrViolation { .. } => OutcomeKind::QrViolation,
            };
            let statements = self.translate(&issue);
            fresh.push((kind, issue.message.clone(), OutcomePayload::Issue(issue), statements));
        }
        for s in report.suggestions {
            let message = format!(
                "most committed decisions favour {}; consider a requirement on it",
                self.kb.attribute_name(&s.attribute)
            );
            let statements = vec![s.proposed_statement.clone()];
            fresh.push((OutcomeKind::Suggestion, message, OutcomePayload::Suggestion(s), statements));
        }
        for (kind, message, payload, proposed_statements) in fresh {
            if self.outcomes.iter().any(|o| o.same_proposal(kind, &message, &proposed_statements)) {
                continue;
            }
            self.outcomes.push(OutcomeItem {
                id: format!("o{}", self.outcomes.len() + 1),
                kind,
                iteration: self.iteration,
                message,
                payload,
                proposed_statements,
                edited_statement: None,
                status: OutcomeStatus::Pending,
                folded: false,
            });
        }
    }

    fn committed_later(&self, a: &DecisionId, b: &DecisionId) -> bool {
        let pos = |d: &DecisionId| self.commit_order.iter().position(|x| x == d);
        pos(a) > pos(b)
    }

    fn exclusion(&self, element: &ElementId) -> Option<SpecStatement> {
        let e = self.kb.element(element)?;
        let body = Statement::Property(PropertyConstraint {
            property: self.kb.kind_name(&e.kind),
            comparator: crate::speclang::Comparator::Excludes,
            values: vec![e.id.to_string()],
        });
        Some(SpecStatement::canonical(body, Origin::Refinement))
    }

    /// Translates an issue into the statements that would prevent it.
    fn translate(&self, issue: &Issue) -> Vec<SpecStatement> {
        let element_of = |d: &DecisionId| self.kb.decision(d).and_then(|d| d.selects.clone());
        let out: Vec<SpecStatement> = match &issue.detail {
            IssueDetail::Incompatibility { a, b: Party::Decision(b), cause } => {
                let (loser, winner) = if self.committed_later(a, b) { (a, b) } else { (b, a) };
                let target = match cause {
                    IncompatibilityCause::SlotConflict { .. } => element_of(loser),
                    _ => element_of(loser).or_else(|| element_of(winner)),
                };
                target.and_then(|e| self.exclusion(&e)).into_iter().collect()
            }
            IssueDetail::Incompatibility { a, cause: IncompatibilityCause::DependencyViolated { dependency }, .. } => self
                .kb
                .decision(a)
                .and_then(|d| d.dependencies.get(*dependency))
                .and_then(|dep| dep.predicate.clone())
                .map(|p| SpecStatement::canonical(Statement::Property(p), Origin::Refinement))
                .into_iter()
                .collect(),
            IssueDetail::Incompatibility { .. } => Vec::new(),
            IssueDetail::UnresolvedDependency { owner, kind, .. } => {
                let mut out = vec![SpecStatement::canonical(
                    Statement::Use { kind: self.kb.kind_name(kind) },
                    Origin::Refinement,
                )];
                if let crate::analysis::DependencyOwner::Decision(d) = owner {
                    let predicates = self
                        .kb
                        .decision(d)
                        .into_iter()
                        .flat_map(|d| d.dependencies.iter())
                        .filter(|dep| &dep.kind == kind)
                        .filter_map(|dep| dep.predicate.clone());
                    out.extend(predicates.map(|p| SpecStatement::canonical(Statement::Property(p), Origin::Refinement)));
                }
                out
            }
            IssueDetail::QrViolation { requirement, .. } => {
                vec![SpecStatement::canonical(Statement::Quality(requirement.clone()), Origin::Refinement)]
            }
        };
        out.into_iter().filter(|s| !self.already_stated(&s.body) || matches!(s.body, Statement::Quality(_))).collect()
    }

    fn already_stated(&self, body: &Statement) -> bool {
        match body {
            Statement::Use { kind } => self.spec.statements.iter().any(|s| match (s, self.kb.find_kind(kind)) {
                (BoundStatement::Use { kind: k }, Ok(Some(found))) => *k == found.id,
                _ => false,
            }),
            _ => self.spec.spec.bodies().any(|b| b == body),
        }
    }

    // -----------------------------------------------------------------------
    // Persistence and reporting

    pub fn to_document(&self) -> SessionDocument {
        SessionDocument {
            id: self.id.clone(),
            kb_version: self.kb.version.clone(),
            initial_spec_text: self.initial_spec_text.clone(),
            spec_text: self.spec_text.clone(),
            weights: self.weights,
            threshold: self.threshold.value(),
            iteration: self.iteration,
            phase: self.phase,
            ended: self.ended,
            log: serde_json::to_value(&self.log).expect("log serializes"),
            outcomes: serde_json::to_value(&self.outcomes).expect("outcomes serialize"),
            events: self.events.clone(),
        }
    }

    pub fn save(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("session documents serialize")
    }

    /// Restores a saved session by replaying its events, then checks that
    /// the stored state agrees with the replay.
    pub fn load(document: &str, kb: Arc<KnowledgeBase>) -> Result<Self, SessionError> {
        let doc: SessionDocument = serde_json::from_str(document).map_err(|e| SessionError::Schema(e.to_string()))?;
        if doc.kb_version != kb.version {
            return Err(SessionError::VersionMismatch { expected: kb.version.clone(), found: doc.kb_version });
        }
        let threshold = Threshold::new(doc.threshold).map_err(SessionError::Schema)?;
        doc.weights.validate().map_err(|e| SessionError::Schema(e.to_string()))?;
        let session = Session::replay(&doc.id, kb, &doc.initial_spec_text, doc.weights, threshold, &doc.events)
            .map_err(|e| SessionError::Schema(format!("event log does not replay: {e}")))?;
        let replayed = session.to_document();
        let mismatch = [
            ("spec_text", replayed.spec_text == doc.spec_text),
            ("iteration", replayed.iteration == doc.iteration),
            ("phase", replayed.phase == doc.phase),
            ("ended", replayed.ended == doc.ended),
            ("log", replayed.log == doc.log),
            ("outcomes", replayed.outcomes == doc.outcomes),
        ]
        .into_iter()
        .find(|(_, ok)| !ok);
        if let Some((field, _)) = mismatch {
            return Err(SessionError::Schema(format!("field {field} disagrees with the event log")));
        }
        Ok(session)
    }

    pub fn final_report(&self) -> ReportDocument {
        let decisions = self
            .commit_order
            .iter()
            .map(|id| {
                let entry = self.log.iter().rev().find(|e| &e.decision == id && e.action != LogAction::Retracted);
                ReportDecision {
                    decision: id.clone(),
                    display_name: self.kb.decision_name(id),
                    action: entry.map_or(LogAction::Committed, |e| e.action),
                    iteration: entry.map_or(self.iteration, |e| e.iteration),
                    override_note: entry.and_then(|e| e.override_note.clone()),
                    rationale: self.commit_rationale.get(id).cloned().unwrap_or_default(),
                }
            })
            .collect();
        let mut history = self.history.clone();
        history.push(IterationRecord {
            iteration: self.iteration,
            spec_text: self.spec_text.clone(),
            committed: self.commit_order.clone(),
        });
        ReportDocument {
            session: self.id.clone(),
            kb_version: self.kb.version.clone(),
            iteration: self.iteration,
            phase: self.phase,
            ended: self.ended,
            spec_text: self.spec_text.clone(),
            decisions,
            log: self.log.clone(),
            analysis: self.analysis(),
            history,
            outcomes: self.outcomes.clone(),
        }
    }
}

/// Serialized session. `log` and `outcomes` are derived data kept for
/// readers; `events` is authoritative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionDocument {
    pub id: String,
    pub kb_version: String,
    pub initial_spec_text: String,
    pub spec_text: String,
    pub weights: ScoreWeights,
    pub threshold: f64,
    pub iteration: u32,
    pub phase: Phase,
    pub ended: bool,
    pub log: serde_json::Value,
    pub outcomes: serde_json::Value,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportDecision {
    pub decision: DecisionId,
    pub display_name: String,
    pub action: LogAction,
    pub iteration: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub override_note: Option<String>,
    pub rationale: Rationale,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportDocument {
    pub session: String,
    pub kb_version: String,
    pub iteration: u32,
    pub phase: Phase,
    pub ended: bool,
    pub spec_text: String,
    pub decisions: Vec<ReportDecision>,
    pub log: Vec<DecisionLogEntry>,
    pub analysis: AnalysisReport,
    pub history: Vec<IterationRecord>,
    pub outcomes: Vec<OutcomeItem>,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let status = if self.ended { "ended" } else { self.phase.as_str() };
        let _ = writeln!(md, "# Session {}\n", self.session);
        let _ = writeln!(md, "- knowledge base: {}", self.kb_version);
        let _ = writeln!(md, "- iteration: {}", self.iteration);
        let _ = writeln!(md, "- status: {status}\n");

        let _ = writeln!(md, "## Specification\n");
        let _ = writeln!(md, "```text\n{}```\n", with_newline(&self.spec_text));

        let _ = writeln!(md, "## Decisions\n");
        if self.decisions.is_empty() {
            let _ = writeln!(md, "No decisions committed.\n");
        }
        for (i, d) in self.decisions.iter().enumerate() {
            let _ = writeln!(md, "### {}. {} (`{}`)\n", i + 1, d.display_name, d.decision);
            let _ = writeln!(md, "- {} in iteration {}", action_name(d.action), d.iteration);
            if let Some(note) = &d.override_note {
                let _ = writeln!(md, "- override note: {note}");
            }
            let r = &d.rationale;
            for c in &r.offered_because {
                let _ = writeln!(md, "- offered because {}", c.text);
            }
            for c in &r.impact_summary {
                let _ = writeln!(md, "- impact: {}", c.text);
            }
            for c in &r.obligations {
                let _ = writeln!(md, "- obligation: {}", c.text);
            }
            for c in &r.constraint_findings {
                let _ = writeln!(md, "- finding: {}", c.text);
            }
            md.push('\n');
        }

        let _ = writeln!(md, "## Decision log\n");
        if self.log.is_empty() {
            let _ = writeln!(md, "Empty.\n");
        } else {
            let _ = writeln!(md, "| iteration | decision | action | note |\n|---|---|---|---|");
            for e in &self.log {
                let note = e.override_note.as_deref().unwrap_or("");
                let _ = writeln!(md, "| {} | {} | {} | {} |", e.iteration, e.decision, action_name(e.action), note);
            }
            md.push('\n');
        }

        let _ = writeln!(md, "## Quality evaluation\n");
        if self.analysis.evaluations.is_empty() {
            let _ = writeln!(md, "No attribute is affected.\n");
        } else {
            let _ = writeln!(md, "| attribute | predicted | aggregate valence | contributing |\n|---|---|---|---|");
            for e in &self.analysis.evaluations {
                let contributing: Vec<String> = e
                    .contributing
                    .iter()
                    .map(|c| format!("{} ({:+}, {})", c.decision, c.impact.valence, c.impact.certainty.as_str()))
                    .collect();
                let _ = writeln!(md, "| {} | {} | {:+} | {} |", e.attribute, e.predicted, e.aggregate_valence, contributing.join(", "));
            }
            md.push('\n');
        }

        let _ = writeln!(md, "## Issues\n");
        if self.analysis.issues.is_empty() {
            let _ = writeln!(md, "None.\n");
        } else {
            for i in &self.analysis.issues {
                let sev = serde_json::to_value(i.severity()).ok().and_then(|v| v.as_str().map(str::to_string));
                let _ = writeln!(md, "- [{}] {}: {}", sev.unwrap_or_default(), i.kind_token(), i.message);
            }
            md.push('\n');
        }
        if !self.analysis.suggestions.is_empty() {
            let _ = writeln!(md, "## Suggestions\n");
            for s in &self.analysis.suggestions {
                let _ = writeln!(md, "- {}", render_statement(&s.proposed_statement.body));
            }
            md.push('\n');
        }

        let _ = writeln!(md, "## Outcomes\n");
        if self.outcomes.is_empty() {
            let _ = writeln!(md, "None.\n");
        } else {
            for o in &self.outcomes {
                let stmts: Vec<String> = o.effective_statements().iter().map(|s| render_statement(&s.body)).collect();
                let status = serde_json::to_value(o.status).ok().and_then(|v| v.as_str().map(str::to_string));
                let _ = write!(md, "- {} [{}] {}: {}", o.id, status.unwrap_or_default(), o.kind.as_str(), o.message);
                if !stmts.is_empty() {
                    let _ = write!(md, " => `{}`", stmts.join("`, `"));
                }
                md.push('\n');
            }
            md.push('\n');
        }

        let _ = writeln!(md, "## History\n");
        for h in &self.history {
            let committed: Vec<&str> = h.committed.iter().map(DecisionId::as_str).collect();
            let _ = writeln!(md, "### Iteration {}\n", h.iteration);
            let _ = writeln!(md, "committed: {}\n", if committed.is_empty() { "none".to_string() } else { committed.join(", ") });
            let _ = writeln!(md, "```text\n{}```\n", with_newline(&h.spec_text));
        }
        md
    }
}

fn with_newline(text: &str) -> String {
    if text.is_empty() || text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    }
}

fn action_name(a: LogAction) -> &'static str {
    match a {
        LogAction::Committed => "committed",
        LogAction::Retracted => "retracted",
        LogAction::Overridden => "overridden",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::load_kb;

    const SPEC: &str = include_str!("../../../fixtures/example_spec.qk");

    fn kb() -> Arc<KnowledgeBase> {
        Arc::new(load_kb(include_str!("../../../fixtures/example_kb.json")).unwrap())
    }

    fn session(spec: &str) -> Session {
        Session::new("s1", kb(), spec, ScoreWeights::default(), Threshold::default()).unwrap()
    }

    fn to_decision_making(s: &mut Session) {
        s.advance().unwrap();
        s.advance().unwrap();
        assert_eq!(s.phase(), Phase::DecisionMaking);
    }

    #[test]
    fn creation() {
        let s = session(SPEC);
        assert_eq!((s.iteration(), s.phase(), s.spec().spec.len()), (1, Phase::Specification, 4));
        assert!(session("").spec().spec.is_empty());
        assert!(matches!(
            Session::new("x", kb(), "use Blockchain", ScoreWeights::default(), Threshold::default()),
            Err(SessionError::Bind(_))
        ));
    }

    #[test]
    fn phases_cycle() {
        let mut s = session(SPEC);
        let got: Vec<Phase> = (0..4).map(|_| s.advance().unwrap()).collect();
        assert_eq!(got, [Phase::Inference, Phase::DecisionMaking, Phase::Refinement, Phase::Specification]);
        assert_eq!(s.iteration(), 2);
    }

    #[test]
    fn commit_and_override() {
        let mut s = session(SPEC);
        assert!(matches!(s.commit("decide_mysql", None), Err(SessionError::Phase { .. })));
        to_decision_making(&mut s);
        assert_eq!(s.candidates()[0].decision.as_str(), "decide_mysql");
        assert!(matches!(s.commit("decide_postgresql", None), Err(SessionError::OverrideNoteRequired { .. })));
        assert!(matches!(s.commit("decide_postgresql", Some("  ")), Err(SessionError::OverrideNoteRequired { .. })));
        let r = s.commit("decide_postgresql", Some("team familiarity")).unwrap();
        assert_eq!(r.entry.action, LogAction::Overridden);
        assert_eq!(r.entry.override_note.as_deref(), Some("team familiarity"));
        assert!(matches!(s.commit("decide_postgresql", None), Err(SessionError::AlreadyCommitted(_))));
        assert!(matches!(s.commit("nope", None), Err(SessionError::UnknownDecision(_))));

        let mut t = session(SPEC);
        to_decision_making(&mut t);
        assert_eq!(t.commit("decide_mysql", None).unwrap().entry.action, LogAction::Committed);
    }

    #[test]
    fn commits_report_but_never_block_conflicts() {
        let mut s = session("");
        to_decision_making(&mut s);
        s.commit("decide_mysql", None).unwrap();
        let r = s.commit("decide_postgresql", None).unwrap();
        assert_eq!(r.introduced_issues.len(), 1);
        assert_eq!(s.config().len(), 2);
    }

    #[test]
    fn retract() {
        let mut s = session(SPEC);
        to_decision_making(&mut s);
        s.commit("decide_mysql", None).unwrap();
        s.retract("decide_mysql").unwrap();
        assert!(s.config().is_empty());
        assert_eq!(s.log().last().unwrap().action, LogAction::Retracted);
        assert!(matches!(s.retract("decide_mysql"), Err(SessionError::NotCommitted(_))));
        assert_eq!(s.candidates()[0].decision.as_str(), "decide_mysql");
    }

    #[test]
    fn qr_violation_becomes_an_outcome_and_can_be_softened() {
        let mut s = session(SPEC);
        to_decision_making(&mut s);
        s.commit("decide_mysql", None).unwrap();
        s.advance().unwrap();
        assert_eq!(s.outcomes().len(), 1);
        let o = &s.outcomes()[0];
        assert_eq!((o.id.as_str(), o.kind, o.status), ("o1", OutcomeKind::QrViolation, OutcomeStatus::Pending));
        s.resolve_outcome("o1", Verdict::Accept, Some("\"Reliability\" at least \"average\"")).unwrap();
        assert!(matches!(s.resolve_outcome("o1", Verdict::Reject, None), Err(SessionError::AlreadyResolved(_))));
        s.advance().unwrap();
        assert_eq!(s.iteration(), 2);
        assert!(s.spec_text().contains("\"Reliability\" at least \"average\"\n"));
        assert!(!s.spec_text().contains("greater than"));
        assert_eq!(s.spec().spec.len(), 4);
        assert_eq!(s.history()[0].spec_text, SPEC);
    }

    #[test]
    fn rejected_outcomes_leave_the_spec_alone() {
        let mut s = session(SPEC);
        to_decision_making(&mut s);
        s.commit("decide_mysql", None).unwrap();
        s.advance().unwrap();
        s.resolve_outcome("o1", Verdict::Reject, None).unwrap();
        s.advance().unwrap();
        assert_eq!(s.spec_text(), SPEC);
    }

    #[test]
    fn identical_outcomes_are_not_proposed_twice() {
        let mut s = session(SPEC);
        to_decision_making(&mut s);
        s.commit("decide_mysql", None).unwrap();
        s.advance().unwrap();
        s.resolve_outcome("o1", Verdict::Reject, None).unwrap();
        for _ in 0..3 {
            s.advance().unwrap();
        }
        s.advance().unwrap();
        assert_eq!(s.phase(), Phase::Refinement);
        assert_eq!(s.outcomes().len(), 1);
    }

    #[test]
    fn dependency_outcomes_fold_into_use_statements() {
        let mut s = session("");
        to_decision_making(&mut s);
        s.commit("decide_soa", None).unwrap();
        s.commit("decide_rest", None).unwrap();
        s.advance().unwrap();
        let dep = s.outcomes().iter().find(|o| o.kind == OutcomeKind::Dependency).unwrap().id.clone();
        s.resolve_outcome(&dep, Verdict::Accept, None).unwrap();
        s.advance().unwrap();
        assert_eq!(s.spec_text(), "use \"Service granularity\"\n");
        assert_eq!(s.spec().spec.statements[0].origin, Origin::Refinement);
    }

    #[test]
    fn slot_conflicts_exclude_the_later_commit() {
        let mut s = session("");
        to_decision_making(&mut s);
        s.commit("decide_postgresql", None).unwrap();
        s.commit("decide_mysql", None).unwrap();
        s.advance().unwrap();
        let o = &s.outcomes()[0];
        assert_eq!(o.kind, OutcomeKind::Incompatibility);
        assert_eq!(render_statement(&o.proposed_statements[0].body), "\"DBMS\" excludes {\"mysql5\"}");
    }

    #[test]
    fn invalid_edits_are_refused() {
        let mut s = session(SPEC);
        to_decision_making(&mut s);
        s.commit("decide_mysql", None).unwrap();
        s.advance().unwrap();
        assert!(matches!(s.resolve_outcome("o1", Verdict::Accept, Some("use")), Err(SessionError::InvalidStatement(_))));
        assert!(matches!(
            s.resolve_outcome("o1", Verdict::Accept, Some("use Blockchain")),
            Err(SessionError::InvalidStatement(_))
        ));
        assert!(matches!(s.resolve_outcome("o9", Verdict::Accept, None), Err(SessionError::UnknownOutcome(_))));
        assert_eq!(s.outcomes()[0].status, OutcomeStatus::Pending);
    }

    #[test]
    fn ending() {
        let mut s = session(SPEC);
        assert!(matches!(s.end(), Err(SessionError::Phase { .. })));
        to_decision_making(&mut s);
        s.commit("decide_mysql", None).unwrap();
        s.commit("decide_postgresql", Some("both, for now")).unwrap();
        s.advance().unwrap();
        s.end().unwrap();
        assert!(matches!(s.advance(), Err(SessionError::Ended)));
        let report = s.final_report();
        assert!(report.ended);
        assert!(report.to_markdown().contains("both, for now"));
    }

    #[test]
    fn spec_updates_only_in_specification() {
        let mut s = session(SPEC);
        s.update_spec("use DBMS").unwrap();
        assert_eq!(s.spec().spec.len(), 1);
        assert!(matches!(s.update_spec("use"), Err(SessionError::Parse(_))));
        s.advance().unwrap();
        assert!(matches!(s.update_spec("use DBMS"), Err(SessionError::Phase { .. })));
    }

    #[test]
    fn save_and_load() {
        let mut s = session(SPEC);
        to_decision_making(&mut s);
        s.commit("decide_postgresql", Some("familiar")).unwrap();
        s.commit("decide_mysql", None).unwrap();
        s.advance().unwrap();
        s.resolve_outcome("o1", Verdict::Accept, None).unwrap();
        s.advance().unwrap();
        let text = s.save();
        let back = Session::load(&text, kb()).unwrap();
        assert_eq!(back.save(), text);
        assert_eq!(back.final_report(), s.final_report());

        let other_doc = include_str!("../../../fixtures/example_kb.json").replace("dbms-example-1", "other");
        let other = Arc::new(load_kb(&other_doc).unwrap());
        assert!(matches!(Session::load(&text, other), Err(SessionError::VersionMismatch { .. })));
        assert!(matches!(Session::load(&text[..text.len() / 2], kb()), Err(SessionError::Schema(_))));
        let tampered = text.replace("\"iteration\": 1", "\"iteration\": 3");
        assert!(matches!(Session::load(&tampered, kb()), Err(SessionError::Schema(_))));
    }

    #[test]
    fn versions_count_events() {
        let mut s = session(SPEC);
        assert_eq!(s.version(), 0);
        s.advance().unwrap();
        let _ = s.commit("decide_mysql", None);
        assert_eq!(s.version(), 1);
        s.advance().unwrap();
        s.commit("decide_mysql", None).unwrap();
        assert_eq!(s.version(), 3);
        assert_eq!(s.events()[2], Event::Commit { decision: "decide_mysql".into(), override_note: None });
    }

    #[test]
    fn what_if_does_not_commit() {
        let mut s = session(SPEC);
        to_decision_making(&mut s);
        let w = s.what_if("decide_sqlserver").unwrap();
        assert_eq!(w.score.total, -2);
        assert!(w.rationale.constraint_findings.iter().any(|f| f.property == "License"
            && f.verdict == crate::speclang::ConstraintVerdict::Violated));
        assert!(s.config().is_empty());
        assert_eq!(s.version(), 2);
    }
}
