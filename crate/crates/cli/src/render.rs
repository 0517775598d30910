//! Human-readable renderings. Each has a JSON twin in `main`.

use std::fmt::Write;

use quark_core::inference::AnnealOutcome;
use quark_core::speclang::{describe_statement, render_statement, ArchSpec, BoundSpec};
use quark_core::{AnalysisReport, CandidateDecision, Configuration, KnowledgeBase, ScoreBreakdown};

fn breakdown(s: &ScoreBreakdown) -> String {
    format!(
        "{:>5}  {:>3}  {:>3}  {:>3}  {:>3}  {:>6}  {:>6}",
        s.total, s.satisfied_count, s.violated_count, s.unknown_count, s.qr_met_count, s.compat_count, s.introduced_issues
    )
}

pub fn candidates(cands: &[CandidateDecision], config: &Configuration, search: &AnnealOutcome, seed: u64) -> String {
    let mut out = String::new();
    if !config.is_empty() {
        let _ = writeln!(out, "given {config}");
    }
    if cands.is_empty() {
        out.push_str("no candidate decisions\n");
    } else {
        let width = cands.iter().map(|c| c.decision.as_str().len()).max().unwrap_or(0).max(8);
        let _ = writeln!(out, "rank  {:<width$}  total  sat  vio  unk   qr  compat  issues", "decision");
        for c in cands {
            let _ = writeln!(out, "{:>4}  {:<width$}  {}", c.rank, c.decision.as_str(), breakdown(&c.score));
            for clause in c.rationale.clauses() {
                let _ = writeln!(out, "      - {clause}");
            }
        }
    }
    let _ = writeln!(out, "\nbest configuration (seed {seed}): {} total {}", search.configuration, search.score.total);
    out
}

pub fn analysis(report: &AnalysisReport, config: &Configuration, kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "configuration {config}");
    let _ = writeln!(out, "\nissues ({}):", report.issues.len());
    for i in &report.issues {
        let severity = match i.severity() {
            quark_core::Severity::Error => "error",
            quark_core::Severity::Warning => "warning",
        };
        let _ = writeln!(out, "  {severity:<7}  {:<15}  {}", i.kind_token(), i.message);
    }
    let _ = writeln!(out, "\nsuggestions ({}):", report.suggestions.len());
    for s in &report.suggestions {
        let by: Vec<&str> = s.supporting_decisions.iter().map(|d| d.as_str()).collect();
        let _ = writeln!(out, "  {}  (supported by {})", render_statement(&s.proposed_statement.body), by.join(", "));
    }
    let _ = writeln!(out, "\nquality:");
    for e in &report.evaluations {
        let _ = writeln!(
            out,
            "  {:<16} predicted {} (valence {:+})",
            kb.attribute_name(&e.attribute),
            e.predicted,
            e.aggregate_valence
        );
    }
    out
}

pub fn spec(spec: &ArchSpec, bound: Option<&BoundSpec>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} statements", spec.len());
    for (i, s) in spec.statements.iter().enumerate() {
        let _ = writeln!(out, "{:>3}  {}", i + 1, render_statement(&s.body));
        let _ = writeln!(out, "     {}", describe_statement(&s.body));
    }
    if let Some(b) = bound {
        let _ = writeln!(out, "binds with {} warning(s)", b.warnings.len());
        for w in &b.warnings {
            let _ = writeln!(out, "  statement {}: {}", w.statement + 1, w.message);
        }
    }
    out
}
