//! Line-oriented session scripts.
//!
//! ```text
//! kb example_kb.json
//! spec example_spec.qk
//! advance
//! expect-rank decide_mysql 1
//! commit decide_postgresql the team already runs it
//! accept o1 "Reliability" at least "average"
//! expect-issue qr_violation 0
//! ```
//!
//! Paths are relative to the script. `commit` takes the rest of the line as
//! the override note and `accept` takes it as a replacement statement.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use quark_core::analysis::predict;
use quark_core::session::{OutcomeStatus, Verdict};
use quark_core::speclang::OrdinalLevel;
use quark_core::{KnowledgeBase, Phase, Session, SessionError};
use serde::Serialize;

use crate::{read, read_kb, Failure, Format, Options};

#[derive(Debug, Clone, PartialEq)]
enum Step {
    Kb(PathBuf),
    Spec(PathBuf),
    UpdateSpec(PathBuf),
    Advance,
    Commit { decision: String, note: Option<String> },
    Retract(String),
    Accept { outcome: String, edit: Option<String> },
    Reject(String),
    End,
    ExpectRank { decision: String, rank: usize },
    ExpectIssue { kind: String, count: Option<usize> },
    ExpectOutcome { kind: String, count: usize },
    ExpectLevel { attribute: String, level: OrdinalLevel },
    ExpectPhase(Phase),
    ExpectIteration(u32),
    ExpectSpec(String),
}

const ISSUE_KINDS: [&str; 3] = ["incompatibility", "dependency", "qr_violation"];
const OUTCOME_KINDS: [&str; 4] = ["incompatibility", "dependency", "qr_violation", "suggestion"];

fn rest_of_line(rest: &str) -> Option<String> {
    let rest = rest.trim();
    (!rest.is_empty()).then(|| rest.to_string())
}

fn split_word(text: &str) -> (&str, &str) {
    let text = text.trim();
    match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim_start()),
        None => (text, ""),
    }
}

fn parse_line(line: &str, base: &Path) -> Result<Option<Step>, String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (command, rest) = split_word(line);
    let args = || shlex::split(rest).ok_or_else(|| "unbalanced quotes".to_string());
    let exactly = |n: usize| -> Result<Vec<String>, String> {
        let a = args()?;
        if a.len() == n {
            Ok(a)
        } else {
            Err(format!("{command} takes {n} argument(s), got {}", a.len()))
        }
    };
    let number = |s: &str| s.parse::<usize>().map_err(|_| format!("{s:?} is not a count"));
    let kind_in = |k: &str, allowed: &[&str]| {
        if allowed.contains(&k) {
            Ok(k.to_string())
        } else {
            Err(format!("unknown kind {k:?}, expected one of {}", allowed.join(", ")))
        }
    };

    let step = match command {
        "kb" => Step::Kb(base.join(&exactly(1)?[0])),
        "spec" => Step::Spec(base.join(&exactly(1)?[0])),
        "update-spec" => Step::UpdateSpec(base.join(&exactly(1)?[0])),
        "advance" => {
            exactly(0)?;
            Step::Advance
        }
        "end" => {
            exactly(0)?;
            Step::End
        }
        "commit" => {
            let (decision, note) = split_word(rest);
            if decision.is_empty() {
                return Err("commit needs a decision id".into());
            }
            Step::Commit { decision: decision.to_string(), note: rest_of_line(note) }
        }
        "retract" => Step::Retract(exactly(1)?.remove(0)),
        "accept" => {
            let (outcome, edit) = split_word(rest);
            if outcome.is_empty() {
                return Err("accept needs an outcome id".into());
            }
            Step::Accept { outcome: outcome.to_string(), edit: rest_of_line(edit) }
        }
        "reject" => Step::Reject(exactly(1)?.remove(0)),
        "expect-rank" => {
            let a = exactly(2)?;
            Step::ExpectRank { decision: a[0].clone(), rank: number(&a[1])? }
        }
        "expect-issue" => {
            let a = args()?;
            match a.as_slice() {
                [k] => Step::ExpectIssue { kind: kind_in(k, &ISSUE_KINDS)?, count: None },
                [k, n] => Step::ExpectIssue { kind: kind_in(k, &ISSUE_KINDS)?, count: Some(number(n)?) },
                _ => return Err("expect-issue takes a kind and an optional count".into()),
            }
        }
        "expect-outcome" => {
            let a = exactly(2)?;
            Step::ExpectOutcome { kind: kind_in(&a[0], &OUTCOME_KINDS)?, count: number(&a[1])? }
        }
        "expect-level" => {
            let a = exactly(2)?;
            let level = OrdinalLevel::parse(&a[1]).ok_or_else(|| format!("{:?} is not a level", a[1]))?;
            Step::ExpectLevel { attribute: a[0].clone(), level }
        }
        "expect-phase" => {
            let a = exactly(1)?;
            Step::ExpectPhase(Phase::parse(&a[0]).ok_or_else(|| format!("{:?} is not a phase", a[0]))?)
        }
        "expect-iteration" => {
            let a = exactly(1)?;
            Step::ExpectIteration(a[0].parse().map_err(|_| format!("{:?} is not an iteration", a[0]))?)
        }
        "expect-spec" => Step::ExpectSpec(rest_of_line(rest).ok_or("expect-spec needs a statement")?),
        other => return Err(format!("unknown command {other:?}")),
    };
    Ok(Some(step))
}

fn parse_script(text: &str, path: &Path) -> Result<Vec<(usize, String, Step)>, Failure> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut steps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match parse_line(line, base) {
            Ok(Some(step)) => steps.push((i + 1, line.trim().to_string(), step)),
            Ok(None) => {}
            Err(e) => return Err(Failure::Spec(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(steps)
}

#[derive(Debug, Serialize)]
struct StepRecord {
    line: usize,
    command: String,
    result: String,
}

struct Runner<'o> {
    opts: &'o Options,
    kb: Option<Arc<KnowledgeBase>>,
    spec_text: String,
    session: Option<Session>,
}

fn session_failure(e: SessionError) -> String {
    e.to_string()
}

impl Runner<'_> {
    fn session(&mut self) -> Result<&mut Session, String> {
        if self.session.is_none() {
            let kb = self.kb.clone().ok_or("no knowledge base loaded; start the script with `kb <path>`")?;
            let s = Session::new("script", kb, &self.spec_text, self.opts.weights, self.opts.threshold)
                .map_err(session_failure)?;
            self.session = Some(s);
        }
        Ok(self.session.as_mut().expect("just created"))
    }

    fn step(&mut self, step: &Step) -> Result<String, Failure> {
        let script = Failure::Script;
        match step {
            Step::Kb(path) => {
                if self.session.is_some() {
                    return Err(script("kb must come before the first session step".into()));
                }
                let kb = read_kb(path)?;
                let msg = format!("loaded knowledge base {}", kb.version);
                self.kb = Some(kb);
                Ok(msg)
            }
            Step::Spec(path) => {
                if self.session.is_some() {
                    return Err(script("spec must come before the first session step; use update-spec".into()));
                }
                self.spec_text = read(path)?;
                let kb = self.kb.clone().ok_or_else(|| script("spec needs a knowledge base".into()))?;
                let spec = quark_core::parse_spec(&self.spec_text).map_err(|e| Failure::parse(path, &e))?;
                let bound = quark_core::bind_spec(&spec, &kb).map_err(|e| Failure::bind(path, &e))?;
                Ok(format!("specification with {} statements", bound.statements.len()))
            }
            Step::UpdateSpec(path) => {
                let text = read(path)?;
                self.session().map_err(script)?.update_spec(&text).map_err(|e| script(e.to_string()))?;
                Ok("specification updated".into())
            }
            _ => self.session_step(step).map_err(script),
        }
    }

    fn session_step(&mut self, step: &Step) -> Result<String, String> {
        let s = self.session()?;
        let expect = |ok: bool, why: String| if ok { Ok("as expected".to_string()) } else { Err(why) };
        match step {
            Step::Advance => {
                let phase = s.advance().map_err(session_failure)?;
                Ok(format!("now in {phase}, iteration {}", s.iteration()))
            }
            Step::Commit { decision, note } => {
                let r = s.commit(decision, note.as_deref()).map_err(session_failure)?;
                let mut msg = format!("{} {}", action(&r.entry.action), r.entry.decision);
                for i in &r.introduced_issues {
                    let _ = write!(msg, "; introduces: {}", i.message);
                }
                Ok(msg)
            }
            Step::Retract(d) => {
                s.retract(d).map_err(session_failure)?;
                Ok(format!("retracted {d}"))
            }
            Step::Accept { outcome, edit } => {
                let o = s.resolve_outcome(outcome, Verdict::Accept, edit.as_deref()).map_err(session_failure)?;
                Ok(format!("accepted {}: {}", o.id, o.message))
            }
            Step::Reject(o) => {
                let o = s.resolve_outcome(o, Verdict::Reject, None).map_err(session_failure)?;
                Ok(format!("rejected {}: {}", o.id, o.message))
            }
            Step::End => {
                s.end().map_err(session_failure)?;
                Ok("session ended".into())
            }
            Step::ExpectRank { decision, rank } => {
                let got = s.candidates().iter().find(|c| c.decision.as_str() == decision).map(|c| c.rank);
                expect(got == Some(*rank), format!("expected {decision} at rank {rank}, found {got:?}"))
            }
            Step::ExpectIssue { kind, count } => {
                let n = s.analysis().count(kind);
                match count {
                    Some(c) => expect(n == *c, format!("expected {c} {kind} issue(s), found {n}")),
                    None => expect(n > 0, format!("expected a {kind} issue, found none")),
                }
            }
            Step::ExpectOutcome { kind, count } => {
                let n = s
                    .outcomes()
                    .iter()
                    .filter(|o| o.kind.as_str() == kind && o.status == OutcomeStatus::Pending)
                    .count();
                expect(n == *count, format!("expected {count} pending {kind} outcome(s), found {n}"))
            }
            Step::ExpectLevel { attribute, level } => {
                let attr = s
                    .kb()
                    .find_attribute(attribute)
                    .map_err(|e| e.to_string())?
                    .ok_or_else(|| format!("{attribute:?} is not a quality attribute"))?;
                let got = predict(&attr.id, s.config(), s.kb()).predicted;
                expect(got == *level, format!("expected {attribute} to be {level}, predicted {got}"))
            }
            Step::ExpectPhase(p) => expect(s.phase() == *p, format!("expected phase {p}, in {}", s.phase())),
            Step::ExpectIteration(n) => {
                expect(s.iteration() == *n, format!("expected iteration {n}, in {}", s.iteration()))
            }
            Step::ExpectSpec(line) => {
                let text = quark_core::serialize_spec(&s.spec().spec);
                expect(text.lines().any(|l| l == line), format!("specification lacks {line}:\n{text}"))
            }
            Step::Kb(_) | Step::Spec(_) | Step::UpdateSpec(_) => unreachable!("handled by step"),
        }
    }
}

fn action(a: &quark_core::session::LogAction) -> &'static str {
    match a {
        quark_core::session::LogAction::Committed => "committed",
        quark_core::session::LogAction::Overridden => "overrode the ranking with",
        quark_core::session::LogAction::Retracted => "retracted",
    }
}

pub fn run(path: &Path, save: Option<&Path>, opts: &Options) -> Result<String, Failure> {
    let steps = parse_script(&read(path)?, path)?;
    let mut runner = Runner { opts, kb: None, spec_text: String::new(), session: None };
    let mut records = Vec::new();
    for (line, command, step) in &steps {
        let result = runner
            .step(step)
            .map_err(|f| match f {
                Failure::Script(m) => Failure::Script(format!("{}:{line}: {command}: {m}", path.display())),
                other => other,
            })?;
        records.push(StepRecord { line: *line, command: command.clone(), result });
    }
    let session = runner.session().map_err(Failure::Script)?;
    if let Some(p) = save {
        std::fs::write(p, session.save())
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
    }
    let report = session.final_report();
    Ok(match opts.format {
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "steps": records,
            "report": serde_json::from_str::<serde_json::Value>(&report.to_json()).expect("report is JSON"),
        }))
        .expect("output serializes"),
        Format::Text => {
            let mut out = String::new();
            for r in &records {
                let _ = writeln!(out, "{:>4}  {:<40}  {}", r.line, r.command, r.result);
            }
            let expectations = steps.iter().filter(|(_, _, s)| is_expectation(s)).count();
            let _ = writeln!(
                out,
                "\nscript passed: {} steps, {expectations} expectations; iteration {}, phase {}",
                records.len(),
                session.iteration(),
                session.phase()
            );
            out
        }
    })
}

fn is_expectation(step: &Step) -> bool {
    matches!(
        step,
        Step::ExpectRank { .. }
            | Step::ExpectIssue { .. }
            | Step::ExpectOutcome { .. }
            | Step::ExpectLevel { .. }
            | Step::ExpectPhase(_)
            | Step::ExpectIteration(_)
            | Step::ExpectSpec(_)
    )
}
