use super::{ArchSpec, PropertyConstraint, Statement};

const KEYWORDS: [&str; 11] =
    ["use", "equal", "not", "includes", "excludes", "greater", "less", "than", "at", "least", "most"];

/// Canonical surface syntax, one statement per line.
pub fn serialize_spec(spec: &ArchSpec) -> String {
    spec.statements.iter().map(|s| render_statement(&s.body) + "\n").collect()
}

pub fn render_statement(stmt: &Statement) -> String {
    match stmt {
        Statement::Use { kind } => {
            if is_bare(kind) {
                format!("use {kind}")
            } else {
                format!("use {}", quote(kind))
            }
        }
        Statement::Property(p) => {
            let rhs = if p.comparator.is_set() {
                format!("{{{}}}", p.values.iter().map(|v| quote(v)).collect::<Vec<_>>().join(", "))
            } else {
                quote(&p.values[0])
            };
            format!("{} {} {}", quote(&p.property), p.comparator.keyword(), rhs)
        }
        Statement::Quality(q) => format!("{} {} {}", quote(&q.attribute), q.comparator.keyword(), quote(q.level.name())),
    }
}

/// Unquoted rendering for prose, e.g. `License includes {GPL, BSD}`.
pub fn describe_statement(stmt: &Statement) -> String {
    match stmt {
        Statement::Use { kind } => format!("use {kind}"),
        Statement::Property(p) => describe_constraint(p),
        Statement::Quality(q) => format!("{} {} {}", q.attribute, q.comparator.keyword(), q.level.name()),
    }
}

pub(crate) fn describe_constraint(p: &PropertyConstraint) -> String {
    if p.comparator.is_set() {
        format!("{} {} {{{}}}", p.property, p.comparator.keyword(), p.values.join(", "))
    } else {
        format!("{} {} {}", p.property, p.comparator.keyword(), p.values.first().map_or("", String::as_str))
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn is_bare(s: &str) -> bool {
    let mut chars = s.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '-'))
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s))
}
