//! The architect's specification language.
//!
//! A specification is a sequence of statements separated by newlines or `;`:
//!
//! ```text
//! use DBMS
//! "License" includes {"GPL", "LGPL", "BSD"}
//! "Backup facility" equal "yes"
//! "Reliability" greater than "average"   # quality requirement
//! ```
//!
//! Keywords and concept names are case-insensitive, literals keep their case.
//! [`parse_spec`] produces an [`ArchSpec`], [`serialize_spec`] renders the
//! canonical form back, and [`bind_spec`] resolves names against a
//! [`KnowledgeBase`](crate::kb::KnowledgeBase).

mod bind;
mod eval;
mod lexer;
mod parser;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bind::{bind_spec, BindError, BindWarning, BoundSpec, BoundStatement, Contradiction, UnresolvedName};
pub use eval::{eval_property_constraint, evaluate_constraint, ConstraintVerdict, Evaluation};
pub use parser::{parse_spec, parse_statement};
pub use render::{describe_statement, render_statement, serialize_spec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Equal,
    NotEqual,
    Includes,
    Excludes,
    GreaterThan,
    LessThan,
    AtLeast,
    AtMost,
}

impl Comparator {
    pub const ALL: [Comparator; 8] = [
        Comparator::Equal,
        Comparator::NotEqual,
        Comparator::Includes,
        Comparator::Excludes,
        Comparator::GreaterThan,
        Comparator::LessThan,
        Comparator::AtLeast,
        Comparator::AtMost,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Comparator::Equal => "equal",
            Comparator::NotEqual => "not equal",
            Comparator::Includes => "includes",
            Comparator::Excludes => "excludes",
            Comparator::GreaterThan => "greater than",
            Comparator::LessThan => "less than",
            Comparator::AtLeast => "at least",
            Comparator::AtMost => "at most",
        }
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, Comparator::GreaterThan | Comparator::LessThan | Comparator::AtLeast | Comparator::AtMost)
    }

    pub fn is_set(self) -> bool {
        matches!(self, Comparator::Includes | Comparator::Excludes)
    }

    /// The comparator whose verdict is the exact negation of this one.
    pub fn negated(self) -> Comparator {
        match self {
            Comparator::Equal => Comparator::NotEqual,
            Comparator::NotEqual => Comparator::Equal,
            Comparator::Includes => Comparator::Excludes,
            Comparator::Excludes => Comparator::Includes,
            Comparator::GreaterThan => Comparator::AtMost,
            Comparator::AtMost => Comparator::GreaterThan,
            Comparator::LessThan => Comparator::AtLeast,
            Comparator::AtLeast => Comparator::LessThan,
        }
    }

    /// Applies an ordering comparator as `lhs <op> rhs`. Non-ordering
    /// comparators fall back to equality semantics.
    pub fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Comparator::GreaterThan => lhs > rhs,
            Comparator::LessThan => lhs < rhs,
            Comparator::AtLeast => lhs >= rhs,
            Comparator::AtMost => lhs <= rhs,
            Comparator::Equal | Comparator::Includes => lhs == rhs,
            Comparator::NotEqual | Comparator::Excludes => lhs != rhs,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Five-point scale used for quality requirements and predicted levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrdinalLevel {
    VeryLow = 0,
    Low = 1,
    Average = 2,
    High = 3,
    VeryHigh = 4,
}

impl OrdinalLevel {
    pub const ALL: [OrdinalLevel; 5] =
        [OrdinalLevel::VeryLow, OrdinalLevel::Low, OrdinalLevel::Average, OrdinalLevel::High, OrdinalLevel::VeryHigh];

    pub fn index(self) -> i8 {
        self as i8
    }

    /// Level at `index`, clamped into the scale.
    pub fn clamped(index: i8) -> OrdinalLevel {
        Self::ALL[index.clamp(0, 4) as usize]
    }

    pub fn name(self) -> &'static str {
        match self {
            OrdinalLevel::VeryLow => "very low",
            OrdinalLevel::Low => "low",
            OrdinalLevel::Average => "average",
            OrdinalLevel::High => "high",
            OrdinalLevel::VeryHigh => "very high",
        }
    }

    /// Accepts the level names case-insensitively, with any spacing or `_`.
    pub fn parse(text: &str) -> Option<OrdinalLevel> {
        let key = crate::names::normalize(text);
        Self::ALL.into_iter().find(|l| crate::names::normalize(l.name()) == key)
    }
}

impl fmt::Display for OrdinalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PropertyConstraint {
    pub property: String,
    pub comparator: Comparator,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QualityRequirement {
    pub attribute: String,
    pub comparator: Comparator,
    pub level: OrdinalLevel,
}

impl QualityRequirement {
    /// Reads the requirement as a plain property constraint on a property
    /// named like the attribute.
    pub fn as_property_constraint(&self) -> PropertyConstraint {
        PropertyConstraint {
            property: self.attribute.clone(),
            comparator: self.comparator,
            values: vec![self.level.name().to_string()],
        }
    }

    /// Whether `predicted` meets this requirement.
    pub fn is_met_by(&self, predicted: OrdinalLevel) -> bool {
        self.comparator.holds(predicted, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Statement {
    Use { kind: String },
    Property(PropertyConstraint),
    Quality(QualityRequirement),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Architect,
    Refinement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecStatement {
    pub body: Statement,
    pub origin: Origin,
    pub source_text: String,
}

impl SpecStatement {
    /// A statement whose source text is its canonical rendering.
    pub fn canonical(body: Statement, origin: Origin) -> Self {
        let source_text = render_statement(&body);
        SpecStatement { body, origin, source_text }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub statements: Vec<SpecStatement>,
}

impl ArchSpec {
    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn bodies(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().map(|s| &s.body)
    }

    /// Equality of statement bodies in order, ignoring origin and source text.
    pub fn same_structure(&self, other: &ArchSpec) -> bool {
        self.bodies().eq(other.bodies())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub found: String,
    pub expected: Vec<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

/// Every error found in one pass over a specification.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub struct ParseErrors(pub Vec<ParseError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}
