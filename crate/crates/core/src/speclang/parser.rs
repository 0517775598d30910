use super::lexer::{tokenize, Token, TokenKind};
use super::{
    ArchSpec, Comparator, OrdinalLevel, Origin, ParseError, ParseErrors, PropertyConstraint, QualityRequirement,
    SpecStatement, Statement,
};

const COMPARATOR_KEYWORDS: [&str; 8] =
    ["equal", "not equal", "includes", "excludes", "greater than", "less than", "at least", "at most"];

/// Parses a whole specification. Errors are collected per statement; parsing
/// resumes at the next newline or `;`.
pub fn parse_spec(text: &str) -> Result<ArchSpec, ParseErrors> {
    let tokens = tokenize(text);
    let mut p = Parser { tokens, pos: 0 };
    let mut statements = Vec::new();
    let mut errors = Vec::new();

    loop {
        while matches!(p.peek().kind, TokenKind::Newline | TokenKind::Semi) {
            p.pos += 1;
        }
        if p.peek().kind == TokenKind::Eof {
            break;
        }
        let start = p.peek().start;
        match p.statement().and_then(|body| p.end_of_statement().map(|_| body)) {
            Ok(body) => {
                let end = p.tokens[p.pos - 1].end;
                statements.push(SpecStatement {
                    body,
                    origin: Origin::Architect,
                    source_text: text[start..end].trim().to_string(),
                });
            }
            Err(e) => {
                errors.push(e);
                p.recover();
            }
        }
    }

    if errors.is_empty() {
        Ok(ArchSpec { statements })
    } else {
        Err(ParseErrors(errors))
    }
}

/// Parses text holding exactly one statement.
pub fn parse_statement(text: &str) -> Result<SpecStatement, ParseErrors> {
    let mut spec = parse_spec(text)?;
    match spec.statements.len() {
        1 => Ok(spec.statements.remove(0)),
        n => Err(ParseErrors(vec![ParseError {
            line: 1,
            column: 1,
            found: format!("{n} statements"),
            expected: vec!["a single statement".into()],
            message: format!("expected exactly one statement, found {n}"),
        }])),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if !t.kind.is_separator() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, token: &Token, message: impl Into<String>, expected: &[&str]) -> ParseError {
        let message = match &token.kind {
            TokenKind::Error(m) => m.clone(),
            _ => message.into(),
        };
        ParseError {
            line: token.line,
            column: token.column,
            found: token.kind.describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message,
        }
    }

    fn recover(&mut self) {
        while !self.peek().kind.is_separator() {
            self.pos += 1;
        }
    }

    fn keyword_is(token: &Token, kw: &str) -> bool {
        matches!(&token.kind, TokenKind::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn end_of_statement(&mut self) -> Result<(), ParseError> {
        let t = self.peek().clone();
        if t.kind.is_separator() {
            Ok(())
        } else {
            Err(self.error_at(&t, format!("unexpected {} after statement", t.kind.describe()), &["end of line", ";"]))
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let first = self.peek().clone();
        if Self::keyword_is(&first, "use") {
            self.bump();
            let concept = self.bump();
            return match concept.kind {
                TokenKind::Ident(s) | TokenKind::Str(s) => Ok(Statement::Use { kind: s }),
                _ => Err(self.error_at(&concept, "expected a concept name after 'use'", &["identifier", "string"])),
            };
        }
        let name = match first.kind {
            TokenKind::Ident(ref s) | TokenKind::Str(ref s) => s.clone(),
            _ => {
                return Err(self.error_at(
                    &first,
                    format!("expected a statement, found {}", first.kind.describe()),
                    &["use", "identifier", "string"],
                ))
            }
        };
        self.bump();
        let comparator = self.comparator()?;
        let rhs_token = self.peek().clone();
        let (values, braced) = self.rhs()?;

        if comparator.is_set() {
            return Ok(Statement::Property(PropertyConstraint { property: name, comparator, values }));
        }
        if braced {
            return Err(ParseError {
                line: rhs_token.line,
                column: rhs_token.column,
                found: "{".into(),
                expected: vec!["a single literal".into()],
                message: format!("comparator '{}' takes a single value", comparator.keyword()),
            });
        }
        if comparator.is_ordering() {
            if let Some(level) = OrdinalLevel::parse(&values[0]) {
                return Ok(Statement::Quality(QualityRequirement { attribute: name, comparator, level }));
            }
        }
        Ok(Statement::Property(PropertyConstraint { property: name, comparator, values }))
    }

    fn comparator(&mut self) -> Result<Comparator, ParseError> {
        let t = self.bump();
        let word = match &t.kind {
            TokenKind::Ident(s) => s.to_ascii_lowercase(),
            _ => return Err(self.error_at(&t, "expected a comparator keyword", &COMPARATOR_KEYWORDS)),
        };
        let second = |p: &mut Self, want: &str, cmp: Comparator| {
            let n = p.bump();
            if Self::keyword_is(&n, want) {
                Ok(cmp)
            } else {
                Err(p.error_at(&n, format!("expected '{want}' after '{word}'"), &[want]))
            }
        };
        match word.as_str() {
            "equal" => Ok(Comparator::Equal),
            "includes" => Ok(Comparator::Includes),
            "excludes" => Ok(Comparator::Excludes),
            "not" => second(self, "equal", Comparator::NotEqual),
            "greater" => second(self, "than", Comparator::GreaterThan),
            "less" => second(self, "than", Comparator::LessThan),
            "at" => {
                let n = self.bump();
                if Self::keyword_is(&n, "least") {
                    Ok(Comparator::AtLeast)
                } else if Self::keyword_is(&n, "most") {
                    Ok(Comparator::AtMost)
                } else {
                    Err(self.error_at(&n, "expected 'least' or 'most' after 'at'", &["least", "most"]))
                }
            }
            _ => Err(self.error_at(&t, format!("unknown comparator '{}'", t.kind.describe()), &COMPARATOR_KEYWORDS)),
        }
    }

    fn literal(&mut self) -> Result<String, ParseError> {
        let t = self.bump();
        match t.kind {
            TokenKind::Ident(s) | TokenKind::Str(s) | TokenKind::Number(s) => Ok(s),
            _ => Err(self.error_at(&t, "expected a literal value", &["string", "identifier", "number"])),
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek().kind == TokenKind::Newline {
            self.pos += 1;
        }
    }

    /// Returns the values and whether they were written as a `{...}` set.
    fn rhs(&mut self) -> Result<(Vec<String>, bool), ParseError> {
        if self.peek().kind != TokenKind::LBrace {
            return Ok((vec![self.literal()?], false));
        }
        self.bump();
        let mut values = Vec::new();
        loop {
            self.skip_newlines();
            let v = self.literal()?;
            if !values.contains(&v) {
                values.push(v);
            }
            self.skip_newlines();
            let t = self.bump();
            match t.kind {
                TokenKind::Comma => continue,
                TokenKind::RBrace => break,
                _ => return Err(self.error_at(&t, "expected ',' or '}' in value set", &[",", "}"])),
            }
        }
        Ok((values, true))
    }
}
