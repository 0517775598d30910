#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) enum TokenKind {
    Ident(String),
    Str(String),
    Number(String),
    LBrace,
    RBrace,
    Comma,
    Semi,
    Newline,
    Error(String),
    Eof,
}

impl TokenKind {
    pub(super) fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Str(s) => format!("\"{s}\""),
            TokenKind::Number(s) => s.clone(),
            TokenKind::LBrace => "{".into(),
            TokenKind::RBrace => "}".into(),
            TokenKind::Comma => ",".into(),
            TokenKind::Semi => ";".into(),
            TokenKind::Newline => "end of line".into(),
            TokenKind::Error(_) => "invalid input".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }

    pub(super) fn is_separator(&self) -> bool {
        matches!(self, TokenKind::Newline | TokenKind::Semi | TokenKind::Eof)
    }
}

#[derive(Debug, Clone)]
pub(super) struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
    /// byte range in the source
    pub start: usize,
    pub end: usize,
}

pub(super) fn tokenize(src: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    let mut line = 1;
    let mut line_start = 0;

    while let Some(&(start, c)) = chars.peek() {
        let column = src[line_start..start].chars().count() + 1;
        let mut push = |kind, end| out.push(Token { kind, line, column, start, end });
        match c {
            '\n' => {
                chars.next();
                push(TokenKind::Newline, start + 1);
                line += 1;
                line_start = start + 1;
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '#' => {
                while chars.peek().is_some_and(|&(_, c)| c != '\n') {
                    chars.next();
                }
            }
            '{' | '}' | ',' | ';' => {
                chars.next();
                let kind = match c {
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    ',' => TokenKind::Comma,
                    _ => TokenKind::Semi,
                };
                push(kind, start + 1);
            }
            '"' => {
                chars.next();
                let mut value = String::new();
                let mut end = None;
                while let Some(&(i, c)) = chars.peek() {
                    match c {
                        '"' => {
                            chars.next();
                            end = Some(i + 1);
                            break;
                        }
                        '\n' => break,
                        '\\' => {
                            chars.next();
                            match chars.peek() {
                                Some(&(_, e @ ('"' | '\\'))) => {
                                    value.push(e);
                                    chars.next();
                                }
                                _ => value.push('\\'),
                            }
                        }
                        c => {
                            value.push(c);
                            chars.next();
                        }
                    }
                }
                match end {
                    Some(end) => push(TokenKind::Str(value), end),
                    None => {
                        let end = chars.peek().map_or(src.len(), |&(i, _)| i);
                        push(TokenKind::Error("unterminated string literal".into()), end);
                    }
                }
            }
            c if c.is_ascii_digit() || (c == '-' && next_is_digit(src, start)) => {
                let end = scan_number(src, start);
                while chars.peek().is_some_and(|&(i, _)| i < end) {
                    chars.next();
                }
                push(TokenKind::Number(src[start..end].to_string()), end);
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut end = start;
                while let Some(&(i, c)) = chars.peek() {
                    if c.is_alphanumeric() || matches!(c, '_' | '.' | '-') {
                        end = i + c.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                push(TokenKind::Ident(src[start..end].to_string()), end);
            }
            other => {
                chars.next();
                push(TokenKind::Error(format!("unexpected character {other:?}")), start + other.len_utf8());
            }
        }
    }
    let column = src[line_start..].chars().count() + 1;
    out.push(Token { kind: TokenKind::Eof, line, column, start: src.len(), end: src.len() });
    out
}

fn next_is_digit(src: &str, at: usize) -> bool {
    src[at + 1..].chars().next().is_some_and(|c| c.is_ascii_digit())
}

fn scan_number(src: &str, start: usize) -> usize {
    let bytes = src.as_bytes();
    let mut i = start;
    if bytes[i] == b'-' {
        i += 1;
    }
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    i
}
