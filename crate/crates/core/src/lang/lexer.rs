use super::ast::Span;
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    ColonColon,
    Assign,
    Dot,
    Arrow,
    Plus,
    PlusPlus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Gt,
    Le,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Pipe,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(i) => format!("integer `{i}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", punct(other)),
        }
    }
}

fn punct(t: &Tok) -> &'static str {
    match t {
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBracket => "[",
        Tok::RBracket => "]",
        Tok::Comma => ",",
        Tok::Semi => ";",
        Tok::Colon => ":",
        Tok::ColonColon => "::",
        Tok::Assign => "=",
        Tok::Dot => ".",
        Tok::Arrow => "->",
        Tok::Plus => "+",
        Tok::PlusPlus => "++",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::Percent => "%",
        Tok::EqEq => "==",
        Tok::NotEq => "!=",
        Tok::Lt => "<",
        Tok::Gt => ">",
        Tok::Le => "<=",
        Tok::Ge => ">=",
        Tok::AndAnd => "&&",
        Tok::OrOr => "||",
        Tok::Bang => "!",
        Tok::Pipe => "|",
        _ => "?",
    }
}

pub struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek_byte(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek_byte(0) {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek_byte(1) == Some(b'/') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some(b'/') if self.peek_byte(1) == Some(b'*') => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match self.peek_byte(0) {
                            None => {
                                return Err(ParseError::Syntax {
                                    line,
                                    col,
                                    message: "unterminated block comment".into(),
                                })
                            }
                            Some(b'*') if self.peek_byte(1) == Some(b'/') => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            _ => {
                                self.bump();
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    /// Reads a raw version word (everything up to whitespace or `{`). A
    /// leading `v` before a digit is dropped.
    pub fn version(&mut self) -> Result<(String, Span), ParseError> {
        self.skip_trivia()?;
        let (start, line, col) = (self.pos, self.line, self.col);
        while let Some(b) = self.peek_byte(0) {
            if b.is_ascii_whitespace() || b == b'{' {
                break;
            }
            self.bump();
        }
        let word = &self.src[start..self.pos];
        let span = Span::new(start, self.pos, line, col);
        let word = match word.strip_prefix('v') {
            Some(rest) if rest.starts_with(|c: char| c.is_ascii_digit()) => rest,
            _ => word,
        };
        if word.is_empty() {
            return Err(ParseError::Syntax {
                line,
                col,
                message: "expected a version string".into(),
            });
        }
        Ok((word.to_string(), span))
    }

    pub fn next_token(&mut self) -> Result<(Tok, Span), ParseError> {
        self.skip_trivia()?;
        let (start, line, col) = (self.pos, self.line, self.col);
        let Some(c) = self.bump() else {
            return Ok((Tok::Eof, Span::new(start, start, line, col)));
        };
        let two = |l: &mut Self, next: u8, yes: Tok, no: Tok| {
            if l.peek_byte(0) == Some(next) {
                l.bump();
                yes
            } else {
                no
            }
        };
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '.' => Tok::Dot,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '%' => Tok::Percent,
            ':' => two(self, b':', Tok::ColonColon, Tok::Colon),
            '=' => two(self, b'=', Tok::EqEq, Tok::Assign),
            '+' => two(self, b'+', Tok::PlusPlus, Tok::Plus),
            '-' => two(self, b'>', Tok::Arrow, Tok::Minus),
            '<' => two(self, b'=', Tok::Le, Tok::Lt),
            '>' => two(self, b'=', Tok::Ge, Tok::Gt),
            '!' => two(self, b'=', Tok::NotEq, Tok::Bang),
            '|' => two(self, b'|', Tok::OrOr, Tok::Pipe),
            '&' => {
                if self.peek_byte(0) == Some(b'&') {
                    self.bump();
                    Tok::AndAnd
                } else {
                    return Err(self.error("expected `&&`"));
                }
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None | Some('\n') => {
                            return Err(ParseError::Syntax {
                                line,
                                col,
                                message: "unterminated string literal".into(),
                            })
                        }
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some('\\') => s.push('\\'),
                            Some('"') => s.push('"'),
                            _ => return Err(self.error("invalid escape sequence")),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                Tok::Str(s)
            }
            d if d.is_ascii_digit() => {
                while matches!(self.peek_byte(0), Some(b) if b.is_ascii_digit()) {
                    self.bump();
                }
                let text = &self.src[start..self.pos];
                let v = text.parse::<u64>().map_err(|_| ParseError::Syntax {
                    line,
                    col,
                    message: format!("integer literal `{text}` out of range"),
                })?;
                Tok::Int(v)
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                while matches!(self.peek_byte(0), Some(b) if b.is_ascii_alphanumeric() || b == b'_')
                {
                    self.bump();
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        Ok((tok, Span::new(start, self.pos, line, col)))
    }
}
