use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{Lexer, Tok};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "library", "const", "class", "extends", "field", "new", "method", "public", "internal",
    "let", "if", "else", "while", "bound", "return", "require", "true", "false", "null", "this",
    "bag", "insert", "fold",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Parses one `.ml` source text into a validated [`SourceUnit`].
pub fn parse(text: &str) -> Result<SourceUnit, ParseError> {
    let mut p = Parser {
        lex: Lexer::new(text),
        peeked: None,
    };
    let unit = p.unit()?;
    validate(&unit)?;
    Ok(unit)
}

struct Parser<'a> {
    lex: Lexer<'a>,
    peeked: Option<(Tok, Span)>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<&Tok, ParseError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex.next_token()?);
        }
        Ok(&self.peeked.as_ref().unwrap().0)
    }

    fn peek_span(&mut self) -> Result<Span, ParseError> {
        self.peek()?;
        Ok(self.peeked.as_ref().unwrap().1)
    }

    fn next(&mut self) -> Result<(Tok, Span), ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex.next_token(),
        }
    }

    fn error_at(span: Span, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<Span, ParseError> {
        let (tok, span) = self.next()?;
        if tok == want {
            Ok(span)
        } else {
            Err(Self::error_at(
                span,
                format!("expected {}, found {}", want.describe(), tok.describe()),
            ))
        }
    }

    fn eat(&mut self, want: &Tok) -> Result<bool, ParseError> {
        if self.peek()? == want {
            self.next()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn at_keyword(&mut self, kw: &str) -> Result<bool, ParseError> {
        Ok(matches!(self.peek()?, Tok::Ident(s) if s == kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> Result<bool, ParseError> {
        if self.at_keyword(kw)? {
            self.next()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Span, ParseError> {
        let (tok, span) = self.next()?;
        match tok {
            Tok::Ident(s) if s == kw => Ok(span),
            other => Err(Self::error_at(
                span,
                format!("expected `{kw}`, found {}", other.describe()),
            )),
        }
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        let (tok, span) = self.next()?;
        match tok {
            Tok::Ident(s) if !is_keyword(&s) => Ok((s, span)),
            other => Err(Self::error_at(
                span,
                format!("expected identifier, found {}", other.describe()),
            )),
        }
    }

    fn unit(&mut self) -> Result<SourceUnit, ParseError> {
        self.expect_keyword("library")?;
        let (library, _) = self.ident()?;
        debug_assert!(self.peeked.is_none());
        let (version, _) = self.lex.version()?;
        self.expect(Tok::LBrace)?;
        let mut globals = Vec::new();
        let mut classes = Vec::new();
        loop {
            if self.eat(&Tok::RBrace)? {
                break;
            }
            if self.at_keyword("const")? {
                globals.push(self.global()?);
            } else {
                classes.push(self.class()?);
            }
        }
        self.expect(Tok::Eof)?;
        Ok(SourceUnit {
            library,
            version,
            globals,
            classes,
        })
    }

    fn global(&mut self) -> Result<GlobalDecl, ParseError> {
        let span = self.expect_keyword("const")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::Colon)?;
        let ty = self.type_tag()?;
        self.expect(Tok::Assign)?;
        let value = self.unary()?;
        if !value.is_literal() {
            return Err(Self::error_at(value.span, "constant initializer must be a literal"));
        }
        self.expect(Tok::Semi)?;
        Ok(GlobalDecl {
            name,
            ty,
            value,
            span,
        })
    }

    fn visibility(&mut self) -> Result<Option<Visibility>, ParseError> {
        if self.eat_keyword("public")? {
            Ok(Some(Visibility::Public))
        } else if self.eat_keyword("internal")? {
            Ok(Some(Visibility::Internal))
        } else {
            Ok(None)
        }
    }

    fn class(&mut self) -> Result<ClassDecl, ParseError> {
        let start = self.peek_span()?;
        let visibility = self.visibility()?.unwrap_or(Visibility::Public);
        self.expect_keyword("class")?;
        let (name, _) = self.ident()?;
        let superclass = if self.eat_keyword("extends")? {
            Some(self.ident()?.0)
        } else {
            None
        };
        self.expect(Tok::LBrace)?;
        let mut class = ClassDecl {
            name,
            visibility,
            superclass,
            fields: Vec::new(),
            constructors: Vec::new(),
            methods: Vec::new(),
            span: start,
        };
        loop {
            if self.eat(&Tok::RBrace)? {
                break;
            }
            let mspan = self.peek_span()?;
            if self.eat_keyword("field")? {
                let (fname, _) = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.type_tag()?;
                self.expect(Tok::Semi)?;
                class.fields.push(FieldDecl {
                    name: fname,
                    ty,
                    span: mspan,
                });
                continue;
            }
            let vis = self.visibility()?.unwrap_or(Visibility::Public);
            if self.eat_keyword("new")? {
                let params = self.params()?;
                let body = self.block()?;
                class.constructors.push(ConstructorDecl {
                    visibility: vis,
                    params,
                    body,
                    span: mspan,
                });
            } else if self.eat_keyword("method")? {
                let (mname, _) = self.ident()?;
                let params = self.params()?;
                let ret = if self.eat(&Tok::Arrow)? {
                    self.type_tag()?
                } else {
                    TypeTag::Void
                };
                let body = self.block()?;
                class.methods.push(MethodDecl {
                    visibility: vis,
                    name: mname,
                    params,
                    ret,
                    body,
                    span: mspan,
                });
            } else {
                let (tok, span) = self.next()?;
                return Err(Self::error_at(
                    span,
                    format!("expected `field`, `new` or `method`, found {}", tok.describe()),
                ));
            }
        }
        Ok(class)
    }

    fn type_tag(&mut self) -> Result<TypeTag, ParseError> {
        let (name, _) = self.ident()?;
        Ok(TypeTag::from_name(&name))
    }

    fn params(&mut self) -> Result<Vec<Param>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen)? {
            loop {
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.type_tag()?;
                params.push(Param { name, ty });
                if self.eat(&Tok::RParen)? {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        Ok(params)
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace)? {
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.peek_span()?;
        let kind = if self.eat_keyword("let")? {
            let (name, _) = self.ident()?;
            self.expect(Tok::Assign)?;
            let init = self.expr()?;
            self.expect(Tok::Semi)?;
            StmtKind::Let { name, init }
        } else if self.at_keyword("if")? {
            return self.if_stmt();
        } else if self.eat_keyword("while")? {
            self.expect(Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(Tok::RParen)?;
            self.expect_keyword("bound")?;
            let (tok, bspan) = self.next()?;
            let bound = match tok {
                Tok::Int(v) if v <= u32::MAX as u64 => v as u32,
                other => {
                    return Err(Self::error_at(
                        bspan,
                        format!("expected loop bound, found {}", other.describe()),
                    ))
                }
            };
            let body = self.block()?;
            StmtKind::While { cond, bound, body }
        } else if self.eat_keyword("return")? {
            if self.eat(&Tok::Semi)? {
                StmtKind::Return(None)
            } else {
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::Return(Some(e))
            }
        } else if self.eat_keyword("require")? {
            self.expect(Tok::LParen)?;
            let e = self.expr()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Semi)?;
            StmtKind::Require(e)
        } else {
            let e = self.expr()?;
            if self.eat(&Tok::Assign)? {
                let target = match e.kind {
                    ExprKind::Var(name) => LValue::Var(name),
                    ExprKind::Field { object, field } => LValue::Field {
                        object: *object,
                        field,
                    },
                    _ => return Err(Self::error_at(e.span, "invalid assignment target")),
                };
                let value = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::Assign { target, value }
            } else {
                self.expect(Tok::Semi)?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { kind, span })
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.expect_keyword("if")?;
        self.expect(Tok::LParen)?;
        let cond = self.expr()?;
        self.expect(Tok::RParen)?;
        let then_block = self.block()?;
        let else_block = if self.eat_keyword("else")? {
            if self.at_keyword("if")? {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then_block,
                else_block,
            },
            span,
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binop(tok: &Tok) -> Option<BinOp> {
        Some(match tok {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Gt => BinOp::Gt,
            Tok::Le => BinOp::Le,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::PlusPlus => BinOp::Concat,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let Some(op) = Self::binop(self.peek()?) else {
                break;
            };
            if op.precedence() < min_prec {
                break;
            }
            self.next()?;
            let rhs = self.binary(op.precedence() + 1)?;
            let span = lhs.span;
            lhs = Expr {
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let span = self.peek_span()?;
        match self.peek()? {
            Tok::Bang => {
                self.next()?;
                let operand = self.unary()?;
                Ok(Expr {
                    kind: ExprKind::Unary {
                        op: UnOp::Not,
                        operand: Box::new(operand),
                    },
                    span,
                })
            }
            Tok::Minus => {
                self.next()?;
                if let Tok::Int(v) = *self.peek()? {
                    let (_, ispan) = self.next()?;
                    if v > i64::MAX as u64 + 1 {
                        return Err(Self::error_at(ispan, "integer literal out of range"));
                    }
                    let lit = Expr {
                        kind: ExprKind::Int((v as i128).wrapping_neg() as i64),
                        span,
                    };
                    return self.postfix(lit);
                }
                let operand = self.unary()?;
                Ok(Expr {
                    kind: ExprKind::Unary {
                        op: UnOp::Neg,
                        operand: Box::new(operand),
                    },
                    span,
                })
            }
            _ => {
                let p = self.primary()?;
                self.postfix(p)
            }
        }
    }

    fn postfix(&mut self, mut e: Expr) -> Result<Expr, ParseError> {
        while self.eat(&Tok::Dot)? {
            let (name, _) = self.ident()?;
            let span = e.span;
            if *self.peek()? == Tok::LParen {
                let args = self.args()?;
                e = Expr {
                    kind: ExprKind::Call {
                        receiver: Box::new(e),
                        method: name,
                        args,
                    },
                    span,
                };
            } else {
                e = Expr {
                    kind: ExprKind::Field {
                        object: Box::new(e),
                        field: name,
                    },
                    span,
                };
            }
        }
        Ok(e)
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        self.expr_list(Tok::RParen)
    }

    fn expr_list(&mut self, close: Tok) -> Result<Vec<Expr>, ParseError> {
        let mut out = Vec::new();
        if self.eat(&close)? {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(&close)? {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, span) = self.next()?;
        let kind = match tok {
            Tok::Int(v) => {
                if v > i64::MAX as u64 {
                    return Err(Self::error_at(span, "integer literal out of range"));
                }
                ExprKind::Int(v as i64)
            }
            Tok::Str(s) => ExprKind::Str(s),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                return Ok(e);
            }
            Tok::Ident(word) => match word.as_str() {
                "true" => ExprKind::Bool(true),
                "false" => ExprKind::Bool(false),
                "null" => ExprKind::Null,
                "this" => ExprKind::This,
                "new" => {
                    let (class, _) = self.ident()?;
                    let args = self.args()?;
                    ExprKind::New { class, args }
                }
                "bag" => {
                    self.expect(Tok::LBracket)?;
                    ExprKind::BagLit(self.expr_list(Tok::RBracket)?)
                }
                "insert" => {
                    self.expect(Tok::LParen)?;
                    let bag = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let item = self.expr()?;
                    self.expect(Tok::RParen)?;
                    ExprKind::BagInsert {
                        bag: Box::new(bag),
                        item: Box::new(item),
                    }
                }
                "fold" => {
                    self.expect(Tok::LParen)?;
                    let bag = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let init = self.expr()?;
                    self.expect(Tok::Comma)?;
                    self.expect(Tok::Pipe)?;
                    let (acc, _) = self.ident()?;
                    self.expect(Tok::Comma)?;
                    let (item, _) = self.ident()?;
                    self.expect(Tok::Pipe)?;
                    let body = self.expr()?;
                    self.expect(Tok::RParen)?;
                    ExprKind::Fold {
                        bag: Box::new(bag),
                        init: Box::new(init),
                        acc,
                        item,
                        body: Box::new(body),
                    }
                }
                w if is_keyword(w) => {
                    return Err(Self::error_at(span, format!("unexpected keyword `{w}`")))
                }
                _ => {
                    if self.eat(&Tok::ColonColon)? {
                        let (name, _) = self.ident()?;
                        ExprKind::Global {
                            library: word,
                            name,
                        }
                    } else {
                        ExprKind::Var(word)
                    }
                }
            },
            other => {
                return Err(Self::error_at(
                    span,
                    format!("expected expression, found {}", other.describe()),
                ))
            }
        };
        Ok(Expr { kind, span })
    }
}

/// True when every path through `block` ends in `return` (or a
/// `require(false)`).
pub fn always_returns(block: &[Stmt]) -> bool {
    block.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::Require(e) => matches!(e.kind, ExprKind::Bool(false)),
        StmtKind::If {
            then_block,
            else_block: Some(else_block),
            ..
        } => always_returns(then_block) && always_returns(else_block),
        _ => false,
    })
}

fn validate(unit: &SourceUnit) -> Result<(), ParseError> {
    let mut globals = BTreeSet::new();
    for g in &unit.globals {
        if !globals.insert(&g.name) {
            return Err(ParseError::DuplicateGlobal(g.name.clone()));
        }
    }
    let mut names = BTreeSet::new();
    for class in &unit.classes {
        if !names.insert(class.name.as_str()) {
            return Err(ParseError::DuplicateClass(class.name.clone()));
        }
        let mut fields = BTreeSet::new();
        for f in &class.fields {
            if !fields.insert(&f.name) {
                return Err(ParseError::DuplicateField {
                    class: class.name.clone(),
                    field: f.name.clone(),
                });
            }
        }
        let mut sigs = BTreeSet::new();
        for m in &class.methods {
            let key = (m.name.clone(), m.param_types().cloned().collect::<Vec<_>>());
            if !sigs.insert(key) {
                return Err(ParseError::DuplicateSignature {
                    class: class.name.clone(),
                    signature: m.signature().to_string(),
                });
            }
            if m.ret != TypeTag::Void && !always_returns(&m.body) {
                return Err(ParseError::MissingReturn {
                    class: class.name.clone(),
                    method: m.name.clone(),
                    line: m.span.line,
                });
            }
        }
        let mut ctors = BTreeSet::new();
        for c in &class.constructors {
            let key: Vec<_> = c.param_types().cloned().collect();
            if !ctors.insert(key) {
                return Err(ParseError::DuplicateSignature {
                    class: class.name.clone(),
                    signature: format!(
                        "new({})",
                        c.param_types().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
                    ),
                });
            }
        }
    }
    let lookup = |n: &str| unit.classes.iter().find(|c| c.name == n);
    for class in &unit.classes {
        let mut seen = BTreeSet::new();
        let mut cur = Some(class);
        while let Some(c) = cur {
            if !seen.insert(c.name.as_str()) {
                return Err(ParseError::InheritanceCycle(class.name.clone()));
            }
            cur = c.superclass.as_deref().and_then(lookup);
        }
    }
    Ok(())
}
