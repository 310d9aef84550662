use num_traits::{One, Zero};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::LangError;
use crate::dist::DiscreteDist;
use crate::rational::{self, Rational};

/// Parses a complete `.pwhile` file: declaration header then program.
pub fn parse(text: &str) -> Result<Program, LangError> {
    let mut p = Parser::new(tokenize(text)?);
    let (pvars, rvars) = p.header()?;
    p.pvars = pvars.clone();
    p.rvars = rvars.iter().map(|(n, _)| n.clone()).collect();
    let body = p.stmts()?;
    p.expect(Tok::Eof, "end of program")?;
    Ok(Program { pvars, rvars, body })
}

/// Parses a certificate expression such as `x + 1` or `-x + y + 1/4`.
pub fn parse_value_expr(text: &str, pvars: &[String]) -> Result<ValueExpr, LangError> {
    let mut p = Parser::new(tokenize(text)?);
    p.pvars = pvars.to_vec();
    let e = p.value_expr()?;
    p.expect(Tok::Eof, "end of expression")?;
    Ok(e)
}

/// Parses a guard over the given program variables.
pub fn parse_guard(text: &str, pvars: &[String]) -> Result<Guard, LangError> {
    let mut p = Parser::new(tokenize(text)?);
    p.pvars = pvars.to_vec();
    let g = p.guard()?;
    p.expect(Tok::Eof, "end of guard")?;
    Ok(g)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pvars: Vec<String>,
    rvars: Vec<String>,
}

enum Factor {
    Num(i64),
    Var(String, Span),
    Isqrt(String, Span),
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, pvars: Vec::new(), rvars: Vec::new() }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> LangError {
        let s = self.span();
        LangError::Syntax {
            line: s.line,
            col: s.col,
            expected: expected.to_string(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Span, LangError> {
        if *self.peek() == tok {
            Ok(self.advance().span)
        } else {
            Err(self.error(expected))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Span, LangError> {
        if self.is_kw(kw) {
            Ok(self.advance().span)
        } else {
            Err(self.error(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Span), LangError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                let span = self.advance().span;
                Ok((s, span))
            }
            _ => Err(self.error(expected)),
        }
    }

    fn signed_int(&mut self) -> Result<i64, LangError> {
        let negative = if *self.peek() == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        match *self.peek() {
            Tok::Int(v) => {
                self.advance();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.error("an integer")),
        }
    }

    fn rational(&mut self) -> Result<Rational, LangError> {
        let num = self.signed_int()?;
        if *self.peek() == Tok::Slash {
            self.advance();
            let span = self.span();
            let den = self.signed_int()?;
            if den == 0 {
                return Err(LangError::Syntax {
                    line: span.line,
                    col: span.col,
                    expected: "a nonzero denominator".into(),
                    found: "`0`".into(),
                });
            }
            return Ok(rational::ratio(num, den));
        }
        Ok(rational::int(num))
    }

    // ---- header ----

    fn header(&mut self) -> Result<(Vec<String>, Vec<(String, DiscreteDist)>), LangError> {
        let mut pvars: Vec<String> = Vec::new();
        let mut rvars: Vec<(String, DiscreteDist)> = Vec::new();
        loop {
            // `pvar` / `rvar` are only declarations when followed by a name
            let is_decl = matches!(self.peek_at(1), Tok::Ident(_));
            if self.is_kw("pvar") && is_decl {
                self.advance();
                loop {
                    let (name, span) = self.ident("a variable name")?;
                    check_fresh(&name, span, &pvars, &rvars)?;
                    pvars.push(name);
                    if *self.peek() == Tok::Comma {
                        self.advance();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::Semi, "`;`")?;
            } else if self.is_kw("rvar") && is_decl {
                self.advance();
                let (name, span) = self.ident("a variable name")?;
                check_fresh(&name, span, &pvars, &rvars)?;
                self.expect(Tok::Tilde, "`~`")?;
                let dist = self.dist()?;
                rvars.push((name, dist));
                self.expect(Tok::Semi, "`;`")?;
            } else {
                return Ok((pvars, rvars));
            }
        }
    }

    fn dist(&mut self) -> Result<DiscreteDist, LangError> {
        let (name, span) = match self.peek().clone() {
            Tok::Ident(s) => (s, self.advance().span),
            _ => return Err(self.error("a distribution")),
        };
        let wrap = |e| LangError::InvalidDistribution { line: span.line, col: span.col, source: e };
        match name.as_str() {
            "uniform" => {
                self.expect(Tok::LParen, "`(`")?;
                let lo = self.signed_int()?;
                self.expect(Tok::DotDot, "`..`")?;
                let hi = self.signed_int()?;
                self.expect(Tok::RParen, "`)`")?;
                DiscreteDist::uniform(lo, hi).map_err(wrap)
            }
            "point" => {
                self.expect(Tok::LParen, "`(`")?;
                let v = self.signed_int()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(DiscreteDist::point(v))
            }
            "two_sided_geometric" => {
                self.expect(Tok::LParen, "`(`")?;
                let p = self.rational()?;
                self.expect(Tok::RParen, "`)`")?;
                DiscreteDist::two_sided_geometric(p).map_err(wrap)
            }
            "table" => {
                self.expect(Tok::LBrace, "`{`")?;
                let mut entries = Vec::new();
                loop {
                    let v = self.signed_int()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let p = self.rational()?;
                    entries.push((v, p));
                    if *self.peek() == Tok::Comma {
                        self.advance();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                DiscreteDist::finite(entries).map_err(wrap)
            }
            _ => Err(LangError::Syntax {
                line: span.line,
                col: span.col,
                expected: "one of uniform, table, point, two_sided_geometric".into(),
                found: format!("`{name}`"),
            }),
        }
    }

    // ---- statements ----

    fn at_block_end(&self) -> bool {
        matches!(self.peek(), Tok::Eof) || ["od", "fi", "else"].iter().any(|k| self.is_kw(k))
    }

    fn stmts(&mut self) -> Result<Stmt, LangError> {
        let mut items = vec![self.stmt()?];
        while *self.peek() == Tok::Semi {
            self.advance();
            if self.at_block_end() {
                break;
            }
            items.push(self.stmt()?);
        }
        Ok(Stmt::seq(items))
    }

    fn stmt(&mut self) -> Result<Stmt, LangError> {
        let span = self.span();
        if self.is_kw("skip") {
            self.advance();
            return Ok(Stmt::at(StmtKind::Skip, span));
        }
        if self.is_kw("while") {
            self.advance();
            let cond = self.guard()?;
            self.keyword("do")?;
            let body = self.stmts()?;
            self.keyword("od")?;
            return Ok(Stmt::at(StmtKind::While { cond, body: Box::new(body) }, span));
        }
        if self.is_kw("if") {
            self.advance();
            let cond = self.guard()?;
            self.keyword("then")?;
            let then_branch = self.stmts()?;
            let else_branch = if self.is_kw("else") {
                self.advance();
                self.stmts()?
            } else {
                Stmt::at(StmtKind::Skip, self.span())
            };
            self.keyword("fi")?;
            return Ok(Stmt::at(
                StmtKind::If { cond, then_branch: Box::new(then_branch), else_branch: Box::new(else_branch) },
                span,
            ));
        }
        let (var, vspan) = self.ident("a statement")?;
        if self.rvars.contains(&var) {
            return Err(LangError::AssignToSamplingVariable { name: var, line: vspan.line, col: vspan.col });
        }
        if !self.pvars.contains(&var) {
            return Err(LangError::UndeclaredVariable { name: var, line: vspan.line, col: vspan.col });
        }
        self.expect(Tok::Assign, "`:=`")?;
        let expr = self.expr()?;
        Ok(Stmt::at(StmtKind::Assign { var, expr }, span))
    }

    // ---- arithmetic ----

    fn factor(&mut self) -> Result<Factor, LangError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Factor::Num(v))
            }
            Tok::Ident(s) if s == "isqrt" => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let (name, span) = self.ident("a program variable")?;
                self.expect(Tok::RParen, "`)`")?;
                if !self.pvars.contains(&name) {
                    return Err(self.unknown_or_misused(name, span, "isqrt applies to program variables only"));
                }
                Ok(Factor::Isqrt(name, span))
            }
            Tok::Ident(_) => {
                let (name, span) = self.ident("a variable")?;
                if !self.pvars.contains(&name) && !self.rvars.contains(&name) {
                    return Err(LangError::UndeclaredVariable { name, line: span.line, col: span.col });
                }
                Ok(Factor::Var(name, span))
            }
            _ => Err(self.error("an integer, variable or isqrt(..)")),
        }
    }

    fn unknown_or_misused(&self, name: String, span: Span, detail: &str) -> LangError {
        if self.rvars.contains(&name) {
            LangError::UnsupportedTerm { line: span.line, col: span.col, detail: detail.to_string() }
        } else {
            LangError::UndeclaredVariable { name, line: span.line, col: span.col }
        }
    }

    /// Optional sign then `factor (* factor)*`.
    fn product(&mut self) -> Result<(i64, Vec<Factor>, Span), LangError> {
        let span = self.span();
        let mut sign = 1i64;
        while matches!(self.peek(), Tok::Minus | Tok::Plus) {
            if *self.peek() == Tok::Minus {
                sign = -sign;
            }
            self.advance();
        }
        let mut factors = vec![self.factor()?];
        while *self.peek() == Tok::Star {
            self.advance();
            factors.push(self.factor()?);
        }
        Ok((sign, factors, span))
    }

    fn sum_of_products<T>(
        &mut self,
        mut add: impl FnMut(&mut Self, i64, Vec<Factor>, Span) -> Result<T, LangError>,
    ) -> Result<(), LangError> {
        let (sign, factors, span) = self.product()?;
        add(self, sign, factors, span)?;
        while matches!(self.peek(), Tok::Plus | Tok::Minus) {
            let sign = if *self.peek() == Tok::Minus { -1 } else { 1 };
            self.advance();
            let (s2, factors, span) = self.product()?;
            add(self, sign * s2, factors, span)?;
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        let mut e = Expr::default();
        self.sum_of_products(|p, sign, factors, span| {
            let overflow = LangError::Overflow { line: span.line, col: span.col };
            let mut coeff = sign;
            let (mut pv, mut rv, mut sq) = (Vec::new(), Vec::new(), Vec::new());
            for f in factors {
                match f {
                    Factor::Num(v) => coeff = coeff.checked_mul(v).ok_or(overflow.clone())?,
                    Factor::Var(n, _) if p.rvars.contains(&n) => rv.push(n),
                    Factor::Var(n, _) => pv.push(n),
                    Factor::Isqrt(n, _) => sq.push(n),
                }
            }
            let term = match (pv.as_slice(), rv.as_slice(), sq.as_slice()) {
                ([], [], []) => None,
                ([x], [], []) => Some(Term::Pvar(x.clone())),
                ([], [r], []) => Some(Term::Rvar(r.clone())),
                ([], [r], [x]) => Some(Term::RvarIsqrt { rvar: r.clone(), pvar: x.clone() }),
                _ => {
                    return Err(LangError::UnsupportedTerm {
                        line: span.line,
                        col: span.col,
                        detail: "terms are c, c*x, c*r or c*r*isqrt(x)".into(),
                    })
                }
            };
            match term {
                None => e.constant = e.constant.checked_add(coeff).ok_or(overflow)?,
                Some(t) => e.add_term(t, coeff).ok_or(overflow)?,
            }
            Ok(())
        })?;
        Ok(e)
    }

    fn poly(&mut self) -> Result<Poly, LangError> {
        let mut poly = Poly::default();
        self.sum_of_products(|p, sign, factors, span| {
            let overflow = LangError::Overflow { line: span.line, col: span.col };
            let mut coeff = sign;
            let mut vars = Vec::new();
            for f in factors {
                match f {
                    Factor::Num(v) => coeff = coeff.checked_mul(v).ok_or(overflow.clone())?,
                    Factor::Var(n, s) if p.rvars.contains(&n) => {
                        return Err(LangError::SamplingVarInGuard { name: n, line: s.line, col: s.col })
                    }
                    Factor::Var(n, _) => vars.push(n),
                    Factor::Isqrt(_, s) => {
                        return Err(LangError::UnsupportedTerm {
                            line: s.line,
                            col: s.col,
                            detail: "isqrt is not allowed in guards".into(),
                        })
                    }
                }
            }
            if vars.len() > 2 {
                return Err(LangError::UnsupportedTerm {
                    line: span.line,
                    col: span.col,
                    detail: "guard polynomials have degree at most 2".into(),
                });
            }
            poly.add_term(Monomial::new(vars), coeff).ok_or(overflow)
        })?;
        Ok(poly)
    }

    // ---- guards: or < and < not ----

    fn guard(&mut self) -> Result<Guard, LangError> {
        let mut g = self.guard_and()?;
        while self.is_kw("or") {
            self.advance();
            let rhs = self.guard_and()?;
            g = Guard::Or(Box::new(g), Box::new(rhs));
        }
        Ok(g)
    }

    fn guard_and(&mut self) -> Result<Guard, LangError> {
        let mut g = self.guard_not()?;
        while self.is_kw("and") {
            self.advance();
            let rhs = self.guard_not()?;
            g = Guard::And(Box::new(g), Box::new(rhs));
        }
        Ok(g)
    }

    fn guard_not(&mut self) -> Result<Guard, LangError> {
        if self.is_kw("not") {
            self.advance();
            return Ok(Guard::Not(Box::new(self.guard_not()?)));
        }
        if *self.peek() == Tok::LParen {
            self.advance();
            let g = self.guard()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(g);
        }
        self.literal()
    }

    fn literal(&mut self) -> Result<Guard, LangError> {
        let lhs = self.poly()?;
        let span = self.span();
        let op = self.peek().clone();
        if !matches!(op, Tok::Le | Tok::Ge | Tok::Lt | Tok::Gt) {
            return Err(self.error("a comparison (<=, >=, <, >)"));
        }
        self.advance();
        let mut rhs = self.poly()?;
        let overflow = LangError::Overflow { line: span.line, col: span.col };
        // strict comparisons over the integers
        let rel = match op {
            Tok::Le => Rel::Le,
            Tok::Ge => Rel::Ge,
            Tok::Lt => {
                rhs.constant = rhs.constant.checked_sub(1).ok_or(overflow)?;
                Rel::Le
            }
            _ => {
                rhs.constant = rhs.constant.checked_add(1).ok_or(overflow)?;
                Rel::Ge
            }
        };
        Ok(Guard::Lit(Literal { lhs, rel, rhs }))
    }

    // ---- certificate expressions ----

    fn value_expr(&mut self) -> Result<ValueExpr, LangError> {
        let mut out = ValueExpr::default();
        let mut first = true;
        loop {
            let span = self.span();
            let mut sign = Rational::one();
            if first {
                if matches!(self.peek(), Tok::Minus | Tok::Plus) {
                    if *self.peek() == Tok::Minus {
                        sign = -sign;
                    }
                    self.advance();
                }
            } else {
                match self.peek() {
                    Tok::Plus => {}
                    Tok::Minus => sign = -sign,
                    _ => break,
                }
                self.advance();
            }
            first = false;
            let mut coeff = sign;
            let mut var: Option<(bool, String)> = None;
            let mut expect_factor = true;
            while expect_factor {
                match self.peek().clone() {
                    Tok::Int(v) => {
                        self.advance();
                        let mut q = rational::int(v);
                        if *self.peek() == Tok::Slash {
                            self.advance();
                            match *self.peek() {
                                Tok::Int(d) if d != 0 => {
                                    self.advance();
                                    q /= rational::int(d);
                                }
                                _ => return Err(self.error("a nonzero integer denominator")),
                            }
                        }
                        coeff *= q;
                    }
                    Tok::Ident(s) if s == "isqrt" || !is_reserved(&s) => {
                        let is_sqrt = s == "isqrt";
                        let (name, vspan) = if is_sqrt {
                            self.advance();
                            self.expect(Tok::LParen, "`(`")?;
                            let r = self.ident("a program variable")?;
                            self.expect(Tok::RParen, "`)`")?;
                            r
                        } else {
                            self.ident("a program variable")?
                        };
                        if !self.pvars.contains(&name) {
                            return Err(LangError::UndeclaredVariable { name, line: vspan.line, col: vspan.col });
                        }
                        if var.is_some() {
                            return Err(LangError::UnsupportedTerm {
                                line: span.line,
                                col: span.col,
                                detail: "certificate terms are affine or c*isqrt(x)".into(),
                            });
                        }
                        var = Some((is_sqrt, name));
                    }
                    _ => return Err(self.error("a number or program variable")),
                }
                expect_factor = *self.peek() == Tok::Star;
                if expect_factor {
                    self.advance();
                }
            }
            let slot = match var {
                None => {
                    out.constant += coeff;
                    continue;
                }
                Some((false, name)) => out.linear.entry(name),
                Some((true, name)) => out.isqrt.entry(name),
            };
            let e = slot.or_insert_with(Rational::zero);
            *e += coeff;
        }
        out.linear.retain(|_, v| !v.is_zero());
        out.isqrt.retain(|_, v| !v.is_zero());
        Ok(out)
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "skip" | "if" | "then" | "else" | "fi" | "while" | "do" | "od" | "and" | "or" | "not" | "isqrt"
    )
}

fn check_fresh(
    name: &str,
    span: Span,
    pvars: &[String],
    rvars: &[(String, DiscreteDist)],
) -> Result<(), LangError> {
    if pvars.iter().any(|p| p == name) || rvars.iter().any(|(r, _)| r == name) {
        return Err(LangError::DuplicateDeclaration { name: name.to_string(), line: span.line, col: span.col });
    }
    Ok(())
}
