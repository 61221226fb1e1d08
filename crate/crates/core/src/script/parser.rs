use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::hilbert::{Level, LevelPair, C64};
use crate::protocols::BellKind;
use crate::qops::{Gate2, GatePreset};

use super::ast::{BinOp, Expr, FidelityTarget, Func, GateSpec, ProtocolScript, Span, Statement};
use super::lexer::{tokenize, Tok, Token};

fn err(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        message: message.into(),
    }
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    /// Position of the next token, or just past the last one.
    fn here(&self) -> (usize, usize) {
        match self.peek() {
            Some(t) => (t.line, t.col),
            None => {
                let last = self.toks.last().expect("lines are non-empty");
                (last.line, last.col + 1)
            }
        }
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, col) = self.here();
        Err(err(line, col, message))
    }

    fn next(&mut self, what: &str) -> Result<&'a Token> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => self.fail(format!("expected {what}, found end of line")),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.eat(&tok) {
            return Ok(());
        }
        let found = self
            .peek()
            .map(|t| t.tok.describe())
            .unwrap_or_else(|| "end of line".into());
        self.fail(format!("expected {}, found {found}", tok.describe()))
    }

    fn ident(&mut self, what: &str) -> Result<&'a Token> {
        let (line, col) = self.here();
        let t = self.next(what)?;
        match &t.tok {
            Tok::Ident(_) => Ok(t),
            other => Err(err(
                line,
                col,
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (line, col) = self.here();
        let t = self.ident(&format!("`{kw}`"))?;
        if matches!(&t.tok, Tok::Ident(s) if s == kw) {
            Ok(())
        } else {
            Err(err(
                line,
                col,
                format!("expected `{kw}`, found {}", t.tok.describe()),
            ))
        }
    }

    fn end(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.fail(format!(
                "unexpected {} at end of statement",
                t.tok.describe()
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let (line, col) = self.here();
        let e = self.sum()?.fold();
        if let Expr::Num(c) = &e {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(err(line, col, "expression evaluates to a non-finite value"));
            }
        }
        Ok(e)
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat(&Tok::Plus) {
                BinOp::Add
            } else if self.eat(&Tok::Minus) {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(&Tok::Star) {
                BinOp::Mul
            } else if self.eat(&Tok::Slash) {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let (line, col) = self.here();
        let t = self.next("an expression")?;
        match &t.tok {
            Tok::Num(x) => Ok(Expr::real(*x)),
            Tok::Param(p) => Ok(Expr::Param(p.clone())),
            Tok::LParen => {
                let e = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "pi" => Ok(Expr::Pi),
                "i" => Ok(Expr::I),
                "sqrt" | "conj" => {
                    let f = if name == "sqrt" {
                        Func::Sqrt
                    } else {
                        Func::Conj
                    };
                    self.expect(Tok::LParen)?;
                    let e = self.sum()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Call(f, Box::new(e)))
                }
                other => Err(err(
                    line,
                    col,
                    format!("unknown name `{other}` in expression"),
                )),
            },
            other => Err(err(
                line,
                col,
                format!("expected an expression, found {}", other.describe()),
            )),
        }
    }
}

fn ident_text(t: &Token) -> &str {
    match &t.tok {
        Tok::Ident(s) => s,
        _ => unreachable!("checked by Cursor::ident"),
    }
}

#[derive(Default)]
struct Scope {
    atoms: BTreeMap<String, LevelPair>,
    vars: BTreeSet<String>,
    cavity: bool,
    reported: bool,
}

impl Scope {
    fn atom(&self, t: &Token) -> Result<LevelPair> {
        let name = ident_text(t);
        self.atoms
            .get(name)
            .copied()
            .ok_or_else(|| err(t.line, t.col, format!("undeclared atom `{name}`")))
    }

    fn var(&self, t: &Token) -> Result<String> {
        let name = ident_text(t);
        if self.vars.contains(name) {
            Ok(name.to_string())
        } else {
            Err(err(t.line, t.col, format!("undefined variable `{name}`")))
        }
    }

    fn need_cavity(&self, t: &Token) -> Result<()> {
        if self.cavity {
            Ok(())
        } else {
            Err(err(t.line, t.col, "the cavity must be declared first"))
        }
    }
}

fn level(t: &Token) -> Result<Level> {
    ident_text(t).parse().map_err(|_| {
        err(
            t.line,
            t.col,
            format!("expected a level f, g or e, found `{}`", ident_text(t)),
        )
    })
}

fn level_in(t: &Token, basis: LevelPair) -> Result<Level> {
    let l = level(t)?;
    if basis.index_of(l).is_none() {
        return Err(err(
            t.line,
            t.col,
            format!("level {l} is not in the atom's level pair"),
        ));
    }
    Ok(l)
}

fn basis(c: &mut Cursor) -> Result<LevelPair> {
    let (line, col) = c.here();
    c.expect(Tok::LParen)?;
    let a = c.ident("a level")?;
    c.expect(Tok::Comma)?;
    let b = c.ident("a level")?;
    c.expect(Tok::RParen)?;
    match (ident_text(a), ident_text(b)) {
        ("f", "g") => Ok(LevelPair::Fg),
        ("f", "e") => Ok(LevelPair::Fe),
        (x, y) => Err(err(
            line,
            col,
            format!("level pair must be (f,g) or (f,e), found ({x},{y})"),
        )),
    }
}

fn gate_spec(c: &mut Cursor) -> Result<GateSpec> {
    let (line, col) = c.here();
    if c.eat(&Tok::LBracket) {
        let mut rows = Vec::with_capacity(2);
        for r in 0..2 {
            if r > 0 {
                c.expect(Tok::Comma)?;
            }
            c.expect(Tok::LBracket)?;
            let a = c.expr()?;
            c.expect(Tok::Comma)?;
            let b = c.expr()?;
            c.expect(Tok::RBracket)?;
            rows.push([a, b]);
        }
        c.expect(Tok::RBracket)?;
        let [r0, r1]: [[Expr; 2]; 2] = rows.try_into().expect("two rows");
        let m = [r0, r1];
        let constant: Option<Vec<C64>> = m
            .iter()
            .flatten()
            .map(|e| match e {
                Expr::Num(v) => Some(*v),
                _ => None,
            })
            .collect();
        if let Some(v) = constant {
            Gate2::new([[v[0], v[1]], [v[2], v[3]]]).map_err(|e| err(line, col, e.to_string()))?;
        }
        return Ok(GateSpec::Matrix(Box::new(m)));
    }
    let t = c.ident("a gate preset or matrix")?;
    ident_text(t)
        .parse::<GatePreset>()
        .map(GateSpec::Preset)
        .map_err(|_| {
            err(
                t.line,
                t.col,
                format!("unknown gate preset `{}`", ident_text(t)),
            )
        })
}

fn named_arg(c: &mut Cursor, name: &str) -> Result<Expr> {
    c.keyword(name)?;
    c.expect(Tok::Eq)?;
    c.expr()
}

fn bell_kind(c: &mut Cursor) -> Result<BellKind> {
    let t = c.ident("phi or psi")?;
    let (line, col) = (t.line, t.col);
    let sign = if c.eat(&Tok::Plus) {
        "+"
    } else if c.eat(&Tok::Minus) {
        "-"
    } else {
        return c.fail("expected `+` or `-` after the Bell state name");
    };
    format!("{}{sign}", ident_text(t)).parse().map_err(|_| {
        err(
            line,
            col,
            format!("unknown Bell state `{}{sign}`", ident_text(t)),
        )
    })
}

fn statement(c: &mut Cursor, scope: &mut Scope) -> Result<Statement> {
    let head = c.ident("a statement keyword")?;
    if scope.reported {
        return Err(err(head.line, head.col, "no statement may follow `report`"));
    }
    let kw = ident_text(head);
    let stmt = match kw {
        "cavity" => {
            if scope.cavity {
                return Err(err(head.line, head.col, "duplicate cavity declaration"));
            }
            c.keyword("coherent")?;
            scope.cavity = true;
            Statement::Cavity { alpha: c.expr()? }
        }
        "atom" => {
            let t = c.ident("an atom label")?;
            let label = ident_text(t).to_string();
            if scope.atoms.contains_key(&label) {
                return Err(err(
                    t.line,
                    t.col,
                    format!("atom `{label}` is already declared"),
                ));
            }
            c.keyword("levels")?;
            let b = basis(c)?;
            c.keyword("init")?;
            let init = level_in(c.ident("a level")?, b)?;
            scope.atoms.insert(label.clone(), b);
            Statement::Atom {
                label,
                basis: b,
                init,
            }
        }
        "rotate" => {
            let t = c.ident("an atom label")?;
            scope.atom(t)?;
            Statement::Rotate {
                atom: ident_text(t).into(),
                gate: gate_spec(c)?,
            }
        }
        "dispersive" => {
            let t = c.ident("an atom label")?;
            if scope.atom(t)? != LevelPair::Fg {
                return Err(err(t.line, t.col, "a dispersive pass needs an (f,g) atom"));
            }
            Statement::Dispersive {
                atom: ident_text(t).into(),
                phi: named_arg(c, "phi")?,
            }
        }
        "inject" => Statement::Inject { beta: c.expr()? },
        "jc" => {
            let t = c.ident("an atom label")?;
            if scope.atom(t)? != LevelPair::Fe {
                return Err(err(t.line, t.col, "a resonant pass needs an (f,e) atom"));
            }
            Statement::Jc {
                atom: ident_text(t).into(),
                gt: named_arg(c, "gt")?,
            }
        }
        "measure" => {
            let t = c.ident("an atom label")?;
            scope.atom(t)?;
            c.keyword("as")?;
            let v = c.ident("a variable name")?;
            let var = ident_text(v).to_string();
            if !scope.vars.insert(var.clone()) {
                return Err(err(
                    v.line,
                    v.col,
                    format!("variable `{var}` is already defined"),
                ));
            }
            Statement::Measure {
                atom: ident_text(t).into(),
                var,
            }
        }
        "postselect" => {
            let t = c.ident("an atom label")?;
            let b = scope.atom(t)?;
            let level = level_in(c.ident("a level")?, b)?;
            Statement::Postselect {
                atom: ident_text(t).into(),
                level,
            }
        }
        "expect" => {
            c.keyword("fidelity")?;
            let k = c.ident("`bell` or `ket`")?;
            let target = match ident_text(k) {
                "bell" => {
                    let kind = bell_kind(c)?;
                    let a = c.ident("an atom label")?;
                    scope.atom(a)?;
                    let b = c.ident("an atom label")?;
                    scope.atom(b)?;
                    if ident_text(a) == ident_text(b) {
                        return Err(err(
                            b.line,
                            b.col,
                            "a Bell target needs two different atoms",
                        ));
                    }
                    FidelityTarget::Bell {
                        kind,
                        first: ident_text(a).into(),
                        second: ident_text(b).into(),
                    }
                }
                "ket" => {
                    let a = c.ident("an atom label")?;
                    scope.atom(a)?;
                    c.expect(Tok::LParen)?;
                    let x = c.expr()?;
                    c.expect(Tok::Comma)?;
                    let y = c.expr()?;
                    c.expect(Tok::RParen)?;
                    FidelityTarget::Ket {
                        atom: ident_text(a).into(),
                        amps: [x, y],
                    }
                }
                other => {
                    return Err(err(
                        k.line,
                        k.col,
                        format!("expected `bell` or `ket`, found `{other}`"),
                    ))
                }
            };
            c.expect(Tok::Ge)?;
            Statement::Expect {
                target,
                threshold: c.expr()?,
            }
        }
        "correct" => {
            let t = c.ident("an atom label")?;
            if scope.atom(t)? != LevelPair::Fg {
                return Err(err(t.line, t.col, "corrections act on (f,g) atoms"));
            }
            c.keyword("from")?;
            let first = scope.var(c.ident("a variable")?)?;
            c.expect(Tok::Comma)?;
            let second = scope.var(c.ident("a variable")?)?;
            c.expect(Tok::Comma)?;
            Statement::Correct {
                atom: ident_text(t).into(),
                first,
                second,
                sign: c.expr()?,
            }
        }
        "reset" => {
            c.keyword("coherent")?;
            Statement::Reset { alpha: c.expr()? }
        }
        "report" => {
            let mut vars = Vec::new();
            if c.peek().is_some() {
                loop {
                    vars.push(scope.var(c.ident("a variable")?)?);
                    if !c.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            scope.reported = true;
            Statement::Report { vars }
        }
        other => {
            return Err(err(
                head.line,
                head.col,
                format!("unknown statement `{other}`"),
            ))
        }
    };
    c.end()?;
    if kw != "cavity" {
        scope.need_cavity(head)?;
    }
    Ok(stmt)
}

/// Parses a `.cqp` script, checking declarations, level pairs and statement
/// order. Errors carry the line and column of the offending token.
pub fn parse_script(text: &str) -> Result<ProtocolScript> {
    let mut scope = Scope::default();
    let mut statements = Vec::new();
    let mut source_map = Vec::new();
    for line in tokenize(text)? {
        let mut c = Cursor {
            toks: &line,
            pos: 0,
        };
        let span = Span {
            line: line[0].line,
            col: line[0].col,
        };
        statements.push(statement(&mut c, &mut scope)?);
        source_map.push(span);
    }
    if !scope.cavity {
        return Err(err(1, 1, "missing cavity declaration"));
    }
    Ok(ProtocolScript {
        statements,
        source_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_err(text: &str) -> (usize, usize, String) {
        match parse_script(text).unwrap_err() {
            Error::Parse { line, col, message } => (line, col, message),
            other => panic!("not a parse error: {other}"),
        }
    }

    #[test]
    fn minimal_script() {
        let s = parse_script("cavity coherent -2.0\natom A1 levels (f,g) init g\nrotate A1 R_H")
            .unwrap();
        assert_eq!(s.statements.len(), 3);
        assert_eq!(
            s.statements[0],
            Statement::Cavity {
                alpha: Expr::real(-2.0)
            }
        );
        assert_eq!(s.source_map[2], Span { line: 3, col: 1 });
    }

    #[test]
    fn undeclared_label_position() {
        let (line, col, msg) = parse_err("cavity coherent 1\nrotate A9 R_H");
        assert_eq!((line, col), (2, 8));
        assert!(msg.contains("A9"));
        let (line, col, _) = parse_err("rotate A9 R_H");
        assert_eq!((line, col), (1, 8));
        assert!(parse_err("atom A levels (f,g) init g").2.contains("cavity"));
    }

    #[test]
    fn structural_errors() {
        assert_eq!(parse_err("cavity coherent 1\ncavity coherent 2").0, 2);
        assert!(parse_err("cavity coherent 1\nreport\ninject 1")
            .2
            .contains("report"));
        assert!(parse_err("# nothing").2.contains("missing cavity"));
        assert!(parse_err("cavity coherent 1\natom A levels (f,g) init e")
            .2
            .contains("level pair"));
        assert!(parse_err("cavity coherent 1\natom A levels (g,e) init g")
            .2
            .contains("(f,g) or (f,e)"));
        assert!(
            parse_err("cavity coherent 1\natom A levels (f,g) init f\njc A gt=1")
                .2
                .contains("(f,e)")
        );
        assert!(
            parse_err("cavity coherent 1\natom P levels (f,e) init f\ndispersive P phi=pi")
                .2
                .contains("(f,g)")
        );
        assert!(parse_err(
            "cavity coherent 1\natom A levels (f,g) init f\natom A levels (f,g) init f"
        )
        .2
        .contains("already"));
        assert!(parse_err(
            "cavity coherent 1\natom A levels (f,g) init f\nrotate A [[1, 1], [0, 1]]"
        )
        .2
        .contains("unitary"));
        assert!(parse_err("cavity coherent 1/0").2.contains("non-finite"));
        assert!(parse_err("cavity coherent 1\nreport m")
            .2
            .contains("undefined"));
        assert!(parse_err("cavity coherent 1 2").2.contains("unexpected"));
        assert!(parse_err("cavity coherent foo").2.contains("unknown name"));
    }

    #[test]
    fn constant_folding() {
        let s = parse_script("cavity coherent -sqrt(4) * (1 + 1)\ninject pi/(4*${alpha})").unwrap();
        assert_eq!(
            s.statements[0],
            Statement::Cavity {
                alpha: Expr::real(-4.0)
            }
        );
        match &s.statements[1] {
            Statement::Inject {
                beta: Expr::Bin(BinOp::Div, a, _),
            } => {
                assert_eq!(**a, Expr::real(std::f64::consts::PI))
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(s.parameters(), vec!["alpha".to_string()]);
    }

    #[test]
    fn all_statement_forms() {
        let text = "\
cavity coherent -${alpha}
atom A levels (f,g) init g
atom B levels (f,g) init f
atom P levels (f,e) init f
rotate A [[${z}, -conj(${x})], [${x}, conj(${z})]]
dispersive A phi=pi
inject 2 + 0.5*i
jc P gt=pi/8
postselect P e
measure A as m1
measure B as m2
correct B from m1, m2, -1
expect fidelity bell psi- A B >= 0.9
expect fidelity ket B (1, 0) >= 1 - 1e-9
reset coherent 1
report m1, m2
";
        let s = parse_script(text).unwrap();
        assert_eq!(s.statements.len(), 16);
        assert_eq!(s.operations().count(), 12);
        let again = parse_script(&s.to_string()).unwrap();
        assert_eq!(again.statements, s.statements);
    }
}
