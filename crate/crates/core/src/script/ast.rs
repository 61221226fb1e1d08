use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::hilbert::{Level, LevelPair, C64};
use crate::protocols::BellKind;
use crate::qops::GatePreset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Conj,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Conj => "conj",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(C64),
    Pi,
    I,
    Param(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn real(x: f64) -> Self {
        Expr::Num(C64::new(x, 0.0))
    }

    /// Evaluates with `${name}` looked up in `params`; `Err(name)` names the
    /// first unbound parameter.
    pub fn eval(&self, params: &BTreeMap<String, f64>) -> std::result::Result<C64, String> {
        Ok(match self {
            Expr::Num(c) => *c,
            Expr::Pi => C64::new(PI, 0.0),
            Expr::I => C64::new(0.0, 1.0),
            Expr::Param(name) => C64::new(*params.get(name).ok_or_else(|| name.clone())?, 0.0),
            Expr::Neg(e) => -e.eval(params)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(params)?, b.eval(params)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(params)?;
                match f {
                    Func::Sqrt => v.sqrt(),
                    Func::Conj => v.conj(),
                }
            }
        })
    }

    pub fn params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(name) => out.push(name.clone()),
            Expr::Neg(e) | Expr::Call(_, e) => e.params(out),
            Expr::Bin(_, a, b) => {
                a.params(out);
                b.params(out);
            }
            Expr::Num(_) | Expr::Pi | Expr::I => {}
        }
    }

    /// Collapses every parameter-free subtree to a literal.
    pub fn fold(self) -> Expr {
        let folded = match self {
            Expr::Neg(e) => Expr::Neg(Box::new(e.fold())),
            Expr::Bin(op, a, b) => Expr::Bin(op, Box::new(a.fold()), Box::new(b.fold())),
            Expr::Call(f, e) => Expr::Call(f, Box::new(e.fold())),
            other => other,
        };
        let constant = match &folded {
            Expr::Pi | Expr::I => true,
            Expr::Neg(e) | Expr::Call(_, e) => matches!(**e, Expr::Num(_)),
            Expr::Bin(_, a, b) => matches!(**a, Expr::Num(_)) && matches!(**b, Expr::Num(_)),
            _ => false,
        };
        if constant {
            let v = folded.eval(&BTreeMap::new()).expect("no parameters");
            Expr::Num(v)
        } else {
            folded
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, _, _) => op.precedence(),
            // printed as `b*i`
            Expr::Num(c) if c.im != 0.0 && c.re == 0.0 => 2,
            Expr::Num(c) if c.im == 0.0 && c.re < 0.0 => 3,
            Expr::Neg(_) => 3,
            _ => 4,
        }
    }
}

fn fmt_real(x: f64) -> String {
    // `{}` on f64 prints the shortest string that parses back to the same value
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) if c.im == 0.0 => f.write_str(&fmt_real(c.re)),
            Expr::Num(c) if c.re == 0.0 => write!(f, "{}*i", fmt_real(c.im)),
            Expr::Num(c) => write!(f, "({} + {}*i)", fmt_real(c.re), fmt_real(c.im)),
            Expr::Pi => f.write_str("pi"),
            Expr::I => f.write_str("i"),
            Expr::Param(name) => write!(f, "${{{name}}}"),
            Expr::Neg(e) => {
                if e.precedence() < 4 {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // left-associative: equal precedence on the right needs parens
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateSpec {
    Preset(GatePreset),
    /// Row-major; column `j` is the image of level index `j`.
    Matrix(Box<[[Expr; 2]; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FidelityTarget {
    Bell {
        kind: BellKind,
        first: String,
        second: String,
    },
    Ket {
        atom: String,
        amps: [Expr; 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Cavity {
        alpha: Expr,
    },
    Atom {
        label: String,
        basis: LevelPair,
        init: Level,
    },
    Rotate {
        atom: String,
        gate: GateSpec,
    },
    Dispersive {
        atom: String,
        phi: Expr,
    },
    Inject {
        beta: Expr,
    },
    Jc {
        atom: String,
        gt: Expr,
    },
    Measure {
        atom: String,
        var: String,
    },
    Postselect {
        atom: String,
        level: Level,
    },
    Expect {
        target: FidelityTarget,
        threshold: Expr,
    },
    Correct {
        atom: String,
        first: String,
        second: String,
        sign: Expr,
    },
    Reset {
        alpha: Expr,
    },
    Report {
        vars: Vec<String>,
    },
}

impl Statement {
    pub fn keyword(&self) -> &'static str {
        match self {
            Statement::Cavity { .. } => "cavity",
            Statement::Atom { .. } => "atom",
            Statement::Rotate { .. } => "rotate",
            Statement::Dispersive { .. } => "dispersive",
            Statement::Inject { .. } => "inject",
            Statement::Jc { .. } => "jc",
            Statement::Measure { .. } => "measure",
            Statement::Postselect { .. } => "postselect",
            Statement::Expect { .. } => "expect",
            Statement::Correct { .. } => "correct",
            Statement::Reset { .. } => "reset",
            Statement::Report { .. } => "report",
        }
    }

    pub fn expressions(&self) -> Vec<&Expr> {
        match self {
            Statement::Cavity { alpha } | Statement::Reset { alpha } => vec![alpha],
            Statement::Rotate {
                gate: GateSpec::Matrix(m),
                ..
            } => m.iter().flatten().collect(),
            Statement::Dispersive { phi, .. } => vec![phi],
            Statement::Inject { beta } => vec![beta],
            Statement::Jc { gt, .. } => vec![gt],
            Statement::Expect { target, threshold } => match target {
                FidelityTarget::Ket { amps, .. } => vec![&amps[0], &amps[1], threshold],
                FidelityTarget::Bell { .. } => vec![threshold],
            },
            Statement::Correct { sign, .. } => vec![sign],
            _ => Vec::new(),
        }
    }

    pub fn is_declaration(&self) -> bool {
        matches!(self, Statement::Cavity { .. } | Statement::Atom { .. })
    }
}

fn basis_text(b: LevelPair) -> &'static str {
    match b {
        LevelPair::Fg => "(f,g)",
        LevelPair::Fe => "(f,e)",
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Cavity { alpha } => write!(f, "cavity coherent {alpha}"),
            Statement::Atom { label, basis, init } => {
                write!(f, "atom {label} levels {} init {init}", basis_text(*basis))
            }
            Statement::Rotate { atom, gate } => match gate {
                GateSpec::Preset(p) => write!(f, "rotate {atom} {p}"),
                GateSpec::Matrix(m) => write!(
                    f,
                    "rotate {atom} [[{}, {}], [{}, {}]]",
                    m[0][0], m[0][1], m[1][0], m[1][1]
                ),
            },
            Statement::Dispersive { atom, phi } => write!(f, "dispersive {atom} phi={phi}"),
            Statement::Inject { beta } => write!(f, "inject {beta}"),
            Statement::Jc { atom, gt } => write!(f, "jc {atom} gt={gt}"),
            Statement::Measure { atom, var } => write!(f, "measure {atom} as {var}"),
            Statement::Postselect { atom, level } => write!(f, "postselect {atom} {level}"),
            Statement::Expect { target, threshold } => match target {
                FidelityTarget::Bell {
                    kind,
                    first,
                    second,
                } => {
                    write!(
                        f,
                        "expect fidelity bell {kind} {first} {second} >= {threshold}"
                    )
                }
                FidelityTarget::Ket { atom, amps } => {
                    write!(
                        f,
                        "expect fidelity ket {atom} ({}, {}) >= {threshold}",
                        amps[0], amps[1]
                    )
                }
            },
            Statement::Correct {
                atom,
                first,
                second,
                sign,
            } => {
                write!(f, "correct {atom} from {first}, {second}, {sign}")
            }
            Statement::Reset { alpha } => write!(f, "reset coherent {alpha}"),
            Statement::Report { vars } => {
                f.write_str("report")?;
                if !vars.is_empty() {
                    write!(f, " {}", vars.join(", "))?;
                }
                Ok(())
            }
        }
    }
}

/// Source position of a statement (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolScript {
    pub statements: Vec<Statement>,
    /// `source_map[i]` locates `statements[i]`.
    pub source_map: Vec<Span>,
}

impl ProtocolScript {
    /// Statements other than the cavity and atom declarations.
    pub fn operations(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().filter(|s| !s.is_declaration())
    }

    /// Names of all `${...}` parameters, sorted and deduplicated.
    pub fn parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.statements {
            for e in s.expressions() {
                e.params(&mut out);
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Canonical text: one statement per line, single spaces, lowercase keywords.
impl fmt::Display for ProtocolScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
