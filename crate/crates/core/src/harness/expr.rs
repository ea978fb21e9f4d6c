//! Closed arithmetic expressions over the node coordinates.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | 'y' | 'pi' | call | '(' expr ')'
//! call  := ('exp' | 'sin' | 'cos' | 'gaussian') '(' expr (',' expr)* ')'
//! ```
//!
//! `gaussian(c, w)` is `exp(−(x − c)²/w²)` in 1-D and `gaussian(cx, cy, w)`
//! is `exp(−|(x, y) − (cx, cy)|²/w²)` in 2-D, so its peak value is 1.

use std::fmt;

use crate::error::{Error, Result};
use crate::lattice::{Grid, GridField};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Sin,
    Cos,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X => x,
            Node::Y => y,
            Node::Neg(a) => -a.eval(x, y),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Node::Call(f, args) => {
                let v: Vec<f64> = args.iter().map(|a| a.eval(x, y)).collect();
                match f {
                    Func::Exp => v[0].exp(),
                    Func::Sin => v[0].sin(),
                    Func::Cos => v[0].cos(),
                    Func::Gaussian if v.len() == 2 => (-((x - v[0]) / v[1]).powi(2)).exp(),
                    Func::Gaussian => {
                        let r2 = (x - v[0]).powi(2) + (y - v[1]).powi(2);
                        (-r2 / (v[2] * v[2])).exp()
                    }
                }
            }
        }
    }

    fn uses_coordinates(&self) -> bool {
        match self {
            Node::Num(_) => false,
            Node::X | Node::Y => true,
            Node::Neg(a) => a.uses_coordinates(),
            Node::Bin(_, a, b) => a.uses_coordinates() || b.uses_coordinates(),
            Node::Call(Func::Gaussian, _) => true,
            Node::Call(_, args) => args.iter().any(Node::uses_coordinates),
        }
    }
}

/// Integer exponents go through `powi` so that `x^2` is exactly `x*x`.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
}

impl Lexer {
    fn tokens(src: &str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer {
            chars: src.chars().collect(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            while lx.peek().is_some_and(char::is_whitespace) {
                lx.pos += 1;
            }
            let col = lx.pos + 1;
            let Some(c) = lx.peek() else {
                out.push((Tok::End, col));
                return Ok(out);
            };
            if c.is_ascii_digit() || c == '.' {
                out.push((lx.number()?, col));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = lx.pos;
                while lx.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    lx.pos += 1;
                }
                out.push((Tok::Ident(lx.chars[start..lx.pos].iter().collect()), col));
            } else if "+-*/^(),".contains(c) {
                lx.pos += 1;
                out.push((Tok::Sym(c), col));
            } else {
                return Err(expr_err(col, format!("unexpected character '{c}'")));
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<Tok> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| expr_err(start + 1, format!("malformed number '{text}'")))
    }
}

fn expr_err(column: usize, message: impl Into<String>) -> Error {
    Error::Expression {
        column,
        message: message.into(),
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(expr_err(self.col(), format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Tok::Sym('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Sym('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let col = self.col();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(&name, col),
            Tok::End => Err(expr_err(col, "unexpected end of expression")),
            Tok::Sym(c) => Err(expr_err(col, format!("unexpected '{c}'"))),
        }
    }

    fn ident(&mut self, name: &str, col: usize) -> Result<Node> {
        let func = match name {
            "x" => return Ok(Node::X),
            "y" if self.dim == 2 => return Ok(Node::Y),
            "y" => return Err(expr_err(col, "'y' is only available on 2-D grids")),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "gaussian" => Func::Gaussian,
            _ => return Err(expr_err(col, format!("unknown name '{name}'"))),
        };
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Sym(',') {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        let arity = match func {
            Func::Gaussian => self.dim + 1,
            _ => 1,
        };
        if args.len() != arity {
            return Err(expr_err(
                col,
                format!("{name} takes {arity} argument(s) here, got {}", args.len()),
            ));
        }
        Ok(Node::Call(func, args))
    }
}

/// A parsed expression, bound to the grid dimension it was parsed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    dim: usize,
    root: Node,
}

impl Expr {
    pub fn parse(source: &str, dim: usize) -> Result<Expr> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidArgument(format!("expressions need dim 1 or 2, got {dim}")));
        }
        let mut p = Parser {
            toks: Lexer::tokens(source)?,
            pos: 0,
            dim,
        };
        let root = p.expr()?;
        if *p.peek() != Tok::End {
            return Err(expr_err(p.col(), "unexpected trailing input"));
        }
        Ok(Expr {
            source: source.to_string(),
            dim,
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.root.eval(x, y)
    }

    /// The value when the expression does not depend on `x` or `y`.
    pub fn constant_value(&self) -> Option<f64> {
        (!self.root.uses_coordinates()).then(|| self.root.eval(0.0, 0.0))
    }

    /// Samples the expression at every node; non-finite values are an error.
    pub fn sample(&self, grid: Grid) -> Result<GridField> {
        if grid.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "expression '{}' was parsed for dim {}, grid has dim {}",
                self.source,
                self.dim,
                grid.dim()
            )));
        }
        let field = GridField::from_fn(grid, |x, y| self.eval(x, y));
        if field.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("expression value"));
        }
        Ok(field)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
