use crate::error::{Error, Result};

/// Parsed arithmetic expression over named variables.
///
/// Supports `+ - * /`, `^` or `**` (right associative), parentheses,
/// numeric literals and the functions `sin cos tan exp log sqrt abs tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    node: Node,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    Pow,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = lex(src)?;
        let mut p = Parser { toks, pos: 0, src };
        let node = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Config(format!("unexpected trailing input in '{src}'")));
        }
        Ok(Expr { node })
    }

    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        collect(&self.node, &mut out);
        out
    }

    /// Evaluates with `lookup` resolving each variable name.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        eval(&self.node, lookup)
    }
}

fn collect(n: &Node, out: &mut Vec<String>) {
    match n {
        Node::Num(_) => {}
        Node::Var(v) => {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        Node::Neg(a) | Node::Call(_, a) => collect(a, out),
        Node::Bin(_, a, b) => {
            collect(a, out);
            collect(b, out);
        }
    }
}

fn eval(n: &Node, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
    Ok(match n {
        Node::Num(v) => *v,
        Node::Var(name) => lookup(name).ok_or_else(|| Error::Data(format!("unknown variable '{name}'")))?,
        Node::Neg(a) => -eval(a, lookup)?,
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, lookup)?, eval(b, lookup)?);
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
                Op::Pow => match y {
                    y if y == y.trunc() && y.abs() <= 64.0 => x.powi(y as i32),
                    _ => x.powf(y),
                },
            }
        }
        Node::Call(f, a) => {
            let x = eval(a, lookup)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
                Func::Tanh => x.tanh(),
            }
        }
    })
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse().map_err(|_| Error::Config(format!("bad number '{s}' in '{src}'")))?;
            toks.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c == '*' && chars.get(i + 1) == Some(&'*') {
            toks.push(Tok::Pow);
            i += 2;
        } else if c == '^' {
            toks.push(Tok::Pow);
            i += 1;
        } else if "+-*/(),".contains(c) {
            toks.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Config(format!("unexpected character '{c}' in '{src}'")));
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn err<T>(&self, what: &str) -> Result<T> {
        Err(Error::Config(format!("{what} in expression '{}'", self.src)))
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Pow) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "tan" => Func::Tan,
                        "exp" => Func::Exp,
                        "log" | "ln" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        "tanh" => Func::Tanh,
                        _ => return self.err(&format!("unknown function '{name}'")),
                    };
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return self.err("missing ')'");
                    }
                    Ok(Node::Call(f, Box::new(arg)))
                } else {
                    Ok(Node::Var(name))
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("missing ')'");
                }
                Ok(e)
            }
            _ => self.err("expected a value"),
        }
    }
}
