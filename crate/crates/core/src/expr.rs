//! A small arithmetic language for user-supplied fields.
//!
//! Variables are `x`, `y`, `r` (= √(x²+y²)) and `theta`; the constant `pi`;
//! the functions `sin cos tan exp log sqrt atan abs`; the operators
//! `+ - * / ^`. Precedence from tightest: `^` (right associative), unary
//! minus, `* /`, `+ -` (left associative).

use std::fmt;

use thiserror::Error;

/// Parse failure. Positions are 1-based character offsets into the source.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    R,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Atan => v.atan(),
            Func::Abs => v.abs(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Evaluates at chart point `(x, y)` and direction angle `theta`.
    pub fn eval(&self, x: f64, y: f64, theta: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::R) => x.hypot(y),
            Expr::Var(Var::Theta) => theta,
            Expr::Neg(e) => -e.eval(x, y, theta),
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, y, theta);
                let b = b.eval(x, y, theta);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(x, y, theta)),
        }
    }

    /// Whether the variable occurs anywhere in the tree.
    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(var),
            Expr::Binary(_, a, b) => a.uses(var) || b.uses(var),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::R) => f.write_str("r"),
            Expr::Var(Var::Theta) => f.write_str("theta"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
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
            let lexeme: String = chars[start..i].iter().collect();
            let value = lexeme.parse::<f64>().map_err(|_| ExprError::Syntax {
                position: pos,
                message: format!("malformed number `{lexeme}`"),
            })?;
            tokens.push((Token::Number(value), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push((Token::Ident(chars[start..i].iter().collect()), pos));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                other => {
                    return Err(ExprError::Syntax {
                        position: pos,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            };
            tokens.push((tok, pos));
            i += 1;
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { position: self.position(), message: message.into() })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.error("expected `)`"),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let position = self.position();
        match self.peek().cloned() {
            Some(Token::Number(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if let Some(func) = Func::lookup(&name) {
                    match self.peek() {
                        Some(Token::LParen) => self.pos += 1,
                        _ => return self.error(format!("expected `(` after `{name}`")),
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "r" => Ok(Expr::Var(Var::R)),
                    "theta" => Ok(Expr::Var(Var::Theta)),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    _ => Err(ExprError::UnknownIdentifier { name, position }),
                }
            }
            Some(Token::Op(c)) => self.error(format!("unexpected operator `{c}`")),
            Some(Token::RParen) => self.error("unexpected `)`"),
            None => self.error("unexpected end of input"),
        }
    }
}

/// Parses `text` into an [`Expr`].
pub fn parse_expression(text: &str) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.chars().count() + 1 };
    let expr = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        return parser.error("unexpected trailing input");
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_over_variable() {
        let e = parse_expression("1/r").unwrap();
        assert_eq!(
            e,
            Expr::Binary(BinOp::Div, Box::new(Expr::Const(1.0)), Box::new(Expr::Var(Var::R)))
        );
        assert!((e.eval(3.0, 4.0, 0.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn unclosed_call_reports_end_position() {
        match parse_expression("sqrt(-1") {
            Err(ExprError::Syntax { position, .. }) => assert_eq!(position, 8),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_rejected() {
        match parse_expression("cot_K") {
            Err(ExprError::UnknownIdentifier { name, position }) => {
                assert_eq!(name, "cot_K");
                assert_eq!(position, 1);
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let at = |s: &str| parse_expression(s).unwrap().eval(2.0, 3.0, 0.5);
        assert_eq!(at("-x^2"), -4.0);
        assert_eq!(at("2^3^2"), 512.0);
        assert_eq!(at("2^-1"), 0.5);
        assert_eq!(at("8/2/2"), 2.0);
        assert_eq!(at("1-2-3"), -4.0);
        assert_eq!(at("x + y * 2"), 8.0);
        assert_eq!(at("(x + y) * 2"), 10.0);
        assert_eq!(at("1.5e1 + theta"), 15.5);
        assert!((at("cos(pi)") + 1.0).abs() < 1e-15);
    }

    #[test]
    fn uses_reports_theta() {
        assert!(parse_expression("cos(theta) + x").unwrap().uses(Var::Theta));
        assert!(!parse_expression("3*x").unwrap().uses(Var::Theta));
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(matches!(parse_expression("x y"), Err(ExprError::Syntax { position: 3, .. })));
        assert!(matches!(parse_expression("x $"), Err(ExprError::Syntax { position: 3, .. })));
        assert!(parse_expression("").is_err());
        assert!(parse_expression("sin x").is_err());
    }
}
