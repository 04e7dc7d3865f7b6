//! A small arithmetic expression parser used by coefficient specs.
//!
//! Grammar (usual precedence, `^` is right-associative):
//!
//! ```text
//! expr    := term  (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := unary ('^' factor)?
//! unary   := '-' unary | primary
//! primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `name` is the free variable the expression was parsed for (`x` for spatial
//! coefficients, `t` for temporal ones), one of the constants `pi`, `e`, or a
//! function: `sin cos tan sinh cosh tanh exp ln log sqrt abs sign floor ceil
//! min max`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Fn1(Func1, Box<Node>),
    Fn2(Func2, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, Copy)]
enum Func1 {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
    Floor,
    Ceil,
}

#[derive(Debug, Clone, Copy)]
enum Func2 {
    Min,
    Max,
}

/// A parsed expression in one free variable.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    source: String,
}

impl Expression {
    /// Parse `source` with `var` as the free variable name.
    pub fn parse(source: &str, var: &str) -> Result<Expression> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            var,
            source,
        };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expr(format!(
                "trailing tokens after position {} in `{source}`",
                parser.pos
            )));
        }
        Ok(Expression {
            root,
            source: source.to_owned(),
        })
    }

    pub fn eval(&self, value: f64) -> f64 {
        eval_node(&self.root, value)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

fn eval_node(node: &Node, x: f64) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var => x,
        Node::Neg(a) => -eval_node(a, x),
        Node::Add(a, b) => eval_node(a, x) + eval_node(b, x),
        Node::Sub(a, b) => eval_node(a, x) - eval_node(b, x),
        Node::Mul(a, b) => eval_node(a, x) * eval_node(b, x),
        Node::Div(a, b) => eval_node(a, x) / eval_node(b, x),
        Node::Pow(a, b) => eval_node(a, x).powf(eval_node(b, x)),
        Node::Fn1(f, a) => {
            let v = eval_node(a, x);
            match f {
                Func1::Sin => v.sin(),
                Func1::Cos => v.cos(),
                Func1::Tan => v.tan(),
                Func1::Sinh => v.sinh(),
                Func1::Cosh => v.cosh(),
                Func1::Tanh => v.tanh(),
                Func1::Exp => v.exp(),
                Func1::Ln => v.ln(),
                Func1::Sqrt => v.sqrt(),
                Func1::Abs => v.abs(),
                Func1::Sign => {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
                Func1::Floor => v.floor(),
                Func1::Ceil => v.ceil(),
            }
        }
        Node::Fn2(f, a, b) => {
            let u = eval_node(a, x);
            let v = eval_node(b, x);
            match f {
                Func2::Min => u.min(v),
                Func2::Max => u.max(v),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent suffix
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number `{text}` in `{src}`")))?;
                tokens.push(Token::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                tokens.push(Token::Name(src[start..i].to_owned()));
            }
            other => {
                return Err(Error::Expr(format!("unexpected character `{other}` in `{src}`")));
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    var: &'a str,
    source: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        match self.bump() {
            Some(t) if t == want => Ok(()),
            other => Err(Error::Expr(format!(
                "expected {want:?}, found {other:?} in `{}`",
                self.source
            ))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut node = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    node = Node::Add(Box::new(node), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    node = Node::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut node = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    node = Node::Mul(Box::new(node), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    node = Node::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        let base = self.unary()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Node> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            // negation binds looser than `^`: -x^2 is -(x^2)
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Node::Num(v)),
            Some(Token::LParen) => {
                let node = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(node)
            }
            Some(Token::Name(name)) => self.name(&name),
            other => Err(Error::Expr(format!(
                "unexpected token {other:?} in `{}`",
                self.source
            ))),
        }
    }

    fn name(&mut self, name: &str) -> Result<Node> {
        if name == self.var {
            return Ok(Node::Var);
        }
        match name {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            _ => {}
        }
        let f1 = match name {
            "sin" => Some(Func1::Sin),
            "cos" => Some(Func1::Cos),
            "tan" => Some(Func1::Tan),
            "sinh" => Some(Func1::Sinh),
            "cosh" => Some(Func1::Cosh),
            "tanh" => Some(Func1::Tanh),
            "exp" => Some(Func1::Exp),
            "ln" | "log" => Some(Func1::Ln),
            "sqrt" => Some(Func1::Sqrt),
            "abs" => Some(Func1::Abs),
            "sign" => Some(Func1::Sign),
            "floor" => Some(Func1::Floor),
            "ceil" => Some(Func1::Ceil),
            _ => None,
        };
        if let Some(f) = f1 {
            self.expect(Token::LParen)?;
            let arg = self.expr()?;
            self.expect(Token::RParen)?;
            return Ok(Node::Fn1(f, Box::new(arg)));
        }
        let f2 = match name {
            "min" => Some(Func2::Min),
            "max" => Some(Func2::Max),
            _ => None,
        };
        if let Some(f) = f2 {
            self.expect(Token::LParen)?;
            let a = self.expr()?;
            self.expect(Token::Comma)?;
            let b = self.expr()?;
            self.expect(Token::RParen)?;
            return Ok(Node::Fn2(f, Box::new(a), Box::new(b)));
        }
        Err(Error::Expr(format!(
            "unknown name `{name}` in `{}` (free variable here is `{}`)",
            self.source, self.var
        )))
    }
}
