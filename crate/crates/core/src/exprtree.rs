//! Binary expression trees over quantity slots and literal constants.
//!
//! Grammar: decimal literals (optionally suffixed with `%`), slot symbols
//! `n1`, `n2`, ..., the operators `+ - * /` and parentheses. All operators are
//! left-associative; `*` and `/` bind tighter than `+` and `-`.

use std::fmt;

use thiserror::Error;

use crate::num::{parse_decimal, Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Add,
    Sub,
    Mul,
    Div,
}

impl Operator {
    pub fn symbol(self) -> char {
        match self {
            Operator::Add => '+',
            Operator::Sub => '-',
            Operator::Mul => '*',
            Operator::Div => '/',
        }
    }

    fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Operator::Add),
            '-' => Some(Operator::Sub),
            '*' => Some(Operator::Mul),
            '/' => Some(Operator::Div),
            _ => None,
        }
    }

    fn precedence(self) -> u8 {
        match self {
            Operator::Add | Operator::Sub => 1,
            Operator::Mul | Operator::Div => 2,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A numeric literal together with its source spelling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub text: String,
    pub value: Rational,
}

impl Literal {
    pub fn parse(text: &str) -> Option<Self> {
        let value = match text.strip_suffix('%') {
            Some(body) => parse_decimal(body)? / Rational::from_integer(100.into()),
            None => parse_decimal(text)?,
        };
        Some(Literal { text: text.to_string(), value })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Leaf {
    /// A number written directly in the expression.
    Literal(Literal),
    /// Zero-based quantity slot; rendered as `n{index + 1}`.
    Slot(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExpressionTree {
    Leaf(Leaf),
    Op {
        op: Operator,
        left: Box<ExpressionTree>,
        right: Box<ExpressionTree>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound quantity slot n{}", .0 + 1)]
    Unbound(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("leaf {leaf} has no atom label")]
pub struct UnlabeledLeaf {
    pub leaf: String,
}

impl ExpressionTree {
    pub fn op(op: Operator, left: ExpressionTree, right: ExpressionTree) -> Self {
        ExpressionTree::Op { op, left: Box::new(left), right: Box::new(right) }
    }

    pub fn slot(index: usize) -> Self {
        ExpressionTree::Leaf(Leaf::Slot(index))
    }

    pub fn literal(text: &str) -> Option<Self> {
        Literal::parse(text).map(|l| ExpressionTree::Leaf(Leaf::Literal(l)))
    }

    pub fn operator_count(&self) -> usize {
        match self {
            ExpressionTree::Leaf(_) => 0,
            ExpressionTree::Op { left, right, .. } => 1 + left.operator_count() + right.operator_count(),
        }
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Leaf>) {
        match self {
            ExpressionTree::Leaf(leaf) => out.push(leaf),
            ExpressionTree::Op { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Distinct slot indices referenced by the tree, ascending.
    pub fn slots(&self) -> Vec<usize> {
        let mut slots: Vec<usize> = self
            .leaves()
            .into_iter()
            .filter_map(|l| match l {
                Leaf::Slot(i) => Some(*i),
                Leaf::Literal(_) => None,
            })
            .collect();
        slots.sort_unstable();
        slots.dedup();
        slots
    }

    /// Rewrites every leaf through `f`, keeping the operator skeleton.
    pub fn map_leaves<F>(&self, f: &mut F) -> ExpressionTree
    where
        F: FnMut(&Leaf) -> ExpressionTree,
    {
        match self {
            ExpressionTree::Leaf(leaf) => f(leaf),
            ExpressionTree::Op { op, left, right } => {
                let l = left.map_leaves(f);
                let r = right.map_leaves(f);
                ExpressionTree::op(*op, l, r)
            }
        }
    }

    pub fn evaluate<T: Scalar>(&self, bindings: &[T]) -> Result<T, EvalError> {
        match self {
            ExpressionTree::Leaf(Leaf::Literal(lit)) => Ok(T::from_rational(&lit.value)),
            ExpressionTree::Leaf(Leaf::Slot(i)) => bindings.get(*i).cloned().ok_or(EvalError::Unbound(*i)),
            ExpressionTree::Op { op, left, right } => {
                let l = left.evaluate(bindings)?;
                let r = right.evaluate(bindings)?;
                Ok(match op {
                    Operator::Add => l + r,
                    Operator::Sub => l - r,
                    Operator::Mul => l * r,
                    Operator::Div => {
                        if r.is_zero() {
                            return Err(EvalError::DivisionByZero);
                        }
                        l / r
                    }
                })
            }
        }
    }

    /// Compound signatures, one per operator node, in post-order.
    ///
    /// `label` maps each leaf to its atom label. Operand order is kept: `+`
    /// and `*` are not commuted.
    pub fn compounds<F>(&self, label: &F) -> Result<Vec<String>, UnlabeledLeaf>
    where
        F: Fn(&Leaf) -> Option<String>,
    {
        let mut out = Vec::with_capacity(self.operator_count());
        self.signature_into(label, &mut out)?;
        Ok(out)
    }

    fn signature_into<F>(&self, label: &F, out: &mut Vec<String>) -> Result<String, UnlabeledLeaf>
    where
        F: Fn(&Leaf) -> Option<String>,
    {
        match self {
            ExpressionTree::Leaf(leaf) => label(leaf).ok_or_else(|| UnlabeledLeaf { leaf: leaf_text(leaf) }),
            ExpressionTree::Op { op, left, right } => {
                let l = left.signature_into(label, out)?;
                let r = right.signature_into(label, out)?;
                let sig = format!("({} {} {})", op.symbol(), l, r);
                out.push(sig.clone());
                Ok(sig)
            }
        }
    }

    fn fmt_with_parent(&self, f: &mut fmt::Formatter<'_>, parent: Option<(Operator, bool)>) -> fmt::Result {
        match self {
            ExpressionTree::Leaf(leaf) => write!(f, "{}", leaf_text(leaf)),
            ExpressionTree::Op { op, left, right } => {
                let needs_parens = match parent {
                    None => false,
                    Some((p, is_right)) => {
                        op.precedence() < p.precedence() || (is_right && op.precedence() == p.precedence())
                    }
                };
                if needs_parens {
                    write!(f, "(")?;
                }
                left.fmt_with_parent(f, Some((*op, false)))?;
                write!(f, " {} ", op.symbol())?;
                right.fmt_with_parent(f, Some((*op, true)))?;
                if needs_parens {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

fn leaf_text(leaf: &Leaf) -> String {
    match leaf {
        Leaf::Literal(lit) => lit.text.clone(),
        Leaf::Slot(i) => format!("n{}", i + 1),
    }
}

/// Infix rendering with the minimal parentheses that preserve the structure.
impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with_parent(f, None)
    }
}

impl std::str::FromStr for ExpressionTree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Number(String),
    Slot(usize),
    Op(Operator),
    Open,
    Close,
}

fn lex(input: &str) -> Result<Vec<(usize, Lexeme)>, ParseError> {
    let chars: Vec<char> = input.chars().collect();
    let mut out = Vec::new();
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
            if i < chars.len() && chars[i] == '%' {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            if Literal::parse(&text).is_none() {
                return Err(ParseError::Syntax { offset: start, message: format!("malformed number {text:?}") });
            }
            out.push((start, Lexeme::Number(text)));
        } else if c == 'n' {
            let start = i;
            i += 1;
            let digits_start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[digits_start..i].iter().collect();
            match digits.parse::<usize>() {
                Ok(n) if n >= 1 => out.push((start, Lexeme::Slot(n - 1))),
                _ => return Err(ParseError::Syntax { offset: start, message: "malformed slot symbol".into() }),
            }
        } else if let Some(op) = Operator::from_symbol(c) {
            out.push((i, Lexeme::Op(op)));
            i += 1;
        } else if c == '(' {
            out.push((i, Lexeme::Open));
            i += 1;
        } else if c == ')' {
            out.push((i, Lexeme::Close));
            i += 1;
        } else {
            return Err(ParseError::Syntax { offset: i, message: format!("unexpected character {c:?}") });
        }
    }
    Ok(out)
}

struct Parser {
    lexemes: Vec<(usize, Lexeme)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Lexeme> {
        self.lexemes.get(self.pos).map(|(_, l)| l)
    }

    fn offset(&self) -> usize {
        self.lexemes.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn error<T>(&self, message: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax { offset: self.offset(), message: message.to_string() })
    }

    fn expression(&mut self) -> Result<ExpressionTree, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Lexeme::Op(op @ (Operator::Add | Operator::Sub))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ExpressionTree::op(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExpressionTree, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(Lexeme::Op(op @ (Operator::Mul | Operator::Div))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = ExpressionTree::op(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ExpressionTree, ParseError> {
        match self.peek().cloned() {
            Some(Lexeme::Number(text)) => {
                self.pos += 1;
                let lit = Literal::parse(&text).expect("lexer validated the literal");
                Ok(ExpressionTree::Leaf(Leaf::Literal(lit)))
            }
            Some(Lexeme::Slot(i)) => {
                self.pos += 1;
                Ok(ExpressionTree::slot(i))
            }
            Some(Lexeme::Open) => {
                self.pos += 1;
                let inner = self.expression()?;
                match self.peek() {
                    Some(Lexeme::Close) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => self.error("expected ')'"),
                }
            }
            Some(_) => self.error("expected a number, slot or '('"),
            None => self.error("unexpected end of expression"),
        }
    }
}

/// Parses an infix expression. Error offsets count characters.
pub fn parse(input: &str) -> Result<ExpressionTree, ParseError> {
    let lexemes = lex(input)?;
    let mut parser = Parser { lexemes, pos: 0, end: input.chars().count() };
    let tree = parser.expression()?;
    if parser.pos != parser.lexemes.len() {
        return parser.error("unexpected trailing input");
    }
    Ok(tree)
}

/// Canonical form of a template string (`n1*n2/n3` → `n1 * n2 / n3`).
pub fn canonical_template(template: &str) -> Result<String, ParseError> {
    Ok(parse(template)?.to_string())
}
