//! Closed-form scalar expressions: parsing, evaluation, symbolic
//! differentiation.
//!
//! Expressions are immutable after parse; evaluation is reentrant and safe
//! to call from multiple threads. Simplification is limited to constant
//! folding and 0/1 identities — correctness over normal form.

mod compiled;
mod parse;
mod token;

pub use compiled::CompiledExpr;

use std::fmt;
use std::sync::Arc;

/// Binary operators, in `^`-binds-tightest precedence order.
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// The supported single-argument functions.
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    Atan,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "tan" => Some(Func::Tan),
            "sinh" => Some(Func::Sinh),
            "cosh" => Some(Func::Cosh),
            "tanh" => Some(Func::Tanh),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            "atan" => Some(Func::Atan),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Atan => "atan",
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
            Func::Atan => x.atan(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    UnknownIdentifier(String),
    ExpectedCall(String),
    ExpectedClose(String),
    InvalidNumber(String),
    ReservedName(String),
    DuplicateName(String),
}

/// Syntax or name-resolution error, with the byte offset it occurred at.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{} at byte {offset}", self.describe())]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl ParseError {
    fn describe(&self) -> String {
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => format!("unexpected character `{c}`"),
            ParseErrorKind::UnexpectedToken(t) => format!("unexpected {t}"),
            ParseErrorKind::UnexpectedEnd => "unexpected end of input".into(),
            ParseErrorKind::UnknownIdentifier(n) => format!("unknown identifier `{n}`"),
            ParseErrorKind::ExpectedCall(n) => format!("`{n}` is a function and needs `(`"),
            ParseErrorKind::ExpectedClose(t) => format!("expected `)`, found {t}"),
            ParseErrorKind::InvalidNumber(t) => format!("invalid number `{t}`"),
            ParseErrorKind::ReservedName(n) => format!("`{n}` is reserved and cannot be a variable"),
            ParseErrorKind::DuplicateName(n) => format!("duplicate variable `{n}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalFault {
    LogNonPositive(f64),
    SqrtNegative(f64),
    DivisionByZero,
    NonFinite,
    WrongArity { expected: usize, got: usize },
}

/// Domain fault during evaluation, reported with the offending subexpression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("domain fault in `{subexpr}`: {}", self.describe())]
pub struct EvalError {
    pub fault: EvalFault,
    pub subexpr: String,
}

impl EvalError {
    fn describe(&self) -> String {
        match &self.fault {
            EvalFault::LogNonPositive(v) => format!("log of non-positive value {v}"),
            EvalFault::SqrtNegative(v) => format!("sqrt of negative value {v}"),
            EvalFault::DivisionByZero => "division by zero".into(),
            EvalFault::NonFinite => "result is not a number".into(),
            EvalFault::WrongArity { expected, got } => {
                format!("expected {expected} bindings, got {got}")
            }
        }
    }
}

/// A parsed scalar expression over a fixed list of variables.
///
/// The free identifiers of the tree are always a subset of `vars`; `pi` and
/// `e` fold to literals at parse time.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    node: Node,
    vars: Arc<Vec<String>>,
}

impl Expression {
    /// Parse `src` against the declared variable list.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expression, ParseError> {
        let names: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        for (i, name) in names.iter().enumerate() {
            if Func::from_name(name).is_some() || name == "pi" || name == "e" {
                return Err(ParseError {
                    kind: ParseErrorKind::ReservedName(name.clone()),
                    offset: 0,
                });
            }
            if names[..i].contains(name) {
                return Err(ParseError {
                    kind: ParseErrorKind::DuplicateName(name.clone()),
                    offset: 0,
                });
            }
        }
        let node = parse::Parser::new(src, &names)?.parse()?;
        Ok(Expression {
            node: simplify(node),
            vars: Arc::new(names),
        })
    }

    /// Build the constant expression `value`.
    pub fn constant(value: f64, vars: &[&str]) -> Expression {
        Expression {
            node: Node::Num(value),
            vars: Arc::new(vars.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Evaluate with positional bindings matching the declared variables.
    pub fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        if args.len() != self.vars.len() {
            return Err(EvalError {
                fault: EvalFault::WrongArity {
                    expected: self.vars.len(),
                    got: args.len(),
                },
                subexpr: self.to_string(),
            });
        }
        eval_node(&self.node, args, &self.vars)
    }

    /// Symbolic derivative with respect to `var`. The result evaluates to
    /// d self/d var at every non-fault point.
    pub fn differentiate(&self, var: &str) -> Result<Expression, ParseError> {
        let idx = self.vars.iter().position(|v| v == var).ok_or(ParseError {
            kind: ParseErrorKind::UnknownIdentifier(var.to_string()),
            offset: 0,
        })?;
        Ok(Expression {
            node: simplify(d_node(&self.node, idx)),
            vars: self.vars.clone(),
        })
    }

    /// Fix `var` to a numeric value, removing it from the variable list.
    /// Constant subtrees created by the substitution are folded.
    pub fn bind(&self, var: &str, value: f64) -> Result<Expression, ParseError> {
        let idx = self.vars.iter().position(|v| v == var).ok_or(ParseError {
            kind: ParseErrorKind::UnknownIdentifier(var.to_string()),
            offset: 0,
        })?;
        let remap: Vec<Option<usize>> = (0..self.vars.len())
            .map(|i| {
                if i == idx {
                    None
                } else if i < idx {
                    Some(i)
                } else {
                    Some(i - 1)
                }
            })
            .collect();
        let vars: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, v)| v.clone())
            .collect();
        Ok(Expression {
            node: simplify(substitute(&self.node, value, &remap, idx)),
            vars: Arc::new(vars),
        })
    }

    /// Compile to a flat postfix program for hot evaluation loops.
    pub fn compile(&self) -> CompiledExpr {
        CompiledExpr::from_node(&self.node, self.vars.len())
    }

    /// Combine two expressions over the same variable list with a binary op.
    pub fn combine(op: BinOp, a: &Expression, b: &Expression) -> Expression {
        debug_assert_eq!(a.vars, b.vars);
        Expression {
            node: simplify(Node::Bin(
                op,
                Box::new(a.node.clone()),
                Box::new(b.node.clone()),
            )),
            vars: a.vars.clone(),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.node, &self.vars, 0)
    }
}

fn substitute(node: &Node, value: f64, remap: &[Option<usize>], target: usize) -> Node {
    match node {
        Node::Num(v) => Node::Num(*v),
        Node::Var(i) if *i == target => Node::Num(value),
        Node::Var(i) => Node::Var(remap[*i].expect("remapped variable")),
        Node::Neg(x) => Node::Neg(Box::new(substitute(x, value, remap, target))),
        Node::Bin(op, a, b) => Node::Bin(
            *op,
            Box::new(substitute(a, value, remap, target)),
            Box::new(substitute(b, value, remap, target)),
        ),
        Node::Call(f, x) => Node::Call(*f, Box::new(substitute(x, value, remap, target))),
    }
}

fn eval_node(node: &Node, args: &[f64], vars: &[String]) -> Result<f64, EvalError> {
    let fault = |node: &Node, fault: EvalFault| EvalError {
        fault,
        subexpr: render(node, vars),
    };
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var(i) => Ok(args[*i]),
        Node::Neg(x) => Ok(-eval_node(x, args, vars)?),
        Node::Bin(op, a, b) => {
            let x = eval_node(a, args, vars)?;
            let y = eval_node(b, args, vars)?;
            let v = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(fault(node, EvalFault::DivisionByZero));
                    }
                    x / y
                }
                BinOp::Pow => x.powf(y),
            };
            if v.is_nan() && x.is_finite() && y.is_finite() {
                return Err(fault(node, EvalFault::NonFinite));
            }
            Ok(v)
        }
        Node::Call(f, x) => {
            let v = eval_node(x, args, vars)?;
            match f {
                Func::Log if v <= 0.0 => return Err(fault(node, EvalFault::LogNonPositive(v))),
                Func::Sqrt if v < 0.0 => return Err(fault(node, EvalFault::SqrtNegative(v))),
                _ => {}
            }
            let out = f.apply(v);
            if out.is_nan() && v.is_finite() {
                return Err(fault(node, EvalFault::NonFinite));
            }
            Ok(out)
        }
    }
}

fn d_node(node: &Node, var: usize) -> Node {
    use BinOp::*;
    let num = Node::Num;
    match node {
        Node::Num(_) => num(0.0),
        Node::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(x) => Node::Neg(Box::new(d_node(x, var))),
        Node::Bin(Add, a, b) => bin(Add, d_node(a, var), d_node(b, var)),
        Node::Bin(Sub, a, b) => bin(Sub, d_node(a, var), d_node(b, var)),
        Node::Bin(Mul, a, b) => bin(
            Add,
            bin(Mul, d_node(a, var), (**b).clone()),
            bin(Mul, (**a).clone(), d_node(b, var)),
        ),
        Node::Bin(Div, a, b) => bin(
            Div,
            bin(
                Sub,
                bin(Mul, d_node(a, var), (**b).clone()),
                bin(Mul, (**a).clone(), d_node(b, var)),
            ),
            bin(Pow, (**b).clone(), num(2.0)),
        ),
        Node::Bin(Pow, a, b) => match (&**a, &**b) {
            // a^c with constant exponent: c * a^(c-1) * a'
            (_, Node::Num(c)) => bin(
                Mul,
                bin(
                    Mul,
                    num(*c),
                    bin(Pow, (**a).clone(), num(c - 1.0)),
                ),
                d_node(a, var),
            ),
            // c^b with constant base: c^b * ln(c) * b'
            (Node::Num(c), _) => bin(
                Mul,
                bin(Mul, node.clone(), num(c.ln())),
                d_node(b, var),
            ),
            // general a^b = a^b * (b' ln a + b a'/a)
            _ => bin(
                Mul,
                node.clone(),
                bin(
                    Add,
                    bin(Mul, d_node(b, var), Node::Call(Func::Log, a.clone())),
                    bin(Div, bin(Mul, (**b).clone(), d_node(a, var)), (**a).clone()),
                ),
            ),
        },
        Node::Call(f, x) => {
            let inner = d_node(x, var);
            let outer = match f {
                Func::Sin => Node::Call(Func::Cos, x.clone()),
                Func::Cos => Node::Neg(Box::new(Node::Call(Func::Sin, x.clone()))),
                Func::Tan => bin(
                    Div,
                    num(1.0),
                    bin(Pow, Node::Call(Func::Cos, x.clone()), num(2.0)),
                ),
                Func::Sinh => Node::Call(Func::Cosh, x.clone()),
                Func::Cosh => Node::Call(Func::Sinh, x.clone()),
                Func::Tanh => bin(
                    Div,
                    num(1.0),
                    bin(Pow, Node::Call(Func::Cosh, x.clone()), num(2.0)),
                ),
                Func::Exp => node.clone(),
                Func::Log => bin(Div, num(1.0), (**x).clone()),
                Func::Sqrt => bin(Div, num(0.5), node.clone()),
                // derivative of |x| is x/|x|; faults at x = 0, which is the
                // honest answer for a kink
                Func::Abs => bin(Div, (**x).clone(), node.clone()),
                Func::Atan => bin(
                    Div,
                    num(1.0),
                    bin(Add, num(1.0), bin(Pow, (**x).clone(), num(2.0))),
                ),
            };
            bin(Mul, outer, inner)
        }
    }
}

fn bin(op: BinOp, a: Node, b: Node) -> Node {
    Node::Bin(op, Box::new(a), Box::new(b))
}

/// Constant folding plus 0/1 identities. Folding never introduces a fault:
/// constant subtrees that would fault are left as written.
fn simplify(node: Node) -> Node {
    match node {
        Node::Num(_) | Node::Var(_) => node,
        Node::Neg(x) => match simplify(*x) {
            Node::Num(v) => Node::Num(-v),
            Node::Neg(inner) => *inner,
            other => Node::Neg(Box::new(other)),
        },
        Node::Call(f, x) => match simplify(*x) {
            Node::Num(v) => {
                let out = f.apply(v);
                if out.is_finite() {
                    Node::Num(out)
                } else {
                    Node::Call(f, Box::new(Node::Num(v)))
                }
            }
            other => Node::Call(f, Box::new(other)),
        },
        Node::Bin(op, a, b) => {
            let a = simplify(*a);
            let b = simplify(*b);
            use BinOp::*;
            if let (Node::Num(x), Node::Num(y)) = (&a, &b) {
                let v = match op {
                    Add => x + y,
                    Sub => x - y,
                    Mul => x * y,
                    Div => x / y,
                    Pow => x.powf(*y),
                };
                if v.is_finite() {
                    return Node::Num(v);
                }
            }
            match (op, &a, &b) {
                (Add, Node::Num(z), _) if *z == 0.0 => b,
                (Add, _, Node::Num(z)) if *z == 0.0 => a,
                (Sub, _, Node::Num(z)) if *z == 0.0 => a,
                (Sub, Node::Num(z), _) if *z == 0.0 => Node::Neg(Box::new(b)),
                (Mul, Node::Num(z), _) | (Mul, _, Node::Num(z)) if *z == 0.0 => Node::Num(0.0),
                (Mul, Node::Num(one), _) if *one == 1.0 => b,
                (Mul, _, Node::Num(one)) if *one == 1.0 => a,
                (Div, Node::Num(z), _) if *z == 0.0 => Node::Num(0.0),
                (Div, _, Node::Num(one)) if *one == 1.0 => a,
                (Pow, _, Node::Num(one)) if *one == 1.0 => a,
                (Pow, _, Node::Num(z)) if *z == 0.0 => Node::Num(1.0),
                (Pow, Node::Num(one), _) if *one == 1.0 => Node::Num(1.0),
                _ => Node::Bin(op, Box::new(a), Box::new(b)),
            }
        }
    }
}

fn render(node: &Node, vars: &[String]) -> String {
    let mut s = String::new();
    let _ = write_node(&mut s, node, vars, 0);
    s
}

/// Precedence-aware printer; `parent` is the binding strength of the context.
fn write_node(
    f: &mut dyn fmt::Write,
    node: &Node,
    vars: &[String],
    parent: u8,
) -> fmt::Result {
    let prec = match node {
        Node::Num(v) if *v < 0.0 => 3,
        Node::Num(_) | Node::Var(_) | Node::Call(..) => 5,
        Node::Neg(_) => 3,
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Bin(BinOp::Pow, ..) => 4,
    };
    let needs_paren = prec < parent;
    if needs_paren {
        f.write_str("(")?;
    }
    match node {
        Node::Num(v) => write!(f, "{v}")?,
        Node::Var(i) => f.write_str(&vars[*i])?,
        Node::Neg(x) => {
            f.write_str("-")?;
            write_node(f, x, vars, 4)?;
        }
        Node::Bin(op, a, b) => {
            let (sym, lp, rp) = match op {
                BinOp::Add => ("+", 1, 1),
                BinOp::Sub => ("-", 1, 2),
                BinOp::Mul => ("*", 2, 2),
                BinOp::Div => ("/", 2, 3),
                BinOp::Pow => ("^", 5, 4),
            };
            write_node(f, a, vars, lp)?;
            f.write_str(sym)?;
            write_node(f, b, vars, rp)?;
        }
        Node::Call(func, x) => {
            f.write_str(func.name())?;
            f.write_str("(")?;
            write_node(f, x, vars, 0)?;
            f.write_str(")")?;
        }
    }
    if needs_paren {
        f.write_str(")")?;
    }
    Ok(())
}
