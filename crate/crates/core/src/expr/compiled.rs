//! Flat postfix form of an expression for hot loops (quadrature panels,
//! Euler-Maruyama steps). Same fault rules as tree evaluation, but errors
//! are not annotated with the offending subexpression.

use super::{BinOp, EvalError, EvalFault, Func, Node};

#[derive(Debug, Clone)]
enum Op {
    Num(f64),
    Var(usize),
    Neg,
    Bin(BinOp),
    Call(Func),
}

#[derive(Debug, Clone)]
pub struct CompiledExpr {
    prog: Vec<Op>,
    n_vars: usize,
    depth: usize,
}

impl CompiledExpr {
    pub(super) fn from_node(node: &Node, n_vars: usize) -> CompiledExpr {
        let mut prog = Vec::new();
        flatten(node, &mut prog);
        let mut depth = 0usize;
        let mut cur = 0usize;
        for op in &prog {
            match op {
                Op::Num(_) | Op::Var(_) => cur += 1,
                Op::Bin(_) => cur -= 1,
                Op::Neg | Op::Call(_) => {}
            }
            depth = depth.max(cur);
        }
        CompiledExpr { prog, n_vars, depth }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Evaluate reusing a caller-provided stack buffer.
    pub fn eval_with(&self, args: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        debug_assert_eq!(args.len(), self.n_vars);
        stack.clear();
        stack.reserve(self.depth);
        for op in &self.prog {
            match op {
                Op::Num(v) => stack.push(*v),
                Op::Var(i) => stack.push(args[*i]),
                Op::Neg => {
                    let top = stack.last_mut().expect("stack");
                    *top = -*top;
                }
                Op::Bin(op) => {
                    let y = stack.pop().expect("stack");
                    let x = stack.last_mut().expect("stack");
                    let v = match op {
                        BinOp::Add => *x + y,
                        BinOp::Sub => *x - y,
                        BinOp::Mul => *x * y,
                        BinOp::Div => {
                            if y == 0.0 {
                                return Err(fault(EvalFault::DivisionByZero));
                            }
                            *x / y
                        }
                        BinOp::Pow => x.powf(y),
                    };
                    if v.is_nan() && x.is_finite() && y.is_finite() {
                        return Err(fault(EvalFault::NonFinite));
                    }
                    *x = v;
                }
                Op::Call(f) => {
                    let x = stack.last_mut().expect("stack");
                    match f {
                        Func::Log if *x <= 0.0 => {
                            return Err(fault(EvalFault::LogNonPositive(*x)))
                        }
                        Func::Sqrt if *x < 0.0 => {
                            return Err(fault(EvalFault::SqrtNegative(*x)))
                        }
                        _ => {}
                    }
                    let out = f.apply(*x);
                    if out.is_nan() && x.is_finite() {
                        return Err(fault(EvalFault::NonFinite));
                    }
                    *x = out;
                }
            }
        }
        Ok(stack.pop().expect("stack"))
    }

    pub fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        let mut stack = Vec::with_capacity(self.depth);
        self.eval_with(args, &mut stack)
    }
}

fn fault(f: EvalFault) -> EvalError {
    EvalError {
        fault: f,
        subexpr: "(compiled)".into(),
    }
}

fn flatten(node: &Node, out: &mut Vec<Op>) {
    match node {
        Node::Num(v) => out.push(Op::Num(*v)),
        Node::Var(i) => out.push(Op::Var(*i)),
        Node::Neg(x) => {
            flatten(x, out);
            out.push(Op::Neg);
        }
        Node::Bin(op, a, b) => {
            flatten(a, out);
            flatten(b, out);
            out.push(Op::Bin(*op));
        }
        Node::Call(f, x) => {
            flatten(x, out);
            out.push(Op::Call(*f));
        }
    }
}
