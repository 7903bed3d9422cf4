//! Real-valued expression trees over a fixed variable vector.
//!
//! Constructors fold constant subtrees eagerly, using the same scalar
//! operations and the same association order as `Network::forward`, so an
//! expression built from a network with all-constant inputs folds to the
//! bit-identical output of the float forward pass.

use crate::error::{Error, Result};
use crate::interval::{sigmoid_scalar, Interval, IntervalBox};
use crate::nn::Network;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub type VarId = usize;

#[derive(Debug, Clone)]
pub enum Expr {
    Var(VarId),
    Const(f64),
    Add(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Abs(Arc<Expr>),
    Max(Arc<Expr>, Arc<Expr>),
    Exp(Arc<Expr>),
    Sigmoid(Arc<Expr>),
    Tanh(Arc<Expr>),
}

impl Expr {
    pub fn var(i: VarId) -> Expr {
        Expr::Var(i)
    }

    pub fn c(v: f64) -> Expr {
        debug_assert!(!v.is_nan());
        Expr::Const(v)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            _ => Expr::Add(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(a, Expr::neg(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            _ => Expr::Mul(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match &a {
            Expr::Const(x) => Expr::Const(-x),
            _ => Expr::Neg(Arc::new(a)),
        }
    }

    pub fn abs(a: Expr) -> Expr {
        match &a {
            Expr::Const(x) => Expr::Const(x.abs()),
            _ => Expr::Abs(Arc::new(a)),
        }
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x.max(*y)),
            _ => Expr::Max(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match &a {
            Expr::Const(x) => Expr::Const(x.exp()),
            _ => Expr::Exp(Arc::new(a)),
        }
    }

    pub fn sigmoid(a: Expr) -> Expr {
        match &a {
            Expr::Const(x) => Expr::Const(sigmoid_scalar(*x)),
            _ => Expr::Sigmoid(Arc::new(a)),
        }
    }

    pub fn tanh(a: Expr) -> Expr {
        match &a {
            Expr::Const(x) => Expr::Const(x.tanh()),
            _ => Expr::Tanh(Arc::new(a)),
        }
    }

    pub fn relu(a: Expr) -> Expr {
        Expr::max(a, Expr::c(0.0))
    }

    /// Evaluates at a point. Fails if a variable index is out of range.
    pub fn eval(&self, pt: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Var(i) => *pt.get(*i).ok_or(Error::UndeclaredVariable(*i))?,
            Expr::Const(v) => *v,
            Expr::Add(a, b) => a.eval(pt)? + b.eval(pt)?,
            Expr::Mul(a, b) => a.eval(pt)? * b.eval(pt)?,
            Expr::Neg(a) => -a.eval(pt)?,
            Expr::Abs(a) => a.eval(pt)?.abs(),
            Expr::Max(a, b) => a.eval(pt)?.max(b.eval(pt)?),
            Expr::Exp(a) => a.eval(pt)?.exp(),
            Expr::Sigmoid(a) => sigmoid_scalar(a.eval(pt)?),
            Expr::Tanh(a) => a.eval(pt)?.tanh(),
        })
    }

    /// Interval enclosure of the range over a box.
    pub fn eval_interval(&self, bx: &IntervalBox) -> Result<Interval> {
        Ok(match self {
            Expr::Var(i) => {
                if *i >= bx.len() {
                    return Err(Error::UndeclaredVariable(*i));
                }
                bx.get(*i)
            }
            Expr::Const(v) => Interval::point(*v),
            Expr::Add(a, b) => a.eval_interval(bx)?.add(b.eval_interval(bx)?),
            Expr::Mul(a, b) => a.eval_interval(bx)?.mul(b.eval_interval(bx)?),
            Expr::Neg(a) => a.eval_interval(bx)?.neg(),
            Expr::Abs(a) => a.eval_interval(bx)?.abs(),
            Expr::Max(a, b) => a.eval_interval(bx)?.max(b.eval_interval(bx)?),
            Expr::Exp(a) => a.eval_interval(bx)?.exp(),
            Expr::Sigmoid(a) => a.eval_interval(bx)?.sigmoid(),
            Expr::Tanh(a) => a.eval_interval(bx)?.tanh(),
        })
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        match self {
            Expr::Var(i) => {
                out.insert(*i);
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Max(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) | Expr::Abs(a) | Expr::Exp(a) | Expr::Sigmoid(a) | Expr::Tanh(a) => {
                a.collect_vars(out)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(i) => write!(f, "v{i}"),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Abs(a) => write!(f, "|{a}|"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Sigmoid(a) => write!(f, "sigmoid({a})"),
            Expr::Tanh(a) => write!(f, "tanh({a})"),
        }
    }
}

/// A network slot that is either a solver variable or a fixed value.
#[derive(Debug, Clone, Copy)]
pub enum Slot {
    Var(VarId),
    Value(f64),
}

impl Slot {
    fn expr(self) -> Expr {
        match self {
            Slot::Var(i) => Expr::Var(i),
            Slot::Value(v) => Expr::Const(v),
        }
    }
}

/// Unrolls a network into a single scalar expression. `params` supplies one
/// slot per flat parameter, `inputs` one slot per input coordinate; either
/// may mix variables and constants. With all slots constant the result folds
/// to exactly `forward`.
pub fn network_to_expr(net: &Network, params: &[Slot], inputs: &[Slot]) -> Result<Expr> {
    if params.len() != net.param_count() {
        return Err(Error::DimensionMismatch {
            expected: net.param_count(),
            got: params.len(),
        });
    }
    if inputs.len() != net.input_dim {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim,
            got: inputs.len(),
        });
    }
    let mut act: Vec<Expr> = inputs.iter().map(|s| s.expr()).collect();
    let mut p = 0;
    for layer in &net.layers {
        let rows = layer.out_dim();
        let cols = layer.in_dim();
        let weight_count = if layer.frozen_weights { 0 } else { rows * cols };
        let mut next = Vec::with_capacity(rows);
        for r in 0..rows {
            let weight = |c: usize| {
                if layer.frozen_weights {
                    Expr::Const(layer.weights[r][c])
                } else {
                    params[p + r * cols + c].expr()
                }
            };
            let mut z = Expr::mul(weight(0), act[0].clone());
            for (c, a) in act.iter().enumerate().skip(1) {
                z = Expr::add(z, Expr::mul(weight(c), a.clone()));
            }
            if !layer.biases.is_empty() {
                z = Expr::add(z, params[p + weight_count + r].expr());
            }
            next.push(match layer.activation {
                crate::nn::Activation::Linear => z,
                crate::nn::Activation::Relu => Expr::relu(z),
                crate::nn::Activation::Sigmoid => Expr::sigmoid(z),
                crate::nn::Activation::Tanh => Expr::tanh(z),
            });
        }
        p += layer.param_count();
        act = next;
    }
    Ok(act.swap_remove(0))
}

/// All-constant slots for a parameter vector.
pub fn const_slots(values: &[f64]) -> Vec<Slot> {
    values.iter().map(|&v| Slot::Value(v)).collect()
}

/// Variable slots `first..first+n`.
pub fn var_slots(first: VarId, n: usize) -> Vec<Slot> {
    (first..first + n).map(Slot::Var).collect()
}
