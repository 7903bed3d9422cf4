//! Forward-backward interval contraction (HC4 style) over compiled
//! constraint tapes.
//!
//! Each atomic constraint `lhs rel rhs` is compiled once into a flat
//! postorder tape for the expression `lhs - rhs`. Contracting a box runs a
//! forward interval sweep, intersects the root with the relation's target
//! set, then projects requirements back down to the leaves, narrowing the
//! box. A box is refuted only when no point in it can satisfy the exact
//! (unweakened) constraint; strict relations use strict emptiness tests so
//! that, e.g., `t > 0` is refuted by an enclosure with `t.hi = 0`.

use crate::error::Result;
use crate::expr::Expr;
use crate::formula::{AtomicConstraint, Formula, Rel};
use crate::interval::{div_extended, Interval, IntervalBox};

#[derive(Debug, Clone, Copy)]
enum Op {
    Var(usize),
    Const(f64),
    Add(u32, u32),
    Mul(u32, u32),
    Neg(u32),
    Abs(u32),
    Max(u32, u32),
    Exp(u32),
    Sigmoid(u32),
    Tanh(u32),
}

/// Reusable buffers for tape sweeps; one per worker.
#[derive(Debug, Default)]
pub struct Scratch {
    vals: Vec<Interval>,
    req: Vec<Interval>,
    grads: Vec<Interval>,
    mid_vals: Vec<Interval>,
}

#[derive(Debug)]
struct Tape {
    ops: Vec<Op>,
}

impl Tape {
    fn compile(e: &Expr) -> Tape {
        let mut ops = Vec::new();
        push_expr(e, &mut ops);
        Tape { ops }
    }

    /// Evaluates every node over the box; returns the root enclosure.
    fn forward(&self, bx: &IntervalBox, vals: &mut Vec<Interval>) -> Interval {
        vals.clear();
        vals.reserve(self.ops.len());
        for op in &self.ops {
            let iv = match *op {
                Op::Var(v) => bx.get(v),
                Op::Const(c) => Interval::point(c),
                Op::Add(a, b) => vals[a as usize].add(vals[b as usize]),
                Op::Mul(a, b) => vals[a as usize].mul(vals[b as usize]),
                Op::Neg(a) => vals[a as usize].neg(),
                Op::Abs(a) => vals[a as usize].abs(),
                Op::Max(a, b) => vals[a as usize].max(vals[b as usize]),
                Op::Exp(a) => vals[a as usize].exp(),
                Op::Sigmoid(a) => vals[a as usize].sigmoid(),
                Op::Tanh(a) => vals[a as usize].tanh(),
            };
            vals.push(iv);
        }
        *vals.last().expect("tape is never empty")
    }

    /// Pushes the root requirement down to the leaves, intersecting variable
    /// requirements into the box. Returns false when some requirement
    /// becomes empty, i.e. no point of the box satisfies the constraint.
    fn backward(
        &self,
        root_req: Interval,
        vals: &[Interval],
        req: &mut Vec<Interval>,
        bx: &mut IntervalBox,
    ) -> bool {
        req.clear();
        req.extend_from_slice(vals);
        let last = self.ops.len() - 1;
        req[last] = root_req;
        for k in (0..=last).rev() {
            let r = req[k];
            match self.ops[k] {
                Op::Var(v) => match bx.get(v).intersect(&r) {
                    Some(iv) => bx.set(v, iv),
                    None => return false,
                },
                Op::Const(_) => {}
                Op::Add(a, b) => {
                    let (a, b) = (a as usize, b as usize);
                    if !(narrow(req, a, r.sub(vals[b])) && narrow(req, b, r.sub(vals[a]))) {
                        return false;
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (a as usize, b as usize);
                    if !(narrow_pieces(req, a, div_extended(r, vals[b]))
                        && narrow_pieces(req, b, div_extended(r, vals[a])))
                    {
                        return false;
                    }
                }
                Op::Neg(a) => {
                    if !narrow(req, a as usize, r.neg()) {
                        return false;
                    }
                }
                Op::Abs(a) => {
                    // r is nonnegative already; the preimage is +-r
                    let pos = Interval::raw(r.lo.max(0.0), r.hi);
                    if !narrow_pieces(req, a as usize, (Some(pos.neg()), Some(pos))) {
                        return false;
                    }
                }
                Op::Max(a, b) => {
                    let (a, b) = (a as usize, b as usize);
                    // both arguments stay at or below the required maximum;
                    // an argument the other side cannot reach must attain it
                    let mut ra = Interval::raw(f64::NEG_INFINITY, r.hi);
                    if vals[b].hi < r.lo {
                        ra = match ra.intersect(&Interval::raw(r.lo, f64::INFINITY)) {
                            Some(iv) => iv,
                            None => return false,
                        };
                    }
                    let mut rb = Interval::raw(f64::NEG_INFINITY, r.hi);
                    if vals[a].hi < r.lo {
                        rb = match rb.intersect(&Interval::raw(r.lo, f64::INFINITY)) {
                            Some(iv) => iv,
                            None => return false,
                        };
                    }
                    if !(narrow(req, a, ra) && narrow(req, b, rb)) {
                        return false;
                    }
                }
                Op::Exp(a) => {
                    let Some(pre) = r.ln_preimage() else { return false };
                    if !narrow(req, a as usize, pre) {
                        return false;
                    }
                }
                Op::Sigmoid(a) => {
                    let Some(pre) = r.sigmoid_preimage() else { return false };
                    if !narrow(req, a as usize, pre) {
                        return false;
                    }
                }
                Op::Tanh(a) => {
                    let Some(pre) = r.tanh_preimage() else { return false };
                    if !narrow(req, a as usize, pre) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn push_expr(e: &Expr, ops: &mut Vec<Op>) -> u32 {
    let op = match e {
        Expr::Var(v) => Op::Var(*v),
        Expr::Const(c) => Op::Const(*c),
        Expr::Add(a, b) => Op::Add(push_expr(a, ops), push_expr(b, ops)),
        Expr::Mul(a, b) => Op::Mul(push_expr(a, ops), push_expr(b, ops)),
        Expr::Neg(a) => Op::Neg(push_expr(a, ops)),
        Expr::Abs(a) => Op::Abs(push_expr(a, ops)),
        Expr::Max(a, b) => Op::Max(push_expr(a, ops), push_expr(b, ops)),
        Expr::Exp(a) => Op::Exp(push_expr(a, ops)),
        Expr::Sigmoid(a) => Op::Sigmoid(push_expr(a, ops)),
        Expr::Tanh(a) => Op::Tanh(push_expr(a, ops)),
    };
    ops.push(op);
    (ops.len() - 1) as u32
}

fn narrow(req: &mut [Interval], child: usize, allowed: Interval) -> bool {
    match req[child].intersect(&allowed) {
        Some(iv) => {
            req[child] = iv;
            true
        }
        None => false,
    }
}

fn narrow_pieces(
    req: &mut [Interval],
    child: usize,
    pieces: (Option<Interval>, Option<Interval>),
) -> bool {
    let cur = req[child];
    let a = pieces.0.and_then(|p| cur.intersect(&p));
    let b = pieces.1.and_then(|p| cur.intersect(&p));
    match (a, b) {
        (Some(x), Some(y)) => {
            req[child] = x.hull(&y);
            true
        }
        (Some(x), None) | (None, Some(x)) => {
            req[child] = x;
            true
        }
        (None, None) => false,
    }
}

/// Can the enclosure of `lhs - rhs` meet the relation at all?
fn meets(rel: Rel, t: Interval) -> bool {
    match rel {
        Rel::Le => t.lo <= 0.0,
        Rel::Lt => t.lo < 0.0,
        Rel::Ge => t.hi >= 0.0,
        Rel::Gt => t.hi > 0.0,
        Rel::Eq => t.lo <= 0.0 && t.hi >= 0.0,
    }
}

/// Closure of the relation's solution set for `t`, used as the backward
/// requirement. Equality contracts with the degenerate target directly,
/// which is the `t <= 0 and t >= 0` decomposition in one pass.
fn closed_target(rel: Rel) -> Interval {
    match rel {
        Rel::Le | Rel::Lt => Interval::raw(f64::NEG_INFINITY, 0.0),
        Rel::Ge | Rel::Gt => Interval::raw(0.0, f64::INFINITY),
        Rel::Eq => Interval::point(0.0),
    }
}

#[derive(Debug)]
struct CompiledAtom {
    grad: GradTape,
    rel: Rel,
}

impl CompiledAtom {
    fn compile(a: &AtomicConstraint) -> CompiledAtom {
        let diff = Expr::sub(a.lhs.clone(), a.rhs.clone());
        CompiledAtom {
            grad: GradTape::compile(&diff),
            rel: a.rel,
        }
    }

    /// Narrows the box in place; false means the atom excludes the box.
    /// The root enclosure mixes natural evaluation with the mean-value
    /// form, which stays tight when the same variable feeds both sides
    /// of a near-cancelling difference; the backward pass then starts
    /// from that tighter requirement.
    fn contract(&self, bx: &mut IntervalBox, scratch: &mut Scratch) -> bool {
        let fwd = self.grad.enclose(bx, scratch);
        if !meets(self.rel, fwd) {
            return false;
        }
        let root_req = fwd
            .intersect(&closed_target(self.rel))
            .expect("meets implies nonempty closed intersection");
        self.grad
            .tape
            .backward(root_req, &scratch.vals, &mut scratch.req, bx)
    }
}

#[derive(Debug)]
struct CompiledConj {
    atoms: Vec<CompiledAtom>,
}

impl CompiledConj {
    fn contract(&self, bx: &mut IntervalBox, scratch: &mut Scratch) -> bool {
        self.atoms.iter().all(|a| a.contract(bx, scratch))
    }
}

#[derive(Debug)]
struct CompiledClause {
    disjuncts: Vec<CompiledConj>,
}

impl CompiledClause {
    /// Hull-based contraction: the result covers the union of per-disjunct
    /// contractions. Returns the surviving disjunct indices; empty means the
    /// clause excludes the box. `pin` restricts to a single disjunct.
    fn contract(
        &self,
        bx: &mut IntervalBox,
        pin: Option<usize>,
        scratch: &mut Scratch,
        live: &mut Vec<usize>,
    ) -> bool {
        live.clear();
        if let Some(d) = pin {
            if self.disjuncts[d].contract(bx, scratch) {
                live.push(d);
                return true;
            }
            return false;
        }
        let mut hull: Option<IntervalBox> = None;
        for (d, conj) in self.disjuncts.iter().enumerate() {
            let mut copy = bx.clone();
            if conj.contract(&mut copy, scratch) {
                live.push(d);
                hull = Some(match hull {
                    None => copy,
                    Some(h) => hull_boxes(h, &copy),
                });
            }
        }
        match hull {
            Some(h) => {
                *bx = h;
                true
            }
            None => false,
        }
    }
}

fn hull_boxes(mut a: IntervalBox, b: &IntervalBox) -> IntervalBox {
    for i in 0..a.len() {
        a.set(i, a.get(i).hull(&b.get(i)));
    }
    a
}

/// A formula compiled for repeated contraction.
#[derive(Debug)]
pub struct CompiledFormula {
    clauses: Vec<CompiledClause>,
    n_vars: usize,
    init_widths: Vec<f64>,
}

/// Per-clause disjunct pins accumulated by clause splitting. `None` keeps
/// the full disjunction.
pub type Pins = Vec<Option<usize>>;

impl CompiledFormula {
    pub fn compile(f: &Formula) -> Result<CompiledFormula> {
        f.validate()?;
        let clauses = f
            .clauses
            .iter()
            .map(|c| CompiledClause {
                disjuncts: c
                    .disjuncts
                    .iter()
                    .map(|conj| CompiledConj {
                        atoms: conj.iter().map(CompiledAtom::compile).collect(),
                    })
                    .collect(),
            })
            .collect();
        Ok(CompiledFormula {
            clauses,
            n_vars: f.vars.len(),
            init_widths: f.domain_box().widths(),
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn disjunct_count(&self, clause: usize) -> usize {
        self.clauses[clause].disjuncts.len()
    }

    pub fn init_widths(&self) -> &[f64] {
        &self.init_widths
    }

    /// One round of contraction across all clauses. `live` receives the
    /// surviving disjunct indices per clause.
    fn contract_round(
        &self,
        bx: &mut IntervalBox,
        pins: &[Option<usize>],
        scratch: &mut Scratch,
        live: &mut [Vec<usize>],
    ) -> bool {
        for (c, clause) in self.clauses.iter().enumerate() {
            if !clause.contract(bx, pins[c], scratch, &mut live[c]) {
                return false;
            }
        }
        true
    }

    /// Contracts to a fixpoint (or until progress per round drops below 5%
    /// of any dimension's width). Returns false when the box is refuted.
    pub fn contract_fixpoint(
        &self,
        bx: &mut IntervalBox,
        pins: &[Option<usize>],
        scratch: &mut Scratch,
        live: &mut Vec<Vec<usize>>,
        max_rounds: usize,
    ) -> bool {
        live.resize(self.clauses.len(), Vec::new());
        if self.clauses.is_empty() {
            return true;
        }
        let mut prev = bx.widths();
        for _ in 0..max_rounds {
            if !self.contract_round(bx, pins, scratch, live) {
                return false;
            }
            let mut progressed = false;
            for (i, w) in prev.iter_mut().enumerate() {
                let now = bx.get(i).width();
                if now < 0.95 * *w {
                    progressed = true;
                }
                *w = now;
            }
            if !progressed {
                break;
            }
        }
        true
    }
}

/// An objective expression compiled for bound computation and cuts in the
/// branch-and-bound optimizer.
#[derive(Debug)]
pub struct ObjectiveTape {
    tape: Tape,
}

impl ObjectiveTape {
    pub fn compile(e: &Expr) -> ObjectiveTape {
        ObjectiveTape {
            tape: Tape::compile(e),
        }
    }

    /// Enclosure of the objective over the box.
    pub fn enclose(&self, bx: &IntervalBox, scratch: &mut Scratch) -> Interval {
        self.tape.forward(bx, &mut scratch.vals)
    }

    /// Removes points whose objective value provably lies outside
    /// `required`. Returns false when no point of the box remains.
    pub fn restrict(
        &self,
        bx: &mut IntervalBox,
        required: Interval,
        scratch: &mut Scratch,
    ) -> bool {
        let fwd = self.tape.forward(bx, &mut scratch.vals);
        let Some(root_req) = fwd.intersect(&required) else {
            return false;
        };
        self.tape
            .backward(root_req, &scratch.vals, &mut scratch.req, bx)
    }
}

/// An expression compiled for mean-value-form enclosures.
///
/// The natural interval extension double-counts variables that occur more
/// than once (for a perturbation gap `|f_p(x) - f_p0(x)|` the shared input
/// `x` dominates the overestimate). The mean value form
/// `f(m) + sum_i df/dv_i(box) * (box_i - m_i)` sees the near-cancellation
/// through the gradient instead, so its width scales with the *gradient*
/// magnitude rather than the raw input width. Both forms are sound, so the
/// result is their intersection.
#[derive(Debug)]
pub struct GradTape {
    tape: Tape,
    /// Active variables, ascending; gradients are stored densely in this
    /// order.
    vars: Vec<usize>,
    slot: Vec<u32>,
}

impl GradTape {
    pub fn compile(e: &Expr) -> GradTape {
        let tape = Tape::compile(e);
        let mut vars: Vec<usize> = tape
            .ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(v) => Some(*v),
                _ => None,
            })
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let mut slot = vec![u32::MAX; vars.last().map_or(0, |v| v + 1)];
        for (j, &v) in vars.iter().enumerate() {
            slot[v] = j as u32;
        }
        GradTape { tape, vars, slot }
    }

    /// Past this many active variables the deviation sum in the mean
    /// value form outweighs whatever cancellation it recovers, while its
    /// cost still grows linearly, so wide expressions fall back to the
    /// natural extension alone.
    const MAX_MV_VARS: usize = 8;

    /// Sound enclosure of the expression over the box: natural extension
    /// intersected with the mean value form around the box midpoint.
    pub fn enclose(&self, bx: &IntervalBox, scratch: &mut Scratch) -> Interval {
        let nat = self.tape.forward(bx, &mut scratch.vals);
        if self.vars.is_empty()
            || self.vars.len() > Self::MAX_MV_VARS
            || !nat.lo.is_finite()
            || !nat.hi.is_finite()
        {
            return nat;
        }
        let nv = self.vars.len();
        let nodes = self.tape.ops.len();
        scratch.grads.clear();
        scratch
            .grads
            .resize(nodes * nv, Interval::point(0.0));
        for (k, op) in self.tape.ops.iter().enumerate() {
            // gradients of earlier nodes are final once written, so the
            // node-major layout lets each node read its children in place
            let (done, cur) = scratch.grads.split_at_mut(k * nv);
            let cur = &mut cur[..nv];
            let node = |i: u32| &done[i as usize * nv..i as usize * nv + nv];
            match *op {
                Op::Var(v) => cur[self.slot[v] as usize] = Interval::point(1.0),
                Op::Const(_) => {}
                Op::Add(a, b) => {
                    let (ga, gb) = (node(a), node(b));
                    for j in 0..nv {
                        cur[j] = ga[j].add(gb[j]);
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (scratch.vals[a as usize], scratch.vals[b as usize]);
                    let (ga, gb) = (node(a), node(b));
                    for j in 0..nv {
                        cur[j] = va.mul(gb[j]).add(vb.mul(ga[j]));
                    }
                }
                Op::Neg(a) => {
                    let ga = node(a);
                    for j in 0..nv {
                        cur[j] = ga[j].neg();
                    }
                }
                Op::Abs(a) => {
                    let va = scratch.vals[a as usize];
                    let s = if va.lo >= 0.0 {
                        Interval::point(1.0)
                    } else if va.hi <= 0.0 {
                        Interval::point(-1.0)
                    } else {
                        Interval::raw(-1.0, 1.0)
                    };
                    let ga = node(a);
                    for j in 0..nv {
                        cur[j] = s.mul(ga[j]);
                    }
                }
                Op::Max(a, b) => {
                    let (va, vb) = (scratch.vals[a as usize], scratch.vals[b as usize]);
                    let (ga, gb) = (node(a), node(b));
                    if va.lo > vb.hi {
                        cur.copy_from_slice(ga);
                    } else if vb.lo > va.hi {
                        cur.copy_from_slice(gb);
                    } else {
                        // generalized gradient lies in the hull of the
                        // two branch gradients
                        for j in 0..nv {
                            cur[j] = ga[j].hull(&gb[j]);
                        }
                    }
                }
                Op::Exp(a) => {
                    let vk = scratch.vals[k];
                    let ga = node(a);
                    for j in 0..nv {
                        cur[j] = vk.mul(ga[j]);
                    }
                }
                Op::Sigmoid(a) => {
                    let d = sigmoid_deriv_range(scratch.vals[k]);
                    let ga = node(a);
                    for j in 0..nv {
                        cur[j] = d.mul(ga[j]);
                    }
                }
                Op::Tanh(a) => {
                    let d = tanh_deriv_range(scratch.vals[k]);
                    let ga = node(a);
                    for j in 0..nv {
                        cur[j] = d.mul(ga[j]);
                    }
                }
            }
        }

        // midpoint evaluation through the tape keeps the form sound
        let mut mid = bx.clone();
        for &v in &self.vars {
            mid.set(v, Interval::point(bx.get(v).midpoint()));
        }
        let mut mv = self.tape.forward(&mid, &mut scratch.mid_vals);
        let root = (nodes - 1) * nv;
        for (j, &v) in self.vars.iter().enumerate() {
            let dev = bx.get(v).sub(mid.get(v));
            mv = mv.add(scratch.grads[root + j].mul(dev));
        }
        nat.intersect(&mv).unwrap_or(nat)
    }
}

/// Range of `s*(1-s)` for `s` in the sigmoid's value enclosure: extremes
/// at the endpoints, plus the cap 1/4 when the enclosure crosses 1/2.
fn sigmoid_deriv_range(s: Interval) -> Interval {
    let one = Interval::point(1.0);
    let at = |v: f64| {
        let p = Interval::point(v);
        p.mul(one.sub(p))
    };
    let mut d = at(s.lo).hull(&at(s.hi));
    if s.lo < 0.5 && s.hi > 0.5 {
        d = d.hull(&Interval::point(0.25));
    }
    d.intersect(&Interval::raw(0.0, 0.25)).unwrap_or(d)
}

/// Range of `1 - t^2` for `t` in the tanh's value enclosure.
fn tanh_deriv_range(t: Interval) -> Interval {
    let one = Interval::point(1.0);
    let at = |v: f64| {
        let p = Interval::point(v);
        one.sub(p.mul(p))
    };
    let mut d = at(t.lo).hull(&at(t.hi));
    if t.lo < 0.0 && t.hi > 0.0 {
        d = d.hull(&Interval::point(1.0));
    }
    d.intersect(&Interval::raw(0.0, 1.0)).unwrap_or(d)
}

/// One-shot contraction of a formula over a box: `None` when no point of
/// the box satisfies the formula, otherwise a sound narrowing.
pub fn contract(f: &Formula, bx: &IntervalBox) -> Result<Option<IntervalBox>> {
    let compiled = CompiledFormula::compile(f)?;
    let mut out = bx.clone();
    let mut scratch = Scratch::default();
    let mut live = Vec::new();
    let pins: Pins = vec![None; compiled.clause_count()];
    if compiled.contract_fixpoint(&mut out, &pins, &mut scratch, &mut live, 12) {
        Ok(Some(out))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{Clause, VarRole};

    fn atom(lhs: Expr, rel: Rel, rhs: Expr) -> AtomicConstraint {
        AtomicConstraint::new(lhs, rel, rhs)
    }

    fn one_var(lo: f64, hi: f64) -> Formula {
        let mut f = Formula::new();
        f.declare("x", Interval::new(lo, hi).unwrap(), VarRole::Input(0));
        f
    }

    #[test]
    fn contracts_simple_bound() {
        let mut f = one_var(0.0, 1.0);
        f.require(Clause::atom(atom(Expr::var(0), Rel::Ge, Expr::c(0.7))));
        let out = contract(&f, &f.domain_box()).unwrap().unwrap();
        assert!(out.get(0).lo >= 0.7 - 1e-12);
        assert!((out.get(0).lo - 0.7).abs() < 1e-9);
        assert_eq!(out.get(0).hi, 1.0);
    }

    #[test]
    fn refutes_contradiction() {
        let mut f = one_var(0.0, 1.0);
        f.require(Clause::atom(atom(Expr::var(0), Rel::Gt, Expr::c(1.0))));
        f.require(Clause::atom(atom(Expr::var(0), Rel::Lt, Expr::c(0.0))));
        assert!(contract(&f, &f.domain_box()).unwrap().is_none());
    }

    #[test]
    fn strict_relation_refutes_at_touching_endpoint() {
        // x > 1 on [0,1]: the enclosure touches 1 but never exceeds it
        let mut f = one_var(0.0, 1.0);
        f.require(Clause::atom(atom(Expr::var(0), Rel::Gt, Expr::c(1.0))));
        assert!(contract(&f, &f.domain_box()).unwrap().is_none());

        // x >= 1 on [0,1] survives as the degenerate sliver
        let mut f = one_var(0.0, 1.0);
        f.require(Clause::atom(atom(Expr::var(0), Rel::Ge, Expr::c(1.0))));
        let out = contract(&f, &f.domain_box()).unwrap().unwrap();
        assert!(out.get(0).lo >= 1.0 - 1e-12);
    }

    #[test]
    fn square_equation_contracts_around_root() {
        // x*x = 2 on [0,2] must keep sqrt(2)
        let mut f = one_var(0.0, 2.0);
        f.require(Clause::atom(atom(
            Expr::mul(Expr::var(0), Expr::var(0)),
            Rel::Eq,
            Expr::c(2.0),
        )));
        let out = contract(&f, &f.domain_box()).unwrap().unwrap();
        let root = 2.0f64.sqrt();
        assert!(out.get(0).contains(root), "{:?}", out.get(0));
        assert!(out.get(0).lo >= 0.9, "should have contracted: {:?}", out.get(0));
    }

    #[test]
    fn exp_constraint_contracts_via_preimage() {
        let mut f = one_var(-5.0, 5.0);
        f.require(Clause::atom(atom(
            Expr::exp(Expr::var(0)),
            Rel::Le,
            Expr::c(2.0),
        )));
        let out = contract(&f, &f.domain_box()).unwrap().unwrap();
        assert!(out.get(0).hi <= 2.0f64.ln() + 1e-9);
        assert!(out.get(0).hi >= 2.0f64.ln() - 1e-9);
        assert_eq!(out.get(0).lo, -5.0);
    }

    #[test]
    fn sigmoid_threshold_refuted_by_range() {
        // sigmoid(x) >= 0.8 is impossible on [0,1]
        let mut f = one_var(0.0, 1.0);
        f.require(Clause::atom(atom(
            Expr::sigmoid(Expr::var(0)),
            Rel::Ge,
            Expr::c(0.8),
        )));
        assert!(contract(&f, &f.domain_box()).unwrap().is_none());
    }

    #[test]
    fn disjunction_contracts_to_hull() {
        // x <= 0.2 or x >= 0.8 on [0,1]: hull is the whole box, but
        // restricted to [0.5, 1] only the second disjunct survives
        let mut f = one_var(0.0, 1.0);
        f.require(Clause::any(vec![
            atom(Expr::var(0), Rel::Le, Expr::c(0.2)),
            atom(Expr::var(0), Rel::Ge, Expr::c(0.8)),
        ]));
        let full = contract(&f, &f.domain_box()).unwrap().unwrap();
        assert!(full.get(0).lo <= 1e-12 && full.get(0).hi >= 1.0 - 1e-12);

        let half = IntervalBox::new(vec![Interval::new(0.5, 1.0).unwrap()]);
        let out = contract(&f, &half).unwrap().unwrap();
        assert!(out.get(0).lo >= 0.8 - 1e-9);
    }

    #[test]
    fn conjunction_within_disjunct_must_hold_jointly() {
        // (x <= 0.2 and x >= 0.1) or (x >= 0.8 and x <= 0.9), box [0.3, 0.7]
        let mut f = one_var(0.0, 1.0);
        f.require(Clause::any_of(vec![
            vec![
                atom(Expr::var(0), Rel::Le, Expr::c(0.2)),
                atom(Expr::var(0), Rel::Ge, Expr::c(0.1)),
            ],
            vec![
                atom(Expr::var(0), Rel::Ge, Expr::c(0.8)),
                atom(Expr::var(0), Rel::Le, Expr::c(0.9)),
            ],
        ]));
        let mid = IntervalBox::new(vec![Interval::new(0.3, 0.7).unwrap()]);
        assert!(contract(&f, &mid).unwrap().is_none());
    }

    #[test]
    fn contraction_never_removes_satisfying_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut f = Formula::new();
        f.declare("x", Interval::new(-2.0, 2.0).unwrap(), VarRole::Input(0));
        f.declare("y", Interval::new(-2.0, 2.0).unwrap(), VarRole::Input(1));
        // sigmoid(x*y) <= 0.6 and x + y >= 0.3
        f.require(Clause::atom(atom(
            Expr::sigmoid(Expr::mul(Expr::var(0), Expr::var(1))),
            Rel::Le,
            Expr::c(0.6),
        )));
        f.require(Clause::atom(atom(
            Expr::add(Expr::var(0), Expr::var(1)),
            Rel::Ge,
            Expr::c(0.3),
        )));
        let bx = f.domain_box();
        let out = contract(&f, &bx).unwrap().unwrap();
        let mut kept = 0;
        for _ in 0..3000 {
            let pt = [rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0)];
            if f.check_point(&pt, 0.0).unwrap() {
                assert!(out.contains_point(&pt), "lost satisfying point {pt:?}");
                kept += 1;
            }
        }
        assert!(kept > 100, "test should exercise satisfying points, got {kept}");
    }

    #[test]
    fn fixpoint_propagates_across_clauses() {
        // x = y narrows y to [0, 0.2]; then x + y = 1 becomes impossible
        let mut f = Formula::new();
        f.declare("x", Interval::new(0.0, 0.2).unwrap(), VarRole::Input(0));
        f.declare("y", Interval::new(0.0, 1.0).unwrap(), VarRole::Input(1));
        f.require(Clause::atom(atom(Expr::var(0), Rel::Eq, Expr::var(1))));
        f.require(Clause::atom(atom(
            Expr::add(Expr::var(0), Expr::var(1)),
            Rel::Eq,
            Expr::c(1.0),
        )));
        assert!(contract(&f, &f.domain_box()).unwrap().is_none());
    }

    #[test]
    fn equality_with_band_pins_preimage() {
        // y = sigmoid(x), 0.55 <= y <= 0.6 forces x into [logit(0.55), logit(0.6)]
        let mut f = Formula::new();
        f.declare("x", Interval::new(-5.0, 5.0).unwrap(), VarRole::Input(0));
        f.declare("y", Interval::new(0.0, 1.0).unwrap(), VarRole::Input(1));
        f.require(Clause::atom(atom(
            Expr::var(1),
            Rel::Eq,
            Expr::sigmoid(Expr::var(0)),
        )));
        f.require(Clause::atom(atom(Expr::var(1), Rel::Ge, Expr::c(0.55))));
        f.require(Clause::atom(atom(Expr::var(1), Rel::Le, Expr::c(0.6))));
        let out = contract(&f, &f.domain_box()).unwrap().unwrap();
        let lo = (0.55f64 / 0.45).ln();
        let hi = (0.6f64 / 0.4).ln();
        assert!((out.get(0).lo - lo).abs() < 1e-6, "{:?}", out.get(0));
        assert!((out.get(0).hi - hi).abs() < 1e-6, "{:?}", out.get(0));
        assert!(out.get(1).lo >= 0.55 - 1e-12 && out.get(1).hi <= 0.6 + 1e-12);
    }
}
