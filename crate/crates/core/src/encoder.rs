//! Turns robustness questions about a network's parameters into
//! existential real-arithmetic formulas and optimization problems.
//!
//! Every encoding is the *negation* of a robustness property: the formula
//! is satisfiable exactly when some admissible perturbation violates the
//! property, so an `Unsat` verdict from the solver certifies robustness.
//! Five decision queries are supported (confidence deviation and label
//! flips, each locally at one input or globally over an input box, plus
//! the margin-restricted global flip), along with three estimation
//! problems that turn the thresholds into objectives.
//!
//! Variable layout is always: parameters first (one per flat parameter
//! index, domain = the perturbation box), then inputs for global queries
//! (domain = the query's input box), then a single objective variable for
//! the estimation problems.

use crate::error::{Error, Result};
use crate::expr::{const_slots, network_to_expr, var_slots, Expr, Slot, VarId};
use crate::formula::{AtomicConstraint, Clause, Formula, Rel, VarRole};
use crate::interval::{Interval, IntervalBox};
use crate::nn::{perturb_box, Network, ParamVector};
use crate::optimizer::{OptProblem, Repair};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    LocalEps,
    GlobalEps,
    LocalFlip,
    GlobalFlip,
    SigmaFlip,
}

/// Restricts the margin-optimization problem to inputs the reference
/// network places above or below the decision level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Below,
    #[default]
    Both,
}

/// A fully specified robustness question. `p0` is the reference parameter
/// vector the perturbation is measured from (usually the network's own
/// trained values, but quantization checks pass the rounded vector
/// explicitly). Option fields must match the kind: `epsilon` for the Eps
/// kinds, `sigma` for SigmaFlip, `x0` for Local kinds, `domain` for
/// Global kinds.
#[derive(Debug, Clone)]
pub struct RobustnessQuery {
    pub kind: QueryKind,
    pub net: Network,
    pub p0: ParamVector,
    pub delta: f64,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub domain: Option<IntervalBox>,
}

impl RobustnessQuery {
    /// Starts a query against the network's own trained parameters; fill
    /// in the kind-specific fields before encoding.
    pub fn new(kind: QueryKind, net: Network, delta: f64) -> RobustnessQuery {
        let p0 = net.flatten();
        RobustnessQuery {
            kind,
            net,
            p0,
            delta,
            epsilon: None,
            sigma: None,
            x0: None,
            domain: None,
        }
    }

    /// The decision level of the underlying network.
    pub fn level(&self) -> f64 {
        self.net.level
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidQuery(msg));
        self.net.validate()?;
        if self.p0.len() != self.net.param_count() {
            return bad(format!(
                "reference parameter vector has {} values, network has {} parameters",
                self.p0.len(),
                self.net.param_count()
            ));
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return bad(format!("delta must be finite and nonnegative, got {}", self.delta));
        }
        let kind = self.kind;
        let wants_eps = matches!(kind, QueryKind::LocalEps | QueryKind::GlobalEps);
        let wants_sigma = matches!(kind, QueryKind::SigmaFlip);
        let wants_x0 = matches!(kind, QueryKind::LocalEps | QueryKind::LocalFlip);
        let wants_domain = !wants_x0;
        match (&self.epsilon, wants_eps) {
            (Some(e), true) if !e.is_finite() || *e < 0.0 => {
                return bad(format!("epsilon must be finite and nonnegative, got {e}"));
            }
            (None, true) => return bad(format!("{kind:?} requires epsilon")),
            (Some(_), false) => return bad(format!("{kind:?} does not take epsilon")),
            _ => {}
        }
        match (&self.sigma, wants_sigma) {
            (Some(s), true) if !s.is_finite() || *s < 0.0 => {
                return bad(format!("sigma must be finite and nonnegative, got {s}"));
            }
            (None, true) => return bad(format!("{kind:?} requires sigma")),
            (Some(_), false) => return bad(format!("{kind:?} does not take sigma")),
            _ => {}
        }
        match (&self.x0, wants_x0) {
            (Some(x0), true) if x0.len() != self.net.input_dim => {
                return bad(format!(
                    "x0 has {} coordinates, network expects {}",
                    x0.len(),
                    self.net.input_dim
                ));
            }
            (None, true) => return bad(format!("{kind:?} requires x0")),
            (Some(_), false) => return bad(format!("{kind:?} does not take x0")),
            _ => {}
        }
        match (&self.domain, wants_domain) {
            (Some(d), true) if d.len() != self.net.input_dim => {
                return bad(format!(
                    "domain has {} dimensions, network expects {}",
                    d.len(),
                    self.net.input_dim
                ));
            }
            (None, true) => return bad(format!("{kind:?} requires an input domain")),
            (Some(_), false) => return bad(format!("{kind:?} does not take an input domain")),
            _ => {}
        }
        Ok(())
    }
}

/// Encodes the query as a formula over the perturbation box
/// `[p0 - delta, p0 + delta]`.
pub fn encode(q: &RobustnessQuery) -> Result<Formula> {
    q.validate()?;
    let pbox = perturb_box(&q.p0, q.delta)?;
    build(q, &pbox)
}

/// Encodes the query with an explicit candidate-parameter box instead of
/// the `delta` ball around `p0`. The reference output is still taken at
/// `p0`; quantization checks use this with a degenerate box to ask
/// whether one specific rounded parameter vector misbehaves.
pub fn encode_with_param_box(q: &RobustnessQuery, pbox: &IntervalBox) -> Result<Formula> {
    q.validate()?;
    if pbox.len() != q.net.param_count() {
        return Err(Error::InvalidQuery(format!(
            "parameter box has {} dimensions, network has {} parameters",
            pbox.len(),
            q.net.param_count()
        )));
    }
    build(q, pbox)
}

pub fn encode_local_eps(q: &RobustnessQuery) -> Result<Formula> {
    expect_kind(q, QueryKind::LocalEps)?;
    encode(q)
}

pub fn encode_global_eps(q: &RobustnessQuery) -> Result<Formula> {
    expect_kind(q, QueryKind::GlobalEps)?;
    encode(q)
}

pub fn encode_local_flip(q: &RobustnessQuery) -> Result<Formula> {
    expect_kind(q, QueryKind::LocalFlip)?;
    encode(q)
}

pub fn encode_global_flip(q: &RobustnessQuery) -> Result<Formula> {
    expect_kind(q, QueryKind::GlobalFlip)?;
    encode(q)
}

pub fn encode_sigma_flip(q: &RobustnessQuery) -> Result<Formula> {
    expect_kind(q, QueryKind::SigmaFlip)?;
    encode(q)
}

fn expect_kind(q: &RobustnessQuery, want: QueryKind) -> Result<()> {
    if q.kind != want {
        return Err(Error::InvalidQuery(format!(
            "expected a {want:?} query, got {:?}",
            q.kind
        )));
    }
    Ok(())
}

fn build(q: &RobustnessQuery, pbox: &IntervalBox) -> Result<Formula> {
    let mut f = Formula::new();
    let params = declare_params(&mut f, pbox);
    let l = q.net.level;
    match q.kind {
        QueryKind::LocalEps => {
            let x0 = q.x0.as_ref().expect("validated");
            let f0 = q.net.unflatten(&q.p0)?.forward(x0)?;
            let fp = network_to_expr(&q.net, &params, &const_slots(x0))?;
            let gap = Expr::abs(Expr::sub(Expr::c(f0), fp));
            let eps = q.epsilon.expect("validated");
            f.require(Clause::atom(AtomicConstraint::new(gap, Rel::Gt, Expr::c(eps))));
        }
        QueryKind::GlobalEps => {
            let inputs = declare_inputs(&mut f, q.domain.as_ref().expect("validated"));
            let f0x = network_to_expr(&q.net, &const_slots(&q.p0.values), &inputs)?;
            let fpx = network_to_expr(&q.net, &params, &inputs)?;
            let gap = Expr::abs(Expr::sub(f0x, fpx));
            let eps = q.epsilon.expect("validated");
            f.require(Clause::atom(AtomicConstraint::new(gap, Rel::Gt, Expr::c(eps))));
        }
        QueryKind::LocalFlip => {
            let x0 = q.x0.as_ref().expect("validated");
            let f0 = q.net.unflatten(&q.p0)?.forward(x0)?;
            let fp = network_to_expr(&q.net, &params, &const_slots(x0))?;
            // the reference side is known at encode time, so only the
            // matching disjunct survives
            let atom = if f0 <= l {
                AtomicConstraint::new(fp, Rel::Gt, Expr::c(l))
            } else {
                AtomicConstraint::new(fp, Rel::Le, Expr::c(l))
            };
            f.require(Clause::atom(atom));
        }
        QueryKind::GlobalFlip => {
            let inputs = declare_inputs(&mut f, q.domain.as_ref().expect("validated"));
            let f0x = network_to_expr(&q.net, &const_slots(&q.p0.values), &inputs)?;
            let fpx = network_to_expr(&q.net, &params, &inputs)?;
            f.require(flip_clause(f0x, fpx, l));
        }
        QueryKind::SigmaFlip => {
            let inputs = declare_inputs(&mut f, q.domain.as_ref().expect("validated"));
            let f0x = network_to_expr(&q.net, &const_slots(&q.p0.values), &inputs)?;
            let fpx = network_to_expr(&q.net, &params, &inputs)?;
            let sigma = q.sigma.expect("validated");
            let margin = Expr::abs(Expr::sub(f0x.clone(), Expr::c(l)));
            f.require(flip_clause(f0x, fpx, l));
            f.require(Clause::atom(AtomicConstraint::new(
                margin,
                Rel::Ge,
                Expr::c(sigma),
            )));
        }
    }
    f.validate()?;
    Ok(f)
}

/// The label-disagreement disjunction: the reference and the perturbed
/// output fall on opposite sides of the level.
fn flip_clause(f0x: Expr, fpx: Expr, l: f64) -> Clause {
    Clause::any_of(vec![
        vec![
            AtomicConstraint::new(f0x.clone(), Rel::Le, Expr::c(l)),
            AtomicConstraint::new(fpx.clone(), Rel::Gt, Expr::c(l)),
        ],
        vec![
            AtomicConstraint::new(f0x, Rel::Gt, Expr::c(l)),
            AtomicConstraint::new(fpx, Rel::Le, Expr::c(l)),
        ],
    ])
}

fn declare_params(f: &mut Formula, pbox: &IntervalBox) -> Vec<Slot> {
    let mut first = 0;
    for i in 0..pbox.len() {
        let id = f.declare(format!("p{i}"), pbox.get(i), VarRole::Param(i));
        if i == 0 {
            first = id;
        }
    }
    var_slots(first, pbox.len())
}

fn declare_inputs(f: &mut Formula, domain: &IntervalBox) -> Vec<Slot> {
    let mut first = 0;
    for j in 0..domain.len() {
        let id = f.declare(format!("x{j}"), domain.get(j), VarRole::Input(j));
        if j == 0 {
            first = id;
        }
    }
    var_slots(first, domain.len())
}

fn check_opt_inputs(net: &Network, p0: &ParamVector, delta: f64) -> Result<()> {
    net.validate()?;
    if p0.len() != net.param_count() {
        return Err(Error::InvalidQuery(format!(
            "reference parameter vector has {} values, network has {} parameters",
            p0.len(),
            net.param_count()
        )));
    }
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidQuery(format!(
            "delta must be finite and nonnegative, got {delta}"
        )));
    }
    Ok(())
}

/// Estimation problem for the largest confidence deviation reachable at
/// `x0`: maximize `eps` subject to `|f_p0(x0) - f_p(x0)| = eps` over the
/// perturbation box, phrased as minimizing `-eps`.
pub fn opt_local_eps(
    net: &Network,
    p0: &ParamVector,
    x0: &[f64],
    delta: f64,
    eps_max: f64,
) -> Result<OptProblem> {
    check_opt_inputs(net, p0, delta)?;
    if !(eps_max > 0.0 && eps_max <= 1.0) {
        return Err(Error::InvalidQuery(format!(
            "eps_max must lie in (0, 1], got {eps_max}"
        )));
    }
    let f0 = net.unflatten(p0)?.forward(x0)?;
    let pbox = perturb_box(p0, delta)?;
    let mut f = Formula::new();
    let params = declare_params(&mut f, &pbox);
    let fp = network_to_expr(net, &params, &const_slots(x0))?;
    let gap = Expr::abs(Expr::sub(Expr::c(f0), fp));
    let e = f.declare("eps", Interval::new(0.0, eps_max)?, VarRole::Objective);
    f.require(Clause::atom(AtomicConstraint::new(
        Expr::var(e),
        Rel::Eq,
        gap.clone(),
    )));
    f.validate()?;
    Ok(OptProblem {
        objective: Expr::neg(Expr::var(e)),
        constraints: f,
        objective_range: Interval::new(-eps_max, 0.0)?,
        repair: Some(gap_repair(gap, e, pbox)),
    })
}

/// As [`opt_local_eps`] with the input ranging over `domain` as well.
pub fn opt_global_eps(
    net: &Network,
    p0: &ParamVector,
    domain: &IntervalBox,
    delta: f64,
    eps_max: f64,
) -> Result<OptProblem> {
    check_opt_inputs(net, p0, delta)?;
    if !(eps_max > 0.0 && eps_max <= 1.0) {
        return Err(Error::InvalidQuery(format!(
            "eps_max must lie in (0, 1], got {eps_max}"
        )));
    }
    if domain.len() != net.input_dim {
        return Err(Error::InvalidQuery(format!(
            "domain has {} dimensions, network expects {}",
            domain.len(),
            net.input_dim
        )));
    }
    let pbox = perturb_box(p0, delta)?;
    let mut f = Formula::new();
    let params = declare_params(&mut f, &pbox);
    let inputs = declare_inputs(&mut f, domain);
    let f0x = network_to_expr(net, &const_slots(&p0.values), &inputs)?;
    let fpx = network_to_expr(net, &params, &inputs)?;
    let gap = Expr::abs(Expr::sub(f0x, fpx));
    let e = f.declare("eps", Interval::new(0.0, eps_max)?, VarRole::Objective);
    f.require(Clause::atom(AtomicConstraint::new(
        Expr::var(e),
        Rel::Eq,
        gap.clone(),
    )));
    f.validate()?;
    Ok(OptProblem {
        objective: Expr::neg(Expr::var(e)),
        constraints: f,
        objective_range: Interval::new(-eps_max, 0.0)?,
        repair: Some(gap_repair(gap, e, pbox)),
    })
}

/// Estimation problem for the widest confidence margin a flippable input
/// can have: maximize `sigma` subject to `|f_p0(x) - l| = sigma` and the
/// flip disjunction, phrased as minimizing `-sigma`. `side` narrows the
/// search to inputs the reference net puts above or below the level,
/// which is how the per-class margin pairs are produced.
pub fn opt_sigma(
    net: &Network,
    p0: &ParamVector,
    domain: &IntervalBox,
    delta: f64,
    sigma_max: f64,
    side: Side,
) -> Result<OptProblem> {
    check_opt_inputs(net, p0, delta)?;
    let l = net.level;
    let cap = l.max(1.0 - l);
    if !(sigma_max > 0.0 && sigma_max <= cap) {
        return Err(Error::InvalidQuery(format!(
            "sigma_max must lie in (0, {cap}], got {sigma_max}"
        )));
    }
    if domain.len() != net.input_dim {
        return Err(Error::InvalidQuery(format!(
            "domain has {} dimensions, network expects {}",
            domain.len(),
            net.input_dim
        )));
    }
    let pbox = perturb_box(p0, delta)?;
    let mut f = Formula::new();
    let params = declare_params(&mut f, &pbox);
    let inputs = declare_inputs(&mut f, domain);
    let f0x = network_to_expr(net, &const_slots(&p0.values), &inputs)?;
    let fpx = network_to_expr(net, &params, &inputs)?;
    match side {
        Side::Both => f.require(flip_clause(f0x.clone(), fpx.clone(), l)),
        Side::Above => {
            f.require(Clause::atom(AtomicConstraint::new(
                f0x.clone(),
                Rel::Gt,
                Expr::c(l),
            )));
            f.require(Clause::atom(AtomicConstraint::new(
                fpx.clone(),
                Rel::Le,
                Expr::c(l),
            )));
        }
        Side::Below => {
            f.require(Clause::atom(AtomicConstraint::new(
                f0x.clone(),
                Rel::Lt,
                Expr::c(l),
            )));
            f.require(Clause::atom(AtomicConstraint::new(
                fpx.clone(),
                Rel::Gt,
                Expr::c(l),
            )));
        }
    }
    let margin = Expr::abs(Expr::sub(f0x.clone(), Expr::c(l)));
    let s = f.declare("sigma", Interval::new(0.0, sigma_max)?, VarRole::Objective);
    f.require(Clause::atom(AtomicConstraint::new(
        Expr::var(s),
        Rel::Eq,
        margin.clone(),
    )));
    f.validate()?;
    Ok(OptProblem {
        objective: Expr::neg(Expr::var(s)),
        constraints: f,
        objective_range: Interval::new(-sigma_max, 0.0)?,
        repair: Some(sigma_repair(f0x, fpx, margin, s, pbox, l)),
    })
}

/// Repair step for the deviation problems: push each parameter to the
/// perturbation-box endpoint that enlarges the gap (the maximum of a
/// per-parameter monotone response sits at a corner), then recompute the
/// objective coordinate exactly.
fn gap_repair(gap: Expr, obj: VarId, pbox: IntervalBox) -> Repair {
    Arc::new(move |pt: &[f64]| {
        let mut fixed = pt.to_vec();
        for i in 0..pbox.len() {
            let iv = pbox.get(i);
            if iv.lo == iv.hi {
                fixed[i] = iv.lo;
                continue;
            }
            fixed[i] = iv.lo;
            let at_lo = gap.eval(&fixed).ok()?;
            fixed[i] = iv.hi;
            let at_hi = gap.eval(&fixed).ok()?;
            if at_lo > at_hi {
                fixed[i] = iv.lo;
            }
        }
        fixed[obj] = gap.eval(&fixed).ok()?;
        Some(fixed)
    })
}

/// Repair step for the margin problem: sweep each parameter to the
/// endpoint that drives the perturbed output toward the opposite side of
/// the level, reject the point if no flip is achieved, and recompute the
/// margin coordinate exactly.
fn sigma_repair(
    f0x: Expr,
    fpx: Expr,
    margin: Expr,
    obj: VarId,
    pbox: IntervalBox,
    l: f64,
) -> Repair {
    Arc::new(move |pt: &[f64]| {
        let mut fixed = pt.to_vec();
        let f0v = f0x.eval(&fixed).ok()?;
        let need_low = f0v > l;
        for i in 0..pbox.len() {
            let iv = pbox.get(i);
            if iv.lo == iv.hi {
                fixed[i] = iv.lo;
                continue;
            }
            fixed[i] = iv.lo;
            let at_lo = fpx.eval(&fixed).ok()?;
            fixed[i] = iv.hi;
            let at_hi = fpx.eval(&fixed).ok()?;
            let pick_lo = if need_low { at_lo <= at_hi } else { at_lo > at_hi };
            if pick_lo {
                fixed[i] = iv.lo;
            }
        }
        let fpv = fpx.eval(&fixed).ok()?;
        let flipped = if need_low { fpv <= l } else { fpv > l };
        if !flipped {
            return None;
        }
        fixed[obj] = margin.eval(&fixed).ok()?;
        Some(fixed)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::sigmoid_scalar;
    use crate::nn::{Activation, Layer};
    use crate::optimizer::minimize;
    use crate::solver::{decide, SolverConfig, Verdict};
    use rand::{Rng, SeedableRng};

    /// sig(w * x): a single weight parameter, no bias.
    fn toy_weight() -> Network {
        Network {
            input_dim: 1,
            level: 0.5,
            layers: vec![Layer::dense(vec![vec![1.0]], vec![], Activation::Sigmoid)],
        }
    }

    /// sig(x + b): a single bias parameter behind a frozen unit weight.
    fn toy_bias() -> Network {
        Network {
            input_dim: 1,
            level: 0.5,
            layers: vec![Layer {
                weights: vec![vec![1.0]],
                biases: vec![0.0],
                activation: Activation::Sigmoid,
                frozen_weights: true,
            }],
        }
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn local_eps_zero_delta_is_unsat() {
        let net = toy_weight();
        let mut q = RobustnessQuery::new(QueryKind::LocalEps, net, 0.0);
        q.x0 = Some(vec![1.0]);
        q.epsilon = Some(0.001);
        let f = encode_local_eps(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        assert_eq!(v, Verdict::Unsat);
    }

    #[test]
    fn local_eps_epsilon_one_is_unsat() {
        let net = toy_weight();
        let mut q = RobustnessQuery::new(QueryKind::LocalEps, net, 0.1);
        q.x0 = Some(vec![1.0]);
        q.epsilon = Some(1.0);
        let f = encode_local_eps(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        assert_eq!(v, Verdict::Unsat);
    }

    #[test]
    fn local_eps_toy_gap_is_reachable() {
        // gap 0.02011 is achievable at w = 0.9, so 0.015 must be exceeded
        let net = toy_weight();
        let mut q = RobustnessQuery::new(QueryKind::LocalEps, net, 0.1);
        q.x0 = Some(vec![1.0]);
        q.epsilon = Some(0.015);
        let f = encode_local_eps(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        match v {
            Verdict::DeltaSat { witness, .. } => {
                assert!(f.check_point(&witness, cfg().precision).unwrap());
            }
            other => panic!("expected DeltaSat, got {other:?}"),
        }
    }

    #[test]
    fn local_encodings_mention_no_input_vars() {
        let net = toy_weight();
        let mut q = RobustnessQuery::new(QueryKind::LocalFlip, net, 0.05);
        q.x0 = Some(vec![0.7]);
        let f = encode_local_flip(&q).unwrap();
        assert_eq!(f.vars.len(), 1);
        assert_eq!(f.clauses.len(), 1);
        assert_eq!(f.clauses[0].disjuncts.len(), 1);
        assert_eq!(f.clauses[0].disjuncts[0].len(), 1);
    }

    #[test]
    fn global_encodings_mention_each_input_var() {
        let net = toy_weight();
        let mut q = RobustnessQuery::new(QueryKind::GlobalFlip, net, 0.1);
        q.domain = Some(IntervalBox::new(vec![Interval::new(-2.0, 2.0).unwrap()]));
        let f = encode_global_flip(&q).unwrap();
        assert_eq!(f.vars.len(), 2);
        assert_eq!(f.clauses[0].disjuncts.len(), 2);
        let mut seen = std::collections::BTreeSet::new();
        for d in &f.clauses[0].disjuncts {
            for a in d {
                a.lhs.collect_vars(&mut seen);
                a.rhs.collect_vars(&mut seen);
            }
        }
        assert!(seen.contains(&1), "input variable must appear: {seen:?}");
    }

    #[test]
    fn local_flip_with_zero_delta_is_unsat() {
        let net = toy_weight();
        let mut q = RobustnessQuery::new(QueryKind::LocalFlip, net, 0.0);
        q.x0 = Some(vec![0.8]);
        let f = encode_local_flip(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        assert_eq!(v, Verdict::Unsat);
    }

    #[test]
    fn local_flip_bias_toy_is_satisfiable() {
        // sig(x0 + b) at x0 = 0.05 flips once b <= -0.05
        let net = toy_bias();
        let mut q = RobustnessQuery::new(QueryKind::LocalFlip, net, 0.1);
        q.x0 = Some(vec![0.05]);
        let f = encode_local_flip(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        match v {
            Verdict::DeltaSat { witness, .. } => {
                assert!(f.check_point(&witness, cfg().precision).unwrap());
            }
            other => panic!("expected DeltaSat, got {other:?}"),
        }
    }

    #[test]
    fn global_flip_bias_toy_finds_exact_flip_witness() {
        let net = toy_bias();
        let mut q = RobustnessQuery::new(QueryKind::GlobalFlip, net, 0.1);
        q.domain = Some(IntervalBox::new(vec![Interval::new(-1.0, 1.0).unwrap()]));
        let f = encode_global_flip(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        match v {
            Verdict::DeltaSat { witness, .. } => {
                assert!(f.check_point(&witness, cfg().precision).unwrap());
                // vars: b, x; an exact witness moves the confidence across
                // the level (signs are compared on the evaluated outputs,
                // which is what the formula constrains)
                let (b, x) = (witness[0], witness[1]);
                if f.check_point(&witness, 0.0).unwrap() {
                    let f0 = sigmoid_scalar(x);
                    let fp = sigmoid_scalar(x + b);
                    assert_ne!(f0 > 0.5, fp > 0.5, "witness must cross the level");
                }
            }
            other => panic!("expected DeltaSat, got {other:?}"),
        }
    }

    #[test]
    fn global_flip_weight_toy_has_no_exact_solution() {
        // scaling a weight by 0.9..1.1 never moves sig(w x) across 0.5,
        // because the sign of w x matches the sign of x throughout
        let net = toy_weight();
        let mut q = RobustnessQuery::new(QueryKind::GlobalFlip, net, 0.1);
        q.domain = Some(IntervalBox::new(vec![Interval::new(-2.0, 2.0).unwrap()]));
        let f = encode_global_flip(&q).unwrap();
        let bx = f.domain_box();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let pt = bx.sample(&mut rng);
            assert!(!f.check_point(&pt, 0.0).unwrap(), "exact flip at {pt:?}");
        }
        // on-grid boundary points included
        for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            for w in [0.9, 1.0, 1.1] {
                assert!(!f.check_point(&[w, x], 0.0).unwrap());
            }
        }
    }

    #[test]
    fn sigma_flip_above_max_margin_is_unsat() {
        // margins over x in [-1,1] stay below |sig(1) - 0.5| = 0.2311
        let net = toy_bias();
        let mut q = RobustnessQuery::new(QueryKind::SigmaFlip, net, 0.1);
        q.domain = Some(IntervalBox::new(vec![Interval::new(-1.0, 1.0).unwrap()]));
        q.sigma = Some(0.3);
        let f = encode_sigma_flip(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        assert_eq!(v, Verdict::Unsat);
    }

    #[test]
    fn sigma_flip_band_separates_sat_from_unsat() {
        let net = toy_bias();
        let mut q = RobustnessQuery::new(QueryKind::SigmaFlip, net, 0.1);
        q.domain = Some(IntervalBox::new(vec![Interval::new(-1.0, 1.0).unwrap()]));

        // flips are confined to margins below sig(0.1) - 0.5 = 0.024979
        q.sigma = Some(0.03);
        let f = encode_sigma_flip(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        assert_eq!(v, Verdict::Unsat);

        q.sigma = Some(0.01);
        let f = encode_sigma_flip(&q).unwrap();
        let (v, _) = decide(&f, &cfg()).unwrap();
        assert!(matches!(v, Verdict::DeltaSat { .. }), "got {v:?}");
    }

    #[test]
    fn query_validation_rejects_mismatched_fields() {
        let net = toy_weight();
        let q = RobustnessQuery::new(QueryKind::LocalEps, net.clone(), 0.1);
        assert!(encode(&q).is_err(), "missing x0 and epsilon");

        let mut q = RobustnessQuery::new(QueryKind::LocalFlip, net.clone(), 0.1);
        q.x0 = Some(vec![1.0]);
        q.sigma = Some(0.1);
        assert!(encode(&q).is_err(), "sigma is not a LocalFlip field");

        let mut q = RobustnessQuery::new(QueryKind::GlobalEps, net, -0.5);
        q.domain = Some(IntervalBox::new(vec![Interval::new(0.0, 1.0).unwrap()]));
        q.epsilon = Some(0.1);
        assert!(encode(&q).is_err(), "negative delta");
    }

    #[test]
    fn opt_local_eps_toy_matches_endpoint_value() {
        // max |sig(1) - sig(w)| over w in [0.9, 1.1] is at w = 0.9
        let net = toy_weight();
        let p0 = net.flatten();
        let p = opt_local_eps(&net, &p0, &[1.0], 0.1, 1.0).unwrap();
        let r = minimize(&p, &cfg(), 1e-4).unwrap();
        let truth = 0.020109076005001003;
        let (lo, hi) = (-r.upper, -r.lower);
        assert!(lo <= truth + 1e-9 && truth <= hi + 1e-9, "{r:?}");
        assert!(hi - lo <= 1e-4 + 1e-9, "{r:?}");
    }

    #[test]
    fn opt_zero_delta_pins_eps_to_zero() {
        let net = toy_weight();
        let p0 = net.flatten();
        let p = opt_local_eps(&net, &p0, &[1.0], 0.0, 1.0).unwrap();
        let r = minimize(&p, &cfg(), 1e-4).unwrap();
        assert!(-r.upper <= 1e-12 && -r.lower <= 1e-4, "{r:?}");
    }

    #[test]
    fn encoded_satisfaction_matches_direct_violation_check() {
        // the formula must agree pointwise with the defining inequality
        let net = toy_weight();
        let p0 = net.flatten();
        let domain = IntervalBox::new(vec![Interval::new(-2.0, 2.0).unwrap()]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);

        let mut q = RobustnessQuery::new(QueryKind::GlobalEps, net.clone(), 0.1);
        q.domain = Some(domain.clone());
        q.epsilon = Some(0.012);
        let f_eps = encode_global_eps(&q).unwrap();

        let mut q = RobustnessQuery::new(QueryKind::GlobalFlip, net.clone(), 0.1);
        q.domain = Some(domain.clone());
        let f_flip = encode_global_flip(&q).unwrap();

        let mut q = RobustnessQuery::new(QueryKind::SigmaFlip, net.clone(), 0.1);
        q.domain = Some(domain);
        q.sigma = Some(0.05);
        let f_sigma = encode_sigma_flip(&q).unwrap();

        let pbox = perturb_box(&p0, 0.1).unwrap();
        for _ in 0..2000 {
            let w = pbox.get(0).lo + rng.random::<f64>() * pbox.get(0).width();
            let x = -2.0 + rng.random::<f64>() * 4.0;
            let pt = [w, x];
            let f0 = net.forward(&[x]).unwrap();
            let fp = net
                .unflatten(&ParamVector { values: vec![w] })
                .unwrap()
                .forward(&[x])
                .unwrap();

            let eps_violated = (f0 - fp).abs() > 0.012;
            assert_eq!(f_eps.check_point(&pt, 0.0).unwrap(), eps_violated);

            let flipped = (f0 <= 0.5) != (fp <= 0.5);
            assert_eq!(f_flip.check_point(&pt, 0.0).unwrap(), flipped);

            let sigma_violated = flipped && (f0 - 0.5).abs() >= 0.05;
            assert_eq!(f_sigma.check_point(&pt, 0.0).unwrap(), sigma_violated);
        }
    }

    #[test]
    fn sigma_sides_agree_on_symmetric_toy() {
        // worst flippable margin for sig(x + b), delta 0.1, either side:
        // sig(0.1) - 0.5
        let truth = 0.024979187478940013;
        let net = toy_bias();
        let p0 = net.flatten();
        let domain = IntervalBox::new(vec![Interval::new(-1.0, 1.0).unwrap()]);
        let mut bounds = Vec::new();
        for side in [Side::Above, Side::Below] {
            let p = opt_sigma(&net, &p0, &domain, 0.1, 0.5, side).unwrap();
            let r = minimize(&p, &cfg(), 1e-4).unwrap();
            let (lo, hi) = (-r.upper, -r.lower);
            assert!(lo <= truth + 1e-9 && truth <= hi + 1e-9, "{side:?}: {r:?}");
            assert!(hi - lo <= 1e-4 + 1e-9, "{side:?}: {r:?}");
            bounds.push((lo, hi));
        }
        let (alo, ahi) = bounds[0];
        let (blo, bhi) = bounds[1];
        assert!((alo - blo).abs() <= 2e-4, "{bounds:?}");
        assert!((ahi - bhi).abs() <= 2e-4, "{bounds:?}");
    }
}
