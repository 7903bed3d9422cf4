//! Certified global minimization by branch-and-bound over interval
//! enclosures.
//!
//! The search keeps a best-first queue of boxes ordered by objective lower
//! bound. Each box is contracted against the constraints, cut against the
//! incumbent, probed for feasible points, and either resolved (its bound
//! folded into the result) or split. The returned `[lower, upper]` always
//! brackets the true constrained minimum: `upper` comes from points whose
//! feasibility was verified exactly (optionally after a problem-specific
//! repair step), `lower` from interval bounds over every region not yet
//! excluded.

use crate::contract::{CompiledFormula, GradTape, ObjectiveTape, Pins, Scratch};
use crate::error::Result;
use crate::expr::Expr;
use crate::formula::{Formula, Rel};
use crate::interval::{Interval, IntervalBox};
use crate::solver::SolverConfig;
use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

/// Projects a candidate point onto the exactly feasible set, typically by
/// recomputing derived coordinates (such as an objective variable tied to
/// the rest of the point by an equality). The result is re-verified with
/// `check_point` at zero slack before use, so a repair step can be
/// heuristic without endangering soundness.
pub type Repair = std::sync::Arc<dyn Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync>;

pub struct OptProblem {
    pub objective: Expr,
    pub constraints: Formula,
    pub objective_range: Interval,
    pub repair: Option<Repair>,
}

impl std::fmt::Debug for OptProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OptProblem")
            .field("objective", &self.objective)
            .field("objective_range", &self.objective_range)
            .field("constraints", &self.constraints.clauses.len())
            .field("repair", &self.repair.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    /// Certified lower bound on the constrained minimum. `+inf` together
    /// with an infinite `upper` means the feasible set was proven empty.
    pub lower: f64,
    /// Best exactly-feasible objective value found (`+inf` if none).
    pub upper: f64,
    pub witness: Option<Vec<f64>>,
    pub converged: bool,
    pub splits_used: u64,
    pub boxes_processed: u64,
}

struct QueueEntry {
    lb: f64,
    seq: u64,
    bx: IntervalBox,
    pins: Pins,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == CmpOrdering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    // BinaryHeap is a max-heap; invert so the smallest bound pops first,
    // with insertion order as a deterministic tie-break
    fn cmp(&self, other: &Self) -> CmpOrdering {
        other
            .lb
            .total_cmp(&self.lb)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct OptState {
    heap: BinaryHeap<QueueEntry>,
    incumbent: f64,
    witness: Option<Vec<f64>>,
    /// Lower bound over boxes resolved without refutation (too small to
    /// split, or dropped at budget exhaustion).
    resolved_lb: f64,
    inflight: Vec<f64>,
    seq: u64,
}

impl OptState {
    fn outstanding_lb(&self) -> f64 {
        let heap_lb = self.heap.peek().map_or(f64::INFINITY, |e| e.lb);
        self.inflight.iter().copied().fold(heap_lb, f64::min)
    }
}

struct OptShared<'a> {
    problem: &'a OptProblem,
    compiled: &'a CompiledFormula,
    objective: &'a ObjectiveTape,
    /// Mean-value-form tapes for equality-defined variables (`v = expr`),
    /// used to tighten `v` beyond the natural enclosure per box.
    defined: &'a [(usize, GradTape)],
    cfg: &'a SolverConfig,
    tolerance: f64,
    width_floor: f64,
    state: Mutex<OptState>,
    splits: AtomicU64,
    boxes: AtomicU64,
    budget_hit: AtomicBool,
    done: AtomicBool,
}

/// Minimizes the problem's objective over its constraint formula to within
/// `tolerance`, or until the split budget runs out (the bounds stay valid
/// either way).
pub fn minimize(p: &OptProblem, cfg: &SolverConfig, tolerance: f64) -> Result<OptResult> {
    assert!(tolerance > 0.0, "tolerance must be positive");
    let compiled = CompiledFormula::compile(&p.constraints)?;
    let objective = ObjectiveTape::compile(&p.objective);
    let defined = defined_vars(&p.constraints);
    let workers = cfg.workers.max(1);
    let shared = OptShared {
        problem: p,
        compiled: &compiled,
        objective: &objective,
        defined: &defined,
        cfg,
        tolerance,
        width_floor: cfg.precision.min(0.5 * tolerance).max(1e-12),
        state: Mutex::new(OptState {
            heap: BinaryHeap::new(),
            incumbent: f64::INFINITY,
            witness: None,
            resolved_lb: f64::INFINITY,
            inflight: vec![f64::INFINITY; workers],
            seq: 1,
        }),
        splits: AtomicU64::new(0),
        boxes: AtomicU64::new(0),
        budget_hit: AtomicBool::new(false),
        done: AtomicBool::new(false),
    };
    shared
        .state
        .lock()
        .expect("state lock poisoned")
        .heap
        .push(QueueEntry {
            lb: p.objective_range.lo,
            seq: 0,
            bx: p.constraints.domain_box(),
            pins: vec![None; compiled.clause_count()],
        });

    if workers == 1 {
        opt_worker(&shared, 0)?;
    } else {
        let shared = &shared;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| scope.spawn(move || opt_worker(shared, w)))
                .collect();
            for h in handles {
                h.join().expect("optimizer worker panicked")?;
            }
            Ok::<(), crate::error::Error>(())
        })?;
    }

    let state = shared.state.into_inner().expect("state lock poisoned");
    let lower = state
        .resolved_lb
        .min(state.heap.peek().map_or(f64::INFINITY, |e| e.lb))
        .min(state.incumbent)
        .max(p.objective_range.lo);
    let upper = state.incumbent;
    let converged = if lower.is_infinite() && upper.is_infinite() {
        true // proven infeasible
    } else {
        upper - lower <= tolerance
    };
    Ok(OptResult {
        lower,
        upper,
        witness: state.witness,
        converged,
        splits_used: shared.splits.load(Ordering::Relaxed),
        boxes_processed: shared.boxes.load(Ordering::Relaxed),
    })
}

fn opt_worker(shared: &OptShared<'_>, me: usize) -> Result<()> {
    let mut scratch = Scratch::default();
    let mut live: Vec<Vec<usize>> = Vec::new();
    loop {
        if shared.done.load(Ordering::Acquire) {
            return Ok(());
        }
        let popped = {
            let mut st = shared.state.lock().expect("state lock poisoned");
            let outstanding = st.outstanding_lb();
            if st.incumbent - outstanding <= shared.tolerance
                || (st.heap.is_empty() && st.inflight.iter().all(|l| l.is_infinite()))
            {
                shared.done.store(true, Ordering::Release);
                return Ok(());
            }
            match st.heap.pop() {
                Some(e) => {
                    st.inflight[me] = e.lb;
                    Some((e, st.incumbent))
                }
                None => None,
            }
        };
        let Some((entry, incumbent)) = popped else {
            std::thread::yield_now();
            continue;
        };
        let outcome = process_box(shared, entry, incumbent, &mut scratch, &mut live);
        let mut st = shared.state.lock().expect("state lock poisoned");
        st.inflight[me] = f64::INFINITY;
        match outcome? {
            BoxOutcome::Refuted => {}
            BoxOutcome::Resolved { lb, candidate } => {
                st.resolved_lb = st.resolved_lb.min(lb);
                apply_candidate(&mut st, candidate);
            }
            BoxOutcome::Split {
                children,
                candidate,
            } => {
                for (lb, bx, pins) in children {
                    let seq = st.seq;
                    st.seq += 1;
                    st.heap.push(QueueEntry { lb, seq, bx, pins });
                }
                apply_candidate(&mut st, candidate);
            }
        }
    }
}

/// Finds unconditional equality atoms of the shape `v = expr` (or
/// mirrored) where `v` does not occur in `expr`, and compiles a gradient
/// tape for each body. These are the derived-coordinate definitions the
/// encoders emit (objective variables tied to a gap or margin expression),
/// exactly where the natural enclosure is loosest.
fn defined_vars(f: &Formula) -> Vec<(usize, GradTape)> {
    let mut defs = Vec::new();
    for clause in &f.clauses {
        if clause.disjuncts.len() != 1 || clause.disjuncts[0].len() != 1 {
            continue;
        }
        let a = &clause.disjuncts[0][0];
        if a.rel != Rel::Eq {
            continue;
        }
        let (v, body) = match (&a.lhs, &a.rhs) {
            (Expr::Var(v), body) => (*v, body),
            (body, Expr::Var(v)) => (*v, body),
            _ => continue,
        };
        let mut vs = std::collections::BTreeSet::new();
        body.collect_vars(&mut vs);
        if vs.contains(&v) {
            continue;
        }
        defs.push((v, GradTape::compile(body)));
    }
    defs
}

fn apply_candidate(st: &mut OptState, candidate: Option<(f64, Vec<f64>)>) {
    if let Some((v, pt)) = candidate {
        if v < st.incumbent {
            st.incumbent = v;
            st.witness = Some(pt);
        }
    }
}

enum BoxOutcome {
    Refuted,
    Resolved {
        lb: f64,
        candidate: Option<(f64, Vec<f64>)>,
    },
    Split {
        children: Vec<(f64, IntervalBox, Pins)>,
        candidate: Option<(f64, Vec<f64>)>,
    },
}

const PROBE_FRACTIONS: [&[f64]; 5] = [&[0.5], &[0.25], &[0.75], &[0.25, 0.75], &[0.75, 0.25]];

fn probe_point(bx: &IntervalBox, pattern: &[f64]) -> Vec<f64> {
    (0..bx.len())
        .map(|i| {
            let iv = bx.get(i);
            let t = pattern[i % pattern.len()];
            (iv.lo * (1.0 - t) + iv.hi * t).clamp(iv.lo, iv.hi)
        })
        .collect()
}

fn process_box(
    shared: &OptShared<'_>,
    entry: QueueEntry,
    incumbent: f64,
    scratch: &mut Scratch,
    live: &mut Vec<Vec<usize>>,
) -> Result<BoxOutcome> {
    let QueueEntry { mut bx, pins, .. } = entry;
    shared.boxes.fetch_add(1, Ordering::Relaxed);
    let p = shared.problem;

    // cut against the incumbent: points that cannot improve it are dropped
    let cut_hi = incumbent
        .min(p.objective_range.hi)
        .next_up()
        .max(p.objective_range.lo);
    let required = Interval::raw(p.objective_range.lo, cut_hi);
    for _ in 0..2 {
        if !shared
            .compiled
            .contract_fixpoint(&mut bx, &pins, scratch, live, 8)
        {
            return Ok(BoxOutcome::Refuted);
        }
        // mean-value tightening of defined variables; a feasible point has
        // v = body(pt), and body(pt) lies in the gradient enclosure
        for (v, tape) in shared.defined {
            let enclosed = tape.enclose(&bx, scratch);
            match bx.get(*v).intersect(&enclosed) {
                Some(iv) => bx.set(*v, iv),
                None => return Ok(BoxOutcome::Refuted),
            }
        }
        if !shared.objective.restrict(&mut bx, required, scratch) {
            return Ok(BoxOutcome::Refuted);
        }
    }

    let fwd = shared.objective.enclose(&bx, scratch);
    let lb = fwd.lo.max(p.objective_range.lo);

    // probe for exactly feasible points to tighten the incumbent
    let mut candidate: Option<(f64, Vec<f64>)> = None;
    for pattern in PROBE_FRACTIONS {
        let raw = probe_point(&bx, pattern);
        let pt = match &p.repair {
            Some(fix) => match fix(&raw) {
                Some(adjusted) => adjusted,
                None => continue,
            },
            None => raw,
        };
        if p.constraints.check_point(&pt, 0.0)? {
            let v = p.objective.eval(&pt)?;
            if candidate.as_ref().is_none_or(|(best, _)| v < *best) {
                candidate = Some((v, pt));
            }
        }
    }

    let small = bx.dims().iter().all(|iv| iv.width() < shared.width_floor);
    if small || lb >= cut_hi {
        return Ok(BoxOutcome::Resolved { lb, candidate });
    }

    if shared.splits.fetch_add(1, Ordering::AcqRel) >= shared.cfg.max_splits {
        shared.budget_hit.store(true, Ordering::Relaxed);
        shared.done.store(true, Ordering::Release);
        return Ok(BoxOutcome::Resolved { lb, candidate });
    }

    // prefer separating a stalled disjunction, else bisect the widest
    // scaled dimension
    let clause_split = pins
        .iter()
        .enumerate()
        .find(|(c, pin)| pin.is_none() && live[*c].len() >= 2)
        .map(|(c, _)| c);
    let children = if let Some(c) = clause_split {
        live[c]
            .iter()
            .map(|&d| {
                let mut pins_d = pins.clone();
                pins_d[c] = Some(d);
                (lb, bx.clone(), pins_d)
            })
            .collect()
    } else {
        match bx.widest_scaled(shared.compiled.init_widths()) {
            Some(dim) => {
                let (l, r) = bx.split(dim);
                vec![(lb, l, pins.clone()), (lb, r, pins)]
            }
            None => return Ok(BoxOutcome::Resolved { lb, candidate }),
        }
    };
    Ok(BoxOutcome::Split {
        children,
        candidate,
    })
}

/// Certified two-sided bound on a robustness threshold (a largest
/// confidence deviation or flippable margin): `lower <= true value <=
/// upper`. The witness, when present, is a full variable assignment
/// (parameters, then inputs for global problems, then the threshold
/// coordinate) that exactly achieves `lower`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub lower: f64,
    pub upper: f64,
    pub witness: Option<Vec<f64>>,
    pub converged: bool,
    pub splits_used: u64,
}

/// The estimation problems maximize a threshold by minimizing its
/// negation, so the minimization bracket flips sign here. An infeasible
/// problem means no admissible perturbation produces any violation at
/// all; the supremum over that empty set is reported as zero.
fn threshold_estimate(r: OptResult) -> Estimate {
    if r.lower.is_infinite() && r.upper.is_infinite() {
        return Estimate {
            lower: 0.0,
            upper: 0.0,
            witness: None,
            converged: r.converged,
            splits_used: r.splits_used,
        };
    }
    Estimate {
        lower: (-r.upper).max(0.0),
        upper: -r.lower,
        witness: r.witness,
        converged: r.converged,
        splits_used: r.splits_used,
    }
}

/// Certified enclosure of the largest confidence deviation `|f_p0(x0) -
/// f_p(x0)|` reachable at the fixed input `x0` when every parameter may
/// move at most `delta` from `p0`. Gap tolerance is the solver precision.
pub fn estimate_eps_local(
    net: &crate::nn::Network,
    p0: &crate::nn::ParamVector,
    x0: &[f64],
    delta: f64,
    cfg: &SolverConfig,
) -> Result<Estimate> {
    let p = crate::encoder::opt_local_eps(net, p0, x0, delta, 1.0)?;
    Ok(threshold_estimate(minimize(&p, cfg, cfg.precision)?))
}

/// As [`estimate_eps_local`], but the deviation is also maximized over all
/// inputs in `domain`.
pub fn estimate_eps_global(
    net: &crate::nn::Network,
    p0: &crate::nn::ParamVector,
    domain: &IntervalBox,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<Estimate> {
    let p = crate::encoder::opt_global_eps(net, p0, domain, delta, 1.0)?;
    Ok(threshold_estimate(minimize(&p, cfg, cfg.precision)?))
}

/// Certified enclosure of the widest confidence margin `|f_p0(x) - l|`
/// over inputs in `domain` whose label some `delta`-perturbation can still
/// flip. Zero means no input in the domain is flippable at all.
pub fn estimate_sigma(
    net: &crate::nn::Network,
    p0: &crate::nn::ParamVector,
    domain: &IntervalBox,
    delta: f64,
    side: crate::encoder::Side,
    cfg: &SolverConfig,
) -> Result<Estimate> {
    let sigma_max = net.level.max(1.0 - net.level);
    let p = crate::encoder::opt_sigma(net, p0, domain, delta, sigma_max, side)?;
    Ok(threshold_estimate(minimize(&p, cfg, cfg.precision)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{AtomicConstraint, Clause, Rel, VarRole};

    fn atom(lhs: Expr, rel: Rel, rhs: Expr) -> AtomicConstraint {
        AtomicConstraint::new(lhs, rel, rhs)
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn unconstrained_quadratic_minimum() {
        // minimize (x-0.3)^2 over [-1, 1], encoded via an objective variable
        let mut f = Formula::new();
        let x = f.declare("x", Interval::new(-1.0, 1.0).unwrap(), VarRole::Input(0));
        let o = f.declare("o", Interval::new(0.0, 4.0).unwrap(), VarRole::Objective);
        let shifted = Expr::sub(Expr::var(x), Expr::c(0.3));
        f.require(Clause::atom(atom(
            Expr::var(o),
            Rel::Eq,
            Expr::mul(shifted.clone(), shifted),
        )));
        let p = OptProblem {
            objective: Expr::var(o),
            constraints: f,
            objective_range: Interval::new(0.0, 4.0).unwrap(),
            // probes never satisfy the defining equality by luck; recompute o
            repair: Some(std::sync::Arc::new(move |pt: &[f64]| {
                let mut fixed = pt.to_vec();
                fixed[o] = (fixed[x] - 0.3) * (fixed[x] - 0.3);
                Some(fixed)
            })),
        };
        let r = minimize(&p, &cfg(), 1e-5).unwrap();
        assert!(r.lower <= 1e-5 && r.upper >= 0.0, "{r:?}");
        assert!(r.upper - r.lower <= 1e-5, "{r:?}");
        assert!(r.converged);
    }

    #[test]
    fn constrained_minimum_at_boundary() {
        // minimize x subject to sigmoid(x) >= 0.6: optimum at logit(0.6)
        let mut f = Formula::new();
        let x = f.declare("x", Interval::new(-4.0, 4.0).unwrap(), VarRole::Input(0));
        f.require(Clause::atom(atom(
            Expr::sigmoid(Expr::var(x)),
            Rel::Ge,
            Expr::c(0.6),
        )));
        let p = OptProblem {
            objective: Expr::var(x),
            constraints: f,
            objective_range: Interval::new(-4.0, 4.0).unwrap(),
            repair: None,
        };
        let r = minimize(&p, &cfg(), 1e-6).unwrap();
        let opt = (0.6f64 / 0.4).ln();
        assert!(r.lower <= opt && opt <= r.upper + 1e-6, "{r:?} vs {opt}");
        assert!(r.upper - r.lower <= 1e-6 + 1e-9, "{r:?}");
    }

    #[test]
    fn proven_infeasible_yields_infinite_sentinel() {
        let mut f = Formula::new();
        f.declare("x", Interval::new(0.0, 1.0).unwrap(), VarRole::Input(0));
        f.require(Clause::atom(atom(Expr::var(0), Rel::Gt, Expr::c(2.0))));
        let p = OptProblem {
            objective: Expr::var(0),
            constraints: f,
            objective_range: Interval::new(0.0, 1.0).unwrap(),
            repair: None,
        };
        let r = minimize(&p, &cfg(), 1e-4).unwrap();
        assert!(r.lower.is_infinite() && r.upper.is_infinite());
        assert!(r.witness.is_none());
        assert!(r.converged);
    }

    #[test]
    fn repair_recovers_exact_feasibility() {
        // o = |x| with x free: probes rarely hit o exactly; repair sets it
        let mut f = Formula::new();
        let x = f.declare("x", Interval::new(-2.0, 2.0).unwrap(), VarRole::Input(0));
        let o = f.declare("o", Interval::new(0.0, 2.0).unwrap(), VarRole::Objective);
        f.require(Clause::atom(atom(
            Expr::var(o),
            Rel::Eq,
            Expr::abs(Expr::var(x)),
        )));
        // keep the objective away from zero so the optimum is interior
        f.require(Clause::atom(atom(Expr::var(x), Rel::Ge, Expr::c(0.5))));
        let p = OptProblem {
            objective: Expr::neg(Expr::var(o)),
            constraints: f,
            objective_range: Interval::new(-2.0, 0.0).unwrap(),
            repair: Some(std::sync::Arc::new(move |pt: &[f64]| {
                let mut fixed = pt.to_vec();
                fixed[o] = fixed[x].abs();
                Some(fixed)
            })),
        };
        let r = minimize(&p, &cfg(), 1e-6).unwrap();
        // maximizing |x| over [0.5, 2] gives 2
        assert!((r.upper - (-2.0)).abs() < 1e-6, "{r:?}");
        assert!(r.lower <= -2.0, "{r:?}");
        let w = r.witness.unwrap();
        assert_eq!(w[o], w[x].abs());
    }

    #[test]
    fn budget_exhaustion_keeps_bounds_valid() {
        let mut f = Formula::new();
        let x = f.declare("x", Interval::new(-1.0, 1.0).unwrap(), VarRole::Input(0));
        let y = f.declare("y", Interval::new(-1.0, 1.0).unwrap(), VarRole::Input(1));
        f.require(Clause::atom(atom(
            Expr::add(
                Expr::mul(Expr::var(x), Expr::var(x)),
                Expr::mul(Expr::var(y), Expr::var(y)),
            ),
            Rel::Ge,
            Expr::c(0.5),
        )));
        let p = OptProblem {
            objective: Expr::add(Expr::var(x), Expr::var(y)),
            constraints: f,
            objective_range: Interval::new(-2.0, 2.0).unwrap(),
            repair: None,
        };
        let tight = SolverConfig {
            max_splits: 5,
            ..cfg()
        };
        let r = minimize(&p, &tight, 1e-9).unwrap();
        // true minimum is at x = y = -1
        assert!(r.lower <= -2.0 && r.upper >= -2.0, "{r:?}");
        assert!(!r.converged);
    }

    #[test]
    fn parallel_and_serial_bounds_agree() {
        let mut f = Formula::new();
        let x = f.declare("x", Interval::new(-3.0, 3.0).unwrap(), VarRole::Input(0));
        f.require(Clause::atom(atom(
            Expr::tanh(Expr::var(x)),
            Rel::Le,
            Expr::c(0.25),
        )));
        let p = OptProblem {
            objective: Expr::neg(Expr::var(x)),
            constraints: f,
            objective_range: Interval::new(-3.0, 3.0).unwrap(),
            repair: None,
        };
        let opt = -0.25541281188299536; // -atanh(0.25)
        for workers in [1, 4] {
            let c = SolverConfig {
                workers,
                ..cfg()
            };
            let r = minimize(&p, &c, 1e-6).unwrap();
            assert!(
                r.lower <= opt + 1e-12 && opt <= r.upper + 1e-6,
                "workers={workers}: {r:?}"
            );
            assert!(r.upper - r.lower <= 1e-6 + 1e-9, "workers={workers}: {r:?}");
        }
    }

    #[test]
    fn estimate_eps_local_toy_matches_closed_form() {
        let net = crate::fixtures::toy_weight();
        let p0 = net.flatten();
        let e = estimate_eps_local(&net, &p0, &[1.0], 0.1, &cfg()).unwrap();
        // sup over w in [0.9, 1.1] of |sig(w) - sig(1)| sits at w = 0.9
        let exact = 0.020109076005001003;
        assert!(e.lower <= exact && exact <= e.upper, "{e:?}");
        assert!((e.lower - exact).abs() <= 1e-4, "{e:?}");
        assert!((e.upper - exact).abs() <= 1e-4, "{e:?}");
        assert!(e.converged);
        assert!(e.witness.is_some());
    }

    #[test]
    fn estimate_eps_local_zero_delta_is_zero() {
        let net = crate::fixtures::toy_weight();
        let p0 = net.flatten();
        let e = estimate_eps_local(&net, &p0, &[1.0], 0.0, &cfg()).unwrap();
        assert_eq!(e.lower, 0.0);
        assert!(e.upper <= cfg().precision, "{e:?}");
    }

    #[test]
    fn estimate_eps_global_toy_matches_closed_form() {
        let net = crate::fixtures::toy_bias();
        let p0 = net.flatten();
        let domain = IntervalBox::new(vec![Interval::new(-1.0, 1.0).unwrap()]);
        let e = estimate_eps_global(&net, &p0, &domain, 0.1, &cfg()).unwrap();
        // sup over x, b of |sig(x+b) - sig(x)| is 2 sig(0.05) - 1 at x = -b/2
        let exact = 0.024994792968420665;
        assert!(e.lower <= exact && exact <= e.upper, "{e:?}");
        assert!((e.lower - exact).abs() <= 1e-4, "{e:?}");
        assert!((e.upper - exact).abs() <= 1e-4, "{e:?}");
    }

    #[test]
    fn estimate_sigma_toy_matches_closed_form() {
        let net = crate::fixtures::toy_bias();
        let p0 = net.flatten();
        let domain = IntervalBox::new(vec![Interval::new(-1.0, 1.0).unwrap()]);
        let e = estimate_sigma(
            &net,
            &p0,
            &domain,
            0.1,
            crate::encoder::Side::Above,
            &cfg(),
        )
        .unwrap();
        // widest flippable margin: x = 0.1 flips at b = -0.1
        let exact = 0.024979187478940013;
        assert!(e.lower <= exact + 1e-12 && exact <= e.upper, "{e:?}");
        assert!((e.upper - exact).abs() <= 1e-4, "{e:?}");
    }

    #[test]
    fn estimate_sigma_with_no_flippable_inputs_is_zero() {
        // over x in [0.5, 1], sig(x + b) stays above the level for |b| <= 0.001
        let net = crate::fixtures::toy_bias();
        let p0 = net.flatten();
        let domain = IntervalBox::new(vec![Interval::new(0.5, 1.0).unwrap()]);
        let e = estimate_sigma(
            &net,
            &p0,
            &domain,
            0.001,
            crate::encoder::Side::Both,
            &cfg(),
        )
        .unwrap();
        assert_eq!((e.lower, e.upper), (0.0, 0.0));
        assert!(e.witness.is_none());
        assert!(e.converged);
    }
}
