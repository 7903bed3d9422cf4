//! Branch-and-prune decision procedure for formulas over bounded boxes.
//!
//! The procedure is delta-complete in the dReal sense: `Unsat` certifies
//! that no exact solution exists (every leaf of the refutation tree was
//! excluded by sound contraction); `DeltaSat` returns a witness satisfying
//! the precision-weakened formula, preferring witnesses that satisfy the
//! exact formula when one is found. `Unknown` is returned only when the
//! split budget (or, pathologically, the floating-point resolution floor)
//! is exhausted with unresolved boxes remaining.

use crate::contract::{CompiledFormula, Pins, Scratch};
use crate::error::Result;
use crate::formula::Formula;
use crate::interval::IntervalBox;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchRule {
    /// Bisect the dimension with the largest width relative to its initial
    /// domain width; ties break toward the lowest variable index.
    WidestScaled,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// The solver's delta: atomic constraints are weakened by this much
    /// when certifying a witness.
    pub precision: f64,
    /// Total split budget across the whole search tree.
    pub max_splits: u64,
    pub branching: BranchRule,
    /// With one worker, makes runs bit-for-bit reproducible.
    pub deterministic: bool,
    pub workers: usize,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            precision: 1e-4,
            max_splits: 1_000_000,
            branching: BranchRule::WidestScaled,
            deterministic: false,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    /// The split budget ran out with unresolved boxes left.
    BudgetExhausted,
    /// A box could not be refuted, certified, or split further at f64
    /// resolution. Practically unreachable for well-scaled formulas.
    NumericFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Unsat,
    DeltaSat {
        witness: Vec<f64>,
        cert_box: IntervalBox,
    },
    Unknown {
        reason: UnknownReason,
    },
}

impl Verdict {
    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat)
    }

    pub fn is_delta_sat(&self) -> bool {
        matches!(self, Verdict::DeltaSat { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub boxes_processed: u64,
    pub splits: u64,
}

struct WorkItem {
    bx: IntervalBox,
    pins: Pins,
}

/// Fractions of each dimension probed for witnesses before splitting. The
/// midpoint alone is blind to feasible sets hugging a box diagonal, so a
/// few off-center points are tried too, deterministically.
const PROBE_FRACTIONS: [&[f64]; 5] = [
    &[0.5],
    &[0.25],
    &[0.75],
    &[0.25, 0.75],
    &[0.75, 0.25],
];

fn probe_point(bx: &IntervalBox, pattern: &[f64]) -> Vec<f64> {
    (0..bx.len())
        .map(|i| {
            let iv = bx.get(i);
            let t = pattern[i % pattern.len()];
            (iv.lo * (1.0 - t) + iv.hi * t).clamp(iv.lo, iv.hi)
        })
        .collect()
}

struct Shared<'a> {
    formula: &'a Formula,
    compiled: &'a CompiledFormula,
    cfg: &'a SolverConfig,
    stack: Mutex<Vec<WorkItem>>,
    active: AtomicU64,
    splits: AtomicU64,
    boxes: AtomicU64,
    stop: AtomicBool,
    budget_hit: AtomicBool,
    floor_hit: AtomicBool,
    witness: Mutex<Option<(Vec<f64>, IntervalBox)>>,
}

/// Decides the formula over its declared domain box.
pub fn decide(f: &Formula, cfg: &SolverConfig) -> Result<(Verdict, SolveStats)> {
    let compiled = CompiledFormula::compile(f)?;
    let root = WorkItem {
        bx: f.domain_box(),
        pins: vec![None; compiled.clause_count()],
    };
    let shared = Shared {
        formula: f,
        compiled: &compiled,
        cfg,
        stack: Mutex::new(vec![root]),
        active: AtomicU64::new(0),
        splits: AtomicU64::new(0),
        boxes: AtomicU64::new(0),
        stop: AtomicBool::new(false),
        budget_hit: AtomicBool::new(false),
        floor_hit: AtomicBool::new(false),
        witness: Mutex::new(None),
    };

    let workers = cfg.workers.max(1);
    if workers == 1 {
        worker_loop(&shared)?;
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| scope.spawn(|| worker_loop(&shared)))
                .collect();
            for h in handles {
                h.join().expect("solver worker panicked")?;
            }
            Ok::<(), crate::error::Error>(())
        })?;
    }

    let stats = SolveStats {
        boxes_processed: shared.boxes.load(Ordering::Relaxed),
        splits: shared.splits.load(Ordering::Relaxed),
    };
    let witness = shared.witness.into_inner().expect("witness lock poisoned");
    let verdict = if let Some((pt, bx)) = witness {
        Verdict::DeltaSat {
            witness: pt,
            cert_box: bx,
        }
    } else if shared.budget_hit.load(Ordering::Relaxed) {
        Verdict::Unknown {
            reason: UnknownReason::BudgetExhausted,
        }
    } else if shared.floor_hit.load(Ordering::Relaxed) {
        Verdict::Unknown {
            reason: UnknownReason::NumericFloor,
        }
    } else {
        Verdict::Unsat
    };
    Ok((verdict, stats))
}

fn worker_loop(shared: &Shared<'_>) -> Result<()> {
    let mut scratch = Scratch::default();
    let mut live: Vec<Vec<usize>> = Vec::new();
    loop {
        if shared.stop.load(Ordering::Acquire) {
            return Ok(());
        }
        let item = {
            let mut stack = shared.stack.lock().expect("stack lock poisoned");
            let item = stack.pop();
            if item.is_some() {
                shared.active.fetch_add(1, Ordering::AcqRel);
            }
            item
        };
        let Some(item) = item else {
            if shared.active.load(Ordering::Acquire) == 0 {
                return Ok(());
            }
            std::thread::yield_now();
            continue;
        };
        let result = process_item(shared, item, &mut scratch, &mut live);
        shared.active.fetch_sub(1, Ordering::AcqRel);
        result?;
    }
}

fn process_item(
    shared: &Shared<'_>,
    item: WorkItem,
    scratch: &mut Scratch,
    live: &mut Vec<Vec<usize>>,
) -> Result<()> {
    let cfg = shared.cfg;
    let WorkItem { mut bx, pins } = item;
    shared.boxes.fetch_add(1, Ordering::Relaxed);

    if !shared
        .compiled
        .contract_fixpoint(&mut bx, &pins, scratch, live, 12)
    {
        return Ok(()); // refuted
    }

    // witness probes: exact satisfaction anywhere is conclusive
    for pattern in PROBE_FRACTIONS {
        let pt = probe_point(&bx, pattern);
        if shared.formula.check_point(&pt, 0.0)? {
            report_witness(shared, pt, bx);
            return Ok(());
        }
    }

    // small enough to certify against the weakened formula
    let small = bx.dims().iter().all(|iv| iv.width() < cfg.precision);
    if small {
        for pattern in PROBE_FRACTIONS {
            let pt = probe_point(&bx, pattern);
            if shared.formula.check_point(&pt, cfg.precision)? {
                report_witness(shared, pt, bx);
                return Ok(());
            }
        }
    }

    // split: prefer separating a stalled disjunction, else bisect
    let clause_split = pins
        .iter()
        .enumerate()
        .find(|(c, pin)| pin.is_none() && live[*c].len() >= 2)
        .map(|(c, _)| c);
    let bisect_dim = if clause_split.is_none() {
        match bx.widest_scaled(shared.compiled.init_widths()) {
            Some(d) => Some(d),
            None => {
                shared.floor_hit.store(true, Ordering::Relaxed);
                return Ok(());
            }
        }
    } else {
        None
    };

    if shared.splits.fetch_add(1, Ordering::AcqRel) >= cfg.max_splits {
        shared.budget_hit.store(true, Ordering::Relaxed);
        return Ok(());
    }

    let mut stack = shared.stack.lock().expect("stack lock poisoned");
    if let Some(c) = clause_split {
        for &d in live[c].iter().rev() {
            let mut pins_d = pins.clone();
            pins_d[c] = Some(d);
            stack.push(WorkItem {
                bx: bx.clone(),
                pins: pins_d,
            });
        }
    } else if let Some(dim) = bisect_dim {
        let (left, right) = bx.split(dim);
        stack.push(WorkItem {
            bx: right,
            pins: pins.clone(),
        });
        stack.push(WorkItem { bx: left, pins });
    }
    Ok(())
}

fn report_witness(shared: &Shared<'_>, pt: Vec<f64>, bx: IntervalBox) {
    let mut slot = shared.witness.lock().expect("witness lock poisoned");
    if slot.is_none() {
        *slot = Some((pt, bx));
    }
    shared.stop.store(true, Ordering::Release);
}
