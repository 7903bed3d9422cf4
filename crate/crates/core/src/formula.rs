//! First-order constraint formulas over bounded real variables.
//!
//! A formula is a conjunction of clauses; each clause is a disjunction of
//! conjunctions of atomic comparisons. The extra conjunctive layer keeps
//! case-style conditions ("output was below the level and is now above it,
//! or the other way round") in a single clause instead of distributing them
//! into CNF.

use crate::error::{Error, Result};
use crate::expr::{Expr, VarId};
use crate::interval::{Interval, IntervalBox};
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Eq => "=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AtomicConstraint {
    pub lhs: Expr,
    pub rel: Rel,
    pub rhs: Expr,
}

impl AtomicConstraint {
    pub fn new(lhs: Expr, rel: Rel, rhs: Expr) -> AtomicConstraint {
        AtomicConstraint { lhs, rel, rhs }
    }

    /// Checks the relation at a point, weakened outward by `slack`:
    /// `a <= b` becomes `a <= b + slack`, `a = b` becomes `|a - b| <= slack`,
    /// and so on. `slack = 0` gives the exact relation.
    pub fn holds_at(&self, pt: &[f64], slack: f64) -> Result<bool> {
        let a = self.lhs.eval(pt)?;
        let b = self.rhs.eval(pt)?;
        Ok(match self.rel {
            Rel::Le => a <= b + slack,
            Rel::Lt => a < b + slack,
            Rel::Ge => a >= b - slack,
            Rel::Gt => a > b - slack,
            Rel::Eq => (a - b).abs() <= slack,
        })
    }
}

/// Disjunction of conjunctions of atomics. A plain atomic is a clause with
/// one single-atom disjunct.
#[derive(Debug, Clone)]
pub struct Clause {
    pub disjuncts: Vec<Vec<AtomicConstraint>>,
}

impl Clause {
    pub fn atom(a: AtomicConstraint) -> Clause {
        Clause {
            disjuncts: vec![vec![a]],
        }
    }

    pub fn any(atoms: Vec<AtomicConstraint>) -> Clause {
        Clause {
            disjuncts: atoms.into_iter().map(|a| vec![a]).collect(),
        }
    }

    pub fn any_of(disjuncts: Vec<Vec<AtomicConstraint>>) -> Clause {
        debug_assert!(!disjuncts.is_empty() && disjuncts.iter().all(|d| !d.is_empty()));
        Clause { disjuncts }
    }

    pub fn holds_at(&self, pt: &[f64], slack: f64) -> Result<bool> {
        for conj in &self.disjuncts {
            let mut ok = true;
            for atom in conj {
                if !atom.holds_at(pt, slack)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// What a variable stands for in the original robustness query. `Param` and
/// `Input` carry the index within the flat parameter vector or the input
/// point respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    Param(usize),
    Input(usize),
    Objective,
}

#[derive(Debug, Clone)]
pub struct VarDecl {
    pub name: String,
    pub domain: Interval,
    pub role: VarRole,
}

#[derive(Debug, Clone, Default)]
pub struct Formula {
    pub vars: Vec<VarDecl>,
    pub clauses: Vec<Clause>,
}

impl Formula {
    pub fn new() -> Formula {
        Formula::default()
    }

    /// Declares a variable and returns its id.
    pub fn declare(&mut self, name: impl Into<String>, domain: Interval, role: VarRole) -> VarId {
        self.vars.push(VarDecl {
            name: name.into(),
            domain,
            role,
        });
        self.vars.len() - 1
    }

    pub fn require(&mut self, clause: Clause) {
        self.clauses.push(clause);
    }

    pub fn domain_box(&self) -> IntervalBox {
        IntervalBox::new(self.vars.iter().map(|v| v.domain).collect())
    }

    /// Every variable used by a clause must be declared with a bounded,
    /// nonempty domain.
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vars.iter().enumerate() {
            if !v.domain.is_finite() {
                return Err(Error::UnboundedDomain(i));
            }
        }
        let mut used = BTreeSet::new();
        for clause in &self.clauses {
            for conj in &clause.disjuncts {
                for atom in conj {
                    atom.lhs.collect_vars(&mut used);
                    atom.rhs.collect_vars(&mut used);
                }
            }
        }
        if let Some(&bad) = used.iter().find(|&&v| v >= self.vars.len()) {
            return Err(Error::UndeclaredVariable(bad));
        }
        Ok(())
    }

    /// True when the point satisfies every clause under outward slack.
    /// Points outside the declared domains fail regardless of slack.
    pub fn check_point(&self, pt: &[f64], slack: f64) -> Result<bool> {
        if pt.len() != self.vars.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vars.len(),
                got: pt.len(),
            });
        }
        if !self.domain_box().contains_point(pt) {
            return Ok(false);
        }
        for clause in &self.clauses {
            if !clause.holds_at(pt, slack)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Renders the formula as an SMT-LIB 2 script in QF_NRA, with sigmoid
    /// expanded into exp and numerals printed exactly.
    pub fn to_smtlib(&self) -> String {
        let mut s = String::new();
        s.push_str("(set-logic QF_NRA)\n");
        for v in &self.vars {
            let _ = writeln!(s, "(declare-fun {} () Real)", v.name);
        }
        for v in &self.vars {
            let _ = writeln!(s, "(assert (>= {} {}))", v.name, smt_num(v.domain.lo));
            let _ = writeln!(s, "(assert (<= {} {}))", v.name, smt_num(v.domain.hi));
        }
        for clause in &self.clauses {
            let rendered: Vec<String> = clause
                .disjuncts
                .iter()
                .map(|conj| {
                    let atoms: Vec<String> = conj.iter().map(|a| self.smt_atom(a)).collect();
                    wrap("and", &atoms)
                })
                .collect();
            let _ = writeln!(s, "(assert {})", wrap("or", &rendered));
        }
        s.push_str("(check-sat)\n(exit)\n");
        s
    }

    fn smt_atom(&self, a: &AtomicConstraint) -> String {
        format!(
            "({} {} {})",
            a.rel.symbol(),
            self.smt_expr(&a.lhs),
            self.smt_expr(&a.rhs)
        )
    }

    fn smt_expr(&self, e: &Expr) -> String {
        match e {
            Expr::Var(i) => self
                .vars
                .get(*i)
                .map_or_else(|| format!("v{i}"), |v| v.name.clone()),
            Expr::Const(v) => smt_num(*v),
            Expr::Add(a, b) => format!("(+ {} {})", self.smt_expr(a), self.smt_expr(b)),
            Expr::Mul(a, b) => format!("(* {} {})", self.smt_expr(a), self.smt_expr(b)),
            Expr::Neg(a) => format!("(- {})", self.smt_expr(a)),
            Expr::Abs(a) => format!("(abs {})", self.smt_expr(a)),
            Expr::Max(a, b) => {
                let (a, b) = (self.smt_expr(a), self.smt_expr(b));
                format!("(ite (>= {a} {b}) {a} {b})")
            }
            Expr::Exp(a) => format!("(exp {})", self.smt_expr(a)),
            Expr::Sigmoid(a) => {
                let z = self.smt_expr(a);
                format!("(/ 1 (+ 1 (exp (- {z}))))")
            }
            Expr::Tanh(a) => {
                // tanh z = 2 sigmoid(2z) - 1
                let z = self.smt_expr(a);
                format!("(- (/ 2 (+ 1 (exp (- (* 2 {z}))))) 1)")
            }
        }
    }
}

fn wrap(op: &str, parts: &[String]) -> String {
    if parts.len() == 1 {
        parts[0].clone()
    } else {
        format!("({op} {})", parts.join(" "))
    }
}

/// Exact decimal rendering of a double for SMT consumption. Negative values
/// use the unary minus form required by the numeral grammar.
pub fn smt_num(x: f64) -> String {
    assert!(x.is_finite(), "cannot render {x} as an SMT numeral");
    if x < 0.0 || x == 0.0 && x.is_sign_negative() {
        return format!("(- {})", smt_num(-x));
    }
    if x == x.trunc() && x.abs() < 1e18 {
        return format!("{x:.1}");
    }
    // every finite double has an exact finite decimal expansion
    let mut s = format!("{x:.1074}");
    let trimmed = s.trim_end_matches('0');
    let keep = if trimmed.ends_with('.') {
        trimmed.len() + 1
    } else {
        trimmed.len()
    };
    s.truncate(keep);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(lhs: Expr, rel: Rel, rhs: Expr) -> AtomicConstraint {
        AtomicConstraint::new(lhs, rel, rhs)
    }

    fn unit_box_formula() -> Formula {
        let mut f = Formula::new();
        f.declare("x", Interval::new(0.0, 1.0).unwrap(), VarRole::Input(0));
        f.declare("y", Interval::new(0.0, 1.0).unwrap(), VarRole::Input(1));
        f
    }

    #[test]
    fn slack_weakens_each_relation_outward() {
        let pt = [0.5, 0.5];
        // x <= 0.4 fails exactly but holds with slack 0.2
        let le = atom(Expr::var(0), Rel::Le, Expr::c(0.4));
        assert!(!le.holds_at(&pt, 0.0).unwrap());
        assert!(le.holds_at(&pt, 0.2).unwrap());

        let gt = atom(Expr::var(0), Rel::Gt, Expr::c(0.6));
        assert!(!gt.holds_at(&pt, 0.0).unwrap());
        assert!(gt.holds_at(&pt, 0.2).unwrap());

        let eq = atom(Expr::var(0), Rel::Eq, Expr::c(0.6));
        assert!(!eq.holds_at(&pt, 0.05).unwrap());
        assert!(eq.holds_at(&pt, 0.1).unwrap());

        // strictness matters at slack zero
        let lt = atom(Expr::var(0), Rel::Lt, Expr::c(0.5));
        let le = atom(Expr::var(0), Rel::Le, Expr::c(0.5));
        assert!(!lt.holds_at(&pt, 0.0).unwrap());
        assert!(le.holds_at(&pt, 0.0).unwrap());
    }

    #[test]
    fn clause_disjunction_of_conjunctions() {
        let c = Clause::any_of(vec![
            vec![
                atom(Expr::var(0), Rel::Le, Expr::c(0.3)),
                atom(Expr::var(1), Rel::Ge, Expr::c(0.7)),
            ],
            vec![
                atom(Expr::var(0), Rel::Gt, Expr::c(0.8)),
                atom(Expr::var(1), Rel::Lt, Expr::c(0.2)),
            ],
        ]);
        assert!(c.holds_at(&[0.2, 0.9], 0.0).unwrap());
        assert!(c.holds_at(&[0.9, 0.1], 0.0).unwrap());
        // each disjunct half-satisfied: clause fails
        assert!(!c.holds_at(&[0.2, 0.1], 0.0).unwrap());
        assert!(!c.holds_at(&[0.9, 0.9], 0.0).unwrap());
    }

    #[test]
    fn check_point_requires_domain_membership() {
        let mut f = unit_box_formula();
        f.require(Clause::atom(atom(Expr::var(0), Rel::Ge, Expr::c(-5.0))));
        assert!(f.check_point(&[0.5, 0.5], 0.0).unwrap());
        // satisfies the clause but lies outside the domain
        assert!(!f.check_point(&[2.0, 0.5], 10.0).unwrap());
        assert!(f.check_point(&[0.5], 0.0).is_err());
    }

    #[test]
    fn validate_rejects_unbounded_and_undeclared() {
        let mut f = unit_box_formula();
        f.require(Clause::atom(atom(Expr::var(5), Rel::Ge, Expr::c(0.0))));
        assert!(matches!(f.validate(), Err(Error::UndeclaredVariable(5))));

        let mut f = Formula::new();
        f.declare("x", Interval::ALL, VarRole::Input(0));
        assert!(matches!(f.validate(), Err(Error::UnboundedDomain(0))));

        let mut f = unit_box_formula();
        f.require(Clause::atom(atom(Expr::var(1), Rel::Lt, Expr::var(0))));
        assert!(f.validate().is_ok());
    }

    #[test]
    fn smt_num_prints_exact_decimals() {
        assert_eq!(smt_num(2.0), "2.0");
        assert_eq!(smt_num(-3.0), "(- 3.0)");
        assert_eq!(smt_num(0.5), "0.5");
        assert_eq!(smt_num(0.1), "0.1000000000000000055511151231257827021181583404541015625");
        // round-trip: the printed decimal parses back to the same double
        for &v in &[0.07577862, 1.18118408, -3.51518067, 1e-300, 4.9e-324] {
            let printed = smt_num(v);
            let stripped = printed
                .trim_start_matches("(- ")
                .trim_end_matches(')')
                .to_string();
            let back: f64 = stripped.parse().unwrap();
            assert_eq!(back.abs().to_bits(), v.abs().to_bits(), "{printed}");
        }
    }

    #[test]
    fn smtlib_script_structure() {
        let mut f = unit_box_formula();
        f.require(Clause::any_of(vec![
            vec![
                atom(Expr::sigmoid(Expr::var(0)), Rel::Le, Expr::c(0.5)),
                atom(Expr::var(1), Rel::Gt, Expr::c(0.5)),
            ],
            vec![atom(Expr::var(0), Rel::Eq, Expr::var(1))],
        ]));
        let s = f.to_smtlib();
        assert!(s.starts_with("(set-logic QF_NRA)"));
        assert!(s.contains("(declare-fun x () Real)"));
        assert!(s.contains("(assert (>= x 0.0))"));
        assert!(s.contains("(or (and (<= (/ 1 (+ 1 (exp (- x)))) 0.5) (> y 0.5)) (= x y))"));
        assert!(s.trim_end().ends_with("(exit)"));
        let opens = s.matches('(').count();
        let closes = s.matches(')').count();
        assert_eq!(opens, closes);
    }
}
