//! Propositional satisfiability for modality-free formulas.
//!
//! Formulas are clausified with fresh definition variables (`_d<N>`) so the
//! CNF stays linear in the input, then solved by DPLL with unit propagation
//! and a most-frequent-literal branching rule.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::syntax::{desugar, Formula};

/// Truth values for proposition symbols.
pub type Assignment = BTreeMap<String, bool>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("propositional backend received a modal formula: {0}")]
    Modality(String),
    #[error("assignment has no value for proposition `{0}`")]
    MissingProposition(String),
    #[error("solver produced an assignment that does not satisfy {0}")]
    Unsound(String),
}

/// Truth-functional evaluation.
pub fn eval_prop(f: &Formula, a: &Assignment) -> Result<bool, SatError> {
    Ok(match f {
        Formula::Prop(p) => *a
            .get(p)
            .ok_or_else(|| SatError::MissingProposition(p.clone()))?,
        Formula::Top => true,
        Formula::Bot => false,
        Formula::Not(g) => !eval_prop(g, a)?,
        Formula::Or(x, y) => eval_prop(x, a)? || eval_prop(y, a)?,
        Formula::And(x, y) => eval_prop(x, a)? && eval_prop(y, a)?,
        Formula::Implies(x, y) => !eval_prop(x, a)? || eval_prop(y, a)?,
        Formula::Iff(x, y) => eval_prop(x, a)? == eval_prop(y, a)?,
        Formula::Kh(..) | Formula::A(_) | Formula::E(_) => {
            return Err(SatError::Modality(f.to_string()))
        }
    })
}

/// Clause set over variables `1..=num_vars`; literals are signed ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
    /// Variable names; proposition symbols first, then `_d<N>` definitions.
    pub names: Vec<String>,
    num_props: usize,
}

impl Cnf {
    pub fn from_formula(f: &Formula) -> Result<Self, SatError> {
        if !f.is_modality_free() {
            return Err(SatError::Modality(f.to_string()));
        }
        let core = desugar(f);
        let mut cnf = Cnf::default();
        for p in core.props() {
            cnf.fresh(p);
        }
        cnf.num_props = cnf.num_vars;
        let root = cnf.encode(&core);
        cnf.clauses.push(vec![root]);
        Ok(cnf)
    }

    fn fresh(&mut self, name: String) -> i32 {
        self.num_vars += 1;
        self.names.push(name);
        self.num_vars as i32
    }

    fn definition(&mut self) -> i32 {
        let n = self.num_vars - self.num_props;
        self.fresh(format!("_d{n}"))
    }

    fn encode(&mut self, f: &Formula) -> i32 {
        match f {
            Formula::Prop(p) => (self.names.iter().position(|n| n == p).unwrap() + 1) as i32,
            Formula::Top | Formula::Bot => {
                let x = self.definition();
                self.clauses
                    .push(vec![if *f == Formula::Top { x } else { -x }]);
                x
            }
            Formula::Not(g) => -self.encode(g),
            Formula::And(a, b) => {
                let (a, b) = (self.encode(a), self.encode(b));
                let x = self.definition();
                self.clauses.push(vec![-x, a]);
                self.clauses.push(vec![-x, b]);
                self.clauses.push(vec![x, -a, -b]);
                x
            }
            Formula::Or(a, b) => {
                let (a, b) = (self.encode(a), self.encode(b));
                let x = self.definition();
                self.clauses.push(vec![-x, a, b]);
                self.clauses.push(vec![x, -a]);
                self.clauses.push(vec![x, -b]);
                x
            }
            Formula::Implies(..)
            | Formula::Iff(..)
            | Formula::Kh(..)
            | Formula::A(_)
            | Formula::E(_) => {
                unreachable!("encode expects desugared modality-free input")
            }
        }
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "c {} {}", i + 1, name);
        }
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(out, "{l} ");
            }
            out.push_str("0\n");
        }
        out
    }
}

struct Dpll<'a> {
    clauses: &'a [Vec<i32>],
    value: Vec<Option<bool>>,
    trail: Vec<usize>,
}

impl Dpll<'_> {
    fn lit_value(&self, l: i32) -> Option<bool> {
        self.value[l.unsigned_abs() as usize].map(|v| v == (l > 0))
    }

    fn assign(&mut self, l: i32) {
        let v = l.unsigned_abs() as usize;
        self.value[v] = Some(l > 0);
        self.trail.push(v);
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            self.value[v] = None;
        }
    }

    /// Unit propagation to fixpoint; false on conflict.
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            for c in self.clauses {
                let mut unassigned = None;
                let mut open = 0;
                let mut sat = false;
                for &l in c {
                    match self.lit_value(l) {
                        Some(true) => {
                            sat = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            open += 1;
                            unassigned = Some(l);
                        }
                    }
                }
                if sat {
                    continue;
                }
                match open {
                    0 => return false,
                    1 => {
                        self.assign(unassigned.unwrap());
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Most frequent unassigned literal in not-yet-satisfied clauses; ties
    /// go to the smaller variable, positive first.
    fn pick(&self) -> Option<i32> {
        let n = self.value.len();
        let mut counts = vec![0usize; 2 * n];
        for c in self.clauses {
            if c.iter().any(|&l| self.lit_value(l) == Some(true)) {
                continue;
            }
            for &l in c {
                if self.lit_value(l).is_none() {
                    let v = l.unsigned_abs() as usize;
                    counts[2 * v + usize::from(l < 0)] += 1;
                }
            }
        }
        let best = (2..2 * n)
            .filter(|&i| counts[i] > 0)
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))?;
        let v = (best / 2) as i32;
        Some(if best % 2 == 0 { v } else { -v })
    }

    fn solve(&mut self) -> bool {
        if !self.propagate() {
            return false;
        }
        let Some(l) = self.pick() else {
            return true;
        };
        for choice in [l, -l] {
            let mark = self.trail.len();
            self.assign(choice);
            if self.solve() {
                return true;
            }
            self.undo(mark);
        }
        false
    }
}

/// Satisfying assignment over exactly the propositions of `f`, or `None`.
/// Unconstrained propositions are set to false.
pub fn prop_sat(f: &Formula) -> Result<Option<Assignment>, SatError> {
    let cnf = Cnf::from_formula(f)?;
    let mut dpll = Dpll {
        clauses: &cnf.clauses,
        value: vec![None; cnf.num_vars + 1],
        trail: Vec::new(),
    };
    if !dpll.solve() {
        return Ok(None);
    }
    let assignment: Assignment = cnf.names[..cnf.num_props]
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), dpll.value[i + 1].unwrap_or(false)))
        .collect();
    if !eval_prop(f, &assignment)? {
        return Err(SatError::Unsound(f.to_string()));
    }
    Ok(Some(assignment))
}

/// Shorthand for `prop_sat(f)?.is_some()`.
pub fn is_satisfiable(f: &Formula) -> Result<bool, SatError> {
    Ok(prop_sat(f)?.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;
    use proptest::prelude::*;

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn contradiction_is_unsat() {
        assert_eq!(prop_sat(&f("p & ~p")).unwrap(), None);
        assert_eq!(prop_sat(&Formula::Bot).unwrap(), None);
    }

    #[test]
    fn unit_propagation_forces_values() {
        let a = prop_sat(&f("p & (~p | q)")).unwrap().unwrap();
        assert_eq!(
            a,
            Assignment::from([("p".into(), true), ("q".into(), true)])
        );
    }

    #[test]
    fn constants_and_connectives() {
        assert_eq!(prop_sat(&Formula::Top).unwrap(), Some(Assignment::new()));
        assert!(prop_sat(&f("(p <-> q) & (q -> r) & p & ~r"))
            .unwrap()
            .is_none());
        assert!(prop_sat(&f("(p <-> ~q) & (q | p)")).unwrap().is_some());
    }

    #[test]
    fn eval_examples() {
        let a = Assignment::from([("p".into(), false), ("q".into(), true)]);
        assert!(eval_prop(&f("p | q"), &a).unwrap());
        assert!(!eval_prop(&Formula::Bot, &a).unwrap());
        assert_eq!(
            eval_prop(&f("p | z"), &a),
            Err(SatError::MissingProposition("z".into()))
        );
    }

    #[test]
    fn rejects_modal_input() {
        assert!(matches!(
            prop_sat(&f("p & Kh(p, q)")),
            Err(SatError::Modality(_))
        ));
        assert!(matches!(prop_sat(&f("A p")), Err(SatError::Modality(_))));
        assert!(eval_prop(&f("E p"), &Assignment::new()).is_err());
    }

    #[test]
    fn dimacs_names_definitions() {
        let cnf = Cnf::from_formula(&f("p & q")).unwrap();
        let text = cnf.to_dimacs();
        assert!(text.contains("c 3 _d0"));
        assert!(text.contains("p cnf 3 4"));
    }

    fn arb_prop() -> impl Strategy<Value = Formula> {
        let leaf = (0..4u8).prop_map(|i| Formula::prop(format!("x{i}")));
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::or(a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn de_morgan_agrees(a in arb_prop(), b in arb_prop(), bits in 0u8..16) {
            let asg: Assignment = (0..4).map(|i| (format!("x{i}"), bits >> i & 1 == 1)).collect();
            let lhs = Formula::not(Formula::and(a.clone(), b.clone()));
            let rhs = Formula::or(Formula::not(a.clone()), Formula::not(b.clone()));
            prop_assert_eq!(eval_prop(&lhs, &asg).unwrap(), eval_prop(&rhs, &asg).unwrap());
            let lhs = Formula::not(Formula::or(a.clone(), b.clone()));
            let rhs = Formula::and(Formula::not(a), Formula::not(b));
            prop_assert_eq!(eval_prop(&lhs, &asg).unwrap(), eval_prop(&rhs, &asg).unwrap());
        }
    }
}
