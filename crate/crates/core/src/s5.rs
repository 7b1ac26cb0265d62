//! Satisfiability of flat conjunctions of `A`/`E` atoms over propositional
//! bodies, with small-model construction.
//!
//! A conjunction `A α₁ ∧ … ∧ E β₁ ∧ …` is satisfiable iff `α ∧ βₖ` is
//! propositionally satisfiable for every `k` (and `α` itself when there is
//! no `E` atom), where `α` is the conjunction of the `A` bodies. One state
//! per `E` atom is then enough.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lts::{LtsModel, TruthSet};
use crate::sat::{prop_sat, Assignment, SatError};
use crate::syntax::Formula;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantifier {
    A,
    E,
}

/// `A body` or `E body` with a modality-free body.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GlobalAtom {
    pub kind: Quantifier,
    pub body: Formula,
}

impl GlobalAtom {
    pub fn univ(body: Formula) -> Self {
        GlobalAtom {
            kind: Quantifier::A,
            body,
        }
    }

    pub fn exists(body: Formula) -> Self {
        GlobalAtom {
            kind: Quantifier::E,
            body,
        }
    }

    pub fn to_formula(&self) -> Formula {
        match self.kind {
            Quantifier::A => Formula::univ(self.body.clone()),
            Quantifier::E => Formula::exists(self.body.clone()),
        }
    }
}

impl fmt::Display for GlobalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

/// States plus valuation, no relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct S5Model {
    num_states: usize,
    valuation: BTreeMap<String, TruthSet>,
}

impl S5Model {
    /// Builds a model with one state per assignment; only true entries are
    /// recorded, so absent propositions are false everywhere.
    pub fn from_assignments(states: &[Assignment]) -> Self {
        assert!(!states.is_empty(), "an S5 model needs at least one state");
        let n = states.len();
        let mut valuation: BTreeMap<String, TruthSet> = BTreeMap::new();
        for (i, a) in states.iter().enumerate() {
            for (p, &v) in a {
                let set = valuation
                    .entry(p.clone())
                    .or_insert_with(|| TruthSet::empty(n));
                if v {
                    set.insert(i);
                }
            }
        }
        S5Model {
            num_states: n,
            valuation,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn valuation(&self) -> &BTreeMap<String, TruthSet> {
        &self.valuation
    }

    /// States where a modality-free formula holds; unknown propositions are
    /// false.
    pub fn truth_set(&self, f: &Formula) -> TruthSet {
        let n = self.num_states;
        match f {
            Formula::Prop(p) => self
                .valuation
                .get(p)
                .cloned()
                .unwrap_or_else(|| TruthSet::empty(n)),
            Formula::Top => TruthSet::full(n),
            Formula::Bot => TruthSet::empty(n),
            Formula::Not(g) => self.truth_set(g).complement(),
            Formula::Or(a, b) => self.truth_set(a).union(&self.truth_set(b)),
            Formula::And(a, b) => self.truth_set(a).intersection(&self.truth_set(b)),
            Formula::Implies(a, b) => self.truth_set(a).complement().union(&self.truth_set(b)),
            Formula::Iff(a, b) => {
                let (x, y) = (self.truth_set(a), self.truth_set(b));
                x.intersection(&y)
                    .union(&x.complement().intersection(&y.complement()))
            }
            Formula::A(g) => {
                if self.truth_set(g).is_full() {
                    TruthSet::full(n)
                } else {
                    TruthSet::empty(n)
                }
            }
            Formula::E(g) => {
                if self.truth_set(g).is_empty() {
                    TruthSet::empty(n)
                } else {
                    TruthSet::full(n)
                }
            }
            Formula::Kh(..) => panic!("S5 models do not interpret Kh"),
        }
    }

    /// The same states and valuation as a transition system with no
    /// actions. State `i` is named `s<i>`.
    pub fn to_lts(&self) -> LtsModel {
        let mut m = LtsModel::with_size(self.num_states).expect("nonempty");
        for (p, set) in &self.valuation {
            m.declare_prop(p);
            for s in set.iter() {
                m.set_true(p, s);
            }
        }
        m
    }
}

/// Truth of a global atom: `A` at every state, `E` at some state.
pub fn eval_global(m: &S5Model, atom: &GlobalAtom) -> bool {
    let set = m.truth_set(&atom.body);
    match atom.kind {
        Quantifier::A => set.is_full(),
        Quantifier::E => !set.is_empty(),
    }
}

/// Memoizing front end for the per-`E` propositional checks, shared across
/// the many closely related conjunctions a disjunct search visits.
#[derive(Debug, Default)]
pub struct S5Checker {
    cache: HashMap<Formula, Option<Assignment>>,
    pub sat_calls: usize,
}

impl S5Checker {
    pub fn new() -> Self {
        Self::default()
    }

    fn solve(&mut self, f: Formula) -> Result<Option<Assignment>, SatError> {
        if let Some(hit) = self.cache.get(&f) {
            return Ok(hit.clone());
        }
        self.sat_calls += 1;
        let out = prop_sat(&f)?;
        self.cache.insert(f, out.clone());
        Ok(out)
    }

    /// True iff `A α₁ ∧ … ∧ E β₁ ∧ …` is satisfiable. With no `E` bodies,
    /// `α` alone must be satisfiable.
    pub fn consistent(
        &mut self,
        a_bodies: &[Formula],
        e_bodies: &[Formula],
    ) -> Result<bool, SatError> {
        Ok(self.build(a_bodies, e_bodies)?.is_some())
    }

    /// Like [`consistent`](Self::consistent) but returns the small model.
    pub fn build(
        &mut self,
        a_bodies: &[Formula],
        e_bodies: &[Formula],
    ) -> Result<Option<S5Model>, SatError> {
        let alpha = Formula::conj(a_bodies.iter().cloned());
        let mut states = Vec::with_capacity(e_bodies.len().max(1));
        for e in e_bodies {
            match self.solve(Formula::and(e.clone(), alpha.clone()))? {
                Some(a) => states.push(a),
                None => return Ok(None),
            }
        }
        if states.is_empty() {
            match self.solve(alpha)? {
                Some(a) => states.push(a),
                None => return Ok(None),
            }
        }
        Ok(Some(S5Model::from_assignments(&states)))
    }
}

/// Model of the conjunction of `atoms` with at most `#E + 1` states, or
/// `None` if unsatisfiable.
pub fn s5_sat(atoms: &[GlobalAtom]) -> Result<Option<S5Model>, SatError> {
    let (mut a, mut e) = (Vec::new(), Vec::new());
    for atom in atoms {
        if !atom.body.is_modality_free() {
            return Err(SatError::Modality(atom.to_string()));
        }
        match atom.kind {
            Quantifier::A => a.push(atom.body.clone()),
            Quantifier::E => e.push(atom.body.clone()),
        }
    }
    let model = S5Checker::new().build(&a, &e)?;
    if let Some(m) = &model {
        assert!(
            atoms.iter().all(|x| eval_global(m, x)),
            "constructed S5 model violates an input atom"
        );
    }
    Ok(model)
}
