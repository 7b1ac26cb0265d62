//! Labelled transition systems and the exact `Kh` model checker.
//!
//! A plan `π` is strongly executable from a set `U` iff at every step the
//! running image `R_{π[1:i]}(U)` lies inside the domain of the next action.
//! Because images distribute over union this per-set condition coincides
//! with the per-state definition, so `Kh(φ, ψ)` reduces to reachability in
//! the graph whose nodes are state subsets.

mod json;
mod truthset;

pub use json::ModelJson;
pub use truthset::TruthSet;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::Formula;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("a model needs at least one state")]
    NoStates,
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("{context} refers to undeclared state `{name}`")]
    UnknownState { context: String, name: String },
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// A finite sequence of action symbols. Indexing helpers are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Plan(pub Vec<String>);

impl Plan {
    pub fn empty() -> Self {
        Plan(Vec::new())
    }

    pub fn from_actions<S: Into<String>>(actions: impl IntoIterator<Item = S>) -> Self {
        Plan(actions.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `π_i`, 1-based.
    pub fn action(&self, i: usize) -> &str {
        &self.0[i - 1]
    }

    /// `π[i:j]`, 1-based and inclusive. `i = j + 1` gives the empty plan.
    pub fn slice(&self, i: usize, j: usize) -> Plan {
        Plan(self.0[i - 1..j].to_vec())
    }

    pub fn concat(&self, other: &Plan) -> Plan {
        Plan(self.0.iter().chain(&other.0).cloned().collect())
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("ε")
        } else {
            f.write_str(&self.0.join(" "))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Relation {
    succ: Vec<TruthSet>,
    domain: TruthSet,
}

impl Relation {
    fn new(n: usize) -> Self {
        Relation {
            succ: vec![TruthSet::empty(n); n],
            domain: TruthSet::empty(n),
        }
    }

    fn image(&self, from: &TruthSet) -> TruthSet {
        let mut out = TruthSet::empty(from.universe());
        for s in from.iter() {
            out.union_with(&self.succ[s]);
        }
        out
    }
}

/// A labelled transition system: states, one relation per action symbol,
/// and a valuation. States are named externally and dense internally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LtsModel {
    states: Vec<String>,
    index: HashMap<String, usize>,
    relations: BTreeMap<String, Relation>,
    valuation: BTreeMap<String, TruthSet>,
}

impl LtsModel {
    pub fn new<S: Into<String>>(states: impl IntoIterator<Item = S>) -> Result<Self, ModelError> {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.is_empty() {
            return Err(ModelError::NoStates);
        }
        let mut index = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(ModelError::DuplicateState(s.clone()));
            }
        }
        Ok(LtsModel {
            states,
            index,
            relations: BTreeMap::new(),
            valuation: BTreeMap::new(),
        })
    }

    /// States named `s0, s1, ...`.
    pub fn with_size(n: usize) -> Result<Self, ModelError> {
        Self::new((0..n).map(|i| format!("s{i}")))
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn actions(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn propositions(&self) -> impl Iterator<Item = &str> {
        self.valuation.keys().map(String::as_str)
    }

    pub fn all_states(&self) -> TruthSet {
        TruthSet::full(self.num_states())
    }

    pub fn no_states(&self) -> TruthSet {
        TruthSet::empty(self.num_states())
    }

    /// Declares an action, possibly with an empty relation.
    pub fn declare_action(&mut self, action: &str) {
        let n = self.num_states();
        self.relations
            .entry(action.to_string())
            .or_insert_with(|| Relation::new(n));
    }

    /// Removes an action entirely; it then denotes the empty relation.
    pub fn remove_action(&mut self, action: &str) -> bool {
        self.relations.remove(action).is_some()
    }

    pub fn add_transition(&mut self, action: &str, src: usize, dst: usize) {
        let n = self.num_states();
        assert!(src < n && dst < n, "transition ({src}, {dst}) out of range");
        let rel = self
            .relations
            .entry(action.to_string())
            .or_insert_with(|| Relation::new(n));
        rel.succ[src].insert(dst);
        rel.domain.insert(src);
    }

    pub fn set_true(&mut self, prop: &str, state: usize) {
        let n = self.num_states();
        self.valuation
            .entry(prop.to_string())
            .or_insert_with(|| TruthSet::empty(n))
            .insert(state);
    }

    /// Declares a proposition that is false everywhere unless set later.
    pub fn declare_prop(&mut self, prop: &str) {
        let n = self.num_states();
        self.valuation
            .entry(prop.to_string())
            .or_insert_with(|| TruthSet::empty(n));
    }

    /// `V(p)`; undeclared propositions are false everywhere.
    pub fn prop_states(&self, prop: &str) -> TruthSet {
        self.valuation
            .get(prop)
            .cloned()
            .unwrap_or_else(|| self.no_states())
    }

    /// Ordered `(src, dst)` pairs of an action's relation; empty if the
    /// action is undeclared.
    pub fn transitions(&self, action: &str) -> Vec<(usize, usize)> {
        match self.relations.get(action) {
            None => Vec::new(),
            Some(rel) => rel
                .succ
                .iter()
                .enumerate()
                .flat_map(|(s, ts)| ts.iter().map(move |t| (s, t)))
                .collect(),
        }
    }

    /// Subset by state names.
    pub fn states_named(&self, names: &[&str]) -> Option<TruthSet> {
        let mut out = self.no_states();
        for n in names {
            out.insert(self.state_index(n)?);
        }
        Some(out)
    }

    /// `R_a(from)`; undeclared actions denote the empty relation.
    pub fn image(&self, action: &str, from: &TruthSet) -> TruthSet {
        match self.relations.get(action) {
            Some(rel) => rel.image(from),
            None => self.no_states(),
        }
    }

    /// States at which `action` can be performed.
    pub fn domain(&self, action: &str) -> TruthSet {
        match self.relations.get(action) {
            Some(rel) => rel.domain.clone(),
            None => self.no_states(),
        }
    }

    /// `R_π(from)`.
    pub fn apply_plan(&self, plan: &Plan, from: &TruthSet) -> TruthSet {
        plan.0
            .iter()
            .fold(from.clone(), |cur, a| self.image(a, &cur))
    }

    /// `SE(π)`: states from which every partial execution of `π` can always
    /// take its next action.
    pub fn strongly_executable(&self, plan: &Plan) -> TruthSet {
        let mut out = self.no_states();
        for s in 0..self.num_states() {
            let mut cur = TruthSet::from_indices(self.num_states(), [s]);
            let mut ok = true;
            for a in &plan.0 {
                if !cur.is_subset(&self.domain(a)) {
                    ok = false;
                    break;
                }
                cur = self.image(a, &cur);
            }
            if ok {
                out.insert(s);
            }
        }
        out
    }

    /// True iff `pre ⊆ SE(π)` and `R_π(pre) ⊆ post`.
    pub fn is_witness(&self, plan: &Plan, pre: &TruthSet, post: &TruthSet) -> bool {
        pre.is_subset(&self.strongly_executable(plan)) && self.apply_plan(plan, pre).is_subset(post)
    }

    /// Shortest witness plan for `Kh(pre, post)`, ties broken by
    /// lexicographic action order.
    pub fn check_kh(&self, pre: &TruthSet, post: &TruthSet) -> Option<Plan> {
        self.check_kh_bounded(pre, post, None)
    }

    /// Like [`check_kh`](Self::check_kh) but only considers plans of at most
    /// `max_len` actions when a bound is given.
    pub fn check_kh_bounded(
        &self,
        pre: &TruthSet,
        post: &TruthSet,
        max_len: Option<usize>,
    ) -> Option<Plan> {
        if pre.is_empty() || pre.is_subset(post) {
            return Some(Plan::empty());
        }
        // Breadth-first over subsets; parent links rebuild the plan.
        let actions: Vec<(&String, &Relation)> = self.relations.iter().collect();
        let mut parent: HashMap<TruthSet, (TruthSet, usize)> = HashMap::new();
        let mut seen: HashSet<TruthSet> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(pre.clone());
        queue.push_back((pre.clone(), 0usize));
        while let Some((cur, depth)) = queue.pop_front() {
            if max_len.is_some_and(|m| depth >= m) {
                continue;
            }
            for (ai, (_, rel)) in actions.iter().enumerate() {
                if !cur.is_subset(&rel.domain) {
                    continue;
                }
                let next = rel.image(&cur);
                if !seen.insert(next.clone()) {
                    continue;
                }
                parent.insert(next.clone(), (cur.clone(), ai));
                if next.is_subset(post) {
                    let mut plan = Vec::new();
                    let mut node = next;
                    while let Some((prev, ai)) = parent.get(&node) {
                        plan.push(actions[*ai].0.clone());
                        node = prev.clone();
                    }
                    plan.reverse();
                    return Some(Plan(plan));
                }
                queue.push_back((next, depth + 1));
            }
        }
        None
    }

    /// `⟦f⟧`. `Kh`, `A` and `E` nodes evaluate to all states or none.
    pub fn model_check(&self, f: &Formula) -> TruthSet {
        self.model_check_bounded(f, None)
    }

    pub fn model_check_bounded(&self, f: &Formula, max_len: Option<usize>) -> TruthSet {
        let eval = |g: &Formula| self.model_check_bounded(g, max_len);
        let global = |holds: bool| {
            if holds {
                self.all_states()
            } else {
                self.no_states()
            }
        };
        match f {
            Formula::Prop(p) => self.prop_states(p),
            Formula::Top => self.all_states(),
            Formula::Bot => self.no_states(),
            Formula::Not(g) => eval(g).complement(),
            Formula::Or(a, b) => eval(a).union(&eval(b)),
            Formula::And(a, b) => eval(a).intersection(&eval(b)),
            Formula::Implies(a, b) => eval(a).complement().union(&eval(b)),
            Formula::Iff(a, b) => {
                let (x, y) = (eval(a), eval(b));
                x.intersection(&y)
                    .union(&x.complement().intersection(&y.complement()))
            }
            Formula::A(g) => global(eval(g).is_full()),
            Formula::E(g) => global(!eval(g).is_empty()),
            Formula::Kh(a, b) => {
                global(self.check_kh_bounded(&eval(a), &eval(b), max_len).is_some())
            }
        }
    }

    /// Witness for `Kh(pre, post)` evaluated in this model.
    pub fn kh_witness(&self, pre: &Formula, post: &Formula) -> Option<Plan> {
        self.check_kh(&self.model_check(pre), &self.model_check(post))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    /// s -a-> t, s -a-> v, t -b-> u; p at s, r at t and v, q at u.
    pub(crate) fn example_model() -> LtsModel {
        let mut m = LtsModel::new(["s", "t", "v", "u"]).unwrap();
        m.add_transition("a", 0, 1);
        m.add_transition("a", 0, 2);
        m.add_transition("b", 1, 3);
        m.set_true("p", 0);
        m.set_true("r", 1);
        m.set_true("r", 2);
        m.set_true("q", 3);
        m
    }

    #[test]
    fn plan_images() {
        let m = example_model();
        let s = m.states_named(&["s"]).unwrap();
        assert_eq!(
            m.apply_plan(&Plan::from_actions(["a"]), &s),
            m.states_named(&["t", "v"]).unwrap()
        );
        assert_eq!(
            m.apply_plan(&Plan::from_actions(["a", "b"]), &s),
            m.states_named(&["u"]).unwrap()
        );
        let x = m.states_named(&["t", "u"]).unwrap();
        assert_eq!(m.apply_plan(&Plan::empty(), &x), x);
        assert!(m.apply_plan(&Plan::from_actions(["zz"]), &s).is_empty());
    }

    #[test]
    fn strong_executability() {
        let m = example_model();
        assert!(m.strongly_executable(&Plan::empty()).is_full());
        assert_eq!(
            m.strongly_executable(&Plan::from_actions(["a"])),
            m.states_named(&["s"]).unwrap()
        );
        assert!(m
            .strongly_executable(&Plan::from_actions(["a", "b"]))
            .is_empty());
    }

    #[test]
    fn no_transitions_only_empty_plan_executes() {
        let mut m = LtsModel::with_size(3).unwrap();
        m.declare_action("a");
        assert!(m.strongly_executable(&Plan::empty()).is_full());
        assert!(m.strongly_executable(&Plan::from_actions(["a"])).is_empty());
        assert!(m
            .strongly_executable(&Plan::from_actions(["b", "a"]))
            .is_empty());
    }

    #[test]
    fn kh_witnesses() {
        let m = example_model();
        let (p, q, r) = (m.prop_states("p"), m.prop_states("q"), m.prop_states("r"));
        assert_eq!(m.check_kh(&p, &r), Some(Plan::from_actions(["a"])));
        assert_eq!(m.check_kh(&p, &q), None);
        assert_eq!(m.check_kh(&m.no_states(), &q), Some(Plan::empty()));
        assert_eq!(m.check_kh(&r, &r), Some(Plan::empty()));
    }

    #[test]
    fn witness_is_shortest_then_lexicographic() {
        // 0 -b-> 1 -a-> 2 and 0 -c-> 2 directly, 0 -a-> 3 -a-> 2.
        let mut m = LtsModel::with_size(4).unwrap();
        m.add_transition("b", 0, 1);
        m.add_transition("a", 1, 2);
        m.add_transition("a", 0, 3);
        m.add_transition("a", 3, 2);
        let (from, goal) = (
            TruthSet::from_indices(4, [0]),
            TruthSet::from_indices(4, [2]),
        );
        assert_eq!(
            m.check_kh(&from, &goal),
            Some(Plan::from_actions(["a", "a"]))
        );
        m.add_transition("c", 0, 2);
        assert_eq!(m.check_kh(&from, &goal), Some(Plan::from_actions(["c"])));
        assert_eq!(m.check_kh_bounded(&from, &goal, Some(0)), None);
    }

    #[test]
    fn model_check_kh_is_global() {
        let m = example_model();
        assert!(m.model_check(&parse("Kh(p, r)").unwrap()).is_full());
        assert!(m.model_check(&parse("Kh(p, q)").unwrap()).is_empty());
        assert!(m.model_check(&Formula::Top).is_full());
        assert_eq!(
            m.model_check(&parse("p | q").unwrap()),
            m.states_named(&["s", "u"]).unwrap()
        );
        assert!(m.model_check(&parse("E q & ~A r").unwrap()).is_full());
    }

    #[test]
    fn plan_indexing_is_one_based() {
        let pi = Plan::from_actions(["a", "b", "c"]);
        assert_eq!(pi.action(1), "a");
        assert_eq!(pi.slice(2, 3), Plan::from_actions(["b", "c"]));
        assert_eq!(pi.slice(1, 0), Plan::empty());
        assert_eq!(pi.to_string(), "a b c");
        assert_eq!(Plan::empty().to_string(), "ε");
    }

    #[test]
    fn model_construction_errors() {
        assert!(matches!(
            LtsModel::new(Vec::<String>::new()),
            Err(ModelError::NoStates)
        ));
        assert!(matches!(
            LtsModel::new(["x", "x"]),
            Err(ModelError::DuplicateState(_))
        ));
    }
}
