//! The satisfiability procedure.
//!
//! 1. Split on `Kh` atoms: pick the leftmost-innermost atom of the current
//!    formula, replace it by `true` (recording it as a positive atom) or by
//!    `false` (recording it as a negative atom), and repeat until the
//!    current formula is propositional. The leaf adds `¬Kh(φ_cur, ⊥)`.
//! 2. For each leaf, search the disjuncts of its `θ` translation.
//! 3. Build a transition system from the first satisfiable disjunct's S5
//!    model and check it against the input with the model checker.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::lts::{LtsModel, ModelJson, Plan, TruthSet};
use crate::s5::{S5Checker, S5Model};
use crate::syntax::{
    desugar, find_positive_atom, substitute_atom, AtomConjunction, Formula, KhPair,
};
use crate::translate::{
    find_disjunct, ChoiceLog, SearchOptions, SearchStats, ThetaDisjunct, TranslateError,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("internal soundness failure: {0}")]
    Unsound(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
}

/// A path through the atom splits, ending in a conjunction of atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub phi_cur: Formula,
    pub conj: AtomConjunction,
    /// Each split atom with the constant it was replaced by.
    pub decisions: Vec<(KhPair, bool)>,
}

impl Branch {
    fn root(phi: Formula) -> Self {
        Branch {
            phi_cur: phi,
            conj: AtomConjunction::default(),
            decisions: Vec::new(),
        }
    }

    fn split(&self, atom: &KhPair, value: bool) -> Branch {
        let mut child = self.clone();
        child.phi_cur = substitute_atom(&self.phi_cur, atom, value);
        if value {
            child.conj.positives.push(atom.clone());
        } else {
            child.conj.negatives.push(atom.clone());
        }
        child.decisions.push((atom.clone(), value));
        child
    }

    /// Closes a branch whose current formula is propositional.
    fn close(mut self) -> Branch {
        self.conj
            .negatives
            .push(KhPair::new(self.phi_cur.clone(), Formula::Bot));
        self
    }

    /// Sorted and deduplicated positives and negatives.
    fn canonical(&self) -> (Vec<KhPair>, Vec<KhPair>) {
        let mut pos = self.conj.positives.clone();
        let mut neg = self.conj.negatives.clone();
        pos.sort();
        pos.dedup();
        neg.sort();
        neg.dedup();
        (pos, neg)
    }
}

/// Leaves of the split tree in depth-first order, `true` child first.
/// Expects desugared input.
pub fn branch_atoms(phi: &Formula) -> impl Iterator<Item = Branch> {
    leaves(phi, None)
}

/// Leaves with exactly `positives` positive atoms when given, all leaves
/// otherwise; depth-first, `true` child first.
fn leaves(phi: &Formula, positives: Option<usize>) -> impl Iterator<Item = Branch> {
    let mut stack = vec![Branch::root(phi.clone())];
    std::iter::from_fn(move || {
        while let Some(b) = stack.pop() {
            if positives.is_some_and(|k| b.conj.positives.len() > k) {
                continue;
            }
            match find_positive_atom(&b.phi_cur) {
                None => {
                    if positives.is_none_or(|k| b.conj.positives.len() == k) {
                        return Some(b.close());
                    }
                }
                Some(atom) => {
                    stack.push(b.split(&atom, false));
                    stack.push(b.split(&atom, true));
                }
            }
        }
        None
    })
}

fn kh_nodes(f: &Formula) -> usize {
    match f {
        Formula::Prop(_) | Formula::Top | Formula::Bot => 0,
        Formula::Not(g) => kh_nodes(g),
        Formula::A(g) | Formula::E(g) => 1 + kh_nodes(g),
        Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            kh_nodes(a) + kh_nodes(b)
        }
        Formula::Kh(a, b) => 1 + kh_nodes(a) + kh_nodes(b),
    }
}

/// Every leaf of [`branch_atoms`], reordered by number of positive atoms
/// (fewest first) and depth-first within a count. Smaller `I` means fewer
/// candidate `D ⊆ I × I` to search.
pub fn branches_by_size(phi: &Formula) -> impl Iterator<Item = Branch> + '_ {
    (0..=kh_nodes(phi)).flat_map(move |k| leaves(phi, Some(k)))
}

/// Result of a successful search.
#[derive(Clone, Debug)]
pub struct SatCertificate {
    pub model: LtsModel,
    /// Witness plan per positive atom, keyed by 1-based index.
    pub witnesses: BTreeMap<usize, Plan>,
    pub branch: Branch,
    pub branch_index: usize,
    pub disjunct: ThetaDisjunct,
    pub s5_states: usize,
    pub stats: SolveStats,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub branches_explored: usize,
    pub branches_memoized: usize,
    pub disjuncts_explored: usize,
    pub relations_tried: usize,
    pub pruned: usize,
    pub sat_calls: usize,
    pub seed_hit: bool,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Sat(Box<SatCertificate>),
    Unsat(SolveStats),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn certificate(&self) -> Option<&SatCertificate> {
        match self {
            Verdict::Sat(c) => Some(c),
            Verdict::Unsat(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solver {
    pub search: SearchOptions,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            search: SearchOptions::seeded(),
        }
    }
}

impl Solver {
    pub fn new(search: SearchOptions) -> Self {
        Solver { search }
    }

    pub fn decide(&self, phi: &Formula) -> Result<Verdict, SolverError> {
        let core = desugar(phi);
        let mut stats = SolveStats::default();
        let mut checker = S5Checker::new();
        let mut seen = HashSet::new();
        for (index, branch) in branches_by_size(&core).enumerate() {
            stats.branches_explored += 1;
            if !seen.insert(branch.canonical()) {
                stats.branches_memoized += 1;
                continue;
            }
            let mut search_stats = SearchStats::default();
            let found = find_disjunct(&branch.conj, &mut checker, &self.search, &mut search_stats)?;
            stats.disjuncts_explored += search_stats.disjuncts;
            stats.relations_tried += search_stats.relations_tried;
            stats.pruned += search_stats.pruned;
            let Some(found) = found else { continue };
            stats.seed_hit = search_stats.seed_hit;
            stats.sat_calls = checker.sat_calls;
            let (model, witnesses) = extract_lts(&found.disjunct, &found.model, &branch.conj);
            let cert = SatCertificate {
                model,
                witnesses,
                branch,
                branch_index: index,
                disjunct: found.disjunct,
                s5_states: found.model.num_states(),
                stats,
            };
            let verdict = Verdict::Sat(Box::new(cert));
            if !verify(&verdict, phi) {
                return Err(SolverError::Unsound(format!(
                    "extracted model does not satisfy {phi}"
                )));
            }
            return Ok(verdict);
        }
        stats.sat_calls = checker.sat_calls;
        Ok(Verdict::Unsat(stats))
    }
}

/// [`Solver::decide`] with default options.
pub fn decide(phi: &Formula) -> Result<Verdict, SolverError> {
    Solver::default().decide(phi)
}

/// Action name for the `ℓ`-th positive atom (1-based).
pub fn action_name(index: usize) -> String {
    format!("act{index}")
}

/// Turns an S5 model of a disjunct into a transition system for the atom
/// conjunction: `act<ℓ>` relates every `ψ_ℓ` state to every `χ_ℓ` state,
/// or nothing when `ψ_ℓ` is empty. Witnesses are `ε` for empty `ψ_ℓ` and
/// `act<ℓ>` otherwise.
pub fn extract_lts(
    _disjunct: &ThetaDisjunct,
    s5: &S5Model,
    conj: &AtomConjunction,
) -> (LtsModel, BTreeMap<usize, Plan>) {
    let mut m = s5.to_lts();
    let mut witnesses = BTreeMap::new();
    for (i, pos) in conj.positives.iter().enumerate() {
        let name = action_name(i + 1);
        m.declare_action(&name);
        let pre: TruthSet = s5.truth_set(&pos.pre);
        if pre.is_empty() {
            witnesses.insert(i + 1, Plan::empty());
            continue;
        }
        let post = s5.truth_set(&pos.post);
        for s in pre.iter() {
            for t in post.iter() {
                m.add_transition(&name, s, t);
            }
        }
        witnesses.insert(i + 1, Plan::from_actions([name]));
    }
    (m, witnesses)
}

/// Independent audit of a SAT verdict: the model satisfies `phi`
/// somewhere and every recorded witness meets both inclusions.
pub fn verify(verdict: &Verdict, phi: &Formula) -> bool {
    let Verdict::Sat(cert) = verdict else {
        return false;
    };
    let m = &cert.model;
    if m.model_check(phi).is_empty() {
        return false;
    }
    cert.witnesses.iter().all(|(&i, plan)| {
        let Some(pos) = cert.branch.conj.positives.get(i - 1) else {
            return false;
        };
        m.is_witness(plan, &m.model_check(&pos.pre), &m.model_check(&pos.post))
    })
}

/// `3|φ|³ + 1`.
pub fn small_model_bound(phi: &Formula) -> usize {
    let n = phi.size();
    3 * n * n * n + 1
}

#[derive(Debug, Serialize)]
pub struct BranchReport {
    pub index: usize,
    pub phi_cur: String,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
    pub decisions: Vec<(String, bool)>,
}

#[derive(Debug, Serialize)]
pub struct DisjunctReport {
    pub d: Vec<(usize, usize)>,
    pub closure: Vec<(usize, usize)>,
    pub choices: ChoiceLog,
    pub a_atoms: Vec<String>,
    pub e_atoms: Vec<String>,
}

/// Machine-readable verdict.
#[derive(Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum VerdictReport {
    Sat {
        model: ModelJson,
        witnesses: BTreeMap<usize, Plan>,
        branch: BranchReport,
        disjunct: DisjunctReport,
        stats: SolveStats,
    },
    Unsat {
        stats: SolveStats,
    },
}

impl VerdictReport {
    pub fn new(v: &Verdict) -> Self {
        match v {
            Verdict::Unsat(stats) => VerdictReport::Unsat {
                stats: stats.clone(),
            },
            Verdict::Sat(c) => {
                let show = |p: &KhPair| p.to_formula().to_string();
                VerdictReport::Sat {
                    model: ModelJson::from_model(&c.model),
                    witnesses: c.witnesses.clone(),
                    branch: BranchReport {
                        index: c.branch_index,
                        phi_cur: c.branch.phi_cur.to_string(),
                        positives: c.branch.conj.positives.iter().map(show).collect(),
                        negatives: c
                            .branch
                            .conj
                            .negatives
                            .iter()
                            .map(|n| Formula::not(n.to_formula()).to_string())
                            .collect(),
                        decisions: c
                            .branch
                            .decisions
                            .iter()
                            .map(|(a, v)| (show(a), *v))
                            .collect(),
                    },
                    disjunct: DisjunctReport {
                        d: c.disjunct.d.pairs_one_based(),
                        closure: c.disjunct.d.closure_one_based(),
                        choices: c.disjunct.choices.clone(),
                        a_atoms: c.disjunct.a_atoms.iter().map(|a| a.to_string()).collect(),
                        e_atoms: c.disjunct.e_atoms.iter().map(|a| a.to_string()).collect(),
                    },
                    stats: c.stats.clone(),
                }
            }
        }
    }
}
