//! Bounded brute-force satisfiability and differential fuzzing.
//!
//! The oracle enumerates every transition system up to a state and action
//! bound. It never looks at the translation; its only link to the rest of
//! the crate is that found models are re-checked with the model checker.
//!
//! Enumerating relations naively is too slow at three states and two
//! actions (2¹⁸ relation assignments per valuation), so relation
//! assignments are grouped by their full `Kh` table: for every pair of
//! state subsets `(pre, post)`, whether some plan takes `pre` into `post`.
//! A formula's truth depends on the relations only through that table, so
//! checking one representative per table is exact.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lts::LtsModel;
use crate::s5::S5Checker;
use crate::solver::{extract_lts, Solver};
use crate::syntax::{AtomConjunction, Formula, KhPair};
use crate::translate::{find_disjunct, SearchOptions, SearchStats};

/// Largest state count the table-based enumeration supports.
pub const MAX_ORACLE_STATES: usize = 4;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("bounds describe {count} models, over the budget of {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
    #[error("oracle supports at most {MAX_ORACLE_STATES} states, got {0}")]
    TooManyStates(usize),
    #[error("oracle needs at least one state")]
    NoStates,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleBounds {
    pub max_states: usize,
    pub max_actions: usize,
    pub propositions: Vec<String>,
    /// Upper limit on the raw number of models the bounds describe.
    pub budget: u128,
}

impl OracleBounds {
    pub fn new<S: Into<String>>(
        max_states: usize,
        max_actions: usize,
        propositions: impl IntoIterator<Item = S>,
    ) -> Self {
        OracleBounds {
            max_states,
            max_actions,
            propositions: propositions.into_iter().map(Into::into).collect(),
            budget: 1 << 32,
        }
    }

    /// The bounds used throughout the differential suites.
    pub fn desk() -> Self {
        Self::new(3, 2, ["p", "q", "r"])
    }

    fn check(&self) -> Result<(), OracleError> {
        if self.max_states == 0 {
            return Err(OracleError::NoStates);
        }
        if self.max_states > MAX_ORACLE_STATES {
            return Err(OracleError::TooManyStates(self.max_states));
        }
        let count = raw_model_count(self);
        if count > self.budget {
            return Err(OracleError::BudgetExceeded {
                count,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

/// Action names used by enumerated models.
pub fn action_symbol(i: usize) -> String {
    ((b'a' + i as u8) as char).to_string()
}

/// `Σ_{n ≤ maxStates} Σ_{k ≤ maxActions} 2^{k·n²} · 2^{n·|P|}`.
pub fn raw_model_count(b: &OracleBounds) -> u128 {
    let p = b.propositions.len() as u32;
    let mut total: u128 = 0;
    for n in 1..=b.max_states as u32 {
        for k in 0..=b.max_actions as u32 {
            let bits = k * n * n + n * p;
            total = total.saturating_add(if bits >= 128 {
                u128::MAX
            } else {
                1u128 << bits
            });
        }
    }
    total
}

/// Relations for `k` actions over `n` states, encoded as `k` blocks of
/// `n²` bits; bit `s·n + t` of block `a` means `(s, t) ∈ R_a`.
fn build_model(n: usize, k: usize, rel_bits: u64, val_bits: u64, props: &[String]) -> LtsModel {
    let mut m = LtsModel::with_size(n).expect("n >= 1");
    for a in 0..k {
        let name = action_symbol(a);
        m.declare_action(&name);
        for s in 0..n {
            for t in 0..n {
                if rel_bits >> (a * n * n + s * n + t) & 1 == 1 {
                    m.add_transition(&name, s, t);
                }
            }
        }
    }
    for (pi, p) in props.iter().enumerate() {
        m.declare_prop(p);
        for s in 0..n {
            if val_bits >> (pi * n + s) & 1 == 1 {
                m.set_true(p, s);
            }
        }
    }
    m
}

/// Every model within the bounds, ordered by state count, action count,
/// relation bitmap, valuation bitmap. No canonicalization.
pub fn enumerate_models(b: &OracleBounds) -> impl Iterator<Item = LtsModel> + '_ {
    (1..=b.max_states).flat_map(move |n| {
        (0..=b.max_actions).flat_map(move |k| {
            let rel_space = 1u64 << (k * n * n);
            let val_space = 1u64 << (n * b.propositions.len());
            (0..rel_space).flat_map(move |r| {
                (0..val_space).map(move |v| build_model(n, k, r, v, &b.propositions))
            })
        })
    })
}

/// One `Kh` table: word `pre` has bit `post` set iff some plan is strongly
/// executable from `pre` and lands inside `post`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct KhTable(Vec<u64>);

#[derive(Debug)]
struct TableClass {
    table: KhTable,
    /// Smallest relation bitmap producing this table.
    relations: u64,
}

fn kh_table(n: usize, k: usize, rel_bits: u64) -> KhTable {
    let subsets = 1usize << n;
    // succ[a][s] as a state mask.
    let mut succ = vec![vec![0u64; n]; k];
    let mut dom = vec![0u64; k];
    for a in 0..k {
        for s in 0..n {
            let row = (rel_bits >> (a * n * n + s * n)) & ((1 << n) - 1);
            succ[a][s] = row;
            if row != 0 {
                dom[a] |= 1 << s;
            }
        }
    }
    let image = |a: usize, u: usize| -> usize {
        let mut out = 0;
        for s in 0..n {
            if u >> s & 1 == 1 {
                out |= succ[a][s];
            }
        }
        out as usize
    };
    let mut table = vec![0u64; subsets];
    for (pre, word) in table.iter_mut().enumerate() {
        // Reachable subsets as a bitmask over subsets.
        let mut reached: u64 = 1 << pre;
        let mut frontier = vec![pre];
        while let Some(u) = frontier.pop() {
            for a in 0..k {
                if (u as u64) & !dom[a] != 0 {
                    continue;
                }
                let v = image(a, u);
                if reached >> v & 1 == 0 {
                    reached |= 1 << v;
                    frontier.push(v);
                }
            }
        }
        for post in 0..subsets {
            let hit = (0..subsets).any(|u| reached >> u & 1 == 1 && u & !post == 0);
            if hit {
                *word |= 1 << post;
            }
        }
    }
    KhTable(table)
}

type TableCache = Mutex<HashMap<(usize, usize), Arc<Vec<TableClass>>>>;

fn table_classes(n: usize, k: usize) -> Arc<Vec<TableClass>> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&(n, k)) {
        return hit.clone();
    }
    let mut index: HashMap<KhTable, usize> = HashMap::new();
    let mut classes = Vec::new();
    for r in 0..1u64 << (k * n * n) {
        let t = kh_table(n, k, r);
        index.entry(t.clone()).or_insert_with(|| {
            classes.push(TableClass {
                table: t,
                relations: r,
            });
            classes.len() - 1
        });
    }
    let classes = Arc::new(classes);
    cache.lock().unwrap().insert((n, k), classes.clone());
    classes
}

/// Truth of `f` as a state mask, given proposition masks and a `Kh` table.
fn eval_mask(f: &Formula, n: usize, props: &BTreeMap<&str, u64>, table: &KhTable) -> u64 {
    let full = (1u64 << n) - 1;
    let global = |b: bool| if b { full } else { 0 };
    let ev = |g: &Formula| eval_mask(g, n, props, table);
    match f {
        Formula::Prop(p) => props.get(p.as_str()).copied().unwrap_or(0),
        Formula::Top => full,
        Formula::Bot => 0,
        Formula::Not(g) => !ev(g) & full,
        Formula::Or(a, b) => ev(a) | ev(b),
        Formula::And(a, b) => ev(a) & ev(b),
        Formula::Implies(a, b) => (!ev(a) | ev(b)) & full,
        Formula::Iff(a, b) => !(ev(a) ^ ev(b)) & full,
        Formula::A(g) => global(ev(g) == full),
        Formula::E(g) => global(ev(g) != 0),
        Formula::Kh(a, b) => global(table.0[ev(a) as usize] >> ev(b) & 1 == 1),
    }
}

/// First model within `bounds` (in enumeration order, up to `Kh`-table
/// equivalence) where `phi` holds somewhere. `None` refutes satisfiability
/// only within the bounds.
///
/// Propositions of `phi` missing from the bounds are false everywhere.
pub fn oracle_sat(phi: &Formula, bounds: &OracleBounds) -> Result<Option<LtsModel>, OracleError> {
    bounds.check()?;
    let props = &bounds.propositions;
    for n in 1..=bounds.max_states {
        for k in 0..=bounds.max_actions {
            let classes = table_classes(n, k);
            for v in 0..1u64 << (n * props.len()) {
                let masks: BTreeMap<&str, u64> = props
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.as_str(), (v >> (i * n)) & ((1 << n) - 1)))
                    .collect();
                for class in classes.iter() {
                    if eval_mask(phi, n, &masks, &class.table) != 0 {
                        let m = build_model(n, k, class.relations, v, props);
                        assert!(
                            !m.model_check(phi).is_empty(),
                            "oracle and model checker disagree on {phi}"
                        );
                        return Ok(Some(m));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Which family of inputs a fuzz run draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FuzzMode {
    /// Arbitrary formulas through the full solver.
    Formula,
    /// Conjunctions of positive atoms through the θ⁺ route.
    Positive,
    /// Conjunctions of negative atoms through the θ⁻ route.
    Negative,
    /// Mixed conjunctions through the combined θ route.
    Mixed,
}

/// Weights for the random formula generator.
#[derive(Clone, Debug, Serialize)]
pub struct GenConfig {
    pub max_depth: usize,
    /// Upper bound on `Kh`/`A`/`E` nodes per formula.
    pub max_modal: usize,
    /// `Kh`/`A`/`E` nodes only appear at this depth or above.
    pub modal_depth: usize,
    pub weight_leaf: u32,
    pub weight_not: u32,
    pub weight_binary: u32,
    pub weight_modal: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 4,
            max_modal: 2,
            modal_depth: 2,
            weight_leaf: 3,
            weight_not: 2,
            weight_binary: 4,
            weight_modal: 4,
        }
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a GenConfig,
    props: &'a [String],
    modal_left: usize,
}

impl Gen<'_> {
    fn leaf(&mut self) -> Formula {
        match self.rng.gen_range(0..10) {
            0 => Formula::Top,
            1 => Formula::Bot,
            _ => Formula::Prop(self.props.choose(&mut self.rng).unwrap().clone()),
        }
    }

    fn propositional(&mut self, depth: usize) -> Formula {
        if depth == 0 || self.rng.gen_range(0..3) == 0 {
            return self.leaf();
        }
        match self.rng.gen_range(0..4) {
            0 => Formula::not(self.propositional(depth - 1)),
            1 => Formula::or(self.propositional(depth - 1), self.propositional(depth - 1)),
            _ => Formula::and(self.propositional(depth - 1), self.propositional(depth - 1)),
        }
    }

    fn formula(&mut self, depth: usize, level: usize) -> Formula {
        let c = self.cfg;
        let modal_ok = self.modal_left > 0 && level <= c.modal_depth;
        let weights = [
            c.weight_leaf,
            if depth > 0 { c.weight_not } else { 0 },
            if depth > 0 { c.weight_binary } else { 0 },
            if modal_ok { c.weight_modal } else { 0 },
        ];
        let total: u32 = weights.iter().sum();
        if total == 0 {
            return self.leaf();
        }
        let mut roll = self.rng.gen_range(0..total);
        let mut pick = 0;
        while roll >= weights[pick] {
            roll -= weights[pick];
            pick += 1;
        }
        let sub = depth.saturating_sub(1);
        match pick {
            0 => self.leaf(),
            1 => Formula::not(self.formula(sub, level + 1)),
            2 => {
                let (a, b) = (self.formula(sub, level + 1), self.formula(sub, level + 1));
                match self.rng.gen_range(0..6) {
                    0 => Formula::implies(a, b),
                    1 => Formula::iff(a, b),
                    2 | 3 => Formula::or(a, b),
                    _ => Formula::and(a, b),
                }
            }
            _ => {
                self.modal_left -= 1;
                match self.rng.gen_range(0..6) {
                    0 => Formula::univ(self.formula(sub.min(2), level + 1)),
                    1 => Formula::exists(self.formula(sub.min(2), level + 1)),
                    _ => {
                        let pre = self.formula(sub.min(2), level + 1);
                        let post = self.formula(sub.min(2), level + 1);
                        Formula::kh(pre, post)
                    }
                }
            }
        }
    }

    fn pair(&mut self) -> KhPair {
        KhPair::new(self.propositional(2), self.propositional(2))
    }
}

/// Random formula for trial `trial` of a run seeded with `seed`.
pub fn random_formula(seed: u64, trial: u64, cfg: &GenConfig, props: &[String]) -> Formula {
    let mut g = Gen {
        rng: trial_rng(seed, trial),
        cfg,
        props,
        modal_left: cfg.max_modal,
    };
    g.formula(cfg.max_depth, 0)
}

/// Random atom conjunction shaped for `mode`.
pub fn random_conjunction(
    seed: u64,
    trial: u64,
    mode: FuzzMode,
    props: &[String],
) -> AtomConjunction {
    let cfg = GenConfig::default();
    let mut g = Gen {
        rng: trial_rng(seed, trial),
        cfg: &cfg,
        props,
        modal_left: 0,
    };
    let (pos, neg) = match mode {
        FuzzMode::Positive => (g.rng.gen_range(1..=3), 0),
        FuzzMode::Negative => (0, g.rng.gen_range(1..=3)),
        _ => (g.rng.gen_range(1..=2), g.rng.gen_range(1..=2)),
    };
    let positives = (0..pos).map(|_| g.pair()).collect();
    let negatives = (0..neg).map(|_| g.pair()).collect();
    AtomConjunction::new(positives, negatives)
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DisagreementKind {
    /// The oracle found a model; the solver answered unsatisfiable.
    OracleSatSolverUnsat,
    /// The solver's model does not satisfy the input.
    InvalidModel,
    /// The solver or oracle reported an error.
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Disagreement {
    pub seed: u64,
    pub trial: u64,
    pub mode: FuzzMode,
    pub formula: String,
    pub kind: DisagreementKind,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FuzzReport {
    pub trials: usize,
    pub solver_sat: usize,
    pub solver_unsat: usize,
    pub oracle_sat: usize,
    pub disagreements: Vec<Disagreement>,
}

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub seed: u64,
    pub trials: u64,
    pub mode: FuzzMode,
    pub bounds: OracleBounds,
    pub generator: GenConfig,
    pub search: SearchOptions,
    pub threads: usize,
}

impl FuzzConfig {
    pub fn new(seed: u64, trials: u64, mode: FuzzMode) -> Self {
        FuzzConfig {
            seed,
            trials,
            mode,
            bounds: OracleBounds::desk(),
            generator: GenConfig::default(),
            search: SearchOptions::seeded(),
            threads: 1,
        }
    }
}

#[derive(Debug)]
struct TrialOutcome {
    solver_sat: bool,
    oracle_sat: bool,
    disagreement: Option<(DisagreementKind, String)>,
    formula: String,
}

fn run_trial(cfg: &FuzzConfig, trial: u64) -> TrialOutcome {
    let props = &cfg.bounds.propositions;
    let (phi, solved) = match cfg.mode {
        FuzzMode::Formula => {
            let phi = random_formula(cfg.seed, trial, &cfg.generator, props);
            let solved = Solver::new(cfg.search.clone())
                .decide(&phi)
                .map(|v| v.certificate().map(|c| c.model.clone()))
                .map_err(|e| e.to_string());
            (phi, solved)
        }
        mode => {
            let conj = random_conjunction(cfg.seed, trial, mode, props);
            let phi = conj.to_formula();
            let mut stats = SearchStats::default();
            let solved = find_disjunct(&conj, &mut S5Checker::new(), &cfg.search, &mut stats)
                .map(|found| found.map(|f| extract_lts(&f.disjunct, &f.model, &conj).0))
                .map_err(|e| e.to_string());
            (phi, solved)
        }
    };
    let formula = phi.to_string();
    let oracle = oracle_sat(&phi, &cfg.bounds).map_err(|e| e.to_string());
    let mut out = TrialOutcome {
        solver_sat: matches!(solved, Ok(Some(_))),
        oracle_sat: matches!(oracle, Ok(Some(_))),
        disagreement: None,
        formula,
    };
    out.disagreement = match (&solved, &oracle) {
        (Err(e), _) | (_, Err(e)) => Some((DisagreementKind::Error, e.clone())),
        (Ok(Some(m)), _) if m.model_check(&phi).is_empty() => Some((
            DisagreementKind::InvalidModel,
            format!("solver model falsifies the input: {}", m.to_json()),
        )),
        (Ok(None), Ok(Some(m))) => Some((
            DisagreementKind::OracleSatSolverUnsat,
            format!("oracle model: {}", m.to_json()),
        )),
        _ => None,
    };
    out
}

/// Runs `cfg.trials` independent trials, optionally across threads. The
/// report does not depend on the thread count.
pub fn fuzz(cfg: &FuzzConfig) -> FuzzReport {
    let threads = cfg.threads.max(1);
    let mut outcomes: Vec<(u64, TrialOutcome)> = if threads == 1 {
        (0..cfg.trials).map(|t| (t, run_trial(cfg, t))).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads as u64)
                .map(|w| {
                    scope.spawn(move || {
                        (w..cfg.trials)
                            .step_by(threads)
                            .map(|t| (t, run_trial(cfg, t)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("fuzz worker panicked"))
                .collect()
        })
    };
    outcomes.sort_by_key(|(t, _)| *t);
    let mut report = FuzzReport {
        trials: outcomes.len(),
        ..Default::default()
    };
    for (trial, o) in outcomes {
        if o.solver_sat {
            report.solver_sat += 1;
        } else {
            report.solver_unsat += 1;
        }
        report.oracle_sat += usize::from(o.oracle_sat);
        if let Some((kind, detail)) = o.disagreement {
            report.disagreements.push(Disagreement {
                seed: cfg.seed,
                trial,
                mode: cfg.mode,
                formula: o.formula,
                kind,
                detail,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn raw_count_closed_form() {
        let b = OracleBounds::new(2, 1, ["p"]);
        // n=1: 2 + 2·2; n=2: 4 + 16·4.
        assert_eq!(raw_model_count(&b), 74);
        assert_eq!(enumerate_models(&b).count(), 74);
        let exact: usize = enumerate_models(&b)
            .filter(|m| m.num_states() == 2 && m.actions().count() == 1)
            .count();
        assert_eq!(exact, (1 << 4) * (1 << 2));
    }

    #[test]
    fn bottom_has_no_model() {
        assert!(oracle_sat(&Formula::Bot, &OracleBounds::desk())
            .unwrap()
            .is_none());
        assert!(oracle_sat(&f("p & ~p"), &OracleBounds::new(1, 0, ["p"]))
            .unwrap()
            .is_none());
    }

    #[test]
    fn finds_kh_model() {
        let m = oracle_sat(&f("Kh(p, r) & E p & ~E (p & r)"), &OracleBounds::desk())
            .unwrap()
            .unwrap();
        assert!(m.model_check(&f("Kh(p, r)")).is_full());
        assert_eq!(m.num_states(), 2);
    }

    #[test]
    fn budget_and_state_limits() {
        let mut b = OracleBounds::desk();
        b.budget = 10;
        assert!(matches!(
            oracle_sat(&f("p"), &b),
            Err(OracleError::BudgetExceeded { .. })
        ));
        assert!(matches!(
            oracle_sat(&f("p"), &OracleBounds::new(5, 0, ["p"])),
            Err(OracleError::TooManyStates(5))
        ));
    }

    #[test]
    fn tables_match_model_checker() {
        let (n, k) = (3, 1);
        let subsets = 1usize << n;
        for r in (0..1u64 << (k * n * n)).step_by(7) {
            let t = kh_table(n, k, r);
            let m = build_model(n, k, r, 0, &[]);
            for pre in 0..subsets {
                for post in 0..subsets {
                    let set = |mask: usize| {
                        crate::lts::TruthSet::from_indices(n, (0..n).filter(|s| mask >> s & 1 == 1))
                    };
                    let expected = m.check_kh(&set(pre), &set(post)).is_some();
                    assert_eq!(t.0[pre] >> post & 1 == 1, expected);
                }
            }
        }
    }

    #[test]
    fn generator_is_reproducible() {
        let props: Vec<String> = ["p", "q", "r"].iter().map(|s| s.to_string()).collect();
        let cfg = GenConfig::default();
        let a: Vec<_> = (0..20)
            .map(|t| random_formula(9, t, &cfg, &props))
            .collect();
        let b: Vec<_> = (0..20)
            .map(|t| random_formula(9, t, &cfg, &props))
            .collect();
        assert_eq!(a, b);
        assert_ne!(
            a,
            (0..20)
                .map(|t| random_formula(10, t, &cfg, &props))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn small_fuzz_runs_clean_and_threads_agree() {
        let mut cfg = FuzzConfig::new(3, 24, FuzzMode::Formula);
        let one = fuzz(&cfg);
        assert!(one.disagreements.is_empty(), "{:?}", one.disagreements);
        cfg.threads = 3;
        assert_eq!(fuzz(&cfg), one);
    }
}
