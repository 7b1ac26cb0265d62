//! Equisatisfiable translations of atom conjunctions into flat `A`/`E`
//! conjunctions.
//!
//! For positives `Kh(ψᵢ, χᵢ)` (i ∈ I) and negatives `¬Kh(ψⱼ, χⱼ)` (j ∈ J):
//!
//! ```text
//! θ⁺  = ⋀ᵢ (A ¬ψᵢ ∨ E χᵢ)
//! θ⁻  = ⋀ⱼ E(ψⱼ ∧ ¬χⱼ)
//! θ_D = ⋀ⱼ ⋀_{(s,t) ∈ C(D̄)} (E(ψⱼ ∧ ¬ψₛ) ∨ E(χₜ ∧ ¬χⱼ))  ∧  ⋀_{(t,s) ∈ D} E(χₜ ∧ ¬ψₛ)
//! ```
//!
//! where `D ⊆ I × I`, `D̄` is its complement and `C(·)` the
//! reflexive-transitive closure. The conjunction is satisfiable iff
//! `θ⁺ ∧ θ⁻ ∧ θ_D` is for some `D`. The full disjunction over `D` is never
//! built; callers work one disjunct at a time.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::s5::{GlobalAtom, S5Checker, S5Model};
use crate::sat::SatError;
use crate::syntax::{AtomConjunction, Formula, KhPair};

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("relation is over {found} indices but the conjunction has {expected} positive atoms")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index pair ({0}, {1}) out of range")]
    IndexOutOfRange(usize, usize),
    #[error(transparent)]
    Sat(#[from] SatError),
}

/// `⋀ᵢ (A ¬ψᵢ ∨ E χᵢ)`; `true` when empty.
pub fn theta_plus(positives: &[KhPair]) -> Formula {
    Formula::conj(positives.iter().map(|p| {
        Formula::or(
            Formula::univ(Formula::not(p.pre.clone())),
            Formula::exists(p.post.clone()),
        )
    }))
}

/// `⋀ⱼ E(ψⱼ ∧ ¬χⱼ)`; `true` when empty.
pub fn theta_minus(negatives: &[KhPair]) -> Formula {
    Formula::conj(negatives.iter().map(|n| Formula::exists(missed(n))))
}

fn missed(n: &KhPair) -> Formula {
    Formula::and(n.pre.clone(), Formula::not(n.post.clone()))
}

/// A guessed `D ⊆ I × I` (0-based indices) together with `C(D̄)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DRelation {
    n: usize,
    pairs: BTreeSet<(usize, usize)>,
    closure: Vec<Vec<bool>>,
}

/// Computes the reflexive-transitive closure of `(I × I) \ d`.
pub fn closure_complement(
    n: usize,
    d: impl IntoIterator<Item = (usize, usize)>,
) -> Result<DRelation, TranslateError> {
    let pairs: BTreeSet<(usize, usize)> = d.into_iter().collect();
    if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(TranslateError::IndexOutOfRange(a, b));
    }
    let mut c = vec![vec![false; n]; n];
    for (s, row) in c.iter_mut().enumerate() {
        for (t, cell) in row.iter_mut().enumerate() {
            *cell = s == t || !pairs.contains(&(s, t));
        }
    }
    // Warshall.
    for k in 0..n {
        for s in 0..n {
            if c[s][k] {
                for t in 0..n {
                    if c[k][t] {
                        c[s][t] = true;
                    }
                }
            }
        }
    }
    Ok(DRelation {
        n,
        pairs,
        closure: c,
    })
}

impl DRelation {
    pub fn size(&self) -> usize {
        self.n
    }

    /// Pairs of `D`, 0-based, sorted.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains(&self, t: usize, s: usize) -> bool {
        self.pairs.contains(&(t, s))
    }

    pub fn in_closure(&self, s: usize, t: usize) -> bool {
        self.closure[s][t]
    }

    /// Pairs of `C(D̄)`, 0-based, sorted.
    pub fn closure_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|s| (0..self.n).map(move |t| (s, t)))
            .filter(|&(s, t)| self.closure[s][t])
            .collect()
    }

    pub fn pairs_one_based(&self) -> Vec<(usize, usize)> {
        self.pairs().map(|(a, b)| (a + 1, b + 1)).collect()
    }

    pub fn closure_one_based(&self) -> Vec<(usize, usize)> {
        self.closure_pairs()
            .into_iter()
            .map(|(a, b)| (a + 1, b + 1))
            .collect()
    }
}

fn fmt_pairs(pairs: &[(usize, usize)]) -> String {
    let items: Vec<String> = pairs.iter().map(|(a, b)| format!("({a},{b})")).collect();
    format!("{{{}}}", items.join(","))
}

impl fmt::Display for DRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "D={} C(D̄)={}",
            fmt_pairs(&self.pairs_one_based()),
            fmt_pairs(&self.closure_one_based())
        )
    }
}

/// One conjunct of `θ_D`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    Single(GlobalAtom),
    Either(GlobalAtom, GlobalAtom),
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Single(a) => write!(f, "{a}"),
            Constraint::Either(a, b) => write!(f, "{a} | {b}"),
        }
    }
}

/// A disjunctive constraint of `θ_D` identified by `(j, s, t)`, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairSlot {
    pub j: usize,
    pub s: usize,
    pub t: usize,
}

fn pair_options(conj: &AtomConjunction, slot: PairSlot) -> (Formula, Formula) {
    let (nj, ps, pt) = (
        &conj.negatives[slot.j],
        &conj.positives[slot.s],
        &conj.positives[slot.t],
    );
    (
        Formula::and(nj.pre.clone(), Formula::not(ps.pre.clone())),
        Formula::and(pt.post.clone(), Formula::not(nj.post.clone())),
    )
}

fn reach_gap(conj: &AtomConjunction, t: usize, s: usize) -> Formula {
    Formula::and(
        conj.positives[t].post.clone(),
        Formula::not(conj.positives[s].pre.clone()),
    )
}

fn pair_slots(conj: &AtomConjunction, d: &DRelation) -> Vec<PairSlot> {
    let closure = d.closure_pairs();
    (0..conj.negatives.len())
        .flat_map(|j| closure.iter().map(move |&(s, t)| PairSlot { j, s, t }))
        .collect()
}

/// The constraint set of `θ_D`: one `E(χₜ ∧ ¬ψₛ)` per `(t,s) ∈ D`, then one
/// two-way disjunction per `j ∈ J` and `(s,t) ∈ C(D̄)`.
pub fn theta_d(conj: &AtomConjunction, d: &DRelation) -> Result<Vec<Constraint>, TranslateError> {
    if d.n != conj.positives.len() {
        return Err(TranslateError::DimensionMismatch {
            expected: conj.positives.len(),
            found: d.n,
        });
    }
    let mut out: Vec<Constraint> = d
        .pairs()
        .map(|(t, s)| Constraint::Single(GlobalAtom::exists(reach_gap(conj, t, s))))
        .collect();
    for slot in pair_slots(conj, d) {
        let (l, r) = pair_options(conj, slot);
        out.push(Constraint::Either(
            GlobalAtom::exists(l),
            GlobalAtom::exists(r),
        ));
    }
    Ok(out)
}

/// Which side of `A ¬ψᵢ ∨ E χᵢ` a disjunct takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveChoice {
    /// `E χᵢ`
    Reach,
    /// `A ¬ψᵢ`
    Vacuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `E(ψⱼ ∧ ¬ψₛ)`
    Left,
    /// `E(χₜ ∧ ¬χⱼ)`
    Right,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChoiceLog {
    pub positives: Vec<PositiveChoice>,
    pub pairs: Vec<(PairSlot, Side)>,
}

/// A disjunct of the DNF of `θ⁺ ∧ θ⁻ ∧ θ_D`: a plain conjunction of
/// global atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThetaDisjunct {
    pub a_atoms: Vec<GlobalAtom>,
    pub e_atoms: Vec<GlobalAtom>,
    pub d: DRelation,
    pub choices: ChoiceLog,
}

impl ThetaDisjunct {
    /// Assembles the disjunct selected by `choices` under `d`. Atoms are
    /// ordered: θ⁺ picks, θ⁻, mandatory `D` atoms, pair picks.
    pub fn assemble(conj: &AtomConjunction, d: DRelation, choices: ChoiceLog) -> Self {
        let mut a_atoms = Vec::new();
        let mut e_atoms = Vec::new();
        for (p, c) in conj.positives.iter().zip(&choices.positives) {
            match c {
                PositiveChoice::Vacuous => {
                    a_atoms.push(GlobalAtom::univ(Formula::not(p.pre.clone())))
                }
                PositiveChoice::Reach => e_atoms.push(GlobalAtom::exists(p.post.clone())),
            }
        }
        e_atoms.extend(conj.negatives.iter().map(|n| GlobalAtom::exists(missed(n))));
        e_atoms.extend(
            d.pairs()
                .map(|(t, s)| GlobalAtom::exists(reach_gap(conj, t, s))),
        );
        for &(slot, side) in &choices.pairs {
            let (l, r) = pair_options(conj, slot);
            e_atoms.push(GlobalAtom::exists(match side {
                Side::Left => l,
                Side::Right => r,
            }));
        }
        ThetaDisjunct {
            a_atoms,
            e_atoms,
            d,
            choices,
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &GlobalAtom> {
        self.a_atoms.iter().chain(&self.e_atoms)
    }

    pub fn atom_count(&self) -> usize {
        self.a_atoms.len() + self.e_atoms.len()
    }

    pub fn to_formula(&self) -> Formula {
        Formula::conj(self.atoms().map(GlobalAtom::to_formula))
    }
}

/// Subsets of `I × I` by increasing size, lexicographic within a size.
#[derive(Clone, Debug)]
pub struct DSubsets {
    n: usize,
    size: usize,
    combo: Option<Vec<usize>>,
}

impl DSubsets {
    pub fn new(n: usize) -> Self {
        DSubsets {
            n,
            size: 0,
            combo: Some(Vec::new()),
        }
    }
}

impl Iterator for DSubsets {
    type Item = Vec<(usize, usize)>;

    fn next(&mut self) -> Option<Self::Item> {
        let universe = self.n * self.n;
        let combo = self.combo.take()?;
        let out = combo.iter().map(|&k| (k / self.n, k % self.n)).collect();
        // Advance to the next k-combination, or the first of size k + 1.
        let k = combo.len();
        let mut next = combo;
        let mut i = k;
        let advanced = loop {
            if i == 0 {
                break false;
            }
            i -= 1;
            if next[i] < universe - k + i {
                next[i] += 1;
                for m in i + 1..k {
                    next[m] = next[m - 1] + 1;
                }
                break true;
            }
        };
        if advanced {
            self.combo = Some(next);
        } else if self.size < universe {
            self.size += 1;
            self.combo = Some((0..self.size).collect());
        }
        Some(out)
    }
}

/// Lazily yields every disjunct, unpruned: for each `D` (in [`DSubsets`]
/// order) every combination of per-`i` and per-pair choices, counting in
/// binary with the first choice slot least significant.
pub fn enumerate_disjuncts(conj: &AtomConjunction) -> impl Iterator<Item = ThetaDisjunct> + '_ {
    let n = conj.positives.len();
    DSubsets::new(n).flat_map(move |pairs| {
        let d = closure_complement(n, pairs).expect("in range");
        let slots = pair_slots(conj, &d);
        let width = n + slots.len();
        let mut counter: Option<Vec<bool>> = Some(vec![false; width]);
        std::iter::from_fn(move || {
            let bits = counter.take()?;
            let choices = ChoiceLog {
                positives: bits[..n]
                    .iter()
                    .map(|&b| {
                        if b {
                            PositiveChoice::Vacuous
                        } else {
                            PositiveChoice::Reach
                        }
                    })
                    .collect(),
                pairs: slots
                    .iter()
                    .zip(&bits[n..])
                    .map(|(&slot, &b)| (slot, if b { Side::Right } else { Side::Left }))
                    .collect(),
            };
            let mut next = bits;
            let mut carry = true;
            for b in next.iter_mut() {
                if !carry {
                    break;
                }
                carry = *b;
                *b = !*b;
            }
            if !carry {
                counter = Some(next);
            }
            Some(ThetaDisjunct::assemble(conj, d.clone(), choices))
        })
    })
}

/// Deliberate faults for exercising the differential fuzzer.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mutation {
    #[default]
    None,
    /// Always takes `A ¬ψᵢ`, losing models where some `ψᵢ` must hold.
    ForceVacuous,
    /// Drops the `C(D̄)` disjunctions from `θ_D`.
    DropClosure,
}

#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    /// Try the `D` read off a model of `θ⁺ ∧ θ⁻` before enumerating.
    pub seed_d: bool,
    #[doc(hidden)]
    pub mutation: Mutation,
}

impl SearchOptions {
    pub fn seeded() -> Self {
        SearchOptions {
            seed_d: true,
            mutation: Mutation::None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Number of `D` relations examined.
    pub relations_tried: usize,
    /// Complete disjuncts reached by the search.
    pub disjuncts: usize,
    /// Partial choice vectors discarded early.
    pub pruned: usize,
    /// Whether the success came from the seeded `D`.
    pub seed_hit: bool,
}

/// A satisfiable disjunct and its S5 model.
#[derive(Clone, Debug)]
pub struct DisjunctModel {
    pub disjunct: ThetaDisjunct,
    pub model: S5Model,
}

struct Search<'a> {
    conj: &'a AtomConjunction,
    checker: &'a mut S5Checker,
    opts: &'a SearchOptions,
    stats: &'a mut SearchStats,
}

impl Search<'_> {
    /// Picks a satisfiable side for every slot under the fixed `A` bodies.
    /// `E` atoms do not constrain one another, so each slot is independent
    /// once the `A` part is fixed.
    fn resolve_pairs(
        &mut self,
        a_bodies: &[Formula],
        slots: &[PairSlot],
    ) -> Result<Option<Vec<(PairSlot, Side)>>, TranslateError> {
        let mut out = Vec::with_capacity(slots.len());
        for &slot in slots {
            let (l, r) = pair_options(self.conj, slot);
            if self.checker.consistent(a_bodies, &[l])? {
                out.push((slot, Side::Left));
            } else if self.checker.consistent(a_bodies, &[r])? {
                out.push((slot, Side::Right));
            } else {
                return Ok(None);
            }
        }
        Ok(Some(out))
    }

    /// Depth-first over the per-`i` choices, `E χᵢ` first. A partial choice
    /// is dropped as soon as the mandatory `E` atoms or some pair slot
    /// becomes unsatisfiable; adding `A` atoms only shrinks the models, so
    /// no extension can recover.
    fn positives(
        &mut self,
        i: usize,
        a_bodies: &mut Vec<Formula>,
        e_bodies: &mut Vec<Formula>,
        picks: &mut Vec<PositiveChoice>,
        slots: &[PairSlot],
        d: &DRelation,
    ) -> Result<Option<DisjunctModel>, TranslateError> {
        if !self.checker.consistent(a_bodies, e_bodies)? {
            self.stats.pruned += 1;
            return Ok(None);
        }
        let Some(pairs) = self.resolve_pairs(a_bodies, slots)? else {
            self.stats.pruned += 1;
            return Ok(None);
        };
        if i == self.conj.positives.len() {
            self.stats.disjuncts += 1;
            let choices = ChoiceLog {
                positives: picks.clone(),
                pairs,
            };
            let disjunct = ThetaDisjunct::assemble(self.conj, d.clone(), choices);
            let a: Vec<Formula> = disjunct.a_atoms.iter().map(|x| x.body.clone()).collect();
            let e: Vec<Formula> = disjunct.e_atoms.iter().map(|x| x.body.clone()).collect();
            let model = self
                .checker
                .build(&a, &e)?
                .expect("consistency was checked before assembling");
            return Ok(Some(DisjunctModel { disjunct, model }));
        }
        let pos = &self.conj.positives[i];
        let options: &[PositiveChoice] = match self.opts.mutation {
            Mutation::ForceVacuous => &[PositiveChoice::Vacuous],
            _ => &[PositiveChoice::Reach, PositiveChoice::Vacuous],
        };
        for &choice in options {
            match choice {
                PositiveChoice::Reach => e_bodies.push(pos.post.clone()),
                PositiveChoice::Vacuous => a_bodies.push(Formula::not(pos.pre.clone())),
            }
            picks.push(choice);
            let found = self.positives(i + 1, a_bodies, e_bodies, picks, slots, d)?;
            picks.pop();
            match choice {
                PositiveChoice::Reach => e_bodies.pop(),
                PositiveChoice::Vacuous => a_bodies.pop(),
            };
            if found.is_some() {
                return Ok(found);
            }
        }
        Ok(None)
    }

    fn with_d(&mut self, d: &DRelation) -> Result<Option<DisjunctModel>, TranslateError> {
        self.stats.relations_tried += 1;
        let mut e_bodies: Vec<Formula> = self.conj.negatives.iter().map(missed).collect();
        e_bodies.extend(d.pairs().map(|(t, s)| reach_gap(self.conj, t, s)));
        let slots = match self.opts.mutation {
            Mutation::DropClosure => Vec::new(),
            _ => pair_slots(self.conj, d),
        };
        self.positives(
            0,
            &mut Vec::new(),
            &mut e_bodies,
            &mut Vec::new(),
            &slots,
            d,
        )
    }

    /// `D = {(t,s) | ⟦χₜ⟧ ⊄ ⟦ψₛ⟧}` read off a model of `θ⁺ ∧ θ⁻`.
    fn seed(&mut self) -> Result<Option<DRelation>, TranslateError> {
        let n = self.conj.positives.len();
        let unconstrained = closure_complement(n, [])?;
        // θ⁺ ∧ θ⁻ alone is the search with no D atoms and no pair slots.
        let mut e_bodies: Vec<Formula> = self.conj.negatives.iter().map(missed).collect();
        let found = self.positives(
            0,
            &mut Vec::new(),
            &mut e_bodies,
            &mut Vec::new(),
            &[],
            &unconstrained,
        )?;
        let Some(found) = found else {
            return Ok(None);
        };
        let m = &found.model;
        let mut pairs = Vec::new();
        for t in 0..n {
            let post = m.truth_set(&self.conj.positives[t].post);
            for s in 0..n {
                if !post.is_subset(&m.truth_set(&self.conj.positives[s].pre)) {
                    pairs.push((t, s));
                }
            }
        }
        Ok(Some(closure_complement(n, pairs)?))
    }
}

/// Finds a satisfiable disjunct of `θ⁺ ∧ θ⁻ ∧ ⋁_D θ_D`, or `None` if every
/// disjunct is unsatisfiable.
pub fn find_disjunct(
    conj: &AtomConjunction,
    checker: &mut S5Checker,
    opts: &SearchOptions,
    stats: &mut SearchStats,
) -> Result<Option<DisjunctModel>, TranslateError> {
    let n = conj.positives.len();
    let mut search = Search {
        conj,
        checker,
        opts,
        stats,
    };
    // θ⁻ is shared by every disjunct.
    let minus: Vec<Formula> = conj.negatives.iter().map(missed).collect();
    if !search.checker.consistent(&[], &minus)? {
        return Ok(None);
    }
    let mut seeded = None;
    if opts.seed_d {
        seeded = search.seed()?;
        match &seeded {
            None => return Ok(None),
            Some(d) => {
                if let Some(found) = search.with_d(d)? {
                    search.stats.seed_hit = true;
                    return Ok(Some(found));
                }
            }
        }
    }
    for pairs in DSubsets::new(n) {
        let d = closure_complement(n, pairs)?;
        if seeded.as_ref() == Some(&d) {
            continue;
        }
        if let Some(found) = search.with_d(&d)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}
