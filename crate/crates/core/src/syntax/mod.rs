//! Formula syntax: the AST, desugaring into the core connectives, and the
//! atom machinery the solver uses to split a formula into branches.

mod parser;
mod printer;

pub use parser::{parse, ParseError};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// A formula of the knowing-how language, with the universal modality and
/// the usual propositional abbreviations kept as surface syntax.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formula {
    Prop(String),
    Top,
    Bot,
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Kh(Box<Formula>, Box<Formula>),
    A(Box<Formula>),
    E(Box<Formula>),
}

impl Formula {
    pub fn prop(name: impl Into<String>) -> Self {
        Formula::Prop(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn kh(pre: Formula, post: Formula) -> Self {
        Formula::Kh(Box::new(pre), Box::new(post))
    }

    pub fn univ(f: Formula) -> Self {
        Formula::A(Box::new(f))
    }

    pub fn exists(f: Formula) -> Self {
        Formula::E(Box::new(f))
    }

    /// Left-nested conjunction; the empty conjunction is `Top`.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::Top)
    }

    /// Left-nested disjunction; the empty disjunction is `Bot`.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or(Formula::Bot)
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + match self {
            Formula::Prop(_) | Formula::Top | Formula::Bot => 0,
            Formula::Not(f) | Formula::A(f) | Formula::E(f) => f.size(),
            Formula::Or(a, b)
            | Formula::And(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b)
            | Formula::Kh(a, b) => a.size() + b.size(),
        }
    }

    /// True if the formula contains no `Kh` node. `A`/`E` count as `Kh`
    /// since they abbreviate it.
    pub fn is_kh_free(&self) -> bool {
        self.is_modality_free()
    }

    /// True if the formula contains no `Kh`, `A` or `E` node.
    pub fn is_modality_free(&self) -> bool {
        match self {
            Formula::Prop(_) | Formula::Top | Formula::Bot => true,
            Formula::Not(f) => f.is_modality_free(),
            Formula::Or(a, b)
            | Formula::And(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => a.is_modality_free() && b.is_modality_free(),
            Formula::Kh(..) | Formula::A(_) | Formula::E(_) => false,
        }
    }

    /// True if the formula only uses `Prop`, `Top`, `Bot`, `Not`, `Or`,
    /// `And` and `Kh`.
    pub fn is_desugared(&self) -> bool {
        match self {
            Formula::Prop(_) | Formula::Top | Formula::Bot => true,
            Formula::Not(f) => f.is_desugared(),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Kh(a, b) => {
                a.is_desugared() && b.is_desugared()
            }
            Formula::Implies(..) | Formula::Iff(..) | Formula::A(_) | Formula::E(_) => false,
        }
    }

    /// Proposition symbols occurring in the formula, sorted.
    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Prop(p) => {
                out.insert(p.clone());
            }
            Formula::Top | Formula::Bot => {}
            Formula::Not(f) | Formula::A(f) | Formula::E(f) => f.collect_props(out),
            Formula::Or(a, b)
            | Formula::And(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b)
            | Formula::Kh(a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
        }
    }
}

/// Negation that folds constants and double negations.
pub fn negate(f: Formula) -> Formula {
    match f {
        Formula::Top => Formula::Bot,
        Formula::Bot => Formula::Top,
        Formula::Not(inner) => *inner,
        other => Formula::not(other),
    }
}

/// Rewrites `A`, `E`, `->` and `<->` into `Prop`, `Top`, `Bot`, `Not`, `Or`,
/// `And` and `Kh`.
///
/// `A f` becomes `Kh(~f, false)` and `E f` becomes `~Kh(f, false)`, with
/// constant and double-negation folding on the negated body only.
pub fn desugar(f: &Formula) -> Formula {
    match f {
        Formula::Prop(_) | Formula::Top | Formula::Bot => f.clone(),
        Formula::Not(g) => Formula::not(desugar(g)),
        Formula::Or(a, b) => Formula::or(desugar(a), desugar(b)),
        Formula::And(a, b) => Formula::and(desugar(a), desugar(b)),
        Formula::Implies(a, b) => Formula::or(Formula::not(desugar(a)), desugar(b)),
        Formula::Iff(a, b) => {
            let (a, b) = (desugar(a), desugar(b));
            Formula::and(
                Formula::or(Formula::not(a.clone()), b.clone()),
                Formula::or(Formula::not(b), a),
            )
        }
        Formula::Kh(a, b) => Formula::kh(desugar(a), desugar(b)),
        Formula::A(g) => Formula::kh(negate(desugar(g)), Formula::Bot),
        Formula::E(g) => Formula::not(Formula::kh(desugar(g), Formula::Bot)),
    }
}

/// The arguments of a `Kh` node whose arguments are themselves `Kh`-free.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KhPair {
    pub pre: Formula,
    pub post: Formula,
}

impl KhPair {
    pub fn new(pre: Formula, post: Formula) -> Self {
        KhPair { pre, post }
    }

    pub fn to_formula(&self) -> Formula {
        Formula::kh(self.pre.clone(), self.post.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// `Kh(pre, post)` or `~Kh(pre, post)` with `Kh`-free arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub polarity: Polarity,
    pub pre: Formula,
    pub post: Formula,
}

impl Atom {
    pub fn new(polarity: Polarity, pair: KhPair) -> Self {
        Atom {
            polarity,
            pre: pair.pre,
            post: pair.post,
        }
    }

    pub fn pair(&self) -> KhPair {
        KhPair::new(self.pre.clone(), self.post.clone())
    }

    pub fn to_formula(&self) -> Formula {
        let kh = self.pair().to_formula();
        match self.polarity {
            Polarity::Positive => kh,
            Polarity::Negative => Formula::not(kh),
        }
    }
}

/// A conjunction of positive atoms (indexed `0..positives.len()`) and
/// negative atoms (indexed separately `0..negatives.len()`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomConjunction {
    pub positives: Vec<KhPair>,
    pub negatives: Vec<KhPair>,
}

impl AtomConjunction {
    pub fn new(positives: Vec<KhPair>, negatives: Vec<KhPair>) -> Self {
        AtomConjunction {
            positives,
            negatives,
        }
    }

    pub fn is_kh_free_inside(&self) -> bool {
        self.positives
            .iter()
            .chain(&self.negatives)
            .all(|p| p.pre.is_kh_free() && p.post.is_kh_free())
    }

    pub fn to_formula(&self) -> Formula {
        let pos = self.positives.iter().map(KhPair::to_formula);
        let neg = self.negatives.iter().map(|p| Formula::not(p.to_formula()));
        Formula::conj(pos.chain(neg))
    }
}

/// Leftmost-innermost `Kh` node whose arguments are `Kh`-free, found by a
/// left-to-right post-order walk. `None` iff the formula is `Kh`-free.
///
/// Expects desugared input; `A`/`E` nodes are not looked through.
pub fn find_positive_atom(f: &Formula) -> Option<KhPair> {
    match f {
        Formula::Prop(_) | Formula::Top | Formula::Bot => None,
        Formula::Not(g) | Formula::A(g) | Formula::E(g) => find_positive_atom(g),
        Formula::Or(a, b) | Formula::And(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            find_positive_atom(a).or_else(|| find_positive_atom(b))
        }
        Formula::Kh(a, b) => find_positive_atom(a)
            .or_else(|| find_positive_atom(b))
            .or_else(|| Some(KhPair::new((**a).clone(), (**b).clone()))),
    }
}

/// All distinct `Kh` nodes with `Kh`-free arguments.
pub fn positive_atoms(f: &Formula) -> BTreeSet<KhPair> {
    fn walk(f: &Formula, out: &mut BTreeSet<KhPair>) {
        match f {
            Formula::Prop(_) | Formula::Top | Formula::Bot => {}
            Formula::Not(g) | Formula::A(g) | Formula::E(g) => walk(g, out),
            Formula::Or(a, b)
            | Formula::And(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Formula::Kh(a, b) => {
                if a.is_kh_free() && b.is_kh_free() {
                    out.insert(KhPair::new((**a).clone(), (**b).clone()));
                } else {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(f, &mut out);
    out
}

/// Replaces every occurrence of `Kh(target.pre, target.post)` by the
/// constant `value` (structural equality).
pub fn substitute_atom(f: &Formula, target: &KhPair, value: bool) -> Formula {
    let sub = |g: &Formula| substitute_atom(g, target, value);
    match f {
        Formula::Prop(_) | Formula::Top | Formula::Bot => f.clone(),
        Formula::Not(g) => Formula::not(sub(g)),
        Formula::A(g) => Formula::univ(sub(g)),
        Formula::E(g) => Formula::exists(sub(g)),
        Formula::Or(a, b) => Formula::or(sub(a), sub(b)),
        Formula::And(a, b) => Formula::and(sub(a), sub(b)),
        Formula::Implies(a, b) => Formula::implies(sub(a), sub(b)),
        Formula::Iff(a, b) => Formula::iff(sub(a), sub(b)),
        Formula::Kh(a, b) => {
            if **a == target.pre && **b == target.post {
                if value {
                    Formula::Top
                } else {
                    Formula::Bot
                }
            } else {
                Formula::kh(sub(a), sub(b))
            }
        }
    }
}
