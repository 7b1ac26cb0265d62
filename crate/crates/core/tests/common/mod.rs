#![allow(dead_code)]

use std::path::PathBuf;

use khsat::{Formula, LtsModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PROPS: [&str; 3] = ["p", "q", "r"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn example_model() -> LtsModel {
    let text = std::fs::read_to_string(fixture("example2_1.json")).unwrap();
    LtsModel::from_json(&text).unwrap()
}

/// 1..=4 states, 0..=2 actions, valuation over p, q, r.
pub fn random_model(rng: &mut ChaCha8Rng) -> LtsModel {
    let n = rng.gen_range(1..=4);
    let mut m = LtsModel::with_size(n).unwrap();
    for a in ["a", "b"].iter().take(rng.gen_range(0..=2)) {
        m.declare_action(a);
        for s in 0..n {
            for t in 0..n {
                if rng.gen_bool(0.35) {
                    m.add_transition(a, s, t);
                }
            }
        }
    }
    for p in PROPS {
        m.declare_prop(p);
        for s in 0..n {
            if rng.gen_bool(0.5) {
                m.set_true(p, s);
            }
        }
    }
    m
}

pub fn random_prop(rng: &mut ChaCha8Rng, vars: &[String], depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..12) {
            0 => Formula::Top,
            1 => Formula::Bot,
            _ => Formula::prop(vars[rng.gen_range(0..vars.len())].clone()),
        };
    }
    let a = random_prop(rng, vars, depth - 1);
    match rng.gen_range(0..6) {
        0 => Formula::not(a),
        1 => Formula::and(a, random_prop(rng, vars, depth - 1)),
        2 => Formula::or(a, random_prop(rng, vars, depth - 1)),
        3 => Formula::implies(a, random_prop(rng, vars, depth - 1)),
        4 => Formula::iff(a, random_prop(rng, vars, depth - 1)),
        _ => Formula::not(Formula::and(a, random_prop(rng, vars, depth - 1))),
    }
}

pub fn props() -> Vec<String> {
    PROPS.iter().map(|p| p.to_string()).collect()
}

/// Boolean combination of Kh/A/E atoms with propositional arguments.
pub fn random_subjective(rng: &mut ChaCha8Rng, depth: u32) -> Formula {
    let vars = props();
    if depth == 0 || rng.gen_bool(0.3) {
        let a = random_prop(rng, &vars, 2);
        return match rng.gen_range(0..4) {
            0 => Formula::univ(a),
            1 => Formula::exists(a),
            _ => Formula::kh(a, random_prop(rng, &vars, 2)),
        };
    }
    let a = random_subjective(rng, depth - 1);
    match rng.gen_range(0..4) {
        0 => Formula::not(a),
        1 => Formula::and(a, random_subjective(rng, depth - 1)),
        2 => Formula::or(a, random_subjective(rng, depth - 1)),
        _ => Formula::iff(a, random_subjective(rng, depth - 1)),
    }
}
