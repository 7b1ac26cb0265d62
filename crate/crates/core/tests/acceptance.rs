//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p khsat --test acceptance -- --nocapture`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use khsat::oracle::{
    fuzz, oracle_sat, random_formula, FuzzConfig, FuzzMode, GenConfig, OracleBounds,
};
use khsat::s5::{eval_global, GlobalAtom, S5Model};
use khsat::sat::{eval_prop, prop_sat, Assignment};
use khsat::solver::small_model_bound;
use khsat::syntax::KhPair;
use khsat::{decide, parse, verify, Formula, LtsModel, Plan, TruthSet};
use rand::Rng;

use common::*;

fn f(s: &str) -> Formula {
    parse(s).unwrap()
}

fn set(m: &LtsModel, names: &[&str]) -> TruthSet {
    m.states_named(names).unwrap()
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

fn c1() -> Outcome {
    let m = example_model();
    let start = Instant::now();
    let se_eps = m.strongly_executable(&Plan::empty());
    let se_a = m.strongly_executable(&Plan::from_actions(["a"]));
    let se_ab = m.strongly_executable(&Plan::from_actions(["a", "b"]));
    let s = set(&m, &["s"]);
    let r_a = m.apply_plan(&Plan::from_actions(["a"]), &s);
    let r_ab = m.apply_plan(&Plan::from_actions(["a", "b"]), &s);
    let elapsed = start.elapsed();
    ensure(se_eps.is_full(), || format!("SE(ε)={se_eps:?}"))?;
    ensure(se_a == s, || format!("SE(a)={se_a:?}"))?;
    ensure(se_ab.is_empty(), || format!("SE(ab)={se_ab:?}"))?;
    ensure(r_a == set(&m, &["t", "v"]), || format!("R_a(s)={r_a:?}"))?;
    ensure(r_ab == set(&m, &["u"]), || format!("R_ab(s)={r_ab:?}"))?;
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!("SE and R values exact in {elapsed:?}"))
}

fn c2() -> Outcome {
    let m = example_model();
    let pr = m.model_check(&f("Kh(p, r)"));
    ensure(pr.is_full(), || format!("[[Kh(p,r)]]={pr:?}"))?;
    let w = m.kh_witness(&f("p"), &f("r"));
    ensure(w == Some(Plan::from_actions(["a"])), || {
        format!("witness {w:?}")
    })?;
    let pq = m.model_check(&f("Kh(p, q)"));
    ensure(pq.is_empty(), || format!("[[Kh(p,q)]]={pq:?}"))?;
    ensure(m.kh_witness(&f("p"), &f("q")).is_none(), || {
        "unexpected witness for Kh(p,q)".into()
    })?;
    Ok("[[Kh(p,r)]]=S via a, [[Kh(p,q)]]=∅".into())
}

fn c3() -> Outcome {
    let build = |edge: bool| {
        let mut m = LtsModel::new(["s", "t"]).unwrap();
        m.declare_action("a");
        if edge {
            m.add_transition("a", 0, 1);
        }
        m.set_true("p", 0);
        m.set_true("q", 1);
        m
    };
    let (m, m2) = (build(true), build(false));
    let kh = f("Kh(p, q)");
    ensure(m.model_check(&kh).is_full(), || "Kh(p,q) not S on M".into())?;
    ensure(m2.model_check(&kh).is_empty(), || {
        "Kh(p,q) not ∅ on M'".into()
    })?;

    let state = |p: bool, q: bool| Assignment::from([("p".to_string(), p), ("q".to_string(), q)]);
    let s5 = S5Model::from_assignments(&[state(true, false), state(false, true)]);
    let literals = ["p", "~p", "q", "~q", "true", "false"];
    let mut checked = 0;
    for lit in literals {
        for atom in [GlobalAtom::univ(f(lit)), GlobalAtom::exists(f(lit))] {
            let g = atom.to_formula();
            let (a, b) = (m.model_check(&g), m2.model_check(&g));
            ensure(a.is_full() == b.is_full() && a.count() == b.count(), || {
                format!("M and M' differ on {g}")
            })?;
            ensure(eval_global(&s5, &atom) == a.is_full(), || {
                format!("eval_global disagrees on {g}")
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "Kh(p,q) separates M/M'; {checked} global literal atoms agree"
    ))
}

fn c4() -> Outcome {
    let text = std::fs::read_to_string(fixture("example3_1.kh")).unwrap();
    let phi = parse(&text).unwrap();
    let start = Instant::now();
    let v = decide(&phi).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cert = v.certificate().ok_or("UNSAT")?;
    let pos = &cert.branch.conj.positives;
    ensure(pos == &[KhPair::new(f("p & q"), f("r & t"))], || {
        format!("positives {pos:?}")
    })?;
    let negated: Vec<_> = cert
        .branch
        .decisions
        .iter()
        .filter(|(_, v)| !v)
        .map(|(a, _)| a.clone())
        .collect();
    ensure(negated == [KhPair::new(f("p"), f("r"))], || {
        format!("negatives {negated:?}")
    })?;
    let d = cert.disjunct.d.pairs_one_based();
    let c = cert.disjunct.d.closure_one_based();
    ensure(d == [(1, 1)] && c == [(1, 1)], || {
        format!("D={d:?} C={c:?}")
    })?;
    ensure(verify(&v, &phi), || "verify failed".into())?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "SAT, branch +{{Kh(p&q,r&t)}} -{{Kh(p,r)}}, {} in {elapsed:?}",
        cert.disjunct.d
    ))
}

fn c5() -> Outcome {
    let text = std::fs::read_to_string(fixture("contradiction.kh")).unwrap();
    let phi = parse(&text).unwrap();
    let v = decide(&phi).map_err(|e| e.to_string())?;
    ensure(!v.is_sat(), || "solver answered SAT".into())?;
    let start = Instant::now();
    let found = oracle_sat(&phi, &OracleBounds::desk()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(found.is_none(), || "oracle found a model".into())?;
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("UNSAT; oracle sweep empty in {elapsed:?}"))
}

fn c6() -> Outcome {
    let cfg = GenConfig::default();
    let (mut sat, mut worst) = (0, 0.0f64);
    for trial in 0..200 {
        let phi = random_formula(606, trial, &cfg, &props());
        let v = decide(&phi).map_err(|e| format!("{phi}: {e}"))?;
        if let Some(c) = v.certificate() {
            sat += 1;
            let (n, bound) = (c.model.num_states(), small_model_bound(&phi));
            ensure(n <= bound, || format!("{phi}: {n} states > {bound}"))?;
            worst = worst.max(n as f64 / bound as f64);
        }
    }
    Ok(format!("{sat}/200 SAT, max states/bound = {worst:.4}"))
}

fn c7() -> Outcome {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let start = Instant::now();
    let mut parts = Vec::new();
    for (label, mode) in [
        ("positive", FuzzMode::Positive),
        ("negative", FuzzMode::Negative),
        ("mixed", FuzzMode::Mixed),
    ] {
        let mut cfg = FuzzConfig::new(7, 500, mode);
        cfg.threads = threads;
        let r = fuzz(&cfg);
        ensure(r.trials >= 500, || {
            format!("{label}: only {} trials", r.trials)
        })?;
        ensure(r.disagreements.is_empty(), || {
            format!(
                "{label}: {} disagreements, first {:?}",
                r.disagreements.len(),
                r.disagreements[0]
            )
        })?;
        parts.push(format!("{label} {}/{} sat", r.solver_sat, r.trials));
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(600))?;
    Ok(format!(
        "{}; 0 disagreements in {elapsed:?}",
        parts.join(", ")
    ))
}

fn c8() -> Outcome {
    let mut rng = rng(8);
    for _ in 0..1000 {
        let m = random_model(&mut rng);
        ensure(m.strongly_executable(&Plan::empty()).is_full(), || {
            "SE(ε) ≠ S".into()
        })?;
    }
    for _ in 0..1000 {
        let m = random_model(&mut rng);
        let g = random_subjective(&mut rng, 3);
        let t = m.model_check(&g);
        ensure(t.is_empty() || t.is_full(), || {
            format!("{g} is not global: {t:?}")
        })?;
    }
    let vars = props();
    let mut compositions = 0;
    for _ in 0..1000 {
        let m = random_model(&mut rng);
        let [x, y, z] = [0, 1, 2].map(|_| m.model_check(&random_prop(&mut rng, &vars, 2)));
        if let (Some(p1), Some(p2)) = (m.check_kh(&x, &y), m.check_kh(&y, &z)) {
            let joined = p1.concat(&p2);
            ensure(m.is_witness(&joined, &x, &z), || {
                format!("{p1} · {p2} fails")
            })?;
            compositions += 1;
        }
    }
    let cfg = GenConfig::default();
    for trial in 0..200 {
        let g = random_formula(808, trial, &cfg, &vars);
        let a = Formula::univ(g.clone());
        let kh = Formula::kh(Formula::not(g.clone()), Formula::Bot);
        let va = decide(&a).map_err(|e| e.to_string())?.is_sat();
        let vk = decide(&kh).map_err(|e| e.to_string())?.is_sat();
        ensure(va == vk, || format!("verdicts differ on A {g}"))?;
        let m = random_model(&mut rng);
        ensure(m.model_check(&a) == m.model_check(&kh), || {
            format!("truth sets differ on A {g}")
        })?;
    }
    Ok(format!(
        "SE(ε), globality, {compositions} compositions, A/Kh agreement all hold"
    ))
}

fn c9() -> Outcome {
    let mut rng = rng(9);
    let mut sat = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=12);
        let vars: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
        let phi = random_prop(&mut rng, &vars, 6);
        let used: Vec<String> = phi.props().into_iter().collect();
        let brute = (0u32..1 << used.len()).any(|bits| {
            let a: Assignment = used
                .iter()
                .enumerate()
                .map(|(i, p)| (p.clone(), bits >> i & 1 == 1))
                .collect();
            eval_prop(&phi, &a).unwrap()
        });
        let found = prop_sat(&phi).map_err(|e| e.to_string())?;
        ensure(found.is_some() == brute, || format!("disagree on {phi}"))?;
        if let Some(a) = found {
            ensure(eval_prop(&phi, &a).unwrap(), || {
                format!("bad assignment for {phi}")
            })?;
            sat += 1;
        }
    }
    Ok(format!("1000 formulas agree ({sat} SAT)"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 strong executability and plan images", c1),
        ("2 Kh model checking with witness", c2),
        ("3 Kh is not expressible with A", c3),
        ("4 end-to-end satisfiability trace", c4),
        ("5 contradiction is unsatisfiable", c5),
        ("6 small model bound", c6),
        ("7 differential fuzzing of the translations", c7),
        ("8 semantic invariants", c8),
        ("9 propositional backend", c9),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
