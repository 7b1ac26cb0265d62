//! Command-line front end.
//!
//! Exit codes: 0 satisfiable / success, 1 unsatisfiable / nothing found /
//! disagreements, 2 input error, 3 internal soundness error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::lts::LtsModel;
use crate::oracle::{fuzz, oracle_sat, FuzzConfig, FuzzMode, OracleBounds};
use crate::solver::{branch_atoms, Solver, SolverError, Verdict, VerdictReport};
use crate::syntax::{desugar, parse, AtomConjunction, Formula, KhPair};
use crate::translate::{closure_complement, theta_d, theta_minus, theta_plus};

pub const EXIT_SAT: u8 = 0;
pub const EXIT_UNSAT: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_UNSOUND: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "khsat",
    version,
    about = "Knowing-how logic: satisfiability and model checking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write a Graphviz description of the loaded or extracted model.
    #[arg(long, global = true, value_name = "PATH")]
    pub dot: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel subcommands.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide satisfiability of the formula in FILE.
    Sat { file: PathBuf },
    /// Evaluate FORMULA on the model in MODEL (prefix FORMULA with `@` to
    /// read it from a file).
    Mc {
        model: PathBuf,
        formula: String,
        /// Only consider witness plans up to this length.
        #[arg(long)]
        depth_limit: Option<usize>,
    },
    /// Print the equisatisfiable translations of the formula in FILE.
    Translate {
        file: PathBuf,
        /// 1-based pairs of D, e.g. "(1,1),(2,1)".
        #[arg(long = "d", value_name = "PAIRS")]
        d: Option<String>,
    },
    /// Bounded brute-force search for a model of the formula in FILE.
    Oracle {
        file: PathBuf,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
    /// Differential test of the solver against the oracle.
    Fuzz {
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Formula)]
        mode: ModeArg,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = 3)]
    pub max_states: usize,
    #[arg(long, default_value_t = 2)]
    pub max_actions: usize,
    /// Comma-separated proposition symbols; defaults to the formula's own
    /// (or p,q,r when fuzzing).
    #[arg(long, value_delimiter = ',')]
    pub props: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Formula,
    Positive,
    Negative,
    Mixed,
}

impl From<ModeArg> for FuzzMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Formula => FuzzMode::Formula,
            ModeArg::Positive => FuzzMode::Positive,
            ModeArg::Negative => FuzzMode::Negative,
            ModeArg::Mixed => FuzzMode::Mixed,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn read_formula(path: &Path) -> Result<Formula, Failure> {
    parse(&read(path)?).map_err(|e| input_error(format!("{}:{e}", path.display())))
}

fn read_model(path: &Path) -> Result<LtsModel, Failure> {
    LtsModel::from_json(&read(path)?).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn write_dot(cli: &Cli, model: &LtsModel) -> Result<(), Failure> {
    if let Some(path) = &cli.dot {
        fs::write(path, model.to_dot())
            .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs one command, writing results to `out` and diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<u8, Failure> {
    let io = |e: std::io::Error| input_error(format!("write failed: {e}"));
    match &cli.command {
        Command::Sat { file } => {
            let phi = read_formula(file)?;
            let verdict = match Solver::default().decide(&phi) {
                Ok(v) => v,
                Err(SolverError::Unsound(m)) => {
                    return Err(Failure {
                        code: EXIT_UNSOUND,
                        message: m,
                    })
                }
                Err(e) => return Err(input_error(e.to_string())),
            };
            if let Some(c) = verdict.certificate() {
                write_dot(cli, &c.model)?;
            }
            if cli.json {
                let text = serde_json::to_string_pretty(&VerdictReport::new(&verdict))
                    .expect("serializable");
                writeln!(out, "{text}").map_err(io)?;
            } else {
                print_verdict(&verdict, out).map_err(io)?;
            }
            Ok(if verdict.is_sat() {
                EXIT_SAT
            } else {
                EXIT_UNSAT
            })
        }
        Command::Mc {
            model,
            formula,
            depth_limit,
        } => {
            let m = read_model(model)?;
            let phi = match formula.strip_prefix('@') {
                Some(path) => read_formula(Path::new(path))?,
                None => parse(formula).map_err(|e| input_error(format!("formula:{e}")))?,
            };
            write_dot(cli, &m)?;
            let truth = m.model_check_bounded(&phi, *depth_limit);
            let names: Vec<&str> = truth.iter().map(|i| m.state_names()[i].as_str()).collect();
            let witness = match &phi {
                Formula::Kh(pre, post) => m.check_kh_bounded(
                    &m.model_check_bounded(pre, *depth_limit),
                    &m.model_check_bounded(post, *depth_limit),
                    *depth_limit,
                ),
                _ => None,
            };
            if cli.json {
                let v = json!({ "truth_set": names, "witness": witness });
                writeln!(out, "{}", serde_json::to_string_pretty(&v).unwrap()).map_err(io)?;
            } else {
                writeln!(out, "truth set: {{{}}}", names.join(", ")).map_err(io)?;
                if let Some(w) = witness {
                    writeln!(out, "witness: {w}").map_err(io)?;
                }
            }
            Ok(EXIT_SAT)
        }
        Command::Translate { file, d } => {
            let phi = read_formula(file)?;
            translate(&phi, d.as_deref(), cli.json, out)
        }
        Command::Oracle { file, bounds } => {
            let phi = read_formula(file)?;
            let props = bounds
                .props
                .clone()
                .unwrap_or_else(|| phi.props().into_iter().collect());
            let b = OracleBounds::new(bounds.max_states, bounds.max_actions, props);
            let found = oracle_sat(&phi, &b).map_err(|e| input_error(e.to_string()))?;
            if let Some(m) = &found {
                write_dot(cli, m)?;
            }
            if cli.json {
                let model = found.as_ref().map(crate::lts::ModelJson::from_model);
                let v = json!({ "found": found.is_some(), "bounds": b, "model": model });
                writeln!(out, "{}", serde_json::to_string_pretty(&v).unwrap()).map_err(io)?;
            } else {
                match &found {
                    Some(m) => writeln!(out, "model found\n{}", m.to_json()),
                    None => writeln!(out, "no model within bounds"),
                }
                .map_err(io)?;
            }
            Ok(if found.is_some() {
                EXIT_SAT
            } else {
                EXIT_UNSAT
            })
        }
        Command::Fuzz {
            trials,
            mode,
            bounds,
        } => {
            let props = bounds
                .props
                .clone()
                .unwrap_or_else(|| vec!["p".into(), "q".into(), "r".into()]);
            let mut cfg = FuzzConfig::new(cli.seed, *trials, (*mode).into());
            cfg.bounds = OracleBounds::new(bounds.max_states, bounds.max_actions, props);
            cfg.threads = cli.threads;
            let report = fuzz(&cfg);
            for d in &report.disagreements {
                writeln!(out, "{}", serde_json::to_string(d).unwrap()).map_err(io)?;
            }
            let summary = json!({
                "trials": report.trials,
                "solver_sat": report.solver_sat,
                "solver_unsat": report.solver_unsat,
                "oracle_sat": report.oracle_sat,
                "disagreements": report.disagreements.len(),
            });
            writeln!(out, "{summary}").map_err(io)?;
            Ok(if report.disagreements.is_empty() {
                EXIT_SAT
            } else {
                EXIT_UNSAT
            })
        }
    }
}

fn print_verdict(v: &Verdict, out: &mut dyn Write) -> std::io::Result<()> {
    match v {
        Verdict::Unsat(stats) => writeln!(
            out,
            "UNSAT ({} branches, {} disjuncts explored)",
            stats.branches_explored, stats.disjuncts_explored
        ),
        Verdict::Sat(c) => {
            writeln!(out, "SAT")?;
            writeln!(
                out,
                "branch {}: φ_cur = {}",
                c.branch_index, c.branch.phi_cur
            )?;
            for p in &c.branch.conj.positives {
                writeln!(out, "  + {}", p.to_formula())?;
            }
            for n in &c.branch.conj.negatives {
                writeln!(out, "  - {}", Formula::not(n.to_formula()))?;
            }
            writeln!(out, "disjunct: {}", c.disjunct.d)?;
            for a in c.disjunct.atoms() {
                writeln!(out, "  {a}")?;
            }
            writeln!(out, "witnesses:")?;
            for (i, plan) in &c.witnesses {
                writeln!(out, "  {i}: {plan}")?;
            }
            writeln!(out, "model:\n{}", c.model.to_json())
        }
    }
}

/// Reads `φ` as `Kh(ψ,χ) ∧ … ∧ ¬Kh(ψ,χ) ∧ …` with `Kh`-free arguments.
pub fn as_atom_conjunction(phi: &Formula) -> Option<AtomConjunction> {
    fn walk(f: &Formula, conj: &mut AtomConjunction) -> bool {
        match f {
            Formula::And(a, b) => walk(a, conj) && walk(b, conj),
            Formula::Kh(a, b) if a.is_kh_free() && b.is_kh_free() => {
                conj.positives
                    .push(KhPair::new((**a).clone(), (**b).clone()));
                true
            }
            Formula::Not(g) => match &**g {
                Formula::Kh(a, b) if a.is_kh_free() && b.is_kh_free() => {
                    conj.negatives
                        .push(KhPair::new((**a).clone(), (**b).clone()));
                    true
                }
                _ => false,
            },
            _ => false,
        }
    }
    let mut conj = AtomConjunction::default();
    walk(phi, &mut conj).then_some(conj)
}

/// Extracts every integer in `text` and pairs them up (1-based in, 0-based
/// out).
fn parse_pairs(text: &str, n: usize) -> Result<Vec<(usize, usize)>, Failure> {
    let nums: Vec<usize> = text
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().unwrap())
        .collect();
    if nums.len() % 2 != 0 {
        return Err(input_error(format!("odd number of indices in `{text}`")));
    }
    nums.chunks(2)
        .map(|c| {
            if c[0] == 0 || c[1] == 0 || c[0] > n || c[1] > n {
                Err(input_error(format!(
                    "pair ({},{}) outside 1..={n}",
                    c[0], c[1]
                )))
            } else {
                Ok((c[0] - 1, c[1] - 1))
            }
        })
        .collect()
}

fn translate(
    phi: &Formula,
    d: Option<&str>,
    as_json: bool,
    out: &mut dyn Write,
) -> Result<u8, Failure> {
    let io = |e: std::io::Error| input_error(format!("write failed: {e}"));
    let core = desugar(phi);
    let conjs: Vec<(String, AtomConjunction)> = match as_atom_conjunction(&core) {
        Some(c) => vec![("input".into(), c)],
        None => branch_atoms(&core)
            .enumerate()
            .map(|(i, b)| (format!("branch {i}"), b.conj))
            .collect(),
    };
    let mut records = Vec::new();
    for (label, conj) in &conjs {
        let constraints = match d {
            None => None,
            Some(text) => {
                let n = conj.positives.len();
                let rel = closure_complement(n, parse_pairs(text, n)?)
                    .map_err(|e| input_error(e.to_string()))?;
                let cs = theta_d(conj, &rel).map_err(|e| input_error(e.to_string()))?;
                Some((rel, cs))
            }
        };
        if as_json {
            records.push(json!({
                "label": label,
                "conjunction": conj.to_formula().to_string(),
                "theta_plus": theta_plus(&conj.positives).to_string(),
                "theta_minus": theta_minus(&conj.negatives).to_string(),
                "d": constraints.as_ref().map(|(r, _)| r.pairs_one_based()),
                "closure": constraints.as_ref().map(|(r, _)| r.closure_one_based()),
                "theta_d": constraints
                    .as_ref()
                    .map(|(_, cs)| cs.iter().map(|c| c.to_string()).collect::<Vec<_>>()),
            }));
        } else {
            writeln!(out, "# {label}: {}", conj.to_formula()).map_err(io)?;
            writeln!(out, "theta+ = {}", theta_plus(&conj.positives)).map_err(io)?;
            writeln!(out, "theta- = {}", theta_minus(&conj.negatives)).map_err(io)?;
            if let Some((rel, cs)) = &constraints {
                writeln!(out, "{rel}").map_err(io)?;
                for c in cs {
                    writeln!(out, "  {c}").map_err(io)?;
                }
            }
        }
    }
    if as_json {
        writeln!(out, "{}", serde_json::to_string_pretty(&records).unwrap()).map_err(io)?;
    }
    Ok(EXIT_SAT)
}
