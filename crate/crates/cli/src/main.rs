//! Command-line front end for the workbench.
//!
//! Exit codes: 0 ok, 1 usage, 2 parse error, 3 validation error,
//! 4 resource cap. The `RULEBENCH_ATOM_CAP` environment variable overrides
//! the chase and evaluation growth guard.

mod formats;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use formats::*;
use rulebench_core::binarycase::{saturate_disconnected, BinaryCaseError};
use rulebench_core::chase::{chase_k, entails_bcq, Bcq, ChaseBudget, ChaseError, Entailment, DEFAULT_ATOM_CAP};
use rulebench_core::cliquewidth::{
    count_colors, eval_capped, recolor_witness, td_to_cw, validate, with_top_facts, CwError,
};
use rulebench_core::datalog::{eval_datalog, holds, DatalogQuery};
use rulebench_core::gridrw::{
    entails_grid_with, proper_closure, rewrite_capped, GridError, MarkedQuery, DEFAULT_QUERY_CAP,
};
use rulebench_core::kernel::{is_isomorphic, Database, Instance, Signature, Term};
use rulebench_core::reify::{dereify_instance, reify_instance, reify_ruleset, ReifiedSignature};

#[derive(Parser)]
#[command(name = "rulebench", version, about = "Reasoning workbench for existential rules")]
struct Cli {
    /// Emit machine-readable JSON instead of the fact grammar.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Chase a database breadth-first up to a depth.
    Chase {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        depth: usize,
    },
    /// Decide BCQ entailment by a bounded chase (semi-decision).
    Entail {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        depth: usize,
    },
    /// Evaluate a datalog program and report whether the goal holds.
    Datalog {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        goal: String,
    },
    /// Rewrite an instance (or a rule set) over a binary signature with
    /// hub terms.
    Reify {
        #[arg(long, required_unless_present = "rules", conflicts_with = "rules")]
        db: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Invert reification; the base signature is read from a fact file.
    Dereify {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        base: PathBuf,
    },
    /// Evaluate an expression system at an unfolding depth.
    CwEval {
        #[arg(long)]
        expr: PathBuf,
        #[arg(long)]
        unfold: usize,
        /// Also print the coloring, in the coloring grammar.
        #[arg(long)]
        show_coloring: bool,
        /// Check the result against a fact file up to isomorphism.
        #[arg(long)]
        check_iso: Option<PathBuf>,
    },
    /// Convert a tree decomposition into an expression system.
    Td2cw {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        td: PathBuf,
        /// Evaluate the output and check it against the input instance.
        #[arg(long)]
        check: bool,
    },
    /// Rebuild a system so that evaluation carries a prescribed coloring.
    Recolor {
        #[arg(long)]
        expr: PathBuf,
        #[arg(long)]
        coloring: PathBuf,
        #[arg(long)]
        unfold: usize,
    },
    /// Exhaustively rewrite a marked query under the grid rules.
    GridRewrite {
        #[arg(long)]
        query: PathBuf,
        /// Mark these terms (comma separated) in addition to all constants.
        #[arg(long, value_delimiter = ',')]
        mark: Vec<String>,
        /// Mark every term of the query.
        #[arg(long)]
        mark_all: bool,
        #[arg(long, default_value_t = DEFAULT_QUERY_CAP)]
        cap: usize,
    },
    /// Decide BCQ entailment under the grid rules by rewriting.
    GridEntail {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long, default_value_t = DEFAULT_QUERY_CAP)]
        cap: usize,
    },
    /// One saturation round of disconnected binary datalog rules.
    DiscSaturate {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Parse(String),
    Validation(String),
    Resource(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Resource(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Parse(m)
            | CliError::Validation(m)
            | CliError::Resource(m) => m,
        }
    }
}

impl From<ChaseError> for CliError {
    fn from(e: ChaseError) -> Self {
        match e {
            ChaseError::AtomCapExceeded { .. } => CliError::Resource(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<CwError> for CliError {
    fn from(e: CwError) -> Self {
        match e {
            CwError::AtomCapExceeded(_) => CliError::Resource(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::QueryCapExceeded(_) => CliError::Resource(e.to_string()),
            GridError::Chase(c) => c.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<BinaryCaseError> for CliError {
    fn from(e: BinaryCaseError) -> Self {
        match e {
            BinaryCaseError::Rule(r) => CliError::Validation(r.to_string()),
            BinaryCaseError::Cw(c) => c.into(),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parsed<T>(path: &Path, parse: impl Fn(&str) -> Result<T, ParseError>) -> Result<T, CliError> {
    parse(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn atom_cap() -> Result<usize, CliError> {
    match std::env::var("RULEBENCH_ATOM_CAP") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid RULEBENCH_ATOM_CAP value `{s}`"))),
        Err(_) => Ok(DEFAULT_ATOM_CAP),
    }
}

fn fact_list(inst: &Instance) -> Vec<String> {
    inst.sorted_atoms().iter().map(atom_str).collect()
}

fn emit_instance(json: bool, command: &str, inst: &Instance) {
    if json {
        println!("{}", json!({ "command": command, "facts": fact_list(inst), "count": inst.len() }));
    } else {
        print!("{}", instance_str(inst));
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let json = cli.json;
    match cli.cmd {
        Cmd::Chase { rules, db, depth } => {
            let rules = parsed(&rules, parse_rules)?;
            let db = parsed(&db, parse_facts)?;
            let out = chase_k(&db, &rules, ChaseBudget::with_cap(depth, atom_cap()?))?;
            emit_instance(json, "chase", &out);
        }
        Cmd::Entail { rules, db, query, depth } => {
            let rules = parsed(&rules, parse_rules)?;
            let db = Database::from_instance(parsed(&db, parse_facts)?)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let q = Bcq::new(parsed(&query, parse_query)?);
            let budget = ChaseBudget::with_cap(depth, atom_cap()?);
            match entails_bcq(&db, &rules, &q, budget)? {
                Entailment::EntailedAtStep { step, witness } => {
                    let map: BTreeMap<String, String> = witness
                        .map()
                        .iter()
                        .map(|(k, v)| (term_str(k), term_str(v)))
                        .collect();
                    if json {
                        println!(
                            "{}",
                            json!({ "command": "entail", "entailed": true, "step": step, "witness": map })
                        );
                    } else {
                        println!("ENTAILED at step {step}");
                        for (k, v) in map {
                            println!("  {k} -> {v}");
                        }
                    }
                }
                Entailment::UnknownAtBudget => {
                    if json {
                        println!(
                            "{}",
                            json!({ "command": "entail", "entailed": false, "step": null, "witness": null })
                        );
                    } else {
                        println!("UNKNOWN at depth {depth}");
                    }
                }
            }
        }
        Cmd::Datalog { rules, db, goal } => {
            let rules = parsed(&rules, parse_rules)?;
            let db = parsed(&db, parse_facts)?;
            let q = DatalogQuery::new(rules, goal)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let idb = eval_datalog(&db, &q).map_err(|e| CliError::Validation(e.to_string()))?;
            let goal_holds = holds(&db, &q).map_err(|e| CliError::Validation(e.to_string()))?;
            if json {
                println!(
                    "{}",
                    json!({ "command": "datalog", "facts": fact_list(&idb), "holds": goal_holds })
                );
            } else {
                print!("{}", instance_str(&idb));
                println!("{}", if goal_holds { "HOLDS" } else { "NOT-HOLDS" });
            }
        }
        Cmd::Reify { db, rules } => {
            if let Some(rules) = rules {
                let out = reify_ruleset(&parsed(&rules, parse_rules)?)
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                if json {
                    println!("{}", json!({ "command": "reify", "rules": ruleset_str(&out) }));
                } else {
                    print!("{}", ruleset_str(&out));
                }
            } else {
                let db = parsed(&db.expect("clap enforces one input"), parse_facts)?;
                emit_instance(json, "reify", &reify_instance(&db));
            }
        }
        Cmd::Dereify { db, base } => {
            let db = parsed(&db, parse_facts)?;
            let base = parsed(&base, parse_facts)?;
            let sig = Signature::from_atoms(base.atoms())
                .map_err(|e| CliError::Validation(e.to_string()))?;
            emit_instance(json, "dereify", &dereify_instance(&db, &ReifiedSignature::new(&sig)));
        }
        Cmd::CwEval { expr, unfold, show_coloring, check_iso } => {
            let system = parsed(&expr, parse_cwexpr)?;
            let issues = validate(&system);
            if !issues.is_empty() {
                let msgs: Vec<String> =
                    issues.iter().map(|i| format!("{}: {}", i.path, i.message)).collect();
                return Err(CliError::Validation(msgs.join("; ")));
            }
            let ci = eval_capped(&system, unfold, atom_cap()?)?;
            let iso_ok = match &check_iso {
                Some(path) => Some(is_isomorphic(ci.instance(), &parsed(path, parse_facts)?)),
                None => None,
            };
            if json {
                let coloring: BTreeMap<String, String> = ci
                    .coloring()
                    .iter()
                    .map(|(t, c)| (term_str(t), c.to_string()))
                    .collect();
                println!(
                    "{}",
                    json!({
                        "command": "cw-eval",
                        "facts": fact_list(ci.instance()),
                        "coloring": coloring,
                        "colors": count_colors(&system),
                        "isomorphic": iso_ok,
                    })
                );
            } else {
                print!("{}", instance_str(ci.instance()));
                if show_coloring {
                    print!("{}", coloring_str(ci.coloring()));
                }
                if let Some(ok) = iso_ok {
                    println!("{}", if ok { "ISOMORPHIC" } else { "NOT-ISOMORPHIC" });
                }
            }
            if iso_ok == Some(false) {
                return Err(CliError::Validation(
                    "evaluated instance is not isomorphic to the expected facts".into(),
                ));
            }
        }
        Cmd::Td2cw { db, td, check } => {
            let inst = parsed(&db, parse_facts)?;
            let td = parsed(&td, parse_td_validated)??;
            let system = td_to_cw(&inst, &td)?;
            let iso_ok = if check {
                let ci = eval_capped(&system, 0, atom_cap()?)?;
                Some(is_isomorphic(ci.instance(), &with_top_facts(&inst)))
            } else {
                None
            };
            if json {
                println!(
                    "{}",
                    json!({
                        "command": "td2cw",
                        "system": system_str(&system),
                        "colors": count_colors(&system),
                        "isomorphic": iso_ok,
                    })
                );
            } else {
                print!("{}", system_str(&system));
                if let Some(ok) = iso_ok {
                    println!("{}", if ok { "ISOMORPHIC" } else { "NOT-ISOMORPHIC" });
                }
            }
            if iso_ok == Some(false) {
                return Err(CliError::Validation(
                    "evaluated output is not isomorphic to the input instance".into(),
                ));
            }
        }
        Cmd::Recolor { expr, coloring, unfold } => {
            let system = parsed(&expr, parse_cwexpr)?;
            let lambda2 = parsed(&coloring, parse_coloring)?;
            let out = recolor_witness(&system, &lambda2, unfold)?;
            if json {
                println!(
                    "{}",
                    json!({
                        "command": "recolor",
                        "system": system_str(&out),
                        "colors": count_colors(&out),
                    })
                );
            } else {
                print!("{}", system_str(&out));
            }
        }
        Cmd::GridRewrite { query, mark, mark_all, cap } => {
            let atoms = parsed(&query, parse_query)?;
            let atoms: std::collections::BTreeSet<_> = atoms.into_iter().collect();
            let terms: std::collections::BTreeSet<Term> =
                atoms.iter().flat_map(|a| a.args().iter().cloned()).collect();
            let mut marked: std::collections::BTreeSet<Term> = if mark_all {
                terms.clone()
            } else {
                terms.iter().filter(|t| t.is_constant()).cloned().collect()
            };
            for name in &mark {
                let t = terms
                    .iter()
                    .find(|t| t.name() == name)
                    .ok_or_else(|| CliError::Usage(format!("--mark {name}: no such term")))?;
                marked.insert(t.clone());
            }
            let mq = MarkedQuery::new(atoms, marked)?;
            let result = rewrite_capped(&proper_closure(&mq), cap)?;
            if json {
                let dead: Vec<String> = result.dead.iter().map(marked_query_str).collect();
                let stuck: Vec<String> = result.stuck.iter().map(marked_query_str).collect();
                println!(
                    "{}",
                    json!({ "command": "grid-rewrite", "dead": dead, "stuck": stuck })
                );
            } else {
                println!("DEAD {}", result.dead.len());
                for q in &result.dead {
                    println!("  {}", marked_query_str(q));
                }
                println!("STUCK {}", result.stuck.len());
                for q in &result.stuck {
                    println!("  {}", marked_query_str(q));
                }
            }
        }
        Cmd::GridEntail { db, query, cap } => {
            let db = Database::from_instance(parsed(&db, parse_facts)?)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let q = Bcq::new(parsed(&query, parse_query)?);
            let out = entails_grid_with(&db, &q, cap, atom_cap()?)?;
            if json {
                println!(
                    "{}",
                    json!({
                        "command": "grid-entail",
                        "entailed": out.entailed,
                        "chase_fallback": out.used_chase_fallback,
                    })
                );
            } else {
                let verdict = if out.entailed { "ENTAILED" } else { "NOT-ENTAILED" };
                let note = if out.used_chase_fallback { " (chase fallback used)" } else { "" };
                println!("{verdict}{note}");
            }
        }
        Cmd::DiscSaturate { rules, db } => {
            let rules = parsed(&rules, parse_rules)?;
            let db = parsed(&db, parse_facts)?;
            emit_instance(json, "disc-saturate", &saturate_disconnected(&db, &rules)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
