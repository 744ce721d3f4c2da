//! Semi-naive least-fixpoint evaluation of datalog queries with a
//! distinguished nullary `Goal` predicate.
//!
//! IDB predicates are exactly the rule-head predicates; EDB predicates may
//! never occur in heads, so the split is derived from the program. Evaluation
//! introduces no fresh terms and therefore terminates.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use indexmap::IndexSet;
use thiserror::Error;

use crate::kernel::{find_homomorphisms, Atom, Instance, MatchOptions, Term};
use crate::rules::RuleSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatalogError {
    #[error("rule {0} is not datalog (has existential variables)")]
    NotDatalog(String),
    #[error("goal predicate {0} must be nullary and derived by some rule")]
    BadGoal(String),
    #[error("input contains IDB fact {0}")]
    IdbFactInInput(String),
}

/// A datalog program with an EDB/IDB split and a nullary goal.
#[derive(Debug, Clone)]
pub struct DatalogQuery {
    rules: RuleSet,
    edb: BTreeSet<Arc<str>>,
    idb: BTreeSet<Arc<str>>,
    goal: Arc<str>,
}

impl DatalogQuery {
    /// Builds a query from datalog rules; IDB = head predicates, EDB = the
    /// rest. The goal must be nullary and an IDB predicate.
    pub fn new(rules: RuleSet, goal: impl Into<Arc<str>>) -> Result<Self, DatalogError> {
        let goal = goal.into();
        for rule in rules.rules() {
            if !rule.is_datalog() {
                return Err(DatalogError::NotDatalog(rule.to_string()));
            }
        }
        let mut idb: BTreeSet<Arc<str>> = rules
            .rules()
            .iter()
            .flat_map(|r| r.head().iter().map(|a| a.pred_arc()))
            .collect();
        // The goal is IDB by fiat, so empty or goal-free programs are valid
        // (they simply never derive it).
        idb.insert(goal.clone());
        let edb: BTreeSet<Arc<str>> = rules
            .rules()
            .iter()
            .flat_map(|r| r.body().iter().map(|a| a.pred_arc()))
            .filter(|p| !idb.contains(p))
            .collect();
        if rules.signature().arity(&goal).is_some_and(|a| a != 0) {
            return Err(DatalogError::BadGoal(goal.to_string()));
        }
        Ok(DatalogQuery { rules, edb, idb, goal })
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn edb(&self) -> &BTreeSet<Arc<str>> {
        &self.edb
    }

    pub fn idb(&self) -> &BTreeSet<Arc<str>> {
        &self.idb
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    pub fn is_idb(&self, pred: &str) -> bool {
        self.idb.iter().any(|p| p.as_ref() == pred)
    }
}

/// Unifies a body atom against a ground fact, extending `fixed`.
fn unify(pattern: &Atom, fact: &Atom, fixed: &BTreeMap<Term, Term>) -> Option<BTreeMap<Term, Term>> {
    if pattern.pred() != fact.pred() || pattern.args().len() != fact.args().len() {
        return None;
    }
    let mut map = fixed.clone();
    for (p, f) in pattern.args().iter().zip(fact.args()) {
        if p.is_constant() {
            if p != f {
                return None;
            }
        } else if let Some(bound) = map.get(p) {
            if bound != f {
                return None;
            }
        } else {
            map.insert(p.clone(), f.clone());
        }
    }
    Some(map)
}

/// Least fixpoint of the program over `inst`, restricted to IDB atoms.
pub fn eval_datalog(inst: &Instance, q: &DatalogQuery) -> Result<Instance, DatalogError> {
    for atom in inst.atoms() {
        if q.is_idb(atom.pred()) {
            return Err(DatalogError::IdbFactInInput(atom.to_string()));
        }
    }
    let mut full: IndexSet<Atom> = inst.atoms().cloned().collect();
    let mut full_inst = Instance::from_set(full.clone());

    // Round 0: plain application of every rule.
    let mut delta: Vec<Atom> = Vec::new();
    for rule in q.rules().rules() {
        for hom in
            find_homomorphisms(rule.body(), &full_inst, &BTreeMap::new(), MatchOptions::default())
        {
            for head in rule.head() {
                let fact = hom.apply_atom(head);
                if !full.contains(&fact) && !delta.contains(&fact) {
                    delta.push(fact);
                }
            }
        }
    }

    // Semi-naive rounds: each new derivation uses at least one delta fact.
    while !delta.is_empty() {
        for fact in &delta {
            full.insert(fact.clone());
        }
        full_inst = Instance::from_set(full.clone());
        let mut next: IndexSet<Atom> = IndexSet::new();
        for rule in q.rules().rules() {
            for (i, pivot) in rule.body().iter().enumerate() {
                if !q.is_idb(pivot.pred()) {
                    continue;
                }
                let rest: Vec<Atom> = rule
                    .body()
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, a)| a.clone())
                    .collect();
                for fact in &delta {
                    let Some(seed) = unify(pivot, fact, &BTreeMap::new()) else {
                        continue;
                    };
                    for hom in
                        find_homomorphisms(&rest, &full_inst, &seed, MatchOptions::default())
                    {
                        for head in rule.head() {
                            let derived = hom.apply_atom(head);
                            if !full.contains(&derived) {
                                next.insert(derived);
                            }
                        }
                    }
                }
            }
        }
        delta = next.into_iter().collect();
    }

    let idb_atoms: IndexSet<Atom> =
        full.into_iter().filter(|a| q.is_idb(a.pred())).collect();
    Ok(Instance::from_set(idb_atoms))
}

/// True iff the nullary goal is derivable.
pub fn holds(inst: &Instance, q: &DatalogQuery) -> Result<bool, DatalogError> {
    let result = eval_datalog(inst, q)?;
    let goal_atom = Atom::new(q.goal().to_string(), vec![]);
    Ok(result.contains(&goal_atom))
}
