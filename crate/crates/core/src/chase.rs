//! Trigger enumeration, Skolem chase, and bounded BCQ entailment.
//!
//! The Skolem chase names each existential witness by rule label, variable,
//! and frontier image, so trigger re-application is idempotent and the
//! parallel one-step application `one_step` is order-independent. `chase_k`
//! iterates the step `k` times breadth-first; `entails_bcq` is the positive
//! semi-decision procedure: it reports the first step at which the query
//! maps into the chase, or `UnknownAtBudget` (never a refutation).

use std::collections::BTreeMap;

use indexmap::IndexSet;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::kernel::{
    find_homomorphisms, Atom, Database, Homomorphism, Instance, MatchOptions, Term,
};
use crate::rules::RuleSet;

/// Default ceiling on the number of atoms a chase may produce.
pub const DEFAULT_ATOM_CAP: usize = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChaseError {
    #[error("atom cap of {cap} exceeded at chase step {step}")]
    AtomCapExceeded { cap: usize, step: usize },
    #[error("trigger homomorphism does not embed the rule body into the instance")]
    InvalidTrigger,
}

/// A rule index paired with a homomorphism of its body into an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub rule_index: usize,
    pub hom: Homomorphism,
}

/// Chase depth plus the growth-guard atom cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChaseBudget {
    pub depth: usize,
    pub atom_cap: usize,
}

impl ChaseBudget {
    pub fn depth(depth: usize) -> Self {
        ChaseBudget { depth, atom_cap: DEFAULT_ATOM_CAP }
    }

    pub fn with_cap(depth: usize, atom_cap: usize) -> Self {
        ChaseBudget { depth, atom_cap }
    }
}

/// The canonical Skolem null for an existential variable of a fired rule:
/// printable as `z!<rulelabel>!<var>!<t1,...,tn>`, where the `t_i` are the
/// images of the frontier variables in sorted variable order.
pub fn skolem_null(rule_label: &str, var: &Term, frontier_images: &[Term]) -> Term {
    let tuple = frontier_images
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",");
    Term::null(format!("z!{}!{}!({})", rule_label, var.name(), tuple))
}

/// All triggers of `rules` in `inst`, in deterministic order
/// (rule index first, then homomorphism enumeration order).
pub fn triggers(inst: &Instance, rules: &RuleSet) -> Vec<Trigger> {
    let mut out = Vec::new();
    for (rule_index, rule) in rules.rules().iter().enumerate() {
        for hom in find_homomorphisms(rule.body(), inst, &BTreeMap::new(), MatchOptions::default())
        {
            out.push(Trigger { rule_index, hom });
        }
    }
    out
}

/// The head atoms produced by a trigger, with existential variables sent to
/// their Skolem nulls.
fn trigger_output(rules: &RuleSet, trigger: &Trigger) -> Vec<Atom> {
    let rule = &rules.rules()[trigger.rule_index];
    let mut map: BTreeMap<Term, Term> = trigger.hom.map().clone();
    let frontier: Vec<Term> = rule.frontier().into_iter().collect();
    let frontier_images: Vec<Term> = frontier.iter().map(|v| trigger.hom.apply(v)).collect();
    for z in rule.existential_variables() {
        let null = skolem_null(rule.label(), &z, &frontier_images);
        map.insert(z, null);
    }
    let ext = Homomorphism::from_map(map);
    rule.head().iter().map(|a| ext.apply_atom(a)).collect()
}

/// Applies one trigger: `inst` together with the instantiated head.
pub fn apply_trigger(inst: &Instance, rules: &RuleSet, trigger: &Trigger) -> Result<Instance, ChaseError> {
    let rule = &rules.rules()[trigger.rule_index];
    if !trigger.hom.embeds(rule.body(), inst) {
        return Err(ChaseError::InvalidTrigger);
    }
    let atoms = trigger_output(rules, trigger);
    let extra = Instance::from_atoms(atoms).expect("rule heads instantiate to ground atoms");
    Ok(inst.union(&extra))
}

/// Parallel one-step application of all triggers.
pub fn one_step(inst: &Instance, rules: &RuleSet) -> Instance {
    one_step_capped(inst, rules, usize::MAX, 0).expect("uncapped")
}

fn one_step_capped(
    inst: &Instance,
    rules: &RuleSet,
    cap: usize,
    step: usize,
) -> Result<Instance, ChaseError> {
    let trigger_list = triggers(inst, rules);
    let produced = produce_atoms(rules, &trigger_list);
    accumulate(inst, produced, cap, step)
}

#[cfg(feature = "parallel")]
fn produce_atoms(rules: &RuleSet, trigger_list: &[Trigger]) -> Vec<Atom> {
    trigger_list
        .par_iter()
        .flat_map_iter(|t| trigger_output(rules, t))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn produce_atoms(rules: &RuleSet, trigger_list: &[Trigger]) -> Vec<Atom> {
    produce_atoms_sequential(rules, trigger_list)
}

fn produce_atoms_sequential(rules: &RuleSet, trigger_list: &[Trigger]) -> Vec<Atom> {
    trigger_list
        .iter()
        .flat_map(|t| trigger_output(rules, t))
        .collect()
}

/// The always-sequential variant of [`one_step`] (benchmark baseline).
pub fn one_step_sequential(inst: &Instance, rules: &RuleSet) -> Instance {
    let trigger_list = triggers(inst, rules);
    let produced = produce_atoms_sequential(rules, &trigger_list);
    accumulate(inst, produced, usize::MAX, 0).expect("uncapped")
}

fn accumulate(
    inst: &Instance,
    produced: Vec<Atom>,
    cap: usize,
    step: usize,
) -> Result<Instance, ChaseError> {
    let mut set: IndexSet<Atom> = inst.atoms().cloned().collect();
    for atom in produced {
        set.insert(atom);
        if set.len() > cap {
            return Err(ChaseError::AtomCapExceeded { cap, step });
        }
    }
    Ok(Instance::from_set(set))
}

/// The `k`-fold iterate of [`one_step`], guarded by the atom cap.
pub fn chase_k(inst: &Instance, rules: &RuleSet, budget: ChaseBudget) -> Result<Instance, ChaseError> {
    let mut current = inst.clone();
    for step in 1..=budget.depth {
        let next = one_step_capped(&current, rules, budget.atom_cap, step)?;
        if next == current {
            return Ok(current); // fixpoint; later steps change nothing
        }
        current = next;
    }
    Ok(current)
}

/// A Boolean conjunctive query: a finite atom set, all variables existential.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bcq {
    pub atoms: Vec<Atom>,
}

impl Bcq {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Bcq { atoms }
    }

    pub fn terms(&self) -> std::collections::BTreeSet<Term> {
        self.atoms.iter().flat_map(|a| a.args().iter().cloned()).collect()
    }
}

/// Outcome of bounded BCQ entailment: a semi-decision, never a refutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entailment {
    EntailedAtStep { step: usize, witness: Homomorphism },
    UnknownAtBudget,
}

/// Chases `db` breadth-first up to the budget, reporting the first step at
/// which `q` maps homomorphically into the chase.
pub fn entails_bcq(
    db: &Database,
    rules: &RuleSet,
    q: &Bcq,
    budget: ChaseBudget,
) -> Result<Entailment, ChaseError> {
    let mut current = db.instance().clone();
    for step in 0..=budget.depth {
        if step > 0 {
            let next = one_step_capped(&current, rules, budget.atom_cap, step)?;
            if next == current {
                return Ok(Entailment::UnknownAtBudget); // fixpoint without a match
            }
            current = next;
        }
        if let Some(witness) =
            find_homomorphisms(&q.atoms, &current, &BTreeMap::new(), MatchOptions::default()).next()
        {
            return Ok(Entailment::EntailedAtStep { step, witness });
        }
    }
    Ok(Entailment::UnknownAtBudget)
}
