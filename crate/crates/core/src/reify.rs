//! Reification of higher-arity atoms to binary signatures, and best-effort
//! dereification.
//!
//! An atom `R(t1,..,tn)` with `n >= 3` becomes the star
//! `{R_i(u, t_i) | 1 <= i <= n}` around a fresh hub term `u`: a null in
//! instances, an existential variable in rule heads and queries, a fresh
//! universal variable in rule bodies. Atoms of arity <= 2 are untouched.
//! Hub names are derived from a stable hash of the atom's canonical
//! serialization, which makes reification deterministic and idempotent.

use std::collections::BTreeSet;
use std::sync::Arc;

use indexmap::IndexSet;
use thiserror::Error;

use crate::chase::Bcq;
use crate::datalog::DatalogQuery;
use crate::kernel::{Atom, Instance, KernelError, Signature, Term};
use crate::rules::{Rule, RuleError, RuleSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReifyError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Datalog(#[from] crate::datalog::DatalogError),
}

/// 64-bit FNV-1a; stable across runs and platforms.
fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The binary signature obtained by replacing every predicate of arity >= 3
/// with its star of binary projections.
#[derive(Debug, Clone)]
pub struct ReifiedSignature {
    base: Signature,
    reified: Signature,
    high_arity: BTreeSet<Arc<str>>,
}

impl ReifiedSignature {
    pub fn new(base: &Signature) -> Self {
        let mut reified = Signature::new();
        let mut high_arity = BTreeSet::new();
        for (pred, arity) in base.predicates() {
            if arity >= 3 {
                high_arity.insert(Arc::from(pred));
                for i in 1..=arity {
                    reified
                        .declare(projection_name(pred, i), 2)
                        .expect("fresh projection names are collision-free");
                }
            } else {
                reified.declare(Arc::from(pred), arity).expect("consistent base signature");
            }
        }
        ReifiedSignature { base: base.clone(), reified, high_arity }
    }

    pub fn base(&self) -> &Signature {
        &self.base
    }

    pub fn reified(&self) -> &Signature {
        &self.reified
    }

    pub fn high_arity(&self) -> &BTreeSet<Arc<str>> {
        &self.high_arity
    }
}

/// Name of the i-th binary projection of `pred` (1-based).
pub fn projection_name(pred: &str, i: usize) -> String {
    format!("{pred}_{i}")
}

/// How hub terms are materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HubKind {
    /// Fresh null `u!<hash>` (instances).
    Null,
    /// Fresh variable (rules and queries); the tag keeps body and head hubs
    /// of the same syntactic atom distinct.
    Variable { tag: char },
}

fn hub_term(atom: &Atom, kind: HubKind) -> Term {
    let hash = stable_hash(&atom.to_string());
    match kind {
        HubKind::Null => Term::null(format!("u!{hash:016x}")),
        HubKind::Variable { tag } => Term::variable(format!("u!{tag}!{hash:016x}")),
    }
}

fn reify_atom_with(atom: &Atom, kind: HubKind) -> Vec<Atom> {
    if atom.args().len() <= 2 {
        return vec![atom.clone()];
    }
    let hub = hub_term(atom, kind);
    atom.args()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Atom::new(projection_name(atom.pred(), i + 1), vec![hub.clone(), t.clone()])
        })
        .collect()
}

/// Reifies one atom, with a null hub (instance context).
pub fn reify_atom(atom: &Atom) -> Vec<Atom> {
    reify_atom_with(atom, HubKind::Null)
}

/// Atom-wise reification of an instance.
pub fn reify_instance(inst: &Instance) -> Instance {
    let set: IndexSet<Atom> = inst.atoms().flat_map(reify_atom).collect();
    Instance::from_set(set)
}

/// Reifies a rule: body hubs are fresh universal variables, head hubs join
/// the existential block (they occur in the head only).
pub fn reify_rule(rule: &Rule) -> Result<Rule, ReifyError> {
    let body: Vec<Atom> = rule
        .body()
        .iter()
        .flat_map(|a| reify_atom_with(a, HubKind::Variable { tag: 'b' }))
        .collect();
    let head: Vec<Atom> = rule
        .head()
        .iter()
        .flat_map(|a| reify_atom_with(a, HubKind::Variable { tag: 'h' }))
        .collect();
    Ok(Rule::new(rule.label().to_string(), body, head)?)
}

pub fn reify_ruleset(rules: &RuleSet) -> Result<RuleSet, ReifyError> {
    let reified: Result<Vec<Rule>, ReifyError> = rules.rules().iter().map(reify_rule).collect();
    Ok(RuleSet::new(reified?)?)
}

/// Reifies a Boolean CQ; hubs are fresh (existential) variables.
pub fn reify_cq(q: &Bcq) -> Bcq {
    Bcq::new(
        q.atoms
            .iter()
            .flat_map(|a| reify_atom_with(a, HubKind::Variable { tag: 'q' }))
            .collect(),
    )
}

/// Reifies a datalog query: EDB body atoms only; IDB atoms are unaltered
/// (they are already part of the query's own vocabulary).
pub fn reify_datalog(q: &DatalogQuery) -> Result<DatalogQuery, ReifyError> {
    let rules: Result<Vec<Rule>, ReifyError> = q
        .rules()
        .rules()
        .iter()
        .map(|rule| {
            let body: Vec<Atom> = rule
                .body()
                .iter()
                .flat_map(|a| {
                    if q.is_idb(a.pred()) {
                        vec![a.clone()]
                    } else {
                        reify_atom_with(a, HubKind::Variable { tag: 'b' })
                    }
                })
                .collect();
            Ok(Rule::new(rule.label().to_string(), body, rule.head().to_vec())?)
        })
        .collect();
    Ok(DatalogQuery::new(RuleSet::new(rules?)?, q.goal().to_string())?)
}

/// Best-effort inverse: keeps arity <= 2 atoms of the base signature and
/// reassembles `R(t1,..,tn)` from every complete projection star.
pub fn dereify_instance(inst: &Instance, sig: &ReifiedSignature) -> Instance {
    let mut set: IndexSet<Atom> = IndexSet::new();
    for atom in inst.atoms() {
        if sig.base().arity(atom.pred()).is_some_and(|a| a <= 2) {
            set.insert(atom.clone());
        }
    }
    for pred in sig.high_arity() {
        let arity = sig.base().arity(pred).expect("high-arity predicate in base");
        // hub -> per-position argument candidates
        let mut stars: std::collections::BTreeMap<Term, Vec<Vec<Term>>> =
            std::collections::BTreeMap::new();
        for atom in inst.atoms() {
            for i in 1..=arity {
                if atom.pred() == projection_name(pred, i) && atom.args().len() == 2 {
                    let hub = atom.args()[0].clone();
                    let entry = stars.entry(hub).or_insert_with(|| vec![Vec::new(); arity]);
                    let slot = &mut entry[i - 1];
                    if !slot.contains(&atom.args()[1]) {
                        slot.push(atom.args()[1].clone());
                    }
                }
            }
        }
        for (_, positions) in stars {
            if positions.iter().any(|p| p.is_empty()) {
                continue;
            }
            // Cartesian product over per-position candidates.
            let mut tuples: Vec<Vec<Term>> = vec![Vec::new()];
            for pos in &positions {
                let mut next = Vec::new();
                for tuple in &tuples {
                    for t in pos {
                        let mut extended = tuple.clone();
                        extended.push(t.clone());
                        next.push(extended);
                    }
                }
                tuples = next;
            }
            for tuple in tuples {
                set.insert(Atom::new(pred.clone(), tuple));
            }
        }
    }
    Instance::from_set(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{is_isomorphic, Instance};

    fn c(n: &str) -> Term {
        Term::constant(n)
    }
    fn v(n: &str) -> Term {
        Term::variable(n)
    }
    fn inst(atoms: Vec<Atom>) -> Instance {
        Instance::from_atoms(atoms).expect("ground")
    }

    #[test]
    fn binary_atoms_are_untouched() {
        let a = Atom::new("E", vec![c("a"), c("b")]);
        assert_eq!(reify_atom(&a), vec![a]);
    }

    #[test]
    fn ternary_atom_becomes_star() {
        let a = Atom::new("R", vec![c("a"), c("b"), c("c")]);
        let star = reify_atom(&a);
        assert_eq!(star.len(), 3);
        let hub = star[0].args()[0].clone();
        assert!(hub.is_null());
        for (i, t) in [c("a"), c("b"), c("c")].iter().enumerate() {
            assert_eq!(star[i].pred(), projection_name("R", i + 1));
            assert_eq!(star[i].args(), &[hub.clone(), t.clone()]);
        }
    }

    #[test]
    fn reification_is_deterministic() {
        let a = Atom::new("R", vec![c("a"), c("b"), c("c")]);
        assert_eq!(reify_atom(&a), reify_atom(&a));
        let b = Atom::new("R", vec![c("a"), c("b"), c("d")]);
        assert_ne!(reify_atom(&a)[0].args()[0], reify_atom(&b)[0].args()[0]);
    }

    #[test]
    fn reified_signature_splits_predicates() {
        let mut sig = Signature::new();
        sig.declare("E", 2).unwrap();
        sig.declare("R", 3).unwrap();
        let rsig = ReifiedSignature::new(&sig);
        assert_eq!(rsig.reified().arity("E"), Some(2));
        assert_eq!(rsig.reified().arity("R"), None);
        for i in 1..=3 {
            assert_eq!(rsig.reified().arity(&projection_name("R", i)), Some(2));
        }
        assert!(rsig.high_arity().iter().any(|p| p.as_ref() == "R"));
    }

    #[test]
    fn reify_rule_hubs_join_the_right_blocks() {
        // R(v,x,y) -> exists z. R(v,y,z)
        let rule = Rule::new(
            "r",
            vec![Atom::new("R", vec![v("v"), v("x"), v("y")])],
            vec![Atom::new("R", vec![v("v"), v("y"), v("z")])],
        )
        .unwrap();
        let reified = reify_rule(&rule).unwrap();
        assert_eq!(reified.body().len(), 3);
        assert_eq!(reified.head().len(), 3);
        let body_hub = reified.body()[0].args()[0].clone();
        let head_hub = reified.head()[0].args()[0].clone();
        assert!(body_hub.is_variable() && head_hub.is_variable());
        assert_ne!(body_hub, head_hub);
        // The head hub is existential alongside z; the body hub is universal.
        let ex = reified.existential_variables();
        assert!(ex.contains(&head_hub));
        assert!(ex.contains(&v("z")));
        assert!(!ex.contains(&body_hub));
        assert_eq!(reified.frontier(), [v("v"), v("y")].into());
    }

    #[test]
    fn reify_binary_rule_is_identity() {
        let rule = Rule::new(
            "r",
            vec![Atom::new("E", vec![v("x"), v("y")])],
            vec![Atom::new("E", vec![v("y"), v("z")])],
        )
        .unwrap();
        assert_eq!(reify_rule(&rule).unwrap(), rule);
    }

    #[test]
    fn reify_cq_expands_atomwise() {
        let q = Bcq::new(vec![Atom::new("R", vec![v("x"), v("y"), v("z")])]);
        let rq = reify_cq(&q);
        assert_eq!(rq.atoms.len(), 3);
        let hub = rq.atoms[0].args()[0].clone();
        assert!(hub.is_variable());
        assert_eq!(rq.terms().len(), 4);
    }

    #[test]
    fn dereify_full_star() {
        let a = Atom::new("R", vec![c("a"), c("b"), c("c")]);
        let original = inst(vec![a.clone()]);
        let sig = ReifiedSignature::new(&Signature::from_atoms([&a]).unwrap());
        let round = dereify_instance(&reify_instance(&original), &sig);
        assert_eq!(round, original);
    }

    #[test]
    fn dereify_incomplete_star_is_empty() {
        let a = Atom::new("R", vec![c("a"), c("b"), c("c")]);
        let sig = ReifiedSignature::new(&Signature::from_atoms([&a]).unwrap());
        let partial = inst(vec![
            Atom::new(projection_name("R", 1), vec![Term::null("u"), c("a")]),
            Atom::new(projection_name("R", 2), vec![Term::null("u"), c("b")]),
        ]);
        assert!(dereify_instance(&partial, &sig).is_empty());
    }

    #[test]
    fn dereify_reads_positions_not_hub_kind() {
        let a = Atom::new("R", vec![c("x"), c("y"), c("z")]);
        let sig = ReifiedSignature::new(&Signature::from_atoms([&a]).unwrap());
        let star = inst(vec![
            Atom::new(projection_name("R", 1), vec![c("a"), c("b")]),
            Atom::new(projection_name("R", 2), vec![c("a"), c("c")]),
            Atom::new(projection_name("R", 3), vec![c("a"), c("a")]),
        ]);
        let out = dereify_instance(&star, &sig);
        assert_eq!(out, inst(vec![Atom::new("R", vec![c("b"), c("c"), c("a")])]));
    }

    #[test]
    fn round_trip_mixed_arities() {
        let original = inst(vec![
            Atom::new("E", vec![c("a"), c("b")]),
            Atom::new("A", vec![c("a")]),
            Atom::new("R", vec![c("a"), c("b"), c("c")]),
            Atom::new("R", vec![c("b"), c("b"), c("b")]),
            Atom::new("Q", vec![c("a"), c("b"), c("c"), c("d")]),
        ]);
        let sig = ReifiedSignature::new(
            &Signature::from_atoms(original.atoms().collect::<Vec<_>>().into_iter().map(|a| a))
                .unwrap(),
        );
        let reified = reify_instance(&original);
        assert!(reified.atoms().all(|a| a.args().len() <= 2));
        assert_eq!(dereify_instance(&reified, &sig), original);
        // Reification preserves isomorphism-invariant shape deterministically.
        assert!(is_isomorphic(&reified, &reify_instance(&original)));
    }

    #[test]
    fn reify_datalog_leaves_idb_alone() {
        use crate::datalog::DatalogQuery;
        use crate::rules::RuleSet;
        let r1 = Rule::new(
            "r1",
            vec![Atom::new("R", vec![v("x"), v("y"), v("z")])],
            vec![Atom::new("T", vec![v("x"), v("z")])],
        )
        .unwrap();
        let r2 = Rule::new(
            "r2",
            vec![Atom::new("T", vec![v("x"), v("y")])],
            vec![Atom::new("Goal", vec![])],
        )
        .unwrap();
        let q = DatalogQuery::new(RuleSet::new(vec![r1, r2]).unwrap(), "Goal").unwrap();
        let rq = reify_datalog(&q).unwrap();
        let rules = rq.rules().rules();
        assert_eq!(rules[0].body().len(), 3); // EDB atom reified
        assert_eq!(rules[0].head(), &[Atom::new("T", vec![v("x"), v("z")])]);
        assert_eq!(rules[1].body(), &[Atom::new("T", vec![v("x"), v("y")])]);
    }
}
