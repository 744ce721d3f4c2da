//! Terms, atoms, instances, signatures, and homomorphism machinery.
//!
//! Terms come in three disjoint namespaces (constants, nulls, variables) with
//! a global total order (kind first, then name) so that every enumeration in
//! the crate is deterministic. The universal unary predicate `top` is treated
//! as implicitly true of every domain term: a body atom `top(x)` matches any
//! term of the target's active domain, whether or not a `top` fact is stored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use thiserror::Error;

/// Name of the universal unary predicate.
pub const TOP: &str = "top";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("variable {0} may not occur in an instance")]
    VariableInInstance(String),
    #[error("non-constant term {0} may not occur in a database")]
    NonConstantInDatabase(String),
    #[error("predicate {0} used with arity {1} but declared with arity {2}")]
    ArityMismatch(String, usize, usize),
    #[error("keep-set term {0} is not in the active domain")]
    KeepOutsideDomain(String),
}

/// The three kinds of terms, ordered `Constant < Null < Variable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermKind {
    Constant,
    Null,
    Variable,
}

/// A term: a constant, a null, or a variable, identified by kind and name.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Term {
    kind: TermKind,
    name: Arc<str>,
}

impl Term {
    pub fn constant(name: impl Into<Arc<str>>) -> Self {
        Term { kind: TermKind::Constant, name: name.into() }
    }

    pub fn null(name: impl Into<Arc<str>>) -> Self {
        Term { kind: TermKind::Null, name: name.into() }
    }

    pub fn variable(name: impl Into<Arc<str>>) -> Self {
        Term { kind: TermKind::Variable, name: name.into() }
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_constant(&self) -> bool {
        self.kind == TermKind::Constant
    }

    pub fn is_null(&self) -> bool {
        self.kind == TermKind::Null
    }

    pub fn is_variable(&self) -> bool {
        self.kind == TermKind::Variable
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.kind.cmp(&other.kind).then_with(|| self.name.cmp(&other.name))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TermKind::Constant => write!(f, "{}", self.name),
            TermKind::Null => write!(f, "_:{}", self.name),
            TermKind::Variable => write!(f, "{}", self.name),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Predicate arities. Always contains `top` with arity 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    arities: BTreeMap<Arc<str>, usize>,
}

impl Default for Signature {
    fn default() -> Self {
        Self::new()
    }
}

impl Signature {
    pub fn new() -> Self {
        let mut arities = BTreeMap::new();
        arities.insert(Arc::from(TOP), 1);
        Signature { arities }
    }

    /// Declares a predicate, erroring on an arity conflict.
    pub fn declare(&mut self, pred: impl Into<Arc<str>>, arity: usize) -> Result<(), KernelError> {
        let pred = pred.into();
        match self.arities.get(&pred) {
            Some(&a) if a != arity => {
                Err(KernelError::ArityMismatch(pred.to_string(), arity, a))
            }
            _ => {
                self.arities.insert(pred, arity);
                Ok(())
            }
        }
    }

    pub fn arity(&self, pred: &str) -> Option<usize> {
        self.arities.get(pred).copied()
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, usize)> {
        self.arities.iter().map(|(p, &a)| (p.as_ref(), a))
    }

    /// Collects the predicates of a set of atoms into a signature,
    /// erroring on inconsistent arities.
    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Result<Self, KernelError> {
        let mut sig = Signature::new();
        for atom in atoms {
            sig.declare(atom.pred.clone(), atom.args.len())?;
        }
        Ok(sig)
    }
}

/// A predicate applied to a sequence of terms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pred: Arc<str>,
    args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<Arc<str>>, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args }
    }

    pub fn pred(&self) -> &str {
        &self.pred
    }

    pub fn pred_arc(&self) -> Arc<str> {
        self.pred.clone()
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn is_top(&self) -> bool {
        self.pred.as_ref() == TOP
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_variable())
    }

    pub fn variables(&self) -> impl Iterator<Item = &Term> {
        self.args.iter().filter(|t| t.is_variable())
    }

    /// Applies a term substitution to all arguments; unmapped terms stay.
    pub fn substitute(&self, map: &BTreeMap<Term, Term>) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|t| map.get(t).cloned().unwrap_or_else(|| t.clone())).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{arg}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A finite set of variable-free atoms.
///
/// Iteration order is the (deterministic) insertion order; equality is set
/// equality. The active domain `adom` is derived at construction.
#[derive(Clone)]
pub struct Instance {
    atoms: IndexSet<Atom>,
    adom: Vec<Term>,
}

impl Instance {
    pub fn empty() -> Self {
        Instance { atoms: IndexSet::new(), adom: Vec::new() }
    }

    /// Builds an instance, rejecting atoms that contain variables.
    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Result<Self, KernelError> {
        let mut set = IndexSet::new();
        for atom in atoms {
            if let Some(v) = atom.args.iter().find(|t| t.is_variable()) {
                return Err(KernelError::VariableInInstance(v.to_string()));
            }
            set.insert(atom);
        }
        Ok(Self::from_set(set))
    }

    /// Internal constructor from an already variable-free atom set.
    pub(crate) fn from_set(atoms: IndexSet<Atom>) -> Self {
        let mut adom_set = IndexSet::new();
        for atom in &atoms {
            for t in &atom.args {
                adom_set.insert(t.clone());
            }
        }
        let mut adom: Vec<Term> = adom_set.into_iter().collect();
        adom.sort();
        Instance { atoms, adom }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    /// The active domain, sorted under the global term order.
    pub fn adom(&self) -> &[Term] {
        &self.adom
    }

    pub fn in_adom(&self, t: &Term) -> bool {
        self.adom.binary_search(t).is_ok()
    }

    /// Set union of two instances.
    pub fn union(&self, other: &Instance) -> Instance {
        let mut set = self.atoms.clone();
        for atom in &other.atoms {
            set.insert(atom.clone());
        }
        Instance::from_set(set)
    }

    /// The atoms all of whose arguments lie in `keep`.
    pub fn induced_subinstance(&self, keep: &BTreeSet<Term>) -> Result<Instance, KernelError> {
        if let Some(t) = keep.iter().find(|t| !self.in_adom(t)) {
            return Err(KernelError::KeepOutsideDomain(t.to_string()));
        }
        let set: IndexSet<Atom> = self
            .atoms
            .iter()
            .filter(|a| a.args.iter().all(|t| keep.contains(t)))
            .cloned()
            .collect();
        Ok(Instance::from_set(set))
    }

    /// Atoms in deterministic sorted order (for display and goldens).
    pub fn sorted_atoms(&self) -> Vec<Atom> {
        let mut v: Vec<Atom> = self.atoms.iter().cloned().collect();
        v.sort();
        v
    }
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.atoms.len() == other.atoms.len()
            && self.atoms.iter().all(|a| other.atoms.contains(a))
    }
}

impl Eq for Instance {}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.sorted_atoms()).finish()
    }
}

/// An instance whose terms are all constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    inst: Instance,
}

impl Database {
    pub fn from_instance(inst: Instance) -> Result<Self, KernelError> {
        if let Some(t) = inst.adom().iter().find(|t| !t.is_constant()) {
            return Err(KernelError::NonConstantInDatabase(t.to_string()));
        }
        Ok(Database { inst })
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }
}

/// A term-to-term mapping; constants in its domain map to themselves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Homomorphism {
    map: BTreeMap<Term, Term>,
}

impl Homomorphism {
    pub fn new() -> Self {
        Homomorphism { map: BTreeMap::new() }
    }

    pub fn from_map(map: BTreeMap<Term, Term>) -> Self {
        Homomorphism { map }
    }

    /// Constants are implicit fixed points even when absent from the map.
    pub fn apply(&self, t: &Term) -> Term {
        match self.map.get(t) {
            Some(u) => u.clone(),
            None => t.clone(),
        }
    }

    pub fn apply_atom(&self, atom: &Atom) -> Atom {
        Atom::new(atom.pred_arc(), atom.args().iter().map(|t| self.apply(t)).collect())
    }

    pub fn get(&self, t: &Term) -> Option<&Term> {
        self.map.get(t)
    }

    pub fn map(&self) -> &BTreeMap<Term, Term> {
        &self.map
    }

    pub fn into_map(self) -> BTreeMap<Term, Term> {
        self.map
    }

    /// Checks that every atom image is present in the target, with `top`
    /// atoms accepted whenever their argument lies in the target's domain.
    pub fn embeds(&self, source: &[Atom], target: &Instance) -> bool {
        source.iter().all(|a| {
            let img = self.apply_atom(a);
            if img.is_top() {
                target.in_adom(&img.args()[0]) || target.contains(&img)
            } else {
                target.contains(&img)
            }
        })
    }
}

/// Options for the backtracking homomorphism search.
#[derive(Debug, Clone, Copy)]
pub struct MatchOptions {
    /// Treat a source atom `top(x)` as matching every domain term.
    pub implicit_top: bool,
    /// Require the mapping to be injective on the source's mappable terms.
    pub injective: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { implicit_top: true, injective: false }
    }
}

/// Lazily enumerates homomorphisms from `source` into `target` extending
/// `fixed`. Variables and nulls of the source are mappable placeholders;
/// constants must map to themselves.
pub fn find_homomorphisms<'a>(
    source: &[Atom],
    target: &'a Instance,
    fixed: &BTreeMap<Term, Term>,
    options: MatchOptions,
) -> HomIter<'a> {
    HomIter::new(source, target, fixed, options)
}

/// Convenience: does at least one homomorphism exist?
pub fn homomorphism_exists(source: &[Atom], target: &Instance, fixed: &BTreeMap<Term, Term>) -> bool {
    find_homomorphisms(source, target, fixed, MatchOptions::default()).next().is_some()
}

/// True iff homomorphisms exist in both directions (structural matching:
/// explicit atoms only, no implicit `top`).
pub fn hom_equivalent(left: &Instance, right: &Instance) -> bool {
    let strict = MatchOptions { implicit_top: false, injective: false };
    let la: Vec<Atom> = left.atoms().cloned().collect();
    let ra: Vec<Atom> = right.atoms().cloned().collect();
    find_homomorphisms(&la, right, &BTreeMap::new(), strict).next().is_some()
        && find_homomorphisms(&ra, left, &BTreeMap::new(), strict).next().is_some()
}

/// True iff a bijective homomorphism with a homomorphic inverse exists.
pub fn is_isomorphic(left: &Instance, right: &Instance) -> bool {
    if left.len() != right.len() || left.adom().len() != right.adom().len() {
        return false;
    }
    // Constants are fixed points, so the constant parts must agree exactly.
    let lc: BTreeSet<&Term> = left.adom().iter().filter(|t| t.is_constant()).collect();
    let rc: BTreeSet<&Term> = right.adom().iter().filter(|t| t.is_constant()).collect();
    if lc != rc {
        return false;
    }
    let options = MatchOptions { implicit_top: false, injective: true };
    let la: Vec<Atom> = left.atoms().cloned().collect();
    for h in find_homomorphisms(&la, right, &BTreeMap::new(), options) {
        // An injective map of equally many atoms onto equally many atoms is
        // onto; check the inverse is a homomorphism by image counting.
        let image: BTreeSet<Atom> = la.iter().map(|a| h.apply_atom(a)).collect();
        if image.len() == right.len() {
            return true;
        }
    }
    false
}

/// Plan step: which source atom to match next.
struct PlanStep {
    atom: Atom,
}

/// Iterator over homomorphisms, backtracking most-constrained-first.
pub struct HomIter<'a> {
    target: &'a Instance,
    options: MatchOptions,
    plan: Vec<PlanStep>,
    /// Per-depth candidate extensions plus next index to try.
    frames: Vec<(Vec<BTreeMap<Term, Term>>, usize)>,
    /// Assignment stack: base at index 0, one entry pushed per completed frame.
    assignments: Vec<BTreeMap<Term, Term>>,
    by_pred: HashMap<Arc<str>, Vec<&'a Atom>>,
    done: bool,
}

impl<'a> HomIter<'a> {
    fn new(
        source: &[Atom],
        target: &'a Instance,
        fixed: &BTreeMap<Term, Term>,
        options: MatchOptions,
    ) -> Self {
        // A fixed map that moves a constant can never extend to a
        // homomorphism; yield the empty enumeration.
        let mut done = false;
        for (k, v) in fixed {
            if k.is_constant() && k != v {
                done = true;
            }
        }
        if options.injective {
            let values: BTreeSet<&Term> = fixed.values().collect();
            if values.len() != fixed.len() {
                done = true;
            }
        }
        let mut by_pred: HashMap<Arc<str>, Vec<&'a Atom>> = HashMap::new();
        for atom in target.atoms() {
            by_pred.entry(atom.pred_arc()).or_default().push(atom);
        }

        // Static plan: repeatedly pick the atom with the fewest unbound
        // placeholder terms, given the atoms planned so far.
        let mut remaining: Vec<&Atom> = source.iter().collect();
        let mut bound: BTreeSet<Term> = fixed.keys().cloned().collect();
        let mut plan = Vec::with_capacity(source.len());
        while !remaining.is_empty() {
            let (pos, _) = remaining
                .iter()
                .enumerate()
                .min_by_key(|(i, a)| {
                    let unbound = a
                        .args()
                        .iter()
                        .filter(|t| !t.is_constant() && !bound.contains(t))
                        .collect::<BTreeSet<_>>()
                        .len();
                    // Prefer more-constrained atoms; implicit-top atoms with an
                    // unbound argument range over the whole domain, so defer them.
                    let top_penalty = usize::from(a.is_top() && options.implicit_top && unbound > 0);
                    (unbound, top_penalty, *i)
                })
                .expect("remaining nonempty");
            let atom = remaining.remove(pos);
            for t in atom.args() {
                if !t.is_constant() {
                    bound.insert(t.clone());
                }
            }
            plan.push(PlanStep { atom: atom.clone() });
        }

        HomIter {
            target,
            options,
            plan,
            frames: Vec::new(),
            assignments: vec![fixed.clone()],
            by_pred,
            done,
        }
    }

    /// Extensions of `assignment` matching `atom` against the target.
    fn candidates(&self, atom: &Atom, assignment: &BTreeMap<Term, Term>) -> Vec<BTreeMap<Term, Term>> {
        let mut out = Vec::new();
        if atom.is_top() && self.options.implicit_top {
            let arg = &atom.args()[0];
            let resolved = if arg.is_constant() {
                Some(arg.clone())
            } else {
                assignment.get(arg).cloned()
            };
            match resolved {
                Some(t) => {
                    if self.target.in_adom(&t) {
                        out.push(BTreeMap::new());
                    }
                }
                None => {
                    for t in self.target.adom() {
                        if self.options.injective && assignment.values().any(|v| v == t) {
                            continue;
                        }
                        let mut ext = BTreeMap::new();
                        ext.insert(arg.clone(), t.clone());
                        out.push(ext);
                    }
                }
            }
            return out;
        }
        let Some(targets) = self.by_pred.get(atom.pred()) else {
            return out;
        };
        'next: for cand in targets {
            if cand.args().len() != atom.args().len() {
                continue;
            }
            let mut ext: BTreeMap<Term, Term> = BTreeMap::new();
            for (s, t) in atom.args().iter().zip(cand.args()) {
                if s.is_constant() {
                    if s != t {
                        continue 'next;
                    }
                } else if let Some(img) = assignment.get(s).or_else(|| ext.get(s)) {
                    if img != t {
                        continue 'next;
                    }
                } else {
                    if self.options.injective {
                        let used = assignment.values().any(|v| v == t)
                            || ext.values().any(|v| v == t);
                        if used {
                            continue 'next;
                        }
                    }
                    ext.insert(s.clone(), t.clone());
                }
            }
            out.push(ext);
        }
        out
    }
}

impl<'a> Iterator for HomIter<'a> {
    type Item = Homomorphism;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.plan.is_empty() {
            // Empty source: exactly one homomorphism, the base map itself.
            self.done = true;
            return Some(Homomorphism::from_map(self.assignments[0].clone()));
        }
        if self.frames.is_empty() {
            let cands = self.candidates(&self.plan[0].atom, &self.assignments[0].clone());
            self.frames.push((cands, 0));
        }
        // Invariant: assignments.len() == frames.len(), with assignments[i]
        // the partial map before frame i's choice.
        loop {
            let depth = self.frames.len() - 1;
            let (cands, idx) = self.frames.last_mut().expect("frame stack");
            if *idx < cands.len() {
                let ext = cands[*idx].clone();
                *idx += 1;
                let mut assignment = self.assignments[depth].clone();
                assignment.extend(ext);
                if self.frames.len() == self.plan.len() {
                    return Some(Homomorphism::from_map(assignment));
                }
                let next_depth = self.frames.len();
                let cands = self.candidates(&self.plan[next_depth].atom, &assignment);
                self.assignments.push(assignment);
                self.frames.push((cands, 0));
            } else {
                self.frames.pop();
                if self.frames.is_empty() {
                    self.done = true;
                    return None;
                }
                self.assignments.pop();
            }
        }
    }
}

/// A monotone counter handing out fresh null names within one session.
#[derive(Debug, Default)]
pub struct NullFactory {
    counter: u64,
    prefix: String,
}

impl NullFactory {
    pub fn new(prefix: impl Into<String>) -> Self {
        NullFactory { counter: 0, prefix: prefix.into() }
    }

    pub fn fresh(&mut self) -> Term {
        let t = Term::null(format!("{}{}", self.prefix, self.counter));
        self.counter += 1;
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: &str) -> Term {
        Term::constant(n)
    }
    fn nl(n: &str) -> Term {
        Term::null(n)
    }
    fn v(n: &str) -> Term {
        Term::variable(n)
    }
    fn inst(atoms: Vec<Atom>) -> Instance {
        Instance::from_atoms(atoms).expect("ground")
    }

    #[test]
    fn term_order_is_kind_then_name() {
        let mut terms = vec![v("a"), nl("z"), c("b"), c("a"), nl("a")];
        terms.sort();
        assert_eq!(terms, vec![c("a"), c("b"), nl("a"), nl("z"), v("a")]);
    }

    #[test]
    fn term_display_prefixes_nulls() {
        assert_eq!(c("a").to_string(), "a");
        assert_eq!(nl("n1").to_string(), "_:n1");
        assert_eq!(v("x").to_string(), "x");
    }

    #[test]
    fn signature_always_contains_top() {
        let sig = Signature::new();
        assert_eq!(sig.arity(TOP), Some(1));
    }

    #[test]
    fn signature_rejects_arity_conflict() {
        let mut sig = Signature::new();
        sig.declare("E", 2).unwrap();
        assert!(matches!(sig.declare("E", 3), Err(KernelError::ArityMismatch(..))));
    }

    #[test]
    fn instance_rejects_variables() {
        let r = Instance::from_atoms(vec![Atom::new("E", vec![c("a"), v("x")])]);
        assert!(matches!(r, Err(KernelError::VariableInInstance(_))));
    }

    #[test]
    fn database_rejects_nulls() {
        let i = inst(vec![Atom::new("E", vec![c("a"), nl("n")])]);
        assert!(matches!(Database::from_instance(i), Err(KernelError::NonConstantInDatabase(_))));
    }

    #[test]
    fn adom_is_sorted_union_of_arguments() {
        let i = inst(vec![
            Atom::new("E", vec![c("b"), c("a")]),
            Atom::new("E", vec![c("a"), nl("n")]),
        ]);
        assert_eq!(i.adom(), &[c("a"), c("b"), nl("n")]);
    }

    #[test]
    fn single_atom_match() {
        let src = [Atom::new("E", vec![v("x"), v("y")])];
        let tgt = inst(vec![Atom::new("E", vec![c("a"), c("b")])]);
        let homs: Vec<_> =
            find_homomorphisms(&src, &tgt, &BTreeMap::new(), MatchOptions::default()).collect();
        assert_eq!(homs.len(), 1);
        assert_eq!(homs[0].apply(&v("x")), c("a"));
        assert_eq!(homs[0].apply(&v("y")), c("b"));
    }

    #[test]
    fn reflexive_pattern_unsatisfiable() {
        let src = [Atom::new("E", vec![v("x"), v("x")])];
        let tgt = inst(vec![Atom::new("E", vec![c("a"), c("b")])]);
        assert!(!homomorphism_exists(&src, &tgt, &BTreeMap::new()));
    }

    #[test]
    fn grid_corner_match() {
        // Corner of the grid chase: H(a,x10), V(a,x01).
        let src = [
            Atom::new("H", vec![v("x"), v("y")]),
            Atom::new("V", vec![v("x"), v("z")]),
        ];
        let tgt = inst(vec![
            Atom::new("H", vec![c("a"), nl("x10")]),
            Atom::new("V", vec![c("a"), nl("x01")]),
        ]);
        let homs: Vec<_> =
            find_homomorphisms(&src, &tgt, &BTreeMap::new(), MatchOptions::default()).collect();
        assert_eq!(homs.len(), 1);
        assert_eq!(homs[0].apply(&v("x")), c("a"));
        assert_eq!(homs[0].apply(&v("y")), nl("x10"));
        assert_eq!(homs[0].apply(&v("z")), nl("x01"));
    }

    #[test]
    fn identity_fixed_map_detects_containment() {
        let small = inst(vec![Atom::new("E", vec![c("a"), nl("n")])]);
        let big = small.union(&inst(vec![Atom::new("E", vec![nl("n"), nl("n")])]));
        let id: BTreeMap<Term, Term> =
            small.adom().iter().map(|t| (t.clone(), t.clone())).collect();
        let atoms: Vec<Atom> = small.atoms().cloned().collect();
        assert!(homomorphism_exists(&atoms, &big, &id));
        let big_atoms: Vec<Atom> = big.atoms().cloned().collect();
        let id_big: BTreeMap<Term, Term> =
            big.adom().iter().map(|t| (t.clone(), t.clone())).collect();
        assert!(!homomorphism_exists(&big_atoms, &small, &id_big));
    }

    #[test]
    fn implicit_top_matches_domain_without_stored_facts() {
        let src = [Atom::new(TOP, vec![v("x")])];
        let tgt = inst(vec![Atom::new("E", vec![c("a"), c("b")])]);
        let homs: Vec<_> =
            find_homomorphisms(&src, &tgt, &BTreeMap::new(), MatchOptions::default()).collect();
        assert_eq!(homs.len(), 2); // one per domain term
    }

    #[test]
    fn hom_equivalent_collapsing_null() {
        let l = inst(vec![
            Atom::new("E", vec![c("a"), c("b")]),
            Atom::new("E", vec![c("a"), nl("n1")]),
        ]);
        let r = inst(vec![Atom::new("E", vec![c("a"), c("b")])]);
        assert!(hom_equivalent(&l, &r));
    }

    #[test]
    fn hom_equivalent_null_self_loop() {
        // One direction collapses both nulls; the other would need a
        // reflexive edge in the two-null instance, so equivalence fails.
        let l = inst(vec![Atom::new("E", vec![nl("n1"), nl("n2")])]);
        let r = inst(vec![Atom::new("E", vec![nl("n1"), nl("n1")])]);
        let la: Vec<Atom> = l.atoms().cloned().collect();
        let strict = MatchOptions { implicit_top: false, injective: false };
        assert!(find_homomorphisms(&la, &r, &BTreeMap::new(), strict).next().is_some());
        assert!(!hom_equivalent(&l, &r));
    }

    #[test]
    fn hom_equivalent_respects_constants() {
        let l = inst(vec![Atom::new("E", vec![c("a"), c("b")])]);
        let r = inst(vec![Atom::new("E", vec![c("b"), c("a")])]);
        assert!(!hom_equivalent(&l, &r));
    }

    #[test]
    fn isomorphic_up_to_null_renaming() {
        let l = inst(vec![Atom::new("E", vec![nl("n1"), nl("n2")])]);
        let r = inst(vec![Atom::new("E", vec![nl("n3"), nl("n4")])]);
        assert!(is_isomorphic(&l, &r));
    }

    #[test]
    fn isomorphism_fixes_constants() {
        let l = inst(vec![Atom::new("E", vec![c("a"), nl("n1")])]);
        let r = inst(vec![Atom::new("E", vec![c("b"), nl("n1")])]);
        assert!(!is_isomorphic(&l, &r));
    }

    #[test]
    fn two_cycle_not_isomorphic_to_self_loop() {
        let l = inst(vec![
            Atom::new("E", vec![nl("n1"), nl("n2")]),
            Atom::new("E", vec![nl("n2"), nl("n1")]),
        ]);
        let r = inst(vec![Atom::new("E", vec![nl("n1"), nl("n1")])]);
        assert!(!is_isomorphic(&l, &r));
    }

    #[test]
    fn induced_subinstance_examples() {
        let i = inst(vec![
            Atom::new("E", vec![c("a"), c("b")]),
            Atom::new("E", vec![c("b"), c("c")]),
        ]);
        let keep: BTreeSet<Term> = [c("a"), c("b")].into();
        let sub = i.induced_subinstance(&keep).unwrap();
        assert_eq!(sub, inst(vec![Atom::new("E", vec![c("a"), c("b")])]));
        let all: BTreeSet<Term> = i.adom().iter().cloned().collect();
        assert_eq!(i.induced_subinstance(&all).unwrap(), i);
        let tern = inst(vec![Atom::new("R", vec![c("a"), c("b"), c("c")])]);
        assert!(tern.induced_subinstance(&keep).unwrap().is_empty());
        let bogus: BTreeSet<Term> = [c("zzz")].into();
        assert!(i.induced_subinstance(&bogus).is_err());
    }

    #[test]
    fn injective_search_rejects_collapses() {
        let src = [
            Atom::new("E", vec![v("x"), v("y")]),
            Atom::new("E", vec![v("y"), v("z")]),
        ];
        let tgt = inst(vec![Atom::new("E", vec![nl("n"), nl("n")])]);
        let strict = MatchOptions { implicit_top: false, injective: true };
        assert!(find_homomorphisms(&src, &tgt, &BTreeMap::new(), strict).next().is_none());
        assert!(homomorphism_exists(&src, &tgt, &BTreeMap::new()));
    }

    #[test]
    fn empty_source_yields_exactly_one_hom() {
        let tgt = inst(vec![Atom::new("E", vec![c("a"), c("b")])]);
        let homs: Vec<_> =
            find_homomorphisms(&[], &tgt, &BTreeMap::new(), MatchOptions::default()).collect();
        assert_eq!(homs.len(), 1);
    }

    #[test]
    fn null_factory_is_monotone() {
        let mut f = NullFactory::new("n");
        assert_eq!(f.fresh(), nl("n0"));
        assert_eq!(f.fresh(), nl("n1"));
    }
}
