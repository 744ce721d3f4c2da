//! First-order rewriting of Boolean conjunctive queries for the fixed
//! grid-generating rule set over `H`, `V` (binary) and `top` (unary).
//!
//! A marked query pairs a CQ with the set of terms required to map to
//! constants. Rewriting eliminates unmarked sink variables one at a time
//! (cut / reduce / merge, by the shape of their incoming atoms) until every
//! surviving query is dead, i.e. fully marked; dead queries evaluate
//! directly on the database. Constant-free queries are always entailed
//! (the loop rule) and skip rewriting entirely.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::chase::{entails_bcq, Bcq, ChaseBudget, ChaseError, Entailment};
use crate::kernel::{find_homomorphisms, Atom, Database, MatchOptions, Term, TOP};
use crate::rules::{Rule, RuleSet};

pub const H: &str = "H";
pub const V: &str = "V";

/// Default ceiling on the number of distinct queries a rewrite may visit.
pub const DEFAULT_QUERY_CAP: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("atom {0} is not over the grid signature")]
    NonGridAtom(String),
    #[error("term {0} is not a maximal variable here")]
    NotMaximal(String),
    #[error("operation precondition violated: {0}")]
    Precondition(String),
    #[error("merge of two distinct constants refutes the branch")]
    MergeRefuted,
    #[error("query cap of {0} exceeded during rewriting")]
    QueryCapExceeded(usize),
    #[error(transparent)]
    Chase(#[from] ChaseError),
}

/// The three grid rules: `loop` (an isolated self-loop cell), `grow` (every
/// term sprouts fresh `H` and `V` successors) and `grid` (cells close).
pub fn grid_rules() -> RuleSet {
    let x = || Term::variable("x");
    let y = || Term::variable("y");
    let x2 = || Term::variable("x2");
    let y2 = || Term::variable("y2");
    let rules = vec![
        Rule::new(
            "loop",
            vec![],
            vec![Atom::new(H, vec![x(), x()]), Atom::new(V, vec![x(), x()])],
        ),
        Rule::new(
            "grow",
            vec![Atom::new(TOP, vec![x()])],
            vec![Atom::new(H, vec![x(), y()]), Atom::new(V, vec![x(), y2()])],
        ),
        Rule::new(
            "grid",
            vec![Atom::new(H, vec![x(), y()]), Atom::new(V, vec![x(), x2()])],
            vec![Atom::new(H, vec![x2(), y2()]), Atom::new(V, vec![y(), y2()])],
        ),
    ];
    RuleSet::new(rules.into_iter().collect::<Result<_, _>>().expect("fixed rules are valid"))
        .expect("fixed signature is consistent")
}

fn check_grid_atom(atom: &Atom) -> Result<(), GridError> {
    let ok = match atom.pred() {
        p if p == H || p == V => atom.args().len() == 2,
        p if p == TOP => atom.args().len() == 1,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(GridError::NonGridAtom(atom.to_string()))
    }
}

fn is_edge(atom: &Atom) -> bool {
    atom.pred() == H || atom.pred() == V
}

/// A CQ over the grid signature together with the set of terms required to
/// map to constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MarkedQuery {
    atoms: BTreeSet<Atom>,
    marked: BTreeSet<Term>,
}

impl MarkedQuery {
    pub fn new(atoms: BTreeSet<Atom>, marked: BTreeSet<Term>) -> Result<Self, GridError> {
        for atom in &atoms {
            check_grid_atom(atom)?;
        }
        let terms: BTreeSet<Term> = atoms.iter().flat_map(|a| a.args().iter().cloned()).collect();
        if let Some(t) = marked.iter().find(|t| !terms.contains(*t)) {
            return Err(GridError::Precondition(format!("marked term {t} not in query")));
        }
        Ok(MarkedQuery { atoms, marked })
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    pub fn marked(&self) -> &BTreeSet<Term> {
        &self.marked
    }

    pub fn terms(&self) -> BTreeSet<Term> {
        self.atoms.iter().flat_map(|a| a.args().iter().cloned()).collect()
    }

    /// Dead: every term is marked. The empty query is dead.
    pub fn is_dead(&self) -> bool {
        self.terms().iter().all(|t| self.marked.contains(t))
    }

    fn edge_count(&self) -> usize {
        self.atoms.iter().filter(|a| is_edge(a)).count()
    }
}

impl fmt::Display for MarkedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms = self.atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
        let marked = self.marked.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ");
        write!(f, "({{{atoms}}}, {{{marked}}})")
    }
}

/// True iff a homomorphism maps the query into the database with exactly the
/// marked terms landing on constants. Databases contain only constants, so
/// this requires the query to be dead.
pub fn eval_marked(db: &Database, mq: &MarkedQuery) -> bool {
    if !mq.is_dead() {
        return false;
    }
    let atoms: Vec<Atom> = mq.atoms.iter().cloned().collect();
    find_homomorphisms(&atoms, db.instance(), &BTreeMap::new(), MatchOptions::default())
        .next()
        .is_some()
}

/// The least marking extending `mq.marked` closed under the five rules:
/// constants are marked; sources of edges into marked terms are marked;
/// directed cycles through a constant are fully marked; co-sources of a
/// same-predicate edge into a common target propagate marks; a target of
/// two distinct constant sources under one predicate is marked.
pub fn proper_closure(mq: &MarkedQuery) -> MarkedQuery {
    let terms: Vec<Term> = mq.terms().into_iter().collect();
    let index: BTreeMap<&Term, usize> = terms.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let n = terms.len();
    // Edge reachability for the cycle rule.
    let mut reach = vec![vec![false; n]; n];
    for atom in &mq.atoms {
        if is_edge(atom) {
            reach[index[&atom.args()[0]]][index[&atom.args()[1]]] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let mut marked = mq.marked.clone();
    for t in &terms {
        if t.is_constant() {
            marked.insert(t.clone());
        }
    }
    for (i, t) in terms.iter().enumerate() {
        if t.is_variable() {
            let on_constant_cycle = terms
                .iter()
                .enumerate()
                .any(|(j, c)| c.is_constant() && reach[i][j] && reach[j][i]);
            if on_constant_cycle {
                marked.insert(t.clone());
            }
        }
    }
    loop {
        let before = marked.len();
        for atom in &mq.atoms {
            if !is_edge(atom) {
                continue;
            }
            let (s, t) = (&atom.args()[0], &atom.args()[1]);
            // Source of an edge into a marked target.
            if marked.contains(t) {
                marked.insert(s.clone());
            }
            for other in &mq.atoms {
                if other.pred() != atom.pred() || !is_edge(other) || other.args()[1] != *t {
                    continue;
                }
                let s2 = &other.args()[0];
                if s2 == s {
                    continue;
                }
                // Co-sources into a common target share marks.
                if marked.contains(s) {
                    marked.insert(s2.clone());
                }
                // Two distinct constant sources force the target.
                if s.is_constant() && s2.is_constant() {
                    marked.insert(t.clone());
                }
            }
        }
        if marked.len() == before {
            break;
        }
    }
    MarkedQuery { atoms: mq.atoms.clone(), marked }
}

/// Unmarked variables without outgoing `H`/`V` edges.
pub fn maximal_variables(mq: &MarkedQuery) -> BTreeSet<Term> {
    let sources: BTreeSet<&Term> = mq
        .atoms
        .iter()
        .filter(|a| is_edge(a))
        .map(|a| &a.args()[0])
        .collect();
    mq.terms()
        .into_iter()
        .filter(|t| t.is_variable() && !mq.marked.contains(t) && !sources.contains(t))
        .collect()
}

/// Shape of a maximal variable's incoming atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaxCase {
    /// Exactly one incoming edge `R(source, x)`.
    OneAtom { source: Term, pred: Arc<str> },
    /// Exactly one incoming `H` and one incoming `V` edge.
    TwoAtoms { h_source: Term, v_source: Term },
    /// Two incoming edges under one predicate from distinct sources.
    Converging { first: Term, second: Term, pred: Arc<str> },
    /// No incoming edges; `x` occurs in `top` atoms only.
    TopOnly,
}

pub fn classify_maximal(mq: &MarkedQuery, x: &Term) -> Result<MaxCase, GridError> {
    if !maximal_variables(mq).contains(x) {
        return Err(GridError::NotMaximal(x.to_string()));
    }
    let incoming: Vec<&Atom> =
        mq.atoms.iter().filter(|a| is_edge(a) && a.args()[1] == *x).collect();
    for pred in [H, V] {
        let sources: Vec<&Term> = incoming
            .iter()
            .filter(|a| a.pred() == pred)
            .map(|a| &a.args()[0])
            .collect();
        if sources.len() >= 2 {
            return Ok(MaxCase::Converging {
                first: sources[0].clone(),
                second: sources[1].clone(),
                pred: Arc::from(pred),
            });
        }
    }
    match incoming.as_slice() {
        [] => Ok(MaxCase::TopOnly),
        [a] => Ok(MaxCase::OneAtom { source: a.args()[0].clone(), pred: a.pred_arc() }),
        [a, b] => {
            let (h, v) = if a.pred() == H { (a, b) } else { (b, a) };
            debug_assert!(h.pred() == H && v.pred() == V);
            Ok(MaxCase::TwoAtoms { h_source: h.args()[0].clone(), v_source: v.args()[0].clone() })
        }
        _ => unreachable!("three or more incoming edges include a converging pair"),
    }
}

fn strip_marking(atoms: BTreeSet<Atom>, marked: &BTreeSet<Term>) -> MarkedQuery {
    let terms: BTreeSet<Term> = atoms.iter().flat_map(|a| a.args().iter().cloned()).collect();
    let marked = marked.iter().filter(|t| terms.contains(*t)).cloned().collect();
    MarkedQuery { atoms, marked }
}

/// Drops the single incoming edge `R(t,x)` (and `top(x)`); if `t` is a
/// constant that vanishes from the remainder, `top(t)` keeps it in the query.
pub fn cut(mq: &MarkedQuery, x: &Term) -> Result<MarkedQuery, GridError> {
    let MaxCase::OneAtom { source, pred } = classify_maximal(mq, x)? else {
        return Err(GridError::Precondition(format!("{x} is not a one-atom sink")));
    };
    let dropped = Atom::new(pred, vec![source.clone(), x.clone()]);
    let mut atoms: BTreeSet<Atom> = mq
        .atoms
        .iter()
        .filter(|a| **a != dropped && !(a.is_top() && a.args()[0] == *x))
        .cloned()
        .collect();
    let still_occurs = atoms.iter().any(|a| a.args().contains(&source));
    if source.is_constant() && !still_occurs {
        atoms.insert(Atom::new(TOP, vec![source.clone()]));
    }
    Ok(proper_closure(&strip_marking(atoms, &mq.marked)))
}

/// Replaces `H(t_H,x), V(t_V,x)` by the crosswise pair `H(x',t_V), V(x',t_H)`
/// with a fresh `x'`, returning the variant with `x'` unmarked and the
/// variant with `x'` marked.
pub fn reduce(mq: &MarkedQuery, x: &Term) -> Result<[MarkedQuery; 2], GridError> {
    let MaxCase::TwoAtoms { h_source, v_source } = classify_maximal(mq, x)? else {
        return Err(GridError::Precondition(format!("{x} is not a two-atom sink")));
    };
    let terms = mq.terms();
    let fresh = (0..)
        .map(|i| Term::variable(format!("x'{i}")))
        .find(|v| !terms.contains(v))
        .expect("unbounded name supply");
    let drop_h = Atom::new(H, vec![h_source.clone(), x.clone()]);
    let drop_v = Atom::new(V, vec![v_source.clone(), x.clone()]);
    let mut atoms: BTreeSet<Atom> = mq
        .atoms
        .iter()
        .filter(|a| **a != drop_h && **a != drop_v && !(a.is_top() && a.args()[0] == *x))
        .cloned()
        .collect();
    atoms.insert(Atom::new(H, vec![fresh.clone(), v_source]));
    atoms.insert(Atom::new(V, vec![fresh.clone(), h_source]));
    let unmarked = proper_closure(&strip_marking(atoms.clone(), &mq.marked));
    let mut marked_set = mq.marked.clone();
    marked_set.insert(fresh);
    let marked = proper_closure(&strip_marking(atoms, &marked_set));
    Ok([unmarked, marked])
}

/// Identifies the two converging sources: substitutes one for the other
/// everywhere and keeps the substituted term alive via a `top` atom. When
/// one side is a constant, the variable is the one substituted away; two
/// distinct constants refute the branch.
pub fn merge(mq: &MarkedQuery, x: &Term, t: &Term, t2: &Term) -> Result<MarkedQuery, GridError> {
    let converging = mq.atoms.iter().any(|a| {
        is_edge(a)
            && a.args()[1] == *x
            && mq.atoms.contains(&Atom::new(a.pred_arc(), vec![
                if a.args()[0] == *t { t2.clone() } else { t.clone() },
                x.clone(),
            ]))
            && (a.args()[0] == *t || a.args()[0] == *t2)
    });
    if t == t2 || !converging || !maximal_variables(mq).contains(x) {
        return Err(GridError::Precondition(format!("{t}, {t2} do not converge on {x}")));
    }
    let (victim, survivor) = if t.is_constant() {
        if t2.is_constant() {
            return Err(GridError::MergeRefuted);
        }
        (t2.clone(), t.clone())
    } else {
        (t.clone(), t2.clone())
    };
    let subst = |term: &Term| if *term == victim { survivor.clone() } else { term.clone() };
    let mut atoms: BTreeSet<Atom> = mq
        .atoms
        .iter()
        .map(|a| Atom::new(a.pred_arc(), a.args().iter().map(subst).collect()))
        .collect();
    atoms.insert(Atom::new(TOP, vec![victim.clone()]));
    let mut marked = mq.marked.clone();
    if marked.contains(&victim) {
        marked.insert(survivor);
    }
    Ok(proper_closure(&strip_marking(atoms, &marked)))
}

/// Removes `top(x)` for a variable occurring in `top` atoms only; sound
/// because chase domains are never empty.
pub fn drop_top(mq: &MarkedQuery, x: &Term) -> Result<MarkedQuery, GridError> {
    let MaxCase::TopOnly = classify_maximal(mq, x)? else {
        return Err(GridError::Precondition(format!("{x} occurs in an edge atom")));
    };
    let atoms: BTreeSet<Atom> = mq
        .atoms
        .iter()
        .filter(|a| !(a.is_top() && a.args()[0] == *x))
        .cloned()
        .collect();
    Ok(proper_closure(&strip_marking(atoms, &mq.marked)))
}

/// Canonical serialization up to variable renaming: variables are grouped
/// by a refined structural invariant, permuted within groups, and the
/// lexicographically least rendering wins. Group sizes stay tiny for the
/// query sizes the rewriter visits.
fn canonical_form(mq: &MarkedQuery) -> String {
    let vars: Vec<Term> =
        mq.terms().into_iter().filter(|t| t.is_variable()).collect();
    let mut key: BTreeMap<Term, String> = vars
        .iter()
        .map(|v| {
            let occ: Vec<String> = mq
                .atoms
                .iter()
                .flat_map(|a| {
                    a.args().iter().enumerate().filter(|(_, t)| *t == v).map(move |(i, _)| {
                        format!("{}#{i}", a.pred())
                    })
                })
                .collect();
            (v.clone(), format!("{}|{occ:?}", mq.marked.contains(v)))
        })
        .collect();
    for _ in 0..2 {
        let prev = key.clone();
        for v in &vars {
            let mut neigh: Vec<String> = mq
                .atoms
                .iter()
                .filter(|a| a.args().contains(v))
                .map(|a| {
                    let others: Vec<String> = a
                        .args()
                        .iter()
                        .map(|t| {
                            if t == v {
                                "self".to_string()
                            } else if t.is_variable() {
                                prev[t].clone()
                            } else {
                                t.to_string()
                            }
                        })
                        .collect();
                    format!("{}({others:?})", a.pred())
                })
                .collect();
            neigh.sort();
            let entry = key.get_mut(v).expect("seeded");
            *entry = format!("{}&{neigh:?}", prev[v]);
        }
    }
    // Group variables by key; orderings permute within groups only.
    let mut groups: BTreeMap<String, Vec<Term>> = BTreeMap::new();
    for v in &vars {
        groups.entry(key[v].clone()).or_default().push(v.clone());
    }
    let groups: Vec<Vec<Term>> = groups.into_values().collect();
    fn permutations(items: &[Term]) -> Vec<Vec<Term>> {
        if items.is_empty() {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for (i, first) in items.iter().enumerate() {
            let rest: Vec<Term> =
                items.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t.clone()).collect();
            for mut tail in permutations(&rest) {
                tail.insert(0, first.clone());
                out.push(tail);
            }
        }
        out
    }
    let mut orderings: Vec<Vec<Term>> = vec![vec![]];
    for group in &groups {
        let perms = permutations(group);
        let mut next = Vec::new();
        for prefix in &orderings {
            for perm in &perms {
                let mut ext = prefix.clone();
                ext.extend(perm.iter().cloned());
                next.push(ext);
            }
        }
        orderings = next;
        if orderings.len() > 20_000 {
            // Give up on full minimization; one fixed ordering still yields
            // a valid (coarser) dedupe key.
            orderings.truncate(1);
        }
    }
    orderings
        .into_iter()
        .map(|order| {
            let rename: BTreeMap<&Term, String> =
                order.iter().enumerate().map(|(i, v)| (v, format!("v{i}"))).collect();
            let show = |t: &Term| rename.get(t).cloned().unwrap_or_else(|| t.to_string());
            let mut atoms: Vec<String> = mq
                .atoms
                .iter()
                .map(|a| {
                    let args: Vec<String> = a.args().iter().map(show).collect();
                    format!("{}({})", a.pred(), args.join(","))
                })
                .collect();
            atoms.sort();
            let mut marks: Vec<String> = mq.marked.iter().map(show).collect();
            marks.sort();
            format!("{}|{}", atoms.join(";"), marks.join(","))
        })
        .min()
        .expect("at least one ordering")
}

/// Result of exhaustive rewriting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteResult {
    /// Fully marked queries; the rewriting of the input.
    pub dead: Vec<MarkedQuery>,
    /// Alive queries without maximal variables (constant-free unmarked
    /// cycles); entailment for these falls back to the chase.
    pub stuck: Vec<MarkedQuery>,
}

pub fn rewrite(mq: &MarkedQuery) -> Result<RewriteResult, GridError> {
    rewrite_capped(mq, DEFAULT_QUERY_CAP)
}

/// Worklist rewriting: while a member is alive, its least maximal variable
/// is eliminated by the operation its incoming atoms dictate. Outputs are
/// deduplicated up to variable renaming.
pub fn rewrite_capped(mq: &MarkedQuery, cap: usize) -> Result<RewriteResult, GridError> {
    let start = proper_closure(mq);
    let mut seen: BTreeSet<String> = BTreeSet::from([canonical_form(&start)]);
    let mut worklist = vec![start];
    let mut dead = Vec::new();
    let mut stuck = Vec::new();
    while let Some(current) = worklist.pop() {
        if current.is_dead() {
            dead.push(current);
            continue;
        }
        let Some(x) = maximal_variables(&current).into_iter().next() else {
            stuck.push(current);
            continue;
        };
        let outputs: Vec<MarkedQuery> = match classify_maximal(&current, &x)? {
            MaxCase::TopOnly => vec![drop_top(&current, &x)?],
            MaxCase::OneAtom { .. } => vec![cut(&current, &x)?],
            MaxCase::TwoAtoms { .. } => reduce(&current, &x)?.into(),
            MaxCase::Converging { first, second, .. } => {
                match merge(&current, &x, &first, &second) {
                    Ok(q) => vec![q],
                    Err(GridError::MergeRefuted) => vec![],
                    Err(e) => return Err(e),
                }
            }
        };
        for out in outputs {
            debug_assert!(
                out.terms().len() <= current.terms().len(),
                "term count must not increase"
            );
            debug_assert!(
                out.edge_count() <= current.edge_count(),
                "edge count must not increase"
            );
            if seen.insert(canonical_form(&out)) {
                if seen.len() > cap {
                    return Err(GridError::QueryCapExceeded(cap));
                }
                worklist.push(out);
            }
        }
    }
    Ok(RewriteResult { dead, stuck })
}

/// Outcome of [`entails_grid`], recording whether the chase fallback for
/// stuck queries decided the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridEntailment {
    pub entailed: bool,
    pub used_chase_fallback: bool,
}

/// Decides BCQ entailment under the grid rules by rewriting.
///
/// Constant-free queries are always entailed (the loop rule supplies a
/// homomorphic image). Otherwise every marking of the query's terms is
/// closed and rewritten; the query is entailed iff some dead member of some
/// rewriting holds in the database. Markings whose rewriting gets stuck are
/// decided by a bounded chase and flagged.
pub fn entails_grid(db: &Database, q: &Bcq) -> Result<GridEntailment, GridError> {
    entails_grid_capped(db, q, DEFAULT_QUERY_CAP)
}

pub fn entails_grid_capped(db: &Database, q: &Bcq, cap: usize) -> Result<GridEntailment, GridError> {
    entails_grid_with(db, q, cap, crate::chase::DEFAULT_ATOM_CAP)
}

/// Like [`entails_grid_capped`], with an explicit atom cap for the chase
/// fallback on stuck queries.
pub fn entails_grid_with(
    db: &Database,
    q: &Bcq,
    cap: usize,
    chase_atom_cap: usize,
) -> Result<GridEntailment, GridError> {
    for atom in &q.atoms {
        check_grid_atom(atom)?;
    }
    let terms: Vec<Term> = q.terms().into_iter().collect();
    if terms.iter().all(|t| !t.is_constant()) {
        return Ok(GridEntailment { entailed: true, used_chase_fallback: false });
    }
    let atoms: BTreeSet<Atom> = q.atoms.iter().cloned().collect();
    let mut closed_markings: BTreeSet<BTreeSet<Term>> = BTreeSet::new();
    for mask in 0..(1u64 << terms.len()) {
        let marking: BTreeSet<Term> = terms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t.clone())
            .collect();
        let mq = MarkedQuery::new(atoms.clone(), marking)?;
        closed_markings.insert(proper_closure(&mq).marked);
    }
    let mut any_stuck = false;
    for marking in closed_markings {
        let mq = MarkedQuery { atoms: atoms.clone(), marked: marking };
        let result = rewrite_capped(&mq, cap)?;
        if result.dead.iter().any(|d| eval_marked(db, d)) {
            return Ok(GridEntailment { entailed: true, used_chase_fallback: false });
        }
        any_stuck |= !result.stuck.is_empty();
    }
    if any_stuck {
        let budget = ChaseBudget::with_cap(terms.len() + 2, chase_atom_cap);
        let entailed = matches!(
            entails_bcq(db, &grid_rules(), q, budget)?,
            Entailment::EntailedAtStep { .. }
        );
        return Ok(GridEntailment { entailed, used_chase_fallback: true });
    }
    Ok(GridEntailment { entailed: false, used_chase_fallback: false })
}
