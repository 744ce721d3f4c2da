//! The decorated-tree expression algebra for colored instances: evaluation,
//! validity checking, color-driven atom insertion, the recoloring
//! construction, and the tree-decomposition-to-expression converter.
//!
//! Expressions are finite ASTs; recursion is expressed through named
//! references in an equation system and resolved by bounded unfolding. A
//! reference at unfolding depth 0 evaluates to the empty colored instance,
//! which makes evaluation a monotone approximation chain in the depth.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use thiserror::Error;

use crate::kernel::{Atom, Instance, Term, TOP};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CwError {
    #[error("unresolved reference {0}")]
    UnresolvedRef(String),
    #[error("atom cap of {0} exceeded during evaluation")]
    AtomCapExceeded(usize),
    #[error("constant {0} introduced by more than one leaf")]
    DuplicateConstant(String),
    #[error("coloring is not total: missing {0}")]
    ColoringNotTotal(String),
    #[error("invalid tree decomposition: {0}")]
    InvalidTreeDecomposition(String),
    #[error("predicate {0} has arity {1}, expected at most 2")]
    NonBinaryPredicate(String, usize),
    #[error("expression system is invalid: {0:?}")]
    Invalid(Vec<ValidationIssue>),
}

/// A structured color: plain names and numbers for user-facing palettes,
/// tuples and sets for colors built by the constructions in this module.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Color {
    Num(usize),
    Name(Arc<str>),
    Tuple(Vec<Color>),
    Set(BTreeSet<Color>),
}

impl Color {
    pub fn num(n: usize) -> Self {
        Color::Num(n)
    }

    pub fn name(s: impl Into<Arc<str>>) -> Self {
        Color::Name(s.into())
    }

    pub fn pair(a: Color, b: Color) -> Self {
        Color::Tuple(vec![a, b])
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Color::Num(n) => write!(f, "{n}"),
            Color::Name(s) => write!(f, "{s}"),
            Color::Tuple(items) => {
                write!(f, "(")?;
                for (i, c) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            Color::Set(items) => {
                write!(f, "{{")?;
                for (i, c) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl fmt::Debug for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A decorated-tree expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CwExpr {
    /// The empty colored instance.
    Void,
    /// A single constant entity with a color.
    ConstLeaf(Term, Color),
    /// A single fresh-null entity with a color.
    NullLeaf(Color),
    /// Inserts `R(e⃗)` for every argument tuple whose colors match.
    Add(Arc<str>, Vec<Color>, Box<CwExpr>),
    /// Rewrites one color to another.
    Recolor(Color, Color, Box<CwExpr>),
    /// Disjoint union.
    Union(Box<CwExpr>, Box<CwExpr>),
    /// Named reference, resolved against the equation system.
    Ref(String),
}

impl CwExpr {
    pub fn add(pred: impl Into<Arc<str>>, colors: Vec<Color>, child: CwExpr) -> CwExpr {
        CwExpr::Add(pred.into(), colors, Box::new(child))
    }

    pub fn recolor(from: Color, to: Color, child: CwExpr) -> CwExpr {
        CwExpr::Recolor(from, to, Box::new(child))
    }

    pub fn union(left: CwExpr, right: CwExpr) -> CwExpr {
        CwExpr::Union(Box::new(left), Box::new(right))
    }
}

/// A finite system of named expressions with a designated root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquationSystem {
    pub defs: BTreeMap<String, CwExpr>,
    pub root: CwExpr,
}

impl EquationSystem {
    pub fn new(defs: BTreeMap<String, CwExpr>, root: CwExpr) -> Self {
        EquationSystem { defs, root }
    }

    pub fn from_root(root: CwExpr) -> Self {
        EquationSystem { defs: BTreeMap::new(), root }
    }
}

/// A validation finding: where, and what.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

/// An instance together with a total coloring of its domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredInstance {
    inst: Instance,
    coloring: BTreeMap<Term, Color>,
}

impl ColoredInstance {
    pub fn new(inst: Instance, coloring: BTreeMap<Term, Color>) -> Result<Self, CwError> {
        for t in inst.adom() {
            if !coloring.contains_key(t) {
                return Err(CwError::ColoringNotTotal(t.to_string()));
            }
        }
        Ok(ColoredInstance { inst, coloring })
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn coloring(&self) -> &BTreeMap<Term, Color> {
        &self.coloring
    }
}

fn walk<'a>(expr: &'a CwExpr, f: &mut impl FnMut(&'a CwExpr)) {
    f(expr);
    match expr {
        CwExpr::Add(_, _, child) | CwExpr::Recolor(_, _, child) => walk(child, f),
        CwExpr::Union(l, r) => {
            walk(l, f);
            walk(r, f);
        }
        _ => {}
    }
}

/// Replaces references by their definitions, `depth` expansions deep;
/// references at depth 0 become `Void`.
pub fn unfold(system: &EquationSystem, depth: usize) -> Result<CwExpr, CwError> {
    fn go(expr: &CwExpr, depth: usize, defs: &BTreeMap<String, CwExpr>) -> Result<CwExpr, CwError> {
        Ok(match expr {
            CwExpr::Void => CwExpr::Void,
            CwExpr::ConstLeaf(t, k) => CwExpr::ConstLeaf(t.clone(), k.clone()),
            CwExpr::NullLeaf(k) => CwExpr::NullLeaf(k.clone()),
            CwExpr::Add(p, ks, child) => {
                CwExpr::Add(p.clone(), ks.clone(), Box::new(go(child, depth, defs)?))
            }
            CwExpr::Recolor(a, b, child) => {
                CwExpr::Recolor(a.clone(), b.clone(), Box::new(go(child, depth, defs)?))
            }
            CwExpr::Union(l, r) => {
                CwExpr::Union(Box::new(go(l, depth, defs)?), Box::new(go(r, depth, defs)?))
            }
            CwExpr::Ref(name) => {
                if depth == 0 {
                    CwExpr::Void
                } else {
                    let def = defs.get(name).ok_or_else(|| CwError::UnresolvedRef(name.clone()))?;
                    go(def, depth - 1, defs)?
                }
            }
        })
    }
    go(&system.root, depth, &system.defs)
}

/// Checks reference resolution, arity/color-tuple agreement, and constant
/// uniqueness within a depth-1 unfolding. Returns all findings.
pub fn validate(system: &EquationSystem) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let mut arities: BTreeMap<Arc<str>, usize> = BTreeMap::new();
    arities.insert(Arc::from(TOP), 1);
    let mut check = |name: &str, expr: &CwExpr, issues: &mut Vec<ValidationIssue>| {
        walk(expr, &mut |node| match node {
            CwExpr::Ref(r) if !system.defs.contains_key(r) => issues.push(ValidationIssue {
                path: name.to_string(),
                message: format!("unresolved reference {r}"),
            }),
            CwExpr::Add(pred, colors, _) => match arities.get(pred.as_ref()) {
                Some(&a) if a != colors.len() => issues.push(ValidationIssue {
                    path: name.to_string(),
                    message: format!(
                        "predicate {pred} used with {} colors but arity {a} elsewhere",
                        colors.len()
                    ),
                }),
                Some(_) => {}
                None => {
                    arities.insert(pred.clone(), colors.len());
                }
            },
            _ => {}
        });
    };
    check("root", &system.root, &mut issues);
    for (name, expr) in &system.defs {
        check(name, expr, &mut issues);
    }
    if let Ok(unfolded) = unfold(system, 1) {
        let mut seen: BTreeSet<Term> = BTreeSet::new();
        walk(&unfolded, &mut |node| {
            if let CwExpr::ConstLeaf(c, _) = node {
                if !seen.insert(c.clone()) {
                    issues.push(ValidationIssue {
                        path: "root".to_string(),
                        message: format!("constant {c} introduced by more than one leaf"),
                    });
                }
            }
        });
    }
    issues
}

/// The set of colors mentioned anywhere in the system.
pub fn colors_of(system: &EquationSystem) -> BTreeSet<Color> {
    let mut out = BTreeSet::new();
    let mut collect = |expr: &CwExpr| {
        walk(expr, &mut |node| match node {
            CwExpr::ConstLeaf(_, k) | CwExpr::NullLeaf(k) => {
                out.insert(k.clone());
            }
            CwExpr::Add(_, ks, _) => {
                for k in ks {
                    out.insert(k.clone());
                }
            }
            CwExpr::Recolor(a, b, _) => {
                out.insert(a.clone());
                out.insert(b.clone());
            }
            _ => {}
        });
    };
    collect(&system.root);
    for expr in system.defs.values() {
        collect(expr);
    }
    out
}

/// Number of distinct colors mentioned anywhere in the system.
pub fn count_colors(system: &EquationSystem) -> usize {
    colors_of(system).len()
}

struct EvalCtx<'a> {
    defs: &'a BTreeMap<String, CwExpr>,
    atoms: IndexSet<Atom>,
    null_counter: u64,
    cap: usize,
    constants_seen: BTreeSet<Term>,
}

impl EvalCtx<'_> {
    fn push(&mut self, atom: Atom) -> Result<(), CwError> {
        self.atoms.insert(atom);
        if self.atoms.len() > self.cap {
            return Err(CwError::AtomCapExceeded(self.cap));
        }
        Ok(())
    }
}

fn eval_expr(
    expr: &CwExpr,
    depth: usize,
    ctx: &mut EvalCtx<'_>,
) -> Result<BTreeMap<Term, Color>, CwError> {
    match expr {
        CwExpr::Void => Ok(BTreeMap::new()),
        CwExpr::ConstLeaf(c, k) => {
            if !ctx.constants_seen.insert(c.clone()) {
                return Err(CwError::DuplicateConstant(c.to_string()));
            }
            ctx.push(Atom::new(TOP, vec![c.clone()]))?;
            Ok(BTreeMap::from([(c.clone(), k.clone())]))
        }
        CwExpr::NullLeaf(k) => {
            let t = Term::null(format!("cw{}", ctx.null_counter));
            ctx.null_counter += 1;
            ctx.push(Atom::new(TOP, vec![t.clone()]))?;
            Ok(BTreeMap::from([(t, k.clone())]))
        }
        CwExpr::Add(pred, colors, child) => {
            let coloring = eval_expr(child, depth, ctx)?;
            // Candidates per position, in sorted term order for determinism.
            let mut tuples: Vec<Vec<Term>> = vec![Vec::new()];
            for want in colors {
                let candidates: Vec<&Term> =
                    coloring.iter().filter(|(_, c)| *c == want).map(|(t, _)| t).collect();
                let mut next = Vec::new();
                for tuple in &tuples {
                    for t in &candidates {
                        let mut ext = tuple.clone();
                        ext.push((*t).clone());
                        next.push(ext);
                    }
                }
                tuples = next;
            }
            for tuple in tuples {
                ctx.push(Atom::new(pred.clone(), tuple))?;
            }
            Ok(coloring)
        }
        CwExpr::Recolor(from, to, child) => {
            let mut coloring = eval_expr(child, depth, ctx)?;
            for color in coloring.values_mut() {
                if color == from {
                    *color = to.clone();
                }
            }
            Ok(coloring)
        }
        CwExpr::Union(l, r) => {
            let mut left = eval_expr(l, depth, ctx)?;
            let right = eval_expr(r, depth, ctx)?;
            for (t, c) in right {
                if left.insert(t.clone(), c).is_some() {
                    return Err(CwError::DuplicateConstant(t.to_string()));
                }
            }
            Ok(left)
        }
        CwExpr::Ref(name) => {
            if depth == 0 {
                return Ok(BTreeMap::new());
            }
            let def = ctx.defs.get(name).ok_or_else(|| CwError::UnresolvedRef(name.clone()))?;
            eval_expr(def, depth - 1, ctx)
        }
    }
}

/// Default atom cap for evaluation.
pub const DEFAULT_EVAL_CAP: usize = 1_000_000;

/// Evaluates the system with references unfolded `unfold_depth` times.
pub fn eval(system: &EquationSystem, unfold_depth: usize) -> Result<ColoredInstance, CwError> {
    eval_capped(system, unfold_depth, DEFAULT_EVAL_CAP)
}

pub fn eval_capped(
    system: &EquationSystem,
    unfold_depth: usize,
    cap: usize,
) -> Result<ColoredInstance, CwError> {
    let issues = validate(system);
    if !issues.is_empty() {
        return Err(CwError::Invalid(issues));
    }
    let mut ctx = EvalCtx {
        defs: &system.defs,
        atoms: IndexSet::new(),
        null_counter: 0,
        cap,
        constants_seen: BTreeSet::new(),
    };
    let coloring = eval_expr(&system.root, unfold_depth, &mut ctx)?;
    ColoredInstance::new(Instance::from_set(ctx.atoms), coloring)
}

/// `ci` plus `R(e⃗)` for every argument tuple whose colors equal `colors`.
pub fn add_atoms(ci: &ColoredInstance, pred: &str, colors: &[Color]) -> ColoredInstance {
    let mut tuples: Vec<Vec<Term>> = vec![Vec::new()];
    for want in colors {
        let candidates: Vec<&Term> =
            ci.coloring.iter().filter(|(_, c)| *c == want).map(|(t, _)| t).collect();
        let mut next = Vec::new();
        for tuple in &tuples {
            for t in &candidates {
                let mut ext = tuple.clone();
                ext.push((*t).clone());
                next.push(ext);
            }
        }
        tuples = next;
    }
    let mut atoms: IndexSet<Atom> = ci.inst.atoms().cloned().collect();
    for tuple in tuples {
        atoms.insert(Atom::new(pred.to_string(), tuple));
    }
    ColoredInstance { inst: Instance::from_set(atoms), coloring: ci.coloring.clone() }
}

/// All tuples over `palette` of the given length, in lexicographic order.
fn palette_tuples(palette: &[Color], len: usize) -> Vec<Vec<Color>> {
    let mut out: Vec<Vec<Color>> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for tuple in &out {
            for c in palette {
                let mut ext = tuple.clone();
                ext.push(c.clone());
                next.push(ext);
            }
        }
        out = next;
    }
    out
}

/// Builds a reference-free system evaluating to the same instance with the
/// coloring `lambda2`, over colors (original × new) plus the new palette.
///
/// Leaves get their color paired with the new color of the entity they
/// produce; every `Add` and `Recolor` node fans out into a chain over the
/// new palette; a final chain of projections maps each pair to its second
/// component. The output uses at most (n+1)·|palette| colors, n the number
/// of original colors.
pub fn recolor_witness(
    system: &EquationSystem,
    lambda2: &BTreeMap<Term, Color>,
    unfold_depth: usize,
) -> Result<EquationSystem, CwError> {
    let original = eval(system, unfold_depth)?;
    for t in original.instance().adom() {
        if !lambda2.contains_key(t) {
            return Err(CwError::ColoringNotTotal(t.to_string()));
        }
    }
    let palette: Vec<Color> = lambda2.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let unfolded = unfold(system, unfold_depth)?;

    // The walk below mirrors the evaluator's DFS so that the i-th null leaf
    // is paired with the new color of the i-th null the evaluator creates.
    fn transform(
        expr: &CwExpr,
        counter: &mut u64,
        palette: &[Color],
        lambda2: &BTreeMap<Term, Color>,
    ) -> Result<CwExpr, CwError> {
        Ok(match expr {
            CwExpr::Void => CwExpr::Void,
            CwExpr::ConstLeaf(c, k) => {
                let ell = lambda2.get(c).ok_or_else(|| CwError::ColoringNotTotal(c.to_string()))?;
                CwExpr::ConstLeaf(c.clone(), Color::pair(k.clone(), ell.clone()))
            }
            CwExpr::NullLeaf(k) => {
                let t = Term::null(format!("cw{counter}"));
                *counter += 1;
                let ell = lambda2.get(&t).ok_or_else(|| CwError::ColoringNotTotal(t.to_string()))?;
                CwExpr::NullLeaf(Color::pair(k.clone(), ell.clone()))
            }
            CwExpr::Add(pred, ks, child) => {
                let mut out = transform(child, counter, palette, lambda2)?;
                for combo in palette_tuples(palette, ks.len()) {
                    let paired: Vec<Color> = ks
                        .iter()
                        .zip(&combo)
                        .map(|(k, l)| Color::pair(k.clone(), l.clone()))
                        .collect();
                    out = CwExpr::add(pred.clone(), paired, out);
                }
                out
            }
            CwExpr::Recolor(from, to, child) => {
                let mut out = transform(child, counter, palette, lambda2)?;
                for l in palette {
                    out = CwExpr::recolor(
                        Color::pair(from.clone(), l.clone()),
                        Color::pair(to.clone(), l.clone()),
                        out,
                    );
                }
                out
            }
            CwExpr::Union(l, r) => {
                let left = transform(l, counter, palette, lambda2)?;
                let right = transform(r, counter, palette, lambda2)?;
                CwExpr::union(left, right)
            }
            CwExpr::Ref(name) => return Err(CwError::UnresolvedRef(name.clone())),
        })
    }

    let mut counter = 0u64;
    let mut root = transform(&unfolded, &mut counter, &palette, lambda2)?;
    let original_colors = colors_of(&EquationSystem::from_root(unfolded));
    for k in &original_colors {
        for l in &palette {
            root = CwExpr::recolor(Color::pair(k.clone(), l.clone()), l.clone(), root);
        }
    }
    Ok(EquationSystem::from_root(root))
}

/// A rooted tree of bags over the terms of an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    bags: Vec<BTreeSet<Term>>,
    parent: Vec<Option<usize>>,
}

impl TreeDecomposition {
    pub fn new(bags: Vec<BTreeSet<Term>>, parent: Vec<Option<usize>>) -> Result<Self, CwError> {
        let fail = |msg: String| Err(CwError::InvalidTreeDecomposition(msg));
        if bags.len() != parent.len() {
            return fail("bag and parent lists differ in length".into());
        }
        if bags.is_empty() {
            return fail("empty tree".into());
        }
        let roots = parent.iter().filter(|p| p.is_none()).count();
        if roots != 1 {
            return fail(format!("expected exactly one root, found {roots}"));
        }
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                if *p >= bags.len() {
                    return fail(format!("node {i} has out-of-range parent {p}"));
                }
            }
        }
        // Acyclicity: every node must reach the root.
        for start in 0..bags.len() {
            let mut seen = 0usize;
            let mut node = start;
            while let Some(p) = parent[node] {
                node = p;
                seen += 1;
                if seen > bags.len() {
                    return fail("parent links contain a cycle".into());
                }
            }
        }
        Ok(TreeDecomposition { bags, parent })
    }

    pub fn bags(&self) -> &[BTreeSet<Term>] {
        &self.bags
    }

    pub fn parent(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn root(&self) -> usize {
        self.parent.iter().position(|p| p.is_none()).expect("one root")
    }

    pub fn width(&self) -> usize {
        self.bags.iter().map(|b| b.len()).max().unwrap_or(0).saturating_sub(1)
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.bags.len()];
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                out[*p].push(i);
            }
        }
        out
    }

    /// Nodes in breadth-first order from the root.
    fn bfs_order(&self) -> Vec<usize> {
        let children = self.children();
        let mut order = Vec::with_capacity(self.bags.len());
        let mut queue = VecDeque::from([self.root()]);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for &c in &children[node] {
                queue.push_back(c);
            }
        }
        order
    }

    /// Checks the three decomposition conditions for `inst`.
    pub fn validate_for(&self, inst: &Instance) -> Result<(), CwError> {
        let fail = |msg: String| Err(CwError::InvalidTreeDecomposition(msg));
        for t in inst.adom() {
            if !self.bags.iter().any(|b| b.contains(t)) {
                return fail(format!("term {t} occurs in no bag"));
            }
            // Connectivity: exactly one bag containing t has a parent that
            // does not contain t (or no parent at all).
            let tops = (0..self.bags.len())
                .filter(|&i| {
                    self.bags[i].contains(t)
                        && match self.parent[i] {
                            Some(p) => !self.bags[p].contains(t),
                            None => true,
                        }
                })
                .count();
            if tops != 1 {
                return fail(format!("bags containing {t} are not connected"));
            }
        }
        for atom in inst.atoms() {
            let terms: BTreeSet<&Term> = atom.args().iter().collect();
            if !self.bags.iter().any(|b| terms.iter().all(|t| b.contains(t))) {
                return fail(format!("terms of {atom} share no bag"));
            }
        }
        Ok(())
    }
}

/// Pending-link request colors used by [`td_to_cw`].
fn req_unary(pred: &str) -> Color {
    Color::Tuple(vec![Color::name("u"), Color::name(pred.to_string())])
}

fn req_self_loop(pred: &str) -> Color {
    Color::Tuple(vec![Color::name("s"), Color::name(pred.to_string())])
}

fn req_out(pred: &str, slot: usize) -> Color {
    Color::Tuple(vec![Color::name("o"), Color::name(pred.to_string()), Color::Num(slot)])
}

fn req_in(pred: &str, slot: usize) -> Color {
    Color::Tuple(vec![Color::name("i"), Color::name(pred.to_string()), Color::Num(slot)])
}

fn slot_color(slot: usize, reqs: &BTreeSet<Color>) -> Color {
    Color::Tuple(vec![Color::Num(slot), Color::Set(reqs.clone())])
}

/// Transient color of the one term whose introduction is in flight. The tag
/// keeps discharges aimed at the new term from capturing an older live term
/// whose slot and residual request set happen to coincide.
fn intro_color(slot: usize, reqs: &BTreeSet<Color>) -> Color {
    Color::Tuple(vec![Color::name("new"), Color::Num(slot), Color::Set(reqs.clone())])
}

fn retired_color() -> Color {
    Color::name("done")
}

/// Converts a binary instance with a valid tree decomposition into a
/// reference-free expression system whose evaluation is isomorphic to the
/// instance (up to the implicit `top` facts on every term).
///
/// Each term is introduced at its pivotal node (the bag closest to the root
/// containing it) with a color carrying its slot (0..width, distinct per
/// bag) and the set of its pending links to not-yet-introduced terms. At
/// every introduction, pending links of live colors toward the new slot are
/// discharged by Add/Recolor pairs, slot-ascending. Colors whose request
/// set becomes empty are immediately retired to a dedicated color so that
/// later discharges cannot capture them.
pub fn td_to_cw(inst: &Instance, td: &TreeDecomposition) -> Result<EquationSystem, CwError> {
    for atom in inst.atoms() {
        if atom.args().len() > 2 {
            return Err(CwError::NonBinaryPredicate(atom.pred().to_string(), atom.args().len()));
        }
    }
    td.validate_for(inst)?;
    if inst.adom().is_empty() {
        let mut root = CwExpr::Void;
        for atom in inst.sorted_atoms() {
            if atom.args().is_empty() {
                root = CwExpr::add(atom.pred().to_string(), vec![], root);
            }
        }
        return Ok(EquationSystem::from_root(root));
    }

    let order = td.bfs_order();
    let depth_of = {
        let mut d = vec![0usize; td.bags.len()];
        for &node in &order {
            if let Some(p) = td.parent[node] {
                d[node] = d[p] + 1;
            }
        }
        d
    };

    // Pivot: the bag containing the term that is closest to the root.
    let mut pivot: BTreeMap<Term, usize> = BTreeMap::new();
    for t in inst.adom() {
        let node = (0..td.bags.len())
            .filter(|&i| td.bags[i].contains(t))
            .min_by_key(|&i| depth_of[i])
            .expect("validated coverage");
        pivot.insert(t.clone(), node);
    }

    // Slots: process bags in BFS order; terms pivotal at a bag receive the
    // least slot unused by any already-assigned term sharing a bag.
    let mut slot: BTreeMap<Term, usize> = BTreeMap::new();
    for &node in &order {
        for t in &td.bags[node] {
            if !pivot.contains_key(t) || slot.contains_key(t) {
                continue;
            }
            let mut used: BTreeSet<usize> = BTreeSet::new();
            for bag in &td.bags {
                if bag.contains(t) {
                    for u in bag {
                        if u != t {
                            if let Some(&s) = slot.get(u) {
                                used.insert(s);
                            }
                        }
                    }
                }
            }
            let mut candidate = 0;
            while used.contains(&candidate) {
                candidate += 1;
            }
            slot.insert(t.clone(), candidate);
        }
    }

    // Initial pending-link sets. `top` atoms are implicit in evaluation and
    // carry no links. For a binary atom between distinct terms the carrier
    // is the term with the strictly deeper pivot, or the smaller slot on a
    // tie; its request points at the other term's slot.
    let mut requests: BTreeMap<Term, BTreeSet<Color>> = BTreeMap::new();
    for t in inst.adom() {
        requests.insert(t.clone(), BTreeSet::new());
    }
    let mut nullary: Vec<Atom> = Vec::new();
    for atom in inst.sorted_atoms() {
        if atom.is_top() {
            continue;
        }
        match atom.args() {
            [] => nullary.push(atom.clone()),
            [t] => {
                requests.get_mut(t).expect("adom").insert(req_unary(atom.pred()));
            }
            [t, u] if t == u => {
                requests.get_mut(t).expect("adom").insert(req_self_loop(atom.pred()));
            }
            [t, u] => {
                let (dt, du) = (depth_of[pivot[t]], depth_of[pivot[u]]);
                if dt > du || (dt == du && slot[t] < slot[u]) {
                    requests.get_mut(t).expect("adom").insert(req_out(atom.pred(), slot[u]));
                } else {
                    requests.get_mut(u).expect("adom").insert(req_in(atom.pred(), slot[t]));
                }
            }
            _ => unreachable!("arity checked above"),
        }
    }

    struct Builder<'a> {
        td: &'a TreeDecomposition,
        children: Vec<Vec<usize>>,
        pivot: &'a BTreeMap<Term, usize>,
        slot: &'a BTreeMap<Term, usize>,
        requests: &'a BTreeMap<Term, BTreeSet<Color>>,
    }

    impl Builder<'_> {
        /// Returns the subtree expression and the live coloring of the
        /// terms introduced in it (retired terms are dropped).
        fn build(&self, node: usize) -> (Option<CwExpr>, BTreeMap<Term, Color>) {
            let mut expr: Option<CwExpr> = None;
            let mut live: BTreeMap<Term, Color> = BTreeMap::new();
            let join = |expr: &mut Option<CwExpr>, next: CwExpr| {
                *expr = Some(match expr.take() {
                    Some(prev) => CwExpr::union(prev, next),
                    None => next,
                });
            };
            for &child in &self.children[node] {
                let (child_expr, child_live) = self.build(child);
                if let Some(e) = child_expr {
                    join(&mut expr, e);
                }
                live.extend(child_live);
            }
            let mut pivotal: Vec<&Term> = self
                .td
                .bags[node]
                .iter()
                .filter(|t| self.pivot.get(*t) == Some(&node))
                .collect();
            pivotal.sort_by_key(|t| self.slot[*t]);
            for t in pivotal {
                let slot_t = self.slot[t];
                // The new term enters under a tagged color so that no
                // discharge below can confuse it with an older live term.
                let initial = intro_color(slot_t, &self.requests[t]);
                let leaf = if t.is_constant() {
                    CwExpr::ConstLeaf((*t).clone(), initial.clone())
                } else {
                    CwExpr::NullLeaf(initial.clone())
                };
                join(&mut expr, leaf);
                live.insert((*t).clone(), initial);

                // Discharge t's own unary and self-loop requests.
                loop {
                    let current = live[t].clone();
                    let Color::Tuple(parts) = &current else { unreachable!() };
                    let Color::Set(reqs) = &parts[2] else { unreachable!() };
                    let own = reqs.iter().find(|r| {
                        matches!(r, Color::Tuple(p)
                            if matches!(&p[0], Color::Name(n) if n.as_ref() == "u" || n.as_ref() == "s"))
                    });
                    let Some(req) = own.cloned() else { break };
                    let Color::Tuple(parts_req) = &req else { unreachable!() };
                    let Color::Name(pred) = &parts_req[1] else { unreachable!() };
                    let is_self = matches!(&parts_req[0], Color::Name(n) if n.as_ref() == "s");
                    let tuple = if is_self {
                        vec![current.clone(), current.clone()]
                    } else {
                        vec![current.clone()]
                    };
                    let mut remaining = reqs.clone();
                    remaining.remove(&req);
                    let next = intro_color(slot_t, &remaining);
                    let e = expr.take().expect("leaf joined");
                    let e = CwExpr::add(pred.to_string(), tuple, e);
                    expr = Some(CwExpr::recolor(current.clone(), next.clone(), e));
                    for c in live.values_mut() {
                        if *c == current {
                            *c = next.clone();
                        }
                    }
                }

                // Discharge pending links of other live colors toward slot_t.
                loop {
                    let target = live[t].clone();
                    let mut pick: Option<(Color, Color)> = None; // (live color, request)
                    let distinct: BTreeSet<Color> = live.values().cloned().collect();
                    'outer: for color in &distinct {
                        if *color == target {
                            continue;
                        }
                        let Color::Tuple(parts) = color else { continue };
                        let Color::Set(reqs) = &parts[1] else { continue };
                        for req in reqs {
                            let Color::Tuple(p) = req else { continue };
                            let toward = matches!(&p[0], Color::Name(n) if n.as_ref() == "o" || n.as_ref() == "i")
                                && p[2] == Color::Num(slot_t);
                            if toward {
                                pick = Some((color.clone(), req.clone()));
                                break 'outer;
                            }
                        }
                    }
                    let Some((color, req)) = pick else { break };
                    let Color::Tuple(parts) = &color else { unreachable!() };
                    let (Color::Num(req_slot), Color::Set(reqs)) = (&parts[0], &parts[1]) else {
                        unreachable!()
                    };
                    let Color::Tuple(p) = &req else { unreachable!() };
                    let Color::Name(pred) = &p[1] else { unreachable!() };
                    let outgoing = matches!(&p[0], Color::Name(n) if n.as_ref() == "o");
                    let tuple = if outgoing {
                        vec![color.clone(), target.clone()]
                    } else {
                        vec![target.clone(), color.clone()]
                    };
                    let mut remaining = reqs.clone();
                    remaining.remove(&req);
                    let next = slot_color(*req_slot, &remaining);
                    let e = expr.take().expect("nonempty");
                    let e = CwExpr::add(pred.to_string(), tuple, e);
                    expr = Some(CwExpr::recolor(color.clone(), next.clone(), e));
                    for c in live.values_mut() {
                        if *c == color {
                            *c = next.clone();
                        }
                    }
                }

                // The introduction is complete: untag the new term. A term
                // without residual requests retires outright; residual-color
                // collisions with older live terms are harmless because a
                // shared pending request names a slot whose next introduction
                // is the true target of every carrier (slots are unique per
                // bag on the path each carrier shares with its target).
                let tagged = live[t].clone();
                let Color::Tuple(parts) = &tagged else { unreachable!() };
                let Color::Set(residual) = &parts[2] else { unreachable!() };
                let settled = if residual.is_empty() {
                    retired_color()
                } else {
                    slot_color(slot_t, residual)
                };
                let e = expr.take().expect("leaf joined");
                expr = Some(CwExpr::recolor(tagged, settled.clone(), e));
                if settled == retired_color() {
                    live.remove(t);
                } else {
                    live.insert((*t).clone(), settled);
                }

                // Immediately retire colors with no pending requests.
                let exhausted: BTreeSet<Color> = live
                    .values()
                    .filter(|c| {
                        matches!(c, Color::Tuple(parts)
                            if matches!(&parts[1], Color::Set(s) if s.is_empty()))
                    })
                    .cloned()
                    .collect();
                for color in exhausted {
                    let e = expr.take().expect("nonempty");
                    expr = Some(CwExpr::recolor(color.clone(), retired_color(), e));
                    live.retain(|_, c| *c != color);
                }
            }
            (expr, live)
        }
    }

    let builder = Builder {
        td,
        children: td.children(),
        pivot: &pivot,
        slot: &slot,
        requests: &requests,
    };
    let (expr, live) = builder.build(td.root());
    debug_assert!(live.is_empty(), "unresolved pending links: {live:?}");
    let mut root = expr.unwrap_or(CwExpr::Void);
    for atom in nullary {
        root = CwExpr::add(atom.pred().to_string(), vec![], root);
    }
    Ok(EquationSystem::from_root(root))
}

/// `inst` plus an explicit `top(t)` fact for every domain term; evaluation
/// of expressions always produces these, so isomorphism checks against
/// plain instances go through this closure.
pub fn with_top_facts(inst: &Instance) -> Instance {
    let mut atoms: IndexSet<Atom> = inst.atoms().cloned().collect();
    for t in inst.adom() {
        atoms.insert(Atom::new(TOP, vec![t.clone()]));
    }
    Instance::from_set(atoms)
}
