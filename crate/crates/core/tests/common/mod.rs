//! Shared fixtures for the integration suites: hand-coded grid fragments,
//! the two worked expression systems, brute-force oracles, and seeded
//! random generators kept deliberately small.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use rulebench_core::cliquewidth::{Color, CwExpr, EquationSystem, TreeDecomposition};
use rulebench_core::kernel::{Atom, Instance, Term, TOP};
use rulebench_core::rules::{Rule, RuleSet};
use rulebench_core::chase::Bcq;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(n: &str) -> Term {
    Term::constant(n)
}

pub fn nl(n: impl Into<String>) -> Term {
    Term::null(n.into())
}

pub fn v(n: &str) -> Term {
    Term::variable(n)
}

pub fn inst(atoms: Vec<Atom>) -> Instance {
    Instance::from_atoms(atoms).expect("ground atoms")
}

/// Exhaustive homomorphism check by enumerating every mapping of the
/// source's non-constant terms into the target domain. Only for tiny inputs.
pub fn brute_force_hom(source: &[Atom], target: &Instance) -> bool {
    let mappable: Vec<Term> = source
        .iter()
        .flat_map(|a| a.args().iter())
        .filter(|t| !t.is_constant())
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dom: Vec<Term> = target.adom().to_vec();
    if mappable.is_empty() {
        return check_map(source, target, &BTreeMap::new());
    }
    if dom.is_empty() {
        return false;
    }
    let mut idx = vec![0usize; mappable.len()];
    loop {
        let map: BTreeMap<Term, Term> =
            mappable.iter().zip(&idx).map(|(t, i)| (t.clone(), dom[*i].clone())).collect();
        if check_map(source, target, &map) {
            return true;
        }
        let mut pos = 0;
        loop {
            idx[pos] += 1;
            if idx[pos] < dom.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
            if pos == mappable.len() {
                return false;
            }
        }
    }
}

fn check_map(source: &[Atom], target: &Instance, map: &BTreeMap<Term, Term>) -> bool {
    source.iter().all(|a| {
        let img = a.substitute(map);
        if img.is_top() {
            target.in_adom(&img.args()[0])
        } else {
            target.contains(&img)
        }
    })
}

/// A w-by-h fragment of the grid-shaped universal model: the origin is the
/// constant `a`, interior points are nulls, edges step right (`H`) and up
/// (`V`). With `with_loop` the self-loop element is included.
pub fn grid_fragment(w: usize, h: usize, with_loop: bool) -> Instance {
    let point = |i: usize, j: usize| {
        if i == 0 && j == 0 {
            c("a")
        } else {
            nl(format!("g{i}_{j}"))
        }
    };
    let mut atoms = vec![Atom::new(TOP, vec![c("a")])];
    for i in 0..w {
        for j in 0..h {
            if i + 1 < w {
                atoms.push(Atom::new("H", vec![point(i, j), point(i + 1, j)]));
            }
            if j + 1 < h {
                atoms.push(Atom::new("V", vec![point(i, j), point(i, j + 1)]));
            }
        }
    }
    if with_loop {
        atoms.push(Atom::new("H", vec![nl("m"), nl("m")]));
        atoms.push(Atom::new("V", vec![nl("m"), nl("m")]));
    }
    inst(atoms)
}

/// The strict-order expression: E = Add_{R,(1,2)}(leaf(1) (+) Recolor_{1->2}(E)).
pub fn strict_order_system() -> EquationSystem {
    let body = CwExpr::add(
        "R",
        vec![Color::num(1), Color::num(2)],
        CwExpr::union(
            CwExpr::NullLeaf(Color::num(1)),
            CwExpr::recolor(Color::num(1), Color::num(2), CwExpr::Ref("E".into())),
        ),
    );
    EquationSystem::new(
        BTreeMap::from([("E".to_string(), body)]),
        CwExpr::Ref("E".into()),
    )
}

/// The six-color system generating the reified ternary-successor chain:
/// root = Add_{R_1,(5,1)}(leaf(1) (+) Ref E) with
/// E = Recolor_{2->3}(Recolor_{4->5}(Recolor_{3->6}(
///       Add_{R_3,(4,3)}(Add_{R_2,(4,2)}(leaf(2) (+) (leaf(4) (+) Ref E)))))).
pub fn reified_chain_system() -> EquationSystem {
    let k = Color::num;
    let e = CwExpr::recolor(
        k(2),
        k(3),
        CwExpr::recolor(
            k(4),
            k(5),
            CwExpr::recolor(
                k(3),
                k(6),
                CwExpr::add(
                    "R_3",
                    vec![k(4), k(3)],
                    CwExpr::add(
                        "R_2",
                        vec![k(4), k(2)],
                        CwExpr::union(
                            CwExpr::NullLeaf(k(2)),
                            CwExpr::union(CwExpr::NullLeaf(k(4)), CwExpr::Ref("E".into())),
                        ),
                    ),
                ),
            ),
        ),
    );
    let root = CwExpr::add(
        "R_1",
        vec![k(5), k(1)],
        CwExpr::union(CwExpr::NullLeaf(k(1)), CwExpr::Ref("E".into())),
    );
    EquationSystem::new(BTreeMap::from([("E".to_string(), e)]), root)
}

/// The first `d` triples of the ternary successor chain, over nulls so that
/// homomorphisms may place them freely.
pub fn chain_triples(d: usize) -> Instance {
    let atoms: Vec<Atom> = (0..d)
        .map(|n| Atom::new("R", vec![nl("minus1"), nl(format!("n{n}")), nl(format!("n{}", n + 1))]))
        .collect();
    inst(atoms)
}

const PRED_POOL: [(&str, usize); 3] = [("P", 1), ("E", 2), ("R", 3)];

fn random_term(rng: &mut ChaCha8Rng, pool: &[Term]) -> Term {
    pool.choose(rng).expect("nonempty pool").clone()
}

/// A random ground instance over `P/1, E/2, R/3` and a handful of constants.
pub fn random_instance(rng: &mut ChaCha8Rng, max_atoms: usize) -> Instance {
    let pool: Vec<Term> = (0..5).map(|i| c(&format!("c{i}"))).collect();
    let n = rng.gen_range(1..=max_atoms);
    let atoms: Vec<Atom> = (0..n)
        .map(|_| {
            let (pred, ar) = *PRED_POOL.choose(rng).expect("pool");
            Atom::new(pred, (0..ar).map(|_| random_term(rng, &pool)).collect())
        })
        .collect();
    inst(atoms)
}

/// A random existential rule set over the same signature: bodies of one or
/// two atoms, heads of one or two atoms with at most one existential.
pub fn random_ruleset(rng: &mut ChaCha8Rng, max_rules: usize) -> RuleSet {
    let vars: Vec<Term> = ["x", "y", "z"].iter().map(|n| v(n)).collect();
    let atom = |rng: &mut ChaCha8Rng, pool: &[Term]| {
        let (pred, ar) = *PRED_POOL.choose(rng).expect("pool");
        Atom::new(pred, (0..ar).map(|_| random_term(rng, pool)).collect())
    };
    let n = rng.gen_range(1..=max_rules);
    let rules: Vec<Rule> = (0..n)
        .map(|i| {
            let body: Vec<Atom> = (0..rng.gen_range(1..=2)).map(|_| atom(rng, &vars)).collect();
            let mut head_pool: Vec<Term> =
                body.iter().flat_map(|a| a.args().iter().cloned()).collect();
            head_pool.push(v("w"));
            let head: Vec<Atom> =
                (0..rng.gen_range(1..=2)).map(|_| atom(rng, &head_pool)).collect();
            Rule::new(format!("r{i}"), body, head).expect("variables only")
        })
        .collect();
    RuleSet::new(rules).expect("arity-consistent by construction")
}

/// A random binary instance together with a valid width-<=2 tree
/// decomposition: bags evolve down a random tree by retaining a subset of
/// the parent and adding fresh terms, so every term's bag set is connected;
/// atoms are drawn within bags.
pub fn random_instance_with_td(rng: &mut ChaCha8Rng) -> (Instance, TreeDecomposition) {
    let max_terms = 8usize;
    let mut names = 0usize;
    let fresh = |names: &mut usize| {
        let t = c(&format!("t{names}"));
        *names += 1;
        t
    };
    let n_bags = rng.gen_range(1..=5);
    let mut bags: Vec<BTreeSet<Term>> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    for b in 0..n_bags {
        let mut bag: BTreeSet<Term> = if b == 0 {
            BTreeSet::new()
        } else {
            let p = rng.gen_range(0..b);
            parent.push(Some(p));
            bags[p].iter().filter(|_| rng.gen_bool(0.6)).cloned().collect()
        };
        if b == 0 {
            parent.push(None);
        }
        while bag.len() < 3 && names < max_terms && rng.gen_bool(0.7) {
            bag.insert(fresh(&mut names));
        }
        if bag.is_empty() {
            bag.insert(fresh(&mut names));
        }
        bags.push(bag);
    }
    let mut atoms: Vec<Atom> = Vec::new();
    for bag in &bags {
        let terms: Vec<Term> = bag.iter().cloned().collect();
        for _ in 0..rng.gen_range(1..=3) {
            if rng.gen_bool(0.7) {
                let s = random_term(rng, &terms);
                let t = random_term(rng, &terms);
                let pred = if rng.gen_bool(0.5) { "E" } else { "F" };
                atoms.push(Atom::new(pred, vec![s, t]));
            } else {
                atoms.push(Atom::new("A", vec![random_term(rng, &terms)]));
            }
        }
    }
    // Every bag term must carry at least one atom so that the evaluated
    // expression and the instance have the same domain.
    let used: BTreeSet<Term> = atoms.iter().flat_map(|a| a.args().iter().cloned()).collect();
    for bag in &bags {
        for t in bag {
            if !used.contains(t) {
                atoms.push(Atom::new("A", vec![t.clone()]));
            }
        }
    }
    let td = TreeDecomposition::new(bags, parent).expect("well-formed by construction");
    (inst(atoms), td)
}

/// A random validated expression system over at most three numeric colors,
/// possibly recursive through a single definition.
pub fn random_cw_system(rng: &mut ChaCha8Rng) -> (EquationSystem, usize) {
    let n_colors = rng.gen_range(1..=3);
    let color = |rng: &mut ChaCha8Rng| Color::num(rng.gen_range(1..=n_colors));
    fn expr(rng: &mut ChaCha8Rng, depth: usize, n_colors: usize, allow_ref: bool) -> CwExpr {
        let color = |rng: &mut ChaCha8Rng| Color::num(rng.gen_range(1..=n_colors));
        if depth == 0 {
            return if allow_ref && rng.gen_bool(0.4) {
                CwExpr::Ref("X".into())
            } else {
                CwExpr::NullLeaf(color(rng))
            };
        }
        match rng.gen_range(0..5) {
            0 => CwExpr::NullLeaf(color(rng)),
            1 => {
                let (pred, ar) = if rng.gen_bool(0.5) { ("A", 1) } else { ("E", 2) };
                let ks = (0..ar).map(|_| color(rng)).collect();
                CwExpr::add(pred, ks, expr(rng, depth - 1, n_colors, allow_ref))
            }
            2 => CwExpr::recolor(
                color(rng),
                color(rng),
                expr(rng, depth - 1, n_colors, allow_ref),
            ),
            3 => CwExpr::union(
                expr(rng, depth - 1, n_colors, allow_ref),
                expr(rng, depth - 1, n_colors, allow_ref),
            ),
            _ => {
                if allow_ref {
                    CwExpr::Ref("X".into())
                } else {
                    CwExpr::NullLeaf(color(rng))
                }
            }
        }
    }
    let recursive = rng.gen_bool(0.5);
    let system = if recursive {
        let def = expr(rng, 3, n_colors, true);
        let root = CwExpr::union(expr(rng, 2, n_colors, true), CwExpr::NullLeaf(color(rng)));
        EquationSystem::new(BTreeMap::from([("X".to_string(), def)]), root)
    } else {
        EquationSystem::from_root(expr(rng, 3, n_colors, false))
    };
    let depth = if recursive { rng.gen_range(1..=4) } else { 0 };
    (system, depth)
}

/// A random disconnected single-headed binary datalog rule set: each body is
/// two variable-disjoint connected sides around `x1` and `x2`.
pub fn random_disc_rules(rng: &mut ChaCha8Rng, max_rules: usize) -> RuleSet {
    let n = rng.gen_range(1..=max_rules);
    let rules: Vec<Rule> = (0..n)
        .map(|i| {
            let mut body = Vec::new();
            for side in 1..=2u8 {
                let x = v(&format!("x{side}"));
                let aux = v(&format!("w{side}"));
                for j in 0..rng.gen_range(1..=2) {
                    body.push(match rng.gen_range(0..3) {
                        0 => Atom::new(["A", "B"][rng.gen_range(0..2)], vec![x.clone()]),
                        1 => Atom::new("E", vec![x.clone(), aux.clone()]),
                        _ => Atom::new("E", vec![aux.clone(), x.clone()]),
                    });
                    let _ = j;
                }
            }
            let pred = ["L", "M"][rng.gen_range(0..2)];
            Rule::new(format!("d{i}"), body, vec![Atom::new(pred, vec![v("x1"), v("x2")])])
                .expect("variables only")
        })
        .collect();
    RuleSet::new(rules).expect("arity-consistent by construction")
}

/// A random ground instance over the disconnected-rule signature.
pub fn random_binary_instance(rng: &mut ChaCha8Rng, max_atoms: usize) -> Instance {
    let pool: Vec<Term> = (0..4).map(|i| c(&format!("c{i}"))).collect();
    let atoms: Vec<Atom> = (0..rng.gen_range(1..=max_atoms))
        .map(|_| match rng.gen_range(0..3) {
            0 => Atom::new("A", vec![random_term(rng, &pool)]),
            1 => Atom::new("B", vec![random_term(rng, &pool)]),
            _ => Atom::new("E", vec![random_term(rng, &pool), random_term(rng, &pool)]),
        })
        .collect();
    inst(atoms)
}

/// A random BCQ over the grid signature: at most four atoms, at most two
/// constants among the terms.
pub fn random_grid_query(rng: &mut ChaCha8Rng) -> Bcq {
    let pool: Vec<Term> =
        vec![v("x"), v("y"), v("z"), v("w"), c("a"), c("b")];
    let term = |rng: &mut ChaCha8Rng| random_term(rng, &pool);
    let atoms: Vec<Atom> = (0..rng.gen_range(1..=4))
        .map(|_| match rng.gen_range(0..5) {
            0 => Atom::new(TOP, vec![term(rng)]),
            1 | 2 => Atom::new("H", vec![term(rng), term(rng)]),
            _ => Atom::new("V", vec![term(rng), term(rng)]),
        })
        .collect();
    Bcq::new(atoms)
}

/// A random grid database: at most five facts over at most three constants.
pub fn random_grid_db(rng: &mut ChaCha8Rng) -> Instance {
    let pool: Vec<Term> = vec![c("a"), c("b"), c("e")];
    let atoms: Vec<Atom> = (0..rng.gen_range(1..=5))
        .map(|_| match rng.gen_range(0..4) {
            0 => Atom::new(TOP, vec![random_term(rng, &pool)]),
            1 | 2 => Atom::new("H", vec![random_term(rng, &pool), random_term(rng, &pool)]),
            _ => Atom::new("V", vec![random_term(rng, &pool), random_term(rng, &pool)]),
        })
        .collect();
    inst(atoms)
}
