//! Representation and classification of existential rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::kernel::{Atom, KernelError, Signature, Term};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("null {0} may not occur in a rule")]
    NullInRule(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("rule is not a disconnected single-headed binary datalog rule: {0}")]
    NotSplittable(String),
}

/// An existential rule `body -> exists z. head`.
///
/// The frontier (variables shared by body and head) and the existential
/// variables (head-only) are derived. Labels feed Skolem null naming.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    label: String,
    body: Vec<Atom>,
    head: Vec<Atom>,
}

impl Rule {
    pub fn new(label: impl Into<String>, body: Vec<Atom>, head: Vec<Atom>) -> Result<Self, RuleError> {
        for atom in body.iter().chain(head.iter()) {
            if let Some(t) = atom.args().iter().find(|t| t.is_null()) {
                return Err(RuleError::NullInRule(t.to_string()));
            }
        }
        Ok(Rule { label: label.into(), body, head })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    pub fn head(&self) -> &[Atom] {
        &self.head
    }

    pub fn body_variables(&self) -> BTreeSet<Term> {
        self.body.iter().flat_map(|a| a.variables().cloned()).collect()
    }

    pub fn head_variables(&self) -> BTreeSet<Term> {
        self.head.iter().flat_map(|a| a.variables().cloned()).collect()
    }

    /// Variables shared by body and head.
    pub fn frontier(&self) -> BTreeSet<Term> {
        self.body_variables().intersection(&self.head_variables()).cloned().collect()
    }

    /// Head-only variables.
    pub fn existential_variables(&self) -> BTreeSet<Term> {
        self.head_variables().difference(&self.body_variables()).cloned().collect()
    }

    pub fn is_datalog(&self) -> bool {
        self.existential_variables().is_empty()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |atoms: &[Atom]| {
            atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
        };
        write!(f, "{}: {} -> ", self.label, join(&self.body))?;
        let ex = self.existential_variables();
        if !ex.is_empty() {
            let vars = ex.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ");
            write!(f, "exists {vars}. ")?;
        }
        write!(f, "{}.", join(&self.head))
    }
}

/// A finite sequence of rules with a shared signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
    signature: Signature,
}

impl RuleSet {
    /// Builds a rule set, deriving and checking the signature from the rules.
    pub fn new(rules: Vec<Rule>) -> Result<Self, RuleError> {
        let mut signature = Signature::new();
        for rule in &rules {
            for atom in rule.body().iter().chain(rule.head()) {
                signature.declare(atom.pred_arc(), atom.args().len())?;
            }
        }
        Ok(RuleSet { rules, signature })
    }

    pub fn empty() -> Self {
        RuleSet { rules: Vec::new(), signature: Signature::new() }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }
}

/// Datalog head-variable connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Connected,
    Disconnected,
    NotApplicable,
}

/// Classification flags of a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleClass {
    pub is_datalog: bool,
    pub is_single_headed: bool,
    pub max_arity: usize,
    pub datalog_connectivity: Connectivity,
}

/// Connected components of the body's variable co-occurrence graph.
/// Constants do not connect components.
fn body_components(rule: &Rule) -> Vec<BTreeSet<Term>> {
    let vars: Vec<Term> = rule.body_variables().into_iter().collect();
    let index: BTreeMap<&Term, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..vars.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for atom in rule.body() {
        let atom_vars: Vec<usize> = atom.variables().map(|v| index[v]).collect();
        for w in atom_vars.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut components: BTreeMap<usize, BTreeSet<Term>> = BTreeMap::new();
    for (i, v) in vars.iter().enumerate() {
        components.entry(find(&mut parent, i)).or_default().insert(v.clone());
    }
    components.into_values().collect()
}

/// Classifies a rule.
///
/// A datalog rule is `Disconnected` iff two of its head variables lie in
/// different connected components of the body's variable co-occurrence
/// graph; a head variable absent from the body counts as its own component.
/// Nullary or single-variable heads are `Connected`.
pub fn classify(rule: &Rule) -> RuleClass {
    let is_datalog = rule.is_datalog();
    let max_arity = rule
        .body()
        .iter()
        .chain(rule.head())
        .map(|a| a.args().len())
        .max()
        .unwrap_or(0);
    let datalog_connectivity = if !is_datalog {
        Connectivity::NotApplicable
    } else {
        let components = body_components(rule);
        let component_of = |v: &Term| components.iter().position(|c| c.contains(v));
        let head_vars: Vec<Term> = rule.head_variables().into_iter().collect();
        let mut seen: Option<Option<usize>> = None;
        let mut disconnected = false;
        for v in &head_vars {
            // `None` marks a body-absent head variable: its own component,
            // distinct from everything else (including other absent ones).
            let comp = component_of(v);
            match (&seen, comp) {
                (None, c) => seen = Some(c),
                (Some(None), _) | (Some(_), None) => disconnected = true,
                (Some(Some(a)), Some(b)) if *a != b => disconnected = true,
                _ => {}
            }
        }
        if head_vars.len() >= 2 && disconnected {
            Connectivity::Disconnected
        } else {
            Connectivity::Connected
        }
    };
    RuleClass {
        is_datalog,
        is_single_headed: rule.head().len() == 1,
        max_arity,
        datalog_connectivity,
    }
}

/// The two body parts of a disconnected single-headed binary datalog rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitBody {
    /// Component of the first head variable.
    pub phi1: Vec<Atom>,
    /// Remainder, containing the second head variable's component.
    pub phi2: Vec<Atom>,
    pub x1: Term,
    pub x2: Term,
}

/// Splits the body of a disconnected rule `phi1(x1,..) & phi2(x2,..) -> R(x1,x2)`
/// into the connected component of `x1` and the remainder.
pub fn split_disconnected_body(rule: &Rule) -> Result<SplitBody, RuleError> {
    let class = classify(rule);
    let fail = |msg: &str| Err(RuleError::NotSplittable(format!("{msg} in {rule}")));
    if !class.is_datalog || !class.is_single_headed {
        return fail("not single-headed datalog");
    }
    if class.datalog_connectivity != Connectivity::Disconnected {
        return fail("head variables not disconnected");
    }
    let head = &rule.head()[0];
    if head.args().len() != 2 {
        return fail("head not binary");
    }
    let (x1, x2) = (head.args()[0].clone(), head.args()[1].clone());
    if !x1.is_variable() || !x2.is_variable() || x1 == x2 {
        return fail("head arguments not two distinct variables");
    }
    let components = body_components(rule);
    let comp1 = components.iter().find(|c| c.contains(&x1));
    let in_comp1 = |atom: &Atom| match comp1 {
        Some(c) => atom.variables().any(|v| c.contains(v)),
        None => false,
    };
    // When x1 is absent from the body it forms its own component, which x2
    // (a distinct variable) can never share.
    let same_component = comp1.is_some_and(|c| c.contains(&x2));
    if same_component {
        return fail("head variables share a component");
    }
    let phi1: Vec<Atom> = rule.body().iter().filter(|a| in_comp1(a)).cloned().collect();
    let phi2: Vec<Atom> = rule.body().iter().filter(|a| !in_comp1(a)).cloned().collect();
    Ok(SplitBody { phi1, phi2, x1, x2 })
}
