//! Disconnection types and type-driven saturation for disconnected
//! single-headed binary datalog rules.
//!
//! A rule `phi1(x1,..) & phi2(x2,..) -> R(x1,x2)` whose body splits into
//! components not sharing a head variable acts on a term only through which
//! body sides the term can instantiate. The disconnection type of a term
//! records exactly that, so one application round is a purely color-driven
//! atom insertion.

use std::collections::{BTreeMap, BTreeSet};

use crate::cliquewidth::{add_atoms, Color, ColoredInstance, CwError};
use crate::kernel::{find_homomorphisms, Instance, MatchOptions, Term};
use crate::rules::{split_disconnected_body, RuleError, RuleSet, SplitBody};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// The set of (rule label, body side) pairs a term can instantiate.
pub type DiscType = BTreeSet<(String, u8)>;

fn splits(rules: &RuleSet) -> Result<Vec<(&str, SplitBody)>, RuleError> {
    rules
        .rules()
        .iter()
        .map(|r| Ok((r.label(), split_disconnected_body(r)?)))
        .collect()
}

fn type_of(t: &Term, inst: &Instance, splits: &[(&str, SplitBody)]) -> DiscType {
    let mut out = DiscType::new();
    for (label, split) in splits {
        let side = |atoms: &[crate::kernel::Atom], x: &Term| {
            let seed = BTreeMap::from([(x.clone(), t.clone())]);
            find_homomorphisms(atoms, inst, &seed, MatchOptions::default()).next().is_some()
        };
        if side(&split.phi1, &split.x1) {
            out.insert((label.to_string(), 1));
        }
        if side(&split.phi2, &split.x2) {
            out.insert((label.to_string(), 2));
        }
    }
    out
}

/// The disconnection type of every domain term.
///
/// Every rule must be a disconnected single-headed binary datalog rule.
pub fn disc_types(inst: &Instance, rules: &RuleSet) -> Result<BTreeMap<Term, DiscType>, RuleError> {
    let splits = splits(rules)?;
    #[cfg(feature = "parallel")]
    let iter = inst.adom().par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = inst.adom().iter();
    Ok(iter.map(|t| (t.clone(), type_of(t, inst, &splits))).collect())
}

/// Encodes a disconnection type as a color.
pub fn type_color(ty: &DiscType) -> Color {
    Color::Set(
        ty.iter()
            .map(|(label, side)| {
                Color::Tuple(vec![Color::name(label.clone()), Color::Num(usize::from(*side))])
            })
            .collect(),
    )
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BinaryCaseError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Cw(#[from] CwError),
}

/// One application round of disconnected rules, driven entirely by the
/// disconnection-type coloring: for every rule and every pair of type
/// colors admitting its two body sides, the head atoms over all terms of
/// those colors are inserted at once. Coincides with one plain chase step.
pub fn saturate_disconnected(inst: &Instance, rules: &RuleSet) -> Result<Instance, BinaryCaseError> {
    let splits = splits(rules)?;
    let types = disc_types(inst, rules)?;
    let coloring: BTreeMap<Term, Color> =
        types.iter().map(|(t, ty)| (t.clone(), type_color(ty))).collect();
    let palette: BTreeSet<Color> = coloring.values().cloned().collect();
    let mut ci = ColoredInstance::new(inst.clone(), coloring)?;
    for (rule, (label, _)) in rules.rules().iter().zip(&splits) {
        let head = &rule.head()[0];
        let admits = |color: &Color, side: u8| {
            let Color::Set(s) = color else { return false };
            s.contains(&Color::Tuple(vec![
                Color::name(label.to_string()),
                Color::Num(usize::from(side)),
            ]))
        };
        for c1 in palette.iter().filter(|c| admits(c, 1)) {
            for c2 in palette.iter().filter(|c| admits(c, 2)) {
                ci = add_atoms(&ci, head.pred(), &[c1.clone(), c2.clone()]);
            }
        }
    }
    Ok(ci.instance().clone())
}
