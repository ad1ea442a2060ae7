//! Influence of variables on read-once (and dissociated) formulas.
//!
//! The influence of a leaf is `P(f | leaf = 1) - P(f | leaf = 0)`, which for
//! a read-once formula equals the partial derivative of `P(f)` with respect
//! to the leaf probability. All leaves are handled by a single backward
//! pass over [`ReadOnceCircuit`].

use std::collections::BTreeMap;

use crate::dissociation::CopyMap;
use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::num::Scalar;
use crate::readonce::ReadOnceCircuit;
use crate::table::ProbView;

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMap<T> {
    /// Influence of every leaf, copies included.
    pub per_leaf: BTreeMap<VarId, T>,
    /// Leaf influences summed per original variable. A copy `x'k` counts
    /// towards `x`; other leaves count towards themselves.
    pub per_original: BTreeMap<VarId, T>,
}

fn original_name(v: &VarId) -> VarId {
    match v.as_str().split_once('\'') {
        Some((orig, _)) => VarId::new(orig).unwrap_or_else(|_| v.clone()),
        None => v.clone(),
    }
}

pub fn influence_all<T: Scalar, V: ProbView<T> + ?Sized>(
    f: &Formula,
    probs: &V,
) -> Result<InfluenceMap<T>> {
    let circuit = ReadOnceCircuit::new(f)?;
    let leaf_probs = circuit.leaf_probs(probs)?;
    let (_, grad) = circuit.gradient(&leaf_probs);

    let mut per_original: BTreeMap<VarId, T> = BTreeMap::new();
    for (v, g) in circuit.leaves().iter().zip(&grad) {
        let slot = per_original
            .entry(original_name(v))
            .or_insert_with(T::zero);
        *slot = slot.clone() + g.clone();
    }
    Ok(InfluenceMap {
        per_leaf: circuit.leaves().iter().cloned().zip(grad).collect(),
        per_original,
    })
}

/// Sum of copy influences for every dissociated variable. Variables that
/// were not dissociated are left out.
pub fn sum_influences<T: Scalar>(
    im: &InfluenceMap<T>,
    cm: &CopyMap,
) -> Result<BTreeMap<VarId, T>> {
    let mut out: BTreeMap<VarId, T> = BTreeMap::new();
    for (leaf, value) in &im.per_leaf {
        if !leaf.is_copy() {
            continue;
        }
        let original = cm
            .original_of(leaf)
            .ok_or_else(|| Error::UnknownCopy(leaf.clone()))?;
        let slot = out.entry(original.clone()).or_insert_with(T::zero);
        *slot = slot.clone() + value.clone();
    }
    Ok(out)
}
