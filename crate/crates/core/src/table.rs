//! Variable probabilities.

use std::collections::BTreeMap;

use num_traits::FromPrimitive;

use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::num::Scalar;

/// Source tuple of a variable: table name and tuple key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub table: String,
    pub key: String,
}

/// Probabilities of independent tuple variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbTable<T> {
    entries: BTreeMap<VarId, T>,
    provenance: BTreeMap<VarId, Provenance>,
}

impl<T> Default for ProbTable<T> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
            provenance: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> ProbTable<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares `v` with probability `p`. Fails on duplicates and on values
    /// outside `[0, 1]`.
    pub fn insert(&mut self, v: VarId, p: T) -> Result<()> {
        if !(T::zero() <= p && p <= T::one()) {
            return Err(Error::ProbabilityOutOfRange {
                name: v.to_string(),
                value: format!("{p:?}"),
            });
        }
        if self.entries.contains_key(&v) {
            return Err(Error::DuplicateVariable(v));
        }
        self.entries.insert(v, p);
        Ok(())
    }

    pub fn set_provenance(&mut self, v: VarId, provenance: Provenance) {
        self.provenance.insert(v, provenance);
    }

    pub fn provenance(&self, v: &VarId) -> Option<&Provenance> {
        self.provenance.get(v)
    }

    pub fn get(&self, v: &VarId) -> Option<&T> {
        self.entries.get(v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &T)> {
        self.entries.iter()
    }

    /// Fails with the first variable of `f` that has no entry.
    pub fn check_covers(&self, f: &Formula) -> Result<()> {
        match f.vars().into_iter().find(|v| !self.entries.contains_key(v)) {
            Some(v) => Err(Error::UndeclaredVariable(v)),
            None => Ok(()),
        }
    }

    /// Keeps only the variables occurring in `f`.
    pub fn restricted_to(&self, f: &Formula) -> Self {
        let vars = f.vars();
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| vars.contains(*k))
                .map(|(k, p)| (k.clone(), p.clone()))
                .collect(),
            provenance: self
                .provenance
                .iter()
                .filter(|(k, _)| vars.contains(*k))
                .map(|(k, p)| (k.clone(), p.clone()))
                .collect(),
        }
    }

    /// Converts every probability to another scalar type.
    pub fn convert<U: Scalar + FromPrimitive>(&self) -> ProbTable<U>
    where
        T: Into<f64>,
    {
        ProbTable {
            entries: self
                .entries
                .iter()
                .map(|(k, p)| (k.clone(), U::from_f64(p.clone().into()).expect("finite")))
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

impl<T: Scalar> FromIterator<(VarId, T)> for ProbTable<T> {
    /// Later duplicates overwrite earlier ones; use [`ProbTable::insert`] for
    /// checked construction.
    fn from_iter<I: IntoIterator<Item = (VarId, T)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
            provenance: BTreeMap::new(),
        }
    }
}

/// Read access to variable probabilities.
pub trait ProbView<T> {
    fn prob(&self, v: &VarId) -> Option<T>;
}

impl<T: Scalar> ProbView<T> for ProbTable<T> {
    fn prob(&self, v: &VarId) -> Option<T> {
        self.entries.get(v).cloned()
    }
}

impl<T: Clone> ProbView<T> for BTreeMap<VarId, T> {
    fn prob(&self, v: &VarId) -> Option<T> {
        self.get(v).cloned()
    }
}

impl<T, V: ProbView<T> + ?Sized> ProbView<T> for &V {
    fn prob(&self, v: &VarId) -> Option<T> {
        (**self).prob(v)
    }
}

/// A view that consults `top` first and falls back to `base`.
pub struct Overlay<'a, T> {
    pub top: &'a BTreeMap<VarId, T>,
    pub base: &'a dyn ProbView<T>,
}

impl<T: Clone> ProbView<T> for Overlay<'_, T> {
    fn prob(&self, v: &VarId) -> Option<T> {
        self.top.get(v).cloned().or_else(|| self.base.prob(v))
    }
}
