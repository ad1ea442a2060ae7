//! Monotone lineage formulas.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Name of a tuple variable.
///
/// Names coming from user input are validated by [`VarId::new`]. Dissociation
/// copies are named `orig'k`; the apostrophe is rejected in user names, so
/// copies can never collide with an original variable.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(Arc<str>);

const RESERVED: [&str; 5] = ["and", "or", "true", "false", "var"];

impl VarId {
    pub fn new(name: &str) -> Result<Self> {
        if Self::is_valid_name(name) {
            Ok(VarId(Arc::from(name)))
        } else {
            Err(Error::InvalidVarName(name.to_string()))
        }
    }

    pub fn is_valid_name(name: &str) -> bool {
        !name.is_empty()
            && !RESERVED.contains(&name)
            && name
                .chars()
                .all(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | '#' | '\''))
    }

    /// The `index`-th (1-based) dissociation copy of `original`.
    pub(crate) fn copy_of(original: &VarId, index: usize) -> Self {
        VarId(Arc::from(format!("{}'{}", original.0, index)))
    }

    /// Whether this id was produced by dissociation.
    pub fn is_copy(&self) -> bool {
        self.0.contains('\'')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A monotone Boolean formula over tuple variables.
///
/// Trees are immutable; rewrites share every subtree they leave untouched.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Var(VarId),
    And(Arc<[Formula]>),
    Or(Arc<[Formula]>),
}

impl Formula {
    pub fn var(name: &str) -> Result<Self> {
        VarId::new(name).map(Formula::Var)
    }

    pub fn constant(b: bool) -> Self {
        if b {
            Formula::True
        } else {
            Formula::False
        }
    }

    /// Conjunction of `children`, without simplification. An empty
    /// conjunction is `True`.
    pub fn and<I: IntoIterator<Item = Formula>>(children: I) -> Self {
        let children: Vec<_> = children.into_iter().collect();
        if children.is_empty() {
            Formula::True
        } else {
            Formula::And(children.into())
        }
    }

    /// Disjunction of `children`, without simplification. An empty
    /// disjunction is `False`.
    pub fn or<I: IntoIterator<Item = Formula>>(children: I) -> Self {
        let children: Vec<_> = children.into_iter().collect();
        if children.is_empty() {
            Formula::False
        } else {
            Formula::Or(children.into())
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Formula::True | Formula::False)
    }

    pub fn children(&self) -> &[Formula] {
        match self {
            Formula::And(cs) | Formula::Or(cs) => cs,
            _ => &[],
        }
    }

    /// Number of variable leaves.
    pub fn leaf_count(&self) -> usize {
        match self {
            Formula::Var(_) => 1,
            Formula::True | Formula::False => 0,
            Formula::And(cs) | Formula::Or(cs) => cs.iter().map(Formula::leaf_count).sum(),
        }
    }

    /// Distinct variables, sorted.
    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.visit_leaves(&mut |v| {
            out.insert(v.clone());
        });
        out
    }

    pub fn contains(&self, v: &VarId) -> bool {
        match self {
            Formula::Var(x) => x == v,
            Formula::True | Formula::False => false,
            Formula::And(cs) | Formula::Or(cs) => cs.iter().any(|c| c.contains(v)),
        }
    }

    /// Calls `f` on every variable leaf, left to right.
    pub fn visit_leaves<F: FnMut(&VarId)>(&self, f: &mut F) {
        match self {
            Formula::Var(v) => f(v),
            Formula::True | Formula::False => {}
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.visit_leaves(f)),
        }
    }

    /// Leaf occurrence count of every variable in the formula.
    pub fn occurrences(&self) -> BTreeMap<VarId, usize> {
        let mut out = BTreeMap::new();
        self.visit_leaves(&mut |v| *out.entry(v.clone()).or_insert(0) += 1);
        out
    }

    /// The first variable (in traversal order) that occurs more than once.
    pub fn first_repeated(&self) -> Option<VarId> {
        let mut seen = HashSet::new();
        let mut repeated = None;
        self.visit_leaves(&mut |v| {
            if repeated.is_none() && !seen.insert(v.clone()) {
                repeated = Some(v.clone());
            }
        });
        repeated
    }

    pub fn is_read_once(&self) -> bool {
        self.first_repeated().is_none()
    }

    /// Constant folding, flattening of nested same-kind nodes and removal of
    /// structurally duplicate children.
    pub fn simplify(&self) -> Formula {
        self.simplify_changed().unwrap_or_else(|| self.clone())
    }

    /// `None` when the formula is already in simplified form.
    fn simplify_changed(&self) -> Option<Formula> {
        let (cs, is_and) = match self {
            Formula::And(cs) => (cs, true),
            Formula::Or(cs) => (cs, false),
            _ => return None,
        };
        let (absorbing, identity) = if is_and {
            (Formula::False, Formula::True)
        } else {
            (Formula::True, Formula::False)
        };

        let mut changed = cs.len() < 2;
        let mut out: Vec<Formula> = Vec::with_capacity(cs.len());
        let mut seen: HashSet<Formula> = HashSet::with_capacity(cs.len());
        let mut push = |g: Formula, out: &mut Vec<Formula>, changed: &mut bool| {
            if seen.insert(g.clone()) {
                out.push(g);
            } else {
                *changed = true;
            }
        };

        for c in cs.iter() {
            let s = match c.simplify_changed() {
                Some(s) => {
                    changed = true;
                    s
                }
                None => c.clone(),
            };
            if s == absorbing {
                return Some(absorbing);
            }
            if s == identity {
                changed = true;
                continue;
            }
            match (&s, is_and) {
                (Formula::And(inner), true) | (Formula::Or(inner), false) => {
                    changed = true;
                    for g in inner.iter() {
                        push(g.clone(), &mut out, &mut changed);
                    }
                }
                _ => push(s, &mut out, &mut changed),
            }
        }

        if !changed {
            return None;
        }
        Some(match out.len() {
            0 => identity,
            1 => out.pop().unwrap(),
            _ if is_and => Formula::And(out.into()),
            _ => Formula::Or(out.into()),
        })
    }

    /// Replaces every leaf `v` by the constant `value` and simplifies.
    pub fn condition(&self, v: &VarId, value: bool) -> Formula {
        match self.substitute(v, value) {
            Some(f) => f.simplify(),
            None => self.simplify(),
        }
    }

    fn substitute(&self, v: &VarId, value: bool) -> Option<Formula> {
        match self {
            Formula::Var(x) if x == v => Some(Formula::constant(value)),
            Formula::And(cs) | Formula::Or(cs) => {
                let mut replaced: Option<Vec<Formula>> = None;
                for (i, c) in cs.iter().enumerate() {
                    if let Some(s) = c.substitute(v, value) {
                        replaced.get_or_insert_with(|| cs[..i].to_vec()).push(s);
                    } else if let Some(r) = replaced.as_mut() {
                        r.push(c.clone());
                    }
                }
                replaced.map(|r| match self {
                    Formula::And(_) => Formula::And(r.into()),
                    _ => Formula::Or(r.into()),
                })
            }
            _ => None,
        }
    }

    /// Evaluates the formula under a truth assignment.
    pub fn eval_bool<F: Fn(&VarId) -> bool>(&self, assignment: &F) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Var(v) => assignment(v),
            Formula::And(cs) => cs.iter().all(|c| c.eval_bool(assignment)),
            Formula::Or(cs) => cs.iter().any(|c| c.eval_bool(assignment)),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Var(v) => write!(f, "{v}"),
            Formula::And(cs) | Formula::Or(cs) => {
                f.write_str(if matches!(self, Formula::And(_)) {
                    "(and"
                } else {
                    "(or"
                })?;
                for c in cs.iter() {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
