//! Decomposition trees.
//!
//! A formula is split into independent parts (children of an `And`/`Or`
//! that share no variable), variables common to every disjunct are factored
//! out, and whatever cannot be split further ends up in a leaf. Leaves
//! without repeated variables are evaluated exactly; the others are
//! `Shared` and wait for bounds or Shannon expansion.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Display, Write as _};

use crate::error::Result;
use crate::formula::{Formula, VarId};
use crate::interval::Bounds;
use crate::num::Scalar;
use crate::readonce::eval_read_once;
use crate::table::ProbView;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafStatus {
    ReadOnce,
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf<T> {
    pub formula: Formula,
    pub status: LeafStatus,
    /// `None` until bounds have been computed.
    pub interval: Option<Bounds<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DTree<T> {
    /// Disjunction of variable-disjoint parts.
    IndepOr(Vec<DTree<T>>),
    /// Conjunction of variable-disjoint parts.
    IndepAnd(Vec<DTree<T>>),
    /// `var ? hi : lo`, neither branch mentions `var`.
    Shannon {
        var: VarId,
        p: T,
        hi: Box<DTree<T>>,
        lo: Box<DTree<T>>,
        /// Bounds known for this subtree before it was expanded. Propagation
        /// never reports anything looser.
        prior: Option<Bounds<T>>,
    },
    Leaf(Leaf<T>),
}

/// Groups `children` into connected components of the "shares a variable"
/// relation. Components are ordered by their first member and keep the
/// input order inside.
pub fn independent_partition(children: &[Formula]) -> Vec<Vec<Formula>> {
    let n = children.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut owner: HashMap<VarId, usize> = HashMap::new();
    for (i, c) in children.iter().enumerate() {
        for v in c.vars() {
            if let Some(&j) = owner.get(&v) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                // Keep the smallest index as root.
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi] = lo;
            } else {
                owner.insert(v, i);
            }
        }
    }
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut out: Vec<Vec<Formula>> = Vec::new();
    for (i, c) in children.iter().enumerate() {
        let root = find(&mut parent, i);
        let k = *slot.entry(root).or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[k].push(c.clone());
    }
    out
}

/// Variables appearing as a direct conjunct (or as the whole child) of
/// `child`.
fn direct_conjuncts(child: &Formula) -> BTreeSet<VarId> {
    match child {
        Formula::Var(v) => [v.clone()].into(),
        Formula::And(cs) => cs
            .iter()
            .filter_map(|c| match c {
                Formula::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect(),
        _ => BTreeSet::new(),
    }
}

fn strip(child: &Formula, common: &BTreeSet<VarId>) -> Formula {
    match child {
        Formula::Var(v) if common.contains(v) => Formula::True,
        Formula::And(cs) => Formula::and(
            cs.iter()
                .filter(|c| !matches!(c, Formula::Var(v) if common.contains(v)))
                .cloned(),
        ),
        other => other.clone(),
    }
}

/// Lifts variables that are a direct conjunct of every disjunct:
/// `x·A ∨ x·B` becomes `x·(A ∨ B)`, repeated on the residual disjunction
/// until nothing is common. Formulas that are not an `Or` are returned
/// unchanged.
pub fn factor_common(f: &Formula) -> Formula {
    let Formula::Or(cs) = f else {
        return f.clone();
    };
    let mut common = direct_conjuncts(&cs[0]);
    for c in cs.iter().skip(1) {
        if common.is_empty() {
            break;
        }
        let here = direct_conjuncts(c);
        common.retain(|v| here.contains(v));
    }
    if common.is_empty() {
        return f.clone();
    }
    let residual = Formula::or(cs.iter().map(|c| strip(c, &common))).simplify();
    let residual = factor_common(&residual);
    Formula::and(common.into_iter().map(Formula::Var).chain([residual])).simplify()
}

/// Builds the decomposition tree of a simplified formula. Read-once leaves
/// receive their exact probability; shared leaves get `[0, 1]`.
pub fn decompose<T: Scalar + Copy, V: ProbView<T> + ?Sized>(f: &Formula, vt: &V) -> Result<DTree<T>> {
    if f.is_read_once() {
        let p = eval_read_once(f, vt)?;
        return Ok(DTree::Leaf(Leaf {
            formula: f.clone(),
            status: LeafStatus::ReadOnce,
            interval: Some(Bounds::point(p)),
        }));
    }
    let shared = || {
        DTree::Leaf(Leaf {
            formula: f.clone(),
            status: LeafStatus::Shared,
            interval: Some(Bounds::unit()),
        })
    };
    match f {
        Formula::And(cs) | Formula::Or(cs) => {
            let is_and = matches!(f, Formula::And(_));
            let components = independent_partition(cs);
            if components.len() > 1 {
                let parts = components
                    .into_iter()
                    .map(|c| {
                        let g = if is_and { Formula::and(c) } else { Formula::or(c) };
                        decompose(&g.simplify(), vt)
                    })
                    .collect::<Result<Vec<_>>>()?;
                return Ok(if is_and {
                    DTree::IndepAnd(parts)
                } else {
                    DTree::IndepOr(parts)
                });
            }
            if !is_and {
                let factored = factor_common(f);
                if &factored != f {
                    return decompose(&factored, vt);
                }
            }
            Ok(shared())
        }
        _ => Ok(shared()),
    }
}

impl<T: Scalar + Copy> DTree<T> {
    /// Visits every leaf in depth-first, left-to-right order.
    pub fn leaves(&self) -> Vec<&Leaf<T>> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Leaf<T>>) {
        match self {
            DTree::IndepOr(cs) | DTree::IndepAnd(cs) => {
                cs.iter().for_each(|c| c.collect_leaves(out))
            }
            DTree::Shannon { hi, lo, .. } => {
                hi.collect_leaves(out);
                lo.collect_leaves(out);
            }
            DTree::Leaf(l) => out.push(l),
        }
    }

    /// Probability obtained by evaluating every leaf with `leaf_value` and
    /// combining exactly.
    pub fn eval_with<F>(&self, leaf_value: &mut F) -> Result<T>
    where
        F: FnMut(&Leaf<T>) -> Result<T>,
    {
        Ok(match self {
            DTree::IndepAnd(cs) => {
                let mut acc = T::one();
                for c in cs {
                    acc = acc * c.eval_with(leaf_value)?;
                }
                acc
            }
            DTree::IndepOr(cs) => {
                let mut acc = T::one();
                for c in cs {
                    acc = acc * (T::one() - c.eval_with(leaf_value)?);
                }
                T::one() - acc
            }
            DTree::Shannon { p, hi, lo, .. } => {
                *p * hi.eval_with(leaf_value)? + (T::one() - *p) * lo.eval_with(leaf_value)?
            }
            DTree::Leaf(l) => leaf_value(l)?,
        })
    }
}

impl<T: Display> DTree<T> {
    /// Indented text rendering, one node per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_into(&mut out, 0);
        out
    }

    fn dump_into(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        match self {
            DTree::IndepOr(cs) | DTree::IndepAnd(cs) => {
                let name = if matches!(self, DTree::IndepOr(_)) {
                    "indep-or"
                } else {
                    "indep-and"
                };
                let _ = writeln!(out, "{pad}{name}");
                cs.iter().for_each(|c| c.dump_into(out, depth + 1));
            }
            DTree::Shannon { var, p, hi, lo, .. } => {
                let _ = writeln!(out, "{pad}shannon {var} p={p}");
                hi.dump_into(out, depth + 1);
                lo.dump_into(out, depth + 1);
            }
            DTree::Leaf(l) => {
                let status = match l.status {
                    LeafStatus::ReadOnce => "read-once",
                    LeafStatus::Shared => "shared",
                };
                let interval = l
                    .interval
                    .as_ref()
                    .map(|b| format!("[{}, {}]", b.lower, b.upper))
                    .unwrap_or_else(|| "?".into());
                let _ = writeln!(out, "{pad}leaf {status} {interval} {}", l.formula);
            }
        }
    }
}

impl<T: Display> Display for DTree<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}
