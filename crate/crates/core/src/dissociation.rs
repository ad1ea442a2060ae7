//! Dissociation: replacing the occurrences of shared variables by fresh
//! independent copies, and choosing copy probabilities that turn the
//! resulting read-once formula into an upper or lower bound.
//!
//! For a variable with probability `p` and `k` copies the rules are:
//!
//! | rule                    | upper                 | lower                     |
//! |-------------------------|-----------------------|---------------------------|
//! | corner `j` (model based)| `p` at `j`, 1 elsewhere | `p` at `j`, 0 elsewhere |
//! | symmetric, disjunctive  | `p`                   | `1 - (1 - p)^(1/k)`       |
//! | symmetric, conjunctive  | `p^(1/k)`             | `p`                       |
//!
//! Corners are valid whatever the surrounding formula looks like. The
//! symmetric rules additionally require that all pairs of copies meet below
//! an `Or` (disjunctive) or below an `And` (conjunctive).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::num::Real;
use crate::readonce::eval_read_once;
use crate::table::{Overlay, ProbView};

/// How the copies of one variable are connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Context {
    /// Every pair of occurrences has an `Or` as lowest common ancestor.
    Disjunctive,
    /// Every pair of occurrences has an `And` as lowest common ancestor.
    Conjunctive,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopyGroup {
    pub original: VarId,
    /// Copies in left-to-right order of the occurrences they replace.
    pub copies: Vec<VarId>,
    pub context: Context,
}

/// Bookkeeping of a dissociation: every copy and the variable it stands for.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CopyMap {
    groups: BTreeMap<VarId, CopyGroup>,
    origin: BTreeMap<VarId, VarId>,
}

impl CopyMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a group. Copies must be fresh dissociation ids not used by
    /// another group.
    pub fn insert_group(&mut self, group: CopyGroup) -> Result<()> {
        if self.groups.contains_key(&group.original) {
            return Err(Error::DuplicateVariable(group.original));
        }
        for c in &group.copies {
            if !c.is_copy() || self.origin.contains_key(c) {
                return Err(Error::InvalidVarName(c.to_string()));
            }
        }
        for c in &group.copies {
            self.origin.insert(c.clone(), group.original.clone());
        }
        self.groups.insert(group.original.clone(), group);
        Ok(())
    }

    pub fn groups(&self) -> impl Iterator<Item = &CopyGroup> {
        self.groups.values()
    }

    pub fn group(&self, original: &VarId) -> Option<&CopyGroup> {
        self.groups.get(original)
    }

    pub fn original_of(&self, copy: &VarId) -> Option<&VarId> {
        self.origin.get(copy)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Upper,
    Lower,
}

/// How to pick copy probabilities for the whole dissociation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignStrategy {
    /// For each group, the index of the copy that keeps the original
    /// probability. Every group must have an entry.
    ModelBased(BTreeMap<VarId, usize>),
    Symmetric,
}

/// How to pick copy probabilities for a single group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupRule {
    Corner(usize),
    Symmetric,
}

/// Copy probabilities realizing a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    pub probs: BTreeMap<VarId, T>,
    pub direction: Direction,
}

struct Occurrence {
    /// Child index at every depth from the root.
    path: Vec<usize>,
    /// Whether the ancestor at every depth is an `And`.
    and_ancestors: Vec<bool>,
}

fn collect_occurrences(
    f: &Formula,
    path: &mut Vec<usize>,
    kinds: &mut Vec<bool>,
    out: &mut BTreeMap<VarId, Vec<Occurrence>>,
) {
    match f {
        Formula::Var(v) => out.entry(v.clone()).or_default().push(Occurrence {
            path: path.clone(),
            and_ancestors: kinds.clone(),
        }),
        Formula::True | Formula::False => {}
        Formula::And(cs) | Formula::Or(cs) => {
            kinds.push(matches!(f, Formula::And(_)));
            for (i, c) in cs.iter().enumerate() {
                path.push(i);
                collect_occurrences(c, path, kinds, out);
                path.pop();
            }
            kinds.pop();
        }
    }
}

fn context_of(occurrences: &[Occurrence]) -> Context {
    let (mut and, mut or) = (false, false);
    for (i, a) in occurrences.iter().enumerate() {
        for b in &occurrences[i + 1..] {
            let lca = a
                .path
                .iter()
                .zip(&b.path)
                .take_while(|(x, y)| x == y)
                .count();
            if a.and_ancestors[lca] {
                and = true;
            } else {
                or = true;
            }
        }
    }
    match (and, or) {
        (true, false) => Context::Conjunctive,
        (false, true) => Context::Disjunctive,
        _ => Context::Mixed,
    }
}

fn rename(f: &Formula, counters: &mut BTreeMap<VarId, usize>) -> Formula {
    match f {
        Formula::Var(v) => match counters.get_mut(v) {
            Some(n) => {
                *n += 1;
                Formula::Var(VarId::copy_of(v, *n))
            }
            None => f.clone(),
        },
        Formula::True | Formula::False => f.clone(),
        Formula::And(cs) => Formula::and(cs.iter().map(|c| rename(c, counters))),
        Formula::Or(cs) => Formula::or(cs.iter().map(|c| rename(c, counters))),
    }
}

/// Replaces every occurrence of every repeated variable by a fresh copy.
pub fn dissociate(f: &Formula) -> Result<(Formula, CopyMap)> {
    let mut occurrences = BTreeMap::new();
    collect_occurrences(f, &mut Vec::new(), &mut Vec::new(), &mut occurrences);
    occurrences.retain(|_, occ| occ.len() > 1);
    if occurrences.is_empty() {
        return Err(Error::NothingToDissociate);
    }

    let mut counters: BTreeMap<VarId, usize> =
        occurrences.keys().map(|v| (v.clone(), 0)).collect();
    let dissociated = rename(f, &mut counters);

    let mut cm = CopyMap::new();
    for (v, occ) in &occurrences {
        cm.insert_group(CopyGroup {
            original: v.clone(),
            copies: (1..=occ.len()).map(|i| VarId::copy_of(v, i)).collect(),
            context: context_of(occ),
        })?;
    }
    Ok((dissociated, cm))
}

/// Copy probabilities for one group with original probability `p`.
pub fn group_probs<T: Real>(
    group: &CopyGroup,
    p: T,
    rule: GroupRule,
    direction: Direction,
) -> Result<Vec<T>> {
    let k = group.copies.len();
    match rule {
        GroupRule::Corner(j) => {
            if j >= k {
                return Err(Error::InvalidChoice(group.original.clone()));
            }
            let filler = match direction {
                Direction::Upper => T::one(),
                Direction::Lower => T::zero(),
            };
            Ok((0..k).map(|i| if i == j { p } else { filler }).collect())
        }
        GroupRule::Symmetric => {
            let inv_k = T::one() / T::lit(k as f64);
            let q = match (group.context, direction) {
                (Context::Disjunctive, Direction::Upper)
                | (Context::Conjunctive, Direction::Lower) => p,
                (Context::Disjunctive, Direction::Lower) => T::one() - (T::one() - p).powf(inv_k),
                (Context::Conjunctive, Direction::Upper) => p.powf(inv_k),
                (Context::Mixed, _) => return Err(Error::MixedContext(group.original.clone())),
            };
            Ok(vec![q; k])
        }
    }
}

fn original_prob<T, V: ProbView<T> + ?Sized>(vt: &V, v: &VarId) -> Result<T> {
    vt.prob(v).ok_or_else(|| Error::MissingProbability(v.clone()))
}

/// Builds an assignment choosing a rule per group.
pub fn assign_with<T, V, R>(
    cm: &CopyMap,
    vt: &V,
    direction: Direction,
    mut rule: R,
) -> Result<Assignment<T>>
where
    T: Real,
    V: ProbView<T> + ?Sized,
    R: FnMut(&CopyGroup) -> Result<GroupRule>,
{
    let mut probs = BTreeMap::new();
    for group in cm.groups() {
        let p = original_prob(vt, &group.original)?;
        let values = group_probs(group, p, rule(group)?, direction)?;
        probs.extend(group.copies.iter().cloned().zip(values));
    }
    Ok(Assignment { probs, direction })
}

/// Copy probabilities for every group under one strategy.
pub fn assign_bounds<T: Real, V: ProbView<T> + ?Sized>(
    cm: &CopyMap,
    vt: &V,
    strategy: &AssignStrategy,
    direction: Direction,
) -> Result<Assignment<T>> {
    if let AssignStrategy::ModelBased(choices) = strategy {
        if let Some(unknown) = choices.keys().find(|v| cm.group(v).is_none()) {
            return Err(Error::InvalidChoice(unknown.clone()));
        }
    }
    assign_with(cm, vt, direction, |group| match strategy {
        AssignStrategy::Symmetric => Ok(GroupRule::Symmetric),
        AssignStrategy::ModelBased(choices) => choices
            .get(&group.original)
            .map(|&j| GroupRule::Corner(j))
            .ok_or_else(|| Error::InvalidChoice(group.original.clone())),
    })
}

/// Probability of the dissociated formula under `asg`, other variables
/// taken from `vt`.
pub fn bound_value<T: Real, V: ProbView<T>>(
    dissociated: &Formula,
    asg: &Assignment<T>,
    vt: &V,
) -> Result<T> {
    let view = Overlay {
        top: &asg.probs,
        base: vt,
    };
    eval_read_once(dissociated, &view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineage::parse_lineage;
    use crate::table::ProbTable;

    const EXAMPLE: &str = "var r1 0.5\nvar r2 0.6\nvar s1 0.3\nvar s2 0.4\nvar s3 0.5\n\
        var t1 0.4\nvar t2 0.8\nformula (or (and r1 (or (and s1 t1) (and s2 t2))) (and r2 s3 t2))";

    fn id(s: &str) -> VarId {
        VarId::new(s).unwrap()
    }

    fn example() -> (ProbTable<f64>, Formula, CopyMap) {
        let (vt, f) = parse_lineage(EXAMPLE).unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        (vt, d, cm)
    }

    fn corners(upper: usize, lower: usize) -> (AssignStrategy, AssignStrategy) {
        (
            AssignStrategy::ModelBased([(id("t2"), upper)].into()),
            AssignStrategy::ModelBased([(id("t2"), lower)].into()),
        )
    }

    #[test]
    fn dissociates_running_example() {
        let (_, d, cm) = example();
        assert_eq!(
            d.to_string(),
            "(or (and r1 (or (and s1 t1) (and s2 t2'1))) (and r2 s3 t2'2))"
        );
        assert_eq!(cm.len(), 1);
        let g = cm.group(&id("t2")).unwrap();
        assert_eq!(g.copies.len(), 2);
        assert_eq!(g.context, Context::Disjunctive);
        assert_eq!(cm.original_of(&g.copies[1]), Some(&id("t2")));
        assert!(d.is_read_once());
    }

    #[test]
    fn conjunctive_context() {
        let (_, f) = parse_lineage(
            "var x 0.5\nvar y 0.5\nvar z 0.5\nformula (and (or x y) (or x z))",
        )
        .unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        assert_eq!(d.to_string(), "(and (or x'1 y) (or x'2 z))");
        assert_eq!(cm.group(&id("x")).unwrap().context, Context::Conjunctive);
    }

    #[test]
    fn mixed_context() {
        let (vt, f) = parse_lineage(
            "var x 0.5\nvar y 0.5\nvar z 0.5\nformula (or (and x (or x y)) (and x z))",
        )
        .unwrap();
        let (_, cm) = dissociate(&f).unwrap();
        assert_eq!(cm.group(&id("x")).unwrap().context, Context::Mixed);
        assert_eq!(
            assign_bounds::<f64, _>(&cm, &vt, &AssignStrategy::Symmetric, Direction::Upper),
            Err(Error::MixedContext(id("x")))
        );
    }

    #[test]
    fn nothing_to_dissociate() {
        assert_eq!(
            dissociate(&Formula::var("x").unwrap()),
            Err(Error::NothingToDissociate)
        );
    }

    #[test]
    fn symmetric_assignments() {
        let (vt, _, cm) = example();
        let up = assign_bounds(&cm, &vt, &AssignStrategy::Symmetric, Direction::Upper).unwrap();
        assert_eq!(up.probs.values().copied().collect::<Vec<_>>(), vec![0.8, 0.8]);
        let lo = assign_bounds(&cm, &vt, &AssignStrategy::Symmetric, Direction::Lower).unwrap();
        for &q in lo.probs.values() {
            assert!((q - (1.0 - 0.2f64.sqrt())).abs() < 1e-15);
            assert!((q - 0.5527864).abs() < 1e-7);
        }
    }

    #[test]
    fn model_based_lower_assignment() {
        let (vt, _, cm) = example();
        let (_, lower) = corners(0, 1);
        let lo = assign_bounds(&cm, &vt, &lower, Direction::Lower).unwrap();
        assert_eq!(lo.probs.values().copied().collect::<Vec<_>>(), vec![0.0, 0.8]);
    }

    #[test]
    fn invalid_choices() {
        let (vt, _, cm) = example();
        let bad = AssignStrategy::ModelBased([(id("t2"), 2)].into());
        assert!(matches!(
            assign_bounds::<f64, _>(&cm, &vt, &bad, Direction::Upper),
            Err(Error::InvalidChoice(_))
        ));
        let unknown = AssignStrategy::ModelBased([(id("t2"), 0), (id("r1"), 0)].into());
        assert!(matches!(
            assign_bounds::<f64, _>(&cm, &vt, &unknown, Direction::Upper),
            Err(Error::InvalidChoice(_))
        ));
        let missing = AssignStrategy::ModelBased(BTreeMap::new());
        assert!(matches!(
            assign_bounds::<f64, _>(&cm, &vt, &missing, Direction::Upper),
            Err(Error::InvalidChoice(_))
        ));
    }

    #[test]
    fn running_example_bounds() {
        let (vt, d, cm) = example();
        let value = |s: &AssignStrategy, dir| {
            let asg = assign_bounds(&cm, &vt, s, dir).unwrap();
            bound_value(&d, &asg, &vt).unwrap()
        };
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(value(&AssignStrategy::Symmetric, Direction::Upper), 0.392608));
        assert!(close(value(&corners(1, 0).0, Direction::Upper), 0.41936));
        assert!(close(value(&corners(0, 0).0, Direction::Upper), 0.44056));
        assert!(close(value(&corners(0, 0).1, Direction::Lower), 0.2008));
        assert!(close(value(&corners(0, 1).1, Direction::Lower), 0.2856));
        assert!(close(
            value(&AssignStrategy::Symmetric, Direction::Lower),
            0.297_041_928_945_814_8
        ));
    }

    #[test]
    fn missing_copy_probability() {
        let (vt, d, _) = example();
        let asg = Assignment {
            probs: BTreeMap::new(),
            direction: Direction::Upper,
        };
        assert!(matches!(
            bound_value(&d, &asg, &vt),
            Err(Error::MissingProbability(_))
        ));
    }

    #[test]
    fn frontier_membership() {
        let (_, _, cm) = example();
        let g = cm.group(&id("t2")).unwrap();
        for rule in [GroupRule::Corner(0), GroupRule::Corner(1), GroupRule::Symmetric] {
            let probs = group_probs(g, 0.8, rule, Direction::Lower).unwrap();
            let survive: f64 = probs.iter().map(|q| 1.0 - q).product();
            assert!((survive - 0.2).abs() < 1e-12);
        }
    }
}
