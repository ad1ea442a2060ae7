//! Brute-force ground truth for small instances.

use std::collections::BTreeMap;

use crate::dissociation::{bound_value, Assignment, Context, CopyMap, Direction};
use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::lower_opt::{FrontierGroup, FrontierPoint};
use crate::num::{complement, Real, Scalar};
use crate::table::ProbView;

/// Largest number of distinct variables the enumeration accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimit {
    pub max_vars: usize,
}

impl Default for OracleLimit {
    fn default() -> Self {
        Self { max_vars: 25 }
    }
}

impl OracleLimit {
    pub fn new(max_vars: usize) -> Result<Self> {
        if max_vars == 0 {
            return Err(Error::InvalidConfig("oracle limit must be at least 1".into()));
        }
        Ok(Self { max_vars })
    }
}

enum Gate {
    Const(bool),
    Leaf(usize),
    And(Vec<usize>),
    Or(Vec<usize>),
}

/// Formula over variable indices, children after parents.
struct Gates(Vec<Gate>);

impl Gates {
    fn new(f: &Formula, index: &BTreeMap<VarId, usize>) -> Self {
        fn push(f: &Formula, index: &BTreeMap<VarId, usize>, out: &mut Vec<Gate>) -> usize {
            let id = out.len();
            out.push(Gate::Const(false));
            out[id] = match f {
                Formula::True => Gate::Const(true),
                Formula::False => Gate::Const(false),
                Formula::Var(v) => Gate::Leaf(index[v]),
                Formula::And(cs) => Gate::And(cs.iter().map(|c| push(c, index, out)).collect()),
                Formula::Or(cs) => Gate::Or(cs.iter().map(|c| push(c, index, out)).collect()),
            };
            id
        }
        let mut out = Vec::new();
        push(f, index, &mut out);
        Gates(out)
    }

    /// Evaluates 64 assignments at once; bit `b` of `inputs[i]` is the value
    /// of variable `i` in assignment `b`.
    fn eval_words(&self, inputs: &[u64], scratch: &mut [u64]) -> u64 {
        for (i, gate) in self.0.iter().enumerate().rev() {
            scratch[i] = match gate {
                Gate::Const(true) => u64::MAX,
                Gate::Const(false) => 0,
                Gate::Leaf(v) => inputs[*v],
                Gate::And(cs) => cs.iter().fold(u64::MAX, |acc, &c| acc & scratch[c]),
                Gate::Or(cs) => cs.iter().fold(0, |acc, &c| acc | scratch[c]),
            };
        }
        scratch[0]
    }
}

/// Weight of every assignment of `probs`, indexed by bitmask.
fn weight_table<T: Scalar>(probs: &[T]) -> Vec<T> {
    let mut table = vec![T::one()];
    for p in probs {
        let q = complement(p);
        let mut next = Vec::with_capacity(table.len() * 2);
        next.extend(table.iter().map(|w| w.clone() * q.clone()));
        next.extend(table.iter().map(|w| w.clone() * p.clone()));
        table = next;
    }
    table
}

const LOW_BITS: usize = 6;

/// Exact probability by summing the weight of every satisfying assignment.
///
/// Assignments are processed 64 at a time with bit-parallel formula
/// evaluation. Assignment weights are products of precomputed tables for
/// the low, middle and high variable blocks, so no division is involved and
/// the sum is exact for rational scalars.
pub fn exact_prob<T: Scalar, V: ProbView<T> + ?Sized>(
    f: &Formula,
    vt: &V,
    limit: OracleLimit,
) -> Result<T> {
    let vars: Vec<VarId> = f.vars().into_iter().collect();
    let n = vars.len();
    if n > limit.max_vars {
        return Err(Error::TooManyVariables {
            found: n,
            limit: limit.max_vars,
        });
    }
    let probs = vars
        .iter()
        .map(|v| vt.prob(v).ok_or_else(|| Error::MissingProbability(v.clone())))
        .collect::<Result<Vec<T>>>()?;
    let index: BTreeMap<VarId, usize> = vars.iter().cloned().zip(0..).collect();
    let gates = Gates::new(f, &index);

    let low = n.min(LOW_BITS);
    let high = n - low;
    let mid = high / 2;
    let low_w = weight_table(&probs[..low]);
    let mid_w = weight_table(&probs[low..low + mid]);
    let top_w = weight_table(&probs[low + mid..]);

    let mut inputs = vec![0u64; n];
    for (i, word) in inputs.iter_mut().enumerate().take(low) {
        *word = (0..64u64)
            .filter(|b| (b >> i) & 1 == 1)
            .fold(0, |acc, b| acc | (1 << b));
    }
    let valid = if low == LOW_BITS {
        u64::MAX
    } else {
        (1u64 << (1 << low)) - 1
    };
    let mut scratch = vec![0u64; gates.0.len()];
    let mut total = T::zero();
    for chunk in 0..(1usize << high) {
        for j in 0..high {
            inputs[low + j] = if (chunk >> j) & 1 == 1 { u64::MAX } else { 0 };
        }
        let mut word = gates.eval_words(&inputs, &mut scratch) & valid;
        if word == 0 {
            continue;
        }
        let mut partial = T::zero();
        while word != 0 {
            let b = word.trailing_zeros() as usize;
            partial = partial + low_w[b].clone();
            word &= word - 1;
        }
        let mid_part = chunk & ((1 << mid) - 1);
        let top_part = chunk >> mid;
        total = total + partial * mid_w[mid_part].clone() * top_w[top_part].clone();
    }
    Ok(total)
}

/// Exact probability by recursive Shannon expansion on the most frequent
/// variable. Exponential; meant to cross-check [`exact_prob`].
pub fn exact_prob_shannon<T: Scalar, V: ProbView<T> + ?Sized>(
    f: &Formula,
    vt: &V,
    limit: OracleLimit,
) -> Result<T> {
    let found = f.vars().len();
    if found > limit.max_vars {
        return Err(Error::TooManyVariables {
            found,
            limit: limit.max_vars,
        });
    }
    fn go<T: Scalar, V: ProbView<T> + ?Sized>(f: &Formula, vt: &V) -> Result<T> {
        match f {
            Formula::True => return Ok(T::one()),
            Formula::False => return Ok(T::zero()),
            _ => {}
        }
        let occ = f.occurrences();
        let (pivot, _) = occ
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .expect("non-constant formula has a variable");
        let p = vt
            .prob(pivot)
            .ok_or_else(|| Error::MissingProbability(pivot.clone()))?;
        let hi = go(&f.condition(pivot, true), vt)?;
        let lo = go(&f.condition(pivot, false), vt)?;
        Ok(p.clone() * hi + complement(&p) * lo)
    }
    go(&f.simplify(), vt)
}

/// All weight vectors with `k` entries that are multiples of `1/m` and sum
/// to one, `m = round(1 / resolution)`.
pub fn grid_points(k: usize, resolution: f64) -> Result<Vec<Vec<f64>>> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidResolution(resolution));
    }
    let m = (1.0 / resolution).round() as usize;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(k: usize, left: usize, m: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if current.len() + 1 == k {
            current.push(left);
            out.push(current.iter().map(|&c| c as f64 / m as f64).collect());
            current.pop();
            return;
        }
        for c in 0..=left {
            current.push(c);
            rec(k, left - c, m, current, out);
            current.pop();
        }
    }
    if k > 0 {
        rec(k, m, m, &mut current, &mut out);
    }
    Ok(out)
}

/// Best optimal-oblivious lower bound for a single disjunctively
/// dissociated variable, by exhaustive search over a frontier grid.
pub fn grid_optimal_lower<T: Real, V: ProbView<T>>(
    dissociated: &Formula,
    cm: &CopyMap,
    vt: &V,
    resolution: f64,
) -> Result<(FrontierPoint<T>, T)> {
    let shared: Vec<_> = cm.groups().filter(|g| g.copies.len() >= 2).collect();
    if shared.len() != 1 {
        return Err(Error::TooManyGroups(shared.len()));
    }
    let group = shared[0];
    match group.context {
        Context::Disjunctive => {}
        Context::Mixed => return Err(Error::MixedContext(group.original.clone())),
        Context::Conjunctive => return Err(Error::UnsupportedContext(group.original.clone())),
    }
    let p = vt
        .prob(&group.original)
        .ok_or_else(|| Error::MissingProbability(group.original.clone()))?;
    if p >= T::one() {
        return Err(Error::DegenerateGroup(group.original.clone()));
    }
    let q = T::one() - p;

    let mut best: Option<(Vec<T>, T)> = None;
    for weights in grid_points(group.copies.len(), resolution)? {
        let weights: Vec<T> = weights.into_iter().map(T::lit).collect();
        let probs = group
            .copies
            .iter()
            .cloned()
            .zip(weights.iter().map(|&w| T::one() - q.powf(w)))
            .collect();
        let asg = Assignment {
            probs,
            direction: Direction::Lower,
        };
        let value = bound_value(dissociated, &asg, vt)?;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((weights, value));
        }
    }
    let (weights, value) = best.expect("grid is never empty");
    Ok((
        FrontierPoint {
            groups: vec![FrontierGroup {
                original: group.original.clone(),
                p,
                copies: group.copies.clone(),
                weights,
            }],
        },
        value,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissociation::dissociate;
    use crate::lineage::parse_lineage;
    use crate::table::ProbTable;

    const EXAMPLE: &str = "var r1 0.5\nvar r2 0.6\nvar s1 0.3\nvar s2 0.4\nvar s3 0.5\n\
        var t1 0.4\nvar t2 0.8\nformula (or (and r1 (or (and s1 t1) (and s2 t2))) (and r2 s3 t2))";

    #[test]
    fn running_example_exact() {
        let (vt, f) = parse_lineage(EXAMPLE).unwrap();
        let p = exact_prob(&f, &vt, OracleLimit::default()).unwrap();
        assert!((p - 0.38416).abs() < 1e-12);
        let s = exact_prob_shannon(&f, &vt, OracleLimit::default()).unwrap();
        assert!((s - 0.38416).abs() < 1e-12);
    }

    #[test]
    fn trivial_cases() {
        let vt: ProbTable<f64> = [(VarId::new("x").unwrap(), 0.7)].into_iter().collect();
        let x = Formula::var("x").unwrap();
        assert!((exact_prob(&x, &vt, OracleLimit::default()).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(exact_prob(&Formula::False, &vt, OracleLimit::default()).unwrap(), 0.0);
        assert_eq!(exact_prob(&Formula::True, &vt, OracleLimit::default()).unwrap(), 1.0);
    }

    #[test]
    fn variable_limit() {
        let (vt, f) = parse_lineage(EXAMPLE).unwrap();
        assert_eq!(
            exact_prob(&f, &vt, OracleLimit::new(6).unwrap()),
            Err(Error::TooManyVariables { found: 7, limit: 6 })
        );
        assert!(OracleLimit::new(0).is_err());
    }

    #[test]
    fn many_variables_cross_block() {
        // 20 independent variables in one Or: 1 - prod(1 - p_i).
        let names: Vec<String> = (0..20).map(|i| format!("x{i}")).collect();
        let f = Formula::or(names.iter().map(|n| Formula::var(n).unwrap()));
        let vt: ProbTable<f64> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (VarId::new(n).unwrap(), 0.01 * (i + 1) as f64))
            .collect();
        let expected = 1.0 - (0..20).map(|i| 1.0 - 0.01 * (i + 1) as f64).product::<f64>();
        let p = exact_prob(&f, &vt, OracleLimit::default()).unwrap();
        assert!((p - expected).abs() < 1e-12);
    }

    #[test]
    fn grid_running_example() {
        let (vt, f) = parse_lineage(EXAMPLE).unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        let (point, value) = grid_optimal_lower(&d, &cm, &vt, 1e-4).unwrap();
        assert!((value - 0.304_340_458_739_055_6).abs() < 1e-12);
        let probs = point.groups[0].copy_probs();
        assert!((probs[0] - 0.3900).abs() < 1e-4);
        assert!((probs[1] - 0.6721).abs() < 1e-4);
    }

    #[test]
    fn grid_definition() {
        let pts = grid_points(2, 0.5).unwrap();
        assert_eq!(pts, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(grid_points(3, 0.25).unwrap().len(), 15);
        assert!(grid_points(2, 0.0).is_err());
    }

    #[test]
    fn grid_rejects_degenerate_group() {
        let (vt, f) = parse_lineage("var x 1\nvar y 0.5\nformula (or (and x y) x)").unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        assert!(matches!(
            grid_optimal_lower(&d, &cm, &vt, 0.1),
            Err(Error::DegenerateGroup(_))
        ));
    }

    #[test]
    fn grid_rejects_multiple_groups() {
        let (vt, f) = parse_lineage(
            "var x 0.5\nvar y 0.5\nvar a 0.5\nformula (or (and x y) (and x a) (and y a))",
        )
        .unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        assert!(matches!(
            grid_optimal_lower(&d, &cm, &vt, 0.1),
            Err(Error::TooManyGroups(3))
        ));
    }
}
