//! Optimizing the lower dissociation bound.
//!
//! For a disjunctively dissociated variable with probability `p` and `k`
//! copies, every assignment with `prod (1 - p_i) = 1 - p` is an optimal
//! oblivious lower bound. Writing `1 - p_i = (1 - p)^w_i` turns this curved
//! frontier into the unit simplex `sum w_i = 1, w_i >= 0`: corners are the
//! model-based bounds and the barycenter is the symmetric bound. Projected
//! gradient ascent then searches the simplex for the best bound.

use std::collections::BTreeMap;

use crate::dissociation::{CopyMap, Context};
use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::num::Real;
use crate::readonce::ReadOnceCircuit;
use crate::table::{Overlay, ProbView};

/// Defaults used by the engine.
pub const DEFAULT_STEPS: usize = 10;
pub const DEFAULT_STEP_SIZE: f64 = 0.1;
const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_HALVINGS: usize = 5;

/// Euclidean projection onto the probability simplex (sort and threshold).
///
/// # Panics
///
/// If `v` is empty.
pub fn project_simplex<T: Real>(v: &[T]) -> Vec<T> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumulative = cumulative + u;
        let candidate = (cumulative - T::one()) / T::lit((j + 1) as f64);
        if u - candidate > T::zero() {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// Weights of one dissociated variable on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierGroup<T> {
    pub original: VarId,
    pub p: T,
    pub copies: Vec<VarId>,
    pub weights: Vec<T>,
}

impl<T: Real> FrontierGroup<T> {
    /// `1 - (1 - p)^w_i` for every copy.
    pub fn copy_probs(&self) -> Vec<T> {
        let q = T::one() - self.p;
        self.weights
            .iter()
            .map(|&w| T::one() - q.powf(w))
            .collect()
    }
}

/// A point on the lower-bound frontier of every optimized group.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint<T> {
    pub groups: Vec<FrontierGroup<T>>,
}

impl<T: Real> FrontierPoint<T> {
    pub fn copy_probs(&self) -> BTreeMap<VarId, T> {
        self.groups
            .iter()
            .flat_map(|g| g.copies.iter().cloned().zip(g.copy_probs()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<T> {
    /// Best point seen.
    pub point: FrontierPoint<T>,
    pub bound: T,
    pub steps_taken: usize,
    /// `(iteration, best bound so far)`, starting with iteration 0.
    pub trace: Vec<(usize, T)>,
}

#[derive(Debug, Clone)]
struct Slot<T> {
    original: VarId,
    p: T,
    /// `-ln(1 - p)`, the derivative scale of the reparametrization.
    neg_log_q: T,
    copies: Vec<VarId>,
    leaves: Vec<usize>,
}

/// A dissociated formula prepared for repeated lower-bound evaluation.
#[derive(Debug, Clone)]
pub struct LowerProblem<T> {
    circuit: ReadOnceCircuit,
    base: Vec<T>,
    slots: Vec<Slot<T>>,
}

impl<T: Real> LowerProblem<T> {
    /// Every group must be disjunctive. Groups with fewer than two copies
    /// are not optimized; their copy keeps the original probability.
    pub fn new<V: ProbView<T> + ?Sized>(dissociated: &Formula, cm: &CopyMap, vt: &V) -> Result<Self> {
        for g in cm.groups().filter(|g| g.copies.len() >= 2) {
            match g.context {
                Context::Disjunctive => {}
                Context::Mixed => return Err(Error::MixedContext(g.original.clone())),
                Context::Conjunctive => {
                    return Err(Error::UnsupportedContext(g.original.clone()))
                }
            }
        }
        Self::with_fixed(dissociated, cm, vt, &BTreeMap::new())
    }

    /// Optimizes the disjunctive groups only. Copies of the other groups are
    /// held at the probabilities given in `fixed`.
    pub fn with_fixed<V: ProbView<T> + ?Sized>(
        dissociated: &Formula,
        cm: &CopyMap,
        vt: &V,
        fixed: &BTreeMap<VarId, T>,
    ) -> Result<Self> {
        let circuit = ReadOnceCircuit::new(dissociated)?;
        let mut top = fixed.clone();
        let mut slots = Vec::new();
        for g in cm.groups() {
            let p = vt
                .prob(&g.original)
                .ok_or_else(|| Error::MissingProbability(g.original.clone()))?;
            let optimized = g.copies.len() >= 2 && g.context == Context::Disjunctive;
            if !optimized {
                if g.copies.len() < 2 {
                    for c in &g.copies {
                        top.insert(c.clone(), p);
                    }
                }
                continue;
            }
            if p >= T::one() {
                return Err(Error::DegenerateGroup(g.original.clone()));
            }
            let leaves = g
                .copies
                .iter()
                .map(|c| {
                    circuit
                        .leaf_index(c)
                        .ok_or_else(|| Error::VariableAbsent(c.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            // Placeholder values, overwritten at every evaluation.
            for c in &g.copies {
                top.insert(c.clone(), p);
            }
            slots.push(Slot {
                original: g.original.clone(),
                p,
                neg_log_q: -(T::one() - p).ln(),
                copies: g.copies.clone(),
                leaves,
            });
        }
        let view = Overlay { top: &top, base: &vt };
        let base = circuit.leaf_probs(&view)?;
        Ok(Self {
            circuit,
            base,
            slots,
        })
    }

    /// Number of optimized groups.
    pub fn group_count(&self) -> usize {
        self.slots.len()
    }

    /// The symmetric lower bound: every group at its barycenter.
    pub fn barycenter(&self) -> FrontierPoint<T> {
        self.point_from(|slot| {
            let k = slot.copies.len();
            vec![T::one() / T::lit(k as f64); k]
        })
    }

    /// The model-based lower bound keeping copy `choice[g]` of every group.
    pub fn corner(&self, choice: &[usize]) -> FrontierPoint<T> {
        let mut i = 0;
        self.point_from(|slot| {
            let j = choice[i];
            i += 1;
            (0..slot.copies.len())
                .map(|c| if c == j { T::one() } else { T::zero() })
                .collect()
        })
    }

    fn point_from<F: FnMut(&Slot<T>) -> Vec<T>>(&self, mut weights: F) -> FrontierPoint<T> {
        FrontierPoint {
            groups: self
                .slots
                .iter()
                .map(|s| FrontierGroup {
                    original: s.original.clone(),
                    p: s.p,
                    copies: s.copies.clone(),
                    weights: weights(s),
                })
                .collect(),
        }
    }

    fn leaf_probs(&self, point: &FrontierPoint<T>) -> Vec<T> {
        let mut probs = self.base.clone();
        for (slot, group) in self.slots.iter().zip(&point.groups) {
            for (&leaf, q) in slot.leaves.iter().zip(group.copy_probs()) {
                probs[leaf] = q;
            }
        }
        probs
    }

    /// Lower bound induced by `point`.
    pub fn bound_at(&self, point: &FrontierPoint<T>) -> T {
        self.circuit.eval(&self.leaf_probs(point))
    }

    /// Bound and its gradient with respect to every weight, grouped like the
    /// point's weights.
    pub fn weight_gradient(&self, point: &FrontierPoint<T>) -> (T, Vec<Vec<T>>) {
        let probs = self.leaf_probs(point);
        let (value, grad) = self.circuit.gradient(&probs);
        let per_group = self
            .slots
            .iter()
            .map(|slot| {
                slot.leaves
                    .iter()
                    .map(|&leaf| grad[leaf] * (T::one() - probs[leaf]) * slot.neg_log_q)
                    .collect()
            })
            .collect();
        (value, per_group)
    }

    /// Projected gradient ascent from the barycenter with backtracking.
    pub fn pgd(&self, steps: usize, step_size: T) -> OptResult<T> {
        let mut point = self.barycenter();
        let mut bound = self.bound_at(&point);
        let mut trace = vec![(0, bound)];
        let mut steps_taken = 0;
        if self.slots.is_empty() {
            return OptResult {
                point,
                bound,
                steps_taken,
                trace,
            };
        }
        for iteration in 1..=steps {
            let (_, grad) = self.weight_gradient(&point);
            let mut eta = step_size;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let mut candidate = point.clone();
                for (group, g) in candidate.groups.iter_mut().zip(&grad) {
                    let moved: Vec<T> = group
                        .weights
                        .iter()
                        .zip(g)
                        .map(|(&w, &d)| w + eta * d)
                        .collect();
                    group.weights = project_simplex(&moved);
                }
                let value = self.bound_at(&candidate);
                if value >= bound {
                    accepted = Some((candidate, value));
                    break;
                }
                eta = eta * T::lit(BACKTRACK_FACTOR);
            }
            let Some((candidate, value)) = accepted else {
                break;
            };
            point = candidate;
            bound = value;
            steps_taken += 1;
            trace.push((iteration, bound));
        }
        OptResult {
            point,
            bound,
            steps_taken,
            trace,
        }
    }

    /// Gradient-guided search over model-based corners.
    ///
    /// Round one jumps from the barycenter to the corner favoured by the
    /// gradient in every group. Each further round re-evaluates the gradient
    /// at the current corner and swaps the corner of a single group, trying
    /// groups by decreasing gradient gain and keeping the first swap that
    /// improves the bound. The result is the best point evaluated, the
    /// barycenter included.
    pub fn hybrid(&self, steps: usize) -> OptResult<T> {
        let start = self.barycenter();
        let start_bound = self.bound_at(&start);
        let mut best = (start.clone(), start_bound);
        let mut trace = vec![(0, start_bound)];
        if steps == 0 || self.slots.is_empty() {
            return OptResult {
                point: start,
                bound: start_bound,
                steps_taken: 0,
                trace,
            };
        }

        let (_, grad) = self.weight_gradient(&start);
        let mut choice: Vec<usize> = grad.iter().map(|g| argmax(g)).collect();
        let mut current = self.corner(&choice);
        let mut current_bound = self.bound_at(&current);
        if current_bound > best.1 {
            best = (current.clone(), current_bound);
        }
        let mut steps_taken = 1;
        trace.push((1, best.1));

        for round in 2..=steps {
            let (_, grad) = self.weight_gradient(&current);
            let mut swaps: Vec<(usize, usize, T)> = grad
                .iter()
                .enumerate()
                .filter_map(|(g, d)| {
                    let j = argmax(d);
                    (j != choice[g]).then(|| (g, j, d[j] - d[choice[g]]))
                })
                .collect();
            swaps.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal));

            let mut improved = false;
            for (g, j, _) in swaps {
                let mut next = choice.clone();
                next[g] = j;
                let point = self.corner(&next);
                let value = self.bound_at(&point);
                if value > current_bound {
                    choice = next;
                    current = point;
                    current_bound = value;
                    improved = true;
                    break;
                }
            }
            if !improved {
                break;
            }
            if current_bound > best.1 {
                best = (current.clone(), current_bound);
            }
            steps_taken += 1;
            trace.push((round, best.1));
        }

        OptResult {
            point: best.0,
            bound: best.1,
            steps_taken,
            trace,
        }
    }
}

/// Index of the largest entry, lowest index on ties.
fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Best lower bound found by projected gradient ascent over the frontier.
pub fn pgd_lower<T: Real, V: ProbView<T> + ?Sized>(
    dissociated: &Formula,
    cm: &CopyMap,
    vt: &V,
    steps: usize,
    step_size: T,
) -> Result<OptResult<T>> {
    if step_size.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidConfig("step size must be positive".into()));
    }
    Ok(LowerProblem::new(dissociated, cm, vt)?.pgd(steps, step_size))
}

/// Best model-based lower bound reached by gradient-guided corner moves.
pub fn hybrid_lower<T: Real, V: ProbView<T> + ?Sized>(
    dissociated: &Formula,
    cm: &CopyMap,
    vt: &V,
    steps: usize,
) -> Result<OptResult<T>> {
    Ok(LowerProblem::new(dissociated, cm, vt)?.hybrid(steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissociation::{dissociate, CopyGroup};
    use crate::lineage::parse_lineage;
    use crate::table::ProbTable;

    const EXAMPLE: &str = "var r1 0.5\nvar r2 0.6\nvar s1 0.3\nvar s2 0.4\nvar s3 0.5\n\
        var t1 0.4\nvar t2 0.8\nformula (or (and r1 (or (and s1 t1) (and s2 t2))) (and r2 s3 t2))";

    const SYMMETRIC_LOWER: f64 = 0.297_041_928_945_814_8;
    // Dense grid search over the frontier (resolution 1e-4).
    const GRID_OPTIMUM: f64 = 0.304_340_458_739_055_6;

    fn example() -> (ProbTable<f64>, Formula, CopyMap) {
        let (vt, f) = parse_lineage(EXAMPLE).unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        (vt, d, cm)
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn projection_examples() {
        assert!(close(&project_simplex(&[0.6, 0.6]), &[0.5, 0.5]));
        assert!(close(&project_simplex(&[1.2, -0.2]), &[1.0, 0.0]));
        assert!(close(&project_simplex(&[0.5, 0.5]), &[0.5, 0.5]));
        assert!(close(&project_simplex(&[3.0]), &[1.0]));
        assert!(close(&project_simplex(&[0.0, 0.0, 0.0]), &[1.0 / 3.0; 3]));
    }

    #[test]
    fn pgd_zero_steps_is_symmetric() {
        let (vt, d, cm) = example();
        let r = pgd_lower(&d, &cm, &vt, 0, 0.1).unwrap();
        assert!((r.bound - SYMMETRIC_LOWER).abs() < 1e-12);
        assert_eq!(r.steps_taken, 0);
    }

    #[test]
    fn pgd_ten_steps_within_bracket() {
        let (vt, d, cm) = example();
        let r = pgd_lower(&d, &cm, &vt, 10, 0.1).unwrap();
        assert!(r.bound >= SYMMETRIC_LOWER);
        assert!(r.bound <= GRID_OPTIMUM + 1e-9);
        assert!(r.trace.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!((LowerProblem::new(&d, &cm, &vt).unwrap().bound_at(&r.point) - r.bound).abs() < 1e-15);
    }

    #[test]
    fn pgd_converges_to_grid_optimum() {
        let (vt, d, cm) = example();
        let r = pgd_lower(&d, &cm, &vt, 500, 0.1).unwrap();
        assert!((r.bound - GRID_OPTIMUM).abs() < 1e-4, "{}", r.bound);
        let probs = r.point.groups[0].copy_probs();
        assert!((probs[0] - 0.3900).abs() < 5e-3, "{probs:?}");
        assert!((probs[1] - 0.6721).abs() < 5e-3, "{probs:?}");
    }

    #[test]
    fn iterates_stay_on_frontier() {
        let (vt, d, cm) = example();
        let problem = LowerProblem::new(&d, &cm, &vt).unwrap();
        for steps in 0..20 {
            let r = problem.pgd(steps, 0.3);
            let survive: f64 = r.point.groups[0]
                .copy_probs()
                .iter()
                .map(|q| 1.0 - q)
                .product();
            assert!((survive - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn corners_and_barycenter() {
        let (vt, d, cm) = example();
        let problem = LowerProblem::new(&d, &cm, &vt).unwrap();
        assert!((problem.bound_at(&problem.corner(&[0])) - 0.2008).abs() < 1e-12);
        assert!((problem.bound_at(&problem.corner(&[1])) - 0.2856).abs() < 1e-12);
        let corner = problem.corner(&[1]).groups[0].copy_probs();
        assert!(close(&corner, &[0.0, 0.8]));
    }

    #[test]
    fn barycenter_gradient_matches_finite_differences() {
        let (vt, d, cm) = example();
        let problem = LowerProblem::new(&d, &cm, &vt).unwrap();
        let (_, grad) = problem.weight_gradient(&problem.barycenter());
        // Leaf influences 0.146813 and 0.252813 (finite differences),
        // scaled by (1 - p_i) * -ln(0.2).
        let q = 0.2f64.sqrt();
        let scale = q * -(0.2f64.ln());
        assert!((grad[0][0] - 0.146_812_877_8 * scale).abs() < 1e-8);
        assert!((grad[0][1] - 0.252_812_877_8 * scale).abs() < 1e-8);
    }

    #[test]
    fn hybrid_running_example() {
        let (vt, d, cm) = example();
        let r = hybrid_lower(&d, &cm, &vt, 10).unwrap();
        assert!((r.bound - SYMMETRIC_LOWER).abs() < 1e-12);
        let r0 = hybrid_lower(&d, &cm, &vt, 0).unwrap();
        assert_eq!(r0.trace.len(), 1);
        assert!((r0.bound - SYMMETRIC_LOWER).abs() < 1e-12);
    }

    #[test]
    fn hybrid_tie_takes_lowest_index() {
        let (vt, f) = parse_lineage("var x 0.5\nformula (or x x)").unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        let problem = LowerProblem::new(&d, &cm, &vt).unwrap();
        let (_, grad) = problem.weight_gradient(&problem.barycenter());
        assert_eq!(grad[0][0], grad[0][1]);
        let r = problem.hybrid(1);
        // Every corner of (or x'1 x'2) gives exactly p(x); the barycenter
        // does too, so the best-of keeps the start.
        assert!((r.bound - 0.5).abs() < 1e-12);
        let corner = problem.corner(&[argmax(&grad[0])]);
        assert_eq!(corner.groups[0].weights, vec![1.0, 0.0]);
    }

    #[test]
    fn single_copy_group_is_not_optimized() {
        let x = VarId::new("x").unwrap();
        let x1 = VarId::copy_of(&x, 1);
        let mut cm = CopyMap::new();
        cm.insert_group(CopyGroup {
            original: x.clone(),
            copies: vec![x1.clone()],
            context: Context::Disjunctive,
        })
        .unwrap();
        let f = Formula::or([Formula::Var(x1), Formula::var("y").unwrap()]);
        let vt: ProbTable<f64> = [(x, 0.5), (VarId::new("y").unwrap(), 0.4)]
            .into_iter()
            .collect();
        let r = pgd_lower(&f, &cm, &vt, 10, 0.1).unwrap();
        assert!((r.bound - 0.7).abs() < 1e-12);
        assert!(r.point.groups.is_empty());
    }

    #[test]
    fn rejects_degenerate_and_mixed_groups() {
        let (vt, f) = parse_lineage("var x 1\nvar y 0.5\nformula (or (and x y) x)").unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        assert!(matches!(
            pgd_lower(&d, &cm, &vt, 1, 0.1),
            Err(Error::DegenerateGroup(_))
        ));
        let (vt, f) = parse_lineage(
            "var x 0.5\nvar y 0.5\nvar z 0.5\nformula (or (and x (or x y)) (and x z))",
        )
        .unwrap();
        let (d, cm) = dissociate(&f).unwrap();
        assert!(matches!(
            hybrid_lower(&d, &cm, &vt, 1),
            Err(Error::MixedContext(_))
        ));
    }

    #[test]
    fn f32_scalar() {
        let (vt, f) = parse_lineage(EXAMPLE).unwrap();
        let vt: ProbTable<f32> = vt.convert();
        let (d, cm) = dissociate(&f).unwrap();
        let r = pgd_lower(&d, &cm, &vt, 500, 0.1f32).unwrap();
        assert!((r.bound as f64 - GRID_OPTIMUM).abs() < 1e-3);
    }
}
