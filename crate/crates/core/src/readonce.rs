//! Exact evaluation of read-once formulas.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::num::{complement, Scalar};
use crate::table::ProbView;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    True,
    False,
    Leaf(usize),
    And,
    Or,
}

#[derive(Debug, Clone)]
struct Node {
    kind: Kind,
    children: Vec<usize>,
}

/// A read-once formula flattened in pre-order, so every child has a larger
/// index than its parent. Evaluating it many times under different leaf
/// probabilities (as the optimizers do) avoids re-walking the tree.
#[derive(Debug, Clone)]
pub struct ReadOnceCircuit {
    nodes: Vec<Node>,
    leaves: Vec<VarId>,
    leaf_index: BTreeMap<VarId, usize>,
}

impl ReadOnceCircuit {
    /// Fails with [`Error::NotReadOnce`] if a variable occurs twice.
    pub fn new(f: &Formula) -> Result<Self> {
        let mut circuit = ReadOnceCircuit {
            nodes: Vec::new(),
            leaves: Vec::new(),
            leaf_index: BTreeMap::new(),
        };
        circuit.push(f)?;
        Ok(circuit)
    }

    fn push(&mut self, f: &Formula) -> Result<usize> {
        let id = self.nodes.len();
        let kind = match f {
            Formula::True => Kind::True,
            Formula::False => Kind::False,
            Formula::Var(v) => {
                let leaf = self.leaves.len();
                if self.leaf_index.insert(v.clone(), leaf).is_some() {
                    return Err(Error::NotReadOnce(v.clone()));
                }
                self.leaves.push(v.clone());
                Kind::Leaf(leaf)
            }
            Formula::And(_) => Kind::And,
            Formula::Or(_) => Kind::Or,
        };
        self.nodes.push(Node {
            kind,
            children: Vec::new(),
        });
        let children = f
            .children()
            .iter()
            .map(|c| self.push(c))
            .collect::<Result<Vec<_>>>()?;
        self.nodes[id].children = children;
        Ok(id)
    }

    /// Variables in leaf order.
    pub fn leaves(&self) -> &[VarId] {
        &self.leaves
    }

    pub fn leaf_index(&self, v: &VarId) -> Option<usize> {
        self.leaf_index.get(v).copied()
    }

    /// Looks up every leaf's probability in `view`.
    pub fn leaf_probs<T, V: ProbView<T> + ?Sized>(&self, view: &V) -> Result<Vec<T>> {
        self.leaves
            .iter()
            .map(|v| view.prob(v).ok_or_else(|| Error::MissingProbability(v.clone())))
            .collect()
    }

    fn node_values<T: Scalar>(&self, leaf_probs: &[T]) -> Vec<T> {
        let mut values = vec![T::zero(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate().rev() {
            values[i] = match node.kind {
                Kind::True => T::one(),
                Kind::False => T::zero(),
                Kind::Leaf(l) => leaf_probs[l].clone(),
                Kind::And => node
                    .children
                    .iter()
                    .fold(T::one(), |acc, &c| acc * values[c].clone()),
                Kind::Or => complement(
                    &node
                        .children
                        .iter()
                        .fold(T::one(), |acc, &c| acc * complement(&values[c])),
                ),
            };
        }
        values
    }

    /// Probability of the formula under independent leaves.
    pub fn eval<T: Scalar>(&self, leaf_probs: &[T]) -> T {
        assert_eq!(leaf_probs.len(), self.leaves.len());
        self.node_values(leaf_probs).swap_remove(0)
    }

    /// Probability and its partial derivative with respect to every leaf
    /// probability, by one forward and one backward pass.
    pub fn gradient<T: Scalar>(&self, leaf_probs: &[T]) -> (T, Vec<T>) {
        assert_eq!(leaf_probs.len(), self.leaves.len());
        let mut values = self.node_values(leaf_probs);
        let mut adjoint = vec![T::zero(); self.nodes.len()];
        let mut grad = vec![T::zero(); self.leaves.len()];
        adjoint[0] = T::one();
        for (i, node) in self.nodes.iter().enumerate() {
            let seed = adjoint[i].clone();
            match node.kind {
                Kind::Leaf(l) => grad[l] = seed,
                Kind::True | Kind::False => {}
                Kind::And | Kind::Or => {
                    // d(parent)/d(child_i) is the product of the other
                    // factors: P_j under And, (1 - P_j) under Or.
                    let factor = |c: usize| {
                        if node.kind == Kind::And {
                            values[c].clone()
                        } else {
                            complement(&values[c])
                        }
                    };
                    let n = node.children.len();
                    let mut suffix = vec![T::one(); n + 1];
                    for k in (0..n).rev() {
                        suffix[k] = suffix[k + 1].clone() * factor(node.children[k]);
                    }
                    let mut prefix = T::one();
                    for (k, &c) in node.children.iter().enumerate() {
                        adjoint[c] = seed.clone() * prefix.clone() * suffix[k + 1].clone();
                        prefix = prefix * factor(c);
                    }
                }
            }
        }
        (values.swap_remove(0), grad)
    }
}

/// Exact probability of a read-once formula.
pub fn eval_read_once<T: Scalar, V: ProbView<T> + ?Sized>(f: &Formula, probs: &V) -> Result<T> {
    let circuit = ReadOnceCircuit::new(f)?;
    let leaf_probs = circuit.leaf_probs(probs)?;
    Ok(circuit.eval(&leaf_probs))
}
