//! Seeded random formulas shared by the integration tests.
#![allow(dead_code)]

use anybound::{Formula, ProbTable, VarId, VarTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn id(s: &str) -> VarId {
    VarId::new(s).unwrap()
}

pub const RUNNING_EXAMPLE: &str = "var r1 0.5\nvar r2 0.6\nvar s1 0.3\nvar s2 0.4\nvar s3 0.5\n\
    var t1 0.4\nvar t2 0.8\nformula (or (and r1 (or (and s1 t1) (and s2 t2))) (and r2 s3 t2))";

/// Probabilities mostly inside (0, 1), occasionally exactly 0 or 1.
pub fn random_probs<R: Rng>(rng: &mut R, vars: &[VarId], edge_cases: bool) -> VarTable {
    let mut vt = ProbTable::new();
    for v in vars {
        let p = if edge_cases && rng.gen_bool(0.04) {
            if rng.gen_bool(0.5) {
                0.0
            } else {
                1.0
            }
        } else {
            rng.gen_range(0.02..0.98)
        };
        vt.insert(v.clone(), p).unwrap();
    }
    vt
}

fn pool(n: usize) -> Vec<VarId> {
    (0..n).map(|i| id(&format!("x{i}"))).collect()
}

fn random_tree<R: Rng>(rng: &mut R, vars: &[VarId], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return Formula::Var(vars.choose(rng).unwrap().clone());
    }
    let n = rng.gen_range(2..=3);
    let children: Vec<Formula> = (0..n).map(|_| random_tree(rng, vars, depth - 1)).collect();
    if rng.gen_bool(0.5) {
        Formula::and(children)
    } else {
        Formula::or(children)
    }
}

/// A simplified monotone formula over at most `max_vars` variables that is
/// neither constant nor read-once.
pub fn random_shared<R: Rng>(rng: &mut R, max_vars: usize, edge_cases: bool) -> (VarTable, Formula) {
    loop {
        let n = rng.gen_range(3..=max_vars);
        let vars = pool(n);
        let depth = rng.gen_range(2..=5);
        let f = random_tree(rng, &vars, depth).simplify();
        if f.is_const() || f.is_read_once() {
            continue;
        }
        let used: Vec<VarId> = f.vars().into_iter().collect();
        return (random_probs(rng, &used, edge_cases), f);
    }
}

/// A DNF over at most `max_vars` variables; repeated variables only meet
/// under the top-level disjunction.
pub fn random_dnf<R: Rng>(rng: &mut R, max_vars: usize) -> (VarTable, Formula) {
    loop {
        let n = rng.gen_range(3..=max_vars);
        let vars = pool(n);
        let clauses: Vec<Formula> = (0..rng.gen_range(2..=6))
            .map(|_| {
                let mut vs = vars.clone();
                vs.shuffle(rng);
                let k = rng.gen_range(1..=3.min(n));
                Formula::and(vs[..k].iter().cloned().map(Formula::Var))
            })
            .collect();
        let f = Formula::or(clauses).simplify();
        if f.is_const() || f.is_read_once() {
            continue;
        }
        let used: Vec<VarId> = f.vars().into_iter().collect();
        return (random_probs(rng, &used, false), f);
    }
}

fn read_once_over<R: Rng>(rng: &mut R, vars: &[VarId], and: bool) -> Formula {
    if vars.len() == 1 {
        return Formula::Var(vars[0].clone());
    }
    let parts = rng.gen_range(2..=vars.len().min(3));
    let mut cuts: Vec<usize> = (1..vars.len()).collect();
    cuts.shuffle(rng);
    let mut cuts = cuts[..parts - 1].to_vec();
    cuts.sort_unstable();
    let mut children = Vec::new();
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(vars.len())) {
        children.push(read_once_over(rng, &vars[start..c], !and));
        start = c;
    }
    if and {
        Formula::and(children)
    } else {
        Formula::or(children)
    }
}

/// A read-once formula over `2..=max_vars` distinct variables.
pub fn random_read_once<R: Rng>(rng: &mut R, max_vars: usize) -> (VarTable, Formula) {
    let n = rng.gen_range(2..=max_vars);
    let mut vars = pool(n);
    vars.shuffle(rng);
    let and = rng.gen_bool(0.5);
    let f = read_once_over(rng, &vars, and);
    (random_probs(rng, &vars, false), f)
}

/// An unsimplified random tree, possibly constant or read-once, with
/// constants sprinkled in.
pub fn random_raw<R: Rng>(rng: &mut R, max_vars: usize) -> (VarTable, Formula) {
    let vars = pool(rng.gen_range(2..=max_vars));
    let f = random_tree_with_constants(rng, &vars, 4);
    let used: Vec<VarId> = f.vars().into_iter().collect();
    (random_probs(rng, &used, true), f)
}

fn random_tree_with_constants<R: Rng>(rng: &mut R, vars: &[VarId], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..12) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::Var(vars.choose(rng).unwrap().clone()),
        };
    }
    let n = rng.gen_range(1..=3);
    let children: Vec<Formula> = (0..n)
        .map(|_| random_tree_with_constants(rng, vars, depth - 1))
        .collect();
    if rng.gen_bool(0.5) {
        Formula::and(children)
    } else {
        Formula::or(children)
    }
}
