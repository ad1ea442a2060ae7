//! Exact rational arithmetic through the generic scalar interfaces.

mod common;

use anybound::{
    eval_read_once, exact_prob, exact_prob_shannon, influence_all, parse_lineage, Bounds,
    OracleLimit, ProbTable, ReadOnceCircuit,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use common::*;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn example() -> (ProbTable<BigRational>, anybound::Formula) {
    let (vt, f) = parse_lineage(RUNNING_EXAMPLE).unwrap();
    let exact = vt
        .iter()
        .map(|(v, p)| (v.clone(), q((p * 10.0).round() as i64, 10)))
        .collect();
    (exact, f)
}

#[test]
fn running_example_is_exactly_the_expected_fraction() {
    let (vt, f) = example();
    let p: BigRational = exact_prob(&f, &vt, OracleLimit::default()).unwrap();
    assert_eq!(p, q(38416, 100000));
    let s: BigRational = exact_prob_shannon(&f, &vt, OracleLimit::default()).unwrap();
    assert_eq!(s, p);
}

#[test]
fn conditioning_identity_holds_exactly() {
    let (vt, f) = example();
    let t2 = id("t2");
    let p = vt.get(&t2).unwrap().clone();
    let hi: BigRational = eval_read_once(&f.condition(&t2, true), &vt).unwrap();
    let lo: BigRational = eval_read_once(&f.condition(&t2, false), &vt).unwrap();
    assert_eq!(hi, q(4652, 10000));
    assert_eq!(lo, q(6, 100));
    let whole: BigRational = exact_prob(&f, &vt, OracleLimit::default()).unwrap();
    assert_eq!(p.clone() * hi + (q(1, 1) - p) * lo, whole);
}

#[test]
fn read_once_gradient_is_exact() {
    let mut r = rng(11);
    for _ in 0..50 {
        let (vt, f) = random_read_once(&mut r, 10);
        let exact: ProbTable<BigRational> = vt
            .iter()
            .map(|(v, _)| (v.clone(), q(r.gen_range(1..100), 100)))
            .collect();
        let a: BigRational = exact_prob(&f, &exact, OracleLimit::default()).unwrap();
        let b: BigRational = eval_read_once(&f, &exact).unwrap();
        assert_eq!(a, b);
        // Multilinearity: P = p·∂P/∂p + P(p = 0) for every leaf.
        let im = influence_all(&f, &exact).unwrap();
        let circuit = ReadOnceCircuit::new(&f).unwrap();
        let probs = circuit.leaf_probs(&exact).unwrap();
        for (i, v) in circuit.leaves().iter().enumerate() {
            let mut zeroed = probs.clone();
            zeroed[i] = q(0, 1);
            let rebuilt = probs[i].clone() * im.per_leaf[v].clone() + circuit.eval(&zeroed);
            assert_eq!(rebuilt, b);
        }
    }
}

#[test]
fn bounds_work_over_rationals() {
    let b = Bounds::new(q(1, 4), q(3, 4));
    assert_eq!(b.midpoint(), q(1, 2));
    assert_eq!(b.intersect(&Bounds::new(q(1, 3), q(1, 1))), Bounds::new(q(1, 3), q(3, 4)));
}
