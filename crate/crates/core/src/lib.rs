//! Anytime bounds for the probability of monotone lineage formulas.
//!
//! The crate computes shrinking `[lower, upper]` intervals around the
//! probability of a positive Boolean formula over independent variables.
//! Decomposition splits off independent and read-once parts, dissociation
//! bounds the shared rest, and Shannon expansion refines the bounds until
//! they are tight enough.
//!
//! Everything numeric is generic over the scalar type; the aliases at the
//! crate root fix it to `f64`.

mod num;

pub mod bench;
pub mod decompose;
pub mod dissociation;
pub mod engine;
pub mod error;
pub mod formula;
pub mod grounding;
pub mod influence;
pub mod interval;
pub mod lineage;
pub mod lower_opt;
pub mod oracle;
pub mod readonce;
pub mod synth;
pub mod table;

pub use num::{Real, Scalar};

pub use bench::{
    bench_error, query_instances, run_bench, strip_elapsed, BenchInstance, BenchReport, BenchSpec,
    CSV_HEADER,
};
pub use decompose::{decompose, factor_common, independent_partition, DTree, Leaf, LeafStatus};
pub use dissociation::{
    assign_bounds, assign_with, bound_value, dissociate, group_probs, AssignStrategy, Assignment,
    Context, CopyGroup, CopyMap, Direction, GroupRule,
};
pub use engine::{
    leaf_bounds, propagate, run, select_variable, shannon_expand, AnytimeRun, BoundTrace,
    EngineConfig, Heuristic, Strategy, TraceRecord,
};
pub use error::{Error, Result};
pub use formula::{Formula, VarId};
pub use grounding::{ground, load_dir, load_tables, parse_query, Atom, Database, Query, Row, Table, Term};
pub use influence::{influence_all, sum_influences, InfluenceMap};
pub use interval::Bounds;
pub use lineage::{parse_lineage, write_lineage};
pub use lower_opt::{
    hybrid_lower, pgd_lower, project_simplex, FrontierGroup, FrontierPoint, LowerProblem,
    OptResult,
};
pub use oracle::{exact_prob, exact_prob_shannon, grid_optimal_lower, grid_points, OracleLimit};
pub use readonce::{eval_read_once, ReadOnceCircuit};
pub use synth::{gen_synthetic, SynthParams, SYNTH_QUERY};
pub use table::{Overlay, ProbTable, ProbView, Provenance};

/// Probabilities of the base variables.
pub type VarTable = ProbTable<f64>;
pub type Interval = Bounds<f64>;
pub type DecompTree = DTree<f64>;
pub type Trace = BoundTrace<f64>;
pub type Frontier = FrontierPoint<f64>;
pub type Influences = InfluenceMap<f64>;
