//! Seeded synthetic instances of the query `R(X), S(X,Y), T(Y)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::grounding::{ground, load_tables, parse_query};
use crate::table::ProbTable;

/// The query every synthetic instance is grounded with.
pub const SYNTH_QUERY: &str = "Q :- R(X), S(X,Y), T(Y)";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub num_x: usize,
    pub num_y: usize,
    /// Probability that a given `(x, y)` pair is present in `S`.
    pub density: f64,
    /// Tuple probabilities are drawn uniformly from this range.
    pub prob_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            num_x: 4,
            num_y: 4,
            density: 0.5,
            prob_range: (0.05, 0.95),
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.num_x == 0 || self.num_y == 0 {
            return bad("num_x and num_y must be at least 1");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad("density must lie in (0, 1]");
        }
        let (lo, hi) = self.prob_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad("prob_range must satisfy 0 <= lo <= hi <= 1");
        }
        Ok(())
    }
}

fn csv_table(attrs: &str, rows: &[(String, String, f64)]) -> String {
    let mut out = format!("_id,{attrs},_p\n");
    for (id, values, p) in rows {
        out.push_str(&format!("{id},{values},{p}\n"));
    }
    out
}

/// Generates the tables and grounds the query over them.
///
/// Every candidate pair draws its inclusion number and its probability in a
/// fixed order, whatever the density, so lowering the density with the same
/// seed only removes `S` tuples: the clause set shrinks to a subset.
pub fn gen_synthetic(params: &SynthParams) -> Result<(ProbTable<f64>, Formula)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (lo, hi) = params.prob_range;
    let draw_p = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.gen();
        lo + (hi - lo) * u
    };

    let r: Vec<_> = (1..=params.num_x)
        .map(|i| (format!("r{i}"), format!("x{i}"), draw_p(&mut rng)))
        .collect();
    let t: Vec<_> = (1..=params.num_y)
        .map(|j| (format!("t{j}"), format!("y{j}"), draw_p(&mut rng)))
        .collect();
    let mut s = Vec::new();
    let mut pair = 0;
    for i in 1..=params.num_x {
        for j in 1..=params.num_y {
            pair += 1;
            let keep = rng.gen::<f64>() < params.density;
            let p = draw_p(&mut rng);
            if keep {
                s.push((format!("s{pair}"), format!("x{i},y{j}"), p));
            }
        }
    }
    if s.is_empty() {
        return Err(Error::EmptyInstance(params.seed));
    }

    let db = load_tables(&[
        ("R", csv_table("X", &r)),
        ("S", csv_table("X,Y", &s)),
        ("T", csv_table("Y", &t)),
    ])?;
    ground(&parse_query(SYNTH_QUERY)?, &db)
}
