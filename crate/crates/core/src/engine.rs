//! The anytime branch-and-bound driver.
//!
//! The formula is decomposed, every shared leaf receives dissociation
//! bounds, and the intervals are propagated to the root. While the root
//! interval is too wide, the most promising shared leaf is Shannon-expanded
//! on a heuristically chosen variable and the new leaves are bounded again.
//! Every round appends one record to the [`BoundTrace`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decompose::{decompose, DTree, Leaf, LeafStatus};
use crate::dissociation::{
    assign_with, bound_value, dissociate, Context, CopyGroup, CopyMap, Direction, GroupRule,
};
use crate::error::{Error, Result};
use crate::formula::{Formula, VarId};
use crate::influence::{influence_all, sum_influences};
use crate::interval::Bounds;
use crate::lower_opt::{LowerProblem, DEFAULT_STEPS, DEFAULT_STEP_SIZE};
use crate::num::{clamp_unit, Real};
use crate::table::{Overlay, ProbView};

/// How leaf bounds are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Random model-based corners for both bounds (MB).
    ModelBased,
    /// Symmetric dissociation for both bounds (SD).
    Symmetric,
    /// Symmetric upper bound, lower bound by projected gradient ascent (PGD).
    Gradient,
    /// Symmetric upper bound, lower bound by gradient-guided corner search (HB).
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::ModelBased,
        Strategy::Symmetric,
        Strategy::Gradient,
        Strategy::Hybrid,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Strategy::ModelBased => "mb",
            Strategy::Symmetric => "sd",
            Strategy::Gradient => "pgd",
            Strategy::Hybrid => "hb",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mb" => Ok(Strategy::ModelBased),
            "sd" => Ok(Strategy::Symmetric),
            "pgd" => Ok(Strategy::Gradient),
            "hb" => Ok(Strategy::Hybrid),
            _ => Err(Error::InvalidConfig(format!("unknown strategy `{s}`"))),
        }
    }
}

/// How the Shannon expansion variable is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heuristic {
    /// Most occurrences.
    Frequency,
    /// Largest sum of the influences of its dissociated copies.
    Influence,
}

impl Heuristic {
    pub const ALL: [Heuristic; 2] = [Heuristic::Frequency, Heuristic::Influence];

    pub fn short_name(self) -> &'static str {
        match self {
            Heuristic::Frequency => "freq",
            Heuristic::Influence => "infl",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "freq" | "frequency" => Ok(Heuristic::Frequency),
            "infl" | "influence" => Ok(Heuristic::Influence),
            _ => Err(Error::InvalidConfig(format!("unknown heuristic `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub strategy: Strategy,
    pub heuristic: Heuristic,
    /// Optimizer rounds per leaf for PGD and HB.
    pub gd_steps: usize,
    pub step_size: f64,
    /// Stop once `upper - lower <= eps_abs`.
    pub eps_abs: f64,
    /// Stop once `(upper - lower) / lower <= eps_rel`.
    pub eps_rel: f64,
    pub timeout: Option<Duration>,
    pub max_expansions: Option<usize>,
    pub rng_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Symmetric,
            heuristic: Heuristic::Influence,
            gd_steps: DEFAULT_STEPS,
            step_size: DEFAULT_STEP_SIZE,
            eps_abs: 1e-6,
            eps_rel: 0.0,
            timeout: None,
            max_expansions: None,
            rng_seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.eps_abs >= 0.0 && self.eps_abs.is_finite()) {
            return bad("eps_abs must be a finite number >= 0");
        }
        if !(self.eps_rel >= 0.0 && self.eps_rel.is_finite()) {
            return bad("eps_rel must be a finite number >= 0");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub elapsed: Duration,
    pub lower: T,
    pub upper: T,
    pub expansions: usize,
}

/// The anytime output: one record per round, lower bounds nondecreasing and
/// upper bounds nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTrace<T> {
    pub records: Vec<TraceRecord<T>>,
}

impl<T: Real> BoundTrace<T> {
    pub fn last(&self) -> Option<&TraceRecord<T>> {
        self.records.last()
    }

    pub fn expansions(&self) -> usize {
        self.last().map_or(0, |r| r.expansions)
    }
}

/// The random source for one leaf: the run seed with a leaf-specific
/// stream, so draws do not depend on how many numbers other leaves used.
fn leaf_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_corner<R: Rng>(group: &CopyGroup, rng: &mut R) -> GroupRule {
    GroupRule::Corner(rng.gen_range(0..group.copies.len()))
}

/// Symmetric where the context allows it, a random corner otherwise.
fn symmetric_or_corner<R: Rng>(group: &CopyGroup, rng: &mut R) -> GroupRule {
    match group.context {
        Context::Mixed => random_corner(group, rng),
        _ => GroupRule::Symmetric,
    }
}

/// Lower and upper bound for a shared leaf formula.
pub fn leaf_bounds<T: Real, V: ProbView<T> + ?Sized, R: Rng>(
    formula: &Formula,
    vt: &V,
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<Bounds<T>> {
    let (dissociated, cm) = dissociate(formula)?;
    let upper_asg = match cfg.strategy {
        Strategy::ModelBased => assign_with(&cm, vt, Direction::Upper, |g| Ok(random_corner(g, rng)))?,
        _ => assign_with(&cm, vt, Direction::Upper, |g| Ok(symmetric_or_corner(g, rng)))?,
    };
    let upper = bound_value(&dissociated, &upper_asg, &vt)?;

    let lower = match cfg.strategy {
        Strategy::ModelBased => {
            let asg = assign_with(&cm, vt, Direction::Lower, |g| Ok(random_corner(g, rng)))?;
            bound_value(&dissociated, &asg, &vt)?
        }
        Strategy::Symmetric => {
            let asg = assign_with(&cm, vt, Direction::Lower, |g| Ok(symmetric_or_corner(g, rng)))?;
            bound_value(&dissociated, &asg, &vt)?
        }
        Strategy::Gradient | Strategy::Hybrid => {
            let fixed = fixed_lower(&cm, vt, rng)?;
            let problem = LowerProblem::with_fixed(&dissociated, &cm, vt, &fixed)?;
            if cfg.strategy == Strategy::Gradient {
                problem.pgd(cfg.gd_steps, T::lit(cfg.step_size)).bound
            } else {
                problem.hybrid(cfg.gd_steps).bound
            }
        }
    };
    let (lower, upper) = (clamp_unit(lower), clamp_unit(upper));
    Ok(Bounds::unit().intersect(&Bounds::new(lower.min(upper), upper.max(lower))))
}

/// Lower-bound copy probabilities of the groups the frontier optimizer does
/// not handle.
fn fixed_lower<T: Real, V: ProbView<T> + ?Sized, R: Rng>(
    cm: &CopyMap,
    vt: &V,
    rng: &mut R,
) -> Result<BTreeMap<VarId, T>> {
    let mut restricted = CopyMap::new();
    for g in cm.groups().filter(|g| g.context != Context::Disjunctive) {
        restricted.insert_group(g.clone())?;
    }
    Ok(assign_with(&restricted, vt, Direction::Lower, |g| Ok(symmetric_or_corner(g, rng)))?.probs)
}

/// Picks the variable to expand a shared leaf on. Ties are broken with
/// `rng`.
pub fn select_variable<T: Real, V: ProbView<T> + ?Sized, R: Rng>(
    formula: &Formula,
    vt: &V,
    heuristic: Heuristic,
    rng: &mut R,
) -> Result<VarId> {
    let shared: BTreeMap<VarId, usize> = formula
        .occurrences()
        .into_iter()
        .filter(|(_, c)| *c > 1)
        .collect();
    if shared.is_empty() {
        return Err(Error::NoSharedVariable);
    }
    let scores: Vec<(VarId, T)> = match heuristic {
        Heuristic::Frequency => shared
            .into_iter()
            .map(|(v, c)| (v, T::lit(c as f64)))
            .collect(),
        Heuristic::Influence => {
            let (dissociated, cm) = dissociate(formula)?;
            // Every copy at the original probability.
            let mut top = BTreeMap::new();
            for g in cm.groups() {
                let p = vt
                    .prob(&g.original)
                    .ok_or_else(|| Error::MissingProbability(g.original.clone()))?;
                for c in &g.copies {
                    top.insert(c.clone(), p);
                }
            }
            let view = Overlay { top: &top, base: &vt };
            let im = influence_all(&dissociated, &view)?;
            sum_influences(&im, &cm)?.into_iter().collect()
        }
    };
    let best = scores
        .iter()
        .map(|(_, s)| *s)
        .fold(T::neg_infinity(), T::max);
    let tolerance = T::lit(1e-12) * best.abs().max(T::one());
    let ties: Vec<&VarId> = scores
        .iter()
        .filter(|(_, s)| best - *s <= tolerance)
        .map(|(v, _)| v)
        .collect();
    let pick = if ties.len() == 1 {
        0
    } else {
        rng.gen_range(0..ties.len())
    };
    Ok(ties[pick].clone())
}

/// Shannon node for `formula` on `v`; both branches are decomposed, shared
/// leaves in them still carry `[0, 1]`.
pub fn shannon_expand<T: Real, V: ProbView<T> + ?Sized>(
    formula: &Formula,
    v: &VarId,
    vt: &V,
) -> Result<DTree<T>> {
    if !formula.contains(v) {
        return Err(Error::VariableAbsent(v.clone()));
    }
    let p = vt.prob(v).ok_or_else(|| Error::MissingProbability(v.clone()))?;
    Ok(DTree::Shannon {
        var: v.clone(),
        p,
        hi: Box::new(decompose(&formula.condition(v, true), vt)?),
        lo: Box::new(decompose(&formula.condition(v, false), vt)?),
        prior: None,
    })
}

/// Interval of the root from the leaf intervals.
pub fn propagate<T: Real>(root: &DTree<T>) -> Result<Bounds<T>> {
    Ok(match root {
        DTree::Leaf(l) => l.interval.ok_or(Error::UninitializedLeaf)?,
        DTree::IndepAnd(cs) => {
            let (mut lo, mut hi) = (T::one(), T::one());
            for c in cs {
                let b = propagate(c)?;
                lo = lo * b.lower;
                hi = hi * b.upper;
            }
            Bounds::new(lo, hi)
        }
        DTree::IndepOr(cs) => {
            let (mut lo, mut hi) = (T::one(), T::one());
            for c in cs {
                let b = propagate(c)?;
                lo = lo * (T::one() - b.lower);
                hi = hi * (T::one() - b.upper);
            }
            Bounds::new(T::one() - lo, T::one() - hi)
        }
        DTree::Shannon {
            p, hi, lo, prior, ..
        } => {
            let (h, l) = (propagate(hi)?, propagate(lo)?);
            let q = T::one() - *p;
            let combined = Bounds::new(*p * h.lower + q * l.lower, *p * h.upper + q * l.upper);
            match prior {
                Some(prior) => prior.intersect(&combined),
                None => combined,
            }
        }
    })
}

fn midpoint_value<T: Real>(node: &DTree<T>) -> T {
    match node {
        DTree::Leaf(l) => l.interval.map_or(T::lit(0.5), |b| b.midpoint()),
        DTree::IndepAnd(cs) => cs.iter().map(midpoint_value).fold(T::one(), |a, b| a * b),
        DTree::IndepOr(cs) => {
            T::one()
                - cs.iter()
                    .map(|c| T::one() - midpoint_value(c))
                    .fold(T::one(), |a, b| a * b)
        }
        DTree::Shannon { p, hi, lo, .. } => {
            *p * midpoint_value(hi) + (T::one() - *p) * midpoint_value(lo)
        }
    }
}

/// `(path, gap × d(root midpoint)/d(leaf midpoint), gap)` for every shared
/// leaf. Shannon paths use 0 for the positive and 1 for the negative branch.
fn leaf_scores<T: Real>(
    node: &DTree<T>,
    seed: T,
    path: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, T, T)>,
) {
    match node {
        DTree::Leaf(l) => {
            if l.status == LeafStatus::Shared {
                let gap = l.interval.map_or(T::one(), |b| b.width());
                out.push((path.clone(), gap * seed.abs(), gap));
            }
        }
        DTree::IndepAnd(cs) | DTree::IndepOr(cs) => {
            let is_and = matches!(node, DTree::IndepAnd(_));
            let factors: Vec<T> = cs
                .iter()
                .map(|c| {
                    let m = midpoint_value(c);
                    if is_and {
                        m
                    } else {
                        T::one() - m
                    }
                })
                .collect();
            for (i, c) in cs.iter().enumerate() {
                let others = factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .fold(T::one(), |a, (_, &f)| a * f);
                path.push(i);
                leaf_scores(c, seed * others, path, out);
                path.pop();
            }
        }
        DTree::Shannon { p, hi, lo, .. } => {
            path.push(0);
            leaf_scores(hi, seed * *p, path, out);
            path.pop();
            path.push(1);
            leaf_scores(lo, seed * (T::one() - *p), path, out);
            path.pop();
        }
    }
}

fn node_at_mut<'a, T>(mut node: &'a mut DTree<T>, path: &[usize]) -> &'a mut DTree<T> {
    for &i in path {
        node = match node {
            DTree::IndepAnd(cs) | DTree::IndepOr(cs) => &mut cs[i],
            DTree::Shannon { hi, lo, .. } => {
                if i == 0 {
                    hi
                } else {
                    lo
                }
            }
            DTree::Leaf(_) => unreachable!("path runs through a leaf"),
        };
    }
    node
}

/// One evaluation run. Owns its decomposition tree.
pub struct AnytimeRun<'a, T, V: ?Sized> {
    vt: &'a V,
    cfg: EngineConfig,
    tree: DTree<T>,
    published: Bounds<T>,
    expansions: usize,
    streams: u64,
    start: Instant,
    trace: BoundTrace<T>,
}

impl<'a, T: Real, V: ProbView<T> + ?Sized> AnytimeRun<'a, T, V> {
    /// Simplifies `f`, eliminates deterministic variables, decomposes and
    /// bounds every shared leaf. Records the initial bounds.
    pub fn new(f: &Formula, vt: &'a V, cfg: EngineConfig) -> Result<Self> {
        let start = Instant::now();
        cfg.validate()?;
        let mut f = f.simplify();
        for v in f.vars() {
            let p = vt.prob(&v).ok_or_else(|| Error::MissingProbability(v.clone()))?;
            if p <= T::zero() || p >= T::one() {
                f = f.condition(&v, p >= T::one());
            }
        }
        let mut run = AnytimeRun {
            vt,
            cfg,
            tree: decompose(&f, vt)?,
            published: Bounds::unit(),
            expansions: 0,
            streams: 0,
            start,
            trace: BoundTrace { records: Vec::new() },
        };
        let mut tree = std::mem::replace(&mut run.tree, DTree::IndepAnd(Vec::new()));
        run.bound_shared(&mut tree)?;
        run.tree = tree;
        run.published = propagate(&run.tree)?;
        run.record();
        Ok(run)
    }

    fn next_rng(&mut self) -> ChaCha8Rng {
        self.streams += 1;
        leaf_rng(self.cfg.rng_seed, self.streams)
    }

    fn bound_shared(&mut self, node: &mut DTree<T>) -> Result<()> {
        match node {
            DTree::Leaf(leaf) if leaf.status == LeafStatus::Shared => {
                let mut rng = self.next_rng();
                let fresh = leaf_bounds(&leaf.formula, self.vt, &self.cfg, &mut rng)?;
                leaf.interval = Some(match leaf.interval {
                    Some(old) => old.intersect(&fresh),
                    None => fresh,
                });
                Ok(())
            }
            DTree::Leaf(_) => Ok(()),
            DTree::IndepAnd(cs) | DTree::IndepOr(cs) => {
                cs.iter_mut().try_for_each(|c| self.bound_shared(c))
            }
            DTree::Shannon { hi, lo, .. } => {
                self.bound_shared(hi)?;
                self.bound_shared(lo)
            }
        }
    }

    fn record(&mut self) {
        self.trace.records.push(TraceRecord {
            elapsed: self.start.elapsed(),
            lower: self.published.lower,
            upper: self.published.upper,
            expansions: self.expansions,
        });
    }

    pub fn bounds(&self) -> Bounds<T> {
        self.published
    }

    pub fn tree(&self) -> &DTree<T> {
        &self.tree
    }

    pub fn trace(&self) -> &BoundTrace<T> {
        &self.trace
    }

    pub fn into_trace(self) -> BoundTrace<T> {
        self.trace
    }

    /// Whether a stopping condition holds.
    pub fn should_stop(&self) -> bool {
        let gap = self.published.width();
        let eps_abs = T::lit(self.cfg.eps_abs);
        let eps_rel = T::lit(self.cfg.eps_rel);
        gap <= eps_abs
            || gap / self.published.lower.max(T::lit(1e-12)) <= eps_rel
            || self.cfg.timeout.is_some_and(|t| self.start.elapsed() >= t)
            || self.cfg.max_expansions.is_some_and(|m| self.expansions >= m)
    }

    /// Expands one shared leaf. Returns `false` when no shared leaf is left.
    pub fn expand_once(&mut self) -> Result<bool> {
        let mut scores = Vec::new();
        leaf_scores(&self.tree, T::one(), &mut Vec::new(), &mut scores);
        let Some((path, _, _)) = scores.into_iter().fold(None, |best: Option<(Vec<usize>, T, T)>, s| {
            match &best {
                Some(b) if (b.1, b.2) >= (s.1, s.2) => best,
                _ => Some(s),
            }
        }) else {
            return Ok(false);
        };

        let node = node_at_mut(&mut self.tree, &path);
        let DTree::Leaf(Leaf {
            formula, interval, ..
        }) = node
        else {
            unreachable!("scores only point at leaves");
        };
        let (formula, prior) = (formula.clone(), *interval);
        let mut rng = self.next_rng();
        let v = select_variable(&formula, self.vt, self.cfg.heuristic, &mut rng)?;
        let mut expanded = shannon_expand(&formula, &v, self.vt)?;
        if let DTree::Shannon { prior: p, .. } = &mut expanded {
            *p = prior;
        }
        self.bound_shared(&mut expanded)?;
        *node_at_mut(&mut self.tree, &path) = expanded;
        self.expansions += 1;

        let current = propagate(&self.tree)?;
        self.published = self.published.intersect(&current);
        self.record();
        Ok(true)
    }

    /// Expands until a stopping condition holds or the tree is exact.
    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.should_stop() {
            if !self.expand_once()? {
                break;
            }
        }
        Ok(())
    }
}

/// Runs the engine to completion and returns the trace.
pub fn run<T: Real, V: ProbView<T> + ?Sized>(
    f: &Formula,
    vt: &V,
    cfg: &EngineConfig,
) -> Result<BoundTrace<T>> {
    let mut r = AnytimeRun::new(f, vt, cfg.clone())?;
    r.run_to_end()?;
    Ok(r.into_trace())
}
