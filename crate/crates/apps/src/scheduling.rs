//! Exact scheduling on uniformly related machines (`Q||Cmax`, `Q||Cmin`).
//!
//! The optimum has the form `K/s_k` with `K ≤ N·p_max`, so the solver binary
//! searches over that candidate set. Each guess `T` fixes a target load
//! `T_k` per machine class and is decided by a configuration n-fold: one
//! block per small machine class, one block per parity group of big
//! machines, and a slack block of leftover bundles that a greedy pass places
//! afterwards.
//!
//! Dummy jobs of size `-1` (Cmin) or `+1` (Cmax) make every machine's load
//! hit its target exactly. For Cmax the dummies share a row with real jobs
//! of size one, since the two are interchangeable when filling a machine.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::debug;
use nfold::{InstanceError, Matrix, Mode, NFoldInstance, SolveError, SolverConfig, Status};
use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchedulingError {
    #[error("invalid scheduling instance: {0}")]
    Invalid(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("greedy augmentation got stuck: {0}")]
    AugmentationStuck(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Minimize the largest completion time.
    Cmax,
    /// Maximize the smallest completion time.
    Cmin,
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cmax" => Ok(Self::Cmax),
            "cmin" => Ok(Self::Cmin),
            other => Err(format!(
                "unknown objective `{other}` (expected cmax or cmin)"
            )),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cmax => "cmax",
            Self::Cmin => "cmin",
        })
    }
}

/// Jobs come in types (`n[j]` jobs of size `p[j]`), machines in speed
/// classes (`m[k]` machines of speed `s[k]`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulingInstance {
    pub p: Vec<i64>,
    pub n: Vec<i64>,
    pub s: Vec<i64>,
    pub m: Vec<i64>,
}

impl SchedulingInstance {
    pub fn new(p: Vec<i64>, n: Vec<i64>, s: Vec<i64>, m: Vec<i64>) -> Self {
        Self { p, n, s, m }
    }

    pub fn validate(&self) -> Result<(), SchedulingError> {
        let bad = |msg: String| Err(SchedulingError::Invalid(msg));
        if self.p.len() != self.n.len() {
            return bad(format!(
                "{} sizes but {} multiplicities",
                self.p.len(),
                self.n.len()
            ));
        }
        if self.s.len() != self.m.len() {
            return bad(format!(
                "{} speeds but {} machine counts",
                self.s.len(),
                self.m.len()
            ));
        }
        if let Some(v) = self.p.iter().find(|&&v| v <= 0) {
            return bad(format!("processing time {v} is not positive"));
        }
        if let Some(v) = self.s.iter().find(|&&v| v <= 0) {
            return bad(format!("speed {v} is not positive"));
        }
        if self.n.iter().chain(&self.m).any(|&v| v < 0) {
            return bad("multiplicities must be non-negative".into());
        }
        if self.machine_count() == 0 {
            return bad("at least one machine is required".into());
        }
        let total: Option<i64> = self
            .p
            .iter()
            .zip(&self.n)
            .try_fold(0i64, |acc, (&p, &n)| acc.checked_add(p.checked_mul(n)?));
        if total.is_none_or(|t| t > 1 << 40) || self.machine_count() > 1 << 20 {
            return bad("instance too large".into());
        }
        Ok(())
    }

    /// `N`.
    pub fn job_count(&self) -> i64 {
        self.n.iter().sum()
    }

    /// `M`.
    pub fn machine_count(&self) -> i64 {
        self.m.iter().sum()
    }

    pub fn p_max(&self) -> i64 {
        self.p
            .iter()
            .zip(&self.n)
            .filter(|(_, &n)| n > 0)
            .map(|(&p, _)| p)
            .max()
            .unwrap_or(0)
    }

    pub fn total_size(&self) -> i64 {
        self.p.iter().zip(&self.n).map(|(p, n)| p * n).sum()
    }

    /// Size of every job, jobs listed type by type.
    pub fn job_sizes(&self) -> Vec<i64> {
        self.p
            .iter()
            .zip(&self.n)
            .flat_map(|(&p, &n)| std::iter::repeat_n(p, n as usize))
            .collect()
    }

    /// Speed of every machine, machines listed class by class.
    pub fn machine_speeds(&self) -> Vec<i64> {
        self.s
            .iter()
            .zip(&self.m)
            .flat_map(|(&s, &m)| std::iter::repeat_n(s, m as usize))
            .collect()
    }
}

fn serialize_ratio<S: Serializer>(v: &Ratio<i64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    /// Machine of every job (jobs and machines in [`SchedulingInstance`]
    /// listing order).
    pub assignment: Vec<usize>,
    /// Total processing time per machine.
    pub loads: Vec<i64>,
    #[serde(serialize_with = "serialize_ratio")]
    pub objective: Ratio<i64>,
}

impl Schedule {
    /// Builds a schedule from an assignment, computing loads and objective.
    pub fn from_assignment(
        inst: &SchedulingInstance,
        assignment: Vec<usize>,
        objective: Objective,
    ) -> Self {
        let speeds = inst.machine_speeds();
        let mut loads = vec![0i64; speeds.len()];
        for (job, &size) in inst.job_sizes().iter().enumerate() {
            loads[assignment[job]] += size;
        }
        let objective = objective_of(&loads, &speeds, objective);
        Self {
            assignment,
            loads,
            objective,
        }
    }

    /// Recomputes loads and objective and compares with the stored values.
    pub fn verify(&self, inst: &SchedulingInstance, objective: Objective) -> bool {
        let speeds = inst.machine_speeds();
        let sizes = inst.job_sizes();
        if self.assignment.len() != sizes.len()
            || self.loads.len() != speeds.len()
            || self.assignment.iter().any(|&i| i >= speeds.len())
        {
            return false;
        }
        let fresh = Self::from_assignment(inst, self.assignment.clone(), objective);
        fresh == *self
    }
}

fn objective_of(loads: &[i64], speeds: &[i64], objective: Objective) -> Ratio<i64> {
    let times = loads.iter().zip(speeds).map(|(&l, &s)| Ratio::new(l, s));
    match objective {
        Objective::Cmax => times.max(),
        Objective::Cmin => times.min(),
    }
    .unwrap_or_default()
}

#[derive(Debug, Clone, Default)]
pub struct SchedulingConfig {
    /// Replaces the small/big machine threshold `p_max^4`. Only meant for
    /// exercising the big-machine construction on tiny instances.
    pub small_threshold_override: Option<i64>,
    pub solver: SolverConfig,
}

/// Per-guess quantities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuessContext {
    pub guess: Ratio<i64>,
    pub objective: Objective,
    /// Distinct speeds, ascending.
    pub speeds: Vec<i64>,
    /// Machines per distinct speed.
    pub counts: Vec<i64>,
    /// `T_k` per distinct speed.
    pub loads: Vec<i64>,
    /// Whether each speed class is big (`T_k` above the threshold).
    pub big: Vec<bool>,
    pub threshold: i64,
    /// `ℓ`; negative when the guess is trivially infeasible.
    pub dummies: i64,
}

impl GuessContext {
    pub fn new(
        inst: &SchedulingInstance,
        guess: Ratio<i64>,
        objective: Objective,
        threshold: Option<i64>,
    ) -> Self {
        let mut classes: BTreeMap<i64, i64> = BTreeMap::new();
        for (&s, &m) in inst.s.iter().zip(&inst.m) {
            if m > 0 {
                *classes.entry(s).or_default() += m;
            }
        }
        let speeds: Vec<i64> = classes.keys().copied().collect();
        let counts: Vec<i64> = classes.values().copied().collect();
        let loads: Vec<i64> = speeds
            .iter()
            .map(|&s| {
                let v = guess * s;
                match objective {
                    Objective::Cmin => v.ceil().to_integer(),
                    Objective::Cmax => v.floor().to_integer(),
                }
            })
            .collect();
        let threshold = threshold.unwrap_or_else(|| inst.p_max().pow(4));
        let big = loads.iter().map(|&t| t > threshold).collect();
        let capacity: i64 = loads.iter().zip(&counts).map(|(t, m)| t * m).sum();
        let dummies = match objective {
            Objective::Cmin => inst.total_size() - capacity,
            Objective::Cmax => capacity - inst.total_size(),
        };
        Self {
            guess,
            objective,
            speeds,
            counts,
            loads,
            big,
            threshold,
            dummies,
        }
    }

    /// `|B|`, counting machines.
    pub fn big_machines(&self) -> i64 {
        self.counts
            .iter()
            .zip(&self.big)
            .filter(|(_, &b)| b)
            .map(|(m, _)| m)
            .sum()
    }
}

/// One row of the configuration ILP: jobs of one size (possibly mixed with
/// dummies of the same size).
#[derive(Debug, Clone, PartialEq, Eq)]
struct ItemType {
    size: i64,
    count: i64,
    /// How many of `count` are real jobs.
    real: i64,
}

fn item_types(inst: &SchedulingInstance, ctx: &GuessContext) -> Vec<ItemType> {
    let mut sizes: BTreeMap<i64, i64> = BTreeMap::new();
    for (&p, &n) in inst.p.iter().zip(&inst.n) {
        if n > 0 {
            *sizes.entry(p).or_default() += n;
        }
    }
    let mut items: Vec<ItemType> = sizes
        .into_iter()
        .map(|(size, count)| ItemType {
            size,
            count,
            real: count,
        })
        .collect();
    if ctx.dummies > 0 {
        match ctx.objective {
            Objective::Cmin => items.insert(
                0,
                ItemType {
                    size: -1,
                    count: ctx.dummies,
                    real: 0,
                },
            ),
            Objective::Cmax => match items.iter_mut().find(|it| it.size == 1) {
                Some(it) => it.count += ctx.dummies,
                None => items.insert(
                    0,
                    ItemType {
                        size: 1,
                        count: ctx.dummies,
                        real: 0,
                    },
                ),
            },
        }
    }
    items
}

/// Every `c` with `0 ≤ c_t ≤ caps[t]` whose load `Σ size_t c_t` satisfies
/// `accept`, in lexicographic order.
fn enumerate_configs(
    sizes: &[i64],
    caps: &[i64],
    max_load: i64,
    accept: &dyn Fn(i64) -> bool,
) -> Vec<Vec<i64>> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        t: usize,
        load: i64,
        sizes: &[i64],
        caps: &[i64],
        max_load: i64,
        accept: &dyn Fn(i64) -> bool,
        cur: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        if t == sizes.len() {
            if accept(load) {
                out.push(cur.clone());
            }
            return;
        }
        for c in 0..=caps[t] {
            let next = load + c * sizes[t];
            // positive sizes only push the load up
            if sizes[t] > 0 && next > max_load {
                break;
            }
            cur[t] = c;
            go(t + 1, next, sizes, caps, max_load, accept, cur, out);
        }
        cur[t] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0; sizes.len()];
    // Negative sizes (Cmin dummies) come first and may lower the load.
    let credit: i64 = sizes
        .iter()
        .zip(caps)
        .filter(|(s, _)| **s < 0)
        .map(|(s, c)| -s * c)
        .sum();
    go(
        0,
        0,
        sizes,
        caps,
        max_load + credit,
        accept,
        &mut cur,
        &mut out,
    );
    out
}

/// Content of one machine during construction: item counts per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineFill {
    pub target: i64,
    pub big: bool,
    pub counts: Vec<i64>,
}

impl MachineFill {
    fn load(&self, sizes: &[i64]) -> i64 {
        self.counts.iter().zip(sizes).map(|(c, s)| c * s).sum()
    }
}

/// Items the configurations left unplaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leftovers {
    /// Item size per row.
    pub sizes: Vec<i64>,
    /// Row of the pivot size `a`.
    pub pivot: usize,
    /// Bundles of `a` equal items, per row (the pivot row has none).
    pub bundles: Vec<i64>,
    /// Single pivot items, including the withheld ones.
    pub singles: i64,
}

impl Leftovers {
    fn a(&self) -> i64 {
        self.sizes[self.pivot]
    }
}

/// Places leftover bundles and single pivot items on big machines so that
/// every machine ends exactly at its target.
///
/// Bundles of negative-size dummies all go to the first big machine, other
/// bundles to the big machine with the most remaining space, and single
/// pivot items fill what is left.
pub fn greedy_augment(
    mut machines: Vec<MachineFill>,
    left: &Leftovers,
) -> Result<Vec<MachineFill>, SchedulingError> {
    let sizes = &left.sizes;
    let a = left.a();
    let big: Vec<usize> = (0..machines.len()).filter(|&i| machines[i].big).collect();
    let has_leftovers = left.singles > 0 || left.bundles.iter().any(|&b| b > 0);
    if big.is_empty() {
        if has_leftovers {
            return Err(SchedulingError::AugmentationStuck(
                "leftover items but no big machine".into(),
            ));
        }
        return Ok(machines);
    }
    let space = |m: &MachineFill| m.target - m.load(sizes);
    for (t, &count) in left.bundles.iter().enumerate() {
        if count == 0 {
            continue;
        }
        if sizes[t] < 0 {
            machines[big[0]].counts[t] += a * count;
            continue;
        }
        let bundle = a * sizes[t];
        for _ in 0..count {
            let &best = big
                .iter()
                .max_by_key(|&&i| (space(&machines[i]), std::cmp::Reverse(i)))
                .expect("big machines exist");
            if space(&machines[best]) < bundle {
                return Err(SchedulingError::AugmentationStuck(format!(
                    "no big machine has room for a bundle of size {bundle}"
                )));
            }
            machines[best].counts[t] += a;
        }
    }
    let mut singles = left.singles;
    for &i in &big {
        let room = space(&machines[i]);
        if room < 0 || room % a != 0 {
            return Err(SchedulingError::AugmentationStuck(format!(
                "machine {i} has space {room}, not a multiple of {a}"
            )));
        }
        let take = (room / a).min(singles);
        machines[i].counts[left.pivot] += take;
        singles -= take;
    }
    if singles != 0 || machines.iter().any(|m| space(m) != 0) {
        return Err(SchedulingError::AugmentationStuck(format!(
            "{singles} single items remain or a machine misses its target"
        )));
    }
    Ok(machines)
}

/// A configuration block: the machines it covers and its columns.
struct ConfigBlock {
    machines: Vec<usize>,
    configs: Vec<Vec<i64>>,
}

/// Decides whether `guess` is achievable: every machine of speed `s` ends
/// with load at least `⌈sT⌉` (Cmin) or at most `⌊sT⌋` (Cmax). Returns a
/// witness schedule.
pub fn decide_guess(
    inst: &SchedulingInstance,
    guess: Ratio<i64>,
    objective: Objective,
    cfg: &SchedulingConfig,
) -> Result<Option<Schedule>, SchedulingError> {
    inst.validate()?;
    let ctx = GuessContext::new(inst, guess, objective, cfg.small_threshold_override);
    if ctx.dummies < 0 || guess < Ratio::from_integer(0) {
        return Ok(None);
    }
    let items = item_types(inst, &ctx);
    let big_count = ctx.big_machines();
    if big_count == 0 {
        return decide_with_pivot(inst, &ctx, &items, None, cfg);
    }
    let p_max = inst.p_max();
    let withheld = p_max * p_max * big_count;
    let mut pivots: Vec<usize> = (0..items.len()).filter(|&t| items[t].size > 0).collect();
    pivots.sort_by_key(|&t| items[t].size);
    for t in pivots {
        if items[t].count < withheld {
            continue;
        }
        if let Some(s) = decide_with_pivot(inst, &ctx, &items, Some((t, withheld)), cfg)? {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

fn decide_with_pivot(
    inst: &SchedulingInstance,
    ctx: &GuessContext,
    items: &[ItemType],
    pivot: Option<(usize, i64)>,
    cfg: &SchedulingConfig,
) -> Result<Option<Schedule>, SchedulingError> {
    let rows = items.len();
    let sizes: Vec<i64> = items.iter().map(|it| it.size).collect();
    let mut avail: Vec<i64> = items.iter().map(|it| it.count).collect();
    if let Some((t, w)) = pivot {
        avail[t] -= w;
    }

    // Machines are numbered class by class in ascending speed order here;
    // `machine_ids` maps them back to the input listing.
    let mut machine_class = Vec::new();
    for (k, &m) in ctx.counts.iter().enumerate() {
        machine_class.extend(std::iter::repeat_n(k, m as usize));
    }
    let mut blocks: Vec<ConfigBlock> = Vec::new();
    let mut offset = 0usize;
    let mut class_first = Vec::new();
    for &m in &ctx.counts {
        class_first.push(offset);
        offset += m as usize;
    }
    let class_machines =
        |k: usize| (class_first[k]..class_first[k] + ctx.counts[k] as usize).collect::<Vec<_>>();

    for k in (0..ctx.speeds.len()).filter(|&k| !ctx.big[k]) {
        let target = ctx.loads[k];
        let configs = enumerate_configs(&sizes, &avail, target, &|load| load == target);
        if configs.is_empty() {
            return Ok(None);
        }
        blocks.push(ConfigBlock {
            machines: class_machines(k),
            configs,
        });
    }
    if let Some((pt, _)) = pivot {
        let a = sizes[pt];
        let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for k in (0..ctx.speeds.len()).filter(|&k| ctx.big[k]) {
            groups
                .entry(ctx.loads[k].rem_euclid(a))
                .or_default()
                .push(k);
        }
        for (residue, classes) in groups {
            let cap = classes
                .iter()
                .map(|&k| ctx.loads[k])
                .min()
                .expect("non-empty");
            let caps: Vec<i64> = (0..rows)
                .map(|t| if t == pt { 0 } else { avail[t].min(a - 1) })
                .collect();
            let configs = enumerate_configs(&sizes, &caps, cap, &|load| {
                load <= cap && load.rem_euclid(a) == residue
            });
            if configs.is_empty() {
                return Ok(None);
            }
            blocks.push(ConfigBlock {
                machines: classes.iter().flat_map(|&k| class_machines(k)).collect(),
                configs,
            });
        }
    }

    let mut matrices: Vec<Matrix> = blocks
        .iter()
        .map(|b| Matrix::from_columns(rows, &b.configs))
        .collect();
    let mut b_low: Vec<i64> = blocks.iter().map(|b| b.machines.len() as i64).collect();
    if let Some((pt, _)) = pivot {
        let a = sizes[pt];
        let mut cols: Vec<Vec<i64>> = (0..rows)
            .map(|t| {
                let mut col = vec![0i64; rows];
                col[t] = if t == pt { 1 } else { a };
                col
            })
            .collect();
        cols.push(vec![0; rows]);
        matrices.push(Matrix::from_columns(rows, &cols));
        b_low.push(avail.iter().sum());
    }
    let ilp = NFoldInstance::new(matrices, avail.clone(), b_low).validate()?;
    let (out, _) = nfold::solve_validated(&ilp, Mode::Feasibility, &cfg.solver)?;
    if out.status == Status::Infeasible {
        return Ok(None);
    }
    let x = out
        .solution
        .ok_or_else(|| SchedulingError::Internal("feasible verdict without a solution".into()))?
        .x;

    let mut machines: Vec<MachineFill> = machine_class
        .iter()
        .map(|&k| MachineFill {
            target: ctx.loads[k],
            big: ctx.big[k],
            counts: vec![0; rows],
        })
        .collect();
    for (g, block) in blocks.iter().enumerate() {
        let brick = &x[ilp.brick_range(g)];
        let mut slots = block.machines.iter();
        for (c, &mult) in brick.iter().enumerate() {
            for _ in 0..mult {
                let &i = slots
                    .next()
                    .ok_or_else(|| SchedulingError::Internal("too many configurations".into()))?;
                machines[i].counts = block.configs[c].clone();
            }
        }
    }
    if let Some((pt, w)) = pivot {
        let slack = &x[ilp.brick_range(blocks.len())];
        let mut bundles = slack[..rows].to_vec();
        let singles = bundles[pt] + w;
        bundles[pt] = 0;
        let left = Leftovers {
            sizes: sizes.clone(),
            pivot: pt,
            bundles,
            singles,
        };
        machines = greedy_augment(machines, &left)?;
    }
    let schedule = to_schedule(inst, ctx, items, &machines)?;
    Ok(Some(schedule))
}

/// Turns per-machine item counts into a job assignment, dropping dummies.
fn to_schedule(
    inst: &SchedulingInstance,
    ctx: &GuessContext,
    items: &[ItemType],
    machines: &[MachineFill],
) -> Result<Schedule, SchedulingError> {
    // Internal machine i (class-sorted) → position in the input listing.
    let mut by_speed: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, s) in inst.machine_speeds().into_iter().enumerate() {
        by_speed.entry(s).or_default().push(i);
    }
    let machine_ids: Vec<usize> = by_speed.into_values().flatten().collect();
    let mut jobs_by_size: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (j, s) in inst.job_sizes().into_iter().enumerate() {
        jobs_by_size.entry(s).or_default().push(j);
    }
    let mut assignment = vec![usize::MAX; inst.job_sizes().len()];
    for (t, it) in items.iter().enumerate() {
        let jobs = jobs_by_size.get(&it.size).map(Vec::as_slice).unwrap_or(&[]);
        let placed: i64 = machines.iter().map(|m| m.counts[t]).sum();
        if placed != it.count || jobs.len() as i64 != it.real {
            return Err(SchedulingError::Internal(format!(
                "row of size {} places {placed} of {} items",
                it.size, it.count
            )));
        }
        let mut next = jobs.iter();
        for (i, m) in machines.iter().enumerate() {
            for _ in 0..m.counts[t] {
                match next.next() {
                    Some(&j) => assignment[j] = machine_ids[i],
                    None => break,
                }
            }
        }
    }
    let schedule = Schedule::from_assignment(inst, assignment, ctx.objective);
    let sizes: Vec<i64> = items.iter().map(|it| it.size).collect();
    for (i, m) in machines.iter().enumerate() {
        let load = schedule.loads[machine_ids[i]];
        let ok = m.load(&sizes) == m.target
            && match ctx.objective {
                Objective::Cmin => load >= m.target,
                Objective::Cmax => load <= m.target,
            };
        if !ok {
            return Err(SchedulingError::Internal(format!(
                "machine {} ends at load {load}, target {}",
                machine_ids[i], m.target
            )));
        }
    }
    Ok(schedule)
}

/// Candidate optimum values `K/s` for `K ∈ [0, N·p_max]`, ascending.
pub fn candidates(inst: &SchedulingInstance) -> Vec<Ratio<i64>> {
    let top = inst.job_count() * inst.p_max();
    let mut speeds: Vec<i64> = inst
        .s
        .iter()
        .zip(&inst.m)
        .filter(|(_, &m)| m > 0)
        .map(|(&s, _)| s)
        .collect();
    speeds.sort_unstable();
    speeds.dedup();
    let mut out: Vec<Ratio<i64>> = speeds
        .iter()
        .flat_map(|&s| (0..=top).map(move |k| Ratio::new(k, s)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn solve_cmax(
    inst: &SchedulingInstance,
    cfg: &SchedulingConfig,
) -> Result<Schedule, SchedulingError> {
    solve_objective(inst, Objective::Cmax, cfg)
}

pub fn solve_cmin(
    inst: &SchedulingInstance,
    cfg: &SchedulingConfig,
) -> Result<Schedule, SchedulingError> {
    solve_objective(inst, Objective::Cmin, cfg)
}

pub fn solve_objective(
    inst: &SchedulingInstance,
    objective: Objective,
    cfg: &SchedulingConfig,
) -> Result<Schedule, SchedulingError> {
    inst.validate()?;
    let n_jobs = inst.job_count();
    if objective == Objective::Cmin && n_jobs < inst.machine_count() {
        // some machine stays empty whatever we do
        let assignment = (0..n_jobs as usize).collect();
        return Ok(Schedule::from_assignment(inst, assignment, objective));
    }
    let cands = candidates(inst);
    let index_of = |v: Ratio<i64>| {
        cands
            .binary_search(&v)
            .map_err(|_| SchedulingError::Internal(format!("objective {v} is not a candidate")))
    };
    let probe = |i: usize| {
        let out = decide_guess(inst, cands[i], objective, cfg);
        if let Ok(s) = &out {
            debug!(
                "{objective} guess {}: {}",
                cands[i],
                if s.is_some() {
                    "feasible"
                } else {
                    "infeasible"
                }
            );
        }
        out
    };
    // Feasibility is monotone: downward closed for Cmin, upward for Cmax.
    // A witness may beat its guess, in which case the search jumps to the
    // witness's own value.
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    let mut best = match objective {
        Objective::Cmin => probe(0)?,
        Objective::Cmax => probe(hi)?,
    }
    .ok_or_else(|| SchedulingError::Internal("the trivial guess was rejected".into()))?;
    match objective {
        Objective::Cmin => lo = index_of(best.objective)?,
        Objective::Cmax => hi = index_of(best.objective)?,
    }
    while lo < hi {
        match objective {
            Objective::Cmin => {
                let mid = lo + (hi - lo).div_ceil(2);
                match probe(mid)? {
                    Some(s) => {
                        lo = index_of(s.objective)?.min(hi);
                        best = s;
                    }
                    None => hi = mid - 1,
                }
            }
            Objective::Cmax => {
                let mid = lo + (hi - lo) / 2;
                match probe(mid)? {
                    Some(s) => {
                        hi = index_of(s.objective)?.max(lo);
                        best = s;
                    }
                    None => lo = mid + 1,
                }
            }
        }
    }
    if best.objective != cands[lo] {
        return Err(SchedulingError::Internal(format!(
            "witness objective {} differs from the accepted guess {}",
            best.objective, cands[lo]
        )));
    }
    if objective == Objective::Cmin {
        best = rebalance_cmin(inst, best);
    }
    debug_assert!(best.verify(inst, objective));
    Ok(best)
}

/// Moves jobs off machines with `L > OPT·s + p_max` onto a machine with the
/// smallest completion time. The objective is unchanged; afterwards every
/// load lies in `[⌈OPT·s⌉, OPT·s + p_max]`.
pub fn rebalance_cmin(inst: &SchedulingInstance, mut schedule: Schedule) -> Schedule {
    let speeds = inst.machine_speeds();
    let sizes = inst.job_sizes();
    let p_max = inst.p_max();
    let opt = schedule.objective;
    loop {
        let over = (0..speeds.len())
            .find(|&i| Ratio::from_integer(schedule.loads[i] - p_max) > opt * speeds[i]);
        let Some(i) = over else { break };
        let target = (0..speeds.len())
            .min_by_key(|&k| (Ratio::new(schedule.loads[k], speeds[k]), k))
            .expect("machines exist");
        let job = (0..sizes.len())
            .find(|&j| schedule.assignment[j] == i)
            .expect("an overloaded machine holds a job");
        schedule.assignment[job] = target;
        schedule.loads[i] -= sizes[job];
        schedule.loads[target] += sizes[job];
    }
    schedule
}

/// Exhaustive optimum over all `M^N` assignments (machines of equal speed
/// and equal current load are tried once).
pub fn brute_force(inst: &SchedulingInstance, objective: Objective) -> Ratio<i64> {
    fn go(
        j: usize,
        sizes: &[i64],
        speeds: &[i64],
        loads: &mut Vec<i64>,
        objective: Objective,
        best: &mut Option<Ratio<i64>>,
    ) {
        if j == sizes.len() {
            let v = objective_of(loads, speeds, objective);
            let better = match (objective, *best) {
                (_, None) => true,
                (Objective::Cmax, Some(b)) => v < b,
                (Objective::Cmin, Some(b)) => v > b,
            };
            if better {
                *best = Some(v);
            }
            return;
        }
        for i in 0..speeds.len() {
            if (0..i).any(|q| speeds[q] == speeds[i] && loads[q] == loads[i]) {
                continue;
            }
            loads[i] += sizes[j];
            // partial makespans only grow
            let prune = objective == Objective::Cmax
                && best.is_some_and(|b| Ratio::new(loads[i], speeds[i]) >= b);
            if !prune {
                go(j + 1, sizes, speeds, loads, objective, best);
            }
            loads[i] -= sizes[j];
        }
    }
    let sizes = inst.job_sizes();
    let speeds = inst.machine_speeds();
    let mut loads = vec![0; speeds.len()];
    let mut best = None;
    go(0, &sizes, &speeds, &mut loads, objective, &mut best);
    best.unwrap_or_default()
}

/// Lowest small/big threshold for which the pivot argument still holds:
/// a big machine then carries more than `rows·p_max²` items, so some row
/// has at least `p_max²` per big machine. `rows` counts the ILP rows of
/// real sizes plus the dummy row when it is not merged into size one.
pub fn sound_threshold(inst: &SchedulingInstance, objective: Objective) -> i64 {
    let mut sizes: Vec<i64> = inst
        .p
        .iter()
        .zip(&inst.n)
        .filter(|(_, &n)| n > 0)
        .map(|(&p, _)| p)
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    let rows =
        sizes.len() as i64 + i64::from(objective == Objective::Cmax && sizes.first() != Some(&1));
    rows * inst.p_max().pow(3)
}

/// A random instance with at most `max_jobs` jobs, `max_machines` machines,
/// sizes up to `p_max` and speeds up to `s_max`.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_jobs: i64,
    max_machines: i64,
    p_max: i64,
    s_max: i64,
) -> SchedulingInstance {
    let types = rng.gen_range(1..=4usize);
    let mut p = Vec::with_capacity(types);
    let mut n = Vec::with_capacity(types);
    let mut left = rng.gen_range(1..=max_jobs);
    for t in 0..types {
        p.push(rng.gen_range(1..=p_max));
        let take = if t + 1 == types {
            left
        } else {
            rng.gen_range(0..=left)
        };
        n.push(take);
        left -= take;
    }
    let classes = rng.gen_range(1..=3usize);
    let mut s = Vec::with_capacity(classes);
    let mut m = Vec::with_capacity(classes);
    let mut left = rng.gen_range(1..=max_machines);
    for k in 0..classes {
        s.push(rng.gen_range(1..=s_max));
        let take = if k + 1 == classes {
            left
        } else {
            rng.gen_range(0..=left)
        };
        m.push(take);
        left -= take;
    }
    SchedulingInstance { p, n, s, m }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> SchedulingInstance {
        SchedulingInstance::new(vec![3, 2], vec![2, 2], vec![1], vec![2])
    }

    #[test]
    fn equal_machines_split_evenly() {
        let cfg = SchedulingConfig::default();
        let inst = two_by_two();
        let cmax = solve_cmax(&inst, &cfg).unwrap();
        assert_eq!(cmax.objective, Ratio::from_integer(5));
        assert!(cmax.verify(&inst, Objective::Cmax));
        let cmin = solve_cmin(&inst, &cfg).unwrap();
        assert_eq!(cmin.objective, Ratio::from_integer(5));
        assert!(cmin.verify(&inst, Objective::Cmin));
    }

    #[test]
    fn faster_machine_takes_the_big_jobs() {
        let inst = SchedulingInstance::new(vec![3, 2], vec![2, 1], vec![1, 2], vec![1, 1]);
        let s = solve_cmax(&inst, &SchedulingConfig::default()).unwrap();
        assert_eq!(s.objective, Ratio::from_integer(3));
        assert_eq!(brute_force(&inst, Objective::Cmax), Ratio::from_integer(3));
    }

    #[test]
    fn single_machine_gets_everything() {
        let inst = SchedulingInstance::new(vec![3, 2], vec![2, 1], vec![2], vec![1]);
        let cfg = SchedulingConfig::default();
        assert_eq!(solve_cmax(&inst, &cfg).unwrap().objective, Ratio::new(8, 2));
        assert_eq!(solve_cmin(&inst, &cfg).unwrap().objective, Ratio::new(8, 2));
    }

    #[test]
    fn guesses_around_the_cmin_optimum() {
        let cfg = SchedulingConfig::default();
        let inst = two_by_two();
        let five = decide_guess(&inst, Ratio::from_integer(5), Objective::Cmin, &cfg).unwrap();
        assert!(five.is_some());
        let six = decide_guess(&inst, Ratio::from_integer(6), Objective::Cmin, &cfg).unwrap();
        assert!(six.is_none());
    }

    #[test]
    fn all_small_guess_has_no_big_machines() {
        let inst = two_by_two();
        let ctx = GuessContext::new(&inst, Ratio::from_integer(5), Objective::Cmin, None);
        assert_eq!(ctx.big_machines(), 0);
        assert_eq!(ctx.threshold, 81);
        assert_eq!(ctx.dummies, 0);
    }

    #[test]
    fn oversized_cmin_guess_is_rejected() {
        let inst = two_by_two();
        let ctx = GuessContext::new(&inst, Ratio::from_integer(7), Objective::Cmin, None);
        assert!(ctx.dummies < 0);
        let cfg = SchedulingConfig::default();
        assert!(
            decide_guess(&inst, Ratio::from_integer(7), Objective::Cmin, &cfg)
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn fewer_jobs_than_machines() {
        let inst = SchedulingInstance::new(vec![4], vec![1], vec![1], vec![3]);
        let s = solve_cmin(&inst, &SchedulingConfig::default()).unwrap();
        assert_eq!(s.objective, Ratio::from_integer(0));
    }

    #[test]
    fn greedy_without_leftovers_is_identity() {
        let machines = vec![MachineFill {
            target: 5,
            big: false,
            counts: vec![1, 1],
        }];
        let left = Leftovers {
            sizes: vec![2, 3],
            pivot: 0,
            bundles: vec![0, 0],
            singles: 0,
        };
        assert_eq!(greedy_augment(machines.clone(), &left).unwrap(), machines);
    }

    #[test]
    fn greedy_fills_with_single_pivot_items() {
        // two big machines with space 4 and 6, ten items of size 1 left
        let machines = vec![
            MachineFill {
                target: 10,
                big: true,
                counts: vec![0, 2],
            },
            MachineFill {
                target: 6,
                big: true,
                counts: vec![0, 0],
            },
        ];
        let left = Leftovers {
            sizes: vec![1, 3],
            pivot: 0,
            bundles: vec![0, 0],
            singles: 10,
        };
        let out = greedy_augment(machines, &left).unwrap();
        assert_eq!(out[0].counts, vec![4, 2]);
        assert_eq!(out[1].counts, vec![6, 0]);
    }

    #[test]
    fn greedy_places_dummy_bundles_first() {
        // Cmin: rows (dummy -1, size 2, size 3), pivot size 2.
        let machines = vec![
            MachineFill {
                target: 9,
                big: true,
                counts: vec![0, 0, 1],
            },
            MachineFill {
                target: 8,
                big: true,
                counts: vec![1, 0, 1],
            },
        ];
        let left = Leftovers {
            sizes: vec![-1, 2, 3],
            pivot: 1,
            bundles: vec![1, 0, 2],
            singles: 1,
        };
        let out = greedy_augment(machines, &left).unwrap();
        for m in &out {
            assert_eq!(m.load(&left.sizes), m.target);
        }
        // both dummies of the bundle land on the first machine
        assert_eq!(out[0].counts[0], 2);
        assert_eq!(out[0].counts, vec![2, 1, 3]);
        assert_eq!(out[1].counts, vec![1, 0, 3]);
    }

    #[test]
    fn big_machine_path_with_lowered_threshold() {
        let inst = SchedulingInstance::new(vec![1, 2], vec![10, 2], vec![1], vec![2]);
        let cfg = SchedulingConfig {
            small_threshold_override: Some(3),
            ..SchedulingConfig::default()
        };
        for objective in [Objective::Cmax, Objective::Cmin] {
            let s = solve_objective(&inst, objective, &cfg).unwrap();
            assert_eq!(s.objective, brute_force(&inst, objective), "{objective}");
            assert!(s.verify(&inst, objective));
        }
    }

    #[test]
    fn rebalance_keeps_cmin_and_caps_loads() {
        let inst = SchedulingInstance::new(vec![1], vec![8], vec![1], vec![3]);
        // optimal (min completion 2) but the last machine carries 4
        let s = Schedule::from_assignment(&inst, vec![0, 0, 1, 1, 2, 2, 2, 2], Objective::Cmin);
        assert_eq!(s.objective, brute_force(&inst, Objective::Cmin));
        let r = rebalance_cmin(&inst, s);
        assert_eq!(r.objective, Ratio::from_integer(2));
        assert!(r.loads.iter().all(|&l| l <= 3));
        assert!(r.verify(&inst, Objective::Cmin));
    }
}
