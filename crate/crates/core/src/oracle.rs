//! Brute-force reference solver for small instances.
//!
//! Every brick's selections are listed by stars and bars and collapsed to
//! their distinct points (keeping the best objective per point). The bricks
//! are then combined exhaustively, with the last brick resolved by lookup.
//! Nothing here depends on the doubling engine.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::instance::{
    InstanceError, Matrix, NFoldInstance, Solution, SolveOutcome, SolveStats, Status,
};
use crate::plan::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    /// Largest number of enumeration steps before the oracle refuses.
    pub max_steps: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle budget of {budget} enumeration steps exceeded")]
    BudgetExceeded { budget: u64 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

struct Counter {
    steps: u64,
    budget: u64,
}

impl Counter {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(OracleError::BudgetExceeded {
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }
}

/// Distinct points of one brick: point → (best value, one selection).
type BrickPoints = BTreeMap<Vec<i64>, (i128, Vec<i64>)>;
type BrickEntry<'a> = (&'a Vec<i64>, &'a (i128, Vec<i64>));

fn brick_points(
    block: &Matrix,
    count: i64,
    objective: Option<&[i64]>,
    counter: &mut Counter,
) -> Result<BrickPoints, OracleError> {
    let t = block.cols();
    let mut out = BrickPoints::new();
    let mut x = vec![0i64; t];
    compositions(0, count, &mut x, &mut |x| {
        counter.tick()?;
        let mut p = vec![0i64; block.rows()];
        let mut value = 0i128;
        for (j, &mult) in x.iter().enumerate() {
            for (a, &v) in block.column(j).iter().enumerate() {
                p[a] += v * mult;
            }
            value += objective.map_or(0, |c| c[j] as i128 * mult as i128);
        }
        match out.get(&p) {
            Some((best, _)) if *best >= value => {}
            _ => {
                out.insert(p, (value, x.to_vec()));
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Calls `visit` on every `x ≥ 0` of the given length with `Σ x = total`.
fn compositions(
    j: usize,
    total: i64,
    x: &mut Vec<i64>,
    visit: &mut dyn FnMut(&[i64]) -> Result<(), OracleError>,
) -> Result<(), OracleError> {
    if j + 1 == x.len() {
        x[j] = total;
        visit(x)?;
        x[j] = 0;
        return Ok(());
    }
    for v in 0..=total {
        x[j] = v;
        compositions(j + 1, total - v, x, visit)?;
    }
    x[j] = 0;
    Ok(())
}

/// Exhaustive solve. Negative `b_low` entries make the instance infeasible
/// rather than invalid here.
pub fn oracle_solve(
    inst: &NFoldInstance,
    mode: Mode,
    budget: &OracleBudget,
) -> Result<SolveOutcome, OracleError> {
    let status_ok = match mode {
        Mode::Feasibility => Status::Feasible,
        Mode::Optimization => Status::Optimal,
    };
    if inst.b_low.iter().any(|&v| v < 0) {
        return Ok(SolveOutcome::infeasible(SolveStats::default()));
    }
    let v = inst.clone().validate()?;
    let optimize = mode == Mode::Optimization;
    let mut counter = Counter {
        steps: 0,
        budget: budget.max_steps,
    };
    let mut bricks = Vec::with_capacity(v.n());
    for k in 0..v.n() {
        let obj = if optimize { v.block_objective(k) } else { None };
        bricks.push(brick_points(v.block(k), v.b_low()[k], obj, &mut counter)?);
    }
    let n = bricks.len();
    let r = v.r();
    let lists: Vec<Vec<BrickEntry>> =
        bricks[..n - 1].iter().map(|b| b.iter().collect()).collect();
    let mut best: Option<(i128, Vec<usize>, Vec<i64>)> = None;
    let mut chosen = vec![0usize; n - 1];
    let mut sums = vec![vec![0i64; r]; n];
    // Odometer over the first n − 1 bricks' distinct points.
    let mut depth = 0usize;
    let mut idx = vec![0usize; n.max(1)];
    'outer: loop {
        if depth == n - 1 {
            counter.tick()?;
            let need: Vec<i64> = (0..r).map(|a| v.b_up()[a] - sums[depth][a]).collect();
            if let Some((val, sel)) = bricks[n - 1].get(&need) {
                let total: i128 = (0..n - 1).map(|k| lists[k][chosen[k]].1 .0).sum::<i128>() + val;
                if best.as_ref().is_none_or(|b| total > b.0) {
                    best = Some((total, chosen.clone(), sel.clone()));
                    if !optimize {
                        break 'outer;
                    }
                }
            }
            if depth == 0 {
                break;
            }
            depth -= 1;
            idx[depth] += 1;
            continue;
        }
        if idx[depth] >= lists[depth].len() {
            idx[depth] = 0;
            if depth == 0 {
                break;
            }
            depth -= 1;
            idx[depth] += 1;
            continue;
        }
        chosen[depth] = idx[depth];
        let p = lists[depth][idx[depth]].0;
        for a in 0..r {
            sums[depth + 1][a] = sums[depth][a] + p[a];
        }
        depth += 1;
    }
    let stats = SolveStats::default();
    let Some((_, chosen, last)) = best else {
        return Ok(SolveOutcome::infeasible(stats));
    };
    let mut x = Vec::with_capacity(v.h());
    for (k, &c) in chosen.iter().enumerate() {
        x.extend_from_slice(&lists[k][c].1 .1);
    }
    x.extend_from_slice(&last);
    let objective = v.objective_value(&x);
    Ok(SolveOutcome {
        status: status_ok,
        solution: Some(Solution { x, objective }),
        stats,
    })
}

/// Every point `Σ_k A_k x̃_k` with `‖x̃_k‖_1 = counts[k]` and all coordinates
/// at most `cap`, with the best summed objective per point (zero when no
/// objectives are given).
pub fn oracle_point_set(
    blocks: &[Matrix],
    counts: &[i64],
    objectives: Option<&[&[i64]]>,
    cap: i64,
    budget: &OracleBudget,
) -> Result<BTreeMap<Vec<i64>, i128>, OracleError> {
    assert_eq!(blocks.len(), counts.len());
    let r = blocks.first().map_or(0, Matrix::rows);
    let mut counter = Counter {
        steps: 0,
        budget: budget.max_steps,
    };
    let mut acc: BTreeMap<Vec<i64>, i128> = BTreeMap::from([(vec![0; r], 0)]);
    for (k, block) in blocks.iter().enumerate() {
        let pts = brick_points(block, counts[k], objectives.map(|o| o[k]), &mut counter)?;
        let mut next: BTreeMap<Vec<i64>, i128> = BTreeMap::new();
        for (p, &pv) in &acc {
            for (q, (qv, _)) in &pts {
                counter.tick()?;
                let s: Vec<i64> = p.iter().zip(q).map(|(a, b)| a + b).collect();
                let val = pv + qv;
                let e = next.entry(s).or_insert(val);
                *e = (*e).max(val);
            }
        }
        acc = next;
    }
    acc.retain(|p, _| p.iter().all(|&v| v <= cap));
    Ok(acc)
}
