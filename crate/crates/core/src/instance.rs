//! Instance model for combinatorial n-fold integer programs.
//!
//! A combinatorial n-fold ILP couples `n` blocks `A_1, …, A_n` (each `r × t_i`)
//! through `r` shared global rows, while every block carries a single local
//! row of ones:
//!
//! ```text
//!   A_1 x_1 + A_2 x_2 + … + A_n x_n = b_up        (r global rows)
//!   1ᵀ x_k                           = b_low[k]    (one local row per block)
//!   x ≥ 0, integral
//! ```
//!
//! The segment `x_k` of the solution vector is called a *brick*.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while checking the shape of an instance or a solution.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("negative local right-hand side: b_low[{block}] = {value}")]
    NegativeLocalRhs { block: usize, value: i64 },
    #[error("entry out of range in {0}")]
    EntryOutOfRange(String),
    #[error("solution has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("arithmetic overflow while {0}")]
    Overflow(&'static str),
}

/// Dense integer matrix stored column-major, since the solver always walks
/// whole columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// Builds a matrix from row vectors. Every row must have `cols` entries.
    pub fn from_rows(rows: &[Vec<i64>], cols: usize) -> Result<Self, InstanceError> {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(InstanceError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// Builds a matrix from column vectors of equal length `rows`.
    pub fn from_columns(rows: usize, columns: &[Vec<i64>]) -> Self {
        let mut data = Vec::with_capacity(rows * columns.len());
        for col in columns {
            assert_eq!(col.len(), rows, "column length must equal row count");
            data.extend_from_slice(col);
        }
        Self {
            rows,
            cols: columns.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.data[col * self.rows + row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: i64) {
        self.data[col * self.rows + row] = value;
    }

    pub fn column(&self, col: usize) -> &[i64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[i64]> + '_ {
        (0..self.cols).map(move |j| self.column(j))
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Largest absolute entry, `0` for an empty matrix.
    pub fn max_abs(&self) -> u64 {
        self.data
            .iter()
            .map(|v| v.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn min_entry(&self) -> Option<i64> {
        self.data.iter().copied().min()
    }

    pub fn map_entries(&self, f: impl Fn(i64) -> i64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A combinatorial n-fold instance as read from disk. Use
/// [`NFoldInstance::validate`] before handing it to a solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NFoldInstance {
    pub r: usize,
    pub blocks: Vec<Matrix>,
    pub b_up: Vec<i64>,
    pub b_low: Vec<i64>,
    pub c: Option<Vec<i64>>,
}

impl NFoldInstance {
    pub fn new(blocks: Vec<Matrix>, b_up: Vec<i64>, b_low: Vec<i64>) -> Self {
        let r = b_up.len();
        Self {
            r,
            blocks,
            b_up,
            b_low,
            c: None,
        }
    }

    pub fn with_objective(mut self, c: Vec<i64>) -> Self {
        self.c = Some(c);
        self
    }

    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.blocks.iter().map(Matrix::cols).collect()
    }

    pub fn h(&self) -> usize {
        self.blocks.iter().map(Matrix::cols).sum()
    }

    /// Checks dimensions and the sign of the local right-hand side, caching
    /// `Δ` (largest absolute block entry) and `h` (total column count).
    pub fn validate(self) -> Result<ValidatedInstance, InstanceError> {
        if self.blocks.is_empty() {
            return Err(InstanceError::DimensionMismatch(
                "instance must contain at least one block".into(),
            ));
        }
        if self.b_up.len() != self.r {
            return Err(InstanceError::DimensionMismatch(format!(
                "b_up has length {}, expected r = {}",
                self.b_up.len(),
                self.r
            )));
        }
        if self.b_low.len() != self.blocks.len() {
            return Err(InstanceError::DimensionMismatch(format!(
                "b_low has length {}, expected n = {}",
                self.b_low.len(),
                self.blocks.len()
            )));
        }
        for (k, block) in self.blocks.iter().enumerate() {
            if block.rows() != self.r {
                return Err(InstanceError::DimensionMismatch(format!(
                    "block {k} has {} rows, expected r = {}",
                    block.rows(),
                    self.r
                )));
            }
            if block.cols() == 0 {
                return Err(InstanceError::DimensionMismatch(format!(
                    "block {k} has no columns"
                )));
            }
            if block.data.contains(&i64::MIN) {
                return Err(InstanceError::EntryOutOfRange(format!("block {k}")));
            }
        }
        let h = self.h();
        if let Some(c) = &self.c {
            if c.len() != h {
                return Err(InstanceError::DimensionMismatch(format!(
                    "c has length {}, expected h = {h}",
                    c.len()
                )));
            }
        }
        if let Some((block, &value)) = self.b_low.iter().enumerate().find(|(_, &v)| v < 0) {
            return Err(InstanceError::NegativeLocalRhs { block, value });
        }
        let delta = self.blocks.iter().map(Matrix::max_abs).max().unwrap_or(0) as i64;
        let mut offsets = Vec::with_capacity(self.blocks.len() + 1);
        offsets.push(0);
        for block in &self.blocks {
            offsets.push(offsets.last().unwrap() + block.cols());
        }
        Ok(ValidatedInstance {
            inst: self,
            delta,
            h,
            offsets,
        })
    }
}

/// An instance whose shape has been checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedInstance {
    inst: NFoldInstance,
    delta: i64,
    h: usize,
    offsets: Vec<usize>,
}

impl ValidatedInstance {
    pub fn instance(&self) -> &NFoldInstance {
        &self.inst
    }

    pub fn into_inner(self) -> NFoldInstance {
        self.inst
    }

    pub fn n(&self) -> usize {
        self.inst.blocks.len()
    }

    pub fn r(&self) -> usize {
        self.inst.r
    }

    pub fn delta(&self) -> i64 {
        self.delta
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn block(&self, k: usize) -> &Matrix {
        &self.inst.blocks[k]
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.inst.blocks
    }

    pub fn b_up(&self) -> &[i64] {
        &self.inst.b_up
    }

    pub fn b_low(&self) -> &[i64] {
        &self.inst.b_low
    }

    pub fn objective(&self) -> Option<&[i64]> {
        self.inst.c.as_deref()
    }

    /// Column range of brick `k` inside the full solution vector.
    pub fn brick_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Objective slice belonging to block `k`.
    pub fn block_objective(&self, k: usize) -> Option<&[i64]> {
        self.objective().map(|c| &c[self.brick_range(k)])
    }

    pub fn has_negative_entries(&self) -> bool {
        self.inst
            .blocks
            .iter()
            .any(|b| b.min_entry().is_some_and(|v| v < 0))
    }

    /// `c^T x` against this instance's objective, if one is present.
    pub fn objective_value(&self, x: &[i64]) -> Option<i64> {
        self.objective()
            .map(|c| c.iter().zip(x).map(|(&ci, &xi)| ci * xi).sum())
    }
}

/// A solution vector split into bricks of widths `t_1, …, t_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<i64>,
}

impl Solution {
    pub fn new(x: Vec<i64>) -> Self {
        Self { x, objective: None }
    }

    pub fn brick<'a>(&'a self, inst: &ValidatedInstance, k: usize) -> &'a [i64] {
        &self.x[inst.brick_range(k)]
    }
}

/// Checks both constraint groups exactly: every brick sums to its local
/// right-hand side and the blocks together hit `b_up`.
pub fn verify_solution(inst: &ValidatedInstance, sol: &Solution) -> Result<bool, InstanceError> {
    if sol.x.len() != inst.h() {
        return Err(InstanceError::LengthMismatch {
            expected: inst.h(),
            found: sol.x.len(),
        });
    }
    if sol.x.iter().any(|&v| v < 0) {
        return Ok(false);
    }
    let mut global = vec![0i128; inst.r()];
    for k in 0..inst.n() {
        let brick = sol.brick(inst, k);
        let sum: i128 = brick.iter().map(|&v| v as i128).sum();
        if sum != inst.b_low()[k] as i128 {
            return Ok(false);
        }
        let block = inst.block(k);
        for (j, &mult) in brick.iter().enumerate() {
            if mult == 0 {
                continue;
            }
            for (row, &a) in block.column(j).iter().enumerate() {
                global[row] += a as i128 * mult as i128;
            }
        }
    }
    Ok(global
        .iter()
        .zip(inst.b_up())
        .all(|(&g, &b)| g == b as i128))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Feasible,
    Infeasible,
    Optimal,
}

/// Counters gathered during a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub support_bound: u64,
    pub box_radius: i64,
    pub reduced: bool,
    /// Cells of every block table built, summed over all iterations.
    pub base_cells: usize,
    /// `|Ñ^(i)|` per iteration (retained part only).
    pub small_cells: Vec<usize>,
    /// `|N^(i)|` per iteration.
    pub level_cells: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: Status,
    pub solution: Option<Solution>,
    pub stats: SolveStats,
}

impl SolveOutcome {
    pub fn infeasible(stats: SolveStats) -> Self {
        Self {
            status: Status::Infeasible,
            solution: None,
            stats,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status != Status::Infeasible
    }

    pub fn objective(&self) -> Option<i64> {
        self.solution.as_ref().and_then(|s| s.objective)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(rows: Vec<Vec<i64>>, b_up: Vec<i64>, b_low: Vec<i64>) -> NFoldInstance {
        let cols = rows[0].len();
        NFoldInstance::new(vec![Matrix::from_rows(&rows, cols).unwrap()], b_up, b_low)
    }

    #[test]
    fn validate_caches_delta_and_h() {
        let v = single(vec![vec![1, 2]], vec![3], vec![2])
            .validate()
            .unwrap();
        assert_eq!(v.delta(), 2);
        assert_eq!(v.h(), 2);
    }

    #[test]
    fn validate_rejects_negative_local_rhs() {
        let err = single(vec![vec![1]], vec![0], vec![-1])
            .validate()
            .unwrap_err();
        assert_eq!(
            err,
            InstanceError::NegativeLocalRhs {
                block: 0,
                value: -1
            }
        );
    }

    #[test]
    fn validate_rejects_missing_block() {
        let mut inst = single(vec![vec![1]], vec![0], vec![0]);
        inst.b_low.push(0);
        assert!(matches!(
            inst.validate(),
            Err(InstanceError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn validate_rejects_wrong_objective_length() {
        let inst = single(vec![vec![1, 2]], vec![3], vec![2]).with_objective(vec![1]);
        assert!(matches!(
            inst.validate(),
            Err(InstanceError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn verify_checks_both_row_groups() {
        let v = single(vec![vec![1, 2]], vec![3], vec![2])
            .validate()
            .unwrap();
        assert!(verify_solution(&v, &Solution::new(vec![1, 1])).unwrap());
        assert!(!verify_solution(&v, &Solution::new(vec![2, 0])).unwrap());
        assert!(!verify_solution(&v, &Solution::new(vec![3, 0])).unwrap());
        assert!(matches!(
            verify_solution(&v, &Solution::new(vec![1])),
            Err(InstanceError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn verify_zero_instance() {
        let v = single(vec![vec![3, -1], vec![0, 2]], vec![0, 0], vec![0])
            .validate()
            .unwrap();
        assert!(verify_solution(&v, &Solution::new(vec![0, 0])).unwrap());
    }

    #[test]
    fn delta_matches_brute_max() {
        let blocks = vec![
            Matrix::from_rows(&[vec![1, -7], vec![3, 0]], 2).unwrap(),
            Matrix::from_rows(&[vec![5], vec![-2]], 1).unwrap(),
        ];
        let v = NFoldInstance::new(blocks, vec![0, 0], vec![0, 0])
            .validate()
            .unwrap();
        assert_eq!(v.delta(), 7);
    }
}
