//! Support bound, box radius and the per-iteration lower right-hand sides.
//!
//! Iterations are numbered `1..=I` top-down in the sense that iteration `I`
//! carries the full problem and iteration `1` the smallest residual. Within a
//! plan all per-block arrays have length `I` and index `i - 1` holds
//! iteration `i`.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::instance::ValidatedInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Feasibility,
    #[serde(alias = "optimize")]
    Optimization,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "feasibility" => Ok(Mode::Feasibility),
            "optimize" | "optimization" => Ok(Mode::Optimization),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// `⌊log2(base^exp)⌋` computed exactly from the bit length of the power.
fn floor_log2_pow(base: u64, exp: u32) -> u64 {
    assert!(base >= 1);
    BigUint::from(base).pow(exp).bits() - 1
}

/// The support bound `K`: every feasible (resp. optimal) solution can be
/// assumed to use at most `K` columns with multiplicity per brick.
///
/// Feasibility: `⌊2(r+1)·log2(4(r+1)·max(Δ,1))⌋`.
/// Optimization: `⌊2(r+2)(log2(r+2) + Δ + 2)⌋`.
pub fn support_bound(r: usize, delta: i64, mode: Mode) -> u64 {
    let r = r as u64;
    let delta = delta.max(0) as u64;
    match mode {
        Mode::Feasibility => {
            let base = 4 * (r + 1) * delta.max(1);
            floor_log2_pow(base, (2 * (r + 1)) as u32)
        }
        Mode::Optimization => {
            // The second summand is an integer, so the floor only touches the log.
            floor_log2_pow(r + 2, (2 * (r + 2)) as u32) + 2 * (r + 2) * (delta + 2)
        }
    }
}

/// Box radius `D = n·K·Δ`.
pub fn box_radius(n: usize, k: u64, delta: i64) -> i64 {
    (n as i64)
        .checked_mul(k as i64)
        .and_then(|v| v.checked_mul(delta))
        .expect("box radius overflows i64")
}

/// The lower right-hand-side schedule of one block, bottom iteration first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub iterations: usize,
    pub m: Vec<i64>,
    pub tilm: Vec<i64>,
    pub hatm: Vec<i64>,
    /// Parity correction bit; `None` at the base iteration and on padding.
    pub z: Vec<Option<u8>>,
}

impl BlockSchedule {
    /// Prepends zero iterations so the schedule spans `total` iterations.
    pub fn padded(&self, total: usize) -> BlockSchedule {
        assert!(total >= self.iterations);
        let pad = total - self.m.len();
        let zeros = |v: &Vec<i64>| {
            let mut out = vec![0; pad];
            out.extend_from_slice(v);
            out
        };
        let mut z = vec![None; pad];
        z.extend_from_slice(&self.z);
        BlockSchedule {
            iterations: self.iterations,
            m: zeros(&self.m),
            tilm: zeros(&self.tilm),
            hatm: zeros(&self.hatm),
            z,
        }
    }
}

/// Simulates the halving procedure for one block: while `m > K`, split off
/// `K - z` units (with `z` chosen so the remainder is even) and halve.
pub fn lower_rhs_schedule(b_low_k: i64, k: u64) -> BlockSchedule {
    assert!(b_low_k >= 0, "lower right-hand side must be non-negative");
    assert!(k >= 1, "support bound must be positive");
    let k = k as i64;
    let (mut m, mut tilm, mut hatm, mut z) = (vec![], vec![], vec![], vec![]);
    let mut cur = b_low_k;
    while cur > k {
        let zi = if cur % 2 == k % 2 { 0 } else { 1 };
        let t = k - zi;
        m.push(cur);
        tilm.push(t);
        hatm.push(cur - t);
        z.push(Some(zi as u8));
        cur = (cur - t) / 2;
    }
    m.push(cur);
    tilm.push(cur);
    hatm.push(0);
    z.push(None);
    for v in [&mut m, &mut tilm, &mut hatm] {
        v.reverse();
    }
    z.reverse();
    BlockSchedule {
        iterations: m.len(),
        m,
        tilm,
        hatm,
        z,
    }
}

/// `I_k`: `1` when `b_low_k ≤ K`, otherwise `1 + min{ j ≥ 0 : 2^j · 2K ≥ b_low_k + K }`.
///
/// The level `j` steps below the top holds `⌈(b − K(2^j − 1)) / 2^j⌉` (see
/// [`closed_form_m`]), which is at most `K` exactly when `b + K ≤ 2^j · 2K`.
/// The variant with `2K + 1` in place of `2K` comes from rounding the levels
/// down and undercounts, e.g. `b = 37, K = 5` needs four iterations.
pub fn iteration_count(b_low_k: i64, k: u64) -> usize {
    assert!(b_low_k >= 0 && k >= 1);
    let k = k as i128;
    let b = b_low_k as i128;
    if b <= k {
        return 1;
    }
    let mut j = 0usize;
    while (2 * k) << j < b + k {
        j += 1;
    }
    j + 1
}

/// `m_k^(i)` without simulation: `b` at `i = I`, `0` once the level above is
/// at most `K`, and `⌈(b − K(2^s − 1)) / 2^s⌉` with `s = I − i` otherwise.
///
/// Each non-zero step takes `(m − K + z) / 2`, which is `⌈(m − K) / 2⌉`
/// because `z` only fixes the parity, and nested ceilings of halvings
/// collapse into one. Rounding down instead disagrees with the simulation
/// whenever some step above `i` has `z = 1` (e.g. `b = 15, K = 12`).
pub fn closed_form_m(b_low_k: i64, k: u64, total: usize, i: usize) -> i64 {
    assert!(1 <= i && i <= total, "iteration {i} outside 1..={total}");
    let k = k as i128;
    let b = b_low_k as i128;
    let mut value = b;
    for level in (i..total).rev() {
        if value <= k {
            return 0;
        }
        let s = (total - level) as u32;
        assert!(s < 120, "iteration depth too large");
        let scale = 1i128 << s;
        value = -(-(b - k * (scale - 1))).div_euclid(scale);
    }
    value as i64
}

/// Everything the driver needs to know about the iteration structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationPlan {
    pub mode: Mode,
    pub support_bound: u64,
    pub box_radius: i64,
    pub iterations: usize,
    pub blocks: Vec<BlockSchedule>,
}

impl IterationPlan {
    /// `tilm_k^(i)` for every block at iteration `i` (1-based).
    pub fn tilm_at(&self, i: usize) -> Vec<i64> {
        self.blocks.iter().map(|b| b.tilm[i - 1]).collect()
    }
}

/// Builds the plan for a validated instance. Blocks that need fewer
/// iterations are anchored at the late end; their early iterations are zero.
pub fn build_plan(inst: &ValidatedInstance, mode: Mode) -> IterationPlan {
    let k = support_bound(inst.r(), inst.delta(), mode);
    let d = box_radius(inst.n(), k, inst.delta());
    let raw: Vec<BlockSchedule> = inst
        .b_low()
        .iter()
        .map(|&b| lower_rhs_schedule(b, k))
        .collect();
    let total = raw.iter().map(|s| s.iterations).max().unwrap_or(1);
    IterationPlan {
        mode,
        support_bound: k,
        box_radius: d,
        iterations: total,
        blocks: raw.iter().map(|s| s.padded(total)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Matrix, NFoldInstance};

    #[test]
    fn support_bound_constants() {
        assert_eq!(support_bound(1, 1, Mode::Feasibility), 12);
        assert_eq!(support_bound(1, 2, Mode::Feasibility), 16);
        assert_eq!(support_bound(1, 1, Mode::Optimization), 27);
    }

    #[test]
    fn support_bound_clamps_zero_delta() {
        assert_eq!(
            support_bound(1, 0, Mode::Feasibility),
            support_bound(1, 1, Mode::Feasibility)
        );
    }

    #[test]
    fn box_radius_examples() {
        assert_eq!(box_radius(2, 12, 1), 24);
        assert_eq!(box_radius(1, 0, 5), 0);
        assert_eq!(box_radius(3, 12, 2), 72);
    }

    #[test]
    fn schedule_hundred() {
        let s = lower_rhs_schedule(100, 12);
        assert_eq!(s.m, vec![2, 16, 44, 100]);
        assert_eq!(s.tilm, vec![2, 12, 12, 12]);
        assert_eq!(s.hatm, vec![0, 4, 32, 88]);
        assert_eq!(s.z, vec![None, Some(0), Some(0), Some(0)]);
        assert_eq!(s.iterations, 4);
    }

    #[test]
    fn schedule_parity_mismatch() {
        let s = lower_rhs_schedule(15, 12);
        assert_eq!(s.m, vec![2, 15]);
        assert_eq!(s.tilm, vec![2, 11]);
        assert_eq!(s.hatm, vec![0, 4]);
        assert_eq!(s.z[1], Some(1));
    }

    #[test]
    fn schedule_base_case() {
        let s = lower_rhs_schedule(5, 12);
        assert_eq!(
            (s.m, s.tilm, s.hatm, s.iterations),
            (vec![5], vec![5], vec![0], 1)
        );
        assert_eq!(lower_rhs_schedule(0, 12).iterations, 1);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_m(100, 12, 4, 2), 16);
        assert_eq!(closed_form_m(100, 12, 4, 4), 100);
        assert_eq!(closed_form_m(100, 12, 4, 1), 2);
    }

    #[test]
    fn closed_form_rounds_up_after_parity_fix() {
        // 15 -> (15 - 11) / 2 = 2, while rounding down would give 1
        assert_eq!(closed_form_m(15, 12, 2, 1), 2);
        assert_eq!(closed_form_m(88, 12, 4, 1), 1);
        assert_eq!(closed_form_m(17, 5, 3, 1), 1);
    }

    #[test]
    fn iteration_count_examples() {
        assert_eq!(iteration_count(100, 12), 4);
        assert_eq!(iteration_count(88, 12), 4);
        assert_eq!(lower_rhs_schedule(88, 12).m, vec![1, 13, 38, 88]);
        assert_eq!(iteration_count(5, 12), 1);
        assert_eq!(iteration_count(0, 12), 1);
        assert_eq!(iteration_count(37, 5), 4);
        assert_eq!(lower_rhs_schedule(37, 5).m, vec![1, 6, 16, 37]);
    }

    #[test]
    fn plan_pads_early_iterations() {
        let blocks = vec![
            Matrix::from_rows(&[vec![1]], 1).unwrap(),
            Matrix::from_rows(&[vec![1]], 1).unwrap(),
        ];
        let inst = NFoldInstance::new(blocks, vec![105], vec![100, 5])
            .validate()
            .unwrap();
        // r = 1, Δ = 1 gives K = 12 in feasibility mode.
        let plan = build_plan(&inst, Mode::Feasibility);
        assert_eq!(plan.support_bound, 12);
        assert_eq!(plan.box_radius, 24);
        assert_eq!(plan.iterations, 4);
        assert_eq!(plan.blocks[1].m, vec![0, 0, 0, 5]);
        assert_eq!(plan.blocks[1].tilm, vec![0, 0, 0, 5]);
        assert_eq!(plan.tilm_at(4), vec![12, 5]);
    }

    #[test]
    fn plan_of_zero_demand() {
        let inst = NFoldInstance::new(
            vec![Matrix::from_rows(&[vec![1]], 1).unwrap()],
            vec![0],
            vec![0],
        )
        .validate()
        .unwrap();
        let plan = build_plan(&inst, Mode::Feasibility);
        assert_eq!(plan.iterations, 1);
        assert_eq!(plan.blocks[0].m, vec![0]);
    }

    #[test]
    fn mode_parses_cli_spelling() {
        assert_eq!("optimize".parse::<Mode>().unwrap(), Mode::Optimization);
        assert_eq!("feasibility".parse::<Mode>().unwrap(), Mode::Feasibility);
        assert!("fast".parse::<Mode>().is_err());
    }
}
