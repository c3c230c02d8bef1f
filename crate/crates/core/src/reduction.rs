//! Shift to non-negative block entries.
//!
//! Adding `Δ` to every block entry adds `Δ·‖x_k‖_1 = Δ·b_low_k` to each
//! global row, so shifting `b_up` by `Δ·‖b_low‖_1` keeps the solution set
//! unchanged.

use crate::instance::{InstanceError, NFoldInstance, Solution, ValidatedInstance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedInstance {
    pub inst: ValidatedInstance,
    /// The `Δ` of the original instance.
    pub shift: i64,
}

pub fn reduce(inst: &ValidatedInstance) -> Result<ReducedInstance, InstanceError> {
    let shift = inst.delta();
    let norm = inst
        .b_low()
        .iter()
        .try_fold(0i64, |acc, &v| acc.checked_add(v))
        .ok_or(InstanceError::Overflow("summing b_low"))?;
    let offset = norm
        .checked_mul(shift)
        .ok_or(InstanceError::Overflow("shifting b_up"))?;
    let b_up = inst
        .b_up()
        .iter()
        .map(|&b| b.checked_add(offset))
        .collect::<Option<Vec<_>>>()
        .ok_or(InstanceError::Overflow("shifting b_up"))?;
    let mut blocks = Vec::with_capacity(inst.n());
    for block in inst.blocks() {
        // |entry| ≤ Δ, so this cannot overflow unless Δ is near i64::MAX.
        if block.max_abs() as i64 > i64::MAX - shift {
            return Err(InstanceError::Overflow("shifting block entries"));
        }
        blocks.push(block.map_entries(|v| v + shift));
    }
    let original = inst.instance();
    let reduced = NFoldInstance {
        r: original.r,
        blocks,
        b_up,
        b_low: original.b_low.clone(),
        c: original.c.clone(),
    };
    Ok(ReducedInstance {
        inst: reduced.validate()?,
        shift,
    })
}

/// Solutions of the reduced instance are solutions of the original one; only
/// the objective is recomputed against the original `c`.
pub fn map_back(original: &ValidatedInstance, sol: &Solution) -> Solution {
    Solution {
        x: sol.x.clone(),
        objective: original.objective_value(&sol.x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{verify_solution, Matrix};

    #[test]
    fn shifts_entries_and_rhs() {
        let inst = NFoldInstance::new(
            vec![Matrix::from_rows(&[vec![-1, 2]], 2).unwrap()],
            vec![0],
            vec![3],
        )
        .validate()
        .unwrap();
        let red = reduce(&inst).unwrap();
        assert_eq!(red.shift, 2);
        assert_eq!(red.inst.block(0).to_rows(), vec![vec![1, 4]]);
        assert_eq!(red.inst.b_up(), &[6]);
        let x = Solution::new(vec![2, 1]);
        assert!(verify_solution(&inst, &x).unwrap());
        assert!(verify_solution(&red.inst, &x).unwrap());
        assert_eq!(map_back(&inst, &x).x, vec![2, 1]);
    }

    #[test]
    fn zero_norm_keeps_rhs() {
        let inst = NFoldInstance::new(
            vec![Matrix::from_rows(&[vec![-3, 1]], 2).unwrap()],
            vec![7],
            vec![0],
        )
        .validate()
        .unwrap();
        let red = reduce(&inst).unwrap();
        assert_eq!(red.inst.b_up(), &[7]);
        assert_eq!(map_back(&inst, &Solution::new(vec![0, 0])).x, vec![0, 0]);
    }

    #[test]
    fn nonnegative_instance_still_shifts() {
        let inst = NFoldInstance::new(
            vec![Matrix::from_rows(&[vec![0, 2]], 2).unwrap()],
            vec![2],
            vec![1],
        )
        .validate()
        .unwrap();
        let red = reduce(&inst).unwrap();
        assert_eq!(red.inst.block(0).to_rows(), vec![vec![2, 4]]);
        assert_eq!(red.inst.b_up(), &[4]);
    }

    #[test]
    fn objective_recomputed_on_original() {
        let inst = NFoldInstance::new(
            vec![Matrix::from_rows(&[vec![-1, 1]], 2).unwrap()],
            vec![0],
            vec![2],
        )
        .with_objective(vec![3, 5])
        .validate()
        .unwrap();
        let back = map_back(&inst, &Solution::new(vec![1, 1]));
        assert_eq!(back.objective, Some(8));
    }
}
