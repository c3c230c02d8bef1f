//! Seeded random instances for cross-checking against the oracle.

use rand::Rng;

use crate::instance::{Matrix, NFoldInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomParams {
    pub n_max: usize,
    pub r_max: usize,
    pub entry_min: i64,
    pub entry_max: i64,
    pub t_max: usize,
    pub b_low_max: i64,
    /// Objective entries are drawn from `0..=c_max` when set.
    pub c_max: Option<i64>,
    /// Probability that `b_up` is planted from a random solution rather
    /// than drawn independently.
    pub planted: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            n_max: 3,
            r_max: 2,
            entry_min: -2,
            entry_max: 2,
            t_max: 3,
            b_low_max: 30,
            c_max: None,
            planted: 0.5,
        }
    }
}

/// A random composition of `total` into `parts` non-negative summands.
pub fn random_composition<R: Rng + ?Sized>(rng: &mut R, total: i64, parts: usize) -> Vec<i64> {
    let mut x = vec![0i64; parts];
    for _ in 0..total {
        x[rng.gen_range(0..parts)] += 1;
    }
    x
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, p: &RandomParams) -> NFoldInstance {
    let n = rng.gen_range(1..=p.n_max);
    let r = rng.gen_range(1..=p.r_max.max(1)).min(p.r_max);
    let mut blocks = Vec::with_capacity(n);
    let mut b_low = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.gen_range(1..=p.t_max);
        let rows: Vec<Vec<i64>> = (0..r)
            .map(|_| {
                (0..t)
                    .map(|_| rng.gen_range(p.entry_min..=p.entry_max))
                    .collect()
            })
            .collect();
        blocks.push(Matrix::from_rows(&rows, t).expect("rows have width t"));
        b_low.push(rng.gen_range(0..=p.b_low_max));
    }
    let b_up = if rng.gen_bool(p.planted) {
        let mut acc = vec![0i64; r];
        for (block, &m) in blocks.iter().zip(&b_low) {
            let x = random_composition(rng, m, block.cols());
            for (j, &mult) in x.iter().enumerate() {
                for (a, &v) in block.column(j).iter().enumerate() {
                    acc[a] += v * mult;
                }
            }
        }
        acc
    } else {
        let total: i64 = b_low.iter().sum();
        (0..r)
            .map(|_| rng.gen_range(p.entry_min * total..=p.entry_max * total))
            .collect()
    };
    let h: usize = blocks.iter().map(Matrix::cols).sum();
    let mut inst = NFoldInstance::new(blocks, b_up, b_low);
    if let Some(c_max) = p.c_max {
        inst.c = Some((0..h).map(|_| rng.gen_range(0..=c_max)).collect());
    }
    inst
}
