//! Closest string: find a center within Hamming distance `d` of every input.
//!
//! Columns are grouped by their equality pattern (characters renamed by
//! first occurrence). For each column type the ILP chooses how many of its
//! columns take each canonical character; mismatches per input row are
//! summed into the global constraints and a slack block turns the `≤ d`
//! rows into equations.

use std::collections::BTreeMap;

use log::debug;
use nfold::{InstanceError, Matrix, Mode, NFoldInstance, SolveError, SolverConfig, Status};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClosestStringError {
    #[error("at least one string is required")]
    Empty,
    #[error("string {index} has length {found}, expected {expected}")]
    RaggedLengths {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("radius must be non-negative, got {0}")]
    NegativeRadius(i64),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("decoded center violates the radius: {0}")]
    Decode(String),
}

/// Inputs as read from JSON: the strings and an optional radius.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringInstance {
    pub strings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnType {
    /// Canonical character of each row (first occurrence numbering).
    pub pattern: Vec<usize>,
    /// Original column positions, ascending.
    pub columns: Vec<usize>,
}

impl ColumnType {
    /// `b^f`.
    pub fn count(&self) -> usize {
        self.columns.len()
    }

    /// Number of distinct characters in the pattern.
    pub fn arity(&self) -> usize {
        self.pattern.iter().max().map_or(0, |m| m + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CenterResult {
    pub center: String,
    pub d: i64,
}

fn chars_of(strings: &[String]) -> Result<Vec<Vec<char>>, ClosestStringError> {
    let rows: Vec<Vec<char>> = strings.iter().map(|s| s.chars().collect()).collect();
    let expected = rows.first().ok_or(ClosestStringError::Empty)?.len();
    for (index, r) in rows.iter().enumerate() {
        if r.len() != expected {
            return Err(ClosestStringError::RaggedLengths {
                index,
                expected,
                found: r.len(),
            });
        }
    }
    Ok(rows)
}

pub fn hamming(a: &[char], b: &[char]) -> i64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as i64
}

/// Largest Hamming distance from `center` to any input.
pub fn radius_of(center: &str, strings: &[String]) -> i64 {
    let c: Vec<char> = center.chars().collect();
    strings
        .iter()
        .map(|s| hamming(&c, &s.chars().collect::<Vec<_>>()))
        .max()
        .unwrap_or(0)
}

/// Groups columns by equality pattern, types in order of first column.
pub fn extract_column_types(strings: &[String]) -> Result<Vec<ColumnType>, ClosestStringError> {
    let rows = chars_of(strings)?;
    let len = rows[0].len();
    let mut types: Vec<ColumnType> = Vec::new();
    let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for col in 0..len {
        let mut seen: Vec<char> = Vec::new();
        let pattern: Vec<usize> = rows
            .iter()
            .map(|r| {
                let ch = r[col];
                match seen.iter().position(|&c| c == ch) {
                    Some(p) => p,
                    None => {
                        seen.push(ch);
                        seen.len() - 1
                    }
                }
            })
            .collect();
        match index.get(&pattern) {
            Some(&f) => types[f].columns.push(col),
            None => {
                index.insert(pattern.clone(), types.len());
                types.push(ColumnType {
                    pattern,
                    columns: vec![col],
                });
            }
        }
    }
    Ok(types)
}

/// The column-type n-fold for radius `d`: one block per type whose column
/// `e` has a one in row `j` iff canonical character `e` differs from row
/// `j`'s, plus a slack block `(I_k 0)` with local sum `dk`.
pub fn build_ilp(
    types: &[ColumnType],
    k: usize,
    d: i64,
) -> Result<NFoldInstance, ClosestStringError> {
    if d < 0 {
        return Err(ClosestStringError::NegativeRadius(d));
    }
    let mut blocks = Vec::with_capacity(types.len() + 1);
    let mut b_low = Vec::with_capacity(types.len() + 1);
    for ty in types {
        let cols: Vec<Vec<i64>> = (0..ty.arity())
            .map(|e| ty.pattern.iter().map(|&p| i64::from(p != e)).collect())
            .collect();
        blocks.push(Matrix::from_columns(k, &cols));
        b_low.push(ty.count() as i64);
    }
    let mut slack: Vec<Vec<i64>> = (0..k)
        .map(|j| (0..k).map(|a| i64::from(a == j)).collect())
        .collect();
    slack.push(vec![0; k]);
    blocks.push(Matrix::from_columns(k, &slack));
    b_low.push(d * k as i64);
    Ok(NFoldInstance::new(blocks, vec![d; k], b_low))
}

/// Decides radius `d` and decodes a center when one exists.
pub fn decide_radius(
    strings: &[String],
    d: i64,
    cfg: &SolverConfig,
) -> Result<Option<String>, ClosestStringError> {
    let rows = chars_of(strings)?;
    let types = extract_column_types(strings)?;
    let ilp = build_ilp(&types, rows.len(), d)?.validate()?;
    let (out, _) = nfold::solve_validated(&ilp, Mode::Feasibility, cfg)?;
    if out.status == Status::Infeasible {
        return Ok(None);
    }
    let x = out
        .solution
        .ok_or_else(|| ClosestStringError::Decode("feasible verdict without a solution".into()))?
        .x;
    let mut center = vec!['\0'; rows[0].len()];
    for (f, ty) in types.iter().enumerate() {
        let brick = &x[ilp.brick_range(f)];
        let mut cols = ty.columns.iter();
        for (e, &mult) in brick.iter().enumerate() {
            // the character canonical index e stands for in this type
            let row = ty.pattern.iter().position(|&p| p == e).expect("e < arity");
            for _ in 0..mult {
                let &c = cols.next().expect("brick sums to the type count");
                center[c] = rows[row][c];
            }
        }
    }
    let center: String = center.into_iter().collect();
    let achieved = radius_of(&center, strings);
    if achieved > d {
        return Err(ClosestStringError::Decode(format!(
            "center {center:?} has radius {achieved} > {d}"
        )));
    }
    Ok(Some(center))
}

/// With `d` given, decides that radius; otherwise finds the smallest one by
/// binary search between `⌈max pairwise distance / 2⌉` and the best radius
/// among the inputs themselves.
pub fn solve_closest(
    strings: &[String],
    d: Option<i64>,
    cfg: &SolverConfig,
) -> Result<Option<CenterResult>, ClosestStringError> {
    let rows = chars_of(strings)?;
    if let Some(d) = d {
        return Ok(decide_radius(strings, d, cfg)?.map(|center| CenterResult { center, d }));
    }
    let mut pairwise = 0;
    let mut upper = (i64::MAX, 0usize);
    for (i, a) in rows.iter().enumerate() {
        let worst = rows.iter().map(|b| hamming(a, b)).max().unwrap_or(0);
        pairwise = pairwise.max(worst);
        upper = upper.min((worst, i));
    }
    let (mut lo, mut hi) = ((pairwise + 1) / 2, upper.0);
    let mut best = strings[upper.1].clone();
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let found = decide_radius(strings, mid, cfg)?;
        debug!(
            "radius {mid}: {}",
            if found.is_some() {
                "feasible"
            } else {
                "infeasible"
            }
        );
        match found {
            Some(center) => {
                hi = radius_of(&center, strings);
                best = center;
            }
            None => lo = mid + 1,
        }
    }
    Ok(Some(CenterResult {
        d: radius_of(&best, strings),
        center: best,
    }))
}

/// Smallest radius over all centers whose characters come from the
/// respective input column, or from `alphabet` when given.
pub fn brute_force(strings: &[String], alphabet: Option<&[char]>) -> i64 {
    let rows: Vec<Vec<char>> = strings.iter().map(|s| s.chars().collect()).collect();
    let len = rows.first().map_or(0, Vec::len);
    let options: Vec<Vec<char>> = (0..len)
        .map(|c| match alphabet {
            Some(a) => a.to_vec(),
            None => {
                let mut v: Vec<char> = rows.iter().map(|r| r[c]).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        })
        .collect();
    let mut dist = vec![0i64; rows.len()];
    let mut best = i64::MAX;
    fn go(
        c: usize,
        rows: &[Vec<char>],
        options: &[Vec<char>],
        dist: &mut Vec<i64>,
        best: &mut i64,
    ) {
        let now = dist.iter().copied().max().unwrap_or(0);
        if now >= *best {
            return;
        }
        if c == options.len() {
            *best = now;
            return;
        }
        for &ch in &options[c] {
            for (j, r) in rows.iter().enumerate() {
                dist[j] += i64::from(r[c] != ch);
            }
            go(c + 1, rows, options, dist, best);
            for (j, r) in rows.iter().enumerate() {
                dist[j] -= i64::from(r[c] != ch);
            }
        }
    }
    go(0, &rows, &options, &mut dist, &mut best);
    best
}

/// `k` random strings of length `len` over the first `sigma` letters.
pub fn random_strings<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    len: usize,
    sigma: u8,
) -> Vec<String> {
    (0..k)
        .map(|_| {
            (0..len)
                .map(|_| (b'a' + rng.gen_range(0..sigma)) as char)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn column_types() {
        let t = extract_column_types(&s(&["aa", "ab"])).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].pattern, vec![0, 0]);
        assert_eq!(t[1].pattern, vec![0, 1]);
        let t = extract_column_types(&s(&["ab", "ba"])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].columns, vec![0, 1]);
        let t = extract_column_types(&s(&["xyz", "xyz", "xyz"])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].count(), 3);
    }

    #[test]
    fn ilp_shape() {
        let t = extract_column_types(&s(&["ab", "ba"])).unwrap();
        let ilp = build_ilp(&t, 2, 1).unwrap();
        assert_eq!(ilp.n(), 2);
        assert_eq!(ilp.b_up, vec![1, 1]);
        assert_eq!(ilp.b_low, vec![2, 2]);
    }

    #[test]
    fn decisions() {
        let cfg = SolverConfig::default();
        let center = decide_radius(&s(&["aa", "bb"]), 1, &cfg).unwrap().unwrap();
        assert!(center == "ab" || center == "ba");
        assert_eq!(decide_radius(&s(&["aa", "bb"]), 0, &cfg).unwrap(), None);
    }

    #[test]
    fn minimization() {
        let cfg = SolverConfig::default();
        let r = solve_closest(&s(&["aab", "abb"]), None, &cfg)
            .unwrap()
            .unwrap();
        assert_eq!(r.d, 1);
        assert_eq!(radius_of(&r.center, &s(&["aab", "abb"])), 1);
        let r = solve_closest(&s(&["aa", "bb"]), None, &cfg)
            .unwrap()
            .unwrap();
        assert_eq!(r.d, 1);
        let r = solve_closest(&s(&["hello"]), None, &cfg).unwrap().unwrap();
        assert_eq!((r.center.as_str(), r.d), ("hello", 0));
    }

    #[test]
    fn brute_force_agrees_on_examples() {
        assert_eq!(brute_force(&s(&["aab", "abb"]), None), 1);
        assert_eq!(brute_force(&s(&["aa", "bb"]), Some(&['a', 'b'])), 1);
        assert_eq!(
            brute_force(&s(&["abc", "bca", "cab"]), Some(&['a', 'b', 'c', 'd'])),
            2
        );
    }

    #[test]
    fn rejects_ragged_input() {
        assert!(matches!(
            extract_column_types(&s(&["ab", "abc"])),
            Err(ClosestStringError::RaggedLengths { index: 1, .. })
        ));
        assert!(matches!(
            solve_closest(&[], None, &SolverConfig::default()),
            Err(ClosestStringError::Empty)
        ));
    }
}
