//! Exact-target search for the last iteration.
//!
//! At the top iteration only one point matters: `b_up` itself. Instead of
//! building the full top-level set, the factors are split into a folded
//! prefix, one materialized middle table and a last factor that is either a
//! table lookup or a column search for the exact residual.

use crate::instance::Matrix;
use crate::table::PointTable;

/// Depth-first search for selections `x̃_g ≥ 0` over several blocks with
/// `‖x̃_g‖_1 = count_g` and `Σ_g A_g x̃_g` equal to a target, maximizing the
/// summed objective.
///
/// Columns are visited block after block. Before choosing a multiplicity the
/// feasible range is cut down per axis so that the remaining columns of the
/// current block and the remaining blocks can still close the gap.
#[derive(Debug, Clone)]
pub struct BlockSearch<'a> {
    segments: Vec<Segment<'a>>,
    r: usize,
    stop_at_first: bool,
}

#[derive(Debug, Clone)]
struct Segment<'a> {
    block: &'a Matrix,
    count: i64,
    objective: Option<&'a [i64]>,
    /// bounds over columns `j..t` of this block, per `j`
    suffix_lo: Vec<Vec<i64>>,
    suffix_hi: Vec<Vec<i64>>,
    suffix_best: Vec<i64>,
    /// summed `count · column bound` over all later blocks
    later_lo: Vec<i128>,
    later_hi: Vec<i128>,
    later_best: i128,
}

impl<'a> BlockSearch<'a> {
    /// One search over the given `(block, count, objective)` triples. The
    /// first hit is returned when no block carries an objective.
    pub fn new(parts: Vec<(&'a Matrix, i64, Option<&'a [i64]>)>) -> Self {
        assert!(!parts.is_empty());
        let r = parts[0].0.rows();
        let stop_at_first = parts.iter().all(|p| p.2.is_none());
        let mut segments: Vec<Segment<'a>> = parts
            .into_iter()
            .map(|(block, count, objective)| {
                let t = block.cols();
                let mut suffix_lo = vec![vec![i64::MAX; r]; t + 1];
                let mut suffix_hi = vec![vec![i64::MIN; r]; t + 1];
                let mut suffix_best = vec![i64::MIN; t + 1];
                for j in (0..t).rev() {
                    let col = block.column(j);
                    for a in 0..r {
                        suffix_lo[j][a] = suffix_lo[j + 1][a].min(col[a]);
                        suffix_hi[j][a] = suffix_hi[j + 1][a].max(col[a]);
                    }
                    suffix_best[j] = suffix_best[j + 1].max(objective.map_or(0, |c| c[j]));
                }
                Segment {
                    block,
                    count,
                    objective,
                    suffix_lo,
                    suffix_hi,
                    suffix_best,
                    later_lo: vec![0; r],
                    later_hi: vec![0; r],
                    later_best: 0,
                }
            })
            .collect();
        for g in (0..segments.len().saturating_sub(1)).rev() {
            let next = &segments[g + 1];
            let lo: Vec<i128> = (0..r)
                .map(|a| next.later_lo[a] + next.count as i128 * next.suffix_lo[0][a] as i128)
                .collect();
            let hi: Vec<i128> = (0..r)
                .map(|a| next.later_hi[a] + next.count as i128 * next.suffix_hi[0][a] as i128)
                .collect();
            let best = next.later_best + next.count as i128 * next.suffix_best[0] as i128;
            segments[g].later_lo = lo;
            segments[g].later_hi = hi;
            segments[g].later_best = best;
        }
        Self {
            segments,
            r,
            stop_at_first,
        }
    }

    pub fn bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let first = &self.segments[0];
        let lo = (0..self.r)
            .map(|a| {
                (first.later_lo[a] + first.count as i128 * first.suffix_lo[0][a] as i128) as i64
            })
            .collect();
        let hi = (0..self.r)
            .map(|a| {
                (first.later_hi[a] + first.count as i128 * first.suffix_hi[0][a] as i128) as i64
            })
            .collect();
        (lo, hi)
    }

    pub fn max_value(&self) -> i128 {
        let first = &self.segments[0];
        first.later_best + first.count as i128 * first.suffix_best[0] as i128
    }

    /// Best selections hitting `target` whose value exceeds `floor` (if
    /// given), one vector per block.
    pub fn find(&self, target: &[i64], floor: Option<i128>) -> Option<(Vec<Vec<i64>>, i128)> {
        let mut st = SearchState {
            x: self
                .segments
                .iter()
                .map(|s| vec![0; s.block.cols()])
                .collect(),
            best: None,
            floor,
        };
        let residual: Vec<i128> = target.iter().map(|&v| v as i128).collect();
        self.descend(0, 0, self.segments[0].count as i128, residual, 0, &mut st);
        st.best
    }

    fn done(&self, st: &SearchState) -> bool {
        self.stop_at_first && st.best.is_some()
    }

    fn descend(
        &self,
        g: usize,
        j: usize,
        rem: i128,
        residual: Vec<i128>,
        value: i128,
        st: &mut SearchState,
    ) {
        if self.done(st) {
            return;
        }
        let seg = &self.segments[g];
        let r = self.r;
        let threshold = st.best.as_ref().map(|b| b.1).or(st.floor);
        if let Some(th) = threshold {
            if value + rem * seg.suffix_best[j] as i128 + seg.later_best <= th {
                return;
            }
        }
        let col = seg.block.column(j);
        let gain = seg.objective.map_or(0, |c| c[j] as i128);
        let t = seg.block.cols();
        if j + 1 == t {
            // the last column takes whatever count is left
            let next: Vec<i128> = (0..r).map(|a| residual[a] - rem * col[a] as i128).collect();
            if (0..r).any(|a| next[a] < seg.later_lo[a] || next[a] > seg.later_hi[a]) {
                return;
            }
            st.x[g][j] = rem as i64;
            let total = value + rem * gain;
            if g + 1 == self.segments.len() {
                if threshold.is_none_or(|th| total > th) {
                    st.best = Some((st.x.clone(), total));
                }
            } else {
                let count = self.segments[g + 1].count as i128;
                self.descend(g + 1, 0, count, next, total, st);
            }
            st.x[g][j] = 0;
            return;
        }
        // Feasible range for x_j so that the rest can still close the gap.
        let (mut lo, mut hi) = (0i128, rem);
        for a in 0..r {
            let c = col[a] as i128;
            let mn = seg.suffix_lo[j + 1][a] as i128;
            let mx = seg.suffix_hi[j + 1][a] as i128;
            // residual - x c >= (rem - x) mn + later_lo
            tighten_ge(
                &mut lo,
                &mut hi,
                mn - c,
                rem * mn + seg.later_lo[a] - residual[a],
            );
            // residual - x c <= (rem - x) mx + later_hi
            tighten_le(
                &mut lo,
                &mut hi,
                mx - c,
                rem * mx + seg.later_hi[a] - residual[a],
            );
            if lo > hi {
                return;
            }
        }
        // Prefer large multiplicities on columns at least as profitable as
        // the rest of the block, small ones otherwise.
        let ascending = gain < seg.suffix_best[j + 1] as i128;
        let step = |x: i128, st: &mut SearchState| {
            let next: Vec<i128> = (0..r).map(|a| residual[a] - x * col[a] as i128).collect();
            st.x[g][j] = x as i64;
            self.descend(g, j + 1, rem - x, next, value + x * gain, st);
            st.x[g][j] = 0;
        };
        if ascending {
            for x in lo..=hi {
                step(x, st);
                if self.done(st) {
                    return;
                }
            }
        } else {
            for x in (lo..=hi).rev() {
                step(x, st);
                if self.done(st) {
                    return;
                }
            }
        }
    }
}

struct SearchState {
    x: Vec<Vec<i64>>,
    best: Option<(Vec<Vec<i64>>, i128)>,
    floor: Option<i128>,
}

/// Restricts `lo..=hi` to the solutions of `alpha·x >= beta`.
fn tighten_ge(lo: &mut i128, hi: &mut i128, alpha: i128, beta: i128) {
    match alpha.cmp(&0) {
        std::cmp::Ordering::Greater => *lo = (*lo).max(div_ceil(beta, alpha)),
        std::cmp::Ordering::Less => *hi = (*hi).min(div_floor(beta, alpha)),
        std::cmp::Ordering::Equal => {
            if beta > 0 {
                *lo = *hi + 1;
            }
        }
    }
}

/// Restricts `lo..=hi` to the solutions of `alpha·x <= beta`.
fn tighten_le(lo: &mut i128, hi: &mut i128, alpha: i128, beta: i128) {
    tighten_ge(lo, hi, -alpha, -beta);
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

/// The last factor of a target join.
pub enum LastFactor<'a> {
    Table(&'a PointTable),
    Search(BlockSearch<'a>),
}

impl LastFactor<'_> {
    fn bounds(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        match self {
            LastFactor::Table(t) => t.bounds(),
            LastFactor::Search(s) => Some(s.bounds()),
        }
    }

    fn max_value(&self) -> i128 {
        match self {
            LastFactor::Table(t) => t.max_value().unwrap_or(0),
            LastFactor::Search(s) => s.max_value(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LastHit {
    Cell(usize),
    /// One selection per searched block.
    Selection(Vec<Vec<i64>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinHit {
    pub prefix: usize,
    pub mid: usize,
    pub last: LastHit,
    pub value: i128,
}

fn value_order(t: &PointTable) -> Vec<usize> {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(t.value(i)), i));
    order
}

/// Finds `p + q + l = target` with `p` from `prefix`, `q` from `mid` and `l`
/// from the last factor, maximizing the summed value. With `first_only` the
/// first hit in the deterministic search order is returned.
pub fn target_join(
    prefix: &PointTable,
    mid: &PointTable,
    last: &LastFactor<'_>,
    target: &[i64],
    first_only: bool,
) -> Option<JoinHit> {
    let r = target.len();
    let (last_lo, last_hi) = last.bounds()?;
    let max_mid = mid.max_value()?;
    let max_last = last.max_value();
    let order_p = value_order(prefix);
    let order_q = value_order(mid);
    let mut best: Option<JoinHit> = None;
    let mut rem = vec![0i64; r];
    for &pi in &order_p {
        let vp = prefix.value(pi);
        if let Some(b) = &best {
            if vp + max_mid + max_last <= b.value {
                break;
            }
        }
        let p = prefix.point(pi);
        for &qi in &order_q {
            let vq = mid.value(qi);
            if let Some(b) = &best {
                if vp + vq + max_last <= b.value {
                    break;
                }
            }
            let q = mid.point(qi);
            let mut inside = true;
            for a in 0..r {
                rem[a] = target[a] - p[a] - q[a];
                if rem[a] < last_lo[a] || rem[a] > last_hi[a] {
                    inside = false;
                    break;
                }
            }
            if !inside {
                continue;
            }
            let floor = best.as_ref().map(|b| b.value - vp - vq);
            let hit = match last {
                LastFactor::Table(t) => t
                    .find(&rem)
                    .filter(|&li| floor.is_none_or(|f| t.value(li) > f))
                    .map(|li| (LastHit::Cell(li), t.value(li))),
                LastFactor::Search(s) => {
                    s.find(&rem, floor).map(|(x, v)| (LastHit::Selection(x), v))
                }
            };
            if let Some((last_hit, vl)) = hit {
                best = Some(JoinHit {
                    prefix: pi,
                    mid: qi,
                    last: last_hit,
                    value: vp + vq + vl,
                });
                if first_only {
                    return best;
                }
            }
        }
    }
    best
}
