//! Block base tables, convolution and the small-subproblem point sets.
//!
//! All engine tables live on non-negative block matrices. A base table for
//! block `k` and count `m` holds every point `A_k x̃` with `‖x̃‖_1 = m`,
//! together with the best objective value and one maximizing `x̃`. Combined
//! tables store, per point, the pair of source cells it was built from.

use crate::instance::{Matrix, ValidatedInstance};
use crate::plan::{IterationPlan, Mode};
use crate::table::{Grid, Link, PointTable, TableBuilder, TableError};

/// Whether the engine may fan work out over the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    /// Falls back to sequential execution when built without the
    /// `parallel` feature.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub parallelism: Parallelism,
    /// Largest number of cells any single table may hold.
    pub cell_budget: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            parallelism: Parallelism::default(),
            cell_budget: 20_000_000,
        }
    }
}

impl EngineConfig {
    pub fn sequential() -> Self {
        Self {
            parallelism: Parallelism::Sequential,
            ..Self::default()
        }
    }

    fn parallel(&self) -> bool {
        cfg!(feature = "parallel") && self.parallelism == Parallelism::Parallel
    }
}

/// Per-axis minimum and maximum over the columns of a block.
pub fn column_bounds(block: &Matrix) -> (Vec<i64>, Vec<i64>) {
    let r = block.rows();
    let mut lo = vec![i64::MAX; r];
    let mut hi = vec![i64::MIN; r];
    for col in block.columns() {
        for a in 0..r {
            lo[a] = lo[a].min(col[a]);
            hi[a] = hi[a].max(col[a]);
        }
    }
    (lo, hi)
}

pub(crate) fn scale_vec(v: &[i64], f: i64) -> Vec<i64> {
    v.iter().map(|x| x * f).collect()
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub(crate) fn binomial_saturating(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of distinct `x̃ ≥ 0` with `‖x̃‖_1 = count` over `width` columns.
pub fn selection_count(count: i64, width: usize) -> u128 {
    if width == 0 {
        return u128::from(count == 0);
    }
    binomial_saturating(count as u64 + width as u64 - 1, width as u64 - 1)
}

/// A base table plus one witness `x̃` per cell.
#[derive(Debug, Clone)]
pub struct BlockTable {
    pub block: usize,
    pub count: i64,
    pub table: PointTable,
    width: usize,
    witnesses: Vec<i64>,
}

impl BlockTable {
    pub fn witness(&self, idx: usize) -> &[i64] {
        &self.witnesses[idx * self.width..(idx + 1) * self.width]
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Runs `body` over chunks of `0..len`, each chunk filling its own sparse
/// builder, then merges the builders into one table over `grid`.
fn chunked_build<F>(
    len: usize,
    grid: &Grid,
    cfg: &EngineConfig,
    body: F,
) -> Result<PointTable, TableError>
where
    F: Fn(std::ops::Range<usize>, &mut TableBuilder) -> Result<(), TableError> + Sync,
{
    #[cfg(feature = "parallel")]
    if cfg.parallel() && len >= 256 && rayon::current_num_threads() > 1 {
        use rayon::prelude::*;
        let chunks = rayon::current_num_threads() * 4;
        let step = len.div_ceil(chunks);
        let parts: Vec<Result<TableBuilder, TableError>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let range = (c * step).min(len)..((c + 1) * step).min(len);
                let mut b = TableBuilder::new_sparse(grid.clone(), cfg.cell_budget);
                body(range, &mut b)?;
                Ok(b)
            })
            .collect();
        let mut out = TableBuilder::new(grid.clone(), cfg.cell_budget);
        for part in parts {
            out.absorb(part?)?;
        }
        return Ok(out.finish());
    }
    let mut out = TableBuilder::new(grid.clone(), cfg.cell_budget);
    body(0..len, &mut out)?;
    Ok(out.finish())
}

/// All points `A x̃` with `‖x̃‖_1 = count` that lie in `window`, with the best
/// value of `objectiveᵀ x̃` per point (all zero without an objective).
///
/// Built layer by layer over the number of chosen columns; a partial point is
/// dropped as soon as the remaining columns can no longer bring it into the
/// window.
pub fn block_base_table(
    block: &Matrix,
    index: usize,
    count: i64,
    objective: Option<&[i64]>,
    window: &Grid,
    cfg: &EngineConfig,
) -> Result<BlockTable, TableError> {
    assert!(count >= 0);
    let r = block.rows();
    let t = block.cols();
    let (cmin, cmax) = column_bounds(block);
    let layer_grid = |c: i64| -> Result<Grid, TableError> {
        let rest = count - c;
        let lo: Vec<i64> = (0..r)
            .map(|a| (c * cmin[a]).max(window.lo()[a] - rest * cmax[a]))
            .collect();
        let hi: Vec<i64> = (0..r)
            .map(|a| (c * cmax[a]).min(window.hi()[a] - rest * cmin[a]))
            .collect();
        Grid::new(lo, hi)
    };

    let mut layers: Vec<PointTable> = Vec::with_capacity(count as usize + 1);
    let g0 = layer_grid(0)?;
    if window.is_empty() || !g0.contains(&vec![0; r]) {
        return Ok(BlockTable {
            block: index,
            count,
            table: PointTable::empty(layer_grid(count)?),
            width: t,
            witnesses: vec![],
        });
    }
    let mut origin = TableBuilder::new(g0, 1);
    origin.insert(&vec![0; r], 0, Link::default())?;
    layers.push(origin.finish());

    for c in 1..=count {
        let grid = layer_grid(c)?;
        let prev = layers.last().unwrap();
        let next = chunked_build(prev.len(), &grid, cfg, |range, out| {
            let mut q = vec![0i64; r];
            for i in range {
                let p = prev.point(i);
                let v = prev.value(i);
                for j in 0..t {
                    let col = block.column(j);
                    for a in 0..r {
                        q[a] = p[a] + col[a];
                    }
                    if grid.contains(&q) {
                        let gain = objective.map_or(0, |c| c[j] as i128);
                        out.insert(&q, v + gain, Link::new(i, j))?;
                    }
                }
            }
            Ok(())
        })?;
        let empty = next.is_empty();
        layers.push(next);
        if empty {
            break;
        }
    }

    let table = if layers.len() == count as usize + 1 {
        layers.pop().unwrap()
    } else {
        PointTable::empty(layer_grid(count)?)
    };
    let mut witnesses = vec![0i64; table.len() * t];
    for cell in 0..table.len() {
        let xt = &mut witnesses[cell * t..(cell + 1) * t];
        let mut link = table.link(cell);
        for c in (1..=count as usize).rev() {
            xt[link.right as usize] += 1;
            if c > 1 {
                link = layers[c - 1].link(link.left as usize);
            }
        }
    }
    Ok(BlockTable {
        block: index,
        count,
        table,
        width: t,
        witnesses,
    })
}

/// Every `scale·p + q` (with `p` from `left`, `q` from `right`) inside
/// `window`, valued `scale·value(p) + value(q)` and linked to `(p, q)`.
pub fn combine(
    left: &PointTable,
    scale: i64,
    right: &PointTable,
    window: &Grid,
    cfg: &EngineConfig,
) -> Result<PointTable, TableError> {
    let r = window.dim();
    if left.is_empty() || right.is_empty() || window.is_empty() {
        return Ok(PointTable::empty(window.clone()));
    }
    chunked_build(left.len(), window, cfg, |range, out| {
        let mut q = vec![0i64; r];
        for i in range {
            let p = left.point(i);
            let vp = left.value(i) * scale as i128;
            let js = if r == 0 {
                0..right.len()
            } else {
                right.axis0_range(window.lo()[0] - scale * p[0], window.hi()[0] - scale * p[0])
            };
            for j in js {
                let pr = right.point(j);
                for a in 0..r {
                    q[a] = scale * p[a] + pr[a];
                }
                if window.contains(&q) {
                    out.insert(&q, vp + right.value(j), Link::new(i, j))?;
                }
            }
        }
        Ok(())
    })
}

/// Minkowski sum of two tables clipped to `[0, cap]^r`, max-plus on values.
pub fn convolve(
    a: &PointTable,
    b: &PointTable,
    cap: i64,
    cfg: &EngineConfig,
) -> Result<PointTable, TableError> {
    let r = a.dim();
    let window = Grid::new(vec![0; r], vec![cap; r])?;
    combine(a, 1, b, &window, cfg)
}

/// A left fold of several tables. Stage `0` is the origin and stage `j + 1`
/// adds factor `j`; cells link to `(stage j cell, factor j cell)`.
#[derive(Debug, Clone)]
pub struct Fold {
    stages: Vec<PointTable>,
}

impl Fold {
    pub fn result(&self) -> &PointTable {
        self.stages.last().unwrap()
    }

    pub fn factor_count(&self) -> usize {
        self.stages.len() - 1
    }

    /// Factor cell indices making up result cell `idx`, in factor order.
    pub fn expand(&self, mut idx: usize) -> Vec<usize> {
        let n = self.factor_count();
        let mut out = vec![0; n];
        for j in (0..n).rev() {
            let link = self.stages[j + 1].link(idx);
            out[j] = link.right as usize;
            idx = link.left as usize;
        }
        out
    }
}

/// Folds `factors` into their Minkowski sum restricted to `window`.
/// Intermediate stages keep only points from which the remaining factors can
/// still reach the window.
pub fn fold(
    factors: &[&PointTable],
    window: &Grid,
    cfg: &EngineConfig,
) -> Result<Fold, TableError> {
    let r = window.dim();
    let mut bounds = Vec::with_capacity(factors.len());
    for f in factors {
        match f.bounds() {
            Some(b) => bounds.push(b),
            None => {
                return Ok(Fold {
                    stages: vec![PointTable::origin(r), PointTable::empty(window.clone())],
                })
            }
        }
    }
    // suffix sums of lower and upper bounds of the factors not yet folded
    let mut rest_lo = vec![vec![0i64; r]; factors.len() + 1];
    let mut rest_hi = vec![vec![0i64; r]; factors.len() + 1];
    for j in (0..factors.len()).rev() {
        for a in 0..r {
            rest_lo[j][a] = rest_lo[j + 1][a] + bounds[j].0[a];
            rest_hi[j][a] = rest_hi[j + 1][a] + bounds[j].1[a];
        }
    }
    let mut stages = vec![PointTable::origin(r)];
    if factors.is_empty() {
        if !window.contains(&vec![0; r]) {
            stages[0] = PointTable::empty(window.clone());
        }
        return Ok(Fold { stages });
    }
    let mut done_lo = vec![0i64; r];
    let mut done_hi = vec![0i64; r];
    for (j, f) in factors.iter().enumerate() {
        for a in 0..r {
            done_lo[a] += bounds[j].0[a];
            done_hi[a] += bounds[j].1[a];
        }
        let lo: Vec<i64> = (0..r)
            .map(|a| done_lo[a].max(window.lo()[a] - rest_hi[j + 1][a]))
            .collect();
        let hi: Vec<i64> = (0..r)
            .map(|a| done_hi[a].min(window.hi()[a] - rest_lo[j + 1][a]))
            .collect();
        let grid = Grid::new(lo, hi)?;
        let next = combine(stages.last().unwrap(), 1, f, &grid, cfg)?;
        stages.push(next);
    }
    Ok(Fold { stages })
}

/// The small-subproblem set for one iteration: the block tables that were
/// folded (blocks with zero count are skipped) and the fold itself.
#[derive(Debug, Clone)]
pub struct SmallSet {
    tables: Vec<BlockTable>,
    fold: Fold,
    n: usize,
}

impl SmallSet {
    pub fn table(&self) -> &PointTable {
        self.fold.result()
    }

    pub fn block_tables(&self) -> &[BlockTable] {
        &self.tables
    }

    /// Cells summed over the base tables that were built.
    pub fn base_cells(&self) -> usize {
        self.tables.iter().map(|b| b.table.len()).sum()
    }

    /// Per-block witnesses `x̃_k` of a cell; `None` for blocks with count zero.
    pub fn witness(&self, idx: usize) -> Vec<Option<&[i64]>> {
        let mut out = vec![None; self.n];
        for (bt, cell) in self.tables.iter().zip(self.fold.expand(idx)) {
            out[bt.block] = Some(bt.witness(cell));
        }
        out
    }
}

/// Builds the set of points `Σ_k A_k x̃_k` with `‖x̃_k‖_1 = counts[k]` inside
/// `window`. Each base table is first restricted to the part that can still
/// be completed into the window by the other blocks.
pub fn small_set(
    inst: &ValidatedInstance,
    counts: &[i64],
    objective: bool,
    window: &Grid,
    cfg: &EngineConfig,
) -> Result<SmallSet, TableError> {
    let r = inst.r();
    let n = inst.n();
    let active: Vec<usize> = (0..n).filter(|&k| counts[k] > 0).collect();
    let natural: Vec<(Vec<i64>, Vec<i64>)> = active
        .iter()
        .map(|&k| {
            let (lo, hi) = column_bounds(inst.block(k));
            (scale_vec(&lo, counts[k]), scale_vec(&hi, counts[k]))
        })
        .collect();
    let mut sum_lo = vec![0i64; r];
    let mut sum_hi = vec![0i64; r];
    for (lo, hi) in &natural {
        for a in 0..r {
            sum_lo[a] += lo[a];
            sum_hi[a] += hi[a];
        }
    }
    let windows: Vec<Grid> = natural
        .iter()
        .map(|(lo, hi)| {
            let wlo: Vec<i64> = (0..r)
                .map(|a| lo[a].max(window.lo()[a] - (sum_hi[a] - hi[a])))
                .collect();
            let whi: Vec<i64> = (0..r)
                .map(|a| hi[a].min(window.hi()[a] - (sum_lo[a] - lo[a])))
                .collect();
            Grid::new(wlo, whi)
        })
        .collect::<Result<_, _>>()?;

    let build = |pos: usize| {
        let k = active[pos];
        let obj = if objective {
            inst.block_objective(k)
        } else {
            None
        };
        block_base_table(inst.block(k), k, counts[k], obj, &windows[pos], cfg)
    };
    let mut tables: Vec<BlockTable> = build_all(active.len(), cfg, build)?;
    // Small tables first keeps the intermediate stages small.
    tables.sort_by_key(|bt| (bt.table.len(), bt.block));
    let refs: Vec<&PointTable> = tables.iter().map(|bt| &bt.table).collect();
    let fold = fold(&refs, window, cfg)?;
    Ok(SmallSet { tables, fold, n })
}

fn build_all<T: Send, F>(len: usize, cfg: &EngineConfig, f: F) -> Result<Vec<T>, TableError>
where
    F: Fn(usize) -> Result<T, TableError> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if cfg.parallel() && len > 1 && rayon::current_num_threads() > 1 {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = cfg;
    (0..len).map(f).collect()
}

/// `Ñ^(i)` on the full box `[0, D]^r`: every point reachable by the small
/// subproblem of iteration `i` (1-based). Blocks must be non-negative.
pub fn small_subproblem_set(
    inst: &ValidatedInstance,
    plan: &IterationPlan,
    i: usize,
    mode: Mode,
    cfg: &EngineConfig,
) -> Result<SmallSet, TableError> {
    let r = inst.r();
    let window = Grid::new(vec![0; r], vec![plan.box_radius; r])?;
    small_set(
        inst,
        &plan.tilm_at(i),
        mode == Mode::Optimization,
        &window,
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::NFoldInstance;

    fn row(v: &[i64]) -> Matrix {
        Matrix::from_rows(&[v.to_vec()], v.len()).unwrap()
    }

    fn open_window(r: usize, cap: i64) -> Grid {
        Grid::new(vec![0; r], vec![cap; r]).unwrap()
    }

    fn table_from(points: &[(i64, i128)]) -> PointTable {
        let mut b = TableBuilder::new(open_window(1, 100), 100);
        for &(p, v) in points {
            b.insert(&[p], v, Link::default()).unwrap();
        }
        b.finish()
    }

    fn pts(t: &PointTable) -> Vec<(i64, i128)> {
        (0..t.len()).map(|i| (t.point(i)[0], t.value(i))).collect()
    }

    #[test]
    fn base_table_enumerates_selections() {
        let cfg = EngineConfig::default();
        let bt = block_base_table(&row(&[1, 2]), 0, 2, None, &open_window(1, 10), &cfg).unwrap();
        assert_eq!(pts(&bt.table), vec![(2, 0), (3, 0), (4, 0)]);
        assert_eq!(bt.witness(1), &[1, 1]);
    }

    #[test]
    fn base_table_zero_count() {
        let cfg = EngineConfig::default();
        let bt = block_base_table(&row(&[1, 2]), 0, 0, None, &open_window(1, 10), &cfg).unwrap();
        assert_eq!(pts(&bt.table), vec![(0, 0)]);
        assert_eq!(bt.witness(0), &[0, 0]);
    }

    #[test]
    fn base_table_optimization_values() {
        let cfg = EngineConfig::default();
        let c = [0, 1];
        let bt =
            block_base_table(&row(&[1, 2]), 0, 2, Some(&c), &open_window(1, 10), &cfg).unwrap();
        assert_eq!(pts(&bt.table), vec![(2, 0), (3, 1), (4, 2)]);
        assert_eq!(bt.witness(2), &[0, 2]);
    }

    #[test]
    fn convolve_examples() {
        let cfg = EngineConfig::default();
        let a = table_from(&[(0, 0), (1, 0)]);
        let b = table_from(&[(2, 0)]);
        assert_eq!(
            pts(&convolve(&a, &b, 10, &cfg).unwrap()),
            vec![(2, 0), (3, 0)]
        );
        let zero = table_from(&[(0, 0)]);
        assert_eq!(pts(&convolve(&a, &zero, 10, &cfg).unwrap()), pts(&a));
        let a = table_from(&[(0, 0), (1, 5)]);
        let b = table_from(&[(2, 1)]);
        assert_eq!(
            pts(&convolve(&a, &b, 10, &cfg).unwrap()),
            vec![(2, 1), (3, 6)]
        );
    }

    #[test]
    fn convolve_clips_to_cap() {
        let cfg = EngineConfig::default();
        let a = table_from(&[(3, 0), (6, 0)]);
        assert_eq!(
            pts(&convolve(&a, &a, 9, &cfg).unwrap()),
            vec![(6, 0), (9, 0)]
        );
    }

    #[test]
    fn small_subproblem_example() {
        let inst = NFoldInstance::new(vec![row(&[1, 2]), row(&[0, 1])], vec![4], vec![2, 1])
            .validate()
            .unwrap();
        let cfg = EngineConfig::default();
        let s = small_set(&inst, &[2, 1], false, &open_window(1, 24), &cfg).unwrap();
        assert_eq!(
            s.table().points().map(|p| p[0]).collect::<Vec<_>>(),
            vec![2, 3, 4, 5]
        );
        for idx in 0..s.table().len() {
            let w = s.witness(idx);
            let total: i64 = (0..2)
                .map(|k| {
                    let xt = w[k].unwrap();
                    (0..2).map(|j| inst.block(k).get(0, j) * xt[j]).sum::<i64>()
                })
                .sum();
            assert_eq!(total, s.table().point(idx)[0]);
        }
        let zero = small_set(&inst, &[0, 0], false, &open_window(1, 24), &cfg).unwrap();
        assert_eq!(zero.table().points().collect::<Vec<_>>(), vec![&[0][..]]);
        assert_eq!(zero.witness(0), vec![None, None]);
    }

    #[test]
    fn fold_of_nothing_is_origin() {
        let f = fold(&[], &open_window(2, 3), &EngineConfig::default()).unwrap();
        assert_eq!(f.result().len(), 1);
        assert!(f.expand(0).is_empty());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let block = Matrix::from_rows(&[vec![0, 1, 2, 3], vec![3, 1, 0, 2]], 4).unwrap();
        let w = open_window(2, 60);
        let a = block_base_table(
            &block,
            0,
            9,
            Some(&[1, 0, 2, 1]),
            &w,
            &EngineConfig::sequential(),
        )
        .unwrap();
        let b = block_base_table(
            &block,
            0,
            9,
            Some(&[1, 0, 2, 1]),
            &w,
            &EngineConfig::default(),
        )
        .unwrap();
        assert_eq!(a.table, b.table);
        let c1 = combine(&a.table, 2, &b.table, &w, &EngineConfig::sequential()).unwrap();
        let c2 = combine(&a.table, 2, &b.table, &w, &EngineConfig::default()).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn binomials() {
        assert_eq!(selection_count(2, 2), 3);
        assert_eq!(selection_count(56, 9), 4_426_165_368);
        assert_eq!(selection_count(0, 5), 1);
        assert_eq!(binomial_saturating(1000, 500), u128::MAX);
    }
}
