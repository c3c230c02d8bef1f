//! Sorted point tables over a rectangular grid.
//!
//! A [`PointTable`] stores a finite set of lattice points, each with an
//! objective value and a two-part link into whatever tables it was built
//! from. Points are kept sorted by a packed mixed-radix key whose most
//! significant digit is axis 0, so key order is lexicographic point order.

use rustc_hash::FxHashMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("state space exceeded: a table grew past {budget} cells")]
    StateSpaceExceeded { budget: usize },
    #[error("grid volume does not fit into 128 bits")]
    GridTooLarge,
}

/// An axis-aligned box `lo..=hi`; empty when some `lo > hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    lo: Vec<i64>,
    hi: Vec<i64>,
    stride: Vec<u128>,
    volume: u128,
}

impl Grid {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self, TableError> {
        assert_eq!(lo.len(), hi.len());
        let r = lo.len();
        let mut stride = vec![1u128; r];
        let mut volume = 1u128;
        let empty = lo.iter().zip(&hi).any(|(l, h)| l > h);
        if empty {
            volume = 0;
        } else {
            for a in (0..r).rev() {
                stride[a] = volume;
                let width = (hi[a] as i128 - lo[a] as i128 + 1) as u128;
                volume = volume.checked_mul(width).ok_or(TableError::GridTooLarge)?;
            }
        }
        Ok(Self {
            lo,
            hi,
            stride,
            volume,
        })
    }

    /// The intersection of this grid with another box.
    pub fn intersect(&self, lo: &[i64], hi: &[i64]) -> Result<Self, TableError> {
        let lo = self.lo.iter().zip(lo).map(|(a, b)| *a.max(b)).collect();
        let hi = self.hi.iter().zip(hi).map(|(a, b)| *a.min(b)).collect();
        Grid::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn volume(&self) -> u128 {
        self.volume
    }

    pub fn is_empty(&self) -> bool {
        self.volume == 0
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        !self.is_empty()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Packed key of a point inside the grid.
    pub fn key(&self, p: &[i64]) -> u128 {
        debug_assert!(self.contains(p));
        p.iter()
            .zip(&self.lo)
            .zip(&self.stride)
            .map(|((v, l), s)| (*v as i128 - *l as i128) as u128 * s)
            .sum()
    }
}

/// Provenance of a cell: indices into the two tables it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Link {
    pub left: u32,
    pub right: u32,
}

impl Link {
    pub fn new(left: usize, right: usize) -> Self {
        Link {
            left: left as u32,
            right: right as u32,
        }
    }
}

/// Higher value wins; equal values fall back to the smaller link so that the
/// winner does not depend on insertion order.
#[inline]
fn better(value: i128, link: Link, than_value: i128, than_link: Link) -> bool {
    value > than_value || (value == than_value && link < than_link)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointTable {
    grid: Grid,
    keys: Vec<u128>,
    coords: Vec<i64>,
    values: Vec<i128>,
    links: Vec<Link>,
}

impl PointTable {
    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            keys: vec![],
            coords: vec![],
            values: vec![],
            links: vec![],
        }
    }

    /// The table holding only the origin with value zero.
    pub fn origin(r: usize) -> Self {
        let grid = Grid::new(vec![0; r], vec![0; r]).expect("unit grid");
        Self {
            grid,
            keys: vec![0],
            coords: vec![0; r],
            values: vec![0],
            links: vec![Link::default()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn point(&self, idx: usize) -> &[i64] {
        let r = self.dim();
        &self.coords[idx * r..(idx + 1) * r]
    }

    pub fn value(&self, idx: usize) -> i128 {
        self.values[idx]
    }

    pub fn link(&self, idx: usize) -> Link {
        self.links[idx]
    }

    pub fn points(&self) -> impl Iterator<Item = &[i64]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn find(&self, p: &[i64]) -> Option<usize> {
        if !self.grid.contains(p) {
            return None;
        }
        self.keys.binary_search(&self.grid.key(p)).ok()
    }

    pub fn max_value(&self) -> Option<i128> {
        self.values.iter().copied().max()
    }

    /// Componentwise minimum and maximum over all points, `None` if empty.
    pub fn bounds(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        if self.is_empty() {
            return None;
        }
        let r = self.dim();
        let mut lo = vec![i64::MAX; r];
        let mut hi = vec![i64::MIN; r];
        for p in self.points() {
            for a in 0..r {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some((lo, hi))
    }

    /// Index range of points whose axis-0 coordinate lies in `lo..=hi`.
    pub fn axis0_range(&self, lo: i64, hi: i64) -> std::ops::Range<usize> {
        let r = self.dim();
        if r == 0 {
            return 0..self.len();
        }
        let start = partition(self.len(), |i| self.coords[i * r] < lo);
        let end = partition(self.len(), |i| self.coords[i * r] <= hi);
        start..end.max(start)
    }

    /// The same cells with every point and value multiplied by `factor > 0`.
    /// Order and indices are preserved; links are replaced by `(idx, 0)`.
    pub fn scaled(&self, factor: i64) -> PointTable {
        assert!(factor > 0);
        let lo = self.grid.lo.iter().map(|v| v * factor).collect();
        let hi = self.grid.hi.iter().map(|v| v * factor).collect();
        let grid = Grid::new(lo, hi).expect("scaled grid");
        let coords: Vec<i64> = self.coords.iter().map(|v| v * factor).collect();
        let r = self.dim();
        let keys = (0..self.len())
            .map(|i| grid.key(&coords[i * r..(i + 1) * r]))
            .collect();
        PointTable {
            grid,
            keys,
            coords,
            values: self.values.iter().map(|v| v * factor as i128).collect(),
            links: (0..self.len()).map(|i| Link::new(i, 0)).collect(),
        }
    }
}

fn partition(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Grids at most this large use a dense index instead of a hash map.
const DENSE_LIMIT: u128 = 1 << 22;

enum Index {
    Dense(Vec<u32>),
    Sparse(FxHashMap<u128, u32>),
}

/// Accumulates cells keeping the best value per point.
pub struct TableBuilder {
    grid: Grid,
    index: Index,
    keys: Vec<u128>,
    coords: Vec<i64>,
    values: Vec<i128>,
    links: Vec<Link>,
    budget: usize,
}

impl TableBuilder {
    pub fn new(grid: Grid, budget: usize) -> Self {
        let index = if grid.volume() <= DENSE_LIMIT {
            Index::Dense(vec![u32::MAX; grid.volume() as usize])
        } else {
            Index::Sparse(FxHashMap::default())
        };
        Self {
            grid,
            index,
            keys: vec![],
            coords: vec![],
            values: vec![],
            links: vec![],
            budget,
        }
    }

    /// A builder that always hashes, for short-lived partial results.
    pub fn new_sparse(grid: Grid, budget: usize) -> Self {
        let mut b = Self::new(Grid::new(vec![], vec![]).expect("unit grid"), budget);
        b.grid = grid;
        b.index = Index::Sparse(FxHashMap::default());
        b
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Inserts a point already known to lie inside the grid.
    pub fn insert(&mut self, p: &[i64], value: i128, link: Link) -> Result<(), TableError> {
        let key = self.grid.key(p);
        let slot = match &mut self.index {
            Index::Dense(v) => {
                let s = &mut v[key as usize];
                if *s == u32::MAX {
                    None
                } else {
                    Some(*s as usize)
                }
            }
            Index::Sparse(m) => m.get(&key).map(|&s| s as usize),
        };
        match slot {
            Some(s) => {
                if better(value, link, self.values[s], self.links[s]) {
                    self.values[s] = value;
                    self.links[s] = link;
                }
            }
            None => {
                if self.keys.len() >= self.budget {
                    return Err(TableError::StateSpaceExceeded {
                        budget: self.budget,
                    });
                }
                let s = self.keys.len() as u32;
                match &mut self.index {
                    Index::Dense(v) => v[key as usize] = s,
                    Index::Sparse(m) => {
                        m.insert(key, s);
                    }
                }
                self.keys.push(key);
                self.coords.extend_from_slice(p);
                self.values.push(value);
                self.links.push(link);
            }
        }
        Ok(())
    }

    /// Inserts every cell of another builder over the same grid.
    pub fn absorb(&mut self, other: TableBuilder) -> Result<(), TableError> {
        let r = self.grid.dim();
        for i in 0..other.keys.len() {
            self.insert(
                &other.coords[i * r..(i + 1) * r],
                other.values[i],
                other.links[i],
            )?;
        }
        Ok(())
    }

    pub fn finish(self) -> PointTable {
        let r = self.grid.dim();
        let mut order: Vec<usize> = (0..self.keys.len()).collect();
        order.sort_unstable_by_key(|&i| self.keys[i]);
        let mut coords = Vec::with_capacity(self.coords.len());
        for &i in &order {
            coords.extend_from_slice(&self.coords[i * r..(i + 1) * r]);
        }
        PointTable {
            keys: order.iter().map(|&i| self.keys[i]).collect(),
            values: order.iter().map(|&i| self.values[i]).collect(),
            links: order.iter().map(|&i| self.links[i]).collect(),
            coords,
            grid: self.grid,
        }
    }
}
