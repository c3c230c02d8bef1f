//! Minimum imbalance vertex orderings, parameterized by vertex cover.
//!
//! For a fixed order `c_1 < … < c_k` of a vertex cover `C`, the remaining
//! (independent) vertices only differ by their neighborhood `S ⊆ C`; the ILP
//! decides how many vertices of each type go into each of the `k + 1` slots
//! between consecutive cover vertices. `y_i` bounds the imbalance of `c_i`
//! from above, and a vertex of type `S` in slot `j` has imbalance `z_S^j`.
//! The solver loops over all `k!` cover orders.

use std::collections::BTreeMap;

use log::debug;
use nfold::{InstanceError, Matrix, Mode, NFoldInstance, SolveError, SolverConfig, Status};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImbalanceError {
    #[error("edge {edge:?} has an endpoint outside 0..{n}")]
    VertexOutOfRange { edge: [usize; 2], n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("edge {0:?} appears twice")]
    DuplicateEdge([usize; 2]),
    #[error("no vertex cover of size at most {k_max}; raise the limit to run {k_max}!+ orderings")]
    CoverTooLarge { k_max: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("decoded ordering disagrees with the ILP: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphInstance {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl GraphInstance {
    pub fn new(n: usize, edges: Vec<[usize; 2]>) -> Self {
        Self { n, edges }
    }

    pub fn validate(&self) -> Result<(), ImbalanceError> {
        let mut seen = std::collections::BTreeSet::new();
        for &[u, v] in &self.edges {
            if u >= self.n || v >= self.n {
                return Err(ImbalanceError::VertexOutOfRange {
                    edge: [u, v],
                    n: self.n,
                });
            }
            if u == v {
                return Err(ImbalanceError::SelfLoop(u));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(ImbalanceError::DuplicateEdge([u, v]));
            }
        }
        Ok(())
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &[u, v] in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// `ι(π) = Σ_v |L(v) − R(v)|` for an ordering given as a vertex sequence.
pub fn imbalance_of(graph: &GraphInstance, ordering: &[usize]) -> i64 {
    let mut pos = vec![0usize; graph.n];
    for (i, &v) in ordering.iter().enumerate() {
        pos[v] = i;
    }
    let mut balance = vec![0i64; graph.n];
    for &[u, v] in &graph.edges {
        // the later endpoint sees the earlier one on its left
        let (a, b) = if pos[u] < pos[v] { (u, v) } else { (v, u) };
        balance[a] -= 1;
        balance[b] += 1;
    }
    balance.iter().map(|b| b.abs()).sum()
}

/// A smallest vertex cover of size at most `k_max`, by branching on the
/// endpoints of an uncovered edge. Returned sorted.
pub fn vertex_cover(graph: &GraphInstance, k_max: usize) -> Option<Vec<usize>> {
    fn branch(edges: &[[usize; 2]], chosen: &mut Vec<usize>, budget: usize) -> bool {
        let open = edges
            .iter()
            .find(|[u, v]| !chosen.contains(u) && !chosen.contains(v));
        let Some(&[u, v]) = open else {
            return true;
        };
        if budget == 0 {
            return false;
        }
        for w in [u, v] {
            chosen.push(w);
            if branch(edges, chosen, budget - 1) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    (0..=k_max).find_map(|k| {
        let mut chosen = Vec::new();
        branch(&graph.edges, &mut chosen, k).then(|| {
            chosen.sort_unstable();
            chosen
        })
    })
}

/// Independent vertices sharing one neighborhood inside the cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexType {
    /// Membership per cover position.
    pub set: Vec<bool>,
    pub vertices: Vec<usize>,
    /// `z_S^j` per slot `j = 0..=k`.
    pub z: Vec<i64>,
}

/// The ILP for one cover order, with everything needed to decode it.
#[derive(Debug, Clone)]
pub struct OrderingIlp {
    pub cover: Vec<usize>,
    pub types: Vec<VertexType>,
    /// `e_i` per cover position.
    pub e: Vec<i64>,
    pub instance: NFoldInstance,
    /// Native minimum = `offset − (maximized objective)`.
    pub offset: i64,
}

/// Builds the ILP for the cover order `cover` (`cover[i]` is `c_{i+1}`).
///
/// Rows `i` and `k + i` bound the imbalance of `c_{i+1}` from both sides.
/// Blocks: one per vertex type (a column per slot), the `y` block with its
/// extra zero column carrying the unused part of the `k(n−1)` budget, and
/// the slack block `(I_2k 0)`. Costs are turned into non-negative gains by
/// subtracting each from its block's maximum.
pub fn build_ordering_ilp(graph: &GraphInstance, cover: &[usize]) -> OrderingIlp {
    let k = cover.len();
    let rows = 2 * k;
    let n = graph.n as i64;
    let adj = graph.neighbors();
    let mut position = vec![None; graph.n];
    for (i, &c) in cover.iter().enumerate() {
        position[c] = Some(i);
    }
    let e: Vec<i64> = (0..k)
        .map(|i| {
            adj[cover[i]]
                .iter()
                .filter_map(|&w| position[w])
                .map(|q| if q < i { 1 } else { -1 })
                .sum()
        })
        .collect();
    let mut by_set: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for v in (0..graph.n).filter(|&v| position[v].is_none()) {
        let mut set = vec![false; k];
        for &w in &adj[v] {
            if let Some(q) = position[w] {
                set[q] = true;
            }
        }
        by_set.entry(set).or_default().push(v);
    }
    let types: Vec<VertexType> = by_set
        .into_iter()
        .map(|(set, vertices)| {
            let size = set.iter().filter(|&&b| b).count() as i64;
            let z = (0..=k)
                .map(|j| {
                    let left = set[..j].iter().filter(|&&b| b).count() as i64;
                    (2 * left - size).abs()
                })
                .collect();
            VertexType { set, vertices, z }
        })
        .collect();

    let mut blocks = Vec::with_capacity(types.len() + 2);
    let mut b_low = Vec::with_capacity(types.len() + 2);
    let mut c = Vec::new();
    let mut offset = 0i64;
    for ty in &types {
        let cols: Vec<Vec<i64>> = (0..=k)
            .map(|j| {
                let mut col = vec![0i64; rows];
                for q in (0..k).filter(|&q| ty.set[q]) {
                    let sign = if j <= q { 1 } else { -1 };
                    col[q] = sign;
                    col[k + q] = -sign;
                }
                col
            })
            .collect();
        blocks.push(Matrix::from_columns(rows, &cols));
        b_low.push(ty.vertices.len() as i64);
        let top = ty.z.iter().copied().max().unwrap_or(0);
        c.extend(ty.z.iter().map(|z| top - z));
        offset += top * ty.vertices.len() as i64;
    }
    let y_budget = k as i64 * (n - 1).max(0);
    let y_cols: Vec<Vec<i64>> = (0..=k)
        .map(|q| {
            let mut col = vec![0i64; rows];
            if q < k {
                col[q] = -1;
                col[k + q] = -1;
            }
            col
        })
        .collect();
    blocks.push(Matrix::from_columns(rows, &y_cols));
    b_low.push(y_budget);
    c.extend((0..=k).map(|q| i64::from(q == k)));
    offset += y_budget;
    let mut slack: Vec<Vec<i64>> = (0..rows)
        .map(|a| (0..rows).map(|b| i64::from(a == b)).collect())
        .collect();
    slack.push(vec![0; rows]);
    blocks.push(Matrix::from_columns(rows, &slack));
    b_low.push(2 * y_budget);
    c.extend(std::iter::repeat_n(0, rows + 1));

    let b_up: Vec<i64> = e.iter().map(|&v| -v).chain(e.iter().copied()).collect();
    OrderingIlp {
        cover: cover.to_vec(),
        types,
        e,
        instance: NFoldInstance::new(blocks, b_up, b_low).with_objective(c),
        offset,
    }
}

impl OrderingIlp {
    /// Vertex ordering encoded by a solution: slot 0, `c_1`, slot 1, …
    pub fn decode(&self, x: &[i64]) -> Vec<usize> {
        let k = self.cover.len();
        let mut slots: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
        let mut offset = 0;
        for ty in &self.types {
            let brick = &x[offset..offset + k + 1];
            offset += k + 1;
            let mut vs = ty.vertices.iter();
            for (j, &mult) in brick.iter().enumerate() {
                slots[j].extend(vs.by_ref().take(mult as usize));
            }
        }
        let mut ordering = Vec::new();
        for (j, slot) in slots.iter_mut().enumerate() {
            slot.sort_unstable();
            ordering.extend_from_slice(slot);
            if j < k {
                ordering.push(self.cover[j]);
            }
        }
        ordering
    }
}

#[derive(Debug, Clone)]
pub struct ImbalanceConfig {
    /// Largest vertex cover accepted (the solver runs `k!` ILPs).
    pub k_max: usize,
    pub solver: SolverConfig,
}

impl Default for ImbalanceConfig {
    fn default() -> Self {
        Self {
            k_max: 6,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImbalanceResult {
    pub ordering: Vec<usize>,
    pub imbalance: i64,
}

/// Rearranges `v` into the next permutation in lexicographic order; false
/// once the last one is reached.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len())
        .rev()
        .find(|&j| v[j] > v[i - 1])
        .expect("v[i] qualifies");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

pub fn solve_imbalance(
    graph: &GraphInstance,
    cfg: &ImbalanceConfig,
) -> Result<ImbalanceResult, ImbalanceError> {
    graph.validate()?;
    let mut cover =
        vertex_cover(graph, cfg.k_max).ok_or(ImbalanceError::CoverTooLarge { k_max: cfg.k_max })?;
    let mut best: Option<ImbalanceResult> = None;
    loop {
        let ilp = build_ordering_ilp(graph, &cover);
        let inst = ilp.instance.clone().validate()?;
        let (out, _) = nfold::solve_validated(&inst, Mode::Optimization, &cfg.solver)?;
        if out.status == Status::Infeasible {
            return Err(ImbalanceError::Decode(format!(
                "cover order {cover:?} gave an infeasible ILP"
            )));
        }
        let sol = out.solution.expect("optimal outcome carries a solution");
        let cost = ilp.offset - sol.objective.unwrap_or(0);
        debug!("cover order {cover:?}: imbalance {cost}");
        if best.as_ref().is_none_or(|b| cost < b.imbalance) {
            let ordering = ilp.decode(&sol.x);
            let actual = imbalance_of(graph, &ordering);
            if actual != cost {
                return Err(ImbalanceError::Decode(format!(
                    "ordering {ordering:?} has imbalance {actual}, ILP reported {cost}"
                )));
            }
            best = Some(ImbalanceResult {
                ordering,
                imbalance: cost,
            });
        }
        if !next_permutation(&mut cover) {
            break;
        }
    }
    Ok(best.expect("at least one cover order"))
}

/// Minimum over all `n!` orderings.
pub fn brute_force(graph: &GraphInstance) -> i64 {
    let mut order: Vec<usize> = (0..graph.n).collect();
    let mut best = imbalance_of(graph, &order);
    while next_permutation(&mut order) {
        best = best.min(imbalance_of(graph, &order));
    }
    best
}

/// A random graph on `1..=n_max` vertices whose minimum vertex cover has at
/// most `vc_max` vertices.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, n_max: usize, vc_max: usize) -> GraphInstance {
    loop {
        let n = rng.gen_range(1..=n_max);
        let density: f64 = rng.gen_range(0.1..0.7);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(density) {
                    edges.push([u, v]);
                }
            }
        }
        let g = GraphInstance::new(n, edges);
        if vertex_cover(&g, vc_max).is_some() {
            return g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> GraphInstance {
        GraphInstance::new(3, vec![[0, 1], [1, 2]])
    }

    #[test]
    fn covers() {
        assert_eq!(vertex_cover(&p3(), 3), Some(vec![1]));
        let triangle = GraphInstance::new(3, vec![[0, 1], [1, 2], [0, 2]]);
        assert_eq!(vertex_cover(&triangle, 3).map(|c| c.len()), Some(2));
        assert_eq!(vertex_cover(&triangle, 1), None);
        assert_eq!(
            vertex_cover(&GraphInstance::new(4, vec![]), 0),
            Some(vec![])
        );
    }

    #[test]
    fn path_ilp_constants() {
        let ilp = build_ordering_ilp(&p3(), &[1]);
        assert_eq!(ilp.types.len(), 1);
        assert_eq!(ilp.types[0].vertices, vec![0, 2]);
        assert_eq!(ilp.types[0].z, vec![1, 1]);
        assert_eq!(ilp.e, vec![0]);
        assert_eq!(ilp.instance.n(), 3);
        assert_eq!(ilp.instance.r, 2);
    }

    #[test]
    fn known_optima() {
        let cfg = ImbalanceConfig::default();
        let r = solve_imbalance(&p3(), &cfg).unwrap();
        assert_eq!(r.imbalance, 2);
        let k2 = GraphInstance::new(2, vec![[0, 1]]);
        assert_eq!(solve_imbalance(&k2, &cfg).unwrap().imbalance, 2);
        let star = GraphInstance::new(4, vec![[0, 1], [0, 2], [0, 3]]);
        let r = solve_imbalance(&star, &cfg).unwrap();
        assert_eq!(r.imbalance, 4);
        assert_eq!(imbalance_of(&star, &r.ordering), 4);
        assert_eq!(brute_force(&star), 4);
    }

    #[test]
    fn cover_only_graph_costs_the_constants() {
        // a triangle plus one isolated vertex: the isolated one is free
        let g = GraphInstance::new(4, vec![[0, 1], [1, 2], [0, 2]]);
        let r = solve_imbalance(&g, &ImbalanceConfig::default()).unwrap();
        assert_eq!(r.imbalance, brute_force(&g));
    }

    #[test]
    fn edgeless_graph() {
        let g = GraphInstance::new(3, vec![]);
        let r = solve_imbalance(&g, &ImbalanceConfig::default()).unwrap();
        assert_eq!(r.imbalance, 0);
        assert_eq!(r.ordering, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_bad_graphs() {
        let cfg = ImbalanceConfig::default();
        assert!(matches!(
            solve_imbalance(&GraphInstance::new(2, vec![[0, 0]]), &cfg),
            Err(ImbalanceError::SelfLoop(0))
        ));
        assert!(matches!(
            solve_imbalance(&GraphInstance::new(2, vec![[0, 1], [1, 0]]), &cfg),
            Err(ImbalanceError::DuplicateEdge(_))
        ));
        let k4 = GraphInstance::new(4, vec![[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]);
        let tight = ImbalanceConfig {
            k_max: 2,
            ..ImbalanceConfig::default()
        };
        assert!(matches!(
            solve_imbalance(&k4, &tight),
            Err(ImbalanceError::CoverTooLarge { k_max: 2 })
        ));
    }

    #[test]
    fn permutations_in_order() {
        let mut v = vec![0, 1, 2];
        let mut all = vec![v.clone()];
        while next_permutation(&mut v) {
            all.push(v.clone());
        }
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 2, 1]);
    }
}
