//! Subset dynamic program over a full binary tree substrate.
//!
//! `D[R, v]` is the cheapest way to host the request nodes in `R` inside the
//! subtree `T_v`, including the cost of every request edge with at least one
//! endpoint in `R` up to the point where it leaves `T_v`.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::model::{Mapping, ModelError, Outcome, Request, SolveResult, SolveStats, Substrate};
use crate::quantity::{Cost, Quantity, ResourceVec};
use crate::transform::{lift_with_origin, LeafPolicy, Pipeline};
use crate::tree::{check_tree, RootedTree};
use crate::validation::{is_feasible, mapping_cost};

/// Default cap on request size for the solver.
pub const DEFAULT_MAX_REQUEST_NODES: usize = 24;

const INF: u128 = u128::MAX;
const DEADLINE_STRIDE: u64 = 1 << 16;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("request has {r} nodes, solver cap is {cap}")]
    TooManyRequestNodes { r: usize, cap: usize },
    #[error("dp tables need about {needed} bytes, limit is {limit}")]
    MemoryLimit { needed: u128, limit: u128 },
    #[error("deadline exceeded")]
    Timeout,
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// A table entry: a finite cost or "no feasible placement".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entry {
    Finite(Cost),
    Infeasible,
}

impl Entry {
    fn raw(self) -> u128 {
        match self {
            Entry::Finite(c) if !c.is_saturated() => c.picos(),
            _ => INF,
        }
    }

    fn from_raw(raw: u128) -> Entry {
        if raw == INF {
            Entry::Infeasible
        } else {
            Entry::Finite(Cost::from_picos(raw))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Storage {
    /// One slot per subset and node.
    #[default]
    Dense,
    /// Finite entries only, as a sorted mask index.
    Sparse,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Root of the substrate tree; node 0 when unset.
    pub root: Option<usize>,
    pub storage: Storage,
    pub max_request_nodes: usize,
    pub deadline: Option<Instant>,
    /// Upper bound on the estimated table footprint.
    pub memory_limit: u128,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            root: None,
            storage: Storage::Dense,
            max_request_nodes: DEFAULT_MAX_REQUEST_NODES,
            deadline: None,
            memory_limit: 8 << 30,
        }
    }
}

/// Summed demand of the edges leaving every request-node subset.
#[derive(Debug, Clone)]
pub struct CutTable {
    r: usize,
    tau: usize,
    out: Vec<u128>,
    edges: Vec<u32>,
}

impl CutTable {
    pub fn full(&self) -> u32 {
        full_mask(self.r)
    }

    /// Wide per-component demand of cut(R).
    pub fn out_wide(&self, mask: u32) -> &[u128] {
        let i = mask as usize * self.tau;
        &self.out[i..i + self.tau]
    }

    /// Wide per-component demand of cut⁻(R) = cut(V_R \ R).
    pub fn in_wide(&self, mask: u32) -> &[u128] {
        self.out_wide(self.full() ^ mask)
    }

    pub fn out_demand(&self, mask: u32) -> ResourceVec {
        wide_vec(self.out_wide(mask))
    }

    pub fn in_demand(&self, mask: u32) -> ResourceVec {
        wide_vec(self.in_wide(mask))
    }

    /// Whether cut(R) contains any edge, even one of zero demand.
    pub fn out_nonempty(&self, mask: u32) -> bool {
        self.edges[mask as usize] > 0
    }

    pub fn in_nonempty(&self, mask: u32) -> bool {
        self.out_nonempty(self.full() ^ mask)
    }
}

fn wide_vec(wide: &[u128]) -> ResourceVec {
    ResourceVec::new(wide.iter().map(|&w| Quantity::saturate_wide(w)).collect())
}

fn full_mask(r: usize) -> u32 {
    if r == 32 {
        u32::MAX
    } else {
        (1u32 << r) - 1
    }
}

fn demand_wide(v: &ResourceVec) -> Vec<u128> {
    let mut acc = vec![0u128; v.tau()];
    v.accumulate_into(&mut acc);
    acc
}

/// Out-demand of every subset, built incrementally from the subset without
/// its lowest member.
pub fn precompute_cuts(request: &Request) -> Result<CutTable, SolveError> {
    let r = request.node_count();
    if r > crate::model::MAX_REQUEST_NODES {
        return Err(SolveError::TooManyRequestNodes {
            r,
            cap: crate::model::MAX_REQUEST_NODES,
        });
    }
    let tau = request.tau();
    let size = 1usize << r;
    let mut out = vec![0u128; size * tau];
    let mut edges = vec![0u32; size];
    let mut outgoing: Vec<Vec<(usize, Vec<u128>)>> = vec![Vec::new(); r];
    let mut incoming: Vec<Vec<(usize, Vec<u128>)>> = vec![Vec::new(); r];
    for e in request.edges() {
        outgoing[e.src].push((e.dst, demand_wide(&e.demand)));
        incoming[e.dst].push((e.src, demand_wide(&e.demand)));
    }
    for mask in 1..size {
        let u = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let (done, cur) = out.split_at_mut(mask * tau);
        let cur = &mut cur[..tau];
        cur.copy_from_slice(&done[rest * tau..rest * tau + tau]);
        let mut count = edges[rest];
        for (y, d) in &outgoing[u] {
            if rest >> y & 1 == 0 {
                for (c, x) in cur.iter_mut().zip(d) {
                    *c += x;
                }
                count += 1;
            }
        }
        for (x, d) in &incoming[u] {
            if rest >> x & 1 == 1 {
                for (c, y) in cur.iter_mut().zip(d) {
                    *c -= y;
                }
                count -= 1;
            }
        }
        edges[mask] = count;
    }
    Ok(CutTable { r, tau, out, edges })
}

fn node_sums(request: &Request) -> Vec<u128> {
    let tau = request.tau();
    let size = 1usize << request.node_count();
    let mut sums = vec![0u128; size * tau];
    for mask in 1..size {
        let u = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let (done, cur) = sums.split_at_mut(mask * tau);
        cur[..tau].copy_from_slice(&done[rest * tau..rest * tau + tau]);
        request.node(u).demand.accumulate_into(&mut cur[..tau]);
    }
    sums
}

/// Table entry for the leaf `v` hosting every request node in `mask`.
pub fn leaf_entry(mask: u32, v: usize, request: &Request, substrate: &Substrate) -> Entry {
    let mut sum = vec![0u128; request.tau()];
    for u in 0..request.node_count() {
        if mask >> u & 1 == 1 {
            request.node(u).demand.accumulate_into(&mut sum);
        }
    }
    let node = substrate.node(v);
    if !node.capacity.admits(&sum) {
        return Entry::Infeasible;
    }
    Entry::from_raw(Cost::dot(&sum, &node.cost).picos())
}

/// Child entry `D[R, x]` seen from the parent `v` of `x`, charging the edges
/// leaving `R` to `(x, v)` and the edges entering `R` to `(v, x)`.
pub fn edge_combine(
    v: usize,
    x: usize,
    mask: u32,
    cuts: &CutTable,
    child: Entry,
    substrate: &Substrate,
) -> Result<Entry, ModelError> {
    let up = substrate.find_edge(x, v).ok_or_else(|| {
        ModelError::MissingEdge(substrate.node_id(x).into(), substrate.node_id(v).into())
    })?;
    let down = substrate.find_edge(v, x).ok_or_else(|| {
        ModelError::MissingEdge(substrate.node_id(v).into(), substrate.node_id(x).into())
    })?;
    let link = Link::new(substrate, up, down, true, true);
    Ok(Entry::from_raw(link.combine(cuts, mask, child.raw())))
}

/// The two directed edges between a node and its parent.
struct Link<'a> {
    up_cap: &'a ResourceVec,
    up_cost: &'a ResourceVec,
    down_cap: &'a ResourceVec,
    down_cost: &'a ResourceVec,
    up_present: bool,
    down_present: bool,
}

impl<'a> Link<'a> {
    fn new(
        sub: &'a Substrate,
        up: usize,
        down: usize,
        up_present: bool,
        down_present: bool,
    ) -> Self {
        Link {
            up_cap: &sub.edge(up).capacity,
            up_cost: &sub.edge(up).cost,
            down_cap: &sub.edge(down).capacity,
            down_cost: &sub.edge(down).cost,
            up_present,
            down_present,
        }
    }

    fn combine(&self, cuts: &CutTable, mask: u32, child: u128) -> u128 {
        if child == INF {
            return INF;
        }
        // a direction missing from the original tree can carry no edge at all
        if (!self.up_present && cuts.out_nonempty(mask))
            || (!self.down_present && cuts.in_nonempty(mask))
        {
            return INF;
        }
        let out = cuts.out_wide(mask);
        let inn = cuts.in_wide(mask);
        if !self.up_cap.admits(out) || !self.down_cap.admits(inn) {
            return INF;
        }
        Cost::from_picos(child)
            .saturating_add(Cost::dot(out, self.up_cost))
            .saturating_add(Cost::dot(inn, self.down_cost))
            .picos()
    }
}

enum Table {
    Dense(Vec<u128>),
    Sparse(Vec<(u32, u128)>),
}

impl Table {
    fn get(&self, mask: u32) -> u128 {
        match self {
            Table::Dense(t) => t[mask as usize],
            Table::Sparse(t) => t
                .binary_search_by_key(&mask, |&(m, _)| m)
                .map_or(INF, |i| t[i].1),
        }
    }

    fn stored(&self) -> u64 {
        match self {
            Table::Dense(t) => t.len() as u64,
            Table::Sparse(t) => t.len() as u64,
        }
    }

    fn from_dense(values: Vec<u128>, storage: Storage) -> Table {
        match storage {
            Storage::Dense => Table::Dense(values),
            Storage::Sparse => Table::Sparse(
                values
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, c)| c != INF)
                    .map(|(m, c)| (m as u32, c))
                    .collect(),
            ),
        }
    }
}

struct Counter {
    iterations: u64,
    next_check: u64,
    deadline: Option<Instant>,
}

impl Counter {
    fn add(&mut self, n: u64) -> Result<(), SolveError> {
        self.iterations += n;
        if self.iterations >= self.next_check {
            self.next_check = self.iterations + DEADLINE_STRIDE;
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                return Err(SolveError::Timeout);
            }
        }
        Ok(())
    }
}

struct Solver<'a> {
    sub: &'a Substrate,
    tree: RootedTree,
    present: Vec<bool>,
    cuts: CutTable,
    sums: Vec<u128>,
    r: usize,
    tau: usize,
    storage: Storage,
    tables: Vec<Option<Table>>,
    counter: Counter,
}

impl<'a> Solver<'a> {
    fn size(&self) -> usize {
        1 << self.r
    }

    fn link(&self, v: usize, x: usize) -> Link<'a> {
        let up = self
            .sub
            .find_edge(x, v)
            .expect("pipeline output is bidirectional");
        let down = self
            .sub
            .find_edge(v, x)
            .expect("pipeline output is bidirectional");
        Link::new(self.sub, up, down, self.present[up], self.present[down])
    }

    fn leaf(&mut self, v: usize) -> Result<Vec<u128>, SolveError> {
        let node = self.sub.node(v);
        let tau = self.tau;
        let values = (0..self.size())
            .map(|m| {
                let sum = &self.sums[m * tau..m * tau + tau];
                if node.capacity.admits(sum) {
                    Cost::dot(sum, &node.cost).picos()
                } else {
                    INF
                }
            })
            .collect();
        self.counter.add(self.size() as u64)?;
        Ok(values)
    }

    /// f(v, x, R) for every R.
    fn lifted(&mut self, v: usize, x: usize) -> Result<Vec<u128>, SolveError> {
        let link = self.link(v, x);
        let child = self.tables[x].as_ref().expect("children first");
        let values = (0..self.size() as u32)
            .map(|m| link.combine(&self.cuts, m, child.get(m)))
            .collect();
        self.counter.add(self.size() as u64)?;
        Ok(values)
    }

    fn pair_dense(&mut self, fw: &[u128], fu: &[u128]) -> Result<Vec<u128>, SolveError> {
        let mut out = vec![INF; self.size()];
        for (set, slot) in out.iter_mut().enumerate() {
            let set = set as u32;
            let mut best = INF;
            let mut a = 0u32;
            loop {
                let fa = fw[a as usize];
                if fa != INF {
                    let fb = fu[(set ^ a) as usize];
                    if fb != INF {
                        best = best.min(fa.saturating_add(fb));
                    }
                }
                if a == set {
                    break;
                }
                a = a.wrapping_sub(set) & set;
            }
            *slot = best;
            self.counter.add(1 << set.count_ones())?;
        }
        Ok(out)
    }

    /// Same minimum as [`Self::pair_dense`], visiting only finite left parts.
    fn pair_sparse(&mut self, fw: &[u128], fu: &[u128]) -> Result<Vec<u128>, SolveError> {
        let full = full_mask(self.r);
        let mut out = vec![INF; self.size()];
        let right: Vec<u32> = (0..self.size() as u32)
            .filter(|&m| fu[m as usize] != INF)
            .collect();
        for a in (0..self.size() as u32).filter(|&m| fw[m as usize] != INF) {
            let fa = fw[a as usize];
            let free = full ^ a;
            let relax = |b: u32, out: &mut Vec<u128>| {
                let s = fa.saturating_add(fu[b as usize]);
                let slot = &mut out[(a | b) as usize];
                *slot = (*slot).min(s);
            };
            if right.len() < 1 << free.count_ones() {
                for &b in right.iter().filter(|&&b| b & a == 0) {
                    relax(b, &mut out);
                }
                self.counter.add(right.len() as u64)?;
            } else {
                let mut b = 0u32;
                loop {
                    if fu[b as usize] != INF {
                        relax(b, &mut out);
                    }
                    if b == free {
                        break;
                    }
                    b = b.wrapping_sub(free) & free;
                }
                self.counter.add(1 << free.count_ones())?;
            }
        }
        Ok(out)
    }

    fn run(&mut self) -> Result<(), SolveError> {
        for v in self.tree.post_order() {
            let children = self.tree.children[v].clone();
            let values = match children.as_slice() {
                [] => self.leaf(v)?,
                [u] => self.lifted(v, *u)?,
                [w, u] => {
                    let fw = self.lifted(v, *w)?;
                    let fu = self.lifted(v, *u)?;
                    match self.storage {
                        Storage::Dense => self.pair_dense(&fw, &fu)?,
                        Storage::Sparse => self.pair_sparse(&fw, &fu)?,
                    }
                }
                _ => {
                    return Err(SolveError::Internal(format!(
                        "`{}` has {} children after transformation",
                        self.sub.node_id(v),
                        children.len()
                    )))
                }
            };
            self.tables[v] = Some(Table::from_dense(values, self.storage));
        }
        Ok(())
    }

    fn entry(&self, v: usize, mask: u32) -> u128 {
        self.tables[v].as_ref().expect("table computed").get(mask)
    }

    /// Walks down from the root, re-deriving the first ascending split that
    /// reproduces each stored value.
    fn reconstruct(&self) -> Result<Vec<usize>, SolveError> {
        let mut node_map = vec![usize::MAX; self.r];
        let mut stack = vec![(self.tree.root, full_mask(self.r))];
        while let Some((v, set)) = stack.pop() {
            if set == 0 {
                continue;
            }
            let target = self.entry(v, set);
            match self.tree.children[v].as_slice() {
                [] => {
                    for (u, slot) in node_map.iter_mut().enumerate() {
                        if set >> u & 1 == 1 {
                            *slot = v;
                        }
                    }
                }
                [u] => stack.push((*u, set)),
                [w, u] => {
                    let (lw, lu) = (self.link(v, *w), self.link(v, *u));
                    let mut a = 0u32;
                    let found = loop {
                        let fa = lw.combine(&self.cuts, a, self.entry(*w, a));
                        let fb = lu.combine(&self.cuts, set ^ a, self.entry(*u, set ^ a));
                        if fa != INF && fb != INF && fa.saturating_add(fb) == target {
                            break Some(a);
                        }
                        if a == set {
                            break None;
                        }
                        a = a.wrapping_sub(set) & set;
                    };
                    let a = found.ok_or_else(|| {
                        SolveError::Internal(format!(
                            "no split of {set:#b} at `{}`",
                            self.sub.node_id(v)
                        ))
                    })?;
                    stack.push((*u, set ^ a));
                    stack.push((*w, a));
                }
                _ => unreachable!("checked during evaluation"),
            }
        }
        Ok(node_map)
    }
}

fn estimate_bytes(transformed_nodes: usize, r: usize, tau: usize) -> u128 {
    let size = 1u128 << r;
    // tables plus cut and node-sum vectors plus per-node scratch
    size * 16 * (transformed_nodes as u128 + 2 * tau as u128 + 3)
}

/// Exact minimum-cost embedding of `request` into the tree `substrate`.
pub fn solve(
    substrate: &Substrate,
    request: &Request,
    options: &SolveOptions,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    check_tree(substrate)?;
    if substrate.tau() != request.tau() {
        return Err(ModelError::Dimension {
            expected: substrate.tau(),
            got: request.tau(),
        }
        .into());
    }
    let r = request.node_count();
    if r > options
        .max_request_nodes
        .min(crate::model::MAX_REQUEST_NODES)
    {
        return Err(SolveError::TooManyRequestNodes {
            r,
            cap: options.max_request_nodes,
        });
    }
    let root = options.root.unwrap_or(0);
    if root >= substrate.node_count() {
        return Err(ModelError::UnknownNode(format!("#{root}")).into());
    }
    if r == 0 {
        return Ok(SolveResult {
            outcome: Outcome::Optimal {
                cost: Cost::ZERO,
                mapping: Mapping::default(),
            },
            stats: SolveStats {
                transformed_nodes: substrate.node_count(),
                elapsed: start.elapsed(),
                ..Default::default()
            },
        });
    }

    let policy = if request.nodes().iter().any(|n| n.demand.is_zero()) {
        LeafPolicy::AllInternal
    } else {
        LeafPolicy::NonzeroCapacity
    };
    let pipeline = Pipeline::run(substrate, root, policy)?;
    let sub = &pipeline.substrate;
    if options.storage == Storage::Dense {
        let needed = estimate_bytes(sub.node_count(), r, request.tau());
        if needed > options.memory_limit {
            return Err(SolveError::MemoryLimit {
                needed,
                limit: options.memory_limit,
            });
        }
    }

    let mut solver = Solver {
        sub,
        tree: RootedTree::new(sub, pipeline.root)?,
        present: pipeline.edge_present(substrate),
        cuts: precompute_cuts(request)?,
        sums: node_sums(request),
        r,
        tau: request.tau(),
        storage: options.storage,
        tables: (0..sub.node_count()).map(|_| None).collect(),
        counter: Counter {
            iterations: 0,
            next_check: DEADLINE_STRIDE,
            deadline: options.deadline,
        },
    };
    solver.run()?;

    let best = solver.entry(pipeline.root, full_mask(r));
    let outcome = if best == INF {
        Outcome::Infeasible
    } else {
        let placed = solver.reconstruct()?;
        let transformed = Mapping {
            node_map: placed,
            edge_map: Vec::new(),
        };
        let mapping = lift_with_origin(substrate, &pipeline.origin, request, &transformed)?;
        let cost = Cost::from_picos(best);
        if !is_feasible(substrate, request, &mapping)? {
            return Err(SolveError::Internal(
                "reconstructed mapping is not feasible".into(),
            ));
        }
        let recomputed = mapping_cost(substrate, request, &mapping);
        if recomputed != cost {
            return Err(SolveError::Internal(format!(
                "table cost {cost} but mapping costs {recomputed}"
            )));
        }
        Outcome::Optimal { cost, mapping }
    };

    let stats = SolveStats {
        transformed_nodes: sub.node_count(),
        table_entries: solver.tables.iter().flatten().map(Table::stored).sum(),
        inner_iterations: solver.counter.iterations,
        elapsed: start.elapsed(),
    };
    Ok(SolveResult { outcome, stats })
}

/// Convenience wrapper with a relative time budget.
pub fn solve_within(
    substrate: &Substrate,
    request: &Request,
    budget: Duration,
    storage: Storage,
) -> Result<SolveResult, SolveError> {
    let options = SolveOptions {
        deadline: Some(Instant::now() + budget),
        storage,
        ..SolveOptions::default()
    };
    solve(substrate, request, &options)
}
