//! Time-space resource contact graph.
//!
//! Vertices are contacts; an edge `u -> v` means a bundle received over `u`
//! can wait at the shared node and leave over `v`. Two notional vertices
//! frame the graph: a root contact at the source and a terminal contact at
//! the destination. The graph also carries the node computing and storage
//! counters used by the resource metrics.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::contactplan::{ContactId, ContactPlan, NodeId};
use crate::error::{Error, Result};

/// Vertex handle of the notional root contact.
pub const ROOT: usize = usize::MAX;

/// Copy of the contact fields the route search reads.
#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub plan_index: usize,
    pub id: ContactId,
    pub from: NodeId,
    pub to: NodeId,
    pub t_start: u64,
    pub t_end: u64,
    pub rate: f64,
    pub owlt: f64,
    pub residual_volume: f64,
}

/// Bundles (by copy id) resident at each node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StorageIndex {
    nodes: BTreeMap<NodeId, BTreeSet<u64>>,
}

impl StorageIndex {
    pub fn insert(&mut self, node: NodeId, copy: u64) {
        self.nodes.entry(node).or_default().insert(copy);
    }

    pub fn remove(&mut self, node: NodeId, copy: u64) -> bool {
        match self.nodes.get_mut(&node) {
            Some(set) => set.remove(&copy),
            None => false,
        }
    }

    pub fn at(&self, node: NodeId) -> usize {
        self.nodes.get(&node).map_or(0, BTreeSet::len)
    }

    pub fn total(&self) -> usize {
        self.nodes.values().map(BTreeSet::len).sum()
    }
}

#[derive(Debug)]
pub struct TsrcgGraph {
    source: NodeId,
    dest: NodeId,
    vertices: Vec<Vertex>,
    adjacency: Vec<Vec<usize>>,
    root_adjacency: Vec<usize>,
    computing: AtomicU64,
    pub storage_index: StorageIndex,
}

impl Clone for TsrcgGraph {
    fn clone(&self) -> Self {
        Self {
            source: self.source,
            dest: self.dest,
            vertices: self.vertices.clone(),
            adjacency: self.adjacency.clone(),
            root_adjacency: self.root_adjacency.clone(),
            computing: AtomicU64::new(self.computing()),
            storage_index: self.storage_index.clone(),
        }
    }
}

/// Builds the graph for `source -> dest` over the whole plan.
pub fn build_tsrcg(plan: &ContactPlan, source: &str, dest: &str) -> Result<TsrcgGraph> {
    let s = plan
        .node(source)
        .ok_or_else(|| Error::UnknownNode(source.to_string()))?;
    let d = plan
        .node(dest)
        .ok_or_else(|| Error::UnknownNode(dest.to_string()))?;
    if s == d {
        return Err(Error::SameEndpoints(source.to_string()));
    }
    Ok(TsrcgGraph::build(plan, s, d, 0))
}

impl TsrcgGraph {
    /// Builds the graph keeping only contacts that are still open after
    /// `now` and have volume left.
    pub fn build(plan: &ContactPlan, source: NodeId, dest: NodeId, now: u64) -> TsrcgGraph {
        let mut candidates: Vec<usize> = (0..plan.len())
            .filter(|&i| {
                let c = plan.contact(i);
                c.t_end > now
                    && c.residual_volume > 0.0
                    && c.to != source
                    && c.from != dest
                    && c.from != c.to
            })
            .collect();
        candidates.sort_by_key(|&i| (plan.contact(i).t_start, plan.contact(i).id));

        let mut by_from: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (pos, &i) in candidates.iter().enumerate() {
            by_from.entry(plan.contact(i).from).or_default().push(pos);
        }

        // reachability from the root under the edge rule
        let mut reached = vec![false; candidates.len()];
        let mut queue = VecDeque::new();
        for &pos in by_from.get(&source).into_iter().flatten() {
            reached[pos] = true;
            queue.push_back(pos);
        }
        while let Some(u) = queue.pop_front() {
            let cu = plan.contact(candidates[u]);
            for &v in by_from.get(&cu.to).into_iter().flatten() {
                let cv = plan.contact(candidates[v]);
                if !reached[v] && v != u && cv.t_end >= cu.t_start {
                    reached[v] = true;
                    queue.push_back(v);
                }
            }
        }

        let mut remap = vec![usize::MAX; candidates.len()];
        let mut vertices = Vec::new();
        for (pos, &i) in candidates.iter().enumerate() {
            if reached[pos] {
                remap[pos] = vertices.len();
                let c = plan.contact(i);
                vertices.push(Vertex {
                    plan_index: i,
                    id: c.id,
                    from: c.from,
                    to: c.to,
                    t_start: c.t_start,
                    t_end: c.t_end,
                    rate: c.rate,
                    owlt: c.owlt,
                    residual_volume: c.residual_volume,
                });
            }
        }

        let mut out_of: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (v, vert) in vertices.iter().enumerate() {
            out_of.entry(vert.from).or_default().push(v);
        }
        let adjacency = vertices
            .iter()
            .enumerate()
            .map(|(u, vu)| {
                if vu.to == dest {
                    return Vec::new();
                }
                out_of
                    .get(&vu.to)
                    .into_iter()
                    .flatten()
                    .copied()
                    .filter(|&v| v != u && vertices[v].t_end >= vu.t_start)
                    .collect()
            })
            .collect();
        let root_adjacency = out_of.get(&source).cloned().unwrap_or_default();

        TsrcgGraph {
            source,
            dest,
            vertices,
            adjacency,
            root_adjacency,
            computing: AtomicU64::new(0),
            storage_index: StorageIndex::default(),
        }
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn dest(&self) -> NodeId {
        self.dest
    }

    /// Real contact vertices; the notional root and terminal are implicit.
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Vertex count including the notional root and terminal.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len() + 2
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn vertex_of(&self, id: ContactId) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// Unmetered adjacency, used by the searches.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        if v == ROOT {
            &self.root_adjacency
        } else {
            &self.adjacency[v]
        }
    }

    pub fn reaches_terminal(&self, v: usize) -> bool {
        self.vertices[v].to == self.dest
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_edges(u).contains(&v)
    }

    /// Contacts that can forward data received over `v` at `arrival`.
    /// Each call counts as one computing iteration.
    pub fn successors(&self, v: ContactId, arrival: f64) -> BTreeSet<ContactId> {
        self.bump_computing(1);
        let Some(u) = self.vertex_of(v) else {
            return BTreeSet::new();
        };
        self.adjacency[u]
            .iter()
            .map(|&w| &self.vertices[w])
            .filter(|w| w.t_end as f64 > arrival)
            .map(|w| w.id)
            .collect()
    }

    /// Whether any path from the root reaches the terminal.
    pub fn connected(&self) -> bool {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack: Vec<usize> = self.root_adjacency.clone();
        while let Some(v) = stack.pop() {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if self.reaches_terminal(v) {
                return true;
            }
            stack.extend(self.adjacency[v].iter().copied().filter(|&w| !seen[w]));
        }
        false
    }

    pub fn computing(&self) -> u64 {
        self.computing.load(Ordering::Relaxed)
    }

    pub fn bump_computing(&self, n: u64) {
        self.computing.fetch_add(n, Ordering::Relaxed);
    }

    /// Edge list dump, one `u -> v` per line, with `root`/`terminal` for the
    /// notional contacts.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for &v in &self.root_adjacency {
            let _ = writeln!(out, "root -> {}", self.vertices[v].id);
        }
        for (u, vu) in self.vertices.iter().enumerate() {
            for &v in &self.adjacency[u] {
                let _ = writeln!(out, "{} -> {}", vu.id, self.vertices[v].id);
            }
            if vu.to == self.dest {
                let _ = writeln!(out, "{} -> terminal", vu.id);
            }
        }
        out
    }
}
