//! Grid topology, machine parameters and the graph operations the rest of the
//! crate builds on.
//!
//! Lines are undirected and stored under a normalized [`LineKey`] `(min, max)`,
//! sorted, so every iteration over a topology visits lines in the same order.
//! The control layer shares the physical line set with unit weights, so there
//! is no separate control adjacency here.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result, Violation};

/// Dense 0-based node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unordered node pair, stored as `(min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineKey {
    lo: NodeId,
    hi: NodeId,
}

impl LineKey {
    pub fn new(a: usize, b: usize) -> Self {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        LineKey {
            lo: NodeId(lo),
            hi: NodeId(hi),
        }
    }

    pub fn lo(self) -> usize {
        self.lo.0
    }

    pub fn hi(self) -> usize {
        self.hi.0
    }

    pub fn touches(self, node: usize) -> bool {
        self.lo.0 == node || self.hi.0 == node
    }
}

impl fmt::Display for LineKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo.0, self.hi.0)
    }
}

/// A transmission line with coupling strength `K_ij` (per-unit power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub key: LineKey,
    pub coupling: f64,
}

impl Line {
    pub fn new(a: usize, b: usize, coupling: f64) -> Self {
        Line {
            key: LineKey::new(a, b),
            coupling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// `a_ij = 1` for every line.
    Unweighted,
    /// `a_ij = K_ij`.
    Physical,
}

/// Node count, operating lines and the generator subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTopology {
    node_count: usize,
    lines: Vec<Line>,
    generators: BTreeSet<NodeId>,
}

impl GridTopology {
    /// Builds a topology and rejects it if any invariant is broken.
    pub fn new(
        node_count: usize,
        lines: impl IntoIterator<Item = Line>,
        generators: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let topo = Self::unchecked(node_count, lines, generators);
        let violations = topo.validate();
        if violations.is_empty() {
            Ok(topo)
        } else {
            Err(GridError::InvalidTopology(violations))
        }
    }

    /// Builds a topology without checking invariants. Call [`validate`](Self::validate)
    /// before handing it to any solver.
    pub fn unchecked(
        node_count: usize,
        lines: impl IntoIterator<Item = Line>,
        generators: impl IntoIterator<Item = usize>,
    ) -> Self {
        let mut lines: Vec<Line> = lines.into_iter().collect();
        lines.sort_by_key(|l| l.key);
        GridTopology {
            node_count,
            lines,
            generators: generators.into_iter().map(NodeId).collect(),
        }
    }

    /// Every broken invariant, in a deterministic order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut prev: Option<LineKey> = None;
        for line in &self.lines {
            let (a, b) = (line.key.lo(), line.key.hi());
            if a == b {
                out.push(Violation::SelfLoop(a));
            }
            for node in [a, b] {
                if node >= self.node_count {
                    out.push(Violation::DanglingNode { line: (a, b), node });
                }
            }
            if !line.coupling.is_finite() {
                out.push(Violation::NonFiniteCoupling(a, b));
            } else if line.coupling <= 0.0 {
                out.push(Violation::NonPositiveCoupling(a, b));
            }
            if prev == Some(line.key) {
                out.push(Violation::DuplicateLine(a, b));
            }
            prev = Some(line.key);
        }
        for g in &self.generators {
            if g.0 >= self.node_count {
                out.push(Violation::GeneratorOutOfRange(g.0));
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn generators(&self) -> &BTreeSet<NodeId> {
        &self.generators
    }

    pub fn is_generator(&self, node: usize) -> bool {
        self.generators.contains(&NodeId(node))
    }

    pub fn find(&self, key: LineKey) -> Option<&Line> {
        self.lines
            .binary_search_by_key(&key, |l| l.key)
            .ok()
            .map(|i| &self.lines[i])
    }

    pub fn contains(&self, key: LineKey) -> bool {
        self.find(key).is_some()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.lines.iter().filter(|l| l.key.touches(node)).count()
    }

    /// A copy with `key` absent from both the physical and the control layer.
    pub fn remove_line(&self, key: LineKey) -> Result<GridTopology> {
        let idx = self
            .lines
            .binary_search_by_key(&key, |l| l.key)
            .map_err(|_| GridError::LineNotFound(key))?;
        let mut next = self.clone();
        next.lines.remove(idx);
        Ok(next)
    }

    /// A copy with `line` added. Fails if the pair is already present.
    pub fn add_line(&self, line: Line) -> Result<GridTopology> {
        match self.lines.binary_search_by_key(&line.key, |l| l.key) {
            Ok(_) => Err(GridError::InvalidTopology(vec![Violation::DuplicateLine(
                line.key.lo(),
                line.key.hi(),
            )])),
            Err(pos) => {
                let mut next = self.clone();
                next.lines.insert(pos, line);
                Ok(next)
            }
        }
    }

    /// Connectivity partition. Components are ordered by their smallest node,
    /// and nodes inside a component are ascending.
    pub fn connected_components(&self) -> Vec<Vec<NodeId>> {
        let labels = component_labels(self.node_count, self.lines.iter().map(|l| l.key));
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut comps = vec![Vec::new(); count];
        for (node, &c) in labels.iter().enumerate() {
            comps[c].push(NodeId(node));
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    /// `L = D - A`. Assembly follows the sorted line order, so the result is
    /// bit-for-bit symmetric and reproducible.
    pub fn laplacian(&self, weighting: Weighting) -> DMatrix<f64> {
        let n = self.node_count;
        let mut lap = DMatrix::zeros(n, n);
        for line in &self.lines {
            let w = match weighting {
                Weighting::Unweighted => 1.0,
                Weighting::Physical => line.coupling,
            };
            let (a, b) = (line.key.lo(), line.key.hi());
            lap[(a, b)] -= w;
            lap[(b, a)] -= w;
        }
        for i in 0..n {
            // Row sum of off-diagonals, accumulated in column order.
            let mut s = 0.0;
            for j in 0..n {
                if j != i {
                    s += lap[(i, j)];
                }
            }
            lap[(i, i)] = -s;
        }
        lap
    }
}

/// Labels each node with a component index; components are numbered in order
/// of their smallest node.
pub(crate) fn component_labels(
    node_count: usize,
    edges: impl IntoIterator<Item = LineKey>,
) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..node_count).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for key in edges {
        let (a, b) = (key.lo(), key.hi());
        if a >= node_count || b >= node_count {
            continue;
        }
        let ra = root(&mut parent, a);
        let rb = root(&mut parent, b);
        if ra != rb {
            // Keep the smaller index as root.
            let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[drop] = keep;
        }
    }
    let mut label_of_root = vec![usize::MAX; node_count];
    let mut labels = vec![0; node_count];
    let mut next = 0;
    for (node, label) in labels.iter_mut().enumerate() {
        let r = root(&mut parent, node);
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = next;
            next += 1;
        }
        *label = label_of_root[r];
    }
    labels
}

/// Per-node inertia `I_i`, damping `γ_i` and injected power `P_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    pub power: Vec<f64>,
}

impl MachineParams {
    pub fn uniform(node_count: usize, inertia: f64, damping: f64, power: Vec<f64>) -> Self {
        MachineParams {
            inertia: vec![inertia; node_count],
            damping: vec![damping; node_count],
            power,
        }
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Net injection `Σ P_i`.
    pub fn imbalance(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn validate(&self, node_count: usize) -> Result<()> {
        for (name, v) in [
            ("inertia", &self.inertia),
            ("damping", &self.damping),
            ("power", &self.power),
        ] {
            if v.len() != node_count {
                return Err(GridError::InvalidParameter(format!(
                    "{name} has {} entries for {node_count} nodes",
                    v.len()
                )));
            }
        }
        if let Some(i) = self.inertia.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(GridError::InvalidParameter(format!(
                "inertia of node index {i} must be positive"
            )));
        }
        if let Some(i) = self.damping.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(GridError::InvalidParameter(format!(
                "damping of node index {i} must be positive"
            )));
        }
        if let Some(i) = self.power.iter().position(|x| !x.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "power of node index {i} is not finite"
            )));
        }
        Ok(())
    }
}
