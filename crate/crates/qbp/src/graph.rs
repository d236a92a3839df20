//! Tree graphical models: structure, edge Hamiltonians and exact thermal oracles.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{kron, DenseOperator, Pauli, SiteId, SiteLayout, DEFAULT_DIM_CAP};
use crate::random::{derive_seed, random_hermitian, rng};

/// Undirected tree on labelled vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    layout: SiteLayout,
    edges: Vec<(SiteId, SiteId)>,
    adjacency: BTreeMap<SiteId, Vec<SiteId>>,
}

impl Tree {
    /// Validates that `edges` form a spanning tree of the layout's sites.
    /// Edge endpoints are stored as `(min, max)`.
    pub fn new(layout: SiteLayout, edges: &[(SiteId, SiteId)]) -> Result<Self> {
        let mut adjacency: BTreeMap<SiteId, Vec<SiteId>> =
            layout.sites().iter().map(|&s| (s, Vec::new())).collect();
        let mut stored = Vec::with_capacity(edges.len());
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            for w in [u, v] {
                if !layout.contains(w) {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({u}, {v}) has a dangling endpoint {w}"
                    )));
                }
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) listed twice")));
            }
            adjacency.get_mut(&u).unwrap().push(v);
            adjacency.get_mut(&v).unwrap().push(u);
            stored.push(key);
        }
        for nbrs in adjacency.values_mut() {
            nbrs.sort_unstable();
        }
        let n = layout.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        if stored.len() != n - 1 {
            return Err(Error::InvalidGraph(format!(
                "{} edges on {n} vertices: not a tree (cyclic or disconnected)",
                stored.len()
            )));
        }
        let tree = Self {
            layout,
            edges: stored,
            adjacency,
        };
        let reached = tree.distances_from(&[tree.layout.sites()[0]])?;
        if reached.len() != n {
            return Err(Error::InvalidGraph(
                "graph is disconnected (and therefore cyclic)".into(),
            ));
        }
        Ok(tree)
    }

    pub fn layout(&self) -> &SiteLayout {
        &self.layout
    }

    pub fn vertices(&self) -> &[SiteId] {
        self.layout.sites()
    }

    pub fn edges(&self) -> &[(SiteId, SiteId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: SiteId) -> Result<&[SiteId]> {
        self.adjacency
            .get(&v)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownSite(v))
    }

    pub fn degree(&self, v: SiteId) -> Result<usize> {
        Ok(self.neighbors(v)?.len())
    }

    pub fn is_leaf(&self, v: SiteId) -> Result<bool> {
        Ok(self.degree(v)? == 1)
    }

    pub fn edge_index(&self, u: SiteId, v: SiteId) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.iter().position(|&e| e == key)
    }

    /// Multi-source breadth-first distances from `sources` to every vertex.
    pub fn distances_from(&self, sources: &[SiteId]) -> Result<BTreeMap<SiteId, usize>> {
        if sources.is_empty() {
            return Err(Error::InvalidArgument(
                "distance to an empty vertex set".into(),
            ));
        }
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::new();
        for &s in sources {
            if !self.layout.contains(s) {
                return Err(Error::UnknownSite(s));
            }
            if dist.insert(s, 0usize).is_none() {
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            for &w in &self.adjacency[&v] {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(d + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Shortest path length from `v` to the nearest vertex of `set`.
    pub fn distance(&self, v: SiteId, set: &[SiteId]) -> Result<usize> {
        if !self.layout.contains(v) {
            return Err(Error::UnknownSite(v));
        }
        Ok(self.distances_from(set)?[&v])
    }

    pub fn eccentricity(&self, v: SiteId) -> Result<usize> {
        Ok(self
            .distances_from(&[v])?
            .values()
            .copied()
            .max()
            .unwrap_or(0))
    }

    pub fn diameter(&self) -> usize {
        self.vertices()
            .iter()
            .map(|&v| self.eccentricity(v).unwrap())
            .max()
            .unwrap_or(0)
    }

    /// Vertices within distance `radius` of `set` (the set itself included).
    pub fn ball(&self, set: &[SiteId], radius: usize) -> Result<Vec<SiteId>> {
        Ok(self
            .distances_from(set)?
            .into_iter()
            .filter(|&(_, d)| d <= radius)
            .map(|(v, _)| v)
            .collect())
    }

    /// Vertex order along the path if the tree is a chain, starting at the
    /// endpoint with the smaller id.
    pub fn chain_order(&self) -> Option<Vec<SiteId>> {
        if self.adjacency.values().any(|n| n.len() > 2) {
            return None;
        }
        let start = if self.layout.len() == 1 {
            self.vertices()[0]
        } else {
            *self.adjacency.iter().find(|(_, n)| n.len() == 1)?.0
        };
        let mut order = vec![start];
        let mut prev = None;
        let mut cur = start;
        while let Some(&next) = self.adjacency[&cur].iter().find(|&&w| Some(w) != prev) {
            order.push(next);
            prev = Some(cur);
            cur = next;
        }
        Some(order)
    }

    /// The tree with leaf `leaf` removed.
    pub fn without_leaf(&self, leaf: SiteId) -> Result<Self> {
        if !self.is_leaf(leaf)? {
            return Err(Error::NotALeaf(leaf));
        }
        let layout = self.layout.complement(&[leaf])?;
        let edges: Vec<_> = self
            .edges
            .iter()
            .copied()
            .filter(|&(u, v)| u != leaf && v != leaf)
            .collect();
        Self::new(layout, &edges)
    }

    /// Connected vertex subsets of size at most `max_size`, in a deterministic order.
    /// Only sizes 1 and 2 are enumerated (singletons and edges).
    pub fn small_connected_subsets(&self, max_size: usize) -> Vec<Vec<SiteId>> {
        let mut out: Vec<Vec<SiteId>> = Vec::new();
        if max_size >= 1 {
            out.extend(self.vertices().iter().map(|&v| vec![v]));
        }
        if max_size >= 2 {
            out.extend(self.edges.iter().map(|&(u, v)| vec![u, v]));
        }
        out
    }
}

/// Stock two-site edge Hamiltonians. Single-site fields are split across the
/// incident edges: each edge carries half of the field on each endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "factory", content = "params", rename_all = "snake_case")]
pub enum EdgeFactory {
    /// `−J Z⊗Z − (h_z/2)(Z⊗I + I⊗Z)`; diagonal.
    ClassicalIsing {
        j: f64,
        #[serde(default)]
        hz: f64,
    },
    /// `−J Z⊗Z − (h_x/2)(X⊗I + I⊗X)`; with `full_boundary`, leaf endpoints get
    /// the full `h_x` so that every site carries the same field.
    Tfim {
        j: f64,
        hx: f64,
        #[serde(default)]
        full_boundary: bool,
    },
    /// `J (X⊗X + Y⊗Y + Z⊗Z) + (h_z/2)(Z⊗I + I⊗Z)`.
    Heisenberg {
        j: f64,
        #[serde(default)]
        hz: f64,
    },
    /// Seeded GUE two-site term rescaled to operator norm `scale`.
    Random {
        seed: u64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

/// Where an edge sits in the graph; factories use it for boundary conventions
/// and per-edge seeding.
#[derive(Clone, Copy, Debug)]
pub struct EdgeContext {
    pub index: usize,
    pub u_is_leaf: bool,
    pub v_is_leaf: bool,
}

impl EdgeFactory {
    pub fn term(
        &self,
        u: (SiteId, usize),
        v: (SiteId, usize),
        ctx: EdgeContext,
    ) -> Result<DenseOperator> {
        let (su, du) = u;
        let (sv, dv) = v;
        let layout = SiteLayout::new([(su, du), (sv, dv)])?;
        let is_pauli = !matches!(self, EdgeFactory::Random { .. });
        if is_pauli && (du != 2 || dv != 2) {
            return Err(Error::DimensionMismatch(format!(
                "{self:?} needs qubit sites, edge ({su}, {sv}) has dims ({du}, {dv})"
            )));
        }
        let on = |p: Pauli, s: SiteId| p.on(s).embed(&layout);
        let pair = |p: Pauli| -> Result<DenseOperator> { kron(&p.on(su), &p.on(sv)) };
        let term = match *self {
            EdgeFactory::ClassicalIsing { j, hz } => {
                let field = &on(Pauli::Z, su)? + &on(Pauli::Z, sv)?;
                &pair(Pauli::Z)?.scale(-j) - &field.scale(hz / 2.0)
            }
            EdgeFactory::Tfim {
                j,
                hx,
                full_boundary,
            } => {
                let wu = if full_boundary && ctx.u_is_leaf {
                    hx
                } else {
                    hx / 2.0
                };
                let wv = if full_boundary && ctx.v_is_leaf {
                    hx
                } else {
                    hx / 2.0
                };
                let field = &on(Pauli::X, su)?.scale(wu) + &on(Pauli::X, sv)?.scale(wv);
                &pair(Pauli::Z)?.scale(-j) - &field
            }
            EdgeFactory::Heisenberg { j, hz } => {
                let xx = pair(Pauli::X)?;
                let yy = pair(Pauli::Y)?;
                let zz = pair(Pauli::Z)?;
                let field = &on(Pauli::Z, su)? + &on(Pauli::Z, sv)?;
                &(&(&xx + &yy) + &zz).scale(j) + &field.scale(hz / 2.0)
            }
            EdgeFactory::Random { seed, scale } => {
                let h = random_hermitian(derive_seed(seed, 0x5eed, ctx.index as u64), &layout);
                let norm = h.op_norm();
                h.scale(scale / norm)
            }
        };
        Ok(term)
    }

    /// Whether every term this factory produces is diagonal in the product basis.
    pub fn is_diagonal(&self) -> bool {
        matches!(self, EdgeFactory::ClassicalIsing { .. })
    }
}

/// How an edge term is specified in a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TermSpec {
    Factory(EdgeFactory),
    /// Row-major `[re, im]` entries with legs in the edge's `(u, v)` order.
    Matrix {
        matrix: Vec<Vec<[f64; 2]>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSpec {
    pub id: SiteId,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub u: SiteId,
    pub v: SiteId,
    pub term: TermSpec,
}

/// Serializable model description (the model-file schema).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
    pub beta: f64,
}

/// A tree with one Hermitian two-site term per edge and an inverse temperature.
#[derive(Clone, Debug)]
pub struct GraphModel {
    tree: Tree,
    terms: Vec<DenseOperator>,
    beta: f64,
    dim_cap: usize,
}

impl GraphModel {
    /// `terms[i]` belongs to `edges[i]` and must act on exactly its two endpoints.
    pub fn new(
        vertices: impl IntoIterator<Item = (SiteId, usize)>,
        edges: Vec<((SiteId, SiteId), DenseOperator)>,
        beta: f64,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        let layout = SiteLayout::with_cap(vertices, usize::MAX)?;
        let keys: Vec<(SiteId, SiteId)> = edges.iter().map(|(k, _)| *k).collect();
        let tree = Tree::new(layout, &keys)?;
        let mut terms = Vec::with_capacity(edges.len());
        for ((u, v), term) in edges {
            let expected = tree.layout().subset(&[u, v])?;
            if term.layout() != &expected {
                return Err(Error::DimensionMismatch(format!(
                    "term on edge ({u}, {v}) acts on sites {:?}",
                    term.layout().sites()
                )));
            }
            let residual = term.hermitian_residual();
            if residual > crate::operator::HERMITIAN_TOL {
                return Err(Error::NotHermitian { residual });
            }
            terms.push(term);
        }
        Ok(Self {
            tree,
            terms,
            beta,
            dim_cap: DEFAULT_DIM_CAP,
        })
    }

    /// Builds a model from a tree structure and a factory applied to every edge.
    pub fn from_factory(tree: Tree, factory: &EdgeFactory, beta: f64) -> Result<Self> {
        let edges = tree
            .edges()
            .iter()
            .enumerate()
            .map(|(index, &(u, v))| {
                let ctx = EdgeContext {
                    index,
                    u_is_leaf: tree.is_leaf(u)?,
                    v_is_leaf: tree.is_leaf(v)?,
                };
                let du = tree.layout().dim_of(u).unwrap();
                let dv = tree.layout().dim_of(v).unwrap();
                Ok(((u, v), factory.term((u, du), (v, dv), ctx)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let vertices: Vec<_> = tree.layout().pairs().collect();
        Self::new(vertices, edges, beta)
    }

    /// Chain `1 - 2 - ... - n` with identical local dimensions.
    pub fn chain(n: usize, local_dim: usize, factory: &EdgeFactory, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!(
                "a chain needs at least 2 vertices, got {n}"
            )));
        }
        let layout = SiteLayout::with_cap((1..=n).map(|s| (s, local_dim)), usize::MAX)?;
        let edges: Vec<_> = (1..n).map(|k| (k, k + 1)).collect();
        Self::from_factory(Tree::new(layout, &edges)?, factory, beta)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let vertices: Vec<(SiteId, usize)> = spec.vertices.iter().map(|v| (v.id, v.dim)).collect();
        let layout = SiteLayout::with_cap(vertices.clone(), usize::MAX)?;
        let keys: Vec<_> = spec.edges.iter().map(|e| (e.u, e.v)).collect();
        let tree = Tree::new(layout, &keys)?;
        let edges = spec
            .edges
            .iter()
            .enumerate()
            .map(|(index, e)| {
                let du = tree.layout().dim_of(e.u).ok_or(Error::UnknownSite(e.u))?;
                let dv = tree.layout().dim_of(e.v).ok_or(Error::UnknownSite(e.v))?;
                let term = match &e.term {
                    TermSpec::Factory(f) => {
                        let ctx = EdgeContext {
                            index,
                            u_is_leaf: tree.is_leaf(e.u)?,
                            v_is_leaf: tree.is_leaf(e.v)?,
                        };
                        f.term((e.u, du), (e.v, dv), ctx)?
                    }
                    TermSpec::Matrix { matrix } => {
                        let d = du * dv;
                        if matrix.len() != d || matrix.iter().any(|row| row.len() != d) {
                            return Err(Error::DimensionMismatch(format!(
                                "matrix for edge ({}, {}) must be {d}x{d}",
                                e.u, e.v
                            )));
                        }
                        let m = DMatrix::from_fn(d, d, |i, j| {
                            Complex64::new(matrix[i][j][0], matrix[i][j][1])
                        });
                        DenseOperator::from_site_order(&[e.u, e.v], &[du, dv], m)?
                    }
                };
                Ok(((e.u, e.v), term))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vertices, edges, spec.beta)
    }

    /// Same terms at a different inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Ok(Self {
            beta,
            ..self.clone()
        })
    }

    pub fn with_dim_cap(mut self, cap: usize) -> Self {
        self.dim_cap = cap;
        self
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn layout(&self) -> &SiteLayout {
        self.tree.layout()
    }

    pub fn edges(&self) -> &[(SiteId, SiteId)] {
        self.tree.edges()
    }

    pub fn terms(&self) -> &[DenseOperator] {
        &self.terms
    }

    pub fn term(&self, u: SiteId, v: SiteId) -> Result<&DenseOperator> {
        self.tree
            .edge_index(u, v)
            .map(|i| &self.terms[i])
            .ok_or_else(|| Error::InvalidGraph(format!("({u}, {v}) is not an edge")))
    }

    pub fn num_vertices(&self) -> usize {
        self.layout().len()
    }

    /// The full layout, checked against the dimension cap.
    pub fn full_layout(&self) -> Result<SiteLayout> {
        let mut dim: usize = 1;
        for &d in self.layout().dims() {
            dim = dim.saturating_mul(d);
            if dim > self.dim_cap {
                return Err(Error::DimensionCap {
                    dim,
                    cap: self.dim_cap,
                });
            }
        }
        Ok(self.layout().clone())
    }

    /// `Σ_{e ∈ edges} h_e` embedded on `layout`, which must contain every endpoint.
    pub fn hamiltonian_on(&self, edges: &[usize], layout: &SiteLayout) -> Result<DenseOperator> {
        let mut h = DenseOperator::zeros(layout.clone());
        for &i in edges {
            let term = self
                .terms
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("edge index {i} out of range")))?;
            h = &h + &term.embed(layout)?;
        }
        Ok(h)
    }

    /// `Σ_{e ∈ edges} h_e` on the full layout.
    pub fn hamiltonian_of(&self, edges: &[usize]) -> Result<DenseOperator> {
        self.hamiltonian_on(edges, &self.full_layout()?)
    }

    pub fn hamiltonian(&self) -> Result<DenseOperator> {
        let all: Vec<usize> = (0..self.terms.len()).collect();
        self.hamiltonian_of(&all)
    }

    /// `exp(−βH) / Tr exp(−βH)`.
    pub fn thermal_state(&self) -> Result<DenseOperator> {
        Ok(self.hamiltonian()?.gibbs(self.beta)?.0)
    }

    /// Brute-force reduced thermal state on `keep`.
    pub fn exact_reduced_density(&self, keep: &[SiteId]) -> Result<DenseOperator> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument(
                "reduced density on an empty vertex set".into(),
            ));
        }
        self.thermal_state()?.reduce_to(keep)
    }

    pub fn distance(&self, v: SiteId, set: &[SiteId]) -> Result<usize> {
        self.tree.distance(v, set)
    }

    pub fn region_partition(&self, anchor: &[SiteId], ell: usize) -> Result<RegionPartition> {
        RegionPartition::new(&self.tree, anchor, ell)
    }
}

/// Split of the edges by distance from an anchor set `V′` at radius `ℓ`.
/// Every tree edge joins layers `d` and `d + 1`; `buffer` (B) holds the edges
/// leaving layer ℓ, `far` (L) those further out and `near` (R) those inside
/// the ball of radius ℓ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegionPartition {
    pub anchor: Vec<SiteId>,
    pub ell: usize,
    pub buffer: Vec<usize>,
    pub far: Vec<usize>,
    pub near: Vec<usize>,
}

impl RegionPartition {
    pub fn new(tree: &Tree, anchor: &[SiteId], ell: usize) -> Result<Self> {
        let dist = tree.distances_from(anchor)?;
        let mut part = Self {
            anchor: anchor.to_vec(),
            ell,
            buffer: Vec::new(),
            far: Vec::new(),
            near: Vec::new(),
        };
        for (i, &(u, v)) in tree.edges().iter().enumerate() {
            let inner = dist[&u].min(dist[&v]);
            match inner.cmp(&ell) {
                std::cmp::Ordering::Equal => part.buffer.push(i),
                std::cmp::Ordering::Greater => part.far.push(i),
                std::cmp::Ordering::Less => part.near.push(i),
            }
        }
        Ok(part)
    }
}

/// Random tree on vertices `1..=n`: vertex `k` attaches to a uniformly chosen earlier vertex.
pub fn random_tree(n: usize, local_dim: usize, seed: u64) -> Result<Tree> {
    let layout = SiteLayout::with_cap((1..=n).map(|s| (s, local_dim)), usize::MAX)?;
    let mut r = rng(seed);
    let edges: Vec<_> = (2..=n).map(|k| (r.random_range(1..k), k)).collect();
    Tree::new(layout, &edges)
}
