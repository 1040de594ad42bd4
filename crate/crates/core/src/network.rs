//! Multi-layer network storage, partitions and structural diagnostics.
//!
//! Layers are stored as sorted adjacency lists (CSR). All indices in the
//! library API are zero-based; one-based ids only appear in file formats and
//! on the command line.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One undirected, unweighted layer in compressed sparse row form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Layer {
    /// Builds a layer from an edge list. Edges are symmetrized, duplicates
    /// collapse to a single entry and self-loops are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                continue;
            }
            adj[i].push(j);
            adj[j].push(i);
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self::from_adjacency_unchecked(adj))
    }

    /// Wraps raw adjacency lists without enforcing symmetry or the absence of
    /// self-loops. Rows are sorted. Use [`MultiLayerNetwork::validate`] to
    /// inspect the result.
    pub fn from_adjacency_unchecked(mut adj: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut neighbors = Vec::with_capacity(adj.iter().map(Vec::len).sum());
        offsets.push(0);
        for row in &mut adj {
            row.sort_unstable();
            neighbors.extend_from_slice(row);
            offsets.push(neighbors.len());
        }
        Layer { offsets, neighbors }
    }

    pub fn empty(n: usize) -> Self {
        Layer {
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Number of undirected edges (half the stored nonzeros).
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Upper-triangular edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for &j in self.neighbors(i) {
                m[(i, j)] = 1.0;
            }
        }
        m
    }
}

/// `T` binary symmetric layers over a shared set of `n` nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiLayerNetwork {
    n: usize,
    layers: Vec<Layer>,
    node_names: Option<Vec<String>>,
}

impl MultiLayerNetwork {
    pub fn new(n: usize, layers: Vec<Layer>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("network needs at least one node".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one layer".into()));
        }
        if let Some((l, layer)) = layers.iter().enumerate().find(|(_, ly)| ly.node_count() != n) {
            return Err(Error::InvalidParameter(format!(
                "layer {l} has {} nodes, expected {n}",
                layer.node_count()
            )));
        }
        Ok(MultiLayerNetwork {
            n,
            layers,
            node_names: None,
        })
    }

    /// Convenience constructor from per-layer edge lists.
    pub fn from_edge_lists(n: usize, layers: &[Vec<(usize, usize)>]) -> Result<Self> {
        let layers = layers
            .iter()
            .map(|edges| Layer::from_edges(n, edges.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, layers)
    }

    pub fn with_node_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "{} node names supplied for {} nodes",
                names.len(),
                self.n
            )));
        }
        self.node_names = Some(names);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> Result<&Layer> {
        self.layers.get(l).ok_or(Error::LayerOutOfRange {
            layer: l,
            layers: self.layers.len(),
        })
    }

    pub fn node_names(&self) -> Option<&[String]> {
        self.node_names.as_deref()
    }

    /// External name of node `i`, falling back to its zero-based index.
    pub fn node_label(&self, i: usize) -> String {
        match &self.node_names {
            Some(names) => names[i].clone(),
            None => i.to_string(),
        }
    }

    pub fn degree_vector(&self, l: usize) -> Result<DegreeVector> {
        let layer = self.layer(l)?;
        Ok(DegreeVector {
            layer: l,
            degrees: (0..self.n).map(|i| layer.degree(i)).collect(),
        })
    }

    /// Applies a node relabeling: node `i` of `self` becomes node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let layers = self
            .layers
            .iter()
            .map(|layer| Layer::from_edges(self.n, layer.edges().map(|(i, j)| (perm[i], perm[j]))))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(self.n, layers)?;
        if let Some(names) = &self.node_names {
            let mut permuted = vec![String::new(); self.n];
            for (i, name) in names.iter().enumerate() {
                permuted[perm[i]] = name.clone();
            }
            out.node_names = Some(permuted);
        }
        Ok(out)
    }

    /// Structural checks; an empty result means the network is well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for i in 0..self.n {
                let row = layer.neighbors(i);
                for (pos, &j) in row.iter().enumerate() {
                    if pos > 0 && row[pos - 1] == j {
                        out.push(Diagnostic::DuplicateEntry { layer: l, i, j });
                        continue;
                    }
                    if j == i {
                        out.push(Diagnostic::SelfLoop { layer: l, node: i });
                    } else if j >= self.n || !layer.has_edge(j, i) {
                        out.push(Diagnostic::Asymmetric { layer: l, i, j });
                    }
                }
            }
        }
        for i in 0..self.n {
            if self.layers.iter().all(|layer| layer.degree(i) == 0) {
                out.push(Diagnostic::IsolatedNode { node: i });
            }
        }
        out
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidParameter(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
    }
    Ok(())
}

/// Finding reported by [`MultiLayerNetwork::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    /// `A(i, j) = 1` but `A(j, i) = 0`.
    Asymmetric { layer: usize, i: usize, j: usize },
    SelfLoop { layer: usize, node: usize },
    DuplicateEntry { layer: usize, i: usize, j: usize },
    /// Zero degree in every layer; the unregularized Laplacian is undefined here.
    IsolatedNode { node: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Asymmetric { layer, i, j } => {
                write!(f, "layer {layer}: symmetry violation at ({i}, {j})")
            }
            Diagnostic::SelfLoop { layer, node } => write!(f, "layer {layer}: self-loop at node {node}"),
            Diagnostic::DuplicateEntry { layer, i, j } => {
                write!(f, "layer {layer}: duplicate entry ({i}, {j})")
            }
            Diagnostic::IsolatedNode { node } => write!(f, "isolated node {node} (zero degree in every layer)"),
        }
    }
}

/// Per-layer node degrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeVector {
    pub layer: usize,
    pub degrees: Vec<usize>,
}

impl DegreeVector {
    /// Number of edges in the layer, `sum(d) / 2`.
    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }
}

/// Hard assignment of `n` nodes to `k` communities, labels `0..k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} outside 0..{k}"
            )));
        }
        Ok(Partition { labels, k })
    }

    /// Uses `max(label) + 1` as the community count.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        Partition { labels, k }
    }

    /// Parses external one-based labels (`1..=K`).
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        let zero = labels
            .iter()
            .map(|&c| {
                c.checked_sub(1)
                    .ok_or_else(|| Error::InvalidParameter("one-based label 0".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(zero))
    }

    /// Every node in one community.
    pub fn single(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            k: 1,
        }
    }

    /// Contiguous blocks of the given sizes, in order.
    pub fn from_sizes(sizes: &[usize]) -> Self {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
            .collect();
        Partition {
            labels,
            k: sizes.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|&c| c + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.labels {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == c).collect()
    }

    /// Same relabeling convention as [`MultiLayerNetwork::permute`].
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.labels.len())?;
        let mut labels = vec![0; self.labels.len()];
        for (i, &c) in self.labels.iter().enumerate() {
            labels[perm[i]] = c;
        }
        Ok(Partition { labels, k: self.k })
    }

    /// Relabels communities in order of first appearance, so two partitions
    /// that agree up to a label permutation compare equal afterwards.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&c| {
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect();
        Partition { labels, k: next }
    }

    pub fn same_up_to_permutation(&self, other: &Partition) -> bool {
        self.canonical().labels == other.canonical().labels
    }

    pub fn membership(&self) -> MembershipMatrix {
        MembershipMatrix::from_partition(self)
    }
}

/// One-hot `n x K` membership matrix `Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipMatrix(DMatrix<f64>);

impl MembershipMatrix {
    pub fn from_partition(p: &Partition) -> Self {
        let mut z = DMatrix::zeros(p.len(), p.k());
        for (i, &c) in p.labels().iter().enumerate() {
            z[(i, c)] = 1.0;
        }
        MembershipMatrix(z)
    }

    pub fn from_matrix(z: DMatrix<f64>) -> Result<Self> {
        for (i, row) in z.row_iter().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::InvalidParameter(format!("row {i} is not one-hot")));
            }
        }
        Ok(MembershipMatrix(z))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn to_partition(&self) -> Partition {
        let labels = self
            .0
            .row_iter()
            .map(|row| row.iter().position(|&v| v == 1.0).unwrap_or(0))
            .collect();
        Partition {
            labels,
            k: self.0.ncols(),
        }
    }

    pub fn column_sums(&self) -> Vec<usize> {
        self.0.column_iter().map(|c| c.sum() as usize).collect()
    }
}
