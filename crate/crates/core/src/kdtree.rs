//! KD trees built from predicted query frequencies, and classic baselines.
//!
//! The learned tree keeps every point whose probability exceeds `1/n²` in an
//! upper tree where each split divides the remaining query mass as evenly as
//! possible, on whichever axis does that best. Points live at the leaves of
//! that tree. Dataset points below the cutoff are routed to the leaf region
//! they fall in and stored there in a small balanced KD tree (a *bucket*)
//! hanging beneath the leaf.
//!
//! ```text
//!            split(axis 1, <= 4)
//!            /                 \
//!     leaf (2,3)          split(axis 0, <= 7)
//!        |                  /          \
//!     bucket (5,1)     leaf (6,9)   leaf (8,5)
//!      /     \
//!  (1,0)   (9,2)
//! ```
//!
//! Depth is the number of edges from the root to the node where a query
//! stops: the node holding the point, or the last node on the search path.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KdError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("points need at least one coordinate")]
    ZeroDimension,
    #[error("no split separates the points (all coordinates identical)")]
    NoValidSplit,
    #[error("need at least two points to split")]
    TooFewPoints,
    #[error("probability {value} of point {index} outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("point file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A grid point with its predicted query probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub coords: Vec<i64>,
    pub prob: f64,
    /// Dataset member, as opposed to a frequently queried absent point.
    pub is_data: bool,
}

impl WeightedPoint {
    pub fn new(coords: Vec<i64>, prob: f64, is_data: bool) -> Self {
        Self { coords, prob, is_data }
    }

    pub fn data(coords: Vec<i64>, prob: f64) -> Self {
        Self::new(coords, prob, true)
    }
}

/// Outcome of one lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KdQueryResult {
    pub found: bool,
    pub depth: u32,
}

/// Split chosen by [`best_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub axis: usize,
    pub value: i64,
    /// Probability mass with `coords[axis] <= value`.
    pub left_mass: f64,
}

/// How the classic baseline stores points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassicLayout {
    /// Median splits on cycling axes with every point in a leaf, the same
    /// node shape as the learned tree.
    #[default]
    Leaf,
    /// The median point is stored at the split node itself.
    PointAtNode,
}

pub type NodeId = u32;

#[derive(Debug, Clone)]
enum Node {
    Split {
        axis: usize,
        value: i64,
        /// fraction of the node's mass sent left
        balance: f64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        point: usize,
        bucket: Option<NodeId>,
    },
    /// Node of a median-split subtree; ties on the axis coordinate are
    /// ordered by the full coordinate vector.
    Bucket {
        point: usize,
        axis: usize,
        left: Option<NodeId>,
        right: Option<NodeId>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeKind {
    Learned,
    Classic(ClassicLayout),
}

/// KD tree over integer points; see the module docs for the layout.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    /// deduplicated points, probabilities renormalized
    points: Vec<WeightedPoint>,
    nodes: Vec<Node>,
    root: NodeId,
    n: usize,
    cutoff: f64,
    kind: TreeKind,
    learned_count: usize,
    bucketed_count: usize,
}

/// The learned tree under the name used in the paper's pseudocode.
pub type LearnedKdTree = KdTree;

const TIE_TOLERANCE: f64 = 1e-12;

fn lex_cmp(a: &[i64], b: &[i64], axis: usize) -> Ordering {
    a[axis].cmp(&b[axis]).then_with(|| a.cmp(b))
}

fn check_points(points: &[WeightedPoint]) -> Result<usize, KdError> {
    let dim = points.first().ok_or(KdError::EmptyDataset)?.coords.len();
    if dim == 0 {
        return Err(KdError::ZeroDimension);
    }
    for (index, p) in points.iter().enumerate() {
        if p.coords.len() != dim {
            return Err(KdError::DimensionMismatch { expected: dim, got: p.coords.len() });
        }
        if !(0.0..=1.0).contains(&p.prob) {
            return Err(KdError::InvalidProbability { index, value: p.prob });
        }
    }
    Ok(dim)
}

/// Merges points with equal coordinates: probabilities add up and the point
/// counts as data if any copy was. Output is in lexicographic order.
pub fn dedup_points(points: impl IntoIterator<Item = WeightedPoint>) -> Vec<WeightedPoint> {
    let mut merged: BTreeMap<Vec<i64>, (f64, bool)> = BTreeMap::new();
    for p in points {
        let e = merged.entry(p.coords).or_insert((0.0, false));
        e.0 += p.prob;
        e.1 |= p.is_data;
    }
    merged
        .into_iter()
        .map(|(coords, (prob, is_data))| WeightedPoint { coords, prob, is_data })
        .collect()
}

fn split_over(points: &[WeightedPoint], idx: &[usize], dim: usize) -> Option<SplitChoice> {
    if idx.len() < 2 {
        return None;
    }
    let mass: f64 = idx.iter().map(|&i| points[i].prob).sum();
    // all-zero mass: balance point counts instead
    let by_count = !(mass > 0.0);
    let total = if by_count { idx.len() as f64 } else { mass };
    let weight = |i: usize| if by_count { 1.0 } else { points[i].prob };

    let mut order = idx.to_vec();
    let mut best: Option<(f64, SplitChoice)> = None;
    for axis in 0..dim {
        order.sort_unstable_by_key(|&i| points[i].coords[axis]);
        let mut acc = 0.0;
        let mut left_mass = 0.0;
        for w in order.windows(2) {
            acc += weight(w[0]);
            left_mass += points[w[0]].prob;
            let value = points[w[0]].coords[axis];
            if points[w[1]].coords[axis] == value {
                continue;
            }
            let dev = (acc / total - 0.5).abs();
            if best.is_none_or(|(d, _)| dev < d - TIE_TOLERANCE) {
                best = Some((dev, SplitChoice { axis, value, left_mass }));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// The axis and value whose `<=` side holds closest to half of the mass.
///
/// Only candidates leaving both sides non-empty are considered; ties go to
/// the lower axis, then the lower value. When every point has probability 0
/// the split balances point counts instead.
pub fn best_split(points: &[WeightedPoint]) -> Result<SplitChoice, KdError> {
    let dim = check_points(points)?;
    if points.len() < 2 {
        return Err(KdError::TooFewPoints);
    }
    let idx: Vec<usize> = (0..points.len()).collect();
    split_over(points, &idx, dim).ok_or(KdError::NoValidSplit)
}

struct Builder<'a> {
    points: &'a [WeightedPoint],
    dim: usize,
    nodes: Vec<Node>,
}

/// Where a freshly built node gets linked.
#[derive(Clone, Copy)]
enum Slot {
    Root,
    SplitLeft(NodeId),
    SplitRight(NodeId),
    BucketLeft(NodeId),
    BucketRight(NodeId),
    LeafBucket(NodeId),
}

impl Builder<'_> {
    fn push(&mut self, node: Node, slot: Slot, root: &mut Option<NodeId>) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(node);
        match slot {
            Slot::Root => {}
            Slot::SplitLeft(p) | Slot::SplitRight(p) => {
                if let Node::Split { left, right, .. } = &mut self.nodes[p as usize] {
                    if matches!(slot, Slot::SplitLeft(_)) {
                        *left = id;
                    } else {
                        *right = id;
                    }
                }
            }
            Slot::BucketLeft(p) | Slot::BucketRight(p) => {
                if let Node::Bucket { left, right, .. } = &mut self.nodes[p as usize] {
                    if matches!(slot, Slot::BucketLeft(_)) {
                        *left = Some(id);
                    } else {
                        *right = Some(id);
                    }
                }
            }
            Slot::LeafBucket(p) => {
                if let Node::Leaf { bucket, .. } = &mut self.nodes[p as usize] {
                    *bucket = Some(id);
                }
            }
        }
        // the first node pushed is the root of the subtree being built
        root.get_or_insert(id);
        id
    }

    /// BuildNode: probability-balanced splits down to single points.
    /// Points must have distinct coordinates.
    fn learned(&mut self, idx: Vec<usize>, slot: Slot) -> NodeId {
        let mut root = None;
        let mut stack = vec![(idx, slot)];
        while let Some((idx, slot)) = stack.pop() {
            match split_over(self.points, &idx, self.dim) {
                None => {
                    self.push(Node::Leaf { point: idx[0], bucket: None }, slot, &mut root);
                }
                Some(s) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        idx.iter().partition(|&&i| self.points[i].coords[s.axis] <= s.value);
                    let mass: f64 = idx.iter().map(|&i| self.points[i].prob).sum();
                    let balance =
                        if mass > 0.0 { s.left_mass / mass } else { l.len() as f64 / idx.len() as f64 };
                    let node = Node::Split { axis: s.axis, value: s.value, balance, left: 0, right: 0 };
                    let id = self.push(node, slot, &mut root);
                    stack.push((r, Slot::SplitRight(id)));
                    stack.push((l, Slot::SplitLeft(id)));
                }
            }
        }
        root.expect("non-empty input")
    }

    /// Count-median splits on axes cycling with depth, points at the leaves.
    fn classic_leaf(&mut self, idx: Vec<usize>) -> NodeId {
        let mut root = None;
        let mut stack = vec![(idx, 0usize, Slot::Root)];
        while let Some((mut idx, depth, slot)) = stack.pop() {
            let choice = (0..self.dim).find_map(|k| {
                let axis = (depth + k) % self.dim;
                idx.sort_unstable_by(|&a, &b| lex_cmp(&self.points[a].coords, &self.points[b].coords, axis));
                let m = idx.len();
                // split positions c (left = idx[..c]) closest to m/2 first
                let mid = m / 2;
                (0..m).flat_map(|off| [mid + off, mid.wrapping_sub(off)]).find_map(|c| {
                    if c == 0 || c >= m {
                        return None;
                    }
                    let v = self.points[idx[c - 1]].coords[axis];
                    (self.points[idx[c]].coords[axis] > v).then_some((axis, v, c))
                })
            });
            match choice {
                None => {
                    self.push(Node::Leaf { point: idx[0], bucket: None }, slot, &mut root);
                }
                Some((axis, value, c)) => {
                    let balance = c as f64 / idx.len() as f64;
                    let node = Node::Split { axis, value, balance, left: 0, right: 0 };
                    let id = self.push(node, slot, &mut root);
                    let right = idx.split_off(c);
                    stack.push((right, depth + 1, Slot::SplitRight(id)));
                    stack.push((idx, depth + 1, Slot::SplitLeft(id)));
                }
            }
        }
        root.expect("non-empty input")
    }

    /// Balanced tree with the median point stored at each node.
    fn median_tree(&mut self, idx: Vec<usize>, slot: Slot) -> NodeId {
        let mut root = None;
        let mut stack = vec![(idx, 0usize, slot)];
        while let Some((mut idx, axis, slot)) = stack.pop() {
            idx.sort_unstable_by(|&a, &b| lex_cmp(&self.points[a].coords, &self.points[b].coords, axis));
            let mid = idx.len() / 2;
            let right = idx.split_off(mid + 1);
            let point = idx.pop().expect("non-empty");
            let node = Node::Bucket { point, axis, left: None, right: None };
            let id = self.push(node, slot, &mut root);
            let next = (axis + 1) % self.dim;
            if !right.is_empty() {
                stack.push((right, next, Slot::BucketRight(id)));
            }
            if !idx.is_empty() {
                stack.push((idx, next, Slot::BucketLeft(id)));
            }
        }
        root.expect("non-empty input")
    }
}

impl KdTree {
    /// Learned tree (Algorithm Build): points above the `1/n²` cutoff, `n`
    /// being the dataset size, form the probability-balanced upper tree;
    /// data points at or below it go into per-leaf buckets and rare
    /// negative queries are dropped. Probabilities of `dataset ∪ queries`
    /// are renormalized first; coordinate duplicates are merged.
    pub fn build(dataset: &[WeightedPoint], queries: &[WeightedPoint]) -> Result<Self, KdError> {
        let dim = check_points(dataset)?;
        if !queries.is_empty() {
            let qdim = check_points(queries)?;
            if qdim != dim {
                return Err(KdError::DimensionMismatch { expected: dim, got: qdim });
            }
        }
        let n = dataset.len();
        let cutoff = 1.0 / (n as f64 * n as f64);
        let mut points = dedup_points(dataset.iter().chain(queries).cloned());
        let total: f64 = points.iter().map(|p| p.prob).sum();
        if total > 0.0 {
            for p in &mut points {
                p.prob /= total;
            }
        }
        // rare negative queries are not stored at all
        points.retain(|p| p.is_data || p.prob > cutoff);

        let (high, low): (Vec<usize>, Vec<usize>) = (0..points.len()).partition(|&i| points[i].prob > cutoff);
        let mut b = Builder { points: &points, dim, nodes: Vec::new() };
        let root = if high.is_empty() {
            b.median_tree(low.clone(), Slot::Root)
        } else {
            let root = b.learned(high.clone(), Slot::Root);
            let mut per_leaf: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
            for &i in &low {
                per_leaf.entry(route(&b.nodes, root, &points[i].coords)).or_default().push(i);
            }
            for (leaf, members) in per_leaf {
                b.median_tree(members, Slot::LeafBucket(leaf));
            }
            root
        };
        let nodes = b.nodes;
        Ok(Self {
            dim,
            learned_count: high.len(),
            bucketed_count: if high.is_empty() { points.len() } else { low.len() },
            points,
            nodes,
            root,
            n,
            cutoff,
            kind: TreeKind::Learned,
        })
    }

    /// Probability-balanced tree over all `points` with no cutoff
    /// (Algorithm BuildNode on its own).
    pub fn build_node(points: &[WeightedPoint]) -> Result<Self, KdError> {
        let dim = check_points(points)?;
        let points = dedup_points(points.iter().cloned());
        let mut b = Builder { points: &points, dim, nodes: Vec::new() };
        let root = b.learned((0..points.len()).collect(), Slot::Root);
        let nodes = b.nodes;
        let count = points.len();
        Ok(Self {
            dim,
            n: points.iter().filter(|p| p.is_data).count(),
            points,
            nodes,
            root,
            cutoff: 0.0,
            kind: TreeKind::Learned,
            learned_count: count,
            bucketed_count: 0,
        })
    }

    /// Balanced baseline ignoring probabilities, in the default
    /// [`ClassicLayout::Leaf`] layout.
    pub fn classic_build(dataset: &[WeightedPoint]) -> Result<Self, KdError> {
        Self::classic_build_with_layout(dataset, ClassicLayout::default())
    }

    pub fn classic_build_with_layout(dataset: &[WeightedPoint], layout: ClassicLayout) -> Result<Self, KdError> {
        let dim = check_points(dataset)?;
        let n = dataset.len();
        let points: Vec<WeightedPoint> = dedup_points(dataset.iter().cloned())
            .into_iter()
            .map(|p| WeightedPoint { is_data: true, ..p })
            .collect();
        let mut b = Builder { points: &points, dim, nodes: Vec::new() };
        let idx: Vec<usize> = (0..points.len()).collect();
        let root = match layout {
            ClassicLayout::Leaf => b.classic_leaf(idx),
            ClassicLayout::PointAtNode => b.median_tree(idx, Slot::Root),
        };
        let nodes = b.nodes;
        let count = points.len();
        Ok(Self {
            dim,
            points,
            nodes,
            root,
            n,
            cutoff: 0.0,
            kind: TreeKind::Classic(layout),
            learned_count: 0,
            bucketed_count: count,
        })
    }

    /// Exact-match lookup.
    pub fn query(&self, coords: &[i64]) -> Result<KdQueryResult, KdError> {
        if coords.len() != self.dim {
            return Err(KdError::DimensionMismatch { expected: self.dim, got: coords.len() });
        }
        let mut depth = 0u32;
        let mut at = self.root;
        loop {
            match &self.nodes[at as usize] {
                Node::Split { axis, value, left, right, .. } => {
                    at = if coords[*axis] <= *value { *left } else { *right };
                    depth += 1;
                }
                Node::Leaf { point, bucket } => {
                    let p = &self.points[*point];
                    if p.coords == coords {
                        return Ok(KdQueryResult { found: p.is_data, depth });
                    }
                    match bucket {
                        Some(b) => {
                            at = *b;
                            depth += 1;
                        }
                        None => return Ok(KdQueryResult { found: false, depth }),
                    }
                }
                Node::Bucket { point, axis, left, right } => {
                    let p = &self.points[*point];
                    let next = match lex_cmp(coords, &p.coords, *axis) {
                        Ordering::Equal => return Ok(KdQueryResult { found: p.is_data, depth }),
                        Ordering::Less => left,
                        Ordering::Greater => right,
                    };
                    match next {
                        Some(c) => {
                            at = *c;
                            depth += 1;
                        }
                        None => return Ok(KdQueryResult { found: false, depth }),
                    }
                }
            }
        }
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        self.query(coords).is_ok_and(|r| r.found)
    }

    /// Mean lookup depth over `trace`; 0 for an empty trace.
    pub fn avg_query_depth<C: AsRef<[i64]>>(&self, trace: &[C]) -> Result<f64, KdError> {
        if trace.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0u64;
        for q in trace {
            sum += self.query(q.as_ref())?.depth as u64;
        }
        Ok(sum as f64 / trace.len() as f64)
    }

    /// Largest node depth.
    pub fn height(&self) -> usize {
        let mut height = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((at, d)) = stack.pop() {
            height = height.max(d);
            stack.extend(self.children(at).into_iter().map(|c| (c, d + 1)));
        }
        height
    }

    /// Height of the probability-balanced upper portion (0 when the tree
    /// consists of buckets only).
    pub fn learned_height(&self) -> usize {
        let mut height = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((at, d)) = stack.pop() {
            match &self.nodes[at as usize] {
                Node::Split { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
                Node::Leaf { .. } => height = height.max(d),
                Node::Bucket { .. } => {}
            }
        }
        height
    }

    fn children(&self, at: NodeId) -> Vec<NodeId> {
        match &self.nodes[at as usize] {
            Node::Split { left, right, .. } => vec![*left, *right],
            Node::Leaf { bucket, .. } => bucket.iter().copied().collect(),
            Node::Bucket { left, right, .. } => left.iter().chain(right).copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dataset size the tree was built from (before merging duplicates).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Frequency cutoff `1/n²` (0 for trees built without one).
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    /// Stored points after merging duplicates and renormalizing.
    pub fn points(&self) -> &[WeightedPoint] {
        &self.points
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of points in the probability-balanced upper portion.
    pub fn learned_len(&self) -> usize {
        self.learned_count
    }

    /// Number of points stored in median-split subtrees.
    pub fn bucketed_len(&self) -> usize {
        self.bucketed_count
    }

    /// Sizes of the buckets hanging below learned leaves.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { bucket: Some(b), .. } => Some(self.subtree_points(*b).len()),
                _ => None,
            })
            .collect()
    }

    fn subtree_points(&self, from: NodeId) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![from];
        while let Some(at) = stack.pop() {
            match &self.nodes[at as usize] {
                Node::Leaf { point, .. } | Node::Bucket { point, .. } => out.push(*point),
                Node::Split { .. } => {}
            }
            stack.extend(self.children(at));
        }
        out
    }

    /// Fraction of the mass sent left by each split on the search path of
    /// `coords`, root first.
    pub fn split_path(&self, coords: &[i64]) -> Option<Vec<f64>> {
        if coords.len() != self.dim {
            return None;
        }
        let mut path = Vec::new();
        let mut at = self.root;
        loop {
            match &self.nodes[at as usize] {
                Node::Split { axis, value, balance, left, right } => {
                    path.push(*balance);
                    at = if coords[*axis] <= *value { *left } else { *right };
                }
                _ => return Some(path),
            }
        }
    }

    /// Checks the partition invariant at every split, that every stored
    /// point is reachable exactly once, and that the cutoff separates the
    /// upper portion from the buckets.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![0u32; self.points.len()];
        // (node, constraints as (axis, value, went_left), inside a bucket)
        type Frame = (NodeId, Vec<(usize, i64, bool)>, bool);
        let mut stack: Vec<Frame> = vec![(self.root, Vec::new(), false)];
        while let Some((at, path, in_bucket)) = stack.pop() {
            let holds = |p: usize| {
                path.iter().all(|&(axis, value, went_left)| (self.points[p].coords[axis] <= value) == went_left)
            };
            match &self.nodes[at as usize] {
                Node::Split { axis, value, left, right, .. } => {
                    let mut l = path.clone();
                    l.push((*axis, *value, true));
                    let mut r = path;
                    r.push((*axis, *value, false));
                    stack.push((*left, l, false));
                    stack.push((*right, r, false));
                }
                Node::Leaf { point, bucket } => {
                    seen[*point] += 1;
                    if !holds(*point) {
                        return Err(format!("leaf point {:?} violates a split", self.points[*point].coords));
                    }
                    if self.kind == TreeKind::Learned && self.cutoff > 0.0 && !(self.points[*point].prob > self.cutoff) {
                        return Err(format!("low-frequency point {:?} in upper tree", self.points[*point].coords));
                    }
                    if let Some(b) = bucket {
                        stack.push((*b, path, true));
                    }
                }
                Node::Bucket { point, left, right, axis } => {
                    seen[*point] += 1;
                    let p = &self.points[*point];
                    if !holds(*point) {
                        return Err(format!("bucket point {:?} violates a split", p.coords));
                    }
                    if in_bucket && (p.prob > self.cutoff || !p.is_data) {
                        return Err(format!("point {:?} should not be bucketed", p.coords));
                    }
                    for (child, want) in [(left, Ordering::Less), (right, Ordering::Greater)] {
                        if let Some(c) = child {
                            if self
                                .subtree_points(*c)
                                .iter()
                                .any(|&q| lex_cmp(&self.points[q].coords, &p.coords, *axis) != want)
                            {
                                return Err(format!("bucket order broken below {:?}", p.coords));
                            }
                            stack.push((*c, path.clone(), in_bucket));
                        }
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(format!("point {:?} stored {} times", self.points[i].coords, seen[i]));
        }
        Ok(())
    }
}

/// Leaf of the upper tree whose region contains `coords`.
fn route(nodes: &[Node], root: NodeId, coords: &[i64]) -> NodeId {
    let mut at = root;
    while let Node::Split { axis, value, left, right, .. } = &nodes[at as usize] {
        at = if coords[*axis] <= *value { *left } else { *right };
    }
    at
}

/// Writes `x1,...,xd,prob,is_data` with a header row.
pub fn write_points_csv<W: Write>(out: W, points: &[WeightedPoint]) -> Result<(), KdError> {
    let dim = points.first().map_or(0, |p| p.coords.len());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend(["prob".to_string(), "is_data".to_string()]);
    w.write_record(&header)?;
    for p in points {
        if p.coords.len() != dim {
            return Err(KdError::DimensionMismatch { expected: dim, got: p.coords.len() });
        }
        let mut row: Vec<String> = p.coords.iter().map(i64::to_string).collect();
        row.push(p.prob.to_string());
        row.push(p.is_data.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads the format of [`write_points_csv`]; `is_data` accepts
/// `true/false/1/0`.
pub fn read_points_csv<R: Read>(input: R) -> Result<Vec<WeightedPoint>, KdError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    let cols = header.len();
    if cols < 3 || &header[cols - 2] != "prob" || &header[cols - 1] != "is_data" {
        return Err(KdError::Format("header must be x1,...,xd,prob,is_data".into()));
    }
    let dim = cols - 2;
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| KdError::Format(format!("row {}: bad {what}", row + 2));
        let coords = (0..dim)
            .map(|i| rec[i].parse::<i64>().map_err(|_| bad("coordinate")))
            .collect::<Result<Vec<_>, _>>()?;
        let prob: f64 = rec[dim].parse().map_err(|_| bad("prob"))?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(KdError::InvalidProbability { index: row, value: prob });
        }
        let is_data = match &rec[dim + 1] {
            "true" | "1" => true,
            "false" | "0" => false,
            _ => return Err(bad("is_data")),
        };
        out.push(WeightedPoint { coords, prob, is_data });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn pts1(probs: &[f64]) -> Vec<WeightedPoint> {
        probs.iter().enumerate().map(|(i, &p)| WeightedPoint::data(vec![i as i64], p)).collect()
    }

    fn linear_scan(points: &[WeightedPoint], q: &[i64]) -> bool {
        points.iter().any(|p| p.is_data && p.coords == q)
    }

    fn random_points(m: usize, dim: usize, span: i64, seed: u64) -> Vec<WeightedPoint> {
        let mut rng = rng_from_seed(seed);
        let raw: Vec<WeightedPoint> = (0..m)
            .map(|_| {
                WeightedPoint::data(
                    (0..dim).map(|_| rng.random_range(1..=span)).collect(),
                    rng.random::<f64>().powi(4),
                )
            })
            .collect();
        let total: f64 = raw.iter().map(|p| p.prob).sum();
        raw.into_iter().map(|p| WeightedPoint { prob: p.prob / total, ..p }).collect()
    }

    #[test]
    fn best_split_examples() {
        let pts = vec![
            WeightedPoint::data(vec![0, 0], 0.5),
            WeightedPoint::data(vec![1, 0], 0.25),
            WeightedPoint::data(vec![2, 1], 0.25),
        ];
        let s = best_split(&pts).unwrap();
        assert_eq!((s.axis, s.value, s.left_mass), (0, 0, 0.5));

        let pts = vec![WeightedPoint::data(vec![5, 3], 0.5), WeightedPoint::data(vec![2, 9], 0.5)];
        let s = best_split(&pts).unwrap();
        assert_eq!((s.axis, s.value, s.left_mass), (0, 2, 0.5));

        let same = vec![WeightedPoint::data(vec![1, 1], 0.5), WeightedPoint::data(vec![1, 1], 0.5)];
        assert!(matches!(best_split(&same), Err(KdError::NoValidSplit)));
        assert!(matches!(best_split(&same[..1]), Err(KdError::TooFewPoints)));
        assert!(matches!(best_split(&[]), Err(KdError::EmptyDataset)));
    }

    #[test]
    fn best_split_zero_mass_balances_counts() {
        let s = best_split(&pts1(&[0.0; 4])).unwrap();
        assert_eq!((s.axis, s.value), (0, 1));
    }

    #[test]
    fn build_node_examples() {
        let t = KdTree::build_node(&pts1(&[1.0])).unwrap();
        assert_eq!(t.height(), 0);
        assert_eq!(t.query(&[0]).unwrap(), KdQueryResult { found: true, depth: 0 });

        let pts = pts1(&[0.5, 0.25, 0.125, 0.125]);
        assert_eq!(best_split(&pts).unwrap().value, 0);
        let t = KdTree::build_node(&pts).unwrap();
        let depths: Vec<u32> = (0..4).map(|i| t.query(&[i]).unwrap().depth).collect();
        assert_eq!(depths, vec![1, 2, 3, 3]);

        for k in 0..8 {
            let t = KdTree::build_node(&pts1(&vec![1.0 / (1 << k) as f64; 1 << k])).unwrap();
            assert_eq!(t.height(), k);
            for i in 0..(1i64 << k) {
                assert_eq!(t.query(&[i]).unwrap().depth as usize, k);
            }
        }
    }

    #[test]
    fn build_without_low_frequency_points_equals_build_node() {
        let pts = random_points(40, 2, 1000, 1);
        let pts: Vec<WeightedPoint> =
            pts.into_iter().map(|p| WeightedPoint { prob: p.prob * 0.5 + 0.5 / 40.0, ..p }).collect();
        let a = KdTree::build(&pts, &[]).unwrap();
        let b = KdTree::build_node(&pts).unwrap();
        assert!(a.bucket_sizes().is_empty());
        for p in &pts {
            assert_eq!(a.query(&p.coords).unwrap(), b.query(&p.coords).unwrap());
        }
        assert_eq!(a.height(), b.height());
    }

    #[test]
    fn cutoff_sends_rare_point_to_bucket() {
        let pts = vec![
            WeightedPoint::data(vec![1], 0.33),
            WeightedPoint::data(vec![2], 0.33),
            WeightedPoint::data(vec![3], 0.33),
            WeightedPoint::data(vec![4], 0.01),
        ];
        let t = KdTree::build(&pts, &[]).unwrap();
        assert_eq!(t.cutoff(), 1.0 / 16.0);
        assert_eq!(t.learned_len(), 3);
        assert_eq!(t.bucketed_len(), 1);
        assert_eq!(t.bucket_sizes(), vec![1]);
        t.check_invariants().unwrap();
        let r = t.query(&[4]).unwrap();
        assert!(r.found);
        // leaf of 3 plus one edge into the bucket
        assert_eq!(r.depth, t.query(&[3]).unwrap().depth + 1);
    }

    #[test]
    fn all_low_frequency_gives_balanced_tree() {
        let mut pts = pts1(&[0.0; 15]);
        pts[0].prob = 0.0;
        let t = KdTree::build(&pts, &[]).unwrap();
        assert_eq!(t.learned_len(), 0);
        assert_eq!(t.height(), 3);
        t.check_invariants().unwrap();
        for p in &pts {
            assert!(t.contains(&p.coords));
        }
    }

    #[test]
    fn bucket_depth_bound() {
        // one hot point and m cold ones, all cold points share one leaf region
        for m in [1usize, 2, 3, 7, 8, 100, 1000] {
            let mut pts = vec![WeightedPoint::data(vec![0, 0], 1.0)];
            pts.extend((1..=m as i64).map(|i| WeightedPoint::data(vec![i, i * 7 % 13], 0.0)));
            let t = KdTree::build(&pts, &[]).unwrap();
            t.check_invariants().unwrap();
            assert_eq!(t.bucket_sizes(), vec![m]);
            let extra = (m as f64).log2().ceil() as u32 + 1;
            for p in &pts[1..] {
                let r = t.query(&p.coords).unwrap();
                assert!(r.found);
                assert!(r.depth <= t.learned_height() as u32 + extra, "m={m} depth={}", r.depth);
            }
        }
    }

    #[test]
    fn negative_queries_are_rejected_early() {
        let data: Vec<WeightedPoint> = [5, 6, 8, 9].iter().map(|&c| WeightedPoint::data(vec![c, c], 0.125)).collect();
        let queries = vec![WeightedPoint::new(vec![1, 1], 0.5, false)];
        let t = KdTree::build(&data, &queries).unwrap();
        t.check_invariants().unwrap();
        let r = t.query(&[1, 1]).unwrap();
        assert!(!r.found);
        assert_eq!(r.depth, 1);
        assert!(t.contains(&[5, 5]) && t.contains(&[9, 9]));
        // rare negative queries are dropped
        let rare = vec![WeightedPoint::new(vec![1, 1], 1e-9, false)];
        let t = KdTree::build(&data, &rare).unwrap();
        assert_eq!(t.points().len(), 4);
    }

    #[test]
    fn duplicates_are_merged() {
        let pts = vec![
            WeightedPoint::data(vec![1], 0.25),
            WeightedPoint::data(vec![1], 0.25),
            WeightedPoint::data(vec![2], 0.5),
        ];
        let t = KdTree::build(&pts, &[]).unwrap();
        assert_eq!(t.points().len(), 2);
        assert_eq!(t.height(), 1);
    }

    #[test]
    fn query_dimension_mismatch() {
        let t = KdTree::build(&[WeightedPoint::data(vec![1, 2], 1.0)], &[]).unwrap();
        assert!(matches!(t.query(&[1]), Err(KdError::DimensionMismatch { expected: 2, got: 1 })));
        assert!(matches!(
            KdTree::build(&[WeightedPoint::data(vec![1, 2], 0.5), WeightedPoint::data(vec![1], 0.5)], &[]),
            Err(KdError::DimensionMismatch { .. })
        ));
        assert!(matches!(KdTree::build(&[], &[]), Err(KdError::EmptyDataset)));
        assert!(matches!(KdTree::classic_build(&[]), Err(KdError::EmptyDataset)));
    }

    #[test]
    fn classic_layouts() {
        let pts = pts1(&[1.0 / 7.0; 7]);
        let node = KdTree::classic_build_with_layout(&pts, ClassicLayout::PointAtNode).unwrap();
        assert_eq!(node.height(), 2);
        let leaf = KdTree::classic_build(&pts).unwrap();
        assert_eq!(leaf.height(), 3);
        for t in [&node, &leaf] {
            t.check_invariants().unwrap();
            assert_eq!(t.height(), t.height());
            for p in &pts {
                assert!(t.contains(&p.coords));
            }
            assert!(!t.contains(&[7]));
        }
        let one = pts1(&[1.0]);
        assert_eq!(KdTree::classic_build(&one).unwrap().height(), 0);
        assert_eq!(KdTree::classic_build_with_layout(&one, ClassicLayout::PointAtNode).unwrap().height(), 0);
        // 2^k points, leaf layout: every point at depth k
        let pts = random_points(256, 3, 1 << 20, 5);
        let t = KdTree::classic_build(&pts).unwrap();
        let uniq = dedup_points(pts.clone());
        if uniq.len() == 256 {
            let trace: Vec<Vec<i64>> = uniq.iter().map(|p| p.coords.clone()).collect();
            assert_eq!(t.avg_query_depth(&trace).unwrap(), 8.0);
        }
    }

    #[test]
    fn avg_query_depth_examples() {
        let t = KdTree::build_node(&pts1(&[0.125; 8])).unwrap();
        assert_eq!(t.avg_query_depth(&[vec![2i64]]).unwrap(), 3.0);
        assert_eq!(t.avg_query_depth::<Vec<i64>>(&[]).unwrap(), 0.0);
    }

    #[test]
    fn membership_matches_linear_scan() {
        let mut rng = rng_from_seed(77);
        for seed in 0..20 {
            let pts = random_points(256, 1 + (seed as usize % 3), 64, seed);
            let learned = KdTree::build(&pts, &[]).unwrap();
            let classic = KdTree::classic_build(&pts).unwrap();
            let node = KdTree::classic_build_with_layout(&pts, ClassicLayout::PointAtNode).unwrap();
            for t in [&learned, &classic, &node] {
                t.check_invariants().unwrap();
                for p in &pts {
                    assert!(t.query(&p.coords).unwrap().found);
                }
                for _ in 0..100 {
                    let q: Vec<i64> = (0..t.dim()).map(|_| rng.random_range(0..=70)).collect();
                    assert_eq!(t.contains(&q), linear_scan(&pts, &q), "{q:?}");
                }
            }
        }
    }

    /// Random dyadic distribution: leaf depths of a random full binary tree.
    fn dyadic(seed: u64, leaves: usize) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let mut depths = vec![0u32];
        while depths.len() < leaves {
            let i = rng.random_range(0..depths.len());
            let d = depths.swap_remove(i) + 1;
            depths.extend([d, d]);
        }
        let mut probs: Vec<f64> = depths.iter().map(|&d| 0.5f64.powi(d as i32)).collect();
        probs.sort_by(|a, b| b.total_cmp(a));
        probs
    }

    #[test]
    fn dyadic_depth_bound_is_exact() {
        for seed in 0..50 {
            let probs = dyadic(seed, 2 + seed as usize * 3);
            let pts = pts1(&probs);
            let t = KdTree::build_node(&pts).unwrap();
            for p in &pts {
                let d = t.query(&p.coords).unwrap().depth;
                assert!(d as f64 <= (1.0 / p.prob).log2().ceil(), "seed {seed}: p={} depth={d}", p.prob);
            }
        }
    }

    #[test]
    fn point_csv_round_trip() {
        let pts = vec![WeightedPoint::new(vec![1, -2, 3], 0.25, true), WeightedPoint::new(vec![4, 5, 6], 0.75, false)];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,x3,prob,is_data\n1,-2,3,0.25,true\n"));
        assert_eq!(read_points_csv(&buf[..]).unwrap(), pts);
        assert!(read_points_csv("x1,p\n1,2\n".as_bytes()).is_err());
        assert!(read_points_csv("x1,prob,is_data\n1,0.5,maybe\n".as_bytes()).is_err());
        assert!(read_points_csv("x1,prob,is_data\n3,0.5,1\n".as_bytes()).unwrap()[0].is_data);
    }

    #[test]
    fn tree_is_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<KdTree>();
    }

    proptest! {
        #[test]
        fn depth_bounded_by_mass_and_imbalance(
            probs in prop::collection::vec(0.001f64..1.0, 1..60),
            dim in 1usize..4,
            seed in any::<u64>(),
        ) {
            let mut rng = rng_from_seed(seed);
            let total: f64 = probs.iter().sum();
            let pts: Vec<WeightedPoint> = probs
                .iter()
                .map(|p| WeightedPoint::data((0..dim).map(|_| rng.random_range(0..1000)).collect(), p / total))
                .collect();
            let t = KdTree::build(&pts, &[]).unwrap();
            prop_assert!(t.check_invariants().is_ok());
            for p in t.points() {
                if p.prob <= t.cutoff() {
                    continue;
                }
                let path = t.split_path(&p.coords).unwrap();
                let s = path.iter().filter(|&&b| (b - 0.5).abs() > 1e-9).count();
                let d = t.query(&p.coords).unwrap().depth as usize;
                prop_assert_eq!(d, path.len());
                // every balanced split at least halves the mass above p; an
                // unbalanced one may not
                prop_assert!(d as f64 <= (1.0 / p.prob).log2().ceil() + s as f64 + 1e-9);
            }
        }

        #[test]
        fn partition_invariant_holds(
            coords in prop::collection::vec(prop::collection::vec(-50i64..50, 2), 1..120),
            weights in prop::collection::vec(0.0f64..1.0, 120),
        ) {
            let pts: Vec<WeightedPoint> = coords
                .iter()
                .zip(&weights)
                .map(|(c, &w)| WeightedPoint::data(c.clone(), w / 120.0))
                .collect();
            for t in [KdTree::build(&pts, &[]).unwrap(), KdTree::classic_build(&pts).unwrap()] {
                prop_assert!(t.check_invariants().is_ok(), "{:?}", t.check_invariants());
                for p in &pts {
                    prop_assert!(t.contains(&p.coords));
                }
                prop_assert!(t.height() < pts.len().max(1));
            }
        }
    }
}
