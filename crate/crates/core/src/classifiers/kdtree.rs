//! Static kd-tree with exact k-nearest-neighbor queries, plus an insertable
//! index that keeps new points in a side buffer until a rebuild.
//!
//! Neighbors are ordered by `(squared distance, id)`, so ties resolve the
//! same way as a brute-force scan with the same key.

use std::cmp::Ordering;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u32, value: f64, left: u32, right: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KdTree {
    dim: usize,
    /// Points reordered so every leaf is a contiguous run.
    points: Vec<f64>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

/// Bounded sorted list of the best `k` candidates.
#[derive(Clone, Debug)]
pub(crate) struct Neighbors {
    k: usize,
    items: Vec<(f64, u32)>,
}

fn key_cmp(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl Neighbors {
    pub(crate) fn new(k: usize) -> Self {
        Neighbors {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn full(&self) -> bool {
        self.items.len() >= self.k
    }

    /// Squared radius a subtree must beat, `inf` until `k` candidates exist.
    fn bound(&self) -> f64 {
        if self.full() {
            self.items[self.k - 1].0
        } else {
            f64::INFINITY
        }
    }

    pub(crate) fn offer(&mut self, d2: f64, id: u32) {
        let cand = (d2, id);
        if self.full() && key_cmp(&cand, &self.items[self.k - 1]) != Ordering::Less {
            return;
        }
        let pos = self.items.partition_point(|x| key_cmp(x, &cand) == Ordering::Less);
        self.items.insert(pos, cand);
        self.items.truncate(self.k);
    }

    pub(crate) fn into_vec(self) -> Vec<(f64, u32)> {
        self.items
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

impl KdTree {
    /// Builds over `points` (row-major, `dim` columns) with ids `0..n`.
    pub fn build(points: &[f64], dim: usize) -> Self {
        let n = points.len().checked_div(dim).unwrap_or(0);
        let ids: Vec<u32> = (0..n as u32).collect();
        Self::build_with_ids(points, dim, ids)
    }

    fn build_with_ids(points: &[f64], dim: usize, mut ids: Vec<u32>) -> Self {
        assert!(dim > 0, "kd-tree needs at least one dimension");
        let mut nodes = Vec::new();
        if !ids.is_empty() {
            let mut order: Vec<u32> = (0..ids.len() as u32).collect();
            Self::build_node(points, dim, &mut order, 0, &mut nodes);
            let mut reordered = Vec::with_capacity(points.len());
            let mut new_ids = Vec::with_capacity(ids.len());
            for &o in &order {
                reordered.extend_from_slice(&points[o as usize * dim..(o as usize + 1) * dim]);
                new_ids.push(ids[o as usize]);
            }
            ids = new_ids;
            return KdTree {
                dim,
                points: reordered,
                ids,
                nodes,
            };
        }
        KdTree {
            dim,
            points: Vec::new(),
            ids,
            nodes,
        }
    }

    fn build_node(points: &[f64], dim: usize, order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
        let me = nodes.len() as u32;
        if order.len() <= LEAF_SIZE {
            nodes.push(Node::Leaf {
                start: offset as u32,
                end: (offset + order.len()) as u32,
            });
            return me;
        }
        // Split on the axis of largest spread at the median.
        let coord = |i: u32, a: usize| points[i as usize * dim + a];
        let mut axis = 0;
        let mut spread = -1.0;
        for a in 0..dim {
            let (lo, hi) = order
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(coord(i, a)), hi.max(coord(i, a))));
            if hi - lo > spread {
                spread = hi - lo;
                axis = a;
            }
        }
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&x, &y| coord(x, axis).total_cmp(&coord(y, axis)));
        let value = coord(order[mid], axis);
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let (lo, hi) = order.split_at_mut(mid);
        let left = Self::build_node(points, dim, lo, offset, nodes);
        let right = Self::build_node(points, dim, hi, offset + mid, nodes);
        nodes[me as usize] = Node::Split {
            axis: axis as u32,
            value,
            left,
            right,
        };
        me
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn search(&self, x: &[f64], best: &mut Neighbors) {
        if !self.nodes.is_empty() {
            self.search_node(0, x, best);
        }
    }

    fn search_node(&self, node: u32, x: &[f64], best: &mut Neighbors) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let p = &self.points[i * self.dim..(i + 1) * self.dim];
                    best.offer(squared_distance(x, p), self.ids[i]);
                }
            }
            Node::Split { axis, value, left, right } => {
                // Left holds coordinates <= value, right >= value.
                let diff = x[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search_node(near, x, best);
                if diff * diff <= best.bound() {
                    self.search_node(far, x, best);
                }
            }
        }
    }

    /// The `k` nearest `(squared distance, id)` pairs, closest first.
    pub fn knn(&self, x: &[f64], k: usize) -> Vec<(f64, u32)> {
        let mut best = Neighbors::new(k);
        self.search(x, &mut best);
        best.into_vec()
    }
}

/// kd-tree plus an unindexed insertion buffer; the tree is rebuilt over all
/// points once the buffer exceeds a tenth of the tree.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborIndex {
    dim: usize,
    /// All points by id, row-major.
    points: Vec<f64>,
    tree: KdTree,
    /// Ids not yet in the tree.
    pending: Vec<u32>,
}

impl NeighborIndex {
    pub fn new(points: Vec<f64>, dim: usize) -> Self {
        let tree = KdTree::build(&points, dim);
        NeighborIndex {
            dim,
            points,
            tree,
            pending: Vec::new(),
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self::new(Vec::new(), dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.points[id * self.dim..(id + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Appends a point and returns its id.
    pub fn insert(&mut self, x: &[f64]) -> u32 {
        assert_eq!(x.len(), self.dim);
        let id = self.len() as u32;
        self.points.extend_from_slice(x);
        self.pending.push(id);
        if self.pending.len() * 10 > self.tree.len() {
            self.rebuild();
        }
        id
    }

    pub fn rebuild(&mut self) {
        self.tree = KdTree::build(&self.points, self.dim);
        self.pending.clear();
    }

    pub fn knn(&self, x: &[f64], k: usize) -> Vec<(f64, u32)> {
        let mut best = Neighbors::new(k);
        self.tree.search(x, &mut best);
        for &id in &self.pending {
            best.offer(squared_distance(x, self.point(id as usize)), id);
        }
        best.into_vec()
    }

    pub fn nearest(&self, x: &[f64]) -> Option<(f64, u32)> {
        self.knn(x, 1).into_iter().next()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn brute(points: &[f64], dim: usize, x: &[f64], k: usize) -> Vec<(f64, u32)> {
        let mut all: Vec<(f64, u32)> = points
            .chunks_exact(dim)
            .enumerate()
            .map(|(i, p)| (squared_distance(x, p), i as u32))
            .collect();
        all.sort_by(key_cmp);
        all.truncate(k);
        all
    }

    #[test]
    fn matches_brute_force_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in 1..=6 {
            let pts: Vec<f64> = (0..2000 * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let tree = KdTree::build(&pts, dim);
            for _ in 0..200 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.5..3.5)).collect();
                for k in [1, 5, 8] {
                    assert_eq!(tree.knn(&x, k), brute(&pts, dim, &x, k));
                }
            }
        }
    }

    #[test]
    fn duplicate_points_tie_by_id() {
        let pts = vec![1.0, 1.0, 1.0, 1.0, 0.0, 2.0, 1.0, 1.0, 0.0];
        let tree = KdTree::build(&pts, 1);
        assert_eq!(tree.knn(&[1.0], 3), brute(&pts, 1, &[1.0], 3));
        let ids: Vec<u32> = tree.knn(&[1.0], 4).into_iter().map(|x| x.1).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn fewer_points_than_k() {
        let tree = KdTree::build(&[0.0, 1.0], 2);
        assert_eq!(tree.knn(&[0.0, 0.0], 5).len(), 1);
        assert!(KdTree::build(&[], 3).knn(&[0.0; 3], 2).is_empty());
    }

    #[test]
    fn index_insertions_rebuild_and_stay_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut idx = NeighborIndex::empty(3);
        let mut all = Vec::new();
        for i in 0..3000 {
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            all.extend_from_slice(&p);
            assert_eq!(idx.insert(&p), i);
            assert!(idx.pending() * 10 <= idx.tree.len().max(1) * 10);
            if i % 97 == 0 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert_eq!(idx.knn(&x, 4), brute(&all, 3, &x, 4));
            }
        }
        assert!(idx.pending() * 10 <= idx.tree.len());
    }

    proptest! {
        #[test]
        fn nearest_is_exact(pts in prop::collection::vec(-10.0f64..10.0, 2..200), qx in -12.0f64..12.0, qy in -12.0f64..12.0) {
            let n = pts.len() / 2 * 2;
            let pts = &pts[..n];
            let tree = KdTree::build(pts, 2);
            prop_assert_eq!(tree.knn(&[qx, qy], 3), brute(pts, 2, &[qx, qy], 3));
        }
    }
}
