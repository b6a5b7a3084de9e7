//! Static kd-tree over a point set with exact k-nearest, fixed-radius and
//! weighted (power) nearest queries.
//!
//! All results are ordered by `(squared distance, index)`, so ties always
//! resolve to the lowest index, matching a linear scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn key_cmp(&self, o: &Neighbor) -> Ordering {
        self.dist2
            .total_cmp(&o.dist2)
            .then(self.index.cmp(&o.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key_cmp(o)
    }
}

#[derive(Clone, Debug)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    start: u32,
    end: u32,
    /// Child node indices; `u32::MAX` for leaves.
    left: u32,
    right: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == u32::MAX
    }
}

#[inline]
pub(crate) fn box_dist2(x: Vec3, lo: Vec3, hi: Vec3) -> f64 {
    let d = |v: f64, l: f64, h: f64| {
        if v < l {
            l - v
        } else if v > h {
            v - h
        } else {
            0.0
        }
    };
    let (a, b, c) = (d(x.x, lo.x, hi.x), d(x.y, lo.y, hi.y), d(x.z, lo.z, hi.z));
    a * a + b * b + c * c
}

/// Spatial index over a fixed point set.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    perm: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            perm: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let first = self.points[self.perm[start] as usize];
        let (lo, hi) = self.perm[start..end]
            .iter()
            .map(|&i| self.points[i as usize])
            .fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            left: u32::MAX,
            right: u32::MAX,
        });
        if end - start > LEAF_SIZE {
            let ext = hi - lo;
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let mid = start + (end - start) / 2;
            let points = &self.points;
            self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                points[a as usize][axis]
                    .total_cmp(&points[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = self.build(start, mid);
            let right = self.build(mid, end);
            let node = &mut self.nodes[id as usize];
            node.left = left;
            node.right = right;
        }
        id
    }

    /// The `k` nearest points to `x`, sorted by `(distance, index)`.
    pub fn nearest_k(&self, x: Vec3, k: usize) -> Vec<Neighbor> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        let mut stack: Vec<u32> = vec![0];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if heap.len() == k && box_dist2(x, node.lo, node.hi) > heap.peek().unwrap().dist2 {
                continue;
            }
            if node.is_leaf() {
                for &i in &self.perm[node.start as usize..node.end as usize] {
                    let cand = Neighbor {
                        index: i as usize,
                        dist2: self.points[i as usize].distance_squared(x),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = box_dist2(x, self.nodes[l as usize].lo, self.nodes[l as usize].hi);
                let dr = box_dist2(x, self.nodes[r as usize].lo, self.nodes[r as usize].hi);
                // visit the closer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        heap.into_sorted_vec()
    }

    /// Indices of all points with `‖p − x‖ <= radius`, in ascending index order.
    pub fn within_radius(&self, x: Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.is_empty() || !(radius >= 0.0) {
            return out;
        }
        let r2 = radius * radius;
        let mut stack: Vec<u32> = vec![0];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if box_dist2(x, node.lo, node.hi) > r2 {
                continue;
            }
            if node.is_leaf() {
                for &i in &self.perm[node.start as usize..node.end as usize] {
                    if self.points[i as usize].distance_squared(x) <= r2 {
                        out.push(i as usize);
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Index answering `argmin_p ‖x − p‖² + ω_p` over a weighted point set.
#[derive(Clone, Debug)]
pub struct PowerIndex {
    tree: KdTree,
    weights: Vec<f64>,
    node_min_weight: Vec<f64>,
}

impl PowerIndex {
    pub fn new(points: &[Vec3], weights: &[f64]) -> Self {
        assert_eq!(points.len(), weights.len());
        let tree = KdTree::new(points);
        let node_min_weight = tree
            .nodes
            .iter()
            .map(|n| {
                tree.perm[n.start as usize..n.end as usize]
                    .iter()
                    .map(|&i| weights[i as usize])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        PowerIndex {
            tree,
            weights: weights.to_vec(),
            node_min_weight,
        }
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    /// Calls `visit` on every point in a node not rejected by `prune`, which
    /// receives the node's bounding box and smallest weight.
    pub fn visit<P, V>(&self, mut prune: P, mut visit: V)
    where
        P: FnMut(Vec3, Vec3, f64) -> bool,
        V: FnMut(usize),
    {
        if self.tree.is_empty() {
            return;
        }
        let mut stack: Vec<u32> = vec![0];
        while let Some(n) = stack.pop() {
            let node = &self.tree.nodes[n as usize];
            if prune(node.lo, node.hi, self.node_min_weight[n as usize]) {
                continue;
            }
            if node.is_leaf() {
                for &i in &self.tree.perm[node.start as usize..node.end as usize] {
                    visit(i as usize);
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
    }

    /// `(min_p ‖x − p‖² + ω_p, argmin)` with ties to the lowest index;
    /// `None` for an empty set.
    pub fn nearest(&self, x: Vec3) -> Option<(f64, usize)> {
        if self.tree.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack: Vec<(f64, u32)> = vec![(0.0, 0)];
        while let Some((bound, n)) = stack.pop() {
            if bound > best.0 {
                continue;
            }
            let node = &self.tree.nodes[n as usize];
            if node.is_leaf() {
                for &i in &self.tree.perm[node.start as usize..node.end as usize] {
                    let i = i as usize;
                    let v = self.tree.points[i].distance_squared(x) + self.weights[i];
                    if v < best.0 || (v == best.0 && i < best.1) {
                        best = (v, i);
                    }
                }
            } else {
                let lb = |c: u32| {
                    let cn = &self.tree.nodes[c as usize];
                    box_dist2(x, cn.lo, cn.hi) + self.node_min_weight[c as usize]
                };
                let (l, r) = (node.left, node.right);
                let (bl, br) = (lb(l), lb(r));
                if bl <= br {
                    stack.push((br, r));
                    stack.push((bl, l));
                } else {
                    stack.push((bl, l));
                    stack.push((br, r));
                }
            }
        }
        Some(best)
    }
}
