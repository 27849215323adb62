//! Exact k-d tree over a fixed point set.
//!
//! Queries return the same index as a linear scan over squared L2
//! distances, including the lowest-index tie-break.

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    dim: usize,
    /// Points in tree order, flattened.
    points: Vec<f64>,
    /// Original index of each point in tree order.
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

impl KdTree {
    /// `points` is a flat `count * dim` buffer.
    pub(crate) fn build(points: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim));
        let count = points.len() / dim;
        let mut order: Vec<usize> = (0..count).collect();
        let mut nodes = Vec::new();
        if count > 0 {
            build_node(points, dim, &mut order, 0, &mut nodes);
        }
        let mut flat = Vec::with_capacity(points.len());
        for &i in &order {
            flat.extend_from_slice(&points[i * dim..(i + 1) * dim]);
        }
        KdTree {
            dim,
            points: flat,
            ids: order,
            nodes,
        }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.ids.len()
    }

    /// Index and squared distance of the closest point. Panics on an empty tree.
    pub(crate) fn nearest(&self, query: &[f64]) -> (usize, f64) {
        debug_assert_eq!(query.len(), self.dim);
        assert!(!self.ids.is_empty(), "nearest() on empty tree");
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        best
    }

    fn search(&self, node: usize, query: &[f64], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let p = &self.points[slot * self.dim..(slot + 1) * self.dim];
                    let d2 = squared_distance(query, p);
                    let id = self.ids[slot];
                    if d2 < best.1 || (d2 == best.1 && id < best.0) {
                        *best = (id, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, best);
                // Ties on the plane must be visited: a lower index could sit there.
                if diff * diff <= best.1 {
                    self.search(far, query, best);
                }
            }
        }
    }
}

fn build_node(
    points: &[f64],
    dim: usize,
    order: &mut [usize],
    offset: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }

    let coord = |i: usize, axis: usize| points[i * dim + axis];
    let axis = (0..dim)
        .map(|axis| {
            let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let c = coord(i, axis);
                (lo.min(c), hi.max(c))
            });
            (axis, hi - lo)
        })
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;

    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| coord(a, axis).total_cmp(&coord(b, axis)));
    let value = coord(order[mid], axis);

    // Placeholder, patched once both children exist.
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(points, dim, lo, offset, nodes);
    let right = build_node(points, dim, hi, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}
