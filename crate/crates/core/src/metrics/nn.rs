use crate::geometry::Point;

const LEAF_SIZE: usize = 8;

/// Exact nearest-neighbor index: a kd-tree over a private copy of the points,
/// median-split on the axis of largest spread.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Point>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

impl NnIndex {
    pub fn new(points: &[Point]) -> NnIndex {
        let mut index = NnIndex {
            points: points.to_vec(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut self.points[start..end];
        let mut lo = slice[0];
        let mut hi = slice[0];
        for p in slice.iter() {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let axis = (hi - lo).imax();
        if hi[axis] == lo[axis] {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
        let value = slice[mid][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Squared distance to the nearest indexed point and that point, or
    /// `None` for an empty index.
    pub fn nearest(&self, q: &Point) -> Option<(f64, Point)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, self.points[0]);
        self.search(0, q, &mut best);
        Some(best)
    }

    /// Euclidean distance to the nearest indexed point.
    pub fn nearest_distance(&self, q: &Point) -> Option<f64> {
        self.nearest(q).map(|(d2, _)| d2.sqrt())
    }

    fn search(&self, node: usize, q: &Point, best: &mut (f64, Point)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for p in &self.points[start..end] {
                    let d2 = (p - q).norm_squared();
                    if d2 < best.0 {
                        *best = (d2, *p);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}
