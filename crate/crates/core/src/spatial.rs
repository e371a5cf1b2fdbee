//! Static 3-d tree for exact nearest-neighbour queries.

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Exact nearest neighbour over a fixed point set. Ties are broken toward the
/// lower input index so queries are reproducible.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }

    fn better_than(&self, other: &Neighbor) -> bool {
        self.dist_sq < other.dist_sq || (self.dist_sq == other.dist_sq && self.index < other.index)
    }
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
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

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &self.order[start..end];
        let (lo, hi) = slice.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), &i| (lo.inf(&self.points[i]), hi.sup(&self.points[i])),
        );
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn nearest(&self, q: &Vec3) -> Option<Neighbor> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Neighbor { index: usize::MAX, dist_sq: f64::INFINITY };
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor { index: i, dist_sq: (self.points[i] - q).norm_squared() };
                    if cand.better_than(best) {
                        *best = cand;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let d = q[axis] - value;
                let (near, far) = if d < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equal-distance candidates reachable for tie-breaking.
                if d * d <= best.dist_sq {
                    self.search(far, q, best);
                }
            }
        }
    }

    /// Indices of all points within `radius` of `q`, ascending.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.collect(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn collect(&self, node: usize, q: &Vec3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => out.extend(
                self.order[start..end]
                    .iter()
                    .copied()
                    .filter(|&i| (self.points[i] - q).norm_squared() <= r2),
            ),
            Node::Split { axis, value, left, right } => {
                let d = q[axis] - value;
                if d <= 0.0 || d * d <= r2 {
                    self.collect(left, q, r2, out);
                }
                if d >= 0.0 || d * d <= r2 {
                    self.collect(right, q, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn brute(points: &[Vec3], q: &Vec3) -> Neighbor {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| Neighbor { index: i, dist_sq: (p - q).norm_squared() })
            .fold(Neighbor { index: usize::MAX, dist_sq: f64::INFINITY }, |b, c| {
                if c.better_than(&b) { c } else { b }
            })
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = seeded(5);
        for n in [1usize, 7, 64, 500] {
            let pts: Vec<Vec3> = (0..n)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
                .collect();
            let tree = KdTree::new(&pts);
            for _ in 0..200 {
                let q = Vec3::new(rng.random(), rng.random(), rng.random()) * 1.4;
                assert_eq!(tree.nearest(&q).unwrap(), brute(&pts, &q));
                let r = 0.2;
                let want: Vec<usize> = (0..n).filter(|&i| (pts[i] - q).norm() <= r).collect();
                assert_eq!(tree.within(&q, r), want);
            }
        }
    }

    #[test]
    fn duplicates_prefer_lowest_index() {
        let pts = vec![Vec3::x(); 20];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&Vec3::zeros()).unwrap().index, 0);
        assert!(KdTree::new(&[]).nearest(&Vec3::zeros()).is_none());
    }
}
