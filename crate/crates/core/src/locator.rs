//! Point location: k-d tree seeded edge hopping with linear-search fallback.
//!
//! The containment test of an element is the face-hyperplane test: a point
//! is inside element `K` when for every face with centroid `c` and outward
//! unit normal `n`, `(p - c) · n <= tol_K` with `tol_K = 1e-10 · diam(K)`.
//! Points on shared faces resolve to the lowest containing element index.

use std::collections::VecDeque;

use crate::mesh::Mesh;
use crate::Vec3;

/// Relative containment tolerance (multiplied by the element diameter).
pub const CONTAINMENT_TOLERANCE: f64 = 1e-10;

/// Balanced k-d tree over a point set, split axis cycling x, y, z.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Point indices in implicit tree order: the median of each range is
    /// the node, left and right halves are the subtrees.
    order: Vec<usize>,
}

impl KdTree {
    pub fn new(points: Vec<Vec3>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build_range(&points, &mut order, 0);
        Self { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }

    /// Maximum depth of the implicit tree (a single node has depth 1).
    pub fn depth(&self) -> usize {
        fn depth(n: usize) -> usize {
            if n == 0 {
                0
            } else {
                let mid = n / 2;
                1 + depth(mid).max(depth(n - mid - 1))
            }
        }
        depth(self.order.len())
    }

    /// Index of the nearest point; ties go to the lower index.
    pub fn nearest(&self, q: &Vec3) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(q, 0, self.order.len(), 0, &mut best);
        Some(best.1)
    }

    fn search(&self, q: &Vec3, lo: usize, hi: usize, axis: usize, best: &mut (f64, usize)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        let d2 = (p - q).norm_squared();
        if d2 < best.0 || (d2 == best.0 && idx < best.1) {
            *best = (d2, idx);
        }
        let diff = q[axis] - p[axis];
        let next = (axis + 1) % 3;
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, first.0, first.1, next, best);
        // `<=` so that equidistant points with lower index are still visited
        if diff * diff <= best.0 {
            self.search(q, second.0, second.1, next, best);
        }
    }
}

fn build_range(points: &[Vec3], order: &mut [usize], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    let next = (axis + 1) % 3;
    build_range(points, left, next);
    build_range(points, &mut right[1..], next);
}

/// Outcome of a point location query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocateResult {
    Found(usize),
    OutsideDomain,
    /// The walk exceeded its hop budget; carries the last visited element.
    NonConvexAbort(usize),
}

impl LocateResult {
    pub fn element(self) -> Option<usize> {
        match self {
            LocateResult::Found(e) => Some(e),
            _ => None,
        }
    }
}

/// Face planes of every element, precomputed for the hyperplane tests.
#[derive(Debug, Clone)]
struct FacePlanes {
    faces: usize,
    centers: Vec<Vec3>,
    normals: Vec<Vec3>,
    tolerance: Vec<f64>,
}

impl FacePlanes {
    fn new(mesh: &Mesh) -> Self {
        let nf = mesh.kind().face_count();
        let ne = mesh.element_count();
        let mut centers = Vec::with_capacity(ne * nf);
        let mut normals = Vec::with_capacity(ne * nf);
        let mut tolerance = Vec::with_capacity(ne);
        for e in 0..ne {
            for f in 0..nf {
                let (c, n) = mesh.face_plane(e, f);
                centers.push(c);
                normals.push(n);
            }
            tolerance.push(CONTAINMENT_TOLERANCE * mesh.element_diameter(e));
        }
        Self {
            faces: nf,
            centers,
            normals,
            tolerance,
        }
    }

    #[inline]
    fn distance(&self, e: usize, f: usize, p: &Vec3) -> f64 {
        let k = e * self.faces + f;
        (p - self.centers[k]).dot(&self.normals[k])
    }

    fn contains(&self, e: usize, p: &Vec3) -> bool {
        (0..self.faces).all(|f| self.distance(e, f, p) <= self.tolerance[e])
    }
}

/// Element locator for one mesh.
#[derive(Debug, Clone)]
pub struct ElementLocator {
    tree: KdTree,
    planes: FacePlanes,
    neighbors: Vec<Option<usize>>,
}

/// Statistics of a located query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocateTrace {
    pub result: LocateResult,
    pub seed: usize,
    pub hops: usize,
    pub fell_back: bool,
}

impl ElementLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let centers = (0..mesh.element_count()).map(|e| mesh.element_center(e)).collect();
        let nf = mesh.kind().face_count();
        let neighbors = (0..mesh.element_count())
            .flat_map(|e| (0..nf).map(move |f| (e, f)))
            .map(|(e, f)| mesh.neighbor(e, f))
            .collect();
        Self {
            tree: KdTree::new(centers),
            planes: FacePlanes::new(mesh),
            neighbors,
        }
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    pub fn element_count(&self) -> usize {
        self.tree.len()
    }

    /// Element whose center is nearest to `p`.
    pub fn nearest_center(&self, p: &Vec3) -> usize {
        self.tree.nearest(p).expect("non-empty mesh")
    }

    /// Hyperplane containment test with the element's tolerance.
    pub fn contains(&self, e: usize, p: &Vec3) -> bool {
        self.planes.contains(e, p)
    }

    /// Face-normal guided walk from `start` towards `p`.
    pub fn edge_hop(&self, start: usize, p: &Vec3) -> (LocateResult, usize) {
        let nf = self.planes.faces;
        let budget = 4 * self.element_count();
        let mut current = start;
        let mut hops = 0;
        'walk: loop {
            for f in 0..nf {
                if self.planes.distance(current, f, p) > self.planes.tolerance[current] {
                    match self.neighbors[current * nf + f] {
                        Some(next) => {
                            hops += 1;
                            if hops > budget {
                                return (LocateResult::NonConvexAbort(current), hops);
                            }
                            current = next;
                            continue 'walk;
                        }
                        None => return (LocateResult::OutsideDomain, hops),
                    }
                }
            }
            return (LocateResult::Found(self.lowest_containing(current, p)), hops);
        }
    }

    /// Among the elements touching `p` through faces `p` lies on, the
    /// lowest index that contains `p`.
    fn lowest_containing(&self, found: usize, p: &Vec3) -> usize {
        let nf = self.planes.faces;
        let on_face = |e: usize, f: usize| self.planes.distance(e, f, p).abs() <= self.planes.tolerance[e];
        if !(0..nf).any(|f| on_face(found, f)) {
            return found;
        }
        let mut best = found;
        let mut seen = vec![found];
        let mut queue = VecDeque::from([found]);
        while let Some(e) = queue.pop_front() {
            for f in 0..nf {
                if !on_face(e, f) {
                    continue;
                }
                if let Some(n) = self.neighbors[e * nf + f] {
                    if !seen.contains(&n) && self.planes.contains(n, p) {
                        seen.push(n);
                        best = best.min(n);
                        queue.push_back(n);
                    }
                }
            }
        }
        best
    }

    /// Exhaustive search in element order.
    pub fn linear_search(&self, p: &Vec3) -> LocateResult {
        (0..self.element_count())
            .find(|&e| self.planes.contains(e, p))
            .map_or(LocateResult::OutsideDomain, LocateResult::Found)
    }

    /// Locate `p`: nearest-center seed, edge hopping, and a linear search
    /// whenever the walk cannot conclude (hop budget exhausted or a boundary
    /// face reached, which on non-convex meshes does not prove the point is
    /// outside).
    pub fn find_element(&self, p: &Vec3) -> LocateResult {
        self.find_element_traced(p).result
    }

    pub fn find_element_traced(&self, p: &Vec3) -> LocateTrace {
        let seed = self.nearest_center(p);
        let (result, hops) = self.edge_hop(seed, p);
        match result {
            LocateResult::Found(_) => LocateTrace {
                result,
                seed,
                hops,
                fell_back: false,
            },
            _ => LocateTrace {
                result: self.linear_search(p),
                seed,
                hops,
                fell_back: true,
            },
        }
    }
}

/// Search structures shared by source models and sensor placement: the
/// element locator, a k-d tree over vertices and the edge adjacency.
#[derive(Debug, Clone)]
pub struct MeshIndex {
    pub locator: ElementLocator,
    pub vertex_tree: KdTree,
    pub adjacency: Vec<Vec<usize>>,
}

impl MeshIndex {
    pub fn new(mesh: &Mesh) -> Self {
        Self {
            locator: ElementLocator::new(mesh),
            vertex_tree: KdTree::new(mesh.vertices().to_vec()),
            adjacency: mesh.vertex_adjacency(),
        }
    }

    pub fn nearest_vertex(&self, p: &Vec3) -> usize {
        self.vertex_tree.nearest(p).expect("non-empty mesh")
    }
}
