//! Drawing trees, their traversal, the fitted tail, coverage and the
//! compatibility check.
//!
//! All coordinates here live in the working frame: the pattern has been
//! normalised and rotated so that the first symmetric component lies in the
//! cone of polar angles `[0, 2π/s)`.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::formation::Lattice;
use crate::geometry::{angle_0_2pi, dist_to_ray, mindist, smallest_enclosing_circle, Point};
use crate::symmetry::{cone_index, Pattern};

/// Longest tree edge produced by subdivision (slack under 1 − δ).
const MAX_LINK: f64 = 0.85;
/// Spacing of straight connectors, 0.8·(1 − δ).
const CONNECTOR_STEP: f64 = 0.72;
/// Extra clearance demanded on top of the required boundary margin.
const MARGIN_SLACK: f64 = 0.01;
/// Clearance between tail vertices and coordinates the tail must not cover.
const TAIL_CLEARANCE: f64 = 0.005;

/// Parameters that shape path construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub s: usize,
    pub delta: f64,
    pub hull_diam: f64,
    pub epsilon: f64,
}

impl PathParams {
    /// Required distance between path vertices and the cone boundary.
    pub fn required_margin(&self) -> f64 {
        if self.s == 1 {
            self.epsilon
        } else {
            self.epsilon.max(self.hull_diam * (2.0 * PI / self.s as f64).sin())
        }
    }

    pub fn reach(&self) -> f64 {
        1.0 - self.delta
    }

    pub fn root(&self) -> Point {
        Point::polar(2.0 * self.hull_diam, PI / self.s as f64)
    }
}

/// Geometry of the first cone.
#[derive(Clone, Copy, Debug)]
pub struct Cone {
    s: usize,
    upper: Point,
}

impl Cone {
    pub fn new(s: usize) -> Self {
        Cone { s, upper: Point::polar(1.0, 2.0 * PI / s as f64) }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.norm2() > 0.0 && cone_index(p, self.s).map(|i| i == 1).unwrap_or(false)
    }

    /// Distance to the cone boundary (negative outside). For a single cone
    /// the boundary is the origin.
    pub fn margin(&self, p: Point) -> f64 {
        if self.s == 1 {
            return p.norm();
        }
        if !self.contains(p) {
            return -1.0;
        }
        dist_to_ray(p, Point::E_X).min(dist_to_ray(p, self.upper))
    }

    /// Nearest point with margin at least `m`.
    pub fn project_safe(&self, p: Point, m: f64) -> Point {
        if self.s == 1 {
            return push_out(p, m);
        }
        let n1 = Point::new(0.0, 1.0);
        let n2 = Point::new(self.upper.y, -self.upper.x);
        let feasible = |q: Point| q.dot(n1) >= m - 1e-12 && q.dot(n2) >= m - 1e-12;
        let mut cands = vec![];
        if feasible(p) {
            return p;
        }
        let p1 = p + n1 * (m - p.dot(n1));
        if feasible(p1) {
            cands.push(p1);
        }
        let p2 = p + n2 * (m - p.dot(n2));
        if feasible(p2) {
            cands.push(p2);
        }
        if self.s >= 3 {
            // Apex: intersection of both offset lines, on the bisector.
            let half = PI / self.s as f64;
            cands.push(Point::polar(m / half.sin(), half));
        }
        cands
            .into_iter()
            .min_by(|a, b| a.dist(p).total_cmp(&b.dist(p)))
            .expect("non-empty candidate set")
    }
}

fn push_out(p: Point, m: f64) -> Point {
    if p.norm() >= m {
        p
    } else {
        p.unit().unwrap_or(Point::E_X) * m
    }
}

/// A rooted tree whose nodes cover a symmetric component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawingTree {
    pub nodes: Vec<Point>,
    /// Parent of each node; `None` only for the root (node 0).
    pub parent: Vec<Option<usize>>,
}

impl DrawingTree {
    pub fn root(&self) -> Point {
        self.nodes[0]
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![vec![]; self.nodes.len()];
        for (k, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                ch[*p].push(k);
            }
        }
        ch
    }
}

fn covered(p: Point, nodes: &[Point], reach: f64) -> bool {
    nodes.iter().any(|n| n.dist(p) <= reach)
}

/// Grows the drawing tree for the component `p1`.
pub fn build_drawing_tree(p1: &[Point], pp: &PathParams) -> Result<DrawingTree> {
    if p1.is_empty() {
        return domain("empty component");
    }
    if pp.delta > 0.2 {
        return domain("tree construction needs δ ≤ 0.2");
    }
    let cone = Cone::new(pp.s);
    let reach = pp.reach();
    let m_target = pp.required_margin() + MARGIN_SLACK;
    let root = pp.root();
    let rmax = p1.iter().map(|p| p.norm()).fold(0.0, f64::max) + 1.0;
    let mut nodes = vec![root];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut dirs = vec![Point::polar(4.0 * pp.delta, 2.0 * PI / pp.s as f64)];
    if pp.s > 1 {
        dirs.push(Point::polar(4.0 * pp.delta, 0.0));
    }
    for step in dirs {
        let mut prev = 0usize;
        let mut i = 1.0;
        loop {
            let q = root + step * i;
            if q.norm() > rmax {
                break;
            }
            nodes.push(q);
            parent.push(Some(prev));
            prev = nodes.len() - 1;
            i += 1.0;
        }
    }
    let mut uncovered: Vec<usize> = (0..p1.len()).filter(|&k| !covered(p1[k], &nodes, reach)).collect();
    while !uncovered.is_empty() {
        // Minimal (p, t) pair with deterministic tie-breaking.
        let mut best: Option<(f64, f64, f64, usize, usize)> = None;
        for &k in &uncovered {
            let p = p1[k];
            let key_a = angle_0_2pi(p.angle());
            let key_r = p.norm();
            for (t, n) in nodes.iter().enumerate() {
                let d = n.dist(p);
                let cand = (d, key_a, key_r, t, k);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (cand.0, cand.1, cand.2, cand.3).partial_cmp(&(b.0, b.1, b.2, b.3))
                            == Some(std::cmp::Ordering::Less)
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (_, _, _, t, k) = best.expect("uncovered point and nodes exist");
        let c = cone.project_safe(p1[k], m_target);
        if c.dist(p1[k]) > reach {
            return Err(Error::Domain("covering node cannot reach its coordinate".into()));
        }
        let from = nodes[t];
        let len = from.dist(c);
        let pieces = ((len / MAX_LINK).ceil() as usize).max(1);
        let mut prev = t;
        for j in 1..=pieces {
            let mut q = from.lerp(c, j as f64 / pieces as f64);
            if pp.s == 1 {
                q = push_out(q, m_target);
            }
            nodes.push(q);
            parent.push(Some(prev));
            prev = nodes.len() - 1;
        }
        uncovered.retain(|&k| !covered(p1[k], &nodes, reach));
    }
    Ok(prune(DrawingTree { nodes, parent }, p1, reach))
}

fn prune(tree: DrawingTree, p1: &[Point], reach: f64) -> DrawingTree {
    let n = tree.nodes.len();
    let mut alive = vec![true; n];
    let mut nchild = vec![0usize; n];
    for p in tree.parent.iter().flatten() {
        nchild[*p] += 1;
    }
    // A leaf is dropped when every coordinate it reaches is reached by
    // another surviving node.
    let reached: Vec<Vec<usize>> =
        tree.nodes.iter().map(|v| (0..p1.len()).filter(|&k| p1[k].dist(*v) <= reach).collect()).collect();
    let mut count = vec![0usize; p1.len()];
    for r in &reached {
        for &k in r {
            count[k] += 1;
        }
    }
    loop {
        let mut changed = false;
        for k in (1..n).rev() {
            if alive[k] && nchild[k] == 0 && reached[k].iter().all(|&q| count[q] > 1) {
                alive[k] = false;
                for &q in &reached[k] {
                    count[q] -= 1;
                }
                if let Some(p) = tree.parent[k] {
                    nchild[p] -= 1;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut remap = vec![usize::MAX; n];
    let mut nodes = vec![];
    let mut parent = vec![];
    for k in 0..n {
        if alive[k] {
            remap[k] = nodes.len();
            nodes.push(tree.nodes[k]);
            parent.push(tree.parent[k].map(|p| remap[p]));
        }
    }
    DrawingTree { nodes, parent }
}

/// Euler tour from the root, children in ascending (polar angle, radius)
/// order relative to their parent; returns after the last leaf are omitted.
pub fn traverse_tree(tree: &DrawingTree) -> Vec<Point> {
    let mut ch = tree.children();
    for (k, list) in ch.iter_mut().enumerate() {
        let base = tree.nodes[k];
        list.sort_by(|&a, &b| {
            let da = tree.nodes[a] - base;
            let db = tree.nodes[b] - base;
            angle_0_2pi(da.angle())
                .total_cmp(&angle_0_2pi(db.angle()))
                .then(da.norm().total_cmp(&db.norm()))
                .then(a.cmp(&b))
        });
    }
    let mut tour = vec![0usize];
    let mut last_leaf = 0usize;
    // Iterative DFS: (node, next child position).
    let mut stack = vec![(0usize, 0usize)];
    while let Some(&(node, next)) = stack.last() {
        if next < ch[node].len() {
            let c = ch[node][next];
            stack.last_mut().expect("non-empty stack").1 += 1;
            tour.push(c);
            if ch[c].is_empty() {
                last_leaf = tour.len() - 1;
            }
            stack.push((c, 0));
        } else {
            stack.pop();
            if let Some(&(p, _)) = stack.last() {
                tour.push(p);
            }
        }
    }
    tour.truncate(last_leaf + 1);
    tour.into_iter().map(|k| tree.nodes[k]).collect()
}

/// Output of the connected-triple search.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleRotation {
    pub theta: f64,
    pub triple: [usize; 3],
}

/// Minimal arc (start angle, extent) containing the polar angles of `pts`.
fn angular_extent(pts: &[Point]) -> (f64, f64) {
    let mut angs: Vec<f64> = pts.iter().map(|p| angle_0_2pi(p.angle())).collect();
    angs.sort_by(f64::total_cmp);
    let k = angs.len();
    let mut best = (angs[0], angs[k - 1] - angs[0]);
    for i in 1..k {
        // Arc starting at angs[i] wrapping to angs[i-1].
        let ext = angs[i - 1] + 2.0 * PI - angs[i];
        if ext < best.1 {
            best = (angs[i], ext);
        }
    }
    best
}

/// All connected triples that fit into one cone, most outward first,
/// each with the rotation moving it into the first cone.
pub fn connected_triple_candidates(p: &Pattern, s: usize) -> Vec<TripleRotation> {
    let pts = &p.points;
    let n = pts.len();
    let width = 2.0 * PI / s as f64;
    let adj: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| j != i && pts[i].dist(pts[j]) <= 1.0).collect()).collect();
    let mut seen = std::collections::HashSet::new();
    let mut out: Vec<(f64, f64, TripleRotation)> = vec![];
    for mid in 0..n {
        for (ai, &a) in adj[mid].iter().enumerate() {
            for &b in &adj[mid][ai + 1..] {
                let mut t = [a, mid, b];
                t.sort_unstable();
                if !seen.insert(t) {
                    continue;
                }
                let tp = [pts[t[0]], pts[t[1]], pts[t[2]]];
                if tp.iter().any(|q| q.norm() < 1e-9) && s > 1 {
                    continue;
                }
                let theta = if s == 1 {
                    0.0
                } else {
                    let (start, ext) = angular_extent(&tp);
                    if ext >= width - 1e-6 {
                        continue;
                    }
                    PI / s as f64 - (start + ext / 2.0)
                };
                let rmax = tp.iter().map(|q| q.norm()).fold(0.0, f64::max);
                let rsum: f64 = tp.iter().map(|q| q.norm()).sum();
                out.push((rmax, rsum, TripleRotation { theta, triple: t }));
            }
        }
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.triple.cmp(&b.2.triple)));
    out.into_iter().map(|x| x.2).collect()
}

/// A connected triple inside one cone together with the aligning rotation.
pub fn find_connected_triple_rotation(p: &Pattern, s: usize) -> Result<TripleRotation> {
    if p.len() < 3 * s {
        return domain("component has fewer than three coordinates");
    }
    connected_triple_candidates(p, s)
        .into_iter()
        .next()
        .ok_or_else(|| Error::Domain("no connected triple fits into one cone".into()))
}

/// The fitted end of a drawing path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    /// Vertices appended after the traversal, ending with `z_end`.
    pub vertices: Vec<Point>,
    pub z_start: Option<Point>,
    pub z_end: Point,
}

fn connector(from: Point, to: Point, out: &mut Vec<Point>) {
    let len = from.dist(to);
    if len < 1e-12 {
        return;
    }
    let k = ((len / CONNECTOR_STEP).ceil() as usize).max(1);
    for j in 1..=k {
        out.push(from.lerp(to, j as f64 / k as f64));
    }
}

/// Picks `z_end` plus the extra nodes around it for the triple `t3`.
fn place_end(p1: &[Point], t3: &[usize; 3], pp: &PathParams) -> Option<(Point, Vec<Point>)> {
    let cone = Cone::new(pp.s);
    let reach = pp.reach();
    let m_need = pp.required_margin() + MARGIN_SLACK / 2.0;
    let tri: Vec<Point> = t3.iter().map(|&k| p1[k]).collect();
    let others: Vec<Point> = (0..p1.len()).filter(|k| !t3.contains(k)).map(|k| p1[k]).collect();
    let center = smallest_enclosing_circle(&tri).ok()?.center;
    let free = |q: Point| others.iter().all(|o| o.dist(q) > reach + TAIL_CLEARANCE);
    let mut best: Option<(f64, Point, Vec<Point>)> = None;
    for ri in 0..=20 {
        let r = 0.05 * ri as f64;
        let na = if ri == 0 { 1 } else { 72 };
        for ai in 0..na {
            let z = center + Point::polar(r, ai as f64 * 2.0 * PI / 72.0);
            if tri.iter().any(|q| q.dist(z) > 1.0 - 1e-9) || !free(z) || cone.margin(z) <= m_need {
                continue;
            }
            let mut near = vec![];
            let mut ok = true;
            for q in &tri {
                if q.dist(z) > reach - 1e-9 {
                    let w = z + (*q - z).unit().expect("q far from z") * pp.delta;
                    if !free(w) || cone.margin(w) <= m_need {
                        ok = false;
                        break;
                    }
                    near.push(w);
                }
            }
            if !ok {
                continue;
            }
            let clear = others.iter().map(|o| o.dist(z) - reach).fold(0.5, f64::min).min(0.5);
            let score = clear + (cone.margin(z) - m_need).min(0.5);
            if best.as_ref().map_or(true, |b| score > b.0 + 1e-12) {
                best = Some((score, z, near));
            }
        }
    }
    best.map(|(_, z, w)| (z, w))
}

/// Builds the tail from the end of the traversal.
pub fn build_tail(p1: &[Point], t3: [usize; 3], tree_end: Point, pp: &PathParams) -> Result<Tail> {
    let cone = Cone::new(pp.s);
    let m_target = pp.required_margin() + MARGIN_SLACK;
    let (z_end, near) =
        place_end(p1, &t3, pp).ok_or_else(|| Error::Domain("no admissible end point for the tail".into()))?;
    let first_end = near.first().copied().unwrap_or(z_end);
    let mut vertices = vec![];
    let mut z_start = None;
    if p1.len() > 3 {
        let p4 = (0..p1.len())
            .filter(|k| !t3.contains(k))
            .min_by(|&a, &b| p1[a].dist(z_end).total_cmp(&p1[b].dist(z_end)).then(a.cmp(&b)))
            .map(|k| p1[k])
            .expect("fourth coordinate exists");
        let q0 = cone.project_safe(p4, m_target);
        let budget = 0.85 - q0.dist(p4);
        if budget <= 0.0 {
            return domain("fourth coordinate too far from the safe region");
        }
        let step = budget.min(q0.dist(first_end));
        let zs = q0 + (first_end - q0).unit().unwrap_or(Point::E_X) * step;
        connector(tree_end, zs, &mut vertices);
        connector(zs, first_end, &mut vertices);
        z_start = Some(zs);
    } else {
        connector(tree_end, first_end, &mut vertices);
    }
    vertices.extend(near.iter().skip(1).copied());
    if vertices.last().copied() != Some(z_end) {
        vertices.push(z_end);
    }
    if pp.s == 1 {
        for v in &mut vertices {
            *v = push_out(*v, m_target);
        }
    }
    Ok(Tail { vertices, z_start, z_end })
}

/// A vertex sequence covering a component, with its coverage and tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawingPath {
    pub vertices: Vec<Point>,
    pub delta: f64,
    /// Component indices covered by each vertex.
    pub coverage: Vec<Vec<usize>>,
    /// Index of the first tail vertex (0-based).
    pub tail_start: usize,
}

impl DrawingPath {
    pub fn hops(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn last(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn tail_len(&self) -> usize {
        self.vertices.len() - self.tail_start
    }

    pub fn tail_coverage(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.coverage[self.tail_start..].iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn in_tail(&self, i: usize) -> bool {
        i >= self.tail_start
    }
}

/// Assigns every coordinate to the last vertex within 1 − δ and finds the
/// longest suffix covering fewer than four coordinates.
pub fn coverage_and_tail(vertices: &[Point], p1: &[Point], delta: f64) -> Result<(Vec<Vec<usize>>, usize)> {
    let reach = 1.0 - delta;
    let mut coverage = vec![vec![]; vertices.len()];
    for (k, p) in p1.iter().enumerate() {
        let j = (0..vertices.len())
            .rev()
            .find(|&j| vertices[j].dist(*p) <= reach)
            .ok_or_else(|| Error::Domain(format!("coordinate {k} is covered by no vertex")))?;
        coverage[j].push(k);
    }
    let mut tail_start = vertices.len();
    let mut acc = 0usize;
    while tail_start > 0 && acc + coverage[tail_start - 1].len() < 4 {
        tail_start -= 1;
        acc += coverage[tail_start].len();
    }
    Ok((coverage, tail_start))
}

/// Outcome of the four compatibility properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub ok: bool,
    /// ε < mindist(P) and Δ ≤ δ.
    pub granularity: bool,
    /// Coverage-free stretches are no longer than |A⁴|.
    pub free_runs: bool,
    /// |tail| ≤ |A³|.
    pub tail_length: bool,
    /// Tail covers exactly three coordinates, all within 1 of the last vertex.
    pub tail_coverage: bool,
}

/// Checks the compatibility properties of a formation lattice and a path.
pub fn check_compatibility(
    lat: &Lattice,
    delta: f64,
    path: &DrawingPath,
    pattern: &[Point],
    p1: &[Point],
) -> CompatibilityReport {
    let eps = lat.params.epsilon;
    let md = mindist(pattern).unwrap_or(f64::INFINITY);
    let granularity = eps < md && lat.params.delta_diam <= delta;
    let a4 = lat.count_states(4).unwrap_or(0);
    let mut run = 0u128;
    let mut free_runs = true;
    for c in &path.coverage[..path.tail_start] {
        if c.is_empty() {
            run += 1;
            free_runs &= run <= a4;
        } else {
            run = 0;
        }
    }
    let tail_length = (path.tail_len() as u128) <= lat.count_states(3).unwrap_or(0);
    let vk = path.vertices[path.last()];
    let tc = path.tail_coverage();
    let tail_coverage = tc.len() == 3 && tc.iter().all(|&k| p1[k].dist(vk) <= 1.0);
    CompatibilityReport {
        ok: granularity && free_runs && tail_length && tail_coverage,
        granularity,
        free_runs,
        tail_length,
        tail_coverage,
    }
}

/// Formation size and state index a formation must have at vertex `i`.
pub fn path_state_label(path: &DrawingPath, i: usize) -> Result<(usize, u128)> {
    if i >= path.vertices.len() {
        return domain(format!("vertex {i} outside the path"));
    }
    if path.in_tail(i) {
        return Ok((3, (i - path.tail_start + 1) as u128));
    }
    let l: usize = path.coverage[i..].iter().map(|c| c.len()).sum();
    let mut g = 0u128;
    let mut j = i;
    while j > 0 && path.coverage[j - 1].is_empty() {
        g += 1;
        j -= 1;
    }
    Ok((l, g + 1))
}

/// A complete, verified path for the first component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    /// Rotation applied to the normalised pattern.
    pub theta: f64,
    /// Pattern indices forming the first component.
    pub component: Vec<usize>,
    /// Working-frame coordinates of the component, aligned with `component`.
    pub component_points: Vec<Point>,
    pub tree: DrawingTree,
    pub tail: Tail,
    pub path: DrawingPath,
    pub labels: Vec<(usize, u128)>,
    pub compatibility: CompatibilityReport,
    pub min_margin: f64,
}

impl PathPlan {
    /// Lookup from (size, state index) to the vertex carrying that label.
    pub fn label_index(&self) -> HashMap<(usize, u128), usize> {
        self.labels.iter().enumerate().map(|(i, &l)| (l, i)).collect()
    }

    /// The three coordinates placed by the endgame, as component indices.
    pub fn tail_triple(&self) -> [usize; 3] {
        let t = self.path.tail_coverage();
        [t[0], t[1], t[2]]
    }
}

/// Component indices of the first cone of `w` (already rotated).
fn first_component(w: &[Point], s: usize) -> Vec<usize> {
    if s == 1 {
        return (0..w.len()).collect();
    }
    (0..w.len()).filter(|&k| cone_index(w[k], s).map(|i| i == 1).unwrap_or(false)).collect()
}

/// Builds and verifies a drawing path for the first component of the
/// normalised pattern `p` (symmetricity `s`).
pub fn build_drawing_path(p: &Pattern, pp: &PathParams, lat: &Lattice) -> Result<PathPlan> {
    if pp.s * 2 >= p.len() {
        return domain("symmetricity too large for drawing formations");
    }
    let cands = connected_triple_candidates(p, pp.s);
    if cands.is_empty() {
        return domain("no connected triple fits into one cone");
    }
    let mut last_err = Error::Domain("no candidate tried".into());
    let mut trees: HashMap<u64, (Vec<usize>, Vec<Point>, DrawingTree, Vec<Point>)> = HashMap::new();
    for cand in cands.iter().take(400) {
        let key = cand.theta.to_bits();
        if !trees.contains_key(&key) {
            let w: Vec<Point> = p.points.iter().map(|q| q.rotate(cand.theta)).collect();
            let comp = first_component(&w, pp.s);
            let pts: Vec<Point> = comp.iter().map(|&k| w[k]).collect();
            let tree = if pts.len() == 3 {
                DrawingTree { nodes: vec![pp.root()], parent: vec![None] }
            } else {
                build_drawing_tree(&pts, pp)?
            };
            let trav = traverse_tree(&tree);
            trees.insert(key, (comp, pts, tree, trav));
        }
        let (comp, pts, tree, trav) = &trees[&key];
        let local: Vec<usize> = cand.triple.iter().filter_map(|t| comp.iter().position(|c| c == t)).collect();
        if local.len() != 3 {
            continue;
        }
        let t3 = [local[0], local[1], local[2]];
        match assemble(p, pp, lat, cand.theta, comp, pts, tree, trav, t3) {
            Ok(plan) => return Ok(plan),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    p: &Pattern,
    pp: &PathParams,
    lat: &Lattice,
    theta: f64,
    comp: &[usize],
    pts: &[Point],
    tree: &DrawingTree,
    trav: &[Point],
    t3: [usize; 3],
) -> Result<PathPlan> {
    let tail = build_tail(pts, t3, *trav.last().expect("non-empty traversal"), pp)?;
    let mut vertices = trav.to_vec();
    vertices.extend(&tail.vertices);
    let (coverage, tail_start) = coverage_and_tail(&vertices, pts, pp.delta)?;
    let path = DrawingPath { vertices, delta: pp.delta, coverage, tail_start };
    let w: Vec<Point> = p.points.iter().map(|q| q.rotate(theta)).collect();
    let compatibility = check_compatibility(lat, pp.delta, &path, &w, pts);
    if !compatibility.ok {
        return Err(Error::Domain(format!("incompatible path: {compatibility:?}")));
    }
    let reach = pp.reach();
    if let Some(k) = (1..path.vertices.len()).find(|&k| path.vertices[k].dist(path.vertices[k - 1]) > reach) {
        return Err(Error::Domain(format!("edge {k} longer than 1 - δ")));
    }
    let cone = Cone::new(pp.s);
    let min_margin = path.vertices.iter().map(|&v| cone.margin(v)).fold(f64::INFINITY, f64::min);
    if min_margin <= pp.required_margin() {
        return Err(Error::Domain(format!("boundary margin {min_margin} too small")));
    }
    if lat.len() < pts.len() + 2 {
        return domain("hull has too few locations for the component");
    }
    let mut labels = Vec::with_capacity(path.vertices.len());
    for i in 0..path.vertices.len() {
        let (l, idx) = path_state_label(&path, i)?;
        if idx > lat.count_states(l)? {
            return Err(Error::Domain(format!("vertex {i} needs state {idx} of size {l}")));
        }
        labels.push((l, idx));
    }
    Ok(PathPlan {
        theta,
        component: comp.to_vec(),
        component_points: pts.to_vec(),
        tree: tree.clone(),
        tail,
        path,
        labels,
        compatibility,
        min_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::FormationParams;
    use crate::symmetry::normalize;

    fn pp(s: usize) -> PathParams {
        PathParams { s, delta: 0.1, hull_diam: 0.1, epsilon: 0.002 }
    }

    #[test]
    fn single_point_tree_is_root() {
        let p = pp(1);
        let t = build_drawing_tree(&[p.root() + Point::new(0.3, 0.2)], &p).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(traverse_tree(&t).len(), 1);
    }

    #[test]
    fn star_traversal_order() {
        let tree = DrawingTree {
            nodes: vec![Point::ORIGIN, Point::new(0.0, 0.5), Point::new(0.5, 0.0), Point::new(-0.5, 0.0)],
            parent: vec![None, Some(0), Some(0), Some(0)],
        };
        let tour = traverse_tree(&tree);
        let expect = [0, 2, 0, 1, 0, 3].map(|k| tree.nodes[k]);
        assert_eq!(tour, expect.to_vec());
    }

    #[test]
    fn collinear_chain_edges() {
        let p = pp(1);
        let pts: Vec<Point> = (0..5).map(|k| Point::new(1.0 + 0.8 * k as f64, 1.5)).collect();
        let t = build_drawing_tree(&pts, &p).unwrap();
        let tour = traverse_tree(&t);
        for w in tour.windows(2) {
            assert!(w[0].dist(w[1]) <= 0.9);
        }
        for q in &pts {
            assert!(t.nodes.iter().any(|n| n.dist(*q) <= 0.9));
        }
    }

    #[test]
    fn coverage_prefers_last_vertex() {
        let v = vec![Point::new(0.0, 0.0), Point::new(5.0, 0.0), Point::new(0.1, 0.0)];
        let (cov, _) = coverage_and_tail(&v, &[Point::new(0.5, 0.0)], 0.1).unwrap();
        assert_eq!(cov[2], vec![0]);
        assert!(coverage_and_tail(&v, &[Point::new(20.0, 0.0)], 0.1).is_err());
    }

    #[test]
    fn path_for_small_symmetric_pattern() {
        // Two mirrored arms, symmetricity 2, three coordinates per component.
        let arm = [Point::new(0.4, 0.3), Point::new(1.1, 0.6), Point::new(1.6, 1.2)];
        let mut pts: Vec<Point> = arm.to_vec();
        pts.extend(arm.iter().map(|q| q.rotate(PI)));
        let p = normalize(&Pattern::new(pts).unwrap()).unwrap();
        let params = pp(2);
        let lat = Lattice::new(FormationParams::new(0.002, 0.1, PI / 3.0).unwrap()).unwrap();
        let plan = build_drawing_path(&p, &params, &lat).unwrap();
        assert_eq!(plan.path.vertices[0], params.root());
        assert_eq!(plan.path.tail_start, 0);
        assert!(plan.compatibility.ok);
    }
}
