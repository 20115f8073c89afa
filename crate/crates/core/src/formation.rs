//! Drawing hulls, ε-granular locations and states, detection and moves.
//!
//! Everything is expressed in a hull-local frame: the anchor sits at the
//! origin and the hull direction is +x. Location 0 is the anchor; the grid
//! cell `(i, j)` sits at `((1 + 2i)ε, 2jε)` and cells are indexed in
//! ascending `(i, j)` order starting at 1. Cell `(0, 0)` therefore always
//! has index 1.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{fit_rigid, Point, TAU_GEOM};

/// Wedge-shaped container of a drawing formation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawingHull {
    pub anchor: Point,
    pub direction: Point,
    pub span: f64,
    pub diameter: f64,
}

impl DrawingHull {
    pub fn new(anchor: Point, direction: Point, span: f64, diameter: f64) -> Result<Self> {
        if !(span > 0.0 && span <= PI / 3.0 + TAU_GEOM) {
            return domain(format!("hull span {span} outside (0, π/3]"));
        }
        if !(diameter > 0.0 && diameter <= 1.0) {
            return domain(format!("hull diameter {diameter} outside (0, 1]"));
        }
        let Some(direction) = direction.unit() else {
            return domain("hull direction is the zero vector");
        };
        Ok(DrawingHull { anchor, direction, span, diameter })
    }

    /// Hull-local coordinates of a point.
    #[inline]
    pub fn to_local(&self, p: Point) -> Point {
        (p - self.anchor).unrotate_by_unit(self.direction)
    }

    /// Inverse of [`DrawingHull::to_local`].
    #[inline]
    pub fn to_global(&self, l: Point) -> Point {
        self.anchor + l.rotate_by_unit(self.direction)
    }

    /// Membership in the wedge enlarged by `tol` on every side.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        local_in_wedge(self.to_local(p), self.span, self.diameter, tol)
    }

    /// A convex polygon containing the wedge (arc replaced by tangents).
    pub fn outer_polygon(&self) -> Vec<Point> {
        const K: usize = 16;
        let step = self.span / K as f64;
        let r_out = self.diameter / (step / 2.0).cos();
        let mut poly = vec![Point::ORIGIN, Point::new(self.diameter, 0.0)];
        for k in 0..K {
            poly.push(Point::polar(r_out, (k as f64 + 0.5) * step));
        }
        poly.push(Point::polar(self.diameter, self.span));
        poly.into_iter().map(|l| self.to_global(l)).collect()
    }
}

fn local_in_wedge(l: Point, span: f64, diameter: f64, tol: f64) -> bool {
    let r = l.norm();
    if r <= tol {
        return true;
    }
    if r > diameter + tol || l.y < -tol {
        return false;
    }
    let ang = l.y.atan2(l.x);
    // Angular slack equivalent to a distance of `tol` at radius r.
    ang < span + (tol / r).min(1.0) && ang > -(tol / r).min(1.0) - 1e-15
}

/// Globally known formation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormationParams {
    pub epsilon: f64,
    pub delta_diam: f64,
    pub span: f64,
}

impl FormationParams {
    pub fn new(epsilon: f64, delta_diam: f64, span: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < delta_diam) {
            return domain(format!("epsilon {epsilon} must lie in (0, Δ)"));
        }
        if !(delta_diam > 0.0 && delta_diam <= 1.0 / 6.0 + TAU_GEOM) {
            return domain(format!("hull diameter {delta_diam} must lie in (0, 1/6]"));
        }
        if !(span > 0.0 && span <= PI / 3.0 + TAU_GEOM) {
            return domain(format!("span {span} outside (0, π/3]"));
        }
        Ok(FormationParams { epsilon, delta_diam, span })
    }

    pub fn hull(&self, anchor: Point, direction: Point) -> DrawingHull {
        DrawingHull { anchor, direction, span: self.span, diameter: self.delta_diam }
    }
}

/// The ε-granular locations of a hull, in hull-local coordinates.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub params: FormationParams,
    cells: Vec<(u32, u32)>,
    index: HashMap<(u32, u32), usize>,
    axis_max: u32,
}

fn cell_valid(i: u32, j: u32, p: &FormationParams) -> bool {
    let a = 1.0 + 2.0 * i as f64;
    let b = 2.0 * j as f64;
    let r = p.epsilon * a.hypot(b);
    r <= p.delta_diam + TAU_GEOM && b.atan2(a) + 1e-12 < p.span
}

impl Lattice {
    pub fn new(params: FormationParams) -> Result<Self> {
        if params.epsilon >= params.delta_diam {
            return domain("epsilon must be smaller than the hull diameter");
        }
        let imax = (params.delta_diam / params.epsilon).ceil() as u32 + 1;
        let mut cells = vec![];
        for i in 0..=imax {
            for j in 0..=imax {
                if cell_valid(i, j, &params) {
                    cells.push((i, j));
                }
            }
        }
        let index = cells.iter().enumerate().map(|(k, &c)| (c, k + 1)).collect();
        let axis_max = (1..=imax).take_while(|&m| cell_valid(m, 0, &params)).count() as u32;
        Ok(Lattice { params, cells, index, axis_max })
    }

    /// Number of locations including the anchor.
    pub fn len(&self) -> usize {
        self.cells.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest admissible offset index of the third defining robot.
    pub fn axis_max(&self) -> u32 {
        self.axis_max
    }

    /// Grid coordinates of location `k ≥ 1`.
    pub fn cell(&self, k: usize) -> (u32, u32) {
        self.cells[k - 1]
    }

    pub fn index_of_cell(&self, c: (u32, u32)) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// Hull-local coordinates of location `k`.
    pub fn offset(&self, k: usize) -> Point {
        if k == 0 {
            return Point::ORIGIN;
        }
        let (i, j) = self.cell(k);
        let e = self.params.epsilon;
        Point::new((1.0 + 2.0 * i as f64) * e, 2.0 * j as f64 * e)
    }

    /// Location index of the third defining robot for offset index `m`.
    pub fn axis_index(&self, m: u32) -> Option<usize> {
        self.index_of_cell((m, 0))
    }

    /// Locations available to the free robots when the third defining robot
    /// uses offset index `m`.
    fn free_list(&self, m: u32) -> Vec<usize> {
        (2..self.len())
            .filter(|&k| {
                let (i, j) = self.cell(k);
                !(j == 0 && i >= 1 && i <= m)
            })
            .collect()
    }

    /// |A^ℓ|, saturating at `u128::MAX`.
    pub fn count_states(&self, l: usize) -> Result<u128> {
        if l < 3 {
            return domain("formations have at least three robots");
        }
        let n = self.len() as u64;
        let mut total: u128 = 0;
        for m in 1..=self.axis_max as u64 {
            let free = n - 2 - m;
            total = total.saturating_add(binom(free, (l - 3) as u64));
        }
        Ok(total)
    }

    /// The `idx`-th state (1-based) of `l` robots.
    pub fn state_by_index(&self, l: usize, idx: u128) -> Result<StateCells> {
        let total = self.count_states(l)?;
        if idx == 0 || idx > total {
            return domain(format!("state index {idx} outside 1..={total}"));
        }
        let k = (l - 3) as u64;
        let mut r = idx - 1;
        for m in 1..=self.axis_max {
            let free = self.free_list(m);
            let block = binom(free.len() as u64, k);
            if r >= block {
                r -= block;
                continue;
            }
            // Colexicographic unranking.
            let mut chosen = vec![0usize; k as usize];
            let mut upper = free.len() as u64;
            for j in (1..=k).rev() {
                let mut c = j - 1;
                // largest c < upper with C(c, j) <= r
                let mut lo = j - 1;
                let mut hi = upper - 1;
                while lo < hi {
                    let mid = lo + (hi - lo).div_ceil(2);
                    if binom(mid, j) <= r {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                c = c.max(lo);
                r -= binom(c, j);
                chosen[(j - 1) as usize] = free[c as usize];
                upper = c;
            }
            return Ok(StateCells { third: m, extra: chosen });
        }
        Err(Error::Domain("state index beyond enumeration".into()))
    }

    /// Inverse of [`Lattice::state_by_index`].
    pub fn index_of_state(&self, s: &StateCells) -> Result<u128> {
        let m = s.third;
        if m == 0 || m > self.axis_max {
            return domain("third defining robot outside the hull");
        }
        let free = self.free_list(m);
        let pos: HashMap<usize, usize> = free.iter().enumerate().map(|(p, &k)| (k, p)).collect();
        let mut ps = vec![];
        for k in &s.extra {
            match pos.get(k) {
                Some(&p) => ps.push(p as u64),
                None => return domain("occupied location not free for this third robot"),
            }
        }
        ps.sort_unstable();
        if ps.windows(2).any(|w| w[0] == w[1]) {
            return domain("location occupied twice");
        }
        let l = s.extra.len() + 3;
        let k = (l - 3) as u64;
        let mut rank: u128 = 0;
        for mm in 1..m {
            rank = rank
                .checked_add(binom((self.len() as u64) - 2 - mm as u64, k))
                .ok_or_else(|| Error::Domain("state index overflow".into()))?;
        }
        for (j, &c) in ps.iter().enumerate() {
            let b = binom(c, j as u64 + 1);
            if b == u128::MAX {
                return domain("state index overflow");
            }
            rank = rank.checked_add(b).ok_or_else(|| Error::Domain("state index overflow".into()))?;
        }
        rank.checked_add(1).ok_or_else(|| Error::Domain("state index overflow".into()))
    }

    /// Hull-local positions of a state, defining robots first.
    pub fn state_offsets(&self, s: &StateCells) -> Vec<Point> {
        self.state_locations(s).into_iter().map(|k| self.offset(k)).collect()
    }

    /// Location indices of a state, ascending.
    pub fn state_locations(&self, s: &StateCells) -> Vec<usize> {
        let mut v = vec![0, 1, self.axis_index(s.third).expect("valid third robot")];
        v.extend(&s.extra);
        v.sort_unstable();
        v
    }

    /// Nearest location to a hull-local point, if within `tol`.
    pub fn snap(&self, l: Point, tol: f64) -> Option<usize> {
        if l.norm() <= tol {
            return Some(0);
        }
        let e = self.params.epsilon;
        let i = ((l.x / e - 1.0) / 2.0).round();
        let j = (l.y / (2.0 * e)).round();
        if i < 0.0 || j < 0.0 || i > u32::MAX as f64 || j > u32::MAX as f64 {
            return None;
        }
        let k = self.index_of_cell((i as u32, j as u32))?;
        (self.offset(k).dist(l) <= tol).then_some(k)
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for t in 1..=k as u128 {
        let f = (n as u128) - (k as u128) + t;
        r = match r.checked_mul(f) {
            Some(v) => v / t,
            None => return u128::MAX,
        };
    }
    r
}

/// Occupancy description of an ε-granular state: the offset index of the
/// third defining robot and the location indices of the remaining robots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCells {
    pub third: u32,
    pub extra: Vec<usize>,
}

impl StateCells {
    pub fn size(&self) -> usize {
        self.extra.len() + 3
    }
}

/// A state placed in a concrete hull.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub hull: DrawingHull,
    pub cells: StateCells,
}

/// Free-standing wrapper matching the location set of a hull.
pub fn epsilon_locations(hull: &DrawingHull, epsilon: f64) -> Result<Vec<Point>> {
    if epsilon >= hull.diameter {
        return domain("epsilon must be smaller than the hull diameter");
    }
    let lat = Lattice::new(FormationParams { epsilon, delta_diam: hull.diameter, span: hull.span })?;
    Ok((0..lat.len()).map(|k| hull.to_global(lat.offset(k))).collect())
}

/// |A^ℓ| for a hull.
pub fn count_states(hull: &DrawingHull, epsilon: f64, l: usize) -> Result<u128> {
    Lattice::new(FormationParams { epsilon, delta_diam: hull.diameter, span: hull.span })?.count_states(l)
}

/// Global robot positions realising a state.
pub fn synthesize(lat: &Lattice, spec: &StateSpec) -> Vec<Point> {
    lat.state_offsets(&spec.cells).into_iter().map(|o| spec.hull.to_global(o)).collect()
}

/// A formation recognised among a set of points.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectedFormation {
    pub hull: DrawingHull,
    /// Indices into the scanned point list, sorted by location index.
    pub members: Vec<usize>,
    /// Location index of each member.
    pub locations: Vec<usize>,
    pub cells: StateCells,
    pub state_index: u128,
    pub size: usize,
}

/// Finds every ε-granular formation among `points`.
///
/// When `focus` is given only formations that contain it are returned
/// (used by robots, which only care about their own formation).
pub fn detect_formations(points: &[Point], lat: &Lattice, tol: f64, focus: Option<Point>) -> Vec<DetectedFormation> {
    let eps = lat.params.epsilon;
    let reach = lat.params.delta_diam + 2.0 * tol;
    let mut out = vec![];
    for (ia, &pa) in points.iter().enumerate() {
        if let Some(f) = focus {
            if pa.dist(f) > reach {
                continue;
            }
        }
        for (ib, &pb) in points.iter().enumerate() {
            if ia == ib || (pa.dist(pb) - eps).abs() > tol {
                continue;
            }
            if let Some(f) = try_candidate(points, lat, tol, ia, ib) {
                if let Some(fp) = focus {
                    if !f.members.iter().any(|&m| points[m].dist(fp) <= tol) {
                        continue;
                    }
                }
                out.push(f);
            }
        }
    }
    out
}

fn try_candidate(points: &[Point], lat: &Lattice, tol: f64, ia: usize, ib: usize) -> Option<DetectedFormation> {
    let p = &lat.params;
    let eps = p.epsilon;
    let pa = points[ia];
    let d = (points[ib] - pa).unit()?;
    let coarse = DrawingHull { anchor: pa, direction: d, span: p.span, diameter: p.delta_diam };
    // Smallest third-robot offset. The pair only fixes the direction up to
    // about 2·tol/ε, so lateral slack grows along the axis (capped well below
    // the row spacing 2ε).
    let mut third: Option<(u32, usize)> = None;
    for (k, &x) in points.iter().enumerate() {
        if k == ia || k == ib {
            continue;
        }
        let l = coarse.to_local(x);
        if l.x <= 2.0 * eps || l.y.abs() > (tol * (1.0 + 2.0 * l.x / eps)).min(0.9 * eps) {
            continue;
        }
        let m = ((l.x / eps - 1.0) / 2.0).round();
        if m < 1.0 || m > lat.axis_max() as f64 {
            continue;
        }
        if (l.x - (1.0 + 2.0 * m) * eps).abs() <= 2.0 * tol {
            let m = m as u32;
            if third.map_or(true, |t| m < t.0) {
                third = Some((m, k));
            }
        }
    }
    let (third, ic) = third?;
    let axis = lat.axis_index(third)?;
    // Frame from the three defining robots.
    let def_src = [Point::ORIGIN, lat.offset(1), lat.offset(axis)];
    let def_dst = [pa, points[ib], points[ic]];
    let (th, t) = fit_rigid(&def_src, &def_dst);
    let frame = DrawingHull { anchor: t, direction: Point::polar(1.0, th), span: p.span, diameter: p.delta_diam };
    let lever = (1.0 + 2.0 * third as f64) * eps;
    let slack = |l: Point| (tol * (1.0 + 2.0 * l.norm() / lever)).min(0.9 * eps);
    // Members and their locations.
    let mut mem: Vec<(usize, usize)> = vec![];
    for (k, &x) in points.iter().enumerate() {
        let l = frame.to_local(x);
        let sl = slack(l);
        if !local_in_wedge(l, p.span, p.delta_diam, sl) {
            continue;
        }
        let loc = lat.snap(l, sl)?;
        mem.push((loc, k));
    }
    mem.sort_unstable();
    if mem.windows(2).any(|w| w[0].0 == w[1].0) {
        return None;
    }
    let has = |loc: usize| mem.iter().any(|&(l, _)| l == loc);
    if !has(0) || !has(1) || !has(axis) {
        return None;
    }
    let extra: Vec<usize> = mem.iter().map(|&(l, _)| l).filter(|&l| l != 0 && l != 1 && l != axis).collect();
    let cells = StateCells { third, extra };
    let state_index = lat.index_of_state(&cells).ok()?;
    // Refine anchor and direction from every member.
    let src: Vec<Point> = mem.iter().map(|&(l, _)| lat.offset(l)).collect();
    let dst: Vec<Point> = mem.iter().map(|&(_, k)| points[k]).collect();
    let (theta, t) = fit_rigid(&src, &dst);
    let hull = DrawingHull { anchor: t, direction: Point::polar(1.0, theta), span: p.span, diameter: p.delta_diam };
    if src.iter().zip(&dst).any(|(a, b)| hull.to_global(*a).dist(*b) > 2.0 * tol) {
        return None;
    }
    Some(DetectedFormation {
        hull,
        size: mem.len(),
        members: mem.iter().map(|&(_, k)| k).collect(),
        locations: mem.iter().map(|&(l, _)| l).collect(),
        cells,
        state_index,
    })
}

/// Result of a validity check over a whole configuration.
#[derive(Clone, Debug)]
pub struct ValidityReport {
    pub valid: bool,
    pub overlapping: Vec<(usize, usize)>,
    pub formations: Vec<DetectedFormation>,
}

/// All formations in `config` must have pairwise disjoint hulls.
pub fn check_validity(config: &[Point], lat: &Lattice, tol: f64) -> ValidityReport {
    let formations = detect_formations(config, lat, tol, None);
    let polys: Vec<Vec<Point>> = formations.iter().map(|f| f.hull.outer_polygon()).collect();
    let mut overlapping = vec![];
    for a in 0..formations.len() {
        for b in (a + 1)..formations.len() {
            if convex_polygons_intersect(&polys[a], &polys[b]) {
                overlapping.push((a, b));
            }
        }
    }
    ValidityReport { valid: overlapping.is_empty(), overlapping, formations }
}

/// Separating-axis test; touching polygons count as intersecting.
pub fn convex_polygons_intersect(a: &[Point], b: &[Point]) -> bool {
    for poly in [a, b] {
        for k in 0..poly.len() {
            let e = poly[(k + 1) % poly.len()] - poly[k];
            let Some(nrm) = e.perp().unit() else { continue };
            let (amin, amax) = project(a, nrm);
            let (bmin, bmax) = project(b, nrm);
            if amax < bmin || bmax < amin {
                return false;
            }
        }
    }
    true
}

fn project(poly: &[Point], axis: Point) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let t = p.dot(axis);
        (lo.min(t), hi.max(t))
    })
}

/// Per-member targets for one formation move.
///
/// `move_local` and `drops_local` are hull-local (anchor at the origin,
/// direction +x). Members are taken in location order and targets in
/// lexicographic order; the i-th member receives the i-th target. Targets
/// are returned in the frame of `f.hull`, aligned with `f.members`.
pub fn plan_move(
    f: &DetectedFormation,
    lat: &Lattice,
    move_local: Point,
    drops_local: &[Point],
    next: Option<&StateCells>,
) -> Result<Vec<MoveTarget>> {
    let next_count = next.map_or(0, |s| s.size());
    if next_count + drops_local.len() != f.size {
        return domain(format!(
            "move for {} robots has {} slots and {} drops",
            f.size,
            next_count,
            drops_local.len()
        ));
    }
    if move_local.norm() > 1.0 - lat.params.delta_diam + TAU_GEOM && next.is_some() {
        return domain("formation move longer than 1 - Δ");
    }
    let mut targets: Vec<(Point, Option<usize>)> = match next {
        Some(s) => lat.state_locations(s).into_iter().map(|k| (lat.offset(k) + move_local, Some(k))).collect(),
        None => vec![],
    };
    targets.extend(drops_local.iter().map(|&d| (d, None)));
    targets.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)));
    let mut out = Vec::with_capacity(f.size);
    for (k, &loc) in f.locations.iter().enumerate() {
        let from = lat.offset(loc);
        let (to, next_location) = targets[k];
        if from.dist(to) > 1.0 + TAU_GEOM {
            return Err(Error::Protocol(format!("planned displacement {} exceeds 1", from.dist(to))));
        }
        out.push(MoveTarget { position: f.hull.to_global(to), next_location });
    }
    Ok(out)
}

/// Target of one formation member.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveTarget {
    pub position: Point,
    /// Location in the next state, `None` when the robot is dropped.
    pub next_location: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(eps: f64) -> Lattice {
        Lattice::new(FormationParams::new(eps, 0.1, PI / 3.0).unwrap()).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), 10);
        assert_eq!(binom(0, 0), 1);
        assert_eq!(binom(3, 5), 0);
        assert_eq!(binom(400, 200), u128::MAX);
    }

    #[test]
    fn three_robot_counts() {
        assert_eq!(lat(0.01).count_states(3).unwrap(), 4);
        let l = Lattice::new(FormationParams { epsilon: 0.05, delta_diam: 0.1, span: PI / 3.0 }).unwrap();
        assert_eq!(l.count_states(3).unwrap(), 0);
        assert!(l.count_states(2).is_err());
    }

    #[test]
    fn half_delta_has_two_locations() {
        let h = DrawingHull::new(Point::ORIGIN, Point::E_X, PI / 3.0, 0.1).unwrap();
        assert_eq!(epsilon_locations(&h, 0.05).unwrap().len(), 2);
        assert!(epsilon_locations(&h, 0.1).is_err());
    }

    #[test]
    fn first_state_is_minimal() {
        let l = lat(0.01);
        let s = l.state_by_index(5, 1).unwrap();
        assert_eq!(s.third, 1);
        assert_eq!(s.extra, l.free_list(1)[..2].to_vec());
    }

    #[test]
    fn round_trip_small() {
        let l = lat(0.01);
        for size in 3..6 {
            let total = l.count_states(size).unwrap();
            for idx in 1..=total.min(3000) {
                let s = l.state_by_index(size, idx).unwrap();
                assert_eq!(l.index_of_state(&s).unwrap(), idx);
            }
        }
    }

    #[test]
    fn detection_of_synthesized_state() {
        let l = lat(0.01);
        let hull = DrawingHull::new(Point::new(0.3, -0.2), Point::polar(1.0, 0.7), PI / 3.0, 0.1).unwrap();
        let cells = l.state_by_index(6, 17).unwrap();
        let pts = synthesize(&l, &StateSpec { hull, cells });
        let found = detect_formations(&pts, &l, 1e-9, None);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].state_index, 17);
        assert!(found[0].hull.anchor.dist(hull.anchor) < 1e-12);
    }

    #[test]
    fn no_pair_no_formation() {
        let l = lat(0.01);
        let pts = [Point::ORIGIN, Point::new(0.5, 0.0), Point::new(0.0, 0.37)];
        assert!(detect_formations(&pts, &l, 1e-9, None).is_empty());
    }

    #[test]
    fn identity_move_is_stationary() {
        let l = lat(0.01);
        let hull = DrawingHull::new(Point::new(1.0, 1.0), Point::polar(1.0, -2.0), PI / 3.0, 0.1).unwrap();
        let cells = l.state_by_index(5, 9).unwrap();
        let pts = synthesize(&l, &StateSpec { hull, cells: cells.clone() });
        let f = &detect_formations(&pts, &l, 1e-9, None)[0];
        let t = plan_move(f, &l, Point::ORIGIN, &[], Some(&cells)).unwrap();
        for (k, &m) in f.members.iter().enumerate() {
            assert!(t[k].position.dist(pts[m]) < 1e-12);
        }
    }
}
