//! Planar primitives shared by every other module.
//!
//! All comparisons that later modules describe as "equal", "on the grid" or
//! "collinear" go through [`TAU_GEOM`].

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Absolute tolerance for geometric predicates.
pub const TAU_GEOM: f64 = 1e-9;

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point {
    fn from(a: [f64; 2]) -> Self {
        Point::new(a[0], a[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };
    pub const E_X: Point = Point { x: 1.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Point at radius `r` and polar angle `theta`.
    #[inline]
    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is
    /// counter-clockwise from `self`.
    #[inline]
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn dist2(self, o: Point) -> f64 {
        (self - o).norm2()
    }

    /// Counter-clockwise rotation about the origin.
    #[inline]
    pub fn rotate(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Rotation by the angle of the unit vector `u` (no trigonometry needed).
    #[inline]
    pub fn rotate_by_unit(self, u: Point) -> Self {
        Point::new(u.x * self.x - u.y * self.y, u.y * self.x + u.x * self.y)
    }

    /// Inverse of [`Point::rotate_by_unit`].
    #[inline]
    pub fn unrotate_by_unit(self, u: Point) -> Self {
        Point::new(u.x * self.x + u.y * self.y, -u.y * self.x + u.x * self.y)
    }

    /// The vector rotated by +π/2.
    #[inline]
    pub fn perp(self) -> Self {
        Point::new(-self.y, self.x)
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn unit(self) -> Option<Self> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    /// Polar angle in (−π, π].
    #[inline]
    pub fn angle(self) -> f64 {
        normalize_angle(self.y.atan2(self.x))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point, t: f64) -> Self {
        self + (o - self) * t
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Point {
    #[inline]
    fn sub_assign(&mut self, o: Point) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Div<f64> for Point {
    type Output = Point;
    #[inline]
    fn div(self, k: f64) -> Point {
        Point::new(self.x / k, self.y / k)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Maps any angle into (−π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Maps any angle into [0, 2π).
pub fn angle_0_2pi(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Angle by which `u` must be turned counter-clockwise to align with `v`.
pub fn signed_angle(u: Point, v: Point) -> Result<f64> {
    if u.norm2() == 0.0 || v.norm2() == 0.0 {
        return domain("signed_angle of a zero vector");
    }
    Ok(normalize_angle(u.cross(v).atan2(u.dot(v))))
}

/// A closed disc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.center.dist(p) <= self.radius + tol
    }

    fn from_two(a: Point, b: Point) -> Circle {
        let c = (a + b) * 0.5;
        Circle { center: c, radius: c.dist(a).max(c.dist(b)) }
    }

    fn from_three(a: Point, b: Point, c: Point) -> Circle {
        let bx = b - a;
        let cx = c - a;
        let d = 2.0 * bx.cross(cx);
        if d.abs() < 1e-300 {
            // Collinear: the farthest pair spans the circle.
            let cands = [Circle::from_two(a, b), Circle::from_two(a, c), Circle::from_two(b, c)];
            return cands
                .into_iter()
                .max_by(|p, q| p.radius.total_cmp(&q.radius))
                .expect("three candidates");
        }
        let b2 = bx.norm2();
        let c2 = cx.norm2();
        let ux = (cx.y * b2 - bx.y * c2) / d;
        let uy = (bx.x * c2 - cx.x * b2) / d;
        let center = a + Point::new(ux, uy);
        let radius = center.dist(a).max(center.dist(b)).max(center.dist(c));
        Circle { center, radius }
    }
}

const SEC_EPS: f64 = 1e-12;

/// Smallest enclosing circle (randomised incremental construction with a
/// fixed shuffle seed, so the output is a pure function of the input).
pub fn smallest_enclosing_circle(points: &[Point]) -> Result<Circle> {
    if points.is_empty() {
        return domain("smallest enclosing circle of an empty set");
    }
    let mut pts: Vec<Point> = points.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ec_5ec);
    pts.shuffle(&mut rng);
    let scale = pts.iter().map(|p| p.x.abs().max(p.y.abs())).fold(1.0, f64::max);
    let tol = SEC_EPS * scale;
    let mut c = Circle { center: pts[0], radius: 0.0 };
    for i in 1..pts.len() {
        if c.contains(pts[i], tol) {
            continue;
        }
        c = Circle { center: pts[i], radius: 0.0 };
        for j in 0..i {
            if c.contains(pts[j], tol) {
                continue;
            }
            c = Circle::from_two(pts[i], pts[j]);
            for k in 0..j {
                if !c.contains(pts[k], tol) {
                    c = Circle::from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Ok(c)
}

/// Minimum pairwise distance (sweep over x-sorted points).
pub fn mindist(points: &[Point]) -> Result<f64> {
    if points.len() < 2 {
        return domain("mindist needs at least two points");
    }
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if pts[j].x - pts[i].x >= best {
                break;
            }
            best = best.min(pts[i].dist(pts[j]));
        }
    }
    if best <= TAU_GEOM {
        return domain("duplicate points");
    }
    Ok(best)
}

/// Whether the graph with edges between points at distance in (0, 1] is
/// connected.
pub fn unit_disc_connected(points: &[Point]) -> Result<bool> {
    if points.is_empty() {
        return domain("connectivity of an empty set");
    }
    Ok(unit_disc_components(points).len() == 1)
}

/// Connected components of the unit disc graph, each sorted ascending.
pub fn unit_disc_components(points: &[Point]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut comp = vec![];
        while let Some(u) = stack.pop() {
            comp.push(u);
            for v in 0..n {
                if !seen[v] && points[u].dist(points[v]) <= 1.0 + TAU_GEOM {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Largest distance between any two points.
pub fn diameter(points: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            d = d.max(points[i].dist(points[j]));
        }
    }
    d
}

/// Distance from `p` to the ray starting at the origin with unit direction `u`.
pub fn dist_to_ray(p: Point, u: Point) -> f64 {
    let t = p.dot(u);
    if t <= 0.0 {
        p.norm()
    } else {
        p.cross(u).abs()
    }
}

/// Least-squares rotation and translation taking `src[k]` onto `dst[k]`:
/// returns `(theta, t)` with `dst ≈ rotate(src, theta) + t`.
pub fn fit_rigid(src: &[Point], dst: &[Point]) -> (f64, Point) {
    assert_eq!(src.len(), dst.len());
    let n = src.len().max(1) as f64;
    let cs = src.iter().fold(Point::ORIGIN, |a, &p| a + p) / n;
    let cd = dst.iter().fold(Point::ORIGIN, |a, &p| a + p) / n;
    let (mut sc, mut sd) = (0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let a = *s - cs;
        let b = *d - cd;
        sd += a.dot(b);
        sc += a.cross(b);
    }
    let theta = if sc == 0.0 && sd == 0.0 { 0.0 } else { sc.atan2(sd) };
    (theta, cd - cs.rotate(theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_angle_examples() {
        let ex = Point::new(1.0, 0.0);
        assert!((signed_angle(ex, Point::new(0.0, 1.0)).unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(signed_angle(ex, ex).unwrap(), 0.0);
        assert_eq!(signed_angle(ex, Point::new(-1.0, 0.0)).unwrap(), PI);
        assert!(signed_angle(Point::ORIGIN, ex).is_err());
    }

    #[test]
    fn angle_range_is_half_open() {
        assert_eq!(Point::new(-1.0, -0.0).angle(), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_eq!(angle_0_2pi(-1e-20), 0.0);
    }

    #[test]
    fn sec_small_cases() {
        let c = smallest_enclosing_circle(&[Point::ORIGIN]).unwrap();
        assert_eq!(c.radius, 0.0);
        let c = smallest_enclosing_circle(&[Point::new(-1.0, 0.0), Point::new(1.0, 0.0)]).unwrap();
        assert!(c.center.norm() < 1e-15 && (c.radius - 1.0).abs() < 1e-15);
        assert!(smallest_enclosing_circle(&[]).is_err());
    }

    #[test]
    fn mindist_examples() {
        assert_eq!(mindist(&[Point::ORIGIN, Point::new(3.0, 4.0)]).unwrap(), 5.0);
        let sq = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        assert_eq!(mindist(&sq).unwrap(), 1.0);
        assert!(mindist(&[Point::ORIGIN]).is_err());
        assert!(mindist(&[Point::ORIGIN, Point::ORIGIN]).is_err());
    }

    #[test]
    fn connectivity_examples() {
        assert!(unit_disc_connected(&[Point::ORIGIN, Point::new(0.9, 0.0)]).unwrap());
        assert!(!unit_disc_connected(&[Point::ORIGIN, Point::new(1.01, 0.0)]).unwrap());
        let chain: Vec<Point> = (0..10).map(|i| Point::new(0.99 * i as f64, 0.0)).collect();
        assert!(unit_disc_connected(&chain).unwrap());
        assert!(unit_disc_connected(&[]).is_err());
    }

    #[test]
    fn rigid_fit_recovers_motion() {
        let src = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.3, 0.7)];
        let dst: Vec<Point> = src.iter().map(|p| p.rotate(0.4) + Point::new(2.0, -1.0)).collect();
        let (th, t) = fit_rigid(&src, &dst);
        assert!((th - 0.4).abs() < 1e-12);
        assert!(t.dist(Point::new(2.0, -1.0)) < 1e-12);
    }
}
