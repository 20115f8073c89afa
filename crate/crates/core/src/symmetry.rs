//! Pattern normalisation, symmetricity and cone decomposition.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{angle_0_2pi, mindist, smallest_enclosing_circle, Point, TAU_GEOM};

/// Angular slack used when deciding cone membership. Points whose polar
/// angle falls this close below a cone boundary are snapped onto it.
pub const CONE_SNAP: f64 = 1e-13;

/// A target coordinate set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub points: Vec<Point>,
    #[serde(default)]
    pub normalized: bool,
}

impl Pattern {
    /// Builds a pattern, rejecting empty input, non-finite values and duplicates.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return domain("pattern has no points");
        }
        if points.iter().any(|p| !p.is_finite()) {
            return domain("pattern has a non-finite coordinate");
        }
        if points.len() >= 2 {
            mindist(&points)?;
        }
        Ok(Pattern { points, normalized: false })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same pattern rotated about the origin.
    pub fn rotated(&self, theta: f64) -> Pattern {
        Pattern { points: self.points.iter().map(|p| p.rotate(theta)).collect(), normalized: self.normalized }
    }
}

/// Symmetricity together with a witnessing regular partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryInfo {
    pub sym: usize,
    /// Each group lists point indices in counter-clockwise order.
    pub orbit_partition: Vec<Vec<usize>>,
}

/// Translates `p` so that its smallest enclosing circle is centred at the origin.
pub fn normalize(p: &Pattern) -> Result<Pattern> {
    if p.points.is_empty() {
        return domain("pattern has no points");
    }
    if p.points.len() >= 2 {
        mindist(&p.points)?;
    }
    let c = smallest_enclosing_circle(&p.points)?.center;
    Ok(Pattern { points: p.points.iter().map(|&q| q - c).collect(), normalized: true })
}

/// Symmetricity of a normalised pattern.
pub fn symmetricity(p: &Pattern) -> SymmetryInfo {
    symmetricity_about(&p.points, Point::ORIGIN, TAU_GEOM)
}

/// Symmetricity of `points` about `center` with matching tolerance `tol`.
pub fn symmetricity_about(points: &[Point], center: Point, tol: f64) -> SymmetryInfo {
    let n = points.len();
    let trivial = || SymmetryInfo { sym: 1, orbit_partition: (0..n).map(|i| vec![i]).collect() };
    if n == 0 {
        return SymmetryInfo { sym: 1, orbit_partition: vec![] };
    }
    let rel: Vec<Point> = points.iter().map(|&q| q - center).collect();
    if rel.iter().any(|q| q.norm() <= tol) {
        return trivial();
    }
    // Radius classes.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rel[a].norm().total_cmp(&rel[b].norm()));
    let mut classes: Vec<Vec<usize>> = vec![];
    for &i in &order {
        match classes.last_mut() {
            Some(c) if rel[i].norm() - rel[*c.last().unwrap()].norm() <= tol => c.push(i),
            _ => classes.push(vec![i]),
        }
    }
    let g = classes.iter().fold(0usize, |g, c| gcd(g, c.len()));
    let mut divisors: Vec<usize> = (1..=g).filter(|m| g % m == 0).collect();
    divisors.reverse();
    for m in divisors {
        if m == 1 {
            break;
        }
        if let Some(orbits) = rotation_orbits(&rel, &classes, m, tol) {
            return SymmetryInfo { sym: m, orbit_partition: orbits };
        }
    }
    trivial()
}

/// Orbits under rotation by 2π/m if that rotation maps the set onto itself.
fn rotation_orbits(rel: &[Point], classes: &[Vec<usize>], m: usize, tol: f64) -> Option<Vec<Vec<usize>>> {
    let step = 2.0 * PI / m as f64;
    let n = rel.len();
    let mut image = vec![usize::MAX; n];
    for class in classes {
        for &i in class {
            let target = rel[i].rotate(step);
            let hit = class.iter().copied().find(|&j| rel[j].dist(target) <= tol)?;
            image[i] = hit;
        }
    }
    let mut seen = vec![false; n];
    let mut orbits = vec![];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut orbit = vec![];
        let mut cur = start;
        while !seen[cur] {
            seen[cur] = true;
            orbit.push(cur);
            cur = image[cur];
        }
        if orbit.len() != m || cur != start {
            return None;
        }
        orbits.push(orbit);
    }
    Some(orbits)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Index (1-based) of the cone of width 2π/s containing `p`.
pub fn cone_index(p: Point, s: usize) -> Result<usize> {
    if s == 0 {
        return domain("symmetricity must be positive");
    }
    if p.norm2() == 0.0 {
        return domain("the origin has no cone");
    }
    if s == 1 {
        return Ok(1);
    }
    let w = 2.0 * PI / s as f64;
    let a = angle_0_2pi(p.angle());
    let mut i = (a / w).floor() as usize;
    if i >= s {
        i = s - 1;
    }
    if ((i + 1) as f64) * w - a <= CONE_SNAP {
        i = (i + 1) % s;
    }
    Ok(i + 1)
}

/// Indices of the points of `p` lying in the `i`-th cone.
pub fn symmetric_component(p: &Pattern, s: usize, i: usize) -> Result<Vec<usize>> {
    if i == 0 || i > s {
        return domain(format!("component index {i} outside 1..={s}"));
    }
    if s == 1 {
        return Ok((0..p.len()).collect());
    }
    let mut out = vec![];
    for (k, &q) in p.points.iter().enumerate() {
        if cone_index(q, s)? == i {
            out.push(k);
        }
    }
    Ok(out)
}
