//! Rigid registration of a configuration onto a pattern.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{fit_rigid, smallest_enclosing_circle, Point};
use crate::matching::min_cost_assignment;

/// `config ≈ rotate(pattern, rotation) + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub rotation: f64,
    pub translation: Point,
}

impl Alignment {
    pub fn apply(&self, p: Point) -> Point {
        p.rotate(self.rotation) + self.translation
    }
}

/// Outcome of [`align`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub ok: bool,
    pub alignment: Alignment,
    pub max_error: f64,
    /// `assignment[i]` is the pattern index matched to config point `i`.
    pub assignment: Vec<usize>,
}

fn sorted_radii(pts: &[Point], c: Point) -> Vec<f64> {
    let mut r: Vec<f64> = pts.iter().map(|p| p.dist(c)).collect();
    r.sort_by(f64::total_cmp);
    r
}

/// Radii about the smallest-enclosing-circle centre, ascending. Two sets
/// related by a rigid motion have equal profiles.
pub fn radius_profile(pts: &[Point]) -> Vec<f64> {
    match smallest_enclosing_circle(pts) {
        Ok(c) => sorted_radii(pts, c.center),
        Err(_) => vec![],
    }
}

/// Cheap necessary condition for [`align`] to succeed at tolerance `tol`.
pub fn profiles_compatible(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 2.0 * tol + 1e-12)
}

/// Finds the rotation and translation that best maps `pattern` onto
/// `config`, together with a bijection and its largest residual.
/// `max_error` is reported even when the registration fails.
pub fn align(config: &[Point], pattern: &[Point], tol: f64) -> Result<Registration> {
    register(config, pattern, tol, true).map(|r| r.expect("full search yields a registration"))
}

/// Whether [`align`] would succeed. Faster on mismatches because rotations
/// that cannot reach `tol` skip the exact matching.
pub fn matches(config: &[Point], pattern: &[Point], tol: f64) -> Result<bool> {
    Ok(register(config, pattern, tol, false)?.map_or(false, |r| r.ok))
}

fn register(config: &[Point], pattern: &[Point], tol: f64, full: bool) -> Result<Option<Registration>> {
    let n = config.len();
    if n != pattern.len() {
        return domain(format!("configuration has {n} points, pattern has {}", pattern.len()));
    }
    if n == 0 {
        let id = Alignment { rotation: 0.0, translation: Point::ORIGIN };
        return Ok(Some(Registration { ok: true, alignment: id, max_error: 0.0, assignment: vec![] }));
    }
    let cc = smallest_enclosing_circle(config)?.center;
    let pc = smallest_enclosing_circle(pattern)?.center;
    let x: Vec<Point> = config.iter().map(|&p| p - cc).collect();
    let y: Vec<Point> = pattern.iter().map(|&p| p - pc).collect();
    let e = (0..n).max_by(|&a, &b| x[a].norm().total_cmp(&x[b].norm()).then(b.cmp(&a))).expect("n > 0");
    let re = x[e].norm();
    let mut cands: Vec<(f64, usize)> = (0..n).map(|j| ((y[j].norm() - re).abs(), j)).collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let band = (4.0 * tol).max(1e-9);
    let within = cands.iter().take_while(|c| c.0 <= band).count();
    let take = if within > 0 { within } else { cands.len().min(8) };
    let mut best: Option<Registration> = None;
    for &(_, j) in cands.iter().take(take) {
        let rot = if re < 1e-12 || y[j].norm() < 1e-12 { 0.0 } else { x[e].angle() - y[j].angle() };
        let yr: Vec<Point> = y.iter().map(|q| q.rotate(rot)).collect();
        if !full && nearest_bound(&x, &yr) > tol {
            continue;
        }
        let assignment = assign(&x, &yr, tol);
        let mut err = (0..n).map(|i| x[i].dist(yr[assignment[i]])).fold(0.0, f64::max);
        let mut al = Alignment { rotation: rot, translation: cc - pc.rotate(rot) };
        let src: Vec<Point> = assignment.iter().map(|&k| pattern[k]).collect();
        let (th, t) = fit_rigid(&src, config);
        let refined = Alignment { rotation: th, translation: t };
        let err2 = (0..n).map(|i| refined.apply(src[i]).dist(config[i])).fold(0.0, f64::max);
        if err2 < err {
            err = err2;
            al = refined;
        }
        if best.as_ref().map_or(true, |b| err < b.max_error) {
            best = Some(Registration { ok: err <= tol, alignment: al, max_error: err, assignment });
        }
        if err <= tol * 1e-3 {
            break;
        }
    }
    Ok(best)
}

/// Lower bound on the largest residual of any bijection.
fn nearest_bound(x: &[Point], y: &[Point]) -> f64 {
    x.iter().map(|xi| y.iter().map(|yj| xi.dist(*yj)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

/// Greedy nearest matching when it is an unambiguous bijection within
/// `tol`, otherwise an exact minimum-cost matching.
fn assign(x: &[Point], y: &[Point], tol: f64) -> Vec<usize> {
    let n = x.len();
    let mut greedy = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut ok = true;
    for xi in x {
        let (j, d) = y
            .iter()
            .enumerate()
            .map(|(j, yj)| (j, xi.dist(*yj)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if d > tol || used[j] {
            ok = false;
            break;
        }
        used[j] = true;
        greedy.push(j);
    }
    if ok {
        return greedy;
    }
    let cost: Vec<Vec<f64>> = x.iter().map(|xi| y.iter().map(|yj| xi.dist2(*yj)).collect()).collect();
    min_cost_assignment(&cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isometry_is_recognised() {
        let p = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.2), Point::new(0.4, 0.9), Point::new(-0.3, 0.5)];
        let th = 37f64.to_radians();
        let c: Vec<Point> = p.iter().rev().map(|q| q.rotate(th) + Point::new(5.0, -3.0)).collect();
        let r = align(&c, &p, 1e-6).unwrap();
        assert!(r.ok && r.max_error < 1e-9);
    }

    #[test]
    fn perturbation_is_rejected() {
        let p = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.2), Point::new(0.4, 0.9), Point::new(-0.3, 0.5)];
        let mut c = p.clone();
        c[2].x += 1e-5;
        let r = align(&c, &p, 1e-6).unwrap();
        assert!(!r.ok);
        assert!(r.max_error > 1e-6 && r.max_error < 1e-5);
    }

    #[test]
    fn matches_agrees_with_align() {
        let p = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.2), Point::new(0.4, 0.9), Point::new(-0.3, 0.5)];
        let c: Vec<Point> = p.iter().map(|q| q.rotate(1.0) + Point::new(0.5, 0.5)).collect();
        assert!(matches(&c, &p, 1e-9).unwrap());
        let mut d = c.clone();
        d[1].y += 1e-3;
        assert!(!matches(&d, &p, 1e-6).unwrap());
        assert!(matches(&d, &p, 1e-2).unwrap());
    }

    #[test]
    fn size_mismatch_errors() {
        assert!(align(&[Point::ORIGIN], &[], 1e-6).is_err());
    }
}
