//! Deterministic pattern generators used by tests, benchmarks and the CLI.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{unit_disc_connected, Point};
use crate::symmetry::{normalize, symmetricity, Pattern};

const MIN_SPACING: f64 = 0.35;

fn far_enough(pts: &[Point], q: Point, min: f64) -> bool {
    pts.iter().all(|p| p.dist(q) >= min)
}

/// A random connected pattern of `n` points (asymmetric with overwhelming
/// probability), normalised.
pub fn random_connected(seed: u64, n: usize) -> Pattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![Point::ORIGIN];
    while pts.len() < n {
        let base = pts[rng.gen_range(0..pts.len())];
        let q = base + Point::polar(rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI));
        if far_enough(&pts, q, MIN_SPACING) {
            pts.push(q);
        }
    }
    normalize(&Pattern::new(pts).expect("distinct points")).expect("non-empty")
}

/// A connected pattern with symmetricity exactly `s` made of `m` orbits.
pub fn symmetric_connected(seed: u64, s: usize, m: usize) -> Pattern {
    assert!(s >= 2 && m >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_0000 ^ (s as u64) << 40);
    let step = 2.0 * PI / s as f64;
    let orbit = |q: Point| (0..s).map(move |k| q.rotate(step * k as f64));
    loop {
        let chord = rng.gen_range(0.45..0.95);
        let r0 = chord / (2.0 * (PI / s as f64).sin());
        let mut fund = vec![Point::polar(r0, rng.gen_range(0.0..step))];
        let mut all: Vec<Point> = orbit(fund[0]).collect();
        let mut tries = 0;
        while fund.len() < m && tries < 10_000 {
            tries += 1;
            let base = fund[rng.gen_range(0..fund.len())];
            let q = base + Point::polar(rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI));
            if q.norm() < 0.3 {
                continue;
            }
            if orbit(q).all(|o| far_enough(&all, o, MIN_SPACING)) {
                fund.push(q);
                all.extend(orbit(q));
            }
        }
        if fund.len() < m {
            continue;
        }
        let p = normalize(&Pattern::new(all).expect("distinct")).expect("non-empty");
        if symmetricity(&p).sym == s && unit_disc_connected(&p.points).unwrap_or(false) {
            return p;
        }
    }
}

/// Regular `n`-gon of circumradius `radius` with a vertex on the +x axis.
pub fn regular_ngon(n: usize, radius: f64) -> Pattern {
    let pts = (0..n).map(|k| Point::polar(radius, 2.0 * PI * k as f64 / n as f64)).collect();
    normalize(&Pattern::new(pts).expect("distinct")).expect("non-empty")
}

/// Two concentric regular `s`-gons at radii `d1`, `d2` and phase offsets.
pub fn two_ring(s: usize, d1: f64, a1: f64, d2: f64, a2: f64) -> Pattern {
    let step = 2.0 * PI / s as f64;
    let mut pts = vec![];
    for k in 0..s {
        pts.push(Point::polar(d1, a1 + step * k as f64));
        pts.push(Point::polar(d2, a2 + step * k as f64));
    }
    normalize(&Pattern::new(pts).expect("distinct")).expect("non-empty")
}

/// A multi-armed spiral: `arms` copies of a curved chain of `per_arm` points.
pub fn spiral(arms: usize, per_arm: usize) -> Pattern {
    let mut pts = vec![];
    for a in 0..arms {
        let base = 2.0 * PI * a as f64 / arms as f64;
        for k in 0..per_arm {
            let r = 0.45 + 0.5 * k as f64;
            pts.push(Point::polar(r, base + 0.2 * k as f64));
        }
    }
    normalize(&Pattern::new(pts).expect("distinct")).expect("non-empty")
}

/// Three concentric hexagons (symmetricity 6, 18 points).
pub fn hexagon_rings() -> Pattern {
    let mut pts = vec![];
    for (ring, r) in [0.8, 1.6, 2.4].iter().enumerate() {
        for k in 0..6 {
            pts.push(Point::polar(*r, PI / 3.0 * k as f64 + 0.1 * ring as f64));
        }
    }
    normalize(&Pattern::new(pts).expect("distinct")).expect("non-empty")
}

/// A square lattice block of `w × h` points with spacing `d`.
pub fn grid(w: usize, h: usize, d: f64) -> Pattern {
    let mut pts = vec![];
    for i in 0..w {
        for j in 0..h {
            pts.push(Point::new(i as f64 * d, j as f64 * d));
        }
    }
    normalize(&Pattern::new(pts).expect("distinct")).expect("non-empty")
}

/// Random pattern with symmetricity `s` built from `n / s` random orbits
/// (not necessarily connected).
pub fn random_orbits(seed: u64, s: usize, n: usize) -> Pattern {
    assert!(n % s == 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 2.0 * PI / s as f64;
    loop {
        let mut pts: Vec<Point> = vec![];
        for _ in 0..n / s {
            let r = rng.gen_range(0.2..3.0);
            let a = rng.gen_range(0.0..step);
            for k in 0..s {
                pts.push(Point::polar(r, a + step * k as f64));
            }
        }
        if let Ok(p) = Pattern::new(pts) {
            if crate::geometry::mindist(&p.points).map(|d| d > 1e-3).unwrap_or(false) {
                return normalize(&p).expect("non-empty");
            }
        }
    }
}

/// `n` random robot positions in a disc of radius 0.45 (so of diameter
/// below 1), pairwise at least `0.3/√n` apart.
pub fn near_gathering(seed: u64, n: usize) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a7e);
    let min = 0.3 / (n as f64).sqrt();
    let mut pts: Vec<Point> = vec![];
    while pts.len() < n {
        let q = Point::polar(0.45 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
        if far_enough(&pts, q, min) {
            pts.push(q);
        }
    }
    pts
}

/// A named corpus entry.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub pattern: Pattern,
}

/// Random connected patterns with sizes spread over `[6, 60]`.
pub fn random_corpus(count: usize) -> Vec<Instance> {
    (0..count)
        .map(|k| {
            let n = 6 + (k * 54) / count.max(2).saturating_sub(1).max(1);
            let n = n.min(60);
            Instance { name: format!("random-{k:02}-n{n}"), pattern: random_connected(1000 + k as u64, n) }
        })
        .collect()
}

/// Hand-picked symmetric patterns.
pub fn symmetric_corpus() -> Vec<Instance> {
    let mut out = vec![];
    let specs = [(2, 3), (2, 5), (3, 3), (3, 4), (4, 3), (4, 6), (5, 3), (6, 3), (6, 5), (8, 3), (3, 12), (2, 20)];
    for (k, &(s, m)) in specs.iter().enumerate() {
        out.push(Instance {
            name: format!("sym{s}-m{m}"),
            pattern: symmetric_connected(77 + k as u64, s, m),
        });
    }
    out.push(Instance { name: "spiral-2x6".into(), pattern: spiral(2, 6) });
    out.push(Instance { name: "spiral-3x5".into(), pattern: spiral(3, 5) });
    out.push(Instance { name: "hexagon-rings".into(), pattern: hexagon_rings() });
    out.push(Instance { name: "grid-4x3".into(), pattern: grid(4, 3, 0.6) });
    out
}

/// The full acceptance corpus: random plus symmetric instances.
pub fn corpus() -> Vec<Instance> {
    let mut v = random_corpus(50);
    v.extend(symmetric_corpus());
    v
}
