//! FSYNC round engine with model enforcement and ground-truth bookkeeping.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::formation::check_validity;
use crate::geometry::{mindist, Point, TAU_GEOM};
use crate::protocol::{BranchKind, LocalView, Phase, Protocol, ProtocolOptions, RobotEvent};
use crate::registration::{align, profiles_compatible, radius_profile, Alignment, Registration};
use crate::symmetry::Pattern;

/// Largest displacement accepted per round.
pub const MAX_STEP: f64 = 1.0 + 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameMode {
    RandomPerRound,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub max_rounds: usize,
    /// Verification tolerance.
    pub tolerance: f64,
    pub noise_mu: f64,
    pub frame_mode: FrameMode,
    pub emit_trace: bool,
    /// Evaluate robots on the rayon pool.
    pub parallel: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            max_rounds: 10_000,
            tolerance: 1e-6,
            noise_mu: 0.0,
            frame_mode: FrameMode::RandomPerRound,
            emit_trace: true,
            parallel: true,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.max_rounds < 1 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if !(self.noise_mu >= 0.0 && self.noise_mu.is_finite()) {
            return Err(Error::Config("noise_mu must be a finite non-negative number".into()));
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn counter_key(seed: u64, robot: usize, round: usize, stream: u64) -> u64 {
    splitmix(splitmix(splitmix(seed ^ stream) ^ robot as u64) ^ round as u64)
}

/// Orientation of a robot's private frame.
pub fn frame_angle(seed: u64, robot: usize, round: usize, mode: FrameMode) -> f64 {
    let round = match mode {
        FrameMode::RandomPerRound => round,
        FrameMode::Fixed => 0,
    };
    let k = counter_key(seed, robot, round, 0xf4a3e);
    (k >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU
}

/// Everything robot `i` sees, in its frame rotated by `angle`.
pub fn make_local_view(config: &[Point], i: usize, angle: f64) -> LocalView {
    let me = config[i];
    let neighbors = config
        .iter()
        .enumerate()
        .filter(|&(j, p)| j != i && p.dist(me) <= 1.0)
        .map(|(_, &p)| (p - me).rotate(-angle))
        .collect();
    LocalView { neighbors }
}

/// Registration of `config` onto `pattern` with exact matching.
pub fn verify_pattern(config: &[Point], pattern: &[Point], tol: f64) -> Result<Registration> {
    if config.len() != pattern.len() {
        return domain(format!("configuration has {} robots, pattern has {} points", config.len(), pattern.len()));
    }
    align(config, pattern, tol)
}

/// An event attributed to a robot and round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub round: usize,
    pub robot: usize,
    #[serde(flatten)]
    pub event: RobotEvent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub positions: Vec<Point>,
    pub phases: Vec<Phase>,
    pub events: Vec<Event>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Formed,
    Timeout,
    Aborted,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Formed => "formed",
            Verdict::Timeout => "timeout",
            Verdict::Aborted => "aborted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub verdict: Verdict,
    pub rounds: usize,
    pub max_error: f64,
    pub alignment: Option<Alignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Pattern coordinates, for rendering.
    #[serde(default)]
    pub pattern: Vec<Point>,
    /// Path vertices of every component in global coordinates, for
    /// rendering. Empty for the star branch or when the robots never
    /// reached the schedule.
    #[serde(default)]
    pub paths: Vec<Vec<Point>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<RoundRecord>,
    pub summary: FinalRecord,
}

impl Trace {
    /// JSON lines: one record per round, then the final record.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &self.summary)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace> {
        let mut lines: Vec<String> = vec![];
        for line in r.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                lines.push(line);
            }
        }
        let last = lines.pop().ok_or_else(|| Error::Domain("empty trace".into()))?;
        let summary: FinalRecord = serde_json::from_str(&last)?;
        let records = lines.iter().map(|l| serde_json::from_str(l)).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Trace { records, summary })
    }
}

/// Counters gathered while checking the model every round.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub max_displacement: f64,
    pub min_pair_distance: f64,
    pub phase_checks: usize,
    pub phase_mismatches: usize,
    /// First few mismatches as (round, robot, reported, expected).
    pub mismatch_samples: Vec<(usize, usize, Phase, Phase)>,
    pub validity_checks: usize,
    pub protocol_errors: usize,
    /// Largest per-round displacement of robots of an intermediate shape.
    pub endgame_max_displacement: f64,
    pub endgame_rounds: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub trace: Trace,
    pub stats: RunStats,
    /// Positions of every round, kept even when the trace is not emitted.
    pub final_positions: Vec<Point>,
}

/// Simulator-side knowledge of which ideal slot each robot occupies.
#[derive(Clone, Debug, Default)]
pub struct Bookkeeping {
    /// `slot[robot]`, known once the robots reached the schedule.
    pub slot: Option<Vec<usize>>,
    /// Rounds spent before the schedule starts (0 or 1).
    pub offset: usize,
}

/// Omniscient phase label of `robot` in `round`.
pub fn ground_truth_phase(book: &Bookkeeping, proto: &Protocol, robot: usize, round: usize) -> Phase {
    if round < book.offset {
        return Phase::InitialNearGathering;
    }
    let Some(slot) = &book.slot else {
        return Phase::InitialNearGathering;
    };
    let sched = proto.schedule();
    let t = round - book.offset;
    match sched.phases.get(t) {
        Some(p) => p[slot[robot]],
        None => match proto.kind() {
            BranchKind::Main => Phase::Dropped,
            BranchKind::Star => Phase::StarScaling,
        },
    }
}

fn noise(seed: u64, robot: usize, round: usize, mu: f64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(counter_key(seed, robot, round, 0x9015e));
    let r = mu * rng.gen::<f64>().sqrt();
    Point::polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Builds the protocol for `pattern` and runs it.
pub fn simulate(initial: &[Point], pattern: &Pattern, cfg: &SimConfig, c: f64) -> Result<RunResult> {
    let proto = Protocol::with_options(pattern, ProtocolOptions { c, noise_mu: cfg.noise_mu })?;
    run_fsync(initial, &proto, cfg)
}

/// Runs FSYNC rounds until the pattern is formed, the swarm stops moving,
/// an invariant breaks, or `max_rounds` is reached.
pub fn run_fsync(initial: &[Point], proto: &Protocol, cfg: &SimConfig) -> Result<RunResult> {
    cfg.validate()?;
    let n = proto.pattern.len();
    if initial.len() != n {
        return domain(format!("initial configuration has {} robots, pattern has {n}", initial.len()));
    }
    if n >= 2 {
        mindist(initial)?;
    }
    if cfg.noise_mu > 0.0 {
        if let Some(m) = proto.main() {
            let bound = m.params.epsilon / (10.0 * m.hops().max(1) as f64);
            if cfg.noise_mu >= bound {
                return Err(Error::Config(format!("noise_mu {} must stay below ε/(10·hops) = {bound}", cfg.noise_mu)));
            }
        }
    }
    let pattern = &proto.pattern.points;
    let lattice = proto.main().map(|m| &m.lattice);
    let tol = proto.tolerance();
    let mut book = Bookkeeping::default();
    let start = &proto.schedule().configs[0];
    let mut frame: Option<Alignment> = None;
    match align(initial, start, (1e3 * tol).max(1e-7)) {
        Ok(r) if r.ok => {
            book.slot = Some(r.assignment);
            frame = Some(r.alignment);
        }
        _ => book.offset = 1,
    }
    let mut stats = RunStats { min_pair_distance: f64::INFINITY, ..Default::default() };
    let mut records = vec![];
    let mut pos = initial.to_vec();
    let mut summary = None;
    let mut round = 0usize;
    let pattern_profile = radius_profile(pattern);
    loop {
        let reg = if profiles_compatible(&radius_profile(&pos), &pattern_profile, cfg.tolerance) || round >= cfg.max_rounds {
            verify_pattern(&pos, pattern, cfg.tolerance)?
        } else {
            Registration { ok: false, alignment: Alignment { rotation: 0.0, translation: Point::ORIGIN }, max_error: f64::INFINITY, assignment: vec![] }
        };
        if reg.ok {
            summary = Some(final_record(Verdict::Formed, round, &reg, None));
        } else if round >= cfg.max_rounds {
            summary = Some(final_record(Verdict::Timeout, round, &reg, Some("round limit reached".into())));
        }
        if summary.is_some() {
            if cfg.emit_trace {
                records.push(RoundRecord { round, positions: pos.clone(), phases: vec![], events: vec![] });
            }
            break;
        }
        let step = |i: usize| {
            let angle = frame_angle(cfg.seed, i, round, cfg.frame_mode);
            let view = make_local_view(&pos, i, angle);
            let out = proto.robot_step(&view);
            (pos[i] + out.target.rotate(angle), out)
        };
        let outs: Vec<_> =
            if cfg.parallel { (0..n).into_par_iter().map(step).collect() } else { (0..n).map(step).collect() };
        let mut phases = Vec::with_capacity(n);
        let mut events = vec![];
        let mut next = pos.clone();
        let mut moved = false;
        let mut abort: Option<String> = None;
        for (i, (target, out)) in outs.into_iter().enumerate() {
            phases.push(out.phase);
            if book.slot.is_some() || round < book.offset {
                let truth = ground_truth_phase(&book, proto, i, round);
                stats.phase_checks += 1;
                if truth != out.phase {
                    stats.phase_mismatches += 1;
                    if stats.mismatch_samples.len() < 16 {
                        stats.mismatch_samples.push((round, i, out.phase, truth));
                    }
                }
            }
            if let Some(e) = out.event {
                if matches!(e, RobotEvent::ProtocolError { .. }) {
                    stats.protocol_errors += 1;
                }
                events.push(Event { round, robot: i, event: e });
            }
            let d = target.dist(pos[i]);
            stats.max_displacement = stats.max_displacement.max(d);
            if out.phase == Phase::InIntermediateDrawingFormation {
                stats.endgame_max_displacement = stats.endgame_max_displacement.max(d);
            }
            if d > MAX_STEP && abort.is_none() {
                abort = Some(format!("robot {i} moved {d} > 1 in round {round}"));
            }
            if d > 0.0 {
                moved = true;
                next[i] = if cfg.noise_mu > 0.0 { target + noise(cfg.seed, i, round, cfg.noise_mu) } else { target };
            }
        }
        if phases.iter().any(|&p| p == Phase::InIntermediateDrawingFormation) {
            stats.endgame_rounds += 1;
        }
        if cfg.emit_trace {
            records.push(RoundRecord { round, positions: pos.clone(), phases, events });
        }
        if abort.is_none() && n >= 2 {
            match mindist(&next) {
                Ok(d) => stats.min_pair_distance = stats.min_pair_distance.min(d),
                Err(_) => abort = Some(format!("collision after round {round}")),
            }
        }
        if abort.is_none() {
            if let Some(lat) = lattice {
                let v = check_validity(&next, lat, tol);
                stats.validity_checks += 1;
                if !v.valid {
                    abort = Some(format!("overlapping drawing hulls after round {round}: {:?}", v.overlapping));
                }
            }
        }
        pos = next;
        round += 1;
        if round == book.offset && book.slot.is_none() {
            if let Ok(r) = align(&pos, start, (1e3 * tol).max(1e-7)) {
                if r.ok {
                    book.slot = Some(r.assignment);
                    frame = Some(r.alignment);
                }
            }
        }
        if let Some(reason) = abort {
            let reg = verify_pattern(&pos, pattern, cfg.tolerance)?;
            summary = Some(final_record(Verdict::Aborted, round, &reg, Some(reason)));
            if cfg.emit_trace {
                records.push(RoundRecord { round, positions: pos.clone(), phases: vec![], events: vec![] });
            }
            break;
        }
        if !moved {
            let reg = verify_pattern(&pos, pattern, cfg.tolerance)?;
            if !reg.ok {
                summary = Some(final_record(Verdict::Timeout, round, &reg, Some("swarm stopped moving".into())));
                if cfg.emit_trace {
                    records.push(RoundRecord { round, positions: pos.clone(), phases: vec![], events: vec![] });
                }
                break;
            }
        }
    }
    let mut summary = summary.expect("loop ends with a verdict");
    summary.pattern = pattern.clone();
    if let (Some(m), Some(f)) = (proto.main(), frame) {
        let s = m.params.s;
        summary.paths = (0..s)
            .map(|j| {
                let r = 2.0 * std::f64::consts::PI * j as f64 / s as f64;
                m.plan.path.vertices.iter().map(|v| f.apply(v.rotate(r))).collect()
            })
            .collect();
    }
    Ok(RunResult { trace: Trace { records, summary }, stats, final_positions: pos })
}

fn final_record(verdict: Verdict, rounds: usize, reg: &Registration, reason: Option<String>) -> FinalRecord {
    FinalRecord {
        verdict,
        rounds,
        max_error: reg.max_error,
        alignment: Some(reg.alignment),
        reason,
        pattern: vec![],
        paths: vec![],
    }
}

/// Smallest distance between positions of different robots (for checks).
pub fn collision_free(config: &[Point]) -> bool {
    config.len() < 2 || mindist(config).map(|d| d > TAU_GEOM).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::random_connected;

    #[test]
    fn view_uses_closed_ball() {
        let c = vec![Point::ORIGIN, Point::new(1.0, 0.0), Point::new(1.5, 0.0)];
        let v = make_local_view(&c, 0, 0.0);
        assert_eq!(v.neighbors, vec![Point::new(1.0, 0.0)]);
        let iso = make_local_view(&c, 2, 0.3);
        assert_eq!(iso.neighbors.len(), 1);
        let far = vec![Point::ORIGIN, Point::new(3.0, 0.0)];
        assert!(make_local_view(&far, 0, 0.0).neighbors.is_empty());
    }

    #[test]
    fn views_under_two_seeds_have_equal_distances() {
        let p = random_connected(2, 15);
        for i in 0..15 {
            let d = |seed| {
                let a = frame_angle(seed, i, 4, FrameMode::RandomPerRound);
                let mut v: Vec<f64> = make_local_view(&p.points, i, a).neighbors.iter().map(|q| q.norm()).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let (a, b) = (d(1), d(2));
            assert_eq!(a.len(), b.len());
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn pattern_itself_terminates_at_round_zero() {
        let p = random_connected(9, 10);
        let r = simulate(&p.points, &p, &SimConfig::default(), 0.01).unwrap();
        assert_eq!(r.trace.summary.verdict, Verdict::Formed);
        assert_eq!(r.trace.summary.rounds, 0);
    }

    #[test]
    fn from_initial_pattern_forms() {
        let p = random_connected(4, 12);
        let proto = Protocol::new(&p).unwrap();
        let init = proto.initial_drawing_pattern().unwrap();
        let r = run_fsync(&init, &proto, &SimConfig::default()).unwrap();
        let hops = proto.main().unwrap().hops();
        assert_eq!(r.trace.summary.verdict, Verdict::Formed, "{:?}", r.trace.summary.reason);
        assert!(r.trace.summary.rounds <= hops + 2);
        assert_eq!(r.stats.phase_mismatches, 0, "{:?}", r.stats.mismatch_samples);
    }
}
