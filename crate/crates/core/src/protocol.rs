//! The per-robot decision function.
//!
//! A [`Protocol`] holds everything a robot derives deterministically from the
//! shared pattern: parameters, the drawing path of the first component, the
//! initial drawing pattern and the ideal schedule used to recognise
//! near-gathering snapshots. Building it once and sharing it between robots
//! is a memo of that recomputation; [`Protocol::robot_step`] itself only
//! reads its argument view.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::formation::{detect_formations, plan_move, DetectedFormation, FormationParams, Lattice, StateCells};
use crate::geometry::{angle_0_2pi, mindist, smallest_enclosing_circle, unit_disc_connected, Point, TAU_GEOM};
use crate::matching::min_cost_assignment;
use crate::pathing::{build_drawing_path, PathParams, PathPlan};
use crate::registration::{matches, profiles_compatible, radius_profile};
use crate::symmetry::{normalize, symmetricity, symmetricity_about, Pattern};

/// Hull diameter and path slack.
pub const DELTA: f64 = 0.1;
/// Default scaling constant for ε.
pub const DEFAULT_C: f64 = 0.01;
/// How often `c` may be halved before parameter derivation gives up.
pub const MAX_HALVINGS: u32 = 20;

/// Globally agreed numeric parameters of the main protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub epsilon: f64,
    pub delta: f64,
    pub span: f64,
    pub c: f64,
    pub s: usize,
    pub n: usize,
}

/// Hull span for symmetricity `s`.
pub fn span_for(s: usize) -> f64 {
    (2.0 * PI / s as f64).min(PI / 3.0)
}

/// `c · min(1/s, mindist, 1/√n)`.
pub fn epsilon_for(p: &Pattern, s: usize, c: f64) -> Result<f64> {
    let md = if p.len() >= 2 { mindist(&p.points)? } else { f64::INFINITY };
    Ok(c * (1.0 / s as f64).min(md).min(1.0 / (p.len() as f64).sqrt()))
}

/// Which protocol a pattern is formed with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchKind {
    Main,
    Star,
}

/// `Star` iff `2·sym(P) ≥ |P|`.
pub fn branch_for(n: usize, s: usize) -> BranchKind {
    if 2 * s >= n {
        BranchKind::Star
    } else {
        BranchKind::Main
    }
}

/// What a robot believes it is doing this round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    InitialNearGathering,
    InDrawingFormation,
    InIntermediateDrawingFormation,
    Dropped,
    /// Radial scaling of the star protocol.
    StarScaling,
}

/// Snapshot of a robot's surroundings in its private frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalView {
    /// Other robots within distance 1; the observer is at the origin.
    pub neighbors: Vec<Point>,
}

impl LocalView {
    pub fn new(neighbors: Vec<Point>) -> Self {
        LocalView { neighbors }
    }

    /// Observer first, then the neighbours.
    pub fn points(&self) -> Vec<Point> {
        let mut v = Vec::with_capacity(self.neighbors.len() + 1);
        v.push(Point::ORIGIN);
        v.extend_from_slice(&self.neighbors);
        v
    }

    /// The same view seen through a frame rotated by `theta`.
    pub fn rotated(&self, theta: f64) -> LocalView {
        LocalView { neighbors: self.neighbors.iter().map(|p| p.rotate(theta)).collect() }
    }
}

/// The ε/2–ε/3 triangle formed at the last path vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntermediateShape {
    pub r: [Point; 3],
}

impl IntermediateShape {
    /// Places the triangle at `vk` pointing towards `p2` and `p3`.
    pub fn new(vk: Point, p2: Point, p3: Point, epsilon: f64) -> Result<Self> {
        let u2 = (p2 - vk).unit().ok_or_else(|| Error::Domain("p2 coincides with v_k".into()))?;
        let u3 = (p3 - vk).unit().ok_or_else(|| Error::Domain("p3 coincides with v_k".into()))?;
        Ok(IntermediateShape { r: [vk, vk + u2 * (epsilon / 2.0), vk + u3 * (epsilon / 3.0)] })
    }

    pub fn side_lengths(&self) -> [f64; 3] {
        [self.r[0].dist(self.r[1]), self.r[0].dist(self.r[2]), self.r[1].dist(self.r[2])]
    }
}

/// Notable things a robot did in a round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobotEvent {
    NearGathering,
    FormationMove { vertex: usize },
    Drop { vertex: usize },
    IntermediateFormed,
    Dissolved,
    StarScale { lambda: f64 },
    ProtocolError { message: String },
    PreconditionViolation { message: String },
}

/// Result of one robot's compute step, in its private frame.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub target: Point,
    pub phase: Phase,
    pub event: Option<RobotEvent>,
}

impl StepOutcome {
    fn stay(phase: Phase) -> Self {
        StepOutcome { target: Point::ORIGIN, phase, event: None }
    }

    fn error(phase: Phase, message: String) -> Self {
        StepOutcome { target: Point::ORIGIN, phase, event: Some(RobotEvent::ProtocolError { message }) }
    }
}

/// Configurations and phases of a fault-free execution, indexed by slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub configs: Vec<Vec<Point>>,
    pub phases: Vec<Vec<Phase>>,
}

#[derive(Clone, Debug)]
struct Snapshot {
    profile: Vec<f64>,
    config: Vec<Point>,
}

fn snapshots_of(schedule: &Schedule) -> Vec<Snapshot> {
    schedule
        .configs
        .iter()
        .filter(|c| c.iter().any(|p| c.iter().all(|q| p.dist(*q) <= 1.0)))
        .map(|c| Snapshot { profile: radius_profile(c), config: c.clone() })
        .collect()
}

fn matches_any(pts: &[Point], snaps: &[Snapshot], tol: f64) -> bool {
    let prof = radius_profile(pts);
    snaps.iter().any(|s| {
        profiles_compatible(&prof, &s.profile, tol) && matches(pts, &s.config, tol).unwrap_or(false)
    })
}

#[derive(Clone, Debug)]
struct VertexStep {
    move_local: Point,
    drops_local: Vec<Point>,
    next: Option<StateCells>,
}

/// Working-frame data of the two-round endgame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Endgame {
    pub vk: Point,
    /// `p₁, p₂, p₃`: `p₁` is the tail coordinate nearest `v_k`.
    pub targets: [Point; 3],
    pub shape: IntermediateShape,
}

impl Endgame {
    fn new(plan: &PathPlan, epsilon: f64) -> Result<Self> {
        let vk = plan.path.vertices[plan.path.last()];
        let mut t: Vec<Point> = plan.tail_triple().iter().map(|&k| plan.component_points[k]).collect();
        let first = (0..3).min_by(|&a, &b| t[a].dist(vk).total_cmp(&t[b].dist(vk))).expect("three points");
        let p1 = t.remove(first);
        let shape = IntermediateShape::new(vk, t[0], t[1], epsilon)?;
        Ok(Endgame { vk, targets: [p1, t[0], t[1]], shape })
    }

    /// Offsets of the three roles from `v_k`.
    pub fn offsets(&self) -> [Point; 3] {
        [Point::ORIGIN, self.shape.r[1] - self.vk, self.shape.r[2] - self.vk]
    }
}

/// Plan of the drawing-formation protocol.
#[derive(Clone, Debug)]
pub struct MainPlan {
    pub params: ProtocolParams,
    pub lattice: Lattice,
    pub plan: PathPlan,
    /// The full pattern in the working frame.
    pub working: Vec<Point>,
    pub endgame: Endgame,
    pub initial: Vec<Point>,
    pub schedule: Schedule,
    labels: HashMap<(usize, u128), usize>,
    steps: Vec<VertexStep>,
    snapshots: Vec<Snapshot>,
}

/// Plan of the star protocol.
#[derive(Clone, Debug)]
pub struct StarPlan {
    pub s: usize,
    /// Largest distance of a pattern point from the centre.
    pub radius: f64,
    /// Scale of the shrunk pattern formed in the first round.
    pub lambda0: f64,
    pub schedule: Schedule,
    /// One pattern index per orbit.
    reps: Vec<usize>,
    snapshots: Vec<Snapshot>,
}

impl StarPlan {
    /// Scale after `t` scaling rounds.
    pub fn lambda_at(&self, t: usize) -> f64 {
        if self.radius == 0.0 {
            return 1.0;
        }
        (self.lambda0 + t as f64 / self.radius).min(1.0)
    }

    /// Scaling rounds needed to reach the pattern from the shrunk copy.
    pub fn scaling_rounds(&self) -> usize {
        let mut t = 0;
        while self.lambda_at(t) < 1.0 {
            t += 1;
        }
        t
    }
}

#[derive(Clone, Debug)]
pub enum Branch {
    Main(Box<MainPlan>),
    Star(StarPlan),
}

/// Knobs of protocol construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    /// Starting value of `c` (halved on demand).
    pub c: f64,
    /// Movement imprecision the tolerances must absorb.
    pub noise_mu: f64,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions { c: DEFAULT_C, noise_mu: 0.0 }
    }
}

/// Everything robots derive from the shared pattern.
#[derive(Clone, Debug)]
pub struct Protocol {
    pub pattern: Pattern,
    pub sym: usize,
    pub branch: Branch,
    tol: f64,
}

/// Derives the parameters, lattice and drawing path for the main protocol.
pub fn derive_plan(p: &Pattern, c0: f64) -> Result<(ProtocolParams, Lattice, PathPlan)> {
    let p = if p.normalized { p.clone() } else { normalize(p)? };
    let s = symmetricity(&p).sym;
    let n = p.len();
    if branch_for(n, s) == BranchKind::Star {
        return Err(Error::Config(format!("symmetricity {s} ≥ n/2 = {}: star protocol applies", n as f64 / 2.0)));
    }
    if !unit_disc_connected(&p.points)? {
        return Err(Error::Config("pattern is not connected".into()));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::Config(format!("c must be positive, got {c0}")));
    }
    let span = span_for(s);
    let mut c = c0;
    let mut last = Error::Config("no attempt made".into());
    for _ in 0..=MAX_HALVINGS {
        let epsilon = epsilon_for(&p, s, c)?;
        let params = ProtocolParams { epsilon, delta: DELTA, span, c, s, n };
        if epsilon < DELTA / 3.0 {
            let attempt = FormationParams::new(epsilon, DELTA, span).and_then(|fp| {
                let lat = Lattice::new(fp)?;
                let pp = PathParams { s, delta: DELTA, hull_diam: DELTA, epsilon };
                let plan = build_drawing_path(&p, &pp, &lat)?;
                Ok((lat, plan))
            });
            match attempt {
                Ok((lat, plan)) => return Ok((params, lat, plan)),
                Err(e) => last = e,
            }
        }
        c /= 2.0;
    }
    Err(Error::Config(format!("no admissible parameters after {MAX_HALVINGS} halvings of c: {last}")))
}

/// Parameters of the main protocol (see [`derive_plan`]).
pub fn derive_params(p: &Pattern) -> Result<ProtocolParams> {
    derive_plan(p, DEFAULT_C).map(|t| t.0)
}

fn rotation(j: usize, s: usize) -> f64 {
    2.0 * PI * j as f64 / s as f64
}

impl MainPlan {
    fn new(p: &Pattern, c0: f64) -> Result<Self> {
        let (params, lattice, plan) = derive_plan(p, c0)?;
        let working: Vec<Point> = p.points.iter().map(|q| q.rotate(plan.theta)).collect();
        let labels = plan.label_index();
        let path = &plan.path;
        let mut steps = Vec::with_capacity(path.last());
        for i in 0..path.last() {
            let vi = path.vertices[i];
            let drops_local = if path.in_tail(i) {
                vec![]
            } else {
                path.coverage[i].iter().map(|&k| plan.component_points[k] - vi).collect()
            };
            let (l, idx) = plan.labels[i + 1];
            steps.push(VertexStep {
                move_local: path.vertices[i + 1] - vi,
                drops_local,
                next: Some(lattice.state_by_index(l, idx)?),
            });
        }
        let endgame = Endgame::new(&plan, params.epsilon)?;
        let mut mp = MainPlan {
            params,
            lattice,
            plan,
            working,
            endgame,
            initial: vec![],
            schedule: Schedule { configs: vec![], phases: vec![] },
            labels,
            steps,
            snapshots: vec![],
        };
        mp.schedule = mp.ideal_schedule()?;
        mp.initial = mp.schedule.configs[0].clone();
        mp.snapshots = snapshots_of(&mp.schedule);
        Ok(mp)
    }

    /// Number of robots per formation.
    pub fn component_size(&self) -> usize {
        self.plan.component.len()
    }

    pub fn hops(&self) -> usize {
        self.plan.path.hops()
    }

    fn formation_at(&self, j: usize, vertex: usize, members: &[usize], locs: &[usize], cells: &StateCells) -> DetectedFormation {
        let s = self.params.s;
        let fp = self.lattice.params;
        let hull = fp.hull(self.plan.path.vertices[vertex].rotate(rotation(j, s)), Point::polar(1.0, rotation(j, s)));
        DetectedFormation {
            hull,
            members: members.to_vec(),
            locations: locs.to_vec(),
            cells: cells.clone(),
            state_index: self.lattice.index_of_state(cells).unwrap_or(0),
            size: members.len(),
        }
    }

    /// Executes the protocol globally with exact moves, tracking slots.
    fn ideal_schedule(&self) -> Result<Schedule> {
        let s = self.params.s;
        let m = self.component_size();
        let n = s * m;
        let lat = &self.lattice;
        let (l0, idx0) = self.plan.labels[0];
        let mut cells = lat.state_by_index(l0, idx0)?;
        let locs0 = lat.state_locations(&cells);
        let mut pos = vec![Point::ORIGIN; n];
        // members[j] = (slot, location) sorted by location
        let mut members: Vec<Vec<(usize, usize)>> = vec![];
        for j in 0..s {
            let f = self.formation_at(j, 0, &[], &[], &cells);
            let mut mem = vec![];
            for (t, &loc) in locs0.iter().enumerate() {
                let slot = j * m + t;
                pos[slot] = f.hull.to_global(lat.offset(loc));
                mem.push((slot, loc));
            }
            members.push(mem);
        }
        let mut dropped = vec![false; n];
        let phase_vec = |dropped: &[bool], inter: bool| -> Vec<Phase> {
            dropped
                .iter()
                .map(|&d| {
                    if d {
                        Phase::Dropped
                    } else if inter {
                        Phase::InIntermediateDrawingFormation
                    } else {
                        Phase::InDrawingFormation
                    }
                })
                .collect()
        };
        let mut configs = vec![pos.clone()];
        let mut phases = vec![phase_vec(&dropped, false)];
        for (i, step) in self.steps.iter().enumerate() {
            for (j, mem) in members.iter_mut().enumerate() {
                let slots: Vec<usize> = mem.iter().map(|x| x.0).collect();
                let locs: Vec<usize> = mem.iter().map(|x| x.1).collect();
                let f = self.formation_at(j, i, &slots, &locs, &cells);
                let targets = plan_move(&f, lat, step.move_local, &step.drops_local, step.next.as_ref())?;
                let mut next = vec![];
                for (k, t) in targets.iter().enumerate() {
                    pos[slots[k]] = t.position;
                    match t.next_location {
                        Some(loc) => next.push((slots[k], loc)),
                        None => dropped[slots[k]] = true,
                    }
                }
                next.sort_by_key(|x| x.1);
                *mem = next;
            }
            cells = step.next.clone().expect("body and tail moves keep a formation");
            configs.push(pos.clone());
            phases.push(phase_vec(&dropped, false));
        }
        // Endgame round 1: intermediate shape.
        let off = self.endgame.offsets();
        for (j, mem) in members.iter().enumerate() {
            if mem.len() != 3 {
                return Err(Error::Protocol(format!("final formation has {} robots", mem.len())));
            }
            let r = rotation(j, s);
            for (role, &(slot, _)) in mem.iter().enumerate() {
                pos[slot] = (self.endgame.vk + off[role]).rotate(r);
            }
        }
        configs.push(pos.clone());
        phases.push(phase_vec(&dropped, true));
        // Round 2: dissolve onto the last three coordinates.
        for (j, mem) in members.iter().enumerate() {
            let r = rotation(j, s);
            for (role, &(slot, _)) in mem.iter().enumerate() {
                pos[slot] = self.endgame.targets[role].rotate(r);
                dropped[slot] = true;
            }
        }
        configs.push(pos);
        phases.push(phase_vec(&dropped, false));
        Ok(Schedule { configs, phases })
    }
}

impl StarPlan {
    fn new(p: &Pattern, s: usize) -> Self {
        let radius = p.points.iter().map(|q| q.norm()).fold(0.0, f64::max);
        let lambda0 = if radius > 0.0 { (0.4 / radius).min(1.0) } else { 1.0 };
        let info = symmetricity(p);
        let reps = info.orbit_partition.iter().map(|o| o[0]).collect();
        let mut sp = StarPlan { s, radius, lambda0, schedule: Schedule { configs: vec![], phases: vec![] }, reps, snapshots: vec![] };
        let rounds = sp.scaling_rounds();
        for t in 0..=rounds {
            let l = sp.lambda_at(t);
            sp.schedule.configs.push(p.points.iter().map(|&q| q * l).collect());
            sp.schedule.phases.push(vec![Phase::StarScaling; p.len()]);
        }
        sp.snapshots = snapshots_of(&sp.schedule);
        sp
    }
}

impl Protocol {
    pub fn new(p: &Pattern) -> Result<Self> {
        Self::with_options(p, ProtocolOptions::default())
    }

    pub fn with_options(p: &Pattern, opts: ProtocolOptions) -> Result<Self> {
        let pattern = normalize(p)?;
        let sym = symmetricity(&pattern).sym;
        let branch = match branch_for(pattern.len(), sym) {
            BranchKind::Star => Branch::Star(StarPlan::new(&pattern, sym)),
            BranchKind::Main => Branch::Main(Box::new(MainPlan::new(&pattern, opts.c)?)),
        };
        let mut proto = Protocol { pattern, sym, branch, tol: TAU_GEOM };
        proto.set_noise(opts.noise_mu);
        Ok(proto)
    }

    /// Widens detection tolerances for movement imprecision `mu`.
    pub fn set_noise(&mut self, mu: f64) {
        let hops = match &self.branch {
            Branch::Main(m) => m.hops().max(1),
            Branch::Star(s) => s.scaling_rounds().max(1),
        };
        self.tol = TAU_GEOM.max(3.0 * hops as f64 * mu);
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    fn match_tol(&self) -> f64 {
        (4.0 * self.tol).max(1e-7)
    }

    pub fn kind(&self) -> BranchKind {
        match self.branch {
            Branch::Main(_) => BranchKind::Main,
            Branch::Star(_) => BranchKind::Star,
        }
    }

    pub fn main(&self) -> Option<&MainPlan> {
        match &self.branch {
            Branch::Main(m) => Some(m),
            Branch::Star(_) => None,
        }
    }

    pub fn star(&self) -> Option<&StarPlan> {
        match &self.branch {
            Branch::Star(s) => Some(s),
            Branch::Main(_) => None,
        }
    }

    pub fn params(&self) -> Option<&ProtocolParams> {
        self.main().map(|m| &m.params)
    }

    pub fn schedule(&self) -> &Schedule {
        match &self.branch {
            Branch::Main(m) => &m.schedule,
            Branch::Star(s) => &s.schedule,
        }
    }

    /// The configuration reached by the near-gathering round: the initial
    /// drawing pattern, or the shrunk pattern for the star protocol.
    pub fn initial_configuration(&self) -> &[Point] {
        &self.schedule().configs[0]
    }

    /// The initial drawing pattern (main protocol only).
    pub fn initial_drawing_pattern(&self) -> Result<Vec<Point>> {
        match &self.branch {
            Branch::Main(m) => Ok(m.initial.clone()),
            Branch::Star(_) => Err(Error::Config("star patterns have no initial drawing pattern".into())),
        }
    }

    /// Phase the robot observing `view` is in.
    pub fn classify_phase(&self, view: &LocalView) -> Phase {
        self.robot_step(view).phase
    }

    /// Movement target in the observer's frame. Pure in `view`.
    pub fn robot_step(&self, view: &LocalView) -> StepOutcome {
        let pts = view.points();
        match &self.branch {
            Branch::Main(m) => self.main_step(m, &pts),
            Branch::Star(s) => self.star_step(s, &pts),
        }
    }

    fn main_step(&self, m: &MainPlan, pts: &[Point]) -> StepOutcome {
        let n = self.pattern.len();
        if pts.len() == n && !matches_any(pts, &m.snapshots, self.match_tol()) {
            return near_gathering_step(pts, &m.initial, m.params.s, self.tol);
        }
        let forms = detect_formations(pts, &m.lattice, self.tol, Some(Point::ORIGIN));
        if let Some(f) = forms.first() {
            let mut out = self.traverse_step(m, f);
            if forms.len() > 1 && out.event.is_none() {
                out.event = Some(RobotEvent::ProtocolError { message: format!("{} formations contain the robot", forms.len()) });
            }
            return out;
        }
        if let Some(out) = self.last_three_step(m, pts) {
            return out;
        }
        StepOutcome::stay(Phase::Dropped)
    }

    /// Move of a formation member whose formation `f` was detected.
    pub fn traverse_step(&self, m: &MainPlan, f: &DetectedFormation) -> StepOutcome {
        let phase = Phase::InDrawingFormation;
        let Some(&i) = m.labels.get(&(f.size, f.state_index)) else {
            return StepOutcome::error(phase, format!("state ({}, {}) matches no path vertex", f.size, f.state_index));
        };
        let Some(me) = f.members.iter().position(|&k| k == 0) else {
            return StepOutcome::error(phase, "robot is not a member of its formation".into());
        };
        if i == m.plan.path.last() {
            let role = match f.locations[me] {
                0 => 0,
                1 => 1,
                _ => 2,
            };
            if f.size != 3 {
                return StepOutcome::error(phase, format!("final formation has {} robots", f.size));
            }
            let target = f.hull.to_global(m.endgame.offsets()[role]);
            return StepOutcome { target, phase, event: Some(RobotEvent::IntermediateFormed) };
        }
        let step = &m.steps[i];
        match plan_move(f, &m.lattice, step.move_local, &step.drops_local, step.next.as_ref()) {
            Ok(t) => {
                let event = if t[me].next_location.is_none() {
                    RobotEvent::Drop { vertex: i }
                } else {
                    RobotEvent::FormationMove { vertex: i }
                };
                StepOutcome { target: t[me].position, phase, event: Some(event) }
            }
            Err(e) => StepOutcome::error(phase, e.to_string()),
        }
    }

    /// Second endgame round: a robot of an intermediate shape moves onto
    /// its coordinate. `None` if the robot is in no intermediate shape.
    pub fn last_three_step(&self, m: &MainPlan, pts: &[Point]) -> Option<StepOutcome> {
        let eps = m.params.epsilon;
        let tol = self.tol.min(eps / 15.0);
        let off = m.endgame.offsets();
        let u2 = off[1].unit()?;
        let u3 = off[2].unit()?;
        let side = off[1].dist(off[2]);
        let orient = u2.cross(u3);
        let near: Vec<usize> = (0..pts.len()).filter(|&k| pts[k].norm() <= eps).collect();
        for &a in &near {
            for &b in &near {
                if b == a || (pts[a].dist(pts[b]) - eps / 2.0).abs() > tol {
                    continue;
                }
                for &c in &near {
                    if c == a || c == b || (pts[a].dist(pts[c]) - eps / 3.0).abs() > tol {
                        continue;
                    }
                    if (pts[b].dist(pts[c]) - side).abs() > 2.0 * tol {
                        continue;
                    }
                    let o = (pts[b] - pts[a]).cross(pts[c] - pts[a]) / (eps * eps / 6.0);
                    if orient.abs() > 0.05 && o * orient <= 0.0 {
                        continue;
                    }
                    let role = if a == 0 {
                        0
                    } else if b == 0 {
                        1
                    } else if c == 0 {
                        2
                    } else {
                        continue;
                    };
                    let rb = (pts[b] - pts[a]).unit()?.unrotate_by_unit(u2);
                    let rc = (pts[c] - pts[a]).unit()?.unrotate_by_unit(u3);
                    let rot = (rb + rc).unit().unwrap_or(rb);
                    let target = pts[a] + (m.endgame.targets[role] - m.endgame.vk).rotate_by_unit(rot);
                    let crowd =
                        (0..pts.len()).filter(|&k| k != a && k != b && k != c && pts[k].dist(pts[a]) <= eps).count();
                    let event = if crowd > 0 {
                        RobotEvent::PreconditionViolation { message: format!("{crowd} other robots within ε of v_k") }
                    } else {
                        RobotEvent::Dissolved
                    };
                    return Some(StepOutcome { target, phase: Phase::InIntermediateDrawingFormation, event: Some(event) });
                }
            }
        }
        None
    }

    fn star_step(&self, sp: &StarPlan, pts: &[Point]) -> StepOutcome {
        let n = self.pattern.len();
        if pts.len() == n && !matches_any(pts, &sp.snapshots, self.match_tol()) {
            let slots = &sp.schedule.configs[0];
            return near_gathering_step(pts, slots, sp.s, self.tol);
        }
        let phase = Phase::StarScaling;
        if n == 1 {
            return StepOutcome::stay(phase);
        }
        let tol = self.match_tol();
        let Some(w) = pts[1..].iter().copied().min_by(|a, b| a.norm().total_cmp(&b.norm())) else {
            return StepOutcome::error(phase, "no neighbour visible".into());
        };
        let p = &self.pattern.points;
        let mut found: Option<(f64, Point)> = None;
        for &a in &sp.reps {
            let dmin = (0..n).filter(|&j| j != a).map(|j| p[j].dist(p[a])).fold(f64::INFINITY, f64::min);
            for b in (0..n).filter(|&b| b != a && p[b].dist(p[a]) <= dmin + 1e-9) {
                let lambda = w.norm() / p[b].dist(p[a]);
                if lambda < sp.lambda0 - 1e-9 || lambda > 1.0 + 1e-9 {
                    continue;
                }
                let Some(rot) = w.unit().zip((p[b] - p[a]).unit()).map(|(x, y)| x.unrotate_by_unit(y)) else {
                    continue;
                };
                let pred: Vec<Point> = p.iter().map(|&q| (q - p[a]).rotate_by_unit(rot) * lambda).collect();
                let mut pairs = Vec::with_capacity(pts.len());
                for o in pts {
                    match pred.iter().position(|q| q.dist(*o) <= tol) {
                        Some(j) => pairs.push((p[j], *o)),
                        None => break,
                    }
                }
                let pred_ok =
                    pred.iter().filter(|q| q.norm() <= 1.0 - tol).all(|q| pts.iter().any(|o| o.dist(*q) <= tol));
                if pairs.len() != pts.len() || !pred_ok {
                    continue;
                }
                // Least-squares similarity over every matched robot: observed ≈ g·q + centre.
                let (g, centre) = fit_similarity(&pairs);
                let lambda = g.norm();
                let next = (lambda + 1.0 / sp.radius).min(1.0);
                let target = centre + p[a].rotate_by_unit(g) * (next / lambda);
                match found {
                    Some((_, t)) if t.dist(target) > tol => {
                        return StepOutcome::error(phase, "ambiguous star registration".into());
                    }
                    Some(_) => {}
                    None => found = Some((lambda, target)),
                }
            }
        }
        match found {
            Some((lambda, target)) => {
                let event = (target.norm() > 0.0).then_some(RobotEvent::StarScale { lambda });
                StepOutcome { target, phase, event }
            }
            None => StepOutcome::error(phase, "view matches no scaled copy of the pattern".into()),
        }
    }
}

/// Complex least squares `dst ≈ g·src + c` (g encodes rotation and scale).
fn fit_similarity(pairs: &[(Point, Point)]) -> (Point, Point) {
    let n = pairs.len() as f64;
    let ms = pairs.iter().fold(Point::ORIGIN, |a, p| a + p.0) / n;
    let md = pairs.iter().fold(Point::ORIGIN, |a, p| a + p.1) / n;
    let mut num = Point::ORIGIN;
    let mut den = 0.0;
    for (q, o) in pairs {
        let (x, y) = (*q - ms, *o - md);
        // y · conj(x)
        num = num + y.unrotate_by_unit(x);
        den += x.norm2();
    }
    let g = num / den;
    (g, md - ms.rotate_by_unit(g))
}

fn near_gathering_step(pts: &[Point], slots: &[Point], s_target: usize, tol: f64) -> StepOutcome {
    let phase = Phase::InitialNearGathering;
    match canonical_assignment(pts, slots, s_target, tol) {
        Ok(t) => StepOutcome { target: t[0], phase, event: Some(RobotEvent::NearGathering) },
        Err(e) => StepOutcome::error(phase, e.to_string()),
    }
}

fn cmp_tol(a: f64, b: f64, tol: f64) -> Ordering {
    if (a - b).abs() <= tol {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Polar description of `rel` seen from robot `r`: (angle from `r`, radius)
/// of every other robot, sorted.
fn signature(rel: &[Point], r: usize, tol: f64) -> Vec<(f64, f64)> {
    let base = rel[r].angle();
    let mut v: Vec<(f64, f64)> = rel
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != r)
        .map(|(_, q)| {
            let rad = q.norm();
            let mut ang = if rad <= tol { 0.0 } else { angle_0_2pi(q.angle() - base) };
            if 2.0 * PI - ang <= tol {
                ang = 0.0;
            }
            (ang, rad)
        })
        .collect();
    v.sort_by(|a, b| cmp_tol(a.0, b.0, tol).then(cmp_tol(a.1, b.1, tol)));
    v
}

fn cmp_signature(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = cmp_tol(x.0, y.0, tol).then(cmp_tol(x.1, y.1, tol));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

fn sector(q: Point, k: usize, tol: f64) -> usize {
    if k == 1 || q.norm() <= tol {
        return 0;
    }
    let w = 2.0 * PI / k as f64;
    let a = angle_0_2pi(q.angle());
    let mut i = ((a / w).floor() as usize).min(k - 1);
    if (i + 1) as f64 * w - a <= 1e-9 {
        i = (i + 1) % k;
    }
    i
}

/// Rotation-equivariant assignment of the fully visible robots `pts` to
/// `slots` (given about their symmetry centre, which is placed on the
/// robots' smallest-enclosing-circle centre). Returns one target per robot.
pub fn canonical_assignment(pts: &[Point], slots: &[Point], s_target: usize, tol: f64) -> Result<Vec<Point>> {
    let n = pts.len();
    if n != slots.len() {
        return domain(format!("{n} robots for {} slots", slots.len()));
    }
    let c = smallest_enclosing_circle(pts)?.center;
    if n == 1 {
        return Ok(vec![c + slots[0]]);
    }
    let stol = (10.0 * tol).max(1e-9);
    let k = symmetricity_about(pts, c, stol).sym;
    if s_target % k != 0 {
        return Err(Error::Protocol(format!("configuration symmetricity {k} does not divide {s_target}")));
    }
    let rel: Vec<Point> = pts.iter().map(|&q| q - c).collect();
    let rmax = rel.iter().map(|q| q.norm()).fold(0.0, f64::max);
    let outer: Vec<usize> = (0..n).filter(|&i| rel[i].norm() >= rmax - stol).collect();
    let sigs: Vec<Vec<(f64, f64)>> = outer.iter().map(|&i| signature(&rel, i, stol)).collect();
    let mut best = 0;
    for t in 1..outer.len() {
        if cmp_signature(&sigs[t], &sigs[best], stol) == Ordering::Greater {
            best = t;
        }
    }
    let u = rel[outer[best]].unit().ok_or_else(|| Error::Protocol("degenerate reference robot".into()))?;
    let q: Vec<Point> = rel.iter().map(|r| r.unrotate_by_unit(u)).collect();
    let w = 2.0 * PI / k as f64;
    let r0: Vec<usize> = (0..n).filter(|&i| sector(q[i], k, stol) == 0).collect();
    let s0: Vec<usize> = (0..n).filter(|&i| sector(slots[i], k, stol) == 0).collect();
    if r0.len() != s0.len() || r0.len() * k != n {
        return Err(Error::Protocol("robot and slot sectors differ in size".into()));
    }
    let cost: Vec<Vec<f64>> = r0.iter().map(|&i| s0.iter().map(|&j| q[i].dist2(slots[j])).collect()).collect();
    let assign = min_cost_assignment(&cost);
    let mut out = Vec::with_capacity(n);
    for &qi in &q {
        let j = sector(qi, k, stol);
        let q0 = qi.rotate(-w * j as f64);
        let (t, d) = r0
            .iter()
            .enumerate()
            .map(|(t, &i)| (t, q[i].dist(q0)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty sector");
        if d > 100.0 * stol {
            return Err(Error::Protocol("robot has no symmetric counterpart".into()));
        }
        let slot = slots[s0[assign[t]]].rotate(w * j as f64);
        out.push(c + slot.rotate_by_unit(u));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_connected, regular_ngon, symmetric_connected};

    #[test]
    fn span_and_epsilon_examples() {
        assert!((span_for(7) - 2.0 * PI / 7.0).abs() < 1e-15);
        assert!((span_for(1) - PI / 3.0).abs() < 1e-15);
        // 100 points on a 10 × 10 grid with spacing 0.5: 1/√n binds.
        let pts = (0..100).map(|k| Point::new((k % 10) as f64 * 0.5, (k / 10) as f64 * 0.5)).collect();
        let p = Pattern::new(pts).unwrap();
        assert!((epsilon_for(&p, 1, 0.01).unwrap() - 0.001).abs() < 1e-15);
    }

    #[test]
    fn branch_dispatch() {
        assert_eq!(branch_for(4, 4), BranchKind::Star);
        assert_eq!(branch_for(12, 3), BranchKind::Main);
        assert_eq!(branch_for(6, 3), BranchKind::Star);
        assert_eq!(branch_for(3, 1), BranchKind::Main);
    }

    #[test]
    fn initial_pattern_single_component() {
        let p = random_connected(5, 12);
        let proto = Protocol::new(&p).unwrap();
        let m = proto.main().unwrap();
        assert_eq!(m.plan.path.vertices[0], Point::polar(0.2, PI));
        let i = proto.initial_drawing_pattern().unwrap();
        assert_eq!(i.len(), 12);
        assert!(crate::geometry::diameter(&i) <= 1.0);
    }

    #[test]
    fn initial_pattern_keeps_symmetry() {
        let p = symmetric_connected(3, 4, 3);
        let proto = Protocol::new(&p).unwrap();
        let i = proto.initial_drawing_pattern().unwrap();
        assert_eq!(i.len(), 12);
        assert!(crate::geometry::diameter(&i) <= 1.0);
        let ip = Pattern::new(i).unwrap();
        assert_eq!(symmetricity(&normalize(&ip).unwrap()).sym, 4);
    }

    #[test]
    fn star_patterns_skip_main_derivation() {
        assert!(derive_params(&regular_ngon(6, 1.0)).is_err());
        let proto = Protocol::new(&regular_ngon(6, 1.0)).unwrap();
        assert_eq!(proto.kind(), BranchKind::Star);
    }

    #[test]
    fn intermediate_shape_sides() {
        let sh = IntermediateShape::new(Point::ORIGIN, Point::new(1.0, 0.0), Point::new(0.0, 1.0), 0.01).unwrap();
        let [a, b, c] = sh.side_lengths();
        assert!((a - 0.005).abs() < 1e-15 && (b - 0.01 / 3.0).abs() < 1e-15);
        assert!((c - a).abs() > 1e-4 && (c - b).abs() > 1e-4);
    }

    #[test]
    fn canonical_assignment_is_equivariant() {
        let pts: Vec<Point> = (0..7).map(|k| Point::polar(0.1 + 0.05 * k as f64, 0.9 * k as f64)).collect();
        let slots: Vec<Point> = (0..7).map(|k| Point::polar(0.2, 2.0 * PI * k as f64 / 7.0 + 0.3)).collect();
        let a = canonical_assignment(&pts, &slots, 1, 1e-9).unwrap();
        let th = 1.234;
        let shift = Point::new(0.3, -0.2);
        let moved: Vec<Point> = pts.iter().map(|p| p.rotate(th) + shift).collect();
        let b = canonical_assignment(&moved, &slots, 1, 1e-9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.rotate(th) + shift).dist(*y) < 1e-12);
        }
    }
}
