//! Event-detecting integration of the smooth pieces, sliding along Σ, and enumeration
//! of branching global trajectories.
//!
//! All integration runs forward in time. Backward branches are produced by integrating
//! the reversed system `(-X, -Y)` and flipping the result.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FpeError, Result};
use crate::psvf::{classify_point, sliding_field, PiecewiseSystem, PointClass, Tolerances, Vec2, Which};

/// Largest |f| at a tangential touch of Σ that is still treated as contact.
pub const GRAZE_TOL: f64 = 1e-7;

/// How the trajectory continues from a decision point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Choice {
    FollowX,
    FollowY,
    Slide,
    ExitSlideToX(f64),
    ExitSlideToY(f64),
    StayFixed,
    /// Junction choice of a symbolic arc system.
    Arc(usize),
}

impl Choice {
    pub fn label(&self) -> String {
        match self {
            Choice::FollowX => "FollowX".into(),
            Choice::FollowY => "FollowY".into(),
            Choice::Slide => "Slide".into(),
            Choice::ExitSlideToX(_) => "ExitSlideToX".into(),
            Choice::ExitSlideToY(_) => "ExitSlideToY".into(),
            Choice::StayFixed => "StayFixed".into(),
            Choice::Arc(j) => format!("Arc{j}"),
        }
    }

    /// Canonical rank: FollowX < FollowY < Slide < exits by time.
    fn rank(&self) -> (u8, f64) {
        match *self {
            Choice::FollowX => (0, 0.0),
            Choice::FollowY => (1, 0.0),
            Choice::Slide => (2, 0.0),
            Choice::ExitSlideToX(t) => (3, t),
            Choice::ExitSlideToY(t) => (3, t + 1e-12),
            Choice::StayFixed => (4, 0.0),
            Choice::Arc(j) => (5, j as f64),
        }
    }

    /// The departure a choice amounts to, for admissibility checks.
    pub fn departure(&self) -> Choice {
        match self {
            Choice::ExitSlideToX(_) => Choice::FollowX,
            Choice::ExitSlideToY(_) => Choice::FollowY,
            other => *other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDecision {
    pub time: f64,
    pub at: [f64; 2],
    pub choice: Choice,
}

impl BranchDecision {
    pub fn point(&self) -> Vec2 {
        Vec2::new(self.at[0], self.at[1])
    }
}

/// What a piece of trajectory is made of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PieceKind {
    Flow(Which),
    Slide,
    Fixed,
    Arc(usize),
}

/// A maximal smooth piece on `[t0, t1]` with its samples on the global `dt` grid.
#[derive(Clone, Debug)]
pub struct Piece {
    pub kind: PieceKind,
    pub t0: f64,
    pub t1: f64,
    pub start: Vec2,
    pub end: Vec2,
    /// `(k, γ(k·dt))` for every grid index with `t0 ≤ k·dt ≤ t1`.
    pub samples: Vec<(i64, Vec2)>,
}

impl Piece {
    fn flipped(&self) -> Piece {
        let mut samples: Vec<(i64, Vec2)> = self.samples.iter().map(|&(k, p)| (-k, p)).collect();
        samples.reverse();
        Piece { kind: self.kind, t0: -self.t1, t1: -self.t0, start: self.end, end: self.start, samples }
    }

    fn truncated(&self, t: f64, at: Vec2, dt: f64) -> Piece {
        let samples = self.samples.iter().copied().filter(|&(k, _)| k as f64 * dt <= t + 1e-12).collect();
        Piece { kind: self.kind, t0: self.t0, t1: t, start: self.start, end: at, samples }
    }
}

/// Branch enumeration controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPolicy {
    pub max_branches: usize,
    /// Spacing Δ_exit of candidate departure times along escaping slides.
    pub slide_exit_grid: f64,
    /// Half-width W of the time window.
    pub horizon: f64,
    pub dedupe: bool,
    /// Forward-time interval in which every admissible continuation is explored; outside
    /// it only the canonical first continuation is taken. `None` branches everywhere.
    pub branch_window: Option<(f64, f64)>,
}

impl Default for BranchPolicy {
    fn default() -> Self {
        Self { max_branches: 20_000, slide_exit_grid: 0.1, horizon: 8.0, dedupe: true, branch_window: None }
    }
}

impl BranchPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_branches < 1 || !(self.slide_exit_grid > 0.0) || !(self.horizon >= 0.0) {
            return Err(FpeError::InvalidArgument(
                "branch policy needs max_branches >= 1, slide_exit_grid > 0, horizon >= 0".into(),
            ));
        }
        Ok(())
    }

    fn branches_at(&self, t: f64) -> bool {
        match self.branch_window {
            None => true,
            Some((lo, hi)) => t >= lo - 1e-12 && t <= hi + 1e-12,
        }
    }
}

/// A global trajectory sampled on `t_k = -W + k·dt`, `k = 0..=2W/dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledTrajectory {
    pub system: String,
    #[serde(rename = "W")]
    pub window: f64,
    pub dt: f64,
    pub points: Vec<[f64; 2]>,
    pub decisions: Vec<BranchDecision>,
    #[serde(default)]
    pub branch_id: usize,
}

impl SampledTrajectory {
    pub fn steps_per_side(&self) -> usize {
        (self.points.len() - 1) / 2
    }

    pub fn time_of(&self, i: usize) -> f64 {
        (i as f64 - self.steps_per_side() as f64) * self.dt
    }

    pub fn point(&self, i: usize) -> Vec2 {
        Vec2::new(self.points[i][0], self.points[i][1])
    }

    /// Piecewise-linear interpolant at time `t` inside the window.
    pub fn at(&self, t: f64) -> Vec2 {
        let u = (t + self.window) / self.dt;
        let i = (u.floor().max(0.0) as usize).min(self.points.len() - 2);
        let a = u - i as f64;
        self.point(i) * (1.0 - a) + self.point(i + 1) * a
    }

    /// Constant trajectory at `p`.
    pub fn constant(system: &str, p: Vec2, window: f64, dt: f64) -> Self {
        let n = grid_steps(window, dt);
        Self {
            system: system.into(),
            window,
            dt,
            points: vec![[p.x, p.y]; 2 * n + 1],
            decisions: vec![],
            branch_id: 0,
        }
    }
}

/// Number of `dt` steps in `[0, W]`; `W/dt` must be an integer up to round-off.
pub fn grid_steps(window: f64, dt: f64) -> usize {
    (window / dt).round() as usize
}

#[inline]
fn rk4<F: Fn(Vec2) -> Vec2>(f: &F, p: Vec2, h: f64) -> Vec2 {
    let k1 = f(p);
    let k2 = f(p + k1 * (0.5 * h));
    let k3 = f(p + k2 * (0.5 * h));
    let k4 = f(p + k3 * h);
    p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Bisection for the first sub-step in `(0, h]` where `pred` turns false; `pred(0)` holds.
fn bisect_step<P: Fn(f64) -> bool>(pred: P, h: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, h);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Next stop for a fixed-step integrator sitting at `t`: the next grid time or an extra target.
fn next_stop(t: f64, dt: f64, t_end: f64, extra: &[f64]) -> f64 {
    let k = (t / dt + 1e-9).floor() + 1.0;
    let mut s = (k * dt).min(t_end);
    for &e in extra {
        if e > t + 1e-12 && e < s {
            s = e;
        }
    }
    s
}

fn grid_index(t: f64, dt: f64) -> Option<i64> {
    let k = (t / dt).round();
    ((t - k * dt).abs() <= 1e-9 * dt.max(1.0)).then_some(k as i64)
}

/// Why a smooth arc stopped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    /// Transversal arrival at Σ.
    Crossing,
    /// Tangential touch of Σ from one side.
    Graze,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    pub point: Vec2,
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub piece: Piece,
    pub event: Option<Event>,
}

/// Fourth-order fixed-step flow of one field from `p` at `t0`, stopped at the first
/// arrival at Σ (located by bisection to `tol_event_time`, then projected onto Σ).
///
/// The side of Σ the arc lives on is the sign of `f` just after departure, so `p` may
/// sit on Σ. Steps are aligned to the global `dt` grid.
pub fn flow_smooth(
    sys: &PiecewiseSystem,
    which: Which,
    p: Vec2,
    t0: f64,
    t_span: f64,
    dt: f64,
    tol: &Tolerances,
) -> Result<FlowOutcome> {
    let field = sys.field(which);
    let f = &sys.f;
    let side = match which {
        Which::X => 1.0,
        Which::Y => -1.0,
    };
    let vel = |q: Vec2| field.eval(q);
    let t_end = t0 + t_span;
    let pad = 1e-9 * sys.domain.diameter();
    let mut samples = Vec::new();
    if let Some(k) = grid_index(t0, dt) {
        samples.push((k, p));
    }
    let (mut t, mut q) = (t0, p);
    // A piece starting on Σ must leave it before an arrival can count.
    let mut departed = side * f.eval(p) > tol.tol_f;
    while t < t_end - 1e-12 {
        let stop = next_stop(t, dt, t_end, &[]);
        let h = stop - t;
        let q1 = rk4(&vel, q, h);
        // Tangential touch: the Lie derivative turns from approaching to receding.
        let lie = |r: Vec2| side * f.grad(r).dot(&field.eval(r));
        // A touch landing on a grid time leaves a round-off sized lie(q1) of either sign.
        if lie(q) < -tol.tol_lie && lie(q1) >= -tol.tol_lie {
            let s = if lie(q1) >= 0.0 { bisect_step(|s| lie(rk4(&vel, q, s)) < 0.0, h, tol.tol_event_time) } else { h };
            let pe = rk4(&vel, q, s);
            if f.eval(pe).abs() <= GRAZE_TOL {
                let te = t + s;
                return Ok(finish_flow(which, p, t0, te, f.project(pe), samples, dt, EventKind::Graze));
            }
        }
        // Transversal arrival on the far side of Σ.
        if departed && side * f.eval(q1) < 0.0 && side * f.eval(q) >= -tol.tol_f {
            let s = bisect_step(|s| side * f.eval(rk4(&vel, q, s)) >= 0.0, h, tol.tol_event_time);
            let te = t + s;
            let pe = f.project(rk4(&vel, q, s));
            return Ok(finish_flow(which, p, t0, te, pe, samples, dt, EventKind::Crossing));
        }
        if !sys.domain.contains_padded(q1, pad) {
            return Err(FpeError::DomainExit { t: stop, x: q1.x, y: q1.y });
        }
        t = stop;
        q = q1;
        departed |= side * f.eval(q) > tol.tol_f;
        if let Some(k) = grid_index(t, dt) {
            samples.push((k, q));
        }
    }
    Ok(FlowOutcome {
        piece: Piece { kind: PieceKind::Flow(which), t0, t1: t_end, start: p, end: q, samples },
        event: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish_flow(
    which: Which,
    p: Vec2,
    t0: f64,
    te: f64,
    pe: Vec2,
    mut samples: Vec<(i64, Vec2)>,
    dt: f64,
    kind: EventKind,
) -> FlowOutcome {
    if let Some(k) = grid_index(te, dt) {
        if samples.last().map(|s| s.0) != Some(k) {
            samples.push((k, pe));
        }
    }
    FlowOutcome {
        piece: Piece { kind: PieceKind::Flow(which), t0, t1: te, start: p, end: pe, samples },
        event: Some(Event { kind, time: te, point: pe }),
    }
}

/// The region of an open part of Σ that supports sliding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlideRegion {
    Sliding,
    Escaping,
}

fn slide_region_at(sys: &PiecewiseSystem, q: Vec2, tol: &Tolerances) -> Option<SlideRegion> {
    let xf = sys.lie1(Which::X, q);
    let yf = sys.lie1(Which::Y, q);
    if xf < -tol.tol_lie && yf > tol.tol_lie {
        Some(SlideRegion::Sliding)
    } else if xf > tol.tol_lie && yf < -tol.tol_lie {
        Some(SlideRegion::Escaping)
    } else {
        None
    }
}

fn probe_step(sys: &PiecewiseSystem) -> f64 {
    1e-6 * sys.domain.diameter()
}

/// Directions `s = ±1` along the Σ tangent in which a slide can leave `p`.
///
/// Away from tangencies this is the sign of `⟨Z^s, T⟩`; at a tangency the sliding field
/// is probed on both sides of `p` and a side qualifies when it lies in Σ^s ∪ Σ^e and the
/// sliding vector there points away from `p`. A vanishing sliding vector in an open
/// region gives the stationary slide, reported as direction `0`.
pub fn slide_directions(sys: &PiecewiseSystem, p: Vec2, tol: &Tolerances) -> Vec<i8> {
    let tan = sys.sigma_tangent(p);
    if slide_region_at(sys, p, tol).is_some() {
        if let Ok(z) = sliding_field(sys, p, tol) {
            let v = z.dot(&tan);
            let speed = z.norm();
            if speed <= tol.tol_lie {
                return vec![0];
            }
            return vec![if v > 0.0 { 1 } else { -1 }];
        }
        return vec![];
    }
    let d = probe_step(sys);
    let mut out = Vec::new();
    for s in [1i8, -1] {
        let q = sys.f.project(p + tan * (d * s as f64));
        if slide_region_at(sys, q, tol).is_none() {
            continue;
        }
        if let Ok(z) = sliding_field(sys, q, tol) {
            if z.dot(&tan) * s as f64 > 0.0 {
                out.push(s);
            }
        }
    }
    out
}

/// Admissible forward continuations at `p`, in canonical order.
pub fn step_filippov(sys: &PiecewiseSystem, p: Vec2, tol: &Tolerances) -> Result<Vec<Choice>> {
    let class = classify_point(sys, p, tol);
    Ok(match class {
        PointClass::SigmaPlus | PointClass::CrossingPos => vec![Choice::FollowX],
        PointClass::SigmaMinus | PointClass::CrossingNeg => vec![Choice::FollowY],
        PointClass::Escaping => vec![Choice::FollowX, Choice::FollowY, Choice::Slide],
        PointClass::Sliding => vec![Choice::Slide],
        PointClass::SingularTangency => vec![Choice::StayFixed],
        PointClass::Degenerate => return Err(FpeError::DegeneratePoint { x: p.x, y: p.y }),
        PointClass::Fold { .. } | PointClass::TwoFold { .. } => {
            let xf = sys.lie1(Which::X, p);
            let yf = sys.lie1(Which::Y, p);
            let x_ok = xf > tol.tol_lie || (xf.abs() <= tol.tol_lie && sys.lie2(Which::X, p) > 0.0);
            let y_ok = yf < -tol.tol_lie || (yf.abs() <= tol.tol_lie && sys.lie2(Which::Y, p) < 0.0);
            let mut v = Vec::new();
            if x_ok {
                v.push(Choice::FollowX);
            }
            if y_ok {
                v.push(Choice::FollowY);
            }
            if !slide_directions(sys, p, tol).is_empty() {
                v.push(Choice::Slide);
            }
            if v.is_empty() {
                v.push(Choice::StayFixed);
            }
            v
        }
    })
}

#[derive(Clone, Debug)]
pub struct SlideOutcome {
    pub piece: Piece,
    pub region: SlideRegion,
    /// True when the slide stopped at a region boundary before the horizon.
    pub hit_boundary: bool,
    /// `(time, point)` every Δ_exit of sliding time, starting at the segment start.
    pub exit_candidates: Vec<(f64, Vec2)>,
}

/// Integrates the sliding field along Σ from `p` at `t0` (forward time), projecting
/// back onto Σ after every step. Stops at the boundary of the sliding/escaping region
/// or at `t_end`. Departure candidates exist only on escaping segments.
pub fn slide_segment(
    sys: &PiecewiseSystem,
    p: Vec2,
    t0: f64,
    t_end: f64,
    dt: f64,
    exit_grid: f64,
    tol: &Tolerances,
) -> Result<SlideOutcome> {
    let dirs = slide_directions(sys, p, tol);
    let Some(&dir) = dirs.first() else {
        let (xf, yf) = (sys.lie1(Which::X, p), sys.lie1(Which::Y, p));
        return Err(FpeError::DegenerateDenominator { x: p.x, y: p.y, gap: yf - xf });
    };
    let tan0 = sys.sigma_tangent(p);
    let probe = sys.f.project(p + tan0 * (probe_step(sys) * dir as f64));
    let region = slide_region_at(sys, p, tol)
        .or_else(|| slide_region_at(sys, probe, tol))
        .expect("slide direction implies a region");
    // One-sided limit of Z^s where the formula degenerates (e.g. at a two-fold).
    let zs = |q: Vec2| -> Vec2 {
        match sliding_field(sys, q, tol) {
            Ok(z) => z,
            Err(_) => {
                let tan = sys.sigma_tangent(q);
                let r = sys.f.project(q + tan * (probe_step(sys) * dir as f64));
                sliding_field(sys, r, tol).unwrap_or_else(|_| Vec2::zeros())
            }
        }
    };
    let stationary = dir == 0;
    let in_region = |q: Vec2| slide_region_at(sys, q, tol) == Some(region);
    let mut exit_times = Vec::new();
    if region == SlideRegion::Escaping {
        let mut k = 0usize;
        loop {
            let te = t0 + k as f64 * exit_grid;
            if te > t_end + 1e-12 {
                break;
            }
            exit_times.push(te);
            k += 1;
        }
    }
    let mut samples = Vec::new();
    if let Some(k) = grid_index(t0, dt) {
        samples.push((k, p));
    }
    let mut cands = Vec::new();
    let pad = 1e-9 * sys.domain.diameter();
    let (mut t, mut q) = (t0, p);
    let mut next_exit = 0usize;
    let push_exit = |t: f64, q: Vec2, next_exit: &mut usize, cands: &mut Vec<(f64, Vec2)>| {
        while *next_exit < exit_times.len() && (exit_times[*next_exit] - t).abs() <= 1e-9 {
            cands.push((exit_times[*next_exit], q));
            *next_exit += 1;
        }
    };
    push_exit(t, q, &mut next_exit, &mut cands);
    let mut hit_boundary = false;
    while t < t_end - 1e-12 {
        let stop = next_stop(t, dt, t_end, &exit_times);
        let h = stop - t;
        let q1 = if stationary { q } else { sys.f.project(rk4(&zs, q, h)) };
        if !stationary && !in_region(q1) {
            let s = bisect_step(|s| in_region(sys.f.project(rk4(&zs, q, s))), h, tol.tol_event_time);
            let qe = sys.f.project(rk4(&zs, q, s));
            let te = t + s;
            if let Some(k) = grid_index(te, dt) {
                if samples.last().map(|x: &(i64, Vec2)| x.0) != Some(k) {
                    samples.push((k, qe));
                }
            }
            t = te;
            q = qe;
            hit_boundary = true;
            break;
        }
        if !sys.domain.contains_padded(q1, pad) {
            return Err(FpeError::DomainExit { t: stop, x: q1.x, y: q1.y });
        }
        t = stop;
        q = q1;
        if let Some(k) = grid_index(t, dt) {
            samples.push((k, q));
        }
        push_exit(t, q, &mut next_exit, &mut cands);
    }
    Ok(SlideOutcome {
        piece: Piece { kind: PieceKind::Slide, t0, t1: t, start: p, end: q, samples },
        region,
        hit_boundary,
        exit_candidates: cands,
    })
}

/// Information handed to a branch selector.
#[derive(Clone, Copy, Debug)]
pub struct DecisionContext {
    /// Forward time of the decision.
    pub time: f64,
    pub point: Vec2,
    /// Decisions already taken on this branch after the seed (Σ events only).
    pub depth: usize,
    /// Departures from Σ^e already taken on this branch after the seed.
    pub departures: usize,
    /// True for a departure candidate along a slide; options then start with `Slide`.
    pub on_slide: bool,
}

/// Picks which of the offered continuations to follow. Options are canonical-ordered.
pub type Selector<'a> = dyn Fn(&DecisionContext, &[Choice]) -> Vec<Choice> + Sync + 'a;

/// Every option inside the policy's branch window, the canonical first one outside.
pub fn policy_selector(policy: &BranchPolicy) -> impl Fn(&DecisionContext, &[Choice]) -> Vec<Choice> + Sync + '_ {
    move |ctx, opts| {
        if policy.branches_at(ctx.time) {
            opts.to_vec()
        } else {
            opts.first().copied().into_iter().collect()
        }
    }
}

/// One root-to-leaf path of a one-directional branch tree.
#[derive(Clone, Debug)]
pub struct HalfBranch {
    pub pieces: Vec<Arc<Piece>>,
}

#[derive(Clone, Debug)]
pub struct HalfTree {
    pub branches: Vec<HalfBranch>,
    pub budget_exceeded: bool,
    pub domain_exits: usize,
}

#[derive(Clone)]
enum Pending {
    /// At a point on (or off) Σ where a continuation must be chosen.
    Decide { t: f64, p: Vec2 },
    /// Forced departure along a field after a slide exit.
    Depart { t: f64, p: Vec2, which: Which },
}

struct Live {
    path: Vec<Arc<Piece>>,
    pending: Pending,
    depth: usize,
    departures: usize,
}

/// Forward branch tree from `seed` at time `t0` up to `t_end`, breadth-first in
/// canonical order. When `max_branches` would be exceeded, every live branch is
/// finished with canonical choices and the tree is flagged.
#[allow(clippy::too_many_arguments)]
pub fn expand_forward(
    sys: &PiecewiseSystem,
    seed: Vec2,
    t0: f64,
    t_end: f64,
    dt: f64,
    tol: &Tolerances,
    policy: &BranchPolicy,
    select: &Selector<'_>,
) -> HalfTree {
    let mut queue: VecDeque<Live> = VecDeque::new();
    queue.push_back(Live { path: vec![], pending: Pending::Decide { t: t0, p: seed }, depth: 0, departures: 0 });
    let mut done: Vec<HalfBranch> = Vec::new();
    let mut exceeded = false;
    let mut domain_exits = 0usize;
    while let Some(live) = queue.pop_front() {
        let children = match advance(sys, &live, t_end, dt, tol, policy, select, exceeded) {
            Ok(c) => c,
            Err(FpeError::DomainExit { .. }) => {
                domain_exits += 1;
                continue;
            }
            Err(_) => continue,
        };
        for c in children {
            if c.1 {
                done.push(HalfBranch { pieces: c.0.path });
            } else {
                queue.push_back(c.0);
            }
        }
        if !exceeded && done.len() + queue.len() > policy.max_branches {
            exceeded = true;
        }
    }
    if policy.dedupe {
        let mut seen = HashSet::new();
        done.retain(|b| seen.insert(signature(&b.pieces)));
    }
    HalfTree { branches: done, budget_exceeded: exceeded, domain_exits }
}

fn signature(pieces: &[Arc<Piece>]) -> Vec<(u8, i64, i64)> {
    pieces
        .iter()
        .map(|p| {
            let k = match p.kind {
                PieceKind::Flow(Which::X) => 0,
                PieceKind::Flow(Which::Y) => 1,
                PieceKind::Slide => 2,
                PieceKind::Fixed => 3,
                PieceKind::Arc(j) => 4 + j as u8,
            };
            (k, (p.t0 * 1e8).round() as i64, (p.t1 * 1e8).round() as i64)
        })
        .collect()
}

/// Expands one live branch by one piece. Returns children flagged `true` when complete.
#[allow(clippy::too_many_arguments)]
fn advance(
    sys: &PiecewiseSystem,
    live: &Live,
    t_end: f64,
    dt: f64,
    tol: &Tolerances,
    policy: &BranchPolicy,
    select: &Selector<'_>,
    canonical_only: bool,
) -> Result<Vec<(Live, bool)>> {
    let (t, p) = match live.pending {
        Pending::Decide { t, p } | Pending::Depart { t, p, .. } => (t, p),
    };
    let mut out = Vec::new();
    // Arrival times drift by round-off per event; within grid tolerance of the end is the end.
    if t >= t_end - 1e-9 * dt.max(1.0) {
        out.push((Live { path: live.path.clone(), pending: live.pending.clone(), ..*live }, true));
        return Ok(out);
    }
    let choices = match live.pending {
        Pending::Depart { which: Which::X, .. } => vec![Choice::FollowX],
        Pending::Depart { which: Which::Y, .. } => vec![Choice::FollowY],
        Pending::Decide { .. } => {
            let opts = step_filippov(sys, p, tol)?;
            let on_sigma = classify_point(sys, p, tol).on_sigma();
            let ctx = DecisionContext { time: t, point: p, depth: live.depth, departures: live.departures, on_slide: false };
            let mut picked = if canonical_only { vec![opts[0]] } else { select(&ctx, &opts) };
            picked.sort_by(|a, b| a.rank().partial_cmp(&b.rank()).unwrap());
            if !on_sigma {
                picked.truncate(1);
            }
            picked
        }
    };
    let forced = matches!(live.pending, Pending::Depart { .. });
    let is_escape = |q: Vec2| {
        matches!(classify_point(sys, q, tol), PointClass::Escaping)
            || (sys.lie1(Which::X, q) >= -tol.tol_lie && sys.lie1(Which::Y, q) <= tol.tol_lie)
    };
    for choice in choices {
        let depth = if forced { live.depth } else { live.depth + 1 };
        match choice {
            Choice::FollowX | Choice::FollowY => {
                let which = if choice == Choice::FollowX { Which::X } else { Which::Y };
                let departures = live.departures + usize::from(!forced && is_escape(p)) + usize::from(forced);
                let fo = flow_smooth(sys, which, p, t, t_end - t, dt, tol)?;
                let mut path = live.path.clone();
                path.push(Arc::new(fo.piece));
                match fo.event {
                    Some(ev) => out.push((
                        Live { path, pending: Pending::Decide { t: ev.time, p: ev.point }, depth, departures },
                        false,
                    )),
                    None => out.push((Live { path, pending: Pending::Decide { t: t_end, p }, depth, departures }, true)),
                }
            }
            Choice::StayFixed => {
                let mut samples = Vec::new();
                let k0 = (t / dt - 1e-9).ceil() as i64;
                let k1 = (t_end / dt + 1e-9).floor() as i64;
                for k in k0..=k1 {
                    samples.push((k, p));
                }
                let mut path = live.path.clone();
                path.push(Arc::new(Piece { kind: PieceKind::Fixed, t0: t, t1: t_end, start: p, end: p, samples }));
                out.push((Live { path, pending: Pending::Decide { t: t_end, p }, depth, departures: live.departures }, true));
            }
            Choice::Slide => {
                let so = slide_segment(sys, p, t, t_end, dt, policy.slide_exit_grid, tol)?;
                let piece = Arc::new(so.piece.clone());
                let mut continue_slide = true;
                for &(te, qe) in so.exit_candidates.iter().skip(1) {
                    if te >= so.piece.t1 - 1e-12 {
                        break;
                    }
                    let opts = [Choice::Slide, Choice::ExitSlideToX(te), Choice::ExitSlideToY(te)];
                    let ctx = DecisionContext { time: te, point: qe, depth, departures: live.departures, on_slide: true };
                    let picked = if canonical_only { vec![Choice::Slide] } else { select(&ctx, &opts) };
                    for c in &picked {
                        let which = match c {
                            Choice::ExitSlideToX(_) => Which::X,
                            Choice::ExitSlideToY(_) => Which::Y,
                            _ => continue,
                        };
                        let mut path = live.path.clone();
                        path.push(Arc::new(so.piece.truncated(te, qe, dt)));
                        out.push((
                            Live { path, pending: Pending::Depart { t: te, p: qe, which }, depth: depth + 1, departures: live.departures },
                            false,
                        ));
                    }
                    if !picked.contains(&Choice::Slide) {
                        continue_slide = false;
                        break;
                    }
                }
                if continue_slide {
                    let mut path = live.path.clone();
                    path.push(piece);
                    let complete = !so.hit_boundary;
                    out.push((
                        Live { path, pending: Pending::Decide { t: so.piece.t1, p: so.piece.end }, depth, departures: live.departures },
                        complete,
                    ));
                }
            }
            Choice::ExitSlideToX(_) | Choice::ExitSlideToY(_) | Choice::Arc(_) => {
                unreachable!("not offered at a decision point")
            }
        }
    }
    Ok(out)
}

/// Forward-time decisions derived from consecutive pieces.
pub fn decisions_of(pieces: &[Arc<Piece>]) -> Vec<BranchDecision> {
    let mut out = Vec::new();
    for (i, pc) in pieces.iter().enumerate() {
        let prev = if i == 0 { None } else { Some(pieces[i - 1].kind) };
        let choice = match (prev, pc.kind) {
            (Some(PieceKind::Slide), PieceKind::Flow(Which::X)) => Choice::ExitSlideToX(pc.t0),
            (Some(PieceKind::Slide), PieceKind::Flow(Which::Y)) => Choice::ExitSlideToY(pc.t0),
            (_, PieceKind::Flow(Which::X)) => Choice::FollowX,
            (_, PieceKind::Flow(Which::Y)) => Choice::FollowY,
            (_, PieceKind::Slide) => Choice::Slide,
            (_, PieceKind::Fixed) => Choice::StayFixed,
            (_, PieceKind::Arc(j)) => Choice::Arc(j),
        };
        // Consecutive slides are one slide cut at a departure candidate that was passed.
        if prev == Some(PieceKind::Slide) && pc.kind == PieceKind::Slide {
            continue;
        }
        out.push(BranchDecision { time: pc.t0, at: [pc.start.x, pc.start.y], choice });
    }
    out
}

/// Joins a backward half-branch (already in forward time) and a forward one into a
/// trajectory sampled on `[-W, W]`.
pub fn assemble(system: &str, window: f64, dt: f64, back: &[Arc<Piece>], fwd: &[Arc<Piece>], on_sigma: &dyn Fn(Vec2) -> bool) -> SampledTrajectory {
    let n = grid_steps(window, dt) as i64;
    let mut points = vec![[f64::NAN, f64::NAN]; (2 * n + 1) as usize];
    let pieces: Vec<Arc<Piece>> = back.iter().chain(fwd.iter()).cloned().collect();
    for pc in &pieces {
        for &(k, q) in &pc.samples {
            if (-n..=n).contains(&k) {
                points[(k + n) as usize] = [q.x, q.y];
            }
        }
    }
    let decisions = decisions_of(&pieces)
        .into_iter()
        .filter(|d| on_sigma(d.point()) || d.time == 0.0)
        .collect();
    SampledTrajectory { system: system.into(), window, dt, points, decisions, branch_id: 0 }
}

/// Result of [`generate_trajectories`].
#[derive(Clone, Debug)]
pub struct Generated {
    pub trajectories: Vec<SampledTrajectory>,
    /// Set when the branch budget was hit; trajectories were finished canonically.
    pub budget_exceeded: bool,
    pub domain_exits: usize,
}

/// Branch trees forward and backward from each seed over `[-W, W]`; every pair of a
/// backward and a forward branch is one global trajectory.
pub fn generate_trajectories(
    sys: &PiecewiseSystem,
    seeds: &[Vec2],
    policy: &BranchPolicy,
    dt: f64,
    tol: &Tolerances,
) -> Result<Generated> {
    let sel = policy_selector(policy);
    generate_with(sys, seeds, policy, dt, tol, &sel, None)
}

/// [`generate_trajectories`] with explicit forward and (optional) backward selectors.
pub fn generate_with(
    sys: &PiecewiseSystem,
    seeds: &[Vec2],
    policy: &BranchPolicy,
    dt: f64,
    tol: &Tolerances,
    forward: &Selector<'_>,
    backward: Option<&Selector<'_>>,
) -> Result<Generated> {
    policy.validate()?;
    if !(dt > 0.0) {
        return Err(FpeError::InvalidArgument("dt must be positive".into()));
    }
    let w = policy.horizon;
    let rev = sys.reversed();
    let rev_policy = BranchPolicy {
        branch_window: policy.branch_window.map(|(lo, hi)| (-hi, -lo)),
        ..policy.clone()
    };
    let rev_default = policy_selector(&rev_policy);
    let bsel: &Selector<'_> = backward.unwrap_or(&rev_default);
    let on_sigma = |q: Vec2| sys.f.eval(q).abs() <= tol.tol_f * 10.0;
    let mut out = Vec::new();
    let mut exceeded = false;
    let mut exits = 0;
    for &seed in seeds {
        if !sys.domain.contains(seed) {
            return Err(FpeError::InvalidArgument(format!("seed ({}, {}) outside the domain", seed.x, seed.y)));
        }
        let fwd = expand_forward(sys, seed, 0.0, w, dt, tol, policy, forward);
        let bwd = expand_forward(&rev, seed, 0.0, w, dt, tol, &rev_policy, bsel);
        exceeded |= fwd.budget_exceeded || bwd.budget_exceeded;
        exits += fwd.domain_exits + bwd.domain_exits;
        for b in &bwd.branches {
            let back: Vec<Arc<Piece>> = b.pieces.iter().rev().map(|p| Arc::new(p.flipped())).collect();
            for f in &fwd.branches {
                if out.len() >= policy.max_branches {
                    exceeded = true;
                    break;
                }
                let mut tr = assemble(&sys.name, w, dt, &back, &f.pieces, &on_sigma);
                tr.branch_id = out.len();
                out.push(tr);
            }
        }
    }
    Ok(Generated { trajectories: out, budget_exceeded: exceeded, domain_exits: exits })
}

/// Earliest point reached by [`search_earliest`].
#[derive(Clone, Debug)]
pub struct SearchHit {
    pub time: f64,
    pub point: Vec2,
    /// Decisions from the seed up to and including the departure at the hit.
    pub decisions: Vec<BranchDecision>,
    pub nodes_expanded: usize,
}

struct Queued {
    t: f64,
    seq: usize,
    live: Live,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest time, then the earliest insertion.
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then(other.seq.cmp(&self.seq))
    }
}

/// Best-first search of the full forward branch tree from `seed` for the earliest
/// departure point `(t, p)`, `t > 0`, with `goal(p)`. At the seed only the choices in
/// `first` are taken. Departure points are slide exits and Σ points left along a field.
/// Gives up after `max_nodes` expansions or past `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn search_earliest(
    sys: &PiecewiseSystem,
    seed: Vec2,
    t_end: f64,
    dt: f64,
    tol: &Tolerances,
    exit_grid: f64,
    first: &[Choice],
    goal: &(dyn Fn(Vec2) -> bool + Sync),
    max_nodes: usize,
) -> Option<SearchHit> {
    let policy = BranchPolicy { slide_exit_grid: exit_grid, horizon: t_end, ..Default::default() };
    let select = |ctx: &DecisionContext, opts: &[Choice]| -> Vec<Choice> {
        if ctx.depth == 0 && !ctx.on_slide {
            opts.iter().copied().filter(|c| first.contains(c)).collect()
        } else {
            opts.to_vec()
        }
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Queued { t: 0.0, seq, live: Live { path: vec![], pending: Pending::Decide { t: 0.0, p: seed }, depth: 0, departures: 0 } });
    let mut expanded = 0usize;
    while let Some(Queued { live, .. }) = heap.pop() {
        let (t, p, depart) = match live.pending {
            Pending::Decide { t, p } => (t, p, None),
            Pending::Depart { t, p, which } => (t, p, Some(which)),
        };
        if t > 1e-9 && t < t_end && goal(p) {
            let leave = match depart {
                Some(Which::X) => Some(Choice::ExitSlideToX(t)),
                Some(Which::Y) => Some(Choice::ExitSlideToY(t)),
                None => step_filippov(sys, p, tol)
                    .ok()
                    .and_then(|o| o.into_iter().find(|c| matches!(c, Choice::FollowX | Choice::FollowY))),
            };
            if let Some(choice) = leave {
                let mut decisions = decisions_of(&live.path);
                decisions.push(BranchDecision { time: t, at: [p.x, p.y], choice });
                return Some(SearchHit { time: t, point: p, decisions, nodes_expanded: expanded });
            }
        }
        if expanded >= max_nodes {
            return None;
        }
        expanded += 1;
        let Ok(children) = advance(sys, &live, t_end, dt, tol, &policy, &select, false) else {
            continue;
        };
        for (child, complete) in children {
            if complete {
                continue;
            }
            seq += 1;
            let t = match child.pending {
                Pending::Decide { t, .. } | Pending::Depart { t, .. } => t,
            };
            heap.push(Queued { t, seq, live: child });
        }
    }
    None
}

/// Outcome of [`check_invariant_set`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantReport {
    pub holds: bool,
    pub samples_checked: usize,
    pub violations: usize,
    /// `(trajectory index, time, x, y)` of the first violation.
    pub first_violation: Option<(usize, f64, f64, f64)>,
}

/// True iff every sample of every trajectory satisfies `region` at some point within
/// `thickening` (checked on the 8 compass offsets and the point itself).
pub fn check_invariant_set(
    region: &dyn Fn(Vec2) -> bool,
    trajectories: &[SampledTrajectory],
    thickening: f64,
) -> InvariantReport {
    let mut violations = 0;
    let mut first = None;
    let mut checked = 0;
    let offsets: Vec<Vec2> = std::iter::once(Vec2::zeros())
        .chain((0..8).map(|k| {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            Vec2::new(a.cos(), a.sin()) * thickening
        }))
        .collect();
    for (ti, tr) in trajectories.iter().enumerate() {
        for i in 0..tr.points.len() {
            let p = tr.point(i);
            checked += 1;
            if !offsets.iter().any(|o| region(p + o)) {
                violations += 1;
                if first.is_none() {
                    first = Some((ti, tr.time_of(i), p.x, p.y));
                }
            }
        }
    }
    InvariantReport { holds: violations == 0, samples_checked: checked, violations, first_violation: first }
}
