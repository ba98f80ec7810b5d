//! The bean system `X = (1, −2x)`, `Y = (−2, −4x³ + 2x)`, `f = y`, its invariant region
//! K, escape points, the return map P and the itinerary coding.
//!
//! Σ splits at `x = ±1/√2` and `0`: crossing upward for `x < −1/√2`, escaping on
//! `(−1/√2, 0)`, sliding on `(0, 1/√2)`, crossing downward beyond. Sliding on `Σ^s`
//! runs toward the origin and on `Σ^e` away from it, with `x' = −(1+2x²)/(2(1−x²))`.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FpeError, Result};
use crate::integrate::{
    generate_with, search_earliest, BranchDecision, BranchPolicy, Choice, DecisionContext, Generated, SampledTrajectory,
};
use crate::poly::Poly2;
use crate::psvf::{classify_point, Domain, PiecewiseSystem, PlanarField, PointClass, SwitchingFunction, Tolerances, Vec2, Which};
use crate::systems::Itinerary;

/// Left end of Σ^e; the origin is the right end.
pub const ESCAPE_LEFT: f64 = -std::f64::consts::FRAC_1_SQRT_2;

/// Escape interval used by the sufficient-condition verifier unless told otherwise.
pub const DEFAULT_J: (f64, f64) = (-0.6, -0.1);

pub fn bean_system() -> PiecewiseSystem {
    let x = PlanarField::polynomial(Poly2::constant(1.0), Poly2::from_terms([(-2.0, 1, 0)]));
    let y = PlanarField::polynomial(Poly2::constant(-2.0), Poly2::from_terms([(-4.0, 3, 0), (2.0, 1, 0)]));
    PiecewiseSystem::new("bean", x, y, SwitchingFunction::horizontal(), Domain::square(1.2))
}

/// Upper boundary of K, an X-orbit.
pub fn k_upper(x: f64) -> f64 {
    1.0 - x * x
}

/// Lower boundary of K, a Y-orbit.
pub fn k_lower(x: f64) -> f64 {
    (x.powi(4) - x * x) / 2.0
}

/// Membership in K thickened by `pad`.
pub fn in_k(p: Vec2, pad: f64) -> bool {
    p.x.abs() <= 1.0 + pad && p.y <= k_upper(p.x.clamp(-1.0, 1.0)) + pad && p.y >= k_lower(p.x.clamp(-1.0, 1.0)) - pad
}

/// Sliding time from `a` to the origin on Σ^s, and from the origin to `−a` on Σ^e:
/// `T(a) = ∫₀ᵃ 2(1−s²)/(1+2s²) ds = −a + (3/√2)·atan(√2·a)`.
pub fn slide_time(a: f64) -> f64 {
    -a + 3.0 / SQRT_2 * (SQRT_2 * a).atan()
}

/// Inverse of [`slide_time`] on `[0, 1/√2]` by bisection.
pub fn slide_time_inverse(t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, -ESCAPE_LEFT);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slide_time(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// True on the closure of Σ^e: both fields leave Σ or are tangent to it.
pub fn in_escape_closure(sys: &PiecewiseSystem, p: Vec2, tol: &Tolerances) -> bool {
    sys.f.eval(p).abs() <= 10.0 * tol.tol_f && sys.lie1(Which::X, p) >= -tol.tol_lie && sys.lie1(Which::Y, p) <= tol.tol_lie
}

/// Side a trajectory enters when leaving Σ^e.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "Σ+")]
    Plus,
    #[serde(rename = "Σ-")]
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapePoint {
    pub time: f64,
    pub point: [f64; 2],
    pub to: Side,
}

/// Escape points of a generated trajectory in time order: departures along a field
/// from the closure of Σ^e. Passing a slide candidate without leaving is not an escape.
pub fn escape_points(sys: &PiecewiseSystem, traj: &SampledTrajectory, tol: &Tolerances) -> Vec<EscapePoint> {
    let mut out: Vec<EscapePoint> = traj
        .decisions
        .iter()
        .filter_map(|d: &BranchDecision| {
            let to = match d.choice {
                Choice::FollowX | Choice::ExitSlideToX(_) => Side::Plus,
                Choice::FollowY | Choice::ExitSlideToY(_) => Side::Minus,
                _ => return None,
            };
            in_escape_closure(sys, d.point(), tol).then_some(EscapePoint { time: d.time, point: d.at, to })
        })
        .collect();
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    out
}

/// Affine chart `θ(x) = (x − a)/(b − a)` of `J = [a, b]` on Σ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub a: f64,
    pub b: f64,
}

impl Chart {
    pub fn theta(&self, x: f64) -> f64 {
        (x - self.a) / (self.b - self.a)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a - 1e-12 && x <= self.b + 1e-12
    }
}

/// An escape interval `J` with the return-time data of a family through it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeStructure {
    #[serde(rename = "J")]
    pub j: Chart,
    /// `(min, max)` of the observed return times, before rescaling.
    pub tau_bounds: (f64, f64),
    /// `k − 1 < c·τ < k` for every observed τ.
    pub k: u32,
    pub rescale_c: u32,
}

impl EscapeStructure {
    /// Checks `J ⊂ Σ^e` on a grid and picks the smallest `c ≤ 64` admitting an integer
    /// `k` with `k − 1 < c·τ_min ≤ c·τ_max < k`.
    pub fn new(sys: &PiecewiseSystem, j: Chart, taus: &[f64], tol: &Tolerances) -> Result<Self> {
        check_escaping(sys, j, 64, tol)?;
        if taus.is_empty() {
            return Err(FpeError::InsufficientData("no return times".into()));
        }
        let lo = taus.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = taus.iter().copied().fold(0.0, f64::max);
        for c in 1..=64u32 {
            let k = (c as f64 * lo).floor() as u32 + 1;
            if (c as f64 * hi) < k as f64 && k >= 2 {
                return Ok(Self { j, tau_bounds: (lo, hi), k, rescale_c: c });
            }
        }
        Err(FpeError::InsufficientData(format!("return times [{lo}, {hi}] fit no (k−1, k) band")))
    }

    /// Bounds after rescaling the fields by `1/c`.
    pub fn rescaled_bounds(&self) -> (f64, f64) {
        let c = self.rescale_c as f64;
        (self.tau_bounds.0 * c, self.tau_bounds.1 * c)
    }
}

/// Errors unless every one of `samples + 1` grid points of `J` classifies Escaping.
pub fn check_escaping(sys: &PiecewiseSystem, j: Chart, samples: usize, tol: &Tolerances) -> Result<()> {
    if !(j.a < j.b) {
        return Err(FpeError::InvalidArgument(format!("J = [{}, {}] is empty", j.a, j.b)));
    }
    for i in 0..=samples {
        let x = j.a + (j.b - j.a) * i as f64 / samples.max(1) as f64;
        let c = classify_point(sys, Vec2::new(x, 0.0), tol);
        if c != PointClass::Escaping {
            return Err(FpeError::InvalidArgument(format!("J point x = {x} is {}, not Escaping", c.label())));
        }
    }
    Ok(())
}

/// `γ(· + offset)` with the escape points of `γ`.
#[derive(Clone, Debug)]
pub struct EscapeView<'a> {
    pub traj: &'a SampledTrajectory,
    pub escapes: &'a [EscapePoint],
    pub offset: f64,
}

impl<'a> EscapeView<'a> {
    pub fn new(traj: &'a SampledTrajectory, escapes: &'a [EscapePoint]) -> Self {
        Self { traj, escapes, offset: 0.0 }
    }

    /// `F₁^k` of the view.
    pub fn shifted(&self, k: f64) -> Self {
        Self { offset: self.offset + k, ..*self }
    }

    pub fn at(&self, t: f64) -> Vec2 {
        self.traj.at(t + self.offset)
    }

    /// The view's time-0 escape, if time 0 is one.
    pub fn escape_at_zero(&self) -> Option<&EscapePoint> {
        self.escapes.iter().find(|e| (e.time - self.offset).abs() <= 1e-9)
    }

    /// `τ`: the first escape strictly after time 0 that the window still covers.
    pub fn tau(&self) -> Result<f64> {
        self.escapes
            .iter()
            .map(|e| e.time - self.offset)
            .find(|&s| s > 1e-9)
            .filter(|&s| s + self.offset < self.traj.window)
            .ok_or_else(|| FpeError::NoReturnInWindow(format!("no escape after t = {} before W = {}", self.offset, self.traj.window)))
    }
}

/// `P(γ) = γ(· + τ_γ)` with `τ_γ`. Time 0 of the view must be an escape point in `J`.
pub fn return_map_p<'a>(esc: &EscapeStructure, view: &EscapeView<'a>) -> Result<(EscapeView<'a>, f64)> {
    let e0 = view.escape_at_zero().ok_or_else(|| FpeError::InvalidArgument(format!("t = {} is not an escape point", view.offset)))?;
    if !esc.j.contains(e0.point[0]) {
        return Err(FpeError::InvalidArgument(format!("escape at x = {} is outside J", e0.point[0])));
    }
    let tau = view.tau()?;
    Ok((view.shifted(tau), tau))
}

/// `s_j = θ(P^j(γ)(0))` for `j = 0..depth`.
pub fn itinerary_code(esc: &EscapeStructure, view: &EscapeView<'_>, depth: usize) -> Result<Itinerary> {
    let mut symbols = Vec::with_capacity(depth);
    let mut v = view.clone();
    for j in 0..depth {
        let e = v.escape_at_zero().ok_or_else(|| FpeError::InvalidArgument("view does not start at an escape".into()))?;
        symbols.push(esc.j.theta(e.point[0]));
        if j + 1 < depth {
            v = return_map_p(esc, &v)?.0;
        }
    }
    Ok(Itinerary { symbols })
}

/// Parameters of [`return_family`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnFamily {
    pub j: Chart,
    pub seeds: usize,
    pub window: f64,
    pub dt: f64,
    pub exit_grid: f64,
    /// Returns on which every departure candidate in J is explored; later returns leave
    /// at the first candidate in J.
    pub branching_returns: usize,
}

impl Default for ReturnFamily {
    fn default() -> Self {
        Self {
            j: Chart { a: -0.35, b: -0.2 },
            seeds: 10,
            window: 8.0,
            dt: 0.01,
            exit_grid: 0.1,
            branching_returns: 3,
        }
    }
}

/// Trajectories that escape to Σ⁺ at time 0 from a seed in `J` and keep escaping to Σ⁺
/// from `J`: up the parabola, down Σ^s to the origin, out along Σ^e and up again at a
/// departure candidate in `J`. Branches whose forward escapes leave `J` are dropped.
pub fn return_family(params: &ReturnFamily) -> Result<Generated> {
    let sys = bean_system();
    let tol = Tolerances::default();
    let j = params.j;
    let seeds: Vec<Vec2> = (0..params.seeds)
        .map(|i| Vec2::new(j.a + (j.b - j.a) * (i as f64 + 0.5) / params.seeds as f64, 0.0))
        .collect();
    let policy = BranchPolicy {
        horizon: params.window,
        slide_exit_grid: params.exit_grid,
        max_branches: usize::MAX / 2,
        ..Default::default()
    };
    let fwd = |ctx: &DecisionContext, opts: &[Choice]| -> Vec<Choice> {
        if ctx.on_slide {
            if !j.contains(ctx.point.x) {
                return vec![Choice::Slide];
            }
            let exit = opts.iter().copied().find(|c| matches!(c, Choice::ExitSlideToX(_))).into_iter();
            return if ctx.departures <= params.branching_returns {
                std::iter::once(Choice::Slide).chain(exit).collect()
            } else {
                exit.collect()
            };
        }
        if ctx.depth == 0 {
            return vec![Choice::FollowX];
        }
        if opts.contains(&Choice::Slide) {
            return vec![Choice::Slide];
        }
        opts[..1].to_vec()
    };
    let back = |_: &DecisionContext, opts: &[Choice]| -> Vec<Choice> { opts[..1].to_vec() };
    let mut g = generate_with(&sys, &seeds, &policy, params.dt, &tol, &fwd, Some(&back))?;
    g.trajectories.retain(|tr| {
        let es = escape_points(&sys, tr, &tol);
        es.iter().filter(|e| e.time >= 0.0).all(|e| j.contains(e.point[0]) && e.to == Side::Plus)
    });
    for (i, tr) in g.trajectories.iter_mut().enumerate() {
        tr.branch_id = i;
    }
    Ok(g)
}

/// Diameter of K: width 2, height from `min k_lower = −1/8` to `k_upper(0) = 1`.
pub fn k_diameter() -> f64 {
    2f64.hypot(1.125)
}

/// Parameters of the capacity-growth family used for the bean entropy estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeanEntropy {
    pub j: Chart,
    pub seeds: usize,
    pub dt: f64,
    pub exit_grid: f64,
    /// The family for `n` branches on `[0, n + window_offset]` and is canonical elsewhere.
    pub window_offset: f64,
    pub w_prime: i64,
    pub eps: Vec<f64>,
    pub ns: Vec<usize>,
    pub quad_dt: f64,
    pub max_branches: usize,
}

impl Default for BeanEntropy {
    fn default() -> Self {
        Self {
            j: Chart { a: DEFAULT_J.0, b: DEFAULT_J.1 },
            seeds: 2,
            dt: 0.01,
            exit_grid: 0.1,
            window_offset: -0.5,
            w_prime: 12,
            eps: crate::entropy::eps_schedule(0.4, 5),
            ns: vec![1, 2, 3, 4],
            quad_dt: 0.05,
            max_branches: 20_000,
        }
    }
}

impl BeanEntropy {
    pub fn window(&self) -> f64 {
        (self.w_prime + self.ns.iter().copied().max().unwrap_or(1) as i64) as f64
    }

    /// Seeds evenly inside `J`, every continuation explored while `t ≤ n + offset`.
    pub fn family(&self, n: usize) -> Result<Generated> {
        let sys = bean_system();
        let seeds: Vec<Vec2> = (0..self.seeds)
            .map(|i| Vec2::new(self.j.a + (self.j.b - self.j.a) * (i as f64 + 0.5) / self.seeds as f64, 0.0))
            .collect();
        let policy = BranchPolicy {
            max_branches: self.max_branches,
            slide_exit_grid: self.exit_grid,
            horizon: self.window(),
            dedupe: true,
            branch_window: Some((0.0, n as f64 + self.window_offset)),
        };
        crate::integrate::generate_trajectories(&sys, &seeds, &policy, self.dt, &Tolerances::default())
    }
}

/// Separated and spanning counts on the families [`BeanEntropy::family`], one per n,
/// fitted per ε. Separated sets of a subfamily are separated in the whole trajectory
/// space, so the sep counts stay lower bounds.
pub fn bean_entropy(params: &BeanEntropy) -> Result<crate::entropy::EntropyReport> {
    use crate::entropy::{counts_per_n, fit_entropy, DEFAULT_UNBOUNDED_THRESHOLD};
    use crate::traj_space::{SampledSet, TrajectoryMetricConfig};
    let cfg = TrajectoryMetricConfig::new(params.window(), params.quad_dt, k_diameter())?;
    let exceeded = std::sync::atomic::AtomicBool::new(false);
    let counts = counts_per_n(
        |n| {
            let g = params.family(n)?;
            if g.budget_exceeded {
                exceeded.store(true, std::sync::atomic::Ordering::Relaxed);
            }
            SampledSet::new(g.trajectories, &cfg)
        },
        &params.eps,
        &params.ns,
        1,
        params.w_prime,
    )?;
    let mut report = fit_entropy("bean", &counts, DEFAULT_UNBOUNDED_THRESHOLD)?;
    report.partial = exceeded.into_inner();
    report.notes.push(format!(
        "family: {} seeds in J = [{}, {}], all continuations on [0, n{:+}], slide exits every {}; counts are for this family",
        params.seeds, params.j.a, params.j.b, params.window_offset, params.exit_grid
    ));
    Ok(report)
}

/// Per-point outcome of [`verify_sufficient_conditions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    pub found: bool,
    pub return_time: Option<f64>,
    pub return_x: Option<f64>,
    pub first: Option<Choice>,
    pub decisions: Vec<BranchDecision>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub system: String,
    #[serde(rename = "J")]
    pub j: Chart,
    pub samples: usize,
    pub horizon: f64,
    pub exit_grid: f64,
    pub precondition_ok: bool,
    pub precondition_error: Option<String>,
    pub all_found: bool,
    /// Smallest witnessed return time.
    #[serde(rename = "M")]
    pub m: Option<f64>,
    /// Smallest integer with `c·M > 1`.
    pub c: Option<u32>,
    pub witnesses: Vec<Witness>,
}

/// Smallest positive integer `c` with `c·m > 1`.
pub fn rescale_integer(m: f64) -> u32 {
    (1.0 / m).floor() as u32 + 1
}

/// For `samples` evenly spaced `x ∈ J`, searches for the earliest trajectory escaping
/// through `x` (to either side) that departs again from a point of `J` before `horizon`.
pub fn verify_sufficient_conditions(
    sys: &PiecewiseSystem,
    j: Chart,
    samples: usize,
    horizon: f64,
    dt: f64,
    exit_grid: f64,
) -> WitnessReport {
    let tol = Tolerances::default();
    let mut report = WitnessReport {
        system: sys.name.clone(),
        j,
        samples,
        horizon,
        exit_grid,
        precondition_ok: true,
        precondition_error: None,
        all_found: false,
        m: None,
        c: None,
        witnesses: vec![],
    };
    if let Err(e) = check_escaping(sys, j, samples.max(64), &tol) {
        report.precondition_ok = false;
        report.precondition_error = Some(e.to_string());
        return report;
    }
    let in_j = |p: Vec2| j.contains(p.x) && sys.f.eval(p).abs() <= 10.0 * tol.tol_f;
    report.witnesses = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = if samples == 1 { 0.5 * (j.a + j.b) } else { j.a + (j.b - j.a) * i as f64 / (samples - 1) as f64 };
            let hit = search_earliest(
                sys,
                Vec2::new(x, 0.0),
                horizon,
                dt,
                &tol,
                exit_grid,
                &[Choice::FollowX, Choice::FollowY],
                &in_j,
                200_000,
            );
            match hit {
                Some(h) => Witness {
                    x,
                    found: true,
                    return_time: Some(h.time),
                    return_x: Some(h.point.x),
                    first: h.decisions.first().map(|d| d.choice),
                    decisions: h.decisions,
                },
                None => Witness { x, found: false, return_time: None, return_x: None, first: None, decisions: vec![] },
            }
        })
        .collect();
    report.all_found = samples > 0 && report.witnesses.iter().all(|w| w.found);
    report.m = report.witnesses.iter().filter_map(|w| w.return_time).reduce(f64::min);
    report.c = report.m.map(rescale_integer);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{check_invariant_set, flow_smooth};

    #[test]
    fn sigma_regions_follow_the_lie_derivative_signs() {
        let s = bean_system();
        let t = Tolerances::default();
        for i in 1..400 {
            let x = -1.19 + 2.38 * i as f64 / 400.0;
            if (x.abs() - 1.0 / SQRT_2).abs() < 1e-3 || x.abs() < 1e-3 {
                continue;
            }
            let (xf, yf) = (-2.0 * x, 2.0 * x * (1.0 - 2.0 * x * x));
            let want = match (xf > 0.0, yf > 0.0) {
                (true, true) => PointClass::CrossingPos,
                (false, false) => PointClass::CrossingNeg,
                (true, false) => PointClass::Escaping,
                (false, true) => PointClass::Sliding,
            };
            assert_eq!(classify_point(&s, Vec2::new(x, 0.0), &t), want, "x = {x}");
        }
    }

    #[test]
    fn k_boundaries() {
        assert_eq!((k_upper(1.0), k_upper(-1.0), k_upper(0.0)), (0.0, 0.0, 1.0));
        assert_eq!((k_lower(1.0), k_lower(-1.0), k_lower(0.0)), (0.0, 0.0, 0.0));
        assert!(in_k(Vec2::new(0.0, 0.5), 0.0) && !in_k(Vec2::new(0.0, 1.1), 0.0) && !in_k(Vec2::new(0.9, -0.2), 0.0));
    }

    #[test]
    fn slide_time_matches_integration() {
        let s = bean_system();
        let t = Tolerances::default();
        for a in [0.2, 0.35, 0.5] {
            let so = crate::integrate::slide_segment(&s, Vec2::new(a, 0.0), 0.0, 5.0, 1e-4, 0.1, &t).unwrap();
            assert!(so.hit_boundary);
            assert!((so.piece.t1 - slide_time(a)).abs() < 1e-6, "a = {a}: {} vs {}", so.piece.t1, slide_time(a));
            assert!((slide_time_inverse(slide_time(a)) - a).abs() < 1e-12);
        }
        assert!((slide_time(0.2) - 0.38472).abs() < 1e-4);
    }

    #[test]
    fn follow_x_escape_is_recorded() {
        let s = bean_system();
        let t = Tolerances::default();
        let fo = flow_smooth(&s, Which::X, Vec2::new(-0.5, 0.0), 0.0, 5.0, 1e-3, &t).unwrap();
        assert!((fo.event.unwrap().point.x - 0.5).abs() < 1e-9);
        let g = return_family(&ReturnFamily { seeds: 1, branching_returns: 0, ..Default::default() }).unwrap();
        let tr = &g.trajectories[0];
        let es = escape_points(&s, tr, &t);
        let e0 = es.iter().find(|e| e.time == 0.0).unwrap();
        assert_eq!(e0.to, Side::Plus);
    }

    #[test]
    fn no_escape_without_sigma_e() {
        let s = bean_system();
        let tr = SampledTrajectory::constant("bean", Vec2::new(0.0, 0.5), 1.0, 0.1);
        assert!(escape_points(&s, &tr, &Tolerances::default()).is_empty());
    }

    #[test]
    fn sliding_through_sigma_e_is_not_an_escape() {
        let s = bean_system();
        let t = Tolerances::default();
        let policy = BranchPolicy { horizon: 1.0, ..Default::default() };
        let slide = |_: &DecisionContext, opts: &[Choice]| -> Vec<Choice> {
            if opts.contains(&Choice::Slide) { vec![Choice::Slide] } else { opts[..1].to_vec() }
        };
        let g = generate_with(&s, &[Vec2::new(-0.05, 0.0)], &policy, 0.01, &t, &slide, Some(&slide)).unwrap();
        for tr in &g.trajectories {
            // The slide reaches −1/√2 only after t ≈ 0.9, so nothing departs before.
            assert!(escape_points(&s, tr, &t).iter().all(|e| e.time > 0.8 || e.time < -1e-9));
        }
    }

    #[test]
    fn return_family_band_and_codes() {
        let s = bean_system();
        let t = Tolerances::default();
        let params = ReturnFamily { seeds: 3, branching_returns: 1, ..Default::default() };
        let g = return_family(&params).unwrap();
        assert!(g.trajectories.len() >= 3 * 3, "{}", g.trajectories.len());
        let es: Vec<Vec<EscapePoint>> = g.trajectories.iter().map(|tr| escape_points(&s, tr, &t)).collect();
        let taus: Vec<f64> = g.trajectories.iter().zip(&es).map(|(tr, e)| EscapeView::new(tr, e).tau().unwrap()).collect();
        let esc = EscapeStructure::new(&s, params.j, &taus, &t).unwrap();
        assert_eq!((esc.k, esc.rescale_c), (2, 1));
        // Departures along Σ^e happen at whole multiples of Δ after reaching the origin.
        let xs: Vec<f64> = (4..=6).map(|k| -slide_time_inverse(k as f64 * 0.1)).collect();
        for (tr, e) in g.trajectories.iter().zip(&es) {
            let v = EscapeView::new(tr, e);
            let code = itinerary_code(&esc, &v, 3).unwrap();
            for sym in &code.symbols[1..] {
                assert!(xs.iter().any(|x| (esc.j.theta(*x) - sym).abs() < 1e-4), "{sym}");
            }
            let (p, tau) = return_map_p(&esc, &v).unwrap();
            assert!(tau > 1.0 && tau < 2.0);
            assert_eq!(itinerary_code(&esc, &p, 2).unwrap().symbols, code.symbols[1..].to_vec());
        }
    }

    #[test]
    fn k_is_invariant_for_return_family() {
        let g = return_family(&ReturnFamily { seeds: 2, branching_returns: 1, ..Default::default() }).unwrap();
        let rep = check_invariant_set(&|p| in_k(p, 0.0), &g.trajectories, 1e-9);
        assert!(rep.holds, "{rep:?}");
    }

    #[test]
    fn witness_arithmetic_and_gate() {
        assert_eq!(rescale_integer(0.6), 2);
        assert_eq!(rescale_integer(1.5), 1);
        assert_eq!(rescale_integer(0.5), 3);
        let s = bean_system();
        let rep = verify_sufficient_conditions(&s, Chart { a: -0.5, b: 0.2 }, 4, 5.0, 0.01, 0.1);
        assert!(!rep.precondition_ok && !rep.all_found);
    }

    #[test]
    fn witness_for_one_point() {
        let s = bean_system();
        let rep = verify_sufficient_conditions(&s, Chart { a: -0.3, b: -0.2 }, 2, 20.0, 0.01, 0.1);
        assert!(rep.all_found, "{rep:?}");
        // x = −0.3: parabola to 0.3, slide to the origin, then the first Δ-candidate in J,
        // which is 4Δ out since T(0.2) ≈ 0.385.
        let want = 0.6 + slide_time(0.3) + 0.4;
        let w = &rep.witnesses[0];
        assert!((w.return_time.unwrap() - want).abs() < 1e-6, "{:?} vs {want}", w.return_time);
    }
}
