//! The figure-eight system `X = (1, x/2 − 4x³)`, `Y = (−1, x/2 − 4x³)`, `f = y`, whose
//! invariant set is two lobes meeting at the visible two-fold at the origin.

use crate::error::{FpeError, Result};
use crate::integrate::{flow_smooth, step_filippov, Choice, Piece};
use crate::poly::Poly2;
use crate::psvf::{Domain, PiecewiseSystem, PlanarField, SwitchingFunction, Tolerances, Vec2, Which};
use crate::systems::symbolic::ArcLibrary;

pub const ARC_STEPS: usize = 1000;

pub struct Figure8 {
    pub sys: PiecewiseSystem,
    pub library: ArcLibrary,
}

pub fn figure8_system() -> PiecewiseSystem {
    let vy = Poly2::from_terms([(0.5, 1, 0), (-4.0, 3, 0)]);
    let x = PlanarField::polynomial(Poly2::constant(1.0), vy.clone());
    let y = PlanarField::polynomial(Poly2::constant(-1.0), vy);
    PiecewiseSystem::new("figure8", x, y, SwitchingFunction::horizontal(), Domain::square(1.0))
}

/// Follows the unique continuation from the origin after the first choice until the
/// trajectory is back at the origin; returns the pieces and the closing time.
fn trace_lobe(sys: &PiecewiseSystem, first: Which, dt: f64, tol: &Tolerances) -> Result<(Vec<Piece>, f64)> {
    let mut pieces = Vec::new();
    let (mut t, mut p, mut which) = (0.0, Vec2::zeros(), first);
    for _ in 0..16 {
        let out = flow_smooth(sys, which, p, t, 4.0, dt, tol)?;
        let ev = out.event.ok_or_else(|| FpeError::InvalidSystem("figure-8 lobe does not return to Σ".into()))?;
        pieces.push(out.piece);
        (t, p) = (ev.time, ev.point);
        if p.norm() < 1e-6 {
            return Ok((pieces, t));
        }
        which = match step_filippov(sys, p, tol)?.as_slice() {
            [Choice::FollowX] => Which::X,
            [Choice::FollowY] => Which::Y,
            other => return Err(FpeError::InvalidSystem(format!("unexpected branching {other:?} on a lobe"))),
        };
    }
    Err(FpeError::InvalidSystem("figure-8 lobe did not close".into()))
}

/// Linear resampling of `(t, p)` samples onto `steps + 1` equally spaced times of `[0, duration]`.
fn resample(samples: &[(f64, Vec2)], duration: f64, steps: usize) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut j = 0;
    for k in 0..=steps {
        let t = duration * k as f64 / steps as f64;
        while j + 2 < samples.len() && samples[j + 1].0 < t {
            j += 1;
        }
        let (t0, p0) = samples[j];
        let (t1, p1) = samples[(j + 1).min(samples.len() - 1)];
        let a = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
        out.push(p0 * (1.0 - a) + p1 * a);
    }
    out
}

/// Extracts the two lobes by integration from the origin, normalizes them to unit
/// duration and computes their cost.
pub fn build_figure8() -> Result<Figure8> {
    let sys = figure8_system();
    let tol = Tolerances::default();
    let dt = 1.0 / ARC_STEPS as f64;
    let mut arcs = Vec::new();
    let mut durations = Vec::new();
    for first in [Which::X, Which::Y] {
        let (pieces, dur) = trace_lobe(&sys, first, dt, &tol)?;
        let mut samples: Vec<(f64, Vec2)> = Vec::new();
        for pc in &pieces {
            samples.push((pc.t0, pc.start));
            samples.extend(pc.samples.iter().map(|&(k, q)| (k as f64 * dt, q)));
            samples.push((pc.t1, pc.end));
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        samples.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
        let mut pts = resample(&samples, dur, ARC_STEPS);
        pts[0] = Vec2::zeros();
        pts[ARC_STEPS] = Vec2::zeros();
        arcs.push(pts);
        durations.push(dur);
    }
    let library = ArcLibrary::new(arcs, durations)?;
    Ok(Figure8 { sys, library })
}
