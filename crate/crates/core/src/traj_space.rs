//! The trajectory metric ρ, the time-one shift F₁ and the Bowen metrics d_n.
//!
//! Distances over a finite family are built from per-pair unit-interval integrals
//! `I_i = ∫_i^{i+1} |γ₁ − γ₂| dt`, so every d_n for one pair costs a single pass over
//! the samples. [`WithinTable`] stores, per `(ε, n)`, which pairs are closer than ε.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FpeError, Result};
use crate::integrate::SampledTrajectory;
use crate::psvf::Vec2;

/// Relative guard on ball membership: `d < ε(1 − BALL_GUARD)` is inside, anything else
/// is separated. Keeps exact ties (`d = ε`) on the separated side despite round-off.
pub const BALL_GUARD: f64 = 1e-9;

#[inline]
pub fn within(d: f64, eps: f64) -> bool {
    d < eps * (1.0 - BALL_GUARD)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetricConfig {
    /// Half-width W of the sampled window.
    pub window: f64,
    pub quad_dt: f64,
    pub diam: f64,
}

impl TrajectoryMetricConfig {
    pub fn new(window: f64, quad_dt: f64, diam: f64) -> Result<Self> {
        let c = Self { window, quad_dt, diam };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let per_unit = 1.0 / self.quad_dt;
        if !(self.window >= 1.0) || !(self.quad_dt > 0.0) || (per_unit - per_unit.round()).abs() > 1e-6 {
            return Err(FpeError::InvalidArgument("metric config needs W >= 1 and 1/quad_dt integral".into()));
        }
        Ok(())
    }
}

/// Bound on the ρ mass outside `[-W', W']` for trajectories confined to a set of diameter `diam`.
pub fn truncation_bound(diam: f64, w_prime: i64) -> f64 {
    diam * 2f64.powi(-(w_prime as i32) + 2)
}

/// `γ(· + shift)` for integer shifts.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedView<'a> {
    pub base: &'a SampledTrajectory,
    pub shift: i64,
}

impl<'a> ShiftedView<'a> {
    pub fn new(base: &'a SampledTrajectory) -> Self {
        Self { base, shift: 0 }
    }

    /// Largest truncation half-width this view can serve.
    pub fn reach(&self) -> i64 {
        (self.base.window.round() as i64) - self.shift.abs()
    }

    fn steps_per_unit(&self) -> usize {
        (1.0 / self.base.dt).round() as usize
    }

    /// Sample index of time `t = i` (an integer) in the view's clock.
    fn index_of_unit(&self, i: i64) -> usize {
        ((i + self.shift) * self.steps_per_unit() as i64 + self.base.steps_per_side() as i64) as usize
    }
}

/// The time-one map F₁ on a view.
pub fn time_one<'a>(g: &ShiftedView<'a>) -> Result<ShiftedView<'a>> {
    shift_by(g, 1)
}

pub fn shift_by<'a>(g: &ShiftedView<'a>, k: i64) -> Result<ShiftedView<'a>> {
    let v = ShiftedView { base: g.base, shift: g.shift + k };
    if v.reach() < 1 {
        let w = g.base.window.round() as i64;
        return Err(FpeError::WindowExceeded { need_lo: -1 - v.shift, need_hi: 1 - v.shift, have_lo: -w, have_hi: w });
    }
    Ok(v)
}

/// Trapezoid integral of `|γ₁ − γ₂|` over `[i, i+1]` in the views' clocks, with
/// `stride` samples per quadrature step.
fn unit_integral(a: &ShiftedView<'_>, b: &ShiftedView<'_>, i: i64, stride: usize) -> f64 {
    let m = a.steps_per_unit();
    let (ia, ib) = (a.index_of_unit(i), b.index_of_unit(i));
    let (pa, pb) = (&a.base.points, &b.base.points);
    let d = |k: usize| {
        let (p, q) = (pa[ia + k], pb[ib + k]);
        if p == q {
            0.0
        } else {
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
        }
    };
    let h = a.base.dt * stride as f64;
    let mut s = 0.5 * (d(0) + d(m));
    let mut k = stride;
    while k < m {
        s += d(k);
        k += stride;
    }
    s * h
}

fn check_views(g1: &ShiftedView<'_>, g2: &ShiftedView<'_>, cfg: &TrajectoryMetricConfig, w_prime: i64) -> Result<usize> {
    if (g1.base.dt - g2.base.dt).abs() > 1e-15 || (g1.base.window - g2.base.window).abs() > 1e-12 {
        return Err(FpeError::InvalidArgument("trajectories on different grids".into()));
    }
    for g in [g1, g2] {
        if g.reach() < w_prime {
            let w = g.base.window.round() as i64;
            return Err(FpeError::WindowExceeded {
                need_lo: -w_prime + g.shift,
                need_hi: w_prime + g.shift,
                have_lo: -w,
                have_hi: w,
            });
        }
    }
    let stride = (cfg.quad_dt / g1.base.dt).round().max(1.0) as usize;
    if g1.steps_per_unit() % stride != 0 {
        return Err(FpeError::InvalidArgument("quad_dt must be a multiple of dt dividing 1".into()));
    }
    Ok(stride)
}

/// Truncated ρ over unit intervals `i ∈ [-W', W'-1]`.
pub fn rho(g1: &ShiftedView<'_>, g2: &ShiftedView<'_>, cfg: &TrajectoryMetricConfig, w_prime: i64) -> Result<f64> {
    let stride = check_views(g1, g2, cfg, w_prime)?;
    let mut s = 0.0;
    for i in -w_prime..w_prime {
        s += 2f64.powi(-(i.abs() as i32)) * unit_integral(g1, g2, i, stride);
    }
    Ok(s)
}

/// `max_{0≤i<n} ρ(F₁^i g₁, F₁^i g₂)`.
pub fn dn_metric(g1: &ShiftedView<'_>, g2: &ShiftedView<'_>, n: usize, cfg: &TrajectoryMetricConfig, w_prime: i64) -> Result<f64> {
    if n == 0 {
        return Err(FpeError::InvalidArgument("n must be positive".into()));
    }
    let mut best: f64 = 0.0;
    for i in 0..n as i64 {
        let (a, b) = (shift_by(g1, i)?, shift_by(g2, i)?);
        best = best.max(rho(&a, &b, cfg, w_prime)?);
    }
    Ok(best)
}

/// A finite family whose pairwise unit-interval integrals can be queried.
pub trait UnitIntegrals: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Interval indices `lo..hi` available for every member.
    fn slots(&self) -> (i64, i64);
    /// Writes `I_i(a, b)` into `out[i - lo]` for all available `i`.
    fn integrals(&self, a: usize, b: usize, out: &mut [f64]);
    /// Diameter of the region the members live in.
    fn diam(&self) -> f64;
}

/// Sampled trajectories on a common grid.
#[derive(Clone, Debug)]
pub struct SampledSet {
    pub trajectories: Vec<SampledTrajectory>,
    pub diam: f64,
    stride: usize,
}

impl SampledSet {
    pub fn new(trajectories: Vec<SampledTrajectory>, cfg: &TrajectoryMetricConfig) -> Result<Self> {
        cfg.validate()?;
        let Some(first) = trajectories.first() else {
            return Ok(Self { trajectories, diam: cfg.diam, stride: 1 });
        };
        for t in &trajectories {
            if (t.dt - first.dt).abs() > 1e-15 || t.points.len() != first.points.len() {
                return Err(FpeError::InvalidArgument("trajectories on different grids".into()));
            }
            if t.points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                return Err(FpeError::InvalidArgument("trajectory has unsampled points".into()));
            }
        }
        let m = (1.0 / first.dt).round() as usize;
        let stride = (cfg.quad_dt / first.dt).round().max(1.0) as usize;
        if m % stride != 0 || (first.window - cfg.window).abs() > 1e-9 {
            return Err(FpeError::InvalidArgument("quad_dt or window inconsistent with trajectories".into()));
        }
        Ok(Self { trajectories, diam: cfg.diam, stride })
    }
}

impl UnitIntegrals for SampledSet {
    fn len(&self) -> usize {
        self.trajectories.len()
    }

    fn slots(&self) -> (i64, i64) {
        let w = self.trajectories.first().map_or(0, |t| t.window.round() as i64);
        (-w, w)
    }

    fn integrals(&self, a: usize, b: usize, out: &mut [f64]) {
        let (lo, _) = self.slots();
        let va = ShiftedView::new(&self.trajectories[a]);
        let vb = ShiftedView::new(&self.trajectories[b]);
        for (k, o) in out.iter_mut().enumerate() {
            *o = unit_integral(&va, &vb, lo + k as i64, self.stride);
        }
    }

    fn diam(&self) -> f64 {
        self.diam
    }
}

/// Shift pattern for d_n: `shifts(n) = {0, m, 2m, …, (n-1)m}` under F₁^m.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShiftPattern {
    pub step: usize,
}

/// Per-`(ε, n)` bitsets of pairs with `d_n < ε`, for one finite family.
#[derive(Clone, Debug)]
pub struct WithinTable {
    pub eps: Vec<f64>,
    pub ns: Vec<usize>,
    pub size: usize,
    pub w_prime: i64,
    pub step: usize,
    words: usize,
    /// `cells[e][k]` holds `size` rows of `words` u64s for `(eps[e], ns[k])`.
    cells: Vec<Vec<Vec<u64>>>,
}

impl WithinTable {
    /// Computes all cells. `w_prime` is the ρ truncation half-width; shifts up to
    /// `step·(max n − 1)` must fit inside the family's slots.
    pub fn build<S: UnitIntegrals + ?Sized>(set: &S, eps: &[f64], ns: &[usize], step: usize, w_prime: i64) -> Result<Self> {
        if ns.contains(&0) || step == 0 {
            return Err(FpeError::InvalidArgument("n and the shift step must be positive".into()));
        }
        let nmax = ns.iter().copied().max().unwrap_or(1);
        let (lo, hi) = set.slots();
        let span = (step * (nmax - 1)) as i64;
        if -w_prime < lo || w_prime + span > hi {
            return Err(FpeError::WindowExceeded { need_lo: -w_prime, need_hi: w_prime + span, have_lo: lo, have_hi: hi });
        }
        let size = set.len();
        let words = size.div_ceil(64);
        let weights: Vec<f64> = (-w_prime..w_prime).map(|i| 2f64.powi(-(i.abs() as i32))).collect();
        let nslots = (hi - lo) as usize;
        // Upper-triangle rows computed in parallel, then mirrored.
        let rows: Vec<Vec<Vec<u64>>> = (0..size)
            .into_par_iter()
            .map(|a| {
                let mut cell_rows = vec![vec![0u64; words]; eps.len() * ns.len()];
                let mut buf = vec![0.0; nslots];
                let mut rho_s = vec![0.0; nmax];
                for b in a + 1..size {
                    set.integrals(a, b, &mut buf);
                    for (s, r) in rho_s.iter_mut().enumerate() {
                        let off = (-w_prime + (s * step) as i64 - lo) as usize;
                        *r = weights.iter().zip(&buf[off..off + weights.len()]).map(|(w, v)| w * v).sum();
                    }
                    for (k, &n) in ns.iter().enumerate() {
                        let d = rho_s[..n].iter().copied().fold(0.0, f64::max);
                        for (e, &ep) in eps.iter().enumerate() {
                            if within(d, ep) {
                                cell_rows[e * ns.len() + k][b / 64] |= 1 << (b % 64);
                            }
                        }
                    }
                }
                cell_rows
            })
            .collect();
        let mut cells = vec![vec![vec![0u64; words * size]; ns.len()]; eps.len()];
        for (a, r) in rows.into_iter().enumerate() {
            for e in 0..eps.len() {
                for k in 0..ns.len() {
                    let cell = &mut cells[e][k];
                    let row = &r[e * ns.len() + k];
                    cell[a * words + a / 64] |= 1 << (a % 64);
                    for (wi, &word) in row.iter().enumerate() {
                        if word == 0 {
                            continue;
                        }
                        cell[a * words + wi] |= word;
                        let mut bits = word;
                        while bits != 0 {
                            let b = wi * 64 + bits.trailing_zeros() as usize;
                            bits &= bits - 1;
                            cell[b * words + a / 64] |= 1 << (a % 64);
                        }
                    }
                }
            }
        }
        Ok(Self { eps: eps.to_vec(), ns: ns.to_vec(), size, w_prime, step, words, cells })
    }

    /// Row `a` of cell `(e, k)`: bit `b` set iff `d_n(a, b) < ε` (including `a` itself).
    pub fn row(&self, e: usize, k: usize, a: usize) -> &[u64] {
        &self.cells[e][k][a * self.words..(a + 1) * self.words]
    }

    pub fn is_within(&self, e: usize, k: usize, a: usize, b: usize) -> bool {
        self.row(e, k, a)[b / 64] >> (b % 64) & 1 == 1
    }

    pub fn words(&self) -> usize {
        self.words
    }
}

/// d_n for every `n` in `1..=nmax` between two members of a family.
pub fn pair_dn<S: UnitIntegrals + ?Sized>(set: &S, a: usize, b: usize, nmax: usize, step: usize, w_prime: i64) -> Vec<f64> {
    let (lo, hi) = set.slots();
    let mut buf = vec![0.0; (hi - lo) as usize];
    set.integrals(a, b, &mut buf);
    let mut out = Vec::with_capacity(nmax);
    let mut best: f64 = 0.0;
    for s in 0..nmax {
        let off = (-w_prime + (s * step) as i64 - lo) as usize;
        let r: f64 = (-w_prime..w_prime).zip(&buf[off..]).map(|(i, v)| 2f64.powi(-(i.abs() as i32)) * v).sum();
        best = best.max(r);
        out.push(best);
    }
    out
}

/// Constant trajectory helper used by tests and controls.
pub fn constant_trajectory(p: Vec2, window: f64, dt: f64) -> SampledTrajectory {
    SampledTrajectory::constant("const", p, window, dt)
}
