//! The α-petal rosette: 2α sectors around the origin, each holding a rotated copy of
//! the base pair `X = (1, a(1−x))`, `Y = (−1, a(1−x))`, so that α closed lens-shaped
//! arcs pass through the origin.

use std::f64::consts::PI;

use crate::error::{FpeError, Result};
use crate::integrate::{flow_smooth, BranchPolicy, Generated};
use crate::poly::Poly2;
use crate::psvf::{classify_point, Domain, PiecewiseSystem, PlanarField, PointClass, SwitchingFunction, Tolerances, Vec2, Which};
use crate::systems::symbolic::{all_words, ArcLibrary, Word};

/// Lens duration of the unscaled base pair (x runs from 0 to 2 and back at unit speed).
pub const BASE_ARC_DURATION: f64 = 4.0;

/// Samples per unit time of the stored arcs.
pub const ARC_STEPS: usize = 1000;

pub struct Rosette {
    pub alpha: usize,
    /// Vertical gain `a` of the base pair; 1 for α ≤ 3, `tan(π/α)/2` beyond so each
    /// lens fits inside its pair of sectors.
    pub gain: f64,
    /// Local two-field system on each of the 2α rays, ray `r` at angle `rπ/α`; the
    /// field on the counter-clockwise side is the `X` of that system.
    pub rays: Vec<PiecewiseSystem>,
    pub library: ArcLibrary,
}

fn rot(phi: f64) -> [[f64; 2]; 2] {
    [[phi.cos(), -phi.sin()], [phi.sin(), phi.cos()]]
}

/// `p ↦ R(b + A Rᵀ p)` as a polynomial field, for affine `b + A q`.
fn rotated_affine(b: [f64; 2], a: [[f64; 2]; 2], phi: f64, scale: f64) -> PlanarField {
    let r = rot(phi);
    let rt = [[r[0][0], r[1][0]], [r[0][1], r[1][1]]];
    let mul = |m: [[f64; 2]; 2], n: [[f64; 2]; 2]| {
        let mut o = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                o[i][j] = m[i][0] * n[0][j] + m[i][1] * n[1][j];
            }
        }
        o
    };
    let m = mul(mul(r, a), rt);
    let c = [r[0][0] * b[0] + r[0][1] * b[1], r[1][0] * b[0] + r[1][1] * b[1]];
    let comp = |i: usize| Poly2::from_terms([(scale * c[i], 0, 0), (scale * m[i][0], 1, 0), (scale * m[i][1], 0, 1)]);
    PlanarField::polynomial(comp(0), comp(1))
}

impl Rosette {
    pub fn sector_count(&self) -> usize {
        2 * self.alpha
    }

    /// Sector containing `p`: sector `k` spans angles `[kπ/α, (k+1)π/α)`.
    pub fn sector_of(&self, p: Vec2) -> usize {
        let ang = p.y.atan2(p.x).rem_euclid(2.0 * PI);
        ((ang / (PI / self.alpha as f64)).floor() as usize).min(self.sector_count() - 1)
    }

    /// The piecewise field at `p` (origin and rays resolved to the counter-clockwise sector).
    pub fn field_at(&self, p: Vec2) -> Vec2 {
        let k = self.sector_of(p);
        self.rays[k].x.eval(p)
    }

    /// Classification against the nearest ray's local system.
    pub fn classify(&self, p: Vec2, tol: &Tolerances) -> PointClass {
        let step = PI / self.alpha as f64;
        let ang = p.y.atan2(p.x).rem_euclid(2.0 * PI);
        let r = ((ang / step).round() as usize) % self.sector_count();
        classify_point(&self.rays[r], p, tol)
    }

    /// The unscaled base pair on ray 0 (lens duration 4).
    pub fn base_unscaled(&self) -> PiecewiseSystem {
        self.rays[0].rescaled(BASE_ARC_DURATION as u32)
    }

    /// Forward branching from the origin over whole arcs: every slot in `[0, W)` inside
    /// the branch window takes every arc, other slots take arc 0. The past is arc 0.
    pub fn generate(&self, policy: &BranchPolicy, dt: f64) -> Result<Generated> {
        policy.validate()?;
        let w = policy.horizon.round() as i64;
        if (policy.horizon - w as f64).abs() > 1e-9 {
            return Err(FpeError::InvalidArgument("rosette window must be a whole number of arcs".into()));
        }
        let stride = ((dt * ARC_STEPS as f64).round() as usize).max(1);
        if ((stride as f64) / ARC_STEPS as f64 - dt).abs() > 1e-12 || ARC_STEPS % stride != 0 {
            return Err(FpeError::InvalidArgument(format!("rosette dt must divide 1/{ARC_STEPS}")));
        }
        let free: Vec<i64> = (0..w).filter(|&i| policy.branch_window.is_none_or(|(lo, hi)| i as f64 >= lo - 1e-12 && i as f64 <= hi + 1e-12)).collect();
        let total = (self.alpha as f64).powi(free.len() as i32);
        let exceeded = total > policy.max_branches as f64;
        let count = if exceeded { policy.max_branches } else { total as usize };
        let mut out = Vec::with_capacity(count);
        let name = format!("rosette:{}", self.alpha);
        for code in all_words(self.alpha, 0, free.len()).into_iter().take(count) {
            let mut core = vec![0u8; w.max(1) as usize];
            for (slot, &i) in free.iter().enumerate() {
                core[i as usize] = code.core[slot];
            }
            // The past is arc 0 whatever the first forward arc is.
            let word = Word { lo: 0, core };
            let mut t = self.library.render(&word, w, stride, &name);
            let n0 = t.steps_per_side();
            let past = self.library.render(&Word { lo: 0, core: vec![0] }, w, stride, &name);
            t.points[..n0].copy_from_slice(&past.points[..n0]);
            t.decisions.retain(|d| d.time >= 0.0);
            t.branch_id = out.len();
            out.push(t);
        }
        Ok(Generated { trajectories: out, budget_exceeded: exceeded, domain_exits: 0 })
    }
}

/// Builds the 2α-sector rosette and integrates its α arcs, each rescaled to unit duration.
pub fn build_rosette(alpha: usize) -> Result<Rosette> {
    if alpha < 2 {
        return Err(FpeError::InvalidArgument("rosette needs alpha >= 2".into()));
    }
    let gain = if alpha <= 3 { 1.0 } else { (PI / alpha as f64).tan() / 2.0 };
    let a_mat = [[0.0, 0.0], [-gain, 0.0]];
    let bx = [1.0, gain];
    let by = [-1.0, gain];
    let step = PI / alpha as f64;
    let sector_field = |k: usize| -> PlanarField {
        let k = k % (2 * alpha);
        if k % 2 == 0 {
            rotated_affine(bx, a_mat, 2.0 * step * (k / 2) as f64, BASE_ARC_DURATION)
        } else {
            rotated_affine(by, a_mat, 2.0 * step * k.div_ceil(2) as f64, BASE_ARC_DURATION)
        }
    };
    let rays: Vec<PiecewiseSystem> = (0..2 * alpha)
        .map(|r| {
            let phi = step * r as f64;
            let f = SwitchingFunction::polynomial(Poly2::from_terms([(-phi.sin(), 1, 0), (phi.cos(), 0, 1)]));
            PiecewiseSystem::new(
                format!("rosette:{alpha}/ray{r}"),
                sector_field(r),
                sector_field(r + 2 * alpha - 1),
                f,
                Domain::square(2.5),
            )
        })
        .collect();
    let tol = Tolerances::default();
    let dt = 1.0 / ARC_STEPS as f64;
    let mut arcs = Vec::with_capacity(alpha);
    let mut durations = Vec::with_capacity(alpha);
    for j in 0..alpha {
        let sys = &rays[2 * j];
        let out = flow_smooth(sys, Which::X, Vec2::zeros(), 0.0, 1.0, dt, &tol)?;
        let ev = out.event.ok_or_else(|| FpeError::InvalidSystem("rosette arc never returns to its ray".into()))?;
        let back = flow_smooth(sys, Which::Y, ev.point, ev.time, 1.0, dt, &tol)?;
        let end = back.event.ok_or_else(|| FpeError::InvalidSystem("rosette arc never closes".into()))?;
        if end.point.norm() > 1e-8 {
            return Err(FpeError::InvalidSystem(format!("rosette arc closes at {:?}", end.point)));
        }
        let mut pts: Vec<Vec2> = vec![Vec2::zeros(); ARC_STEPS + 1];
        for &(k, q) in out.piece.samples.iter().chain(back.piece.samples.iter()) {
            if (0..=ARC_STEPS as i64).contains(&k) {
                pts[k as usize] = q;
            }
        }
        pts[ARC_STEPS] = Vec2::zeros();
        arcs.push(pts);
        durations.push(end.time * BASE_ARC_DURATION);
    }
    let library = ArcLibrary::new(arcs, durations)?;
    Ok(Rosette { alpha, gain, rays, library })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traj_space::{time_one, ShiftedView};

    #[test]
    fn base_arc_closed_form() {
        let r = build_rosette(3).unwrap();
        let base = r.base_unscaled();
        let tol = Tolerances::default();
        let out = flow_smooth(&base, Which::X, Vec2::zeros(), 0.0, 5.0, 1e-3, &tol).unwrap();
        let ev = out.event.unwrap();
        assert!((ev.time - 2.0).abs() < 1e-9 && (ev.point - Vec2::new(2.0, 0.0)).norm() < 1e-9);
        let back = flow_smooth(&base, Which::Y, ev.point, ev.time, 5.0, 1e-3, &tol).unwrap();
        assert!((back.event.unwrap().time - 4.0).abs() < 1e-9);
        for d in &r.library.raw_durations {
            assert!((d - 4.0).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_two_folds_on_each_lens_axis() {
        let r = build_rosette(3).unwrap();
        let tol = Tolerances::default();
        for j in 0..3 {
            let phi = 2.0 * PI * j as f64 / 3.0;
            let p = Vec2::new(phi.cos(), phi.sin());
            assert_eq!(r.classify(p, &tol), PointClass::SingularTangency);
        }
        assert_eq!(r.classify(Vec2::new(0.5, 0.0), &tol), PointClass::CrossingPos);
    }

    #[test]
    fn arcs_are_rotations_with_uniform_cost() {
        let r = build_rosette(3).unwrap();
        assert!(r.library.uniform_mu(1e-6));
        let rot = rot(2.0 * PI / 3.0);
        for k in (0..=ARC_STEPS).step_by(37) {
            let p = r.library.point(0, k);
            let q = r.library.point(1, k);
            let rp = Vec2::new(rot[0][0] * p.x + rot[0][1] * p.y, rot[1][0] * p.x + rot[1][1] * p.y);
            assert!((rp - q).norm() < 1e-9);
        }
        // Lens apex (1, 1/2) at half of the outbound leg.
        assert!((r.library.point(0, 250) - Vec2::new(1.0, 0.5)).norm() < 1e-9);
    }

    #[test]
    fn wider_rosettes_flag_non_uniform_cost() {
        let r = build_rosette(4).unwrap();
        assert!(!r.library.uniform_mu(1e-6));
        assert!(r.library.mu > 0.0);
        let r2 = build_rosette(2).unwrap();
        assert!(r2.library.uniform_mu(1e-12));
    }

    #[test]
    fn lenses_stay_in_their_sectors() {
        for alpha in 2..=6 {
            let r = build_rosette(alpha).unwrap();
            for j in 0..alpha {
                for k in 1..ARC_STEPS {
                    let p = r.library.point(j, k);
                    let s = r.sector_of(p);
                    assert!(s == 2 * j || s == (2 * j + 2 * alpha - 1) % (2 * alpha), "alpha {alpha} arc {j} k {k}");
                }
            }
        }
    }

    #[test]
    fn forward_generation_counts() {
        let r = build_rosette(3).unwrap();
        let pol = BranchPolicy { horizon: 4.0, ..Default::default() };
        let g = r.generate(&pol, 1e-2).unwrap();
        assert_eq!(g.trajectories.len(), 81);
        let mut seqs: Vec<Vec<String>> = g.trajectories.iter().map(|t| t.decisions.iter().map(|d| d.choice.label()).collect()).collect();
        seqs.sort();
        seqs.dedup();
        assert_eq!(seqs.len(), 81);
    }

    #[test]
    fn time_one_shifts_the_itinerary() {
        let r = build_rosette(3).unwrap();
        let w = Word { lo: 0, core: vec![0, 1, 2, 0, 1, 2] };
        let t = r.library.render(&w, 8, 10, "rosette:3");
        let shifted = r.library.render(&w.shifted(1), 8, 10, "rosette:3");
        let v = time_one(&ShiftedView::new(&t)).unwrap();
        for i in -6..6 {
            assert_eq!(r.library.decode_slot(&t, i + v.shift), r.library.decode_slot(&shifted, i));
        }
    }
}
