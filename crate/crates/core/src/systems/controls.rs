//! Zero-entropy controls: an attracting node fed by an escaping segment, and a smooth
//! rotation split by a Σ it crosses transversally.

use crate::error::Result;
use crate::integrate::{generate_with, BranchPolicy, Choice, DecisionContext, Generated};
use crate::poly::Poly2;
use crate::psvf::{Domain, PiecewiseSystem, PlanarField, SwitchingFunction, Tolerances, Vec2};

/// `X = (1, −2x)` above Σ, `Y = (−4(x+1), −(1+y))` below (a node at (−1, −1)).
///
/// Σ^e is `x < 0`. The sliding field `x' = (8x²+8x+1)/(1−2x)` has a repelling
/// pseudo-equilibrium at `(−2+√2)/4` and an attracting one at `(−2−√2)/4`, so every
/// trajectory through Σ^e settles at the node or the attracting pseudo-equilibrium.
pub fn node0() -> PiecewiseSystem {
    let x = PlanarField::polynomial(Poly2::constant(1.0), Poly2::from_terms([(-2.0, 1, 0)]));
    let y = PlanarField::polynomial(
        Poly2::from_terms([(-4.0, 1, 0), (-4.0, 0, 0)]),
        Poly2::from_terms([(-1.0, 0, 0), (-1.0, 0, 1)]),
    );
    PiecewiseSystem::new("node0", x, y, SwitchingFunction::horizontal(), Domain::new(-2.5, 2.0, -2.0, 2.0))
}

/// Rigid rotation `(−y, x)` on both sides of `y = 0`.
pub fn smooth_rot() -> PiecewiseSystem {
    let r = PlanarField::polynomial(Poly2::from_terms([(-1.0, 0, 1)]), Poly2::from_terms([(1.0, 1, 0)]));
    PiecewiseSystem::new("smooth-rot", r.clone(), r, SwitchingFunction::horizontal(), Domain::square(2.0))
}

/// Seeds `x_i` evenly inside `(lo, hi)` on Σ.
pub fn sigma_seeds(lo: f64, hi: f64, count: usize) -> Vec<Vec2> {
    (0..count).map(|i| Vec2::new(lo + (hi - lo) * (i as f64 + 0.5) / count as f64, 0.0)).collect()
}

/// node0 family: seeds in Σ^e, every continuation at `t = 0` and canonical ones after.
pub fn node0_family(seeds: usize, window: f64, dt: f64) -> Result<Generated> {
    let sys = node0();
    let policy = BranchPolicy { horizon: window, branch_window: Some((0.0, 0.0)), ..Default::default() };
    let fwd = |ctx: &DecisionContext, opts: &[Choice]| -> Vec<Choice> {
        if ctx.time == 0.0 && !ctx.on_slide {
            opts.to_vec()
        } else {
            opts[..1].to_vec()
        }
    };
    let back = |_: &DecisionContext, opts: &[Choice]| -> Vec<Choice> { opts[..1].to_vec() };
    generate_with(&sys, &sigma_seeds(-0.8, -0.2, seeds), &policy, dt, &Tolerances::default(), &fwd, Some(&back))
}

/// smooth-rot family: circles of several radii and phases.
pub fn smooth_rot_family(count: usize, window: f64, dt: f64) -> Result<Generated> {
    let sys = smooth_rot();
    let seeds: Vec<Vec2> = (0..count)
        .map(|i| {
            let r = 0.3 + 1.2 * (i % 5) as f64 / 5.0;
            let a = 0.37 + 2.0 * std::f64::consts::PI * (i / 5) as f64 / count.div_ceil(5) as f64;
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    let policy = BranchPolicy { horizon: window, ..Default::default() };
    let sel = |_: &DecisionContext, opts: &[Choice]| -> Vec<Choice> { opts.to_vec() };
    generate_with(&sys, &seeds, &policy, dt, &Tolerances::default(), &sel, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psvf::{classify_point, sliding_field, PointClass};

    #[test]
    fn node0_sigma_structure() {
        let s = node0();
        let t = Tolerances::default();
        assert_eq!(classify_point(&s, Vec2::new(-0.5, 0.0), &t), PointClass::Escaping);
        assert_eq!(classify_point(&s, Vec2::new(0.5, 0.0), &t), PointClass::CrossingNeg);
        for x in [(-2.0 + 2f64.sqrt()) / 4.0, (-2.0 - 2f64.sqrt()) / 4.0] {
            assert!(sliding_field(&s, Vec2::new(x, 0.0), &t).unwrap().norm() < 1e-12);
        }
        let z = sliding_field(&s, Vec2::new(-0.5, 0.0), &t).unwrap();
        assert!((z.x - (8.0 * 0.25 - 4.0 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_is_a_single_trajectory_per_seed() {
        let g = smooth_rot_family(10, 4.0, 0.01).unwrap();
        assert_eq!(g.trajectories.len(), 10);
        assert_eq!(classify_point(&smooth_rot(), Vec2::zeros(), &Tolerances::default()), PointClass::Degenerate);
    }

    #[test]
    fn node0_family_branches_only_at_start() {
        let g = node0_family(4, 4.0, 0.01).unwrap();
        assert_eq!(g.trajectories.len(), 12);
        assert!(!g.budget_exceeded);
    }
}
