//! Property tests for invariants that span modules: classification symmetry, trajectory
//! well-formedness, reversal, metric closeness and count monotonicity.

use proptest::prelude::*;

use fpe::entropy::{counts_on_set, CapacityCounts};
use fpe::integrate::{generate_trajectories, step_filippov, BranchPolicy, Choice, SampledTrajectory};
use fpe::psvf::{classify_point, PiecewiseSystem, PointClass, Tolerances, Vec2};
use fpe::systems::bean::{bean_system, in_k};
use fpe::systems::figure8::figure8_system;
use fpe::systems::rosette::build_rosette;
use fpe::systems::symbolic::{all_words, ArcLibrary, SymbolicSet, Word};
use fpe::traj_space::{rho, SampledSet, ShiftedView, TrajectoryMetricConfig, UnitIntegrals};

fn mirrored(c: PointClass) -> PointClass {
    match c {
        PointClass::CrossingPos => PointClass::CrossingNeg,
        PointClass::CrossingNeg => PointClass::CrossingPos,
        PointClass::SigmaPlus => PointClass::SigmaMinus,
        PointClass::SigmaMinus => PointClass::SigmaPlus,
        other => other,
    }
}

fn bean_tree(x: f64, window: f64) -> Vec<SampledTrajectory> {
    let policy = BranchPolicy { horizon: window, branch_window: Some((0.0, 1.0)), ..Default::default() };
    generate_trajectories(&bean_system(), &[Vec2::new(x, 0.0)], &policy, 0.01, &Tolerances::default()).unwrap().trajectories
}

fn rosette3() -> &'static ArcLibrary {
    use std::sync::OnceLock;
    static LIB: OnceLock<ArcLibrary> = OnceLock::new();
    LIB.get_or_init(|| build_rosette(3).unwrap().library)
}

fn word(core: &[u8]) -> Word {
    Word { lo: 0, core: core.to_vec() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    /// Negating f and swapping X, Y mirrors crossing classes and keeps sliding/escaping.
    #[test]
    fn sign_symmetry(x in -1.1f64..1.1, y in -0.3f64..0.3, on_sigma in any::<bool>()) {
        let tol = Tolerances::default();
        for sys in [bean_system(), figure8_system()] {
            let p = Vec2::new(x, if on_sigma { 0.0 } else { y });
            let a = classify_point(&sys, p, &tol);
            let b = classify_point(&sys.flipped(), p, &tol);
            match a {
                PointClass::Fold { .. } | PointClass::TwoFold { .. } => {}
                _ => prop_assert_eq!(b, mirrored(a)),
            }
        }
    }

    /// Decisions sit on Σ, samples respect the speed bound, choices are admissible
    /// and generation is reproducible.
    #[test]
    fn bean_trees_are_well_formed(x in -0.65f64..-0.05) {
        let sys = bean_system();
        let tol = Tolerances::default();
        let trees = bean_tree(x, 3.0);
        prop_assert!(!trees.is_empty());
        prop_assert_eq!(&trees, &bean_tree(x, 3.0));
        for t in &trees {
            for w in t.points.windows(2) {
                let step = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
                prop_assert!(step <= sys.speed_bound * t.dt * (1.0 + 1e-6), "step {step}");
            }
            prop_assert!(t.points.iter().all(|p| in_k(Vec2::new(p[0], p[1]), 1e-9)));
            for d in &t.decisions {
                let p = Vec2::new(d.at[0], d.at[1]);
                prop_assert!(sys.f.eval(p).abs() <= tol.tol_f, "decision off Σ at {p:?}");
                match d.choice {
                    Choice::ExitSlideToX(_) | Choice::ExitSlideToY(_) => {
                        let c = classify_point(&sys, p, &tol);
                        prop_assert!(matches!(c, PointClass::Escaping | PointClass::Sliding | PointClass::TwoFold { .. } | PointClass::Fold { .. }), "{c:?}");
                    }
                    // Labels are forward-time continuations, also on the backward half.
                    c => {
                        let opts = step_filippov(&sys, p, &tol).unwrap();
                        prop_assert!(opts.contains(&c), "{c:?} not in {opts:?} at {p:?}");
                    }
                }
            }
        }
    }

    /// The backward half of a canonical trajectory is the forward half in the reversed system.
    /// Seeds lie on X orbits y + x² = c with c < 1/2; c = 1/2 passes through the Y folds, where
    /// sub-step grazes are not resolved.
    #[test]
    fn reversal_symmetry(c in 0.05f64..0.45, s in -0.95f64..0.95) {
        let x = s * c.sqrt();
        let p = Vec2::new(x, c - x * x);
        let policy = BranchPolicy { horizon: 2.0, branch_window: Some((1e9, 1e9)), ..Default::default() };
        let tol = Tolerances::default();
        let sys = bean_system();
        let fwd = generate_trajectories(&sys, &[p], &policy, 0.01, &tol).unwrap().trajectories;
        let rev = generate_trajectories(&sys.reversed(), &[p], &policy, 0.01, &tol).unwrap().trajectories;
        prop_assert_eq!((fwd.len(), rev.len()), (1, 1));
        let (a, b) = (&fwd[0], &rev[0]);
        let mid = a.steps_per_side();
        for k in 0..=mid {
            let (u, v) = (a.points[mid - k], b.points[mid + k]);
            prop_assert!((u[0] - v[0]).abs() <= 1e-8 && (u[1] - v[1]).abs() <= 1e-8, "t = {}: {u:?} vs {v:?}", k as f64 * a.dt);
        }
    }

    /// Small ρ forces small pointwise gaps near time 0.
    #[test]
    fn closeness_propagates(a in proptest::collection::vec(0u8..3, 6), b in proptest::collection::vec(0u8..3, 6), t0 in 1i64..3, eps in 0.05f64..1.0) {
        let lib = rosette3();
        let (ga, gb) = (lib.render(&word(&a), 6, 10, "r"), lib.render(&word(&b), 6, 10, "r"));
        let cfg = TrajectoryMetricConfig::new(6.0, 0.01, lib.extent()).unwrap();
        let r = rho(&ShiftedView::new(&ga), &ShiftedView::new(&gb), &cfg, 6).unwrap();
        if r < 2f64.powi(-(t0 as i32)) * eps * 0.1 {
            let mid = ga.steps_per_side() as i64;
            let reach = t0 * 100;
            for i in (mid - reach + 1)..(mid + reach) {
                let (p, q) = (ga.points[i as usize], gb.points[i as usize]);
                prop_assert!(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() < eps);
            }
        }
    }

    /// Per-slot integrals of sampled rosette trajectories are 0 or μ.
    #[test]
    fn rosette_slot_dichotomy(a in proptest::collection::vec(0u8..3, 6), b in proptest::collection::vec(0u8..3, 6)) {
        let lib = rosette3();
        let trajs = vec![lib.render(&word(&a), 6, 1, "r"), lib.render(&word(&b), 6, 1, "r")];
        let set = SampledSet::new(trajs, &TrajectoryMetricConfig::new(6.0, 0.001, lib.extent()).unwrap()).unwrap();
        let mut out = vec![0.0; 12];
        set.integrals(0, 1, &mut out);
        for (k, v) in out.iter().enumerate() {
            let slot = k as i64 - 6;
            let same = word(&a).at(slot) == word(&b).at(slot);
            if same {
                prop_assert_eq!(*v, 0.0);
            } else {
                prop_assert!((v - lib.mu).abs() <= 1e-6 * lib.mu, "slot {slot}: {v} vs {}", lib.mu);
            }
        }
    }
}

fn grid(c: &[CapacityCounts], eps: &[f64], ns: &[usize]) -> Vec<Vec<(usize, usize)>> {
    eps.iter()
        .map(|&e| ns.iter().map(|&n| c.iter().find(|x| x.eps.get() == e && x.n == n).map(|x| (x.span_upper, x.sep_lower)).unwrap()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// Counts grow with n and shrink with ε on any subfamily.
    #[test]
    fn counts_are_monotone(keep in proptest::collection::vec(any::<bool>(), 81)) {
        let lib = rosette3();
        let words: Vec<Word> = all_words(3, 0, 4).into_iter().zip(&keep).filter(|(_, k)| **k).map(|(w, _)| w).collect();
        prop_assume!(words.len() >= 2);
        let set = SymbolicSet::new(lib, words, 8 + 3, lib.extent());
        let (eps, ns) = ([lib.mu * 1.5, lib.mu * 0.75, lib.mu * 0.3], [1, 2, 3, 4]);
        let g = grid(&counts_on_set(&set, &eps, &ns, 1, 8).unwrap(), &eps, &ns);
        for e in 0..eps.len() {
            for k in 0..ns.len() {
                if k + 1 < ns.len() {
                    prop_assert!(g[e][k + 1].0 >= g[e][k].0 && g[e][k + 1].1 >= g[e][k].1, "n step at e={e} k={k}: {:?}", g);
                }
                if e + 1 < eps.len() {
                    prop_assert!(g[e + 1][k].0 >= g[e][k].0 && g[e + 1][k].1 >= g[e][k].1);
                }
            }
        }
    }

    /// A symbol-merging factor map never raises counts at matched scales.
    #[test]
    fn factor_counts_do_not_exceed_source(merge in 0u8..3, keep in proptest::collection::vec(any::<bool>(), 81)) {
        let lib = rosette3();
        let sub = lib.restricted(&[0, 1]).unwrap();
        let words: Vec<Word> = all_words(3, 0, 4).into_iter().zip(&keep).filter(|(_, k)| **k).map(|(w, _)| w).collect();
        prop_assume!(words.len() >= 2);
        // Symbol `merge` joins the other two's image: 3 arcs onto 2.
        let code = |s: u8| -> u8 { let t = if s == merge { (merge + 1) % 3 } else { s }; u8::from(t == *[0u8, 1, 2].iter().filter(|&&v| v != merge).max().unwrap()) };
        let mut images: Vec<Word> = words.iter().map(|w| Word { lo: w.lo, core: w.core.iter().map(|&s| code(s)).collect() }).collect();
        images.sort_by(|a, b| a.core.cmp(&b.core));
        images.dedup();
        let (eps, ns) = ([lib.mu * 0.75, lib.mu * 0.3], [1, 2, 3]);
        let src = grid(&counts_on_set(&SymbolicSet::new(lib, words, 11, lib.extent()), &eps, &ns, 1, 8).unwrap(), &eps, &ns);
        let fac = grid(&counts_on_set(&SymbolicSet::new(&sub, images, 11, lib.extent()), &eps, &ns, 1, 8).unwrap(), &eps, &ns);
        for e in 0..eps.len() {
            for k in 0..ns.len() {
                prop_assert!(fac[e][k].1 <= src[e][k].1, "sep {:?} > {:?}", fac[e][k], src[e][k]);
            }
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let lib = rosette3();
    let run = || fpe::systems::symbolic::symbolic_entropy("r", lib, &[1], &[1, 2, 3], 8, lib.extent()).unwrap();
    assert_eq!(run(), run());
    let sys: PiecewiseSystem = bean_system();
    assert_eq!(sys.name, "bean");
}
