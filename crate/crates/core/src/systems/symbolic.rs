//! Closed unit-duration arcs through the origin and trajectory families built from
//! words over them.
//!
//! A word assigns an arc to each unit slot `[i, i+1]`. Words are stored over a core
//! slot range; outside it the first core arc repeats into the past and the last core
//! arc repeats into the future.

use serde::{Deserialize, Serialize};

use crate::entropy::{counts_per_n, fit_entropy, EntropyReport, DEFAULT_UNBOUNDED_THRESHOLD};
use crate::error::{FpeError, Result};
use crate::integrate::{BranchDecision, Choice, SampledTrajectory};
use crate::psvf::Vec2;
use crate::systems::Itinerary;
use crate::traj_space::UnitIntegrals;

/// α closed arcs sampled on a uniform grid of `steps` intervals per unit of time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArcLibrary {
    pub alpha: usize,
    pub steps: usize,
    /// `arcs[j][k] = I_j(k / steps)`, `k = 0..=steps`.
    pub arcs: Vec<Vec<[f64; 2]>>,
    /// `cost[j][k] = ∫₀¹ |I_j − I_k| dt` by the trapezoid rule on the arc grid.
    pub cost: Vec<Vec<f64>>,
    /// Smallest cost between distinct arcs.
    pub mu: f64,
    /// Largest relative deviation of a distinct-pair cost from `mu`.
    pub mu_spread: f64,
    /// Durations of the arcs before normalization.
    pub raw_durations: Vec<f64>,
}

impl ArcLibrary {
    pub fn new(arcs: Vec<Vec<Vec2>>, raw_durations: Vec<f64>) -> Result<Self> {
        let alpha = arcs.len();
        if alpha < 2 {
            return Err(FpeError::InvalidSystem("an arc library needs at least two arcs".into()));
        }
        let steps = arcs[0].len() - 1;
        if steps == 0 || arcs.iter().any(|a| a.len() != steps + 1) {
            return Err(FpeError::InvalidSystem("arcs must share one sampling grid".into()));
        }
        let arcs: Vec<Vec<[f64; 2]>> = arcs.into_iter().map(|a| a.into_iter().map(|p| [p.x, p.y]).collect()).collect();
        let h = 1.0 / steps as f64;
        let mut cost = vec![vec![0.0; alpha]; alpha];
        for j in 0..alpha {
            for k in 0..alpha {
                if j == k {
                    continue;
                }
                let d = |i: usize| {
                    let (p, q) = (arcs[j][i], arcs[k][i]);
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                };
                let mut s = 0.5 * (d(0) + d(steps));
                for i in 1..steps {
                    s += d(i);
                }
                cost[j][k] = s * h;
            }
        }
        let off: Vec<f64> = (0..alpha).flat_map(|j| (0..alpha).filter(move |&k| k != j).map(move |k| (j, k))).map(|(j, k)| cost[j][k]).collect();
        let mu = off.iter().copied().fold(f64::INFINITY, f64::min);
        let max = off.iter().copied().fold(0.0, f64::max);
        Ok(Self { alpha, steps, arcs, cost, mu, mu_spread: (max - mu) / mu, raw_durations })
    }

    /// True when every distinct pair has the same cost to `rel` relative error.
    pub fn uniform_mu(&self, rel: f64) -> bool {
        self.mu_spread <= rel
    }

    /// Twice the largest distance of a sample from the origin; bounds the diameter of
    /// every arc concatenation.
    pub fn extent(&self) -> f64 {
        2.0 * self.arcs.iter().flatten().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
    }

    pub fn point(&self, arc: usize, k: usize) -> Vec2 {
        let p = self.arcs[arc][k];
        Vec2::new(p[0], p[1])
    }

    /// The library restricted to the arcs listed in `keep` (renumbered in order).
    pub fn restricted(&self, keep: &[usize]) -> Result<Self> {
        let arcs = keep.iter().map(|&j| (0..=self.steps).map(|k| self.point(j, k)).collect()).collect();
        Self::new(arcs, keep.iter().map(|&j| self.raw_durations[j]).collect())
    }

    /// Renders a word as a sampled trajectory on `[-W, W]` with `dt = 1/steps·stride`.
    pub fn render(&self, word: &Word, window: i64, stride: usize, system: &str) -> SampledTrajectory {
        let per_unit = self.steps / stride;
        let n = (window as usize) * per_unit;
        let mut points = Vec::with_capacity(2 * n + 1);
        for idx in 0..=2 * n {
            let u = idx as i64 - n as i64;
            let slot = u.div_euclid(per_unit as i64);
            let k = (u.rem_euclid(per_unit as i64) as usize) * stride;
            points.push(self.arcs[word.at(slot)][k]);
        }
        let decisions = (-window..window)
            .map(|i| BranchDecision { time: i as f64, at: [0.0, 0.0], choice: Choice::Arc(word.at(i)) })
            .collect();
        SampledTrajectory {
            system: system.into(),
            window: window as f64,
            dt: stride as f64 / self.steps as f64,
            points,
            decisions,
            branch_id: 0,
        }
    }

    /// Arc index occupying `[i, i+1]` of a rendered trajectory, read back from its
    /// samples: the arc closest to the samples over that slot.
    pub fn decode_slot(&self, traj: &SampledTrajectory, i: i64) -> usize {
        let per_unit = (1.0 / traj.dt).round() as usize;
        let stride = self.steps / per_unit;
        let base = (i * per_unit as i64 + traj.steps_per_side() as i64) as usize;
        let mut best = (f64::INFINITY, 0);
        for j in 0..self.alpha {
            let mut s = 0.0;
            for k in 0..=per_unit {
                let p = traj.points[base + k];
                let q = self.arcs[j][k * stride];
                s += (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            }
            if s < best.0 {
                best = (s, j);
            }
        }
        best.1
    }

    /// Arc indices of slots `0..depth` read from the samples.
    pub fn itinerary(&self, traj: &SampledTrajectory, depth: usize) -> Itinerary {
        Itinerary { symbols: (0..depth as i64).map(|i| self.decode_slot(traj, i) as f64).collect() }
    }
}

/// Arc choices on a core slot range `[lo, lo + core.len())`, constant beyond it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    pub lo: i64,
    pub core: Vec<u8>,
}

impl Word {
    pub fn at(&self, slot: i64) -> usize {
        let k = (slot - self.lo).clamp(0, self.core.len() as i64 - 1);
        self.core[k as usize] as usize
    }

    /// `F₁^k` of the word: slot `i` of the result is slot `i + k` of `self`.
    pub fn shifted(&self, k: i64) -> Word {
        Word { lo: self.lo - k, core: self.core.clone() }
    }
}

/// All `alpha^len` words on the core range `[lo, lo + len)`, in lexicographic order.
pub fn all_words(alpha: usize, lo: i64, len: usize) -> Vec<Word> {
    let total = alpha.pow(len as u32);
    (0..total)
        .map(|mut c| {
            let mut core = vec![0u8; len];
            for slot in (0..len).rev() {
                core[slot] = (c % alpha) as u8;
                c /= alpha;
            }
            Word { lo, core }
        })
        .collect()
}

/// A finite sample of Ω* given by words, with exact unit-interval integrals from the
/// library's cost table.
#[derive(Clone, Debug)]
pub struct SymbolicSet<'a> {
    pub lib: &'a ArcLibrary,
    pub words: Vec<Word>,
    /// Slots `-window..window` are available.
    pub window: i64,
    pub diam: f64,
}

impl<'a> SymbolicSet<'a> {
    pub fn new(lib: &'a ArcLibrary, words: Vec<Word>, window: i64, diam: f64) -> Self {
        Self { lib, words, window, diam }
    }

    /// All words on the core range `[lo, hi)` with truncation half-width `w_prime`
    /// and room for `shift_span` forward shifts.
    pub fn full(lib: &'a ArcLibrary, lo: i64, hi: i64, w_prime: i64, shift_span: i64, diam: f64) -> Self {
        let words = all_words(lib.alpha, lo, (hi - lo) as usize);
        Self::new(lib, words, w_prime + shift_span, diam)
    }
}

/// Counts at `ε = μ/2^m` for each `m` in `ms`, each on all words over `[−m, m + n)`,
/// fitted per ε. On these sets the count at `(μ/2^m, n)` is exactly `α^{2m+n}`.
pub fn symbolic_entropy(system: &str, lib: &ArcLibrary, ms: &[u32], ns: &[usize], w_prime: i64, diam: f64) -> Result<EntropyReport> {
    let mut counts = Vec::new();
    for &m in ms {
        let eps = lib.mu / 2f64.powi(m as i32);
        let m = m as i64;
        counts.extend(counts_per_n(
            |n| Ok(SymbolicSet::full(lib, -m, m + n as i64, w_prime, n as i64 - 1, diam)),
            &[eps],
            ns,
            1,
            w_prime,
        )?);
    }
    fit_entropy(system, &counts, DEFAULT_UNBOUNDED_THRESHOLD)
}

impl UnitIntegrals for SymbolicSet<'_> {
    fn len(&self) -> usize {
        self.words.len()
    }

    fn slots(&self) -> (i64, i64) {
        (-self.window, self.window)
    }

    fn integrals(&self, a: usize, b: usize, out: &mut [f64]) {
        let (wa, wb) = (&self.words[a], &self.words[b]);
        for (k, o) in out.iter_mut().enumerate() {
            let i = k as i64 - self.window;
            *o = self.lib.cost[wa.at(i)][wb.at(i)];
        }
    }

    fn diam(&self) -> f64 {
        self.diam
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three rotated copies of a circle through the origin.
    fn circles() -> ArcLibrary {
        let steps = 100;
        let arcs = (0..3)
            .map(|j| {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / 3.0;
                (0..=steps)
                    .map(|k| {
                        let s = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
                        let (x, y) = (1.0 - s.cos(), s.sin());
                        Vec2::new(phi.cos() * x - phi.sin() * y, phi.sin() * x + phi.cos() * y)
                    })
                    .collect()
            })
            .collect();
        ArcLibrary::new(arcs, vec![1.0; 3]).unwrap()
    }

    #[test]
    fn rotated_copies_have_uniform_cost() {
        let lib = circles();
        assert!(lib.uniform_mu(1e-9));
        assert!(lib.cost[0][0] == 0.0);
    }

    #[test]
    fn word_extension_and_shift() {
        let w = Word { lo: 0, core: vec![2, 0, 1] };
        assert_eq!((w.at(-5), w.at(0), w.at(1), w.at(2), w.at(9)), (2, 2, 0, 1, 1));
        let s = w.shifted(1);
        assert_eq!((s.at(0), s.at(1)), (0, 1));
    }

    #[test]
    fn word_enumeration() {
        let ws = all_words(3, -1, 3);
        assert_eq!(ws.len(), 27);
        assert_eq!(ws[5].core, vec![0, 1, 2]);
    }

    #[test]
    fn render_and_decode_round_trip() {
        let lib = circles();
        let w = Word { lo: 0, core: vec![0, 1, 2, 0] };
        let t = lib.render(&w, 6, 1, "circles");
        assert_eq!(t.points.len(), 2 * 6 * 100 + 1);
        for i in -6..6 {
            assert_eq!(lib.decode_slot(&t, i), w.at(i));
        }
    }

    #[test]
    fn symbolic_integrals_match_sampled() {
        use crate::traj_space::{SampledSet, TrajectoryMetricConfig};
        let lib = circles();
        let words = vec![Word { lo: 0, core: vec![0, 1] }, Word { lo: 0, core: vec![2, 1] }];
        let sym = SymbolicSet::new(&lib, words.clone(), 4, 4.0);
        let trajs = words.iter().map(|w| lib.render(w, 4, 1, "c")).collect();
        let samp = SampledSet::new(trajs, &TrajectoryMetricConfig::new(4.0, 0.01, 4.0).unwrap()).unwrap();
        let (mut a, mut b) = (vec![0.0; 8], vec![0.0; 8]);
        sym.integrals(0, 1, &mut a);
        samp.integrals(0, 1, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
