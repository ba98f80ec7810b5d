//! ε-capacity counts and exponential growth-rate fits.
//!
//! Counts are taken on finite trajectory families. A spanning count is a greedy cover
//! by d_n-balls (an upper bound on the minimal cover of that family), a separated count
//! is a greedy maximal separated subset (a lower bound on the maximal one).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{FpeError, Result};
use crate::integrate::{generate_trajectories, BranchPolicy};
use crate::psvf::{PiecewiseSystem, Tolerances, Vec2};
use crate::traj_space::{truncation_bound, SampledSet, TrajectoryMetricConfig, UnitIntegrals, WithinTable};

/// Largest residual (in log-count units) tolerated inside a linear regime.
pub const REGIME_TOL: f64 = 0.05;

/// Smallest slope increase between consecutive ε that counts as growth.
pub const SLOPE_RISE: f64 = 1e-6;

/// Default growth threshold above which increasing slopes count as evidence of h = ∞.
pub const DEFAULT_UNBOUNDED_THRESHOLD: f64 = 1.386_294_361_119_890_6; // ln 4

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityCounts {
    pub eps: OrderedEps,
    pub n: usize,
    pub span_upper: usize,
    pub sep_lower: usize,
    /// Size of the family the counts were taken on.
    pub set_size: usize,
}

/// ε stored by bit pattern so counts can derive `Eq`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedEps(u64);

impl OrderedEps {
    pub fn new(e: f64) -> Self {
        Self(e.to_bits())
    }
    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

fn and_count(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

/// Greedy cover of cell `(e, k)`: repeatedly take the ball covering most uncovered
/// members, ties to the lowest index. Lazy evaluation gives the same sequence as the
/// eager greedy since coverage counts only shrink.
pub fn greedy_cover(table: &WithinTable, e: usize, k: usize) -> Vec<usize> {
    let n = table.size;
    let words = table.words();
    let mut uncovered = vec![0u64; words];
    for i in 0..n {
        uncovered[i / 64] |= 1 << (i % 64);
    }
    let mut heap: BinaryHeap<(u32, Reverse<usize>)> =
        (0..n).map(|i| (and_count(table.row(e, k, i), &uncovered), Reverse(i))).collect();
    let mut left = n;
    let mut centers = Vec::new();
    while left > 0 {
        let (c, Reverse(i)) = heap.pop().expect("uncovered members remain");
        let fresh = and_count(table.row(e, k, i), &uncovered);
        if fresh != c {
            heap.push((fresh, Reverse(i)));
            continue;
        }
        if fresh == 0 {
            break;
        }
        centers.push(i);
        for (u, r) in uncovered.iter_mut().zip(table.row(e, k, i)) {
            *u &= !r;
        }
        left -= fresh as usize;
    }
    centers
}

/// Greedy maximal separated subset in index order.
pub fn greedy_separated(table: &WithinTable, e: usize, k: usize) -> Vec<usize> {
    let mut chosen = vec![0u64; table.words()];
    let mut out = Vec::new();
    for i in 0..table.size {
        if and_count(table.row(e, k, i), &chosen) == 0 {
            chosen[i / 64] |= 1 << (i % 64);
            out.push(i);
        }
    }
    out
}

/// Spanning and separated counts for one table cell.
///
/// A maximal separated set is itself a cover, so the reported spanning count is the
/// smaller of the greedy cover and the separated set.
pub fn cell_counts(table: &WithinTable, e: usize, k: usize) -> CapacityCounts {
    let sep = greedy_separated(table, e, k).len();
    let span = greedy_cover(table, e, k).len().min(sep);
    CapacityCounts {
        eps: OrderedEps::new(table.eps[e]),
        n: table.ns[k],
        span_upper: span,
        sep_lower: sep,
        set_size: table.size,
    }
}

fn check_eps(eps: &[f64], diam: f64, w_prime: i64) -> Result<()> {
    let floor = 4.0 * truncation_bound(diam, w_prime);
    if let Some(bad) = eps.iter().find(|&&e| !(e > floor)) {
        return Err(FpeError::InvalidArgument(format!(
            "eps {bad} must exceed 4 x truncation bound = {floor}"
        )));
    }
    Ok(())
}

/// Counts on one fixed family for every `(ε, n)`; d_n uses shifts `0, step, …`.
pub fn counts_on_set<S: UnitIntegrals + ?Sized>(
    set: &S,
    eps: &[f64],
    ns: &[usize],
    step: usize,
    w_prime: i64,
) -> Result<Vec<CapacityCounts>> {
    check_eps(eps, set.diam(), w_prime)?;
    if set.is_empty() {
        return Err(FpeError::InsufficientData("empty trajectory family".into()));
    }
    let table = WithinTable::build(set, eps, ns, step, w_prime)?;
    let mut out = Vec::new();
    for e in 0..eps.len() {
        for k in 0..ns.len() {
            out.push(cell_counts(&table, e, k));
        }
    }
    Ok(monotone_envelope(out))
}

/// Greedy bounds need not be monotone. A cover at a finer cell (smaller ε, larger n) also covers
/// a coarser one, and a separated set stays separated at finer cells, so the running min of span
/// and running max of sep over the grid are still valid bounds, and they are monotone.
fn monotone_envelope(raw: Vec<CapacityCounts>) -> Vec<CapacityCounts> {
    let finer = |a: &CapacityCounts, b: &CapacityCounts| b.eps.get() <= a.eps.get() && b.n >= a.n;
    raw.iter()
        .map(|c| {
            let span = raw.iter().filter(|o| finer(c, o)).map(|o| o.span_upper).min().unwrap_or(c.span_upper);
            let sep = raw.iter().filter(|o| finer(o, c)).map(|o| o.sep_lower).max().unwrap_or(c.sep_lower);
            CapacityCounts { span_upper: span, sep_lower: sep, ..*c }
        })
        .collect()
}

/// Counts where the family depends on `n` (symbolic samples of Ω* are rebuilt per n).
pub fn counts_per_n<S, F>(make: F, eps: &[f64], ns: &[usize], step: usize, w_prime: i64) -> Result<Vec<CapacityCounts>>
where
    S: UnitIntegrals,
    F: Fn(usize) -> Result<S>,
{
    let mut out = Vec::new();
    for &n in ns {
        let set = make(n)?;
        out.extend(counts_on_set(&set, eps, &[n], step, w_prime)?);
    }
    out.sort_by(|a, b| b.eps.get().partial_cmp(&a.eps.get()).unwrap().then(a.n.cmp(&b.n)));
    Ok(out)
}

/// Greedy cover size on a family at one `(ε, n)`.
pub fn spanning_count<S: UnitIntegrals + ?Sized>(set: &S, eps: f64, n: usize, w_prime: i64) -> Result<usize> {
    Ok(counts_on_set(set, &[eps], &[n], 1, w_prime)?[0].span_upper)
}

/// Greedy maximal separated subset size on a family at one `(ε, n)`.
pub fn separated_count<S: UnitIntegrals + ?Sized>(set: &S, eps: f64, n: usize, w_prime: i64) -> Result<usize> {
    Ok(counts_on_set(set, &[eps], &[n], 1, w_prime)?[0].sep_lower)
}

/// Least-squares line through `(x, y)`: `(slope, intercept, max |residual|)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let res = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).abs()).fold(0.0, f64::max);
    (slope, icpt, res)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// First and last n of the fitted regime.
    pub n_lo: usize,
    pub n_hi: usize,
    pub max_residual: f64,
}

/// Slope of `log count` against `n` over the largest linear regime: the longest run
/// of at least three consecutive n-values fitting a line within [`REGIME_TOL`], the
/// latest such run on ties. Values that saturate the family size are excluded unless
/// fewer than three would remain.
pub fn regime_slope(ns: &[usize], counts: &[usize], set_size: usize) -> Result<SlopeFit> {
    if ns.len() < 3 {
        return Err(FpeError::InsufficientData(format!("need at least 3 n-values, got {}", ns.len())));
    }
    let mut idx: Vec<usize> = (0..ns.len()).filter(|&i| counts[i] < set_size).collect();
    if idx.len() < 3 {
        idx = (0..ns.len()).collect();
    }
    let xs: Vec<f64> = idx.iter().map(|&i| ns[i] as f64).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| (counts[i].max(1) as f64).ln()).collect();
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for len in (3..=xs.len()).rev() {
        for lo in (0..=xs.len() - len).rev() {
            let (s, _, r) = least_squares(&xs[lo..lo + len], &ys[lo..lo + len]);
            if r <= REGIME_TOL {
                best = Some((lo, lo + len - 1, s, r));
                break;
            }
        }
        if best.is_some() {
            break;
        }
    }
    let (lo, hi, slope, res) = best.unwrap_or_else(|| {
        let (s, _, r) = least_squares(&xs, &ys);
        (0, xs.len() - 1, s, r)
    });
    Ok(SlopeFit { slope, n_lo: ns[idx[lo]], n_hi: ns[idx[hi]], max_residual: res })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSlopes {
    pub eps: f64,
    pub span: SlopeFit,
    pub sep: SlopeFit,
    /// `span.slope − sep.slope`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub system: String,
    /// Scales, largest first.
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    /// `span[e][k]` at `(eps[e], n[k])`.
    pub span: Vec<Vec<usize>>,
    pub sep: Vec<Vec<usize>>,
    pub slopes: Vec<EpsSlopes>,
    /// Separated-count slope at the smallest ε, clamped at 0.
    pub h_estimate: f64,
    /// True when separated slopes strictly increase as ε decreases.
    pub slopes_increasing: bool,
    pub verdict: String,
    pub set_size: usize,
    /// Set when the family was truncated by the branch budget.
    #[serde(default)]
    pub partial: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

pub const VERDICT_UNBOUNDED: &str = "UNBOUNDED-EVIDENCE";
pub const VERDICT_FINITE: &str = "FINITE";

/// Fits every ε row of `counts` and assembles the report.
pub fn fit_entropy(system: &str, counts: &[CapacityCounts], threshold: f64) -> Result<EntropyReport> {
    let mut eps: Vec<f64> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for c in counts {
        if !eps.iter().any(|&e| e.to_bits() == c.eps.get().to_bits()) {
            eps.push(c.eps.get());
        }
        if !ns.contains(&c.n) {
            ns.push(c.n);
        }
    }
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ns.sort_unstable();
    if eps.is_empty() {
        return Err(FpeError::InsufficientData("no counts".into()));
    }
    let mut span = vec![vec![0; ns.len()]; eps.len()];
    let mut sep = vec![vec![0; ns.len()]; eps.len()];
    let mut sizes = vec![vec![0; ns.len()]; eps.len()];
    for c in counts {
        let e = eps.iter().position(|&x| x.to_bits() == c.eps.get().to_bits()).unwrap();
        let k = ns.iter().position(|&x| x == c.n).unwrap();
        span[e][k] = c.span_upper;
        sep[e][k] = c.sep_lower;
        sizes[e][k] = c.set_size;
    }
    let mut slopes = Vec::new();
    for e in 0..eps.len() {
        // Families rebuilt per n never saturate in the fitting sense.
        let fixed = sizes[e].iter().all(|&s| s == sizes[e][0]);
        let cap = if fixed { sizes[e][0] } else { usize::MAX };
        let sp = regime_slope(&ns, &span[e], cap)?;
        let se = regime_slope(&ns, &sep[e], cap)?;
        slopes.push(EpsSlopes { eps: eps[e], span: sp, sep: se, gap: sp.slope - se.slope });
    }
    let h_estimate = slopes.last().unwrap().sep.slope.max(0.0);
    // Equal slopes differ by round-off; growth must exceed SLOPE_RISE to count.
    let increasing = slopes.len() >= 2 && slopes.windows(2).all(|w| w[1].sep.slope > w[0].sep.slope + SLOPE_RISE);
    let verdict = if increasing && slopes.last().unwrap().sep.slope > threshold { VERDICT_UNBOUNDED } else { VERDICT_FINITE };
    Ok(EntropyReport {
        system: system.into(),
        eps,
        n: ns,
        span,
        sep,
        slopes,
        h_estimate,
        slopes_increasing: increasing,
        verdict: verdict.into(),
        set_size: sizes.iter().flatten().copied().max().unwrap_or(0),
        partial: false,
        notes: vec![],
    })
}

/// Pipeline on a fixed family: pairwise d_n, counts, fit.
pub fn estimate_from_set<S: UnitIntegrals + ?Sized>(
    system: &str,
    set: &S,
    eps: &[f64],
    ns: &[usize],
    w_prime: i64,
) -> Result<EntropyReport> {
    let counts = counts_on_set(set, eps, ns, 1, w_prime)?;
    fit_entropy(system, &counts, DEFAULT_UNBOUNDED_THRESHOLD)
}

/// Generation, pairwise d_n, counts and fit in one pass over a fixed sampled family.
/// The metric window is the policy horizon; it must cover `w_prime + max n − 1`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_entropy(
    sys: &PiecewiseSystem,
    seeds: &[Vec2],
    policy: &BranchPolicy,
    dt: f64,
    eps: &[f64],
    ns: &[usize],
    w_prime: i64,
    quad_dt: f64,
    diam: f64,
) -> Result<EntropyReport> {
    let g = generate_trajectories(sys, seeds, policy, dt, &Tolerances::default())?;
    let cfg = TrajectoryMetricConfig::new(policy.horizon, quad_dt, diam)?;
    let set = SampledSet::new(g.trajectories, &cfg)?;
    let mut report = estimate_from_set(&sys.name, &set, eps, ns, w_prime)?;
    report.partial = g.budget_exceeded;
    if g.domain_exits > 0 {
        report.notes.push(format!("{} branches left the domain and were dropped", g.domain_exits));
    }
    Ok(report)
}

/// Geometric schedule `ε₀ / 2^k`, `k = 0..levels`.
pub fn eps_schedule(eps0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| eps0 / 2f64.powi(k as i32)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub m: usize,
    pub eps: f64,
    pub n: Vec<usize>,
    pub counts_f1: Vec<usize>,
    pub counts_fm: Vec<usize>,
    pub slope_f1: f64,
    pub slope_fm: f64,
    /// `slope_fm / slope_f1`; `None` when the F₁ slope vanishes.
    pub ratio: Option<f64>,
}

/// Compares growth under F₁^m with growth under F₁. `make(n, m)` supplies the family
/// used for `n` iterates of F₁^m (it may ignore its arguments for fixed families).
pub fn power_check<S, F>(make: F, m: usize, eps: f64, ns: &[usize], w_prime: i64) -> Result<PowerReport>
where
    S: UnitIntegrals,
    F: Fn(usize, usize) -> Result<S>,
{
    if m == 0 {
        return Err(FpeError::InvalidArgument("m must be positive".into()));
    }
    let run = |step: usize| -> Result<(Vec<usize>, SlopeFit)> {
        let counts = counts_per_n(|n| make(n, step), &[eps], ns, step, w_prime)?;
        let sep: Vec<usize> = counts.iter().map(|c| c.sep_lower).collect();
        let fit = regime_slope(ns, &sep, usize::MAX)?;
        Ok((sep, fit))
    };
    let (c1, f1) = run(1)?;
    let (cm, fm) = if m == 1 { (c1.clone(), f1) } else { run(m)? };
    let ratio = (f1.slope.abs() > 1e-9).then(|| fm.slope / f1.slope);
    Ok(PowerReport { m, eps, n: ns.to_vec(), counts_f1: c1, counts_fm: cm, slope_f1: f1.slope, slope_fm: fm.slope, ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictionReport {
    pub passes: bool,
    /// Number of `(ε, n)` cells where a subset count exceeds the full count.
    pub count_violations: usize,
    pub slope_sub: f64,
    pub slope_full: f64,
}

/// Subset counts never exceed full-set counts, and the subset slope is at most the
/// full slope plus 0.02, at the smallest common ε.
pub fn restriction_check(sub: &[CapacityCounts], full: &[CapacityCounts]) -> Result<RestrictionReport> {
    let mut violations = 0;
    for s in sub {
        let f = full
            .iter()
            .find(|f| f.eps == s.eps && f.n == s.n)
            .ok_or_else(|| FpeError::InsufficientData(format!("no full count at eps={}, n={}", s.eps.get(), s.n)))?;
        if s.span_upper > f.span_upper || s.sep_lower > f.sep_lower {
            violations += 1;
        }
    }
    let rs = fit_entropy("sub", sub, f64::INFINITY)?;
    let rf = fit_entropy("full", full, f64::INFINITY)?;
    let (slope_sub, slope_full) = (rs.h_estimate, rf.h_estimate);
    Ok(RestrictionReport { passes: violations == 0 && slope_sub <= slope_full + 0.02, count_violations: violations, slope_sub, slope_full })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Points on a line, pairwise distance |a − b| at every unit interval weight.
    struct Line {
        xs: Vec<f64>,
    }

    impl UnitIntegrals for Line {
        fn len(&self) -> usize {
            self.xs.len()
        }
        fn slots(&self) -> (i64, i64) {
            (-8, 12)
        }
        fn integrals(&self, a: usize, b: usize, out: &mut [f64]) {
            out.fill((self.xs[a] - self.xs[b]).abs());
        }
        fn diam(&self) -> f64 {
            1e-3
        }
    }

    fn counts_of(n: usize, c: usize) -> CapacityCounts {
        CapacityCounts { eps: OrderedEps::new(0.1), n, span_upper: c, sep_lower: c, set_size: usize::MAX }
    }

    #[test]
    fn singleton_and_identical() {
        let s = Line { xs: vec![0.3] };
        assert_eq!(spanning_count(&s, 0.5, 3, 6).unwrap(), 1);
        let s = Line { xs: vec![0.3; 5] };
        assert_eq!(separated_count(&s, 0.5, 3, 6).unwrap(), 1);
    }

    #[test]
    fn constant_pair_threshold() {
        // ρ of two constants at distance d with W' = 8 is d·(3 − 3·2^{-8}).
        let d = 0.01;
        let r = d * (3.0 - 3.0 * 2f64.powi(-8));
        let s = Line { xs: vec![0.0, d] };
        assert_eq!(separated_count(&s, r * 0.999, 1, 8).unwrap(), 2);
        assert_eq!(separated_count(&s, r * 1.001, 1, 8).unwrap(), 1);
    }

    #[test]
    fn eps_floor_is_enforced() {
        // Floor is 4 · 1e-3 · 2^{-2}.
        let s = Line { xs: vec![0.0, 1.0] };
        assert!(separated_count(&s, 9e-4, 1, 4).is_err());
        assert!(separated_count(&s, 1.1e-3, 1, 4).is_ok());
    }

    #[test]
    fn exact_exponential_fit() {
        let c: Vec<_> = (1..=6).map(|n| counts_of(n, 3usize.pow(n as u32))).collect();
        let r = fit_entropy("t", &c, DEFAULT_UNBOUNDED_THRESHOLD).unwrap();
        assert!((r.h_estimate - 3f64.ln()).abs() < 1e-12);
        let c: Vec<_> = (1..=4).map(|n| counts_of(n, 3usize.pow(4 + n as u32))).collect();
        let r = fit_entropy("t", &c, DEFAULT_UNBOUNDED_THRESHOLD).unwrap();
        assert!((r.h_estimate - 3f64.ln()).abs() < 1e-12);
        let c: Vec<_> = (1..=4).map(|n| counts_of(n, 7)).collect();
        assert_eq!(fit_entropy("t", &c, DEFAULT_UNBOUNDED_THRESHOLD).unwrap().h_estimate, 0.0);
    }

    #[test]
    fn too_few_n_values() {
        let c: Vec<_> = (1..=2).map(|n| counts_of(n, 3)).collect();
        assert!(matches!(fit_entropy("t", &c, 1.0), Err(FpeError::InsufficientData(_))));
    }

    #[test]
    fn regime_skips_a_bent_prefix() {
        let ns: Vec<usize> = (1..=7).collect();
        let counts = [1, 1, 4, 8, 16, 32, 64];
        let f = regime_slope(&ns, &counts, usize::MAX).unwrap();
        assert!((f.slope - 2f64.ln()).abs() < 1e-9);
        assert_eq!((f.n_lo, f.n_hi), (3, 7));
    }

    #[test]
    fn power_on_constant_family_is_undefined() {
        let r = power_check(|_, _| Ok(Line { xs: vec![0.0, 0.5] }), 2, 0.3, &[1, 2, 3], 6).unwrap();
        assert!(r.ratio.is_none());
        let r1 = power_check(|_, _| Ok(Line { xs: vec![0.0, 0.5] }), 1, 0.3, &[1, 2, 3], 6).unwrap();
        assert_eq!(r1.counts_f1, r1.counts_fm);
    }

    #[test]
    fn restriction_to_itself_passes() {
        let c: Vec<_> = (1..=4).map(|n| counts_of(n, 2usize.pow(n as u32))).collect();
        let r = restriction_check(&c, &c).unwrap();
        assert!(r.passes);
        assert_eq!(r.slope_sub, r.slope_full);
    }

    proptest! {
        #[test]
        fn sandwich_and_monotonicity(xs in proptest::collection::vec(0.0f64..1.0, 1..40), e in 0.05f64..0.5) {
            let s = Line { xs };
            let eps = [2.0 * e, e];
            let counts = counts_on_set(&s, &eps, &[1, 2], 1, 6).unwrap();
            let get = |ei: usize, n: usize| counts.iter().find(|c| c.eps.get() == eps[ei] && c.n == n).unwrap();
            for n in [1, 2] {
                let (big, small) = (get(0, n), get(1, n));
                prop_assert!(big.sep_lower <= small.span_upper);
                prop_assert!(small.span_upper <= small.sep_lower);
                prop_assert!(big.sep_lower <= small.sep_lower);
            }
            prop_assert!(get(1, 1).sep_lower <= get(1, 2).sep_lower);
        }
    }
}
