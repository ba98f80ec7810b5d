//! Pointwise analysis of a planar piecewise-smooth system `Z = (X, Y)` with switching
//! function `f`: Lie derivatives, classification of points of `Σ = f⁻¹(0)` and the
//! Filippov sliding field.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FpeError, Result};
use crate::poly::Poly2;

pub type Vec2 = nalgebra::Vector2<f64>;

type VecFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
type ScalarFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// A smooth planar vector field, either polynomial (analytic derivatives available)
/// or an opaque closure.
#[derive(Clone)]
pub struct PlanarField {
    repr: FieldRepr,
}

#[derive(Clone)]
enum FieldRepr {
    Poly([Poly2; 2]),
    Func(VecFn),
}

impl PlanarField {
    pub fn polynomial(px: Poly2, py: Poly2) -> Self {
        Self { repr: FieldRepr::Poly([px, py]) }
    }

    pub fn from_fn(f: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        Self { repr: FieldRepr::Func(Arc::new(f)) }
    }

    #[inline]
    pub fn eval(&self, p: Vec2) -> Vec2 {
        match &self.repr {
            FieldRepr::Poly([a, b]) => Vec2::new(a.eval(p.x, p.y), b.eval(p.x, p.y)),
            FieldRepr::Func(f) => f(p),
        }
    }

    pub fn as_poly(&self) -> Option<&[Poly2; 2]> {
        match &self.repr {
            FieldRepr::Poly(p) => Some(p),
            FieldRepr::Func(_) => None,
        }
    }

    /// The field multiplied by `c`. Negative `c` reverses time.
    pub fn scaled(&self, c: f64) -> Self {
        match &self.repr {
            FieldRepr::Poly([a, b]) => Self::polynomial(a.scale(c), b.scale(c)),
            FieldRepr::Func(f) => {
                let f = f.clone();
                Self::from_fn(move |p| f(p) * c)
            }
        }
    }
}

impl fmt::Debug for PlanarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            FieldRepr::Poly(p) => write!(f, "PlanarField::Poly({:?}, {:?})", p[0].terms(), p[1].terms()),
            FieldRepr::Func(_) => write!(f, "PlanarField::Func"),
        }
    }
}

/// `f: ℝ² → ℝ` with analytic gradient; 0 must be a regular value on the domain.
#[derive(Clone)]
pub struct SwitchingFunction {
    repr: SwitchRepr,
}

#[derive(Clone)]
enum SwitchRepr {
    Poly { f: Poly2, grad: [Poly2; 2] },
    Func { f: ScalarFn, grad: VecFn },
}

impl SwitchingFunction {
    pub fn polynomial(f: Poly2) -> Self {
        let grad = [f.dx(), f.dy()];
        Self { repr: SwitchRepr::Poly { f, grad } }
    }

    pub fn from_fn(
        f: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        grad: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    ) -> Self {
        Self { repr: SwitchRepr::Func { f: Arc::new(f), grad: Arc::new(grad) } }
    }

    /// `f(x, y) = y`, the switching line of every built-in example.
    pub fn horizontal() -> Self {
        Self::polynomial(Poly2::from_terms([(1.0, 0, 1)]))
    }

    #[inline]
    pub fn eval(&self, p: Vec2) -> f64 {
        match &self.repr {
            SwitchRepr::Poly { f, .. } => f.eval(p.x, p.y),
            SwitchRepr::Func { f, .. } => f(p),
        }
    }

    #[inline]
    pub fn grad(&self, p: Vec2) -> Vec2 {
        match &self.repr {
            SwitchRepr::Poly { grad, .. } => Vec2::new(grad[0].eval(p.x, p.y), grad[1].eval(p.x, p.y)),
            SwitchRepr::Func { grad, .. } => grad(p),
        }
    }

    pub fn as_poly(&self) -> Option<&Poly2> {
        match &self.repr {
            SwitchRepr::Poly { f, .. } => Some(f),
            SwitchRepr::Func { .. } => None,
        }
    }

    pub fn negated(&self) -> Self {
        match &self.repr {
            SwitchRepr::Poly { f, .. } => Self::polynomial(f.scale(-1.0)),
            SwitchRepr::Func { f, grad } => {
                let (f, g) = (f.clone(), grad.clone());
                Self::from_fn(move |p| -f(p), move |p| -g(p))
            }
        }
    }

    /// Moves `p` onto Σ with one Newton step along ∇f.
    #[inline]
    pub fn project(&self, p: Vec2) -> Vec2 {
        let g = self.grad(p);
        let n2 = g.norm_squared();
        if n2 == 0.0 {
            return p;
        }
        p - g * (self.eval(p) / n2)
    }
}

impl fmt::Debug for SwitchingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            SwitchRepr::Poly { f: p, .. } => write!(f, "SwitchingFunction::Poly({:?})", p.terms()),
            SwitchRepr::Func { .. } => write!(f, "SwitchingFunction::Func"),
        }
    }
}

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Domain {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self { xmin, xmax, ymin, ymax }
    }

    pub fn square(h: f64) -> Self {
        Self::new(-h, h, -h, h)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.contains_padded(p, 0.0)
    }

    pub fn contains_padded(&self, p: Vec2, pad: f64) -> bool {
        p.x >= self.xmin - pad && p.x <= self.xmax + pad && p.y >= self.ymin - pad && p.y <= self.ymax + pad
    }

    pub fn diameter(&self) -> f64 {
        (self.xmax - self.xmin).hypot(self.ymax - self.ymin)
    }

    pub fn is_valid(&self) -> bool {
        [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|v| v.is_finite())
            && self.xmin < self.xmax
            && self.ymin < self.ymax
    }
}

/// Which smooth field: `X` lives on `f > 0`, `Y` on `f < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Which {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_f: f64,
    pub tol_lie: f64,
    pub tol_event_time: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_f: 1e-9, tol_lie: 1e-9, tol_event_time: 1e-10 }
    }
}

impl Tolerances {
    pub fn is_valid(&self) -> bool {
        self.tol_f > 0.0 && self.tol_lie > 0.0 && self.tol_event_time > 0.0
    }
}

/// Classification of a point relative to Σ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointClass {
    SigmaPlus,
    SigmaMinus,
    CrossingPos,
    CrossingNeg,
    Sliding,
    Escaping,
    Fold { field: Which, visible: bool },
    TwoFold { vis_x: bool, vis_y: bool },
    SingularTangency,
    Degenerate,
}

impl PointClass {
    pub fn on_sigma(&self) -> bool {
        !matches!(self, PointClass::SigmaPlus | PointClass::SigmaMinus)
    }

    pub fn label(&self) -> String {
        match self {
            PointClass::Fold { field, visible } => {
                format!("Fold({:?},{})", field, if *visible { "visible" } else { "invisible" })
            }
            PointClass::TwoFold { vis_x, vis_y } => format!(
                "TwoFold({},{})",
                if *vis_x { "visible" } else { "invisible" },
                if *vis_y { "visible" } else { "invisible" }
            ),
            other => format!("{other:?}"),
        }
    }
}

/// Polynomial Lie derivatives `Xf, X²f` cached per field when everything is polynomial.
#[derive(Clone, Debug)]
struct LiePolys {
    first: Poly2,
    second: Poly2,
}

fn lie_polys(field: &PlanarField, f: &SwitchingFunction) -> Option<LiePolys> {
    let [a, b] = field.as_poly()?;
    let fp = f.as_poly()?;
    let first = fp.dx().mul(a).add(&fp.dy().mul(b));
    let second = first.dx().mul(a).add(&first.dy().mul(b));
    Some(LiePolys { first, second })
}

/// `Xf(p)` (order 1) or `X²f(p)` (order 2). Order 2 differentiates the order-1 map by
/// central differences of step `h_fd`.
pub fn lie_derivative(field: &PlanarField, f: &SwitchingFunction, p: Vec2, order: u8, h_fd: f64) -> f64 {
    let first = |q: Vec2| f.grad(q).dot(&field.eval(q));
    match order {
        1 => first(p),
        2 => {
            let ex = Vec2::new(h_fd, 0.0);
            let ey = Vec2::new(0.0, h_fd);
            let g = Vec2::new(
                (first(p + ex) - first(p - ex)) / (2.0 * h_fd),
                (first(p + ey) - first(p - ey)) / (2.0 * h_fd),
            );
            g.dot(&field.eval(p))
        }
        _ => panic!("lie_derivative supports order 1 or 2, got {order}"),
    }
}

/// Two smooth fields glued along Σ over a rectangular domain.
#[derive(Clone, Debug)]
pub struct PiecewiseSystem {
    pub name: String,
    pub x: PlanarField,
    pub y: PlanarField,
    pub f: SwitchingFunction,
    pub domain: Domain,
    pub speed_bound: f64,
    lie_x: Option<LiePolys>,
    lie_y: Option<LiePolys>,
}

impl PiecewiseSystem {
    pub fn new(name: impl Into<String>, x: PlanarField, y: PlanarField, f: SwitchingFunction, domain: Domain) -> Self {
        let lie_x = lie_polys(&x, &f);
        let lie_y = lie_polys(&y, &f);
        let mut sys = Self { name: name.into(), x, y, f, domain, speed_bound: 0.0, lie_x, lie_y };
        sys.speed_bound = sys.sample_speed_bound();
        sys
    }

    /// Max of |X|, |Y| on a 201×201 grid, inflated by 2% to cover the gaps between nodes.
    fn sample_speed_bound(&self) -> f64 {
        let d = &self.domain;
        let k = 200;
        let mut m: f64 = 0.0;
        for i in 0..=k {
            for j in 0..=k {
                let p = Vec2::new(
                    d.xmin + (d.xmax - d.xmin) * i as f64 / k as f64,
                    d.ymin + (d.ymax - d.ymin) * j as f64 / k as f64,
                );
                m = m.max(self.x.eval(p).norm()).max(self.y.eval(p).norm());
            }
        }
        (m * 1.02).max(f64::MIN_POSITIVE)
    }

    pub fn field(&self, w: Which) -> &PlanarField {
        match w {
            Which::X => &self.x,
            Which::Y => &self.y,
        }
    }

    pub fn h_fd(&self) -> f64 {
        1e-5 * self.domain.diameter()
    }

    /// `Xf` / `Yf` at `p`.
    #[inline]
    pub fn lie1(&self, w: Which, p: Vec2) -> f64 {
        match (w, &self.lie_x, &self.lie_y) {
            (Which::X, Some(l), _) | (Which::Y, _, Some(l)) => l.first.eval(p.x, p.y),
            _ => lie_derivative(self.field(w), &self.f, p, 1, self.h_fd()),
        }
    }

    /// `X²f` / `Y²f` at `p`, analytic for polynomial systems.
    pub fn lie2(&self, w: Which, p: Vec2) -> f64 {
        match (w, &self.lie_x, &self.lie_y) {
            (Which::X, Some(l), _) | (Which::Y, _, Some(l)) => l.second.eval(p.x, p.y),
            _ => lie_derivative(self.field(w), &self.f, p, 2, self.h_fd()),
        }
    }

    /// Time-reversed system `(-X, -Y)`; Σ^s and Σ^e trade places.
    pub fn reversed(&self) -> Self {
        Self::new(
            format!("{}~rev", self.name),
            self.x.scaled(-1.0),
            self.y.scaled(-1.0),
            self.f.clone(),
            self.domain,
        )
    }

    /// `-f` with `X` and `Y` swapped: the same dynamics described from the other side.
    pub fn flipped(&self) -> Self {
        Self::new(format!("{}~flip", self.name), self.y.clone(), self.x.clone(), self.f.negated(), self.domain)
    }

    /// Both fields divided by `c`; trajectories are dilated in time by `c`.
    pub fn rescaled(&self, c: u32) -> Self {
        assert!(c >= 1, "rescale factor must be a positive integer");
        if c == 1 {
            return self.clone();
        }
        let k = 1.0 / c as f64;
        Self::new(format!("{}/{}", self.name, c), self.x.scaled(k), self.y.scaled(k), self.f.clone(), self.domain)
    }

    /// Unit tangent to Σ at `p`, oriented as ∇f rotated by +90°.
    pub fn sigma_tangent(&self, p: Vec2) -> Vec2 {
        let g = self.f.grad(p);
        Vec2::new(-g.y, g.x) / g.norm()
    }
}

/// Classification from the signs of `f, Xf, Yf, X²f, Y²f`.
///
/// Visibility is side-aware: `X` (on `f > 0`) is visible iff `X²f > 0`, `Y` (on `f < 0`)
/// is visible iff `Y²f < 0`.
pub fn classify_point(sys: &PiecewiseSystem, p: Vec2, tol: &Tolerances) -> PointClass {
    let fv = sys.f.eval(p);
    if fv > tol.tol_f {
        return PointClass::SigmaPlus;
    }
    if fv < -tol.tol_f {
        return PointClass::SigmaMinus;
    }
    let xf = sys.lie1(Which::X, p);
    let yf = sys.lie1(Which::Y, p);
    let x0 = xf.abs() <= tol.tol_lie;
    let y0 = yf.abs() <= tol.tol_lie;
    if !x0 && !y0 {
        return match (xf > 0.0, yf > 0.0) {
            (true, true) => PointClass::CrossingPos,
            (false, false) => PointClass::CrossingNeg,
            (false, true) => PointClass::Sliding,
            (true, false) => PointClass::Escaping,
        };
    }
    let x2 = if x0 { sys.lie2(Which::X, p) } else { 0.0 };
    let y2 = if y0 { sys.lie2(Which::Y, p) } else { 0.0 };
    if (x0 && x2.abs() <= tol.tol_lie) || (y0 && y2.abs() <= tol.tol_lie) {
        return PointClass::Degenerate;
    }
    let vis_x = x2 > 0.0;
    let vis_y = y2 < 0.0;
    match (x0, y0) {
        (true, true) if !vis_x && !vis_y => PointClass::SingularTangency,
        (true, true) => PointClass::TwoFold { vis_x, vis_y },
        (true, false) => PointClass::Fold { field: Which::X, visible: vis_x },
        _ => PointClass::Fold { field: Which::Y, visible: vis_y },
    }
}

/// Filippov sliding field `(Yf·X − Xf·Y) / (Yf − Xf)`.
pub fn sliding_field(sys: &PiecewiseSystem, p: Vec2, tol: &Tolerances) -> Result<Vec2> {
    let xf = sys.lie1(Which::X, p);
    let yf = sys.lie1(Which::Y, p);
    let gap = yf - xf;
    if gap.abs() <= tol.tol_lie {
        return Err(FpeError::DegenerateDenominator { x: p.x, y: p.y, gap });
    }
    Ok((sys.x.eval(p) * yf - sys.y.eval(p) * xf) / gap)
}

/// Convex weight `λ = Yf / (Yf − Xf)` with `Z^s = λX + (1−λ)Y`.
pub fn sliding_weight(sys: &PiecewiseSystem, p: Vec2) -> f64 {
    let xf = sys.lie1(Which::X, p);
    let yf = sys.lie1(Which::Y, p);
    yf / (yf - xf)
}
