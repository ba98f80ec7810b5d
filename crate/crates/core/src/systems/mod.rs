//! Built-in systems, the JSON system format and time rescaling.

pub mod bean;
pub mod controls;
pub mod figure8;
pub mod rosette;
pub mod symbolic;

use serde::{Deserialize, Serialize};

use crate::error::{FpeError, Result};
use crate::integrate::SampledTrajectory;
use crate::poly::Poly2;
use crate::psvf::{Domain, PiecewiseSystem, PlanarField, SwitchingFunction};

/// Symbols of successive returns: chart values for the bean, arc indices for arc systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub symbols: Vec<f64>,
}

/// Names accepted by [`builtin`]; `rosette:<alpha>` takes any alpha ≥ 2.
pub const BUILTIN_NAMES: [&str; 5] = ["rosette:<alpha>", "figure8", "bean", "node0", "smooth-rot"];

/// One-line descriptions for `list-systems`.
pub fn list_systems() -> Vec<(&'static str, &'static str)> {
    vec![
        ("rosette:<alpha>", "2α sectors around the origin; α closed arcs, entropy log α"),
        ("figure8", "two lobes through a visible two-fold; entropy log 2"),
        ("bean", "escaping segment inside the invariant region K; unbounded capacity growth"),
        ("node0", "escaping segment draining into an attracting node; zero entropy"),
        ("smooth-rot", "rigid rotation with Z = (X, X); zero entropy"),
    ]
}

/// The piecewise system registered under `name`. For the rosette this is the base
/// sector pair (rays 0 and 2α−1); the full sector family lives in [`rosette::Rosette`].
pub fn builtin(name: &str) -> Result<PiecewiseSystem> {
    if let Some(a) = name.strip_prefix("rosette:") {
        let alpha = parse_alpha(a)?;
        return Ok(rosette::build_rosette(alpha)?.rays[0].clone());
    }
    match name {
        "figure8" => Ok(figure8::figure8_system()),
        "bean" => Ok(bean::bean_system()),
        "node0" => Ok(controls::node0()),
        "smooth-rot" => Ok(controls::smooth_rot()),
        _ => Err(FpeError::InvalidSystem(format!("unknown system `{name}`; known: {}", BUILTIN_NAMES.join(", ")))),
    }
}

pub fn parse_alpha(s: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(a) if a >= 2 => Ok(a),
        _ => Err(FpeError::InvalidSystem(format!("rosette alpha must be an integer ≥ 2, got `{s}`"))),
    }
}

/// On-disk system: each polynomial is a list of `[coeff, degx, degy]` triples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemFile {
    pub name: String,
    #[serde(rename = "X")]
    pub x: [Vec<[f64; 3]>; 2],
    #[serde(rename = "Y")]
    pub y: [Vec<[f64; 3]>; 2],
    pub f: Vec<[f64; 3]>,
    pub domain: [f64; 4],
}

impl SystemFile {
    pub fn into_system(self) -> Result<PiecewiseSystem> {
        let p = |terms: &[[f64; 3]], what: &str| {
            Poly2::from_triples(terms).map_err(|e| FpeError::InvalidSystem(format!("{what}: {e}")))
        };
        let x = PlanarField::polynomial(p(&self.x[0], "X[0]")?, p(&self.x[1], "X[1]")?);
        let y = PlanarField::polynomial(p(&self.y[0], "Y[0]")?, p(&self.y[1], "Y[1]")?);
        let f = p(&self.f, "f")?;
        if f.degree() == 0 {
            return Err(FpeError::InvalidSystem("f must be non-constant".into()));
        }
        let [a, b, c, d] = self.domain;
        let domain = Domain::new(a, b, c, d);
        if !domain.is_valid() {
            return Err(FpeError::InvalidSystem(format!("bad domain {:?}", self.domain)));
        }
        Ok(PiecewiseSystem::new(self.name, x, y, SwitchingFunction::polynomial(f), domain))
    }

    /// The file form of a polynomial system; `None` when a field is not polynomial.
    pub fn from_system(sys: &PiecewiseSystem) -> Option<Self> {
        let [x0, x1] = sys.x.as_poly()?;
        let [y0, y1] = sys.y.as_poly()?;
        let d = sys.domain;
        Some(Self {
            name: sys.name.clone(),
            x: [x0.to_triples(), x1.to_triples()],
            y: [y0.to_triples(), y1.to_triples()],
            f: sys.f.as_poly()?.to_triples(),
            domain: [d.xmin, d.xmax, d.ymin, d.ymax],
        })
    }
}

pub fn load_system_json(text: &str) -> Result<PiecewiseSystem> {
    let file: SystemFile = serde_json::from_str(text).map_err(|e| FpeError::InvalidSystem(e.to_string()))?;
    file.into_system()
}

/// `Z̃ = Z / c`: trajectories of `Z̃` are those of `Z` run `c` times slower.
pub fn rescale_system(sys: &PiecewiseSystem, c: u32) -> Result<PiecewiseSystem> {
    if c == 0 {
        return Err(FpeError::InvalidArgument("rescale factor must be ≥ 1".into()));
    }
    Ok(sys.rescaled(c))
}

/// `H(γ)(t) = γ(t / c)`: the same samples on a grid `c` times coarser in time.
pub fn dilate(traj: &SampledTrajectory, c: u32) -> SampledTrajectory {
    let c = c as f64;
    let mut out = traj.clone();
    out.window *= c;
    out.dt *= c;
    for d in &mut out.decisions {
        d.time *= c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psvf::{classify_point, PointClass, Tolerances, Vec2};

    #[test]
    fn registry_knows_every_name() {
        for n in ["rosette:3", "rosette:2", "figure8", "bean", "node0", "smooth-rot"] {
            assert!(builtin(n).is_ok(), "{n}");
        }
        assert!(builtin("rosette:1").is_err());
        assert!(builtin("lorenz").is_err());
        assert_eq!(list_systems().len(), BUILTIN_NAMES.len());
    }

    #[test]
    fn system_file_round_trip() {
        let bean = bean::bean_system();
        let text = serde_json::to_string(&SystemFile::from_system(&bean).unwrap()).unwrap();
        let back = load_system_json(&text).unwrap();
        let t = Tolerances::default();
        for x in [-0.9, -0.5, 0.3, 0.9] {
            let p = Vec2::new(x, 0.0);
            assert_eq!(classify_point(&back, p, &t), classify_point(&bean, p, &t));
        }
        assert_eq!(classify_point(&back, Vec2::new(-0.5, 0.0), &t), PointClass::Escaping);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(load_system_json("{").is_err());
        let bad = r#"{"name":"c","X":[[[1,0,0]],[[0,0,0]]],"Y":[[[1,0,0]],[[0,0,0]]],"f":[[2,0,0]],"domain":[-1,1,-1,1]}"#;
        assert!(load_system_json(bad).is_err());
        let bad = r#"{"name":"c","X":[[[1,0.5,0]],[[0,0,0]]],"Y":[[[1,0,0]],[[0,0,0]]],"f":[[1,0,1]],"domain":[-1,1,-1,1]}"#;
        assert!(load_system_json(bad).is_err());
        let bad = r#"{"name":"c","X":[[[1,0,0]],[[0,0,0]]],"Y":[[[1,0,0]],[[0,0,0]]],"f":[[1,0,1]],"domain":[1,-1,-1,1]}"#;
        assert!(load_system_json(bad).is_err());
    }

    #[test]
    fn rescaling_slows_fields() {
        let s = bean::bean_system();
        assert_eq!(rescale_system(&s, 1).unwrap().name, s.name);
        let r = rescale_system(&s, 2).unwrap();
        let p = Vec2::new(0.3, 0.4);
        assert!((r.x.eval(p) * 2.0 - s.x.eval(p)).norm() < 1e-15);
        assert!(rescale_system(&s, 0).is_err());
    }
}
