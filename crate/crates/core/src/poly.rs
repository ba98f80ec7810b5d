//! Bivariate polynomials used by the built-in systems and by JSON system files.

use serde::{Deserialize, Serialize};

/// One term `coeff * x^dx * y^dy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub dx: u32,
    pub dy: u32,
}

/// Sum of monomials. Terms are kept merged and free of zero coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly2 {
    terms: Vec<Monomial>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([(c, 0, 0)])
    }

    /// Builds from `(coeff, dx, dy)` triples, merging repeated powers.
    pub fn from_terms(terms: impl IntoIterator<Item = (f64, u32, u32)>) -> Self {
        let mut p = Self::zero();
        for (coeff, dx, dy) in terms {
            p.add_term(Monomial { coeff, dx, dy });
        }
        p
    }

    fn add_term(&mut self, m: Monomial) {
        if m.coeff == 0.0 {
            return;
        }
        match self.terms.iter_mut().position(|t| t.dx == m.dx && t.dy == m.dy) {
            Some(i) => {
                self.terms[i].coeff += m.coeff;
                if self.terms[i].coeff == 0.0 {
                    self.terms.remove(i);
                }
            }
            None => self.terms.push(m),
        }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * x.powi(t.dx as i32) * y.powi(t.dy as i32))
            .sum()
    }

    pub fn dx(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|t| t.dx > 0)
                .map(|t| (t.coeff * t.dx as f64, t.dx - 1, t.dy)),
        )
    }

    pub fn dy(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|t| t.dy > 0)
                .map(|t| (t.coeff * t.dy as f64, t.dx, t.dy - 1)),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for &t in &other.terms {
            p.add_term(t);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        for a in &self.terms {
            for b in &other.terms {
                p.add_term(Monomial {
                    coeff: a.coeff * b.coeff,
                    dx: a.dx + b.dx,
                    dy: a.dy + b.dy,
                });
            }
        }
        p
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|t| (t.coeff * c, t.dx, t.dy)))
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.dx + t.dy).max().unwrap_or(0)
    }

    /// Triples in the `[coeff, degx, degy]` layout of system files.
    pub fn to_triples(&self) -> Vec<[f64; 3]> {
        self.terms
            .iter()
            .map(|t| [t.coeff, t.dx as f64, t.dy as f64])
            .collect()
    }

    pub fn from_triples(terms: &[[f64; 3]]) -> Result<Self, String> {
        let mut p = Self::zero();
        for (k, &[c, dx, dy]) in terms.iter().enumerate() {
            let ok = |d: f64| d >= 0.0 && d.fract() == 0.0 && d <= 64.0;
            if !c.is_finite() || !ok(dx) || !ok(dy) {
                return Err(format!("monomial {k} is not [finite coeff, degx, degy]"));
            }
            p.add_term(Monomial { coeff: c, dx: dx as u32, dy: dy as u32 });
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn merges_and_drops_zero_terms() {
        let p = Poly2::from_terms([(1.0, 2, 0), (-1.0, 2, 0), (3.0, 0, 1)]);
        assert_eq!(p.terms().len(), 1);
        assert_eq!(p.eval(5.0, 2.0), 6.0);
    }

    #[test]
    fn derivatives_of_cubic() {
        // x/2 - 4x^3
        let p = Poly2::from_terms([(0.5, 1, 0), (-4.0, 3, 0)]);
        assert_eq!(p.dx().eval(1.0, 0.0), 0.5 - 12.0);
        assert_eq!(p.dy(), Poly2::zero());
    }

    #[test]
    fn triples_roundtrip_rejects_fractional_degree() {
        assert!(Poly2::from_triples(&[[1.0, 0.5, 0.0]]).is_err());
        let p = Poly2::from_triples(&[[2.0, 1.0, 1.0]]).unwrap();
        assert_eq!(Poly2::from_triples(&p.to_triples()).unwrap(), p);
    }

    proptest! {
        #[test]
        fn product_evaluates_as_product(a in -3.0..3.0f64, b in -3.0..3.0f64,
                                        x in -2.0..2.0f64, y in -2.0..2.0f64) {
            let p = Poly2::from_terms([(a, 1, 0), (1.0, 0, 2)]);
            let q = Poly2::from_terms([(b, 0, 1), (-1.0, 3, 0)]);
            let lhs = p.mul(&q).eval(x, y);
            let rhs = p.eval(x, y) * q.eval(x, y);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
