//! Elements of the state space `L²(0,1;C²) × C`.
//!
//! Eigenfunctions are kept in closed form as finite sums of complex
//! exponentials `Σ c_k e^{s_k z}`; only the simulator produces sampled
//! profiles.

use std::ops::{Add, Mul, Neg, Sub};

use crate::quadrature::GaussLegendre;
use crate::{Error, Result, C64};

/// `z ↦ Σ coef_k · exp(rate_k · z)` on [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpSum {
    terms: Vec<(C64, C64)>,
}

impl ExpSum {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::exp(c, C64::new(0.0, 0.0))
    }

    /// `coef · e^{rate·z}`
    pub fn exp(coef: C64, rate: C64) -> Self {
        Self {
            terms: vec![(coef, rate)],
        }
    }

    /// `a·cosh(s z) + b·sinh(s z)`
    pub fn cosh_sinh(a: C64, b: C64, s: C64) -> Self {
        Self {
            terms: vec![((a + b) * 0.5, s), ((a - b) * 0.5, -s)],
        }
    }

    /// `(coefficient, rate)` pairs.
    pub fn terms(&self) -> &[(C64, C64)] {
        &self.terms
    }

    pub fn eval(&self, z: f64) -> C64 {
        self.terms.iter().map(|&(c, s)| c * (s * z).exp()).sum()
    }

    pub fn derivative(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|&(c, s)| (c * s, s)).collect(),
        }
    }

    pub fn scale(&self, k: C64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(c, s)| (c * k, s)).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { terms }
    }
}

/// One spatial component: closed form or samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Closed(ExpSum),
    /// Values at `z_k = k/(len-1)`, `len >= 2`.
    Sampled(Vec<C64>),
}

impl Profile {
    pub fn zero() -> Self {
        Profile::Closed(ExpSum::zero())
    }

    pub fn sampled(values: Vec<C64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Representation(
                "sampled profile needs at least two grid points".into(),
            ));
        }
        Ok(Profile::Sampled(values))
    }

    /// Evaluates anywhere on [0, 1]; samples are linearly interpolated.
    pub fn eval(&self, z: f64) -> C64 {
        match self {
            Profile::Closed(e) => e.eval(z),
            Profile::Sampled(v) => {
                let m = v.len() - 1;
                let x = (z.clamp(0.0, 1.0) * m as f64).min(m as f64);
                let k = (x.floor() as usize).min(m - 1);
                let t = x - k as f64;
                v[k] * (1.0 - t) + v[k + 1] * t
            }
        }
    }

    fn grid_len(&self) -> Option<usize> {
        match self {
            Profile::Closed(_) => None,
            Profile::Sampled(v) => Some(v.len()),
        }
    }

    fn values_on(&self, len: usize) -> Vec<C64> {
        match self {
            Profile::Sampled(v) => v.clone(),
            Profile::Closed(e) => {
                let h = 1.0 / (len - 1) as f64;
                (0..len).map(|k| e.eval(k as f64 * h)).collect()
            }
        }
    }

    fn scale(&self, k: C64) -> Self {
        match self {
            Profile::Closed(e) => Profile::Closed(e.scale(k)),
            Profile::Sampled(v) => Profile::Sampled(v.iter().map(|x| x * k).collect()),
        }
    }

    fn combine(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (Profile::Closed(a), Profile::Closed(b)) => Ok(Profile::Closed(a.plus(b))),
            _ => {
                let len = match (self.grid_len(), other.grid_len()) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::Representation(format!(
                            "sampling grids differ ({a} vs {b} points)"
                        )))
                    }
                    (Some(a), _) | (_, Some(a)) => a,
                    (None, None) => unreachable!(),
                };
                let a = self.values_on(len);
                let b = other.values_on(len);
                Ok(Profile::Sampled(
                    a.iter().zip(&b).map(|(x, y)| x + y).collect(),
                ))
            }
        }
    }
}

/// `(w1(·), w2(·), w3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFunction {
    pub w1: Profile,
    pub w2: Profile,
    pub w3: C64,
}

impl StateFunction {
    pub fn closed(w1: ExpSum, w2: ExpSum, w3: C64) -> Self {
        Self {
            w1: Profile::Closed(w1),
            w2: Profile::Closed(w2),
            w3,
        }
    }

    pub fn sampled(w1: Vec<C64>, w2: Vec<C64>, w3: C64) -> Result<Self> {
        if w1.len() != w2.len() {
            return Err(Error::Representation(format!(
                "component grids differ ({} vs {} points)",
                w1.len(),
                w2.len()
            )));
        }
        Ok(Self {
            w1: Profile::sampled(w1)?,
            w2: Profile::sampled(w2)?,
            w3,
        })
    }

    pub fn zero() -> Self {
        Self::closed(ExpSum::zero(), ExpSum::zero(), C64::new(0.0, 0.0))
    }

    pub fn is_closed_form(&self) -> bool {
        matches!((&self.w1, &self.w2), (Profile::Closed(_), Profile::Closed(_)))
    }

    pub fn scale(&self, k: C64) -> Self {
        Self {
            w1: self.w1.scale(k),
            w2: self.w2.scale(k),
            w3: self.w3 * k,
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            w1: self.w1.combine(&other.w1)?,
            w2: self.w2.combine(&other.w2)?,
            w3: self.w3 + other.w3,
        })
    }

    fn sample_len(&self) -> Result<Option<usize>> {
        match (self.w1.grid_len(), self.w2.grid_len()) {
            (Some(a), Some(b)) if a != b => Err(Error::Representation(format!(
                "component grids differ ({a} vs {b} points)"
            ))),
            (Some(a), _) | (_, Some(a)) => Ok(Some(a)),
            _ => Ok(None),
        }
    }
}

impl Mul<C64> for &StateFunction {
    type Output = StateFunction;
    fn mul(self, k: C64) -> StateFunction {
        self.scale(k)
    }
}

impl Mul<f64> for &StateFunction {
    type Output = StateFunction;
    fn mul(self, k: f64) -> StateFunction {
        self.scale(C64::new(k, 0.0))
    }
}

impl Neg for &StateFunction {
    type Output = StateFunction;
    fn neg(self) -> StateFunction {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Add for &StateFunction {
    type Output = StateFunction;
    /// Panics on mismatched sampling grids; use [`StateFunction::try_add`]
    /// when the grids are not known to agree.
    fn add(self, other: &StateFunction) -> StateFunction {
        self.try_add(other).expect("matching representations")
    }
}

impl Sub for &StateFunction {
    type Output = StateFunction;
    fn sub(self, other: &StateFunction) -> StateFunction {
        self + &(-other)
    }
}

/// `∫₀¹ f₁ḡ₁ + f₂ḡ₂ dz + f₃ḡ₃`, conjugate-linear in the second argument.
///
/// Closed-form pairs use the Gauss–Legendre rule; as soon as one side is
/// sampled the trapezoidal rule on that grid is used instead.
pub fn inner_product(f: &StateFunction, g: &StateFunction, quad: &GaussLegendre) -> Result<C64> {
    let scalar = f.w3 * g.w3.conj();
    let lf = f.sample_len()?;
    let lg = g.sample_len()?;
    let len = match (lf, lg) {
        (None, None) => {
            let integral = quad.integrate(|z| {
                f.w1.eval(z) * g.w1.eval(z).conj() + f.w2.eval(z) * g.w2.eval(z).conj()
            });
            return Ok(integral + scalar);
        }
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Representation(format!(
                "sampling grids differ ({a} vs {b} points)"
            )))
        }
        (Some(a), _) | (_, Some(a)) => a,
    };
    let f1 = f.w1.values_on(len);
    let f2 = f.w2.values_on(len);
    let g1 = g.w1.values_on(len);
    let g2 = g.w2.values_on(len);
    let integrand: Vec<C64> = (0..len)
        .map(|k| f1[k] * g1[k].conj() + f2[k] * g2[k].conj())
        .collect();
    Ok(trapezoid(&integrand) + scalar)
}

/// Trapezoidal rule for samples on a uniform grid over [0, 1].
pub fn trapezoid(values: &[C64]) -> C64 {
    let m = values.len() - 1;
    let h = 1.0 / m as f64;
    let inner: C64 = values[1..m].iter().sum();
    (inner + (values[0] + values[m]) * 0.5) * h
}

/// Squared norm `‖f‖²`.
pub fn norm_sqr(f: &StateFunction, quad: &GaussLegendre) -> Result<f64> {
    Ok(inner_product(f, f, quad)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Exact `∫₀¹ e^{s z} dz`.
    fn exp_integral(s: C64) -> C64 {
        if s.norm() < 1e-12 {
            c(1.0, 0.0)
        } else {
            (s.exp() - 1.0) / s
        }
    }

    /// Exact inner product of closed forms, independent of quadrature.
    fn exact_inner(f: &StateFunction, g: &StateFunction) -> C64 {
        let pair = |a: &Profile, b: &Profile| -> C64 {
            let (Profile::Closed(a), Profile::Closed(b)) = (a, b) else {
                unreachable!()
            };
            let mut acc = c(0.0, 0.0);
            for &(ca, sa) in a.terms() {
                for &(cb, sb) in b.terms() {
                    acc += ca * cb.conj() * exp_integral(sa + sb.conj());
                }
            }
            acc
        };
        pair(&f.w1, &g.w1) + pair(&f.w2, &g.w2) + f.w3 * g.w3.conj()
    }

    #[test]
    fn scalar_component_only() {
        let f = StateFunction::closed(ExpSum::zero(), ExpSum::zero(), c(1.0, 0.0));
        let v = inner_product(&f, &f, &GaussLegendre::default()).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_components() {
        let one = ExpSum::constant(c(1.0, 0.0));
        let f = StateFunction::closed(one.clone(), ExpSum::zero(), c(0.0, 0.0));
        let g = StateFunction::closed(ExpSum::zero(), one, c(0.0, 0.0));
        let v = inner_product(&f, &g, &GaussLegendre::default()).unwrap();
        assert_eq!(v, c(0.0, 0.0));
    }

    #[test]
    fn linear_profile_against_constant() {
        // g.w1 = z, expressed as a sampled profile and through the closed
        // form (e^{εz} - 1)/ε → z is awkward, so sample it.
        let f = StateFunction::closed(ExpSum::constant(c(1.0, 0.0)), ExpSum::zero(), c(1.0, 0.0));
        let m = 1000;
        let z: Vec<C64> = (0..=m).map(|k| c(k as f64 / m as f64, 0.0)).collect();
        let g = StateFunction::sampled(z, vec![c(0.0, 0.0); m + 1], c(0.0, 0.0)).unwrap();
        let v = inner_product(&f, &g, &GaussLegendre::default()).unwrap();
        assert!((v - c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let f = StateFunction::sampled(vec![c(1.0, 0.0); 3], vec![c(0.0, 0.0); 3], c(0.0, 0.0)).unwrap();
        let g = StateFunction::sampled(vec![c(1.0, 0.0); 4], vec![c(0.0, 0.0); 4], c(0.0, 0.0)).unwrap();
        assert!(matches!(
            inner_product(&f, &g, &GaussLegendre::default()),
            Err(Error::Representation(_))
        ));
        assert!(Profile::sampled(vec![c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn cosh_sinh_matches_definition() {
        let s = c(0.3, 2.0);
        let e = ExpSum::cosh_sinh(c(1.5, 0.0), c(0.0, -2.0), s);
        for z in [0.0, 0.25, 0.9] {
            let want = c(1.5, 0.0) * (s * z).cosh() + c(0.0, -2.0) * (s * z).sinh();
            assert!((e.eval(z) - want).norm() < 1e-14);
        }
    }

    #[test]
    fn quadrature_matches_exact_integration() {
        let f = StateFunction::closed(
            ExpSum::cosh_sinh(c(1.0, 0.0), c(0.4, 0.1), c(-0.6, 14.0)),
            ExpSum::exp(c(0.3, -1.0), c(2.0, -7.0)),
            c(1.0, 0.5),
        );
        let g = StateFunction::closed(
            ExpSum::exp(c(2.0, 0.0), c(-1.0, 9.0)),
            ExpSum::cosh_sinh(c(0.0, 1.0), c(1.0, 0.0), c(0.2, -11.0)),
            c(-0.3, 0.0),
        );
        let q = GaussLegendre::default();
        let v = inner_product(&f, &g, &q).unwrap();
        assert!((v - exact_inner(&f, &g)).norm() < 1e-12);
        // doubling the node count changes nothing at this accuracy
        let v2 = inner_product(&f, &g, &q.refined()).unwrap();
        assert!((v - v2).norm() < 1e-10);
    }

    fn arb_expsum() -> impl Strategy<Value = ExpSum> {
        prop::collection::vec(
            (-2.0..2.0f64, -2.0..2.0f64, -3.0..3.0f64, -20.0..20.0f64),
            0..4,
        )
        .prop_map(|v| {
            let mut e = ExpSum::zero();
            for (a, b, r, i) in v {
                e = e.plus(&ExpSum::exp(c(a, b), c(r, i)));
            }
            e
        })
    }

    fn arb_state() -> impl Strategy<Value = StateFunction> {
        (arb_expsum(), arb_expsum(), -2.0..2.0f64, -2.0..2.0f64)
            .prop_map(|(a, b, r, i)| StateFunction::closed(a, b, c(r, i)))
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(f in arb_state(), g in arb_state()) {
            let q = GaussLegendre::default();
            let fg = inner_product(&f, &g, &q).unwrap();
            let gf = inner_product(&g, &f, &q).unwrap();
            prop_assert!((fg - gf.conj()).norm() <= 1e-12 * (1.0 + fg.norm()));
        }

        #[test]
        fn quadrature_agrees_with_exact(f in arb_state(), g in arb_state()) {
            let q = GaussLegendre::default();
            let v = inner_product(&f, &g, &q).unwrap();
            let e = exact_inner(&f, &g);
            prop_assert!((v - e).norm() <= 1e-10 * (1.0 + e.norm()));
        }
    }
}
