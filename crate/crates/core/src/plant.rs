//! The coupled transport plant
//!
//! ```text
//! ∂t w1 = α ∂z w2,   ∂t w2 = β ∂z w1,   d/dt w3 = γ w2(0,t),
//! w3 = w1(0,t),      u = w2(1,t),       y = w1(1,t),
//! ```
//!
//! with flat output `χ = w3`. Substituting `χ(t) = e^{λt}` into the flat
//! parameterization gives closed-form eigenfunctions for every `λ`; the
//! boundary condition `w2(1) = ρ·w1(1)` then selects the eigenvalues.

use serde::{Deserialize, Serialize};

use crate::eigen::{biorthonormalize, EigenPair, Spectrum, SpectrumLabel, Window};
use crate::quadrature::GaussLegendre;
use crate::roots::{Analytic, Rect, RootSearch};
use crate::state::{ExpSum, Profile, StateFunction};
use crate::{Error, Result, C64};

/// Residual bound for reported eigenvalues.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlant", into = "RawPlant")]
pub struct PlantParameters {
    alpha: f64,
    beta: f64,
    gamma: f64,
    v: f64,
    tau: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TryFrom<RawPlant> for PlantParameters {
    type Error = Error;
    fn try_from(r: RawPlant) -> Result<Self> {
        Self::new(r.alpha, r.beta, r.gamma)
    }
}

impl From<PlantParameters> for RawPlant {
    fn from(p: PlantParameters) -> Self {
        RawPlant {
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
        }
    }
}

impl PlantParameters {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha and beta must be positive, got alpha={alpha}, beta={beta}"
            )));
        }
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be finite and nonzero".into()));
        }
        let v = (alpha * beta).sqrt();
        Ok(Self {
            alpha,
            beta,
            gamma,
            v,
            tau: 1.0 / v,
        })
    }

    /// α = 11, β = 21, γ = 31.
    pub fn reference() -> Self {
        Self::new(11.0, 21.0, 31.0).expect("reference parameters are valid")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Propagation speed `√(αβ)`.
    pub fn v(&self) -> f64 {
        self.v
    }
    /// Transport delay `1/v`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `βγτ`, the coefficient that recurs in the flat parameterization.
    pub fn bgt(&self) -> f64 {
        self.beta * self.gamma * self.tau
    }

    /// `Δ(λ) = βτ sinh(λτ) + (λ/γ) cosh(λτ) − ρ[cosh(λτ) + λ/(βγτ) sinh(λτ)]`.
    pub fn characteristic_value(&self, bd: BoundaryDynamics, lambda: C64) -> C64 {
        let s = lambda * self.tau;
        let (sh, ch) = (s.sinh(), s.cosh());
        sh * (self.beta * self.tau) + lambda * ch / self.gamma
            - bd.rho * (ch + lambda * sh / self.bgt())
    }

    pub fn characteristic_derivative(&self, bd: BoundaryDynamics, lambda: C64) -> C64 {
        let t = self.tau;
        let s = lambda * t;
        let (sh, ch) = (s.sinh(), s.cosh());
        ch * (self.beta * t * t) + ch / self.gamma + lambda * sh * (t / self.gamma)
            - bd.rho * (sh * t + sh / self.bgt() + lambda * ch * (t / self.bgt()))
    }

    /// Sum of term magnitudes of `Δ(λ)`, used to judge residuals.
    pub fn characteristic_scale(&self, bd: BoundaryDynamics, lambda: C64) -> f64 {
        let s = lambda * self.tau;
        let (sh, ch) = (s.sinh(), s.cosh());
        (sh * (self.beta * self.tau)).norm()
            + (lambda * ch / self.gamma).norm()
            + (bd.rho * ch).norm()
            + (bd.rho * lambda * sh / self.bgt()).norm()
    }

    /// `φ(λ)`: `w1 = cosh(λτz) + λ/(βγτ) sinh(λτz)`,
    /// `w2 = βτ sinh(λτz) + (λ/γ) cosh(λτz)`, `w3 = 1`.
    pub fn eigenfunction(&self, lambda: C64) -> StateFunction {
        let s = lambda * self.tau;
        let one = C64::new(1.0, 0.0);
        StateFunction::closed(
            ExpSum::cosh_sinh(one, lambda / self.bgt(), s),
            ExpSum::cosh_sinh(lambda / self.gamma, C64::new(self.beta * self.tau, 0.0), s),
            one,
        )
    }

    /// Maps a solution of the primal equations to the adjoint variables:
    /// `w* = (w̌1/α, −w̌2/β, w̌3/γ)`.
    pub fn from_primal_form(&self, h: &StateFunction) -> StateFunction {
        let (Profile::Closed(w1), Profile::Closed(w2)) = (&h.w1, &h.w2) else {
            panic!("adjoint transformation expects closed-form profiles");
        };
        StateFunction::closed(
            w1.scale(C64::new(1.0 / self.alpha, 0.0)),
            w2.scale(C64::new(-1.0 / self.beta, 0.0)),
            h.w3 / self.gamma,
        )
    }

    /// Unnormalized adjoint eigenfunction at `λ* = conj(λ)`.
    ///
    /// Under `w̌1 = α w1*, w̌2 = −β w2*, w̌3 = γ w3*` the adjoint problem takes
    /// the primal form with boundary coefficient `conj(ρ)`, so the primal
    /// closed form is reused.
    pub fn adjoint_eigenfunction(
        &self,
        bd: BoundaryDynamics,
        lambda_star: C64,
    ) -> Result<StateFunction> {
        let adj = bd.adjoint();
        let res = self.characteristic_value(adj, lambda_star).norm();
        let scale = self.characteristic_scale(adj, lambda_star).max(1e-300);
        if res > 1e-8 * scale {
            return Err(Error::NotAdjointEigenvalue(lambda_star, res / scale));
        }
        Ok(self.from_primal_form(&self.eigenfunction(lambda_star)))
    }

    /// `𝔄h = (α ∂z h2, β ∂z h1, γ h2(0))` for closed-form `h`.
    pub fn apply_operator(&self, h: &StateFunction) -> Result<StateFunction> {
        let (Profile::Closed(w1), Profile::Closed(w2)) = (&h.w1, &h.w2) else {
            return Err(Error::Representation("operator needs closed-form profiles".into()));
        };
        Ok(StateFunction::closed(
            w2.derivative().scale(C64::new(self.alpha, 0.0)),
            w1.derivative().scale(C64::new(self.beta, 0.0)),
            w2.eval(0.0) * self.gamma,
        ))
    }

    /// Formal adjoint `(−β ∂z g2, −α ∂z g1, −β g2(0))`.
    pub fn apply_adjoint_operator(&self, g: &StateFunction) -> Result<StateFunction> {
        let (Profile::Closed(w1), Profile::Closed(w2)) = (&g.w1, &g.w2) else {
            return Err(Error::Representation("operator needs closed-form profiles".into()));
        };
        Ok(StateFunction::closed(
            w2.derivative().scale(C64::new(-self.beta, 0.0)),
            w1.derivative().scale(C64::new(-self.alpha, 0.0)),
            w2.eval(0.0) * (-self.beta),
        ))
    }

    /// Closed-form `Δ` as an [`Analytic`] function.
    pub fn characteristic(&self, bd: BoundaryDynamics) -> PlantCharacteristic {
        PlantCharacteristic { plant: *self, bd }
    }

    /// Normalized eigenpairs for the listed eigenvalues of `(self, bd)`.
    pub fn eigenpairs(
        &self,
        bd: BoundaryDynamics,
        eigenvalues: &[C64],
        quad: &GaussLegendre,
    ) -> Result<Vec<EigenPair>> {
        let raw = eigenvalues
            .iter()
            .map(|&l| {
                Ok(EigenPair::new(
                    l,
                    self.eigenfunction(l),
                    self.adjoint_eigenfunction(bd, l.conj())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        biorthonormalize(raw, quad)
    }
}

/// Boundary condition `w2(1,t) = ρ·w1(1,t)`; `ρ = 0` is the open loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDynamics {
    pub rho: C64,
}

impl BoundaryDynamics {
    pub fn open_loop() -> Self {
        Self {
            rho: C64::new(0.0, 0.0),
        }
    }

    pub fn with_rho(rho: f64) -> Self {
        Self {
            rho: C64::new(rho, 0.0),
        }
    }

    /// Boundary coefficient of the adjoint problem in primal form.
    pub fn adjoint(&self) -> Self {
        Self {
            rho: self.rho.conj(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlantCharacteristic {
    pub plant: PlantParameters,
    pub bd: BoundaryDynamics,
}

impl Analytic for PlantCharacteristic {
    fn value(&self, z: C64) -> C64 {
        self.plant.characteristic_value(self.bd, z)
    }
    fn derivative(&self, z: C64) -> C64 {
        self.plant.characteristic_derivative(self.bd, z)
    }
}

/// Root search over a window, bounded on the right by `re_max`.
#[derive(Debug, Clone)]
pub struct SpectralSearch {
    pub roots: RootSearch,
    /// Right edge of the search rectangle; windows are open to the right.
    pub re_max: f64,
}

impl Default for SpectralSearch {
    fn default() -> Self {
        Self {
            roots: RootSearch::default(),
            re_max: 60.0,
        }
    }
}

impl SpectralSearch {
    pub fn rect(&self, w: &Window) -> Rect {
        Rect::new(w.re_min, self.re_max, -w.im_max, w.im_max)
    }

    /// All zeros of `f` in `w` (up to `re_max`), ordered by `(Re, Im)`.
    pub fn solve<F: Analytic + ?Sized>(
        &self,
        f: &F,
        label: SpectrumLabel,
        w: Window,
    ) -> Result<Spectrum> {
        let roots = self.roots.find(f, self.rect(&w))?;
        Ok(Spectrum::new(label, roots, w))
    }
}

/// Zeros of `Δ` for `(p, bd)` inside the window.
pub fn find_spectrum(
    p: &PlantParameters,
    bd: BoundaryDynamics,
    w: Window,
    search: &SpectralSearch,
) -> Result<Spectrum> {
    let label = if bd.rho == C64::new(0.0, 0.0) {
        SpectrumLabel::OpenLoop
    } else {
        SpectrumLabel::Intermediate
    };
    let f = p.characteristic(bd);
    let s = search.solve(&f, label, w)?;
    for &l in &s.eigenvalues {
        let r = p.characteristic_value(bd, l).norm();
        if r >= EIGEN_RESIDUAL_TOL {
            return Err(Error::Numerical(format!(
                "eigenvalue {l} has residual {r:e}"
            )));
        }
    }
    s.check_simple()?;
    Ok(s)
}

/// `b_i = α · conj(φ_i*.w1(1))`.
pub fn modal_input_coefficient(pair: &EigenPair, p: &PlantParameters) -> C64 {
    pair.adjoint_eigenfunction.w1.eval(1.0).conj() * p.alpha()
}

/// `c_i = φ_i.w1(1)`, the output `y = w1(1)` applied to an eigenfunction.
pub fn modal_output_coefficient(pair: &EigenPair) -> C64 {
    pair.eigenfunction.w1.eval(1.0)
}
