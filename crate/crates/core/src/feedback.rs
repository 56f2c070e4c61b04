//! Controller synthesis: the boundary part `ρ·w1(1)` of the feedback, the
//! bounded remainder `𝒦`, its modal approximation `𝒦ⁿ` over a chosen
//! eigenbasis, and the resulting closed-loop spectrum.
//!
//! The closed-loop spectrum is computed two ways. The matrix path takes the
//! eigenvalues of `diag(λ_i^c) + B_n K_nᵀ` and keeps the untouched
//! intermediate eigenvalues. The characteristic path finds the zeros of the
//! entire function
//!
//! ```text
//! F(λ) = Δ_ρ(λ) − Σ_i k_i ⟨φ(λ), φ_i*⟩,
//! ```
//!
//! which works for any basis.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::{biorthonormalize, sort_modal, EigenPair, Spectrum, SpectrumLabel, Window};
use crate::linalg;
use crate::plant::{
    find_spectrum, modal_input_coefficient, BoundaryDynamics, PlantParameters, SpectralSearch,
};
use crate::quadrature::GaussLegendre;
use crate::roots::Analytic;
use crate::state::{inner_product, ExpSum, StateFunction};
use crate::target::{desired_boundary_unbounded_coefficient, desired_spectrum, TargetDynamics};
use crate::{Error, Result, C64};

/// `𝒦_ν h = c₊ h(τ) + c₋ h(−τ)` acting on the flat output's history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedKernel {
    pub c_plus: C64,
    pub c_minus: C64,
}

impl BoundedKernel {
    pub fn zero() -> Self {
        Self {
            c_plus: C64::new(0.0, 0.0),
            c_minus: C64::new(0.0, 0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c_plus == C64::new(0.0, 0.0) && self.c_minus == C64::new(0.0, 0.0)
    }

    /// `c₊ e^{λτ} + c₋ e^{−λτ}`: the kernel applied to `θ ↦ e^{λθ}`.
    pub fn on_exponential(&self, lambda: C64, tau: f64) -> C64 {
        self.c_plus * (lambda * tau).exp() + self.c_minus * (-lambda * tau).exp()
    }

    /// State-space representer `k` with `𝒦x = ⟨x, k⟩`:
    /// `k1 = conj(q(c₊+c₋)) e^{−q(1−z)}`, `k2 = conj(γτ(c₊−c₋)) e^{−q(1−z)}`,
    /// `k3 = conj(c₊+c₋) e^{−q}`, `q = γ/α`.
    pub fn representer(&self, p: &PlantParameters) -> StateFunction {
        let q = p.gamma() / p.alpha();
        let e = (-q).exp();
        let rate = C64::new(q, 0.0);
        let s = self.c_plus + self.c_minus;
        let d = self.c_plus - self.c_minus;
        StateFunction::closed(
            ExpSum::exp((s * q).conj() * e, rate),
            ExpSum::exp((d * (p.gamma() * p.tau())).conj() * e, rate),
            s.conj() * e,
        )
    }

    /// `𝒦x` by quadrature.
    pub fn apply(&self, x: &StateFunction, p: &PlantParameters, quad: &GaussLegendre) -> Result<C64> {
        inner_product(x, &self.representer(p), quad)
    }
}

/// Bounded part of the control law for a first-order target.
///
/// The χ(t−τ) coefficient carries a minus sign: with it the combination of
/// the flat parameterization at `z = 1` and the target equation eliminates
/// all derivatives of `χ`, and the closed loop has the target spectrum.
pub fn build_bounded_kernel(p: &PlantParameters, t: &TargetDynamics) -> Result<BoundedKernel> {
    let kappa = t.kappa_first_order()?;
    let (mu, g, bgt) = (t.mu(), p.gamma(), p.bgt());
    Ok(BoundedKernel {
        c_plus: C64::new((bgt - kappa) / (g * (mu + 1.0)), 0.0),
        c_minus: C64::new(-mu * (bgt + kappa) / (g * (mu + 1.0)), 0.0),
    })
}

/// `k_i = φ_{i,3} · 𝒦_ν e^{λ_i θ}`.
pub fn modal_gain(pair: &EigenPair, kern: &BoundedKernel, tau: f64) -> C64 {
    pair.eigenfunction.w3 * kern.on_exponential(pair.lambda, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    OpenLoop,
    Intermediate,
    Desired,
}

impl BasisChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasisChoice::OpenLoop => "open_loop",
            BasisChoice::Intermediate => "intermediate",
            BasisChoice::Desired => "desired",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeedbackApproximation {
    pub rho: C64,
    pub n: usize,
    pub basis: BasisChoice,
    pub pairs: Vec<EigenPair>,
    pub gains: Vec<C64>,
}

impl FeedbackApproximation {
    pub fn new(rho: C64, basis: BasisChoice, pairs: Vec<EigenPair>, gains: Vec<C64>) -> Result<Self> {
        if pairs.len() != gains.len() {
            return Err(Error::Contract(format!(
                "{} gains for {} eigenpairs",
                gains.len(),
                pairs.len()
            )));
        }
        if let Some(p) = pairs.iter().find(|p| !p.normalized) {
            return Err(Error::Contract(format!("eigenpair at {} is not normalized", p.lambda)));
        }
        Ok(Self {
            rho,
            n: pairs.len(),
            basis,
            pairs,
            gains,
        })
    }

    /// `𝒦ⁿx = Σ_i ⟨x, φ_i*⟩ k_i`.
    pub fn apply(&self, x: &StateFunction, quad: &GaussLegendre) -> Result<C64> {
        self.pairs
            .iter()
            .zip(&self.gains)
            .map(|(p, k)| Ok(inner_product(x, &p.adjoint_eigenfunction, quad)? * k))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.gains.iter().all(|k| *k == C64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub a: DMatrix<C64>,
    pub b: Vec<C64>,
    pub k: Vec<C64>,
}

impl ReducedModel {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// `A_n + B_n K_nᵀ`.
    pub fn closed_loop_matrix(&self) -> DMatrix<C64> {
        let n = self.n();
        let mut m = self.a.clone();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += self.b[i] * self.k[j];
            }
        }
        m
    }
}

/// Galerkin matrices in the approximation's basis:
/// `(A_n)_{j,i} = ⟨𝔄φ_i, φ_j*⟩`, `(B_n)_i = α conj(φ*_{i,1}(1))`, `(K_n)_i = k_i`.
pub fn assemble_reduced(
    p: &PlantParameters,
    fb: &FeedbackApproximation,
    quad: &GaussLegendre,
) -> Result<ReducedModel> {
    let n = fb.n;
    let applied = fb
        .pairs
        .iter()
        .map(|pair| p.apply_operator(&pair.eigenfunction))
        .collect::<Result<Vec<_>>>()?;
    let mut a = DMatrix::<C64>::zeros(n, n);
    for (i, ai) in applied.iter().enumerate() {
        for (j, pj) in fb.pairs.iter().enumerate() {
            a[(j, i)] = inner_product(ai, &pj.adjoint_eigenfunction, quad)?;
        }
    }
    Ok(ReducedModel {
        a,
        b: fb.pairs.iter().map(|pair| modal_input_coefficient(pair, p)).collect(),
        k: fb.gains.clone(),
    })
}

/// `σ(A_n + B_n K_nᵀ) ∪ (σ(𝒜^c) without the basis eigenvalues)`.
///
/// Only valid for the intermediate eigenbasis.
pub fn closed_loop_spectrum_matrix(
    rm: &ReducedModel,
    fb: &FeedbackApproximation,
    intermediate: &Spectrum,
    w: Window,
) -> Result<Spectrum> {
    if fb.basis != BasisChoice::Intermediate {
        return Err(Error::Contract(
            "the matrix path needs the intermediate eigenbasis".into(),
        ));
    }
    if fb.is_zero() {
        return Ok(intermediate.restricted(SpectrumLabel::ClosedLoop, w));
    }
    let mut ev = linalg::eigenvalues(&rm.closed_loop_matrix())?;
    ev.extend(intermediate.eigenvalues.iter().copied().filter(|z| {
        !fb.pairs
            .iter()
            .any(|p| (p.lambda - z).norm() <= 1e-9 * z.norm().max(1.0))
    }));
    Ok(Spectrum::new(SpectrumLabel::ClosedLoop, ev, w))
}

/// The entire function `F(λ) = Δ_ρ(λ) − 𝒦ⁿφ(λ)` with the adjoint
/// eigenfunctions tabulated on the quadrature nodes.
#[derive(Debug, Clone)]
pub struct ClosedLoopCharacteristic {
    plant: PlantParameters,
    bd: BoundaryDynamics,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    a1: Vec<C64>,
    a2: Vec<C64>,
    a3: C64,
}

impl ClosedLoopCharacteristic {
    pub fn new(p: &PlantParameters, fb: &FeedbackApproximation, quad: &GaussLegendre) -> Self {
        let nodes = quad.nodes().to_vec();
        let mut a1 = vec![C64::new(0.0, 0.0); nodes.len()];
        let mut a2 = a1.clone();
        let mut a3 = C64::new(0.0, 0.0);
        for (pair, k) in fb.pairs.iter().zip(&fb.gains) {
            let psi = &pair.adjoint_eigenfunction;
            for (m, &z) in nodes.iter().enumerate() {
                a1[m] += k * psi.w1.eval(z).conj();
                a2[m] += k * psi.w2.eval(z).conj();
            }
            a3 += k * psi.w3.conj();
        }
        Self {
            plant: *p,
            bd: BoundaryDynamics { rho: fb.rho },
            nodes,
            weights: quad.weights().to_vec(),
            a1,
            a2,
            a3,
        }
    }

    /// `𝒦ⁿφ(λ)`.
    pub fn modal_part(&self, lambda: C64) -> C64 {
        let (t, bgt, g, b) = (self.plant.tau(), self.plant.bgt(), self.plant.gamma(), self.plant.beta());
        let mut acc = self.a3;
        for m in 0..self.nodes.len() {
            let s = lambda * (t * self.nodes[m]);
            let (sh, ch) = (s.sinh(), s.cosh());
            let w1 = ch + lambda * sh / bgt;
            let w2 = sh * (b * t) + lambda * ch / g;
            acc += (w1 * self.a1[m] + w2 * self.a2[m]) * self.weights[m];
        }
        acc
    }

    fn modal_part_derivative(&self, lambda: C64) -> C64 {
        let (t, bgt, g, b) = (self.plant.tau(), self.plant.bgt(), self.plant.gamma(), self.plant.beta());
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..self.nodes.len() {
            let z = self.nodes[m];
            let s = lambda * (t * z);
            let (sh, ch) = (s.sinh(), s.cosh());
            let d1 = sh * (t * z) + sh / bgt + lambda * ch * (t * z / bgt);
            let d2 = ch * (b * t * t * z) + ch / g + lambda * sh * (t * z / g);
            acc += (d1 * self.a1[m] + d2 * self.a2[m]) * self.weights[m];
        }
        acc
    }
}

impl Analytic for ClosedLoopCharacteristic {
    fn value(&self, lambda: C64) -> C64 {
        self.plant.characteristic_value(self.bd, lambda) - self.modal_part(lambda)
    }
    fn derivative(&self, lambda: C64) -> C64 {
        self.plant.characteristic_derivative(self.bd, lambda) - self.modal_part_derivative(lambda)
    }
}

/// `Δ(λ)·(1 − Σ_i m_i/(λ − λ_i))`: entire, since every pole is a zero of
/// `Δ`. Near a pole `Δ(λ)/(λ − λ_i)` is replaced by `Δ′` at the midpoint.
#[derive(Debug, Clone)]
pub struct ModalCharacteristic {
    pub plant: PlantParameters,
    pub bd: BoundaryDynamics,
    pub poles: Vec<C64>,
    pub residues: Vec<C64>,
}

impl ModalCharacteristic {
    fn quotient(&self, lambda: C64, pole: C64) -> C64 {
        let h = lambda - pole;
        if h.norm() < 1e-6 * pole.norm().max(1.0) {
            self.plant.characteristic_derivative(self.bd, (lambda + pole) * 0.5)
        } else {
            self.plant.characteristic_value(self.bd, lambda) / h
        }
    }
}

impl Analytic for ModalCharacteristic {
    fn value(&self, lambda: C64) -> C64 {
        let mut v = self.plant.characteristic_value(self.bd, lambda);
        for (p, r) in self.poles.iter().zip(&self.residues) {
            v -= r * self.quotient(lambda, *p);
        }
        v
    }
}

/// Reference dynamics for `g(λ, n)`.
#[derive(Debug, Clone)]
pub enum Reference<'a> {
    /// `g = F/Δ_ρ`; modal form with `m_i = 𝒦ⁿφ_i^c`.
    Intermediate(&'a Spectrum),
    /// `g = F/(Δ_ρ − 𝒦φ)`; modal form with `m_i = (𝒦ⁿ − 𝒦)φ_i^{dc}`.
    Desired(&'a Spectrum, &'a BoundedKernel),
}

/// `g(λ, n)`, whose zeros are the closed-loop eigenvalues outside the
/// reference spectrum.
pub fn characteristic_g(lambda: C64, f: &ClosedLoopCharacteristic, reference: &Reference) -> Result<C64> {
    let (spec, denom) = match reference {
        Reference::Intermediate(s) => (*s, f.plant.characteristic_value(f.bd, lambda)),
        Reference::Desired(s, k) => (
            *s,
            f.plant.characteristic_value(f.bd, lambda) - k.on_exponential(lambda, f.plant.tau()),
        ),
    };
    if let Some(z) = spec.eigenvalues.iter().find(|z| (lambda - *z).norm() < 1e-9) {
        return Err(Error::PoleProximity(*z, (lambda - z).norm()));
    }
    Ok(f.value(lambda) / denom)
}

/// `1 − Σ_i m_i b_i/(λ − λ_i)` over a finite reference basis.
pub fn characteristic_g_modal(lambda: C64, poles: &[C64], m: &[C64], b: &[C64]) -> Result<C64> {
    let mut g = C64::new(1.0, 0.0);
    for ((l, mi), bi) in poles.iter().zip(m).zip(b) {
        let d = lambda - l;
        if d.norm() < 1e-9 {
            return Err(Error::PoleProximity(*l, d.norm()));
        }
        g -= mi * bi / d;
    }
    Ok(g)
}

/// Zeros of `F` in `w`.
pub fn closed_loop_spectrum_char(
    p: &PlantParameters,
    fb: &FeedbackApproximation,
    w: Window,
    quad: &GaussLegendre,
    search: &SpectralSearch,
) -> Result<Spectrum> {
    let bd = BoundaryDynamics { rho: fb.rho };
    if fb.is_zero() {
        return Ok(find_spectrum(p, bd, w, search)?.restricted(SpectrumLabel::ClosedLoop, w));
    }
    let f = ClosedLoopCharacteristic::new(p, fb, quad);
    let s = search.solve(&f, SpectrumLabel::ClosedLoop, w)?;
    for &z in &s.eigenvalues {
        let scale = p.characteristic_scale(bd, z) + f.modal_part(z).norm();
        let r = f.value(z).norm();
        if r > 1e-10 * scale.max(1.0) {
            return Err(Error::Numerical(format!(
                "closed-loop eigenvalue {z} has residual {r:e}"
            )));
        }
    }
    s.check_simple()?;
    Ok(s)
}

/// `k̃_i = (𝒦 − 𝒦ⁿ)φ_i` for each eigenpair in `pairs`.
pub fn defect_coefficients(
    p: &PlantParameters,
    kern: &BoundedKernel,
    fb: &FeedbackApproximation,
    pairs: &[EigenPair],
    quad: &GaussLegendre,
) -> Result<Vec<C64>> {
    pairs
        .iter()
        .map(|d| Ok(d.eigenfunction.w3 * kern.on_exponential(d.lambda, p.tau()) - fb.apply(&d.eigenfunction, quad)?))
        .collect()
}

/// Adjoint eigenfunction of the desired dynamics at `λ* = conj(λ)`.
///
/// It is proportional to `R(λ*, 𝒜^{c*}) k`, obtained in closed form in the
/// primal variables `w̌ = (αw1*, −βw2*, γw3*)`: an `e^{qz}` particular
/// solution plus `cosh/sinh(λ*τz)`, with the adjoint boundary conditions
/// `w̌3 = w̌1(0)` and `w̌2(1) = conj(ρ) w̌1(1)`. The eigenvalue condition is
/// `w̌1(1) = 1`, which is checked.
pub fn desired_adjoint_eigenfunction(
    p: &PlantParameters,
    rho: C64,
    kern: &BoundedKernel,
    lambda_star: C64,
) -> Result<StateFunction> {
    let (alpha, beta, gamma, tau) = (p.alpha(), p.beta(), p.gamma(), p.tau());
    let q = gamma / alpha;
    let k = kern.representer(p);
    let (crate::state::Profile::Closed(k1), crate::state::Profile::Closed(k2)) = (&k.w1, &k.w2) else {
        unreachable!("representer is closed form");
    };
    let big_k1 = k1.terms()[0].0;
    let big_k2 = k2.terms()[0].0;
    let k3 = k.w3;
    let l = lambda_star;
    let det = l * l - alpha * beta * q * q;
    if det.norm() < 1e-10 * (alpha * beta * q * q).max(1.0) {
        return Err(Error::Numerical(format!(
            "resolvent particular solution is singular at {l}"
        )));
    }
    let p1 = (l * alpha * big_k1 - alpha * q * beta * big_k2) / det;
    let p2 = (big_k1 * (beta * q * alpha) - l * beta * big_k2) / det;
    let s = l * tau;
    let (sh, ch) = (s.sinh(), s.cosh());
    let rb = rho.conj();
    let bt = beta * tau;
    let eq = q.exp();
    // [ λ*         −γβτ        ] [c1]   [ γk3 − λ*P1 + γP2      ]
    // [ βτS − ρ̄Ch   βτCh − ρ̄S ] [c2] = [ −(P2 − ρ̄P1) e^q       ]
    let m11 = l;
    let m12 = C64::new(-gamma * bt, 0.0);
    let m21 = sh * bt - rb * ch;
    let m22 = ch * bt - rb * sh;
    let r1 = k3 * gamma - l * p1 + p2 * gamma;
    let r2 = -(p2 - rb * p1) * eq;
    let d = m11 * m22 - m12 * m21;
    let scale = (m11 * m22).norm() + (m12 * m21).norm();
    if d.norm() < 1e-12 * scale {
        return Err(Error::NotAdjointEigenvalue(l, d.norm() / scale));
    }
    let c1 = (r1 * m22 - m12 * r2) / d;
    let c2 = (m11 * r2 - m21 * r1) / d;
    let w1 = ExpSum::cosh_sinh(c1, c2, s).plus(&ExpSum::exp(p1, C64::new(q, 0.0)));
    let w2 = ExpSum::cosh_sinh(c2 * bt, c1 * bt, s).plus(&ExpSum::exp(p2, C64::new(q, 0.0)));
    let w1_at_1 = w1.eval(1.0);
    let mag = (c1 * ch).norm() + (c2 * sh).norm() + (p1 * eq).norm();
    if (w1_at_1 - 1.0).norm() > 1e-7 * mag.max(1.0) {
        return Err(Error::NotAdjointEigenvalue(l, (w1_at_1 - 1.0).norm()));
    }
    let primal = StateFunction::closed(w1, w2, c1 + p1);
    Ok(p.from_primal_form(&primal))
}

/// Largest search radius tried when collecting a basis.
const MAX_BASIS_RADIUS: f64 = 1e5;

/// Everything needed to design and evaluate the controller for one target.
#[derive(Debug, Clone)]
pub struct ControllerDesign {
    pub plant: PlantParameters,
    pub target: TargetDynamics,
    pub rho: C64,
    pub kernel: BoundedKernel,
    pub quad: GaussLegendre,
    pub search: SpectralSearch,
}

impl ControllerDesign {
    pub fn new(
        plant: PlantParameters,
        target: TargetDynamics,
        quad: GaussLegendre,
        search: SpectralSearch,
    ) -> Result<Self> {
        let rho = desired_boundary_unbounded_coefficient(&target, &plant);
        let kernel = build_bounded_kernel(&plant, &target)?;
        Ok(Self {
            plant,
            target,
            rho,
            kernel,
            quad,
            search,
        })
    }

    /// Same design with `𝒦 = 0`; the closed loop is then the intermediate system.
    pub fn with_zero_kernel(mut self) -> Self {
        self.kernel = BoundedKernel::zero();
        self
    }

    pub fn intermediate_bd(&self) -> BoundaryDynamics {
        BoundaryDynamics { rho: self.rho }
    }

    pub fn intermediate_spectrum(&self, w: Window) -> Result<Spectrum> {
        find_spectrum(&self.plant, self.intermediate_bd(), w, &self.search)
    }

    pub fn open_loop_spectrum(&self, w: Window) -> Result<Spectrum> {
        find_spectrum(&self.plant, BoundaryDynamics::open_loop(), w, &self.search)
    }

    pub fn desired_spectrum(&self, w: Window) -> Result<Spectrum> {
        desired_spectrum(&self.target, w, SpectrumLabel::Desired)
    }

    fn spectrum_for(&self, choice: BasisChoice, w: Window) -> Result<Spectrum> {
        match choice {
            BasisChoice::OpenLoop => self.open_loop_spectrum(w),
            BasisChoice::Intermediate => self.intermediate_spectrum(w),
            BasisChoice::Desired => self.desired_spectrum(w),
        }
    }

    /// The `n` eigenvalues of smallest modulus (conjugate partners adjacent).
    pub fn basis_eigenvalues(&self, choice: BasisChoice, n: usize) -> Result<Vec<C64>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut radius: f64 = 60.0;
        while radius <= MAX_BASIS_RADIUS {
            let s = self.spectrum_for(choice, Window::new(-radius, radius)?)?;
            let mut inside: Vec<C64> = s
                .eigenvalues
                .into_iter()
                .filter(|z| z.norm() <= radius)
                .collect();
            // one extra so a conjugate partner of the n-th is never missed
            if inside.len() > n {
                sort_modal(&mut inside);
                inside.truncate(n);
                return Ok(inside);
            }
            radius *= 2.0;
        }
        Err(Error::IncompleteSearch {
            counted: n,
            found: 0,
        })
    }

    /// Normalized eigenpairs for `λ` in the spectrum of `choice`.
    pub fn pairs_for(&self, choice: BasisChoice, eigenvalues: &[C64]) -> Result<Vec<EigenPair>> {
        match choice {
            BasisChoice::OpenLoop => {
                self.plant
                    .eigenpairs(BoundaryDynamics::open_loop(), eigenvalues, &self.quad)
            }
            BasisChoice::Intermediate => {
                self.plant
                    .eigenpairs(self.intermediate_bd(), eigenvalues, &self.quad)
            }
            BasisChoice::Desired => {
                let kern = build_bounded_kernel(&self.plant, &self.target)?;
                let raw = eigenvalues
                    .iter()
                    .map(|&l| {
                        Ok(EigenPair::new(
                            l,
                            self.plant.eigenfunction(l),
                            desired_adjoint_eigenfunction(&self.plant, self.rho, &kern, l.conj())?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                biorthonormalize(raw, &self.quad)
            }
        }
    }

    pub fn basis(&self, choice: BasisChoice, n: usize) -> Result<Vec<EigenPair>> {
        let ev = self.basis_eigenvalues(choice, n)?;
        self.pairs_for(choice, &ev)
    }

    pub fn approximation(&self, choice: BasisChoice, n: usize) -> Result<FeedbackApproximation> {
        let ev = self.basis_eigenvalues(choice, n)?;
        self.approximation_on(choice, &ev)
    }

    /// Approximation on an explicit set of basis eigenvalues.
    pub fn approximation_on(&self, choice: BasisChoice, eigenvalues: &[C64]) -> Result<FeedbackApproximation> {
        let pairs = self.pairs_for(choice, eigenvalues)?;
        let gains = pairs
            .iter()
            .map(|p| modal_gain(p, &self.kernel, self.plant.tau()))
            .collect();
        FeedbackApproximation::new(self.rho, choice, pairs, gains)
    }

    /// Desired spectrum on `w` with its input coefficients `b_i^{dc}`.
    pub fn desired_input_coefficients(&self, w: Window) -> Result<(Spectrum, Vec<C64>)> {
        let s = self.desired_spectrum(w)?;
        let pairs = self.pairs_for(BasisChoice::Desired, &s.eigenvalues)?;
        let b = pairs
            .iter()
            .map(|p| modal_input_coefficient(p, &self.plant))
            .collect();
        Ok((s, b))
    }

    pub fn closed_loop_char(&self, fb: &FeedbackApproximation, w: Window) -> Result<Spectrum> {
        closed_loop_spectrum_char(&self.plant, fb, w, &self.quad.refined(), &self.search)
    }

    pub fn closed_loop_matrix(&self, fb: &FeedbackApproximation, w: Window) -> Result<Spectrum> {
        let rm = assemble_reduced(&self.plant, fb, &self.quad)?;
        let inter = self.intermediate_spectrum(w)?;
        closed_loop_spectrum_matrix(&rm, fb, &inter, w)
    }

    /// Closed-loop spectrum by the matrix path when applicable, otherwise
    /// by the characteristic function.
    pub fn closed_loop(&self, fb: &FeedbackApproximation, w: Window) -> Result<Spectrum> {
        match fb.basis {
            BasisChoice::Intermediate => self.closed_loop_matrix(fb, w),
            _ => self.closed_loop_char(fb, w),
        }
    }
}
