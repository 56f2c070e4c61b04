//! Observer design, dual to the controller.
//!
//! The boundary injection `ρ_o` gives the observer-intermediate system (the
//! plant with `w2(1) = ρ_o w1(1)`). The bounded remainder is approximated by
//! `ℒⁿ = Σ l_i φ_i^o` with gains read off the adjoint eigenvectors in
//! observer canonical coordinates.
//!
//! Conventions (normative, fixed by the duality check): the last canonical
//! component of the adjoint eigenvector is `r λ̄^N e^{λ̄(θ−θ₋)}`, and the
//! Dirac part of `a^do` acts at `θ₋`. With these, `l_i c_i = k_i b_i`, so the
//! observer and controller closed loops share their spectrum when the
//! target parameters agree.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::{EigenPair, Spectrum, SpectrumLabel, Window};
use crate::feedback::{BasisChoice, ControllerDesign, ModalCharacteristic};
use crate::linalg;
use crate::plant::{modal_output_coefficient, BoundaryDynamics, PlantParameters, SpectralSearch};
use crate::quadrature::GaussLegendre;
use crate::target::{desired_spectrum, TargetDynamics};
use crate::{Error, Result, C64};

/// A vector in canonical coordinates: `N` scalars and a function on `[θ₋, θ₊]`.
pub trait HccfCoordinates {
    fn chain_len(&self) -> usize;
    fn head(&self, i: usize) -> C64;
    fn tail(&self, theta: f64) -> C64;
}

/// Explicit canonical-coordinate vector.
pub struct HccfVector<F: Fn(f64) -> C64> {
    pub head: Vec<C64>,
    pub tail: F,
}

impl<F: Fn(f64) -> C64> HccfCoordinates for HccfVector<F> {
    fn chain_len(&self) -> usize {
        self.head.len()
    }
    fn head(&self, i: usize) -> C64 {
        self.head[i]
    }
    fn tail(&self, theta: f64) -> C64 {
        (self.tail)(theta)
    }
}

/// `r·(1, λ̄, …, λ̄^{N−1}, θ ↦ λ̄^N e^{λ̄(θ−θ₋)})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HocfAdjointEigenvector {
    pub r: C64,
    pub lambda_bar: C64,
    pub n: usize,
    pub theta_minus: f64,
    pub theta_plus: f64,
}

impl HccfCoordinates for HocfAdjointEigenvector {
    fn chain_len(&self) -> usize {
        self.n
    }
    fn head(&self, i: usize) -> C64 {
        self.r * self.lambda_bar.powu(i as u32)
    }
    fn tail(&self, theta: f64) -> C64 {
        self.r * self.lambda_bar.powu(self.n as u32) * (self.lambda_bar * (theta - self.theta_minus)).exp()
    }
}

/// `Ψ_ξ h = Σ_{i<N} (−θ₋)^i/i! h_{i+1} + ∫_{θ₋}^0 (−θ)^{N−1}/(N−1)! h_{N+1}(θ) dθ`,
/// and `h(0)` for `N = 0`.
pub fn hccf_flat_output<H: HccfCoordinates + ?Sized>(h: &H, theta_minus: f64, quad: &GaussLegendre) -> C64 {
    let n = h.chain_len();
    if n == 0 {
        return h.tail(0.0);
    }
    let mut fact = 1.0;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        if i > 0 {
            fact *= i as f64;
        }
        acc += h.head(i) * ((-theta_minus).powi(i as i32) / fact);
    }
    // fact = (N−1)!
    acc + quad.integrate_over(theta_minus, 0.0, |th| h.tail(th) * ((-th).powi(n as i32 - 1) / fact))
}

/// `Ψφ* = (βτ − ρ)/(2βτ) · φ*_3`, the flat output of an adjoint state.
pub fn adjoint_flat_output(p: &PlantParameters, rho: C64, pair: &EigenPair) -> C64 {
    let bt = p.beta() * p.tau();
    (C64::new(bt, 0.0) - rho) / (2.0 * bt) * pair.adjoint_eigenfunction.w3
}

/// Solves `r(1 + ∫_{θ₋}^0 λ̄ e^{λ̄(θ−θ₋)} dθ) = Ψφ*` for `r` (first-order chain).
///
/// The bracket equals `e^{−λ̄θ₋}`.
pub fn adjoint_flat_scaling(p: &PlantParameters, t: &TargetDynamics, rho: C64, pair: &EigenPair) -> Result<C64> {
    let lb = pair.lambda.conj();
    let denom = (-lb * t.theta_minus()).exp();
    if denom.norm() < 1e-300 || !denom.norm().is_finite() {
        return Err(Error::Numerical(format!("flat scaling denominator degenerates at {lb}")));
    }
    Ok(adjoint_flat_output(p, rho, pair) / denom)
}

pub fn hocf_eigenvector(t: &TargetDynamics, pair: &EigenPair, r: C64) -> HocfAdjointEigenvector {
    HocfAdjointEigenvector {
        r,
        lambda_bar: pair.lambda.conj(),
        n: t.order(),
        theta_minus: t.theta_minus(),
        theta_plus: t.theta_plus(),
    }
}

/// `l_i = −conj(h_{N+1}(θ₊)) − ⟨a^do, h⟩` with
/// `a^do = (κ(1+μ), κ + μ δ_{θ₋})` and conjugation on the second argument.
pub fn observer_modal_gain(t: &TargetDynamics, hv: &HocfAdjointEigenvector, quad: &GaussLegendre) -> Result<C64> {
    let kappa = t.kappa_first_order()?;
    let mu = t.mu();
    let integral = quad.integrate_over(hv.theta_minus, hv.theta_plus, |th| hv.tail(th).conj());
    let pairing = hv.head(0).conj() * (kappa * (1.0 + mu)) + integral * kappa + hv.tail(hv.theta_minus).conj() * mu;
    Ok(-hv.tail(hv.theta_plus).conj() - pairing)
}

#[derive(Debug, Clone)]
pub struct ObserverApproximation {
    pub rho_o: C64,
    pub n: usize,
    pub r: Vec<C64>,
    pub l: Vec<C64>,
    /// Output coefficients `c_i = φ_{i,1}(1)`.
    pub c: Vec<C64>,
    pub pairs: Vec<EigenPair>,
}

impl ObserverApproximation {
    pub fn is_zero(&self) -> bool {
        self.l.iter().all(|l| *l == C64::new(0.0, 0.0))
    }

    /// `diag(λ_i) + L Cᵀ` in the observer-intermediate eigenbasis.
    pub fn reduced_matrix(&self) -> DMatrix<C64> {
        let n = self.n;
        let mut m = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.pairs[i].lambda;
            for j in 0..n {
                m[(i, j)] += self.l[i] * self.c[j];
            }
        }
        m
    }
}

/// Observer design for one target; reuses the controller machinery with
/// `μ_o` for the observer-intermediate eigenpairs.
#[derive(Debug, Clone)]
pub struct ObserverDesign {
    pub controller_twin: ControllerDesign,
}

impl ObserverDesign {
    pub fn new(plant: PlantParameters, target: TargetDynamics, quad: GaussLegendre, search: SpectralSearch) -> Result<Self> {
        Ok(Self {
            controller_twin: ControllerDesign::new(plant, target, quad, search)?,
        })
    }

    pub fn plant(&self) -> &PlantParameters {
        &self.controller_twin.plant
    }

    pub fn target(&self) -> &TargetDynamics {
        &self.controller_twin.target
    }

    pub fn rho(&self) -> C64 {
        self.controller_twin.rho
    }

    pub fn intermediate_spectrum(&self, w: Window) -> Result<Spectrum> {
        Ok(self
            .controller_twin
            .intermediate_spectrum(w)?
            .restricted(SpectrumLabel::ObserverIntermediate, w))
    }

    pub fn desired_spectrum(&self, w: Window) -> Result<Spectrum> {
        desired_spectrum(self.target(), w, SpectrumLabel::ObserverDesired)
    }

    pub fn approximation(&self, n: usize) -> Result<ObserverApproximation> {
        let pairs = self.controller_twin.basis(BasisChoice::Intermediate, n)?;
        self.approximation_from_pairs(pairs)
    }

    pub fn approximation_from_pairs(&self, pairs: Vec<EigenPair>) -> Result<ObserverApproximation> {
        let (p, t, rho) = (self.plant(), self.target(), self.rho());
        let quad = &self.controller_twin.quad;
        let mut r = Vec::with_capacity(pairs.len());
        let mut l = Vec::with_capacity(pairs.len());
        for pair in &pairs {
            let ri = adjoint_flat_scaling(p, t, rho, pair)?;
            l.push(observer_modal_gain(t, &hocf_eigenvector(t, pair, ri), quad)?);
            r.push(ri);
        }
        Ok(ObserverApproximation {
            rho_o: rho,
            n: pairs.len(),
            c: pairs.iter().map(modal_output_coefficient).collect(),
            r,
            l,
            pairs,
        })
    }

    /// `|Ψ_ξ φ*_ξ − Ψ φ*|` for each scaled adjoint eigenvector.
    pub fn flat_matching_residuals(&self, obs: &ObserverApproximation) -> Vec<f64> {
        let (p, t) = (self.plant(), self.target());
        let quad = self.controller_twin.quad.refined();
        obs.pairs
            .iter()
            .zip(&obs.r)
            .map(|(pair, r)| {
                let hv = hocf_eigenvector(t, pair, *r);
                (hccf_flat_output(&hv, t.theta_minus(), &quad) - adjoint_flat_output(p, obs.rho_o, pair)).norm()
            })
            .collect()
    }

    /// `σ(diag(λ_i) + L Cᵀ) ∪` the untouched observer-intermediate eigenvalues.
    pub fn closed_loop_matrix(&self, obs: &ObserverApproximation, w: Window) -> Result<Spectrum> {
        let inter = self.intermediate_spectrum(w)?;
        if obs.is_zero() {
            return Ok(inter.restricted(SpectrumLabel::ObserverClosedLoop, w));
        }
        let mut ev = linalg::eigenvalues(&obs.reduced_matrix())?;
        ev.extend(inter.eigenvalues.iter().copied().filter(|z| {
            !obs.pairs
                .iter()
                .any(|p| (p.lambda - z).norm() <= 1e-9 * z.norm().max(1.0))
        }));
        Ok(Spectrum::new(SpectrumLabel::ObserverClosedLoop, ev, w))
    }

    /// Zeros of `Δ_ρ(λ)(1 − Σ l_i c_i/(λ − λ_i))`.
    pub fn closed_loop_char(&self, obs: &ObserverApproximation, w: Window) -> Result<Spectrum> {
        let f = ModalCharacteristic {
            plant: *self.plant(),
            bd: BoundaryDynamics { rho: obs.rho_o },
            poles: obs.pairs.iter().map(|p| p.lambda).collect(),
            residues: obs.l.iter().zip(&obs.c).map(|(l, c)| l * c).collect(),
        };
        let s = self
            .controller_twin
            .search
            .solve(&f, SpectrumLabel::ObserverClosedLoop, w)?;
        s.check_simple()?;
        Ok(s)
    }
}

impl ObserverDesign {
    /// Controller closed loop on the conjugated mode set of `obs`, the dual
    /// of the observer closed loop. Requires identical targets.
    pub fn dual_controller_spectrum(&self, ctrl: &ControllerDesign, obs: &ObserverApproximation, w: Window) -> Result<Spectrum> {
        if ctrl.target != *self.target() || ctrl.plant != *self.plant() {
            return Err(Error::Contract("duality needs identical plant and target".into()));
        }
        let conj: Vec<C64> = obs.pairs.iter().map(|p| p.lambda.conj()).collect();
        let fb = ctrl.approximation_on(BasisChoice::Intermediate, &conj)?;
        ctrl.closed_loop(&fb, w)
    }
}

/// Largest distance between `observer` and the conjugate of `controller`,
/// matched in `(Re, Im)` order; infinite on a count mismatch.
pub fn duality_defect(observer: &Spectrum, controller: &Spectrum) -> f64 {
    if observer.len() != controller.len() {
        return f64::INFINITY;
    }
    let mut conj: Vec<C64> = controller.eigenvalues.iter().map(|z| z.conj()).collect();
    crate::eigen::sort_re_im(&mut conj);
    observer
        .eigenvalues
        .iter()
        .zip(&conj)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::modal_input_coefficient;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn design() -> ObserverDesign {
        let p = PlantParameters::reference();
        ObserverDesign::new(p, TargetDynamics::reference(&p), GaussLegendre::default(), SpectralSearch::default()).unwrap()
    }

    #[test]
    fn flat_output_examples() {
        let q = GaussLegendre::default();
        let tau = PlantParameters::reference().tau();
        let h0 = HccfVector { head: vec![], tail: |_| c(2.5, -1.0) };
        assert_eq!(hccf_flat_output(&h0, -tau, &q), c(2.5, -1.0));
        let h1 = HccfVector { head: vec![c(1.0, 0.0)], tail: |_| c(0.0, 0.0) };
        assert_eq!(hccf_flat_output(&h1, -tau, &q), c(1.0, 0.0));
        let h2 = HccfVector { head: vec![c(0.0, 0.0)], tail: |_| c(1.0, 0.0) };
        assert!((hccf_flat_output(&h2, -tau, &q) - tau).norm() < 1e-15);
        // N = 2: (−θ₋) h_2 + ∫ (−θ) h_3
        let h3 = HccfVector { head: vec![c(0.0, 0.0), c(1.0, 0.0)], tail: |_| c(1.0, 0.0) };
        assert!((hccf_flat_output(&h3, -0.5, &q) - (0.5 + 0.125)).norm() < 1e-14);
    }

    #[test]
    fn scaling_examples() {
        let d = design();
        let (p, t) = (*d.plant(), d.target().clone());
        let pairs = d.controller_twin.basis(BasisChoice::Intermediate, 3).unwrap();
        let mut zero = pairs[0].clone();
        zero.lambda = c(0.0, 0.0);
        let r = adjoint_flat_scaling(&p, &t, d.rho(), &zero).unwrap();
        assert!((r - adjoint_flat_output(&p, d.rho(), &zero)).norm() < 1e-15);
        let bt = c(p.beta() * p.tau(), 0.0);
        assert_eq!(adjoint_flat_scaling(&p, &t, bt, &pairs[1]).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn flat_matching_residuals_are_tiny() {
        let d = design();
        let obs = d.approximation(10).unwrap();
        for r in d.flat_matching_residuals(&obs) {
            assert!(r < 1e-9, "{r:e}");
        }
    }

    #[test]
    fn gain_examples() {
        let d = design();
        let t = d.target().clone();
        let q = GaussLegendre::default();
        let zero_r = HocfAdjointEigenvector { r: c(0.0, 0.0), lambda_bar: c(-3.0, 4.0), n: 1, theta_minus: -t.tau(), theta_plus: t.tau() };
        assert_eq!(observer_modal_gain(&t, &zero_r, &q).unwrap(), c(0.0, 0.0));
        // closed form −r̄(λ+κ)(e^{2λτ}+μ)
        let hv = HocfAdjointEigenvector { r: c(0.3, -0.2), lambda_bar: c(-8.0, -37.0), n: 1, theta_minus: -t.tau(), theta_plus: t.tau() };
        let lam = hv.lambda_bar.conj();
        let want = -hv.r.conj() * (lam + 12.0) * ((lam * 2.0 * t.tau()).exp() + t.mu());
        assert!((observer_modal_gain(&t, &hv, &q).unwrap() - want).norm() < 1e-12 * want.norm());
        // κ_o = 0 target and λ = 0 give l = 0 for the first-order chain
        let t0 = TargetDynamics::new(vec![0.0, 1.0], t.mu(), t.tau()).unwrap();
        let hz = HocfAdjointEigenvector { lambda_bar: c(0.0, 0.0), ..hv };
        assert_eq!(observer_modal_gain(&t0, &hz, &q).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn gains_are_dual_to_controller_gains() {
        let d = design();
        let obs = d.approximation(6).unwrap();
        let fb = d.controller_twin.approximation(BasisChoice::Intermediate, 6).unwrap();
        for i in 0..6 {
            let lhs = obs.l[i] * obs.c[i];
            let rhs = fb.gains[i] * modal_input_coefficient(&fb.pairs[i], d.plant());
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn zero_gain_and_rank_one_cases() {
        let d = design();
        let w = Window::new(-40.0, 150.0).unwrap();
        let inter = d.intermediate_spectrum(w).unwrap();
        let mut obs = d.approximation(3).unwrap();
        obs.l = vec![c(0.0, 0.0); 3];
        assert_eq!(d.closed_loop_matrix(&obs, w).unwrap().eigenvalues, inter.eigenvalues);
        let one = d.approximation(1).unwrap();
        let m = one.reduced_matrix();
        assert!((m[(0, 0)] - (one.pairs[0].lambda + one.l[0] * one.c[0])).norm() < 1e-14);
    }

    #[test]
    fn matrix_and_char_paths_agree_and_duality_holds() {
        let d = design();
        let w = Window::new(-40.0, 200.0).unwrap();
        let obs = d.approximation(3).unwrap();
        let a = d.closed_loop_matrix(&obs, w).unwrap();
        let b = d.closed_loop_char(&obs, w).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).norm() < 1e-6, "{x} vs {y}");
        }
        let ctrl = d.dual_controller_spectrum(&d.controller_twin, &obs, w).unwrap();
        assert!(duality_defect(&a, &ctrl) < 1e-6);
    }

    #[test]
    fn duality_with_unpaired_mode() {
        // n = 2 keeps λ₁ but not its conjugate, so neither spectrum is
        // conjugate-symmetric.
        let d = design();
        let w = Window::new(-40.0, 120.0).unwrap();
        let obs = d.approximation(2).unwrap();
        let a = d.closed_loop_matrix(&obs, w).unwrap();
        let ctrl = d.dual_controller_spectrum(&d.controller_twin, &obs, w).unwrap();
        assert!(duality_defect(&a, &ctrl) < 1e-6);
    }
}
