//! Time-domain validation on a unit-CFL characteristic grid.
//!
//! With `ξ± = √β w1 ± √α w2` the transport part is `∂t ξ± = ±v ∂z ξ±`, so one
//! step of `Δt = Δz/v` shifts `ξ₊` one cell towards `z = 0` and `ξ₋` one cell
//! towards `z = 1` without any dispersion. Only the boundary closures, the
//! `w3` ODE and distributed sources are discretized (trapezoidal rule).
//!
//! Feedback laws and output injections are linear in the state, which lets
//! the implicit boundary condition at `z = 1` be solved exactly from two
//! trial evaluations.

use serde::{Deserialize, Serialize};

use crate::eigen::EigenPair;
use crate::feedback::FeedbackApproximation;
use crate::observer::ObserverApproximation;
use crate::plant::PlantParameters;
use crate::state::{ExpSum, StateFunction};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Uniform grid on `[0, 1]` with `m` cells and the matching time step.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub plant: PlantParameters,
    pub m: usize,
    pub dz: f64,
    pub dt: f64,
}

impl Grid {
    pub fn new(plant: PlantParameters, m: usize) -> Result<Self> {
        let dz = 1.0 / m as f64;
        Self::with_step(plant, m, dz / plant.v())
    }

    /// Rejects any time step that does not satisfy `v Δt = Δz`.
    pub fn with_step(plant: PlantParameters, m: usize, dt: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2 cells, got {m}")));
        }
        let dz = 1.0 / m as f64;
        if !dt.is_finite() || ((plant.v() * dt - dz) / dz).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} violates unit CFL (expected {})",
                dz / plant.v()
            )));
        }
        Ok(Self { plant, m, dz, dt })
    }

    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.dz
    }

    fn sq_a(&self) -> f64 {
        self.plant.alpha().sqrt()
    }

    fn sq_b(&self) -> f64 {
        self.plant.beta().sqrt()
    }

    pub fn sample(&self, x: &StateFunction) -> GridState {
        let (sa, sb) = (self.sq_a(), self.sq_b());
        let mut xi_plus = Vec::with_capacity(self.m + 1);
        let mut xi_minus = Vec::with_capacity(self.m + 1);
        for j in 0..=self.m {
            let z = self.z(j);
            let (w1, w2) = (x.w1.eval(z), x.w2.eval(z));
            xi_plus.push(w1 * sb + w2 * sa);
            xi_minus.push(w1 * sb - w2 * sa);
        }
        GridState { xi_plus, xi_minus, w3: x.w3, t: 0.0 }
    }

    pub fn w1(&self, gs: &GridState, j: usize) -> C64 {
        (gs.xi_plus[j] + gs.xi_minus[j]) / (2.0 * self.sq_b())
    }

    pub fn w2(&self, gs: &GridState, j: usize) -> C64 {
        (gs.xi_plus[j] - gs.xi_minus[j]) / (2.0 * self.sq_a())
    }

    /// Sampled `(w1, w2, w3)`.
    pub fn reconstruct(&self, gs: &GridState) -> Result<StateFunction> {
        let w1 = (0..=self.m).map(|j| self.w1(gs, j)).collect();
        let w2 = (0..=self.m).map(|j| self.w2(gs, j)).collect();
        StateFunction::sampled(w1, w2, gs.w3)
    }

    /// `‖x‖²` with the trapezoidal rule.
    pub fn energy(&self, gs: &GridState) -> f64 {
        let mut acc = 0.0;
        for j in 0..=self.m {
            let wt = if j == 0 || j == self.m { 0.5 } else { 1.0 };
            acc += wt * (self.w1(gs, j).norm_sqr() + self.w2(gs, j).norm_sqr());
        }
        acc * self.dz + gs.w3.norm_sqr()
    }

    /// Stored energy `∫ β|w1|² + α|w2|² dz + (αβ/γ)|w3|²`; non-increasing
    /// whenever `Re(w̄1(1) u) ≤ 0`.
    pub fn physical_energy(&self, gs: &GridState) -> f64 {
        let mut acc = 0.0;
        for j in 0..=self.m {
            let wt = if j == 0 || j == self.m { 0.5 } else { 1.0 };
            acc += wt * 0.5 * (gs.xi_plus[j].norm_sqr() + gs.xi_minus[j].norm_sqr());
        }
        let p = &self.plant;
        acc * self.dz + p.alpha() * p.beta() / p.gamma() * gs.w3.norm_sqr()
    }

    /// One step with `u = feedback(state at t + Δt)`; `feedback` must be linear
    /// (affine) in the state.
    pub fn step<F: Fn(&GridState) -> C64>(&self, gs: &GridState, feedback: F) -> Result<GridState> {
        self.advance(gs, &feedback, None)
    }

    /// Step with an additional source `P(z)·a(t)`; `a_old` is the scalar at
    /// `t`, `a_new` at `t + Δt`.
    fn advance(&self, gs: &GridState, feedback: &dyn Fn(&GridState) -> C64, src: Option<(&SourceProfile, C64, C64)>) -> Result<GridState> {
        let m = self.m;
        let (sa, sb) = (self.sq_a(), self.sq_b());
        let h = 0.5 * self.dt;
        let mut xp = vec![ZERO; m + 1];
        let mut xm = vec![ZERO; m + 1];
        xp[..m].copy_from_slice(&gs.xi_plus[1..]);
        xm[1..].copy_from_slice(&gs.xi_minus[..m]);
        let mut w3_src = ZERO;
        if let Some((s, a0, a1)) = src {
            for j in 0..m {
                xp[j] += (s.plus[j + 1] * a0 + s.plus[j] * a1) * h;
                xm[j + 1] += (s.minus[j] * a0 + s.minus[j + 1] * a1) * h;
            }
            w3_src = s.w3 * (a0 + a1) * h;
        }
        // ẇ3 = k (ξ₊(0) − √β w3), k = γ/√α
        let k = self.plant.gamma() / sa;
        let w3 = (gs.w3 + (gs.xi_plus[0] - gs.w3 * sb + xp[0]) * (h * k) + w3_src) / (1.0 + h * k * sb);
        xm[0] = w3 * (2.0 * sb) - xp[0];
        let t = gs.t + self.dt;
        // ξ₊(1) = q solves w2(1) = u(state(q)).
        let xm_end = xm[m];
        let residual = |q: C64, base: &mut GridState| {
            base.xi_plus[m] = q;
            feedback(base) - (q - xm_end) / (2.0 * sa)
        };
        let mut trial = GridState { xi_plus: xp, xi_minus: xm, w3, t };
        let f0 = residual(ZERO, &mut trial);
        let f1 = residual(C64::new(1.0, 0.0), &mut trial);
        let slope = f1 - f0;
        if slope.norm().is_nan() || slope.norm() <= 1e-14 || !f0.re.is_finite() || !f0.im.is_finite() {
            return Err(Error::Numerical("boundary condition at z = 1 is singular".into()));
        }
        trial.xi_plus[m] = -f0 / slope;
        Ok(trial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub xi_plus: Vec<C64>,
    pub xi_minus: Vec<C64>,
    pub w3: C64,
    pub t: f64,
}

impl GridState {
    pub fn zero(m: usize) -> Self {
        Self { xi_plus: vec![ZERO; m + 1], xi_minus: vec![ZERO; m + 1], w3: ZERO, t: 0.0 }
    }
}

/// Source profile in characteristic variables.
#[derive(Debug, Clone)]
struct SourceProfile {
    plus: Vec<C64>,
    minus: Vec<C64>,
    w3: C64,
}

impl SourceProfile {
    fn new(grid: &Grid, f: &StateFunction) -> Self {
        let gs = grid.sample(f);
        Self { plus: gs.xi_plus, minus: gs.xi_minus, w3: gs.w3 }
    }
}

/// Trapezoidal modal projection `p_i = ⟨x, φ_i*⟩` on the grid.
#[derive(Debug, Clone)]
pub struct ModalProjector {
    /// Conjugated, weighted adjoint samples per pair.
    a1: Vec<Vec<C64>>,
    a2: Vec<Vec<C64>>,
    a3: Vec<C64>,
}

impl ModalProjector {
    pub fn new(grid: &Grid, pairs: &[EigenPair]) -> Self {
        let weight = |j: usize| if j == 0 || j == grid.m { 0.5 * grid.dz } else { grid.dz };
        let sample = |f: &crate::state::Profile| (0..=grid.m).map(|j| f.eval(grid.z(j)).conj() * weight(j)).collect::<Vec<_>>();
        Self {
            a1: pairs.iter().map(|p| sample(&p.adjoint_eigenfunction.w1)).collect(),
            a2: pairs.iter().map(|p| sample(&p.adjoint_eigenfunction.w2)).collect(),
            a3: pairs.iter().map(|p| p.adjoint_eigenfunction.w3.conj()).collect(),
        }
    }

    pub fn weights(&self, grid: &Grid, gs: &GridState) -> Vec<C64> {
        let w1: Vec<C64> = (0..=grid.m).map(|j| grid.w1(gs, j)).collect();
        let w2: Vec<C64> = (0..=grid.m).map(|j| grid.w2(gs, j)).collect();
        (0..self.a3.len())
            .map(|i| {
                let mut acc = gs.w3 * self.a3[i];
                for j in 0..=grid.m {
                    acc += w1[j] * self.a1[i][j] + w2[j] * self.a2[i][j];
                }
                acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    /// `‖x(t)‖²` (for observer runs: of the estimation error).
    pub energy: Vec<f64>,
    /// `u(t)` (for observer runs: the output error `ŷ − y`).
    pub control: Vec<C64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modal_weights: Option<Vec<Vec<C64>>>,
}

impl SimulationTrace {
    fn push(&mut self, t: f64, energy: f64, u: C64) {
        self.times.push(t);
        self.energy.push(energy);
        self.control.push(u);
    }
}

fn step_count(grid: &Grid, t_end: f64) -> Result<usize> {
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidParameter(format!("final time must be finite and >= 0, got {t_end}")));
    }
    Ok((t_end / grid.dt + 1e-9).floor() as usize)
}

/// `w1(0) = sin(πz)`, `w2 = 0`, `w3 = 0`.
pub fn default_initial_state() -> StateFunction {
    let pi = std::f64::consts::PI;
    let i2 = C64::new(0.0, 2.0);
    let sin = ExpSum::exp(C64::new(1.0, 0.0) / i2, C64::new(0.0, pi)).plus(&ExpSum::exp(C64::new(-1.0, 0.0) / i2, C64::new(0.0, -pi)));
    StateFunction::closed(sin, ExpSum::zero(), ZERO)
}

/// Closed loop with `u = ρ w1(1) + Σ k_i p_i(x)`.
pub fn simulate(grid: &Grid, fb: &FeedbackApproximation, x0: &StateFunction, t_end: f64) -> Result<SimulationTrace> {
    if fb.pairs.len() != fb.gains.len() {
        return Err(Error::Contract(format!("{} gains for {} eigenpairs", fb.gains.len(), fb.pairs.len())));
    }
    let steps = step_count(grid, t_end)?;
    let proj = ModalProjector::new(grid, &fb.pairs);
    let m = grid.m;
    let control = |gs: &GridState| -> (C64, Vec<C64>) {
        let p = proj.weights(grid, gs);
        let s: C64 = p.iter().zip(&fb.gains).map(|(p, k)| p * k).sum();
        (fb.rho * grid.w1(gs, m) + s, p)
    };
    let mut gs = grid.sample(x0);
    let mut trace = SimulationTrace { modal_weights: Some(Vec::with_capacity(steps + 1)), ..Default::default() };
    let record = |trace: &mut SimulationTrace, gs: &GridState| {
        let (u, p) = control(gs);
        trace.push(gs.t, grid.energy(gs), u);
        trace.modal_weights.as_mut().unwrap().push(p);
    };
    record(&mut trace, &gs);
    for _ in 0..steps {
        gs = grid.step(&gs, |s| control(s).0)?;
        record(&mut trace, &gs);
    }
    Ok(trace)
}

/// Open-loop plant (`u ≡ 0`) and a full observer copy integrated side by side.
///
/// The observer boundary is `ŵ2(1) = ρ_o(ŵ1(1) − y)` and the distributed
/// injection is `Σ l_i φ_i^o (ŷ − y)`, so the error `x − x̂` follows the
/// observer closed loop. The trace records the error energy.
pub fn simulate_observer(grid: &Grid, obs: &ObserverApproximation, x0: &StateFunction, xhat0: &StateFunction, t_end: f64) -> Result<SimulationTrace> {
    if obs.pairs.len() != obs.l.len() {
        return Err(Error::Contract(format!("{} gains for {} eigenpairs", obs.l.len(), obs.pairs.len())));
    }
    let steps = step_count(grid, t_end)?;
    let m = grid.m;
    let mut injection = StateFunction::zero();
    for (pair, l) in obs.pairs.iter().zip(&obs.l) {
        injection = injection.try_add(&pair.eigenfunction.scale(*l))?;
    }
    let src = SourceProfile::new(grid, &injection);
    let rho = obs.rho_o;
    let err_energy = |x: &GridState, xh: &GridState| {
        let e = GridState {
            xi_plus: x.xi_plus.iter().zip(&xh.xi_plus).map(|(a, b)| a - b).collect(),
            xi_minus: x.xi_minus.iter().zip(&xh.xi_minus).map(|(a, b)| a - b).collect(),
            w3: x.w3 - xh.w3,
            t: x.t,
        };
        grid.energy(&e)
    };
    let mut x = grid.sample(x0);
    let mut xh = grid.sample(xhat0);
    let mut trace = SimulationTrace::default();
    let out_err = |x: &GridState, xh: &GridState| grid.w1(xh, m) - grid.w1(x, m);
    trace.push(0.0, err_energy(&x, &xh), out_err(&x, &xh));
    for _ in 0..steps {
        let a0 = out_err(&x, &xh);
        let x_new = grid.step(&x, |_| ZERO)?;
        let y_new = grid.w1(&x_new, m);
        let bc = |s: &GridState| rho * (grid.w1(s, m) - y_new);
        let pred = grid.advance(&xh, &bc, Some((&src, a0, a0)))?;
        let a1 = grid.w1(&pred, m) - y_new;
        let corr = grid.advance(&xh, &bc, Some((&src, a0, a1)))?;
        x = x_new;
        xh = corr;
        trace.push(x.t, err_energy(&x, &xh), out_err(&x, &xh));
    }
    Ok(trace)
}

/// Least-squares slope of `½ log energy` over `t ≥ t_start`.
///
/// Samples after the energy first drops below `1e-14` times its value at
/// `t_start` are dropped.
pub fn decay_rate(trace: &SimulationTrace, t_start: f64) -> Result<f64> {
    let first = trace
        .times
        .iter()
        .position(|&t| t >= t_start)
        .ok_or_else(|| Error::Numerical(format!("no samples after t = {t_start}")))?;
    let e0 = trace.energy[first];
    if e0.is_nan() || e0 <= 0.0 {
        return Err(Error::Numerical("zero energy at fit start".into()));
    }
    let floor = e0 * 1e-14;
    let pts: Vec<(f64, f64)> = trace.times[first..]
        .iter()
        .zip(&trace.energy[first..])
        .take_while(|(_, e)| **e > floor)
        .map(|(t, e)| (*t, 0.5 * e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Numerical("fewer than two samples in the fit window".into()));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate fit window".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::Window;
    use crate::feedback::{BasisChoice, ControllerDesign};
    use crate::plant::SpectralSearch;
    use crate::quadrature::GaussLegendre;
    use crate::target::TargetDynamics;

    fn plant() -> PlantParameters {
        PlantParameters::reference()
    }

    fn design() -> ControllerDesign {
        let p = plant();
        ControllerDesign::new(p, TargetDynamics::reference(&p), GaussLegendre::default(), SpectralSearch::default()).unwrap()
    }

    #[test]
    fn rejects_non_unit_cfl() {
        let p = plant();
        assert!(Grid::with_step(p, 100, 0.01 / p.v() * 1.01).is_err());
        assert!(Grid::with_step(p, 100, 0.01 / p.v()).is_ok());
        assert!(Grid::new(p, 1).is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new(plant(), 50).unwrap();
        let mut gs = GridState::zero(50);
        for _ in 0..100 {
            gs = g.step(&gs, |_| ZERO).unwrap();
        }
        assert!(gs.xi_plus.iter().chain(&gs.xi_minus).all(|z| *z == ZERO) && gs.w3 == ZERO);
    }

    #[test]
    fn reconstruction_is_consistent() {
        let g = Grid::new(plant(), 40).unwrap();
        let x = plant().eigenfunction(C64::new(-2.0, 9.0));
        let gs = g.sample(&x);
        for j in [0, 17, 40] {
            assert!((g.w1(&gs, j) - x.w1.eval(g.z(j))).norm() < 1e-13);
            assert!((g.w2(&gs, j) - x.w2.eval(g.z(j))).norm() < 1e-13);
        }
    }

    #[test]
    fn stationary_eigenstate_does_not_drift() {
        let p = plant();
        let g = Grid::new(p, 64).unwrap();
        let x0 = p.eigenfunction(ZERO);
        let start = g.sample(&x0);
        let mut gs = start.clone();
        for _ in 0..1000 {
            gs = g.step(&gs, |_| ZERO).unwrap();
        }
        let drift = gs
            .xi_plus
            .iter()
            .zip(&start.xi_plus)
            .chain(gs.xi_minus.iter().zip(&start.xi_minus))
            .map(|(a, b)| (a - b).norm())
            .fold((gs.w3 - start.w3).norm(), f64::max);
        assert!(drift < 1e-10, "{drift:e}");
    }

    #[test]
    fn marginal_mode_conserves_energy() {
        let d = design().with_zero_kernel();
        let ol = d.open_loop_spectrum(Window::new(-1.0, 60.0).unwrap()).unwrap();
        let w1 = ol.eigenvalues.iter().copied().find(|z| z.im > 1.0).unwrap();
        assert!(w1.re.abs() < 1e-9);
        let g = Grid::new(plant(), 400).unwrap();
        let fb = FeedbackApproximation::new(ZERO, BasisChoice::OpenLoop, vec![], vec![]).unwrap();
        let period = 2.0 * std::f64::consts::PI / w1.im;
        let tr = simulate(&g, &fb, &plant().eigenfunction(w1), period).unwrap();
        let e0 = tr.energy[0];
        let dev = tr.energy.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max);
        assert!(dev < 1e-3, "{dev:e}");
    }

    #[test]
    fn decay_rate_examples() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.01).collect();
        let mk = |f: &dyn Fn(f64) -> f64| SimulationTrace {
            energy: times.iter().map(|t| f(*t)).collect(),
            control: vec![ZERO; times.len()],
            times: times.clone(),
            modal_weights: None,
        };
        assert!((decay_rate(&mk(&|t| (-20.0 * t).exp()), 0.0).unwrap() + 10.0).abs() < 1e-10);
        assert!(decay_rate(&mk(&|_| 3.0), 0.0).unwrap().abs() < 1e-12);
        assert!(decay_rate(&mk(&|_| 0.0), 0.0).is_err());
        // underflow truncation
        let r = decay_rate(&mk(&|t| if t < 1.0 { (-40.0 * t).exp() } else { 0.0 }), 0.0).unwrap();
        assert!((r + 20.0).abs() < 1e-9);
    }

    #[test]
    fn zero_time_gives_single_row() {
        let g = Grid::new(plant(), 20).unwrap();
        let fb = FeedbackApproximation::new(ZERO, BasisChoice::OpenLoop, vec![], vec![]).unwrap();
        let tr = simulate(&g, &fb, &default_initial_state(), 0.0).unwrap();
        assert_eq!(tr.times.len(), 1);
        assert!(simulate(&g, &fb, &default_initial_state(), -1.0).is_err());
    }

    #[test]
    fn default_x0_is_sine() {
        let x = default_initial_state();
        assert!((x.w1.eval(0.5) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(x.w1.eval(0.0).norm() < 1e-15 && x.w3 == ZERO);
    }

    #[test]
    fn reflection_free_boundary_is_dissipative() {
        // u cancels the incoming characteristic: ξ₊(1) = 0.
        let p = plant();
        let g = Grid::new(p, 100).unwrap();
        let rho = -p.beta() * p.tau();
        let mut gs = g.sample(&default_initial_state());
        let mut last = g.physical_energy(&gs);
        for _ in 0..400 {
            gs = g.step(&gs, |s| C64::new(rho, 0.0) * g.w1(s, g.m)).unwrap();
            assert!(gs.xi_plus[g.m].norm() < 1e-14);
            let e = g.physical_energy(&gs);
            assert!(e <= last * (1.0 + 1e-12));
            last = e;
        }
    }

    #[test]
    fn intermediate_loop_decays_at_spectral_rate() {
        let d = design();
        let fb = d.approximation(BasisChoice::Intermediate, 0).unwrap();
        let s = d.intermediate_spectrum(Window::new(-40.0, 200.0).unwrap()).unwrap();
        let g = Grid::new(plant(), 200).unwrap();
        let tr = simulate(&g, &fb, &default_initial_state(), 1.5).unwrap();
        let rate = decay_rate(&tr, 0.3).unwrap();
        let sp = s.max_re().unwrap();
        assert!((rate - sp).abs() < 0.1 * sp.abs(), "{rate} vs {sp}");
    }

    #[test]
    fn modal_projector_matches_quadrature() {
        let d = design();
        let pairs = d.basis(BasisChoice::Intermediate, 3).unwrap();
        let g = Grid::new(plant(), 400).unwrap();
        let x = default_initial_state();
        let pw = ModalProjector::new(&g, &pairs).weights(&g, &g.sample(&x));
        for (pair, p) in pairs.iter().zip(pw) {
            let want = crate::eigen::modal_weight(&x, pair, &GaussLegendre::default()).unwrap();
            assert!((p - want).norm() < 1e-4 * want.norm().max(1e-3), "{p} vs {want}");
        }
    }
}
