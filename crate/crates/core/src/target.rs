//! Delay-ODE target dynamics
//!
//! ```text
//! Σ κ_i (χ⁽ⁱ⁾(t+τ) + μ χ⁽ⁱ⁾(t−τ)) = 0
//! ```
//!
//! and the checks on its spectrum that the convergence results rely on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::convergence::{gap_distances, Sampling};
use crate::eigen::{check_distinct, Lattice, Spectrum, SpectrumLabel, Window, DISTINCT_TOL};
use crate::linalg::polynomial_roots;
use crate::plant::PlantParameters;
use crate::{Error, Result, C64};

/// Neutral coefficient given literally or as a rate `r` with `μ = e^{rτ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Literal(f64),
    Rate { rate: f64 },
}

impl MuSpec {
    pub fn resolve(&self, tau: f64) -> f64 {
        match *self {
            MuSpec::Literal(m) => m,
            MuSpec::Rate { rate } => (rate * tau).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDynamics {
    kappa: Vec<f64>,
    mu: f64,
    tau: f64,
}

impl TargetDynamics {
    /// `kappa` holds `κ_0, …, κ_N` in ascending order with `κ_N ≠ 0`.
    pub fn new(kappa: Vec<f64>, mu: f64, tau: f64) -> Result<Self> {
        match kappa.last() {
            None => return Err(Error::InvalidParameter("kappa must not be empty".into())),
            Some(&0.0) => {
                return Err(Error::InvalidParameter("leading kappa coefficient is zero".into()))
            }
            _ => {}
        }
        if kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidParameter("kappa must be finite".into()));
        }
        if !(mu > -1.0 && mu < 1.0) || mu == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mu must lie in (-1, 1) without 0, got {mu}"
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { kappa, mu, tau })
    }

    /// Target on the plant's delay with `μ` resolved against its `τ`.
    pub fn for_plant(kappa: Vec<f64>, mu: MuSpec, p: &PlantParameters) -> Result<Self> {
        Self::new(kappa, mu.resolve(p.tau()), p.tau())
    }

    /// `κ_c = 12, μ_c = e^{−20τ}` on the reference plant.
    pub fn reference(p: &PlantParameters) -> Self {
        Self::for_plant(vec![12.0, 1.0], MuSpec::Rate { rate: -20.0 }, p)
            .expect("reference target is valid")
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn theta_minus(&self) -> f64 {
        -self.tau
    }
    pub fn theta_plus(&self) -> f64 {
        self.tau
    }
    /// Length of the integrator chain.
    pub fn order(&self) -> usize {
        self.kappa.len() - 1
    }

    /// `κ_0/κ_1` for a first-order target; the worked plant needs `N = 1`.
    pub fn kappa_first_order(&self) -> Result<f64> {
        if self.order() != 1 {
            return Err(Error::InvalidParameter(format!(
                "the plant's control law needs a first-order target, got N={}",
                self.order()
            )));
        }
        Ok(self.kappa[0] / self.kappa[1])
    }

    pub fn kappa_roots(&self) -> Result<Vec<C64>> {
        polynomial_roots(&self.kappa)
    }

    pub fn is_hurwitz(&self) -> Result<bool> {
        Ok(self.kappa_roots()?.iter().all(|z| z.re < 0.0))
    }

    /// The μ-branch `(ln|μ| + jθ)/(2τ)`, `θ = 2iπ` (μ<0) or `(2i−1)π` (μ>0).
    pub fn lattice(&self) -> Lattice {
        let dtheta = 2.0 * self.tau;
        Lattice {
            re: self.mu.abs().ln() / dtheta,
            offset: if self.mu > 0.0 { -PI / dtheta } else { 0.0 },
            spacing: 2.0 * PI / dtheta,
        }
    }

    /// `(λ^N-poly)(e^{λτ} + μ e^{−λτ})`, vanishing exactly on the desired spectrum.
    pub fn characteristic_value(&self, lambda: C64) -> C64 {
        let poly = self
            .kappa
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &k| acc * lambda + k);
        poly * ((lambda * self.tau).exp() + (-lambda * self.tau).exp() * self.mu)
    }
}

/// Finite part ∪ μ-branch, intersected with `w`.
pub fn desired_spectrum(t: &TargetDynamics, w: Window, label: SpectrumLabel) -> Result<Spectrum> {
    let lat = t.lattice();
    let mut ev: Vec<C64> = t.kappa_roots()?;
    if lat.re >= w.re_min {
        let (lo, hi) = lat.index_range(w.im_max);
        ev.extend((lo..=hi).map(|k| lat.point(k)));
    }
    let s = Spectrum::new(label, ev, w).with_lattice(lat);
    check_distinct(&s.eigenvalues, DISTINCT_TOL)?;
    Ok(s)
}

/// `ρ = βτ(μ−1)/(μ+1)`, the reflection coefficient realizing the neutral part.
pub fn desired_boundary_unbounded_coefficient(t: &TargetDynamics, p: &PlantParameters) -> C64 {
    C64::new(p.beta() * p.tau() * (t.mu() - 1.0) / (t.mu() + 1.0), 0.0)
}

/// Whether `z` is a point of `lat`.
pub fn on_lattice(lat: &Lattice, z: C64) -> bool {
    let k = ((z.im - lat.offset) / lat.spacing).round() as i64;
    (lat.point(k) - z).norm() <= DISTINCT_TOL * z.norm().max(1.0)
}

/// `Σ_{k∈ℤ} 1/|λ − point(k)|²` in closed form.
fn lattice_sum(lat: &Lattice, lambda: C64) -> f64 {
    let h = lat.spacing;
    let x = lambda.re - lat.re;
    let y = lambda.im - lat.offset;
    let a = 2.0 * PI * x.abs() / h;
    if a < 1e-6 {
        let s = (PI * y / h).sin();
        return (PI / h).powi(2) / (s * s);
    }
    if a > 700.0 {
        return PI / (h * x.abs());
    }
    // coth-type closed form of Σ 1/(x² + (y − kh)²)
    PI / (h * x.abs()) * a.sinh() / (a.cosh() - (2.0 * PI * y / h).cos())
}

/// Lattice points represented explicitly in a windowed spectrum.
fn windowed_lattice_points(lat: &Lattice, w: &Window) -> Vec<C64> {
    if lat.re < w.re_min {
        return Vec::new();
    }
    let (lo, hi) = lat.index_range(w.im_max);
    (lo..=hi).map(|k| lat.point(k)).collect()
}

/// `b_sup² · Σ_{off-window k} 1/|λ − point(k)|²`, optionally skipping `λ`
/// itself when it is a lattice point.
pub fn lattice_tail(lat: &Lattice, w: &Window, lambda: C64, b_sup: f64) -> f64 {
    let inside = windowed_lattice_points(lat, w);
    let total = if on_lattice(lat, lambda) {
        // Σ_{k≠0} 1/(kh)²
        PI * PI / (3.0 * lat.spacing * lat.spacing)
    } else {
        lattice_sum(lat, lambda)
    };
    let window_part: f64 = inside
        .iter()
        .filter(|p| (*p - lambda).norm() > DISTINCT_TOL * lambda.norm().max(1.0))
        .map(|p| 1.0 / (lambda - p).norm_sqr())
        .sum();
    b_sup * b_sup * (total - window_part).max(0.0)
}

/// `Σ_i |b_i/(λ − λ_i)|²` over the window plus the analytic lattice tail.
pub fn resolvent_sum(s: &Spectrum, b: &[C64], lambda: C64) -> f64 {
    let windowed: f64 = s
        .eigenvalues
        .iter()
        .zip(b)
        .map(|(l, bi)| bi.norm_sqr() / (lambda - l).norm_sqr())
        .sum();
    windowed + tail(s, b, lambda)
}

fn tail(s: &Spectrum, b: &[C64], lambda: C64) -> f64 {
    match &s.lattice {
        Some(lat) => lattice_tail(lat, &s.window, lambda, b_sup(b)),
        None => 0.0,
    }
}

pub fn b_sup(b: &[C64]) -> f64 {
    b.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub riesz_ok: bool,
    pub discrete_ok: bool,
    pub simple_ok: bool,
    #[serde(rename = "a2_bound_M")]
    pub a2_bound_m: f64,
    pub a2_samples_max: f64,
    pub min_gap: f64,
    pub samples: usize,
    pub details: String,
}

impl AssumptionReport {
    pub fn a2_ok(&self) -> bool {
        self.a2_samples_max <= self.a2_bound_m
    }

    pub fn all_ok(&self) -> bool {
        self.riesz_ok && self.discrete_ok && self.simple_ok && self.a2_ok()
    }
}

/// The constructive bound `M = M_κ + M_μ`.
///
/// `M_κ = Σ_κ b_sup²/(d_i/3)²` over eigenvalues off the lattice and
/// `M_μ = 2 b_sup² (4/d)² π²/6` with `d` the lattice spacing.
pub fn constructive_bound(s: &Spectrum, b: &[C64], gaps: &[f64]) -> f64 {
    let bs = b_sup(b);
    let m_kappa: f64 = s
        .eigenvalues
        .iter()
        .zip(gaps)
        .filter(|(z, _)| s.lattice.is_none_or(|lat| !on_lattice(&lat, **z)))
        .map(|(_, d)| bs * bs / (d / 3.0).powi(2))
        .sum();
    let m_mu = match &s.lattice {
        Some(lat) => 2.0 * bs * bs * (4.0 / lat.spacing).powi(2) * PI * PI / 6.0,
        None => 0.0,
    };
    m_kappa + m_mu
}

/// Evaluation points outside the disks `|λ − λ_i| < scale·d_i/3`: just
/// outside every disk boundary, on the window border and on a grid.
pub fn sample_points(s: &Spectrum, gaps: &[f64], scale: f64, sampling: &Sampling) -> Vec<C64> {
    let w = &s.window;
    let re_max = -w.re_min;
    let mut pts = Vec::new();
    let outside = |z: C64| {
        s.eigenvalues
            .iter()
            .zip(gaps)
            .all(|(c, d)| (z - c).norm() >= scale * d / 3.0)
    };
    for (c, d) in s.eigenvalues.iter().zip(gaps) {
        let r = scale * d / 3.0 * (1.0 + 1e-9);
        for k in 0..sampling.disk_points {
            let th = 2.0 * PI * k as f64 / sampling.disk_points as f64;
            pts.push(c + C64::from_polar(r, th));
        }
    }
    let g = sampling.grid.max(2);
    for i in 0..g {
        for j in 0..g {
            let x = w.re_min + (re_max - w.re_min) * i as f64 / (g - 1) as f64;
            let y = -w.im_max + 2.0 * w.im_max * j as f64 / (g - 1) as f64;
            pts.push(C64::new(x, y));
        }
    }
    for k in 0..g {
        let f = k as f64 / (g - 1) as f64;
        let x = w.re_min + (re_max - w.re_min) * f;
        let y = -w.im_max + 2.0 * w.im_max * f;
        pts.extend([
            C64::new(x, w.im_max),
            C64::new(x, -w.im_max),
            C64::new(w.re_min, y),
            C64::new(re_max, y),
        ]);
    }
    pts.retain(|z| outside(*z));
    pts
}

/// Checks A1 (Riesz basis, discreteness, simplicity) and samples the A2 sum
/// against the constructive bound.
pub fn check_assumption_a2(
    t: &TargetDynamics,
    desired: &Spectrum,
    b: &[C64],
    sampling: &Sampling,
) -> Result<AssumptionReport> {
    if b.len() != desired.len() {
        return Err(Error::Contract(format!(
            "{} input coefficients for {} eigenvalues",
            b.len(),
            desired.len()
        )));
    }
    let simple = check_simplicity_and_gaps(desired);
    let gaps = gap_distances(desired)?;
    if let Some(d) = gaps.iter().copied().find(|d| *d <= 1e-6) {
        return Err(Error::GapUndefined(format!(
            "eigenvalue gap {d:e} collapses inside the window"
        )));
    }
    let m = constructive_bound(desired, b, &gaps);
    let pts = sample_points(desired, &gaps, 1.0, sampling);
    let max = pts
        .iter()
        .map(|z| resolvent_sum(desired, b, *z))
        .fold(0.0, f64::max);
    let riesz_ok = t.mu() != 0.0 && t.mu().abs() < 1.0;
    let discrete_ok = desired.lattice.is_some();
    Ok(AssumptionReport {
        riesz_ok,
        discrete_ok,
        simple_ok: simple.simple,
        a2_bound_m: m,
        a2_samples_max: max,
        min_gap: simple.min_gap,
        samples: pts.len(),
        details: format!(
            "{} eigenvalues, b_sup={:.6e}, {} samples outside D",
            desired.len(),
            b_sup(b),
            pts.len()
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub simple: bool,
    pub min_gap: f64,
}

/// Pairwise distinctness and minimum gap. A singleton reports the window
/// diagonal `√(re_min² + (2·im_max)²)` as its gap.
pub fn check_simplicity_and_gaps(s: &Spectrum) -> SimplicityReport {
    let mut min_gap = f64::INFINITY;
    let mut simple = true;
    for (i, a) in s.eigenvalues.iter().enumerate() {
        for b in &s.eigenvalues[i + 1..] {
            let d = (a - b).norm();
            min_gap = min_gap.min(d);
            if d < 1e-6 * a.norm().max(b.norm()).max(1.0) {
                simple = false;
            }
        }
    }
    if !min_gap.is_finite() {
        min_gap = s.window.re_min.hypot(2.0 * s.window.im_max);
    }
    SimplicityReport { simple, min_gap }
}
