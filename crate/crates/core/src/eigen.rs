//! Eigenpairs, windowed spectra and biorthonormalization.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::quadrature::GaussLegendre;
use crate::state::{inner_product, StateFunction};
use crate::{Error, Result, C64};

/// Tolerance for `⟨φ_i, φ_j*⟩ = δ_ij`.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Relative distinctness tolerance for eigenvalues.
pub const DISTINCT_TOL: f64 = 1e-9;

/// `{λ : Re λ ≥ re_min, |Im λ| ≤ im_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < 0.0 && im_max > 0.0) || !re_min.is_finite() || !im_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window needs re_min < 0 < im_max, got re_min={re_min}, im_max={im_max}"
            )));
        }
        Ok(Self { re_min, im_max })
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.im.abs() <= self.im_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectrumLabel {
    OpenLoop,
    Intermediate,
    Desired,
    ClosedLoop,
    ObserverIntermediate,
    ObserverDesired,
    ObserverClosedLoop,
}

impl SpectrumLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumLabel::OpenLoop => "open_loop",
            SpectrumLabel::Intermediate => "intermediate",
            SpectrumLabel::Desired => "desired",
            SpectrumLabel::ClosedLoop => "closed_loop",
            SpectrumLabel::ObserverIntermediate => "observer_intermediate",
            SpectrumLabel::ObserverDesired => "observer_desired",
            SpectrumLabel::ObserverClosedLoop => "observer_closed_loop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        Some(match norm.as_str() {
            "openloop" => SpectrumLabel::OpenLoop,
            "intermediate" => SpectrumLabel::Intermediate,
            "desired" => SpectrumLabel::Desired,
            "closedloop" => SpectrumLabel::ClosedLoop,
            "observerintermediate" => SpectrumLabel::ObserverIntermediate,
            "observerdesired" => SpectrumLabel::ObserverDesired,
            "observerclosedloop" => SpectrumLabel::ObserverClosedLoop,
            _ => return None,
        })
    }
}

impl fmt::Display for SpectrumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Known continuation of a spectrum beyond any window: the vertical chain
/// `re + j(offset + k·spacing)`, `k ∈ ℤ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub re: f64,
    pub offset: f64,
    pub spacing: f64,
}

impl Lattice {
    pub fn point(&self, k: i64) -> C64 {
        C64::new(self.re, self.offset + k as f64 * self.spacing)
    }

    /// Lattice indices whose points have `|Im| <= im_max`.
    pub fn index_range(&self, im_max: f64) -> (i64, i64) {
        let lo = ((-im_max - self.offset) / self.spacing).ceil() as i64;
        let hi = ((im_max - self.offset) / self.spacing).floor() as i64;
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub label: SpectrumLabel,
    pub eigenvalues: Vec<C64>,
    pub window: Window,
    /// Closed-form continuation outside the window, when known.
    pub lattice: Option<Lattice>,
}

impl Spectrum {
    /// Builds a spectrum restricted to `window` in `(Re, Im)` order.
    pub fn new(label: SpectrumLabel, eigenvalues: Vec<C64>, window: Window) -> Self {
        let mut eigenvalues: Vec<C64> =
            eigenvalues.into_iter().filter(|z| window.contains(*z)).collect();
        symmetrize_conjugates(&mut eigenvalues);
        sort_re_im(&mut eigenvalues);
        Self {
            label,
            eigenvalues,
            window,
            lattice: None,
        }
    }

    pub fn with_lattice(mut self, lattice: Lattice) -> Self {
        self.lattice = Some(lattice);
        self
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_re(&self) -> Option<f64> {
        self.eigenvalues.iter().map(|z| z.re).reduce(f64::max)
    }

    /// Relabels and re-windows.
    pub fn restricted(&self, label: SpectrumLabel, window: Window) -> Self {
        let mut s = Spectrum::new(label, self.eigenvalues.clone(), window);
        s.lattice = self.lattice;
        s
    }

    /// Checks pairwise distinctness at the crate tolerance.
    pub fn check_simple(&self) -> Result<()> {
        check_distinct(&self.eigenvalues, DISTINCT_TOL)
    }
}

/// Deterministic output order: ascending real part, then imaginary part.
/// Real parts within `1e-9` relative count as equal, so conjugate partners
/// stay adjacent with the negative imaginary part first.
pub fn sort_re_im(v: &mut [C64]) {
    v.sort_by(|a, b| {
        let scale = a.norm().max(b.norm()).max(1.0);
        let re = if (a.re - b.re).abs() <= 1e-9 * scale {
            Ordering::Equal
        } else {
            a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal)
        };
        re.then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
    });
}

/// Snaps numerically real values onto the axis and makes numerically
/// conjugate pairs exactly conjugate (the upper member is kept).
pub fn symmetrize_conjugates(v: &mut [C64]) {
    const TOL: f64 = 1e-7;
    for z in v.iter_mut() {
        if z.im.abs() <= 1e-12 * z.norm().max(1.0) {
            z.im = 0.0;
        }
    }
    let mut used = vec![false; v.len()];
    for i in 0..v.len() {
        if v[i].im <= 0.0 {
            continue;
        }
        let target = v[i].conj();
        let scale = target.norm().max(1.0);
        let partner = (0..v.len())
            .filter(|&j| !used[j] && v[j].im < 0.0)
            .map(|j| (j, (v[j] - target).norm()))
            .filter(|(_, d)| *d <= TOL * scale)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal));
        if let Some((j, _)) = partner {
            used[j] = true;
            v[j] = target;
        }
    }
}

/// Modal order used for truncation: ascending modulus, conjugate partners
/// adjacent with the positive imaginary part first.
pub fn modal_order(a: &C64, b: &C64) -> Ordering {
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() <= 1e-9 * ma.max(mb).max(1.0) {
        b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal)
    } else {
        ma.partial_cmp(&mb).unwrap_or(Ordering::Equal)
    }
}

pub fn sort_modal(v: &mut [C64]) {
    v.sort_by(modal_order);
}

pub fn check_distinct(v: &[C64], rel_tol: f64) -> Result<()> {
    for (i, a) in v.iter().enumerate() {
        for b in &v[i + 1..] {
            let d = (a - b).norm();
            if d <= rel_tol * a.norm().max(b.norm()).max(1.0) {
                return Err(Error::Simplicity {
                    a: *a,
                    b: *b,
                    distance: d,
                });
            }
        }
    }
    Ok(())
}

/// An eigenvalue with its eigenfunction and adjoint eigenfunction.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: C64,
    pub eigenfunction: StateFunction,
    pub adjoint_eigenfunction: StateFunction,
    pub normalized: bool,
}

impl EigenPair {
    pub fn new(lambda: C64, eigenfunction: StateFunction, adjoint: StateFunction) -> Self {
        Self {
            lambda,
            eigenfunction,
            adjoint_eigenfunction: adjoint,
            normalized: false,
        }
    }
}

/// Rescales each adjoint eigenfunction so that `⟨φ_i, φ_i*⟩ = 1`.
///
/// Eigenfunctions keep their flat-output scaling.
pub fn biorthonormalize(pairs: Vec<EigenPair>, quad: &GaussLegendre) -> Result<Vec<EigenPair>> {
    pairs
        .into_iter()
        .map(|mut p| {
            let raw = inner_product(&p.eigenfunction, &p.adjoint_eigenfunction, quad)?;
            if raw.norm() < NORMALIZATION_TOL {
                return Err(Error::Degenerate {
                    lambda: p.lambda,
                    magnitude: raw.norm(),
                });
            }
            // ⟨φ, cψ⟩ = c̄⟨φ, ψ⟩, so c = 1/conj(raw).
            p.adjoint_eigenfunction = p.adjoint_eigenfunction.scale(raw.conj().inv());
            p.normalized = true;
            Ok(p)
        })
        .collect()
}

/// `p_i = ⟨x, φ_i*⟩`.
pub fn modal_weight(x: &StateFunction, pair: &EigenPair, quad: &GaussLegendre) -> Result<C64> {
    if !pair.normalized {
        return Err(Error::Contract(format!(
            "eigenpair at {} is not normalized",
            pair.lambda
        )));
    }
    inner_product(x, &pair.adjoint_eigenfunction, quad)
}

/// `G_ij = ⟨φ_i, φ_j*⟩`.
pub fn gram_matrix(pairs: &[EigenPair], quad: &GaussLegendre) -> Result<Vec<Vec<C64>>> {
    pairs
        .iter()
        .map(|a| {
            pairs
                .iter()
                .map(|b| inner_product(&a.eigenfunction, &b.adjoint_eigenfunction, quad))
                .collect()
        })
        .collect()
}

/// Largest entrywise deviation of the Gram matrix from the identity.
pub fn biorthonormality_defect(pairs: &[EigenPair], quad: &GaussLegendre) -> Result<f64> {
    let g = gram_matrix(pairs, quad)?;
    let mut worst: f64 = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::ExpSum;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar_state(v: C64) -> StateFunction {
        StateFunction::closed(ExpSum::zero(), ExpSum::zero(), v)
    }

    #[test]
    fn window_invariant() {
        assert!(Window::new(-1.0, 10.0).is_ok());
        assert!(Window::new(0.0, 10.0).is_err());
        assert!(Window::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn scaling_to_unit_product() {
        let pair = EigenPair::new(c(0.0, 0.0), scalar_state(c(1.0, 0.0)), scalar_state(c(2.0, 0.0)));
        let q = GaussLegendre::default();
        let out = biorthonormalize(vec![pair], &q).unwrap();
        let p = inner_product(&out[0].eigenfunction, &out[0].adjoint_eigenfunction, &q).unwrap();
        assert!((p - c(1.0, 0.0)).norm() < 1e-15);
        assert!(out[0].normalized);
        // complex raw product
        let pair = EigenPair::new(c(0.0, 0.0), scalar_state(c(1.0, 1.0)), scalar_state(c(0.5, -2.0)));
        let out = biorthonormalize(vec![pair], &q).unwrap();
        let p = inner_product(&out[0].eigenfunction, &out[0].adjoint_eigenfunction, &q).unwrap();
        assert!((p - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn empty_and_degenerate() {
        let q = GaussLegendre::default();
        assert!(biorthonormalize(vec![], &q).unwrap().is_empty());
        let pair = EigenPair::new(c(1.0, 0.0), scalar_state(c(1.0, 0.0)), scalar_state(c(0.0, 0.0)));
        assert!(matches!(biorthonormalize(vec![pair], &q), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn modal_weight_requires_normalization() {
        let q = GaussLegendre::default();
        let pair = EigenPair::new(c(0.0, 0.0), scalar_state(c(1.0, 0.0)), scalar_state(c(1.0, 0.0)));
        assert!(modal_weight(&scalar_state(c(1.0, 0.0)), &pair, &q).is_err());
    }

    #[test]
    fn spectrum_is_windowed_and_sorted() {
        let w = Window::new(-5.0, 10.0).unwrap();
        let s = Spectrum::new(
            SpectrumLabel::Desired,
            vec![c(-1.0, 3.0), c(-6.0, 0.0), c(-1.0, -3.0), c(-2.0, 20.0), c(-3.0, 0.0)],
            w,
        );
        assert_eq!(s.eigenvalues, vec![c(-3.0, 0.0), c(-1.0, -3.0), c(-1.0, 3.0)]);
        assert_eq!(s.max_re(), Some(-1.0));
    }

    #[test]
    fn modal_order_pairs_conjugates() {
        let mut v = vec![c(-1.0, -5.0), c(-7.0, 0.0), c(-1.0, 5.0), c(0.0, 1.0)];
        sort_modal(&mut v);
        assert_eq!(v, vec![c(0.0, 1.0), c(-1.0, 5.0), c(-1.0, -5.0), c(-7.0, 0.0)]);
    }

    #[test]
    fn distinctness() {
        assert!(check_distinct(&[c(-1.0, 0.0), c(-1.0, 0.0)], DISTINCT_TOL).is_err());
        assert!(check_distinct(&[c(-1.0, 0.0), c(-1.0, 1e-3)], DISTINCT_TOL).is_ok());
    }

    #[test]
    fn lattice_indices() {
        let l = Lattice {
            re: -10.0,
            offset: 5.0,
            spacing: 10.0,
        };
        assert_eq!(l.index_range(26.0), (-3, 2));
        assert_eq!(l.point(-3), c(-10.0, -25.0));
    }

    #[test]
    fn label_roundtrip() {
        for l in [
            SpectrumLabel::OpenLoop,
            SpectrumLabel::Intermediate,
            SpectrumLabel::Desired,
            SpectrumLabel::ClosedLoop,
            SpectrumLabel::ObserverIntermediate,
            SpectrumLabel::ObserverDesired,
            SpectrumLabel::ObserverClosedLoop,
        ] {
            assert_eq!(SpectrumLabel::parse(l.as_str()), Some(l));
        }
        assert_eq!(SpectrumLabel::parse("ClosedLoop"), Some(SpectrumLabel::ClosedLoop));
        assert_eq!(SpectrumLabel::parse("bogus"), None);
    }
}
