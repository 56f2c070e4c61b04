//! Gap distances, ε-disk families and verification of spectral convergence:
//! every closed-loop eigenvalue inside some disk, one per disk.

use serde::{Deserialize, Serialize};

use crate::eigen::{Spectrum, Window, DISTINCT_TOL};
use crate::target::{lattice_tail, b_sup, resolvent_sum, sample_points};
use crate::{Error, Result, C64};

/// Sampling densities for the bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    /// Points on each disk boundary.
    pub disk_points: usize,
    /// Grid points per axis over the window.
    pub grid: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            disk_points: 64,
            grid: 40,
        }
    }
}

/// `d_i = min_{j≠i} |λ_i − λ_j|`, with off-window neighbours synthesized
/// from the spectrum's lattice so window edges do not inflate gaps.
pub fn gap_distances(s: &Spectrum) -> Result<Vec<f64>> {
    let mut others: Vec<C64> = s.eigenvalues.clone();
    if let Some(lat) = &s.lattice {
        let (lo, hi) = lat.index_range(s.window.im_max);
        for k in (lo - 2)..=(hi + 2) {
            let z = lat.point(k);
            if !others.iter().any(|w| (w - z).norm() <= DISTINCT_TOL * z.norm().max(1.0)) {
                others.push(z);
            }
        }
    }
    if others.len() < 2 {
        return Err(Error::GapUndefined(
            "a single eigenvalue without continuation has no gap".into(),
        ));
    }
    s.eigenvalues
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let d = others
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| (a - b).norm())
                .fold(f64::INFINITY, f64::min);
            if d <= DISTINCT_TOL * a.norm().max(1.0) {
                let b = *others
                    .iter()
                    .enumerate()
                    .find(|(j, b)| *j != i && (a - *b).norm() == d)
                    .map(|(_, b)| b)
                    .unwrap_or(a);
                return Err(Error::Simplicity {
                    a: *a,
                    b,
                    distance: d,
                });
            }
            Ok(d)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskFamily {
    pub centers: Vec<C64>,
    pub gaps: Vec<f64>,
    pub epsilon: f64,
    pub radii: Vec<f64>,
}

impl DiskFamily {
    pub fn new(desired: &Spectrum, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let gaps = gap_distances(desired)?;
        Ok(Self {
            centers: desired.eigenvalues.clone(),
            radii: gaps.iter().map(|d| epsilon * d / 3.0).collect(),
            gaps,
            epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Index of the disk containing `z`, if any.
    pub fn locate(&self, z: C64) -> Option<usize> {
        self.centers
            .iter()
            .zip(&self.radii)
            .position(|(c, r)| (z - c).norm() < *r)
    }

    /// Whether disk `i` lies entirely inside `w`.
    pub fn inside(&self, i: usize, w: &Window) -> bool {
        let (c, r) = (self.centers[i], self.radii[i]);
        c.re - r >= w.re_min && c.im.abs() + r <= w.im_max
    }

    /// Largest `(r_i + r_j)/|c_i − c_j|`; below one means pairwise disjoint.
    pub fn overlap_ratio(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = (self.centers[i] - self.centers[j]).norm();
                worst = worst.max((self.radii[i] + self.radii[j]) / d);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n: usize,
    pub contained: bool,
    pub one_per_disk: bool,
    pub unmatched_eigenvalues: Vec<C64>,
    pub max_re_closed_loop: f64,
    pub hausdorff: f64,
    /// Disks whose closure leaves the window; not counted.
    pub excluded_disks: usize,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.contained && self.one_per_disk
    }
}

/// Containment in `⋃ D_i^ε` and one eigenvalue per disk inside `w`.
pub fn verify_theorem_conv(n: usize, closed: &Spectrum, disks: &DiskFamily, w: &Window) -> ConvergenceReport {
    let eig: Vec<C64> = closed.eigenvalues.iter().copied().filter(|z| w.contains(*z)).collect();
    let mut counts = vec![0usize; disks.len()];
    let mut unmatched = Vec::new();
    for z in &eig {
        match disks.locate(*z) {
            Some(i) => counts[i] += 1,
            None => unmatched.push(*z),
        }
    }
    let mut excluded = 0;
    let mut one_per_disk = true;
    for (i, &k) in counts.iter().enumerate() {
        if disks.inside(i, w) {
            one_per_disk &= k == 1;
        } else {
            excluded += 1;
            one_per_disk &= k <= 1;
        }
    }
    let centers: Vec<C64> = disks.centers.iter().copied().filter(|z| w.contains(*z)).collect();
    ConvergenceReport {
        n,
        contained: unmatched.is_empty(),
        one_per_disk,
        unmatched_eigenvalues: unmatched,
        max_re_closed_loop: eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        hausdorff: hausdorff(&eig, &centers),
        excluded_disks: excluded,
    }
}

/// Hausdorff distance between finite point sets; infinite if exactly one is empty.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let directed = |x: &[C64], y: &[C64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// `max_j Σ_{i≠j} |b_i/(λ_j − λ_i)|²` including the lattice tail.
pub fn verify_pairwise_bound(b: &[C64], s: &Spectrum) -> f64 {
    let bs = b_sup(b);
    s.eigenvalues
        .iter()
        .enumerate()
        .map(|(j, lj)| {
            let windowed: f64 = s
                .eigenvalues
                .iter()
                .zip(b)
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, (li, bi))| bi.norm_sqr() / (lj - li).norm_sqr())
                .sum();
            let tail = s
                .lattice
                .as_ref()
                .map_or(0.0, |lat| lattice_tail(lat, &s.window, *lj, bs));
            windowed + tail
        })
        .fold(0.0, f64::max)
}

/// Largest sampled `Σ|b_i/(λ − λ_i)|²` over `λ ∉ D^ε`.
pub fn verify_eps_bound(b: &[C64], s: &Spectrum, eps: f64, sampling: &Sampling) -> Result<f64> {
    let gaps = gap_distances(s)?;
    Ok(sample_points(s, &gaps, eps, sampling)
        .iter()
        .map(|z| resolvent_sum(s, b, *z))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalOrder {
    /// Smallest `n` from which every tested order passes.
    pub suffix: Option<usize>,
    /// Smallest passing `n`.
    pub first_pass: Option<usize>,
    /// A failure sandwiched between passes, if any.
    pub anomaly: Option<usize>,
    pub trail: Vec<(usize, bool)>,
}

/// Evaluates `passes` on each order and reports the suffix and first-pass
/// thresholds.
pub fn minimal_order<I, F>(orders: I, mut passes: F) -> Result<MinimalOrder>
where
    I: IntoIterator<Item = usize>,
    F: FnMut(usize) -> Result<bool>,
{
    let trail = orders
        .into_iter()
        .map(|n| Ok((n, passes(n)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_orders(trail))
}

pub fn summarize_orders(trail: Vec<(usize, bool)>) -> MinimalOrder {
    let first_pass = trail.iter().find(|(_, ok)| *ok).map(|(n, _)| *n);
    let suffix = match trail.iter().rposition(|(_, ok)| !ok) {
        None => trail.first().map(|(n, _)| *n),
        Some(i) => trail.get(i + 1).map(|(n, _)| *n),
    };
    let anomaly = trail.iter().enumerate().find_map(|(i, (n, ok))| {
        let before = trail[..i].iter().any(|(_, p)| *p);
        let after = trail[i + 1..].iter().any(|(_, p)| *p);
        (!ok && before && after).then_some(*n)
    });
    MinimalOrder {
        suffix,
        first_pass,
        anomaly,
        trail,
    }
}
