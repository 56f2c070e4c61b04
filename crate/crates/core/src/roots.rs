//! Root isolation for analytic functions on rectangles.
//!
//! Zeros are counted with the argument principle (winding number of `f`
//! along the rectangle boundary, tracked by adaptive phase continuation),
//! rectangles are bisected until each holds exactly one zero, and Newton's
//! method polishes each zero inside its cell.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

/// A function analytic on the search region.
pub trait Analytic: Sync {
    fn value(&self, z: C64) -> C64;

    /// Derivative; defaults to a fourth-order central difference.
    fn derivative(&self, z: C64) -> C64 {
        let h = 1e-4 * z.norm().max(1.0);
        let h = C64::new(h, 0.0);
        (self.value(z - h * 2.0) - self.value(z + h * 2.0) + (self.value(z + h) - self.value(z - h)) * 8.0)
            / (h * 12.0)
    }
}

/// Adapter for closures.
pub struct FnAnalytic<F>(pub F);

impl<F: Fn(C64) -> C64 + Sync> Analytic for FnAnalytic<F> {
    fn value(&self, z: C64) -> C64 {
        (self.0)(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rect {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Self {
        Self { re0, re1, im0, im1 }
    }

    fn width(&self) -> f64 {
        self.re1 - self.re0
    }

    fn height(&self) -> f64 {
        self.im1 - self.im0
    }

    fn center(&self) -> C64 {
        C64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    fn contains(&self, z: C64) -> bool {
        z.re >= self.re0 && z.re <= self.re1 && z.im >= self.im0 && z.im <= self.im1
    }

    fn grown(&self, frac: f64) -> Self {
        let dw = frac * self.width();
        let dh = frac * self.height();
        Self::new(self.re0 - dw, self.re1 + dw, self.im0 - dh, self.im1 + dh)
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re0, self.im0),
            C64::new(self.re1, self.im0),
            C64::new(self.re1, self.im1),
            C64::new(self.re0, self.im1),
        ]
    }

    fn split(&self, frac: f64) -> (Self, Self) {
        if self.width() >= self.height() {
            let m = self.re0 + frac * self.width();
            (
                Self::new(self.re0, m, self.im0, self.im1),
                Self::new(m, self.re1, self.im0, self.im1),
            )
        } else {
            let m = self.im0 + frac * self.height();
            (
                Self::new(self.re0, self.re1, self.im0, m),
                Self::new(self.re0, self.re1, m, self.im1),
            )
        }
    }
}

#[derive(Debug, Clone)]
pub struct RootSearch {
    /// Roots closer than `cluster_tol·max(1,|z|)` are a simplicity violation.
    pub cluster_tol: f64,
    /// Re-tries with a jittered contour when a zero sits on it.
    pub retries: usize,
    /// Initial samples per edge.
    pub edge_samples: usize,
    /// Maximum bisection depth for one edge segment.
    pub max_segment_depth: usize,
}

impl Default for RootSearch {
    fn default() -> Self {
        Self {
            cluster_tol: 1e-6,
            retries: 5,
            edge_samples: 24,
            max_segment_depth: 40,
        }
    }
}

/// Marker error used internally when a contour passes (too) close to a zero.
struct OnContour;

impl RootSearch {
    /// Number of zeros of `f` inside `rect`, counted with multiplicity.
    pub fn count<F: Analytic + ?Sized>(&self, f: &F, rect: &Rect) -> Result<usize> {
        self.winding(f, rect)
            .map_err(|_| Error::RootOnContour { retries: 0 })
    }

    fn winding<F: Analytic + ?Sized>(&self, f: &F, rect: &Rect) -> std::result::Result<usize, OnContour> {
        let c = rect.corners();
        let mut total = 0.0;
        for k in 0..4 {
            total += self.edge_phase(f, c[k], c[(k + 1) % 4])?;
        }
        let w = total / (2.0 * PI);
        let n = w.round();
        if (w - n).abs() > 0.1 || n < 0.0 {
            return Err(OnContour);
        }
        Ok(n as usize)
    }

    fn edge_phase<F: Analytic + ?Sized>(&self, f: &F, a: C64, b: C64) -> std::result::Result<f64, OnContour> {
        let n = self.edge_samples;
        let mut total = 0.0;
        let mut za = a;
        let mut fa = f.value(a);
        check_finite(fa)?;
        for k in 1..=n {
            let zb = a + (b - a) * (k as f64 / n as f64);
            let fb = f.value(zb);
            check_finite(fb)?;
            total += self.segment_phase(f, za, fa, zb, fb, 0)?;
            za = zb;
            fa = fb;
        }
        Ok(total)
    }

    fn segment_phase<F: Analytic + ?Sized>(
        &self,
        f: &F,
        za: C64,
        fa: C64,
        zb: C64,
        fb: C64,
        depth: usize,
    ) -> std::result::Result<f64, OnContour> {
        if depth > self.max_segment_depth {
            return Err(OnContour);
        }
        let zm = (za + zb) * 0.5;
        let fm = f.value(zm);
        check_finite(fm)?;
        let d1 = (fm / fa).arg();
        let d2 = (fb / fm).arg();
        if d1.abs() < PI / 4.0 && d2.abs() < PI / 4.0 {
            return Ok(d1 + d2);
        }
        Ok(self.segment_phase(f, za, fa, zm, fm, depth + 1)?
            + self.segment_phase(f, zm, fm, zb, fb, depth + 1)?)
    }

    /// All zeros inside `rect`, refined by Newton's method.
    ///
    /// A zero on the outer contour triggers a small outward jitter of the
    /// rectangle; the returned roots are those inside the rectangle that was
    /// finally searched.
    pub fn find<F: Analytic + ?Sized>(&self, f: &F, rect: Rect) -> Result<Vec<C64>> {
        for attempt in 0..=self.retries {
            let r = if attempt == 0 {
                rect
            } else {
                rect.grown(1.7e-4 * attempt as f64)
            };
            let count = match self.winding(f, &r) {
                Ok(c) => c,
                Err(OnContour) => continue,
            };
            let mut roots = Vec::with_capacity(count);
            self.isolate(f, r, count, 0, &mut roots)?;
            if roots.len() != count {
                return Err(Error::IncompleteSearch {
                    counted: count,
                    found: roots.len(),
                });
            }
            for (i, a) in roots.iter().enumerate() {
                for b in &roots[i + 1..] {
                    let d = (a - b).norm();
                    if d < self.cluster_tol * a.norm().max(1.0) {
                        return Err(Error::Simplicity {
                            a: *a,
                            b: *b,
                            distance: d,
                        });
                    }
                }
            }
            return Ok(roots);
        }
        Err(Error::RootOnContour {
            retries: self.retries,
        })
    }

    fn isolate<F: Analytic + ?Sized>(
        &self,
        f: &F,
        rect: Rect,
        count: usize,
        depth: usize,
        out: &mut Vec<C64>,
    ) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let size = rect.width().max(rect.height());
        let scale = rect.center().norm().max(1.0);
        if count == 1 {
            if let Some(z) = newton_in(f, rect) {
                out.push(z);
                return Ok(());
            }
        } else if size < self.cluster_tol * scale {
            let c = rect.center();
            return Err(Error::Simplicity {
                a: c,
                b: c,
                distance: size,
            });
        }
        if depth > 200 || size < 1e-13 * scale {
            return Err(Error::Numerical(format!(
                "root isolation stalled near {}",
                rect.center()
            )));
        }
        // Split with a slightly off-centre cut; move the cut if it hits a zero.
        for attempt in 0..=self.retries {
            let frac = 0.5 + 0.0371 * attempt as f64 * if attempt % 2 == 0 { 1.0 } else { -1.0 };
            let (a, b) = rect.split(frac);
            let ca = match self.winding(f, &a) {
                Ok(c) => c,
                Err(OnContour) => continue,
            };
            let cb = match self.winding(f, &b) {
                Ok(c) => c,
                Err(OnContour) => continue,
            };
            if ca + cb != count {
                // inconsistent phase tracking; try a different cut
                continue;
            }
            self.isolate(f, a, ca, depth + 1, out)?;
            self.isolate(f, b, cb, depth + 1, out)?;
            return Ok(());
        }
        Err(Error::RootOnContour {
            retries: self.retries,
        })
    }
}

fn check_finite(v: C64) -> std::result::Result<(), OnContour> {
    if v.re.is_finite() && v.im.is_finite() && v.norm() > 0.0 {
        Ok(())
    } else {
        Err(OnContour)
    }
}

/// Newton iteration from the cell centre; accepts only a limit inside `rect`.
fn newton_in<F: Analytic + ?Sized>(f: &F, rect: Rect) -> Option<C64> {
    let mut z = rect.center();
    let guard = rect.grown(0.25);
    for _ in 0..60 {
        let d = f.derivative(z);
        if d.norm() == 0.0 || !d.re.is_finite() {
            return None;
        }
        let step = f.value(z) / d;
        z -= step;
        if !guard.contains(z) {
            return None;
        }
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    // one more polish step
    let d = f.derivative(z);
    if d.norm() > 0.0 {
        let step = f.value(z) / d;
        if step.norm() < 1e-10 * z.norm().max(1.0) {
            z -= step;
        }
    }
    rect.contains(z).then_some(z)
}

/// Newton polish from a given start; returns `None` if it does not settle.
pub fn newton<F: Analytic + ?Sized>(f: &F, start: C64, max_iter: usize) -> Option<C64> {
    let mut z = start;
    for _ in 0..max_iter {
        let d = f.derivative(z);
        if d.norm() == 0.0 {
            return None;
        }
        let step = f.value(z) / d;
        z -= step;
        if step.norm() <= 1e-14 * z.norm().max(1.0) {
            return Some(z);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn polynomial_roots_counted_and_found() {
        let zs = [c(1.0, 2.0), c(-3.0, 0.5), c(0.2, -4.0), c(2.5, 2.5)];
        let f = FnAnalytic(move |z: C64| zs.iter().map(|r| z - r).product::<C64>());
        let s = RootSearch::default();
        let rect = Rect::new(-5.0, 5.0, -5.0, 5.0);
        assert_eq!(s.count(&f, &rect).unwrap(), 4);
        let mut roots = s.find(&f, rect).unwrap();
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        let mut want = zs.to_vec();
        want.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (r, w) in roots.iter().zip(&want) {
            assert!((r - w).norm() < 1e-12, "{r} vs {w}");
        }
    }

    #[test]
    fn sine_roots_on_long_strip() {
        // zeros of sin(z) at kπ; use a strip offset so none sit on edges
        let f = FnAnalytic(|z: C64| z.sin());
        let s = RootSearch::default();
        let roots = s.find(&f, Rect::new(-20.1, 30.3, -1.0, 1.3)).unwrap();
        assert_eq!(roots.len(), 16);
        for r in roots {
            let k = (r.re / PI).round();
            assert!((r - c(k * PI, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn root_on_edge_is_handled_by_jitter() {
        let f = FnAnalytic(|z: C64| z - c(1.0, 0.0));
        let s = RootSearch::default();
        let roots = s.find(&f, Rect::new(-1.0, 1.0, -1.0, 1.0)).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn double_root_is_a_simplicity_violation() {
        let f = FnAnalytic(|z: C64| (z - c(0.3, 0.1)) * (z - c(0.3, 0.1)));
        let s = RootSearch::default();
        assert!(matches!(
            s.find(&f, Rect::new(-1.0, 1.0, -1.0, 1.0)),
            Err(Error::Simplicity { .. })
        ));
    }

    #[test]
    fn no_roots() {
        let f = FnAnalytic(|z: C64| z.exp());
        let s = RootSearch::default();
        assert!(s.find(&f, Rect::new(-3.0, 3.0, -30.0, 30.0)).unwrap().is_empty());
    }
}
