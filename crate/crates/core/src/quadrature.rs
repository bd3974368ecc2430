//! Rectangles on the screen plane and fixed-grid midpoint quadrature.
//!
//! The midpoint rule is used everywhere a norm, overlap or coverage integral
//! is needed. Grids are given explicitly as cell counts per axis; fields carry
//! a suggested resolution so that callers do not have to guess one.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Axis-aligned rectangle `[x0, x1] × [z0, z1]` in screen coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub z0: T,
    pub z1: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x0: T, x1: T, z0: T, z1: T) -> Self {
        Rect { x0, x1, z0, z1 }
    }

    /// Square of half-width `half` centred on `(cx, cz)`.
    pub fn centered(cx: T, cz: T, half: T) -> Self {
        Rect::new(cx - half, cx + half, cz - half, cz + half)
    }

    pub fn width(&self) -> T {
        self.x1 - self.x0
    }

    pub fn height(&self) -> T {
        self.z1 - self.z0
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    /// Positive, finite extent on both axes.
    pub fn is_proper(&self) -> bool {
        let finite = [self.x0, self.x1, self.z0, self.z1].iter().all(|v| v.is_finite());
        finite && self.x1 > self.x0 && self.z1 > self.z0
    }

    pub fn contains(&self, x: T, z: T) -> bool {
        x >= self.x0 && x <= self.x1 && z >= self.z0 && z <= self.z1
    }

    pub fn contains_rect(&self, other: &Rect<T>) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.z0 >= self.z0 && other.z1 <= self.z1
    }

    pub fn intersect(&self, other: &Rect<T>) -> Option<Rect<T>> {
        let r = Rect::new(
            self.x0.max(other.x0),
            self.x1.min(other.x1),
            self.z0.max(other.z0),
            self.z1.min(other.z1),
        );
        (r.x1 > r.x0 && r.z1 > r.z0).then_some(r)
    }

    pub fn union(&self, other: &Rect<T>) -> Rect<T> {
        Rect::new(
            self.x0.min(other.x0),
            self.x1.max(other.x1),
            self.z0.min(other.z0),
            self.z1.max(other.z1),
        )
    }
}

/// Midpoint rule for `∫_a^b f(x) dx` on `n` equal cells.
pub fn integrate_1d<T: Real>(a: T, b: T, n: usize, f: impl Fn(T) -> T) -> T {
    let n = n.max(1);
    let h = (b - a) / T::lit(n as f64);
    let half = T::lit(0.5);
    let s: T = (0..n).map(|i| f(a + (T::lit(i as f64) + half) * h)).sum();
    s * h
}

/// Cell centres of an `nx × nz` grid over `rect`, and the cell area.
pub fn grid_points<T: Real>(rect: &Rect<T>, nx: usize, nz: usize) -> (Vec<T>, Vec<T>, T) {
    let (nx, nz) = (nx.max(1), nz.max(1));
    let hx = rect.width() / T::lit(nx as f64);
    let hz = rect.height() / T::lit(nz as f64);
    let half = T::lit(0.5);
    let xs = (0..nx).map(|i| rect.x0 + (T::lit(i as f64) + half) * hx).collect();
    let zs = (0..nz).map(|j| rect.z0 + (T::lit(j as f64) + half) * hz).collect();
    (xs, zs, hx * hz)
}

/// Midpoint rule for a real integrand over a rectangle.
pub fn integrate_2d<T: Real>(rect: &Rect<T>, nx: usize, nz: usize, f: impl Fn(T, T) -> T) -> T {
    let (xs, zs, cell) = grid_points(rect, nx, nz);
    // Row sums first keeps the accumulation error at O(sqrt(nx) + sqrt(nz)).
    let total: T = zs.iter().map(|&z| xs.iter().map(|&x| f(x, z)).sum::<T>()).sum();
    total * cell
}

/// Midpoint rule for a complex integrand over a rectangle.
pub fn integrate_2d_complex<T: Real>(
    rect: &Rect<T>,
    nx: usize,
    nz: usize,
    f: impl Fn(T, T) -> Complex<T>,
) -> Complex<T> {
    let (xs, zs, cell) = grid_points(rect, nx, nz);
    let mut total = Complex::new(T::zero(), T::zero());
    for &z in &zs {
        let mut row = Complex::new(T::zero(), T::zero());
        for &x in &xs {
            row = row + f(x, z);
        }
        total = total + row;
    }
    total * cell
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_integrals() {
        let r = Rect::new(0.0f64, 2.0, -1.0, 1.0);
        let v = integrate_2d(&r, 400, 400, |x, z| x * z * z);
        // ∫0^2 x dx · ∫-1^1 z² dz = 2 · 2/3
        assert!((v - 4.0 / 3.0).abs() < 1e-5);
        let one = integrate_1d(0.0, std::f64::consts::PI, 1000, f64::sin);
        assert!((one - 2.0).abs() < 1e-5);
    }

    #[test]
    fn rect_ops() {
        let a = Rect::new(0.0, 2.0, 0.0, 2.0);
        let b = Rect::new(1.0, 3.0, 1.0, 3.0);
        assert_eq!(a.intersect(&b), Some(Rect::new(1.0, 2.0, 1.0, 2.0)));
        assert_eq!(a.intersect(&Rect::new(5.0, 6.0, 0.0, 1.0)), None);
        assert_eq!(a.union(&b), Rect::new(0.0, 3.0, 0.0, 3.0));
        assert!(!Rect::new(0.0, 0.0, 0.0, 1.0).is_proper());
    }
}
