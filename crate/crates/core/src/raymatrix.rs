//! Paraxial 2×2 ray-transfer matrices.
//!
//! Lengths are millimetres throughout, so `b` carries mm and `c` carries mm⁻¹.
//! A ray is the column vector `(height, angle)`; an element acting after
//! another multiplies from the left.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real 2×2 paraxial transfer matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayMatrix {
    pub const IDENTITY: RayMatrix = RayMatrix { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        RayMatrix { a, b, c, d }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Half the trace; the resonator stability parameter when `self` is a
    /// round trip.
    pub fn half_trace(&self) -> f64 {
        0.5 * (self.a + self.d)
    }

    /// Inverse assuming unit determinant.
    pub fn unimodular_inverse(&self) -> RayMatrix {
        RayMatrix::new(self.d, -self.b, -self.c, self.a)
    }

    /// The matrix of the same element chain traversed in the opposite
    /// direction (valid for unit-determinant chains of lenses and drifts).
    pub fn reversed(&self) -> RayMatrix {
        RayMatrix::new(self.d, self.b, self.c, self.a)
    }

    pub fn scale(&self, k: f64) -> RayMatrix {
        RayMatrix::new(k * self.a, k * self.b, k * self.c, k * self.d)
    }

    /// Largest elementwise difference.
    pub fn max_abs_diff(&self, other: &RayMatrix) -> f64 {
        [(self.a - other.a).abs(), (self.b - other.b).abs(), (self.c - other.c).abs(), (self.d - other.d).abs()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Elementwise comparison relative to the larger matrix scale.
    pub fn approx_eq(&self, other: &RayMatrix, rel: f64) -> bool {
        let scale = self.max_abs().max(other.max_abs()).max(1.0);
        self.max_abs_diff(other) <= rel * scale
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

impl Default for RayMatrix {
    fn default() -> Self {
        RayMatrix::IDENTITY
    }
}

impl Mul for RayMatrix {
    type Output = RayMatrix;

    fn mul(self, rhs: RayMatrix) -> RayMatrix {
        RayMatrix {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

impl fmt::Display for RayMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Free-space drift over `d` mm.
pub fn translation(d: f64) -> RayMatrix {
    RayMatrix::new(1.0, d, 0.0, 1.0)
}

/// Thin lens of focal length `f` mm.
pub fn thin_lens(f: f64) -> Result<RayMatrix> {
    if f == 0.0 || !f.is_finite() {
        return Err(Error::invalid("f", format!("focal length must be finite and nonzero, got {f}")));
    }
    Ok(thin_lens_unchecked(f))
}

#[inline]
pub(crate) fn thin_lens_unchecked(f: f64) -> RayMatrix {
    RayMatrix::new(1.0, 0.0, -1.0 / f, 1.0)
}

/// Flat mirror at normal incidence.
pub fn plane_mirror() -> RayMatrix {
    RayMatrix::IDENTITY
}

/// Pupil-to-pupil matrix of a lens–mirror retroreflector: lens of focal
/// length `f`, mirror `d` behind it, reference planes one focal length in
/// front of the lens.
///
/// Equivalent to an inverting retroreflector combined with a lens of focal
/// length `f²/(d − f)`. At `d == f` the result is exactly `−I`.
pub fn retroreflector(f: f64, d: f64) -> Result<RayMatrix> {
    if f == 0.0 || !f.is_finite() {
        return Err(Error::invalid("f", format!("focal length must be finite and nonzero, got {f}")));
    }
    if d == f {
        return Ok(RayMatrix::IDENTITY.scale(-1.0));
    }
    Ok(RayMatrix::new(-1.0, 0.0, 2.0 * (d - f) / (f * f), -1.0))
}

/// Equivalent focal length `f²/(d − f)` of a focusing retroreflector, or
/// `None` in the non-focusing case `d == f`.
pub fn retroreflector_equivalent_focal(f: f64, d: f64) -> Option<f64> {
    if d == f {
        None
    } else {
        Some(f * f / (d - f))
    }
}

/// Pupil-to-pupil matrix of a two-lens telescope (`f3` first, `f4` second,
/// lens spacing `dt`):
/// `[[−M, 0], [−(f3 + f4 − dt)/(f3·f4), −1/M]]` with `M = f4/f3`.
pub fn telescope(f3: f64, f4: f64, dt: f64) -> Result<RayMatrix> {
    if f3 == 0.0 || !f3.is_finite() {
        return Err(Error::invalid("f3", format!("focal length must be finite and nonzero, got {f3}")));
    }
    if f4 == 0.0 || !f4.is_finite() {
        return Err(Error::invalid("f4", format!("focal length must be finite and nonzero, got {f4}")));
    }
    let mag = f4 / f3;
    Ok(RayMatrix::new(-mag, 0.0, -(f3 + f4 - dt) / (f3 * f4), -1.0 / mag))
}

/// Composes elements given in beam-propagation order (first element
/// traversed first); the product is formed right to left.
pub fn compose(matrices: &[RayMatrix]) -> Result<RayMatrix> {
    if matrices.is_empty() {
        return Err(Error::invalid("matrices", "cannot compose an empty element list"));
    }
    Ok(compose_iter(matrices.iter().copied()))
}

/// Same as [`compose`] for an iterator; an empty iterator yields identity.
pub fn compose_iter<I: IntoIterator<Item = RayMatrix>>(elements: I) -> RayMatrix {
    elements.into_iter().fold(RayMatrix::IDENTITY, |acc, m| m * acc)
}
