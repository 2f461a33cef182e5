//! Primitive geometry of the extended complex plane and the unit sphere.
//!
//! The plane is identified with the Riemann sphere through stereographic
//! projection from the north pole; the point at infinity is a first-class
//! value so that simple poles of developing maps never raise errors.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("coordinates must be finite, got ({re}, {im})")]
    NonFinite { re: f64, im: f64 },
    #[error("rotation parameters (p, q) must have nonzero finite norm")]
    DegenerateRotation,
    #[error("Möbius map is degenerate: |ad - bc| = {det_mag:e}")]
    DegenerateMobius { det_mag: f64 },
}

/// A validated finite point of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPoint {
    re: f64,
    im: f64,
}

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Result<Self, GeometryError> {
        if !re.is_finite() || !im.is_finite() {
            return Err(GeometryError::NonFinite { re, im });
        }
        Ok(Self { re, im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }
}

impl From<ComplexPoint> for Complex64 {
    fn from(p: ComplexPoint) -> Self {
        Complex64::new(p.re, p.im)
    }
}

/// A point of the extended plane `C ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtPoint {
    Finite(Complex64),
    Infinity,
}

impl ExtPoint {
    pub fn finite(re: f64, im: f64) -> Self {
        ExtPoint::Finite(Complex64::new(re, im))
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, ExtPoint::Infinity)
    }

    /// The antipodal involution `w ↦ -1/conj(w)` on the sphere.
    pub fn antipode(&self) -> ExtPoint {
        match self {
            ExtPoint::Infinity => ExtPoint::Finite(Complex64::new(0.0, 0.0)),
            ExtPoint::Finite(w) if w.norm_sqr() == 0.0 => ExtPoint::Infinity,
            ExtPoint::Finite(w) => ExtPoint::Finite(-1.0 / w.conj()),
        }
    }
}

impl From<Complex64> for ExtPoint {
    fn from(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            ExtPoint::Finite(z)
        } else {
            ExtPoint::Infinity
        }
    }
}

/// A rigid rotation of the sphere, `φ(z) = (pz - conj(q)) / (qz + conj(p))`
/// with `|p|^2 + |q|^2 = 1`.
///
/// Construction renormalizes approximately unitary `(p, q)` instead of
/// rejecting them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereRotation {
    p: Complex64,
    q: Complex64,
}

impl SphereRotation {
    pub fn new(p: Complex64, q: Complex64) -> Result<Self, GeometryError> {
        let n2 = p.norm_sqr() + q.norm_sqr();
        if !n2.is_finite() || n2 < 1e-30 {
            return Err(GeometryError::DegenerateRotation);
        }
        let n = n2.sqrt();
        Ok(Self { p: p / n, q: q / n })
    }

    pub fn identity() -> Self {
        Self {
            p: Complex64::new(1.0, 0.0),
            q: Complex64::new(0.0, 0.0),
        }
    }

    pub fn p(&self) -> Complex64 {
        self.p
    }

    pub fn q(&self) -> Complex64 {
        self.q
    }

    pub fn to_mobius(&self) -> MobiusMap {
        MobiusMap {
            a: self.p,
            b: -self.q.conj(),
            c: self.q,
            d: self.p.conj(),
        }
    }

    /// Group composition: `(self ∘ other)(z) = self(other(z))`.
    pub fn compose(&self, other: &SphereRotation) -> SphereRotation {
        let p = self.p * other.p - self.q.conj() * other.q;
        let q = self.q * other.p + self.p.conj() * other.q;
        // Product of unitary matrices stays unitary up to rounding.
        SphereRotation::new(p, q).expect("composition of rotations is unitary")
    }

    pub fn apply(&self, z: ExtPoint) -> ExtPoint {
        self.to_mobius().apply(z)
    }
}

/// A linear-fractional map `z ↦ (az + b)/(cz + d)` with `ad - bc ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl MobiusMap {
    pub fn new(
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    ) -> Result<Self, GeometryError> {
        let max_mag = [a, b, c, d]
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max);
        let det_mag = (a * d - b * c).norm();
        if !max_mag.is_finite() || det_mag <= 1e-14 * max_mag {
            return Err(GeometryError::DegenerateMobius { det_mag });
        }
        Ok(Self { a, b, c, d })
    }

    pub fn identity() -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    pub fn coefficients(&self) -> (Complex64, Complex64, Complex64, Complex64) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix product, `(self ∘ other)(z) = self(other(z))`.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// The reciprocal map `z ↦ 1/f(z)` (coefficient rows swapped).
    pub fn reciprocal(&self) -> MobiusMap {
        MobiusMap {
            a: self.c,
            b: self.d,
            c: self.a,
            d: self.b,
        }
    }

    pub fn apply(&self, z: ExtPoint) -> ExtPoint {
        match z {
            ExtPoint::Infinity => {
                if self.c.norm_sqr() == 0.0 {
                    ExtPoint::Infinity
                } else {
                    ExtPoint::Finite(self.a / self.c)
                }
            }
            ExtPoint::Finite(z) => {
                let num = self.a * z + self.b;
                let den = self.c * z + self.d;
                if den.norm_sqr() == 0.0 {
                    ExtPoint::Infinity
                } else {
                    ExtPoint::from(num / den)
                }
            }
        }
    }
}

/// An axis-aligned rectangle of the plane, used as a sampling window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn centered_square(half_side: f64) -> Self {
        Self::new(-half_side, half_side, -half_side, half_side)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Geodesic distance on the unit sphere between the stereographic preimages
/// of `w1` and `w2`, in `[0, π]`.
///
/// Uses the chordal form `2 atan(|w1 - w2| / |1 + conj(w2) w1|)`, which is
/// exact for antipodal pairs through `atan2`.
pub fn spherical_distance(w1: ExtPoint, w2: ExtPoint) -> f64 {
    match (w1, w2) {
        (ExtPoint::Infinity, ExtPoint::Infinity) => 0.0,
        (ExtPoint::Finite(w), ExtPoint::Infinity) | (ExtPoint::Infinity, ExtPoint::Finite(w)) => {
            2.0 * f64::atan2(1.0, w.norm())
        }
        (ExtPoint::Finite(a), ExtPoint::Finite(b)) => {
            // Rescale by the larger modulus so that huge finite points do not
            // overflow |1 + conj(b) a|.
            let (a, b) = if a.norm_sqr() <= b.norm_sqr() {
                (a, b)
            } else {
                (b, a)
            };
            let bn = b.norm();
            if bn > 1.0 {
                // divide numerator and denominator by |b|
                let bu = b / bn;
                let num = (a / bn - bu).norm();
                let den = (Complex64::new(1.0 / bn, 0.0) + bu.conj() * a).norm();
                2.0 * f64::atan2(num, den)
            } else {
                let num = (a - b).norm();
                let den = (Complex64::new(1.0, 0.0) + b.conj() * a).norm();
                2.0 * f64::atan2(num, den)
            }
        }
    }
}

/// Inverse stereographic projection from the north pole: `∞ ↦ (0,0,1)` and
/// `0 ↦ (0,0,-1)`.
pub fn stereographic_lift(w: ExtPoint) -> [f64; 3] {
    match w {
        ExtPoint::Infinity => [0.0, 0.0, 1.0],
        ExtPoint::Finite(w) => {
            let n2 = w.norm_sqr();
            if n2 > 1e300 {
                return [0.0, 0.0, 1.0];
            }
            let d = 1.0 + n2;
            [2.0 * w.re / d, 2.0 * w.im / d, (n2 - 1.0) / d]
        }
    }
}

/// Angle between two unit vectors, numerically stable near 0 and π.
pub fn angle_between(u: [f64; 3], v: [f64; 3]) -> f64 {
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let cross_norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    f64::atan2(cross_norm, dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_point_rejects_non_finite() {
        assert!(ComplexPoint::new(f64::NAN, 0.0).is_err());
        assert!(ComplexPoint::new(0.0, f64::INFINITY).is_err());
        assert!(ComplexPoint::new(3.0, 4.0).is_ok());
    }

    #[test]
    fn mobius_identity_fixes_points() {
        let m = MobiusMap::identity();
        let z = ExtPoint::finite(3.0, 4.0);
        assert_eq!(m.apply(z), z);
    }

    #[test]
    fn mobius_inversion() {
        let m = MobiusMap::new(c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        match m.apply(ExtPoint::finite(2.0, 0.0)) {
            ExtPoint::Finite(w) => assert_abs_diff_eq!(w.re, -0.5, epsilon = 1e-15),
            _ => panic!("expected finite"),
        }
        assert!(m.apply(ExtPoint::finite(0.0, 0.0)).is_infinity());
    }

    #[test]
    fn rotation_at_origin() {
        let s = 1.0 / SQRT_2;
        let phi = SphereRotation::new(c(s, 0.0), c(s, 0.0)).unwrap();
        match phi.apply(ExtPoint::finite(0.0, 0.0)) {
            ExtPoint::Finite(w) => {
                assert_abs_diff_eq!(w.re, -1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-14);
            }
            _ => panic!("expected finite"),
        }
    }

    #[test]
    fn rotation_renormalizes() {
        let phi = SphereRotation::new(c(2.0, 0.0), c(0.0, 2.0)).unwrap();
        let n2 = phi.p().norm_sqr() + phi.q().norm_sqr();
        assert_abs_diff_eq!(n2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_mobius_rejected() {
        assert!(MobiusMap::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)).is_err());
    }

    #[test]
    fn spherical_distance_examples() {
        let zero = ExtPoint::finite(0.0, 0.0);
        let one = ExtPoint::finite(1.0, 0.0);
        assert_eq!(spherical_distance(zero, zero), 0.0);
        assert_abs_diff_eq!(spherical_distance(zero, ExtPoint::Infinity), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(spherical_distance(zero, one), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn lift_examples() {
        assert_eq!(stereographic_lift(ExtPoint::finite(0.0, 0.0)), [0.0, 0.0, -1.0]);
        assert_eq!(stereographic_lift(ExtPoint::Infinity), [0.0, 0.0, 1.0]);
        let v = stereographic_lift(ExtPoint::finite(1.0, 0.0));
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.0, epsilon = 1e-15);
    }

    fn random_ext(rng: &mut impl Rng) -> ExtPoint {
        if rng.gen_ratio(1, 20) {
            ExtPoint::Infinity
        } else {
            ExtPoint::finite(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0))
        }
    }

    #[test]
    fn distance_matches_lift_angle_and_metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (a, b, c3) = (random_ext(&mut rng), random_ext(&mut rng), random_ext(&mut rng));
            let dab = spherical_distance(a, b);
            let dba = spherical_distance(b, a);
            assert_eq!(dab, dba);
            let ang = angle_between(stereographic_lift(a), stereographic_lift(b));
            assert_abs_diff_eq!(dab, ang, epsilon = 1e-12);
            let dac = spherical_distance(a, c3);
            let dcb = spherical_distance(c3, b);
            assert!(dab <= dac + dcb + 1e-12);
        }
    }

    #[test]
    fn rotations_are_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let phi = SphereRotation::new(
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            );
            let phi = match phi {
                Ok(phi) => phi,
                Err(_) => continue,
            };
            let a = random_ext(&mut rng);
            let b = random_ext(&mut rng);
            let before = spherical_distance(a, b);
            let after = spherical_distance(phi.apply(a), phi.apply(b));
            assert_abs_diff_eq!(before, after, epsilon = 1e-12);
        }
    }
}
