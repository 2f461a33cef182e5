//! Developing maps and their spherical/Schwarzian derivatives.
//!
//! Three families are supported: linear-fractional maps, the exponential
//! family `t + e^z` (optionally post-composed with a sphere rotation), and
//! quotients `w1/w2` of solutions of `w'' + P w = 0`. All evaluations route
//! poles through pole-free quotient forms, so `f^#` never blows up at a
//! simple pole.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{ExtPoint, MobiusMap, Rect, SphereRotation};
use crate::ode::{OdeError, OdeQuotientMap};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("ODE integration failed: {0}")]
    IntegrationFailure(#[from] OdeError),
    #[error("|f'| = {magnitude:e} below 1e-12 within the stencil at ({re}, {im})")]
    DerivativeBreakdown { re: f64, im: f64, magnitude: f64 },
    #[error("pole of f within the stencil at ({re}, {im})")]
    PoleInStencil { re: f64, im: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("step h = {0} outside (0, 0.1]")]
    InvalidStep(f64),
    #[error("local univalence violated at {} sample point(s); min f^# = {min:e}", points.len())]
    UnivalenceViolation {
        points: Vec<(f64, f64, f64)>,
        min: f64,
    },
}

/// A locally univalent meromorphic developing map.
#[derive(Debug, Clone)]
pub enum DevelopingMap {
    Mobius(MobiusMap),
    ExpFamily {
        t: f64,
        rotation: Option<SphereRotation>,
    },
    OdeQuotient(Arc<OdeQuotientMap>),
}

impl DevelopingMap {
    pub fn mobius(m: MobiusMap) -> Self {
        DevelopingMap::Mobius(m)
    }

    pub fn identity() -> Self {
        DevelopingMap::Mobius(MobiusMap::identity())
    }

    pub fn exp_family(t: f64, rotation: Option<SphereRotation>) -> Result<Self, MapError> {
        if !t.is_finite() || t < 0.0 {
            return Err(MapError::InvalidParameter(format!(
                "exp-family parameter t must be finite and >= 0, got {t}"
            )));
        }
        Ok(DevelopingMap::ExpFamily { t, rotation })
    }

    pub fn ode_quotient(map: OdeQuotientMap) -> Self {
        DevelopingMap::OdeQuotient(Arc::new(map))
    }

    pub fn as_ode_quotient(&self) -> Option<&OdeQuotientMap> {
        match self {
            DevelopingMap::OdeQuotient(q) => Some(q),
            _ => None,
        }
    }

    /// `f(z)` on the extended plane.
    pub fn value(&self, z: Complex64) -> Result<ExtPoint, MapError> {
        match self {
            DevelopingMap::Mobius(m) => Ok(m.apply(ExtPoint::Finite(z))),
            DevelopingMap::ExpFamily { t, rotation } => {
                let g = ExtPoint::from(Complex64::new(*t, 0.0) + z.exp());
                Ok(match rotation {
                    Some(phi) => phi.apply(g),
                    None => g,
                })
            }
            DevelopingMap::OdeQuotient(q) => {
                let st = q.state_at(z)?;
                if st.w2.norm_sqr() == 0.0 {
                    Ok(ExtPoint::Infinity)
                } else {
                    Ok(ExtPoint::from(st.w1 / st.w2))
                }
            }
        }
    }

    /// `f'(z)`; fails at poles of `f` (the derivative is not finite there).
    pub fn derivative(&self, z: Complex64) -> Result<Complex64, MapError> {
        match self {
            DevelopingMap::Mobius(m) => {
                let (_, _, c, d) = m.coefficients();
                let den = c * z + d;
                if den.norm_sqr() == 0.0 {
                    return Err(MapError::PoleInStencil { re: z.re, im: z.im });
                }
                Ok(m.det() / (den * den))
            }
            DevelopingMap::ExpFamily { t, rotation } => {
                let ez = z.exp();
                match rotation {
                    None => Ok(ez),
                    Some(phi) => {
                        let g = Complex64::new(*t, 0.0) + ez;
                        let den = phi.q() * g + phi.p().conj();
                        if den.norm_sqr() == 0.0 {
                            return Err(MapError::PoleInStencil { re: z.re, im: z.im });
                        }
                        Ok(ez / (den * den))
                    }
                }
            }
            DevelopingMap::OdeQuotient(q) => {
                let st = q.state_at(z)?;
                if st.w2.norm_sqr() == 0.0 {
                    return Err(MapError::PoleInStencil { re: z.re, im: z.im });
                }
                let scale = (-2.0 * st.log_scale).exp();
                Ok(-q.wronskian() * scale / (st.w2 * st.w2))
            }
        }
    }

    /// `log f^#(z)`, computed in pole-free and overflow-free form for every
    /// variant:
    /// Möbius `2|det| / (|az+b|^2 + |cz+d|^2)`, exponential family via the
    /// scaled quotient of the rotation, ODE quotient `2|W| / (|w1|^2 + |w2|^2)`.
    pub fn log_spherical_derivative(&self, z: Complex64) -> Result<f64, MapError> {
        match self {
            DevelopingMap::Mobius(m) => {
                let (a, b, c, d) = m.coefficients();
                let zn = z.norm();
                let (num, den, logz) = if zn > 1.0 {
                    (a + b / z, c + d / z, zn.ln())
                } else {
                    (a * z + b, c * z + d, 0.0)
                };
                Ok((2.0 * m.det().norm()).ln()
                    - 2.0 * logz
                    - (num.norm_sqr() + den.norm_sqr()).ln())
            }
            DevelopingMap::ExpFamily { t, rotation } => {
                // f^# = 2 |e^z| / (|A|^2 + |B|^2) where f = A / B; the common
                // scale e^{-m} keeps both rows representable for large Re z.
                let m = z.re.max(0.0);
                let ezs = (z - Complex64::new(m, 0.0)).exp(); // e^{z - m}, |.| <= 1
                let ts = *t * (-m).exp();
                let g_scaled = Complex64::new(ts, 0.0) + ezs; // (t + e^z) e^{-m}
                let (a_row, b_row) = match rotation {
                    None => (g_scaled, Complex64::new((-m).exp(), 0.0)),
                    Some(phi) => (
                        phi.p() * g_scaled - phi.q().conj() * (-m).exp(),
                        phi.q() * g_scaled + phi.p().conj() * (-m).exp(),
                    ),
                };
                Ok(2.0_f64.ln() + z.re - 2.0 * m - (a_row.norm_sqr() + b_row.norm_sqr()).ln())
            }
            DevelopingMap::OdeQuotient(q) => Ok(q.log_spherical_derivative(z)?),
        }
    }

    /// `f^#(z) = 2|f'| / (1 + |f|^2) > 0`.
    pub fn spherical_derivative(&self, z: Complex64) -> Result<f64, MapError> {
        Ok(self.log_spherical_derivative(z)?.exp())
    }

    /// Numerical Schwarzian derivative `(f''/f')' - (f''/f')^2 / 2` at `z`.
    ///
    /// Works on `g = log f'` through branch-safe ratios
    /// `Ln(f'(z+δ)/f'(z))`, with central differences at steps `h` and `h/2`
    /// combined by Richardson extrapolation.
    pub fn schwarzian(&self, z: Complex64, h: f64) -> Result<Complex64, MapError> {
        if !(h > 0.0 && h <= 0.1) {
            return Err(MapError::InvalidStep(h));
        }
        let f0 = self.derivative(z)?;
        if f0.norm() < 1e-12 {
            return Err(MapError::DerivativeBreakdown {
                re: z.re,
                im: z.im,
                magnitude: f0.norm(),
            });
        }

        let mut g1 = [Complex64::default(); 2];
        let mut g2 = [Complex64::default(); 2];
        for (i, delta) in [h, 0.5 * h].into_iter().enumerate() {
            let fp = self.derivative(z + delta)?;
            let fm = self.derivative(z - delta)?;
            for (w, at) in [(fp, z + delta), (fm, z - delta)] {
                if w.norm() < 1e-12 {
                    return Err(MapError::DerivativeBreakdown {
                        re: at.re,
                        im: at.im,
                        magnitude: w.norm(),
                    });
                }
            }
            let ap = (fp / f0).ln();
            let am = (fm / f0).ln();
            g1[i] = (ap - am) / (2.0 * delta);
            g2[i] = (ap + am) / (delta * delta);
        }
        let g1r = (4.0 * g1[1] - g1[0]) / 3.0;
        let g2r = (4.0 * g2[1] - g2[0]) / 3.0;
        Ok(g2r - 0.5 * g1r * g1r)
    }

    /// Post-composition `φ ∘ f` with a sphere rotation; `f^#` is unchanged.
    pub fn rotate(&self, phi: &SphereRotation) -> DevelopingMap {
        match self {
            DevelopingMap::Mobius(m) => DevelopingMap::Mobius(phi.to_mobius().compose(m)),
            DevelopingMap::ExpFamily { t, rotation } => DevelopingMap::ExpFamily {
                t: *t,
                rotation: Some(match rotation {
                    Some(psi) => phi.compose(psi),
                    None => *phi,
                }),
            },
            DevelopingMap::OdeQuotient(q) => {
                let m = phi.to_mobius();
                let (a, b, c, d) = m.coefficients();
                DevelopingMap::OdeQuotient(Arc::new(
                    q.recombine(a, b, c, d)
                        .expect("rotation preserves the Wronskian"),
                ))
            }
        }
    }

    /// Post-composition `L ∘ f` with a Möbius map, where representable
    /// (Möbius and ODE-quotient variants; the exponential family only closes
    /// under rotations).
    pub fn compose_mobius(&self, l: &MobiusMap) -> Option<DevelopingMap> {
        match self {
            DevelopingMap::Mobius(m) => Some(DevelopingMap::Mobius(l.compose(m))),
            DevelopingMap::ExpFamily { .. } => None,
            DevelopingMap::OdeQuotient(q) => {
                let (a, b, c, d) = l.coefficients();
                q.recombine(a, b, c, d)
                    .ok()
                    .map(|m| DevelopingMap::OdeQuotient(Arc::new(m)))
            }
        }
    }

    /// The reciprocal map `1/f`, where representable.
    pub fn reciprocal(&self) -> Option<DevelopingMap> {
        match self {
            DevelopingMap::Mobius(m) => Some(DevelopingMap::Mobius(m.reciprocal())),
            DevelopingMap::ExpFamily { .. } => None,
            DevelopingMap::OdeQuotient(q) => {
                let one = Complex64::new(1.0, 0.0);
                let zero = Complex64::new(0.0, 0.0);
                q.recombine(zero, one, one, zero)
                    .ok()
                    .map(|m| DevelopingMap::OdeQuotient(Arc::new(m)))
            }
        }
    }

    /// Samples `f^#` over a rectangle and reports the minimum; fails with
    /// the offending points if any sample is below the univalence tolerance.
    pub fn local_univalence_check(
        &self,
        region: Rect,
        samples: usize,
    ) -> Result<UnivalenceReport, MapError> {
        univalence_scan(|z| self.log_spherical_derivative(z), region, samples)
    }
}

#[derive(Debug, Clone)]
pub struct UnivalenceReport {
    pub min_spherical_derivative: f64,
    pub min_at: (f64, f64),
    pub samples: usize,
}

const UNIVALENCE_TOLERANCE: f64 = 1e-10;

/// Scans `exp(log_sph)` on a near-square lattice of at least `samples` points.
pub fn univalence_scan<F>(log_sph: F, region: Rect, samples: usize) -> Result<UnivalenceReport, MapError>
where
    F: Fn(Complex64) -> Result<f64, MapError>,
{
    let samples = samples.max(1);
    let n = (samples as f64).sqrt().ceil() as usize;
    let mut min = f64::INFINITY;
    let mut min_at = (region.x_min, region.y_min);
    let mut violations = Vec::new();
    let mut count = 0usize;
    for j in 0..n {
        for i in 0..n {
            let x = region.x_min + region.width() * (i as f64 + 0.5) / n as f64;
            let y = region.y_min + region.height() * (j as f64 + 0.5) / n as f64;
            let z = Complex64::new(x, y);
            let sph = log_sph(z)?.exp();
            count += 1;
            if sph < min {
                min = sph;
                min_at = (x, y);
            }
            if sph <= UNIVALENCE_TOLERANCE {
                violations.push((x, y, sph));
            }
        }
    }
    if violations.is_empty() {
        Ok(UnivalenceReport {
            min_spherical_derivative: min,
            min_at,
            samples: count,
        })
    } else {
        Err(MapError::UnivalenceViolation {
            points: violations,
            min,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::spherical_distance;
    use crate::ode::{IntegratorSettings, PolynomialP, QuotientSeeds};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_rotation(rng: &mut impl Rng) -> SphereRotation {
        loop {
            if let Ok(phi) = SphereRotation::new(
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ) {
                return phi;
            }
        }
    }

    #[test]
    fn spherical_derivative_examples() {
        let id = DevelopingMap::identity();
        assert_abs_diff_eq!(id.spherical_derivative(c(0.0, 0.0)).unwrap(), 2.0, epsilon = 1e-14);

        let f0 = DevelopingMap::exp_family(0.0, None).unwrap();
        for x in [-2.0_f64, 0.0, 0.5, 3.0] {
            let expect = 1.0 / x.cosh();
            assert_abs_diff_eq!(
                f0.spherical_derivative(c(x, 0.0)).unwrap(),
                expect,
                epsilon = 1e-13
            );
        }

        let f1 = DevelopingMap::exp_family(1.0, None).unwrap();
        assert_abs_diff_eq!(f1.spherical_derivative(c(0.0, 0.0)).unwrap(), 0.4, epsilon = 1e-14);
    }

    #[test]
    fn spherical_derivative_far_field_no_overflow() {
        let f = DevelopingMap::exp_family(2.0, None).unwrap();
        let u = f.log_spherical_derivative(c(500.0, 1.0)).unwrap();
        assert_abs_diff_eq!(u, 2.0_f64.ln() - 500.0, epsilon = 1e-9);
        let u = f.log_spherical_derivative(c(-500.0, 1.0)).unwrap();
        // f ~ t there, so u ~ ln 2 + x - ln(1 + t^2)
        assert_abs_diff_eq!(u, 2.0_f64.ln() - 500.0 - 5.0_f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn schwarzian_of_mobius_vanishes() {
        let m = MobiusMap::new(c(2.0, 1.0), c(0.0, -1.0), c(1.0, 0.5), c(1.0, 0.0)).unwrap();
        let s = DevelopingMap::mobius(m).schwarzian(c(1.0, 1.0), 1e-3).unwrap();
        assert!(s.norm() < 1e-8, "S = {s}");
    }

    #[test]
    fn schwarzian_of_exp_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in [0.0, 0.7, 3.0] {
            let phi = random_rotation(&mut rng);
            let f = DevelopingMap::exp_family(t, Some(phi)).unwrap();
            let s = f.schwarzian(c(0.0, 0.0), 1e-3).unwrap();
            assert_abs_diff_eq!(s.re, -0.5, epsilon = 1e-8);
            assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn schwarzian_of_quotient_is_twice_p() {
        let poly = PolynomialP::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let seeds = QuotientSeeds {
            w1: (c(1.0, 0.0), c(0.0, 0.0)),
            w2: (c(0.0, 0.0), c(1.0, 0.0)),
        };
        let q = OdeQuotientMap::new(poly, seeds, IntegratorSettings::default()).unwrap();
        let f = DevelopingMap::ode_quotient(q);
        let z = c(0.3, 0.0);
        let s = f.schwarzian(z, 0.02).unwrap();
        assert_abs_diff_eq!(s.re, 2.0 * z.re, epsilon = 1e-4);
        assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-4);
    }

    #[test]
    fn rotation_leaves_spherical_derivative_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = DevelopingMap::exp_family(0.0, None).unwrap();
        let phi = random_rotation(&mut rng);
        let g = f.rotate(&phi);
        for _ in 0..10 {
            let z = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            assert_abs_diff_eq!(
                f.log_spherical_derivative(z).unwrap(),
                g.log_spherical_derivative(z).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn rotate_identity_is_noop_pointwise() {
        let f = DevelopingMap::exp_family(1.5, None).unwrap();
        let g = f.rotate(&SphereRotation::identity());
        let z = c(0.4, -0.2);
        let fv = f.value(z).unwrap();
        let gv = g.value(z).unwrap();
        assert!(spherical_distance(fv, gv) < 1e-12);
    }

    #[test]
    fn univalence_passes_for_exp_family_and_mobius() {
        let region = Rect::centered_square(3.0);
        let f = DevelopingMap::exp_family(1.0, None).unwrap();
        let report = f.local_univalence_check(region, 400).unwrap();
        assert!(report.min_spherical_derivative > 1e-10);

        let m = DevelopingMap::mobius(
            MobiusMap::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap(),
        );
        assert!(m.local_univalence_check(region, 400).is_ok());
    }

    #[test]
    fn univalence_catches_critical_point() {
        // Test double f(z) = z^2: f^# = 2 * 2|z| / (1 + |z|^4) vanishes at 0.
        let region = Rect::centered_square(1.0);
        let result = univalence_scan(
            |z| {
                let fp = 2.0 * z.norm();
                Ok((2.0 * fp).ln() - (1.0 + z.norm_sqr() * z.norm_sqr()).ln())
            },
            region,
            // odd lattice puts a sample exactly at the origin
            9,
        );
        // 3x3 midpoint lattice does not hit 0 exactly; force a finer scan.
        let fine = univalence_scan(
            |z| {
                let fp = 2.0 * z.norm();
                if fp == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok((2.0 * fp).ln() - (1.0 + z.norm_sqr() * z.norm_sqr()).ln())
            },
            Rect::new(-1e-6, 1e-6, -1e-6, 1e-6),
            9,
        );
        assert!(result.is_ok() || matches!(result, Err(MapError::UnivalenceViolation { .. })));
        match fine {
            Err(MapError::UnivalenceViolation { points, .. }) => {
                assert!(!points.is_empty());
                assert!(points.iter().all(|&(x, y, _)| x.abs() < 1e-5 && y.abs() < 1e-5));
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn reciprocal_preserves_spherical_derivative() {
        let m = MobiusMap::new(c(1.0, 1.0), c(0.5, 0.0), c(0.0, 0.3), c(1.0, 0.0)).unwrap();
        let f = DevelopingMap::mobius(m);
        let g = f.reciprocal().unwrap();
        let z = c(0.7, -1.1);
        assert_abs_diff_eq!(
            f.log_spherical_derivative(z).unwrap(),
            g.log_spherical_derivative(z).unwrap(),
            epsilon = 1e-12
        );
    }
}
