//! Numerical toolkit for curvature +1 conformal metrics `e^{2u}|dz|^2` on the
//! plane, built around the correspondence between solutions of `-Δu = e^{2u}`
//! and locally univalent meromorphic developing maps.
//!
//! The crate is organised as follows:
//!
//! - [`geometry`]: extended complex plane, Riemann sphere, Möbius maps and
//!   sphere rotations.
//! - [`map`]: developing maps (Möbius, exponential family `t + e^z`, and
//!   quotients `w1/w2` of solutions of `w'' + P w = 0`), their spherical and
//!   Schwarzian derivatives.
//! - [`ode`]: ray integration of `w'' + P(z) w = 0`, Stokes directions,
//!   subdominant decay, and asymptotic-law fitting.
//! - [`field`]: solution families of the Liouville equation, the scale/shift
//!   transformation group, residual verification, growth classification,
//!   concavity and one-dimensionality checks.
//! - [`metric`]: lengths, grid geodesics, conformal diameter, and the
//!   Nevanlinna functions `A(r, f)` and `T(r, f)`.
//! - [`cli`]: command-line front end producing deterministic JSON/CSV reports.

pub mod cli;
pub mod descriptor;
pub mod field;
pub mod geometry;
pub mod map;
pub mod metric;
pub mod ode;
pub mod quad;
pub mod report;

pub use geometry::{ComplexPoint, ExtPoint, MobiusMap, SphereRotation};
pub use map::DevelopingMap;
pub use ode::PolynomialP;
pub use field::{Provenance, SolutionField, Transform};
