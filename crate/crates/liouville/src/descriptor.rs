//! JSON descriptors for maps, solution fields, and run configurations.
//!
//! Parsing is fail-closed: unknown keys are rejected, and keys that do not
//! belong to the declared `kind`/`family` are errors rather than being
//! silently ignored, so a config always means what it says.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Provenance, SolutionField, Transform};
use crate::geometry::{MobiusMap, Rect, SphereRotation};
use crate::map::DevelopingMap;
use crate::ode::{IntegratorSettings, OdeQuotientMap, PolynomialP, QuotientSeeds};

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("invalid descriptor: {0}")]
    Invalid(String),
}

fn c(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDescriptor {
    #[serde(default = "default_one")]
    pub scale_re: f64,
    #[serde(default)]
    pub scale_im: f64,
    #[serde(default)]
    pub shift_re: f64,
    #[serde(default)]
    pub shift_im: f64,
}

fn default_one() -> f64 {
    1.0
}

impl Default for TransformDescriptor {
    fn default() -> Self {
        TransformDescriptor { scale_re: 1.0, scale_im: 0.0, shift_re: 0.0, shift_im: 0.0 }
    }
}

impl TransformDescriptor {
    pub fn build(&self) -> Result<Transform, DescriptorError> {
        Transform::new(
            Complex64::new(self.scale_re, self.scale_im),
            Complex64::new(self.shift_re, self.shift_im),
        )
        .map_err(|e| DescriptorError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationDescriptor {
    pub p: [f64; 2],
    pub q: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsDescriptor {
    /// `[w(0), w'(0)]` of the first solution.
    pub w1: [[f64; 2]; 2],
    /// `[w(0), w'(0)]` of the second solution.
    pub w2: [[f64; 2]; 2],
}

/// Flat map descriptor: `{"kind": "mobius" | "exp_family" | "ode_quotient", ...}`.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MapDescriptor {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationDescriptor>,
    /// Coefficients of `P`, constant term first, entries `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<SeedsDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl MapDescriptor {
    fn reject_foreign(&self, kind: &str, allowed: &[&str]) -> Result<(), DescriptorError> {
        let present: Vec<(&str, bool)> = vec![
            ("a", self.a.is_some()),
            ("b", self.b.is_some()),
            ("c", self.c.is_some()),
            ("d", self.d.is_some()),
            ("t", self.t.is_some()),
            ("rotation", self.rotation.is_some()),
            ("coefficients", self.coefficients.is_some()),
            ("seeds", self.seeds.is_some()),
            ("tolerance", self.tolerance.is_some()),
            ("max_steps", self.max_steps.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return Err(DescriptorError::Invalid(format!(
                    "field \"{name}\" does not apply to map kind \"{kind}\""
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<DevelopingMap, DescriptorError> {
        let bad = |m: String| DescriptorError::Invalid(m);
        match self.kind.as_str() {
            "mobius" => {
                self.reject_foreign("mobius", &["a", "b", "c", "d"])?;
                let get = |v: Option<[f64; 2]>, n: &str| {
                    v.ok_or_else(|| bad(format!("mobius map needs coefficient \"{n}\"")))
                };
                let m = MobiusMap::new(
                    c(get(self.a, "a")?),
                    c(get(self.b, "b")?),
                    c(get(self.c, "c")?),
                    c(get(self.d, "d")?),
                )
                .map_err(|e| bad(e.to_string()))?;
                Ok(DevelopingMap::mobius(m))
            }
            "exp_family" => {
                self.reject_foreign("exp_family", &["t", "rotation"])?;
                let t = self.t.ok_or_else(|| bad("exp_family needs \"t\"".into()))?;
                let rotation = match &self.rotation {
                    None => None,
                    Some(r) => Some(
                        SphereRotation::new(c(r.p), c(r.q)).map_err(|e| bad(e.to_string()))?,
                    ),
                };
                DevelopingMap::exp_family(t, rotation).map_err(|e| bad(e.to_string()))
            }
            "ode_quotient" => {
                self.reject_foreign(
                    "ode_quotient",
                    &["coefficients", "seeds", "tolerance", "max_steps"],
                )?;
                let coeffs = self
                    .coefficients
                    .as_ref()
                    .ok_or_else(|| bad("ode_quotient needs \"coefficients\"".into()))?;
                let poly = PolynomialP::new(coeffs.iter().map(|&p| c(p)).collect());
                let seeds = match &self.seeds {
                    Some(s) => QuotientSeeds {
                        w1: (c(s.w1[0]), c(s.w1[1])),
                        w2: (c(s.w2[0]), c(s.w2[1])),
                    },
                    None => QuotientSeeds {
                        w1: (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
                        w2: (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
                    },
                };
                let mut settings = IntegratorSettings::default();
                if let Some(tol) = self.tolerance {
                    settings.tolerance = tol;
                }
                if let Some(ms) = self.max_steps {
                    settings.max_steps = ms;
                }
                let q = OdeQuotientMap::new(poly, seeds, settings)
                    .map_err(|e| bad(e.to_string()))?;
                Ok(DevelopingMap::ode_quotient(q))
            }
            other => Err(bad(format!("unknown map kind \"{other}\""))),
        }
    }
}

/// Flat solution descriptor:
/// `{"family": "radial" | "t_family" | "one_dim" | "from_map" | "constant", ...}`.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolutionDescriptor {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformDescriptor>,
}

impl SolutionDescriptor {
    fn reject_foreign(&self, family: &str, allowed: &[&str]) -> Result<(), DescriptorError> {
        let present: Vec<(&str, bool)> = vec![
            ("t", self.t.is_some()),
            ("lambda", self.lambda.is_some()),
            ("b", self.b.is_some()),
            ("omega", self.omega.is_some()),
            ("value", self.value.is_some()),
            ("map", self.map.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return Err(DescriptorError::Invalid(format!(
                    "field \"{name}\" does not apply to family \"{family}\""
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<SolutionField, DescriptorError> {
        let bad = |m: String| DescriptorError::Invalid(m);
        let provenance = match self.family.as_str() {
            "radial" => {
                self.reject_foreign("radial", &[])?;
                Provenance::Radial
            }
            "t_family" => {
                self.reject_foreign("t_family", &["t"])?;
                Provenance::TFamily {
                    t: self.t.ok_or_else(|| bad("t_family needs \"t\"".into()))?,
                }
            }
            "one_dim" => {
                self.reject_foreign("one_dim", &["lambda", "b", "omega"])?;
                Provenance::OneDim {
                    lambda: self.lambda.ok_or_else(|| bad("one_dim needs \"lambda\"".into()))?,
                    b: self.b.unwrap_or(0.0),
                    omega: self.omega.unwrap_or([1.0, 0.0]),
                }
            }
            "from_map" => {
                self.reject_foreign("from_map", &["map"])?;
                let map = self.map.as_ref().ok_or_else(|| bad("from_map needs \"map\"".into()))?;
                Provenance::FromMap(map.build()?)
            }
            "constant" => {
                self.reject_foreign("constant", &["value"])?;
                Provenance::Constant {
                    value: self.value.ok_or_else(|| bad("constant needs \"value\"".into()))?,
                }
            }
            other => return Err(bad(format!("unknown family \"{other}\""))),
        };
        let transform = match &self.transform {
            Some(t) => t.build()?,
            None => Transform::identity(),
        };
        SolutionField::new(provenance, transform).map_err(|e| bad(e.to_string()))
    }
}

pub fn rect_from(window: [f64; 4]) -> Rect {
    Rect::new(window[0], window[1], window[2], window[3])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_window5")]
    pub window: [f64; 4],
}

fn default_points() -> usize {
    200
}
fn default_step() -> f64 {
    crate::field::DEFAULT_RESIDUAL_STEP
}
fn default_threshold() -> f64 {
    1e-6
}
fn default_window5() -> [f64; 4] {
    [-5.0, 5.0, -5.0, 5.0]
}

impl Default for ResidualConfig {
    fn default() -> Self {
        ResidualConfig {
            points: default_points(),
            step: default_step(),
            threshold: default_threshold(),
            window: default_window5(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiameterConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsConfig {
    #[serde(default)]
    pub sector_index: usize,
    #[serde(default = "default_r_lo")]
    pub r_min: f64,
    #[serde(default = "default_r_hi")]
    pub r_max: f64,
    #[serde(default = "default_fit_samples")]
    pub samples: usize,
    #[serde(default = "default_fit_directions")]
    pub directions: usize,
}

fn default_r_lo() -> f64 {
    10.0
}
fn default_r_hi() -> f64 {
    30.0
}
fn default_fit_samples() -> usize {
    6
}
fn default_fit_directions() -> usize {
    16
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        AsymptoticsConfig {
            sector_index: 0,
            r_min: default_r_lo(),
            r_max: default_r_hi(),
            samples: default_fit_samples(),
            directions: default_fit_directions(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default = "default_window3")]
    pub window: [f64; 4],
    #[serde(default = "default_profile_n")]
    pub nx: usize,
    #[serde(default = "default_profile_n")]
    pub ny: usize,
    /// If set, dump `u` along these ray angles instead of a grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<Vec<f64>>,
    #[serde(default = "default_ray_r")]
    pub r_max: f64,
    #[serde(default = "default_ray_samples")]
    pub samples: usize,
}

fn default_window3() -> [f64; 4] {
    [-3.0, 3.0, -3.0, 3.0]
}
fn default_profile_n() -> usize {
    101
}
fn default_ray_r() -> f64 {
    10.0
}
fn default_ray_samples() -> usize {
    200
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            window: default_window3(),
            nx: default_profile_n(),
            ny: default_profile_n(),
            rays: None,
            r_max: default_ray_r(),
            samples: default_ray_samples(),
        }
    }
}

/// Top-level CLI configuration file.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<DiameterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parses_solution_descriptors() {
        let radial: SolutionDescriptor = serde_json::from_str(r#"{"family": "radial"}"#).unwrap();
        let field = radial.build().unwrap();
        assert_abs_diff_eq!(
            field.value(Complex64::new(0.0, 0.0)).unwrap(),
            2.0_f64.ln(),
            epsilon = 1e-15
        );

        let t: SolutionDescriptor = serde_json::from_str(
            r#"{"family": "t_family", "t": 1.0,
                "transform": {"scale_re": 2.0, "shift_re": 0.5}}"#,
        )
        .unwrap();
        t.build().unwrap();

        let od: SolutionDescriptor = serde_json::from_str(
            r#"{"family": "one_dim", "lambda": 2.0, "omega": [0.0, 1.0]}"#,
        )
        .unwrap();
        od.build().unwrap();
    }

    #[test]
    fn parses_map_descriptors() {
        let m: MapDescriptor = serde_json::from_str(
            r#"{"kind": "mobius", "a": [1.0, 0.0], "b": [0.0, 0.0], "c": [0.0, 0.0], "d": [1.0, 0.0]}"#,
        )
        .unwrap();
        m.build().unwrap();

        let q: MapDescriptor = serde_json::from_str(
            r#"{"kind": "ode_quotient", "coefficients": [[0.0, 0.0], [1.0, 0.0]]}"#,
        )
        .unwrap();
        q.build().unwrap();

        let e: MapDescriptor =
            serde_json::from_str(r#"{"kind": "exp_family", "t": 0.5}"#).unwrap();
        e.build().unwrap();
    }

    #[test]
    fn rejects_unknown_and_foreign_fields() {
        assert!(serde_json::from_str::<SolutionDescriptor>(
            r#"{"family": "radial", "radius": 3.0}"#
        )
        .is_err());

        let foreign: SolutionDescriptor =
            serde_json::from_str(r#"{"family": "radial", "t": 2.0}"#).unwrap();
        assert!(foreign.build().is_err());

        let bad_kind: MapDescriptor = serde_json::from_str(r#"{"kind": "quadratic"}"#).unwrap();
        assert!(bad_kind.build().is_err());

        assert!(serde_json::from_str::<RunConfig>(r#"{"solutions": []}"#).is_err());
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{
            "solution": {"family": "t_family", "t": 0.5},
            "residual": {"points": 50},
            "growth": {"r_max": 100.0}
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.residual.as_ref().unwrap().points, 50);
        assert_abs_diff_eq!(cfg.residual.as_ref().unwrap().threshold, 1e-6);
        let back = serde_json::to_string(&cfg).unwrap();
        let again: RunConfig = serde_json::from_str(&back).unwrap();
        assert_eq!(again.growth.as_ref().unwrap().r_max, Some(100.0));
    }
}
