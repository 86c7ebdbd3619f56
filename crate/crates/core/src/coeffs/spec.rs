use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::expr::{BoundExpr, EvalError, Expr};
use crate::error::{Error, Result};
use crate::scale::PolicyOverrides;

/// Law of `x(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    Point(f64),
    Uniform([f64; 2]),
}

impl InitialCondition {
    /// Map a uniform draw `u in [0, 1)` to an initial value.
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            InitialCondition::Point(v) => v,
            InitialCondition::Uniform([lo, hi]) => lo + (hi - lo) * u,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            InitialCondition::Point(v) => (v, v),
            InitialCondition::Uniform([lo, hi]) => (lo, hi),
        }
    }
}

/// Built-in walk variants whose coefficients see more than `(t, x(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Volatility becomes `sigma(t, x) + boost` once the running maximum of the
    /// path has exceeded `threshold`.
    RunningMax { threshold: f64, boost: f64 },
}

/// On-disk JSON form of a [`WalkSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub drift: String,
    pub volatility: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub x0: InitialCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_policy: Option<PolicyOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
}

/// Drift `b(t, x)`, volatility `sigma(t, x)`, parameters and initial law of a walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    file: SpecFile,
    drift: Expr,
    volatility: Expr,
}

impl WalkSpec {
    pub fn new(drift: &str, volatility: &str) -> Result<Self> {
        Self::from_file(SpecFile {
            drift: drift.to_string(),
            volatility: volatility.to_string(),
            params: BTreeMap::new(),
            x0: InitialCondition::Point(0.0),
            tolerance_policy: None,
            variant: None,
        })
    }

    /// Spec with named parameters and `x(0) = 0`.
    pub fn with_params(drift: &str, volatility: &str, params: &[(&str, f64)]) -> Result<Self> {
        Self::from_file(SpecFile {
            drift: drift.to_string(),
            volatility: volatility.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            x0: InitialCondition::Point(0.0),
            tolerance_policy: None,
            variant: None,
        })
    }

    pub fn with_x0(mut self, x0: InitialCondition) -> Result<Self> {
        self.file.x0 = x0;
        Self::from_file(self.file)
    }

    pub fn with_variant(mut self, variant: Variant) -> Result<Self> {
        self.file.variant = Some(variant);
        Self::from_file(self.file)
    }

    pub fn from_file(file: SpecFile) -> Result<Self> {
        let drift = Expr::parse(&file.drift)?;
        let volatility = Expr::parse(&file.volatility)?;
        for name in drift.params().union(&volatility.params()) {
            if !file.params.contains_key(name) {
                return Err(Error::UndeclaredParameter(name.clone()));
            }
        }
        if let Some((name, v)) = file.params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("parameter `{name}` = {v} is not finite")));
        }
        match file.x0 {
            InitialCondition::Point(v) if !v.is_finite() => {
                return Err(Error::InvalidSpec("x0 point is not finite".into()))
            }
            InitialCondition::Uniform([lo, hi]) if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                return Err(Error::InvalidSpec(format!("x0 uniform bounds [{lo}, {hi}] invalid")))
            }
            _ => {}
        }
        if let Some(Variant::RunningMax { threshold, boost }) = file.variant {
            if !threshold.is_finite() || !boost.is_finite() {
                return Err(Error::InvalidSpec("running_max variant fields must be finite".into()));
            }
        }
        Ok(Self {
            file,
            drift,
            volatility,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::SpecNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }

    /// Canonical JSON: sorted keys, no insignificant whitespace, shortest round-trip numbers.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(&self.file).expect("spec serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn file(&self) -> &SpecFile {
        &self.file
    }

    pub fn drift(&self) -> &Expr {
        &self.drift
    }

    pub fn volatility(&self) -> &Expr {
        &self.volatility
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.file.params
    }

    pub fn x0(&self) -> InitialCondition {
        self.file.x0
    }

    pub fn variant(&self) -> Option<Variant> {
        self.file.variant
    }

    pub fn tolerance_policy(&self) -> Option<PolicyOverrides> {
        self.file.tolerance_policy
    }

    /// Bind parameters into both coefficients.
    pub fn coefficients(&self) -> Result<Coefficients> {
        let bind = |e: &Expr| {
            e.bind(&self.file.params)
                .map_err(|source| Error::Eval { t: f64::NAN, x: f64::NAN, source })
        };
        Ok(Coefficients {
            drift: bind(&self.drift)?,
            volatility: bind(&self.volatility)?,
        })
    }
}

/// Parameter-bound drift and volatility, ready for repeated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub drift: BoundExpr,
    pub volatility: BoundExpr,
}

impl Coefficients {
    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> Result<(f64, f64), EvalError> {
        Ok((self.drift.eval(t, x)?, self.volatility.eval(t, x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_schema() {
        let spec = WalkSpec::from_json(
            r#"{"drift":"-theta*x","volatility":"sigma0","params":{"theta":1,"sigma0":0.5},"x0":{"uniform":[-1,1]}}"#,
        )
        .unwrap();
        assert_eq!(spec.x0(), InitialCondition::Uniform([-1.0, 1.0]));
        let c = spec.coefficients().unwrap();
        assert_eq!(c.eval(0.0, 2.0).unwrap(), (-2.0, 0.5));
    }

    #[test]
    fn canonical_form_is_sorted_and_compact() {
        let spec = WalkSpec::from_json(
            r#"{ "x0": {"point": 0.0}, "volatility": "1", "drift": "0", "params": {"b": 2, "a": 1e-3} }"#,
        )
        .unwrap();
        assert_eq!(
            spec.canonical_json(),
            r#"{"drift":"0","params":{"a":0.001,"b":2.0},"volatility":"1","x0":{"point":0.0}}"#
        );
    }

    #[test]
    fn rejects_undeclared_parameter() {
        let err = WalkSpec::from_json(r#"{"drift":"-k*x","volatility":"1","params":{},"x0":{"point":0}}"#)
            .unwrap_err();
        assert!(matches!(err, Error::UndeclaredParameter(ref n) if n == "k"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_x0() {
        assert!(WalkSpec::from_json(r#"{"drift":"0","volatility":"1","params":{},"x0":{"point":0},"extra":1}"#).is_err());
        assert!(WalkSpec::from_json(r#"{"drift":"0","volatility":"1","params":{},"x0":{"uniform":[2,1]}}"#).is_err());
        assert!(WalkSpec::from_json(r#"{"drift":"0","volatility":"1","params":{},"x0":{"gauss":1}}"#).is_err());
    }

    #[test]
    fn variant_and_policy_are_optional_keys() {
        let text = r#"{"drift":"0","params":{},"tolerance_policy":{"appreciable_low":0.001},"variant":{"running_max":{"boost":1.0,"threshold":0.5}},"volatility":"1","x0":{"point":0.0}}"#;
        let spec = WalkSpec::from_json(text).unwrap();
        assert_eq!(spec.canonical_json(), text);
        assert_eq!(
            spec.variant(),
            Some(Variant::RunningMax { threshold: 0.5, boost: 1.0 })
        );
    }

    proptest! {
        #[test]
        fn json_roundtrip_is_bit_exact(
            theta in -1e6f64..1e6,
            s in 1e-9f64..1e3,
            lo in -1e9f64..0.0,
            width in 0f64..1e9,
            point in proptest::bool::ANY,
        ) {
            let x0 = if point { InitialCondition::Point(lo) } else { InitialCondition::Uniform([lo, lo + width]) };
            let spec = WalkSpec::with_params("-theta*x", "s*sqrt(1 + x^2)", &[("theta", theta), ("s", s)])
                .unwrap()
                .with_x0(x0)
                .unwrap();
            let text = spec.canonical_json();
            let back = WalkSpec::from_json(&text).unwrap();
            prop_assert_eq!(back.canonical_json(), text);
            prop_assert_eq!(back, spec);
        }
    }
}
