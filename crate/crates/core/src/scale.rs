//! The quantum time scale and finite surrogates for the predicates
//! "infinitesimal", "appreciable" and "limited".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `{k / n_q | 0 <= k <= n_q}` on the unit time interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumScale {
    n_q: u64,
    delta_t: f64,
}

impl QuantumScale {
    pub fn new(n_q: u64) -> Result<Self> {
        if n_q < 2 {
            return Err(Error::InvalidScale(n_q));
        }
        Ok(Self {
            n_q,
            delta_t: 1.0 / n_q as f64,
        })
    }

    /// Number of increments on the grid.
    pub fn n_q(&self) -> u64 {
        self.n_q
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    pub fn sqrt_delta_t(&self) -> f64 {
        self.delta_t.sqrt()
    }

    /// Grid time `t_k`. Computed as a quotient so that `time(n_q) == 1.0` exactly.
    pub fn time(&self, k: u64) -> f64 {
        k as f64 / self.n_q as f64
    }

    pub fn len(&self) -> usize {
        self.n_q as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.n_q).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point nearest to `t`, clamped to the grid.
    pub fn step_at(&self, t: f64) -> u64 {
        let k = (t * self.n_q as f64).round();
        if k <= 0.0 {
            0
        } else {
            (k as u64).min(self.n_q)
        }
    }
}

/// Five-way classification of a magnitude against a [`TolerancePolicy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Infinitesimal,
    SmallGap,
    Appreciable,
    LargeGap,
    Unlimited,
}

impl Classification {
    pub const ALL: [Classification; 5] = [
        Classification::Infinitesimal,
        Classification::SmallGap,
        Classification::Appreciable,
        Classification::LargeGap,
        Classification::Unlimited,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Threshold bands standing in for the nonstandard predicates at finite `n_q`.
///
/// `|v| <= infinitesimal_cut` is infinitesimal, `[appreciable_low, appreciable_high]`
/// is appreciable, `|v| > limited_cut` is unlimited. The two zones in between are
/// reported as gaps rather than rounded to a neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub infinitesimal_cut: f64,
    pub appreciable_low: f64,
    pub appreciable_high: f64,
    pub limited_cut: f64,
}

impl TolerancePolicy {
    pub const DEFAULT_APPRECIABLE_LOW: f64 = 1e-2;
    pub const DEFAULT_APPRECIABLE_HIGH: f64 = 1e2;
    pub const DEFAULT_LIMITED_CUT: f64 = 1e6;

    pub fn new(
        infinitesimal_cut: f64,
        appreciable_low: f64,
        appreciable_high: f64,
        limited_cut: f64,
    ) -> Result<Self> {
        let policy = Self {
            infinitesimal_cut,
            appreciable_low,
            appreciable_high,
            limited_cut,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.infinitesimal_cut,
            self.appreciable_low,
            self.appreciable_high,
            self.limited_cut,
        ];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidPolicy(format!(
                "all cuts must be positive and finite, got {all:?}"
            )));
        }
        if !(self.infinitesimal_cut < self.appreciable_low
            && self.appreciable_low <= self.appreciable_high
            && self.appreciable_high <= self.limited_cut)
        {
            return Err(Error::InvalidPolicy(format!(
                "need infinitesimal_cut < appreciable_low <= appreciable_high <= limited_cut, got {all:?}"
            )));
        }
        Ok(())
    }

    /// Scale-relative default: `infinitesimal_cut = n_q^(-1/4)`, appreciable band
    /// `[1e-2, 1e2]`, `limited_cut = 1e6`.
    ///
    /// `n_q^(-1/4)` only drops below `1e-2` for `n_q > 1e8`; below that the low
    /// edge of the band is lifted to twice the cut so the ordering still holds.
    pub fn for_scale(scale: &QuantumScale) -> Self {
        let infinitesimal_cut = (scale.n_q() as f64).powf(-0.25);
        Self {
            infinitesimal_cut,
            appreciable_low: Self::DEFAULT_APPRECIABLE_LOW.max(2.0 * infinitesimal_cut),
            appreciable_high: Self::DEFAULT_APPRECIABLE_HIGH,
            limited_cut: Self::DEFAULT_LIMITED_CUT,
        }
    }

    pub fn classify(&self, value: f64) -> Result<Classification> {
        if value.is_nan() {
            return Err(Error::InvalidValue("cannot classify NaN".into()));
        }
        let v = value.abs();
        Ok(if v <= self.infinitesimal_cut {
            Classification::Infinitesimal
        } else if v < self.appreciable_low {
            Classification::SmallGap
        } else if v <= self.appreciable_high {
            Classification::Appreciable
        } else if v <= self.limited_cut {
            Classification::LargeGap
        } else {
            Classification::Unlimited
        })
    }
}

/// Partial overrides for a policy, as supplied by CLI flags or a spec file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infinitesimal_cut: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appreciable_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appreciable_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limited_cut: Option<f64>,
}

impl PolicyOverrides {
    /// Fields set in `self` win over those in `other`.
    pub fn or(self, other: PolicyOverrides) -> PolicyOverrides {
        PolicyOverrides {
            infinitesimal_cut: self.infinitesimal_cut.or(other.infinitesimal_cut),
            appreciable_low: self.appreciable_low.or(other.appreciable_low),
            appreciable_high: self.appreciable_high.or(other.appreciable_high),
            limited_cut: self.limited_cut.or(other.limited_cut),
        }
    }

    pub fn apply(&self, base: TolerancePolicy) -> Result<TolerancePolicy> {
        TolerancePolicy::new(
            self.infinitesimal_cut.unwrap_or(base.infinitesimal_cut),
            self.appreciable_low.unwrap_or(base.appreciable_low),
            self.appreciable_high.unwrap_or(base.appreciable_high),
            self.limited_cut.unwrap_or(base.limited_cut),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn band(low: f64, high: f64, limited: f64) -> TolerancePolicy {
        TolerancePolicy::new(low / 10.0, low, high, limited).unwrap()
    }

    #[test]
    fn small_scale() {
        let s = QuantumScale::new(4).unwrap();
        assert_eq!(s.delta_t(), 0.25);
        assert_eq!(s.grid(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn million_steps() {
        let s = QuantumScale::new(1_000_000).unwrap();
        assert_eq!(s.delta_t(), 1e-6);
        assert_eq!(s.len(), 1_000_001);
        assert_eq!(s.time(1_000_000), 1.0);
        assert!((s.delta_t() * s.n_q() as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_scale() {
        assert!(matches!(QuantumScale::new(1), Err(Error::InvalidScale(1))));
        assert!(QuantumScale::new(0).is_err());
    }

    #[test]
    fn classify_examples() {
        let s = QuantumScale::new(1 << 12).unwrap();
        let default = TolerancePolicy::for_scale(&s);
        assert_eq!(default.classify(0.0).unwrap(), Classification::Infinitesimal);

        let wide = band(1e-3, 1e3, 1e6);
        assert_eq!(wide.classify(1.0).unwrap(), Classification::Appreciable);
        assert_eq!(wide.classify(1e9).unwrap(), Classification::Unlimited);
        assert_eq!(wide.classify(5e-4).unwrap(), Classification::SmallGap);
        assert_eq!(wide.classify(5e4).unwrap(), Classification::LargeGap);
    }

    #[test]
    fn classify_rejects_nan() {
        let p = band(1e-2, 1e2, 1e6);
        assert!(matches!(p.classify(f64::NAN), Err(Error::InvalidValue(_))));
    }

    #[test]
    fn default_policy_is_ordered_at_every_scale() {
        for n_q in [2u64, 4, 1024, 1 << 20, 100_000_000, 1 << 40] {
            let s = QuantumScale::new(n_q).unwrap();
            TolerancePolicy::for_scale(&s).validate().unwrap();
        }
        let huge = TolerancePolicy::for_scale(&QuantumScale::new(1 << 40).unwrap());
        assert_eq!(huge.appreciable_low, 1e-2);
    }

    #[test]
    fn policy_ordering_enforced() {
        assert!(TolerancePolicy::new(1.0, 0.5, 2.0, 3.0).is_err());
        assert!(TolerancePolicy::new(0.1, 0.5, 0.4, 3.0).is_err());
        assert!(TolerancePolicy::new(-0.1, 0.5, 1.0, 3.0).is_err());
    }

    #[test]
    fn overrides_layer() {
        let base = band(1e-2, 1e2, 1e6);
        let cli = PolicyOverrides {
            appreciable_low: Some(2e-3),
            ..Default::default()
        };
        let file = PolicyOverrides {
            appreciable_low: Some(5e-3),
            limited_cut: Some(1e9),
            ..Default::default()
        };
        let p = cli.or(file).apply(base).unwrap();
        assert_eq!(p.appreciable_low, 2e-3);
        assert_eq!(p.limited_cut, 1e9);
    }

    proptest! {
        #[test]
        fn classify_is_symmetric(v in -1e12f64..1e12) {
            let p = band(1e-2, 1e2, 1e6);
            prop_assert_eq!(p.classify(v).unwrap(), p.classify(-v).unwrap());
        }

        #[test]
        fn classify_is_monotone(a in 0f64..1e9, b in 0f64..1e9) {
            let p = band(1e-2, 1e2, 1e6);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(p.classify(lo).unwrap() <= p.classify(hi).unwrap());
        }
    }
}
