use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorMode;
use crate::fbm::HurstIndex;
use crate::models::{builtin_drift, builtin_kernel, DriftModel, Kernel};
use crate::sde::SdeParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            name: "linear".into(),
            params: BTreeMap::from([("theta".to_string(), 1.0)]),
        }
    }
}

impl DriftSpec {
    pub fn build(&self) -> Result<DriftModel<f64>> {
        builtin_drift(&self.name, &self.params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: String,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            name: Kernel::default().name().into(),
        }
    }
}

/// `h = c_h · n^exponent`, or `fixed` when set (term-decay sweeps).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandwidthRule {
    pub c_h: f64,
    pub exponent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
}

impl Default for BandwidthRule {
    fn default() -> Self {
        Self {
            c_h: 1.0,
            exponent: -0.2,
            fixed: None,
        }
    }
}

impl BandwidthRule {
    pub fn at(&self, n: usize) -> f64 {
        self.c_h * (n as f64).powf(self.exponent)
    }
}

/// Evaluation points: fixed when both ends are given, otherwise spanning the
/// 5%–95% quantiles of each path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XGridSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    pub points: usize,
}

impl Default for XGridSpec {
    fn default() -> Self {
        Self {
            min: None,
            max: None,
            points: 41,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub drift: DriftSpec,
    pub sigma: f64,
    pub hurst: f64,
    pub x0: f64,
    pub gamma: f64,
    pub c_alpha: f64,
    pub refine: usize,
    pub burn_in: f64,
    pub kernel: KernelSpec,
    pub bandwidth: BandwidthRule,
    pub n_list: Vec<usize>,
    pub seeds: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub x_grid: XGridSpec,
    pub mode: EstimatorMode,
    /// Evaluation point of the term-decay table.
    pub decay_x: f64,
    /// Fixed bandwidth of the term-decay table.
    pub decay_h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            drift: DriftSpec::default(),
            sigma: 0.5,
            hurst: 0.7,
            x0: 0.0,
            gamma: 2.5,
            c_alpha: 1.0,
            refine: 16,
            burn_in: 20.0,
            kernel: KernelSpec::default(),
            bandwidth: BandwidthRule::default(),
            n_list: vec![1 << 10, 1 << 12, 1 << 14],
            seeds: 50,
            seed: None,
            x_grid: XGridSpec::default(),
            mode: EstimatorMode::Plain,
            decay_x: 0.0,
            decay_h: 0.5,
            out: None,
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::PlanInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::PlanInvalid(msg));
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) || self.n_list[0] == 0 {
            return bad(format!("n_list must be positive and strictly increasing: {:?}", self.n_list));
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.seed.is_none() {
            return bad("a base seed is required".into());
        }
        if !(self.bandwidth.exponent < 0.0) {
            return bad(format!("bandwidth exponent must be negative, got {}", self.bandwidth.exponent));
        }
        if !(self.bandwidth.c_h > 0.0) || self.bandwidth.fixed.is_some_and(|h| !(h > 0.0)) || !(self.decay_h > 0.0) {
            return bad("bandwidths must be positive".into());
        }
        if !(self.gamma > 1.0) {
            return bad(format!("gamma must exceed 1, got {}", self.gamma));
        }
        if !(self.c_alpha > 0.0) {
            return bad("c_alpha must be positive".into());
        }
        if self.refine == 0 {
            return bad("refine must be at least 1".into());
        }
        if !self.sigma.is_finite() || !self.x0.is_finite() || !(self.burn_in >= 0.0) {
            return bad("sigma, x0 and burn_in must be finite (burn_in >= 0)".into());
        }
        if self.x_grid.points == 0 {
            return bad("x_grid.points must be at least 1".into());
        }
        if let (Some(a), Some(b)) = (self.x_grid.min, self.x_grid.max) {
            if !(a < b) {
                return bad(format!("x_grid.min must be below x_grid.max ({a} >= {b})"));
            }
        }
        self.hurst_index()?.require_long_memory()?;
        self.model()?;
        self.kernel()?;
        Ok(())
    }

    pub fn hurst_index(&self) -> Result<HurstIndex<f64>> {
        HurstIndex::new(self.hurst)
    }

    pub fn model(&self) -> Result<DriftModel<f64>> {
        self.drift.build()
    }

    pub fn kernel(&self) -> Result<Kernel> {
        builtin_kernel(&self.kernel.name)
    }

    pub fn sde_params(&self) -> Result<SdeParams<f64>> {
        Ok(SdeParams::new(self.sigma, self.hurst_index()?)
            .with_x0(self.x0)
            .with_refine(self.refine)
            .with_burn_in(self.burn_in))
    }

    /// Estimation bandwidth at sample size `n`.
    pub fn bandwidth_at(&self, n: usize) -> f64 {
        self.bandwidth.fixed.unwrap_or_else(|| self.bandwidth.at(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys() {
        let plan = ExperimentPlan::from_toml(
            r#"
            drift.name = "linear_plus_sine"
            drift.theta = 2
            drift.amplitude = 0.5
            kernel.name = "triweight"
            n_list = [256, 512]
            seeds = 3
            seed = 11
            mode = "wick-oracle"
            x_grid = { min = -1.0, max = 1.0, points = 21 }
            "#,
        )
        .unwrap();
        assert_eq!(plan.drift.params["theta"], 2.0);
        assert_eq!(plan.kernel().unwrap(), Kernel::Triweight);
        assert_eq!(plan.mode, EstimatorMode::WickOracle);
        assert_eq!(plan.x_grid.points, 21);
        assert_eq!(plan.sigma, 0.5);
        plan.validate().unwrap();
        let again = ExperimentPlan::from_toml(&plan.to_toml()).unwrap();
        assert_eq!(again, plan);
    }

    #[test]
    fn rejects_bad_plans() {
        let ok = ExperimentPlan {
            seed: Some(1),
            ..ExperimentPlan::default()
        };
        ok.validate().unwrap();
        let cases = [
            ExperimentPlan { n_list: vec![512, 256], ..ok.clone() },
            ExperimentPlan { n_list: vec![], ..ok.clone() },
            ExperimentPlan { seeds: 0, ..ok.clone() },
            ExperimentPlan { seed: None, ..ok.clone() },
            ExperimentPlan {
                bandwidth: BandwidthRule { exponent: 0.1, ..BandwidthRule::default() },
                ..ok.clone()
            },
        ];
        for plan in cases {
            assert!(matches!(plan.validate(), Err(Error::PlanInvalid(_))), "{plan:?}");
        }
        let low = ExperimentPlan { hurst: 0.4, ..ok.clone() };
        assert!(matches!(low.validate(), Err(Error::HurstTooSmall(_))));
        assert!(ExperimentPlan::from_toml("nonsense = 3").is_err());
    }

    #[test]
    fn bandwidth_rule() {
        let r = BandwidthRule::default();
        assert!((r.at(32) - 0.5).abs() < 1e-15);
        let plan = ExperimentPlan {
            bandwidth: BandwidthRule { fixed: Some(0.3), ..r },
            ..ExperimentPlan::default()
        };
        assert_eq!(plan.bandwidth_at(1 << 14), 0.3);
    }
}
