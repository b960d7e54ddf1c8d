use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TksdError};
use crate::geometry::LpNorm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Estimate,
    DimBench,
    PolygonBench,
    Consistency,
    Mixture,
    Regression,
    BoundaryDist,
    Retention,
    EpsilonTable,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Estimate,
        Experiment::DimBench,
        Experiment::PolygonBench,
        Experiment::Consistency,
        Experiment::Mixture,
        Experiment::Regression,
        Experiment::BoundaryDist,
        Experiment::Retention,
        Experiment::EpsilonTable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Estimate => "estimate",
            Experiment::DimBench => "dim-bench",
            Experiment::PolygonBench => "polygon-bench",
            Experiment::Consistency => "consistency",
            Experiment::Mixture => "mixture",
            Experiment::Regression => "regression",
            Experiment::BoundaryDist => "boundary-dist",
            Experiment::Retention => "retention",
            Experiment::EpsilonTable => "epsilon-table",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = TksdError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| TksdError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Tksd,
    TruncsmExact,
    TruncsmApprox,
    BdksdApprox,
    Mle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tksd => "tksd",
            Method::TruncsmExact => "truncsm-exact",
            Method::TruncsmApprox => "truncsm-approx",
            Method::BdksdApprox => "bdksd-approx",
            Method::Mle => "mle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    L1Ball,
    L2Ball,
    Polygon,
}

impl DomainKind {
    pub fn norm(self) -> Option<LpNorm> {
        match self {
            DomainKind::L1Ball => Some(LpNorm::L1),
            DomainKind::L2Ball => Some(LpNorm::L2),
            DomainKind::Polygon => None,
        }
    }
}

/// Flat key-value experiment settings. Absent keys take per-experiment
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub m: Option<usize>,
    pub m_list: Option<Vec<usize>>,
    pub d: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub seeds: usize,
    pub base_seed: u64,
    pub domain: Option<DomainKind>,
    /// Overrides the dimension-dependent ball radius.
    pub radius: Option<f64>,
    pub radius_exp_l1: f64,
    pub radius_exp_l2: f64,
    pub polygon_path: Option<PathBuf>,
    pub mu_star: Option<Vec<f64>>,
    pub sigma_scale: Option<f64>,
    pub mixture_modes: Option<Vec<usize>>,
    /// Variance of the Gaussian perturbation of the mixture starting point.
    pub init_noise: f64,
    pub beta_star: [f64; 2],
    pub truncation: f64,
    pub bias_strength: f64,
    pub methods: Option<Vec<Method>>,
    pub bandwidth: Option<f64>,
    pub jitter: Option<f64>,
    pub alpha: u32,
    pub gamma: f64,
    pub retention_proposals: usize,
    pub eps_m: Vec<u64>,
    pub eps_d: Vec<u32>,
    pub eps_area: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            n: None,
            n_list: None,
            m: None,
            m_list: None,
            d: None,
            dims: None,
            seeds: 64,
            base_seed: 0,
            domain: None,
            radius: None,
            radius_exp_l1: 0.98,
            radius_exp_l2: 0.53,
            polygon_path: None,
            mu_star: None,
            sigma_scale: None,
            mixture_modes: None,
            init_noise: 0.5,
            beta_star: [3.0, 4.0],
            truncation: 5.0,
            bias_strength: 2.0,
            methods: None,
            bandwidth: None,
            jitter: None,
            alpha: 2,
            gamma: 1.0,
            retention_proposals: 20_000,
            eps_m: vec![1, 10, 100, 1_000, 10_000],
            eps_d: vec![2, 5, 10],
            eps_area: None,
            out: None,
            threads: None,
            record_timing: true,
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(TksdError::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self {
            experiment: Some(experiment),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| TksdError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TksdError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment
            .ok_or_else(|| TksdError::Config("no experiment selected".into()))
    }

    pub fn alpha_norm(&self) -> Result<LpNorm> {
        LpNorm::from_order(self.alpha)
            .map_err(|_| TksdError::Config(format!("alpha must be 1 or 2, got {}", self.alpha)))
    }

    /// Checks that hold for every experiment.
    pub fn validate(&self) -> Result<()> {
        let exp = self.experiment()?;
        if self.seeds == 0 {
            return config_err("seeds must be at least 1");
        }
        for &n in self.n.iter().chain(self.n_list.iter().flatten()) {
            if n < 2 {
                return config_err(format!("n must be at least 2, got {n}"));
            }
        }
        for &m in self.m.iter().chain(self.m_list.iter().flatten()) {
            if m == 0 {
                return config_err("m must be at least 1");
            }
        }
        for &d in self.d.iter().chain(self.dims.iter().flatten()) {
            if d == 0 {
                return config_err("d must be at least 1");
            }
        }
        if matches!(&self.n_list, Some(v) if v.is_empty())
            || matches!(&self.m_list, Some(v) if v.is_empty())
            || matches!(&self.dims, Some(v) if v.is_empty())
            || matches!(&self.mixture_modes, Some(v) if v.is_empty())
        {
            return config_err("list settings must not be empty");
        }
        if let Some(methods) = &self.methods {
            if methods.is_empty() {
                return config_err("methods must not be empty");
            }
            if methods.contains(&Method::TruncsmExact)
                && self.domain.is_some_and(|d| d != DomainKind::L2Ball)
            {
                return config_err("truncsm-exact is only available on l2-ball domains");
            }
        }
        if self.threads == Some(0) {
            return config_err("threads must be at least 1");
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return config_err("gamma must be positive");
        }
        self.alpha_norm()?;
        if let Some(s) = self.sigma_scale {
            if !(s > 0.0 && s.is_finite()) {
                return config_err("sigma_scale must be positive");
            }
        }
        if let Some(bw) = self.bandwidth {
            if !(bw > 0.0 && bw.is_finite()) {
                return config_err("bandwidth must be positive");
            }
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return config_err("radius must be positive");
            }
        }
        if exp == Experiment::Retention && self.retention_proposals == 0 {
            return config_err("retention_proposals must be at least 1");
        }
        if exp == Experiment::EpsilonTable && (self.eps_m.is_empty() || self.eps_d.is_empty()) {
            return config_err("eps_m and eps_d must not be empty");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_json() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "dim-bench", "dims": [2, 4], "methods": ["tksd", "truncsm-exact"],
                "seeds": 8, "domain": "l2-ball"}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Some(Experiment::DimBench));
        assert_eq!(cfg.dims, Some(vec![2, 4]));
        assert_eq!(cfg.seeds, 8);
        assert_eq!(cfg.radius_exp_l2, 0.53);
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
        let bad = [
            r#"{"experiment": "estimate", "n": 1}"#,
            r#"{"experiment": "estimate", "seeds": 0}"#,
            r#"{"experiment": "estimate", "methods": []}"#,
            r#"{"experiment": "estimate", "domain": "l1-ball", "methods": ["truncsm-exact"]}"#,
            r#"{"experiment": "estimate", "alpha": 3}"#,
            r#"{"n": 10}"#,
        ];
        for text in bad {
            let err = ExperimentConfig::from_json(text).and_then(|c| c.validate());
            assert!(matches!(err, Err(TksdError::Config(_))), "{text}: {err:?}");
        }
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.as_str().parse::<Experiment>().unwrap(), e);
        }
    }
}
