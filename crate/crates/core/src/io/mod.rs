//! Run configuration, the CSV panel format and output digests.

pub mod panel;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::specs::{SpecName, SpecOptions};
use crate::inference::power::PowerConfig;
use crate::irt::FitOptions;
use crate::metric::MetricConfig;
use crate::theory::{ContractMenu, TypeDistribution};
use crate::tva::{TvaOptions, TvaSimConfig};
use crate::world::{EffectSpec, WorldConfig};

pub use panel::{load_panel, row_counts, write_panel};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Simulate,
    ScoreIrt,
    ScoreBn,
    Award,
    Infer,
    Tva,
    Power,
}

pub const STAGES: [Stage; 7] = [
    Stage::Simulate,
    Stage::ScoreIrt,
    Stage::ScoreBn,
    Stage::Award,
    Stage::Infer,
    Stage::Tva,
    Stage::Power,
];

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::ScoreIrt => "score-irt",
            Stage::ScoreBn => "score-bn",
            Stage::Award => "award",
            Stage::Infer => "infer",
            Stage::Tva => "tva",
            Stage::Power => "power",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        STAGES.into_iter().find(|st| st.as_str() == s)
    }

    /// Parse a comma-separated list such as `simulate,score-bn`.
    pub fn parse_list(s: &str) -> Result<Vec<Stage>> {
        let mut out: Vec<Stage> = s
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| Stage::parse(x).ok_or_else(|| Error::Config(format!("unknown stage `{x}`"))))
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AwardsConfig {
    /// Share of each district's teachers who win.
    pub share: f64,
}

impl Default for AwardsConfig {
    fn default() -> Self {
        Self {
            share: crate::awards::DEFAULT_SHARE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub specs: Vec<SpecName>,
    pub options: SpecOptions,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            specs: crate::estimators::specs::ALL_SPECS.to_vec(),
            options: SpecOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    /// Specs whose headline coefficient gets a randomization p-value.
    pub specs: Vec<SpecName>,
    /// Sampled assignments when enumeration is infeasible.
    pub draws: usize,
    pub alpha: f64,
    /// Also invert the test into a confidence interval for the headline effect.
    pub ci: bool,
    /// Half-width of the bracket searched for interval endpoints.
    pub ci_half_width: f64,
    /// Distributional tests on applicant scores.
    pub applicant_tests: bool,
    pub mixed_markets: MixedMarkets,
}

/// How re-assignments of the advertised arm treat MIXED markets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedMarkets {
    /// Arm counts stay fixed but any market may draw the MIXED label.
    #[default]
    ShuffleAll,
    /// MIXED markets keep their label; P4P and FW move among the rest.
    HoldMixed,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            specs: vec![SpecName::PupilLearning, SpecName::TeacherInputs, SpecName::ApplicantScores],
            draws: crate::inference::DEFAULT_DRAWS,
            alpha: 0.05,
            ci: false,
            ci_half_width: 2.0,
            applicant_tests: true,
            mixed_markets: MixedMarkets::ShuffleAll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TvaConfig {
    pub options: TvaOptions,
    /// Shuffles for the rank-correlation null.
    pub shuffles: usize,
    /// When set, the stage scores a stand-alone simulated panel with known
    /// teacher effects instead of the experiment panel.
    pub simulate: Option<TvaSimConfig>,
}

impl Default for TvaConfig {
    fn default() -> Self {
        Self {
            options: TvaOptions::default(),
            shuffles: 200,
            simulate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub stages: Vec<Stage>,
    /// Panel directory to load instead of simulating.
    pub input: Option<PathBuf>,
    pub world: WorldConfig,
    pub effects: EffectSpec,
    pub menu: ContractMenu,
    pub distribution: TypeDistribution,
    pub irt: FitOptions,
    pub metric: MetricConfig,
    pub awards: AwardsConfig,
    pub estimator: EstimatorConfig,
    pub inference: InferenceConfig,
    pub tva: TvaConfig,
    pub power: PowerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            stages: vec![
                Stage::Simulate,
                Stage::ScoreIrt,
                Stage::ScoreBn,
                Stage::Award,
                Stage::Infer,
                Stage::Tva,
            ],
            input: None,
            world: WorldConfig::default(),
            effects: EffectSpec::default(),
            menu: ContractMenu::default(),
            distribution: TypeDistribution::default(),
            irt: FitOptions::default(),
            metric: MetricConfig::default(),
            awards: AwardsConfig::default(),
            estimator: EstimatorConfig::default(),
            inference: InferenceConfig::default(),
            tva: TvaConfig::default(),
            power: PowerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Check every section before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.effects.validate()?;
        self.menu.validate()?;
        self.distribution.validate()?;
        self.irt.validate()?;
        self.metric.validate()?;
        if !(self.awards.share > 0.0 && self.awards.share <= 1.0) {
            return Err(Error::Config("awards.share must lie in (0, 1]".into()));
        }
        let inf = &self.inference;
        if inf.draws == 0 || !(inf.alpha > 0.0 && inf.alpha < 1.0) || !(inf.ci_half_width > 0.0) {
            return Err(Error::Config("inference: need draws > 0, alpha in (0, 1) and ci_half_width > 0".into()));
        }
        if let Some(f) = self.tva.options.theta_var_fallback {
            if !(f >= 0.0) {
                return Err(Error::Config("tva.options.theta_var_fallback must be non-negative".into()));
            }
        }
        if self.stages.contains(&Stage::Power) {
            self.power.validate()?;
        }
        if self.stages.is_empty() {
            return Err(Error::Config("no stages requested".into()));
        }
        Ok(())
    }
}

/// Hex SHA-256 of a byte string.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(digest(&std::fs::read(path)?))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}
