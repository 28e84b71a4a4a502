use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use hva_core::{build_q_flat_family, gamma_from_affine, EsConvention, MarketSpec, TraderType};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSource {
    /// `gamma_k = c0 - slope * (2k + 1) / 2`
    Affine {
        c0: f64,
        slope: f64,
    },
    Explicit(Vec<f64>),
    QFlat {
        gamma_last: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TraderChoice {
    Bad,
    Nsb,
    Both,
}

impl TraderChoice {
    pub fn traders(self) -> Vec<TraderType> {
        match self {
            TraderChoice::Bad => vec![TraderType::Bad],
            TraderChoice::Nsb => vec![TraderType::NotSoBad],
            TraderChoice::Both => vec![TraderType::Bad, TraderType::NotSoBad],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EsChoice {
    #[default]
    AcerbiTasche,
    TailConditional,
}

impl From<EsChoice> for EsConvention {
    fn from(c: EsChoice) -> Self {
        match c {
            EsChoice::AcerbiTasche => EsConvention::AcerbiTasche,
            EsChoice::TailConditional => EsConvention::TailConditional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitFlags {
    pub tables: bool,
    pub series: bool,
    pub curves: bool,
    pub oracle_check: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        EmitFlags {
            tables: true,
            series: true,
            curves: true,
            oracle_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Ignored for explicit intensities unless it disagrees with their length.
    pub horizon: Option<usize>,
    pub gamma: GammaSource,
    pub nominal: f64,
    pub hurdle_rate: f64,
    pub es_level: f64,
    pub es_convention: EsChoice,
    pub trader: TraderChoice,
    pub out: PathBuf,
    pub emit: EmitFlags,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            horizon: Some(10),
            gamma: GammaSource::Affine {
                c0: 0.15,
                slope: 0.01,
            },
            nominal: MarketSpec::DEFAULT_NOMINAL,
            hurdle_rate: MarketSpec::DEFAULT_HURDLE,
            es_level: MarketSpec::DEFAULT_ES_LEVEL,
            es_convention: EsChoice::default(),
            trader: TraderChoice::Both,
            out: PathBuf::from("out"),
            emit: EmitFlags::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn gamma(&self) -> anyhow::Result<Vec<f64>> {
        let horizon = || {
            self.horizon
                .context("horizon is required unless intensities are explicit")
        };
        Ok(match &self.gamma {
            GammaSource::Affine { c0, slope } => gamma_from_affine(*c0, *slope, horizon()?)?,
            GammaSource::QFlat { gamma_last } => build_q_flat_family(horizon()?, *gamma_last)?,
            GammaSource::Explicit(g) => {
                if let Some(t) = self.horizon {
                    if t != g.len() {
                        bail!(
                            "horizon {t} disagrees with {} explicit intensities",
                            g.len()
                        );
                    }
                }
                g.clone()
            }
        })
    }

    pub fn market_spec(&self) -> anyhow::Result<MarketSpec> {
        Ok(MarketSpec::new(
            self.gamma()?,
            self.nominal,
            self.hurdle_rate,
            self.es_level,
        )?)
    }
}
