//! Experiment configuration. Every field has a default, so `{}` is a valid
//! config file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::GridSpec;
use crate::partition::{BumpProfile, WindowFamily};
use crate::verify::embedding::{CaseId, EmbeddingCase};
use crate::verify::Exponent;

const INF: f64 = f64::INFINITY;

/// A uniform periodic grid, its window radius, the refined grid used for the
/// stability re-run and the last axis used as extension target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldGeometry {
    pub dimension: usize,
    #[serde(rename = "L")]
    pub period: usize,
    #[serde(rename = "N")]
    pub samples: usize,
    pub refined_samples: usize,
    #[serde(rename = "K")]
    pub radius: i64,
    pub extension_period: usize,
    pub extension_samples: usize,
}

impl FieldGeometry {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::uniform(self.dimension, self.period, self.samples)
    }

    pub fn refined_grid(&self) -> Result<GridSpec> {
        GridSpec::uniform(self.dimension, self.period, self.refined_samples)
    }

    pub fn family(&self, bump: BumpProfile) -> Result<WindowFamily> {
        WindowFamily::new(self.dimension, self.radius, bump)
    }

    /// Grid for the extension: the first `n - 1` axes of [`Self::grid`]
    /// followed by the extension axis.
    pub fn extension_grid(&self) -> Result<GridSpec> {
        self.grid()?
            .drop_last_axis()?
            .with_last_axis(self.extension_period, self.extension_samples)
    }

    pub fn label(&self) -> String {
        format!(
            "n={};L={};N={};K={}",
            self.dimension, self.period, self.samples, self.radius
        )
    }
}

/// `(p, q)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: Exponent,
    pub q: Exponent,
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Self {
        Self {
            p: Exponent(p),
            q: Exponent(q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub sequences_per_case: usize,
    pub support_radius: i64,
    pub dimensions: Vec<usize>,
    pub cases: Vec<EmbeddingCase>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let c = |id, s, q, r, e| EmbeddingCase::new(id, s, q, r, e).expect("admissible default");
        use CaseId::*;
        Self {
            sequences_per_case: 1000,
            support_radius: 16,
            dimensions: vec![2, 3],
            cases: vec![
                c(OneI, 0.0, INF, INF, None),
                c(OneI, 0.5, INF, INF, None),
                c(OneI, 2.0, INF, INF, None),
                c(OneII, 0.0, 0.5, 0.5, None),
                c(OneII, 1.0, 1.0, 1.0, None),
                c(OneII, 0.5, 2.0, 2.0, None),
                c(TwoI, 2.5, INF, 0.5, Some(0.1)),
                c(TwoI, 1.2, INF, 1.0, Some(0.1)),
                c(TwoI, 3.0, INF, 1.0, Some(0.5)),
                c(TwoI, 0.6, INF, 2.0, Some(0.05)),
                c(TwoI, 1.05, INF, 1.0, Some(0.2)),
                c(TwoII, 1.0, 2.0, 1.0, Some(0.1)),
                c(TwoII, 2.0, 4.0, 0.5, Some(0.1)),
                c(TwoII, 1.5, 1.0, 0.5, Some(0.3)),
                c(TwoII, 0.3, 3.0, 2.0, Some(0.05)),
                c(TwoII, 0.55, 2.0, 1.0, Some(0.3)),
                c(ThreeI, 0.0, 0.5, INF, None),
                c(ThreeI, 1.0, 1.0, INF, None),
                c(ThreeI, 0.5, 2.0, INF, None),
                c(ThreeII, 0.0, 0.5, 1.0, None),
                c(ThreeII, 1.0, 1.0, 2.0, None),
                c(ThreeII, 0.5, 2.0, 4.0, None),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Fields in the trace-inequality corpus.
    pub corpus_size: usize,
    pub exponents: Vec<Exponents>,
    pub s: Vec<f64>,
    /// `b` values for the hyperplane maximal bound.
    pub margin_b: Vec<f64>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            corpus_size: 100,
            exponents: vec![
                Exponents::new(2.0, 2.0),
                Exponents::new(2.0, 1.0),
                Exponents::new(4.0, 0.5),
                Exponents::new(1.0, 2.0),
            ],
            s: vec![0.0, 1.0],
            margin_b: vec![0.5, 1.5, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetractionConfig {
    pub corpus_size: usize,
    pub exponents: Vec<Exponents>,
    pub s: Vec<f64>,
}

impl Default for RetractionConfig {
    fn default() -> Self {
        Self {
            corpus_size: 16,
            exponents: TraceConfig::default().exponents,
            s: vec![0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalConfig {
    pub p: Exponent,
    pub q: Exponent,
    pub s: f64,
    /// `b = n / min(p, q) + offset`; negative offsets give the exempt
    /// below-threshold runs.
    pub b_offsets: Vec<f64>,
    /// Corpus members that also get the sample-shift supremum.
    pub grid_read_members: usize,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        Self {
            p: Exponent(2.0),
            q: Exponent(2.0),
            s: 0.0,
            b_offsets: vec![0.01, 1.0, -0.5],
            grid_read_members: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriebelConfig {
    pub p: Exponent,
    pub q: Exponent,
    pub r: f64,
}

impl Default for TriebelConfig {
    fn default() -> Self {
        Self {
            p: Exponent(2.0),
            q: Exponent(2.0),
            r: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Fields in the main corpus (reconstruction, band identity, maximal
    /// checks).
    pub corpus_size: usize,
    pub geometries: Vec<FieldGeometry>,
    pub bump: BumpProfile,
    pub embedding: EmbeddingConfig,
    pub trace: TraceConfig,
    pub retraction: RetractionConfig,
    pub maximal: MaximalConfig,
    pub triebel: TriebelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            corpus_size: 50,
            geometries: vec![
                FieldGeometry {
                    dimension: 2,
                    period: 4,
                    samples: 64,
                    refined_samples: 128,
                    radius: 4,
                    extension_period: 16,
                    extension_samples: 256,
                },
                FieldGeometry {
                    dimension: 3,
                    period: 2,
                    samples: 16,
                    refined_samples: 32,
                    radius: 2,
                    extension_period: 8,
                    extension_samples: 128,
                },
            ],
            bump: BumpProfile::default(),
            embedding: EmbeddingConfig::default(),
            trace: TraceConfig::default(),
            retraction: RetractionConfig::default(),
            maximal: MaximalConfig::default(),
            triebel: TriebelConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Validates every geometry and case up front.
    pub fn validate(&self) -> Result<()> {
        BumpProfile::new(
            self.bump.transition_sharpness(),
            self.bump.evaluation_cache_resolution(),
        )?;
        for g in &self.geometries {
            g.grid()?.check_window_compat(&g.family(self.bump)?)?;
            g.refined_grid()?.check_window_compat(&g.family(self.bump)?)?;
        }
        for c in &self.embedding.cases {
            c.validate()?;
        }
        Ok(())
    }
}
